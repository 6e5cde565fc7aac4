//! The four carpet conditions and the sufficient hypotheses of the
//! propositions, evaluated for one family instance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    basin_component_mask, iterate_classify, iterate_classify_with_regions, ClassKind, Classification,
    ComponentMask, DynError, OrbitRecord, TrapConfig, TrapRegion, Window,
};
use crate::families::{BasinAnchor, FamilyError, FamilySpec, SchemaReport};
use crate::geometry::{certify_polynomial_like, GeomError, PlmCertificate, RegionSpec};
use crate::ratmap::{chordal_distance, MapError, RationalMap, SpherePoint};

/// Residual tolerance for critical-point root finding.
pub const CRITICAL_TOL: f64 = 1e-8;
/// Chordal distance for an exact revisit when testing post-critical
/// finiteness.
pub const LANDING_TOL: f64 = 1e-9;
/// The previous pair must be this far apart (chordal) for a revisit to
/// count as a landing rather than convergence.
pub const LANDING_JUMP: f64 = 0.2;
/// Orbit length examined for post-critical finiteness.
pub const LANDING_STEPS: usize = 64;
/// Default mask resolution.
pub const DEFAULT_MASK_RES: usize = 512;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CriterionError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Dynamics(#[from] DynError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CondA {
    HypothesisMet {
        via: String,
        k: Option<usize>,
        /// False when the decision rests on a grid mask.
        certified: bool,
        note: String,
    },
    Unknown {
        reason: String,
    },
    Fails {
        via: String,
        evidence: String,
        orbit: Option<OrbitRecord>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CondB {
    HoldsStructural { note: String },
    Fails { reason: String },
    Unknown { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CondC {
    Holds { d_i: Vec<u32>, deg_u: u32 },
    Fails { witness: usize, d: u32, deg_u: u32 },
    Unknown { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalEntry {
    pub point: SpherePoint,
    pub local_degree: usize,
    pub entry_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CondD {
    Holds { entries: Vec<CriticalEntry> },
    Fails { witness: SpherePoint, orbit: OrbitRecord },
    Unknown { reason: String, orbit: Option<OrbitRecord> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Carpet { by: String },
    /// Some condition fails. For the four counter-examples this means
    /// the Julia set is not a carpet; in general it only means the
    /// criterion does not apply.
    NotCarpet { reason: String },
    Inconclusive,
}

/// Which set plays the fixed Fatou component `U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UTrap {
    /// `|z| > radius` lies in the component of infinity.
    Infinity { radius: f64, period: usize },
    Parabolic { point: Complex64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlmSummary {
    pub iterate: usize,
    pub samples: usize,
    pub grid: usize,
    pub domain_margin: f64,
    pub domain_contained: bool,
    pub pullback_margin: f64,
    pub pullback_contained: bool,
    pub degree: i64,
    pub passed: bool,
}

impl From<&PlmCertificate> for PlmSummary {
    fn from(c: &PlmCertificate) -> Self {
        PlmSummary {
            iterate: c.iterate,
            samples: c.samples,
            grid: c.grid,
            domain_margin: c.domain_in_target.min_distance,
            domain_contained: c.domain_in_target.contained,
            pullback_margin: c.pullback_in_target.min_distance,
            pullback_contained: c.pullback_in_target.contained,
            degree: c.degree,
            passed: c.passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub mask_resolution: usize,
    pub mask_window: Option<Window>,
    pub mask_components: Option<u32>,
    /// Certified radius beyond which points lie in `U`.
    pub escape_certificate: Option<f64>,
    /// Disk around the pole mapped beyond the escape certificate.
    pub pole_core: Option<(Complex64, f64)>,
    pub u_trap: Option<UTrap>,
    pub trap: TrapConfig,
    pub critical_tol: f64,
    pub landing_tol: f64,
    pub post_critically_finite: bool,
    pub schema: Option<SchemaReport>,
    pub polynomial_like: Option<PlmSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub family: FamilySpec,
    pub parameters: Vec<(String, Complex64)>,
    pub cond_a: CondA,
    pub cond_b: CondB,
    pub cond_c: CondC,
    pub cond_d: CondD,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub evidence: Evidence,
}

impl CriterionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// `(a, b, c, d)`, each `Some(true)` for holds, `Some(false)` for fails.
    pub fn pattern(&self) -> [Option<bool>; 4] {
        let a = match self.cond_a {
            CondA::HypothesisMet { .. } => Some(true),
            CondA::Fails { .. } => Some(false),
            CondA::Unknown { .. } => None,
        };
        let b = match self.cond_b {
            CondB::HoldsStructural { .. } => Some(true),
            CondB::Fails { .. } => Some(false),
            CondB::Unknown { .. } => None,
        };
        let c = match self.cond_c {
            CondC::Holds { .. } => Some(true),
            CondC::Fails { .. } => Some(false),
            CondC::Unknown { .. } => None,
        };
        let d = match self.cond_d {
            CondD::Holds { .. } => Some(true),
            CondD::Fails { .. } => Some(false),
            CondD::Unknown { .. } => None,
        };
        [a, b, c, d]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionOptions {
    pub mask_res: usize,
    /// Overrides the trap derived from the family.
    pub trap: Option<TrapConfig>,
    /// Attach the polynomial-like certificate where the family has one.
    pub certify: bool,
    pub samples: usize,
    pub grid: usize,
}

impl Default for CriterionOptions {
    fn default() -> Self {
        CriterionOptions {
            mask_res: DEFAULT_MASK_RES,
            trap: None,
            certify: true,
            samples: crate::geometry::DEFAULT_SAMPLES,
            grid: crate::geometry::DEFAULT_GRID,
        }
    }
}

/// Conditions (b) and (c) from the preimage structure of the family.
pub fn check_structural(spec: &FamilySpec) -> (CondB, CondC) {
    let s = spec.structure();
    let cond_b = match &s.anchor {
        BasinAnchor::SuperattractingInfinity => CondB::HoldsStructural {
            note: format!(
                "f(inf) = inf with local degree {}; the only other preimage of inf is the pole of order {}",
                s.deg_u, s.deg_v
            ),
        },
        BasinAnchor::Parabolic { point } => CondB::HoldsStructural {
            note: format!(
                "parabolic basin of {point} has degree {} onto itself; its other preimage component has degree {}",
                s.deg_u, s.deg_v
            ),
        },
        BasinAnchor::NotFixed { reason } => CondB::Fails {
            reason: reason.clone(),
        },
        BasinAnchor::Unknown { reason } => CondB::Unknown {
            reason: reason.clone(),
        },
    };
    let cond_c = match &s.anchor {
        BasinAnchor::Unknown { reason } if s.w_degrees.is_empty() => CondC::Unknown {
            reason: reason.clone(),
        },
        _ if s.w_degrees.is_empty() => CondC::Unknown {
            reason: "no preimage data for W".into(),
        },
        _ => {
            // Co-located zeros add their orders.
            let mut grouped: Vec<(usize, u32)> = Vec::new();
            let mut used = vec![false; s.w_degrees.len()];
            for g in &s.w_groups {
                let d = g.iter().map(|&i| s.w_degrees[i]).sum();
                for &i in g {
                    used[i] = true;
                }
                grouped.push((g[0], d));
            }
            for (i, &d) in s.w_degrees.iter().enumerate() {
                if !used[i] {
                    grouped.push((i, d));
                }
            }
            grouped.sort();
            match grouped.iter().find(|(_, d)| *d <= s.deg_u) {
                Some(&(witness, d)) => CondC::Fails {
                    witness,
                    d,
                    deg_u: s.deg_u,
                },
                None => CondC::Holds {
                    d_i: grouped.iter().map(|g| g.1).collect(),
                    deg_u: s.deg_u,
                },
            }
        }
    };
    (cond_b, cond_c)
}

/// Smallest radius `R` (to within 1%) with `|f(z)| > 2|z|` for all
/// `|z| >= R`. Needs `deg P >= deg Q + 2`. Two lower bounds for `|P|` are
/// tried: the coefficient bound and `|p_n| (|z| - rho)^n` with `rho` the
/// largest root modulus; both make the test monotone in `R`.
pub fn escape_certificate(f: &RationalMap) -> Option<f64> {
    let (p, q) = (f.num(), f.den());
    let (n, m) = (p.degree()?, q.degree_or_zero());
    if n < m + 2 {
        return None;
    }
    let den = |r: f64| -> f64 { (0..=m).map(|k| q.coeff(k).norm() * r.powi(k as i32)).sum() };
    let by_coeffs = |r: f64| {
        let lead = p.leading().norm() * r.powi(n as i32);
        let tail: f64 = (0..n).map(|k| p.coeff(k).norm() * r.powi(k as i32)).sum();
        lead - tail > 2.0 * r * den(r)
    };
    let rho = p
        .roots(1e-10)
        .ok()?
        .iter()
        .map(|r| r.value.norm())
        .fold(0.0, f64::max);
    let rho = rho * (1.0 + 1e-9) + 1e-12;
    let by_roots = |r: f64| r > rho && p.leading().norm() * (r - rho).powi(n as i32) > 2.0 * r * den(r);
    [smallest_radius(by_coeffs), smallest_radius(by_roots)]
        .into_iter()
        .flatten()
        .reduce(f64::min)
}

/// Smallest `R` to within 1% for a predicate that holds from some point on.
fn smallest_radius(holds: impl Fn(f64) -> bool) -> Option<f64> {
    let mut hi = 1.0;
    while !holds(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    if hi == 1.0 {
        // Walk down until it fails.
        let mut lo = 1.0;
        while holds(lo / 2.0) && lo > 1e-12 {
            lo /= 2.0;
        }
        hi = lo;
        if !holds(hi / 2.0) && hi > 1e-12 {
            return Some(refine(hi / 2.0, hi, &holds));
        }
        return Some(hi);
    }
    Some(refine(hi / 2.0, hi, &holds))
}

fn refine(mut lo: f64, mut hi: f64, holds: &impl Fn(f64) -> bool) -> f64 {
    while hi / lo > 1.01 {
        let mid = (lo * hi).sqrt();
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Largest radius (sampled on 512 points per circle) of a disk around
/// `pole` free of other zeros and poles whose boundary maps outside
/// `|w| <= radius_u`; by the minimum-modulus principle the whole disk then
/// maps into `U`.
pub fn pole_core(f: &RationalMap, pole: Complex64, radius_u: f64) -> Option<f64> {
    let mut others: Vec<Complex64> = f.num().roots(1e-8).ok()?.iter().map(|r| r.value).collect();
    others.extend(
        f.den()
            .roots(1e-8)
            .ok()?
            .iter()
            .map(|r| r.value)
            .filter(|v| (v - pole).norm() > 1e-6 * (1.0 + pole.norm())),
    );
    let r_max = 0.5
        * others
            .iter()
            .map(|v| (v - pole).norm())
            .fold(1.0 + pole.norm(), f64::min);
    let holds = |r: f64| {
        (0..512).all(|k| {
            let z = pole + Complex64::from_polar(r, std::f64::consts::TAU * k as f64 / 512.0);
            match f.eval_finite(z) {
                Ok(SpherePoint::Infinity) => true,
                Ok(SpherePoint::Finite(w)) => w.norm() > radius_u,
                Err(_) => false,
            }
        })
    };
    let mut lo = 1e-9 * (1.0 + pole.norm());
    if !holds(lo) {
        return None;
    }
    if holds(r_max) {
        return Some(r_max);
    }
    let mut hi = r_max;
    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0001 {
            break;
        }
    }
    Some(lo)
}

/// The unique distinct finite pole, if there is exactly one.
fn unique_pole(f: &RationalMap) -> Option<Complex64> {
    let roots = f.den().roots(1e-8).ok()?;
    match roots.as_slice() {
        [r] => Some(r.value),
        _ => None,
    }
}

/// Period of infinity when it lies on a superattracting cycle.
fn superattracting_infinity_period(f: &RationalMap) -> Option<usize> {
    let mut z = SpherePoint::Infinity;
    let mut multiplier = Complex64::new(1.0, 0.0);
    for period in 1..=4 {
        multiplier *= f.derivative_at(z).ok()?;
        z = f.eval(z).ok()?;
        if z.is_infinity() {
            return (multiplier.norm() <= 1e-9).then_some(period);
        }
    }
    None
}

/// The trap standing in for `U`.
pub fn u_trap(spec: &FamilySpec, f: &RationalMap) -> Option<UTrap> {
    if let BasinAnchor::Parabolic {
        point: SpherePoint::Finite(p),
    } = spec.structure().anchor
    {
        return Some(UTrap::Parabolic { point: p });
    }
    let period = superattracting_infinity_period(f)?;
    let cert = if period == 1 { escape_certificate(f) } else { None };
    Some(UTrap::Infinity {
        radius: cert.map_or(1e4, |r| r.max(1e4)),
        period,
    })
}

pub fn trap_config(u: &UTrap, f: &RationalMap) -> Result<TrapConfig, DynError> {
    match *u {
        UTrap::Infinity { radius, .. } => Ok(TrapConfig {
            escape_radius: radius,
            ..TrapConfig::default()
        }),
        UTrap::Parabolic { point } => TrapConfig::parabolic(f, point),
    }
}

/// Condition (d): every critical orbit reaches the trap of `U`.
pub fn check_condition_d(f: &RationalMap, cfg: &TrapConfig) -> Result<CondD, CriterionError> {
    let target = if cfg.parabolic_point.is_some() {
        ClassKind::Parabolic
    } else if cfg.infinity_trap {
        ClassKind::InfBasin
    } else {
        return Ok(CondD::Unknown {
            reason: "no trap describes U".into(),
            orbit: None,
        });
    };
    let mut entries = Vec::new();
    for cp in f.critical_points(CRITICAL_TOL)? {
        let rec = iterate_classify(f, cp.location, cfg);
        match rec.classification {
            c if c.kind() == target => entries.push(CriticalEntry {
                point: cp.location,
                local_degree: cp.local_degree,
                entry_index: c.index(),
            }),
            Classification::Unresolved => {
                return Ok(CondD::Unknown {
                    reason: format!("orbit of {} unresolved after {} iterates", cp.location, cfg.max_iter),
                    orbit: Some(rec),
                })
            }
            _ => {
                return Ok(CondD::Fails {
                    witness: cp.location,
                    orbit: rec,
                })
            }
        }
    }
    Ok(CondD::Holds { entries })
}

/// Whether the orbit of `z` lands exactly on a cycle within
/// [`LANDING_STEPS`] iterates.
pub fn orbit_is_finite(f: &RationalMap, z: SpherePoint, infinity_periodic: bool) -> bool {
    let mut orbit = vec![z];
    for _ in 0..LANDING_STEPS {
        let prev = *orbit.last().expect("nonempty");
        let next = match f.eval(prev) {
            Ok(v) => v,
            Err(_) => return false,
        };
        if next.is_infinity() {
            // Through a pole, not by overflow of an escaping orbit.
            return (prev.is_infinity() && orbit.len() == 1 || prev.modulus() <= crate::ratmap::CHART_SWITCH)
                && infinity_periodic;
        }
        orbit.push(next);
        let j = orbit.len() - 1;
        for i in 0..j {
            if chordal_distance(orbit[i], orbit[j]) <= LANDING_TOL
                && (i == 0 || chordal_distance(orbit[i - 1], orbit[j - 1]) > LANDING_JUMP)
            {
                return true;
            }
        }
    }
    false
}

/// Every critical orbit is finite.
pub fn is_post_critically_finite(f: &RationalMap) -> Result<bool, CriterionError> {
    let infinity_periodic = superattracting_infinity_period(f).is_some()
        || f.iterate(SpherePoint::Infinity, 1)?.is_infinity();
    Ok(f
        .critical_points(CRITICAL_TOL)?
        .iter()
        .all(|cp| cp.location.is_infinity() && infinity_periodic || orbit_is_finite(f, cp.location, infinity_periodic)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Membership {
    In,
    NotIn,
    Ambiguous,
}

fn touches_edge(mask: &ComponentMask, label: u32) -> bool {
    let (w, h) = (mask.width, mask.height);
    (0..w).any(|i| mask.labels[i] == label || mask.labels[(h - 1) * w + i] == label)
        || (0..h).any(|j| mask.labels[j * w] == label || mask.labels[j * w + w - 1] == label)
}

/// Membership of `z` in the labelled component `label` from the 3x3 pixel
/// neighbourhood.
fn mask_membership(mask: &ComponentMask, label: u32, z: SpherePoint) -> Membership {
    let touches_edge = touches_edge(mask, label);
    let Some(z) = z.finite() else {
        return if touches_edge {
            Membership::Ambiguous
        } else {
            Membership::NotIn
        };
    };
    let Some((i, j)) = mask.window.pixel_of(z, mask.width, mask.height) else {
        return if touches_edge {
            Membership::Ambiguous
        } else {
            Membership::NotIn
        };
    };
    let (mut hit, mut miss) = (0, 0);
    for dj in -1i64..=1 {
        for di in -1i64..=1 {
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if ni < 0 || nj < 0 || ni >= mask.width as i64 || nj >= mask.height as i64 {
                continue;
            }
            if mask.labels[nj as usize * mask.width + ni as usize] == label {
                hit += 1;
            } else {
                miss += 1;
            }
        }
    }
    match (hit, miss) {
        (_, 0) => Membership::In,
        (0, _) => Membership::NotIn,
        _ => Membership::Ambiguous,
    }
}

/// Window around the finite critical points, their images and the fixed
/// points, padded by 30%, with half-width at least `min_half`.
pub fn julia_window(f: &RationalMap, min_half: f64) -> Window {
    let mut pts: Vec<Complex64> = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    if let Ok(cps) = f.critical_points(CRITICAL_TOL) {
        for cp in cps {
            if let Some(z) = cp.location.finite() {
                pts.push(z);
                if let Ok(SpherePoint::Finite(v)) = f.eval_finite(z) {
                    if v.norm() < 1e3 {
                        pts.push(v);
                    }
                }
            }
        }
    }
    if let Ok(fps) = f.fixed_points(CRITICAL_TOL) {
        pts.extend(fps.iter().filter_map(|p| p.location.finite()));
    }
    let half = pts.iter().map(|p| p.re.abs().max(p.im.abs())).fold(0.0, f64::max) * 1.3;
    Window::square(Complex64::new(0.0, 0.0), half.max(min_half))
}

struct Context<'a> {
    spec: &'a FamilySpec,
    f: &'a RationalMap,
    cfg: TrapConfig,
    mask_res: usize,
}

/// Certified data for a map with superattracting infinity and one pole.
struct PoleData {
    radius_u: f64,
    pole: Complex64,
    core: f64,
}

fn pole_data(f: &RationalMap) -> Option<PoleData> {
    let radius_u = escape_certificate(f)?;
    let pole = unique_pole(f)?;
    let core = pole_core(f, pole, radius_u)?;
    Some(PoleData { radius_u, pole, core })
}

fn regions(d: &PoleData) -> Vec<(String, TrapRegion)> {
    vec![
        (
            "V".into(),
            TrapRegion::Disk {
                center: d.pole,
                radius: d.core,
            },
        ),
        ("U".into(), TrapRegion::Exterior { radius: d.radius_u }),
    ]
}

impl Context<'_> {
    fn escape_mask(&self, f: &RationalMap) -> Result<ComponentMask, DynError> {
        let cfg = TrapConfig {
            escape_radius: self.cfg.escape_radius.max(1e4),
            ..TrapConfig::default()
        };
        basin_component_mask(
            f,
            julia_window(f, 1.5),
            (self.mask_res, self.mask_res),
            &cfg,
            ClassKind::InfBasin,
        )
    }

    /// Free critical point `z` is not in `V` but some iterate `k >= 2` is.
    fn late_visit_v(&self, f: &RationalMap, z: Complex64, via: &str) -> Result<CondA, CriterionError> {
        let Some(d) = pole_data(f) else {
            return Ok(CondA::Unknown {
                reason: "no escape certificate or pole core".into(),
            });
        };
        let cfg = TrapConfig {
            escape_radius: d.radius_u.max(self.cfg.escape_radius),
            ..TrapConfig::default()
        };
        let rec = iterate_classify_with_regions(f, SpherePoint::Finite(z), &cfg, &regions(&d));
        if let Some(&k) = rec.first_entry.get("V") {
            return Ok(match k {
                0 => CondA::Fails {
                    via: via.into(),
                    evidence: "the free critical point lies in V".into(),
                    orbit: Some(rec),
                },
                1 => CondA::Fails {
                    via: via.into(),
                    evidence: "the free critical value lies in V (k = 1; the hypothesis needs k >= 2)".into(),
                    orbit: Some(rec),
                },
                k => CondA::HypothesisMet {
                    via: via.into(),
                    k: Some(k),
                    certified: true,
                    note: "iterate k enters the pole core of V; the earlier iterate outside U certifies z not in V".into(),
                },
            });
        }
        let Classification::InfBasin { n } = rec.classification else {
            return Ok(CondA::Fails {
                via: via.into(),
                evidence: format!("free critical orbit does not escape: {:?}", rec.classification),
                orbit: Some(rec),
            });
        };
        // Escapes without touching the pole core: decide on the grid.
        let mask = self.escape_mask(f)?;
        let v_label = match mask.label_at(d.pole) {
            Ok(l) if l != 0 => l,
            _ => {
                return Ok(CondA::Unknown {
                    reason: "pole pixel is unlabelled".into(),
                })
            }
        };
        let member = |p: SpherePoint| mask_membership(&mask, v_label, p);
        if member(rec.points[0]) != Membership::NotIn {
            return Ok(CondA::Unknown {
                reason: "free critical point not separated from V at this resolution".into(),
            });
        }
        for (k, p) in rec.points.iter().enumerate().take(n + 1).skip(1) {
            match member(*p) {
                Membership::In if k >= 2 => {
                    return Ok(CondA::HypothesisMet {
                        via: via.into(),
                        k: Some(k),
                        certified: false,
                        note: format!("grid membership at {0}x{0}", self.mask_res),
                    })
                }
                Membership::In => {
                    return Ok(CondA::Fails {
                        via: via.into(),
                        evidence: "the free critical value lies in V on the grid (k = 1)".into(),
                        orbit: Some(rec),
                    })
                }
                Membership::Ambiguous => {
                    return Ok(CondA::Unknown {
                        reason: format!("iterate {k} is on a grid boundary"),
                    })
                }
                Membership::NotIn => {}
            }
        }
        Ok(CondA::Unknown {
            reason: "no iterate resolved into V".into(),
        })
    }

    /// Free critical point `z` is not in `U` but some iterate `k >= 1` is.
    fn late_entry_u(&self, z: Complex64, via: &str) -> Result<CondA, CriterionError> {
        let f = self.f;
        let Some(d) = pole_data(f) else {
            return Ok(CondA::Unknown {
                reason: "no escape certificate or pole core".into(),
            });
        };
        let cfg = TrapConfig {
            escape_radius: d.radius_u.max(self.cfg.escape_radius),
            ..TrapConfig::default()
        };
        let rec = iterate_classify_with_regions(f, SpherePoint::Finite(z), &cfg, &regions(&d));
        let Classification::InfBasin { n } = rec.classification else {
            return Ok(CondA::Fails {
                via: via.into(),
                evidence: format!("free critical orbit never reaches U: {:?}", rec.classification),
                orbit: Some(rec),
            });
        };
        let k = rec.first_entry.get("U").copied().unwrap_or(n);
        if k == 0 {
            return Ok(CondA::Fails {
                via: via.into(),
                evidence: "the free critical point lies in the escape certificate region of U".into(),
                orbit: Some(rec),
            });
        }
        if rec.first_entry.contains_key("V") {
            return Ok(CondA::HypothesisMet {
                via: via.into(),
                k: Some(k),
                certified: true,
                note: "the orbit visits the pole core of V, so z is not in the invariant U".into(),
            });
        }
        let mask = self.escape_mask(f)?;
        let corner = Complex64::new(mask.window.re_max, mask.window.im_max) * (1.0 - 1e-9);
        let u_label = mask.label_at(corner).unwrap_or(0);
        if u_label == 0 {
            return Ok(CondA::Unknown {
                reason: "window corner is not in the escape set".into(),
            });
        }
        Ok(match mask_membership(&mask, u_label, rec.points[0]) {
            Membership::NotIn => CondA::HypothesisMet {
                via: via.into(),
                k: Some(k),
                certified: false,
                note: format!("grid membership at {0}x{0}", self.mask_res),
            },
            Membership::In => CondA::Fails {
                via: via.into(),
                evidence: "free critical point lies in U on the grid".into(),
                orbit: Some(rec),
            },
            Membership::Ambiguous => CondA::Unknown {
                reason: "free critical point is on a grid boundary of U".into(),
            },
        })
    }

    /// `z_rho` is not in `W` (the component of the pole) but an iterate is.
    fn late_entry_w(&self, rho: Complex64, z: Complex64, via: &str) -> Result<CondA, CriterionError> {
        let f = self.f;
        let mask_cfg = TrapConfig {
            parabolic_eps: 1e-2,
            max_iter: 20_000,
            ..self.cfg
        };
        // Grow the window until W no longer reaches its edge.
        let mut half = 0.5 * rho.norm().max(2.0);
        let (mask, w_label) = loop {
            let mask = basin_component_mask(
                f,
                Window::square(rho, half),
                (self.mask_res, self.mask_res),
                &mask_cfg,
                ClassKind::Parabolic,
            )?;
            let w_label = match mask.label_at(rho) {
                Ok(l) if l != 0 => l,
                _ => {
                    return Ok(CondA::Unknown {
                        reason: "pole pixel is not in the parabolic basin on the grid".into(),
                    })
                }
            };
            if !touches_edge(&mask, w_label) {
                break (mask, w_label);
            }
            half *= 2.0;
            if half > 64.0 * rho.norm().max(2.0) {
                return Ok(CondA::Unknown {
                    reason: "W reaches the edge of every window tried".into(),
                });
            }
        };
        let rec = iterate_classify(f, SpherePoint::Finite(z), &self.cfg);
        if !matches!(rec.classification, Classification::Parabolic { .. }) {
            return Ok(CondA::Fails {
                via: via.into(),
                evidence: format!("free critical orbit not attracted: {:?}", rec.classification),
                orbit: Some(rec),
            });
        }
        for (k, p) in rec.points.iter().enumerate().take(200) {
            match (k, mask_membership(&mask, w_label, *p)) {
                (0, Membership::In) => {
                    return Ok(CondA::Fails {
                        via: via.into(),
                        evidence: "free critical point lies in W".into(),
                        orbit: Some(rec),
                    })
                }
                (_, Membership::In) => {
                    return Ok(CondA::HypothesisMet {
                        via: via.into(),
                        k: Some(k),
                        certified: false,
                        note: format!("grid membership at {0}x{0}, parabolic mask", self.mask_res),
                    })
                }
                (_, Membership::Ambiguous) => {
                    return Ok(CondA::Unknown {
                        reason: format!("iterate {k} is on a grid boundary of W"),
                    })
                }
                (_, Membership::NotIn) => {}
            }
        }
        Ok(CondA::Fails {
            via: via.into(),
            evidence: "free critical orbit never enters W".into(),
            orbit: Some(rec),
        })
    }

    /// `nu` lies in the preimage component `V` of `U`.
    fn critical_value_in_v(&self, nu: Complex64, via: &str) -> Result<CondA, CriterionError> {
        let Some(d) = pole_data(self.f) else {
            return Ok(CondA::Unknown {
                reason: "no escape certificate or pole core".into(),
            });
        };
        if (nu - d.pole).norm() < d.core {
            return Ok(CondA::HypothesisMet {
                via: via.into(),
                k: Some(0),
                certified: true,
                note: "nu lies in the pole core of V".into(),
            });
        }
        Ok(CondA::Unknown {
            reason: "nu is outside the certified pole core".into(),
        })
    }

    fn proposition(&self) -> Result<Option<CondA>, CriterionError> {
        let spec = self.spec;
        Ok(Some(match spec {
            FamilySpec::F { .. } => {
                let z = spec.free_critical_points()[0];
                self.late_visit_v(self.f, z, "late-visit-to-v")?
            }
            FamilySpec::McMullen { .. } | FamilySpec::F1 { .. } => {
                let big_f = spec.semiconjugate().expect("McMullen instance");
                let g = big_f.build()?;
                let z = big_f.free_critical_points()[0];
                self.late_visit_v(&g, z, "late-visit-to-v-on-semiconjugate")?
            }
            FamilySpec::G { .. } => {
                let z = spec.free_critical_points()[0];
                self.late_entry_u(z, "late-entry-to-u")?
            }
            FamilySpec::GRho { rho } => {
                let z = spec.free_critical_points()[0];
                self.late_entry_w(*rho, z, "late-entry-to-w")?
            }
            FamilySpec::MorosawaPilgrim { nu } => self.critical_value_in_v(*nu, "critical-value-in-v")?,
            _ => return Ok(None),
        }))
    }
}

/// Condition (a) through the sufficient hypotheses of the propositions,
/// falling back to post-critical finiteness.
pub fn check_hypotheses(spec: &FamilySpec, cfg: &TrapConfig, mask_res: usize) -> Result<CondA, CriterionError> {
    let f = spec.build()?;
    let ctx = Context {
        spec,
        f: &f,
        cfg: *cfg,
        mask_res,
    };
    let from_prop = ctx.proposition()?;
    if let Some(CondA::HypothesisMet { .. }) = from_prop {
        return Ok(from_prop.expect("matched"));
    }
    if is_post_critically_finite(&f)? {
        return Ok(CondA::HypothesisMet {
            via: "post-critically-finite".into(),
            k: None,
            certified: true,
            note: "every critical orbit lands exactly on a cycle, so the Julia set is connected".into(),
        });
    }
    Ok(from_prop.unwrap_or(CondA::Unknown {
        reason: "no proposition applies and the map is not post-critically finite".into(),
    }))
}

fn pole_core_evidence(f: &RationalMap) -> (Option<f64>, Option<(Complex64, f64)>) {
    let d = pole_data(f);
    (
        escape_certificate(f),
        d.map(|d| (d.pole, d.core)),
    )
}

/// Full report for one family instance.
pub fn evaluate(spec: &FamilySpec, opts: &CriterionOptions) -> Result<CriterionReport, CriterionError> {
    let f = spec.build()?;
    let (cond_b, mut cond_c) = check_structural(spec);
    let u = u_trap(spec, &f);
    let cfg = match (opts.trap, &u) {
        (Some(t), _) => t,
        (None, Some(u)) => trap_config(u, &f)?,
        (None, None) => TrapConfig::default().without_infinity_trap(),
    };
    let cond_d = check_condition_d(&f, &cfg)?;
    let cond_a = check_hypotheses(spec, &cfg, opts.mask_res)?;
    if let (FamilySpec::MorosawaPilgrim { .. }, CondA::HypothesisMet { via, .. }) = (spec, &cond_a) {
        if via == "critical-value-in-v" {
            // nu in V puts 0, of local degree 3, in a component over V.
            cond_c = CondC::Holds {
                d_i: vec![3],
                deg_u: 2,
            };
        }
    }

    let mask = if matches!(u, Some(UTrap::Infinity { .. })) {
        let window = julia_window(&f, 1.5);
        basin_component_mask(
            &f,
            window,
            (opts.mask_res, opts.mask_res),
            &TrapConfig {
                escape_radius: cfg.escape_radius,
                ..TrapConfig::default()
            },
            ClassKind::InfBasin,
        )
        .ok()
    } else {
        None
    };
    let (escape_cert, core) = pole_core_evidence(&f);
    let polynomial_like = if opts.certify {
        plm_for(spec, opts.samples, opts.grid)
            .ok()
            .flatten()
            .map(|c| PlmSummary::from(&c))
    } else {
        None
    };
    let evidence = Evidence {
        mask_resolution: opts.mask_res,
        mask_window: mask.as_ref().map(|m| m.window),
        mask_components: mask.as_ref().map(|m| m.components),
        escape_certificate: escape_cert,
        pole_core: core,
        u_trap: u,
        trap: cfg,
        critical_tol: CRITICAL_TOL,
        landing_tol: LANDING_TOL,
        post_critically_finite: is_post_critically_finite(&f)?,
        schema: spec.verify_orbit_schema(1e-9).ok(),
        polynomial_like,
    };
    let report = CriterionReport {
        family: spec.clone(),
        parameters: spec
            .parameters()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        verdict: Verdict::Inconclusive,
        cond_a,
        cond_b,
        cond_c,
        cond_d,
        evidence,
    };
    Ok(CriterionReport {
        verdict: verdict(&report),
        ..report
    })
}

fn verdict(r: &CriterionReport) -> Verdict {
    let names = ["(a)", "(b)", "(c)", "(d)"];
    let pattern = r.pattern();
    let failed: Vec<&str> = names
        .iter()
        .zip(pattern)
        .filter(|(_, p)| *p == Some(false))
        .map(|(n, _)| *n)
        .collect();
    if !failed.is_empty() {
        return Verdict::NotCarpet {
            reason: format!("condition {} fails", failed.join(", ")),
        };
    }
    if pattern.iter().all(|p| *p == Some(true)) {
        let via = match &r.cond_a {
            CondA::HypothesisMet { via, .. } => via.clone(),
            _ => unreachable!(),
        };
        return Verdict::Carpet {
            by: format!("carpet criterion, connectivity via {via}"),
        };
    }
    Verdict::Inconclusive
}

/// The polynomial-like certificate attached to a family, if it has one.
pub fn plm_for(spec: &FamilySpec, samples: usize, grid: usize) -> Result<Option<PlmCertificate>, GeomError> {
    let origin = Complex64::new(0.0, 0.0);
    let (iterate, region) = match spec {
        FamilySpec::GRho { .. } => (1, RegionSpec::oval_b()),
        FamilySpec::HAlpha { .. } => (
            2,
            RegionSpec::Disk {
                center: origin,
                radius: 0.1,
            },
        ),
        _ => return Ok(None),
    };
    let f = spec.build().map_err(|e| match e {
        FamilyError::Map(m) => GeomError::Map(m),
        other => GeomError::Region(other.to_string()),
    })?;
    certify_polynomial_like(&f, iterate, &region, origin, samples, grid, 2).map(Some)
}
