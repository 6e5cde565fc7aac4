//! Constructors for every named family, with exponent data, designated
//! points and the critical-orbit schemas used for self-verification.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::Poly;
use crate::ratmap::{chordal_distance, MapError, RationalMap, SpherePoint};

/// Distance (relative to `1 + |e|`) at which a parameter counts as hitting an
/// excluded value `e`.
pub const EXCLUSION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FamilyError {
    #[error("{family}: parameter {param} = {value} hits the excluded value {excluded}")]
    Excluded {
        family: &'static str,
        param: &'static str,
        value: Complex64,
        excluded: Complex64,
    },
    #[error("invalid exponents: {0}")]
    Exponents(String),
    #[error("family config: {0}")]
    Config(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn one() -> Complex64 {
    c(1.0, 0.0)
}

/// Zero `b_i` of multiplicity `d_i` in the general family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedZero {
    pub point: Complex64,
    pub order: u32,
}

/// Every family named by the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilySpec {
    /// `lambda / z^d0 * prod (z - b_i)^d_i` with `sum d_i = d0 + d_inf`.
    ///
    /// `groups` lists indices of zeros asserted to share a Fatou component;
    /// their orders add up in the local-degree comparison.
    GeneralF {
        lambda: Complex64,
        zeros: Vec<MarkedZero>,
        d0: u32,
        d_inf: u32,
        #[serde(default)]
        groups: Vec<Vec<usize>>,
    },
    /// `lambda (z - 1)^(d0 + d_inf) / z^d0`.
    F { lambda: Complex64, d0: u32, d_inf: u32 },
    /// `z^d_inf + mu / z^d0`.
    McMullen { mu: Complex64, d0: u32, d_inf: u32 },
    /// `nu (1 + 4 z^3 / (27 (1 - z)))`.
    MorosawaPilgrim { nu: Complex64 },
    /// `a (z-1)^3 (z-b)^3 / z^4`.
    G { c: Complex64 },
    /// `z^3 + lambda / z^3`; canonical `lambda = 1e-2`.
    F1 { lambda: Complex64 },
    /// `-3 (3z - 4) / (2 z (2z - 3)^2)`.
    F2,
    /// `8 (z-1)^2 (z+8) / (27 z)`.
    F3,
    /// `lambda (z-1)^3 / z`.
    F4 { lambda: Complex64 },
    /// Parabolic family with `g(1) = 1`, `g'(1) = 1`.
    GRho { rho: Complex64 },
    /// Cubic family with the superattracting 2-cycle `{0, inf}`.
    HAlpha { alpha: Complex64 },
}

/// Coefficients `a`, `b` of `G_c`.
pub fn g_coefficients(cp: Complex64) -> (Complex64, Complex64) {
    let a = cp * (cp - 4.0).powu(3) / (27.0 * (cp - 1.0).powu(6));
    let b = cp * (1.0 + 2.0 * cp) / (4.0 - cp);
    (a, b)
}

/// Coefficients `a`, `b` of `g_rho`.
pub fn rho_coefficients(rho: Complex64) -> (Complex64, Complex64) {
    let q = 9.0 - 4.0 * rho + rho * rho;
    let a = -3.0 * (2.0 + rho) / q;
    let b = (1.0 - rho).powu(2) * q / (3.0 - 2.0 * rho);
    (a, b)
}

/// `beta = 3 - 1/alpha`.
pub fn h_beta(alpha: Complex64) -> Complex64 {
    3.0 - alpha.inv()
}

/// One arrow `point --(local_degree)--> image` of a critical-orbit diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitLink {
    pub point: SpherePoint,
    pub local_degree: usize,
    /// `None` when the diagram continues with an unspecified orbit.
    pub image: Option<SpherePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSchema {
    pub chain: Vec<OrbitLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkCheck {
    pub link: OrbitLink,
    pub computed_local_degree: usize,
    pub image_distance: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaReport {
    pub links: Vec<LinkCheck>,
}

impl SchemaReport {
    pub fn all_passed(&self) -> bool {
        self.links.iter().all(|l| l.passed)
    }
}

/// Where the distinguished fixed Fatou component `U` sits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasinAnchor {
    /// Superattracting fixed point at infinity with `f^-1(inf) = {inf, p}`.
    SuperattractingInfinity,
    /// Parabolic basin of the given fixed point.
    Parabolic { point: SpherePoint },
    /// The component containing the anchor is not fixed.
    NotFixed { reason: String },
    /// No known preimage structure.
    Unknown { reason: String },
}

/// Exponent data of the preimage structure `W -> V -> U -> U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    pub anchor: BasinAnchor,
    /// `deg(f|U : U -> U)`.
    pub deg_u: u32,
    /// `deg(f|V : V -> U)`.
    pub deg_v: u32,
    /// Local degrees at the preimages of the marked point of `V`.
    pub w_degrees: Vec<u32>,
    /// Indices into `w_degrees` sharing one Fatou component.
    pub w_groups: Vec<Vec<usize>>,
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::GeneralF { .. } => "general-f",
            FamilySpec::F { .. } => "F",
            FamilySpec::McMullen { .. } => "mcmullen",
            FamilySpec::MorosawaPilgrim { .. } => "morosawa-pilgrim",
            FamilySpec::G { .. } => "G",
            FamilySpec::F1 { .. } => "f1",
            FamilySpec::F2 => "f2",
            FamilySpec::F3 => "f3",
            FamilySpec::F4 { .. } => "f4",
            FamilySpec::GRho { .. } => "g-rho",
            FamilySpec::HAlpha { .. } => "h-alpha",
        }
    }

    /// The canonical `f1`: `d0 = d_inf = 3`, `lambda = 1e-2`.
    pub fn f1() -> Self {
        FamilySpec::F1 { lambda: c(1e-2, 0.0) }
    }

    pub fn g_rho0() -> Self {
        FamilySpec::GRho { rho: c(18.0, 0.0) }
    }

    pub fn g_c0() -> Self {
        FamilySpec::G { c: c(0.0, 2f64.sqrt()) }
    }

    pub fn h_alpha0() -> Self {
        FamilySpec::HAlpha { alpha: c(alpha0(), 0.0) }
    }

    fn check_exclusions(&self) -> Result<(), FamilyError> {
        let family = self.name();
        let check = |param: &'static str, value: Complex64, excluded: &[Complex64]| {
            for &e in excluded {
                if (value - e).norm() <= EXCLUSION_TOL * (1.0 + e.norm()) {
                    return Err(FamilyError::Excluded {
                        family,
                        param,
                        value,
                        excluded: e,
                    });
                }
            }
            Ok(())
        };
        let zero = [c(0.0, 0.0)];
        match self {
            FamilySpec::GeneralF { lambda, .. } | FamilySpec::F { lambda, .. } => {
                check("lambda", *lambda, &zero)
            }
            FamilySpec::F1 { lambda } | FamilySpec::F4 { lambda } => check("lambda", *lambda, &zero),
            FamilySpec::McMullen { mu, .. } => check("mu", *mu, &zero),
            FamilySpec::MorosawaPilgrim { nu } => check("nu", *nu, &zero),
            FamilySpec::G { c: cp } => check(
                "c",
                *cp,
                &[c(0.0, 0.0), one(), c(4.0, 0.0), c(-0.5, 0.0)],
            ),
            FamilySpec::GRho { rho } => check(
                "rho",
                *rho,
                // 2 +- i sqrt 5 are the zeros of 9 - 4 rho + rho^2.
                &[
                    c(0.0, 0.0),
                    one(),
                    c(1.5, 0.0),
                    c(2.0, 5f64.sqrt()),
                    c(2.0, -(5f64.sqrt())),
                ],
            ),
            FamilySpec::HAlpha { alpha } => check(
                "alpha",
                *alpha,
                &[c(0.0, 0.0), c(1.0 / 3.0, 0.0), c(0.5, 0.0)],
            ),
            FamilySpec::F2 | FamilySpec::F3 => Ok(()),
        }
    }

    fn check_exponents(&self) -> Result<(), FamilyError> {
        let (d0, d_inf) = match self {
            FamilySpec::GeneralF { d0, d_inf, .. }
            | FamilySpec::F { d0, d_inf, .. }
            | FamilySpec::McMullen { d0, d_inf, .. } => (*d0, *d_inf),
            _ => return Ok(()),
        };
        if d0 < 1 || d_inf < 2 {
            return Err(FamilyError::Exponents(format!(
                "need d0 >= 1 and d_inf >= 2, got d0 = {d0}, d_inf = {d_inf}"
            )));
        }
        if d0 + d_inf > 12 {
            return Err(FamilyError::Exponents(format!(
                "degree d0 + d_inf = {} exceeds 12",
                d0 + d_inf
            )));
        }
        if let FamilySpec::GeneralF { zeros, groups, .. } = self {
            let total: u32 = zeros.iter().map(|z| z.order).sum();
            if total != d0 + d_inf {
                return Err(FamilyError::Exponents(format!(
                    "sum of zero orders {total} != d0 + d_inf = {}",
                    d0 + d_inf
                )));
            }
            if zeros.iter().any(|z| z.order == 0 || z.point.norm() == 0.0) {
                return Err(FamilyError::Exponents(
                    "zeros must be nonzero points of positive order".into(),
                ));
            }
            for (i, a) in zeros.iter().enumerate() {
                for b in &zeros[i + 1..] {
                    if (a.point - b.point).norm() <= 1e-12 {
                        return Err(FamilyError::Exponents("zeros must be distinct".into()));
                    }
                }
            }
            if groups.iter().flatten().any(|&i| i >= zeros.len()) {
                return Err(FamilyError::Exponents("group index out of range".into()));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), FamilyError> {
        self.check_exclusions()?;
        self.check_exponents()
    }

    /// Numerator and denominator expanded from the closed forms.
    pub fn polynomials(&self) -> Result<(Poly, Poly), FamilyError> {
        self.validate()?;
        let z_minus = |r: f64| Poly::linear_root(c(r, 0.0));
        let mono = |k: u32| Poly::monomial(one(), k as usize);
        let pair = match self {
            FamilySpec::GeneralF {
                lambda, zeros, d0, ..
            } => {
                let num = zeros.iter().fold(Poly::constant(*lambda), |acc, z| {
                    &acc * &Poly::linear_root(z.point).pow(z.order)
                });
                (num, mono(*d0))
            }
            FamilySpec::F { lambda, d0, d_inf } => {
                (z_minus(1.0).pow(d0 + d_inf).scale(*lambda), mono(*d0))
            }
            FamilySpec::McMullen { mu, d0, d_inf } => {
                (&mono(d0 + d_inf) + &Poly::constant(*mu), mono(*d0))
            }
            FamilySpec::MorosawaPilgrim { nu } => (
                Poly::from_real(&[27.0, -27.0, 0.0, 4.0]).scale(*nu),
                Poly::from_real(&[27.0, -27.0]),
            ),
            FamilySpec::G { c: cp } => {
                let (a, b) = g_coefficients(*cp);
                let num = (&z_minus(1.0).pow(3) * &Poly::linear_root(b).pow(3)).scale(a);
                (num, mono(4))
            }
            FamilySpec::F1 { lambda } => (&mono(6) + &Poly::constant(*lambda), mono(3)),
            FamilySpec::F2 => (
                Poly::from_real(&[12.0, -9.0]),
                Poly::from_real(&[0.0, 18.0, -24.0, 8.0]),
            ),
            FamilySpec::F3 => (
                (&z_minus(1.0).pow(2) * &z_minus(-8.0)).scale(c(8.0, 0.0)),
                Poly::from_real(&[0.0, 27.0]),
            ),
            FamilySpec::F4 { lambda } => (z_minus(1.0).pow(3).scale(*lambda), mono(1)),
            FamilySpec::GRho { rho } => {
                let (a, b) = rho_coefficients(*rho);
                let num = Poly::new(vec![-*rho * a, 3.0 * a, c(3.0, 0.0)]).scale(b / 3.0);
                (num, Poly::linear_root(*rho).pow(3))
            }
            FamilySpec::HAlpha { alpha } => {
                let beta = h_beta(*alpha);
                let k = (3.0 * alpha - 1.0) / (alpha * alpha);
                let num = Poly::new(vec![*alpha, -3.0 * alpha, one()]).scale(k);
                (num, &mono(2) * &Poly::linear_root(beta))
            }
        };
        Ok(pair)
    }

    /// Builds the map. Coprimality holds by construction away from the
    /// excluded parameters, so only the degree is checked here; call
    /// [`RationalMap::check_coprime`] for a numerical confirmation.
    pub fn build(&self) -> Result<RationalMap, FamilyError> {
        let (num, den) = self.polynomials()?;
        let f = RationalMap::new_any_degree(num, den)?;
        if f.degree() != self.nominal_degree() {
            return Err(FamilyError::Map(MapError::Degree(f.degree(), self.nominal_degree())));
        }
        Ok(f)
    }

    pub fn nominal_degree(&self) -> usize {
        match self {
            FamilySpec::GeneralF { d0, d_inf, .. }
            | FamilySpec::F { d0, d_inf, .. }
            | FamilySpec::McMullen { d0, d_inf, .. } => (d0 + d_inf) as usize,
            FamilySpec::G { .. } | FamilySpec::F1 { .. } => 6,
            _ => 3,
        }
    }

    /// `(d0, d_inf, d_i)` for the families of the general form.
    pub fn exponents(&self) -> Option<(u32, u32, Vec<u32>)> {
        match self {
            FamilySpec::GeneralF {
                zeros, d0, d_inf, ..
            } => Some((*d0, *d_inf, zeros.iter().map(|z| z.order).collect())),
            FamilySpec::F { d0, d_inf, .. } | FamilySpec::McMullen { d0, d_inf, .. } => {
                Some((*d0, *d_inf, vec![d0 + d_inf]))
            }
            FamilySpec::G { .. } => Some((4, 2, vec![3, 3])),
            FamilySpec::F1 { .. } => Some((3, 3, vec![6])),
            FamilySpec::F3 => Some((1, 2, vec![2, 1])),
            FamilySpec::F4 { .. } => Some((1, 2, vec![3])),
            _ => None,
        }
    }

    /// The parameter `lambda = (-mu)^(d_inf - 1)` of the semi-conjugate
    /// `F_lambda` for McMullen instances.
    pub fn semiconjugate(&self) -> Option<FamilySpec> {
        let (mu, d0, d_inf) = match self {
            FamilySpec::McMullen { mu, d0, d_inf } => (*mu, *d0, *d_inf),
            FamilySpec::F1 { lambda } => (*lambda, 3, 3),
            _ => return None,
        };
        Some(FamilySpec::F {
            lambda: (-mu).powu(d_inf - 1),
            d0,
            d_inf,
        })
    }

    /// Free critical points given by closed formulas.
    pub fn free_critical_points(&self) -> Vec<Complex64> {
        match self {
            FamilySpec::F { d0, d_inf, .. } => vec![c(-(*d0 as f64) / *d_inf as f64, 0.0)],
            FamilySpec::F4 { .. } => vec![c(-0.5, 0.0)],
            FamilySpec::G { c: cp } => vec![2.0 * (1.0 + 2.0 * cp) / (cp - 4.0)],
            FamilySpec::GRho { rho } => {
                let (a, _) = rho_coefficients(*rho);
                vec![-2.0 * rho - 2.0 * a]
            }
            FamilySpec::HAlpha { alpha } => vec![6.0 * alpha - 2.0],
            FamilySpec::McMullen { mu, d0, d_inf } => mcmullen_free_points(*mu, *d0, *d_inf),
            FamilySpec::F1 { lambda } => mcmullen_free_points(*lambda, 3, 3),
            _ => Vec::new(),
        }
    }

    /// The critical-orbit diagram of the family.
    pub fn orbit_schema(&self) -> OrbitSchema {
        let inf = SpherePoint::Infinity;
        let fin = |z: Complex64| SpherePoint::Finite(z);
        let r = |x: f64| SpherePoint::Finite(c(x, 0.0));
        let link = |point, local_degree, image| OrbitLink {
            point,
            local_degree,
            image,
        };
        let chain = match self {
            FamilySpec::GeneralF {
                zeros, d0, d_inf, ..
            } => {
                let mut v: Vec<OrbitLink> = zeros
                    .iter()
                    .map(|z| link(fin(z.point), z.order as usize, Some(r(0.0))))
                    .collect();
                v.push(link(r(0.0), *d0 as usize, Some(inf)));
                v.push(link(inf, *d_inf as usize, Some(inf)));
                v
            }
            FamilySpec::F { d0, d_inf, .. } => vec![
                link(r(1.0), (d0 + d_inf) as usize, Some(r(0.0))),
                link(r(0.0), *d0 as usize, Some(inf)),
                link(inf, *d_inf as usize, Some(inf)),
            ],
            FamilySpec::McMullen { d0, d_inf, .. } => vec![
                link(r(0.0), *d0 as usize, Some(inf)),
                link(inf, *d_inf as usize, Some(inf)),
            ],
            FamilySpec::F1 { .. } => vec![link(r(0.0), 3, Some(inf)), link(inf, 3, Some(inf))],
            FamilySpec::MorosawaPilgrim { nu } => vec![
                link(r(1.5), 2, Some(r(0.0))),
                link(r(0.0), 3, Some(fin(*nu))),
                link(inf, 2, Some(inf)),
            ],
            FamilySpec::G { c: cp } => {
                let (_, b) = g_coefficients(*cp);
                vec![
                    link(fin(b), 3, Some(r(0.0))),
                    link(r(0.0), 4, Some(inf)),
                    link(inf, 2, Some(inf)),
                    link(fin(*cp), 2, Some(r(1.0))),
                    link(r(1.0), 3, Some(r(0.0))),
                ]
            }
            FamilySpec::F2 => vec![
                link(r(1.0), 3, Some(r(1.5))),
                link(r(1.5), 2, Some(inf)),
                link(inf, 2, Some(r(0.0))),
                link(r(0.0), 1, Some(inf)),
            ],
            FamilySpec::F3 => vec![
                link(r(1.0), 2, Some(r(0.0))),
                link(r(0.0), 1, Some(inf)),
                link(inf, 2, Some(inf)),
                link(r(-2.0), 3, Some(r(-8.0))),
                link(r(-8.0), 1, Some(r(0.0))),
            ],
            FamilySpec::F4 { .. } => vec![
                link(r(1.0), 3, Some(r(0.0))),
                link(r(0.0), 1, Some(inf)),
                link(inf, 2, Some(inf)),
                link(r(-0.5), 2, None),
            ],
            FamilySpec::GRho { rho } => vec![
                link(fin(*rho), 3, Some(inf)),
                link(inf, 1, Some(r(0.0))),
                link(r(0.0), 2, None),
                link(fin(self.free_critical_points()[0]), 2, None),
            ],
            FamilySpec::HAlpha { alpha } => {
                let beta = h_beta(*alpha);
                vec![
                    link(r(1.0), 3, Some(fin(beta))),
                    link(fin(beta), 1, Some(inf)),
                    link(inf, 1, Some(r(0.0))),
                    link(r(0.0), 2, Some(inf)),
                    link(fin(6.0 * alpha - 2.0), 2, None),
                ]
            }
        };
        OrbitSchema { chain }
    }

    /// Preimage structure used by the structural conditions of the
    /// criterion.
    pub fn structure(&self) -> Structure {
        let infinity = |deg_u, deg_v, w: Vec<u32>, groups| Structure {
            anchor: BasinAnchor::SuperattractingInfinity,
            deg_u,
            deg_v,
            w_degrees: w,
            w_groups: groups,
        };
        match self {
            FamilySpec::GeneralF {
                zeros,
                d0,
                d_inf,
                groups,
                ..
            } => infinity(*d_inf, *d0, zeros.iter().map(|z| z.order).collect(), groups.clone()),
            FamilySpec::F { d0, d_inf, .. } | FamilySpec::McMullen { d0, d_inf, .. } => {
                infinity(*d_inf, *d0, vec![d0 + d_inf], vec![])
            }
            FamilySpec::F1 { .. } => infinity(3, 3, vec![6], vec![]),
            FamilySpec::G { .. } => infinity(2, 4, vec![3, 3], vec![]),
            FamilySpec::F3 => infinity(2, 1, vec![2, 1], vec![]),
            FamilySpec::F4 { .. } => infinity(2, 1, vec![3], vec![]),
            FamilySpec::F2 => Structure {
                anchor: BasinAnchor::NotFixed {
                    reason: "inf -> 0 -> inf: the component of infinity has period 2".into(),
                },
                deg_u: 2,
                deg_v: 2,
                w_degrees: vec![3],
                w_groups: vec![],
            },
            FamilySpec::GRho { .. } => Structure {
                anchor: BasinAnchor::Parabolic {
                    point: SpherePoint::Finite(one()),
                },
                deg_u: 2,
                deg_v: 1,
                w_degrees: vec![3],
                w_groups: vec![],
            },
            FamilySpec::HAlpha { .. } => Structure {
                anchor: BasinAnchor::Unknown {
                    reason: "no fixed Fatou component: {0, inf} is a superattracting 2-cycle".into(),
                },
                deg_u: 0,
                deg_v: 0,
                w_degrees: vec![],
                w_groups: vec![],
            },
            // W depends on nu: the critical point 0 lies over V only when nu does.
            FamilySpec::MorosawaPilgrim { .. } => Structure {
                anchor: BasinAnchor::SuperattractingInfinity,
                deg_u: 2,
                deg_v: 1,
                w_degrees: vec![],
                w_groups: vec![],
            },
        }
    }

    /// Checks every link of the orbit schema: the point carries the stated
    /// local degree among the computed critical points (or is non-critical
    /// for degree 1), and its image is within `tol` in the chordal metric.
    pub fn verify_orbit_schema(&self, tol: f64) -> Result<SchemaReport, FamilyError> {
        let f = self.build()?;
        let crit = f.critical_points(1e-8)?;
        let links = self
            .orbit_schema()
            .chain
            .into_iter()
            .map(|link| {
                let computed_local_degree = crit
                    .iter()
                    .find(|cp| chordal_distance(cp.location, link.point) <= tol.max(1e-6))
                    .map_or(1, |cp| cp.local_degree);
                let image_distance = link.image.map(|img| match f.eval(link.point) {
                    Ok(v) => chordal_distance(v, img),
                    Err(_) => f64::INFINITY,
                });
                let passed = computed_local_degree == link.local_degree
                    && image_distance.is_none_or(|d| d <= tol);
                LinkCheck {
                    link,
                    computed_local_degree,
                    image_distance,
                    passed,
                }
            })
            .collect();
        Ok(SchemaReport { links })
    }

    /// Echo of the numeric parameters, for reports.
    pub fn parameters(&self) -> Vec<(&'static str, Complex64)> {
        match self {
            FamilySpec::GeneralF { lambda, .. }
            | FamilySpec::F { lambda, .. }
            | FamilySpec::F1 { lambda }
            | FamilySpec::F4 { lambda } => vec![("lambda", *lambda)],
            FamilySpec::McMullen { mu, .. } => vec![("mu", *mu)],
            FamilySpec::MorosawaPilgrim { nu } => vec![("nu", *nu)],
            FamilySpec::G { c: cp } => {
                let (a, b) = g_coefficients(*cp);
                vec![("c", *cp), ("a", a), ("b", b)]
            }
            FamilySpec::GRho { rho } => {
                let (a, b) = rho_coefficients(*rho);
                vec![("rho", *rho), ("a", a), ("b", b)]
            }
            FamilySpec::HAlpha { alpha } => vec![("alpha", *alpha), ("beta", h_beta(*alpha))],
            FamilySpec::F2 | FamilySpec::F3 => vec![],
        }
    }

    /// Replaces the single free parameter (used by the parameter solver and
    /// the parameter-plane scan).
    pub fn with_parameter(&self, p: Complex64) -> Option<FamilySpec> {
        let mut out = self.clone();
        match &mut out {
            FamilySpec::GeneralF { lambda, .. }
            | FamilySpec::F { lambda, .. }
            | FamilySpec::F1 { lambda }
            | FamilySpec::F4 { lambda } => *lambda = p,
            FamilySpec::McMullen { mu, .. } => *mu = p,
            FamilySpec::MorosawaPilgrim { nu } => *nu = p,
            FamilySpec::G { c: cp } => *cp = p,
            FamilySpec::GRho { rho } => *rho = p,
            FamilySpec::HAlpha { alpha } => *alpha = p,
            FamilySpec::F2 | FamilySpec::F3 => return None,
        }
        Some(out)
    }

    /// The free parameter, if any.
    pub fn parameter(&self) -> Option<Complex64> {
        match self {
            FamilySpec::F2 | FamilySpec::F3 => None,
            _ => self.parameters().first().map(|p| p.1),
        }
    }
}

fn mcmullen_free_points(mu: Complex64, d0: u32, d_inf: u32) -> Vec<Complex64> {
    let n = d0 + d_inf;
    let base = (mu * (d0 as f64 / d_inf as f64)).powf(1.0 / n as f64);
    (1..=n)
        .map(|j| base * Complex64::from_polar(1.0, TAU * j as f64 / n as f64))
        .collect()
}

/// `alpha_0 = (1 - sqrt 33) / 12`.
pub fn alpha0() -> f64 {
    (1.0 - 33f64.sqrt()) / 12.0
}

/// Max chordal residual of `phi o g_mu = F_lambda o phi` with
/// `phi(z) = -z^(d0 + d_inf) / mu` and `lambda = (-mu)^(d_inf - 1)`, over
/// `samples` deterministic points of the annulus `0.2 <= |z| <= 5`.
pub fn semiconjugacy_residual(
    mu: Complex64,
    d0: u32,
    d_inf: u32,
    samples: usize,
) -> Result<f64, FamilyError> {
    let g = FamilySpec::McMullen { mu, d0, d_inf }.build()?;
    let big_f = FamilySpec::McMullen { mu, d0, d_inf }
        .semiconjugate()
        .expect("McMullen has a semiconjugate")
        .build()?;
    let n = (d0 + d_inf) as i32;
    let phi = |z: SpherePoint| match z {
        SpherePoint::Infinity => SpherePoint::Infinity,
        SpherePoint::Finite(w) => SpherePoint::from_complex(-w.powi(n) / mu),
    };
    // Golden-ratio low-discrepancy points in (log r, theta).
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (lo, hi) = (0.2f64.ln(), 5f64.ln());
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    let mut k = 0usize;
    while taken < samples {
        k += 1;
        let t = (k as f64 * golden).fract();
        let s = (k as f64 * golden * golden + 0.31).fract();
        let z = SpherePoint::Finite(Complex64::from_polar((lo + t * (hi - lo)).exp(), TAU * s));
        let lhs = g.eval(z).map(phi);
        let rhs = big_f.eval(phi(z));
        // A sample on a pole is skipped and replaced by the next point.
        if let (Ok(l), Ok(r)) = (lhs, rhs) {
            worst = worst.max(chordal_distance(l, r));
            taken += 1;
        }
        if k > 100 * samples.max(1) {
            break;
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// key = value configuration

fn fmt_complex(z: Complex64) -> String {
    format!("{:e},{:e}", z.re, z.im)
}

fn parse_pair(s: &str) -> Result<Complex64, FamilyError> {
    let mut it = s.split(',').map(str::trim);
    let (re, im) = (it.next(), it.next());
    let bad = || FamilyError::Config(format!("expected `re,im`, got `{s}`"));
    let re: f64 = re.ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let im: f64 = match im {
        Some(v) => v.parse().map_err(|_| bad())?,
        None => 0.0,
    };
    if it.next().is_some() {
        return Err(bad());
    }
    Ok(c(re, im))
}

impl FamilySpec {
    /// Plain-text `key = value` form; complex values are `re,im` pairs.
    pub fn to_config(&self) -> String {
        let mut lines = vec![format!("family = {}", self.name())];
        match self {
            FamilySpec::GeneralF {
                lambda,
                zeros,
                d0,
                d_inf,
                groups,
            } => {
                lines.push(format!("lambda = {}", fmt_complex(*lambda)));
                lines.push(format!("d0 = {d0}"));
                lines.push(format!("d_inf = {d_inf}"));
                let zs: Vec<String> = zeros
                    .iter()
                    .map(|z| format!("{}:{}", fmt_complex(z.point), z.order))
                    .collect();
                lines.push(format!("zeros = {}", zs.join(";")));
                if !groups.is_empty() {
                    let gs: Vec<String> = groups
                        .iter()
                        .map(|g| g.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("+"))
                        .collect();
                    lines.push(format!("groups = {}", gs.join(";")));
                }
            }
            FamilySpec::F { lambda, d0, d_inf } => {
                lines.push(format!("lambda = {}", fmt_complex(*lambda)));
                lines.push(format!("d0 = {d0}"));
                lines.push(format!("d_inf = {d_inf}"));
            }
            FamilySpec::McMullen { mu, d0, d_inf } => {
                lines.push(format!("mu = {}", fmt_complex(*mu)));
                lines.push(format!("d0 = {d0}"));
                lines.push(format!("d_inf = {d_inf}"));
            }
            FamilySpec::MorosawaPilgrim { nu } => lines.push(format!("nu = {}", fmt_complex(*nu))),
            FamilySpec::G { c: cp } => lines.push(format!("c = {}", fmt_complex(*cp))),
            FamilySpec::F1 { lambda } | FamilySpec::F4 { lambda } => {
                lines.push(format!("lambda = {}", fmt_complex(*lambda)))
            }
            FamilySpec::GRho { rho } => lines.push(format!("rho = {}", fmt_complex(*rho))),
            FamilySpec::HAlpha { alpha } => lines.push(format!("alpha = {}", fmt_complex(*alpha))),
            FamilySpec::F2 | FamilySpec::F3 => {}
        }
        lines.join("\n") + "\n"
    }

    pub fn from_config(text: &str) -> Result<Self, FamilyError> {
        let mut kv: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                FamilyError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let k = k.trim().to_string();
            if kv.iter().any(|(seen, _)| *seen == k) {
                return Err(FamilyError::Config(format!("duplicate key `{k}`")));
            }
            kv.push((k, v.trim().to_string()));
        }
        let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let need = |key: &str| {
            get(key).ok_or_else(|| FamilyError::Config(format!("missing key `{key}`")))
        };
        let cplx = |key: &str| need(key).and_then(parse_pair);
        let int = |key: &str| {
            need(key).and_then(|v| {
                v.parse::<u32>()
                    .map_err(|_| FamilyError::Config(format!("`{key}` must be a non-negative integer")))
            })
        };
        let family = need("family")?;
        let (spec, allowed): (FamilySpec, &[&str]) = match family {
            "general-f" => {
                let zeros = need("zeros")?
                    .split(';')
                    .map(|item| {
                        let (p, o) = item.split_once(':').ok_or_else(|| {
                            FamilyError::Config(format!("zero `{item}` must be `re,im:order`"))
                        })?;
                        let order = o.trim().parse::<u32>().map_err(|_| {
                            FamilyError::Config(format!("bad zero order in `{item}`"))
                        })?;
                        Ok(MarkedZero {
                            point: parse_pair(p)?,
                            order,
                        })
                    })
                    .collect::<Result<Vec<_>, FamilyError>>()?;
                let groups = match get("groups") {
                    None => vec![],
                    Some(g) => g
                        .split(';')
                        .map(|grp| {
                            grp.split('+')
                                .map(|i| {
                                    i.trim().parse::<usize>().map_err(|_| {
                                        FamilyError::Config(format!("bad group `{grp}`"))
                                    })
                                })
                                .collect::<Result<Vec<_>, _>>()
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                };
                (
                    FamilySpec::GeneralF {
                        lambda: cplx("lambda")?,
                        zeros,
                        d0: int("d0")?,
                        d_inf: int("d_inf")?,
                        groups,
                    },
                    &["family", "lambda", "zeros", "d0", "d_inf", "groups"],
                )
            }
            "F" => (
                FamilySpec::F {
                    lambda: cplx("lambda")?,
                    d0: int("d0")?,
                    d_inf: int("d_inf")?,
                },
                &["family", "lambda", "d0", "d_inf"],
            ),
            "mcmullen" => (
                FamilySpec::McMullen {
                    mu: cplx("mu")?,
                    d0: int("d0")?,
                    d_inf: int("d_inf")?,
                },
                &["family", "mu", "d0", "d_inf"],
            ),
            "morosawa-pilgrim" => (
                FamilySpec::MorosawaPilgrim { nu: cplx("nu")? },
                &["family", "nu"],
            ),
            "G" => (FamilySpec::G { c: cplx("c")? }, &["family", "c"]),
            "f1" => (
                FamilySpec::F1 {
                    lambda: get("lambda").map_or(Ok(c(1e-2, 0.0)), parse_pair)?,
                },
                &["family", "lambda"],
            ),
            "f2" => (FamilySpec::F2, &["family"]),
            "f3" => (FamilySpec::F3, &["family"]),
            "f4" => (
                FamilySpec::F4 {
                    lambda: cplx("lambda")?,
                },
                &["family", "lambda"],
            ),
            "g-rho" => (FamilySpec::GRho { rho: cplx("rho")? }, &["family", "rho"]),
            "h-alpha" => (
                FamilySpec::HAlpha {
                    alpha: cplx("alpha")?,
                },
                &["family", "alpha"],
            ),
            other => return Err(FamilyError::Config(format!("unknown family `{other}`"))),
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(FamilyError::Config(format!("unknown key `{k}` for family {family}")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_config())
    }
}

impl FromStr for FamilySpec {
    type Err = FamilyError;
    fn from_str(s: &str) -> Result<Self, FamilyError> {
        Self::from_config(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_rho0_matches_closed_form() {
        let f = FamilySpec::g_rho0().build().unwrap();
        // -289 (87 z^2 - 20 z + 120) / (11 (z - 18)^3)
        let z = c(0.3, -0.7);
        let expect = -289.0 * (87.0 * z * z - 20.0 * z + 120.0) / (11.0 * (z - 18.0).powu(3));
        let got = f.eval_finite(z).unwrap().finite().unwrap();
        assert!((got - expect).norm() <= 1e-12 * expect.norm());
    }

    #[test]
    fn mcmullen_reproduces_f1() {
        let mc = FamilySpec::McMullen {
            mu: c(1e-2, 0.0),
            d0: 3,
            d_inf: 3,
        }
        .build()
        .unwrap();
        let f1 = FamilySpec::f1().build().unwrap();
        assert_eq!(mc, f1);
    }

    #[test]
    fn g_c0_kills_one_and_b() {
        let spec = FamilySpec::g_c0();
        let f = spec.build().unwrap();
        let (_, b) = g_coefficients(c(0.0, 2f64.sqrt()));
        assert!(f.eval_finite(one()).unwrap().modulus() < 1e-15);
        assert!(f.eval_finite(b).unwrap().modulus() < 1e-12);
    }

    #[test]
    fn exclusions_are_domain_errors() {
        for spec in [
            FamilySpec::G { c: c(1.0, 0.0) },
            FamilySpec::G { c: c(-0.5, 0.0) },
            FamilySpec::GRho { rho: c(1.5, 0.0) },
            FamilySpec::HAlpha {
                alpha: c(1.0 / 3.0, 0.0),
            },
            FamilySpec::F4 { lambda: c(0.0, 0.0) },
        ] {
            assert!(matches!(spec.build(), Err(FamilyError::Excluded { .. })), "{spec:?}");
        }
    }

    #[test]
    fn general_f_exponent_identity_enforced() {
        let bad = FamilySpec::GeneralF {
            lambda: one(),
            zeros: vec![MarkedZero {
                point: one(),
                order: 4,
            }],
            d0: 1,
            d_inf: 2,
            groups: vec![],
        };
        assert!(matches!(bad.build(), Err(FamilyError::Exponents(_))));
    }

    #[test]
    fn schemas_pass_for_named_instances() {
        for spec in [
            FamilySpec::g_c0(),
            FamilySpec::h_alpha0(),
            FamilySpec::g_rho0(),
            FamilySpec::MorosawaPilgrim { nu: one() },
            FamilySpec::F2,
            FamilySpec::F3,
            FamilySpec::F4 { lambda: c(0.3, 0.0) },
            FamilySpec::F {
                lambda: c(0.2, 0.1),
                d0: 1,
                d_inf: 2,
            },
            FamilySpec::f1(),
        ] {
            let report = spec.verify_orbit_schema(1e-9).unwrap();
            assert!(report.all_passed(), "{}: {:#?}", spec.name(), report);
        }
    }

    #[test]
    fn config_round_trip_and_rejections() {
        let spec = FamilySpec::GeneralF {
            lambda: c(0.5, -0.25),
            zeros: vec![
                MarkedZero { point: one(), order: 3 },
                MarkedZero { point: c(-2.0, 1.0), order: 3 },
            ],
            d0: 4,
            d_inf: 2,
            groups: vec![vec![0, 1]],
        };
        assert_eq!(spec.to_config().parse::<FamilySpec>().unwrap(), spec);
        assert!(FamilySpec::from_config("family = G\nc = 1,0\n").is_err());
        assert!(FamilySpec::from_config("family = G\nc = 0,1\nrho = 2\n").is_err());
        assert!(FamilySpec::from_config("family = nope\n").is_err());
        assert_eq!(
            FamilySpec::from_config("# canonical\nfamily = f1\n").unwrap(),
            FamilySpec::f1()
        );
    }

    #[test]
    fn semiconjugacy_small_cases() {
        assert!(semiconjugacy_residual(one(), 1, 2, 100).unwrap() <= 1e-9);
        assert!(semiconjugacy_residual(c(0.3, 0.4), 2, 3, 100).unwrap() <= 1e-9);
    }
}
