//! Orbit iteration, basin classification, cycle detection and grid labels of
//! basin components.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratmap::{chordal_distance, MapError, RationalMap, SpherePoint};

/// Consecutive non-increasing steps required to call an orbit parabolic.
pub const PARABOLIC_WINDOW: usize = 50;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DynError {
    #[error("invalid trap configuration: {0}")]
    Config(String),
    #[error("point {0} lies outside the mask window")]
    OutsideWindow(Complex64),
    #[error("point {0} is not in the indicated basin (label 0)")]
    Unlabeled(Complex64),
    #[error("orbit is not an attracting cycle: {0:?}")]
    NotCycle(Classification),
    #[error("cycle refinement diverged (residual {residual:e})")]
    Refinement {
        unrefined: Vec<SpherePoint>,
        residual: f64,
    },
    #[error("window or resolution invalid: {0}")]
    Window(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Trap parameters for orbit classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub escape_radius: f64,
    pub max_iter: usize,
    /// Chordal revisit tolerance for attracting cycles.
    pub attracting_eps: f64,
    pub parabolic_point: Option<SpherePoint>,
    pub parabolic_eps: f64,
    /// `f''(p)/2` at the parabolic point: the attracting direction is where
    /// `Re(coefficient * (z - p)) < 0`.
    pub petal_coefficient: Option<Complex64>,
    /// Whether `|z| > escape_radius` counts as the basin of infinity. Only
    /// valid when infinity is a superattracting fixed point.
    pub infinity_trap: bool,
}

impl Default for TrapConfig {
    fn default() -> Self {
        TrapConfig {
            escape_radius: 1e4,
            max_iter: 2000,
            attracting_eps: 1e-8,
            parabolic_point: None,
            parabolic_eps: 1e-4,
            petal_coefficient: None,
            infinity_trap: true,
        }
    }
}

impl TrapConfig {
    /// Trap for a parabolic fixed point `p` with multiplier one. Infinity is
    /// not treated as a trap.
    pub fn parabolic(f: &RationalMap, p: Complex64) -> Result<Self, DynError> {
        let coefficient = f.second_derivative_at(p)? / 2.0;
        Ok(TrapConfig {
            max_iter: 200_000,
            parabolic_point: Some(SpherePoint::Finite(p)),
            petal_coefficient: Some(coefficient),
            infinity_trap: false,
            ..TrapConfig::default()
        })
    }

    pub fn without_infinity_trap(self) -> Self {
        TrapConfig {
            infinity_trap: false,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), DynError> {
        if !(self.escape_radius > 10.0) {
            return Err(DynError::Config(format!(
                "escape radius must exceed 10, got {}",
                self.escape_radius
            )));
        }
        if self.max_iter < 1 {
            return Err(DynError::Config("max_iter must be at least 1".into()));
        }
        for (name, v) in [
            ("attracting_eps", self.attracting_eps),
            ("parabolic_eps", self.parabolic_eps),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(DynError::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    fn parabolic_distance(&self, z: SpherePoint) -> Option<f64> {
        let p = self.parabolic_point?;
        let d = match (p, z) {
            (SpherePoint::Finite(p), SpherePoint::Finite(z)) => (z - p).norm(),
            _ => chordal_distance(p, z),
        };
        if d > self.parabolic_eps {
            return None;
        }
        let inside_petal = match (self.petal_coefficient, p, z) {
            (Some(c), SpherePoint::Finite(p), SpherePoint::Finite(z)) => (c * (z - p)).re < 0.0,
            _ => true,
        };
        inside_petal.then_some(d)
    }
}

/// Coarse class of an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClassKind {
    InfBasin,
    AttrCycle,
    Parabolic,
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    /// Left the escape radius at iterate `n`.
    InfBasin { n: usize },
    AttrCycle {
        period: usize,
        representative: SpherePoint,
        /// Iterate at which the revisit was detected.
        n: usize,
    },
    /// Started a monotone approach inside the parabolic disk at iterate `n`.
    Parabolic { n: usize },
    Unresolved,
}

impl Classification {
    pub fn kind(&self) -> ClassKind {
        match self {
            Classification::InfBasin { .. } => ClassKind::InfBasin,
            Classification::AttrCycle { .. } => ClassKind::AttrCycle,
            Classification::Parabolic { .. } => ClassKind::Parabolic,
            Classification::Unresolved => ClassKind::Unresolved,
        }
    }

    /// Escape index, period, or parabolic entry index.
    pub fn index(&self) -> usize {
        match *self {
            Classification::InfBasin { n } | Classification::Parabolic { n } => n,
            Classification::AttrCycle { period, .. } => period,
            Classification::Unresolved => 0,
        }
    }
}

/// Region whose first visit is recorded in an [`OrbitRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum TrapRegion {
    Disk { center: Complex64, radius: f64 },
    /// `|z| > radius`, including infinity.
    Exterior { radius: f64 },
    /// Real interval with `|Im z| <= 1e-9`.
    Interval { lo: f64, hi: f64 },
}

impl TrapRegion {
    pub fn contains(&self, z: SpherePoint) -> bool {
        match (*self, z) {
            (TrapRegion::Exterior { .. }, SpherePoint::Infinity) => true,
            (_, SpherePoint::Infinity) => false,
            (TrapRegion::Disk { center, radius }, SpherePoint::Finite(w)) => {
                (w - center).norm() < radius
            }
            (TrapRegion::Exterior { radius }, SpherePoint::Finite(w)) => w.norm() > radius,
            (TrapRegion::Interval { lo, hi }, SpherePoint::Finite(w)) => {
                w.im.abs() <= 1e-9 && w.re > lo && w.re < hi
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub points: Vec<SpherePoint>,
    pub classification: Classification,
    pub first_entry: BTreeMap<String, usize>,
}

impl OrbitRecord {
    /// CSV with header `n,re,im,abs`; infinity is written as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,re,im,abs\n");
        for (n, p) in self.points.iter().enumerate() {
            match p {
                SpherePoint::Finite(z) => {
                    let _ = writeln!(out, "{n},{:e},{:e},{:e}", z.re, z.im, z.norm());
                }
                SpherePoint::Infinity => {
                    let _ = writeln!(out, "{n},inf,inf,inf");
                }
            }
        }
        out
    }
}

/// Classification plus the last point reached, for colouring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitOutcome {
    pub classification: Classification,
    pub last: SpherePoint,
}

/// Core loop shared by every classifier. `visit` sees each iterate.
fn run_orbit(
    f: &RationalMap,
    z0: SpherePoint,
    cfg: &TrapConfig,
    mut visit: impl FnMut(usize, SpherePoint),
) -> OrbitOutcome {
    let mut z = z0;
    let (mut saved, mut saved_at, mut power) = (z0, 0usize, 1usize);
    let (mut streak, mut streak_start, mut prev) = (0usize, 0usize, f64::INFINITY);
    let done = |classification, last| OrbitOutcome {
        classification,
        last,
    };
    for n in 0..=cfg.max_iter {
        visit(n, z);
        if cfg.infinity_trap && z.modulus() > cfg.escape_radius {
            return done(Classification::InfBasin { n }, z);
        }
        let near = cfg.parabolic_distance(z);
        match near {
            Some(d) => {
                if streak == 0 || d > prev {
                    streak = 1;
                    streak_start = n;
                } else {
                    streak += 1;
                }
                prev = d;
                if streak > PARABOLIC_WINDOW {
                    return done(Classification::Parabolic { n: streak_start }, z);
                }
            }
            None => streak = 0,
        }
        // Parabolic steps are tiny, so revisits near the parabolic point
        // are not evidence of a cycle.
        if near.is_none() && n > saved_at && chordal_distance(z, saved) <= cfg.attracting_eps {
            let period = minimal_period(f, z, n - saved_at, cfg.attracting_eps);
            return done(
                Classification::AttrCycle {
                    period,
                    representative: z,
                    n,
                },
                z,
            );
        }
        if n - saved_at == power {
            saved = z;
            saved_at = n;
            power *= 2;
        }
        if n == cfg.max_iter {
            break;
        }
        z = match f.eval(z) {
            Ok(v) => v,
            Err(_) => return done(Classification::Unresolved, z),
        };
    }
    done(Classification::Unresolved, z)
}

fn minimal_period(f: &RationalMap, z: SpherePoint, candidate: usize, eps: f64) -> usize {
    let mut orbit = Vec::with_capacity(candidate + 1);
    let mut w = z;
    orbit.push(w);
    for _ in 0..candidate {
        w = match f.eval(w) {
            Ok(v) => v,
            Err(_) => return candidate,
        };
        orbit.push(w);
    }
    (1..=candidate)
        .filter(|p| candidate.is_multiple_of(*p))
        .find(|&p| chordal_distance(orbit[0], orbit[p]) <= eps)
        .unwrap_or(candidate)
}

/// Classification without recording the orbit.
pub fn classify(f: &RationalMap, z0: SpherePoint, cfg: &TrapConfig) -> OrbitOutcome {
    run_orbit(f, z0, cfg, |_, _| {})
}

/// Iterates until escape, an attracting revisit, a parabolic approach, or
/// `max_iter`.
pub fn iterate_classify(f: &RationalMap, z0: SpherePoint, cfg: &TrapConfig) -> OrbitRecord {
    iterate_classify_with_regions(f, z0, cfg, &[])
}

/// As [`iterate_classify`], also recording the first iterate that enters
/// each named region.
pub fn iterate_classify_with_regions(
    f: &RationalMap,
    z0: SpherePoint,
    cfg: &TrapConfig,
    regions: &[(String, TrapRegion)],
) -> OrbitRecord {
    let mut points = Vec::new();
    let mut first_entry = BTreeMap::new();
    let outcome = run_orbit(f, z0, cfg, |n, z| {
        points.push(z);
        for (name, region) in regions {
            if !first_entry.contains_key(name) && region.contains(z) {
                first_entry.insert(name.clone(), n);
            }
        }
    });
    if let Classification::InfBasin { n } = outcome.classification {
        first_entry.entry("escape".into()).or_insert(n);
    }
    if let Classification::Parabolic { n } = outcome.classification {
        first_entry.entry("parabolic".into()).or_insert(n);
    }
    OrbitRecord {
        points,
        classification: outcome.classification,
        first_entry,
    }
}

/// Refined attracting cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleInfo {
    pub period: usize,
    pub cycle: Vec<SpherePoint>,
    pub multiplier: Complex64,
    /// Chordal distance between the refined point and its return.
    pub residual: f64,
}

/// Detects, refines and measures the attracting cycle reached from `z0`.
pub fn detect_cycle(f: &RationalMap, z0: SpherePoint, cfg: &TrapConfig) -> Result<CycleInfo, DynError> {
    let cfg = cfg.without_infinity_trap();
    let outcome = classify(f, z0, &cfg);
    let (period, rep) = match outcome.classification {
        Classification::AttrCycle {
            period,
            representative,
            ..
        } => (period, representative),
        other => return Err(DynError::NotCycle(other)),
    };
    let unrefined = cycle_from(f, rep, period)?;
    // Refine from the point of smallest modulus, in the chart at infinity
    // when the whole cycle sits outside the unit disk.
    let start = unrefined
        .iter()
        .copied()
        .min_by(|a, b| a.modulus().total_cmp(&b.modulus()))
        .expect("period >= 1");
    let (chart, seed, flip) = if start.modulus() <= 1.0 {
        (f.clone(), start, false)
    } else {
        (f.inverted(), start.invert(), true)
    };
    let refined = refine_cycle_point(&chart, seed, period).map_err(|residual| DynError::Refinement {
        unrefined: unrefined.clone(),
        residual,
    })?;
    let refined = if flip { refined.invert() } else { refined };
    let cycle = cycle_from(f, refined, period)?;
    let back = f.eval(*cycle.last().expect("nonempty"))?;
    let residual = chordal_distance(back, cycle[0]);
    let multiplier = cycle
        .iter()
        .try_fold(Complex64::new(1.0, 0.0), |acc, &z| f.derivative_at(z).map(|d| acc * d))?;
    Ok(CycleInfo {
        period,
        cycle,
        multiplier,
        residual,
    })
}

fn cycle_from(f: &RationalMap, z: SpherePoint, period: usize) -> Result<Vec<SpherePoint>, MapError> {
    let mut out = vec![z];
    for _ in 1..period {
        let next = f.eval(*out.last().expect("nonempty"))?;
        out.push(next);
    }
    Ok(out)
}

/// Value and derivative of `f^p` at `z`, chaining chart derivatives.
fn iterate_with_derivative(
    f: &RationalMap,
    z: SpherePoint,
    p: usize,
) -> Result<(SpherePoint, Complex64), MapError> {
    let mut w = z;
    let mut d = Complex64::new(1.0, 0.0);
    for _ in 0..p {
        d *= f.derivative_at(w)?;
        w = f.eval(w)?;
    }
    Ok((w, d))
}

/// Newton on `f^p(z) - z` from a finite seed. Returns the failing residual
/// on divergence.
fn refine_cycle_point(f: &RationalMap, seed: SpherePoint, p: usize) -> Result<SpherePoint, f64> {
    let Some(mut z) = seed.finite() else {
        // The chart choice puts infinity at the origin; reaching here means
        // the cycle is exactly {inf}.
        return Ok(seed);
    };
    let residual_at = |z: Complex64| match f.iterate(SpherePoint::Finite(z), p) {
        Ok(w) => chordal_distance(w, SpherePoint::Finite(z)),
        Err(_) => f64::INFINITY,
    };
    let mut best = residual_at(z);
    for _ in 0..60 {
        if best <= 1e-14 {
            break;
        }
        let Ok((SpherePoint::Finite(w), d)) = iterate_with_derivative(f, SpherePoint::Finite(z), p)
        else {
            break;
        };
        let step = (w - z) / (d - 1.0);
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        let candidate = z - step;
        let r = residual_at(candidate);
        if r < best {
            z = candidate;
            best = r;
        } else {
            break;
        }
    }
    if best <= 1e-10 {
        Ok(SpherePoint::Finite(z))
    } else {
        Err(best)
    }
}

/// Axis-aligned window in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Window {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    /// Square of half-width `half` around `center`.
    pub fn square(center: Complex64, half: f64) -> Self {
        Window::new(center.re - half, center.re + half, center.im - half, center.im + half)
    }

    pub fn validate(&self) -> Result<(), DynError> {
        let ok = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite())
            && self.re_max > self.re_min
            && self.im_max > self.im_min;
        if ok {
            Ok(())
        } else {
            Err(DynError::Window(format!("degenerate window {self:?}")))
        }
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    /// Center of pixel `(i, j)`; row 0 is the top edge.
    pub fn pixel_center(&self, i: usize, j: usize, w: usize, h: usize) -> Complex64 {
        Complex64::new(
            self.re_min + (i as f64 + 0.5) * self.width() / w as f64,
            self.im_max - (j as f64 + 0.5) * self.height() / h as f64,
        )
    }

    /// Pixel containing `z`, if inside.
    pub fn pixel_of(&self, z: Complex64, w: usize, h: usize) -> Option<(usize, usize)> {
        let x = (z.re - self.re_min) / self.width();
        let y = (self.im_max - z.im) / self.height();
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return None;
        }
        let i = ((x * w as f64) as usize).min(w - 1);
        let j = ((y * h as f64) as usize).min(h - 1);
        Some((i, j))
    }
}

/// Grid labels of 4-connected components of a basin indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMask {
    pub window: Window,
    pub width: usize,
    pub height: usize,
    /// Row-major labels, row 0 at the top; 0 means outside the basin.
    pub labels: Vec<u32>,
    pub components: u32,
}

/// Labels 4-connected components of a boolean grid in scan order.
pub fn label_components(indicator: &[bool], width: usize, height: usize) -> (Vec<u32>, u32) {
    let mut labels = vec![0u32; indicator.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..indicator.len() {
        if !indicator[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k % width, k / width);
            let mut push = |n: usize| {
                if indicator[n] && labels[n] == 0 {
                    labels[n] = next;
                    queue.push_back(n);
                }
            };
            if i > 0 {
                push(k - 1);
            }
            if i + 1 < width {
                push(k + 1);
            }
            if j > 0 {
                push(k - width);
            }
            if j + 1 < height {
                push(k + width);
            }
        }
    }
    (labels, next)
}

/// Estimated distance from `z0` to the Julia set of an escaping orbit,
/// `|z_n| log|z_n| / |(f^n)'|` at the escape index `n`. `None` for other
/// classes.
pub fn distance_estimate(f: &RationalMap, z0: SpherePoint, cfg: &TrapConfig) -> Option<f64> {
    let Classification::InfBasin { n } = classify(f, z0, cfg).classification else {
        return None;
    };
    let mut log_deriv = 0.0;
    let mut z = z0;
    for _ in 0..n {
        match f.derivative_at(z) {
            Ok(d) if d.norm() > 0.0 => log_deriv += d.norm().ln(),
            _ => return Some(f64::INFINITY),
        }
        z = f.eval(z).ok()?;
    }
    match z {
        SpherePoint::Infinity => Some(f64::INFINITY),
        SpherePoint::Finite(w) => Some(w.norm() * w.norm().ln() * (-log_deriv).exp()),
    }
}

/// Classifies every pixel center and labels the components of the pixels
/// whose class is `target`. Thin Julia sets are thickened so that distinct
/// Fatou components stay apart: escaping pixels need a distance estimate
/// above half a pixel, parabolic pixels an entry index within one of each
/// 4-neighbour's. Resolution-dependent by nature.
pub fn basin_component_mask(
    f: &RationalMap,
    window: Window,
    res: (usize, usize),
    cfg: &TrapConfig,
    target: ClassKind,
) -> Result<ComponentMask, DynError> {
    window.validate()?;
    cfg.validate()?;
    let (w, h) = res;
    if w < 64 || h < 64 {
        return Err(DynError::Window(format!("resolution {w}x{h} below 64x64")));
    }
    let half_pixel = 0.5 * (window.width() / w as f64).max(window.height() / h as f64);
    let mut classes = vec![Classification::Unresolved; w * h];
    classes.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
        for (i, cell) in row.iter_mut().enumerate() {
            *cell = classify(f, SpherePoint::Finite(window.pixel_center(i, j, w, h)), cfg).classification;
        }
    });
    let mut indicator = vec![false; w * h];
    indicator.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
        for (i, cell) in row.iter_mut().enumerate() {
            let c = classes[j * w + i];
            *cell = c.kind() == target
                && match c {
                    Classification::InfBasin { .. } => {
                        let z = SpherePoint::Finite(window.pixel_center(i, j, w, h));
                        distance_estimate(f, z, cfg).is_some_and(|d| d > half_pixel)
                    }
                    Classification::Parabolic { n } => {
                        let nb = [(0, -1), (0, 1), (-1, 0), (1, 0)];
                        nb.iter().all(|&(di, dj)| {
                            let (x, y) = (i as i64 + di, j as i64 + dj);
                            if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                                return true;
                            }
                            match classes[y as usize * w + x as usize] {
                                Classification::Parabolic { n: m } => n.abs_diff(m) <= 1,
                                _ => false,
                            }
                        })
                    }
                    _ => true,
                };
        }
    });
    let (labels, components) = label_components(&indicator, w, h);
    Ok(ComponentMask {
        window,
        width: w,
        height: h,
        labels,
        components,
    })
}

impl ComponentMask {
    pub fn label_at(&self, z: Complex64) -> Result<u32, DynError> {
        let (i, j) = self
            .window
            .pixel_of(z, self.width, self.height)
            .ok_or(DynError::OutsideWindow(z))?;
        Ok(self.labels[j * self.width + i])
    }

    /// Whether `p` and `q` fall in the same labelled component. This is a
    /// grid heuristic: the answer depends on the resolution.
    pub fn same_component(&self, p: Complex64, q: Complex64) -> Result<bool, DynError> {
        let lp = self.label_at(p)?;
        let lq = self.label_at(q)?;
        if lp == 0 {
            return Err(DynError::Unlabeled(p));
        }
        if lq == 0 {
            return Err(DynError::Unlabeled(q));
        }
        Ok(lp == lq)
    }

    /// Binary PGM (P5); label 0 is black, other labels get distinct grays.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.labels.iter().map(|&l| {
            if l == 0 {
                0
            } else {
                (40 + (l as u64 * 67) % 215) as u8
            }
        }));
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<(), DynError> {
        let io = |e: std::io::Error| DynError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut file = std::fs::File::create(path).map_err(io)?;
        file.write_all(&self.to_pgm()).map_err(io)
    }
}
