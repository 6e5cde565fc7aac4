//! Sampled closed curves: winding numbers, containment with margin,
//! disjointness, proper-map degree, pullback boundaries and interval
//! monotonicity.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{label_components, Window};
use crate::ratmap::{MapError, RationalMap, SpherePoint};

/// Default boundary sampling for verification runs.
pub const DEFAULT_SAMPLES: usize = 4096;
/// Default raster resolution for boundary extraction.
pub const DEFAULT_GRID: usize = 1024;
/// Minimum sample count for a boundary.
pub const MIN_SAMPLES: usize = 256;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    #[error("need at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid region: {0}")]
    Region(String),
    #[error("sample {index} at {point} maps to a pole")]
    PoleProximity { index: usize, point: Complex64 },
    #[error("point {point} is within {distance:e} of the curve")]
    OnCurve { point: Complex64, distance: f64 },
    #[error("winding sum {raw} is {residue:.3} away from an integer")]
    Precision { raw: f64, residue: f64 },
    #[error("test points disagree on the degree: {0:?}")]
    Inconsistent(Vec<i64>),
    #[error("component of {0} touches the window edge")]
    WindowTooSmall(Complex64),
    #[error("seed {0} is not inside the target")]
    BadSeed(Complex64),
    #[error("f is not real at {point} (imaginary part {imag:e})")]
    NotReal { point: f64, imag: f64 },
    #[error("region contains a pole at {0}")]
    PoleInside(Complex64),
    #[error("curve is not a Jordan polyline: {0}")]
    NotJordan(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Ccw,
    Cw,
}

/// Closed polyline; the last point connects back to the first.
///
/// Boundaries produced by [`sample_boundary`] and the contour extractors are
/// simple. Images under [`map_curve`] are in general not, so simplicity is
/// only checked on request by [`JordanCurveSamples::check_jordan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanCurveSamples {
    pub points: Vec<Complex64>,
    pub orientation: Orientation,
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a).re * ab.re + (p - a).im * ab.im) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn segments_cross(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

impl JordanCurveSamples {
    pub fn new(points: Vec<Complex64>) -> Self {
        let orientation = if signed_area(&points) >= 0.0 {
            Orientation::Ccw
        } else {
            Orientation::Cw
        };
        JordanCurveSamples {
            points,
            orientation,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn segments(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        let n = self.points.len();
        (0..n).map(move |k| (self.points[k], self.points[(k + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    /// Reversed if clockwise.
    pub fn into_ccw(mut self) -> Self {
        if self.signed_area() < 0.0 {
            self.points.reverse();
        }
        self.orientation = Orientation::Ccw;
        self
    }

    pub fn bounding_window(&self) -> Window {
        let mut w = Window::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            w.re_min = w.re_min.min(p.re);
            w.re_max = w.re_max.max(p.re);
            w.im_min = w.im_min.min(p.im);
            w.im_max = w.im_max.max(p.im);
        }
        w
    }

    /// Bounding-box diagonal, an upper bound for the diameter.
    pub fn diameter(&self) -> f64 {
        let w = self.bounding_window();
        w.width().hypot(w.height())
    }

    pub fn perimeter(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn max_gap(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).fold(0.0, f64::max)
    }

    /// Minimum distance from `p` to the polyline.
    pub fn distance_to(&self, p: Complex64) -> f64 {
        self.segments()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks sample count, gap uniformity (no gap over twice the mean) and
    /// absence of crossings between non-adjacent segments. Quadratic time.
    pub fn check_jordan(&self) -> Result<(), GeomError> {
        let n = self.len();
        if n < MIN_SAMPLES {
            return Err(GeomError::TooFewSamples(n));
        }
        let bound = 2.0 * self.perimeter() / n as f64;
        if self.max_gap() > bound * (1.0 + 1e-12) {
            return Err(GeomError::NotJordan(format!(
                "gap {} exceeds {bound}",
                self.max_gap()
            )));
        }
        let segs: Vec<_> = self.segments().collect();
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = segs[i];
                let (c, d) = segs[j];
                if segments_cross(a, b, c, d) {
                    return Err(GeomError::NotJordan(format!("segments {i} and {j} cross")));
                }
            }
        }
        Ok(())
    }

    /// `re,im` per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im\n");
        for p in &self.points {
            let _ = writeln!(out, "{:e},{:e}", p.re, p.im);
        }
        out
    }
}

fn signed_area(points: &[Complex64]) -> f64 {
    let n = points.len();
    0.5 * (0..n)
        .map(|k| cross(points[k], points[(k + 1) % n]))
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    Disk { center: Complex64, radius: f64 },
    Ellipse { center: Complex64, semi_axes: (f64, f64) },
    Polygon { vertices: Vec<Complex64> },
}

impl RegionSpec {
    /// `((x - cx)/a)^2 + ((y - cy)/b)^2 < 1`, the oval used for `g_rho0`.
    pub fn oval_b() -> Self {
        RegionSpec::Ellipse {
            center: Complex64::new(-1.5, 0.0),
            semi_axes: (4.5, 5.4),
        }
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        match self {
            RegionSpec::Disk { radius, .. } if !(*radius > 0.0) => {
                Err(GeomError::Region(format!("radius {radius} is not positive")))
            }
            RegionSpec::Ellipse { semi_axes: (a, b), .. } if !(*a > 0.0 && *b > 0.0) => {
                Err(GeomError::Region(format!("semi-axes ({a}, {b}) not positive")))
            }
            RegionSpec::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(GeomError::Region("polygon needs 3 vertices".into()));
                }
                let n = vertices.len();
                for i in 0..n {
                    for j in i + 2..n {
                        if i == 0 && j == n - 1 {
                            continue;
                        }
                        if segments_cross(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]) {
                            return Err(GeomError::Region("polygon is not simple".into()));
                        }
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Membership of the closed region.
    pub fn contains_closed(&self, z: Complex64) -> bool {
        match self {
            RegionSpec::Disk { center, radius } => (z - center).norm() <= *radius,
            RegionSpec::Ellipse {
                center,
                semi_axes: (a, b),
            } => {
                let w = z - center;
                (w.re / a).powi(2) + (w.im / b).powi(2) <= 1.0
            }
            RegionSpec::Polygon { vertices } => {
                let c = JordanCurveSamples::new(vertices.clone());
                crossing_winding(&c, z) != 0 || c.distance_to(z) == 0.0
            }
        }
    }

    /// Distance from `z` to the closed region (0 inside).
    pub fn distance(&self, z: SpherePoint, boundary: &JordanCurveSamples) -> f64 {
        match z {
            SpherePoint::Infinity => f64::INFINITY,
            SpherePoint::Finite(z) => {
                if self.contains_closed(z) {
                    0.0
                } else if let RegionSpec::Disk { center, radius } = self {
                    (z - center).norm() - radius
                } else {
                    boundary.distance_to(z)
                }
            }
        }
    }

    /// Interior grid of roughly `n` points (plus the boundary is sampled
    /// separately).
    pub fn interior_grid(&self, n: usize) -> Vec<Complex64> {
        let boundary = match sample_boundary(self, MIN_SAMPLES.max(64)) {
            Ok(b) => b,
            Err(_) => return vec![],
        };
        let w = boundary.bounding_window();
        let side = (n as f64).sqrt().ceil().max(2.0) as usize;
        let mut out = Vec::new();
        for j in 0..side {
            for i in 0..side {
                let z = w.pixel_center(i, j, side, side);
                if self.contains_closed(z) {
                    out.push(z);
                }
            }
        }
        out
    }
}

/// `n` boundary points, uniformly parameterised, counterclockwise.
pub fn sample_boundary(r: &RegionSpec, n: usize) -> Result<JordanCurveSamples, GeomError> {
    if n < MIN_SAMPLES {
        return Err(GeomError::TooFewSamples(n));
    }
    r.validate()?;
    let t = |k: usize| TAU * k as f64 / n as f64;
    let points: Vec<Complex64> = match r {
        RegionSpec::Disk { center, radius } => (0..n)
            .map(|k| center + Complex64::from_polar(*radius, t(k)))
            .collect(),
        RegionSpec::Ellipse {
            center,
            semi_axes: (a, b),
        } => (0..n)
            .map(|k| center + Complex64::new(a * t(k).cos(), b * t(k).sin()))
            .collect(),
        RegionSpec::Polygon { vertices } => {
            let poly = JordanCurveSamples::new(vertices.clone()).into_ccw();
            let total = poly.perimeter();
            let segs: Vec<_> = poly.segments().collect();
            let mut out = Vec::with_capacity(n);
            let (mut seg, mut start) = (0usize, 0.0f64);
            for k in 0..n {
                let s = total * k as f64 / n as f64;
                while seg + 1 < segs.len() && s >= start + (segs[seg].1 - segs[seg].0).norm() {
                    start += (segs[seg].1 - segs[seg].0).norm();
                    seg += 1;
                }
                let (a, b) = segs[seg];
                let len = (b - a).norm();
                let u = if len > 0.0 { (s - start) / len } else { 0.0 };
                out.push(a + (b - a) * u);
            }
            out
        }
    };
    Ok(JordanCurveSamples {
        points,
        orientation: Orientation::Ccw,
    })
}

fn eval_checked(f: &RationalMap, z: Complex64, index: usize) -> Result<Complex64, GeomError> {
    match f.eval_finite(z)? {
        SpherePoint::Finite(w) => Ok(w),
        SpherePoint::Infinity => Err(GeomError::PoleProximity { index, point: z }),
    }
}

/// Image polyline. With `refine`, source segments are bisected until every
/// image gap is at most `1e-3` of the image diameter.
pub fn map_curve(
    f: &RationalMap,
    c: &JordanCurveSamples,
    refine: bool,
) -> Result<JordanCurveSamples, GeomError> {
    let images: Vec<Complex64> = c
        .points
        .par_iter()
        .enumerate()
        .map(|(k, &z)| eval_checked(f, z, k))
        .collect::<Result<_, _>>()?;
    if !refine {
        return Ok(JordanCurveSamples::new(images));
    }
    let gap = 1e-3 * JordanCurveSamples::new(images.clone()).diameter();
    let n = c.points.len();
    let pieces: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let (a, b) = (c.points[k], c.points[(k + 1) % n]);
            let mut out = vec![images[k]];
            subdivide(f, a, b, images[k], images[(k + 1) % n], gap, 0, k, &mut out)?;
            Ok(out)
        })
        .collect::<Result<_, GeomError>>()?;
    Ok(JordanCurveSamples::new(pieces.into_iter().flatten().collect()))
}

#[allow(clippy::too_many_arguments)]
fn subdivide(
    f: &RationalMap,
    a: Complex64,
    b: Complex64,
    fa: Complex64,
    fb: Complex64,
    gap: f64,
    depth: u32,
    index: usize,
    out: &mut Vec<Complex64>,
) -> Result<(), GeomError> {
    if (fb - fa).norm() <= gap || depth >= 24 {
        return Ok(());
    }
    let m = 0.5 * (a + b);
    let fm = eval_checked(f, m, index)?;
    subdivide(f, a, m, fa, fm, gap, depth + 1, index, out)?;
    out.push(fm);
    subdivide(f, m, b, fm, fb, gap, depth + 1, index, out)
}

/// Winding number by summed angle increments.
pub fn winding_number(c: &JordanCurveSamples, p: Complex64) -> Result<i64, GeomError> {
    let distance = c.distance_to(p);
    if distance < 1e-9 {
        return Err(GeomError::OnCurve { point: p, distance });
    }
    let raw: f64 = c.segments().map(|(a, b)| ((b - p) / (a - p)).arg()).sum::<f64>() / TAU;
    let rounded = raw.round();
    let residue = (raw - rounded).abs();
    if residue > 0.25 {
        return Err(GeomError::Precision { raw, residue });
    }
    Ok(rounded as i64)
}

/// Nonzero-rule winding by signed upward/downward crossings.
fn crossing_winding(c: &JordanCurveSamples, p: Complex64) -> i64 {
    let mut w = 0;
    for (a, b) in c.segments() {
        w += crossing(a, b, p);
    }
    w
}

#[inline]
fn crossing(a: Complex64, b: Complex64, p: Complex64) -> i64 {
    if a.im <= p.im {
        if b.im > p.im && cross(b - a, p - a) > 0.0 {
            return 1;
        }
    } else if b.im <= p.im && cross(b - a, p - a) < 0.0 {
        return -1;
    }
    0
}

/// Horizontal-slab index over a polyline for fast crossing-number winding.
struct SlabIndex {
    y0: f64,
    dy: f64,
    slabs: Vec<Vec<(Complex64, Complex64)>>,
}

impl SlabIndex {
    fn new(c: &JordanCurveSamples) -> Self {
        let w = c.bounding_window();
        let count = (c.len() / 4).clamp(1, 65536);
        let dy = (w.height() / count as f64).max(f64::MIN_POSITIVE);
        let mut slabs = vec![Vec::new(); count];
        for (a, b) in c.segments() {
            let lo = ((a.im.min(b.im) - w.im_min) / dy).floor().max(0.0) as usize;
            let hi = (((a.im.max(b.im) - w.im_min) / dy).floor() as usize).min(count - 1);
            for slab in &mut slabs[lo.min(count - 1)..=hi] {
                slab.push((a, b));
            }
        }
        SlabIndex {
            y0: w.im_min,
            dy,
            slabs,
        }
    }

    fn winding(&self, p: Complex64) -> i64 {
        let k = (p.im - self.y0) / self.dy;
        if !(k >= 0.0) || k as usize >= self.slabs.len() {
            return 0;
        }
        self.slabs[k as usize].iter().map(|&(a, b)| crossing(a, b, p)).sum()
    }
}

/// Result of a containment certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Containment {
    pub contained: bool,
    pub min_distance: f64,
    pub margin: f64,
}

/// Whether the closure of `inner` lies inside `outer` with at least `margin`
/// clearance. `inner` is sampled with `n` points.
pub fn compactly_contained(
    inner: &RegionSpec,
    outer: &JordanCurveSamples,
    margin: f64,
    n: usize,
) -> Result<Containment, GeomError> {
    let samples = sample_boundary(inner, n)?;
    let outer = outer.clone().into_ccw();
    let min_distance = min_distance_between(&samples.points, &outer);
    if min_distance < 1e-9 {
        return Ok(Containment {
            contained: false,
            min_distance,
            margin,
        });
    }
    let index = SlabIndex::new(&outer);
    // A cheap pass over every sample, then the angle sum on a subset as a
    // cross-check of the index.
    let mut inside = samples.points.iter().all(|&p| index.winding(p) == 1);
    for p in samples.points.iter().step_by((n / 16).max(1)) {
        inside &= winding_number(&outer, *p)? == 1;
    }
    Ok(Containment {
        contained: inside && min_distance >= margin,
        min_distance,
        margin,
    })
}

/// Default margin: `1e-3` of the outer diameter.
pub fn default_margin(outer: &JordanCurveSamples) -> f64 {
    1e-3 * outer.diameter()
}

fn min_distance_between(points: &[Complex64], curve: &JordanCurveSamples) -> f64 {
    points
        .par_iter()
        .map(|&p| curve.distance_to(p))
        .reduce(|| f64::INFINITY, f64::min)
}

/// Common winding number of `f^iterate(boundary)` about the test points.
pub fn proper_degree(
    f: &RationalMap,
    iterate: usize,
    domain_boundary: &JordanCurveSamples,
    testpoints: &[Complex64],
) -> Result<i64, GeomError> {
    let g = f.iterate_map(iterate);
    let image = map_curve(&g, &domain_boundary.clone().into_ccw(), true)?;
    let degrees = testpoints
        .iter()
        .map(|&w| winding_number(&image, w))
        .collect::<Result<Vec<_>, _>>()?;
    match degrees.first() {
        Some(&d) if degrees.iter().all(|&e| e == d) => Ok(d),
        _ => Err(GeomError::Inconsistent(degrees)),
    }
}

/// Boundary extracted from a raster, with the cell size that bounds its
/// Hausdorff error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedBoundary {
    pub curve: JordanCurveSamples,
    pub cell: f64,
    pub window: Window,
    /// Cells enclosed by the component but not part of it, filled in.
    pub holes_filled: usize,
}

/// Outer marching-squares contour of a 4-connected blob. Cells outside the
/// blob are treated as 8-connected, so diagonal pinches stay open.
fn trace_outer_contour(blob: &[bool], w: usize, h: usize, window: &Window) -> JordanCurveSamples {
    // Padded corner grid: corner (i, j) is pixel (i-1, j-1).
    let at = |i: isize, j: isize| -> bool {
        i >= 1 && j >= 1 && (i as usize) <= w && (j as usize) <= h && blob[(j as usize - 1) * w + (i as usize - 1)]
    };
    // Edge keys: (i, j, 0) is the edge (i,j)-(i+1,j), (i, j, 1) is (i,j)-(i,j+1).
    type Key = (isize, isize, u8);
    let mid = |k: Key| -> Complex64 {
        let (i, j, dir) = k;
        let (x, y) = if dir == 0 {
            (i as f64 + 0.5, j as f64)
        } else {
            (i as f64, j as f64 + 0.5)
        };
        let cw = window.width() / w as f64;
        let ch = window.height() / h as f64;
        Complex64::new(
            window.re_min + (x - 1.0 + 0.5) * cw,
            window.im_max - (y - 1.0 + 0.5) * ch,
        )
    };
    let mut links: HashMap<Key, Vec<Key>> = HashMap::new();
    let mut link = |a: Key, b: Key| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };
    for j in 0..=h as isize {
        for i in 0..=w as isize {
            let (tl, tr, bl, br) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
            let top = (i, j, 0u8);
            let bottom = (i, j + 1, 0u8);
            let left = (i, j, 1u8);
            let right = (i + 1, j, 1u8);
            let case = (tl as u8) | (tr as u8) << 1 | (br as u8) << 2 | (bl as u8) << 3;
            match case {
                0 | 15 => {}
                1 | 14 => link(top, left),
                2 | 13 => link(top, right),
                4 | 11 => link(right, bottom),
                8 | 7 => link(bottom, left),
                3 | 12 => link(left, right),
                6 | 9 => link(top, bottom),
                // Saddles: the filled corners stay separated.
                5 => {
                    link(top, left);
                    link(right, bottom);
                }
                10 => {
                    link(top, right);
                    link(bottom, left);
                }
                _ => unreachable!(),
            }
        }
    }
    // Walk every loop and keep the one of largest area.
    let mut seen: HashMap<Key, bool> = HashMap::new();
    let mut keys: Vec<Key> = links.keys().copied().collect();
    keys.sort();
    let mut best: Vec<Complex64> = Vec::new();
    let mut best_area = 0.0f64;
    for start in keys {
        if seen.contains_key(&start) {
            continue;
        }
        let mut ring = vec![start];
        seen.insert(start, true);
        let mut prev = start;
        let mut cur = links[&start][0];
        while cur != start {
            seen.insert(cur, true);
            ring.push(cur);
            let next = links[&cur].iter().copied().find(|&k| k != prev).unwrap_or(start);
            prev = cur;
            cur = next;
        }
        let pts: Vec<Complex64> = ring.into_iter().map(mid).collect();
        let area = signed_area(&pts).abs();
        if area > best_area {
            best_area = area;
            best = pts;
        }
    }
    JordanCurveSamples::new(best).into_ccw()
}

/// Flood fills from `seed` over `indicator` (4-connected), fills holes and
/// extracts the outer contour.
fn extract_component(
    indicator: &[bool],
    w: usize,
    h: usize,
    window: &Window,
    seed: Complex64,
) -> Result<ExtractedBoundary, GeomError> {
    let (si, sj) = window.pixel_of(seed, w, h).ok_or(GeomError::BadSeed(seed))?;
    if !indicator[sj * w + si] {
        return Err(GeomError::BadSeed(seed));
    }
    let (labels, _) = label_components(indicator, w, h);
    let target = labels[sj * w + si];
    let mut blob: Vec<bool> = labels.iter().map(|&l| l == target).collect();
    let touches_edge = (0..w).any(|i| blob[i] || blob[(h - 1) * w + i])
        || (0..h).any(|j| blob[j * w] || blob[j * w + w - 1]);
    if touches_edge {
        return Err(GeomError::WindowTooSmall(seed));
    }
    // Outside cells reachable from the edge with 8-connectivity.
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    for j in 0..h {
        for i in 0..w {
            if (i == 0 || j == 0 || i == w - 1 || j == h - 1) && !blob[j * w + i] {
                outside[j * w + i] = true;
                queue.push_back((i, j));
            }
        }
    }
    while let Some((i, j)) = queue.pop_front() {
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 || ni >= w as i64 || nj >= h as i64 {
                    continue;
                }
                let k = nj as usize * w + ni as usize;
                if !blob[k] && !outside[k] {
                    outside[k] = true;
                    queue.push_back((ni as usize, nj as usize));
                }
            }
        }
    }
    let mut holes_filled = 0;
    for k in 0..w * h {
        if !blob[k] && !outside[k] {
            blob[k] = true;
            holes_filled += 1;
        }
    }
    let curve = trace_outer_contour(&blob, w, h, window);
    Ok(ExtractedBoundary {
        curve,
        cell: (window.width() / w as f64).max(window.height() / h as f64),
        window: *window,
        holes_filled,
    })
}

fn padded_square(w: &Window, pad: f64) -> Window {
    let cx = 0.5 * (w.re_min + w.re_max);
    let cy = 0.5 * (w.im_min + w.im_max);
    let half = 0.5 * w.width().max(w.height()) * (1.0 + 2.0 * pad);
    Window::square(Complex64::new(cx, cy), half)
}

/// Boundary of the component of the complement of `curve` that contains
/// `seed`. Cells met by the curve, and their neighbours, are excluded, so
/// the result lies strictly inside the true component.
pub fn complement_component_boundary(
    curve: &JordanCurveSamples,
    seed: Complex64,
    grid_res: usize,
) -> Result<ExtractedBoundary, GeomError> {
    let window = padded_square(&curve.bounding_window(), 0.05);
    let (w, h) = (grid_res, grid_res);
    let cell = window.width() / w as f64;
    let mut blocked = vec![false; w * h];
    let mut mark = |z: Complex64| {
        if let Some((i, j)) = window.pixel_of(z, w, h) {
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni >= 0 && nj >= 0 && ni < w as i64 && nj < h as i64 {
                        blocked[nj as usize * w + ni as usize] = true;
                    }
                }
            }
        }
    };
    for (a, b) in curve.segments() {
        let steps = ((b - a).norm() / (0.25 * cell)).ceil().max(1.0) as usize;
        for s in 0..=steps {
            mark(a + (b - a) * (s as f64 / steps as f64));
        }
    }
    let free: Vec<bool> = blocked.iter().map(|b| !b).collect();
    extract_component(&free, w, h, &window, seed)
}

/// Boundary of the component of `{z : f^iterate(z) inside target}` that
/// contains `seed`, over the target's bounding box padded by 25%.
pub fn pullback_component_boundary(
    f: &RationalMap,
    iterate: usize,
    target: &JordanCurveSamples,
    seed: Complex64,
    grid_res: usize,
) -> Result<ExtractedBoundary, GeomError> {
    let window = padded_square(&target.bounding_window(), 0.25);
    pullback_in_window(f, iterate, target, seed, grid_res, window)
}

/// As [`pullback_component_boundary`] with an explicit window.
pub fn pullback_in_window(
    f: &RationalMap,
    iterate: usize,
    target: &JordanCurveSamples,
    seed: Complex64,
    grid_res: usize,
    window: Window,
) -> Result<ExtractedBoundary, GeomError> {
    let target = target.clone().into_ccw();
    let index = SlabIndex::new(&target);
    let inside = |z: Complex64| -> bool {
        let mut w = SpherePoint::Finite(z);
        for _ in 0..iterate {
            w = match f.eval(w) {
                Ok(v) => v,
                Err(_) => return false,
            };
        }
        match w {
            SpherePoint::Finite(v) => index.winding(v) != 0,
            SpherePoint::Infinity => false,
        }
    };
    if !inside(seed) {
        return Err(GeomError::BadSeed(seed));
    }
    let (w, h) = (grid_res, grid_res);
    let mut indicator = vec![false; w * h];
    indicator.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
        for (i, cell) in row.iter_mut().enumerate() {
            *cell = inside(window.pixel_center(i, j, w, h));
        }
    });
    extract_component(&indicator, w, h, &window, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotone {
    Increasing,
    Decreasing,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub monotone: Monotone,
    pub image_bounds: (f64, f64),
    pub samples: usize,
}

/// Strict monotonicity and range of `f` sampled at `n + 1` points of
/// `[a, b]`.
pub fn interval_monotone_image(
    f: &RationalMap,
    a: f64,
    b: f64,
    n: usize,
) -> Result<MonotoneReport, GeomError> {
    let n = n.max(1);
    let values = (0..=n)
        .map(|k| {
            let x = a + (b - a) * k as f64 / n as f64;
            match f.eval_finite(Complex64::new(x, 0.0))? {
                SpherePoint::Infinity => Err(GeomError::PoleInside(Complex64::new(x, 0.0))),
                SpherePoint::Finite(v) if v.im.abs() > 1e-12 => Err(GeomError::NotReal {
                    point: x,
                    imag: v.im,
                }),
                SpherePoint::Finite(v) => Ok(v.re),
            }
        })
        .collect::<Result<Vec<f64>, GeomError>>()?;
    let inc = values.windows(2).all(|p| p[1] > p[0]);
    let dec = values.windows(2).all(|p| p[1] < p[0]);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MonotoneReport {
        monotone: if inc {
            Monotone::Increasing
        } else if dec {
            Monotone::Decreasing
        } else {
            Monotone::No
        },
        image_bounds: (lo, hi),
        samples: n + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disjointness {
    pub disjoint: bool,
    pub separation: f64,
    /// Preimages in `r` of a point of `r`, by the argument principle.
    pub preimages_inside: i64,
    pub poles_inside: usize,
}

/// Whether `f(closure r)` misses `closure r`.
///
/// Poles inside `r` are allowed: the number of preimages in `r` of a point
/// `w` of `r` is the winding number of `f(boundary r)` about `w` plus the
/// number of poles in `r`, and is constant on `r` once the image boundary
/// avoids it. A pole on the boundary is an error.
pub fn region_disjoint(f: &RationalMap, r: &RegionSpec, n: usize) -> Result<Disjointness, GeomError> {
    let boundary = sample_boundary(r, n)?;
    let image = map_curve(f, &boundary, true).map_err(|e| match e {
        GeomError::PoleProximity { point, .. } => GeomError::PoleInside(point),
        other => other,
    })?;
    let from_boundary = image
        .points
        .par_iter()
        .map(|&w| r.distance(SpherePoint::Finite(w), &boundary))
        .reduce(|| f64::INFINITY, f64::min);
    let from_interior = r
        .interior_grid(n)
        .par_iter()
        .map(|&z| match f.eval_finite(z) {
            Ok(v) => r.distance(v, &boundary),
            Err(_) => 0.0,
        })
        .reduce(|| f64::INFINITY, f64::min);
    let separation = from_boundary.min(from_interior);
    let poles_inside = poles_in_region(f, r)?;
    let preimages_inside = if separation > 0.0 {
        let probe = match r {
            RegionSpec::Disk { center, .. } | RegionSpec::Ellipse { center, .. } => *center,
            RegionSpec::Polygon { .. } => boundary.points.iter().sum::<Complex64>() / n as f64,
        };
        winding_number(&image, probe)? + poles_inside as i64
    } else {
        -1
    };
    Ok(Disjointness {
        disjoint: separation > 0.0 && preimages_inside == 0,
        separation,
        preimages_inside,
        poles_inside,
    })
}

fn poles_in_region(f: &RationalMap, r: &RegionSpec) -> Result<usize, GeomError> {
    if f.den().degree_or_zero() == 0 {
        return Ok(0);
    }
    Ok(f
        .den()
        .roots(1e-8)
        .map_err(MapError::from)?
        .iter()
        .filter(|root| r.contains_closed(root.value))
        .map(|root| root.multiplicity)
        .sum())
}

/// Containment of a sampled closed curve (with its interior) in the region
/// bounded by `outer`.
pub fn curve_compactly_contained(
    inner: &JordanCurveSamples,
    outer: &JordanCurveSamples,
    margin: f64,
) -> Containment {
    let outer = outer.clone().into_ccw();
    let index = SlabIndex::new(&outer);
    let min_distance = min_distance_between(&inner.points, &outer);
    let inside = inner.points.iter().all(|&p| index.winding(p) == 1);
    Containment {
        contained: inside && min_distance >= margin && min_distance >= 1e-9,
        min_distance,
        margin,
    }
}

/// Numerical data of a polynomial-like restriction `f^k : B' -> A`, where
/// `A` is the component of the complement of `f^k(boundary B)` containing
/// the seed and `B'` is the component of `f^-k(A)` containing the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlmCertificate {
    pub iterate: usize,
    pub samples: usize,
    pub grid: usize,
    /// `closure B` inside `A`.
    pub domain_in_target: Containment,
    /// `closure B'` inside `A`.
    pub pullback_in_target: Containment,
    pub degree: i64,
    pub expected_degree: i64,
    pub target: ExtractedBoundary,
    pub pullback: ExtractedBoundary,
    pub passed: bool,
}

pub fn certify_polynomial_like(
    f: &RationalMap,
    iterate: usize,
    domain: &RegionSpec,
    seed: Complex64,
    samples: usize,
    grid: usize,
    expected_degree: i64,
) -> Result<PlmCertificate, GeomError> {
    let g = f.iterate_map(iterate);
    let boundary = sample_boundary(domain, samples)?;
    let image = map_curve(&g, &boundary, true)?;
    let target = complement_component_boundary(&image, seed, grid)?;
    let margin = default_margin(&target.curve);
    let domain_in_target = compactly_contained(domain, &target.curve, margin, samples)?;
    let pullback = pullback_component_boundary(f, iterate, &target.curve, seed, grid)?;
    let pullback_in_target = curve_compactly_contained(&pullback.curve, &target.curve, margin);
    // Test points around the seed, well inside A.
    let reach = 0.05 * target.curve.distance_to(seed);
    let testpoints: Vec<Complex64> = (0..4)
        .map(|k| seed + Complex64::from_polar(reach * k as f64 / 3.0, 1.0 + k as f64))
        .collect();
    let degree = proper_degree(f, iterate, &pullback.curve, &testpoints)?;
    let passed = domain_in_target.contained && pullback_in_target.contained && degree == expected_degree;
    Ok(PlmCertificate {
        iterate,
        samples,
        grid,
        domain_in_target,
        pullback_in_target,
        degree,
        expected_degree,
        target,
        pullback,
        passed,
    })
}

/// Hausdorff distance between two sampled curves (vertex to polyline).
pub fn hausdorff(a: &JordanCurveSamples, b: &JordanCurveSamples) -> f64 {
    min_max(a, b).max(min_max(b, a))
}

fn min_max(a: &JordanCurveSamples, b: &JordanCurveSamples) -> f64 {
    a.points
        .par_iter()
        .map(|&p| b.distance_to(p))
        .reduce(|| 0.0, f64::max)
}
