//! Dense univariate complex polynomials.
//!
//! Coefficients are stored in ascending degree order. Every constructor and
//! arithmetic operation normalizes the result: leading coefficients whose
//! modulus is at most [`NORMALIZE_REL`] times the largest coefficient modulus
//! are stripped, so the zero polynomial is the empty coefficient list.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative threshold below which leading coefficients are dropped.
pub const NORMALIZE_REL: f64 = 1e-12;

/// Minimum merge radius used when grouping root approximations into a
/// multiple root, relative to `1 + |r|`.
pub const CLUSTER_REL: f64 = 1e-6;

const ABERTH_MAX_ITER: usize = 800;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumError {
    #[error("evaluation overflowed to a non-finite value at z = {0}")]
    Range(Complex64),
    #[error("root finding needs a polynomial of degree at least 1")]
    ConstantPolynomial,
    #[error("root iteration did not converge after {iterations} steps ({} of {} approximations settled)", .settled, .partial.len())]
    NoConvergence {
        iterations: usize,
        settled: usize,
        partial: Vec<Complex64>,
    },
    #[error("root {root} fails the residual check: |p(r)| = {residual:e} > {bound:e}")]
    ResidualCheck {
        root: Complex64,
        residual: f64,
        bound: f64,
    },
}

/// A root together with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Poly { coeffs };
        p.normalize();
        p
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// `c * z^k`
    pub fn monomial(c: Complex64, k: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    /// `z - r`
    pub fn linear_root(r: Complex64) -> Self {
        Self::new(vec![-r, Complex64::new(1.0, 0.0)])
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        roots
            .iter()
            .fold(Self::constant(Complex64::new(1.0, 0.0)), |acc, &r| {
                &acc * &Self::linear_root(r)
            })
    }

    fn normalize(&mut self) {
        let max = self.max_coeff_modulus();
        if max == 0.0 {
            self.coeffs.clear();
            return;
        }
        while let Some(last) = self.coeffs.last() {
            if last.norm() <= NORMALIZE_REL * max {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Degree with the zero polynomial counted as degree 0.
    pub fn degree_or_zero(&self) -> usize {
        self.degree().unwrap_or(0)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or_default()
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn max_coeff_modulus(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `sum |a_k| |z|^k`, the natural scale for residuals of `p` at `z`.
    pub fn abs_scale(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    /// Horner evaluation without the finiteness check.
    #[inline]
    pub fn eval_raw(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64, NumError> {
        let v = self.eval_raw(z);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(NumError::Range(z))
        }
    }

    pub fn derivative(&self) -> Poly {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    /// k-th derivative.
    pub fn nth_derivative(&self, k: usize) -> Poly {
        (0..k).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn pow(&self, k: u32) -> Poly {
        (0..k).fold(Self::constant(Complex64::new(1.0, 0.0)), |acc, _| &acc * self)
    }

    /// `z^n p(1/z)` for `n >= deg p`: coefficients reversed and padded.
    pub fn reversed(&self, n: usize) -> Poly {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            coeffs[n - k] = c;
        }
        Self::new(coeffs)
    }

    /// Multiplies by `z^k`.
    pub fn shift_up(&self, k: usize) -> Poly {
        if self.is_zero() {
            return Self::zero();
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k];
        coeffs.extend_from_slice(&self.coeffs);
        Self::new(coeffs)
    }

    /// Number of exactly vanishing low-order coefficients, i.e. the order of
    /// the root at zero when it is exact.
    pub fn zero_order_at_origin(&self) -> usize {
        self.coeffs.iter().take_while(|c| **c == Complex64::new(0.0, 0.0)).count()
    }

    /// All roots with multiplicities summing to the degree.
    ///
    /// Simultaneous Aberth–Ehrlich iteration, followed by grouping of the
    /// approximations whose Weierstrass inclusion disks overlap (never with a
    /// merge radius below `CLUSTER_REL * (1 + |r|)`). Each group becomes one
    /// root whose location is the group centroid, polished by Newton steps
    /// on the `(m-1)`-th derivative.
    ///
    /// Every returned root `r` satisfies `|p(r)| <= tol * sum |a_k| |r|^k`.
    pub fn roots(&self, tol: f64) -> Result<Vec<Root>, NumError> {
        let n = match self.degree() {
            None | Some(0) => return Err(NumError::ConstantPolynomial),
            Some(n) => n,
        };
        let zero_order = self.zero_order_at_origin();
        let reduced = Poly::new(self.coeffs[zero_order..].to_vec());
        let mut roots = Vec::new();
        if zero_order > 0 {
            roots.push(Root {
                value: Complex64::new(0.0, 0.0),
                multiplicity: zero_order,
            });
        }
        if reduced.degree_or_zero() > 0 {
            let approx = aberth(&reduced)?;
            roots.extend(cluster_and_polish(&reduced, &approx, tol));
        }
        debug_assert_eq!(roots.iter().map(|r| r.multiplicity).sum::<usize>(), n);
        for r in &roots {
            let residual = self.eval_raw(r.value).norm();
            let bound = tol * self.abs_scale(r.value).max(f64::MIN_POSITIVE);
            if residual > bound {
                return Err(NumError::ResidualCheck {
                    root: r.value,
                    residual,
                    bound,
                });
            }
        }
        Ok(roots)
    }
}

/// Rounding-noise level of Horner evaluation of `p` at `z`.
fn eval_noise(p: &Poly, z: Complex64) -> f64 {
    let n = p.degree_or_zero().max(1) as f64;
    8.0 * n * f64::EPSILON * p.abs_scale(z)
}

fn aberth(p: &Poly) -> Result<Vec<Complex64>, NumError> {
    let n = p.degree_or_zero();
    let dp = p.derivative();
    let lead = p.leading().norm();
    // Geometric mean of the root moduli, kept inside the Cauchy bound.
    let cauchy = 1.0 + p.coeffs()[..n].iter().map(|c| c.norm() / lead).fold(0.0, f64::max);
    let radius = (p.coeff(0).norm() / lead).powf(1.0 / n as f64).clamp(1e-3, cauchy);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, theta)
        })
        .collect();
    let mut done = vec![false; n];
    for _ in 0..ABERTH_MAX_ITER {
        for i in 0..n {
            if done[i] {
                continue;
            }
            let zi = z[i];
            let pz = p.eval_raw(zi);
            if pz.norm() <= eval_noise(p, zi) {
                done[i] = true;
                continue;
            }
            let ratio = pz / dp.eval_raw(zi);
            let sum: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| Complex64::new(1.0, 0.0) / (zi - z[j]))
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] = zi - step;
                if step.norm() <= 4.0 * f64::EPSILON * z[i].norm() {
                    done[i] = true;
                }
            } else {
                // Derivative vanished or collision: nudge off the bad spot.
                z[i] = zi + Complex64::from_polar(1e-8 * (1.0 + zi.norm()), i as f64);
            }
        }
        if done.iter().all(|&d| d) {
            return Ok(z);
        }
    }
    // Accept approximations that sit at the rounding floor even if a final
    // Aberth correction was still pending.
    let settled: Vec<bool> = z
        .iter()
        .map(|&zi| p.eval_raw(zi).norm() <= 1e3 * eval_noise(p, zi))
        .collect();
    if settled.iter().all(|&s| s) {
        Ok(z)
    } else {
        Err(NumError::NoConvergence {
            iterations: ABERTH_MAX_ITER,
            settled: settled.iter().filter(|&&s| s).count(),
            partial: z,
        })
    }
}

fn cluster_and_polish(p: &Poly, approx: &[Complex64], tol: f64) -> Vec<Root> {
    let n = approx.len();
    let lead = p.leading();
    let radii: Vec<f64> = (0..n)
        .map(|i| {
            let denom: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| approx[i] - approx[j])
                .product();
            let w = p.eval_raw(approx[i]) / (lead * denom);
            let inclusion = if w.norm().is_finite() { n as f64 * w.norm() } else { f64::INFINITY };
            inclusion.max(0.5 * CLUSTER_REL * (1.0 + approx[i].norm()))
        })
        .collect();

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut k = i;
        while parent[k] != r {
            let next = parent[k];
            parent[k] = r;
            k = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (approx[i] - approx[j]).norm() <= radii[i] + radii[j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, members)) => members.push(i),
            None => groups.push((r, vec![i])),
        }
    }

    let mut roots = Vec::new();
    for (_, members) in groups {
        split_group(p, approx, members, tol, &mut roots);
    }
    roots
}

/// Accepts a group whose polished centroid passes the residual check, and
/// otherwise cuts its longest single-linkage edge and recurses.
fn split_group(p: &Poly, approx: &[Complex64], members: Vec<usize>, tol: f64, out: &mut Vec<Root>) {
    let m = members.len();
    let centroid = members.iter().map(|&i| approx[i]).sum::<Complex64>() / m as f64;
    let value = polish(p, centroid, m);
    if m == 1 || p.eval_raw(value).norm() <= tol * p.abs_scale(value) {
        out.push(Root { value, multiplicity: m });
        return;
    }
    // Prim's tree over the members, then drop its longest edge.
    let mut in_tree = vec![false; m];
    let mut best = vec![(f64::INFINITY, 0usize); m];
    let mut edges = Vec::with_capacity(m - 1);
    in_tree[0] = true;
    for k in 1..m {
        best[k] = ((approx[members[k]] - approx[members[0]]).norm(), 0);
    }
    for _ in 1..m {
        let k = (0..m)
            .filter(|&k| !in_tree[k])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0))
            .expect("a vertex remains");
        in_tree[k] = true;
        edges.push((best[k].0, best[k].1, k));
        for j in 0..m {
            let d = (approx[members[j]] - approx[members[k]]).norm();
            if !in_tree[j] && d < best[j].0 {
                best[j] = (d, k);
            }
        }
    }
    let cut = (0..edges.len())
        .max_by(|&a, &b| edges[a].0.total_cmp(&edges[b].0))
        .expect("a group of two or more has an edge");
    let mut side = vec![usize::MAX; m];
    side[0] = 0;
    // Edges are listed parent-first, so one pass labels both halves.
    for (e, &(_, parent, child)) in edges.iter().enumerate() {
        side[child] = if e == cut { 1 } else { side[parent] };
    }
    let (a, b): (Vec<usize>, Vec<usize>) = (0..m).partition(|&k| side[k] == 0);
    split_group(p, approx, a.into_iter().map(|k| members[k]).collect(), tol, out);
    split_group(p, approx, b.into_iter().map(|k| members[k]).collect(), tol, out);
}

/// Newton on the `(m-1)`-th derivative, which has a simple root at an
/// `m`-fold root of `p`. Steps are only accepted while they reduce the
/// residual.
fn polish(p: &Poly, start: Complex64, m: usize) -> Complex64 {
    let q = p.nth_derivative(m - 1);
    let dq = q.derivative();
    let mut z = start;
    let mut res = q.eval_raw(z).norm();
    for _ in 0..8 {
        let d = dq.eval_raw(z);
        if d.norm() == 0.0 || res == 0.0 {
            break;
        }
        let next = z - q.eval_raw(z) / d;
        let next_res = q.eval_raw(next).norm();
        if !(next_res < res) {
            break;
        }
        z = next;
        res = next_res;
    }
    z
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Poly {
            type Output = Poly;
            fn $m(self, rhs: Poly) -> Poly {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cube_minus_one() -> Poly {
        Poly::linear_root(c(1.0, 0.0)).pow(3)
    }

    #[test]
    fn high_multiplicity_cluster_stays_apart_from_neighbour() {
        let p = &Poly::linear_root(c(1.0, 0.0)).pow(7) * &Poly::linear_root(c(-1.0, 0.0));
        let mut roots = p.roots(1e-8).unwrap();
        roots.sort_by_key(|r| r.multiplicity);
        assert_eq!(roots.len(), 2);
        assert_eq!((roots[0].multiplicity, roots[1].multiplicity), (1, 7));
        assert!((roots[0].value + 1.0).norm() < 1e-8);
        assert!((roots[1].value - 1.0).norm() < 1e-6);
    }

    #[test]
    fn eval_examples() {
        let p = Poly::from_real(&[1.0, 0.0, 1.0]);
        assert!(p.eval(c(0.0, 1.0)).unwrap().norm() < 1e-15);
        assert_eq!(cube_minus_one().eval(c(1.0, 0.0)).unwrap(), c(0.0, 0.0));
        // numerator of f3: 8 (z-1)^2 (z+8) / 27
        let f3_num = (&Poly::linear_root(c(1.0, 0.0)).pow(2) * &Poly::linear_root(c(-8.0, 0.0)))
            .scale(c(8.0 / 27.0, 0.0));
        assert!(f3_num.eval(c(1.0, 0.0)).unwrap().norm() < 1e-15);
        assert_eq!(Poly::zero().eval(c(3.0, 1.0)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn eval_overflow_is_range_error() {
        let p = Poly::monomial(c(1.0, 0.0), 40);
        assert!(matches!(p.eval(c(1e10, 0.0)), Err(NumError::Range(_))));
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(
            Poly::monomial(c(1.0, 0.0), 2).derivative(),
            Poly::monomial(c(2.0, 0.0), 1)
        );
        assert!(Poly::constant(c(5.0, 0.0)).derivative().is_zero());
        let d = cube_minus_one().derivative();
        let expect = Poly::linear_root(c(1.0, 0.0)).pow(2).scale(c(3.0, 0.0));
        assert_eq!(d, expect);
    }

    #[test]
    fn arithmetic_examples() {
        let p = &Poly::linear_root(c(-1.0, 0.0)) * &Poly::linear_root(c(1.0, 0.0));
        assert_eq!(p, Poly::from_real(&[-1.0, 0.0, 1.0]));
        let sq = Poly::monomial(c(1.0, 0.0), 2);
        assert!((&sq + &(-&sq)).is_zero());
        let scaled = cube_minus_one().scale(c(2.0, 0.0));
        assert_eq!(scaled.eval(c(0.0, 0.0)).unwrap(), c(-2.0, 0.0));
    }

    #[test]
    fn normalization_strips_tiny_leading_terms() {
        let p = Poly::new(vec![c(1.0, 0.0), c(2.0, 0.0), c(1e-14, 0.0)]);
        assert_eq!(p.degree(), Some(1));
        let a = Poly::from_real(&[1.0, 1.0, 1.0 + 1e-15]);
        let b = Poly::from_real(&[0.0, 0.0, 1.0]);
        assert_eq!((&a - &b).degree(), Some(1));
    }

    #[test]
    fn roots_of_z_squared_plus_one() {
        let mut roots = Poly::from_real(&[1.0, 0.0, 1.0]).roots(1e-12).unwrap();
        roots.sort_by(|a, b| a.value.im.partial_cmp(&b.value.im).unwrap());
        assert_eq!(roots.len(), 2);
        assert!((roots[0].value - c(0.0, -1.0)).norm() < 1e-12);
        assert!((roots[1].value - c(0.0, 1.0)).norm() < 1e-12);
        assert!(roots.iter().all(|r| r.multiplicity == 1));
    }

    #[test]
    fn roots_with_designed_multiplicity() {
        let p = &Poly::linear_root(c(1.0, 0.0)).pow(3) * &Poly::linear_root(c(2.0, 0.0)).pow(3);
        let mut roots = p.roots(1e-9).unwrap();
        roots.sort_by(|a, b| a.value.re.partial_cmp(&b.value.re).unwrap());
        assert_eq!(roots.len(), 2);
        assert_eq!(roots[0].multiplicity, 3);
        assert_eq!(roots[1].multiplicity, 3);
        assert!((roots[0].value - c(1.0, 0.0)).norm() < 1e-8);
        assert!((roots[1].value - c(2.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn roots_high_multiplicity_and_zero() {
        // (z-1)^5 (z + 1) z^3, the Wronskian shape of F with d0 = d_inf = 3
        let p = &(&Poly::linear_root(c(1.0, 0.0)).pow(5) * &Poly::linear_root(c(-1.0, 0.0)))
            * &Poly::monomial(c(1.0, 0.0), 3);
        let roots = p.roots(1e-9).unwrap();
        let mut mults: Vec<usize> = roots.iter().map(|r| r.multiplicity).collect();
        mults.sort();
        assert_eq!(mults, vec![1, 3, 5]);
    }

    #[test]
    fn f3_fixed_point_polynomial_contains_xi1() {
        // P(z) - z Q(z) with P = 8 (z-1)^2 (z+8), Q = 27 z
        let p_num = (&Poly::linear_root(c(1.0, 0.0)).pow(2) * &Poly::linear_root(c(-8.0, 0.0)))
            .scale(c(8.0, 0.0));
        let zq = Poly::monomial(c(27.0, 0.0), 2);
        let roots = (&p_num - &zq).roots(1e-10).unwrap();
        assert!(roots.iter().any(|r| (r.value - c(-5.57371629, 0.0)).norm() < 1e-7));
    }

    #[test]
    fn constant_polynomial_has_no_roots() {
        assert_eq!(
            Poly::constant(c(2.0, 0.0)).roots(1e-9),
            Err(NumError::ConstantPolynomial)
        );
    }
}
