//! Rational maps `f = P/Q` on the Riemann sphere.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::{NumError, Poly};

/// `|Q(z)| <= POLE_REL * max|q_k| * (1 + |z|)^deg Q` counts as a pole.
pub const POLE_REL: f64 = 1e-12;
/// Beyond this modulus evaluation switches to the `w = 1/z` chart.
pub const CHART_SWITCH: f64 = 1e8;
/// Band around `|m| = 1` classified as a parabolic candidate.
pub const PARABOLIC_BAND: f64 = 1e-6;
/// Multipliers below this modulus are superattracting.
pub const SUPERATTRACTING_TOL: f64 = 1e-9;
/// Two roots of `P` and `Q` closer than this (relative) violate coprimality.
pub const COPRIME_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MapError {
    #[error("indeterminate value 0/0 at z = {0}")]
    Indeterminate(Complex64),
    #[error("denominator is the zero polynomial")]
    ZeroDenominator,
    #[error("map degree {0} is below the required minimum {1}")]
    Degree(usize, usize),
    #[error("numerator root {num_root} and denominator root {den_root} coincide")]
    NotCoprime {
        num_root: Complex64,
        den_root: Complex64,
    },
    #[error("non-finite derivative at {0}")]
    Range(SpherePoint),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// A point of the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    pub fn new(re: f64, im: f64) -> Self {
        Self::from_complex(Complex64::new(re, im))
    }

    /// Non-finite input maps to `Infinity`.
    pub fn from_complex(z: Complex64) -> Self {
        if z.re.is_finite() && z.im.is_finite() {
            SpherePoint::Finite(z)
        } else {
            SpherePoint::Infinity
        }
    }

    pub fn finite(&self) -> Option<Complex64> {
        match *self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    /// Modulus, `+inf` at infinity.
    pub fn modulus(&self) -> f64 {
        match self {
            SpherePoint::Finite(z) => z.norm(),
            SpherePoint::Infinity => f64::INFINITY,
        }
    }

    /// `z -> 1/z` on the sphere.
    pub fn invert(&self) -> SpherePoint {
        match *self {
            SpherePoint::Infinity => SpherePoint::Finite(Complex64::new(0.0, 0.0)),
            SpherePoint::Finite(z) if z == Complex64::new(0.0, 0.0) => SpherePoint::Infinity,
            SpherePoint::Finite(z) => SpherePoint::from_complex(z.inv()),
        }
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        SpherePoint::from_complex(z)
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpherePoint::Finite(z) => write!(f, "{z}"),
            SpherePoint::Infinity => write!(f, "inf"),
        }
    }
}

/// Chordal distance on the sphere (`2` between antipodes).
pub fn chordal_distance(a: SpherePoint, b: SpherePoint) -> f64 {
    match (a, b) {
        (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
        (SpherePoint::Finite(z), SpherePoint::Infinity)
        | (SpherePoint::Infinity, SpherePoint::Finite(z)) => 2.0 / (1.0 + z.norm_sqr()).sqrt(),
        (SpherePoint::Finite(z), SpherePoint::Finite(w)) => {
            if z.norm() > 1e150 || w.norm() > 1e150 {
                // Compare in the inverted chart to avoid overflow.
                return chordal_distance(a.invert(), b.invert());
            }
            2.0 * (z - w).norm() / ((1.0 + z.norm_sqr()).sqrt() * (1.0 + w.norm_sqr()).sqrt())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointClass {
    Superattracting,
    Attracting,
    ParabolicCandidate,
    Repelling,
}

impl FixedPointClass {
    pub fn from_multiplier(m: Complex64) -> Self {
        let r = m.norm();
        if r <= SUPERATTRACTING_TOL {
            FixedPointClass::Superattracting
        } else if (r - 1.0).abs() <= PARABOLIC_BAND {
            FixedPointClass::ParabolicCandidate
        } else if r < 1.0 {
            FixedPointClass::Attracting
        } else {
            FixedPointClass::Repelling
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: SpherePoint,
    pub local_degree: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointInfo {
    pub location: SpherePoint,
    pub multiplier: Complex64,
    /// Multiplicity as a root of `P - zQ` (1 for a simple fixed point).
    pub multiplicity: usize,
    pub class: FixedPointClass,
}

/// `f = P/Q` with cached derivative data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RawMap", try_from = "RawMap")]
pub struct RationalMap {
    num: Poly,
    den: Poly,
    dnum: Poly,
    dden: Poly,
    wronskian: Poly,
    num_rev: Poly,
    den_rev: Poly,
}

#[derive(Serialize, Deserialize)]
struct RawMap {
    num: Poly,
    den: Poly,
}

impl From<RationalMap> for RawMap {
    fn from(f: RationalMap) -> Self {
        RawMap { num: f.num, den: f.den }
    }
}

impl TryFrom<RawMap> for RationalMap {
    type Error = MapError;
    fn try_from(raw: RawMap) -> Result<Self, MapError> {
        RationalMap::new_any_degree(raw.num, raw.den)
    }
}

impl RationalMap {
    /// Checked constructor: degree at least two and numerically coprime
    /// numerator and denominator.
    pub fn new(num: Poly, den: Poly) -> Result<Self, MapError> {
        let f = Self::new_any_degree(num, den)?;
        if f.degree() < 2 {
            return Err(MapError::Degree(f.degree(), 2));
        }
        f.check_coprime()?;
        Ok(f)
    }

    /// Skips the degree and coprimality checks. Used for maps whose
    /// coprimality holds by construction, and for low-degree helpers such as
    /// translations in geometric tests.
    pub fn new_any_degree(num: Poly, den: Poly) -> Result<Self, MapError> {
        if den.is_zero() {
            return Err(MapError::ZeroDenominator);
        }
        let dnum = num.derivative();
        let dden = den.derivative();
        let wronskian = &(&dnum * &den) - &(&num * &dden);
        let num_rev = num.reversed(num.degree_or_zero());
        let den_rev = den.reversed(den.degree_or_zero());
        Ok(RationalMap {
            num,
            den,
            dnum,
            dden,
            wronskian,
            num_rev,
            den_rev,
        })
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    /// `P'Q - PQ'`.
    pub fn wronskian(&self) -> &Poly {
        &self.wronskian
    }

    fn deg_num(&self) -> usize {
        self.num.degree_or_zero()
    }

    fn deg_den(&self) -> usize {
        self.den.degree_or_zero()
    }

    pub fn degree(&self) -> usize {
        self.deg_num().max(self.deg_den())
    }

    pub fn check_coprime(&self) -> Result<(), MapError> {
        if self.deg_num() == 0 || self.deg_den() == 0 {
            return Ok(());
        }
        let num_roots = self.num.roots(1e-6)?;
        let den_roots = self.den.roots(1e-6)?;
        for p in &num_roots {
            for q in &den_roots {
                if (p.value - q.value).norm() <= COPRIME_TOL * (1.0 + q.value.norm()) {
                    return Err(MapError::NotCoprime {
                        num_root: p.value,
                        den_root: q.value,
                    });
                }
            }
        }
        Ok(())
    }

    fn pole_tolerance(&self, z: Complex64) -> f64 {
        POLE_REL * self.den.max_coeff_modulus() * (1.0 + z.norm()).powi(self.deg_den() as i32)
    }

    fn zero_tolerance(&self, z: Complex64) -> f64 {
        POLE_REL * self.num.max_coeff_modulus() * (1.0 + z.norm()).powi(self.deg_num() as i32)
    }

    /// Value at infinity.
    pub fn at_infinity(&self) -> SpherePoint {
        let (dp, dq) = (self.deg_num(), self.deg_den());
        if self.num.is_zero() {
            SpherePoint::Finite(Complex64::new(0.0, 0.0))
        } else if dp > dq {
            SpherePoint::Infinity
        } else if dp == dq {
            SpherePoint::from_complex(self.num.leading() / self.den.leading())
        } else {
            SpherePoint::Finite(Complex64::new(0.0, 0.0))
        }
    }

    /// Evaluation at a finite point.
    #[inline]
    pub fn eval_finite(&self, z: Complex64) -> Result<SpherePoint, MapError> {
        if z.norm() > CHART_SWITCH {
            return Ok(self.eval_far(z));
        }
        let q = self.den.eval_raw(z);
        if q.norm() <= self.pole_tolerance(z) {
            let p = self.num.eval_raw(z);
            if p.norm() <= self.zero_tolerance(z) {
                return Err(MapError::Indeterminate(z));
            }
            return Ok(SpherePoint::Infinity);
        }
        Ok(SpherePoint::from_complex(self.num.eval_raw(z) / q))
    }

    /// `f(z) = z^(dP - dQ) * P~(1/z) / Q~(1/z)` with reversed polynomials.
    fn eval_far(&self, z: Complex64) -> SpherePoint {
        let u = z.inv();
        let q = self.den_rev.eval_raw(u);
        let p = self.num_rev.eval_raw(u);
        if q == Complex64::new(0.0, 0.0) {
            return SpherePoint::Infinity;
        }
        let ratio = p / q;
        let k = self.deg_num() as i32 - self.deg_den() as i32;
        let log_mod = ratio.norm().ln() + k as f64 * z.norm().ln();
        if log_mod > 700.0 {
            return SpherePoint::Infinity;
        }
        if log_mod < -700.0 {
            return SpherePoint::Finite(Complex64::new(0.0, 0.0));
        }
        SpherePoint::from_complex(ratio * z.powi(k))
    }

    pub fn eval(&self, z: SpherePoint) -> Result<SpherePoint, MapError> {
        match z {
            SpherePoint::Infinity => Ok(self.at_infinity()),
            SpherePoint::Finite(z) => self.eval_finite(z),
        }
    }

    /// `n`-fold composition.
    pub fn iterate(&self, z: SpherePoint, n: usize) -> Result<SpherePoint, MapError> {
        (0..n).try_fold(z, |acc, _| self.eval(acc))
    }

    /// `w -> f(1/w)`: `f` read in the source chart at infinity.
    pub fn source_inverted(&self) -> RationalMap {
        let (dp, dq) = (self.deg_num(), self.deg_den());
        let num = self.num_rev.shift_up(dq.saturating_sub(dp));
        let den = self.den_rev.shift_up(dp.saturating_sub(dq));
        RationalMap::new_any_degree(num, den).expect("reversed denominator is nonzero")
    }

    /// `w -> 1/f(1/w)`: conjugation by `z -> 1/z`.
    pub fn inverted(&self) -> RationalMap {
        let (dp, dq) = (self.deg_num(), self.deg_den());
        let num = self.den_rev.shift_up(dp.saturating_sub(dq));
        let den = self.num_rev.shift_up(dq.saturating_sub(dp));
        RationalMap::new_any_degree(num, den).expect("map numerator is nonzero")
    }

    /// Derivative in the natural charts: the source chart is `1/z` at
    /// infinity and the target chart is `1/f` where `f(z) = inf`. At a fixed
    /// point this is the multiplier.
    pub fn derivative_at(&self, z: SpherePoint) -> Result<Complex64, MapError> {
        let value = match z {
            SpherePoint::Infinity => {
                let chart = if self.at_infinity().is_infinity() {
                    self.inverted()
                } else {
                    self.source_inverted()
                };
                return chart.derivative_at(SpherePoint::Finite(Complex64::new(0.0, 0.0)));
            }
            SpherePoint::Finite(z) => {
                if z.norm() > CHART_SWITCH {
                    // Leave the far region to the chart at infinity only when
                    // the point is effectively infinite.
                    let q = self.den.eval_raw(z);
                    self.wronskian.eval_raw(z) / (q * q)
                } else {
                    let q = self.den.eval_raw(z);
                    if q.norm() <= self.pole_tolerance(z) {
                        let p = self.num.eval_raw(z);
                        if p.norm() <= self.zero_tolerance(z) {
                            return Err(MapError::Indeterminate(z));
                        }
                        // d/dz (Q/P) = -W / P^2
                        -self.wronskian.eval_raw(z) / (p * p)
                    } else {
                        self.wronskian.eval_raw(z) / (q * q)
                    }
                }
            }
        };
        if value.re.is_finite() && value.im.is_finite() {
            Ok(value)
        } else {
            Err(MapError::Range(z))
        }
    }

    /// Second derivative at a finite non-pole point.
    pub fn second_derivative_at(&self, z: Complex64) -> Result<Complex64, MapError> {
        let q = self.den.eval_raw(z);
        if q.norm() <= self.pole_tolerance(z) {
            return Err(MapError::Range(SpherePoint::Finite(z)));
        }
        let w = self.wronskian.eval_raw(z);
        let dw = self.wronskian.derivative().eval_raw(z);
        let dq = self.dden.eval_raw(z);
        Ok((dw * q - 2.0 * w * dq) / (q * q * q))
    }

    /// Local degree at infinity.
    pub fn local_degree_at_infinity(&self) -> usize {
        let (dp, dq) = (self.deg_num(), self.deg_den());
        if dp != dq {
            return dp.abs_diff(dq);
        }
        // f(1/w) - f(inf) = (A - a B) / B with A(0)/B(0) = a.
        let chart = self.source_inverted();
        let a = self.num.leading() / self.den.leading();
        let diff = &chart.num - &chart.den.scale(a);
        let scale = chart.num.max_coeff_modulus().max(chart.den.max_coeff_modulus() * a.norm());
        let order = diff
            .coeffs()
            .iter()
            .take_while(|c| c.norm() <= 1e-10 * scale)
            .count();
        order.max(1)
    }

    /// Critical points with local degrees. Finite ones are the roots of the
    /// Wronskian `P'Q - PQ'` (local degree = multiplicity + 1); infinity is
    /// appended when its local degree is at least two.
    pub fn critical_points(&self, tol: f64) -> Result<Vec<CriticalPoint>, MapError> {
        let mut out = Vec::new();
        if self.wronskian.degree_or_zero() > 0 {
            for r in self.wronskian.roots(tol)? {
                out.push(CriticalPoint {
                    location: SpherePoint::Finite(r.value),
                    local_degree: r.multiplicity + 1,
                });
            }
        }
        let d_inf = self.local_degree_at_infinity();
        if d_inf >= 2 {
            out.push(CriticalPoint {
                location: SpherePoint::Infinity,
                local_degree: d_inf,
            });
        }
        Ok(out)
    }

    /// Fixed points with multipliers: roots of `P - zQ`, plus infinity when
    /// `deg P > deg Q`.
    pub fn fixed_points(&self, tol: f64) -> Result<Vec<FixedPointInfo>, MapError> {
        let z_den = self.den.shift_up(1);
        let poly = &self.num - &z_den;
        let mut out = Vec::new();
        if poly.degree_or_zero() > 0 {
            for r in poly.roots(tol)? {
                let location = SpherePoint::Finite(r.value);
                let multiplier = self.derivative_at(location)?;
                out.push(FixedPointInfo {
                    location,
                    multiplier,
                    multiplicity: r.multiplicity,
                    class: FixedPointClass::from_multiplier(multiplier),
                });
            }
        }
        if self.deg_num() > self.deg_den() {
            let multiplier = self.derivative_at(SpherePoint::Infinity)?;
            out.push(FixedPointInfo {
                location: SpherePoint::Infinity,
                multiplier,
                multiplicity: 1,
                class: FixedPointClass::from_multiplier(multiplier),
            });
        }
        Ok(out)
    }

    /// `self o inner`, expanded over the homogenised form of `self`.
    pub fn compose(&self, inner: &RationalMap) -> RationalMap {
        let d = self.degree();
        let (p, q) = (&inner.num, &inner.den);
        let mut p_pows = vec![Poly::constant(Complex64::new(1.0, 0.0))];
        let mut q_pows = vec![Poly::constant(Complex64::new(1.0, 0.0))];
        for k in 1..=d {
            p_pows.push(&p_pows[k - 1] * p);
            q_pows.push(&q_pows[k - 1] * q);
        }
        let homogenise = |outer: &Poly| {
            (0..=d).fold(Poly::zero(), |acc, k| {
                let term = (&p_pows[k] * &q_pows[d - k]).scale(outer.coeff(k));
                &acc + &term
            })
        };
        RationalMap::new_any_degree(homogenise(&self.num), homogenise(&self.den))
            .expect("composition of nonconstant maps has a nonzero denominator")
    }

    /// `f^k` as a single rational map; `k = 0` is the identity.
    pub fn iterate_map(&self, k: usize) -> RationalMap {
        let identity = RationalMap::new_any_degree(
            Poly::monomial(Complex64::new(1.0, 0.0), 1),
            Poly::constant(Complex64::new(1.0, 0.0)),
        )
        .expect("identity");
        (0..k).fold(identity, |acc, _| self.compose(&acc))
    }

    /// Count of poles (with multiplicity) strictly inside the disk.
    pub fn poles_in_disk(&self, center: Complex64, radius: f64) -> Result<usize, MapError> {
        if self.deg_den() == 0 {
            return Ok(0);
        }
        Ok(self
            .den
            .roots(1e-8)?
            .iter()
            .filter(|r| (r.value - center).norm() < radius)
            .map(|r| r.multiplicity)
            .sum())
    }
}

/// Convenience for the classic test map `z -> z^2`.
pub fn square_map() -> RationalMap {
    RationalMap::new(
        Poly::monomial(Complex64::new(1.0, 0.0), 2),
        Poly::constant(Complex64::new(1.0, 0.0)),
    )
    .expect("z^2 is a valid map")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_square_map() {
        let f = square_map();
        assert_eq!(f.eval(SpherePoint::new(2.0, 0.0)).unwrap(), SpherePoint::new(4.0, 0.0));
        assert_eq!(f.eval(SpherePoint::Infinity).unwrap(), SpherePoint::Infinity);
        assert_eq!(f.derivative_at(SpherePoint::new(1.0, 0.0)).unwrap(), c(2.0, 0.0));
    }

    #[test]
    fn pole_maps_to_infinity_and_indeterminate_is_error() {
        // 1/z
        let f = RationalMap::new_any_degree(Poly::from_real(&[1.0]), Poly::from_real(&[0.0, 1.0]))
            .unwrap();
        assert_eq!(f.eval(SpherePoint::new(0.0, 0.0)).unwrap(), SpherePoint::Infinity);
        // z/z is not coprime
        let g = RationalMap::new_any_degree(Poly::from_real(&[0.0, 1.0]), Poly::from_real(&[0.0, 1.0]))
            .unwrap();
        assert!(matches!(g.eval(SpherePoint::new(0.0, 0.0)), Err(MapError::Indeterminate(_))));
    }

    #[test]
    fn constructor_rejects_common_roots_and_low_degree() {
        let num = Poly::from_roots(&[c(1.0, 0.0), c(2.0, 0.0)]);
        let den = Poly::from_roots(&[c(1.0, 0.0), c(3.0, 0.0)]);
        assert!(matches!(RationalMap::new(num, den), Err(MapError::NotCoprime { .. })));
        let lin = RationalMap::new(Poly::from_real(&[3.0, 1.0]), Poly::from_real(&[1.0]));
        assert!(matches!(lin, Err(MapError::Degree(1, 2))));
    }

    #[test]
    fn far_chart_agrees_with_direct_evaluation() {
        // (z^3 + 2) / (z - 1): evaluate just past the chart switch.
        let f = RationalMap::new(Poly::from_real(&[2.0, 0.0, 0.0, 1.0]), Poly::from_real(&[-1.0, 1.0]))
            .unwrap();
        let z = c(2e8, 1e8);
        let direct = (z * z * z + 2.0) / (z - 1.0);
        let far = f.eval_finite(z).unwrap().finite().unwrap();
        assert!((far - direct).norm() / direct.norm() < 1e-12);
    }

    #[test]
    fn infinity_local_degree_and_multiplier() {
        // z^3 + 0.01 / z^3 = (z^6 + 0.01) / z^3
        let f = RationalMap::new(
            Poly::from_real(&[0.01, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
            Poly::monomial(c(1.0, 0.0), 3),
        )
        .unwrap();
        assert_eq!(f.local_degree_at_infinity(), 3);
        assert_eq!(f.derivative_at(SpherePoint::Infinity).unwrap(), c(0.0, 0.0));
        // Mobius-like degree-2 map with f(inf) finite and simple: (2z^2 + 1)/(z^2 + z)
        let g = RationalMap::new(Poly::from_real(&[1.0, 0.0, 2.0]), Poly::from_real(&[0.0, 1.0, 1.0]))
            .unwrap();
        assert_eq!(g.local_degree_at_infinity(), 1);
    }

    #[test]
    fn chordal_distance_basics() {
        let inf = SpherePoint::Infinity;
        assert_eq!(chordal_distance(inf, inf), 0.0);
        assert!((chordal_distance(SpherePoint::new(0.0, 0.0), inf) - 2.0).abs() < 1e-15);
        let d = chordal_distance(SpherePoint::new(1e200, 0.0), inf);
        assert!(d < 1e-150);
    }

    #[test]
    fn classification_bands() {
        assert_eq!(FixedPointClass::from_multiplier(c(0.0, 0.0)), FixedPointClass::Superattracting);
        assert_eq!(FixedPointClass::from_multiplier(c(0.5, 0.0)), FixedPointClass::Attracting);
        assert_eq!(
            FixedPointClass::from_multiplier(c(1.0 + 5e-7, 0.0)),
            FixedPointClass::ParabolicCandidate
        );
        assert_eq!(FixedPointClass::from_multiplier(c(0.0, 1.5)), FixedPointClass::Repelling);
    }
}
