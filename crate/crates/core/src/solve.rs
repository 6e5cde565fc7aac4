//! Newton solves for the special parameter values and the constants table.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::families::{alpha0, FamilyError, FamilySpec};
use crate::ratmap::{chordal_distance, SpherePoint};

/// Printed value of `lambda_4`.
pub const LAMBDA4_PRINTED: f64 = 0.31661929;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolveError {
    #[error("Newton iteration diverged after {} iterates", trace.len())]
    Diverged { trace: Vec<Complex64> },
    #[error("parameter hit an excluded value: {0}")]
    Excluded(FamilyError),
    #[error("family has no free parameter")]
    NoParameter,
    #[error("tolerance must lie in (0, 1e-6], got {0}")]
    Tolerance(f64),
}

/// Point whose orbit defines the residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum OrbitStart {
    Fixed(Complex64),
    /// The family's free critical point at the current parameter.
    FreeCritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResidualKind {
    /// `f^period(point) - point`.
    Cycle { point: OrbitStart, period: usize },
    /// `f^k(point) - target`.
    Landing {
        point: OrbitStart,
        target: Complex64,
        k: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamProblem {
    pub family: FamilySpec,
    pub residual: ResidualKind,
    pub seed: Complex64,
    pub tol: f64,
    /// Restrict the parameter to the real axis.
    pub real: bool,
}

impl ParamProblem {
    pub fn lambda4() -> Self {
        ParamProblem {
            family: FamilySpec::F4 {
                lambda: Complex64::new(0.3, 0.0),
            },
            residual: ResidualKind::Cycle {
                point: OrbitStart::Fixed(Complex64::new(-0.5, 0.0)),
                period: 6,
            },
            seed: Complex64::new(0.3, 0.0),
            tol: 1e-12,
            real: true,
        }
    }

    pub fn alpha0() -> Self {
        ParamProblem {
            family: FamilySpec::h_alpha0(),
            residual: ResidualKind::Landing {
                point: OrbitStart::FreeCritical,
                target: Complex64::new(1.0, 0.0),
                k: 1,
            },
            seed: Complex64::new(-0.4, 0.0),
            tol: 1e-12,
            real: false,
        }
    }

    pub fn c0() -> Self {
        ParamProblem {
            family: FamilySpec::g_c0(),
            residual: ResidualKind::Landing {
                point: OrbitStart::FreeCritical,
                target: Complex64::new(1.0, 0.0),
                k: 1,
            },
            seed: Complex64::new(0.0, 1.4),
            tol: 1e-12,
            real: false,
        }
    }

    /// Residual at parameter `p`.
    pub fn residual_at(&self, p: Complex64) -> Result<Complex64, SolveError> {
        let spec = self.family.with_parameter(p).ok_or(SolveError::NoParameter)?;
        let f = spec.build().map_err(SolveError::Excluded)?;
        let start = |s: OrbitStart| match s {
            OrbitStart::Fixed(z) => Ok(z),
            OrbitStart::FreeCritical => spec
                .free_critical_points()
                .first()
                .copied()
                .ok_or(SolveError::NoParameter),
        };
        let (z, k, target) = match self.residual {
            ResidualKind::Cycle { point, period } => {
                let z = start(point)?;
                (z, period, z)
            }
            ResidualKind::Landing { point, target, k } => (start(point)?, k, target),
        };
        let nan = Complex64::new(f64::NAN, f64::NAN);
        Ok(match f.iterate(SpherePoint::Finite(z), k) {
            Ok(SpherePoint::Finite(w)) => w - target,
            _ => nan,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub value: Complex64,
    pub residual: f64,
    pub steps: usize,
}

fn newton(p: &ParamProblem, seed: Complex64, max_steps: usize) -> Result<Solution, SolveError> {
    let project = |z: Complex64| if p.real { Complex64::new(z.re, 0.0) } else { z };
    let mut x = project(seed);
    let mut trace = vec![x];
    let mut r = p.residual_at(x)?;
    for step in 0..max_steps {
        if r.norm() <= p.tol {
            return Ok(Solution {
                value: x,
                residual: r.norm(),
                steps: step,
            });
        }
        let h = 1e-7 * (1.0 + x.norm());
        let d = (p.residual_at(x + h)? - p.residual_at(x - h)?) / (2.0 * h);
        let mut dx = r / d;
        if p.real {
            dx = Complex64::new(dx.re, 0.0);
        }
        if !(dx.re.is_finite() && dx.im.is_finite()) {
            return Err(SolveError::Diverged { trace });
        }
        // Backtrack so the residual never grows by more than a factor.
        let mut t = 1.0;
        let (next, rn) = loop {
            let cand = project(x - t * dx);
            let rc = p.residual_at(cand)?;
            if rc.norm().is_finite() && rc.norm() < 2.0 * r.norm() || t < 1e-3 {
                break (cand, rc);
            }
            t *= 0.5;
        };
        if !rn.norm().is_finite() {
            return Err(SolveError::Diverged { trace });
        }
        // Finite differences cap the attainable accuracy: once the step is
        // below rounding, accept the better of the last two points.
        if (next - x).norm() <= 1e-15 * (1.0 + x.norm()) {
            let (value, res) = if rn.norm() < r.norm() { (next, rn) } else { (x, r) };
            if res.norm() <= 1e3 * p.tol {
                return Ok(Solution {
                    value,
                    residual: res.norm(),
                    steps: step + 1,
                });
            }
            return Err(SolveError::Diverged { trace });
        }
        x = next;
        r = rn;
        trace.push(x);
    }
    if r.norm() <= p.tol {
        return Ok(Solution {
            value: x,
            residual: r.norm(),
            steps: max_steps,
        });
    }
    Err(SolveError::Diverged { trace })
}

/// Newton in the parameter with a central-difference derivative. Falls back
/// to eight seeds on a small circle around the primary seed.
pub fn solve_parameter(p: &ParamProblem, max_steps: usize) -> Result<Solution, SolveError> {
    if !(p.tol > 0.0 && p.tol <= 1e-6) {
        return Err(SolveError::Tolerance(p.tol));
    }
    let first = match newton(p, p.seed, max_steps) {
        Ok(s) => return Ok(s),
        Err(e) => e,
    };
    let radius = 0.02 * (1.0 + p.seed.norm());
    for k in 0..8 {
        let offset = if p.real {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(sign * radius * (1 + k / 2) as f64 / 4.0, 0.0)
        } else {
            Complex64::from_polar(radius, std::f64::consts::TAU * k as f64 / 8.0)
        };
        if let Ok(s) = newton(p, p.seed + offset, max_steps) {
            return Ok(s);
        }
    }
    Err(first)
}

/// All real roots of a real residual in `[lo, hi]`, found by sign changes
/// on `samples` intervals and refined by Newton.
pub fn real_roots_in(p: &ParamProblem, lo: f64, hi: f64, samples: usize) -> Vec<Solution> {
    let val = |x: f64| {
        p.residual_at(Complex64::new(x, 0.0))
            .map(|r| r.re)
            .unwrap_or(f64::NAN)
    };
    let mut roots: Vec<Solution> = Vec::new();
    let xs: Vec<f64> = (0..=samples)
        .map(|k| lo + (hi - lo) * k as f64 / samples as f64)
        .collect();
    let vs: Vec<f64> = xs.iter().map(|&x| val(x)).collect();
    for k in 0..samples {
        let (mut a, mut b, mut fa) = (xs[k], xs[k + 1], vs[k]);
        let fb = vs[k + 1];
        if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let fm = val(m);
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
            if b - a <= 1e-15 * (1.0 + a.abs()) {
                break;
            }
        }
        let problem = ParamProblem {
            seed: Complex64::new(0.5 * (a + b), 0.0),
            real: true,
            ..p.clone()
        };
        let sol = newton(&problem, problem.seed, 50).unwrap_or_else(|_| {
            let x = Complex64::new(0.5 * (a + b), 0.0);
            Solution {
                value: x,
                residual: p.residual_at(x).map(|r| r.norm()).unwrap_or(f64::INFINITY),
                steps: 0,
            }
        });
        // Poles of the residual also change sign; keep genuine zeros only.
        if sol.residual <= 1e-8 && !roots.iter().any(|r| (r.value - sol.value).norm() < 1e-9) {
            roots.push(sol);
        }
    }
    roots
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantName {
    Lambda4,
    C0,
    Alpha0,
    Rho0Checks,
}

impl ConstantName {
    pub const ALL: [ConstantName; 4] = [
        ConstantName::Lambda4,
        ConstantName::C0,
        ConstantName::Alpha0,
        ConstantName::Rho0Checks,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lambda4" => Some(ConstantName::Lambda4),
            "c0" => Some(ConstantName::C0),
            "alpha0" => Some(ConstantName::Alpha0),
            "rho0-checks" | "rho0" => Some(ConstantName::Rho0Checks),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ConstantName::Lambda4 => "lambda4",
            ConstantName::C0 => "c0",
            ConstantName::Alpha0 => "alpha0",
            ConstantName::Rho0Checks => "rho0-checks",
        }
    }
}

/// One measured quantity against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            bound,
            passed: measured <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub name: String,
    pub value: Complex64,
    pub residual: f64,
    pub identity: String,
    pub checks: Vec<Check>,
    /// Other roots of the defining identity found nearby.
    pub other_roots: Vec<Complex64>,
    pub passed: bool,
}

fn report(
    name: ConstantName,
    value: Complex64,
    residual: f64,
    identity: &str,
    checks: Vec<Check>,
    other_roots: Vec<Complex64>,
) -> ConstantReport {
    ConstantReport {
        name: name.as_str().into(),
        value,
        residual,
        identity: identity.into(),
        passed: checks.iter().all(|c| c.passed),
        checks,
        other_roots,
    }
}

fn failed(name: ConstantName, identity: &str, why: String) -> ConstantReport {
    report(
        name,
        Complex64::new(f64::NAN, f64::NAN),
        f64::INFINITY,
        identity,
        vec![Check {
            name: why,
            measured: f64::INFINITY,
            bound: 0.0,
            passed: false,
        }],
        vec![],
    )
}

/// Solved value of `lambda_4` nearest the printed digits.
pub fn lambda4() -> Result<Solution, SolveError> {
    solve_parameter(&ParamProblem::lambda4(), 100)
}

/// Recomputes a named constant and checks its defining identity.
pub fn verify_constant(name: ConstantName) -> ConstantReport {
    match name {
        ConstantName::Lambda4 => {
            let identity = "f4^6(-1/2) = -1/2";
            let sol = match lambda4() {
                Ok(s) => s,
                Err(e) => return failed(name, identity, e.to_string()),
            };
            let all = real_roots_in(&ParamProblem::lambda4(), 0.25, 0.40, 3000);
            let others = all
                .iter()
                .map(|s| s.value)
                .filter(|v| (v - sol.value).norm() > 1e-9)
                .collect();
            report(
                name,
                sol.value,
                sol.residual,
                identity,
                vec![
                    Check::at_most("residual", sol.residual, 1e-9),
                    Check::at_most(
                        "distance to printed 0.31661929",
                        (sol.value.re - LAMBDA4_PRINTED).abs(),
                        1e-6,
                    ),
                ],
                others,
            )
        }
        ConstantName::C0 => {
            let identity = "G_c(z_c) = 1";
            let closed = Complex64::new(0.0, 2f64.sqrt());
            let sol = match solve_parameter(&ParamProblem::c0(), 100) {
                Ok(s) => s,
                Err(e) => return failed(name, identity, e.to_string()),
            };
            let at_closed = ParamProblem::c0()
                .residual_at(closed)
                .map(|r| r.norm())
                .unwrap_or(f64::INFINITY);
            report(
                name,
                closed,
                at_closed,
                identity,
                vec![
                    Check::at_most("residual at i sqrt 2", at_closed, 1e-9),
                    Check::at_most("solved vs i sqrt 2", (sol.value - closed).norm(), 1e-8),
                ],
                vec![],
            )
        }
        ConstantName::Alpha0 => {
            let identity = "h_alpha(6 alpha - 2) = 1";
            let closed = Complex64::new(alpha0(), 0.0);
            let sol = match solve_parameter(&ParamProblem::alpha0(), 100) {
                Ok(s) => s,
                Err(e) => return failed(name, identity, e.to_string()),
            };
            let at_closed = ParamProblem::alpha0()
                .residual_at(closed)
                .map(|r| r.norm())
                .unwrap_or(f64::INFINITY);
            report(
                name,
                closed,
                at_closed,
                identity,
                vec![
                    Check::at_most("residual at (1 - sqrt 33)/12", at_closed, 1e-9),
                    Check::at_most("solved vs closed form", (sol.value - closed).norm(), 1e-7),
                    Check::at_most(
                        "closed form vs -0.39538022",
                        (alpha0() + 0.39538022).abs(),
                        1e-8,
                    ),
                ],
                vec![],
            )
        }
        ConstantName::Rho0Checks => {
            let identity = "z_rho = -3092/87, g(1) = 1, g'(1) = 1";
            let f = match FamilySpec::g_rho0().build() {
                Ok(f) => f,
                Err(e) => return failed(name, identity, e.to_string()),
            };
            let expect = Complex64::new(-3092.0 / 87.0, 0.0);
            let crit = match f.critical_points(1e-10) {
                Ok(c) => c,
                Err(e) => return failed(name, identity, e.to_string()),
            };
            let nearest = crit
                .iter()
                .filter_map(|c| c.location.finite())
                .min_by(|a, b| (a - expect).norm().total_cmp(&(b - expect).norm()))
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            let one = SpherePoint::Finite(Complex64::new(1.0, 0.0));
            let g1 = f.eval(one).map(|v| chordal_distance(v, one)).unwrap_or(f64::INFINITY);
            let dg1 = f
                .derivative_at(one)
                .map(|d| (d - 1.0).norm())
                .unwrap_or(f64::INFINITY);
            let formula = FamilySpec::g_rho0().free_critical_points()[0];
            report(
                name,
                nearest,
                (nearest - expect).norm(),
                identity,
                vec![
                    Check::at_most("Wronskian critical point vs -3092/87", (nearest - expect).norm(), 1e-8),
                    Check::at_most("formula -2 rho - 2a vs -3092/87", (formula - expect).norm(), 1e-8),
                    Check::at_most("|g(1) - 1|", g1, 1e-9),
                    Check::at_most("|g'(1) - 1|", dg1, 1e-8),
                ],
                vec![],
            )
        }
    }
}

/// Every constant, for the JSON table.
pub fn constants_table() -> Vec<ConstantReport> {
    ConstantName::ALL.iter().map(|&n| verify_constant(n)).collect()
}
