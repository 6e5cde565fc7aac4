//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails or overruns its time budget.

use std::time::{Duration, Instant};

use carpetlab::criterion::{self, CondA, CondC, CondD, CriterionOptions, CriterionReport, Verdict};
use carpetlab::dynamics::{detect_cycle, TrapConfig};
use carpetlab::families::{rho_coefficients, semiconjugacy_residual};
use carpetlab::geometry::{self, winding_number, JordanCurveSamples, Monotone, DEFAULT_GRID, DEFAULT_SAMPLES};
use carpetlab::ratmap::FixedPointClass;
use carpetlab::render::{self, Palette, PixelClass, RenderOptions};
use carpetlab::solve::{self, ParamProblem};
use carpetlab::{Complex64, FamilySpec, Poly, RationalMap, SpherePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, u64);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn finite(p: SpherePoint) -> Result<Complex64, String> {
    p.finite().ok_or_else(|| "unexpected infinity".to_string())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_complex(r: &mut ChaCha8Rng, half: f64) -> Complex64 {
    c(r.gen_range(-half..half), r.gen_range(-half..half))
}

/// Random `rho` at distance at least 0.05 from every excluded value.
fn admissible_rho(r: &mut ChaCha8Rng) -> Complex64 {
    let excluded = [c(0.0, 0.0), c(1.0, 0.0), c(1.5, 0.0), c(2.0, 5f64.sqrt()), c(2.0, -(5f64.sqrt()))];
    loop {
        let rho = random_complex(r, 30.0);
        if excluded.iter().all(|e| (rho - e).norm() > 0.05) {
            return rho;
        }
    }
}

fn parabolic_construction() -> Outcome {
    let mut r = rng(1);
    let mut rhos: Vec<Complex64> = (0..50).map(|_| admissible_rho(&mut r)).collect();
    rhos.push(c(18.0, 0.0));
    let (mut worst_value, mut worst_slope) = (0.0f64, 0.0f64);
    for rho in rhos {
        let f = FamilySpec::GRho { rho }.build().map_err(|e| e.to_string())?;
        let one = SpherePoint::Finite(c(1.0, 0.0));
        let v = finite(f.eval(one).map_err(|e| e.to_string())?)?;
        let d = f.derivative_at(one).map_err(|e| e.to_string())?;
        worst_value = worst_value.max((v - 1.0).norm());
        worst_slope = worst_slope.max((d - 1.0).norm());
    }
    ensure(worst_value <= 1e-9 && worst_slope <= 1e-8, || {
        format!("max |g(1) - 1| = {worst_value:.2e}, max |g'(1) - 1| = {worst_slope:.2e}")
    })?;
    Ok(format!("max |g(1)-1| {worst_value:.1e}, max |g'(1)-1| {worst_slope:.1e}"))
}

fn named_constants() -> Outcome {
    let l4 = solve::lambda4().map_err(|e| e.to_string())?.value;
    ensure((l4.re - 0.31661929).abs() <= 1e-6 && l4.im == 0.0, || format!("lambda4 = {l4}"))?;
    let f4 = FamilySpec::F4 { lambda: l4 }.build().map_err(|e| e.to_string())?;
    let cycle = detect_cycle(&f4, SpherePoint::new(-0.5, 0.0), &TrapConfig::default()).map_err(|e| e.to_string())?;
    ensure(cycle.period == 6 && cycle.residual <= 1e-10, || {
        format!("cycle period {} residual {:.2e}", cycle.period, cycle.residual)
    })?;

    let a = solve::solve_parameter(&ParamProblem::alpha0(), 100).map_err(|e| e.to_string())?.value;
    let closed = (1.0 - 33f64.sqrt()) / 12.0;
    ensure((a - closed).norm() <= 1e-7, || format!("alpha0 = {a}, closed form {closed}"))?;
    let h = FamilySpec::HAlpha { alpha: a }.build().map_err(|e| e.to_string())?;
    let hz = finite(h.eval(SpherePoint::Finite(6.0 * a - 2.0)).map_err(|e| e.to_string())?)?;
    ensure((hz - 1.0).norm() <= 1e-9, || format!("|h(z_alpha) - 1| = {:.2e}", (hz - 1.0).norm()))?;

    let c0 = solve::solve_parameter(&ParamProblem::c0(), 100).map_err(|e| e.to_string())?.value;
    ensure((c0 - c(0.0, 2f64.sqrt())).norm() <= 1e-8, || format!("c0 = {c0}"))?;
    let g = FamilySpec::G { c: c0 }.build().map_err(|e| e.to_string())?;
    let zc = 2.0 * (1.0 + 2.0 * c0) / (c0 - 4.0);
    let gz = finite(g.eval(SpherePoint::Finite(zc)).map_err(|e| e.to_string())?)?;
    ensure((gz - 1.0).norm() <= 1e-9, || format!("|G(z_c) - 1| = {:.2e}", (gz - 1.0).norm()))?;
    Ok(format!(
        "lambda4 {:.8}, period {} residual {:.1e}, alpha0 {:.8}, c0 {:.8}i",
        l4.re, cycle.period, cycle.residual, a.re, c0.im
    ))
}

/// Root of `8 (x-1)^2 (x+8) - 27 x^2` in `[lo, hi]` by bisection.
fn f3_fixed_point_oracle(mut lo: f64, mut hi: f64) -> f64 {
    let p = |x: f64| 8.0 * (x - 1.0).powi(2) * (x + 8.0) - 27.0 * x * x;
    assert!(p(lo) * p(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(lo) * p(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn f3_fixed_points() -> Outcome {
    let f = FamilySpec::F3.build().map_err(|e| e.to_string())?;
    let mut real: Vec<(f64, FixedPointClass)> = f
        .fixed_points(1e-9)
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter_map(|p| p.location.finite().filter(|z| z.im.abs() < 1e-9).map(|z| (z.re, p.class)))
        .collect();
    real.sort_by(|a, b| a.0.total_cmp(&b.0));
    ensure(real.len() == 3, || format!("{} real finite fixed points", real.len()))?;
    ensure(real.iter().all(|p| p.1 == FixedPointClass::Repelling), || format!("{real:?}"))?;
    let (x1, x2, x3) = (real[0].0, real[1].0, real[2].0);
    ensure(-8.0 < x1 && x1 < 0.0 && 0.0 < x2 && x2 < 1.0 && 1.0 < x3 && x3 < 4.0, || {
        format!("ordering violated: {x1} {x2} {x3}")
    })?;
    ensure((x1 - -5.57371629).abs() <= 1e-6, || format!("xi1 = {x1}"))?;
    let oracle = [f3_fixed_point_oracle(-8.0, 0.0), f3_fixed_point_oracle(0.0, 1.0), f3_fixed_point_oracle(1.0, 4.0)];
    let gap = (x1 - oracle[0]).abs().max((x2 - oracle[1]).abs()).max((x3 - oracle[2]).abs());
    ensure(gap <= 1e-9, || format!("bisection oracle differs by {gap:.2e}"))?;
    Ok(format!("xi = {x1:.8}, {x2:.8}, {x3:.8}"))
}

fn nearest_critical(f: &RationalMap, z: Complex64) -> Result<f64, String> {
    Ok(f.critical_points(1e-8)
        .map_err(|e| e.to_string())?
        .iter()
        .filter_map(|cp| cp.location.finite())
        .map(|w| (w - z).norm() / (1.0 + z.norm()))
        .fold(f64::INFINITY, f64::min))
}

fn critical_formulas() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (d0, d_inf) = (r.gen_range(1..=4u32), r.gen_range(2..=4u32));
        let lambda = random_complex(&mut r, 2.0);
        let spec = FamilySpec::F { lambda, d0, d_inf };
        worst = worst.max(nearest_critical(&spec.build().map_err(|e| e.to_string())?, c(-(d0 as f64) / d_inf as f64, 0.0))?);

        let cp = loop {
            let cp = random_complex(&mut r, 6.0);
            if [0.0, 1.0, 4.0, -0.5].iter().all(|&e| (cp - e).norm() > 0.05) {
                break cp;
            }
        };
        let g = FamilySpec::G { c: cp }.build().map_err(|e| e.to_string())?;
        worst = worst.max(nearest_critical(&g, 2.0 * (1.0 + 2.0 * cp) / (cp - 4.0))?);

        let rho = admissible_rho(&mut r);
        let (a, _) = rho_coefficients(rho);
        let g = FamilySpec::GRho { rho }.build().map_err(|e| e.to_string())?;
        worst = worst.max(nearest_critical(&g, -2.0 * rho - 2.0 * a)?);

        let alpha = loop {
            let al = random_complex(&mut r, 2.0);
            if [0.0, 1.0 / 3.0, 0.5].iter().all(|&e| (al - e).norm() > 0.05) {
                break al;
            }
        };
        let h = FamilySpec::HAlpha { alpha }.build().map_err(|e| e.to_string())?;
        worst = worst.max(nearest_critical(&h, 6.0 * alpha - 2.0)?);
    }
    ensure(worst <= 1e-8, || format!("worst relative distance {worst:.2e}"))?;
    Ok(format!("worst relative distance {worst:.1e} over 200 maps"))
}

fn semiconjugacy() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mu = Complex64::from_polar(r.gen_range(0.01..1.0), r.gen_range(0.0..std::f64::consts::TAU));
        let (d0, d_inf) = (r.gen_range(1..=4u32), r.gen_range(2..=4u32));
        worst = worst.max(semiconjugacy_residual(mu, d0, d_inf, 100).map_err(|e| e.to_string())?);
    }
    ensure(worst <= 1e-8, || format!("worst residual {worst:.2e}"))?;
    Ok(format!("worst chordal residual {worst:.1e}"))
}

fn parabolic_bundle() -> Outcome {
    let spec = FamilySpec::g_rho0();
    let f = spec.build().map_err(|e| e.to_string())?;
    let z = spec.free_critical_points()[0];
    ensure((z - c(-3092.0 / 87.0, 0.0)).norm() <= 1e-8, || format!("z_rho0 = {z}"))?;
    let z3 = finite(f.iterate(SpherePoint::Finite(z), 3).map_err(|e| e.to_string())?)?;
    ensure(z3.im.abs() < 1e-9 && 0.0 < z3.re && z3.re < 1.0, || format!("third iterate {z3}"))?;
    let m = geometry::interval_monotone_image(&f, 0.0, 1.0, 10001).map_err(|e| e.to_string())?;
    ensure(
        m.monotone == Monotone::Increasing && m.image_bounds.0 >= 0.5 && m.image_bounds.1 <= 1.0 + 1e-12,
        || format!("{m:?}"),
    )?;
    let cert = criterion::plm_for(&spec, DEFAULT_SAMPLES, DEFAULT_GRID)
        .map_err(|e| e.to_string())?
        .ok_or("no certificate")?;
    let within = cert.domain_in_target;
    ensure(within.contained && within.min_distance > 0.0, || format!("{within:?}"))?;
    ensure(cert.degree == 2 && cert.iterate == 1, || format!("degree {} at iterate {}", cert.degree, cert.iterate))?;
    Ok(format!(
        "third iterate {:.6}, image [{:.4}, {:.4}], margin {:.3}, degree {}",
        z3.re, m.image_bounds.0, m.image_bounds.1, within.min_distance, cert.degree
    ))
}

fn cubic_bundle() -> Outcome {
    let spec = FamilySpec::h_alpha0();
    let f = spec.build().map_err(|e| e.to_string())?;
    let cert = criterion::plm_for(&spec, DEFAULT_SAMPLES, DEFAULT_GRID)
        .map_err(|e| e.to_string())?
        .ok_or("no certificate")?;
    let within = cert.domain_in_target;
    ensure(within.contained && within.min_distance > 0.0, || format!("{within:?}"))?;
    ensure(cert.degree == 2 && cert.iterate == 2, || format!("degree {} at iterate {}", cert.degree, cert.iterate))?;
    let disk = geometry::RegionSpec::Disk {
        center: c(0.0, 0.0),
        radius: 0.1,
    };
    let d = geometry::region_disjoint(&f, &disk, DEFAULT_SAMPLES).map_err(|e| e.to_string())?;
    ensure(d.disjoint && d.separation > 0.0, || format!("{d:?}"))?;
    Ok(format!(
        "margin {:.2e}, separation {:.2}, degree {}",
        within.min_distance, d.separation, cert.degree
    ))
}

fn report_for(spec: &FamilySpec) -> Result<CriterionReport, String> {
    criterion::evaluate(spec, &CriterionOptions::default()).map_err(|e| format!("{}: {e}", spec.name()))
}

fn counter_examples() -> Outcome {
    let lambda4 = solve::lambda4().map_err(|e| e.to_string())?.value;
    let cases = [
        (FamilySpec::f1(), 0),
        (FamilySpec::F2, 1),
        (FamilySpec::F3, 2),
        (FamilySpec::F4 { lambda: lambda4 }, 3),
    ];
    let mut notes = Vec::new();
    for (spec, failing) in cases {
        let r = report_for(&spec)?;
        let mut expected = [Some(true); 4];
        expected[failing] = Some(false);
        ensure(r.pattern() == expected, || format!("{}: pattern {:?}", spec.name(), r.pattern()))?;
        ensure(matches!(r.verdict, Verdict::NotCarpet { .. }), || format!("{}: {:?}", spec.name(), r.verdict))?;
        match (&spec, &r.cond_a, &r.cond_c, &r.cond_d) {
            (FamilySpec::F1 { .. }, CondA::Fails { .. }, _, CondD::Holds { entries }) => {
                let comps = r.evidence.mask_components.unwrap_or(0);
                ensure(comps >= 2, || format!("f1 mask has {comps} escape components"))?;
                notes.push(format!("f1 {} escaping critical orbits, {comps} components", entries.len()));
            }
            (FamilySpec::F3, _, CondC::Fails { d, deg_u, .. }, _) => {
                let (_, d_inf, ds) = spec.exponents().ok_or("f3 has no exponents")?;
                let mut ds = ds;
                ds.sort_unstable_by(|a, b| b.cmp(a));
                ensure(ds == [2, 1] && d_inf == 2 && *deg_u == 2 && *d <= *deg_u, || {
                    format!("f3 exponents {ds:?} witness d {d} deg_u {deg_u}")
                })?;
                notes.push(format!("f3 d {d} <= deg_u {deg_u}"));
            }
            (FamilySpec::F4 { .. }, _, _, CondD::Fails { witness, .. }) => {
                let f = spec.build().map_err(|e| e.to_string())?;
                let cycle = detect_cycle(&f, *witness, &TrapConfig::default()).map_err(|e| e.to_string())?;
                ensure(cycle.period == 6, || format!("f4 cycle period {}", cycle.period))?;
                notes.push("f4 period 6".into());
            }
            (FamilySpec::F2, ..) => notes.push("f2 (b)".into()),
            _ => return Err(format!("{}: unexpected report shape", spec.name())),
        }
    }
    Ok(notes.join(", "))
}

fn positive_verdicts() -> Outcome {
    let mut notes = Vec::new();
    for spec in [FamilySpec::g_c0(), FamilySpec::g_rho0()] {
        let r = report_for(&spec)?;
        ensure(matches!(r.verdict, Verdict::Carpet { .. }), || format!("{}: {:?}", spec.name(), r.verdict))?;
        match &r.cond_a {
            CondA::HypothesisMet { via, k, .. } => notes.push(format!("{} via {via} k={k:?}", spec.name())),
            other => return Err(format!("{}: {other:?}", spec.name())),
        }
    }
    let h = report_for(&FamilySpec::h_alpha0())?;
    let cert = h.evidence.polynomial_like.as_ref().ok_or("h-alpha report has no certificate")?;
    ensure(cert.passed && cert.degree == 2, || format!("h-alpha certificate {cert:?}"))?;
    notes.push("h-alpha certified".into());
    Ok(notes.join(", "))
}

fn rendering() -> Outcome {
    let spec = FamilySpec::f1();
    let one = render::render_family(&spec, None, (512, 512), None, &RenderOptions { workers: Some(1) })
        .map_err(|e| e.to_string())?;
    let eight = render::render_family(&spec, None, (512, 512), None, &RenderOptions { workers: Some(8) })
        .map_err(|e| e.to_string())?;
    ensure(one.to_ppm(Palette::Basins) == eight.to_ppm(Palette::Basins), || "renders differ".into())?;
    let alt = one.alternations_along(c(0.1, 0.0), c(1.4, 0.0));
    ensure(alt >= 3, || format!("{alt} alternations"))?;
    let plane = render::render_param_plane(
        &FamilySpec::g_c0(),
        render::param_window(),
        (512, 512),
        &TrapConfig::default(),
        &RenderOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let p = plane.pixel_at(c(0.0, 2f64.sqrt())).ok_or("c0 outside the window")?;
    ensure(p.class == PixelClass::Escaping, || format!("c0 pixel {p:?}"))?;
    Ok(format!("identical bytes, {alt} alternations, c0 escapes after {}", p.value))
}

/// Zeros and poles are chosen, so the argument principle count is known.
fn random_map(r: &mut ChaCha8Rng) -> (RationalMap, Vec<Complex64>, Vec<Complex64>) {
    loop {
        let (np, nq) = (r.gen_range(1..=4usize), r.gen_range(0..=3usize));
        let zeros: Vec<Complex64> = (0..np).map(|_| random_complex(r, 2.0)).collect();
        let poles: Vec<Complex64> = (0..nq).map(|_| random_complex(r, 2.0)).collect();
        let separated = zeros.iter().all(|z| poles.iter().all(|p| (z - p).norm() > 0.1));
        if np.max(nq) < 2 || !separated {
            continue;
        }
        let num = Poly::from_roots(&zeros).scale(random_complex(r, 2.0) + c(3.0, 0.0));
        let den = Poly::from_roots(&poles);
        if let Ok(f) = RationalMap::new(num, den) {
            return (f, zeros, poles);
        }
    }
}

/// Angle-sum winding number over a curve refined to `n` points per edge.
fn brute_winding(points: &[Complex64], p: Complex64, n: usize) -> i64 {
    let mut total = 0.0;
    for k in 0..points.len() {
        let (a, b) = (points[k], points[(k + 1) % points.len()]);
        for j in 0..n {
            let u = a + (b - a) * (j as f64 / n as f64) - p;
            let v = a + (b - a) * ((j + 1) as f64 / n as f64) - p;
            total += (v / u).arg();
        }
    }
    (total / std::f64::consts::TAU).round() as i64
}

fn properties() -> Outcome {
    let mut r = rng(11);
    let mut specs = vec![
        FamilySpec::f1(),
        FamilySpec::F2,
        FamilySpec::F3,
        FamilySpec::F4 { lambda: c(0.3, 0.0) },
        FamilySpec::g_c0(),
        FamilySpec::g_rho0(),
        FamilySpec::h_alpha0(),
        FamilySpec::MorosawaPilgrim { nu: c(1.0, 0.0) },
        FamilySpec::McMullen { mu: c(0.01, 0.0), d0: 2, d_inf: 3 },
        FamilySpec::F { lambda: c(0.2, 0.1), d0: 1, d_inf: 2 },
    ];
    for _ in 0..20 {
        specs.push(FamilySpec::G { c: random_complex(&mut r, 5.0) + c(0.03, 0.07) });
        specs.push(FamilySpec::GRho { rho: admissible_rho(&mut r) });
    }
    for spec in &specs {
        let f = spec.build().map_err(|e| e.to_string())?;
        let count: usize = f.critical_points(1e-8).map_err(|e| e.to_string())?.iter().map(|p| p.local_degree - 1).sum();
        ensure(count == 2 * f.degree() - 2, || format!("{}: critical count {count}, degree {}", spec.name(), f.degree()))?;
    }

    let mut checked = 0;
    while checked < 100 {
        let (f, zeros, poles) = random_map(&mut r);
        let center = random_complex(&mut r, 1.0);
        let radius = r.gen_range(0.3..2.5);
        let clear = |s: &[Complex64]| s.iter().all(|z| ((z - center).norm() - radius).abs() > 0.05);
        if !clear(&zeros) || !clear(&poles) {
            continue;
        }
        let inside = |s: &[Complex64]| s.iter().filter(|z| (*z - center).norm() < radius).count() as i64;
        let expected = inside(&zeros) - inside(&poles);
        let circle = geometry::sample_boundary(&geometry::RegionSpec::Disk { center, radius }, 1024)
            .map_err(|e| e.to_string())?;
        let degree = geometry::proper_degree(&f, 1, &circle, &[c(0.0, 0.0)]).map_err(|e| e.to_string())?;
        ensure(degree == expected, || format!("proper degree {degree}, zeros minus poles {expected}"))?;
        let image: Vec<Complex64> = circle
            .points
            .iter()
            .map(|&z| finite(f.eval(SpherePoint::Finite(z)).map_err(|e| e.to_string())?))
            .collect::<Result<_, _>>()?;
        let w = winding_number(&JordanCurveSamples::new(image.clone()), c(0.0, 0.0)).map_err(|e| e.to_string())?;
        let brute = brute_winding(&image, c(0.0, 0.0), 8);
        ensure(w == brute && w == expected, || format!("winding {w}, brute force {brute}, expected {expected}"))?;
        checked += 1;
    }

    let mut worst = 0.0f64;
    let mut samples = 0;
    while samples < 500 {
        let (f, _, poles) = random_map(&mut r);
        let z = random_complex(&mut r, 3.0);
        if poles.iter().any(|p| (z - p).norm() < 0.2) {
            continue;
        }
        let h = 1e-5 * (1.0 + z.norm());
        let at = |w: Complex64| finite(f.eval(SpherePoint::Finite(w)).map_err(|e| e.to_string())?);
        let fd = (at(z + h)? - at(z - h)?) / (2.0 * h);
        let d = f.derivative_at(SpherePoint::Finite(z)).map_err(|e| e.to_string())?;
        worst = worst.max((d - fd).norm() / d.norm().max(1.0));
        samples += 1;
    }
    ensure(worst <= 1e-5, || format!("derivative relative error {worst:.2e}"))?;
    Ok(format!("{} families, 100 contours, derivative error {worst:.1e}", specs.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("parabolic construction", parabolic_construction, 1),
        ("named constants", named_constants, 5),
        ("fixed points of f3", f3_fixed_points, 1),
        ("free critical point formulas", critical_formulas, 2),
        ("semi-conjugacy", semiconjugacy, 1),
        ("parabolic family bundle", parabolic_bundle, 60),
        ("cubic family bundle", cubic_bundle, 60),
        ("counter-example matrix", counter_examples, 120),
        ("positive verdicts", positive_verdicts, 120),
        ("rendering determinism and structure", rendering, 300),
        ("property suites", properties, 60),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(*budget);
        let (status, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("over the {budget} s budget; {d}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} {:>2} {name} ({:.2} s): {detail}", i + 1, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
