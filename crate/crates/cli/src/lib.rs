//! Command-line pipelines over the `carpetlab` library.

pub mod args;

use std::path::{Path, PathBuf};

use carpetlab::criterion::{self, CriterionOptions, PlmSummary};
use carpetlab::dynamics::{TrapConfig, Window};
use carpetlab::families::FamilySpec;
use carpetlab::geometry::{interval_monotone_image, region_disjoint, RegionSpec};
use carpetlab::render::{self, ImageFormat, Palette, PixelClass, RasterImage, RenderOptions};
use carpetlab::solve::{self, ConstantName};
use carpetlab::Complex64;
use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use args::{Bundle, Cli, Command, JuliaArgs, OutputArgs, ParamArgs, PlmArgs, ReproArgs, SolveArgs, VerifyArgs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub bytes: u64,
}

/// One named pass/fail check in a report.
#[derive(Debug, Clone, Serialize)]
pub struct NamedCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl NamedCheck {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        NamedCheck {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: Value,
    pub results: Value,
    pub checks: Vec<NamedCheck>,
    pub manifest: Vec<ManifestEntry>,
    pub passed: bool,
}

impl Report {
    fn new(config: Value) -> Self {
        Report {
            tool: "carpetlab",
            version: env!("CARGO_PKG_VERSION"),
            config,
            results: Value::Null,
            checks: Vec::new(),
            manifest: Vec::new(),
            passed: true,
        }
    }

    fn check(&mut self, c: NamedCheck) {
        self.passed &= c.passed;
        self.checks.push(c);
    }
}

/// The report as one JSON document.
pub fn emit_report(report: &Report) -> Result<String, String> {
    serde_json::to_string_pretty(report).map_err(|e| e.to_string())
}

/// Runs the command line and returns the exit code. Reports go to stdout,
/// diagnostics to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let config = serde_json::to_value(&cli.command).unwrap_or(Value::Null);
    let mut report = Report::new(config);
    let outcome = match &cli.command {
        Command::Julia(a) => julia(a, &mut report),
        Command::ParamPlane(a) => param_plane(a, &mut report),
        Command::Verify(a) => verify(a, &mut report),
        Command::VerifyPlm(a) => verify_plm(a, &mut report),
        Command::Solve(a) => solve_cmd(a, &mut report),
        Command::Repro(a) => repro(a, &mut report),
    };
    if let Err(e) = outcome {
        eprintln!("carpetlab: {e}");
        return EXIT_USAGE;
    }
    match emit_report(&report) {
        Ok(text) => {
            use std::io::Write;
            let _ = writeln!(std::io::stdout().lock(), "{text}");
        }
        Err(e) => {
            eprintln!("carpetlab: cannot serialise report: {e}");
            return EXIT_USAGE;
        }
    }
    if report.passed {
        EXIT_OK
    } else {
        for c in report.checks.iter().filter(|c| !c.passed) {
            eprintln!("carpetlab: check failed: {} ({})", c.name, c.detail);
        }
        EXIT_FAILED
    }
}

fn render_options(out: &OutputArgs) -> RenderOptions {
    match out.workers {
        Some(n) => RenderOptions { workers: Some(n) },
        None => RenderOptions::from_env(),
    }
}

fn write_artifacts(img: &RasterImage, out: &OutputArgs, stem: &str, report: &mut Report) -> Result<(), String> {
    std::fs::create_dir_all(&out.out_dir).map_err(|e| format!("{}: {e}", out.out_dir.display()))?;
    let format: ImageFormat = out.format.into();
    let path = out.out_dir.join(format!("{stem}.{}", format.extension()));
    render::write_image(img, &path, format, out.palette.into()).map_err(|e| e.to_string())?;
    let sidecar = render::write_sidecar(img, &path).map_err(|e| e.to_string())?;
    for p in [path, sidecar] {
        let bytes = std::fs::metadata(&p).map(|m| m.len()).unwrap_or(0);
        report.manifest.push(ManifestEntry { path: p, bytes });
    }
    Ok(())
}

fn write_text(path: &Path, text: &str, report: &mut Report) -> Result<(), String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    report.manifest.push(ManifestEntry {
        path: path.to_path_buf(),
        bytes: text.len() as u64,
    });
    Ok(())
}

fn image_summary(img: &RasterImage) -> Value {
    let count = |c: PixelClass| img.pixels.iter().filter(|p| p.class == c).count();
    json!({
        "width": img.width,
        "height": img.height,
        "window": img.window,
        "trap": img.meta.trap,
        "cycles": img.meta.cycles,
        "escaping": count(PixelClass::Escaping),
        "attracting": count(PixelClass::Attracting),
        "parabolic": count(PixelClass::Parabolic),
        "unresolved": count(PixelClass::Unresolved),
        "distinct_colors": distinct_colors(img, Palette::Basins),
    })
}

fn distinct_colors(img: &RasterImage, palette: Palette) -> usize {
    let mut colors: Vec<[u8; 3]> = img.pixels.iter().map(|p| render::color(p, palette)).collect();
    colors.sort_unstable();
    colors.dedup();
    colors.len()
}

fn julia_image(
    spec: &FamilySpec,
    window: Option<Window>,
    res: usize,
    max_iter: Option<usize>,
    escape_radius: Option<f64>,
    opts: &RenderOptions,
) -> Result<RasterImage, String> {
    let f = spec.build().map_err(|e| e.to_string())?;
    let mut cfg = render::default_trap(spec, &f).map_err(|e| e.to_string())?;
    if let Some(n) = max_iter {
        cfg.max_iter = n;
    }
    if let Some(r) = escape_radius {
        cfg.escape_radius = r;
    }
    render::render_family(spec, window, (res, res), Some(cfg), opts).map_err(|e| e.to_string())
}

fn julia(a: &JuliaArgs, report: &mut Report) -> Result<(), String> {
    let spec = a.family.spec()?;
    let img = julia_image(&spec, a.window, a.res, a.max_iter, a.escape_radius, &render_options(&a.output))?;
    let stem = a.name.clone().unwrap_or_else(|| spec.name().to_string());
    write_artifacts(&img, &a.output, &stem, report)?;
    report.results = json!({ "family": spec, "image": image_summary(&img) });
    Ok(())
}

fn param_plane(a: &ParamArgs, report: &mut Report) -> Result<(), String> {
    let spec = match a.family.family {
        None if a.family.config.is_none() => FamilySpec::g_c0(),
        _ => a.family.spec()?,
    };
    let cfg = TrapConfig {
        max_iter: a.max_iter,
        ..TrapConfig::default()
    };
    let window = a.window.unwrap_or_else(render::param_window);
    let img = render::render_param_plane(&spec, window, (a.res, a.res), &cfg, &render_options(&a.output))
        .map_err(|e| e.to_string())?;
    let stem = a.name.clone().unwrap_or_else(|| format!("{}-parameters", spec.name()));
    write_artifacts(&img, &a.output, &stem, report)?;
    report.results = json!({ "family": spec, "image": image_summary(&img) });
    Ok(())
}

fn verify(a: &VerifyArgs, report: &mut Report) -> Result<(), String> {
    let spec = a.family.spec()?;
    let opts = CriterionOptions {
        mask_res: a.mask_res,
        certify: !a.no_certify,
        ..CriterionOptions::default()
    };
    let r = criterion::evaluate(&spec, &opts).map_err(|e| e.to_string())?;
    let names = ["cond_a", "cond_b", "cond_c", "cond_d"];
    for (name, p) in names.iter().zip(r.pattern()) {
        if p == Some(false) {
            report.check(NamedCheck::new(name, false, "FAILS"));
        }
    }
    report.results = serde_json::to_value(&r).map_err(|e| e.to_string())?;
    if let Some(path) = &a.out {
        let text = serde_json::to_string_pretty(&r).map_err(|e| e.to_string())?;
        write_text(path, &text, report)?;
    }
    Ok(())
}

/// Polynomial-like certificate plus the family's side conditions.
fn plm_results(spec: &FamilySpec, samples: usize, grid: usize, report: &mut Report) -> Result<Value, String> {
    let cert = criterion::plm_for(spec, samples, grid)
        .map_err(|e| e.to_string())?
        .ok_or_else(|| format!("no polynomial-like certificate is defined for {}", spec.name()))?;
    let summary = PlmSummary::from(&cert);
    report.check(NamedCheck::new(
        "polynomial_like",
        cert.passed,
        format!(
            "degree {} (expected {}), margins {:.4e} / {:.4e}",
            cert.degree, cert.expected_degree, summary.domain_margin, summary.pullback_margin
        ),
    ));
    let f = spec.build().map_err(|e| e.to_string())?;
    let mut out = json!({ "family": spec, "certificate": summary });
    match spec {
        FamilySpec::GRho { .. } => {
            let m = interval_monotone_image(&f, 0.0, 1.0, 10001).map_err(|e| e.to_string())?;
            let ok = matches!(m.monotone, carpetlab::geometry::Monotone::Increasing)
                && m.image_bounds.0 >= 0.5 - 1e-12
                && m.image_bounds.1 <= 1.0 + 1e-12;
            report.check(NamedCheck::new(
                "interval_increasing_into_half_one",
                ok,
                format!("image [{:.6}, {:.6}]", m.image_bounds.0, m.image_bounds.1),
            ));
            out["interval"] = serde_json::to_value(m).map_err(|e| e.to_string())?;
        }
        FamilySpec::HAlpha { .. } => {
            let disk = RegionSpec::Disk {
                center: Complex64::new(0.0, 0.0),
                radius: 0.1,
            };
            let d = region_disjoint(&f, &disk, samples).map_err(|e| e.to_string())?;
            report.check(NamedCheck::new(
                "image_disjoint_from_domain",
                d.disjoint && d.separation > 0.0,
                format!("separation {:.4e}", d.separation),
            ));
            out["disjoint"] = serde_json::to_value(d).map_err(|e| e.to_string())?;
        }
        _ => {}
    }
    Ok(out)
}

fn verify_plm(a: &PlmArgs, report: &mut Report) -> Result<(), String> {
    let spec = match a.family.family {
        None if a.family.config.is_none() => FamilySpec::g_rho0(),
        _ => a.family.spec()?,
    };
    report.results = plm_results(&spec, a.samples, a.grid, report)?;
    if let Some(path) = &a.out {
        let text = serde_json::to_string_pretty(&report.results).map_err(|e| e.to_string())?;
        write_text(path, &text, report)?;
    }
    Ok(())
}

fn constants(names: &[ConstantName], report: &mut Report) -> Value {
    let reports: Vec<_> = names.iter().map(|&n| solve::verify_constant(n)).collect();
    for r in &reports {
        report.check(NamedCheck::new(
            &r.name,
            r.passed,
            format!("value {} residual {:.3e}", fmt_complex(r.value), r.residual),
        ));
    }
    serde_json::to_value(reports).unwrap_or(Value::Null)
}

fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{:.12}", z.re)
    } else {
        format!("{:.12}{:+.12}i", z.re, z.im)
    }
}

fn solve_cmd(a: &SolveArgs, report: &mut Report) -> Result<(), String> {
    let names: Vec<ConstantName> = if a.constant == "all" {
        ConstantName::ALL.to_vec()
    } else {
        vec![ConstantName::parse(&a.constant).ok_or_else(|| format!("unknown constant `{}`", a.constant))?]
    };
    report.results = constants(&names, report);
    for r in report.results.as_array().into_iter().flatten() {
        let (re, im) = (r["value"][0].as_f64().unwrap_or(f64::NAN), r["value"][1].as_f64().unwrap_or(0.0));
        let rounded = if im == 0.0 { format!("{re:.8}") } else { format!("{re:.8}{im:+.8}i") };
        eprintln!("{} = {rounded}", r["name"].as_str().unwrap_or("?"));
    }
    Ok(())
}

fn repro(a: &ReproArgs, report: &mut Report) -> Result<(), String> {
    let opts = render_options(&a.output);
    match a.bundle {
        Bundle::Fig1 => {
            let family = FamilySpec::g_c0();
            let window = render::param_window();
            let img = render::render_param_plane(&family, window, (a.res, a.res), &TrapConfig::default(), &opts)
                .map_err(|e| e.to_string())?;
            let c0 = img.pixel_at(Complex64::new(0.0, 2f64.sqrt())).copied();
            report.check(NamedCheck::new(
                "c0_escapes_late",
                c0.is_some_and(|p| p.class == PixelClass::Escaping && p.value >= 1.0),
                format!("{c0:?}"),
            ));
            let near_one = img.pixel_at(Complex64::new(1.05, 0.0)).copied();
            report.check(NamedCheck::new(
                "near_one_not_carpet",
                near_one.is_some_and(|p| p.class == PixelClass::Immediate),
                format!("{near_one:?}"),
            ));
            write_artifacts(&img, &a.output, "fig1-parameter-plane", report)?;
            report.results = json!({ "parameter_plane": image_summary(&img) });
        }
        Bundle::Fig2 => {
            let lambda4 = solve::lambda4().map_err(|e| e.to_string())?.value;
            let specs = [
                FamilySpec::f1(),
                FamilySpec::F2,
                FamilySpec::F3,
                FamilySpec::F4 { lambda: lambda4 },
            ];
            let mut results = serde_json::Map::new();
            for spec in &specs {
                let img = julia_image(spec, None, a.res, None, None, &opts)?;
                let colors = distinct_colors(&img, a.output.palette.into());
                report.check(NamedCheck::new(
                    &format!("{}_nonuniform", spec.name()),
                    colors >= 2,
                    format!("{colors} colours"),
                ));
                if matches!(spec, FamilySpec::F1 { .. }) {
                    let alt = img.alternations_along(Complex64::new(0.1, 0.0), Complex64::new(1.4, 0.0));
                    report.check(NamedCheck::new("f1_rings", alt >= 3, format!("{alt} label changes on [0.1, 1.4]")));
                }
                write_artifacts(&img, &a.output, &format!("fig2-{}", spec.name()), report)?;
                results.insert(spec.name().into(), image_summary(&img));
            }
            report.results = Value::Object(results);
        }
        Bundle::Fig3 => {
            let g = FamilySpec::g_rho0();
            let window = Window::new(-10.0, 22.0, -16.0, 16.0);
            let img = julia_image(&g, Some(window), a.res, None, None, &opts)?;
            let at_half = img.pixel_at(Complex64::new(0.5, 0.0)).map(|p| p.class);
            report.check(NamedCheck::new(
                "parabolic_basin_abuts_one",
                at_half == Some(PixelClass::Parabolic),
                format!("{at_half:?}"),
            ));
            write_artifacts(&img, &a.output, "fig3-g-rho", report)?;
            let h = FamilySpec::h_alpha0();
            let himg = julia_image(&h, None, a.res, None, None, &opts)?;
            write_artifacts(&himg, &a.output, "fig3-h-alpha", report)?;
            let samples = carpetlab::geometry::DEFAULT_SAMPLES;
            let grid = carpetlab::geometry::DEFAULT_GRID;
            report.results = json!({
                "g-rho": { "image": image_summary(&img), "certificate": plm_results(&g, samples, grid, report)? },
                "h-alpha": { "image": image_summary(&himg), "certificate": plm_results(&h, samples, grid, report)? },
            });
        }
        Bundle::Constants => {
            report.results = constants(&ConstantName::ALL, report);
            let text = serde_json::to_string_pretty(&report.results).map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&a.output.out_dir).map_err(|e| format!("{}: {e}", a.output.out_dir.display()))?;
            write_text(&a.output.out_dir.join("constants.json"), &text, report)?;
        }
    }
    Ok(())
}
