use std::path::PathBuf;

use carpetlab::dynamics::Window;
use carpetlab::families::{FamilyError, FamilySpec};
use carpetlab::render::{ImageFormat, Palette};
use carpetlab::Complex64;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "carpetlab", version, about = "Carpet criterion checks, certificates and renders for rational maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Render the Julia set of a family instance.
    Julia(JuliaArgs),
    /// Render the parameter plane of a one-parameter family.
    ParamPlane(ParamArgs),
    /// Evaluate the carpet criterion for a family instance.
    Verify(VerifyArgs),
    /// Certify the polynomial-like restriction of a family instance.
    VerifyPlm(PlmArgs),
    /// Solve for the named constants.
    Solve(SolveArgs),
    /// Reproduce a named figure or the constants table.
    Repro(ReproArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FamilyArgs {
    /// f1, f2, f3, f4, F, G, mcmullen, morosawa-pilgrim, g-rho, h-alpha.
    #[arg(long)]
    pub family: Option<String>,
    /// Family config file (`key = value` lines) instead of flags.
    #[arg(long, conflicts_with = "family")]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub lambda: Option<Complex64>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub mu: Option<Complex64>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub nu: Option<Complex64>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub c: Option<Complex64>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub rho: Option<Complex64>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub alpha: Option<Complex64>,
    #[arg(long)]
    pub d0: Option<u32>,
    #[arg(long)]
    pub d_inf: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Ppm,
    Png,
}

impl From<FormatArg> for ImageFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Ppm => ImageFormat::Ppm,
            FormatArg::Png => ImageFormat::Png,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PaletteArg {
    Basins,
    Gray,
}

impl From<PaletteArg> for Palette {
    fn from(p: PaletteArg) -> Self {
        match p {
            PaletteArg::Basins => Palette::Basins,
            PaletteArg::Gray => Palette::Gray,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Ppm)]
    pub format: FormatArg,
    #[arg(long, value_enum, default_value_t = PaletteArg::Basins)]
    pub palette: PaletteArg,
    /// Worker threads; overrides CARPETLAB_WORKERS.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct JuliaArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// `re_min,re_max,im_min,im_max`; defaults to a window around the
    /// critical and fixed points.
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    pub window: Option<Window>,
    #[arg(long, default_value_t = 512)]
    pub res: usize,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub escape_radius: Option<f64>,
    /// Output file stem; defaults to the family name.
    #[arg(long)]
    pub name: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ParamArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    pub window: Option<Window>,
    #[arg(long, default_value_t = 512)]
    pub res: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long)]
    pub name: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = carpetlab::criterion::DEFAULT_MASK_RES)]
    pub mask_res: usize,
    /// Skip the polynomial-like certificate.
    #[arg(long)]
    pub no_certify: bool,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlmArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = carpetlab::geometry::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = carpetlab::geometry::DEFAULT_GRID)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    /// lambda4, c0, alpha0, rho0-checks or all.
    #[arg(long, default_value = "all")]
    pub constant: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bundle {
    Fig1,
    Fig2,
    Fig3,
    Constants,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReproArgs {
    #[arg(value_enum)]
    pub bundle: Bundle,
    #[arg(long, default_value_t = 512)]
    pub res: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parses `re+imi`, `re-imi`, `imi`, a plain real, or `re,im`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("expected a complex number like `0+1.5i`, got `{s}`");
    let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
    if let Some((re, im)) = t.split_once(',') {
        return Ok(Complex64::new(num(re)?, num(im)?));
    }
    let Some(body) = t.strip_suffix('i') else {
        return Ok(Complex64::new(num(&t)?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (num(&body[..k])?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        v => num(v)?,
    };
    Ok(Complex64::new(re, im))
}

pub fn parse_window(s: &str) -> Result<Window, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("expected `re_min,re_max,im_min,im_max`, got `{s}`"))?;
    match v.as_slice() {
        &[a, b, c, d] => {
            let w = Window::new(a, b, c, d);
            w.validate().map_err(|e| e.to_string())?;
            Ok(w)
        }
        _ => Err(format!("expected four numbers, got {}", v.len())),
    }
}

impl FamilyArgs {
    /// Family from the flags, filling in the distinguished parameter where
    /// a family has one.
    pub fn spec(&self) -> Result<FamilySpec, String> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            return FamilySpec::from_config(&text).map_err(|e| e.to_string());
        }
        let name = self.family.as_deref().ok_or("missing --family or --config")?;
        let need = |v: Option<Complex64>, flag: &str| v.ok_or(format!("family {name} needs --{flag}"));
        let spec = match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "f1" => match self.lambda {
                Some(lambda) => FamilySpec::F1 { lambda },
                None => FamilySpec::f1(),
            },
            "f2" => FamilySpec::F2,
            "f3" => FamilySpec::F3,
            "f4" => FamilySpec::F4 {
                lambda: match self.lambda {
                    Some(l) => l,
                    None => carpetlab::solve::lambda4().map_err(|e| e.to_string())?.value,
                },
            },
            "f" => FamilySpec::F {
                lambda: need(self.lambda, "lambda")?,
                d0: self.d0.ok_or("family F needs --d0")?,
                d_inf: self.d_inf.ok_or("family F needs --d-inf")?,
            },
            "mcmullen" => FamilySpec::McMullen {
                mu: need(self.mu, "mu")?,
                d0: self.d0.ok_or("family mcmullen needs --d0")?,
                d_inf: self.d_inf.ok_or("family mcmullen needs --d-inf")?,
            },
            "morosawa-pilgrim" | "morosawapilgrim" => FamilySpec::MorosawaPilgrim {
                nu: need(self.nu, "nu")?,
            },
            "g" => match self.c {
                Some(c) => FamilySpec::G { c },
                None => FamilySpec::g_c0(),
            },
            "g-rho" | "grho" => match self.rho {
                Some(rho) => FamilySpec::GRho { rho },
                None => FamilySpec::g_rho0(),
            },
            "h-alpha" | "halpha" => match self.alpha {
                Some(alpha) => FamilySpec::HAlpha { alpha },
                None => FamilySpec::h_alpha0(),
            },
            other => return Err(format!("unknown family `{other}`")),
        };
        spec.validate().map_err(|e: FamilyError| e.to_string())?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        let c = |re, im| Complex64::new(re, im);
        assert_eq!(parse_complex("0+2.5i").unwrap(), c(0.0, 2.5));
        assert_eq!(parse_complex("-1.5-2i").unwrap(), c(-1.5, -2.0));
        assert_eq!(parse_complex("2.5").unwrap(), c(2.5, 0.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("1e-3+2e-2i").unwrap(), c(1e-3, 2e-2));
        assert_eq!(parse_complex("3,4").unwrap(), c(3.0, 4.0));
        assert!(parse_complex("1+xi").is_err());
        assert!(parse_complex("").is_err());
    }

    #[test]
    fn windows() {
        assert!(parse_window("-1,1,-2,2").is_ok());
        assert!(parse_window("1,-1,0,1").is_err());
        assert!(parse_window("1,2,3").is_err());
    }

    #[test]
    fn family_defaults() {
        let args = FamilyArgs {
            family: Some("G".into()),
            config: None,
            lambda: None,
            mu: None,
            nu: None,
            c: None,
            rho: None,
            alpha: None,
            d0: None,
            d_inf: None,
        };
        assert_eq!(args.spec().unwrap(), FamilySpec::g_c0());
        let bad = FamilyArgs {
            family: Some("F".into()),
            ..args
        };
        assert!(bad.spec().is_err());
    }
}
