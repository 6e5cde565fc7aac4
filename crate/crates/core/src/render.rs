//! Deterministic row-parallel rasterisation of dynamical and parameter
//! planes, with PPM/PNG output and a JSON sidecar.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criterion::{escape_certificate, UTrap};
use crate::dynamics::{classify, distance_estimate, label_components, Classification, DynError, TrapConfig, Window};
use crate::families::FamilySpec;
use crate::ratmap::{chordal_distance, RationalMap, SpherePoint};

/// Largest accepted side length.
pub const MAX_RES: usize = 8192;
/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "CARPETLAB_WORKERS";
/// Chordal distance under which two cycle points are identified.
const CYCLE_MATCH: f64 = 1e-5;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RenderError {
    #[error("resolution {0}x{1} outside 1..={MAX_RES}")]
    Resolution(usize, usize),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Dynamics(#[from] DynError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PixelClass {
    Escaping,
    Attracting,
    Parabolic,
    Unresolved,
    /// Parameter outside the admissible set.
    Excluded,
    /// Free critical point already inside the certified trap of `U`.
    Immediate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub class: PixelClass,
    /// Component label among pixels of the same class and attractor; 0 on
    /// the thickened Julia set or when unresolved.
    pub basin: u32,
    /// Smoothed escape value, or the raw entry index for other classes.
    pub value: f32,
    /// Attracting cycle identifier, in order of first appearance.
    pub cycle: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plane", rename_all = "snake_case")]
pub enum Subject {
    Julia { family: Option<FamilySpec> },
    Parameter { family: FamilySpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderMeta {
    pub subject: Subject,
    pub window: Window,
    pub width: usize,
    pub height: usize,
    pub trap: TrapConfig,
    pub cycles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub window: Window,
    /// Row-major, row 0 at the top.
    pub pixels: Vec<Pixel>,
    pub meta: RenderMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Palette {
    #[default]
    Basins,
    Gray,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Ppm,
    Png,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "ppm" => Some(ImageFormat::Ppm),
            "png" => Some(ImageFormat::Png),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Ppm => "ppm",
            ImageFormat::Png => "png",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RenderOptions {
    /// `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl RenderOptions {
    /// Worker count from [`WORKERS_ENV`], if set to a positive integer.
    pub fn from_env() -> Self {
        RenderOptions {
            workers: std::env::var(WORKERS_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
                .filter(|&n: &usize| n > 0),
        }
    }
}

fn check_res(w: usize, h: usize) -> Result<(), RenderError> {
    if w == 0 || h == 0 || w > MAX_RES || h > MAX_RES {
        return Err(RenderError::Resolution(w, h));
    }
    Ok(())
}

/// Runs `job` on a pool of the requested size.
fn with_workers<T: Send>(opts: &RenderOptions, job: impl FnOnce() -> T + Send) -> Result<T, RenderError> {
    match opts.workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RenderError::Pool(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

/// Per-pixel raw result before labelling.
#[derive(Clone, Copy)]
struct Raw {
    class: Classification,
    value: f32,
    /// Far enough from the Julia set to join a component.
    interior: bool,
}

fn smoothed(n: usize, last: SpherePoint, radius: f64, degree: f64) -> f32 {
    let m = last.modulus();
    if !m.is_finite() || m <= 1.0 || radius <= 1.0 {
        return n as f32;
    }
    let ratio = (m.ln() / radius.ln()).max(1.0);
    (n as f64 + 1.0 - ratio.ln() / degree.ln()) as f32
}

fn raw_pixel(f: &RationalMap, z: SpherePoint, cfg: &TrapConfig, degree: f64, half_pixel: f64) -> Raw {
    let out = classify(f, z, cfg);
    match out.classification {
        Classification::InfBasin { n } => Raw {
            class: out.classification,
            value: smoothed(n, out.last, cfg.escape_radius, degree),
            interior: distance_estimate(f, z, cfg).is_some_and(|d| d > half_pixel),
        },
        c => Raw {
            class: c,
            value: c.index() as f32,
            interior: true,
        },
    }
}

/// Assigns cycle identifiers in scan order, so the result does not depend
/// on the worker count.
fn cycle_ids(f: &RationalMap, raws: &[Raw]) -> (Vec<u32>, usize) {
    let mut known: Vec<Vec<SpherePoint>> = Vec::new();
    let ids = raws
        .iter()
        .map(|r| {
            let Classification::AttrCycle {
                period,
                representative,
                ..
            } = r.class
            else {
                return 0;
            };
            if let Some(k) = known
                .iter()
                .position(|c| c.iter().any(|p| chordal_distance(*p, representative) <= CYCLE_MATCH))
            {
                return k as u32 + 1;
            }
            let mut pts = vec![representative];
            let mut z = representative;
            for _ in 1..period {
                match f.eval(z) {
                    Ok(v) => z = v,
                    Err(_) => break,
                }
                pts.push(z);
            }
            known.push(pts);
            known.len() as u32
        })
        .collect();
    (ids, known.len())
}

fn class_of(c: &Classification) -> PixelClass {
    match c {
        Classification::InfBasin { .. } => PixelClass::Escaping,
        Classification::AttrCycle { .. } => PixelClass::Attracting,
        Classification::Parabolic { .. } => PixelClass::Parabolic,
        Classification::Unresolved => PixelClass::Unresolved,
    }
}

/// Labels components of equal (class, cycle) pixels; escaping pixels need
/// an interior distance estimate and parabolic pixels an entry index within
/// one of every 4-neighbour's.
fn label_basins(raws: &[Raw], cycles: &[u32], w: usize, h: usize) -> Vec<u32> {
    let key = |k: usize| (class_of(&raws[k].class), cycles[k]);
    let keep = |k: usize| -> bool {
        let r = &raws[k];
        match r.class {
            Classification::Unresolved => false,
            Classification::InfBasin { .. } => r.interior,
            Classification::Parabolic { n } => {
                let (i, j) = (k % w, k / w);
                let nb = [
                    (i > 0).then(|| k - 1),
                    (i + 1 < w).then(|| k + 1),
                    (j > 0).then(|| k - w),
                    (j + 1 < h).then(|| k + w),
                ];
                nb.iter().flatten().all(|&m| match raws[m].class {
                    Classification::Parabolic { n: o } => n.abs_diff(o) <= 1,
                    _ => false,
                })
            }
            Classification::AttrCycle { .. } => true,
        }
    };
    let kept: Vec<bool> = (0..raws.len()).map(keep).collect();
    // Label each (class, cycle) layer separately, then renumber globally.
    let mut keys: Vec<(PixelClass, u32)> = (0..raws.len()).filter(|&k| kept[k]).map(key).collect();
    keys.sort_by_key(|(c, id)| (*c as u8, *id));
    keys.dedup();
    let mut out = vec![0u32; raws.len()];
    let mut offset = 0u32;
    for layer in keys {
        let indicator: Vec<bool> = (0..raws.len()).map(|k| kept[k] && key(k) == layer).collect();
        let (labels, count) = label_components(&indicator, w, h);
        for (o, l) in out.iter_mut().zip(labels) {
            if l != 0 {
                *o = l + offset;
            }
        }
        offset += count;
    }
    // Scan-order renumbering keeps labels independent of layer order.
    let mut map = std::collections::HashMap::new();
    for o in out.iter_mut().filter(|o| **o != 0) {
        let next = map.len() as u32 + 1;
        *o = *map.entry(*o).or_insert(next);
    }
    out
}

/// Classifies every pixel center of `window` under `f`.
pub fn render_julia(
    f: &RationalMap,
    window: Window,
    res: (usize, usize),
    cfg: &TrapConfig,
    opts: &RenderOptions,
) -> Result<RasterImage, RenderError> {
    let (w, h) = res;
    check_res(w, h)?;
    window.validate()?;
    cfg.validate()?;
    let degree = (f.local_degree_at_infinity() as f64).max(2.0);
    let half_pixel = 0.5 * (window.width() / w as f64).max(window.height() / h as f64);
    let raws = with_workers(opts, || {
        let mut raws = vec![
            Raw {
                class: Classification::Unresolved,
                value: 0.0,
                interior: false
            };
            w * h
        ];
        raws.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
            for (i, cell) in row.iter_mut().enumerate() {
                let z = SpherePoint::Finite(window.pixel_center(i, j, w, h));
                *cell = raw_pixel(f, z, cfg, degree, half_pixel);
            }
        });
        raws
    })?;
    let (cycles, n_cycles) = cycle_ids(f, &raws);
    let basins = label_basins(&raws, &cycles, w, h);
    let pixels = raws
        .iter()
        .zip(&cycles)
        .zip(&basins)
        .map(|((r, &cycle), &basin)| Pixel {
            class: class_of(&r.class),
            basin,
            value: r.value,
            cycle,
        })
        .collect();
    Ok(RasterImage {
        width: w,
        height: h,
        window,
        pixels,
        meta: RenderMeta {
            subject: Subject::Julia { family: None },
            window,
            width: w,
            height: h,
            trap: *cfg,
            cycles: n_cycles,
        },
    })
}

/// Julia render of a family instance with the default window, recording the
/// family in the metadata.
pub fn render_family(
    spec: &FamilySpec,
    window: Option<Window>,
    res: (usize, usize),
    cfg: Option<TrapConfig>,
    opts: &RenderOptions,
) -> Result<RasterImage, RenderError> {
    let f = spec.build().map_err(|e| RenderError::Dynamics(DynError::Config(e.to_string())))?;
    let cfg = match cfg {
        Some(c) => c,
        None => default_trap(spec, &f)?,
    };
    let window = window.unwrap_or_else(|| crate::criterion::julia_window(&f, 1.5));
    let mut img = render_julia(&f, window, res, &cfg, opts)?;
    img.meta.subject = Subject::Julia {
        family: Some(spec.clone()),
    };
    Ok(img)
}

/// Trap used for renders: the family's `U` trap. A parabolic trap is
/// loosened to the petal radius used for the criterion's masks.
pub fn default_trap(spec: &FamilySpec, f: &RationalMap) -> Result<TrapConfig, RenderError> {
    Ok(match crate::criterion::u_trap(spec, f) {
        Some(u @ UTrap::Parabolic { .. }) => TrapConfig {
            parabolic_eps: 1e-2,
            ..crate::criterion::trap_config(&u, f)?
        },
        Some(u) => crate::criterion::trap_config(&u, f)?,
        None => TrapConfig::default(),
    })
}

/// Parameter-plane scan: for each pixel parameter `p`, classifies the orbit
/// of the family's free critical point. Escaping pixels carry the index of
/// first entry into the certified trap of `U`; a critical point already in
/// that trap is [`PixelClass::Immediate`].
pub fn render_param_plane(
    family: &FamilySpec,
    window: Window,
    res: (usize, usize),
    cfg: &TrapConfig,
    opts: &RenderOptions,
) -> Result<RasterImage, RenderError> {
    let (w, h) = res;
    check_res(w, h)?;
    window.validate()?;
    cfg.validate()?;
    if family.with_parameter(Complex64::new(0.0, 0.0)).is_none()
        || family.free_critical_points().is_empty()
    {
        return Err(RenderError::Dynamics(DynError::Config(format!(
            "{} has no free parameter with a free critical point formula",
            family.name()
        ))));
    }
    let pixel_at = |p: Complex64| -> Pixel {
        let excluded = Pixel {
            class: PixelClass::Excluded,
            basin: 0,
            value: 0.0,
            cycle: 0,
        };
        let Some(spec) = family.with_parameter(p) else {
            return excluded;
        };
        let Ok(f) = spec.build() else {
            return excluded;
        };
        let z = spec.free_critical_points()[0];
        let radius = escape_certificate(&f).map_or(cfg.escape_radius, |r| r.max(1.0));
        if z.norm() > radius {
            return Pixel {
                class: PixelClass::Immediate,
                basin: 0,
                value: 0.0,
                cycle: 0,
            };
        }
        let local = TrapConfig {
            escape_radius: radius,
            ..*cfg
        };
        let out = classify(&f, SpherePoint::Finite(z), &local);
        Pixel {
            class: class_of(&out.classification),
            basin: 0,
            value: out.classification.index() as f32,
            cycle: 0,
        }
    };
    let pixels = with_workers(opts, || {
        let mut px = vec![
            Pixel {
                class: PixelClass::Unresolved,
                basin: 0,
                value: 0.0,
                cycle: 0
            };
            w * h
        ];
        px.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
            for (i, cell) in row.iter_mut().enumerate() {
                *cell = pixel_at(window.pixel_center(i, j, w, h));
            }
        });
        px
    })?;
    Ok(RasterImage {
        width: w,
        height: h,
        window,
        pixels,
        meta: RenderMeta {
            subject: Subject::Parameter {
                family: family.clone(),
            },
            window,
            width: w,
            height: h,
            trap: *cfg,
            cycles: 0,
        },
    })
}

impl RasterImage {
    pub fn pixel(&self, i: usize, j: usize) -> &Pixel {
        &self.pixels[j * self.width + i]
    }

    /// Pixel whose cell contains `z`.
    pub fn pixel_at(&self, z: Complex64) -> Option<&Pixel> {
        let (i, j) = self.window.pixel_of(z, self.width, self.height)?;
        Some(self.pixel(i, j))
    }

    /// Interleaved RGB bytes.
    pub fn to_rgb(&self, palette: Palette) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| color(p, palette)).collect()
    }

    pub fn to_ppm(&self, palette: Palette) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_rgb(palette));
        out
    }

    pub fn to_png(&self, palette: Palette) -> Result<Vec<u8>, RenderError> {
        let mut out = Vec::new();
        let encode_err = |e: png::EncodingError| RenderError::Io {
            path: PathBuf::from("<memory>"),
            message: e.to_string(),
        };
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header().map_err(encode_err)?;
            writer.write_image_data(&self.to_rgb(palette)).map_err(encode_err)?;
        }
        Ok(out)
    }

    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("metadata serialises")
    }

    /// Changes of basin label along the segment `a -> b`, sampled once per
    /// pixel and skipping unlabelled pixels.
    pub fn alternations_along(&self, a: Complex64, b: Complex64) -> usize {
        let cell = (self.window.width() / self.width as f64).min(self.window.height() / self.height as f64);
        let steps = ((b - a).norm() / cell).ceil().max(1.0) as usize;
        let labels: Vec<u32> = (0..=steps)
            .filter_map(|k| self.pixel_at(a + (b - a) * (k as f64 / steps as f64)))
            .map(|p| p.basin)
            .filter(|&l| l != 0)
            .collect();
        labels.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Number of distinct (class, cycle) pairs.
    pub fn distinct_classes(&self) -> usize {
        let mut set: Vec<(PixelClass, u32)> = self.pixels.iter().map(|p| (p.class, p.cycle)).collect();
        set.sort_by_key(|(c, id)| (*c as u8, *id));
        set.dedup();
        set.len()
    }
}

fn hue_rgb(hue: f64, value: f64) -> [u8; 3] {
    let h = hue.rem_euclid(1.0) * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let s = |c: f64| (255.0 * value * (0.35 + 0.65 * c)).round().clamp(0.0, 255.0) as u8;
    [s(r), s(g), s(b)]
}

/// Colour of one pixel. Basin labels pick the hue, depth picks the
/// brightness; the thickened Julia set is black.
pub fn color(p: &Pixel, palette: Palette) -> [u8; 3] {
    const GOLDEN: f64 = 0.618_033_988_749_895;
    let depth = |v: f32| 0.45 + 0.55 * (-(v.max(0.0) as f64) / 24.0).exp();
    match (palette, p.class) {
        (_, PixelClass::Unresolved) => [0, 0, 0],
        (_, PixelClass::Excluded) => [128, 128, 128],
        (_, PixelClass::Immediate) => [96, 16, 16],
        (Palette::Gray, PixelClass::Escaping) if p.basin != 0 || p.value > 0.0 => {
            let g = (255.0 * depth(p.value)).round() as u8;
            [g, g, g]
        }
        (Palette::Gray, PixelClass::Attracting | PixelClass::Parabolic) => [64, 64, 64],
        (Palette::Gray, _) => [0, 0, 0],
        (Palette::Basins, _) if p.basin == 0 && p.class != PixelClass::Escaping => [0, 0, 0],
        (Palette::Basins, PixelClass::Escaping) if p.basin == 0 => {
            // Parameter planes carry no basins; colour by entry index.
            if p.value == 0.0 {
                [0, 0, 0]
            } else {
                hue_rgb(0.08 * p.value as f64, 1.0)
            }
        }
        (Palette::Basins, PixelClass::Escaping) => hue_rgb(GOLDEN * p.basin as f64, depth(p.value)),
        (Palette::Basins, _) => hue_rgb(GOLDEN * p.basin as f64 + 0.5, 0.8),
    }
}

fn io_err(path: &Path, e: impl ToString) -> RenderError {
    RenderError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_image(img: &RasterImage, path: &Path, format: ImageFormat, palette: Palette) -> Result<(), RenderError> {
    let bytes = match format {
        ImageFormat::Ppm => img.to_ppm(palette),
        ImageFormat::Png => img.to_png(palette)?,
    };
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    out.write_all(&bytes).map_err(|e| io_err(path, e))?;
    out.flush().map_err(|e| io_err(path, e))
}

/// Writes the JSON sidecar next to `image_path` (same stem, `.json`).
pub fn write_sidecar(img: &RasterImage, image_path: &Path) -> Result<PathBuf, RenderError> {
    let path = image_path.with_extension("json");
    std::fs::write(&path, img.sidecar_json()).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Default parameter-plane window.
pub fn param_window() -> Window {
    Window::square(Complex64::new(0.0, 0.0), 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratmap::square_map;

    fn blank(w: usize, h: usize) -> RasterImage {
        let window = Window::square(Complex64::new(0.0, 0.0), 1.0);
        RasterImage {
            width: w,
            height: h,
            window,
            pixels: vec![
                Pixel {
                    class: PixelClass::Unresolved,
                    basin: 0,
                    value: 0.0,
                    cycle: 0
                };
                w * h
            ],
            meta: RenderMeta {
                subject: Subject::Julia { family: None },
                window,
                width: w,
                height: h,
                trap: TrapConfig::default(),
                cycles: 0,
            },
        }
    }

    #[test]
    fn ppm_layout() {
        let ppm = blank(2, 2).to_ppm(Palette::Basins);
        assert_eq!(&ppm[..11], b"P6\n2 2\n255\n");
        assert_eq!(ppm.len(), 11 + 12);
        assert!(ppm[11..].iter().all(|&b| b == 0));
    }

    #[test]
    fn square_map_escapes_outside_unit_circle() {
        let window = Window::square(Complex64::new(0.0, 0.0), 1.5);
        let res = 96;
        let img = render_julia(&square_map(), window, (res, res), &TrapConfig::default(), &RenderOptions::default())
            .unwrap();
        let cell = 3.0 / res as f64;
        for j in 0..res {
            for i in 0..res {
                let z = window.pixel_center(i, j, res, res);
                if (z.norm() - 1.0).abs() <= cell {
                    continue;
                }
                let escaping = img.pixel(i, j).class == PixelClass::Escaping;
                assert_eq!(escaping, z.norm() > 1.0, "{z}");
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_bytes() {
        let f = FamilySpec::F3.build().unwrap();
        let window = Window::square(Complex64::new(0.0, 0.0), 3.0);
        let cfg = TrapConfig::default();
        let a = render_julia(&f, window, (80, 64), &cfg, &RenderOptions { workers: Some(1) }).unwrap();
        let b = render_julia(&f, window, (80, 64), &cfg, &RenderOptions { workers: Some(4) }).unwrap();
        assert_eq!(a.to_ppm(Palette::Basins), b.to_ppm(Palette::Basins));
    }

    #[test]
    fn png_roundtrip_dimensions() {
        let f = FamilySpec::F3.build().unwrap();
        let window = Window::square(Complex64::new(0.0, 0.0), 3.0);
        let img = render_julia(&f, window, (40, 30), &TrapConfig::default(), &RenderOptions::default()).unwrap();
        let bytes = img.to_png(Palette::Gray).unwrap();
        let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        let reader = decoder.read_info().unwrap();
        assert_eq!((reader.info().width, reader.info().height), (40, 30));
    }

    #[test]
    fn resolution_is_bounded() {
        let window = Window::square(Complex64::new(0.0, 0.0), 1.0);
        let r = render_julia(&square_map(), window, (0, 10), &TrapConfig::default(), &RenderOptions::default());
        assert!(matches!(r, Err(RenderError::Resolution(0, 10))));
    }

    #[test]
    fn parameter_plane_marks_excluded_and_escaping() {
        let opts = RenderOptions::default();
        let cfg = TrapConfig::default();
        let around = |c: Complex64, res| {
            render_param_plane(&FamilySpec::g_c0(), Window::square(c, 0.05), (res, res), &cfg, &opts).unwrap()
        };
        // Odd resolution puts a pixel center on the window center.
        let one = around(Complex64::new(1.0, 0.0), 65);
        assert_eq!(one.pixel(32, 32).class, PixelClass::Excluded);
        assert_eq!(one.pixel(40, 32).class, PixelClass::Immediate);
        let c0 = around(Complex64::new(0.0, 2.0f64.sqrt()), 65);
        let p = c0.pixel(32, 32);
        assert_eq!(p.class, PixelClass::Escaping);
        assert_eq!(p.value, 3.0);
        assert!(c0.sidecar_json().contains("\"plane\": \"parameter\""));
    }
}
