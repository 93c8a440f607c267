//! Raster preprocessing into density fields, noise perturbation, and PGM
//! panels.
//!
//! Image rows map to grid rows: pixel `(col, row)` becomes node `(i, j)`.

use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid2D;

/// 8-bit raster, row-major, 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Image(format!("unsupported channel count {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Image("empty image".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::Image(format!(
                "expected {} samples for {width}x{height}x{channels}, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn rgb(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 3, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Luma `round(0.299R + 0.587G + 0.114B)`; gray images pass through.
    pub fn to_gray(&self) -> RasterImage {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| round_half_up(0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64))
            .collect();
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }
}

fn round_half_up(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Preprocessing settings; gray levels are in `[0, 255]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessParams {
    /// Fixed mask level; pixels strictly above it are kept. `None` picks
    /// the level by Otsu's method.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u8>,
    pub gaussian_kernel: usize,
    pub gaussian_std: f64,
    pub median_kernel: usize,
    /// Half-width of the square structuring element.
    pub open_radius: usize,
    /// Output size; `None` keeps the input size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_nx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_ny: Option<usize>,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            threshold: None,
            gaussian_kernel: 5,
            gaussian_std: 1.0,
            median_kernel: 3,
            open_radius: 1,
            out_nx: None,
            out_ny: None,
        }
    }
}

/// Single-channel float plane used between filter stages.
#[derive(Debug, Clone, PartialEq)]
struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

/// Symmetric reflection `… 1 0 | 0 1 … n-1 | n-1 n-2 …` for any offset.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn check_kernel(k: usize, what: &str) -> Result<()> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::Filter(format!("{what} kernel size must be odd, got {k}")));
    }
    Ok(())
}

/// Normalized 1-D Gaussian taps of odd length `k` and standard deviation `s`.
pub fn gaussian_kernel(k: usize, s: f64) -> Result<Vec<f64>> {
    check_kernel(k, "gaussian")?;
    if k == 1 {
        return Ok(vec![1.0]);
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Filter(format!("gaussian std must be > 0, got {s}")));
    }
    let r = (k / 2) as isize;
    let taps: Vec<f64> = (-r..=r).map(|x| (-((x * x) as f64) / (2.0 * s * s)).exp()).collect();
    let total: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / total).collect())
}

impl Plane {
    fn from_gray(img: &RasterImage) -> Self {
        let g = img.to_gray();
        Plane {
            w: g.width,
            h: g.height,
            v: g.data.iter().map(|&b| b as f64).collect(),
        }
    }

    fn gaussian(&self, k: usize, s: f64) -> Result<Plane> {
        let taps = gaussian_kernel(k, s)?;
        if taps.len() == 1 {
            return Ok(self.clone());
        }
        let r = (taps.len() / 2) as isize;
        let (w, h) = (self.w, self.h);
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = taps
                    .iter()
                    .enumerate()
                    .map(|(t, c)| c * self.v[y * w + reflect(x as isize + t as isize - r, w)])
                    .sum();
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                out[y * w + x] = taps
                    .iter()
                    .enumerate()
                    .map(|(t, c)| c * tmp[reflect(y as isize + t as isize - r, h) * w + x])
                    .sum();
            }
        }
        Ok(Plane { w, h, v: out })
    }

    fn median(&self, k: usize) -> Result<Plane> {
        check_kernel(k, "median")?;
        if k == 1 {
            return Ok(self.clone());
        }
        let r = (k / 2) as isize;
        let (w, h) = (self.w, self.h);
        let mut window = Vec::with_capacity(k * k);
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                window.clear();
                for dy in -r..=r {
                    let yy = reflect(y as isize + dy, h);
                    for dx in -r..=r {
                        window.push(self.v[yy * w + reflect(x as isize + dx, w)]);
                    }
                }
                window.sort_by(f64::total_cmp);
                out[y * w + x] = window[window.len() / 2];
            }
        }
        Ok(Plane { w, h, v: out })
    }
}

/// Otsu level over the 256-bin histogram of rounded gray values; classes
/// are `≤ t` and `> t`.
pub fn otsu_level(values: &[f64]) -> u8 {
    let mut hist = [0u64; 256];
    for &v in values {
        hist[round_half_up(v) as usize] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_t) = (-1.0, 0u8);
    for (t, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_t = t as u8;
        }
    }
    best_t
}

fn morph(mask: &[bool], w: usize, h: usize, r: usize, erode: bool) -> Vec<bool> {
    let r = r as isize;
    let mut out = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = erode;
            'win: for yy in (y - r).max(0)..=(y + r).min(h as isize - 1) {
                for xx in (x - r).max(0)..=(x + r).min(w as isize - 1) {
                    let m = mask[yy as usize * w + xx as usize];
                    if erode && !m {
                        acc = false;
                        break 'win;
                    }
                    if !erode && m {
                        acc = true;
                        break 'win;
                    }
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

/// Morphological opening (erode then dilate) with a `(2r+1)²` square.
pub fn open_mask(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    if r == 0 {
        return mask.to_vec();
    }
    morph(&morph(mask, w, h, r, true), w, h, r, false)
}

fn stride(input: usize, out: Option<usize>, axis: &str) -> Result<(usize, usize)> {
    let out = out.unwrap_or(input);
    if out == 0 || !input.is_multiple_of(out) {
        return Err(Error::Filter(format!(
            "output {axis} size {out} does not divide input size {input}"
        )));
    }
    Ok((out, input / out))
}

/// Raster to density: grayscale, Gaussian blur, median filter, threshold
/// mask, opening, mask-and (unmasked gray set to 0), `1 − g/255`, strided
/// downsampling. The output grid has the given spacing.
pub fn preprocess(img: &RasterImage, params: &PreprocessParams, spacing: (f64, f64)) -> Result<ScalarField> {
    let (nx, sx) = stride(img.width, params.out_nx, "x")?;
    let (ny, sy) = stride(img.height, params.out_ny, "y")?;
    let grid = Grid2D::new(nx, ny, spacing.0, spacing.1)?;
    check_kernel(params.median_kernel, "median")?;

    let smooth = Plane::from_gray(img)
        .gaussian(params.gaussian_kernel, params.gaussian_std)?
        .median(params.median_kernel)?;
    let level = params.threshold.unwrap_or_else(|| otsu_level(&smooth.v)) as f64;
    let raw: Vec<bool> = smooth.v.iter().map(|&g| g > level).collect();
    let mask = open_mask(&raw, smooth.w, smooth.h, params.open_radius);

    let mut values = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let k = j * sy * smooth.w + i * sx;
            let g = if mask[k] { smooth.v[k] } else { 0.0 };
            values.push((1.0 - g / 255.0).clamp(0.0, 1.0));
        }
    }
    ScalarField::from_values(grid, values)
}

/// Every `n`-th node in each direction; spacing grows by `n`.
pub fn downsample(field: &ScalarField, n: usize) -> Result<ScalarField> {
    let g = field.grid();
    if n == 0 || !g.nx().is_multiple_of(n) || !g.ny().is_multiple_of(n) {
        return Err(Error::Filter(format!(
            "downsample factor {n} does not divide {}x{}",
            g.nx(),
            g.ny()
        )));
    }
    if n == 1 {
        return Ok(field.clone());
    }
    let grid = Grid2D::new(g.nx() / n, g.ny() / n, g.hx() * n as f64, g.hy() * n as f64)?;
    let values = (0..grid.ny())
        .flat_map(|j| (0..grid.nx()).map(move |i| (i, j)))
        .map(|(i, j)| field.at(i * n, j * n))
        .collect();
    ScalarField::from_values(grid, values)
}

/// Separable Gaussian `G_{k,s}` on node values, reflected at the boundary;
/// `s` is in nodes.
pub fn gaussian_blur(field: &ScalarField, k: usize, s: f64) -> Result<ScalarField> {
    let g = field.grid();
    let plane = Plane {
        w: g.nx(),
        h: g.ny(),
        v: field.values().to_vec(),
    };
    ScalarField::from_values(*g, plane.gaussian(k, s)?.v)
}

/// `G_{k,s}(D_n(field))`.
pub fn perturb(field: &ScalarField, k: usize, s: f64, n: usize) -> Result<ScalarField> {
    check_kernel(k, "gaussian")?;
    gaussian_blur(&downsample(field, n)?, k, s)
}

/// Quantized gray raster `round(255·clamp(v, 0, 1))`.
pub fn to_raster(field: &ScalarField) -> RasterImage {
    let g = field.grid();
    let data = field
        .values()
        .iter()
        .map(|&v| round_half_up(255.0 * if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }))
        .collect();
    RasterImage {
        width: g.nx(),
        height: g.ny(),
        channels: 1,
        data,
    }
}

/// Binary PNM (`P5` for gray, `P6` for RGB) bytes.
pub fn encode_pnm(img: &RasterImage) -> Result<Vec<u8>> {
    let (sub, color) = match img.channels {
        1 => (PnmSubtype::Graymap(SampleEncoding::Binary), ExtendedColorType::L8),
        _ => (PnmSubtype::Pixmap(SampleEncoding::Binary), ExtendedColorType::Rgb8),
    };
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(sub)
        .write_image(&img.data, img.width as u32, img.height as u32, color)
        .map_err(|e| Error::Image(e.to_string()))?;
    Ok(buf)
}

pub fn write_raster(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pnm(img)?).map_err(|e| Error::io(path, e))
}

pub fn export_pgm(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    write_raster(&to_raster(field), path)
}

/// Decodes PGM/PPM (and PNG) bytes; colour images are reduced to RGB.
pub fn decode_raster(bytes: &[u8]) -> Result<RasterImage> {
    let img = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::Image(e.to_string()))?
        .decode()
        .map_err(|e| Error::Image(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => RasterImage::gray(w, h, g.into_raw()),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
            RasterImage::gray(w, h, img.to_luma8().into_raw())
        }
        other => RasterImage::rgb(w, h, other.to_rgb8().into_raw()),
    }
}

pub fn import_raster(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_raster(&bytes)
}

/// SHA-256 over the little-endian bytes of the shape and node values.
pub fn field_digest(field: &ScalarField) -> String {
    let mut h = Sha256::new();
    h.update((field.grid().nx() as u64).to_le_bytes());
    h.update((field.grid().ny() as u64).to_le_bytes());
    for v in field.values() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Discrete total variation `Σ|Δx| + Σ|Δy|` over node differences.
pub fn total_variation(field: &ScalarField) -> f64 {
    let g = field.grid();
    let mut tv = 0.0;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            if i + 1 < g.nx() {
                tv += (field.at(i + 1, j) - field.at(i, j)).abs();
            }
            if j + 1 < g.ny() {
                tv += (field.at(i, j + 1) - field.at(i, j)).abs();
            }
        }
    }
    tv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> RasterImage {
        RasterImage::gray(w, h, (0..w * h).map(|k| ((k * 37) % 256) as u8).collect()).unwrap()
    }

    fn no_mask() -> PreprocessParams {
        PreprocessParams {
            threshold: Some(0),
            gaussian_kernel: 1,
            median_kernel: 1,
            open_radius: 0,
            ..Default::default()
        }
    }

    #[test]
    fn grayscale_weights() {
        let img = RasterImage::rgb(2, 1, vec![255, 0, 0, 10, 20, 30]).unwrap();
        let g = img.to_gray();
        // 0.299·255 = 76.245; 0.299·10 + 0.587·20 + 0.114·30 = 18.15
        assert_eq!(g.data(), &[76, 18]);
    }

    #[test]
    fn density_endpoints() {
        let img = RasterImage::gray(3, 3, vec![255, 255, 255, 255, 255, 255, 255, 255, 255]).unwrap();
        let f = preprocess(&img, &no_mask(), (0.1, 0.1)).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));

        let mut p = no_mask();
        p.threshold = Some(100);
        let img = RasterImage::gray(3, 3, vec![0; 9]).unwrap();
        let f = preprocess(&img, &p, (0.1, 0.1)).unwrap();
        assert!(f.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn unit_gaussian_is_identity() {
        let img = ramp(7, 5);
        let p = Plane::from_gray(&img);
        assert_eq!(p.gaussian(1, 0.3).unwrap(), p);
        let f = preprocess(&img, &no_mask(), (1.0, 1.0)).unwrap();
        for (v, &g) in f.values().iter().zip(img.data()) {
            assert_eq!(*v, 1.0 - g as f64 / 255.0);
        }
    }

    #[test]
    fn even_kernels_and_bad_strides_rejected() {
        let img = ramp(8, 8);
        let mut p = PreprocessParams::default();
        p.gaussian_kernel = 4;
        assert!(matches!(preprocess(&img, &p, (1.0, 1.0)), Err(Error::Filter(_))));
        let mut p = PreprocessParams::default();
        p.median_kernel = 2;
        assert!(matches!(preprocess(&img, &p, (1.0, 1.0)), Err(Error::Filter(_))));
        let mut p = PreprocessParams::default();
        p.out_nx = Some(3);
        assert!(matches!(preprocess(&img, &p, (1.0, 1.0)), Err(Error::Filter(_))));
    }

    #[test]
    fn strided_downsample_picks_top_left() {
        let img = ramp(8, 6);
        let mut p = no_mask();
        p.out_nx = Some(4);
        p.out_ny = Some(3);
        let f = preprocess(&img, &p, (0.2, 0.2)).unwrap();
        assert_eq!((f.grid().nx(), f.grid().ny()), (4, 3));
        assert_eq!(f.at(1, 1), 1.0 - img.data()[2 * 8 + 2] as f64 / 255.0);
    }

    #[test]
    fn filters_preserve_range_and_constants() {
        let p = Plane {
            w: 6,
            h: 6,
            v: (0..36).map(|k| ((k * 7919) % 13) as f64 / 12.0).collect(),
        };
        for q in [p.gaussian(5, 1.3).unwrap(), p.median(3).unwrap()] {
            assert!(q.v.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        let c = Plane { w: 5, h: 4, v: vec![0.3; 20] };
        assert!(c.gaussian(5, 2.0).unwrap().v.iter().all(|&v| (v - 0.3).abs() < 1e-15));
    }

    #[test]
    fn median_removes_salt() {
        let mut v = vec![10.0; 25];
        v[12] = 255.0;
        let p = Plane { w: 5, h: 5, v };
        assert!(p.median(3).unwrap().v.iter().all(|&x| x == 10.0));
    }

    #[test]
    fn opening_removes_isolated_pixels() {
        let (w, h) = (7, 7);
        let mut m = vec![false; w * h];
        m[3 * w + 3] = true;
        for y in 0..3 {
            for x in 0..3 {
                m[y * w + x] = true;
            }
        }
        let o = open_mask(&m, w, h, 1);
        assert!(!o[3 * w + 3]);
        assert!(o[w + 1]);
        assert_eq!(o.iter().filter(|&&b| b).count(), 9);
    }

    #[test]
    fn otsu_splits_bimodal() {
        let values: Vec<f64> = (0..100).map(|k| if k < 50 { 20.0 } else { 200.0 }).collect();
        let t = otsu_level(&values);
        assert!((20..200).contains(&t));
    }

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(reflect(-5, 2), 0);
    }

    #[test]
    fn pgm_quantization() {
        let g = Grid2D::square(4, 3, 0.1).unwrap();
        assert!(to_raster(&ScalarField::constant(g, 1.0)).data().iter().all(|&b| b == 255));
        assert!(to_raster(&ScalarField::constant(g, 0.5)).data().iter().all(|&b| b == 128));
        assert!(to_raster(&ScalarField::constant(g, -2.0)).data().iter().all(|&b| b == 0));
        let bytes = encode_pnm(&to_raster(&ScalarField::constant(g, 0.5))).unwrap();
        assert!(bytes.starts_with(b"P5"));
    }

    #[test]
    fn pnm_round_trip() {
        let g = Grid2D::square(5, 4, 0.1).unwrap();
        let f = ScalarField::from_fn(g, |x, y| x * y * 3.0);
        let img = to_raster(&f);
        assert_eq!(decode_raster(&encode_pnm(&img).unwrap()).unwrap(), img);
        let rgb = RasterImage::rgb(2, 2, (0..12).map(|k| k * 20).collect()).unwrap();
        assert_eq!(decode_raster(&encode_pnm(&rgb).unwrap()).unwrap(), rgb);
        assert!(matches!(decode_raster(b"P5\n2 2\n255\n\x01"), Err(Error::Image(_))));
    }

    #[test]
    fn perturb_examples() {
        let g = Grid2D::square(12, 12, 0.1).unwrap();
        let f = ScalarField::from_fn(g, |x, y| (7.0 * x).sin() * y);
        assert_eq!(perturb(&f, 1, 0.2, 1).unwrap(), f);
        let c = ScalarField::constant(g, 0.4);
        for (k, s, n) in [(3, 0.5, 2), (5, 1.0, 4), (1, 1.0, 1), (7, 3.0, 3)] {
            let p = perturb(&c, k, s, n).unwrap();
            assert!(p.values().iter().all(|v| (v - 0.4).abs() < 1e-15));
        }
        let d = perturb(&f, 1, 1.0, 2).unwrap();
        assert_eq!((d.grid().nx(), d.grid().hx()), (6, 0.2));
        assert!(perturb(&f, 2, 1.0, 1).is_err());
        assert!(perturb(&f, 3, 1.0, 5).is_err());
    }
}
