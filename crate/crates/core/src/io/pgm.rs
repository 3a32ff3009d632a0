//! PGM (P2/P5) grayscale images and image-derived momenta.

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::ParamGrid;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major, top row first.
    pub pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, maxval: u16, pixels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("image has zero size".into()));
        }
        if maxval == 0 || pixels.len() != width * height || pixels.iter().any(|&p| p > maxval) {
            return Err(Error::InvalidParameter("inconsistent image data".into()));
        }
        Ok(GrayImage {
            width,
            height,
            maxval,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, maxval: u16, f: impl Fn(usize, usize) -> u16) -> Result<Self> {
        let pixels = (0..height).flat_map(|r| (0..width).map(move |c| (r, c))).map(|(r, c)| f(c, r)).collect();
        Self::new(width, height, maxval, pixels)
    }

    /// Intensity in `[0, 1]` at column `c`, row `r`.
    pub fn intensity(&self, c: usize, r: usize) -> f64 {
        f64::from(self.pixels[r * self.width + c]) / f64::from(self.maxval)
    }

    /// Binary (P5) encoding.
    pub fn to_p5(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        for &p in &self.pixels {
            if self.maxval < 256 {
                out.push(p as u8);
            } else {
                out.extend_from_slice(&p.to_be_bytes());
            }
        }
        out
    }

    /// ASCII (P2) encoding.
    pub fn to_p2(&self) -> String {
        let mut out = format!("P2\n{} {}\n{}\n", self.width, self.height, self.maxval);
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(ToString::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Option<u64> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok()?.parse().ok()
    }
}

/// Decode a P2 or P5 image; `path` only labels errors.
pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(Error::format(path, "not a PGM file (expected magic P2 or P5)")),
    };
    let mut h = Header { bytes, pos: 2 };
    let bad = |what: &str| Error::format(path, format!("malformed PGM header: {what}"));
    let width = h.number().ok_or_else(|| bad("width"))? as usize;
    let height = h.number().ok_or_else(|| bad("height"))? as usize;
    let maxval = h.number().ok_or_else(|| bad("maxval"))?;
    if width == 0 || height == 0 {
        return Err(Error::format(path, "image has zero size"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad("maxval must lie in 1..=65535"));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| bad("image dimensions overflow"))?;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = h.pos + 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let raster = bytes
            .get(start..start + need)
            .ok_or_else(|| Error::format(path, "truncated pixel data"))?;
        if wide {
            pixels.extend(raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])));
        } else {
            pixels.extend(raster.iter().map(|&b| u16::from(b)));
        }
    } else {
        for _ in 0..count {
            let v = h.number().ok_or_else(|| Error::format(path, "truncated pixel data"))?;
            pixels.push(v.min(u64::from(u16::MAX)) as u16);
        }
    }
    let maxval = maxval as u16;
    if pixels.iter().any(|&p| p > maxval) {
        return Err(Error::format(path, "pixel value exceeds maxval"));
    }
    Ok(GrayImage {
        width,
        height,
        maxval,
        pixels,
    })
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, path)
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    std::fs::write(path, image.to_p5()).map_err(|e| Error::io(path, e))
}

/// A bold capital A on a black background.
pub fn letter_a(size: usize) -> GrayImage {
    let s = size.max(8) as f64;
    let segs = [
        ((0.2, 0.85), (0.5, 0.15)),
        ((0.5, 0.15), (0.8, 0.85)),
        ((0.33, 0.58), (0.67, 0.58)),
    ];
    let dist = |px: f64, py: f64, (a, b): ((f64, f64), (f64, f64))| {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let t = (((px - a.0) * dx + (py - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        ((px - a.0 - t * dx).powi(2) + (py - a.1 - t * dy).powi(2)).sqrt()
    };
    let size = s as usize;
    GrayImage::from_fn(size, size, 255, |c, r| {
        let (x, y) = ((c as f64 + 0.5) / s, (r as f64 + 0.5) / s);
        if segs.iter().any(|&sg| dist(x, y, sg) < 0.06) {
            255
        } else {
            0
        }
    })
    .expect("glyph dimensions are positive")
}

/// Bilinear sample at fractional pixel coordinates, clamped to the image or tiled.
fn bilinear(img: &GrayImage, x: f64, y: f64, wrap: bool) -> f64 {
    let (w, h) = (img.width as f64, img.height as f64);
    let (x, y) = if wrap {
        (x.rem_euclid(w), y.rem_euclid(h))
    } else {
        (x.clamp(0.0, w - 1.0), y.clamp(0.0, h - 1.0))
    };
    let (c0, r0) = ((x.floor() as usize).min(img.width - 1), (y.floor() as usize).min(img.height - 1));
    let next = |k: usize, len: usize| if wrap { (k + 1) % len } else { (k + 1).min(len - 1) };
    let (c1, r1) = (next(c0, img.width), next(r0, img.height));
    let (fx, fy) = (x - c0 as f64, y - r0 as f64);
    let top = (1.0 - fx) * img.intensity(c0, r0) + fx * img.intensity(c1, r0);
    let bottom = (1.0 - fx) * img.intensity(c0, r1) + fx * img.intensity(c1, r1);
    (1.0 - fy) * top + fy * bottom
}

/// Resample onto the grid with `v` pointing up the image, intensities in `[0, 1]`.
/// Periodic grids treat the image as a tile.
pub fn resample(img: &GrayImage, grid: &ParamGrid) -> Vec<f64> {
    let (u0, v0) = grid.origin();
    let (lu, lv) = grid.extent();
    (0..grid.len())
        .map(|n| {
            let (u, v) = grid.position(n);
            let (s, t) = ((u - u0) / lu, (v - v0) / lv);
            bilinear(img, s * img.width as f64 - 0.5, (1.0 - t) * img.height as f64 - 0.5, grid.is_periodic())
        })
        .collect()
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let w: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Separable Gaussian blur of width `sigma` grid nodes; periodic grids wrap, Dirichlet
/// grids are zero-padded.
pub fn gaussian_smooth(vals: &[f64], grid: &ParamGrid, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vals.to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (nu, nv) = (grid.nu() as isize, grid.nv() as isize);
    let periodic = grid.is_periodic();
    let pass = |src: &[f64], along_u: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for j in 0..nv {
            for i in 0..nu {
                let mut acc = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    let off = k as isize - radius;
                    let (mut ii, mut jj) = if along_u { (i + off, j) } else { (i, j + off) };
                    if periodic {
                        ii = ii.rem_euclid(nu);
                        jj = jj.rem_euclid(nv);
                    } else if ii < 0 || ii >= nu || jj < 0 || jj >= nv {
                        continue;
                    }
                    acc += w * src[grid.index(ii as usize, jj as usize)];
                }
                out[grid.index(i as usize, j as usize)] = acc;
            }
        }
        out
    };
    pass(&pass(vals, true), false)
}

/// Normal momentum `a₀` from an image: resample, smooth, then zero the Dirichlet ring.
pub fn momentum_from_gray(img: &GrayImage, sigma: f64, grid: &ParamGrid) -> Result<ScalarField> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("smoothing sigma must be >= 0, got {sigma}")));
    }
    let mut a = gaussian_smooth(&resample(img, grid), grid, sigma);
    for (n, x) in a.iter_mut().enumerate() {
        if grid.is_boundary_node(n) {
            *x = 0.0;
        }
    }
    Ok(ScalarField(a))
}

pub fn momentum_from_image(path: &Path, sigma: f64, grid: &ParamGrid) -> Result<ScalarField> {
    momentum_from_gray(&read_pgm(path)?, sigma, grid)
}
