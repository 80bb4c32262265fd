// Copyright 2026 The medimr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! 8-bit binary PGM (`P5`) rasters and a seeded texture generator.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, `width * height` bytes.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input("image must be non-empty"));
        }
        if pixels.len() != width * height {
            return Err(Error::input(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Parses a `P5` raster with `maxval <= 255`. Comments (`#` to end of line)
/// are allowed between header fields.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let mut field = || -> Result<&[u8]> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::input("truncated PGM header"));
        }
        Ok(&bytes[start..pos])
    };
    if field()? != b"P5" {
        return Err(Error::input("not a binary PGM (P5) file"));
    }
    let mut num = |name: &str| -> Result<usize> {
        std::str::from_utf8(field()?)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::input(format!("bad PGM {name}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::input(format!("unsupported PGM maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let data = pos + 1;
    let need = width
        .checked_mul(height)
        .ok_or_else(|| Error::input("PGM dimensions overflow"))?;
    if bytes.len() < data + need {
        return Err(Error::input(format!(
            "PGM raster truncated: need {need} bytes, have {}",
            bytes.len().saturating_sub(data)
        )));
    }
    GrayImage::new(width, height, bytes[data..data + need].to_vec())
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    parse_pgm(&fs::read(path).at(path)?).map_err(|e| match e {
        Error::Input(msg) => Error::input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img)).at(path)
}

/// Seeded texture: a few random oriented sinusoids plus uniform noise.
pub fn synthetic_texture(size: usize, seed: u64) -> Result<GrayImage> {
    if size == 0 {
        return Err(Error::domain("image size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let theta = rng.random_range(0.0..std::f64::consts::PI);
            let freq = rng.random_range(0.05..0.6);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let amp = rng.random_range(10.0..50.0);
            (theta, freq, phase, amp)
        })
        .collect();
    let noise = rng.random_range(5.0..40.0);
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let mut v = 128.0;
            for &(theta, freq, phase, amp) in &waves {
                let u = x as f64 * theta.cos() + y as f64 * theta.sin();
                v += amp * (freq * u + phase).sin();
            }
            v += rng.random_range(-noise..noise);
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(size, size, pixels)
}

/// Writes `count` textures as `img-00000.pgm`, ... and returns their paths.
pub fn generate_images(dir: &Path, count: usize, size: usize, seed: u64) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir).at(dir)?;
    (0..count)
        .map(|i| {
            let path = dir.join(format!("img-{i:05}.pgm"));
            write_pgm(
                &path,
                &synthetic_texture(size, seed.wrapping_mul(1_000_003).wrapping_add(i as u64))?,
            )?;
            Ok(path)
        })
        .collect()
}
