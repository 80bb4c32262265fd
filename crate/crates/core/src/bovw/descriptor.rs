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

//! Dense-grid gradient-orientation descriptors.
//!
//! Keypoints sit on a regular grid; at scale `s` the patch side is
//! `patch * s` and its top-left corner is stored as the location. Each patch
//! is split into `cells x cells` blocks with a `bins`-bin histogram of
//! gradient orientation weighted by magnitude.

use std::f64::consts::PI;

use crate::bovw::pgm::GrayImage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub image_id: String,
    pub x: u32,
    pub y: u32,
    pub scale: u32,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseGridParams {
    pub stride: usize,
    /// Patch side at scale 1.
    pub patch: usize,
    pub scales: Vec<usize>,
    pub cells: usize,
    pub bins: usize,
}

impl Default for DenseGridParams {
    fn default() -> Self {
        Self {
            stride: 8,
            patch: 16,
            scales: vec![1, 2],
            cells: 4,
            bins: 8,
        }
    }
}

impl DenseGridParams {
    pub fn dim(&self) -> usize {
        self.cells * self.cells * self.bins
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.patch == 0 || self.cells == 0 || self.bins == 0 || self.scales.is_empty() {
            return Err(Error::domain("descriptor grid parameters must be positive"));
        }
        if self
            .scales
            .iter()
            .any(|&s| s == 0 || !(self.patch * s).is_multiple_of(self.cells))
        {
            return Err(Error::domain("every scaled patch must split evenly into cells"));
        }
        Ok(())
    }

    /// Number of keypoints on a `width x height` raster.
    pub fn grid_count(&self, width: usize, height: usize) -> usize {
        self.scales
            .iter()
            .map(|&s| {
                let p = self.patch * s;
                let along = |n: usize| if n < p { 0 } else { (n - p) / self.stride + 1 };
                along(width) * along(height)
            })
            .sum()
    }
}

/// Magnitude and orientation bin per pixel, from clamped central differences.
struct Gradients {
    mag: Vec<f64>,
    bin: Vec<u8>,
}

fn gradients(img: &GrayImage, bins: usize) -> Gradients {
    let (w, h) = (img.width, img.height);
    let mut mag = Vec::with_capacity(w * h);
    let mut bin = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let gx = f64::from(img.get((x + 1).min(w - 1), y)) - f64::from(img.get(x.saturating_sub(1), y));
            let gy = f64::from(img.get(x, (y + 1).min(h - 1))) - f64::from(img.get(x, y.saturating_sub(1)));
            mag.push(gx.hypot(gy));
            let angle = gy.atan2(gx) + PI;
            bin.push(((angle / (2.0 * PI) * bins as f64) as usize % bins) as u8);
        }
    }
    Gradients { mag, bin }
}

/// L2-normalizes, clamps entries at 0.2 and renormalizes. A zero vector
/// stays zero.
pub fn normalize_descriptor(v: &mut [f64]) {
    let scale = |v: &mut [f64]| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
    };
    scale(v);
    v.iter_mut().for_each(|x| *x = x.min(0.2));
    scale(v);
}

/// Descriptors of one image, ordered by scale, then row, then column.
/// An image smaller than every patch yields no descriptors.
pub fn extract_descriptors(image_id: &str, img: &GrayImage, params: &DenseGridParams) -> Result<Vec<Descriptor>> {
    params.validate()?;
    let g = gradients(img, params.bins);
    let mut out = Vec::with_capacity(params.grid_count(img.width, img.height));
    for &s in &params.scales {
        let p = params.patch * s;
        if p > img.width || p > img.height {
            continue;
        }
        let cell = p / params.cells;
        for y0 in (0..=img.height - p).step_by(params.stride) {
            for x0 in (0..=img.width - p).step_by(params.stride) {
                let mut v = vec![0.0; params.dim()];
                for py in 0..p {
                    let row = (y0 + py) * img.width;
                    let cy = py / cell;
                    for px in 0..p {
                        let idx = row + x0 + px;
                        let c = cy * params.cells + px / cell;
                        v[c * params.bins + g.bin[idx] as usize] += g.mag[idx];
                    }
                }
                normalize_descriptor(&mut v);
                out.push(Descriptor {
                    image_id: image_id.to_string(),
                    x: x0 as u32,
                    y: y0 as u32,
                    scale: s as u32,
                    vector: v,
                });
            }
        }
    }
    Ok(out)
}
