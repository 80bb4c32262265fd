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

//! Multiscale Riesz energy features of a volume.
//!
//! The normalized volume is transformed once; for each dyadic band and each
//! Riesz component the spectrum is filtered, transformed back, and the mean
//! squared modulus of the coefficients is kept. Features are ordered by scale
//! (finest first), then by component as in
//! [`multi_indices`](crate::riesz::filterbank::multi_indices).

use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::riesz::fft::Fft3;
use crate::riesz::filterbank::{
    band_window, for_each_frequency, residual_lowpass_sq, riesz_filterbank, RieszFilterbank,
};
use crate::riesz::volume::Volume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    None,
    /// Subtract the mean voxel value.
    #[default]
    ZeroMean,
    /// Zero mean and unit variance.
    Standardize,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "zero-mean" => Ok(Self::ZeroMean),
            "standardize" => Ok(Self::Standardize),
            other => Err(Error::input(format!("unknown normalization {other:?}"))),
        }
    }
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::ZeroMean => "zero-mean",
            Self::Standardize => "standardize",
        }
    }

    pub fn apply(self, voxels: &[f64]) -> Vec<f64> {
        let n = voxels.len() as f64;
        match self {
            Self::None => voxels.to_vec(),
            Self::ZeroMean => {
                let mean = voxels.iter().sum::<f64>() / n;
                voxels.iter().map(|v| v - mean).collect()
            }
            Self::Standardize => {
                let mean = voxels.iter().sum::<f64>() / n;
                let sd = (voxels.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                let sd = if sd > 0.0 { sd } else { 1.0 };
                voxels.iter().map(|v| (v - mean) / sd).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextureFeatureVector {
    pub volume_id: String,
    pub energies: Vec<f64>,
}

impl TextureFeatureVector {
    /// `volume_id \t e1,...,eM`.
    pub fn to_line(&self) -> String {
        format!("{}\t{}", self.volume_id, join_energies(&self.energies))
    }
}

pub fn join_energies(e: &[f64]) -> String {
    let parts: Vec<String> = e.iter().map(f64::to_string).collect();
    parts.join(",")
}

/// Filterbank, band windows and FFT plans for one volume shape, reusable
/// across volumes of that shape.
pub struct RieszAnalyzer {
    pub scales: u32,
    pub order: u32,
    pub normalization: Normalization,
    dims: [usize; 3],
    fft: Fft3,
    filterbank: RieszFilterbank,
    /// `bands[j][p]`: window of band `j + 1` at grid point `p`.
    bands: Vec<Vec<f64>>,
    /// `1 - L_s^2`, zero at the origin.
    retained: Vec<f64>,
}

impl RieszAnalyzer {
    pub fn new(dims: [usize; 3], scales: u32, order: u32, normalization: Normalization) -> Result<Self> {
        if scales == 0 {
            return Err(Error::domain("at least one scale is required"));
        }
        let min_side = 1usize.checked_shl(scales).unwrap_or(usize::MAX);
        if dims.iter().any(|&n| n < min_side) {
            return Err(Error::domain(format!(
                "volume {dims:?} is too small for {scales} scales (each side must be >= {min_side})"
            )));
        }
        let filterbank = riesz_filterbank(order, &dims)?;
        let n: usize = dims.iter().product();
        let mut bands = vec![vec![0.0; n]; scales as usize];
        let mut retained = vec![0.0; n];
        for_each_frequency(&dims, |p, w| {
            let r = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (j, band) in bands.iter_mut().enumerate() {
                band[p] = band_window(j as u32 + 1, r);
            }
            retained[p] = if r == 0.0 {
                0.0
            } else {
                1.0 - residual_lowpass_sq(scales, r)
            };
        });
        Ok(Self {
            scales,
            order,
            normalization,
            dims,
            fft: Fft3::new(dims),
            filterbank,
            bands,
            retained,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn feature_len(&self) -> usize {
        self.scales as usize * self.filterbank.components()
    }

    pub fn component_indices(&self) -> &[Vec<u32>] {
        &self.filterbank.indices
    }

    fn spectrum(&self, v: &Volume) -> Result<Vec<Complex64>> {
        if v.dims != self.dims {
            return Err(Error::domain(format!(
                "volume {:?} does not match analyzer shape {:?}",
                v.dims, self.dims
            )));
        }
        if v.voxels.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("volume holds non-finite voxels"));
        }
        let mut data: Vec<Complex64> = self
            .normalization
            .apply(&v.voxels)
            .into_iter()
            .map(|x| Complex64::new(x, 0.0))
            .collect();
        self.fft.forward(&mut data);
        Ok(data)
    }

    pub fn analyze(&self, volume_id: &str, v: &Volume) -> Result<TextureFeatureVector> {
        let spec = self.spectrum(v)?;
        let n = spec.len() as f64;
        let mut energies = Vec::with_capacity(self.feature_len());
        let mut buf = vec![Complex64::new(0.0, 0.0); spec.len()];
        for band in &self.bands {
            for response in &self.filterbank.responses {
                for p in 0..spec.len() {
                    buf[p] = spec[p] * response[p] * band[p];
                }
                self.fft.inverse(&mut buf);
                energies.push(buf.iter().map(Complex64::norm_sqr).sum::<f64>() / n);
            }
        }
        Ok(TextureFeatureVector {
            volume_id: volume_id.to_string(),
            energies,
        })
    }

    /// Spatial-domain energy of the normalized volume inside the spectrum
    /// covered by the bands: `(1/n) sum_w |V(w)|^2 (1 - L_s(w)^2)`, origin
    /// excluded.
    pub fn retained_energy(&self, v: &Volume) -> Result<f64> {
        let spec = self.spectrum(v)?;
        let n = spec.len() as f64;
        Ok(spec
            .iter()
            .zip(&self.retained)
            .map(|(c, r)| c.norm_sqr() * r)
            .sum::<f64>()
            / n)
    }
}

/// Energies of `v` for `scales` bands and Riesz order `order`, zero-mean
/// normalized.
pub fn analyze_volume(v: &Volume, scales: u32, order: u32) -> Result<Vec<f64>> {
    Ok(RieszAnalyzer::new(v.dims, scales, order, Normalization::ZeroMean)?
        .analyze("", v)?
        .energies)
}
