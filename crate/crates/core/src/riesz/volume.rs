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

//! Scalar volumes and their binary file format.
//!
//! A volume file is a 12-byte header of three little-endian `u32` dims
//! `(n_x, n_y, n_z)` followed by `n_x * n_y * n_z` little-endian `f32`
//! voxels, x fastest.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, IoContext, Result};
use crate::riesz::fft::Fft3;
use crate::riesz::filterbank::for_each_frequency;

#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    /// `(n_x, n_y, n_z)`.
    pub dims: [usize; 3],
    /// x-fastest voxel values.
    pub voxels: Vec<f64>,
}

impl Volume {
    pub fn new(dims: [usize; 3], voxels: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::input("volume dimensions must be positive"));
        }
        if voxels.len() != dims.iter().product::<usize>() {
            return Err(Error::input(format!(
                "volume {:?} needs {} voxels, got {}",
                dims,
                dims.iter().product::<usize>(),
                voxels.len()
            )));
        }
        if voxels.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("volume holds non-finite voxels"));
        }
        Ok(Self { dims, voxels })
    }

    pub fn zeros(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, vec![0.0; dims.iter().product()])
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    /// Swaps the x and y axes.
    pub fn transpose_xy(&self) -> Volume {
        let [nx, ny, nz] = self.dims;
        let mut out = vec![0.0; self.len()];
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    out[y + ny * (x + nx * z)] = self.voxels[self.index(x, y, z)];
                }
            }
        }
        Volume {
            dims: [ny, nx, nz],
            voxels: out,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.len());
        for d in self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.voxels {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::input("volume file shorter than its 12-byte header"));
        }
        let dim = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes")) as usize;
        let dims = [dim(0), dim(1), dim(2)];
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::input("volume dimensions overflow"))?;
        if bytes.len() != 12 + 4 * n {
            return Err(Error::input(format!(
                "volume {:?} needs {} bytes, file has {}",
                dims,
                12 + 4 * n,
                bytes.len()
            )));
        }
        let voxels = bytes[12..]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        Self::new(dims, voxels)
    }
}

pub fn read_volume(path: &Path) -> Result<Volume> {
    Volume::decode(&fs::read(path).at(path)?).map_err(|e| match e {
        Error::Input(msg) => Error::input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_volume(path: &Path, v: &Volume) -> Result<()> {
    fs::write(path, v.encode()).at(path)
}

/// Seeded solid texture: white noise low-passed by an anisotropic Gaussian
/// spectrum with random per-axis correlation lengths, scaled to unit variance.
pub fn synthetic_volume(dims: [usize; 3], seed: u64) -> Result<Volume> {
    if dims.contains(&0) {
        return Err(Error::domain("volume dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lengths = Uniform::new(0.5, 4.0).map_err(|e| Error::domain(e.to_string()))?;
    let l = [
        lengths.sample(&mut rng),
        lengths.sample(&mut rng),
        lengths.sample(&mut rng),
    ];
    let n: usize = dims.iter().product();
    let mut data: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    let fft = Fft3::new(dims);
    fft.forward(&mut data);
    for_each_frequency(&dims, |p, w| {
        let e: f64 = w.iter().zip(&l).map(|(wi, li)| (wi * li).powi(2)).sum();
        data[p] *= (-0.5 * e).exp();
    });
    fft.inverse(&mut data);
    let re: Vec<f64> = data.iter().map(|c| c.re).collect();
    let mean = re.iter().sum::<f64>() / n as f64;
    let sd = (re.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64)
        .sqrt()
        .max(1e-12);
    // Round through f32 so the in-memory volume equals what a file holds.
    Volume::new(dims, re.iter().map(|v| f64::from(((v - mean) / sd) as f32)).collect())
}

/// Writes `count` volumes as `vol-00000.bin`, ... and returns their paths.
pub fn generate_volumes(dir: &Path, count: usize, dims: [usize; 3], seed: u64) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).at(dir)?;
    (0..count)
        .map(|i| {
            let path = dir.join(format!("vol-{i:05}.bin"));
            write_volume(
                &path,
                &synthetic_volume(dims, seed.wrapping_mul(1_000_003).wrapping_add(i as u64))?,
            )?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_round_trip_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let v = synthetic_volume([5, 4, 3], 2).unwrap();
        let p = dir.path().join("v.bin");
        write_volume(&p, &v).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 12 + 4 * 60);
        assert_eq!(read_volume(&p).unwrap(), v);
    }

    #[test]
    fn rejects_misshapen_files() {
        let v = Volume::zeros([2, 2, 2]).unwrap();
        let mut bytes = v.encode();
        bytes.pop();
        assert!(matches!(Volume::decode(&bytes), Err(Error::Input(_))));
        assert!(matches!(Volume::decode(&bytes[..5]), Err(Error::Input(_))));
        let mut nan = v.encode();
        nan[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(Volume::decode(&nan), Err(Error::Input(_))));
    }

    #[test]
    fn transpose_swaps_axes() {
        let v = Volume::new([2, 3, 1], (0..6).map(f64::from).collect()).unwrap();
        let t = v.transpose_xy();
        assert_eq!(t.dims, [3, 2, 1]);
        for y in 0..3 {
            for x in 0..2 {
                assert_eq!(t.voxels[t.index(y, x, 0)], v.voxels[v.index(x, y, 0)]);
            }
        }
        assert_eq!(t.transpose_xy(), v);
    }

    #[test]
    fn generator_is_seeded_and_standardized() {
        let a = synthetic_volume([8, 8, 8], 4).unwrap();
        assert_eq!(a, synthetic_volume([8, 8, 8], 4).unwrap());
        assert_ne!(a, synthetic_volume([8, 8, 8], 5).unwrap());
        let mean = a.voxels.iter().sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 1e-6);
    }
}
