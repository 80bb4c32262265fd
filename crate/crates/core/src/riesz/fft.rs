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

//! Separable 3D FFT over x-fastest complex buffers.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    dims: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dims,
            forward: dims.map(|n| planner.plan_fft_forward(n)),
            inverse: dims.map(|n| planner.plan_fft_inverse(n)),
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform, scaled by `1/n`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [nx, ny, nz] = self.dims;
        assert_eq!(data.len(), nx * ny * nz, "buffer does not match FFT shape");
        for row in data.chunks_exact_mut(nx) {
            plans[0].process(row);
        }
        let mut line = vec![Complex64::new(0.0, 0.0); ny.max(nz)];
        for z in 0..nz {
            for x in 0..nx {
                let buf = &mut line[..ny];
                for y in 0..ny {
                    buf[y] = data[x + nx * (y + ny * z)];
                }
                plans[1].process(buf);
                for y in 0..ny {
                    data[x + nx * (y + ny * z)] = buf[y];
                }
            }
        }
        let plane = nx * ny;
        for xy in 0..plane {
            let buf = &mut line[..nz];
            for z in 0..nz {
                buf[z] = data[xy + plane * z];
            }
            plans[2].process(buf);
            for z in 0..nz {
                data[xy + plane * z] = buf[z];
            }
        }
    }
}
