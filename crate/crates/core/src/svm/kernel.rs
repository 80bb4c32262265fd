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

//! Gaussian RBF kernel and a lazily filled Gram-row cache.

use crate::error::{Error, Result};

/// `exp(-||x - y||^2 / (2 sigma^2))`.
pub fn rbf_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if x.len() != y.len() {
        return Err(Error::domain(format!(
            "kernel arguments differ in dimension ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    Ok(rbf(x, y, gamma(sigma)))
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("sigma must be finite and > 0, got {sigma}")))
    }
}

pub(crate) fn gamma(sigma: f64) -> f64 {
    1.0 / (2.0 * sigma * sigma)
}

#[inline]
pub(crate) fn rbf(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// Dense Gram matrix, row-major.
pub fn gram_matrix(points: &[&[f64]], sigma: f64) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    let n = points.len();
    let g = gamma(sigma);
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(points[i], points[j], g);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    Ok(k)
}

/// Kernel values `K(i, j)` over a fixed training set, computed one row at a
/// time on first use and kept for the lifetime of the solver.
pub(crate) struct KernelCache<'a> {
    points: &'a [&'a [f64]],
    gamma: f64,
    rows: Vec<Option<Box<[f64]>>>,
}

impl<'a> KernelCache<'a> {
    pub fn new(points: &'a [&'a [f64]], sigma: f64) -> Self {
        Self {
            points,
            gamma: gamma(sigma),
            rows: vec![None; points.len()],
        }
    }

    pub fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            let xi = self.points[i];
            let row: Box<[f64]> = self.points.iter().map(|xj| rbf(xi, xj, self.gamma)).collect();
            self.rows[i] = Some(row);
        }
        self.rows[i].as_deref().expect("filled above")
    }

    /// Fills rows `i` and `j` and returns both.
    pub fn pair(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        self.row(i);
        self.row(j);
        (
            self.rows[i].as_deref().expect("filled"),
            self.rows[j].as_deref().expect("filled"),
        )
    }
}
