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

//! Higher-order Riesz multipliers and isotropic dyadic band windows.
//!
//! The component with multi-index `n = (n_1, ..., n_d)`, `|n| = N`, has the
//! frequency response
//!
//! ```text
//! R_n(w) = (-i)^N sqrt(N! / (n_1! ... n_d!)) w_1^n_1 ... w_d^n_d / |w|^N
//! ```
//!
//! and `R_n(0) = 0`. By the multinomial theorem `sum_n |R_n(w)|^2 = 1` for
//! every `w != 0`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// All `d`-tuples of non-negative integers summing to `order`, starting at
/// `(order, 0, ..., 0)` and ending at `(0, ..., 0, order)`.
pub fn multi_indices(order: u32, d: usize) -> Vec<Vec<u32>> {
    fn rec(rest: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(rest);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=rest).rev() {
            prefix.push(first);
            rec(rest - first, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if d > 0 {
        rec(order, d, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

/// `s * (N + d - 1)! / (N! (d - 1)!)`.
pub fn riesz_component_count(scales: usize, order: u32, d: usize) -> Result<usize> {
    if scales == 0 || order == 0 || d == 0 {
        return Err(Error::domain("scales, order and dimensionality must all be at least 1"));
    }
    let per_scale = binomial(u64::from(order) + d as u64 - 1, d as u64 - 1);
    Ok(scales * per_scale as usize)
}

/// `(-i)^N`.
fn neg_i_pow(order: u32) -> Complex64 {
    match order % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Response of component `index` at frequency `w`.
pub fn riesz_response(index: &[u32], w: &[f64]) -> Complex64 {
    let order: u32 = index.iter().sum();
    let norm2: f64 = w.iter().map(|x| x * x).sum();
    if norm2 == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let norm = norm2.sqrt();
    let weight = (factorial(order) / index.iter().map(|&n| factorial(n)).product::<f64>()).sqrt();
    let mono: f64 = index.iter().zip(w).map(|(&n, &x)| (x / norm).powi(n as i32)).product();
    neg_i_pow(order) * (weight * mono)
}

/// FFT frequency of bin `k` on an axis of length `n`, in `[-pi, pi)`.
pub fn axis_frequency(k: usize, n: usize) -> f64 {
    let signed = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
    2.0 * PI * signed / n as f64
}

/// Per-component responses sampled on an FFT grid.
#[derive(Debug, Clone)]
pub struct RieszFilterbank {
    pub order: u32,
    /// Grid shape, first axis fastest.
    pub dims: Vec<usize>,
    pub indices: Vec<Vec<u32>>,
    /// `responses[c][p]` for component `c` at flattened grid point `p`.
    pub responses: Vec<Vec<Complex64>>,
}

impl RieszFilterbank {
    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn components(&self) -> usize {
        self.indices.len()
    }
}

/// Calls `f(flat_index, frequency)` for every point of an FFT grid.
pub(crate) fn for_each_frequency(dims: &[usize], mut f: impl FnMut(usize, &[f64])) {
    let total: usize = dims.iter().product();
    let mut w = vec![0.0; dims.len()];
    let mut coord = vec![0usize; dims.len()];
    for p in 0..total {
        for (a, (&c, &n)) in coord.iter().zip(dims).enumerate() {
            w[a] = axis_frequency(c, n);
        }
        f(p, &w);
        for (c, &n) in coord.iter_mut().zip(dims) {
            *c += 1;
            if *c < n {
                break;
            }
            *c = 0;
        }
    }
}

pub fn riesz_filterbank(order: u32, dims: &[usize]) -> Result<RieszFilterbank> {
    let d = dims.len();
    if !(2..=3).contains(&d) {
        return Err(Error::domain(format!(
            "Riesz filterbank supports 2 or 3 dimensions, got {d}"
        )));
    }
    if order == 0 {
        return Err(Error::domain("Riesz order must be at least 1"));
    }
    if dims.contains(&0) {
        return Err(Error::domain("grid dimensions must be positive"));
    }
    let indices = multi_indices(order, d);
    let total: usize = dims.iter().product();
    let mut responses = vec![vec![Complex64::new(0.0, 0.0); total]; indices.len()];
    for_each_frequency(dims, |p, w| {
        for (c, idx) in indices.iter().enumerate() {
            responses[c][p] = riesz_response(idx, w);
        }
    });
    Ok(RieszFilterbank {
        order,
        dims: dims.to_vec(),
        indices,
        responses,
    })
}

/// Raised-cosine high-pass profile: 0 below `pi/2`, 1 from `pi` up, and
/// `cos(pi/2 * log2(r / pi))` in between.
pub fn highpass(r: f64) -> f64 {
    if r >= PI {
        1.0
    } else if r <= PI / 2.0 {
        0.0
    } else {
        (PI / 2.0 * (r / PI).log2()).cos()
    }
}

/// Complementary low-pass profile, `sqrt(1 - h^2)`.
pub fn lowpass(r: f64) -> f64 {
    let h = highpass(r);
    (1.0 - h * h).max(0.0).sqrt()
}

/// Window of band `j` (1-based) at radial frequency `r`:
/// `h(2^(j-1) r) * prod_{m<j} l(2^(m-1) r)`. Bands satisfy
/// `sum_{j<=s} W_j^2 = 1 - L_s^2` with `L_s = prod_{m<=s} l(2^(m-1) r)`.
pub fn band_window(j: u32, r: f64) -> f64 {
    let mut w = highpass(2f64.powi(j as i32 - 1) * r);
    for m in 1..j {
        w *= lowpass(2f64.powi(m as i32 - 1) * r);
    }
    w
}

/// Squared residual low-pass `L_s(r)^2` left out by `s` bands.
pub fn residual_lowpass_sq(scales: u32, r: f64) -> f64 {
    (1..=scales)
        .map(|m| lowpass(2f64.powi(m as i32 - 1) * r).powi(2))
        .product()
}
