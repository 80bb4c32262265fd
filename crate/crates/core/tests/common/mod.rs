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

//! Independent oracles shared by the integration and acceptance tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use medimr::riesz::Volume;
use num_complex::Complex64;

/// Euclidean projection onto `{a : 0 <= a_i <= c, y'a = 0}` by bisection on
/// the multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> (Vec<f64>, f64) {
        let a: Vec<f64> = v
            .iter()
            .zip(y)
            .map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c))
            .collect();
        let s = a.iter().zip(y).map(|(ai, yi)| ai * yi).sum();
        (a, s)
    };
    // s(lambda) is non-increasing in lambda.
    let (mut lo, mut hi) = (-1.0, 1.0);
    while at(lo).1 < 0.0 {
        lo *= 2.0;
    }
    while at(hi).1 > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi)).0
}

/// Dual objective `1/2 a'Qa - sum(a)` with `Q_ij = y_i y_j K_ij`.
pub fn dual_objective(k: &[f64], y: &[f64], a: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += a[i] * a[j] * y[i] * y[j] * k[i * n + j];
        }
    }
    0.5 * quad - a.iter().sum::<f64>()
}

/// Accelerated projected gradient on the SVM dual, run far past the point
/// where the objective stops moving. Returns `(alpha, objective)`.
pub fn qp_oracle(k: &[f64], y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    // Lipschitz bound: row-sum norm of Q.
    let lip = (0..n)
        .map(|i| (0..n).map(|j| k[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / lip;
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| y[i] * y[j] * k[i * n + j] * a[j]).sum::<f64>() - 1.0)
            .collect()
    };
    let mut x = vec![0.0; n];
    let mut z = x.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let g = grad(&z);
        let v: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect();
        let next = project(&v, y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        z = next.iter().zip(&x).map(|(a, b)| a + mom * (a - b)).collect();
        x = next;
        t = t_next;
    }
    let obj = dual_objective(k, y, &x);
    (x, obj)
}

/// Sort-then-group reference for the shuffle.
pub fn sort_then_group(records: &[(usize, Vec<u8>, Vec<u8>)]) -> Vec<(Vec<u8>, Vec<Vec<u8>>)> {
    // (map task, emission index) keeps the stable value order.
    let mut tagged: Vec<(&Vec<u8>, usize, usize, &Vec<u8>)> = records
        .iter()
        .enumerate()
        .map(|(i, (task, k, v))| (k, *task, i, v))
        .collect();
    tagged.sort();
    let mut out: Vec<(Vec<u8>, Vec<Vec<u8>>)> = Vec::new();
    for (k, _, _, v) in tagged {
        match out.last_mut() {
            Some((last, vs)) if last == k => vs.push(v.clone()),
            _ => out.push((k.clone(), vec![v.clone()])),
        }
    }
    out
}

/// Single-threaded word count over whitespace tokens.
pub fn count_words(text: &[u8]) -> BTreeMap<Vec<u8>, u64> {
    let mut counts = BTreeMap::new();
    for w in text.split(u8::is_ascii_whitespace).filter(|w| !w.is_empty()) {
        *counts.entry(w.to_vec()).or_insert(0) += 1;
    }
    counts
}

pub fn render_counts(counts: &BTreeMap<Vec<u8>, u64>) -> Vec<u8> {
    let mut out = Vec::new();
    for (w, n) in counts {
        out.extend_from_slice(w);
        out.push(b'\t');
        out.extend_from_slice(n.to_string().as_bytes());
        out.push(b'\n');
    }
    out
}

/// Squared Euclidean distance, plain loop.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

/// Index (1-based) of the nearest word by exhaustive search, first on ties.
pub fn brute_nearest(f: &[f64], words: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, w) in words.iter().enumerate() {
        let d = dist2(f, w);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best + 1
}

/// Separable naive DFT over a row-major `[x][y][z]` volume (z fastest).
pub fn naive_dft3(dims: [usize; 3], voxels: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = voxels.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let strides = [dims[1] * dims[2], dims[2], 1];
    for axis in 0..3 {
        let n = dims[axis];
        let twiddle: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for base in 0..data.len() {
            if !(base / strides[axis]).is_multiple_of(n) {
                continue;
            }
            for (k, slot) in line.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..n {
                    acc += data[base + t * strides[axis]] * twiddle[(k * t) % n];
                }
                *slot = acc;
            }
            for (k, v) in line.iter().enumerate() {
                data[base + k * strides[axis]] = *v;
            }
        }
    }
    data
}

pub fn signed_frequency(k: usize, n: usize) -> f64 {
    let k = k as f64;
    let n = n as f64;
    let s = if 2.0 * k < n { k } else { k - n };
    2.0 * PI * s / n
}

/// `(1/n) sum |V(w)|^2 (1 - L_s(w)^2)` of the zero-mean volume, origin
/// excluded, with the raised-cosine low-pass written out here.
pub fn retained_spectral_energy(v: &Volume, scales: u32) -> f64 {
    let dims = v.dims;
    let mean = v.voxels.iter().sum::<f64>() / v.len() as f64;
    let centered: Vec<f64> = v.voxels.iter().map(|x| x - mean).collect();
    let spec = naive_dft3(dims, &centered);
    let mut retained = 0.0;
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                let w = [
                    signed_frequency(x, dims[0]),
                    signed_frequency(y, dims[1]),
                    signed_frequency(z, dims[2]),
                ];
                let r = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
                if r == 0.0 {
                    continue;
                }
                let mut lowpass_sq = 1.0;
                for m in 1..=scales {
                    let rr = 2f64.powi(m as i32 - 1) * r;
                    let h = if rr >= PI {
                        1.0
                    } else if rr <= PI / 2.0 {
                        0.0
                    } else {
                        (PI / 2.0 * (rr / PI).log2()).cos()
                    };
                    lowpass_sq *= 1.0 - h * h;
                }
                retained += spec[(x * dims[1] + y) * dims[2] + z].norm_sqr() * (1.0 - lowpass_sq);
            }
        }
    }
    retained / v.len() as f64
}
