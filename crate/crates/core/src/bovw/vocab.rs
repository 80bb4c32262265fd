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

//! k-means visual vocabulary, nearest-word quantization and word histograms.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct VisualVocabulary {
    pub words: Vec<Vec<f64>>,
    pub seed: u64,
    pub iterations: u32,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub max_iterations: u32,
    /// Stop once `(prev - cur) / prev` falls below this.
    pub tolerance: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-4,
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index (0-based) and squared distance of the nearest center; the lowest
/// index wins ties.
fn nearest(f: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = dist2(f, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(sample: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![sample[rng.random_range(0..sample.len())].to_vec()];
    let mut d2: Vec<f64> = sample.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut idx = d2.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        } else {
            rng.random_range(0..sample.len())
        };
        let c = sample[pick].to_vec();
        for (d, p) in d2.iter_mut().zip(sample) {
            *d = d.min(dist2(p, &c));
        }
        centers.push(c);
    }
    centers
}

/// Lloyd's k-means with k-means++ seeding.
///
/// An emptied cluster is moved onto the point farthest from its current
/// center. Words that end up identical are collapsed, so the result may hold
/// fewer than `k` words.
pub fn build_vocabulary(sample: &[&[f64]], k: usize, seed: u64, params: &KMeansParams) -> Result<VisualVocabulary> {
    if k == 0 {
        return Err(Error::domain("vocabulary size must be at least 1"));
    }
    if sample.len() < k {
        return Err(Error::domain(format!(
            "k-means needs at least k = {k} samples, got {}",
            sample.len()
        )));
    }
    let dim = sample[0].len();
    if sample
        .iter()
        .any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::domain("k-means samples must be finite and share one dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(sample, k, &mut rng);
    let mut assign = vec![0usize; sample.len()];
    let mut dists = vec![0.0; sample.len()];
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;

    loop {
        let mut inertia = 0.0;
        for (i, p) in sample.iter().enumerate() {
            let (j, d) = nearest(p, &centers);
            assign[i] = j;
            dists[i] = d;
            inertia += d;
        }
        iterations += 1;
        let converged = match history.last() {
            Some(&prev) => prev <= 0.0 || (prev - inertia) / prev < params.tolerance,
            None => inertia == 0.0,
        };
        history.push(inertia);
        if converged || iterations >= params.max_iterations {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &j) in sample.iter().zip(&assign) {
            counts[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                let far = (0..sample.len())
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("non-empty sample");
                centers[j] = sample[far].to_vec();
                dists[far] = 0.0;
            }
        }
    }

    let mut words: Vec<Vec<f64>> = Vec::with_capacity(k);
    for c in centers {
        if !words.contains(&c) {
            words.push(c);
        }
    }
    Ok(VisualVocabulary {
        words,
        seed,
        iterations,
        inertia_history: history,
    })
}

impl VisualVocabulary {
    pub fn from_words(words: Vec<Vec<f64>>) -> Result<Self> {
        let v = Self {
            words,
            seed: 0,
            iterations: 0,
            inertia_history: Vec::new(),
        };
        v.validate()?;
        Ok(v)
    }

    pub fn k(&self) -> usize {
        self.words.len()
    }

    pub fn dim(&self) -> usize {
        self.words.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if self.words.is_empty() || dim == 0 {
            return Err(Error::input("vocabulary must hold at least one non-empty word"));
        }
        if self
            .words
            .iter()
            .any(|w| w.len() != dim || w.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::input("vocabulary words must be finite and share one dimension"));
        }
        Ok(())
    }

    /// Text format: a header `k=<k> dim=<D> seed=<s> iterations=<n>`, then
    /// one comma-separated word per line.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path).at(path)?);
        writeln!(
            w,
            "k={} dim={} seed={} iterations={}",
            self.k(),
            self.dim(),
            self.seed,
            self.iterations
        )
        .at(path)?;
        for word in &self.words {
            let s: Vec<String> = word.iter().map(f64::to_string).collect();
            writeln!(w, "{}", s.join(",")).at(path)?;
        }
        w.flush().at(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::input(format!("{}: empty vocabulary", path.display())))?;
        let mut k = None;
        let mut seed = 0;
        let mut iterations = 0;
        for tok in header.split_whitespace() {
            let (name, value) = tok
                .split_once('=')
                .ok_or_else(|| Error::input(format!("{}: bad header", path.display())))?;
            let bad = || Error::input(format!("{}: bad header field {tok}", path.display()));
            match name {
                "k" => k = Some(value.parse::<usize>().map_err(|_| bad())?),
                "seed" => seed = value.parse().map_err(|_| bad())?,
                "iterations" => iterations = value.parse().map_err(|_| bad())?,
                "dim" => {}
                _ => return Err(bad()),
            }
        }
        let words = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split(',')
                    .map(|v| {
                        v.parse::<f64>()
                            .map_err(|_| Error::input(format!("{}: bad word value {v:?}", path.display())))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if k != Some(words.len()) {
            return Err(Error::input(format!(
                "{}: header k does not match word count",
                path.display()
            )));
        }
        let mut v = Self::from_words(words)?;
        v.seed = seed;
        v.iterations = iterations;
        Ok(v)
    }
}

/// Nearest word as a 1-based index; the lowest index wins ties.
pub fn quantize(f: &[f64], vocab: &VisualVocabulary) -> Result<usize> {
    if f.len() != vocab.dim() {
        return Err(Error::domain(format!(
            "descriptor has dimension {}, vocabulary {}",
            f.len(),
            vocab.dim()
        )));
    }
    Ok(nearest(f, &vocab.words).0 + 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BovwHistogram {
    pub image_id: String,
    /// `counts[i - 1]` is the frequency of word `i`.
    pub counts: Vec<u64>,
}

impl BovwHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `image_id \t c1,c2,...,ck`.
    pub fn to_line(&self) -> String {
        format!("{}\t{}", self.image_id, join_counts(&self.counts))
    }
}

pub(crate) fn join_counts(counts: &[u64]) -> String {
    let parts: Vec<String> = counts.iter().map(u64::to_string).collect();
    parts.join(",")
}

pub fn bovw_histogram<'a, I>(image_id: &str, descriptors: I, vocab: &VisualVocabulary) -> Result<BovwHistogram>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut counts = vec![0u64; vocab.k()];
    for f in descriptors {
        counts[quantize(f, vocab)? - 1] += 1;
    }
    Ok(BovwHistogram {
        image_id: image_id.to_string(),
        counts,
    })
}

/// At most `limit` items drawn without replacement, in original order.
pub fn subsample<T: Clone>(items: &[T], limit: usize, seed: u64) -> Vec<T> {
    if items.len() <= limit {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, items.len(), limit).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i].clone()).collect()
}
