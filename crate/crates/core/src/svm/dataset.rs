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

//! Labelled instances grouped by patient, their text format and a seeded
//! generator.
//!
//! File format: a header line `dim=<D> classes=<K>`, then one instance per
//! line as `patient_id \t label \t f1,f2,...,fD`.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub patient_id: String,
    pub label: u32,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub classes: u32,
    pub instances: Vec<Instance>,
}

impl Dataset {
    pub fn new(dim: usize, classes: u32, instances: Vec<Instance>) -> Result<Self> {
        let ds = Self {
            dim,
            classes,
            instances,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(Error::input("dataset declares zero classes"));
        }
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.features.len() != self.dim {
                return Err(Error::input(format!(
                    "instance {i} has {} features, expected {}",
                    inst.features.len(),
                    self.dim
                )));
            }
            if inst.label >= self.classes {
                return Err(Error::input(format!(
                    "instance {i} has label {} outside 0..{}",
                    inst.label, self.classes
                )));
            }
            if inst.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("instance {i} has a non-finite feature")));
            }
            if inst.patient_id.is_empty() || inst.patient_id.contains(['\t', '\n']) {
                return Err(Error::input(format!("instance {i} has an invalid patient id")));
            }
        }
        Ok(())
    }

    /// Distinct patient ids in ascending order.
    pub fn patients(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.instances.iter().map(|i| i.patient_id.as_str()).collect();
        set.into_iter().collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).at(path)?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .transpose()
            .at(path)?
            .ok_or_else(|| Error::input(format!("{}: empty dataset file", path.display())))?;
        let (dim, classes) =
            parse_header(&header).ok_or_else(|| Error::input(format!("{}: bad header {header:?}", path.display())))?;
        let mut instances = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.at(path)?;
            if line.is_empty() {
                continue;
            }
            let bad = || Error::input(format!("{}:{}: malformed instance line", path.display(), n + 2));
            let mut fields = line.splitn(3, '\t');
            let patient_id = fields.next().ok_or_else(bad)?.to_string();
            let label = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let features = fields
                .next()
                .ok_or_else(bad)?
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            instances.push(Instance {
                patient_id,
                label,
                features,
            });
        }
        Self::new(dim, classes, instances)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path).at(path)?);
        writeln!(w, "dim={} classes={}", self.dim, self.classes).at(path)?;
        for inst in &self.instances {
            let feats: Vec<String> = inst.features.iter().map(f64::to_string).collect();
            writeln!(w, "{}\t{}\t{}", inst.patient_id, inst.label, feats.join(",")).at(path)?;
        }
        w.flush().at(path)
    }
}

fn parse_header(line: &str) -> Option<(usize, u32)> {
    let mut dim = None;
    let mut classes = None;
    for tok in line.split_whitespace() {
        match tok.split_once('=')? {
            ("dim", v) => dim = v.parse().ok(),
            ("classes", v) => classes = v.parse().ok(),
            _ => return None,
        }
    }
    Some((dim?, classes?))
}

/// Gaussian class blobs with a per-patient mean shift.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSvmParams {
    pub patients: usize,
    pub per_patient: usize,
    pub classes: u32,
    pub dim: usize,
    /// Distance of each class mean from the origin.
    pub separation: f64,
    /// Standard deviation of the per-patient offset.
    pub patient_shift: f64,
    /// Standard deviation of per-instance noise.
    pub noise: f64,
    /// Fraction of instances whose label is replaced by a uniformly drawn class.
    pub label_noise: f64,
}

impl Default for SyntheticSvmParams {
    fn default() -> Self {
        Self {
            patients: 10,
            per_patient: 20,
            classes: 5,
            dim: 8,
            separation: 3.0,
            patient_shift: 0.3,
            noise: 1.0,
            label_noise: 0.0,
        }
    }
}

/// Instances cycle through the classes within each patient, so every patient
/// holds a near-balanced label mix. Patient ids are `p000`, `p001`, ...
pub fn generate_svm_dataset(params: &SyntheticSvmParams, seed: u64) -> Result<Dataset> {
    if params.patients == 0 || params.per_patient == 0 || params.classes == 0 || params.dim == 0 {
        return Err(Error::domain(
            "patients, per_patient, classes and dim must all be positive",
        ));
    }
    if !(0.0..=1.0).contains(&params.label_noise) {
        return Err(Error::domain("label_noise must lie in [0, 1]"));
    }
    let noise = Normal::new(0.0, params.noise).map_err(|e| Error::domain(e.to_string()))?;
    let shift = Normal::new(0.0, params.patient_shift).map_err(|e| Error::domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..params.classes)
        .map(|_| {
            let v: Vec<f64> = (0..params.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| x / norm * params.separation).collect()
        })
        .collect();
    let width = params.patients.saturating_sub(1).max(1).to_string().len().max(3);
    let mut instances = Vec::with_capacity(params.patients * params.per_patient);
    for p in 0..params.patients {
        let offset: Vec<f64> = (0..params.dim).map(|_| shift.sample(&mut rng)).collect();
        let patient_id = format!("p{p:0width$}");
        for k in 0..params.per_patient {
            let class = (k as u32) % params.classes;
            let features = (0..params.dim)
                .map(|d| means[class as usize][d] + offset[d] + noise.sample(&mut rng))
                .collect();
            let label = if params.label_noise > 0.0 && rng.random_bool(params.label_noise) {
                rng.random_range(0..params.classes)
            } else {
                class
            };
            instances.push(Instance {
                patient_id: patient_id.clone(),
                label,
                features,
            });
        }
    }
    Dataset::new(params.dim, params.classes, instances)
}
