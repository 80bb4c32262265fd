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

//! One-vs-all multiclass machines and leave-one-patient-out validation.

use crate::error::{Error, Result};
use crate::scheduler::Directive;
use crate::svm::dataset::{Dataset, Instance};
use crate::svm::smo::{train_svm, SolverParams, SvmModel};

/// One binary machine per class seen in training. With a single training
/// class every prediction is that class.
#[derive(Debug, Clone)]
pub struct OvaModel {
    classes: Vec<u32>,
    machines: Vec<SvmModel>,
}

impl OvaModel {
    pub fn train(train: &[&Instance], c: f64, sigma: f64, params: &SolverParams) -> Result<Self> {
        let mut classes: Vec<u32> = train.iter().map(|i| i.label).collect();
        classes.sort_unstable();
        classes.dedup();
        if classes.is_empty() {
            return Err(Error::Degenerate("no training instances".into()));
        }
        if classes.len() == 1 {
            return Ok(Self {
                classes,
                machines: Vec::new(),
            });
        }
        let points: Vec<&[f64]> = train.iter().map(|i| i.features.as_slice()).collect();
        let machines = classes
            .iter()
            .map(|&k| {
                let ys: Vec<f64> = train.iter().map(|i| if i.label == k { 1.0 } else { -1.0 }).collect();
                train_svm(&points, &ys, c, sigma, params)
            })
            .collect::<Result<_>>()?;
        Ok(Self { classes, machines })
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn machines(&self) -> &[SvmModel] {
        &self.machines
    }

    /// Class with the largest decision value; the lowest class id wins ties.
    pub fn predict(&self, x: &[f64]) -> Result<u32> {
        if self.machines.is_empty() {
            return Ok(self.classes[0]);
        }
        let mut best = (self.classes[0], self.machines[0].decision_value(x)?);
        for (&k, m) in self.classes.iter().zip(&self.machines).skip(1) {
            let v = m.decision_value(x)?;
            if v > best.1 {
                best = (k, v);
            }
        }
        Ok(best.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CvOutcome {
    Completed {
        accuracy: f64,
        folds: u32,
    },
    /// Stopped by the progress callback after `folds_run` folds.
    Killed {
        folds_run: u32,
    },
}

impl CvOutcome {
    /// Accuracy, or the kill sentinel `-1`.
    pub fn accuracy(&self) -> f64 {
        match self {
            CvOutcome::Completed { accuracy, .. } => *accuracy,
            CvOutcome::Killed { .. } => crate::scheduler::KILLED_SENTINEL,
        }
    }

    pub fn is_killed(&self) -> bool {
        matches!(self, CvOutcome::Killed { .. })
    }
}

/// Leave-one-patient-out cross-validation of an RBF one-vs-all machine.
///
/// Folds run in ascending patient id order. `progress` is called with the
/// number of completed folds after each fold; returning [`Directive::Stop`]
/// ends validation with [`CvOutcome::Killed`].
pub fn lopo_cv<F>(data: &Dataset, c: f64, sigma: f64, params: &SolverParams, mut progress: F) -> Result<CvOutcome>
where
    F: FnMut(u32) -> Result<Directive>,
{
    let patients = data.patients();
    if patients.len() < 2 {
        return Err(Error::domain(format!(
            "leave-one-patient-out needs at least 2 patients, found {}",
            patients.len()
        )));
    }
    let mut correct = 0usize;
    let mut total = 0usize;
    for (fold, patient) in patients.iter().enumerate() {
        let (test, train): (Vec<&Instance>, Vec<&Instance>) =
            data.instances.iter().partition(|i| i.patient_id == *patient);
        let model = OvaModel::train(&train, c, sigma, params)?;
        for inst in &test {
            if model.predict(&inst.features)? == inst.label {
                correct += 1;
            }
        }
        total += test.len();
        let done = fold as u32 + 1;
        if progress(done)? == Directive::Stop {
            return Ok(CvOutcome::Killed { folds_run: done });
        }
    }
    Ok(CvOutcome::Completed {
        accuracy: correct as f64 / total as f64,
        folds: patients.len() as u32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::dataset::{generate_svm_dataset, SyntheticSvmParams};

    fn blobs(seed: u64) -> Dataset {
        generate_svm_dataset(
            &SyntheticSvmParams {
                patients: 6,
                per_patient: 10,
                separation: 8.0,
                noise: 0.3,
                patient_shift: 0.1,
                ..Default::default()
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn identical_patients_separable_classes_score_one() {
        let mut instances = Vec::new();
        for p in ["a", "b", "c"] {
            for k in 0..3u32 {
                instances.push(Instance {
                    patient_id: p.into(),
                    label: k,
                    features: vec![k as f64 * 5.0, -(k as f64)],
                });
            }
        }
        let ds = Dataset::new(2, 3, instances).unwrap();
        let out = lopo_cv(&ds, 10.0, 1.0, &SolverParams::default(), |_| Ok(Directive::Continue)).unwrap();
        assert_eq!(
            out,
            CvOutcome::Completed {
                accuracy: 1.0,
                folds: 3
            }
        );
    }

    #[test]
    fn separated_blobs_are_classified_perfectly() {
        let ds = blobs(2);
        let train: Vec<&Instance> = ds.instances.iter().collect();
        let m = OvaModel::train(&train, 10.0, 3.0, &SolverParams::default()).unwrap();
        assert_eq!(m.classes(), &[0, 1, 2, 3, 4]);
        for inst in &ds.instances {
            assert_eq!(m.predict(&inst.features).unwrap(), inst.label);
        }
    }

    #[test]
    fn stop_after_two_folds() {
        let ds = blobs(3);
        let mut calls = Vec::new();
        let out = lopo_cv(&ds, 1.0, 2.0, &SolverParams::default(), |f| {
            calls.push(f);
            Ok(if f == 2 { Directive::Stop } else { Directive::Continue })
        })
        .unwrap();
        assert_eq!(out, CvOutcome::Killed { folds_run: 2 });
        assert_eq!(out.accuracy(), -1.0);
        assert_eq!(calls, vec![1, 2]);
    }

    #[test]
    fn repeated_runs_agree() {
        let ds = blobs(4);
        let run = || lopo_cv(&ds, 0.5, 1.0, &SolverParams::default(), |_| Ok(Directive::Continue)).unwrap();
        assert_eq!(run(), run());
    }

    #[test]
    fn one_patient_is_a_domain_error() {
        let ds = Dataset::new(
            1,
            2,
            vec![
                Instance {
                    patient_id: "x".into(),
                    label: 0,
                    features: vec![0.0],
                },
                Instance {
                    patient_id: "x".into(),
                    label: 1,
                    features: vec![1.0],
                },
            ],
        )
        .unwrap();
        assert!(matches!(
            lopo_cv(&ds, 1.0, 1.0, &SolverParams::default(), |_| Ok(Directive::Continue)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let flat = |bias: f64| SvmModel {
            support_vectors: vec![vec![0.0]],
            coef: vec![0.0],
            bias,
            sigma: 1.0,
            c: 1.0,
            alphas: vec![0.0],
            support: vec![0],
            objective: 0.0,
            iterations: 0,
        };
        let m = OvaModel {
            classes: vec![1, 3, 4],
            machines: vec![flat(1.0), flat(-2.0), flat(-2.0)],
        };
        assert_eq!(m.predict(&[0.0]).unwrap(), 3);
    }
}
