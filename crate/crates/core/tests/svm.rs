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

mod common;

use medimr::scheduler::Directive;
use medimr::svm::{
    generate_svm_dataset, gram_matrix, lopo_cv, rbf_kernel, train_svm, Dataset, Instance, OvaModel, SolverParams,
    SyntheticSvmParams,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn twelve_point_problem(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..12)
        .map(|_| vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)])
        .collect();
    let mut ys: Vec<f64> = (0..12).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    ys.shuffle(&mut rng);
    (pts, ys)
}

fn refs(pts: &[Vec<f64>]) -> Vec<&[f64]> {
    pts.iter().map(Vec::as_slice).collect()
}

#[test]
fn kernel_matches_scalar_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let expected = (-common::dist2(&x, &y) / 2.0).exp();
        assert!((rbf_kernel(&x, &y, 1.0).unwrap() - expected).abs() < 1e-12);
        assert_eq!(rbf_kernel(&x, &y, 1.0).unwrap(), rbf_kernel(&y, &x, 1.0).unwrap());
    }
}

#[test]
fn dual_objective_matches_qp_oracle() {
    for seed in 0..5 {
        let (pts, ys) = twelve_point_problem(seed);
        let m = train_svm(&refs(&pts), &ys, 1.0, 1.0, &SolverParams::default()).unwrap();
        let k = gram_matrix(&refs(&pts), 1.0).unwrap();
        let (_, oracle) = common::qp_oracle(&k, &ys, 1.0);
        let own = common::dual_objective(&k, &ys, &m.alphas);
        assert!((own - m.objective).abs() < 1e-9 * own.abs().max(1.0));
        let rel = (m.objective - oracle).abs() / oracle.abs();
        assert!(
            rel <= 1e-4,
            "seed {seed}: smo {} oracle {oracle} rel {rel:e}",
            m.objective
        );
    }
}

#[test]
fn gram_matrices_are_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for sigma in [0.1, 1.0, 10.0] {
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let k = gram_matrix(&refs(&pts), sigma).unwrap();
        let m = DMatrix::from_row_slice(20, 20, &k);
        assert_eq!(m, m.transpose());
        let min = m.symmetric_eigenvalues().min();
        assert!(min >= -1e-8, "sigma {sigma}: {min}");
    }
}

#[test]
fn duplicated_data_with_half_cost_keeps_decision_function() {
    let tight = SolverParams {
        tolerance: 1e-10,
        ..Default::default()
    };
    for seed in 0..3 {
        let (pts, ys) = twelve_point_problem(seed + 100);
        let once = train_svm(&refs(&pts), &ys, 1.0, 1.0, &tight).unwrap();
        let doubled_pts: Vec<Vec<f64>> = pts.iter().chain(&pts).cloned().collect();
        let doubled_ys: Vec<f64> = ys.iter().chain(&ys).copied().collect();
        let twice = train_svm(&refs(&doubled_pts), &doubled_ys, 0.5, 1.0, &tight).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let (a, b) = (once.decision_value(&x).unwrap(), twice.decision_value(&x).unwrap());
            assert!((a - b).abs() <= 1e-6, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn five_separated_blobs_reach_full_accuracy() {
    let ds = generate_svm_dataset(
        &SyntheticSvmParams {
            patients: 5,
            per_patient: 20,
            classes: 5,
            dim: 6,
            separation: 10.0,
            patient_shift: 0.1,
            noise: 0.5,
            label_noise: 0.0,
        },
        5,
    )
    .unwrap();
    let train: Vec<&Instance> = ds.instances.iter().collect();
    let m = OvaModel::train(&train, 10.0, 2.0, &SolverParams::default()).unwrap();
    let correct = ds
        .instances
        .iter()
        .filter(|i| m.predict(&i.features).unwrap() == i.label)
        .count();
    assert_eq!(correct, ds.instances.len());
    let cv = lopo_cv(&ds, 10.0, 2.0, &SolverParams::default(), |_| Ok(Directive::Continue)).unwrap();
    assert_eq!(cv.accuracy(), 1.0);
}

#[test]
fn permuted_labels_score_near_chance() {
    let mut accs = Vec::new();
    for seed in 0..10 {
        let mut ds = generate_svm_dataset(
            &SyntheticSvmParams {
                patients: 6,
                per_patient: 15,
                ..Default::default()
            },
            seed,
        )
        .unwrap();
        let mut labels: Vec<u32> = ds.instances.iter().map(|i| i.label).collect();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(1000 + seed));
        for (inst, l) in ds.instances.iter_mut().zip(labels) {
            inst.label = l;
        }
        let ds = Dataset::new(ds.dim, ds.classes, ds.instances).unwrap();
        accs.push(
            lopo_cv(&ds, 1.0, 2.0, &SolverParams::default(), |_| Ok(Directive::Continue))
                .unwrap()
                .accuracy(),
        );
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((mean - 0.2).abs() <= 0.1, "mean {mean}, runs {accs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dual_stays_feasible(seed in 0u64..10_000, c in 0.05f64..50.0, sigma in 0.2f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(4..30);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let mut ys: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        ys.shuffle(&mut rng);
        let m = train_svm(&refs(&pts), &ys, c, sigma, &SolverParams::default()).unwrap();
        prop_assert!(m.alphas.iter().all(|&a| (0.0..=c).contains(&a)));
        let balance: f64 = m.alphas.iter().zip(&ys).map(|(a, y)| a * y).sum();
        prop_assert!(balance.abs() <= 1e-3);
    }
}
