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

//! RBF-kernel support vector machines and the `(C, sigma)` grid search.

pub mod cv;
pub mod dataset;
pub mod grid;
pub mod kernel;
pub mod smo;

pub use cv::{lopo_cv, CvOutcome, OvaModel};
pub use dataset::{generate_svm_dataset, Dataset, Instance, SyntheticSvmParams};
pub use grid::{
    best_couple, grid_job, log_space, parse_couple, read_grid_file, write_grid_file, write_grid_results, GridJobConfig,
    GridOutcome, GridSpec, ParamCouple,
};
pub use kernel::{gram_matrix, rbf_kernel};
pub use smo::{sign, train_svm, SolverParams, SvmModel};
