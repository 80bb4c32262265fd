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

//! A single-host MapReduce engine with cooperative kill-factor termination,
//! plus three numerical workloads that run on it: an RBF-kernel SVM
//! `(C, sigma)` grid search, bag-of-visual-words image indexing and 3D Riesz
//! texture energies.

pub mod bench;
pub mod bovw;
pub mod error;
pub mod job;
pub mod record;
pub mod riesz;
pub mod scheduler;
pub mod shuffle;
pub mod split;
pub mod streaming;
pub mod svm;
pub mod task;
pub mod wordcount;

pub use error::{Error, Result};
pub use job::{run_job, FailureInjection, JobResult, JobSpec};
pub use record::{decode_record, encode_record, partition, Record};
pub use scheduler::{
    evaluate_termination, Directive, ExecMode, Scheduler, TaskStatus, TerminationPolicy, TrackerNode, Verdict,
};
pub use split::{plan_input, plan_splits, InputFile, InputSplit};
pub use task::{Emitter, MapFunction, MapInput, Mapper, ReduceFunction, Reducer};
