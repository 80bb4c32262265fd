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

//! 3D Riesz-wavelet texture energies.

pub mod analysis;
pub mod fft;
pub mod filterbank;
pub mod job;
pub mod volume;

pub use analysis::{analyze_volume, join_energies, Normalization, RieszAnalyzer, TextureFeatureVector};
pub use filterbank::{
    band_window, multi_indices, riesz_component_count, riesz_filterbank, riesz_response, RieszFilterbank,
};
pub use job::{
    plan_texture_tasks, read_features, run_riesz_worker, texture_job, volume_id, AnalyzerCache, RieszParams,
    TextureJobConfig, TextureJobOutcome,
};
pub use volume::{generate_volumes, read_volume, synthetic_volume, write_volume, Volume};
