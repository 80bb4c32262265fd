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

//! Bag-of-visual-words indexing: dense descriptors, a k-means vocabulary,
//! nearest-word quantization and per-image word histograms.

pub mod descriptor;
pub mod pgm;
pub mod pipeline;
pub mod vocab;

pub use descriptor::{extract_descriptors, normalize_descriptor, DenseGridParams, Descriptor};
pub use pgm::{encode_pgm, generate_images, parse_pgm, read_pgm, synthetic_texture, write_pgm, GrayImage};
pub use pipeline::{
    descriptor_csv_row, image_id, parse_descriptor_row, rejects_path, run_index, vocabulary_from_manifest, IndexConfig,
    IndexMode, IndexOutcome,
};
pub use vocab::{bovw_histogram, build_vocabulary, quantize, subsample, BovwHistogram, KMeansParams, VisualVocabulary};
