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

//! K-way merge of key-sorted partition files into key groups.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use crate::error::{Error, IoContext, Result};
use crate::record::{Record, RecordReader};

/// One map task's output for one reducer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionFile {
    pub map_task_id: usize,
    pub partition_index: usize,
    pub path: PathBuf,
    pub record_count: u64,
}

pub type KeyGroup = (Vec<u8>, Vec<Vec<u8>>);

struct Cursor {
    reader: RecordReader<BufReader<File>>,
    path: PathBuf,
    last_key: Option<Vec<u8>>,
}

impl Cursor {
    fn advance(&mut self) -> Result<Option<Record>> {
        match self.reader.next() {
            None => Ok(None),
            Some(rec) => {
                let rec = rec?;
                if let Some(last) = &self.last_key {
                    if rec.key < *last {
                        return Err(Error::Integrity(format!(
                            "{} is not sorted by key",
                            self.path.display()
                        )));
                    }
                }
                self.last_key = Some(rec.key.clone());
                Ok(Some(rec))
            }
        }
    }
}

/// Heap entry ordered by (key, source position) so equal keys surface in
/// map-task order.
struct Head {
    record: Record,
    source: usize,
}

impl PartialEq for Head {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Head {}
impl PartialOrd for Head {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Head {
    fn cmp(&self, other: &Self) -> Ordering {
        self.record
            .key
            .cmp(&other.record.key)
            .then(self.source.cmp(&other.source))
    }
}

/// Streaming iterator over `(key, values)` groups in ascending key order.
///
/// Values of a key keep `(map_task_id, in-file order)`.
pub struct GroupedMerge {
    cursors: Vec<Cursor>,
    heap: BinaryHeap<Reverse<Head>>,
    failed: bool,
}

impl GroupedMerge {
    pub fn open(files: &[PartitionFile]) -> Result<Self> {
        let mut files: Vec<&PartitionFile> = files.iter().collect();
        files.sort_by_key(|f| f.map_task_id);
        let mut cursors = Vec::with_capacity(files.len());
        for f in files {
            let file = File::open(&f.path).at(&f.path)?;
            cursors.push(Cursor {
                reader: RecordReader::new(BufReader::new(file)),
                path: f.path.clone(),
                last_key: None,
            });
        }
        let mut heap = BinaryHeap::with_capacity(cursors.len());
        for (source, c) in cursors.iter_mut().enumerate() {
            if let Some(record) = c.advance()? {
                heap.push(Reverse(Head { record, source }));
            }
        }
        Ok(Self {
            cursors,
            heap,
            failed: false,
        })
    }

    fn pop(&mut self) -> Result<Option<Record>> {
        let Some(Reverse(Head { record, source })) = self.heap.pop() else {
            return Ok(None);
        };
        if let Some(next) = self.cursors[source].advance()? {
            self.heap.push(Reverse(Head { record: next, source }));
        }
        Ok(Some(record))
    }
}

impl Iterator for GroupedMerge {
    type Item = Result<KeyGroup>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let step = (|| {
            let Some(first) = self.pop()? else {
                return Ok(None);
            };
            let key = first.key;
            let mut values = vec![first.value];
            while self.heap.peek().is_some_and(|Reverse(h)| h.record.key == key) {
                values.push(self.pop()?.expect("peeked").value);
            }
            Ok(Some((key, values)))
        })();
        match step {
            Ok(Some(g)) => Some(Ok(g)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Merges the partition files of one reducer and collects every group.
pub fn shuffle_group(files: &[PartitionFile]) -> Result<Vec<KeyGroup>> {
    GroupedMerge::open(files)?.collect()
}
