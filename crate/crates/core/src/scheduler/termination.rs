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

//! Kill-factor early termination.
//!
//! Once enough tasks have passed the checkpoint, the fastest of them sets the
//! reference time `t_ref`. Any task whose elapsed time at the checkpoint is at
//! least `kill_factor * t_ref` is asked to stop at its next progress report.

use crate::error::{Error, Result};

/// Sentinel accuracy reported by a killed task.
pub const KILLED_SENTINEL: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminationPolicy {
    pub kill_factor: f64,
    /// Progress units a task must complete before it is compared to `t_ref`.
    pub checkpoint_unit: u32,
    /// Number of checkpoint reports required before `t_ref` exists.
    pub min_reference_count: usize,
}

impl TerminationPolicy {
    pub fn new(kill_factor: f64) -> Result<Self> {
        Self {
            kill_factor,
            checkpoint_unit: 2,
            min_reference_count: 1,
        }
        .validated()
    }

    pub fn with_checkpoint_unit(mut self, unit: u32) -> Result<Self> {
        self.checkpoint_unit = unit;
        self.validated()
    }

    pub fn with_min_reference_count(mut self, count: usize) -> Result<Self> {
        self.min_reference_count = count;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        if !(self.kill_factor.is_finite() && self.kill_factor > 1.0) {
            return Err(Error::domain(format!(
                "kill factor must be a finite number > 1, got {}",
                self.kill_factor
            )));
        }
        if self.checkpoint_unit == 0 {
            return Err(Error::domain("checkpoint unit must be at least 1"));
        }
        if self.min_reference_count == 0 {
            return Err(Error::domain("min reference count must be at least 1"));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Kill,
}

/// Applies `t_i >= F * t_ref`. Without a reference time the task is kept.
pub fn evaluate_termination(policy: &TerminationPolicy, t_ref: Option<f64>, t_i: f64) -> Verdict {
    match t_ref {
        Some(t_ref) if t_i >= policy.kill_factor * t_ref => Verdict::Kill,
        _ => Verdict::Keep,
    }
}

/// Running reference: minimum checkpoint time over reporting tasks, available
/// once `min_reference_count` of them reported. Never increases.
#[derive(Debug, Clone, Default)]
pub(crate) struct ReferenceClock {
    samples: usize,
    fastest: Option<f64>,
}

impl ReferenceClock {
    /// Records a checkpoint time; returns true if it became the new minimum.
    pub fn observe(&mut self, elapsed: f64) -> bool {
        self.samples += 1;
        match self.fastest {
            Some(f) if f <= elapsed => false,
            _ => {
                self.fastest = Some(elapsed);
                true
            }
        }
    }

    pub fn reference(&self, policy: &TerminationPolicy) -> Option<f64> {
        if self.samples >= policy.min_reference_count {
            self.fastest
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f17() -> TerminationPolicy {
        TerminationPolicy::new(1.7).unwrap()
    }

    #[test]
    fn paper_threshold_examples() {
        let p = f17();
        assert_eq!(evaluate_termination(&p, Some(10.0), 18.0), Verdict::Kill);
        assert_eq!(evaluate_termination(&p, Some(10.0), 16.9), Verdict::Keep);
        // 1.7 * 10 is exactly representable enough that 17 sits on the boundary.
        assert_eq!(evaluate_termination(&p, Some(10.0), 1.7 * 10.0), Verdict::Kill);
    }

    #[test]
    fn fastest_task_is_never_killed() {
        for f in [1.0001, 1.7, 3.0, 100.0] {
            let p = TerminationPolicy::new(f).unwrap();
            for t in [1e-6, 0.5, 10.0, 1e6] {
                assert_eq!(evaluate_termination(&p, Some(t), t), Verdict::Keep);
            }
        }
    }

    #[test]
    fn no_reference_means_keep() {
        assert_eq!(evaluate_termination(&f17(), None, 1e9), Verdict::Keep);
    }

    #[test]
    fn invalid_policies_rejected() {
        assert!(TerminationPolicy::new(1.0).is_err());
        assert!(TerminationPolicy::new(f64::NAN).is_err());
        assert!(f17().with_checkpoint_unit(0).is_err());
        assert!(f17().with_min_reference_count(0).is_err());
    }

    #[test]
    fn reference_waits_for_quorum_and_only_decreases() {
        let p = f17().with_min_reference_count(2).unwrap();
        let mut clock = ReferenceClock::default();
        assert!(clock.observe(5.0));
        assert_eq!(clock.reference(&p), None);
        assert!(!clock.observe(6.0));
        assert_eq!(clock.reference(&p), Some(5.0));
        assert!(clock.observe(4.0));
        assert_eq!(clock.reference(&p), Some(4.0));
    }
}
