use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Three-phase schedule: linear warm-up, half-cosine decay at one step,
/// then a low constant rate while the rollout length grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub phase1_steps: usize,
    pub phase2_steps: usize,
    pub phase3_steps: usize,
    pub peak_lr: f64,
    pub phase3_lr: f64,
    pub t_start: usize,
    pub t_max: usize,
    /// Phase-3 updates between rollout-length increments.
    pub t_increment_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    Decay,
    Rollout,
}

/// Learning rate and rollout length for one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleStep {
    pub phase: Phase,
    pub lr: f64,
    pub t_train: usize,
}

impl Default for Curriculum {
    fn default() -> Self {
        Self {
            phase1_steps: 1000,
            phase2_steps: 299_000,
            phase3_steps: 11_000,
            peak_lr: 1e-3,
            phase3_lr: 3e-7,
            t_start: 2,
            t_max: 12,
            t_increment_every: 1000,
        }
    }
}

impl Curriculum {
    /// Every phase length and the increment interval multiplied by `factor`
    /// (rounded, at least 1).
    pub fn scaled(factor: f64) -> Self {
        let d = Self::default();
        let s = |n: usize| ((n as f64 * factor).round() as usize).max(1);
        Self {
            phase1_steps: s(d.phase1_steps),
            phase2_steps: s(d.phase2_steps),
            phase3_steps: s(d.phase3_steps),
            t_increment_every: s(d.t_increment_every),
            ..d
        }
    }

    pub fn total_steps(&self) -> usize {
        self.phase1_steps + self.phase2_steps + self.phase3_steps
    }

    /// Last global step index of each phase.
    pub fn phase_ends(&self) -> [usize; 3] {
        let a = self.phase1_steps;
        let b = a + self.phase2_steps;
        [a - 1, b - 1, b + self.phase3_steps - 1]
    }

    pub fn at(&self, step: usize) -> ScheduleStep {
        if step < self.phase1_steps {
            ScheduleStep {
                phase: Phase::Warmup,
                lr: self.peak_lr * (step + 1) as f64 / self.phase1_steps as f64,
                t_train: 1,
            }
        } else if step < self.phase1_steps + self.phase2_steps {
            let k = (step - self.phase1_steps) as f64;
            ScheduleStep {
                phase: Phase::Decay,
                lr: self.peak_lr * 0.5 * (1.0 + (PI * k / self.phase2_steps as f64).cos()),
                t_train: 1,
            }
        } else {
            let k = step - self.phase1_steps - self.phase2_steps;
            ScheduleStep {
                phase: Phase::Rollout,
                lr: self.phase3_lr,
                t_train: (self.t_start + k / self.t_increment_every).min(self.t_max),
            }
        }
    }
}
