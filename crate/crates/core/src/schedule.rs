//! Drive schedules: who is driven, with what pulse, on which time
//! interval. The circuit-model propagator requires that flux and charge
//! drives never overlap within one segment; the effective propagator has no
//! such restriction but consumes the same schedule type.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::{ChargeMp, FluxPulse};

/// Drive content of one contiguous time interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentDrives {
    /// Free evolution.
    Idle,
    /// Charge drives `n_g(t)` on the listed subsystems.
    Charge { drives: Vec<(usize, ChargeMp)> },
    /// Flux drives `φ(t)` on the listed subsystems.
    Flux { drives: Vec<(usize, FluxPulse)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Start time in ns (global schedule time).
    pub t0: f64,
    /// End time in ns.
    pub t1: f64,
    pub drives: SegmentDrives,
}

impl Segment {
    pub fn idle(t0: f64, t1: f64) -> Self {
        Segment { t0, t1, drives: SegmentDrives::Idle }
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub segments: Vec<Segment>,
}

impl Schedule {
    pub fn total_duration(&self) -> f64 {
        self.segments.last().map(|s| s.t1).unwrap_or(0.0)
    }

    /// Append a segment starting at the current end time; returns its start.
    pub fn push(&mut self, duration: f64, drives: SegmentDrives) -> f64 {
        let t0 = self.total_duration();
        self.segments.push(Segment { t0, t1: t0 + duration, drives });
        t0
    }

    pub fn validate(&self, n_subsystems: usize) -> Result<()> {
        let mut t = 0.0;
        for (k, seg) in self.segments.iter().enumerate() {
            if (seg.t0 - t).abs() > 1e-9 {
                return Err(Error::config(format!(
                    "schedule: segment {k} starts at {} but previous segment ends at {t}",
                    seg.t0
                )));
            }
            if seg.t1 <= seg.t0 {
                return Err(Error::config(format!("schedule: segment {k} has non-positive duration")));
            }
            match &seg.drives {
                SegmentDrives::Idle => {}
                SegmentDrives::Charge { drives } => {
                    for (sub, p) in drives {
                        if *sub >= n_subsystems {
                            return Err(Error::config(format!("schedule: segment {k} drives unknown subsystem {sub}")));
                        }
                        p.validate()?;
                        if (p.t_d - seg.duration()).abs() > 1e-9 {
                            return Err(Error::config(format!(
                                "schedule: segment {k} duration {} does not match pulse T_d {}",
                                seg.duration(),
                                p.t_d
                            )));
                        }
                    }
                }
                SegmentDrives::Flux { drives } => {
                    for (sub, p) in drives {
                        if *sub >= n_subsystems {
                            return Err(Error::config(format!("schedule: segment {k} drives unknown subsystem {sub}")));
                        }
                        p.validate()?;
                        if (p.duration() - seg.duration()).abs() > 1e-9 {
                            return Err(Error::config(format!(
                                "schedule: segment {k} duration {} does not match pulse T_d {}",
                                seg.duration(),
                                p.duration()
                            )));
                        }
                    }
                }
            }
            t = seg.t1;
        }
        Ok(())
    }
}
