//! The four aesthetic score axes and the score vector used for both labels
//! and predictions.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// One of the four aesthetic axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    /// Production Quality: technical fidelity of the recording.
    PQ,
    /// Production Complexity: how many audio components share the scene.
    PC,
    /// Content Enjoyment: subjective appeal.
    CE,
    /// Content Usefulness: value as source material.
    CU,
}

impl Axis {
    /// All four axes in canonical order.
    pub const ALL: [Axis; 4] = [Axis::PQ, Axis::PC, Axis::CE, Axis::CU];

    /// Index of this axis in the canonical order.
    pub fn index(self) -> usize {
        match self {
            Axis::PQ => 0,
            Axis::PC => 1,
            Axis::CE => 2,
            Axis::CU => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::PQ => "PQ",
            Axis::PC => "PC",
            Axis::CE => "CE",
            Axis::CU => "CU",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "PQ" => Ok(Axis::PQ),
            "PC" => Ok(Axis::PC),
            "CE" => Ok(Axis::CE),
            "CU" => Ok(Axis::CU),
            other => Err(format!("unknown axis {other:?} (expected PQ, PC, CE or CU)")),
        }
    }
}

/// A four-axis score vector on the nominal 1-10 scale.
///
/// Used both for ground-truth labels (which must lie in [1, 10]) and for
/// model predictions (which are unbounded denormalized regression outputs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AesScores {
    pub pq: f64,
    pub pc: f64,
    pub ce: f64,
    pub cu: f64,
}

impl AesScores {
    pub fn new(pq: f64, pc: f64, ce: f64, cu: f64) -> Self {
        Self { pq, pc, ce, cu }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { pq: a[0], pc: a[1], ce: a[2], cu: a[3] }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.pq, self.pc, self.ce, self.cu]
    }

    pub fn axis(self, axis: Axis) -> f64 {
        self.to_array()[axis.index()]
    }

    pub fn set_axis(&mut self, axis: Axis, value: f64) {
        match axis {
            Axis::PQ => self.pq = value,
            Axis::PC => self.pc = value,
            Axis::CE => self.ce = value,
            Axis::CU => self.cu = value,
        }
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// True when every axis lies in the label range [1, 10].
    pub fn in_label_range(self) -> bool {
        self.to_array().iter().all(|&v| (1.0..=10.0).contains(&v))
    }
}

impl fmt::Display for AesScores {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PQ={:.3} PC={:.3} CE={:.3} CU={:.3}",
            self.pq, self.pc, self.ce, self.cu
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_roundtrip_names() {
        for axis in Axis::ALL {
            assert_eq!(axis.name().parse::<Axis>().unwrap(), axis);
        }
        assert!("overall".parse::<Axis>().is_err());
    }

    #[test]
    fn axis_accessors_follow_canonical_order() {
        let s = AesScores::new(1.0, 2.0, 3.0, 4.0);
        for (i, axis) in Axis::ALL.iter().enumerate() {
            assert_eq!(s.axis(*axis), s.to_array()[i]);
            assert_eq!(axis.index(), i);
        }
    }

    #[test]
    fn label_range_check() {
        assert!(AesScores::new(1.0, 10.0, 5.5, 7.0).in_label_range());
        assert!(!AesScores::new(0.9, 5.0, 5.0, 5.0).in_label_range());
        assert!(!AesScores::new(5.0, 10.1, 5.0, 5.0).in_label_range());
    }
}
