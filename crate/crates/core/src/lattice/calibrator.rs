use serde::{Deserialize, Serialize};

use crate::signal::{SignalName, SIGNALS_PER_SIDE};

use super::pav::pav_project;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    /// Direction in which feature `index` of a pair vector is evidence that
    /// side a is correct: side a's good signals and side b's bad ones increase.
    pub fn for_feature(index: usize) -> Direction {
        let signal = SignalName::ALL[index % SIGNALS_PER_SIDE];
        let side_a = index < SIGNALS_PER_SIDE;
        if signal.higher_is_better() == side_a {
            Direction::Increasing
        } else {
            Direction::Decreasing
        }
    }
}

/// Monotone piecewise-linear map from a normalized feature in `[-1, 1]` to `[0, 1]`.
///
/// Keypoints are ascending in the direction-adjusted coordinate: a decreasing
/// calibrator evaluates its table at `-x`. `output_values` is kept
/// non-decreasing, so the calibrator is monotone in `direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    pub feature_index: usize,
    pub input_keypoints: Vec<f64>,
    pub output_values: Vec<f64>,
    pub direction: Direction,
}

/// Location of an input inside the keypoint grid: `value = (1 - t) * v[seg] + t * v[seg + 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub seg: usize,
    pub t: f64,
}

impl Calibrator {
    /// Uniform keypoints over `[-1, 1]` with a linear ramp from 0 to 1.
    pub fn uniform(feature_index: usize, keypoints: usize) -> Self {
        assert!(keypoints >= 2);
        let k = keypoints - 1;
        Calibrator {
            feature_index,
            input_keypoints: (0..=k).map(|i| -1.0 + 2.0 * i as f64 / k as f64).collect(),
            output_values: (0..=k).map(|i| i as f64 / k as f64).collect(),
            direction: Direction::for_feature(feature_index),
        }
    }

    pub fn locate(&self, x: f64) -> Segment {
        let kp = &self.input_keypoints;
        let x = match self.direction {
            Direction::Increasing => x,
            Direction::Decreasing => -x,
        };
        let x = x.clamp(kp[0], kp[kp.len() - 1]);
        let seg = kp.partition_point(|&k| k <= x).clamp(1, kp.len() - 1) - 1;
        let t = (x - kp[seg]) / (kp[seg + 1] - kp[seg]);
        Segment { seg, t }
    }

    pub fn calibrate(&self, x: f64) -> f64 {
        let Segment { seg, t } = self.locate(x);
        let (lo, hi) = (self.output_values[seg], self.output_values[seg + 1]);
        // This form is monotone in t under rounding; the clamp keeps segment joins ordered.
        (lo + t * (hi - lo)).clamp(lo.min(hi), lo.max(hi))
    }

    pub fn project(&mut self) {
        self.output_values = pav_project(&self.output_values);
    }

    pub fn is_monotone(&self) -> bool {
        self.output_values.windows(2).all(|w| w[0] <= w[1])
            && self.output_values.iter().all(|v| (0.0..=1.0).contains(v))
    }
}
