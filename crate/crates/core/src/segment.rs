use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Grid;
use crate::quadrature;

/// Samples of a function on `[-tau, 0]` at `t = -tau + k h`, `k = 0..=tau/h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySegment {
    pub h: f64,
    pub values: Vec<f64>,
    /// Known node derivatives; without them integrators fall back to finite differences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Slopes>,
}

/// One-sided derivatives at every node of a segment.
///
/// `left[k]` is the derivative from the left at node `k` and serves cell
/// `k - 1`; `right[k]` serves cell `k`. `left[0]` and `right[last]` do not
/// belong to any cell and repeat the other side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl HistorySegment {
    pub fn new(h: f64, values: Vec<f64>) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::MalformedSegment(format!(
                "step must be positive, got {h}"
            )));
        }
        if values.len() < 5 {
            return Err(Error::MalformedSegment(format!(
                "need at least 5 samples, got {}",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::MalformedSegment(format!("sample {k} is not finite")));
        }
        Ok(Self {
            h,
            values,
            slopes: None,
        })
    }

    /// Attach exact node derivatives.
    pub fn with_slopes(self, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        let n = self.values.len();
        if left.len() != n || right.len() != n {
            return Err(Error::MalformedSegment(format!(
                "slopes need {n} entries, got {} and {}",
                left.len(),
                right.len()
            )));
        }
        if let Some(k) = left.iter().chain(&right).position(|v| !v.is_finite()) {
            return Err(Error::MalformedSegment(format!(
                "slope {} is not finite",
                k % n
            )));
        }
        Ok(Self {
            slopes: Some(Slopes { left, right }),
            ..self
        })
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        let n = grid.segment_len();
        Self {
            h: grid.h,
            values: vec![c; n],
            slopes: Some(Slopes {
                left: vec![0.0; n],
                right: vec![0.0; n],
            }),
        }
    }

    /// Every `stride`-th sample, keeping the slopes.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !(self.values.len() - 1).is_multiple_of(stride) {
            return Err(Error::MalformedSegment(format!(
                "stride {stride} does not divide {} cells",
                self.values.len() - 1
            )));
        }
        let pick = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<f64>>();
        let sub = Self::new(self.h * stride as f64, pick(&self.values))?;
        match &self.slopes {
            Some(sl) => sub.with_slopes(pick(&sl.left), pick(&sl.right)),
            None => Ok(sub),
        }
    }

    /// Left and right node derivatives, from finite differences when none are attached.
    pub fn node_slopes(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.slopes {
            Some(sl) => (sl.left.clone(), sl.right.clone()),
            None => {
                let d = quadrature::node_derivatives(&self.values, self.h);
                (d.clone(), d)
            }
        }
    }

    /// Sample `phi(t)` on the grid of `[-tau, 0]`.
    pub fn from_fn(grid: &Grid, phi: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..=grid.lag).map(|k| phi(grid_time(grid, k))).collect();
        Self::new(grid.h, values)
    }

    /// Reject a segment that does not live on `grid`.
    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.values.len() != grid.segment_len() {
            return Err(Error::MalformedSegment(format!(
                "expected {} samples for this grid, got {}",
                grid.segment_len(),
                self.values.len()
            )));
        }
        if (self.h - grid.h).abs() > 1e-9 * grid.h {
            return Err(Error::MalformedSegment(format!(
                "segment step {} differs from grid step {}",
                self.h, grid.h
            )));
        }
        if let Some(k) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::MalformedSegment(format!("sample {k} is not finite")));
        }
        if let Some(s) = &self.slopes {
            if s.left.len() != self.values.len() || s.right.len() != self.values.len() {
                return Err(Error::MalformedSegment(
                    "slopes do not match the samples".into(),
                ));
            }
        }
        Ok(())
    }

    /// Time of sample `k`.
    pub fn time(&self, k: usize) -> f64 {
        (k as f64 - (self.values.len() - 1) as f64) * self.h
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `int_{-tau}^0 v(t) dt`.
    pub fn l1_norm(&self) -> f64 {
        quadrature::integrate(&self.values, self.h)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn grid_time(grid: &Grid, k: usize) -> f64 {
    (k as f64 - grid.lag as f64) * grid.h
}

/// One node of a computed solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub u: f64,
    /// `H(u, t)`; absent on the initial segment where the memory window is not covered.
    pub h: Option<f64>,
    /// `exp(gamma t) H(u, t)`.
    pub first_integral: Option<f64>,
}

/// Solution on `[-tau, t_end]`; the first `tau/h + 1` samples are the initial segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub h: f64,
    /// Steps per delay `tau`.
    pub lag: usize,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.u)
    }

    /// Samples with `t > 0`.
    pub fn forward(&self) -> &[Sample] {
        &self.samples[self.lag + 1..]
    }

    pub fn final_sample(&self) -> &Sample {
        &self.samples[self.samples.len() - 1]
    }

    /// Value at `t = k h` for `k >= 0`.
    pub fn at_step(&self, k: usize) -> f64 {
        self.samples[self.lag + k].u
    }

    /// First grid time after 0 with `u < 0`.
    pub fn first_negative_time(&self) -> Option<f64> {
        self.forward().iter().find(|s| s.u < 0.0).map(|s| s.t)
    }

    /// The segment `u(t + n tau)`, `t in [-tau, 0]`; `n = 0` is the initial segment.
    pub fn window(&self, n: usize) -> Option<HistorySegment> {
        let start = n * self.lag;
        let end = start + self.lag + 1;
        (end <= self.samples.len()).then(|| HistorySegment {
            h: self.h,
            values: self.samples[start..end].iter().map(|s| s.u).collect(),
            slopes: None,
        })
    }
}
