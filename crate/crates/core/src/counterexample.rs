//! A nonnegative constant history whose solution turns negative.
//!
//! With `f_delta(u) = A exp(-(u - phi0)^2 / delta)` and
//! `A = gamma (phi0 + eps) / (1 - exp(-gamma tau1))`, the constant history
//! `phi0` has `H0 = -eps`. As `delta -> 0` the solution tends to a piecewise
//! closed form `u0` with `u0(tau) = -eps exp(-gamma tau)`, so for small `delta`
//! the solution is negative at `t = tau`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::Model;
use crate::model::{Grid, Nonlinearity, Parameters};
use crate::segment::{HistorySegment, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSpec {
    pub phi0: f64,
    pub epsilon: f64,
    /// Squared width of the bump.
    pub delta: f64,
    pub params: Parameters,
}

/// Outcome of [`run_counterexample`].
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleRun {
    pub trajectory: Trajectory,
    pub first_negative_time: Option<f64>,
    /// `u_delta(tau)`.
    pub u_tau: f64,
    /// `u0(tau)` from the closed form.
    pub limit_u_tau: f64,
}

impl CounterexampleSpec {
    /// `gamma = phi0 = eps = 1`, `tau0 = 0.1`, `tau = 1`, `delta = 0.005`.
    pub fn reference() -> Self {
        Self {
            phi0: 1.0,
            epsilon: 1.0,
            delta: 0.005,
            params: Parameters {
                gamma: 1.0,
                tau0: 0.1,
                tau: 1.0,
            },
        }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        for (name, v) in [
            ("phi0", self.phi0),
            ("epsilon", self.epsilon),
            ("delta", self.delta),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameters(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Bump height `A`.
    pub fn amplitude(&self) -> f64 {
        let p = self.params;
        p.gamma * (self.phi0 + self.epsilon) / (1.0 - p.survival())
    }

    /// Step used by [`run_counterexample`]: at most `tau0/20` and `sqrt(delta)/10`.
    pub fn grid(&self) -> Result<Grid> {
        Grid::finest_within(
            &self.params,
            (self.params.tau0 / 20.0).min(self.delta.sqrt() / 10.0),
        )
    }
}

pub fn make_fdelta(spec: &CounterexampleSpec) -> Result<Nonlinearity> {
    spec.validate()?;
    Ok(Nonlinearity::GaussianBump {
        amplitude: spec.amplitude(),
        center: spec.phi0,
        width_sq: spec.delta,
    })
}

/// The `delta -> 0` limit solution on `[0, tau]`.
pub fn limit_u0(t: f64, spec: &CounterexampleSpec) -> Result<f64> {
    let p = spec.params;
    if !(0.0..=p.tau).contains(&t) {
        return Err(Error::Coverage(format!("t = {t} outside [0, {}]", p.tau)));
    }
    let g = p.gamma;
    Ok(if t <= p.tau0 {
        spec.phi0 + spec.epsilon * (1.0 - (-g * t).exp())
    } else {
        -spec.epsilon * (-g * t).exp()
            + spec.amplitude() / g * ((-g * (t - p.tau0)).exp() - (-g * p.tau1()).exp())
    })
}

/// Method-of-steps solution from the constant history `phi0` up to `t = tau`.
pub fn run_counterexample(spec: &CounterexampleSpec) -> Result<CounterexampleRun> {
    run_counterexample_on(spec, spec.grid()?)
}

/// [`run_counterexample`] on a caller-chosen grid.
pub fn run_counterexample_on(spec: &CounterexampleSpec, grid: Grid) -> Result<CounterexampleRun> {
    let nl = make_fdelta(spec)?;
    let model = Model::on_grid(spec.params, nl, grid)?;
    let phi = HistorySegment::constant(&model.grid, spec.phi0);
    let trajectory = model.integrate_steps(&phi, spec.params.tau)?;
    Ok(CounterexampleRun {
        first_negative_time: trajectory.first_negative_time(),
        u_tau: trajectory.final_sample().u,
        limit_u_tau: limit_u0(spec.params.tau, spec)?,
        trajectory,
    })
}
