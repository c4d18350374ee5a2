//! Two discretisations of the two-delay equation
//!
//! ```text
//! u'(t) = -gamma u(t) + f(u(t - tau0)) - f(u(t - tau)) exp(-gamma tau1),   t > 0
//! u(t)  = phi(t),                                                          -tau <= t <= 0
//! ```
//!
//! `integrate_steps` is the method of steps with classical RK4. Both delays are
//! whole numbers of steps, so delayed arguments at RK4 nodes land on stored
//! samples; at half steps they come from a cubic Hermite interpolant of the
//! stored values and derivatives. Derivative breaks of the solution only occur
//! at grid nodes, where each side keeps its own one-sided derivative.
//!
//! `integrate_renewal` marches the equivalent renewal form
//! `u(t) = exp(-gamma t) H0 + memory(t)`. The memory window ends `tau0` in the
//! past, so the march is explicit. The segment map `T` is one `tau` of this march.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::functional::{Model, D0_TOLERANCE};
use crate::model::Grid;
use crate::quadrature::hermite_mid;
use crate::segment::{HistorySegment, Sample, Trajectory};

impl Model {
    fn steps_to(&self, t_end: f64) -> Result<usize> {
        let h = self.grid.h;
        let n = (t_end / h).round();
        if !(t_end.is_finite() && t_end > 0.0) || (t_end / h - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::Incommensurate(format!(
                "t_end = {t_end} must be a positive multiple of h = {h}"
            )));
        }
        Ok(n as usize)
    }

    fn node_f(&self, u: f64, t: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::BlowUp { t });
        }
        self.nl
            .eval_real(u)
            .map_err(|_| Error::NegativeState { t, u })
    }

    fn node_time(&self, k: usize) -> f64 {
        (k as f64 - self.grid.lag as f64) * self.grid.h
    }

    /// Method of steps with RK4 from the initial segment `phi` to `t_end`.
    ///
    /// `phi` need not satisfy the equation at `t = 0`: the history keeps its own
    /// left derivative there and the march starts from the right derivative
    /// given by the equation.
    pub fn integrate_steps(&self, phi: &HistorySegment, t_end: f64) -> Result<Trajectory> {
        phi.check_grid(&self.grid)?;
        let n_steps = self.steps_to(t_end)?;
        let (h, lag0, lag) = (self.grid.h, self.grid.lag0, self.grid.lag);
        let gamma = self.params.gamma;
        let survival = self.params.survival();
        let total = lag + 1 + n_steps;
        let rhs = |u: f64, recent: f64, old: f64| -gamma * u + recent - old * survival;

        let mut u = Vec::with_capacity(total);
        u.extend_from_slice(&phi.values);
        let mut fnode = Vec::with_capacity(total);
        for (k, &v) in phi.values.iter().enumerate() {
            fnode.push(self.node_f(v, self.node_time(k))?);
        }
        // one-sided derivatives: d_right[k] serves cell k, d_left[k] serves cell k-1
        let (mut d_left, mut d_right) = phi.node_slopes();
        d_right[lag] = rhs(u[lag], fnode[lag - lag0], fnode[0]);
        let mut fmid = Vec::with_capacity(total);
        for k in 0..lag {
            let mid = hermite_mid(u[k], d_right[k], u[k + 1], d_left[k + 1], h);
            fmid.push(self.node_f(mid, self.node_time(k) + 0.5 * h)?);
        }

        for n in lag..lag + n_steps {
            let (r0, o0) = (n - lag0, n - lag);
            let un = u[n];
            let k1 = rhs(un, fnode[r0], fnode[o0]);
            let k2 = rhs(un + 0.5 * h * k1, fmid[r0], fmid[o0]);
            let k3 = rhs(un + 0.5 * h * k2, fmid[r0], fmid[o0]);
            let k4 = rhs(un + h * k3, fnode[r0 + 1], fnode[o0 + 1]);
            let next = un + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            let t = self.node_time(n + 1);
            if !next.is_finite() {
                return Err(Error::BlowUp { t });
            }
            u.push(next);
            fnode.push(self.node_f(next, t)?);
            let d = rhs(next, fnode[n + 1 - lag0], fnode[n + 1 - lag]);
            d_left.push(d);
            d_right.push(d);
            let mid = hermite_mid(un, d_right[n], next, d, h);
            fmid.push(self.node_f(mid, t - 0.5 * h)?);
        }
        Ok(self.assemble(&u, &fnode))
    }

    /// Forward march of the renewal form from `phi` to `t_end`.
    pub fn integrate_renewal(&self, phi: &HistorySegment, t_end: f64) -> Result<Trajectory> {
        phi.check_grid(&self.grid)?;
        let n_steps = self.steps_to(t_end)?;
        let lag = self.grid.lag;
        let total = lag + 1 + n_steps;
        let h0 = self.h0(phi)?;
        let mut u = Vec::with_capacity(total);
        u.extend_from_slice(&phi.values);
        let mut fnode = Vec::with_capacity(total);
        for (k, &v) in phi.values.iter().enumerate() {
            fnode.push(self.node_f(v, self.node_time(k))?);
        }
        for k in lag + 1..total {
            let t = self.node_time(k);
            let v = (-self.params.gamma * t).exp() * h0 + self.memory_from_f(&fnode, k);
            u.push(v);
            fnode.push(self.node_f(v, t)?);
        }
        Ok(self.assemble(&u, &fnode))
    }

    fn assemble(&self, u: &[f64], fnode: &[f64]) -> Trajectory {
        let lag = self.grid.lag;
        let samples = u
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let t = self.node_time(k);
                let (h, first_integral) = if k >= lag {
                    let hk = v - self.memory_from_f(fnode, k);
                    (Some(hk), Some((self.params.gamma * t).exp() * hk))
                } else {
                    (None, None)
                };
                Sample {
                    t,
                    u: v,
                    h,
                    first_integral,
                }
            })
            .collect();
        Trajectory {
            h: self.grid.h,
            lag,
            samples,
        }
    }

    /// The segment map: `(T u)(t) = v(t + tau)` where `v` solves the equation from `u`.
    ///
    /// `(T u)(-tau) = u(0)` holds exactly.
    pub fn apply_t(&self, u: &HistorySegment) -> Result<HistorySegment> {
        u.check_grid(&self.grid)?;
        let mut fvals = Vec::with_capacity(2 * self.grid.lag + 1);
        for (k, &v) in u.values.iter().enumerate() {
            fvals.push(self.node_f(v, self.node_time(k))?);
        }
        let (seg, _) = self.advance(&u.values, fvals)?;
        Ok(seg)
    }

    /// One `tau` of the renewal march. `fvals` holds `f` on `u` and is reused
    /// as the window buffer; returns the new segment, with the slopes given by
    /// the equation, and `f` on it.
    fn advance(&self, u: &[f64], mut fvals: Vec<f64>) -> Result<(HistorySegment, Vec<f64>)> {
        let (lag, lag0) = (self.grid.lag, self.grid.lag0);
        let h = self.grid.h;
        let gamma = self.params.gamma;
        let survival = self.params.survival();
        fvals.truncate(lag + 1);
        let h0 = u[lag] - self.memory_from_f(&fvals, lag);
        let mut next = Vec::with_capacity(lag + 1);
        let mut slopes = Vec::with_capacity(lag + 1);
        next.push(u[lag]);
        slopes.push(-gamma * u[lag] + fvals[lag - lag0] - fvals[0] * survival);
        for i in 1..=lag {
            let v = (-gamma * i as f64 * h).exp() * h0 + self.memory_from_f(&fvals, lag + i);
            let t = i as f64 * h - self.params.tau;
            let fv = self.node_f(v, t)?;
            next.push(v);
            fvals.push(fv);
            slopes.push(-gamma * v + fvals[lag + i - lag0] - fvals[i] * survival);
        }
        let fnext = fvals.split_off(lag);
        let seg = HistorySegment::new(h, next)?.with_slopes(slopes.clone(), slopes)?;
        Ok((seg, fnext))
    }

    /// Check that `u0` is an admissible starting point for iteration.
    pub fn require_admissible(&self, u0: &HistorySegment) -> Result<f64> {
        let m = self.membership(u0, D0_TOLERANCE)?;
        if !m.in_d {
            return Err(Error::NotAdmissible { h0: m.h0 });
        }
        Ok(m.h0)
    }

    /// `[T u0, T^2 u0, ..., T^n u0]`, keeping only the last `keep` when given.
    pub fn iterate_t(
        &self,
        u0: &HistorySegment,
        n: usize,
        keep: Option<usize>,
    ) -> Result<Vec<HistorySegment>> {
        self.require_admissible(u0)?;
        let cap = keep.unwrap_or(n).min(n);
        let mut out: VecDeque<HistorySegment> = VecDeque::with_capacity(cap);
        if cap == 0 {
            return Ok(Vec::new());
        }
        let mut current = u0.values.clone();
        let mut fvals = Vec::with_capacity(2 * self.grid.lag + 1);
        for (k, &v) in current.iter().enumerate() {
            fvals.push(self.node_f(v, self.node_time(k))?);
        }
        for _ in 0..n {
            let (next, fnext) = self.advance(&current, fvals)?;
            fvals = fnext;
            if out.len() == cap {
                out.pop_front();
            }
            current.clone_from(&next.values);
            out.push_back(next);
        }
        Ok(out.into())
    }
}

/// Differences between successive refinements and the observed order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeOrder {
    /// Max over common nodes of `|u_{4h} - u_{2h}|`.
    pub coarse_diff: f64,
    /// Max over common nodes of `|u_{2h} - u_h|`.
    pub fine_diff: f64,
    pub order: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    /// Steps `4h, 2h, h`.
    pub steps: [f64; 3],
    pub method_of_steps: SchemeOrder,
    pub renewal: SchemeOrder,
}

/// Self-convergence of both schemes from `phi` sampled on the grid of `fine`.
///
/// The runs use steps `4h`, `2h` and `h` (with `h` the step of `fine`), all
/// starting from subsamples of `phi`, and are compared on the nodes of the
/// coarsest grid in `(0, t_end]`.
pub fn self_convergence(
    fine: &Model,
    phi: &HistorySegment,
    t_end: f64,
) -> Result<ConvergenceReport> {
    phi.check_grid(&fine.grid)?;
    if !fine.grid.lag0.is_multiple_of(4) || !fine.grid.lag.is_multiple_of(4) {
        return Err(Error::Incommensurate(format!(
            "both delays need a multiple of 4 steps, got {} and {}",
            fine.grid.lag0, fine.grid.lag
        )));
    }
    let h = fine.grid.h;
    let coarse_n = (t_end / (4.0 * h)).round();
    if coarse_n.is_nan() || coarse_n < 1.0 || (t_end / (4.0 * h) - coarse_n).abs() > 1e-9 * coarse_n
    {
        return Err(Error::Incommensurate(format!(
            "t_end = {t_end} is not a multiple of 4h = {}",
            4.0 * h
        )));
    }
    let t_end = coarse_n * 4.0 * h;
    let run = |stride: usize, renewal: bool| -> Result<Vec<f64>> {
        let grid = Grid::new(&fine.params, h * stride as f64)?;
        let m = Model::on_grid(fine.params, fine.nl.clone(), grid)?;
        let sub = phi.subsample(stride)?;
        let tr = if renewal {
            m.integrate_renewal(&sub, t_end)?
        } else {
            m.integrate_steps(&sub, t_end)?
        };
        let every = 4 / stride;
        Ok(tr
            .forward()
            .iter()
            .skip(every - 1)
            .step_by(every)
            .map(|s| s.u)
            .collect())
    };
    let order = |renewal: bool| -> Result<SchemeOrder> {
        let runs = [run(4, renewal)?, run(2, renewal)?, run(1, renewal)?];
        let diff = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let coarse_diff = diff(&runs[0], &runs[1]);
        let fine_diff = diff(&runs[1], &runs[2]);
        Ok(SchemeOrder {
            coarse_diff,
            fine_diff,
            order: (coarse_diff / fine_diff).log2(),
        })
    };
    Ok(ConvergenceReport {
        steps: [4.0 * h, 2.0 * h, h],
        method_of_steps: order(false)?,
        renewal: order(true)?,
    })
}
