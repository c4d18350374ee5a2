//! The memory integral and the H functional.
//!
//! For a solution `u` the memory integral at time `t` is
//! `int_{tau0}^{tau} f(u(t - a)) exp(-gamma (a - tau0)) da`, and
//! `H(u, t) = u(t) - memory(t)`. `H0` is `H` at `t = 0` evaluated on the
//! initial segment alone. Along any solution `H(u, t) = exp(-gamma t) H0`,
//! so `H0 >= 0` keeps the solution nonnegative and `H0 = 0` is invariant.

use crate::error::{Error, Result};
use crate::model::{Grid, Nonlinearity, Parameters};
use crate::quadrature::composite_weights;
use crate::segment::HistorySegment;

/// Relative tolerance for accepting `H0 = 0` in floating point.
pub const D0_TOLERANCE: f64 = 1e-8;

/// Parameters, nonlinearity and grid, with the memory-integral weights precomputed.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: Parameters,
    pub nl: Nonlinearity,
    pub grid: Grid,
    /// `kernel[j]` weights `f(u(t - tau0 - j h))` in the memory integral.
    kernel: Vec<f64>,
}

/// Where a segment sits relative to D and D0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub h0: f64,
    pub nonnegative: bool,
    pub in_d: bool,
    pub in_d0: bool,
}

impl Model {
    pub fn new(params: Parameters, nl: Nonlinearity, h: f64) -> Result<Self> {
        let grid = Grid::new(&params, h)?;
        Self::on_grid(params, nl, grid)
    }

    pub fn on_grid(params: Parameters, nl: Nonlinearity, grid: Grid) -> Result<Self> {
        params.validate()?;
        nl.validate()?;
        let n1 = grid.lag1();
        let kernel = composite_weights(n1, grid.h)
            .into_iter()
            .enumerate()
            .map(|(j, w)| w * (-params.gamma * j as f64 * grid.h).exp())
            .collect();
        Ok(Self {
            params,
            nl,
            grid,
            kernel,
        })
    }

    /// Same model on a grid with half the step.
    pub fn refined(&self) -> Self {
        Self::on_grid(self.params, self.nl.clone(), self.grid.refined())
            .expect("refining a valid grid stays valid")
    }

    pub fn with_nonlinearity(&self, nl: Nonlinearity) -> Result<Self> {
        Self::on_grid(self.params, nl, self.grid)
    }

    #[inline]
    pub fn eval_f(&self, u: f64) -> Result<f64> {
        self.nl.eval(u)
    }

    /// Memory integral from already evaluated `f(u)` node values.
    ///
    /// `fvals[i]` is `f` at node `i`; the integral is taken at node `k >= tau/h`.
    #[inline]
    pub fn memory_from_f(&self, fvals: &[f64], k: usize) -> f64 {
        let newest = k - self.grid.lag0;
        self.kernel
            .iter()
            .enumerate()
            .map(|(j, c)| c * fvals[newest - j])
            .sum()
    }

    /// Memory integral at node `k` of `history`, whose node `i` sits at `t0 + i h`.
    pub fn memory_integral(&self, history: &[f64], k: usize) -> Result<f64> {
        if k < self.grid.lag || k >= history.len() + self.grid.lag0 {
            return Err(Error::Coverage(format!(
                "node {k} needs samples {}..={} of a history with {}",
                k as i64 - self.grid.lag as i64,
                k as i64 - self.grid.lag0 as i64,
                history.len()
            )));
        }
        let newest = k - self.grid.lag0;
        let mut acc = 0.0;
        for (j, c) in self.kernel.iter().enumerate() {
            acc += c * self.nl.eval_real(history[newest - j])?;
        }
        Ok(acc)
    }

    /// `H(u, t_k) = u_k - memory(t_k)`.
    pub fn h_functional(&self, history: &[f64], k: usize) -> Result<f64> {
        let value = *history.get(k).ok_or_else(|| {
            Error::Coverage(format!("node {k} beyond history of {}", history.len()))
        })?;
        Ok(value - self.memory_integral(history, k)?)
    }

    /// `H0` of a segment on this model's grid.
    pub fn h0(&self, seg: &HistorySegment) -> Result<f64> {
        seg.check_grid(&self.grid)?;
        self.h_functional(&seg.values, self.grid.lag)
    }

    /// Membership in D (`H0 >= 0`) and D0 (`H0 = 0`), both requiring nonnegative samples.
    ///
    /// `H0 = 0` is accepted when `|H0| <= tol * (1 + ||u||_inf)`; the same slack
    /// applies to `H0 >= 0`.
    pub fn membership(&self, seg: &HistorySegment, tol: f64) -> Result<Membership> {
        let h0 = self.h0(seg)?;
        let slack = tol * (1.0 + seg.sup_norm());
        let nonnegative = seg.min() >= 0.0;
        Ok(Membership {
            h0,
            nonnegative,
            in_d: nonnegative && h0 >= -slack,
            in_d0: nonnegative && h0.abs() <= slack,
        })
    }

    /// A constant steady state: `u = f(u) (1 - exp(-gamma tau1)) / gamma`.
    ///
    /// Bisection on `[0, fbar * mass]`, which always brackets a root. When f
    /// is not monotone the root found is one of possibly several.
    pub fn steady_state(&self) -> Result<f64> {
        let mass = self.params.memory_mass();
        let g = |u: f64| -> Result<f64> { Ok(u - mass * self.nl.eval(u)?) };
        let (mut lo, mut hi) = (0.0, self.nl.fbar() * mass);
        if g(lo)? >= 0.0 {
            return Ok(lo);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[cfg(test)]
mod tests {
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    use super::*;

    fn diagram(nl: Nonlinearity) -> Model {
        Model::new(Parameters::diagram(), nl, 0.005).unwrap()
    }

    #[test]
    fn constant_history_matches_closed_form() {
        // f(c) = 2 for hill alpha = 3 at c = 1
        let m = diagram(Nonlinearity::Hill { alpha: 3.0 });
        let seg = HistorySegment::constant(&m.grid, 1.0);
        let exact = 2.0 * (1.0 - (-0.0045f64).exp()) / 0.005;
        assert_abs_diff_eq!(exact, 1.795961, epsilon = 1e-5);
        let mem = m.memory_integral(&seg.values, m.grid.lag).unwrap();
        assert_relative_eq!(mem, exact, max_relative = 1e-10);
        assert_relative_eq!(m.h0(&seg).unwrap(), 1.0 - exact, max_relative = 1e-10);
        assert_abs_diff_eq!(m.h0(&seg).unwrap(), -0.795961, epsilon = 1e-5);
    }

    #[test]
    fn constant_exactness_across_parameters() {
        for &(gamma, tau0, tau, h) in &[
            (0.005, 0.1, 1.0, 0.005),
            (1.0, 0.1, 1.0, 0.01),
            (3.0, 0.6, 1.0, 0.002),
            (0.5, 0.25, 2.0, 0.01),
            // odd number of memory intervals (3/8 closing panel)
            (2.0, 0.1, 0.831, 0.001),
        ] {
            let p = Parameters::new(gamma, tau0, tau).unwrap();
            let m = Model::new(p, Nonlinearity::Constant { amplitude: 1.7 }, h).unwrap();
            let seg = HistorySegment::constant(&m.grid, 0.3);
            let mem = m.memory_integral(&seg.values, m.grid.lag).unwrap();
            assert_relative_eq!(mem, 1.7 * p.memory_mass(), max_relative = 1e-10);
        }
    }

    #[test]
    fn zero_f_gives_value() {
        let m = diagram(Nonlinearity::Zero);
        let seg = HistorySegment::from_fn(&m.grid, |t| 2.0 + t).unwrap();
        assert_eq!(m.memory_integral(&seg.values, m.grid.lag).unwrap(), 0.0);
        assert_eq!(m.h0(&seg).unwrap(), 2.0);
    }

    #[test]
    fn identity_table_against_antiderivative() {
        // f(u) = u on [0, 10]; u(s) = exp(gamma s); at t = 0 the integrand is
        // exp(-gamma a) exp(-gamma (a - tau0)).
        let (gamma, tau0, tau) = (0.8, 0.1, 1.0);
        let p = Parameters::new(gamma, tau0, tau).unwrap();
        let nl = Nonlinearity::Table {
            points: vec![(0.0, 0.0), (10.0, 10.0)],
        };
        let m = Model::new(p, nl, 0.005).unwrap();
        let seg = HistorySegment::from_fn(&m.grid, |s| (gamma * s).exp()).unwrap();
        let exact = (gamma * tau0).exp()
            * ((-2.0 * gamma * tau0).exp() - (-2.0 * gamma * tau).exp())
            / (2.0 * gamma);
        let mem = m.memory_integral(&seg.values, m.grid.lag).unwrap();
        assert_relative_eq!(mem, exact, max_relative = 1e-10);
    }

    #[test]
    fn coverage_error_before_window() {
        let m = diagram(Nonlinearity::Zero);
        let v = vec![1.0; m.grid.lag + 1];
        assert!(matches!(
            m.memory_integral(&v, m.grid.lag - 1),
            Err(Error::Coverage(_))
        ));
        assert!(matches!(
            m.h_functional(&v, m.grid.lag + 1),
            Err(Error::Coverage(_))
        ));
    }

    #[test]
    fn memory_bounded_by_fbar_mass() {
        let m = diagram(Nonlinearity::Hill { alpha: 3.0 });
        let bound = 4.0 * m.params.memory_mass();
        for k in 0..50 {
            let seg = HistorySegment::from_fn(&m.grid, |t| {
                (1.0 + (k as f64 * 0.37 + 7.0 * t).sin()) * k as f64 * 0.1
            })
            .unwrap();
            let mem = m.memory_integral(&seg.values, m.grid.lag).unwrap();
            assert!((0.0..=bound).contains(&mem));
        }
    }

    #[test]
    fn membership_verdicts() {
        let m = diagram(Nonlinearity::Hill { alpha: 3.0 });
        let one = HistorySegment::constant(&m.grid, 1.0);
        let v = m.membership(&one, D0_TOLERANCE).unwrap();
        assert!(!v.in_d && !v.in_d0 && v.nonnegative);
        let star = HistorySegment::constant(&m.grid, m.steady_state().unwrap());
        let v = m.membership(&star, D0_TOLERANCE).unwrap();
        assert!(v.in_d && v.in_d0);
        let three = HistorySegment::constant(&m.grid, 3.0);
        let v = m.membership(&three, D0_TOLERANCE).unwrap();
        assert!(v.in_d && !v.in_d0);
    }

    #[test]
    fn steady_state_value() {
        let m = diagram(Nonlinearity::Hill { alpha: 3.0 });
        let u = m.steady_state().unwrap();
        // independent check: Newton on u (1 + u^3) = 4 * mass
        let target = 4.0 * m.params.memory_mass();
        let mut x = 1.0f64;
        for _ in 0..50 {
            x -= (x + x.powi(4) - target) / (1.0 + 4.0 * x.powi(3));
        }
        assert_relative_eq!(u, x, max_relative = 1e-13);
        assert_abs_diff_eq!(u, 1.2386, epsilon = 1e-4);
    }
}
