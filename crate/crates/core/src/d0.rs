//! Construction of initial segments with `H0 = 0` from an age distribution.
//!
//! Given cells of age `a` at time zero with density `g(a)`, `a in [0, tau]`,
//! the segment `u` on `[-tau, 0]` solving
//!
//! ```text
//! u' = -gamma u + (F_g u)(t),    u(-tau) = int_{tau0}^{tau} g(a) da
//! ```
//!
//! has `H0(u) = 0`. `F_g` is piecewise, with breakpoints at `-tau0` and
//! `-tau1`, and its branch table depends on which of `tau0`, `tau1` is larger.
//! When in addition `g(0) = f(u(-tau))` the segment is `C^1` at `-tau1` and
//! joins the equation smoothly at `t = 0`.
//!
//! `g` is handled as the cubic Hermite interpolant of its samples (node
//! derivatives by fourth-order differences). The starting value is the exact
//! integral of that interpolant, which is what RK4 effectively integrates when
//! it samples `g` at nodes and cell midpoints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::Model;
use crate::model::Grid;
use crate::quadrature::{hermite, hermite_cell_integral, hermite_mid, node_derivatives};
use crate::segment::HistorySegment;

/// Samples of `g` at ages `a = i h`, `i = 0..=tau/h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeDistribution {
    pub h: f64,
    pub values: Vec<f64>,
}

impl AgeDistribution {
    pub fn new(h: f64, values: Vec<f64>) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) || values.len() < 5 {
            return Err(Error::MalformedSegment(format!(
                "age distribution needs h > 0 and >= 5 samples, got h = {h}, {} samples",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::MalformedSegment(format!(
                "age distribution sample {i} = {} is negative or not finite",
                values[i]
            )));
        }
        Ok(Self { h, values })
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        Self::new(grid.h, vec![c; grid.segment_len()])
    }

    pub fn from_fn(grid: &Grid, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            grid.h,
            (0..=grid.lag).map(|i| g(i as f64 * grid.h)).collect(),
        )
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.values.len() != grid.segment_len() || (self.h - grid.h).abs() > 1e-9 * grid.h {
            return Err(Error::MalformedSegment(format!(
                "age distribution has {} samples at h = {}, grid needs {} at h = {}",
                self.values.len(),
                self.h,
                grid.segment_len(),
                grid.h
            )));
        }
        Ok(())
    }
}

/// Random age profile: `a0 + sum_i a_i cos(2 pi i a / tau) + b_i sin(2 pi i a / tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomGShape {
    pub n_modes: usize,
    /// Coefficients are drawn uniformly from `[lo, hi]`.
    pub amplitude: (f64, f64),
}

impl Default for RandomGShape {
    fn default() -> Self {
        Self {
            n_modes: 2,
            amplitude: (-0.5, 0.5),
        }
    }
}

/// Side from which a node is approached; picks the branch at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    /// `f(u(t - tau0)) - g(-t) exp(-gamma tau1)`
    Recent,
    /// `f(u(t - tau0)) - g(-t) exp(-gamma (t + tau))`, only when `tau1 >= tau0`
    FeedbackMiddle,
    /// `g(-(t + tau1)) - g(-t) exp(-gamma tau1)`, only when `tau1 < tau0`
    AgeMiddle,
    /// `g(-(t + tau1)) - g(-t) exp(-gamma (t + tau))`
    Oldest,
}

/// `g` with node derivatives for Hermite evaluation at any age.
struct AgeInterp<'a> {
    h: f64,
    g: &'a [f64],
    d: Vec<f64>,
}

impl<'a> AgeInterp<'a> {
    fn new(g: &'a AgeDistribution) -> Self {
        Self {
            h: g.h,
            g: &g.values,
            d: node_derivatives(&g.values, g.h),
        }
    }

    /// `g` at grid position `pos` (age `pos * h`), `pos` a multiple of 1/2.
    fn at_position(&self, pos: f64) -> f64 {
        let i = pos.floor() as usize;
        if pos == i as f64 {
            self.g[i]
        } else {
            hermite_mid(self.g[i], self.d[i], self.g[i + 1], self.d[i + 1], self.h)
        }
    }

    fn at_age(&self, age: f64) -> f64 {
        let q = age / self.h;
        let n = self.g.len() - 1;
        let i = (q.floor().max(0.0) as usize).min(n - 1);
        let theta = q - i as f64;
        if theta.abs() < 1e-9 {
            return self.g[i];
        }
        if (theta - 1.0).abs() < 1e-9 {
            return self.g[i + 1];
        }
        hermite(
            self.g[i],
            self.d[i],
            self.g[i + 1],
            self.d[i + 1],
            self.h,
            theta,
        )
    }

    /// Exact integral of the interpolant over ages `[from * h, to * h]`.
    fn integral(&self, from: usize, to: usize) -> f64 {
        (from..to)
            .map(|i| {
                hermite_cell_integral(self.g[i], self.d[i], self.g[i + 1], self.d[i + 1], self.h)
            })
            .sum()
    }
}

/// Smooth weight on `[0, width]`: 1 at age 0 with zero slope, `C^2` into 0 at `width`.
fn blend_weight(age: f64, width: f64) -> f64 {
    let s = age / width;
    if s >= 1.0 {
        0.0
    } else {
        let r = 1.0 - s;
        r * r * r * (1.0 + 3.0 * s + 6.0 * s * s)
    }
}

impl Model {
    fn branch(&self, pos: f64, side: Side) -> Branch {
        let (lag0, lag1) = (self.grid.lag0 as f64, self.grid.lag1() as f64);
        let p = match side {
            Side::Left => pos - 0.25,
            Side::Right => pos + 0.25,
            Side::Interior => pos,
        };
        // t = -tau0 sits at position lag1, t = -tau1 at position lag0
        if lag1 >= lag0 {
            if p > lag1 {
                Branch::Recent
            } else if p > lag0 {
                Branch::FeedbackMiddle
            } else {
                Branch::Oldest
            }
        } else if p > lag0 {
            Branch::Recent
        } else if p > lag1 {
            Branch::AgeMiddle
        } else {
            Branch::Oldest
        }
    }

    /// `F_g` at grid position `pos` (time `-tau + pos h`) given the delayed
    /// feedback and an age lookup by grid position.
    fn fg_combine(
        &self,
        branch: Branch,
        pos: f64,
        g_at: impl Fn(f64) -> f64,
        feedback: impl FnOnce() -> Result<f64>,
    ) -> Result<f64> {
        let (lag, lag0) = (self.grid.lag as f64, self.grid.lag0 as f64);
        let gamma = self.params.gamma;
        let survival = self.params.survival();
        let since_start = (-gamma * pos * self.grid.h).exp();
        Ok(match branch {
            Branch::Recent => feedback()? - g_at(lag - pos) * survival,
            Branch::FeedbackMiddle => feedback()? - g_at(lag - pos) * since_start,
            Branch::AgeMiddle => g_at(lag0 - pos) - g_at(lag - pos) * survival,
            Branch::Oldest => g_at(lag0 - pos) - g_at(lag - pos) * since_start,
        })
    }

    /// `(F_g u)(t)` for `t in [-tau, 0]`.
    ///
    /// `u_known[k]` is `u(-tau + k h)`; only the part needed for `u(t - tau0)`
    /// has to be present. At a breakpoint the value of the branch that
    /// contains it (intervals are closed on the right) is returned.
    pub fn apply_fg(&self, g: &AgeDistribution, u_known: &[f64], t: f64) -> Result<f64> {
        g.check_grid(&self.grid)?;
        let h = self.grid.h;
        if !(t >= -self.params.tau - 1e-12 && t <= 1e-12) {
            return Err(Error::Coverage(format!("t = {t} outside [-tau, 0]")));
        }
        let gi = AgeInterp::new(g);
        let pos = (t + self.params.tau) / h;
        let near = pos.round();
        let pos = if (pos - near).abs() < 1e-9 { near } else { pos };
        let branch = self.branch(pos, Side::Left);
        let feedback = || -> Result<f64> {
            let q = pos - self.grid.lag0 as f64;
            let value = lookup(u_known, h, q)?;
            self.nl.eval_real(value)
        };
        self.fg_combine(branch, pos, |p| gi.at_age(p * h), feedback)
    }

    /// Solve the age-distribution ODE for a segment with `H0 = 0`.
    ///
    /// Fails with `ConstructionFailed` when the result has a negative sample.
    pub fn build_d0_segment(&self, g: &AgeDistribution) -> Result<HistorySegment> {
        g.check_grid(&self.grid)?;
        let start = self.age_mass(g);
        let (values, left, right) = self.march_fg(g, start)?;
        nonnegative_segment(self.grid.h, values)?.with_slopes(left, right)
    }

    /// `int_{tau0}^{tau} g(a) da` of the interpolated age profile.
    pub fn age_mass(&self, g: &AgeDistribution) -> f64 {
        AgeInterp::new(g).integral(self.grid.lag0, self.grid.lag)
    }

    /// RK4 march of `u' = -gamma u + F_g u` on `[-tau, 0]` from `u(-tau) = start`.
    ///
    /// Returns the samples and the left and right node slopes.
    pub(crate) fn march_fg(
        &self,
        g: &AgeDistribution,
        start: f64,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (h, lag, lag0) = (self.grid.h, self.grid.lag, self.grid.lag0);
        let gamma = self.params.gamma;
        let gi = AgeInterp::new(g);
        let mut u = Vec::with_capacity(lag + 1);
        let mut d_left = Vec::with_capacity(lag + 1);
        let mut d_right = Vec::with_capacity(lag + 1);
        let mut fmid: Vec<f64> = Vec::with_capacity(lag);

        let eval = |pos: f64, side: Side, u: &[f64], fmid: &[f64]| -> Result<f64> {
            let branch = self.branch(pos, side);
            let feedback = || -> Result<f64> {
                let q = pos - lag0 as f64;
                let i = q.floor() as usize;
                if q == i as f64 {
                    let v = *u.get(i).ok_or_else(|| marching_error(q, u.len()))?;
                    self.nl.eval_real(v)
                } else {
                    fmid.get(i)
                        .copied()
                        .ok_or_else(|| marching_error(q, u.len()))
                }
            };
            self.fg_combine(branch, pos, |p| gi.at_position(p), feedback)
        };

        u.push(start);
        d_left.push(f64::NAN);
        d_right.push(-gamma * start + eval(0.0, Side::Right, &u, &fmid)?);
        for k in 0..lag {
            let pos = k as f64;
            let uk = u[k];
            let f0 = d_right[k] + gamma * uk;
            let fm = eval(pos + 0.5, Side::Interior, &u, &fmid)?;
            let f1 = eval(pos + 1.0, Side::Left, &u, &fmid)?;
            let k1 = -gamma * uk + f0;
            let k2 = -gamma * (uk + 0.5 * h * k1) + fm;
            let k3 = -gamma * (uk + 0.5 * h * k2) + fm;
            let k4 = -gamma * (uk + h * k3) + f1;
            let next = uk + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !next.is_finite() {
                return Err(Error::BlowUp {
                    t: (pos + 1.0) * h - self.params.tau,
                });
            }
            u.push(next);
            d_left.push(-gamma * next + f1);
            let right = if k + 1 < lag {
                -gamma * next + eval(pos + 1.0, Side::Right, &u, &fmid)?
            } else {
                f64::NAN
            };
            d_right.push(right);
            let mid = hermite_mid(uk, d_right[k], next, d_left[k + 1], h);
            fmid.push(self.nl.eval_real(mid)?);
        }
        d_left[0] = d_right[0];
        d_right[lag] = d_left[lag];
        Ok((u, d_left, d_right))
    }

    /// Adjust `g` near age 0 so that `g(0) = f(int_{tau0}^{tau} g)`.
    ///
    /// Raising `g(0)` adds a smooth bump supported on `[0, min(tau0, tau/10)]`;
    /// lowering it scales `g` down on the same support so `g` stays nonnegative.
    /// The integral over `[tau0, tau]` barely depends on the adjustment, so the
    /// target is found by fixed-point iteration with a bisection fallback.
    pub fn enforce_g0(&self, g: &AgeDistribution) -> Result<AgeDistribution> {
        g.check_grid(&self.grid)?;
        let g0 = g.values[0];
        let residual = |y: f64| -> Result<f64> {
            let gy = self.blend_to(g, y);
            Ok(y - self.nl.eval(self.age_mass(&gy))?)
        };
        let tol = 1e-13 * (1.0 + g0.abs());
        if residual(g0)?.abs() <= tol {
            return Ok(g.clone());
        }
        let mut y = g0;
        for _ in 0..100 {
            let r = residual(y)?;
            if r.abs() <= tol {
                return Ok(self.blend_to(g, y));
            }
            y = (y - r).max(0.0);
        }
        let (mut lo, mut hi) = (0.0, g0 + self.nl.fbar());
        if residual(lo)? > 0.0 || residual(hi)? < 0.0 {
            return Err(Error::Internal(
                "compatibility residual does not change sign".into(),
            ));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= tol {
                break;
            }
        }
        Ok(self.blend_to(g, 0.5 * (lo + hi)))
    }

    fn blend_to(&self, g: &AgeDistribution, y: f64) -> AgeDistribution {
        let width = self.params.tau0.min(self.params.tau / 10.0);
        let g0 = g.values[0];
        let h = g.h;
        let values = g
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let w = blend_weight(i as f64 * h, width);
                if y >= g0 {
                    v + (y - g0) * w
                } else {
                    v * (1.0 - w * (1.0 - y / g0))
                }
            })
            .collect();
        AgeDistribution { h, values }
    }

    /// Deterministic random age profile that satisfies the compatibility condition.
    ///
    /// The trigonometric profile is lifted by the smallest constant that keeps
    /// it nonnegative and, when possible, by the constant that makes
    /// `g(0) = f(int_{tau0}^{tau} g)`; any remaining mismatch goes through
    /// [`Model::enforce_g0`]. Zero amplitudes give the compatible constant.
    pub fn random_g(&self, seed: u64, shape: &RandomGShape) -> Result<AgeDistribution> {
        let (lo, hi) = shape.amplitude;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidParameters(format!(
                "bad amplitude range [{lo}, {hi}]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let a0 = draw();
        let modes: Vec<(f64, f64)> = (0..shape.n_modes).map(|_| (draw(), draw())).collect();
        let tau = self.params.tau;
        let base_fn = |a: f64| {
            modes.iter().enumerate().fold(a0, |acc, (i, (c, s))| {
                let w = 2.0 * std::f64::consts::PI * (i + 1) as f64 * a / tau;
                acc + c * w.cos() + s * w.sin()
            })
        };
        let base = AgeDistribution {
            h: self.grid.h,
            values: (0..=self.grid.lag)
                .map(|i| base_fn(i as f64 * self.grid.h))
                .collect(),
        };
        let floor = -base.values.iter().copied().fold(f64::INFINITY, f64::min);
        let lift_min = floor.max(0.0);
        let base_mass = self.age_mass(&base);
        let tau1 = self.params.tau1();
        let b0 = base.values[0];
        // lifting by a constant l adds l * tau1 to the integral
        let r = |l: f64| -> Result<f64> { Ok(l + b0 - self.nl.eval(base_mass + l * tau1)?) };
        let lift = if r(lift_min)? >= 0.0 {
            lift_min
        } else {
            let (mut a, mut b) = (lift_min, lift_min + self.nl.fbar() + b0.abs());
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if r(mid)? < 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
                if b - a <= 1e-15 * (1.0 + b) {
                    break;
                }
            }
            0.5 * (a + b)
        };
        let lifted = AgeDistribution {
            h: base.h,
            values: base.values.iter().map(|v| (v + lift).max(0.0)).collect(),
        };
        self.enforce_g0(&lifted)
    }

    /// Raise `seg` so its `H0` becomes `target`, without touching the memory window.
    ///
    /// Adds `s exp(-gamma t) (1 - (t / tau0)^2)^3` on `[-tau0, 0]`. The shape
    /// vanishes (with two derivatives) at `-tau0` and has slope `-gamma s` at
    /// zero, so a segment that joined the equation smoothly at `t = 0` still does.
    pub fn lift_h0(&self, seg: &HistorySegment, target: f64) -> Result<HistorySegment> {
        let s = target - self.h0(seg)?;
        let (tau0, gamma) = (self.params.tau0, self.params.gamma);
        // bump and its derivative at t
        let bump = |t: f64| -> (f64, f64) {
            if t <= -tau0 {
                return (0.0, 0.0);
            }
            let x = 1.0 - (t / tau0).powi(2);
            let e = (-gamma * t).exp();
            let b = x * x * x;
            let db = -6.0 * t / (tau0 * tau0) * x * x;
            (s * e * b, s * e * (db - gamma * b))
        };
        let values = seg
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| v + bump(seg.time(k)).0)
            .collect();
        let lifted = HistorySegment::new(seg.h, values)?;
        match &seg.slopes {
            Some(sl) => {
                let shift = |d: &[f64]| -> Vec<f64> {
                    d.iter()
                        .enumerate()
                        .map(|(k, &v)| v + bump(seg.time(k)).1)
                        .collect()
                };
                lifted.with_slopes(shift(&sl.left), shift(&sl.right))
            }
            None => Ok(lifted),
        }
    }
}

fn nonnegative_segment(h: f64, values: Vec<f64>) -> Result<HistorySegment> {
    let seg = HistorySegment::new(h, values)?;
    let (k, min) =
        seg.values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (k, v)| if v < acc.1 { (k, v) } else { acc },
            );
    if min < 0.0 {
        return Err(Error::ConstructionFailed {
            min,
            t: seg.time(k),
        });
    }
    Ok(seg)
}

fn marching_error(q: f64, known: usize) -> Error {
    Error::MarchingOrder(format!(
        "lookup at grid position {q} with {known} nodes known"
    ))
}

/// Value of sampled `u` at fractional grid position `q` (Hermite between nodes).
fn lookup(u: &[f64], h: f64, q: f64) -> Result<f64> {
    if q < -1e-9 || q > (u.len() as f64 - 1.0) + 1e-9 {
        return Err(marching_error(q, u.len()));
    }
    let near = q.round();
    if (q - near).abs() < 1e-9 {
        return Ok(u[near as usize]);
    }
    if u.len() < 5 {
        return Err(marching_error(q, u.len()));
    }
    let d = node_derivatives(u, h);
    let i = q.floor() as usize;
    Ok(hermite(u[i], d[i], u[i + 1], d[i + 1], h, q - i as f64))
}
