//! Model constants, the feedback nonlinearity and the commensurate time grid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack when deciding whether a delay is an integer number of steps.
const COMMENSURATE_TOL: f64 = 1e-9;

/// Decay rate and the two delays of the model.
///
/// `tau0` is the maturation delay and `tau` the total delay; the residence
/// time in circulation is `tau1 = tau - tau0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub gamma: f64,
    pub tau0: f64,
    pub tau: f64,
}

impl Parameters {
    pub fn new(gamma: f64, tau0: f64, tau: f64) -> Result<Self> {
        let p = Self { gamma, tau0, tau };
        p.validate()?;
        Ok(p)
    }

    /// The parameter set used for the omega-limit diagrams: gamma = 0.005, tau0 = 0.1, tau = 1.
    pub fn diagram() -> Self {
        Self {
            gamma: 0.005,
            tau0: 0.1,
            tau: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.gamma.is_finite() && self.tau0.is_finite() && self.tau.is_finite();
        if !finite || self.gamma <= 0.0 {
            return Err(Error::InvalidParameters(format!(
                "gamma must be positive and finite, got {}",
                self.gamma
            )));
        }
        if !(self.tau0 > 0.0 && self.tau > self.tau0) {
            return Err(Error::InvalidParameters(format!(
                "need 0 < tau0 < tau, got tau0 = {}, tau = {}",
                self.tau0, self.tau
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn tau1(&self) -> f64 {
        self.tau - self.tau0
    }

    /// Weight of the destruction term, `exp(-gamma * tau1)`.
    #[inline]
    pub fn survival(&self) -> f64 {
        (-self.gamma * self.tau1()).exp()
    }

    /// `(1 - exp(-gamma tau1)) / gamma`, the memory integral of a unit integrand.
    pub fn memory_mass(&self) -> f64 {
        -(-self.gamma * self.tau1()).exp_m1() / self.gamma
    }
}

/// Feedback production rate `f(u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Nonlinearity {
    /// `4 / (1 + u^alpha)`.
    Hill {
        alpha: f64,
    },
    /// `(2/pi) atan(alpha sin(2 pi u)) + 1`.
    ArctanSine {
        alpha: f64,
    },
    /// `A exp(-(u - center)^2 / width_sq)`.
    GaussianBump {
        amplitude: f64,
        center: f64,
        width_sq: f64,
    },
    Zero,
    Constant {
        amplitude: f64,
    },
    /// Piecewise-linear through `(u, f)` pairs sorted by `u`, clamped outside.
    Table {
        points: Vec<(f64, f64)>,
    },
}

impl Nonlinearity {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidNonlinearity(msg));
        match self {
            Self::Hill { alpha } | Self::ArctanSine { alpha } => {
                if !alpha.is_finite() || *alpha < 0.0 {
                    return bad(format!("alpha must be finite and >= 0, got {alpha}"));
                }
            }
            Self::GaussianBump {
                amplitude,
                center,
                width_sq,
            } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return bad(format!("amplitude must be >= 0, got {amplitude}"));
                }
                if !center.is_finite() || !(width_sq.is_finite() && *width_sq > 0.0) {
                    return bad(format!(
                        "need finite center and width_sq > 0, got {center}, {width_sq}"
                    ));
                }
            }
            Self::Zero => {}
            Self::Constant { amplitude } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return bad(format!("amplitude must be >= 0, got {amplitude}"));
                }
            }
            Self::Table { points } => {
                if points.is_empty() {
                    return bad("table needs at least one point".into());
                }
                if points
                    .iter()
                    .any(|&(u, f)| !u.is_finite() || !f.is_finite() || f < 0.0)
                {
                    return bad("table entries must be finite with f >= 0".into());
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return bad("table abscissae must be strictly increasing".into());
                }
            }
        }
        Ok(())
    }

    /// Known upper bound of f on the nonnegative half-line.
    pub fn fbar(&self) -> f64 {
        match self {
            Self::Hill { .. } => 4.0,
            Self::ArctanSine { .. } => 2.0,
            Self::GaussianBump { amplitude, .. } | Self::Constant { amplitude } => *amplitude,
            Self::Zero => 0.0,
            // piecewise-linear interpolation never exceeds its nodes
            Self::Table { points } => points.iter().map(|p| p.1).fold(0.0, f64::max),
        }
    }

    /// `f(u)` for `u >= 0`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !u.is_finite() || u < 0.0 {
            return Err(Error::Domain { u });
        }
        Ok(self.formula(u))
    }

    /// `f(u)` on the whole real line where the formula extends naturally.
    ///
    /// Hill has no real extension below zero and returns a domain error there;
    /// every other kind is defined for all finite `u`.
    pub fn eval_real(&self, u: f64) -> Result<f64> {
        if !u.is_finite() || (u < 0.0 && matches!(self, Self::Hill { .. })) {
            return Err(Error::Domain { u });
        }
        Ok(self.formula(u))
    }

    fn formula(&self, u: f64) -> f64 {
        match self {
            Self::Hill { alpha } => 4.0 / (1.0 + u.powf(*alpha)),
            Self::ArctanSine { alpha } => (2.0 / PI) * (alpha * (2.0 * PI * u).sin()).atan() + 1.0,
            Self::GaussianBump {
                amplitude,
                center,
                width_sq,
            } => {
                let d = u - center;
                amplitude * (-d * d / width_sq).exp()
            }
            Self::Zero => 0.0,
            Self::Constant { amplitude } => *amplitude,
            Self::Table { points } => table_interp(points, u),
        }
    }

    /// Upper bound on `|f'|` over `[lo, hi]` (with `0 <= lo <= hi`).
    ///
    /// Used only by the continuity checks on the H functional; continuity of H
    /// does not need f to be Lipschitz.
    pub fn lipschitz_bound(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Self::Hill { alpha } => {
                let a = *alpha;
                let slope = |u: f64| {
                    if u <= 0.0 {
                        return if a == 1.0 {
                            4.0
                        } else if a < 1.0 {
                            f64::INFINITY
                        } else {
                            0.0
                        };
                    }
                    let ua = u.powf(a);
                    4.0 * a * ua / u / (1.0 + ua).powi(2)
                };
                let mut best = slope(lo).max(slope(hi));
                if a > 1.0 {
                    let peak = ((a - 1.0) / (a + 1.0)).powf(1.0 / a);
                    if peak > lo && peak < hi {
                        best = best.max(slope(peak));
                    }
                }
                best
            }
            Self::ArctanSine { alpha } => 4.0 * alpha,
            Self::GaussianBump {
                amplitude,
                width_sq,
                ..
            } => amplitude * (2.0 / width_sq).sqrt() * (-0.5f64).exp(),
            Self::Zero | Self::Constant { .. } => 0.0,
            Self::Table { points } => points
                .windows(2)
                .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                .fold(0.0, f64::max),
        }
    }
}

fn table_interp(points: &[(f64, f64)], u: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if u <= first.0 {
        return first.1;
    }
    if u >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= u);
    let (u0, f0) = points[i - 1];
    let (u1, f1) = points[i];
    f0 + (f1 - f0) * (u - u0) / (u1 - u0)
}

/// Uniform time grid on which both delays are whole numbers of steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub h: f64,
    /// `tau0 / h`.
    pub lag0: usize,
    /// `tau / h`; a history segment has `lag + 1` samples.
    pub lag: usize,
}

impl Grid {
    pub fn new(p: &Parameters, h: f64) -> Result<Self> {
        p.validate()?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Incommensurate(format!(
                "step must be positive, got {h}"
            )));
        }
        let lag0 = whole_steps(p.tau0, h).ok_or_else(|| {
            Error::Incommensurate(format!("tau0 = {} is not a multiple of h = {h}", p.tau0))
        })?;
        let lag = whole_steps(p.tau, h).ok_or_else(|| {
            Error::Incommensurate(format!("tau = {} is not a multiple of h = {h}", p.tau))
        })?;
        if lag < 4 || lag0 < 1 || lag <= lag0 {
            return Err(Error::Incommensurate(format!(
                "grid too coarse: tau/h = {lag}, tau0/h = {lag0} (need tau/h >= 4)"
            )));
        }
        // snap h so that lag * h reproduces tau as closely as possible
        Ok(Self {
            h: p.tau / lag as f64,
            lag0,
            lag,
        })
    }

    /// Largest commensurate step not exceeding `h_max`.
    pub fn finest_within(p: &Parameters, h_max: f64) -> Result<Self> {
        p.validate()?;
        let start = (p.tau / h_max).ceil().max(4.0) as usize;
        for lag in start..start.saturating_mul(64).max(start + 100_000) {
            let h = p.tau / lag as f64;
            if whole_steps(p.tau0, h).is_some() {
                return Self::new(p, h);
            }
        }
        Err(Error::Incommensurate(format!(
            "no commensurate step below {h_max} for tau0 = {}, tau = {}",
            p.tau0, p.tau
        )))
    }

    /// `tau1 / h`.
    #[inline]
    pub fn lag1(&self) -> usize {
        self.lag - self.lag0
    }

    /// Number of samples in a history segment.
    #[inline]
    pub fn segment_len(&self) -> usize {
        self.lag + 1
    }

    /// Halve the step (same delays).
    pub fn refined(&self) -> Self {
        Self {
            h: self.h / 2.0,
            lag0: self.lag0 * 2,
            lag: self.lag * 2,
        }
    }
}

fn whole_steps(span: f64, h: f64) -> Option<usize> {
    let r = span / h;
    let n = r.round();
    (n >= 1.0 && (r - n).abs() <= COMMENSURATE_TOL * r.max(1.0)).then_some(n as usize)
}
