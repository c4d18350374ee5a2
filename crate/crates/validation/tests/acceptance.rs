//! Acceptance suite. Prints one `criterion N: PASS|FAIL` line per criterion and
//! exits nonzero when any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twodelay::quadrature::node_derivatives;
use twodelay::{
    n_omega_sweep, omega_limit, run_counterexample, self_convergence, CounterexampleSpec, Family,
    Grid, HistorySegment, Model, Nonlinearity, Parameters, RandomGShape, SweepConfig,
};

/// Prints the criterion line; true when it passed within the time limit.
fn report(n: u32, pass: bool, elapsed: Duration, limit_s: f64, detail: String) -> bool {
    let ok = pass && elapsed.as_secs_f64() < limit_s;
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!(
        "criterion {n}: {verdict} ({:.2} s, limit {limit_s} s) {detail}",
        elapsed.as_secs_f64()
    );
    ok
}

fn hill3_diagram() -> Model {
    let p = Parameters::diagram();
    Model::on_grid(
        p,
        Nonlinearity::Hill { alpha: 3.0 },
        Grid::finest_within(&p, p.tau0 / 20.0).unwrap(),
    )
    .unwrap()
}

fn d0_segment(m: &Model, seed: u64) -> HistorySegment {
    let g = m.random_g(seed, &RandomGShape::default()).unwrap();
    m.build_d0_segment(&g).unwrap()
}

/// 20 segments in D: every fourth on D0, the rest lifted to `H0` in `[0.02, 2]`.
fn d_ensemble(m: &Model) -> Vec<HistorySegment> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..20)
        .map(|i| {
            let base = d0_segment(m, 100 + i);
            if i % 4 == 0 {
                base
            } else {
                m.lift_h0(&base, rng.gen_range(0.02..2.0)).unwrap()
            }
        })
        .collect()
}

fn criterion_01_02_first_integral_and_positivity() -> [bool; 2] {
    let start = Instant::now();
    let m = hill3_diagram();
    let t_end = 50.0 * m.params.tau;
    let mut worst_ratio = 0.0f64;
    let mut min_u = f64::INFINITY;
    let mut strict = true;
    for phi in d_ensemble(&m) {
        let h0 = m.h0(&phi).unwrap();
        let tr = m.integrate_steps(&phi, t_end).unwrap();
        let drift = tr
            .forward()
            .iter()
            .filter_map(|s| s.first_integral)
            .map(|f| (f - h0).abs())
            .fold(0.0, f64::max);
        worst_ratio = worst_ratio.max(drift / (1e-6 * (1.0 + h0.abs())));
        let lowest = tr.values().fold(f64::INFINITY, f64::min);
        min_u = min_u.min(lowest);
        if h0 > 0.01 {
            strict &= tr.forward().iter().all(|s| s.u > 0.0);
        }
    }
    let elapsed = start.elapsed();
    let first_integral = report(
        1,
        worst_ratio <= 1.0,
        elapsed,
        10.0,
        format!("max |F - H0| / (1e-6 (1 + |H0|)) = {worst_ratio:.3e}"),
    );
    let positivity = report(
        2,
        min_u >= -1e-9 && strict,
        elapsed,
        10.0,
        format!("min u = {min_u:.6e}, strictly positive when H0 > 0.01: {strict}"),
    );
    [first_integral, positivity]
}

fn criterion_03_geometric_decay() -> bool {
    let start = Instant::now();
    let m = hill3_diagram();
    let ratio = (-m.params.gamma * m.params.tau).exp();
    let mut worst = 0.0f64;
    // H0 > 0 members only
    for phi in d_ensemble(&m)
        .into_iter()
        .filter(|phi| m.h0(phi).unwrap() > 0.01)
    {
        let h0 = m.h0(&phi).unwrap();
        for (n, seg) in m.iterate_t(&phi, 50, None).unwrap().iter().enumerate() {
            let expected = ratio.powi(n as i32 + 1) * h0;
            worst = worst.max((m.h0(seg).unwrap() - expected).abs() / expected);
        }
    }
    report(
        3,
        worst <= 1e-7,
        start.elapsed(),
        f64::INFINITY,
        format!("max relative error = {worst:.3e}"),
    )
}

fn criterion_04_gluing() -> bool {
    let start = Instant::now();
    let m = hill3_diagram();
    let (lag, t_end) = (m.grid.lag, 10.0 * m.params.tau);
    let (mut vs_renewal, mut vs_steps) = (0.0f64, 0.0f64);
    for seed in 0..10 {
        let u0 = d0_segment(&m, seed);
        let glued: Vec<f64> = m
            .iterate_t(&u0, 10, None)
            .unwrap()
            .iter()
            .enumerate()
            .flat_map(|(n, seg)| seg.values[usize::from(n > 0)..].to_vec())
            .collect();
        let renewal = m.integrate_renewal(&u0, t_end).unwrap();
        let steps = m.integrate_steps(&u0, t_end).unwrap();
        for (k, v) in glued.iter().enumerate() {
            vs_renewal = vs_renewal.max((v - renewal.at_step(k)).abs());
            vs_steps = vs_steps.max((v - steps.at_step(k)).abs());
        }
        assert_eq!(glued.len(), 10 * lag + 1);
    }
    report(
        4,
        vs_renewal <= 1e-12 && vs_steps <= 1e-7,
        start.elapsed(),
        f64::INFINITY,
        format!("max |glued - renewal| = {vs_renewal:.3e}, max |glued - steps| = {vs_steps:.3e}"),
    )
}

fn criterion_05_uniform_bound() -> bool {
    let start = Instant::now();
    let p = Parameters::diagram();
    let grid = Grid::finest_within(&p, p.tau0 / 20.0).unwrap();
    let mut worst_excess = f64::NEG_INFINITY;
    for alpha in [0.5, 3.0, 8.0] {
        let m = Model::on_grid(p, Nonlinearity::Hill { alpha }, grid).unwrap();
        for seed in 0..10 {
            let u0 = d0_segment(&m, seed);
            let h0 = m.h0(&u0).unwrap();
            let bound = h0 + p.tau1() * 4.0 + 1e-6;
            for seg in m.iterate_t(&u0, 600, None).unwrap() {
                worst_excess = worst_excess.max(seg.sup_norm() - bound);
            }
        }
    }
    report(
        5,
        worst_excess <= 0.0,
        start.elapsed(),
        60.0,
        format!("max (||T^n u|| - bound) = {worst_excess:.4}"),
    )
}

fn criterion_06_d0_construction() -> bool {
    let start = Instant::now();
    let mut worst_h0 = 0.0f64;
    let mut worst_slope = 0.0f64;
    let mut built = 0;
    for (gamma, tau0) in [(0.005, 0.1), (0.5, 0.6)] {
        let p = Parameters::new(gamma, tau0, 1.0).unwrap();
        let grid = Grid::new(&p, 0.005).unwrap();
        let m = Model::on_grid(p, Nonlinearity::Hill { alpha: 3.0 }, grid).unwrap();
        for seed in 0..50 {
            let g = m.random_g(seed, &RandomGShape::default()).unwrap();
            let u = m.build_d0_segment(&g).unwrap();
            built += 1;
            worst_h0 = worst_h0.max(m.h0(&u).unwrap().abs() / (1e-8 * (1.0 + u.sup_norm())));
            // left derivative at 0 against the right-hand side of the equation at 0
            let left = *node_derivatives(&u.values, grid.h).last().unwrap();
            let f = |v: f64| m.nl.eval(v).unwrap();
            let rhs = -gamma * u.last() + f(u.values[grid.lag1()]) - f(u.values[0]) * p.survival();
            worst_slope = worst_slope.max((left - rhs).abs() / (5.0 * grid.h));
        }
    }
    report(
        6,
        built == 100 && worst_h0 <= 1.0 && worst_slope <= 1.0,
        start.elapsed(),
        10.0,
        format!("max |H0| / tol = {worst_h0:.3e}, max slope mismatch / 5h = {worst_slope:.3e}"),
    )
}

fn criterion_07_counterexample() -> bool {
    let start = Instant::now();
    let reference = run_counterexample(&CounterexampleSpec::reference()).unwrap();
    let errors: Vec<f64> = [0.02, 0.01, 0.005, 0.0025]
        .iter()
        .map(|&d| {
            let run = run_counterexample(&CounterexampleSpec::reference().with_delta(d)).unwrap();
            (run.u_tau - run.limit_u_tau).abs()
        })
        .collect();
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let last = errors[errors.len() - 1];
    report(
        7,
        reference.u_tau < 0.0 && decreasing && last <= 0.05,
        start.elapsed(),
        20.0,
        format!(
            "u(tau) at delta = 0.005: {:.6}; |u(tau) + 1/e| over delta = 0.02..0.0025: {errors:.4?}; \
             decreasing: {decreasing}; final {last:.4} (needs <= 0.05)",
            reference.u_tau
        ),
    )
}

fn criterion_08_omega_limit_in_d0() -> bool {
    let start = Instant::now();
    let m = hill3_diagram();
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let u0 = d0_segment(&m, seed);
        for seg in omega_limit(&m, &u0, 600, 100).unwrap() {
            worst = worst.max(m.h0(&seg).unwrap().abs() / (1e-6 * (1.0 + seg.sup_norm())));
        }
    }
    report(
        8,
        worst <= 1.0,
        start.elapsed(),
        60.0,
        format!("max |H0| / tol = {worst:.3e}"),
    )
}

fn criterion_09_stable_singleton() -> bool {
    let start = Instant::now();
    let p = Parameters::diagram();
    let cfg = SweepConfig::new(p, Family::Hill, vec![0.5], 4);
    let res = n_omega_sweep(&cfg).unwrap();
    let norms = &res.per_alpha[0].norms;
    let spread = norms[norms.len() - 1] - norms[0];
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    let grid = cfg.grid().unwrap();
    let star = Model::on_grid(p, Nonlinearity::Hill { alpha: 0.5 }, grid)
        .unwrap()
        .steady_state()
        .unwrap();
    let target = p.tau * star;
    report(
        9,
        spread < 1e-4 && (mean - target).abs() <= 1e-3 * target,
        start.elapsed(),
        60.0,
        format!(
            "{} norms, spread = {spread:.3e}, mean = {mean:.8}, tau u* = {target:.8}, label {}",
            norms.len(),
            res.per_alpha[0].label
        ),
    )
}

fn criterion_10_convergence_order() -> bool {
    let start = Instant::now();
    let p = Parameters::new(1.0, 0.1, 1.0).unwrap();
    // steps tau0/10, tau0/20, tau0/40
    let fine = Model::new(p, Nonlinearity::Hill { alpha: 3.0 }, p.tau0 / 40.0).unwrap();
    let report_ = self_convergence(&fine, &d0_segment(&fine, 42), 5.0 * p.tau).unwrap();
    let (steps, renewal) = (report_.method_of_steps.order, report_.renewal.order);
    report(
        10,
        steps >= 3.5 && renewal >= 3.5,
        start.elapsed(),
        10.0,
        format!(
            "observed order: steps {steps:.3} (diffs {:.3e}, {:.3e}), renewal {renewal:.3} (diffs {:.3e}, {:.3e})",
            report_.method_of_steps.coarse_diff,
            report_.method_of_steps.fine_diff,
            report_.renewal.coarse_diff,
            report_.renewal.fine_diff
        ),
    )
}

fn main() {
    let mut results = criterion_01_02_first_integral_and_positivity().to_vec();
    results.extend([
        criterion_03_geometric_decay(),
        criterion_04_gluing(),
        criterion_05_uniform_bound(),
        criterion_06_d0_construction(),
        criterion_07_counterexample(),
        criterion_08_omega_limit_in_d0(),
        criterion_09_stable_singleton(),
        criterion_10_convergence_order(),
    ]);
    let failed = results.iter().filter(|ok| !**ok).count();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
