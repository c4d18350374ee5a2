//! Fourth-order rules on uniform nodes: composite quadrature weights, cubic
//! Hermite cells and finite-difference node derivatives.

/// Composite weights (already multiplied by `h`) for `n` uniform intervals.
///
/// Even `n` uses Simpson throughout. Odd `n >= 3` closes with one Simpson 3/8
/// panel on the last three intervals. `n = 1` is the trapezoid rule.
pub fn composite_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 1, "need at least one interval");
    let mut w = vec![0.0; n + 1];
    if n == 1 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let simpson_end = if n.is_multiple_of(2) { n } else { n - 3 };
    for panel in (0..simpson_end).step_by(2) {
        w[panel] += h / 3.0;
        w[panel + 1] += 4.0 * h / 3.0;
        w[panel + 2] += h / 3.0;
    }
    if simpson_end < n {
        let s = simpson_end;
        let c = 3.0 * h / 8.0;
        w[s] += c;
        w[s + 1] += 3.0 * c;
        w[s + 2] += 3.0 * c;
        w[s + 3] += c;
    }
    w
}

/// Integral of uniformly sampled values.
pub fn integrate(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => composite_weights(n - 1, h)
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum(),
    }
}

/// Cubic Hermite on one cell of width `h`, at fraction `theta` in `[0, 1]`.
#[inline]
pub fn hermite(y0: f64, d0: f64, y1: f64, d1: f64, h: f64, theta: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h * (h10 * d0 + h11 * d1) + h01 * y1
}

/// Cell midpoint of the cubic Hermite interpolant.
#[inline]
pub fn hermite_mid(y0: f64, d0: f64, y1: f64, d1: f64, h: f64) -> f64 {
    0.5 * (y0 + y1) + 0.125 * h * (d0 - d1)
}

/// Exact integral of the cubic Hermite interpolant over one cell.
#[inline]
pub fn hermite_cell_integral(y0: f64, d0: f64, y1: f64, d1: f64, h: f64) -> f64 {
    0.5 * h * (y0 + y1) + h * h * (d0 - d1) / 12.0
}

/// Weights (times `12 h`) for the derivative at point `m` of a five-point stencil.
const STENCIL: [[f64; 5]; 5] = [
    [-25.0, 48.0, -36.0, 16.0, -3.0],
    [-3.0, -10.0, 18.0, -6.0, 1.0],
    [1.0, -8.0, 0.0, 8.0, -1.0],
    [-1.0, 6.0, -18.0, 10.0, 3.0],
    [3.0, -16.0, 36.0, -48.0, 25.0],
];

/// Fourth-order finite-difference derivatives at every node (needs >= 5 nodes).
///
/// Each node picks, among the five-point stencils that contain it, the most
/// central one unless another is much smoother, measured by the two third
/// differences inside the stencil. Those are of order `h^2` instead of `h^3`
/// when the stencil straddles a node where the data is only `C^1`, so
/// derivatives next to such a node still come from one smooth side.
pub fn node_derivatives(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "need at least five nodes, got {n}");
    let y = values;
    let delta3 = |s: usize| (y[s + 3] - 3.0 * y[s + 2] + 3.0 * y[s + 1] - y[s]).abs();
    let roughness = |s: usize| delta3(s) + delta3(s + 1);
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(4);
            let hi = i.min(n - 5);
            let central = i.saturating_sub(2).clamp(lo, hi);
            let central_score = roughness(central);
            let mut best = (central, central_score);
            for s in lo..=hi {
                let score = roughness(s);
                if score < 0.25 * central_score && score < best.1 {
                    best = (s, score);
                }
            }
            let s = best.0;
            let w = &STENCIL[i - s];
            (0..5).map(|j| w[j] * y[s + j]).sum::<f64>() / (12.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn weights_integrate_cubics_exactly() {
        for n in [1usize, 2, 3, 4, 5, 7, 10, 13] {
            let h = 0.37;
            let xs: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
            let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x * x * x - x * x + 3.0).collect();
            let b = n as f64 * h;
            let exact = 0.5 * b.powi(4) - b.powi(3) / 3.0 + 3.0 * b;
            if n == 1 {
                let w = composite_weights(1, h);
                assert_abs_diff_eq!(w.iter().sum::<f64>(), h, epsilon = 1e-15);
            } else {
                assert_abs_diff_eq!(integrate(&ys, h), exact, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn hermite_reproduces_cubic() {
        let p = |x: f64| x * x * x - 2.0 * x + 1.0;
        let dp = |x: f64| 3.0 * x * x - 2.0;
        let (a, h) = (0.3, 0.2);
        for k in 0..=10 {
            let th = k as f64 / 10.0;
            let v = hermite(p(a), dp(a), p(a + h), dp(a + h), h, th);
            assert_abs_diff_eq!(v, p(a + th * h), epsilon = 1e-14);
        }
        assert_abs_diff_eq!(
            hermite_mid(p(a), dp(a), p(a + h), dp(a + h), h),
            p(a + 0.5 * h),
            epsilon = 1e-14
        );
        // integral of x^3 - 2x + 1 on [a, a+h]
        let prim = |x: f64| x.powi(4) / 4.0 - x * x + x;
        assert_abs_diff_eq!(
            hermite_cell_integral(p(a), dp(a), p(a + h), dp(a + h), h),
            prim(a + h) - prim(a),
            epsilon = 1e-15
        );
    }

    #[test]
    fn node_derivatives_fourth_order() {
        let err = |h: f64| {
            let ys: Vec<f64> = (0..=(1.0 / h).round() as usize)
                .map(|i| (i as f64 * h * 3.0).sin())
                .collect();
            node_derivatives(&ys, h)
                .iter()
                .enumerate()
                .map(|(i, d)| (d - 3.0 * (i as f64 * h * 3.0).cos()).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(0.02) / err(0.01)).log2();
        assert!(order > 3.7, "observed order {order}");
    }

    #[test]
    fn node_derivatives_fourth_order_across_kink() {
        // C^1 at x = 0.5 (second derivative jumps), which is a node
        let f = |x: f64| (2.0 * x).sin() + if x > 0.5 { (x - 0.5).powi(2) } else { 0.0 };
        let df = |x: f64| 2.0 * (2.0 * x).cos() + if x > 0.5 { 2.0 * (x - 0.5) } else { 0.0 };
        let err = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let ys: Vec<f64> = (0..=n).map(|i| f(i as f64 * h)).collect();
            node_derivatives(&ys, h)
                .iter()
                .enumerate()
                .map(|(i, d)| (d - df(i as f64 * h)).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(0.02) / err(0.01)).log2();
        assert!(order > 3.7, "observed order {order}");
    }

    #[test]
    fn node_derivatives_exact_on_quartics() {
        let p = |x: f64| x.powi(4) - 3.0 * x * x + x;
        let dp = |x: f64| 4.0 * x.powi(3) - 6.0 * x + 1.0;
        let h = 0.1;
        let ys: Vec<f64> = (0..12).map(|i| p(i as f64 * h)).collect();
        for (i, d) in node_derivatives(&ys, h).iter().enumerate() {
            assert_abs_diff_eq!(*d, dp(i as f64 * h), epsilon = 1e-11);
        }
    }
}
