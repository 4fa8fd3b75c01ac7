//! Finite-difference weights and derivatives on one-dimensional grids.

/// Fornberg weights for derivatives `0..=max_order` at `x0` from nodes `xs`.
/// Returns `w[m][j]`, the weight of node `j` in the `m`-th derivative.
pub fn fornberg_weights(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Stencil node indices of width `width` around `i`, shifted inside `0..n`.
pub fn stencil_window(i: usize, n: usize, width: usize) -> std::ops::Range<usize> {
    let width = width.min(n);
    let half = width / 2;
    let start = i.saturating_sub(half).min(n - width);
    start..start + width
}

/// `order`-th derivative of samples on a (possibly nonuniform) grid with a
/// `width`-point stencil, one-sided near the ends.
pub fn derivative(xs: &[f64], values: &[f64], order: usize, width: usize) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let win = stencil_window(i, n, width);
            let w = fornberg_weights(xs[i], &xs[win.clone()], order);
            win.clone().zip(&w[order]).map(|(j, wj)| wj * values[j]).sum()
        })
        .collect()
}

/// Same as [`derivative`] for complex samples.
pub fn derivative_complex(
    xs: &[f64],
    values: &[num_complex::Complex64],
    order: usize,
    width: usize,
) -> Vec<num_complex::Complex64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let win = stencil_window(i, n, width);
            let w = fornberg_weights(xs[i], &xs[win.clone()], order);
            win.clone().zip(&w[order]).map(|(j, wj)| values[j] * *wj).sum()
        })
        .collect()
}

/// Composite trapezoid rule.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Running trapezoid integral starting at zero.
pub fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..xs.len() {
        acc += 0.5 * (xs[k] - xs[k - 1]) * (ys[k] + ys[k - 1]);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn central_second_derivative_weights() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[2][0] - 1.0).abs() < 1e-14);
        assert!((w[2][1] + 2.0).abs() < 1e-14);
        assert!((w[1][2] - 0.5).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn weights_are_exact_for_polynomials(x0 in -1.0f64..1.0, shift in 0.1f64..0.9) {
            let xs: Vec<f64> = (0..5).map(|k| k as f64 * 0.5 - 1.0 + shift * 0.3).collect();
            let w = fornberg_weights(x0, &xs, 3);
            // cubic p(x) = x^3 - 2x, so p' = 3x^2 - 2, p'' = 6x, p''' = 6
            let p: Vec<f64> = xs.iter().map(|x| x * x * x - 2.0 * x).collect();
            let d = |m: usize| w[m].iter().zip(&p).map(|(a, b)| a * b).sum::<f64>();
            prop_assert!((d(1) - (3.0 * x0 * x0 - 2.0)).abs() < 1e-9);
            prop_assert!((d(2) - 6.0 * x0).abs() < 1e-8);
            prop_assert!((d(3) - 6.0).abs() < 1e-7);
        }
    }
}
