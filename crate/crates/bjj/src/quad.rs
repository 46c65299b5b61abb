//! Small adaptive quadrature used by the jump-time statistics.

/// Adaptive Simpson integration of `f` over `[a, b]` to the given relative
/// tolerance (with a tiny absolute floor so zero integrals terminate).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let scale = whole.abs().max(1e-300);
    recurse(&f, a, b, fa, fm, fb, whole, rel_tol * scale, 50)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_and_exponential() {
        let i = adaptive_simpson(|x| x * x * x, 0.0, 2.0, 1e-12);
        assert_relative_eq!(i, 4.0, max_relative = 1e-12);
        let i = adaptive_simpson(|x| (-3.0 * x).exp(), 0.0, 10.0, 1e-10);
        assert_relative_eq!(i, (1.0 - (-30.0f64).exp()) / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn sharp_left_spike() {
        // Mass concentrated near the left endpoint, like a strong-loss
        // waiting-time density.
        let g = 2000.0;
        let i = adaptive_simpson(|x| g * (-g * x).exp(), 0.0, 1.0, 1e-9);
        assert_relative_eq!(i, 1.0, max_relative = 1e-8);
    }
}
