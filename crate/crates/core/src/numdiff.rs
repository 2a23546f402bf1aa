//! Finite-difference derivatives with Richardson extrapolation.
//!
//! These are used only to cross-check the closed-form derivatives; nothing
//! in the analytic path depends on them.

/// Initial step `1e-3 * max(1, |x|)`.
pub fn initial_step(x: f64) -> f64 {
    1e-3 * x.abs().max(1.0)
}

/// Central-difference derivative of order 1 or 2 with two Richardson
/// refinement levels (steps `h`, `h/2`, `h/4`). The error of the base
/// formula is even in `h`, so the levels cancel the `h²` and `h⁴` terms.
pub fn central(f: impl Fn(f64) -> f64, x: f64, order: u32) -> f64 {
    central_with_step(f, x, order, initial_step(x))
}

/// [`central`] from a caller-chosen initial step. Second derivatives at
/// `1e-8` relative accuracy need a step near `1e-2`, where the `h^-2`
/// amplification of rounding error stays below the target.
pub fn central_with_step(f: impl Fn(f64) -> f64, x: f64, order: u32, h: f64) -> f64 {
    let base = |h: f64| match order {
        1 => (f(x + h) - f(x - h)) / (2.0 * h),
        2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        _ => panic!("central differences implemented for orders 1 and 2 only"),
    };
    extrapolate([base(h), base(h / 2.0), base(h / 4.0)], 2)
}

/// One-sided variant for points at the edge of the domain, such as `s = 0`
/// for an LST. The stencils are second order with error `c2 h² + c3 h³ + ..`,
/// so the two levels cancel the `h²` and `h³` terms. The second-order
/// stencil divides by `h²` with larger weights, so it starts from a step
/// five times larger to keep rounding error near `1e-10`.
pub fn forward(f: impl Fn(f64) -> f64, x: f64, order: u32) -> f64 {
    let h = if order == 2 { 5.0 * initial_step(x) } else { initial_step(x) };
    let base = |h: f64| match order {
        1 => (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h),
        2 => (2.0 * f(x) - 5.0 * f(x + h) + 4.0 * f(x + 2.0 * h) - f(x + 3.0 * h)) / (h * h),
        _ => panic!("forward differences implemented for orders 1 and 2 only"),
    };
    extrapolate([base(h), base(h / 2.0), base(h / 4.0)], 1)
}

/// Two-level Richardson table over estimates at `h`, `h/2`, `h/4` whose
/// leading error terms are `h²` and `h^(2 + stride)`.
fn extrapolate(est: [f64; 3], stride: i32) -> f64 {
    let k1 = 2f64.powi(2);
    let r0 = (k1 * est[1] - est[0]) / (k1 - 1.0);
    let r1 = (k1 * est[2] - est[1]) / (k1 - 1.0);
    let k2 = 2f64.powi(2 + stride);
    (k2 * r1 - r0) / (k2 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_exp() {
        for x in [0.0_f64, 0.3, 2.0] {
            let e = x.exp();
            assert!((central(f64::exp, x, 1) - e).abs() < 1e-11 * e);
            assert!((central(f64::exp, x, 2) - e).abs() < 1e-8 * e);
            assert!((forward(f64::exp, x, 1) - e).abs() < 1e-10 * e);
            assert!((forward(f64::exp, x, 2) - e).abs() < 1e-8 * e);
        }
    }

    #[test]
    fn derivatives_of_rational() {
        let f = |s: f64| 2.0 / (2.0 + s);
        let d1 = |s: f64| -2.0 / (2.0 + s).powi(2);
        let d2 = |s: f64| 4.0 / (2.0 + s).powi(3);
        for x in [0.0, 0.1, 1.0, 10.0] {
            assert!((central(f, x, 1) / d1(x) - 1.0).abs() < 1e-10);
            assert!((central(f, x, 2) / d2(x) - 1.0).abs() < 1e-8);
        }
        assert!((forward(f, 0.0, 1) / d1(0.0) - 1.0).abs() < 1e-9);
        assert!((forward(f, 0.0, 2) / d2(0.0) - 1.0).abs() < 1e-8);
    }
}
