//! Scalar numeric kernels shared by the channel, reliability and optimizer
//! modules: both real branches of the Lambert W function, a grid-bracketed
//! golden-section minimizer, bisection, and decibel conversions.
//!
//! Everything here is pure and allocation-free apart from the minimizer's
//! sample grid.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// `-1/e`, the common branch point of the two real Lambert W branches.
pub const BRANCH_POINT: f64 = -1.0 / E;

/// Samples used by [`minimize_scalar`] to bracket the global minimum.
pub const DEFAULT_GRID_SAMPLES: usize = 1024;

const HALLEY_MAX_ITER: usize = 64;
const HALLEY_RESIDUAL: f64 = 1e-14;
// Inputs this close below -1/e are treated as rounding noise on the branch point.
const BRANCH_SLACK: f64 = 4.0 * f64::EPSILON;

/// Real branch of the Lambert W function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// `W₀`, defined on `[-1/e, ∞)` with values `≥ -1`.
    Principal,
    /// `W₋₁`, defined on `[-1/e, 0)` with values `≤ -1`.
    MinusOne,
}

impl Branch {
    pub fn contains(self, x: f64) -> bool {
        if !(x >= BRANCH_POINT - BRANCH_SLACK) {
            return false;
        }
        match self {
            Branch::Principal => x.is_finite(),
            Branch::MinusOne => x < 0.0,
        }
    }
}

/// Solves `w·eʷ = x` on the requested branch by Halley iteration.
///
/// The residual `|w·eʷ - x|` is driven below `1e-14·|x|` or until the step
/// stalls at machine precision, whichever comes first.
pub fn lambert_w(branch: Branch, x: f64) -> Result<f64> {
    if !branch.contains(x) {
        return Err(Error::Domain(format!(
            "lambert_w({branch:?}) undefined at x = {x}"
        )));
    }
    if x <= BRANCH_POINT {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }

    let mut w = initial_guess(branch, x);
    for _ in 0..HALLEY_MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 || f.abs() <= HALLEY_RESIDUAL * x.abs() {
            break;
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let next = w - f / denom;
        let settled = (next - w).abs() <= 2.0 * f64::EPSILON * next.abs().max(1.0);
        w = next;
        if settled {
            break;
        }
    }

    Ok(match branch {
        Branch::Principal => w.max(-1.0),
        Branch::MinusOne => w.min(-1.0),
    })
}

fn initial_guess(branch: Branch, x: f64) -> f64 {
    // Puiseux expansion about the branch point.
    let p = (2.0 * E * (x - BRANCH_POINT)).max(0.0).sqrt();
    match branch {
        Branch::Principal => {
            if x < -0.25 {
                -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
            } else if x < 3.0 {
                x.ln_1p()
            } else {
                let l1 = x.ln();
                let l2 = l1.ln();
                l1 - l2 + l2 / l1
            }
        }
        Branch::MinusOne => {
            if x < -0.25 {
                -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p * p * p
            } else {
                let l1 = (-x).ln();
                let l2 = (-l1).ln();
                l1 - l2 + l2 / l1
            }
        }
    }
}

/// `W₋₁(-e^ℓ)` for `ℓ ≤ -1`, evaluated without forming `e^ℓ`.
///
/// Used when the argument of `W₋₁` is so close to zero that it underflows,
/// e.g. `-z·e^{-z}` with `z` around `1e-300`.
pub fn lambert_w_minus_one_neg_exp(log_neg_x: f64) -> Result<f64> {
    if !(log_neg_x <= -1.0 + BRANCH_SLACK) {
        return Err(Error::Domain(format!(
            "lambert_w(MinusOne) undefined at x = -exp({log_neg_x})"
        )));
    }
    if log_neg_x > -40.0 {
        return lambert_w(Branch::MinusOne, -log_neg_x.exp());
    }
    // w + ln(-w) = ℓ on w ≤ -1, Newton from the asymptotic expansion.
    let mut w = log_neg_x - (-log_neg_x).ln();
    for _ in 0..HALLEY_MAX_ITER {
        let g = w + (-w).ln() - log_neg_x;
        let next = w - g / (1.0 + 1.0 / w);
        let settled = (next - w).abs() <= 2.0 * f64::EPSILON * next.abs();
        w = next;
        if settled {
            break;
        }
    }
    Ok(w.min(-1.0))
}

/// Global minimizer of `f` on `[lo, hi]`: coarse grid bracketing with
/// [`DEFAULT_GRID_SAMPLES`] points, then golden-section refinement.
///
/// Non-finite objective values are treated as `+∞`, so `f` may signal
/// infeasible points by returning `f64::INFINITY` or NaN.
pub fn minimize_scalar<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    minimize_scalar_with_grid(f, lo, hi, tol, DEFAULT_GRID_SAMPLES)
}

pub fn minimize_scalar_with_grid<F>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    samples: usize,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain(format!("empty interval [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let samples = samples.max(3);
    let eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let step = (hi - lo) / (samples - 1) as f64;
    let at = |i: usize| if i == samples - 1 { hi } else { lo + step * i as f64 };

    let mut best_i = 0;
    let mut best_f = f64::INFINITY;
    for i in 0..samples {
        let v = eval(at(i));
        if v < best_f {
            best_f = v;
            best_i = i;
        }
    }
    if !best_f.is_finite() {
        return Err(Error::NoFiniteSample { lo, hi });
    }

    let a = at(best_i.saturating_sub(1));
    let b = at((best_i + 1).min(samples - 1));
    let (gx, gf) = golden_section(&eval, a, b, tol);
    if gf < best_f {
        Ok((gx, gf))
    } else {
        Ok((at(best_i), best_f))
    }
}

fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        if x1 >= x2 {
            break;
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Bisection root of `f` on `[lo, hi]`, stopping once the bracket is no
/// wider than `tol` (or cannot be split further in `f64`).
pub fn find_root<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.signum() * f_hi.signum() < 0.0) {
        return Err(Error::NoSignChange { lo, hi });
    }
    while hi - lo > tol {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + 0.5 * (hi - lo))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn residual(w: f64, x: f64) -> f64 {
        (w * w.exp() - x).abs() / x.abs().max(1.0)
    }

    #[test]
    fn lambert_identities() {
        assert_eq!(lambert_w(Branch::Principal, 0.0).unwrap(), 0.0);
        assert!((lambert_w(Branch::Principal, E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(lambert_w(Branch::Principal, BRANCH_POINT).unwrap(), -1.0);
        assert_eq!(lambert_w(Branch::MinusOne, BRANCH_POINT).unwrap(), -1.0);
        // W₋₁(-2e⁻²) = -2
        let x = -2.0 * (-2.0f64).exp();
        assert!((lambert_w(Branch::MinusOne, x).unwrap() + 2.0).abs() < 1e-13);
        // W₀(-0.5e^-0.5) = -0.5
        let x = -0.5 * (-0.5f64).exp();
        assert!((lambert_w(Branch::Principal, x).unwrap() + 0.5).abs() < 1e-14);
    }

    #[test]
    fn lambert_domain_errors() {
        assert!(lambert_w(Branch::Principal, -0.4).is_err());
        assert!(lambert_w(Branch::MinusOne, -0.4).is_err());
        assert!(lambert_w(Branch::MinusOne, 0.0).is_err());
        assert!(lambert_w(Branch::MinusOne, 1.0).is_err());
        assert!(lambert_w(Branch::Principal, f64::NAN).is_err());
        assert!(lambert_w(Branch::Principal, f64::INFINITY).is_err());
    }

    #[test]
    fn lambert_large_and_tiny() {
        for &x in &[1e-300, 1e-20, 1e10, 1e100, 1e300] {
            let w = lambert_w(Branch::Principal, x).unwrap();
            assert!(residual(w, x) <= 1e-12, "x={x} w={w}");
        }
        for &x in &[-1e-300, -1e-100, -1e-20, -1e-3] {
            let w = lambert_w(Branch::MinusOne, x).unwrap();
            assert!(w <= -1.0);
            assert!((w * w.exp() / x - 1.0).abs() <= 1e-12, "x={x} w={w}");
        }
    }

    #[test]
    fn log_domain_minus_one_agrees_with_direct() {
        for &l in &[-1.0, -1.5, -5.0, -39.0, -41.0, -100.0, -600.0] {
            let direct = lambert_w(Branch::MinusOne, -f64::exp(l)).unwrap();
            let logged = lambert_w_minus_one_neg_exp(l).unwrap();
            assert!((direct - logged).abs() <= 1e-12 * direct.abs(), "l={l}");
        }
        // far beyond f64 underflow: w + ln(-w) = ℓ still holds
        let l = -1e5;
        let w = lambert_w_minus_one_neg_exp(l).unwrap();
        assert!((w + (-w).ln() - l).abs() <= 1e-9);
        assert!(lambert_w_minus_one_neg_exp(-0.5).is_err());
    }

    proptest! {
        #[test]
        fn principal_residual(t in -12.0f64..12.0) {
            let x = 10f64.powf(t);
            let w = lambert_w(Branch::Principal, x).unwrap();
            prop_assert!(w >= -1.0);
            prop_assert!(residual(w, x) <= 1e-12);
        }

        #[test]
        fn negative_residual_both_branches(s in 0.0f64..1.0) {
            let x = BRANCH_POINT * s;
            let w0 = lambert_w(Branch::Principal, x).unwrap();
            prop_assert!(w0 >= -1.0 && residual(w0, x) <= 1e-12);
            if x < 0.0 {
                let wm = lambert_w(Branch::MinusOne, x).unwrap();
                prop_assert!(wm <= -1.0 && residual(wm, x) <= 1e-12);
            }
        }
    }

    #[test]
    fn minimize_quadratic_and_boundary() {
        let (x, fx) = minimize_scalar(|x| (x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-9).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx < 1e-15);

        let (x, fx) = minimize_scalar(|x| x, 0.0, 1.0, 1e-9).unwrap();
        assert_eq!(x, 0.0);
        assert_eq!(fx, 0.0);

        let (x, _) = minimize_scalar(|x| -x, 0.0, 1.0, 1e-9).unwrap();
        assert_eq!(x, 1.0);
    }

    #[test]
    fn minimize_skips_non_finite_regions() {
        let f = |x: f64| if x < 0.6 { f64::NAN } else { (x - 0.7).powi(2) };
        let (x, _) = minimize_scalar(f, 0.0, 1.0, 1e-10).unwrap();
        assert!((x - 0.7).abs() < 1e-8);

        let err = minimize_scalar(|_| f64::INFINITY, 0.0, 1.0, 1e-9).unwrap_err();
        assert!(matches!(err, Error::NoFiniteSample { .. }));
        assert!(minimize_scalar(|x| x, 1.0, 0.0, 1e-9).is_err());
    }

    #[test]
    fn minimize_finds_global_not_local() {
        // local minimum near 0.2, global near 0.8
        let f = |x: f64| (x - 0.2).powi(2).min((x - 0.8).powi(2) - 0.01);
        let (x, _) = minimize_scalar(f, 0.0, 1.0, 1e-10).unwrap();
        assert!((x - 0.8).abs() < 1e-8);
    }

    #[test]
    fn minimize_is_deterministic() {
        let f = |x: f64| (3.0 * x).sin() + x * x;
        let a = minimize_scalar(f, -2.0, 2.0, 1e-12).unwrap();
        let b = minimize_scalar(f, -2.0, 2.0, 1e-12).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
    }

    #[test]
    fn bisection_examples() {
        assert!((find_root(|x| x - 2.0, 0.0, 5.0, 1e-12).unwrap() - 2.0).abs() < 1e-12);
        assert!((find_root(f64::cos, 1.0, 2.0, 1e-14).unwrap() - FRAC_PI_2).abs() < 1e-13);
        assert!((find_root(f64::sin, 3.0, 4.0, 0.0).unwrap() - PI).abs() < 1e-15);
        assert!(matches!(
            find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-9),
            Err(Error::NoSignChange { .. })
        ));
        assert_eq!(find_root(|x| x, 0.0, 1.0, 1e-9).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn bisection_contract(root in -10.0f64..10.0, scale in 0.1f64..10.0) {
            let f = |x: f64| scale * (x - root).powi(3);
            let (lo, hi) = (-11.0, 11.0);
            let r = find_root(f, lo, hi, 1e-10).unwrap();
            prop_assert!(r >= lo && r <= hi);
            prop_assert!(f(r).abs() <= f(lo).abs() + f(hi).abs());
            prop_assert!((r - root).abs() <= 1e-9);
        }
    }

    #[test]
    fn decibels() {
        assert!((db_to_linear(20.0) - 100.0).abs() < 1e-12);
        assert!((linear_to_db(1000.0) - 30.0).abs() < 1e-12);
        assert!((dbm_to_watts(-40.0) - 1e-7).abs() < 1e-20);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
    }
}
