//! Near-diagonal Padé evaluation, rational construction, and branch-point
//! estimation from approximant poles.
//!
//! Point values come from Wynn's epsilon recursion on the partial sums of the
//! series: the even columns of the epsilon table are Padé values, and the
//! table head walks the `[k/k]` diagonal. The table is extended one
//! anti-diagonal at a time and the reported sequence ends at the deepest
//! diagonal entry that still satisfies the stopping rule, which keeps the
//! well-known post-convergence noise of deep epsilon columns out of the
//! result.
//!
//! The explicit Toeplitz construction is used for pole diagnostics: the
//! `[M/M]` denominator is assembled on a rescaled series variable (the raw
//! system's condition number grows with the coefficient growth rate) and its
//! roots are mapped back. Denominator roots that are cancelled by a nearby
//! numerator root (Froissart doublets) carry no information about the
//! function and are dropped.

use num_complex::Complex;
use thiserror::Error;

use crate::linsolve::dense_solve;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum PadeError {
    /// The Toeplitz accuracy-through-order system is singular; the caller
    /// should reduce `M`.
    #[error("degenerate Padé table for [{l}/{m}] (singular Toeplitz system)")]
    DegenerateTable { l: usize, m: usize },
    /// Root finding failed to settle (pathological coefficient data).
    #[error("denominator root iteration did not converge")]
    RootsNotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadeStatus {
    Converged,
    NotConverged,
}

impl PadeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PadeStatus::Converged => "converged",
            PadeStatus::NotConverged => "not_converged",
        }
    }
}

/// Result of a near-diagonal evaluation at one point.
#[derive(Debug, Clone)]
pub struct PadeResult<T> {
    /// Diagonal approximant values; entry `k` uses `2k+1` coefficients.
    pub values: Vec<Complex<T>>,
    pub status: PadeStatus,
    /// Converged value, or the deepest diagonal entry when not converged.
    pub final_value: Complex<T>,
    /// Denominator-root estimates, filled in by diagnostics when requested.
    pub pole_estimates: Option<Vec<Complex<T>>>,
}

/// Number of consecutive small diagonal steps required by the stopping rule.
const CONSECUTIVE_STEPS: usize = 3;

/// Epsilon-table denominator guard; differences below this magnitude are a
/// table breakdown and handled per the rules on [`eval_near_diagonal`].
const EPS_GUARD: f64 = 1e-290;

/// Evaluate a power series at `s` through the `[k/k]` diagonal of the Padé
/// table (Wynn epsilon on partial sums).
///
/// Converged means the last three diagonal values agree pairwise within
/// `tol` relative to `max(1, |value|)`, with three consecutive small steps
/// behind them. A series of all-zero coefficients evaluates to zero.
///
/// Guards: a partial sum equal to its predecessor (zero coefficient at this
/// `s`) is skipped, since it would put a zero denominator in the first
/// column; a breakdown between equal entries of a deeper even column means
/// two successive approximants agree exactly and is convergence; any other
/// breakdown cuts the current anti-diagonal at the offending entry.
pub fn eval_near_diagonal<T: Scalar>(coeffs: &[Complex<T>], s: Complex<T>, tol: T) -> PadeResult<T> {
    assert!(coeffs.len() >= 3, "need at least 3 coefficients");
    assert!(tol > T::zero(), "tolerance must be positive");

    let zero = Complex::new(T::zero(), T::zero());
    if coeffs.iter().all(|c| *c == zero) {
        return PadeResult {
            values: vec![zero],
            status: PadeStatus::Converged,
            final_value: zero,
            pole_estimates: None,
        };
    }
    // an exact constant or evaluation at the expansion point needs no table
    if coeffs[1..].iter().all(|c| *c == zero) || s == zero {
        return PadeResult {
            values: vec![coeffs[0]],
            status: PadeStatus::Converged,
            final_value: coeffs[0],
            pole_estimates: None,
        };
    }

    let guard = T::fr(EPS_GUARD).max(T::min_positive_value());
    let mut diag: Vec<Complex<T>> = Vec::with_capacity(coeffs.len() / 2 + 1);
    let mut small_run = 0usize;
    let mut converged_at: Option<usize> = None;

    // anti-diagonals of the epsilon table over distinct partial sums;
    // prev[k] = eps_k^{(m-1-k)} with m counting fed sums
    let mut prev: Vec<Complex<T>> = Vec::new();
    let mut fed: usize = 0;
    let mut partial = zero;
    let mut last_fed = zero;
    let mut absorbed_tail = 0usize;
    let mut s_pow = Complex::new(T::one(), T::zero());

    for &c in coeffs.iter() {
        partial = partial + c * s_pow;
        s_pow = s_pow * s;
        if !prev.is_empty() && (partial - last_fed).norm() < guard {
            absorbed_tail += 1;
            continue;
        }
        absorbed_tail = 0;
        last_fed = partial;

        let m = fed;
        fed += 1;
        let mut cur: Vec<Complex<T>> = Vec::with_capacity(m + 1);
        cur.push(partial);
        for k in 0..prev.len() {
            let denom = cur[k] - prev[k];
            if denom.norm() < guard {
                if k >= 2 && k % 2 == 0 {
                    // two successive approximant values agree exactly
                    diag.push(prev[k]);
                    return PadeResult {
                        values: diag,
                        status: PadeStatus::Converged,
                        final_value: prev[k],
                        pole_estimates: None,
                    };
                }
                break; // table breakdown: cut this anti-diagonal
            }
            let west = if k == 0 { zero } else { prev[k - 1] };
            cur.push(west + Complex::new(T::one(), T::zero()) / denom);
        }
        let full = cur.len() == m + 1;
        prev = cur;

        if full && m % 2 == 0 {
            let v = prev[m];
            diag.push(v);
            let k = diag.len() - 1;
            if k >= 1 {
                let scale = T::one().max(v.norm());
                let step = (diag[k] - diag[k - 1]).norm();
                if step < tol * scale {
                    small_run += 1;
                } else {
                    small_run = 0;
                }
                if small_run >= CONSECUTIVE_STEPS
                    && k >= 2
                    && (diag[k] - diag[k - 2]).norm() < tol * scale
                {
                    // the rule fired; keep scanning so the returned value is
                    // the deepest diagonal entry that still satisfies it
                    converged_at = Some(k);
                }
            }
        }
    }

    if let Some(k) = converged_at {
        // end the reported sequence at the deepest qualifying entry so the
        // last three values are the agreeing ones
        diag.truncate(k + 1);
        let final_value = diag[k];
        return PadeResult {
            values: diag,
            status: PadeStatus::Converged,
            final_value,
            pole_estimates: None,
        };
    }

    // The partial sums went bit-stable well before the stream ended: the
    // series summed to machine precision (direct summation inside the
    // convergence radius). Accept when the accelerated value agrees.
    let final_value = *diag.last().expect("at least one diagonal value");
    if absorbed_tail >= 3 && (final_value - partial).norm() < tol * T::one().max(final_value.norm()) {
        return PadeResult {
            values: diag,
            status: PadeStatus::Converged,
            final_value,
            pole_estimates: None,
        };
    }
    PadeResult { values: diag, status: PadeStatus::NotConverged, final_value, pole_estimates: None }
}

/// `[L/M]` numerator and denominator coefficients with `b_0 = 1`,
/// from the accuracy-through-order Toeplitz system.
pub fn rational_coefficients<T: Scalar>(
    coeffs: &[Complex<T>],
    l: usize,
    m: usize,
) -> Result<(Vec<Complex<T>>, Vec<Complex<T>>), PadeError> {
    assert!(l + m + 1 <= coeffs.len(), "need {} coefficients, have {}", l + m + 1, coeffs.len());
    let zero = Complex::new(T::zero(), T::zero());
    let at = |n: isize| -> Complex<T> {
        if n < 0 {
            zero
        } else {
            coeffs[n as usize]
        }
    };

    let mut den = vec![Complex::new(T::one(), T::zero())];
    if m > 0 {
        let mut a = vec![zero; m * m];
        let mut rhs = vec![zero; m];
        for i in 0..m {
            let n = (l + 1 + i) as isize;
            rhs[i] = -at(n);
            for j in 1..=m {
                a[i * m + (j - 1)] = at(n - j as isize);
            }
        }
        let b = dense_solve::<T, Complex<T>>(&mut a, &mut rhs)
            .ok_or(PadeError::DegenerateTable { l, m })?;
        den.extend(b);
    }

    let mut num = Vec::with_capacity(l + 1);
    for n in 0..=l {
        let mut acc = zero;
        for j in 0..=m.min(n) {
            acc = acc + den[j] * coeffs[n - j];
        }
        num.push(acc);
    }
    Ok((num, den))
}

/// Roots of the `[M/M]` denominator, sorted by modulus: the nearest ones
/// approximate the nearest branch points of the continued function.
///
/// The Toeplitz system is solved on a rescaled series variable and roots are
/// mapped back; denominator roots cancelled by a numerator root within
/// `1e-6` (Froissart doublets, pure round-off artifacts) are discarded.
pub fn estimate_branch_points<T: Scalar>(
    coeffs: &[Complex<T>],
    m: usize,
) -> Result<Vec<Complex<T>>, PadeError> {
    assert!(2 * m + 1 <= coeffs.len(), "need {} coefficients, have {}", 2 * m + 1, coeffs.len());
    let r = growth_scale(coeffs);
    let scaled: Vec<Complex<T>> = coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| *c * Complex::new(r.powi(n as i32), T::zero()))
        .collect();

    let (num, den) = rational_coefficients(&scaled, m, m)?;
    let mut poles = roots(&den)?;
    let zeros = roots(&num).unwrap_or_default();

    let doublet_tol = T::fr(1e-6);
    poles.retain(|p| {
        p.norm().is_finite()
            && !zeros
                .iter()
                .any(|z| (*z - *p).norm() < doublet_tol * T::one().max(p.norm()))
    });
    for p in poles.iter_mut() {
        *p = *p * Complex::new(r, T::zero());
    }
    poles.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).expect("finite moduli"));
    Ok(poles)
}

/// Per-order magnitude growth `g` with `|c_n| ~ g^n`, fitted on the tail;
/// the scaling substitutes `s -> s/g` so scaled coefficients stay O(1).
fn growth_scale<T: Scalar>(coeffs: &[Complex<T>]) -> T {
    let n0 = (coeffs.len() / 3).max(1);
    let pts: Vec<(T, T)> = coeffs
        .iter()
        .enumerate()
        .skip(n0)
        .filter(|(_, c)| c.norm() > T::zero())
        .map(|(n, c)| (T::fr(n as f64), c.norm().ln()))
        .collect();
    if pts.len() < 2 {
        return T::one();
    }
    let count = T::fr(pts.len() as f64);
    let mean_x = pts.iter().map(|p| p.0).fold(T::zero(), |a, b| a + b) / count;
    let mean_y = pts.iter().map(|p| p.1).fold(T::zero(), |a, b| a + b) / count;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (x, y) in pts {
        sxy = sxy + (x - mean_x) * (y - mean_y);
        sxx = sxx + (x - mean_x) * (x - mean_x);
    }
    if sxx == T::zero() {
        return T::one();
    }
    let slope = sxy / sxx;
    let g = slope.exp();
    if g.is_finite() && g > T::zero() {
        T::one() / g
    } else {
        T::one()
    }
}

const ABERTH_MAX_ITER: usize = 200;

/// Aberth–Ehrlich roots of a complex polynomial given by ascending
/// coefficients. Trailing near-zero coefficients are deflated first.
fn roots<T: Scalar>(poly: &[Complex<T>]) -> Result<Vec<Complex<T>>, PadeError> {
    let max_mag = poly.iter().map(|c| c.norm()).fold(T::zero(), T::max);
    if max_mag == T::zero() {
        return Ok(Vec::new());
    }
    let tiny = T::fr(1e-14) * max_mag;
    let mut deg = poly.len() - 1;
    while deg > 0 && poly[deg].norm() <= tiny {
        deg -= 1;
    }
    if deg == 0 {
        return Ok(Vec::new());
    }
    // monic normalization
    let lead = poly[deg];
    let monic: Vec<Complex<T>> = poly[..=deg].iter().map(|c| *c / lead).collect();

    // every root of the monic polynomial lies within the Cauchy bound
    let cauchy = T::one() + monic[..deg].iter().map(|c| c.norm()).fold(T::zero(), T::max);

    // seeds on a circle with radius set by the geometric mean of the roots
    let degf = T::fr(deg as f64);
    let r0 = {
        let c0 = monic[0].norm();
        if c0 > T::zero() {
            c0.powf(T::one() / degf).min(cauchy).max(T::fr(1e-3))
        } else {
            T::fr(0.5)
        }
    };
    let mut z: Vec<Complex<T>> = (0..deg)
        .map(|k| {
            let angle = T::fr(2.0) * T::PI() * T::fr(k as f64) / degf + T::fr(0.4);
            Complex::from_polar(r0, angle)
        })
        .collect();

    let eval = |x: Complex<T>| -> (Complex<T>, Complex<T>) {
        let mut v = Complex::new(T::zero(), T::zero());
        let mut d = Complex::new(T::zero(), T::zero());
        for c in monic.iter().rev() {
            d = d * x + v;
            v = v * x + *c;
        }
        (v, d)
    };

    let tol = T::fr(1e-13);
    for _ in 0..ABERTH_MAX_ITER {
        let mut max_step = T::zero();
        let mut healthy = true;
        for i in 0..deg {
            let (p, dp) = eval(z[i]);
            if p.norm() == T::zero() {
                continue;
            }
            if dp.norm() < T::min_positive_value() || !dp.norm().is_finite() {
                z[i] = z[i] * Complex::new(T::fr(0.9), T::fr(0.05));
                healthy = false;
                continue;
            }
            let newton = p / dp;
            let mut repulse = Complex::new(T::zero(), T::zero());
            for j in 0..deg {
                if j != i {
                    let d = z[i] - z[j];
                    if d.norm() < T::min_positive_value() {
                        continue;
                    }
                    repulse = repulse + Complex::new(T::one(), T::zero()) / d;
                }
            }
            let denom = Complex::new(T::one(), T::zero()) - newton * repulse;
            let step = if denom.norm() < T::fr(1e-12) { newton } else { newton / denom };
            z[i] = z[i] - step;
            let zn = z[i].norm();
            if !zn.is_finite() {
                z[i] = Complex::from_polar(cauchy, T::fr(0.7) * T::fr(i as f64 + 1.0));
                healthy = false;
                continue;
            }
            if zn > cauchy {
                // project escaped iterates back onto the root bound
                z[i] = z[i] * Complex::new(cauchy / zn, T::zero());
                healthy = false;
                continue;
            }
            max_step = max_step.max(step.norm() / T::one().max(zn));
        }
        if healthy && max_step < tol {
            return Ok(z);
        }
    }
    // loose fallback: accept if the polynomial nearly vanishes at all iterates
    let scale = monic.iter().map(|c| c.norm()).fold(T::zero(), T::max);
    if z
        .iter()
        .all(|&x| x.norm().is_finite() && eval(x).0.norm() < T::fr(1e-8) * scale * T::one().max(x.norm()).powi(deg as i32))
    {
        return Ok(z);
    }
    Err(PadeError::RootsNotConverged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn real_series(vals: &[f64]) -> Vec<Complex64> {
        vals.iter().map(|&v| c(v, 0.0)).collect()
    }

    /// Two-bus germ series built from the scalar embedded recursion
    /// `U[n] = sigma * W[n-1]`, independent of the series module.
    fn two_bus_series(sigma: Complex64, order: usize) -> Vec<Complex64> {
        let mut u = vec![c(0.0, 0.0); order + 1];
        let mut w = vec![c(0.0, 0.0); order + 1];
        u[0] = c(1.0, 0.0);
        w[0] = c(1.0, 0.0);
        for n in 1..=order {
            u[n] = sigma * w[n - 1];
            let mut acc = c(0.0, 0.0);
            for m in 1..=n {
                acc += u[m].conj() * w[n - m];
            }
            w[n] = -acc;
        }
        u
    }

    #[test]
    fn geometric_series_is_exact_at_k1() {
        let coeffs: Vec<Complex64> = (0..8).map(|n| c(0.5f64.powi(n), 0.0)).collect();
        let res = eval_near_diagonal(&coeffs, c(1.0, 0.0), 1e-10);
        assert_eq!(res.values[1], c(2.0, 0.0));
        assert_eq!(res.status, PadeStatus::Converged);
        assert!((res.final_value - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn all_zero_series_converges_to_zero() {
        let coeffs = vec![c(0.0, 0.0); 5];
        let res = eval_near_diagonal(&coeffs, c(1.0, 0.0), 1e-10);
        assert_eq!(res.status, PadeStatus::Converged);
        assert_eq!(res.final_value, c(0.0, 0.0));
    }

    #[test]
    fn constant_series_converges_immediately() {
        let mut coeffs = vec![c(0.0, 0.0); 6];
        coeffs[0] = c(1.5, -0.25);
        let res = eval_near_diagonal(&coeffs, c(1.0, 0.0), 1e-10);
        assert_eq!(res.status, PadeStatus::Converged);
        assert_eq!(res.final_value, c(1.5, -0.25));
    }

    #[test]
    fn beyond_radius_continuation_of_the_two_bus_series() {
        // radius 0.438 < 1; partial sums diverge, the diagonal converges
        let coeffs = two_bus_series(c(0.5, 0.4), 60);
        let res = eval_near_diagonal(&coeffs, c(1.0, 0.0), 1e-10);
        assert_eq!(res.status, PadeStatus::Converged);
        let exact = c(0.5 + 0.59f64.sqrt(), 0.4);
        assert!(
            (res.final_value - exact).norm() < 1e-8,
            "err = {:.3e}",
            (res.final_value - exact).norm()
        );
    }

    #[test]
    fn infeasible_two_bus_does_not_converge_through_order_60() {
        let coeffs = two_bus_series(c(-0.3, 0.0), 60);
        let res = eval_near_diagonal(&coeffs, c(1.0, 0.0), 1e-10);
        assert_eq!(res.status, PadeStatus::NotConverged);
    }

    #[test]
    fn inside_radius_pade_matches_direct_summation() {
        let coeffs = two_bus_series(c(0.5, 0.4), 60);
        let s = c(0.2, 0.0);
        let res = eval_near_diagonal(&coeffs, s, 1e-12);
        let mut sum = c(0.0, 0.0);
        let mut pw = c(1.0, 0.0);
        for &co in &coeffs {
            sum += co * pw;
            pw *= s;
        }
        assert_eq!(res.status, PadeStatus::Converged);
        assert!((res.final_value - sum).norm() < 1e-10);
    }

    #[test]
    fn rational_coefficients_reproduce_one_over_one_minus_s() {
        let coeffs = real_series(&[1.0, 1.0, 1.0, 1.0]);
        let (num, den) = rational_coefficients(&coeffs, 1, 1).unwrap();
        assert_eq!(den, vec![c(1.0, 0.0), c(-1.0, 0.0)]);
        assert_eq!(num[0], c(1.0, 0.0));
        assert_eq!(num[1], c(0.0, 0.0));
    }

    #[test]
    fn rational_coefficients_exp_like_one_one() {
        let coeffs = real_series(&[1.0, 1.0, 0.5]);
        let (num, den) = rational_coefficients(&coeffs, 1, 1).unwrap();
        assert_eq!(den, vec![c(1.0, 0.0), c(-0.5, 0.0)]);
        assert_eq!(num, vec![c(1.0, 0.0), c(0.5, 0.0)]);
    }

    #[test]
    fn rational_coefficients_constant_series() {
        let coeffs = real_series(&[3.0, 0.0, 0.0]);
        let (num, den) = rational_coefficients(&coeffs, 0, 0).unwrap();
        assert_eq!(den, vec![c(1.0, 0.0)]);
        assert_eq!(num, vec![c(3.0, 0.0)]);
    }

    #[test]
    fn degenerate_toeplitz_is_an_error() {
        // constant series makes the [1/1] condition matrix singular
        let coeffs = real_series(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            rational_coefficients(&coeffs, 1, 1),
            Err(PadeError::DegenerateTable { l: 1, m: 1 })
        ));
    }

    #[test]
    fn exactness_on_a_rational_function() {
        // f(s) = (1 + 2s) / (1 - 0.5 s + 0.25 s^2), series then [2/2]
        let b = [1.0, -0.5, 0.25];
        let a = [1.0, 2.0, 0.0];
        let mut cser = vec![0.0f64; 12];
        for n in 0..cser.len() {
            let mut acc = if n < a.len() { a[n] } else { 0.0 };
            for j in 1..=2.min(n) {
                acc -= b[j] * cser[n - j];
            }
            cser[n] = acc;
        }
        let coeffs = real_series(&cser);
        let s = c(0.7, 0.0);
        let res = eval_near_diagonal(&coeffs, s, 1e-12);
        let exact = (c(1.0, 0.0) + c(2.0, 0.0) * s) / (c(1.0, 0.0) - c(0.5, 0.0) * s + c(0.25, 0.0) * s * s);
        assert!((res.final_value - exact).norm() < 1e-11);
        assert_eq!(res.status, PadeStatus::Converged);
    }

    #[test]
    fn simple_pole_is_located_exactly() {
        let coeffs: Vec<Complex64> = (0..9).map(|n| c(2.0f64.powi(n), 0.0)).collect();
        let poles = estimate_branch_points(&coeffs, 1).unwrap();
        assert_eq!(poles.len(), 1);
        assert!((poles[0] - c(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_bus_nearest_pole_approximates_s_minus() {
        let coeffs = two_bus_series(c(0.5, 0.4), 41);
        let poles = estimate_branch_points(&coeffs, 20).unwrap();
        let s_minus = (0.5 - 0.41f64.sqrt()) / 0.32;
        assert!(
            (poles[0] - c(s_minus, 0.0)).norm() < 1e-2,
            "nearest pole {} vs s- {}",
            poles[0],
            s_minus
        );
    }

    #[test]
    fn real_negative_sigma_pole_near_collapse_point() {
        // the [M/M] pole nearest a square-root tip sits a little beyond it
        // (1.17e-2 at M = 20 in exact arithmetic for this case), so the
        // 1e-2 agreement needs M = 30
        let coeffs = two_bus_series(c(-0.2, 0.0), 81);
        let poles = estimate_branch_points(&coeffs, 30).unwrap();
        assert!(
            (poles[0] - c(1.25, 0.0)).norm() < 1e-2,
            "nearest pole {} vs 1.25",
            poles[0]
        );
    }
}
