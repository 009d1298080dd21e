//! Independent ground truth: two-bus closed forms and a dense polar
//! Newton–Raphson solver for small-network cross-validation.
//!
//! The two-bus problem in dimensionless form, `U = V/V0` and
//! `sigma = Z S* / |V0|^2`, has the exact embedded solution
//!
//! ```text
//! U(s)± = 1/2 ± sqrt(1/4 + s·sigma_R - s²·sigma_I²) + j·s·sigma_I
//! ```
//!
//! with branch points where the discriminant vanishes. These closed forms are
//! kept free of the series/Padé machinery so they can serve as oracles for it.

use num_complex::Complex;

use crate::network::{build_admittance, BranchSpec, BusKind, BusSpec, Network, NetworkError};
use crate::scalar::Scalar;

/// Operational (`Plus`) or low-voltage (`Minus`) branch of the two-bus curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Dimensionless two-bus case, `sigma = Z S* / |V0|^2`.
#[derive(Debug, Clone, Copy)]
pub struct TwoBusCase<T> {
    pub sigma: Complex<T>,
}

impl<T: Scalar> TwoBusCase<T> {
    pub fn new(sigma_r: T, sigma_i: T) -> Self {
        Self { sigma: Complex::new(sigma_r, sigma_i) }
    }

    pub fn sigma_r(&self) -> T {
        self.sigma.re
    }

    pub fn sigma_i(&self) -> T {
        self.sigma.im
    }

    /// Discriminant `1/4 + s·sigma_R - s²·sigma_I²`.
    pub fn discriminant(&self, s: T) -> T {
        T::fr(0.25) + s * self.sigma.re - s * s * self.sigma.im * self.sigma.im
    }

    /// Residual of the embedded algebraic curve
    /// `U² - (1 + 2js·sigma_I)·U - s·sigma*` at a candidate `u`.
    pub fn curve_residual(&self, u: Complex<T>, s: T) -> Complex<T> {
        let one = Complex::new(T::one(), T::zero());
        let two_j_s_si = Complex::new(T::zero(), T::fr(2.0) * s * self.sigma.im);
        u * u - (one + two_j_s_si) * u - self.sigma.conj() * s
    }
}

/// Exact embedded two-bus voltage, or `None` when the discriminant is
/// negative and no power-flow solution exists at that `s`.
pub fn twobus_closed_form<T: Scalar>(case: &TwoBusCase<T>, s: T, branch: Branch) -> Option<Complex<T>> {
    let d = case.discriminant(s);
    if d < T::zero() {
        return None;
    }
    let root = d.sqrt();
    let re = match branch {
        Branch::Plus => T::fr(0.5) + root,
        Branch::Minus => T::fr(0.5) - root,
    };
    Some(Complex::new(re, s * case.sigma_i()))
}

/// Real branch points `(s_minus, s_plus)` of the two-bus curve.
///
/// For `sigma_I = 0` the discriminant is linear and has the single root
/// `-1/(4 sigma_R)`, reported in the slot matching its sign with the other
/// slot at infinity; `sigma = 0` has no branch points at all.
pub fn twobus_branch_points<T: Scalar>(case: &TwoBusCase<T>) -> (T, T) {
    let sr = case.sigma_r();
    let si = case.sigma_i();
    if si != T::zero() {
        let m = case.sigma.norm();
        let denom = T::fr(2.0) * si * si;
        ((sr - m) / denom, (sr + m) / denom)
    } else if sr != T::zero() {
        let root = -T::one() / (T::fr(4.0) * sr);
        if root > T::zero() {
            (T::neg_infinity(), root)
        } else {
            (root, T::infinity())
        }
    } else {
        (T::neg_infinity(), T::infinity())
    }
}

/// Lossless two-bus PV closed form: `U = jxsP ± sqrt(K(s) - x²s²P²)` with
/// `K(s) = 1 + s(vsp² - 1)`, and the reactive injection recovered from the
/// triangular relation `Q = (K - U + jsxP)/(sx)`. Requires `s > 0`, `x > 0`.
pub fn twobus_pv_closed_form<T: Scalar>(
    x: T,
    p: T,
    vsp: T,
    s: T,
    branch: Branch,
) -> Option<(Complex<T>, T)> {
    assert!(s > T::zero() && x > T::zero(), "PV closed form needs s > 0 and x > 0");
    let k = T::one() + s * (vsp * vsp - T::one());
    let rad = k - x * x * s * s * p * p;
    if rad < T::zero() {
        return None;
    }
    let root = rad.sqrt();
    let signed = match branch {
        Branch::Plus => root,
        Branch::Minus => -root,
    };
    let u = Complex::new(signed, x * s * p);
    let q_num = Complex::new(k, T::zero()) - u + Complex::new(T::zero(), s * x * p);
    Some((u, (q_num / Complex::new(s * x, T::zero())).re))
}

/// Build the two-bus network realizing a given `sigma` on a pure reactance
/// `x = 1` with a unit swing: the PQ injection is then `p = sigma_I`,
/// `q = sigma_R`, and `V_2 = U`.
pub fn two_bus_network<T: Scalar>(sigma: Complex<T>) -> Network<T> {
    Network::new(
        vec![
            BusSpec::swing(1, Complex::new(T::one(), T::zero())),
            BusSpec::pq(2, sigma.im, sigma.re),
        ],
        vec![BranchSpec::line(1, 2, T::zero(), T::one())],
    )
    .expect("two-bus fixture is valid")
}

/// Lossless PV two-bus fixture with unit swing.
pub fn two_bus_pv_network<T: Scalar>(x: T, p: T, vsp: T) -> Network<T> {
    Network::new(
        vec![BusSpec::swing(1, Complex::new(T::one(), T::zero())), BusSpec::pv(2, p, vsp)],
        vec![BranchSpec::line(1, 2, T::zero(), x)],
    )
    .expect("PV two-bus fixture is valid")
}

/// Outcome of the Newton–Raphson reference solve. Non-convergence is a
/// value, not an error: NR may fail where the embedding method succeeds.
#[derive(Debug, Clone)]
pub enum NrOutcome<T> {
    Converged { v: Vec<Complex<T>>, iterations: usize },
    NonConvergence,
}

const NR_TOL: f64 = 1e-10;
const NR_MAX_ITER: usize = 50;

/// Dense polar-form Newton–Raphson with PV/PQ partitioning.
///
/// Unknowns are the angles at every non-swing bus and the magnitudes at PQ
/// buses; PV magnitudes stay at their setpoints and reactive injections are
/// implicit. Intended for cross-validation at small `n` (dense Jacobian).
pub fn newton_raphson<T: Scalar>(
    network: &Network<T>,
    flat_start: bool,
) -> Result<NrOutcome<T>, NetworkError> {
    let model = build_admittance(network)?;
    let n = network.n();
    let swing = network.swing_index();
    let vswing = network.swing_voltage();

    let mut vm: Vec<T> = Vec::with_capacity(n);
    let mut th: Vec<T> = Vec::with_capacity(n);
    for bus in network.buses() {
        match bus.kind {
            BusKind::Swing => {
                vm.push(bus.vswing.norm());
                th.push(bus.vswing.arg());
            }
            BusKind::Pv => {
                vm.push(bus.vsp);
                th.push(if flat_start { vswing.arg() } else { T::zero() });
            }
            BusKind::Pq => {
                vm.push(if flat_start { T::one() } else { vswing.norm() });
                th.push(if flat_start { vswing.arg() } else { T::zero() });
            }
        }
    }

    // unknown layout: angles for non-swing buses, then magnitudes for PQ buses
    let ang_pos: Vec<usize> = (0..n).filter(|&i| i != swing).collect();
    let mag_pos: Vec<usize> = (0..n)
        .filter(|&i| network.buses()[i].kind == BusKind::Pq)
        .collect();
    let m_ang = ang_pos.len();
    let dim = m_ang + mag_pos.len();
    if dim == 0 {
        let v = vec![vswing; 1];
        return Ok(NrOutcome::Converged { v, iterations: 0 });
    }

    let tol = T::fr(NR_TOL);
    for iter in 0..=NR_MAX_ITER {
        let v: Vec<Complex<T>> = (0..n).map(|i| Complex::from_polar(vm[i], th[i])).collect();
        let yv = model.y_full.matvec(&v);
        let s_calc: Vec<Complex<T>> = (0..n).map(|i| v[i] * yv[i].conj()).collect();

        let mut rhs = vec![T::zero(); dim];
        let mut max_mm = T::zero();
        for (a, &i) in ang_pos.iter().enumerate() {
            let dp = network.buses()[i].p - s_calc[i].re;
            rhs[a] = dp;
            max_mm = max_mm.max(dp.abs());
        }
        for (b, &i) in mag_pos.iter().enumerate() {
            let dq = network.buses()[i].q - s_calc[i].im;
            rhs[m_ang + b] = dq;
            max_mm = max_mm.max(dq.abs());
        }
        if max_mm < tol {
            return Ok(NrOutcome::Converged { v, iterations: iter });
        }
        if iter == NR_MAX_ITER {
            break;
        }

        // dense Jacobian, standard polar entries
        let mut jac = vec![T::zero(); dim * dim];
        let at = |r: usize, c: usize| r * dim + c;
        for (row, &i) in ang_pos.iter().enumerate() {
            let yii = model.y_full.get(i, i);
            for (col, &j) in ang_pos.iter().enumerate() {
                jac[at(row, col)] = if i == j {
                    -s_calc[i].im - yii.im * vm[i] * vm[i]
                } else {
                    let yij = model.y_full.get(i, j);
                    let tij = th[i] - th[j];
                    vm[i] * vm[j] * (yij.re * tij.sin() - yij.im * tij.cos())
                };
            }
            for (col, &j) in mag_pos.iter().enumerate() {
                jac[at(row, m_ang + col)] = if i == j {
                    s_calc[i].re / vm[i] + yii.re * vm[i]
                } else {
                    let yij = model.y_full.get(i, j);
                    let tij = th[i] - th[j];
                    vm[i] * (yij.re * tij.cos() + yij.im * tij.sin())
                };
            }
        }
        for (row, &i) in mag_pos.iter().enumerate() {
            let yii = model.y_full.get(i, i);
            for (col, &j) in ang_pos.iter().enumerate() {
                jac[at(m_ang + row, col)] = if i == j {
                    s_calc[i].re - yii.re * vm[i] * vm[i]
                } else {
                    let yij = model.y_full.get(i, j);
                    let tij = th[i] - th[j];
                    -vm[i] * vm[j] * (yij.re * tij.cos() + yij.im * tij.sin())
                };
            }
            for (col, &j) in mag_pos.iter().enumerate() {
                jac[at(m_ang + row, m_ang + col)] = if i == j {
                    s_calc[i].im / vm[i] - yii.im * vm[i]
                } else {
                    let yij = model.y_full.get(i, j);
                    let tij = th[i] - th[j];
                    vm[i] * (yij.re * tij.sin() - yij.im * tij.cos())
                };
            }
        }

        let Some(step) = dense_solve(&mut jac, &mut rhs) else {
            return Ok(NrOutcome::NonConvergence);
        };
        for (a, &i) in ang_pos.iter().enumerate() {
            th[i] = th[i] + step[a];
        }
        for (b, &i) in mag_pos.iter().enumerate() {
            vm[i] = vm[i] + step[m_ang + b];
            if vm[i] <= T::zero() {
                return Ok(NrOutcome::NonConvergence);
            }
        }
    }
    Ok(NrOutcome::NonConvergence)
}

/// In-place Gaussian elimination with partial pivoting; `None` on a zero
/// pivot. Kept local so the oracle stays independent of the solver path.
fn dense_solve<T: Scalar>(a: &mut [T], b: &mut [T]) -> Option<Vec<T>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let m = a[r * n + col].abs();
            if m > best {
                best = m;
                piv = r;
            }
        }
        if best == T::zero() || !best.is_finite() {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == T::zero() {
                continue;
            }
            for c in col..n {
                let v = a[col * n + c];
                a[r * n + c] = a[r * n + c] - f * v;
            }
            b[r] = b[r] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc = acc - a[r * n + c] * x[c];
        }
        x[r] = acc / a[r * n + r];
    }
    Some(x)
}
