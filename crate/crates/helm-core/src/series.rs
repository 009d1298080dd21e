//! White-germ construction and power-series extension of the embedded
//! power-flow equations.
//!
//! Both supported embeddings multiply the constant-power injections by `s`
//! and keep the conjugated voltages as independent mirror functions whose
//! coefficients are the conjugates of the unhatted ones, so the reflection
//! condition holds coefficient-wise by construction:
//!
//! - **Minimal**: `Y V(s) = s S* / V̂(s)` with the full admittance matrix on
//!   the left and the swing held constant, `V_sw(s) = v_sw`. The germ is the
//!   open-circuit state, the solution of `Y V(0) = 0` over non-swing buses.
//! - **Canonical**: `Y_tr V(s) = -s Y_sh V(s) + s S* / V̂(s)` with the shunts
//!   embedded as well and the swing interpolated, `V_sw(s) = 1 + s(v_sw - 1)`.
//!   Because the rows of `Y_tr` sum to zero, the germ is the all-ones flat
//!   state.
//!
//! PV buses add one real unknown per order (the reactive coefficient
//! `Q_k[n]`) and one real constraint row from the embedded setpoint
//! `V_k(s) V̂_k(s) = K_k(s)`, `K_k(s) = |V_k(0)|² + s(vsp² - |V_k(0)|²)`.
//! With PV buses present the per-order system is assembled over real
//! rectangular unknowns `(Re V, Im V, Q)`, dimension `2(n-1) + n_pv`;
//! without them it stays complex of dimension `n-1`. Either way the
//! coefficient matrix is identical at every order: it is factored once and
//! reused for each order's right-hand side.

use num_complex::Complex;
use thiserror::Error;

use crate::linsolve::{factor, Factorization, LinsolveError, SparseMatrix};
use crate::network::{AdmittanceModel, BusKind, Network};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Minimal,
    Canonical,
}

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("white branch undefined: open-circuit voltage at bus {bus} is zero")]
    WhiteBranchUndefined { bus: u32 },
    #[error("degenerate network: {0}")]
    SingularSystem(#[from] LinsolveError),
    #[error("truncated mirror voltage vanishes at the evaluation point (bus {bus})")]
    ZeroHatVoltage { bus: u32 },
    #[error("germ is already at order {have}, cannot extend to lower order {want}")]
    OrderNotAboveCurrent { have: usize, want: usize },
}

/// Power-series coefficients of the white germ.
///
/// `v[i][n]` is the order-`n` voltage coefficient of bus `i`, `q[k][n]` the
/// real reactive coefficient of the `k`-th PV bus, and `w[i][n]` the cached
/// reciprocal-series coefficient of `1/V̂_i(s)` where `V̂_i[n] = conj(V_i[n])`.
#[derive(Debug, Clone)]
pub struct GermSeries<T> {
    embedding: EmbeddingKind,
    order: usize,
    v: Vec<Vec<Complex<T>>>,
    q: Vec<Vec<T>>,
    w: Vec<Vec<Complex<T>>>,
    pv_positions: Vec<usize>,
}

impl<T: Scalar> GermSeries<T> {
    pub fn embedding(&self) -> EmbeddingKind {
        self.embedding
    }

    /// Highest computed order.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_buses(&self) -> usize {
        self.v.len()
    }

    /// Voltage coefficients of one bus, order ascending.
    pub fn voltage_coeffs(&self, bus: usize) -> &[Complex<T>] {
        &self.v[bus]
    }

    /// Reactive coefficients of the `slot`-th PV bus.
    pub fn q_coeffs(&self, slot: usize) -> &[T] {
        &self.q[slot]
    }

    pub fn reciprocal_coeffs(&self, bus: usize) -> &[Complex<T>] {
        &self.w[bus]
    }

    /// Bus positions of the PV buses, aligned with `q_coeffs` slots.
    pub fn pv_positions(&self) -> &[usize] {
        &self.pv_positions
    }

    /// Horner evaluation of the truncated voltage series of one bus.
    pub fn voltage_at(&self, bus: usize, s: Complex<T>) -> Complex<T> {
        horner(&self.v[bus], s)
    }

    /// Horner evaluation of the truncated reactive series of one PV slot.
    pub fn q_at(&self, slot: usize, s: Complex<T>) -> Complex<T> {
        let coeffs: Vec<Complex<T>> = self.q[slot].iter().map(|&x| Complex::new(x, T::zero())).collect();
        horner(&coeffs, s)
    }
}

fn horner<T: Scalar>(coeffs: &[Complex<T>], s: Complex<T>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for c in coeffs.iter().rev() {
        acc = acc * s + *c;
    }
    acc
}

/// Reciprocal power series: given `a` with `a[0] != 0`, the coefficients of
/// `1/a(s)` through the same order.
pub fn reciprocal_series<T: Scalar>(a: &[Complex<T>]) -> Vec<Complex<T>> {
    assert!(!a.is_empty() && a[0].norm() > T::zero(), "leading coefficient must be nonzero");
    let mut w = Vec::with_capacity(a.len());
    w.push(Complex::new(T::one(), T::zero()) / a[0]);
    for n in 1..a.len() {
        w.push(reciprocal_next(a, &w, n));
    }
    w
}

/// Order-`n` coefficient of `1/a(s)` given `w[0..n]`:
/// `w[n] = -w[0] * sum_{m=1..n} a[m] w[n-m]`.
fn reciprocal_next<T: Scalar>(a: &[Complex<T>], w: &[Complex<T>], n: usize) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for m in 1..=n {
        acc = acc + a[m] * w[n - m];
    }
    -w[0] * acc
}

enum SystemMatrix<T> {
    Complex(Factorization<Complex<T>>),
    RealDoubled(Factorization<T>),
}

/// Holds the factored per-order coefficient matrix and the order-0 data so
/// one germ can be extended repeatedly without refactoring.
pub struct GermBuilder<'a, T> {
    network: &'a Network<T>,
    model: &'a AdmittanceModel<T>,
    embedding: EmbeddingKind,
    non_swing: Vec<usize>,
    pv_positions: Vec<usize>,
    pv_slot_of: Vec<Option<usize>>,
    system: SystemMatrix<T>,
    v0: Vec<Complex<T>>,
    /// Column of the embedding matrix at the swing bus, densified.
    a_swing: Vec<Complex<T>>,
    /// `K_k[1] = vsp² - |V_k(0)|²` per PV slot.
    k1: Vec<T>,
}

impl<'a, T: Scalar> GermBuilder<'a, T> {
    pub fn new(
        network: &'a Network<T>,
        model: &'a AdmittanceModel<T>,
        embedding: EmbeddingKind,
    ) -> Result<Self, SeriesError> {
        let n = network.n();
        let swing = network.swing_index();
        let a = match embedding {
            EmbeddingKind::Minimal => &model.y_full,
            EmbeddingKind::Canonical => &model.y_tr,
        };

        let mut non_swing = Vec::with_capacity(n.saturating_sub(1));
        let mut unknown_of = vec![None; n];
        for i in 0..n {
            if i != swing {
                unknown_of[i] = Some(non_swing.len());
                non_swing.push(i);
            }
        }
        let pv_positions = network.pv_indices();
        let mut pv_slot_of = vec![None; n];
        for (slot, &i) in pv_positions.iter().enumerate() {
            pv_slot_of[i] = Some(slot);
        }
        let m = non_swing.len();

        let mut a_swing = vec![Complex::new(T::zero(), T::zero()); n];
        for (i, val) in a.col(swing) {
            a_swing[i] = val;
        }

        // non-swing principal block of the embedding matrix
        let mut blk: Vec<(usize, usize, Complex<T>)> = Vec::new();
        for (cj, &j) in non_swing.iter().enumerate() {
            for (i, val) in a.col(j) {
                if let Some(ri) = unknown_of[i] {
                    blk.push((ri, cj, val));
                }
            }
        }

        // order-0 germ; for the minimal embedding the germ solve uses the
        // same matrix as the order recursion, so the factorization is shared
        let block = SparseMatrix::from_triplets(m, m, &blk).expect("indices in range");
        let mut complex_fact: Option<Factorization<Complex<T>>> = None;
        let v0 = match embedding {
            EmbeddingKind::Canonical => vec![Complex::new(T::one(), T::zero()); n],
            EmbeddingKind::Minimal => {
                let vsw = network.swing_voltage();
                let mut v0 = vec![vsw; n];
                if m > 0 {
                    let fact = factor::<T, Complex<T>>(&block)?;
                    let rhs: Vec<Complex<T>> =
                        non_swing.iter().map(|&i| -a_swing[i] * vsw).collect();
                    let sol = fact.solve(&rhs)?;
                    for (u, &i) in non_swing.iter().enumerate() {
                        v0[i] = sol[u];
                    }
                    complex_fact = Some(fact);
                }
                v0
            }
        };
        let germ_floor = T::fr(1e-9) * network.swing_voltage().norm();
        for (i, val) in v0.iter().enumerate() {
            if val.norm() < germ_floor {
                return Err(SeriesError::WhiteBranchUndefined { bus: network.buses()[i].id });
            }
        }

        let k1: Vec<T> = pv_positions
            .iter()
            .map(|&i| {
                let vsp = network.buses()[i].vsp;
                vsp * vsp - v0[i].norm_sqr()
            })
            .collect();

        // per-order coefficient matrix, factored once
        let system = if pv_positions.is_empty() {
            let fact = match complex_fact {
                Some(f) => f,
                None => factor::<T, Complex<T>>(&block)?,
            };
            SystemMatrix::Complex(fact)
        } else {
            let dim = 2 * m + pv_positions.len();
            let mut tri: Vec<(usize, usize, T)> = Vec::with_capacity(4 * blk.len() + 4 * pv_positions.len());
            for &(ri, cj, val) in &blk {
                let (g, b) = (val.re, val.im);
                if g != T::zero() {
                    tri.push((ri, cj, g));
                    tri.push((m + ri, m + cj, g));
                }
                if b != T::zero() {
                    tri.push((ri, m + cj, -b));
                    tri.push((m + ri, cj, b));
                }
            }
            for (slot, &i) in pv_positions.iter().enumerate() {
                let u = unknown_of[i].expect("PV bus is not the swing");
                let w0 = Complex::new(T::one(), T::zero()) / v0[i].conj();
                // +j Q_k[n] W_k[0] on the balance row of bus k
                tri.push((u, 2 * m + slot, -w0.im));
                tri.push((m + u, 2 * m + slot, w0.re));
                // setpoint constraint row: 2 Re(conj(V_k[0]) V_k[n])
                let c0 = v0[i];
                tri.push((2 * m + slot, u, T::fr(2.0) * c0.re));
                tri.push((2 * m + slot, m + u, T::fr(2.0) * c0.im));
            }
            let mat = SparseMatrix::from_triplets(dim, dim, &tri).expect("indices in range");
            SystemMatrix::RealDoubled(factor::<T, T>(&mat)?)
        };

        Ok(Self {
            network,
            model,
            embedding,
            non_swing,
            pv_positions,
            pv_slot_of,
            system,
            v0,
            a_swing,
            k1,
        })
    }

    /// Prescribed swing coefficient at the given order.
    fn swing_coeff(&self, n: usize) -> Complex<T> {
        let vsw = self.network.swing_voltage();
        let one = Complex::new(T::one(), T::zero());
        match (self.embedding, n) {
            (_, 0) => unreachable!("order 0 handled by the germ"),
            (EmbeddingKind::Minimal, _) => Complex::new(T::zero(), T::zero()),
            (EmbeddingKind::Canonical, 1) => vsw - one,
            (EmbeddingKind::Canonical, _) => Complex::new(T::zero(), T::zero()),
        }
    }

    /// Order-0 germ: open-circuit (minimal) or all-ones (canonical) state.
    pub fn init(&self) -> GermSeries<T> {
        let n = self.network.n();
        GermSeries {
            embedding: self.embedding,
            order: 0,
            v: (0..n).map(|i| vec![self.v0[i]]).collect(),
            q: self.pv_positions.iter().map(|_| vec![T::zero()]).collect(),
            w: (0..n)
                .map(|i| vec![Complex::new(T::one(), T::zero()) / self.v0[i].conj()])
                .collect(),
            pv_positions: self.pv_positions.clone(),
        }
    }

    /// Extend the germ's coefficients through `target_order`, solving one
    /// linear system per order against the cached factorization.
    pub fn extend(&self, germ: &mut GermSeries<T>, target_order: usize) -> Result<(), SeriesError> {
        if target_order < germ.order {
            return Err(SeriesError::OrderNotAboveCurrent { have: germ.order, want: target_order });
        }
        let m = self.non_swing.len();
        let zero = Complex::new(T::zero(), T::zero());
        let jay = Complex::new(T::zero(), T::one());

        for n in germ.order + 1..=target_order {
            let vsw_n = self.swing_coeff(n);

            // balance right-hand sides per non-swing bus
            let mut rhs = vec![zero; m];
            for (u, &i) in self.non_swing.iter().enumerate() {
                let bus = &self.network.buses()[i];
                let w = &germ.w[i];
                let mut r = match bus.kind {
                    BusKind::Pq => Complex::new(bus.p, bus.q).conj() * w[n - 1],
                    BusKind::Pv => {
                        let slot = self.pv_slot_of[i].expect("pv slot");
                        let mut acc = zero;
                        for mm in 1..n {
                            acc = acc + Complex::new(germ.q[slot][mm], T::zero()) * w[n - mm];
                        }
                        Complex::new(bus.p, T::zero()) * w[n - 1] - jay * acc
                    }
                    BusKind::Swing => unreachable!("non-swing rows only"),
                };
                if self.embedding == EmbeddingKind::Canonical {
                    r = r - self.model.y_sh[i] * germ.v[i][n - 1];
                }
                r = r - self.a_swing[i] * vsw_n;
                rhs[u] = r;
            }

            match &self.system {
                SystemMatrix::Complex(fact) => {
                    let sol = fact.solve(&rhs)?;
                    for (u, &i) in self.non_swing.iter().enumerate() {
                        germ.v[i].push(sol[u]);
                    }
                }
                SystemMatrix::RealDoubled(fact) => {
                    let npv = self.pv_positions.len();
                    let mut real_rhs = vec![T::zero(); 2 * m + npv];
                    for u in 0..m {
                        real_rhs[u] = rhs[u].re;
                        real_rhs[m + u] = rhs[u].im;
                    }
                    for (slot, &i) in self.pv_positions.iter().enumerate() {
                        let kn = if n == 1 { self.k1[slot] } else { T::zero() };
                        let mut acc = zero;
                        for mm in 1..n {
                            acc = acc + germ.v[i][mm] * germ.v[i][n - mm].conj();
                        }
                        real_rhs[2 * m + slot] = kn - acc.re;
                    }
                    let sol = fact.solve(&real_rhs)?;
                    for (u, &i) in self.non_swing.iter().enumerate() {
                        germ.v[i].push(Complex::new(sol[u], sol[m + u]));
                    }
                    for (slot, _) in self.pv_positions.iter().enumerate() {
                        germ.q[slot].push(sol[2 * m + slot]);
                    }
                }
            }
            germ.v[self.network.swing_index()].push(vsw_n);
            if matches!(self.system, SystemMatrix::Complex(_)) {
                for qs in germ.q.iter_mut() {
                    qs.push(T::zero());
                }
            }

            for i in 0..self.network.n() {
                let vhat: Vec<Complex<T>> = germ.v[i].iter().map(|c| c.conj()).collect();
                let next = reciprocal_next(&vhat, &germ.w[i], n);
                germ.w[i].push(next);
            }
            germ.order = n;
        }
        Ok(())
    }
}

/// Build the order-0 white germ for the requested embedding.
pub fn init_white_germ<T: Scalar>(
    network: &Network<T>,
    model: &AdmittanceModel<T>,
    embedding: EmbeddingKind,
) -> Result<GermSeries<T>, SeriesError> {
    Ok(GermBuilder::new(network, model, embedding)?.init())
}

/// Extend a germ to `target_order`.
///
/// One-shot convenience over [`GermBuilder`]: the coefficient matrix is
/// factored once per call and reused across all orders of the extension;
/// callers extending incrementally should hold a `GermBuilder` instead.
pub fn extend_series<T: Scalar>(
    mut germ: GermSeries<T>,
    network: &Network<T>,
    model: &AdmittanceModel<T>,
    target_order: usize,
) -> Result<GermSeries<T>, SeriesError> {
    let builder = GermBuilder::new(network, model, germ.embedding)?;
    builder.extend(&mut germ, target_order)?;
    Ok(germ)
}

/// Residual of the embedded equations at complex `s` using the truncated
/// series; `O(s^{order+1})` by construction. The swing entry is zero.
pub fn embedded_residual<T: Scalar>(
    germ: &GermSeries<T>,
    network: &Network<T>,
    model: &AdmittanceModel<T>,
    s: Complex<T>,
) -> Result<Vec<Complex<T>>, SeriesError> {
    let n = network.n();
    let swing = network.swing_index();
    let zero = Complex::new(T::zero(), T::zero());
    let jay = Complex::new(T::zero(), T::one());
    let a = match germ.embedding {
        EmbeddingKind::Minimal => &model.y_full,
        EmbeddingKind::Canonical => &model.y_tr,
    };

    let v_at: Vec<Complex<T>> = (0..n).map(|i| germ.voltage_at(i, s)).collect();
    let vhat_at: Vec<Complex<T>> = (0..n)
        .map(|i| {
            let coeffs: Vec<Complex<T>> = germ.v[i].iter().map(|c| c.conj()).collect();
            horner(&coeffs, s)
        })
        .collect();

    let mut out = a.matvec(&v_at);
    out[swing] = zero;
    for (i, bus) in network.buses().iter().enumerate() {
        if i == swing {
            continue;
        }
        if vhat_at[i].norm() == T::zero() {
            return Err(SeriesError::ZeroHatVoltage { bus: bus.id });
        }
        if germ.embedding == EmbeddingKind::Canonical {
            out[i] = out[i] + s * model.y_sh[i] * v_at[i];
        }
        match bus.kind {
            BusKind::Pq => {
                out[i] = out[i] - s * Complex::new(bus.p, bus.q).conj() / vhat_at[i];
            }
            BusKind::Pv => {
                let slot = germ.pv_positions.iter().position(|&p| p == i).expect("pv slot");
                let q_at = germ.q_at(slot, s);
                out[i] = out[i] - s * Complex::new(bus.p, T::zero()) / vhat_at[i]
                    + jay * q_at / vhat_at[i];
            }
            BusKind::Swing => unreachable!(),
        }
    }
    Ok(out)
}

/// Per-order residuals of both halves of the doubled system and of the PV
/// constraint expansion, with the natural magnitude scale of each row.
/// Used by the reflection-identity checks.
pub struct CoefficientResiduals<T> {
    /// `sum_k A_ik V_k[n] - rhs_i[n]`, non-swing buses in bus order.
    pub balance: Vec<Complex<T>>,
    /// Mirror half, computed independently from conjugated data.
    pub mirror: Vec<Complex<T>>,
    /// `sum_m V[m] conj(V[n-m]) - K[n]` per PV slot.
    pub pv_constraint: Vec<T>,
    /// Largest term magnitude entering any row at this order.
    pub scale: T,
}

/// Evaluate the order-`n` coefficient identities for a computed germ.
pub fn coefficient_residuals<T: Scalar>(
    germ: &GermSeries<T>,
    network: &Network<T>,
    model: &AdmittanceModel<T>,
    n: usize,
) -> CoefficientResiduals<T> {
    assert!(n >= 1 && n <= germ.order, "order {n} outside computed range");
    let swing = network.swing_index();
    let zero = Complex::new(T::zero(), T::zero());
    let jay = Complex::new(T::zero(), T::one());
    let a = match germ.embedding {
        EmbeddingKind::Minimal => &model.y_full,
        EmbeddingKind::Canonical => &model.y_tr,
    };

    let nb = network.n();
    let mut scale = T::zero();
    let mut balance = Vec::new();
    let mut mirror = Vec::new();

    // A V[n] and conj(A) Vhat[n] via column sweeps
    let vn: Vec<Complex<T>> = (0..nb).map(|i| germ.v[i][n]).collect();
    let vn_hat: Vec<Complex<T>> = vn.iter().map(|c| c.conj()).collect();
    let av = a.matvec(&vn);
    let mut av_hat = vec![zero; nb];
    for j in 0..nb {
        for (i, val) in a.col(j) {
            av_hat[i] = av_hat[i] + val.conj() * vn_hat[j];
        }
    }

    for (i, bus) in network.buses().iter().enumerate() {
        if i == swing {
            continue;
        }
        let w = &germ.w[i];
        let what: Vec<Complex<T>> = w.iter().map(|c| c.conj()).collect();
        let (mut rhs, mut rhs_hat) = match bus.kind {
            BusKind::Pq => {
                let sc = Complex::new(bus.p, bus.q);
                (sc.conj() * w[n - 1], sc * what[n - 1])
            }
            BusKind::Pv => {
                let slot = germ.pv_positions.iter().position(|&p| p == i).expect("pv slot");
                let p = Complex::new(bus.p, T::zero());
                let mut acc = zero;
                let mut acc_hat = zero;
                for mm in 1..=n {
                    let qm = Complex::new(germ.q[slot][mm], T::zero());
                    acc = acc + qm * w[n - mm];
                    acc_hat = acc_hat + qm * what[n - mm];
                }
                (p * w[n - 1] - jay * acc, p * what[n - 1] + jay * acc_hat)
            }
            BusKind::Swing => unreachable!(),
        };
        if germ.embedding == EmbeddingKind::Canonical {
            rhs = rhs - model.y_sh[i] * germ.v[i][n - 1];
            rhs_hat = rhs_hat - model.y_sh[i].conj() * germ.v[i][n - 1].conj();
        }
        scale = scale.max(av[i].norm()).max(rhs.norm());
        balance.push(av[i] - rhs);
        mirror.push(av_hat[i] - rhs_hat);
    }

    let mut pv_constraint = Vec::new();
    for &i in germ.pv_positions.iter() {
        let mut acc = zero;
        for mm in 0..=n {
            acc = acc + germ.v[i][mm] * germ.v[i][n - mm].conj();
            scale = scale.max((germ.v[i][mm] * germ.v[i][n - mm].conj()).norm());
        }
        let vsp = network.buses()[i].vsp;
        let v00 = germ.v[i][0].norm_sqr();
        let kn = if n == 1 { vsp * vsp - v00 } else { T::zero() };
        pv_constraint.push(acc.re - kn);
    }

    CoefficientResiduals { balance, mirror, pv_constraint, scale: scale.max(T::one()) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_admittance, BranchSpec, BusSpec, Network};
    use crate::oracle::{two_bus_network, two_bus_pv_network};
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn meshed_net() -> Network<f64> {
        Network::new(
            vec![
                BusSpec::swing(1, c(1.02, 0.01)),
                BusSpec::pq(2, -0.2, -0.08).with_shunt(0.0, 0.15),
                BusSpec::pv(3, 0.15, 1.01),
                BusSpec::pq(4, -0.1, -0.02),
            ],
            vec![
                BranchSpec::line(1, 2, 0.01, 0.08).with_charging(0.04),
                BranchSpec::line(2, 3, 0.02, 0.12).with_charging(0.02),
                BranchSpec::line(3, 4, 0.01, 0.06),
                BranchSpec::line(4, 1, 0.015, 0.09).with_tap(1.02, 1.5),
            ],
        )
        .unwrap()
    }

    #[test]
    fn canonical_germ_is_all_ones() {
        let net = meshed_net();
        let model = build_admittance(&net).unwrap();
        let germ = init_white_germ(&net, &model, EmbeddingKind::Canonical).unwrap();
        for i in 0..net.n() {
            assert_eq!(germ.voltage_coeffs(i)[0], c(1.0, 0.0));
        }
        for slot in 0..germ.pv_positions().len() {
            assert_eq!(germ.q_coeffs(slot)[0], 0.0);
        }
    }

    #[test]
    fn minimal_germ_carries_swing_voltage_over_series_line() {
        let vsw = c(1.03, -0.02);
        let net = Network::new(
            vec![BusSpec::swing(1, vsw), BusSpec::pq(2, -0.3, -0.2)],
            vec![BranchSpec::line(1, 2, 0.0, 1.0)],
        )
        .unwrap();
        let model = build_admittance(&net).unwrap();
        let germ = init_white_germ(&net, &model, EmbeddingKind::Minimal).unwrap();
        assert!((germ.voltage_coeffs(1)[0] - vsw).norm() < 1e-14);
    }

    #[test]
    fn minimal_germ_with_shunt_doubles_swing_voltage() {
        // line y = -j (x = 1), shunt +j/2 at bus 2: V2(0) = 2 vswing
        let vsw = c(1.0, 0.0);
        let net = Network::new(
            vec![
                BusSpec::swing(1, vsw),
                BusSpec::pq(2, 0.0, 0.0).with_shunt(0.0, 0.5),
            ],
            vec![BranchSpec::line(1, 2, 0.0, 1.0)],
        )
        .unwrap();
        let model = build_admittance(&net).unwrap();
        let germ = init_white_germ(&net, &model, EmbeddingKind::Minimal).unwrap();
        assert!((germ.voltage_coeffs(1)[0] - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn flat_network_has_identically_zero_tail() {
        let net = Network::new(
            vec![BusSpec::swing(1, c(1.0, 0.0)), BusSpec::pq(2, 0.0, 0.0), BusSpec::pq(3, 0.0, 0.0)],
            vec![BranchSpec::line(1, 2, 0.0, 0.5), BranchSpec::line(2, 3, 0.01, 0.4)],
        )
        .unwrap();
        let model = build_admittance(&net).unwrap();
        let germ = init_white_germ(&net, &model, EmbeddingKind::Canonical).unwrap();
        let germ = extend_series(germ, &net, &model, 12).unwrap();
        for i in 0..3 {
            for n in 1..=12 {
                assert!(germ.voltage_coeffs(i)[n].norm() < 1e-14, "bus {i} order {n}");
            }
        }
    }

    #[test]
    fn two_bus_first_order_coefficient_is_sigma() {
        // order-1 match of the embedded equation: Y V[1] = S* W[0] gives
        // V2[1] = Z S* = sigma on the x = 1, unit-swing fixture
        let sigma = c(0.5, 0.4);
        let net = two_bus_network(sigma);
        let model = build_admittance(&net).unwrap();
        let germ = init_white_germ(&net, &model, EmbeddingKind::Minimal).unwrap();
        let germ = extend_series(germ, &net, &model, 1).unwrap();
        assert!((germ.voltage_coeffs(1)[1] - sigma).norm() < 1e-14);
    }

    #[test]
    fn reciprocal_of_one_plus_a_is_geometric() {
        let a = c(0.3, -0.2);
        let series: Vec<Complex64> = vec![c(1.0, 0.0), a];
        let w = reciprocal_series(&[series[0], series[1], c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(w[0], c(1.0, 0.0));
        assert!((w[1] + a).norm() < 1e-15);
        assert!((w[2] - a * a).norm() < 1e-15);
        assert!((w[3] + a * a * a).norm() < 1e-15);
    }

    #[test]
    fn convolution_identity_of_w_against_vhat() {
        let net = meshed_net();
        let model = build_admittance(&net).unwrap();
        for embedding in [EmbeddingKind::Minimal, EmbeddingKind::Canonical] {
            let germ = init_white_germ(&net, &model, embedding).unwrap();
            let germ = extend_series(germ, &net, &model, 20).unwrap();
            for i in 0..net.n() {
                let v = germ.voltage_coeffs(i);
                let w = germ.reciprocal_coeffs(i);
                for n in 0..=20usize {
                    let mut acc = c(0.0, 0.0);
                    let mut scale = 0.0f64;
                    for m in 0..=n {
                        let term = v[m].conj() * w[n - m];
                        acc += term;
                        scale = scale.max(term.norm());
                    }
                    let expect = if n == 0 { 1.0 } else { 0.0 };
                    assert!(
                        (acc - c(expect, 0.0)).norm() <= 1e-12 * scale.max(1.0),
                        "bus {i} order {n}: {acc}"
                    );
                }
            }
        }
    }

    #[test]
    fn two_bus_series_matches_closed_form_taylor_through_order_25() {
        // independent oracle: Taylor-expand U = 1/2 + sqrt(1/4 + s sr - s² si²) + j s si
        // via the binomial series of sqrt(1+u), u = 4 sr s - 4 si² s²
        let (sr, si) = (0.5, 0.4);
        let order = 25usize;
        let mut u_poly = vec![0.0f64; order + 1];
        u_poly[1] = 4.0 * sr;
        u_poly[2] = -4.0 * si * si;
        let mut sqrt_series = vec![0.0f64; order + 1];
        sqrt_series[0] = 1.0;
        let mut upow = vec![0.0f64; order + 1];
        upow[0] = 1.0;
        let mut binom = 1.0f64; // binom(1/2, k)
        for k in 1..=order {
            // upow <- upow * u_poly (truncated)
            let mut next = vec![0.0f64; order + 1];
            for a in 0..=order {
                if upow[a] == 0.0 {
                    continue;
                }
                for b in 0..=(order - a).min(2) {
                    next[a + b] += upow[a] * u_poly[b];
                }
            }
            upow = next;
            binom *= (0.5 - (k as f64 - 1.0)) / k as f64;
            for n in 0..=order {
                sqrt_series[n] += binom * upow[n];
            }
        }
        let mut expected: Vec<Complex64> = (0..=order).map(|n| c(0.5 * sqrt_series[n], 0.0)).collect();
        expected[0] += c(0.5, 0.0);
        expected[1] += c(0.0, si);

        let net = two_bus_network(c(sr, si));
        let model = build_admittance(&net).unwrap();
        for embedding in [EmbeddingKind::Minimal, EmbeddingKind::Canonical] {
            let germ = init_white_germ(&net, &model, embedding).unwrap();
            let germ = extend_series(germ, &net, &model, order).unwrap();
            for n in 0..=order {
                // relative: the coefficients grow like the inverse radius
                let scale = expected[n].norm().max(1.0);
                assert!(
                    (germ.voltage_coeffs(1)[n] - expected[n]).norm() < 1e-10 * scale,
                    "{embedding:?} order {n}: {} vs {}",
                    germ.voltage_coeffs(1)[n],
                    expected[n]
                );
            }
        }
    }

    #[test]
    fn pv_two_bus_low_order_coefficients_match_hand_computation() {
        // x = 0.2, P = 1, vsp = 1: V = [1, 0.2j, -0.02, 0, -0.0002],
        // Q = [0, 0, 0.1, 0, 0.001]
        let net = two_bus_pv_network(0.2, 1.0, 1.0);
        let model = build_admittance(&net).unwrap();
        let germ = init_white_germ(&net, &model, EmbeddingKind::Canonical).unwrap();
        let germ = extend_series(germ, &net, &model, 4).unwrap();
        let v = germ.voltage_coeffs(1);
        let q = germ.q_coeffs(0);
        assert!((v[1] - c(0.0, 0.2)).norm() < 1e-14);
        assert!((v[2] - c(-0.02, 0.0)).norm() < 1e-14);
        assert!(v[3].norm() < 1e-14);
        assert!((v[4] - c(-0.0002, 0.0)).norm() < 1e-14);
        assert!(q[1].abs() < 1e-14);
        assert!((q[2] - 0.1).abs() < 1e-14);
        assert!(q[3].abs() < 1e-14);
        assert!((q[4] - 0.001).abs() < 1e-14);
    }

    #[test]
    fn embedded_residual_vanishes_at_s_zero_and_for_flat_cases() {
        let net = meshed_net();
        let model = build_admittance(&net).unwrap();
        let germ = init_white_germ(&net, &model, EmbeddingKind::Canonical).unwrap();
        let germ = extend_series(germ, &net, &model, 8).unwrap();
        let r0 = embedded_residual(&germ, &net, &model, c(0.0, 0.0)).unwrap();
        for r in &r0 {
            assert!(r.norm() < 1e-12);
        }

        let flat = Network::new(
            vec![BusSpec::swing(1, c(1.0, 0.0)), BusSpec::pq(2, 0.0, 0.0)],
            vec![BranchSpec::line(1, 2, 0.0, 1.0)],
        )
        .unwrap();
        let fmodel = build_admittance(&flat).unwrap();
        let fgerm = init_white_germ(&flat, &fmodel, EmbeddingKind::Canonical).unwrap();
        let fgerm = extend_series(fgerm, &flat, &fmodel, 8).unwrap();
        for &s in &[0.3, 0.7, 1.0] {
            let r = embedded_residual(&fgerm, &flat, &fmodel, c(s, 0.0)).unwrap();
            for e in &r {
                assert!(e.norm() < 1e-13);
            }
        }
    }

    #[test]
    fn embedded_residual_order_scales_like_s_to_n_plus_one() {
        let net = two_bus_network(c(0.8, 0.55));
        let model = build_admittance(&net).unwrap();
        let builder = GermBuilder::new(&net, &model, EmbeddingKind::Minimal).unwrap();
        for order in [5usize, 10] {
            let mut germ = builder.init();
            builder.extend(&mut germ, order).unwrap();
            let r1 = crate::network::inf_norm(
                &embedded_residual(&germ, &net, &model, c(0.05, 0.0)).unwrap(),
            );
            let r2 = crate::network::inf_norm(
                &embedded_residual(&germ, &net, &model, c(0.1, 0.0)).unwrap(),
            );
            let slope = (r2 / r1).ln() / 2.0f64.ln();
            assert!(
                (slope - (order as f64 + 1.0)).abs() < 0.6,
                "order {order}: slope {slope}"
            );
        }
    }

    #[test]
    fn doubled_system_residuals_vanish_per_order() {
        let net = meshed_net();
        let model = build_admittance(&net).unwrap();
        for embedding in [EmbeddingKind::Minimal, EmbeddingKind::Canonical] {
            let germ = init_white_germ(&net, &model, embedding).unwrap();
            let germ = extend_series(germ, &net, &model, 25).unwrap();
            for n in 1..=25 {
                let res = coefficient_residuals(&germ, &net, &model, n);
                for b in res.balance.iter().chain(res.mirror.iter()) {
                    assert!(
                        b.norm() <= 1e-12 * res.scale,
                        "{embedding:?} order {n}: residual {b}"
                    );
                }
                for pc in &res.pv_constraint {
                    assert!(pc.abs() <= 1e-12 * res.scale, "{embedding:?} order {n}: {pc}");
                }
            }
        }
    }

    #[test]
    fn extend_to_lower_order_is_an_error() {
        let net = two_bus_network(c(0.1, 0.1));
        let model = build_admittance(&net).unwrap();
        let builder = GermBuilder::new(&net, &model, EmbeddingKind::Canonical).unwrap();
        let mut germ = builder.init();
        builder.extend(&mut germ, 6).unwrap();
        assert!(matches!(
            builder.extend(&mut germ, 3),
            Err(SeriesError::OrderNotAboveCurrent { have: 6, want: 3 })
        ));
    }
}
