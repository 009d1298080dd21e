//! Full solve orchestration: germ extension in order increments, per-bus
//! Padé evaluation at `s = 1`, soundness gating on the original equations,
//! and status classification.
//!
//! Padé agreement alone is not trusted: a solve is `Converged` only when the
//! continued voltages also drive the original power-flow mismatch below
//! `mismatch_tol` (and PV moduli onto their setpoints). When the order
//! budget runs out, approximant poles sitting on the real interval `(0, 1]`
//! are the collapse signature that separates `NoSolution` from an undecided
//! `OrderBudgetExhausted`; only the former is a confident infeasibility
//! claim, and at finite order the split is a heuristic.

use num_complex::Complex;
use thiserror::Error;

use crate::network::{build_admittance, inf_norm, mismatch, Network, NetworkError};
use crate::pade::{estimate_branch_points, eval_near_diagonal, PadeResult, PadeStatus};
use crate::scalar::Scalar;
use crate::series::{EmbeddingKind, GermBuilder, GermSeries, SeriesError};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("invalid solve options: {0}")]
    InvalidOptions(String),
    #[error("solve_pv requires at least one PV bus")]
    NoPvBuses,
    #[error("invalid scan grid: {0}")]
    InvalidScanGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    NoSolution,
    OrderBudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct SolveOptions<T> {
    pub embedding: EmbeddingKind,
    pub max_order: usize,
    pub pade_tol: T,
    pub mismatch_tol: T,
    /// Orders added between Padé convergence checks.
    pub order_step: usize,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            embedding: EmbeddingKind::Canonical,
            max_order: 60,
            pade_tol: T::fr(1e-10),
            mismatch_tol: T::fr(1e-8),
            order_step: 5,
        }
    }
}

impl<T: Scalar> SolveOptions<T> {
    fn validate(&self) -> Result<(), SolveError> {
        if self.max_order < 5 {
            return Err(SolveError::InvalidOptions("max_order must be at least 5".into()));
        }
        if self.order_step == 0 {
            return Err(SolveError::InvalidOptions("order_step must be positive".into()));
        }
        if !(self.pade_tol > T::zero()) || !(self.mismatch_tol > T::zero()) {
            return Err(SolveError::InvalidOptions("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Padé diagnostics for one continued series.
#[derive(Debug, Clone)]
pub struct SeriesDiagnostics<T> {
    pub bus_id: u32,
    pub pade: PadeResult<T>,
}

#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    pub status: SolveStatus,
    pub embedding: EmbeddingKind,
    /// Bus ids in bus order, aligned with `v`.
    pub bus_ids: Vec<u32>,
    /// Final complex voltages, bus order.
    pub v: Vec<Complex<T>>,
    /// PV reactive injections `Q_k(1)`, aligned with `pv_bus_ids`.
    pub q_pv: Vec<T>,
    pub pv_bus_ids: Vec<u32>,
    pub mismatch_norm: T,
    pub order_used: usize,
    /// Voltage-series diagnostics per non-swing bus, bus order.
    pub bus_pade: Vec<SeriesDiagnostics<T>>,
    /// Reactive-series diagnostics per PV bus.
    pub q_pade: Vec<SeriesDiagnostics<T>>,
    /// Pooled denominator-root estimates, sorted by modulus.
    pub pole_estimates: Vec<Complex<T>>,
}

/// One point of an `s`-axis scan.
#[derive(Debug, Clone)]
pub struct ScanPoint<T> {
    pub s: T,
    /// Continued voltages when every bus converged at this `s`.
    pub values: Option<Vec<Complex<T>>>,
}

/// Heuristic membership test for "a singularity sits on the continuation
/// path": small imaginary part, real part in `(0, 1]` with a little slack
/// for the estimator's resolution at the cut tip.
fn on_unit_interval<T: Scalar>(p: Complex<T>) -> bool {
    p.re > T::zero() && p.re <= T::fr(1.02) && p.im.abs() <= T::fr(0.05)
}

/// Pole estimates with the table order backed off on degeneracy.
fn pole_scan<T: Scalar>(coeffs: &[Complex<T>], max_m: usize) -> Vec<Complex<T>> {
    let mut m = max_m.min((coeffs.len().saturating_sub(1)) / 2);
    while m >= 2 {
        match estimate_branch_points(coeffs, m) {
            Ok(poles) => return poles,
            Err(_) => m /= 2,
        }
    }
    Vec::new()
}

struct Evaluation<T> {
    all_converged: bool,
    v: Vec<Complex<T>>,
    q_pv: Vec<T>,
    bus_pade: Vec<SeriesDiagnostics<T>>,
    q_pade: Vec<SeriesDiagnostics<T>>,
}

fn evaluate_at_one<T: Scalar>(
    germ: &GermSeries<T>,
    network: &Network<T>,
    tol: T,
) -> Evaluation<T> {
    let one = Complex::new(T::one(), T::zero());
    let swing = network.swing_index();
    let n = network.n();

    let mut all_converged = true;
    let mut v = vec![Complex::new(T::zero(), T::zero()); n];
    let mut bus_pade = Vec::with_capacity(n - 1);
    v[swing] = germ.voltage_at(swing, one);
    for i in 0..n {
        if i == swing {
            continue;
        }
        let res = eval_near_diagonal(germ.voltage_coeffs(i), one, tol);
        all_converged &= res.status == PadeStatus::Converged;
        v[i] = res.final_value;
        bus_pade.push(SeriesDiagnostics { bus_id: network.buses()[i].id, pade: res });
    }

    let mut q_pv = Vec::new();
    let mut q_pade = Vec::new();
    for (slot, &i) in germ.pv_positions().iter().enumerate() {
        let coeffs: Vec<Complex<T>> =
            germ.q_coeffs(slot).iter().map(|&x| Complex::new(x, T::zero())).collect();
        let res = eval_near_diagonal(&coeffs, one, tol);
        all_converged &= res.status == PadeStatus::Converged;
        q_pv.push(res.final_value.re);
        q_pade.push(SeriesDiagnostics { bus_id: network.buses()[i].id, pade: res });
    }

    Evaluation { all_converged, v, q_pv, bus_pade, q_pade }
}

/// Solve the power flow by analytic continuation of the white germ.
pub fn solve<T: Scalar>(
    network: &Network<T>,
    options: &SolveOptions<T>,
) -> Result<SolveReport<T>, SolveError> {
    solve_detailed(network, options).map(|(report, _)| report)
}

/// Like [`solve`], additionally returning the computed germ (for series
/// dumps and diagnostics).
pub fn solve_detailed<T: Scalar>(
    network: &Network<T>,
    options: &SolveOptions<T>,
) -> Result<(SolveReport<T>, GermSeries<T>), SolveError> {
    options.validate()?;
    let model = build_admittance(network)?;
    let builder = GermBuilder::new(network, &model, options.embedding)?;
    let mut germ = builder.init();
    let bus_ids: Vec<u32> = network.buses().iter().map(|b| b.id).collect();
    let pv_bus_ids: Vec<u32> =
        network.pv_indices().iter().map(|&i| network.buses()[i].id).collect();

    loop {
        let target = (germ.order() + options.order_step).min(options.max_order);
        builder.extend(&mut germ, target)?;

        let eval = evaluate_at_one(&germ, network, options.pade_tol);
        if eval.all_converged {
            // soundness gate: the continued values must satisfy the original
            // equations, and PV moduli their setpoints
            if let Ok(mm) = mismatch(network, &model, &eval.v, &eval.q_pv) {
                let norm = inf_norm(&mm);
                let pv_dev = network
                    .pv_indices()
                    .iter()
                    .map(|&i| (eval.v[i].norm() - network.buses()[i].vsp).abs())
                    .fold(T::zero(), T::max);
                if norm <= options.mismatch_tol && pv_dev <= options.mismatch_tol {
                    let report = SolveReport {
                        status: SolveStatus::Converged,
                        embedding: options.embedding,
                        bus_ids,
                        v: eval.v,
                        q_pv: eval.q_pv,
                        pv_bus_ids,
                        mismatch_norm: norm,
                        order_used: germ.order(),
                        bus_pade: eval.bus_pade,
                        q_pade: eval.q_pade,
                        pole_estimates: Vec::new(),
                    };
                    return Ok((report, germ));
                }
            }
        }
        if germ.order() >= options.max_order {
            break;
        }
    }

    // order budget exhausted: look for a singularity on the path
    let swing = network.swing_index();
    let max_m = 30usize;
    let mut pooled: Vec<Complex<T>> = Vec::new();
    let mut eval = evaluate_at_one(&germ, network, options.pade_tol);
    for (pos, diag) in eval.bus_pade.iter_mut().enumerate() {
        let bus = if pos < swing { pos } else { pos + 1 };
        let poles = pole_scan(germ.voltage_coeffs(bus), max_m);
        diag.pade.pole_estimates = Some(poles.clone());
        pooled.extend(poles);
    }
    for (slot, diag) in eval.q_pade.iter_mut().enumerate() {
        let coeffs: Vec<Complex<T>> =
            germ.q_coeffs(slot).iter().map(|&x| Complex::new(x, T::zero())).collect();
        let poles = pole_scan(&coeffs, max_m);
        diag.pade.pole_estimates = Some(poles.clone());
        pooled.extend(poles);
    }
    pooled.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).expect("finite moduli"));

    let collapse_seen = pooled.iter().any(|&p| on_unit_interval(p));
    let status = if collapse_seen { SolveStatus::NoSolution } else { SolveStatus::OrderBudgetExhausted };

    let mismatch_norm = mismatch(network, &model, &eval.v, &eval.q_pv)
        .map(|mm| inf_norm(&mm))
        .unwrap_or_else(|_| T::infinity());

    let report = SolveReport {
        status,
        embedding: options.embedding,
        bus_ids,
        v: eval.v,
        q_pv: eval.q_pv,
        pv_bus_ids,
        mismatch_norm,
        order_used: germ.order(),
        bus_pade: eval.bus_pade,
        q_pade: eval.q_pade,
        pole_estimates: pooled,
    };
    Ok((report, germ))
}

/// PV-aware entry point; requires at least one PV bus and otherwise runs
/// the same orchestration (PV handling is automatic in [`solve`]).
pub fn solve_pv<T: Scalar>(
    network: &Network<T>,
    options: &SolveOptions<T>,
) -> Result<SolveReport<T>, SolveError> {
    if network.pv_indices().is_empty() {
        return Err(SolveError::NoPvBuses);
    }
    solve(network, options)
}

/// Evaluate the continuation on an ascending grid of real `s` values in
/// `(0, 1]`: a collapse-proximity profile.
pub fn scan<T: Scalar>(
    network: &Network<T>,
    options: &SolveOptions<T>,
    s_values: &[T],
) -> Result<Vec<ScanPoint<T>>, SolveError> {
    options.validate()?;
    for w in s_values.windows(2) {
        if !(w[0] < w[1]) {
            return Err(SolveError::InvalidScanGrid("s values must be strictly ascending".into()));
        }
    }
    if let Some(&first) = s_values.first() {
        if !(first > T::zero()) {
            return Err(SolveError::InvalidScanGrid("s values must be positive (the germ is exact at s = 0)".into()));
        }
    }

    let model = build_admittance(network)?;
    let builder = GermBuilder::new(network, &model, options.embedding)?;
    let mut germ = builder.init();
    builder.extend(&mut germ, options.max_order)?;

    let swing = network.swing_index();
    let n = network.n();
    let mut out = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let sc = Complex::new(s, T::zero());
        let mut v = vec![Complex::new(T::zero(), T::zero()); n];
        v[swing] = germ.voltage_at(swing, sc);
        let mut ok = true;
        for i in 0..n {
            if i == swing {
                continue;
            }
            let res = eval_near_diagonal(germ.voltage_coeffs(i), sc, options.pade_tol);
            if res.status != PadeStatus::Converged {
                ok = false;
                break;
            }
            v[i] = res.final_value;
        }
        if ok {
            for slot in 0..germ.pv_positions().len() {
                let coeffs: Vec<Complex<T>> =
                    germ.q_coeffs(slot).iter().map(|&x| Complex::new(x, T::zero())).collect();
                if eval_near_diagonal(&coeffs, sc, options.pade_tol).status != PadeStatus::Converged {
                    ok = false;
                    break;
                }
            }
        }
        out.push(ScanPoint { s, values: if ok { Some(v) } else { None } });
    }
    Ok(out)
}

/// Largest grid point at which the scan converged.
pub fn largest_converged<T: Scalar>(points: &[ScanPoint<T>]) -> Option<T> {
    points.iter().rev().find(|p| p.values.is_some()).map(|p| p.s)
}
