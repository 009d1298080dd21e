//! Network data model, admittance matrices, and power mismatch.
//!
//! Sign convention: complex injections `S_i = P_i + jQ_i` are positive *into*
//! the bus, so generation is positive and load is negative. All quantities
//! are per-unit on the case base; no unit conversion happens in the solver.
//!
//! Branches are stamped on a pi model with the off-nominal tap on the `from`
//! side. With series admittance `y = 1/(r + jx)`, charging `b`, ratio `t` and
//! phase shift `θ`:
//!
//! ```text
//! Y[f][f] += (y + jb/2) / t²      Y[f][t] += -y / (t e^{-jθ})
//! Y[t][t] += (y + jb/2)           Y[t][f] += -y / (t e^{+jθ})
//! ```
//!
//! The canonical transmission/shunt split takes `y_sh[i]` as the row sum of
//! the full matrix and `y_tr = y_full - diag(y_sh)`, which makes the row sums
//! of `y_tr` vanish by construction.

use num_complex::Complex;
use thiserror::Error;

use crate::linsolve::SparseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Swing,
    Pq,
    Pv,
}

/// One bus record. Fields that do not apply to the bus kind are zero
/// (`vsp`, `q`) or one (`vswing`) and ignored.
#[derive(Debug, Clone)]
pub struct BusSpec<T> {
    pub id: u32,
    pub kind: BusKind,
    /// Active injection, positive into the bus.
    pub p: T,
    /// Reactive injection (PQ buses).
    pub q: T,
    /// Voltage-magnitude setpoint (PV buses).
    pub vsp: T,
    /// Fixed complex voltage (swing bus).
    pub vswing: Complex<T>,
    pub gsh: T,
    pub bsh: T,
}

impl<T: Scalar> BusSpec<T> {
    pub fn swing(id: u32, vswing: Complex<T>) -> Self {
        Self {
            id,
            kind: BusKind::Swing,
            p: T::zero(),
            q: T::zero(),
            vsp: T::zero(),
            vswing,
            gsh: T::zero(),
            bsh: T::zero(),
        }
    }

    pub fn pq(id: u32, p: T, q: T) -> Self {
        Self {
            id,
            kind: BusKind::Pq,
            p,
            q,
            vsp: T::zero(),
            vswing: Complex::new(T::one(), T::zero()),
            gsh: T::zero(),
            bsh: T::zero(),
        }
    }

    pub fn pv(id: u32, p: T, vsp: T) -> Self {
        Self {
            id,
            kind: BusKind::Pv,
            p,
            q: T::zero(),
            vsp,
            vswing: Complex::new(T::one(), T::zero()),
            gsh: T::zero(),
            bsh: T::zero(),
        }
    }

    pub fn with_shunt(mut self, gsh: T, bsh: T) -> Self {
        self.gsh = gsh;
        self.bsh = bsh;
        self
    }
}

/// One branch record (line or transformer). `shift_deg` follows the file
/// convention of degrees; conversion to radians happens at stamping time.
#[derive(Debug, Clone)]
pub struct BranchSpec<T> {
    pub from: u32,
    pub to: u32,
    pub r: T,
    pub x: T,
    /// Total line-charging susceptance.
    pub b: T,
    pub tap: T,
    pub shift_deg: T,
}

impl<T: Scalar> BranchSpec<T> {
    pub fn line(from: u32, to: u32, r: T, x: T) -> Self {
        Self { from, to, r, x, b: T::zero(), tap: T::one(), shift_deg: T::zero() }
    }

    pub fn with_charging(mut self, b: T) -> Self {
        self.b = b;
        self
    }

    pub fn with_tap(mut self, tap: T, shift_deg: T) -> Self {
        self.tap = tap;
        self.shift_deg = shift_deg;
        self
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("bus ids must be positive")]
    NonPositiveBusId,
    #[error("duplicate bus id {0}")]
    DuplicateBusId(u32),
    #[error("network has no swing bus")]
    NoSwingBus,
    #[error("multiple swing buses (ids {0} and {1})")]
    MultipleSwingBuses(u32, u32),
    #[error("PV bus {0} has non-positive voltage setpoint")]
    NonPositiveSetpoint(u32),
    #[error("branch references unknown bus id {0}")]
    UnknownBus(u32),
    #[error("branch from bus {0} to itself")]
    SelfLoop(u32),
    #[error("branch {from}-{to} has zero series impedance (r = x = 0)")]
    ZeroImpedance { from: u32, to: u32 },
    #[error("branch {from}-{to} has non-positive tap ratio")]
    NonPositiveTap { from: u32, to: u32 },
    #[error("bus {0} is not connected to the swing bus")]
    DisconnectedBus(u32),
    #[error("voltage at bus {0} is zero; constant-power term undefined")]
    ZeroVoltage(u32),
    #[error("expected {expected} PV reactive injections, got {got}")]
    PvCountMismatch { expected: usize, got: usize },
}

/// Validated problem instance.
#[derive(Debug, Clone)]
pub struct Network<T> {
    buses: Vec<BusSpec<T>>,
    branches: Vec<BranchSpec<T>>,
    index_of: std::collections::HashMap<u32, usize>,
    swing: usize,
}

impl<T: Scalar> Network<T> {
    pub fn new(buses: Vec<BusSpec<T>>, branches: Vec<BranchSpec<T>>) -> Result<Self, NetworkError> {
        let mut index_of = std::collections::HashMap::new();
        let mut swing = None;
        for (i, bus) in buses.iter().enumerate() {
            if bus.id == 0 {
                return Err(NetworkError::NonPositiveBusId);
            }
            if index_of.insert(bus.id, i).is_some() {
                return Err(NetworkError::DuplicateBusId(bus.id));
            }
            match bus.kind {
                BusKind::Swing => match swing {
                    None => swing = Some(i),
                    Some(first) => {
                        return Err(NetworkError::MultipleSwingBuses(buses[first].id, bus.id))
                    }
                },
                BusKind::Pv => {
                    if bus.vsp <= T::zero() {
                        return Err(NetworkError::NonPositiveSetpoint(bus.id));
                    }
                }
                BusKind::Pq => {}
            }
        }
        let swing = swing.ok_or(NetworkError::NoSwingBus)?;

        for br in &branches {
            if br.from == br.to {
                return Err(NetworkError::SelfLoop(br.from));
            }
            for end in [br.from, br.to] {
                if !index_of.contains_key(&end) {
                    return Err(NetworkError::UnknownBus(end));
                }
            }
            if br.r == T::zero() && br.x == T::zero() {
                return Err(NetworkError::ZeroImpedance { from: br.from, to: br.to });
            }
            if br.tap <= T::zero() {
                return Err(NetworkError::NonPositiveTap { from: br.from, to: br.to });
            }
        }

        let net = Self { buses, branches, index_of, swing };
        net.check_connectivity()?;
        Ok(net)
    }

    fn check_connectivity(&self) -> Result<(), NetworkError> {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for br in &self.branches {
            let f = self.index_of[&br.from];
            let t = self.index_of[&br.to];
            adj[f].push(t);
            adj[t].push(f);
        }
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([self.swing]);
        seen[self.swing] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        for (i, ok) in seen.iter().enumerate() {
            if !ok {
                return Err(NetworkError::DisconnectedBus(self.buses[i].id));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.buses.len()
    }

    pub fn buses(&self) -> &[BusSpec<T>] {
        &self.buses
    }

    pub fn branches(&self) -> &[BranchSpec<T>] {
        &self.branches
    }

    pub fn swing_index(&self) -> usize {
        self.swing
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.index_of.get(&id).copied()
    }

    /// Positions of PV buses, in bus order.
    pub fn pv_indices(&self) -> Vec<usize> {
        self.buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind == BusKind::Pv)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn swing_voltage(&self) -> Complex<T> {
        self.buses[self.swing].vswing
    }
}

/// Full admittance matrix plus its canonical transmission/shunt split.
///
/// Invariants: `y_full = y_tr + diag(y_sh)` with the diagonal of `y_tr`
/// computed as `y_full[i][i] - y_sh[i]` (no re-stamping), and every row sum
/// of `y_tr` vanishes to round-off.
#[derive(Debug, Clone)]
pub struct AdmittanceModel<T> {
    pub y_full: SparseMatrix<Complex<T>>,
    pub y_tr: SparseMatrix<Complex<T>>,
    pub y_sh: Vec<Complex<T>>,
}

/// Stamp the branch pi models and bus shunts, then split row sums into
/// the shunt vector.
pub fn build_admittance<T: Scalar>(network: &Network<T>) -> Result<AdmittanceModel<T>, NetworkError> {
    let n = network.n();
    let mut tri: Vec<(usize, usize, Complex<T>)> = Vec::with_capacity(4 * network.branches().len() + n);

    for br in network.branches() {
        let f = network.index_of(br.from).expect("validated");
        let t = network.index_of(br.to).expect("validated");
        let z = Complex::new(br.r, br.x);
        let y = Complex::new(T::one(), T::zero()) / z;
        let half_b = Complex::new(T::zero(), br.b / T::fr(2.0));
        let tap = br.tap;
        let shift = br.shift_deg.to_radians();
        let phase = Complex::from_polar(T::one(), shift);

        tri.push((f, f, (y + half_b) / Complex::new(tap * tap, T::zero())));
        tri.push((t, t, y + half_b));
        // from->to entry couples through t e^{-jθ}, to->from through t e^{+jθ}
        tri.push((f, t, -y / (phase.conj() * tap)));
        tri.push((t, f, -y / (phase * tap)));
    }
    for (i, bus) in network.buses().iter().enumerate() {
        if bus.gsh != T::zero() || bus.bsh != T::zero() {
            tri.push((i, i, Complex::new(bus.gsh, bus.bsh)));
        }
    }

    let y_full = SparseMatrix::from_triplets(n, n, &tri).expect("indices in range");

    // shunt = row sum; zero row sums of y_tr hold by construction
    let mut y_sh = vec![Complex::new(T::zero(), T::zero()); n];
    for j in 0..n {
        for (i, v) in y_full.col(j) {
            y_sh[i] = y_sh[i] + v;
        }
    }
    let mut tr_tri: Vec<(usize, usize, Complex<T>)> = Vec::with_capacity(y_full.nnz() + n);
    let mut diag_seen = vec![false; n];
    for j in 0..n {
        for (i, v) in y_full.col(j) {
            if i == j {
                tr_tri.push((i, j, v - y_sh[i]));
                diag_seen[i] = true;
            } else {
                tr_tri.push((i, j, v));
            }
        }
    }
    for (i, seen) in diag_seen.iter().enumerate() {
        if !seen {
            tr_tri.push((i, i, -y_sh[i]));
        }
    }
    let y_tr = SparseMatrix::from_triplets(n, n, &tr_tri).expect("indices in range");

    Ok(AdmittanceModel { y_full, y_tr, y_sh })
}

/// Residual of the power-flow equations at a candidate voltage vector:
/// `sum_k Y_ik v_k - S_i* / v_i*` for every non-swing bus. The swing entry
/// is zero by convention. `q_pv` supplies the reactive injection of each PV
/// bus, in `pv_indices` order.
pub fn mismatch<T: Scalar>(
    network: &Network<T>,
    model: &AdmittanceModel<T>,
    v: &[Complex<T>],
    q_pv: &[T],
) -> Result<Vec<Complex<T>>, NetworkError> {
    assert_eq!(v.len(), network.n(), "voltage vector length mismatch");
    let pv = network.pv_indices();
    if q_pv.len() != pv.len() {
        return Err(NetworkError::PvCountMismatch { expected: pv.len(), got: q_pv.len() });
    }
    for (i, vi) in v.iter().enumerate() {
        if vi.norm_sqr() == T::zero() {
            return Err(NetworkError::ZeroVoltage(network.buses()[i].id));
        }
    }

    let mut out = model.y_full.matvec(v);
    let mut pv_pos = 0usize;
    for (i, bus) in network.buses().iter().enumerate() {
        match bus.kind {
            BusKind::Swing => out[i] = Complex::new(T::zero(), T::zero()),
            BusKind::Pq => {
                let s = Complex::new(bus.p, bus.q);
                out[i] = out[i] - s.conj() / v[i].conj();
            }
            BusKind::Pv => {
                let s = Complex::new(bus.p, q_pv[pv_pos]);
                pv_pos += 1;
                out[i] = out[i] - s.conj() / v[i].conj();
            }
        }
    }
    Ok(out)
}

/// Infinity norm of a complex residual vector.
pub fn inf_norm<T: Scalar>(v: &[Complex<T>]) -> T {
    v.iter().map(|c| c.norm()).fold(T::zero(), T::max)
}
