//! Exact branch representation of registers entangled with coherent modes.
//!
//! A state is a finite sum `Σ_k c_k |r_k⟩ ⊗ Π_m |α_{k,m}⟩` where `r_k` is a
//! tuple of discrete register values (qubits or truncated Fock levels) and
//! each `α_{k,m}` is the coherent amplitude of bus or environment mode `m` in
//! branch `k`. Coherent states of different branches are not orthogonal, so
//! every norm, probability and reduced density matrix goes through the branch
//! Gram matrix. Nothing is truncated: the representation is exact at any
//! probe amplitude.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::analytics::DensityMatrix;
use crate::error::{Error, Result};
use crate::unitary;

pub type ComplexAmp = Complex64;

/// Amplitude tolerance used when merging branches after an operation.
pub const MERGE_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_NORM_TOLERANCE: f64 = 1e-10;
const UNITARY_TOLERANCE: f64 = 1e-12;

/// `⟨α|β⟩ = exp(−|α|²/2 − |β|²/2 + α*β)`.
///
/// Evaluated as `exp(−|α−β|²/2 + i·Im(α*β))`, which stays accurate for
/// amplitudes of order 10⁵.
pub fn coherent_overlap(alpha: ComplexAmp, beta: ComplexAmp) -> ComplexAmp {
    let d = alpha - beta;
    let phase = (alpha.conj() * beta).im;
    Complex64::from_polar((-0.5 * d.norm_sqr()).exp(), phase)
}

/// Stable handle of a discrete register mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiscreteId(pub(crate) usize);

impl DiscreteId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Stable handle of a bus or environment mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BusId(pub(crate) usize);

impl BusId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiscreteKind {
    /// Polarization qubit: 0 ≡ H, 1 ≡ V.
    Qubit,
    /// Photon number register holding values `0..levels`.
    Fock { levels: usize },
}

impl DiscreteKind {
    pub fn levels(self) -> usize {
        match self {
            DiscreteKind::Qubit => 2,
            DiscreteKind::Fock { levels } => levels,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeKind {
    Bus,
    Environment,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeStatus {
    Active,
    Consumed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscreteMode {
    pub id: DiscreteId,
    pub kind: DiscreteKind,
    pub status: ModeStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeInfo {
    pub id: BusId,
    pub kind: ModeKind,
    pub status: ModeStatus,
}

/// One term of the superposition. `register` and `bus` hold entries for the
/// active modes only, in creation order.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub amplitude: ComplexAmp,
    pub register: Vec<u16>,
    pub bus: Vec<ComplexAmp>,
}

impl Branch {
    /// `⟨self|other⟩` without the branch amplitudes.
    pub fn overlap(&self, other: &Branch) -> ComplexAmp {
        if self.register != other.register {
            return Complex64::new(0.0, 0.0);
        }
        self.bus
            .iter()
            .zip(&other.bus)
            .map(|(&a, &b)| coherent_overlap(a, b))
            .product()
    }
}

#[derive(Clone, Debug)]
pub struct CoherentBranchState {
    branches: Vec<Branch>,
    discrete: Vec<DiscreteMode>,
    modes: Vec<ModeInfo>,
    norm_tolerance: f64,
}

impl Default for CoherentBranchState {
    fn default() -> Self {
        Self::new()
    }
}

impl CoherentBranchState {
    /// The empty product: one branch of amplitude 1 and no modes.
    pub fn new() -> Self {
        Self {
            branches: vec![Branch {
                amplitude: Complex64::new(1.0, 0.0),
                register: Vec::new(),
                bus: Vec::new(),
            }],
            discrete: Vec::new(),
            modes: Vec::new(),
            norm_tolerance: DEFAULT_NORM_TOLERANCE,
        }
    }

    pub fn with_norm_tolerance(mut self, tol: f64) -> Self {
        self.norm_tolerance = tol;
        self
    }

    pub fn norm_tolerance(&self) -> f64 {
        self.norm_tolerance
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn discrete_modes(&self) -> &[DiscreteMode] {
        &self.discrete
    }

    pub fn bus_modes(&self) -> &[ModeInfo] {
        &self.modes
    }

    pub fn active_discrete(&self) -> Vec<DiscreteId> {
        self.discrete
            .iter()
            .filter(|m| m.status == ModeStatus::Active)
            .map(|m| m.id)
            .collect()
    }

    pub fn active_buses(&self) -> Vec<BusId> {
        self.modes
            .iter()
            .filter(|m| m.status == ModeStatus::Active)
            .map(|m| m.id)
            .collect()
    }

    pub fn discrete_kind(&self, id: DiscreteId) -> Result<DiscreteKind> {
        self.register_position(id)?;
        Ok(self.discrete[id.0].kind)
    }

    /// Tensor a fresh register mode in the state `Σ_v amps[v] |v⟩`.
    pub fn add_register(&mut self, kind: DiscreteKind, amps: &[ComplexAmp]) -> Result<DiscreteId> {
        if amps.len() != kind.levels() {
            return Err(Error::InvalidParameter {
                name: "amps",
                reason: format!("expected {} amplitudes, got {}", kind.levels(), amps.len()),
            });
        }
        let id = DiscreteId(self.discrete.len());
        self.discrete.push(DiscreteMode { id, kind, status: ModeStatus::Active });
        let mut out = Vec::with_capacity(self.branches.len() * amps.len());
        for b in &self.branches {
            for (v, &a) in amps.iter().enumerate() {
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let mut nb = b.clone();
                nb.amplitude *= a;
                nb.register.push(v as u16);
                out.push(nb);
            }
        }
        self.branches = out;
        self.ensure_nonempty()?;
        Ok(id)
    }

    pub fn add_qubit(&mut self, amps: [ComplexAmp; 2]) -> Result<DiscreteId> {
        self.add_register(DiscreteKind::Qubit, &amps)
    }

    /// Tensor `n` qubits in a joint state given over the `2^n` computational
    /// basis, first qubit most significant.
    pub fn add_qubits(&mut self, n: usize, amps: &[ComplexAmp]) -> Result<Vec<DiscreteId>> {
        if amps.len() != 1 << n {
            return Err(Error::InvalidParameter {
                name: "amps",
                reason: format!("expected {} amplitudes, got {}", 1usize << n, amps.len()),
            });
        }
        let ids: Vec<DiscreteId> = (0..n).map(|i| DiscreteId(self.discrete.len() + i)).collect();
        for &id in &ids {
            self.discrete.push(DiscreteMode { id, kind: DiscreteKind::Qubit, status: ModeStatus::Active });
        }
        let mut out = Vec::new();
        for b in &self.branches {
            for (idx, &a) in amps.iter().enumerate() {
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let mut nb = b.clone();
                nb.amplitude *= a;
                for q in 0..n {
                    nb.register.push(((idx >> (n - 1 - q)) & 1) as u16);
                }
                out.push(nb);
            }
        }
        self.branches = out;
        self.ensure_nonempty()?;
        Ok(ids)
    }

    /// Tensor a fresh bus mode in the coherent state `|alpha⟩`.
    pub fn add_bus(&mut self, alpha: ComplexAmp) -> BusId {
        self.push_mode(ModeKind::Bus, |_| alpha)
    }

    fn push_mode(&mut self, kind: ModeKind, mut amp: impl FnMut(&Branch) -> ComplexAmp) -> BusId {
        let id = BusId(self.modes.len());
        self.modes.push(ModeInfo { id, kind, status: ModeStatus::Active });
        for b in &mut self.branches {
            let a = amp(b);
            b.bus.push(a);
        }
        id
    }

    pub(crate) fn register_position(&self, id: DiscreteId) -> Result<usize> {
        match self.discrete.get(id.0) {
            Some(m) if m.status == ModeStatus::Active => Ok(self.discrete[..id.0]
                .iter()
                .filter(|m| m.status == ModeStatus::Active)
                .count()),
            _ => Err(Error::UnknownDiscreteMode(id.0)),
        }
    }

    fn qubit_position(&self, id: DiscreteId) -> Result<usize> {
        let pos = self.register_position(id)?;
        match self.discrete[id.0].kind {
            DiscreteKind::Qubit => Ok(pos),
            DiscreteKind::Fock { .. } => Err(Error::NotAQubit(id.0)),
        }
    }

    /// Position of an active mode of either kind.
    pub(crate) fn mode_position(&self, id: BusId) -> Result<usize> {
        match self.modes.get(id.0) {
            Some(m) if m.status == ModeStatus::Active => Ok(self.modes[..id.0]
                .iter()
                .filter(|m| m.status == ModeStatus::Active)
                .count()),
            _ => Err(Error::ConsumedMode(id.0)),
        }
    }

    /// Position of an active bus mode; environment modes are rejected.
    pub(crate) fn bus_position(&self, id: BusId) -> Result<usize> {
        let pos = self.mode_position(id)?;
        match self.modes[id.0].kind {
            ModeKind::Bus => Ok(pos),
            ModeKind::Environment => Err(Error::EnvironmentMode(id.0)),
        }
    }

    /// Amplitudes of an active mode, one per branch.
    pub fn bus_amplitudes(&self, id: BusId) -> Result<Vec<ComplexAmp>> {
        let p = self.mode_position(id)?;
        Ok(self.branches.iter().map(|b| b.bus[p]).collect())
    }

    /// Register values of an active discrete mode, one per branch.
    pub fn register_values(&self, id: DiscreteId) -> Result<Vec<u16>> {
        let p = self.register_position(id)?;
        Ok(self.branches.iter().map(|b| b.register[p]).collect())
    }

    pub fn apply_register_unitary(&mut self, id: DiscreteId, u: &Matrix2<ComplexAmp>) -> Result<()> {
        let defect = unitary::unitarity_defect(u);
        if defect > UNITARY_TOLERANCE {
            return Err(Error::NonUnitary(defect));
        }
        let p = self.qubit_position(id)?;
        let mut out = Vec::with_capacity(self.branches.len() * 2);
        for b in &self.branches {
            let col = b.register[p] as usize;
            for row in 0..2 {
                let m = u[(row, col)];
                if m == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let mut nb = b.clone();
                nb.amplitude *= m;
                nb.register[p] = row as u16;
                out.push(nb);
            }
        }
        self.branches = out;
        self.merge_duplicates(MERGE_TOLERANCE);
        Ok(())
    }

    /// Controlled-Z between two qubits: −1 on |VV⟩.
    pub fn controlled_z(&mut self, a: DiscreteId, b: DiscreteId) -> Result<()> {
        if a == b {
            return Err(Error::SameQubit);
        }
        let pa = self.qubit_position(a)?;
        let pb = self.qubit_position(b)?;
        for br in &mut self.branches {
            if br.register[pa] == 1 && br.register[pb] == 1 {
                br.amplitude = -br.amplitude;
            }
        }
        Ok(())
    }

    /// `exp(iθ n̂_mode n̂_bus)` with `n̂_mode` the register value.
    pub fn cross_kerr(&mut self, mode: DiscreteId, bus: BusId, theta: f64) -> Result<()> {
        let rp = self.register_position(mode)?;
        let bp = self.bus_position(bus)?;
        for b in &mut self.branches {
            let n = b.register[rp] as f64;
            if n != 0.0 {
                b.bus[bp] *= Complex64::cis(n * theta);
            }
        }
        Ok(())
    }

    /// Cross-Kerr with the one path of a qubit whose register equals `value`
    /// (value 0 interacts the H path, value 1 the V path).
    pub fn cross_kerr_on_value(&mut self, mode: DiscreteId, bus: BusId, theta: f64, value: u16) -> Result<()> {
        let rp = self.register_position(mode)?;
        let bp = self.bus_position(bus)?;
        let kick = Complex64::cis(theta);
        for b in &mut self.branches {
            if b.register[rp] == value {
                b.bus[bp] *= kick;
            }
        }
        Ok(())
    }

    pub fn bus_phase(&mut self, bus: BusId, phi: f64) -> Result<()> {
        let bp = self.bus_position(bus)?;
        let kick = Complex64::cis(phi);
        for b in &mut self.branches {
            b.bus[bp] *= kick;
        }
        Ok(())
    }

    /// `D(β)|α⟩ = e^{i·Im(βα*)} |α+β⟩`.
    pub fn displace(&mut self, bus: BusId, beta: ComplexAmp) -> Result<()> {
        let bp = self.bus_position(bus)?;
        for b in &mut self.branches {
            let a = b.bus[bp];
            b.amplitude *= Complex64::cis((beta * a.conj()).im);
            b.bus[bp] = a + beta;
        }
        Ok(())
    }

    /// Beam splitter of reflectivity `eta` against vacuum. The reflected
    /// part is kept as a new environment mode, so the global state stays
    /// pure; tracing it happens implicitly through the Gram matrix.
    pub fn loss_channel(&mut self, bus: BusId, eta: f64) -> Result<BusId> {
        if !(0.0..=1.0).contains(&eta) || !eta.is_finite() {
            return Err(Error::InvalidLoss(eta));
        }
        let bp = self.bus_position(bus)?;
        let transmit = (1.0 - eta * eta).sqrt();
        let env = self.push_mode(ModeKind::Environment, |b| b.bus[bp] * eta);
        for b in &mut self.branches {
            b.bus[bp] *= transmit;
        }
        Ok(env)
    }

    /// Drop a mode from every branch. The caller is responsible for having
    /// folded its contribution into the branch amplitudes.
    pub(crate) fn consume_mode(&mut self, id: BusId) -> Result<()> {
        let p = self.mode_position(id)?;
        for b in &mut self.branches {
            b.bus.remove(p);
        }
        self.modes[id.0].status = ModeStatus::Consumed;
        Ok(())
    }

    pub(crate) fn consume_register(&mut self, id: DiscreteId) -> Result<()> {
        let p = self.register_position(id)?;
        for b in &mut self.branches {
            b.register.remove(p);
        }
        self.discrete[id.0].status = ModeStatus::Consumed;
        Ok(())
    }

    pub(crate) fn branches_mut(&mut self) -> &mut Vec<Branch> {
        &mut self.branches
    }

    /// `G_jk = ⟨branch_j|branch_k⟩`.
    pub fn gram_matrix(&self) -> DMatrix<ComplexAmp> {
        let n = self.branches.len();
        DMatrix::from_fn(n, n, |j, k| self.branches[j].overlap(&self.branches[k]))
    }

    /// `Σ_jk c_j* c_k ⟨branch_j|branch_k⟩`.
    pub fn norm_squared(&self) -> f64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (j, bj) in self.branches.iter().enumerate() {
            total += bj.amplitude.norm_sqr();
            for bk in &self.branches[j + 1..] {
                total += 2.0 * (bj.amplitude.conj() * bk.amplitude * bj.overlap(bk)).re;
            }
        }
        total.re
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_squared();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / n.sqrt();
        for b in &mut self.branches {
            b.amplitude *= s;
        }
        Ok(())
    }

    /// Merge branches with equal registers and bus amplitudes within `tol`,
    /// keeping first-appearance order.
    pub fn merge_duplicates(&mut self, tol: f64) {
        let mut by_register: HashMap<Vec<u16>, Vec<usize>> = HashMap::new();
        let mut kept: Vec<Branch> = Vec::with_capacity(self.branches.len());
        for b in self.branches.drain(..) {
            let slot = by_register.entry(b.register.clone()).or_default();
            let hit = slot.iter().copied().find(|&i| {
                kept[i]
                    .bus
                    .iter()
                    .zip(&b.bus)
                    .all(|(x, y)| (x.re - y.re).abs() <= tol && (x.im - y.im).abs() <= tol)
            });
            match hit {
                Some(i) => kept[i].amplitude += b.amplitude,
                None => {
                    slot.push(kept.len());
                    kept.push(b);
                }
            }
        }
        self.branches = kept;
    }

    /// Merge duplicates, then drop branches whose own weight `|c_k|²` is
    /// below `tol²`. Fails if nothing survives.
    pub fn prune(&mut self, tol: f64) -> Result<()> {
        self.merge_duplicates(tol.max(MERGE_TOLERANCE));
        self.branches.retain(|b| b.amplitude.norm() >= tol);
        self.ensure_nonempty()
    }

    fn ensure_nonempty(&self) -> Result<()> {
        if self.branches.is_empty() {
            Err(Error::ZeroNorm)
        } else {
            Ok(())
        }
    }

    /// Whether `|N − 1|` is within the state's norm tolerance.
    pub fn is_normalized(&self) -> bool {
        (self.norm_squared() - 1.0).abs() < self.norm_tolerance
    }

    fn same_layout(&self, other: &Self) -> bool {
        self.active_discrete() == other.active_discrete()
            && self.active_buses() == other.active_buses()
            && self
                .active_discrete()
                .iter()
                .all(|id| self.discrete[id.0].kind == other.discrete[id.0].kind)
    }

    /// `⟨self|other⟩`.
    pub fn inner_product(&self, other: &Self) -> Result<ComplexAmp> {
        if !self.same_layout(other) {
            return Err(Error::LayoutMismatch);
        }
        let mut total = Complex64::new(0.0, 0.0);
        for a in &self.branches {
            for b in &other.branches {
                total += a.amplitude.conj() * b.amplitude * a.overlap(b);
            }
        }
        Ok(total)
    }

    /// `|⟨a|b⟩|² / (⟨a|a⟩⟨b|b⟩)`.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        let ip = self.inner_product(other)?;
        Ok(ip.norm_sqr() / (self.norm_squared() * other.norm_squared()))
    }

    /// Reduced density matrix of the listed discrete modes (first listed is
    /// the most significant index). All other registers and every bus or
    /// environment mode are traced out.
    pub fn reduced_density_matrix(&self, keep: &[DiscreteId]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::InvalidParameter { name: "keep", reason: "empty mode subset".into() });
        }
        let mut positions = Vec::with_capacity(keep.len());
        let mut dims = Vec::with_capacity(keep.len());
        for &id in keep {
            let p = self.register_position(id)?;
            if positions.contains(&p) {
                return Err(Error::InvalidParameter { name: "keep", reason: "repeated mode".into() });
            }
            positions.push(p);
            dims.push(self.discrete[id.0].kind.levels());
        }
        let dim: usize = dims.iter().product();
        let index = |reg: &[u16]| {
            positions.iter().zip(&dims).fold(0usize, |acc, (&p, &d)| acc * d + reg[p] as usize)
        };
        let traced: Vec<usize> = (0..self.branches.first().map_or(0, |b| b.register.len()))
            .filter(|p| !positions.contains(p))
            .collect();

        let mut rho = DMatrix::<ComplexAmp>::zeros(dim, dim);
        for bj in &self.branches {
            let rj = index(&bj.register);
            for bk in &self.branches {
                if traced.iter().any(|&p| bj.register[p] != bk.register[p]) {
                    continue;
                }
                let env: ComplexAmp = bk
                    .bus
                    .iter()
                    .zip(&bj.bus)
                    .map(|(&a, &b)| coherent_overlap(a, b))
                    .product();
                rho[(rj, index(&bk.register))] += bj.amplitude * bk.amplitude.conj() * env;
            }
        }
        let tr: f64 = (0..dim).map(|i| rho[(i, i)].re).sum();
        if !(tr > 0.0) {
            return Err(Error::ZeroNorm);
        }
        rho /= Complex64::new(tr, 0.0);
        Ok(DensityMatrix::new(dims, rho))
    }

    /// One line per branch: amplitude, register tuple, mode amplitudes, all
    /// reals at 17 significant digits, sorted by register then amplitudes.
    pub fn dump(&self) -> String {
        let mut order: Vec<&Branch> = self.branches.iter().collect();
        order.sort_by(|a, b| {
            a.register.cmp(&b.register).then_with(|| {
                a.bus
                    .iter()
                    .zip(&b.bus)
                    .map(|(x, y)| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        let mut out = String::new();
        for b in order {
            let reg: Vec<String> = b.register.iter().map(u16::to_string).collect();
            let bus: Vec<String> = b.bus.iter().map(|z| format!("({:.16e},{:.16e})", z.re, z.im)).collect();
            let _ = writeln!(
                out,
                "({:.16e},{:.16e}) [{}] [{}]",
                b.amplitude.re,
                b.amplitude.im,
                reg.join(","),
                bus.join(",")
            );
        }
        out
    }
}
