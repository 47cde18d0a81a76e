//! Dense truncated-Fock simulator of the same primitives, for validation.
//!
//! Every mode is a vector over `|0⟩..|cutoff−1⟩`, registers are one-hot
//! axes, and operators are built from their Fock matrix elements. Slow on
//! purpose and only valid at small amplitude.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::branch::{BusId, CoherentBranchState, DiscreteId, DiscreteKind};
use crate::error::{Error, Result};
use crate::measure::{number_amplitude, required_cutoff};

/// Largest coherent amplitude the oracle accepts.
pub const ORACLE_MAX_AMPLITUDE: f64 = 3.0;
const MAX_MODES: usize = 2;
const MAX_REGISTER_DIM: usize = 9;
const LEAK_BOUND: f64 = 1e-8;

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Cutoff satisfying the leak bound for amplitudes up to `max_abs`.
pub fn oracle_cutoff(max_abs: f64) -> usize {
    required_cutoff(max_abs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    Register(DiscreteId, DiscreteKind),
    Mode(BusId),
}

#[derive(Clone, Debug)]
pub struct FockState {
    axes: Vec<Axis>,
    dims: Vec<usize>,
    amps: Vec<Complex64>,
    next_mode: usize,
}

impl FockState {
    /// Expand a branch state into the Fock basis. `cutoffs` gives one
    /// level count per active mode; `None` picks the leak-bound default.
    pub fn expand(state: &CoherentBranchState, cutoffs: Option<&[usize]>) -> Result<Self> {
        let regs = state.active_discrete();
        let modes = state.active_buses();
        if modes.len() > MAX_MODES {
            return Err(Error::OracleRegime(format!("{} modes, at most {MAX_MODES}", modes.len())));
        }
        let mut reg_dim = 1;
        for &r in &regs {
            reg_dim *= state.discrete_kind(r)?.levels();
        }
        if reg_dim > MAX_REGISTER_DIM {
            return Err(Error::OracleRegime(format!("register dimension {reg_dim} above {MAX_REGISTER_DIM}")));
        }
        let max_abs = state
            .branches()
            .iter()
            .flat_map(|b| b.bus.iter())
            .map(|a| a.norm())
            .fold(0.0, f64::max);
        if max_abs > ORACLE_MAX_AMPLITUDE + 1e-12 {
            return Err(Error::OracleRegime(format!("amplitude {max_abs:.3} above {ORACLE_MAX_AMPLITUDE}")));
        }
        let cut: Vec<usize> = match cutoffs {
            Some(c) if c.len() == modes.len() => c.to_vec(),
            Some(_) => return Err(Error::OracleRegime("one cutoff per active mode required".into())),
            None => vec![oracle_cutoff(max_abs); modes.len()],
        };
        let out = Self::fill(state, &cut)?;
        let leak = 1.0 - out.norm_squared() / state.norm_squared();
        if leak > LEAK_BOUND {
            return Err(Error::OracleRegime(format!("cutoff leaks {leak:.2e}")));
        }
        Ok(out)
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn mode_axis(&self, id: BusId) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| *a == Axis::Mode(id))
            .ok_or(Error::ConsumedMode(id.index()))
    }

    fn register_axis(&self, id: DiscreteId) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| matches!(a, Axis::Register(r, _) if *r == id))
            .ok_or(Error::UnknownDiscreteMode(id.index()))
    }

    /// (outer, dim, inner) strides of an axis.
    fn layout(&self, axis: usize) -> (usize, usize, usize) {
        let outer = self.dims[..axis].iter().product();
        let inner = self.dims[axis + 1..].iter().product();
        (outer, self.dims[axis], inner)
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for a in (0..self.dims.len()).rev() {
            idx[a] = flat % self.dims[a];
            flat /= self.dims[a];
        }
        idx
    }

    fn apply_axis(&mut self, axis: usize, m: &DMatrix<Complex64>) {
        let (outer, d, inner) = self.layout(axis);
        let mut col = vec![Complex64::new(0.0, 0.0); d];
        for o in 0..outer {
            for i in 0..inner {
                for (k, c) in col.iter_mut().enumerate() {
                    *c = self.amps[(o * d + k) * inner + i];
                }
                for r in 0..d {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (k, c) in col.iter().enumerate() {
                        acc += m[(r, k)] * c;
                    }
                    self.amps[(o * d + r) * inner + i] = acc;
                }
            }
        }
    }

    fn leak_check(&self, before: f64) -> Result<()> {
        let leak = 1.0 - self.norm_squared() / before;
        if leak > LEAK_BOUND {
            return Err(Error::OracleRegime(format!("cutoff leaks {leak:.2e}")));
        }
        Ok(())
    }

    pub fn apply_register_unitary(&mut self, id: DiscreteId, u: &Matrix2<Complex64>) -> Result<()> {
        let axis = self.register_axis(id)?;
        if self.dims[axis] != 2 {
            return Err(Error::NotAQubit(id.index()));
        }
        let m = DMatrix::from_fn(2, 2, |r, c| u[(r, c)]);
        self.apply_axis(axis, &m);
        Ok(())
    }

    fn diagonal_phase(&mut self, phase: impl Fn(&[usize]) -> f64) {
        for flat in 0..self.amps.len() {
            let idx = self.multi_index(flat);
            let p = phase(&idx);
            if p != 0.0 {
                self.amps[flat] *= Complex64::cis(p);
            }
        }
    }

    /// `exp(iθ n̂_reg n̂_mode)`.
    pub fn cross_kerr(&mut self, reg: DiscreteId, mode: BusId, theta: f64) -> Result<()> {
        let (ra, ma) = (self.register_axis(reg)?, self.mode_axis(mode)?);
        self.diagonal_phase(|idx| theta * (idx[ra] * idx[ma]) as f64);
        Ok(())
    }

    /// Cross-Kerr with the path whose register value equals `value`.
    pub fn cross_kerr_on_value(&mut self, reg: DiscreteId, mode: BusId, theta: f64, value: usize) -> Result<()> {
        let (ra, ma) = (self.register_axis(reg)?, self.mode_axis(mode)?);
        self.diagonal_phase(|idx| if idx[ra] == value { theta * idx[ma] as f64 } else { 0.0 });
        Ok(())
    }

    pub fn bus_phase(&mut self, mode: BusId, phi: f64) -> Result<()> {
        let ma = self.mode_axis(mode)?;
        self.diagonal_phase(|idx| phi * idx[ma] as f64);
        Ok(())
    }

    /// Truncated `D(β)` from its closed-form matrix elements.
    pub fn displace(&mut self, mode: BusId, beta: Complex64) -> Result<()> {
        if beta.norm() > ORACLE_MAX_AMPLITUDE + 1e-12 {
            return Err(Error::OracleRegime(format!("displacement {:.3} above {ORACLE_MAX_AMPLITUDE}", beta.norm())));
        }
        let axis = self.mode_axis(mode)?;
        let before = self.norm_squared();
        let d = displacement_matrix(beta, self.dims[axis]);
        self.apply_axis(axis, &d);
        self.leak_check(before)
    }

    /// Number-preserving beam splitter between `mode` and a fresh vacuum
    /// mode of `cutoff` levels: `a† → t a† + r b†`, `b† → −r a† + t b†`
    /// with `r = eta`, `t = √(1−η²)`. Returns the new mode's id.
    pub fn beam_splitter(&mut self, mode: BusId, eta: f64, cutoff: usize) -> Result<BusId> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidLoss(eta));
        }
        let axes_modes = self.axes.iter().filter(|a| matches!(a, Axis::Mode(_))).count();
        if axes_modes + 1 > MAX_MODES {
            return Err(Error::OracleRegime("beam splitter would exceed the mode limit".into()));
        }
        let a_axis = self.mode_axis(mode)?;
        let before = self.norm_squared();
        let env = BusId(self.next_mode);
        self.next_mode += 1;
        // append the vacuum axis
        let old = std::mem::take(&mut self.amps);
        self.amps = old
            .into_iter()
            .flat_map(|a| std::iter::once(a).chain(std::iter::repeat_n(Complex64::new(0.0, 0.0), cutoff - 1)))
            .collect();
        self.axes.push(Axis::Mode(env));
        self.dims.push(cutoff);
        let b_axis = self.axes.len() - 1;

        let t = (1.0 - eta * eta).sqrt();
        let r = eta;
        let da = self.dims[a_axis];
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        let stride_a: usize = self.dims[a_axis + 1..].iter().product();
        let stride_b = 1usize;
        for flat in 0..self.amps.len() {
            let amp = self.amps[flat];
            if amp == Complex64::new(0.0, 0.0) {
                continue;
            }
            let idx = self.multi_index(flat);
            let (n1, n2) = (idx[a_axis], idx[b_axis]);
            let base = flat - n1 * stride_a - n2 * stride_b;
            let total = n1 + n2;
            let norm = -0.5 * (ln_factorial(n1) + ln_factorial(n2));
            for i in 0..=n1 {
                for j in 0..=n2 {
                    let (ma, mb) = (i + j, total - i - j);
                    if ma >= da || mb >= cutoff {
                        continue;
                    }
                    let pow_t = (i + n2 - j) as i32;
                    let pow_r = (n1 - i + j) as i32;
                    if (t == 0.0 && pow_t > 0) || (r == 0.0 && pow_r > 0) {
                        continue;
                    }
                    let ln_mag = ln_binom(n1, i) + ln_binom(n2, j) + norm + 0.5 * (ln_factorial(ma) + ln_factorial(mb));
                    let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
                    let coef = sign * ln_mag.exp() * t.powi(pow_t) * r.powi(pow_r);
                    out[base + ma * stride_a + mb * stride_b] += amp * coef;
                }
            }
        }
        self.amps = out;
        self.leak_check(before)?;
        Ok(env)
    }

    /// Quadrature density of `mode` at `x` via Hermite-function wavefunctions.
    pub fn homodyne_pdf(&self, mode: BusId, xi: f64, x: f64) -> Result<f64> {
        let axis = self.mode_axis(mode)?;
        let psi = quadrature_wavefunctions(x, xi, self.dims[axis]);
        let (outer, d, inner) = self.layout(axis);
        let mut p = 0.0;
        for o in 0..outer {
            for i in 0..inner {
                let a: Complex64 = (0..d).map(|n| psi[n] * self.amps[(o * d + n) * inner + i]).sum();
                p += a.norm_sqr();
            }
        }
        Ok(p / self.norm_squared())
    }

    pub fn photon_pmf(&self, mode: BusId, n: usize) -> Result<f64> {
        let axis = self.mode_axis(mode)?;
        let (outer, d, inner) = self.layout(axis);
        if n >= d {
            return Err(Error::PhotonNumberOutOfRange { n, n_max: d - 1 });
        }
        let mut p = 0.0;
        for o in 0..outer {
            for i in 0..inner {
                p += self.amps[(o * d + n) * inner + i].norm_sqr();
            }
        }
        Ok(p / self.norm_squared())
    }

    fn contract_mode(&mut self, axis: usize, weights: &[Complex64]) -> Result<f64> {
        let before = self.norm_squared();
        let (outer, d, inner) = self.layout(axis);
        let mut out = vec![Complex64::new(0.0, 0.0); outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                out[o * inner + i] = (0..d).map(|n| weights[n] * self.amps[(o * d + n) * inner + i]).sum();
            }
        }
        self.amps = out;
        self.axes.remove(axis);
        self.dims.remove(axis);
        let w = self.norm_squared() / before;
        if !(w > 0.0) {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / self.norm_squared().sqrt();
        self.amps.iter_mut().for_each(|a| *a *= s);
        Ok(w)
    }

    /// Project `mode` onto `|n⟩` and drop it; returns `P(n)`.
    pub fn condition_on_photon_number(&mut self, mode: BusId, n: usize) -> Result<f64> {
        let axis = self.mode_axis(mode)?;
        let mut w = vec![Complex64::new(0.0, 0.0); self.dims[axis]];
        *w.get_mut(n).ok_or(Error::PhotonNumberOutOfRange { n, n_max: self.dims[axis] - 1 })? = Complex64::new(1.0, 0.0);
        self.contract_mode(axis, &w)
    }

    /// Project `mode` onto quadrature value `x` and drop it; returns the density.
    pub fn condition_on_quadrature(&mut self, mode: BusId, xi: f64, x: f64) -> Result<f64> {
        let axis = self.mode_axis(mode)?;
        let psi: Vec<Complex64> = quadrature_wavefunctions(x, xi, self.dims[axis]);
        self.contract_mode(axis, &psi)
    }

    /// Trace out every mode and return the register state, or fail if a
    /// mode is still present.
    pub fn register_vector(&self) -> Result<Vec<Complex64>> {
        if self.axes.iter().any(|a| matches!(a, Axis::Mode(_))) {
            return Err(Error::LayoutMismatch);
        }
        Ok(self.amps.clone())
    }

    /// `⟨self|other⟩ / (‖self‖‖other‖)` after expanding `other` on the same
    /// cutoffs. No regime cap on `other`, so states displaced out of the
    /// regime can still be compared.
    pub fn overlap_with(&self, other: &CoherentBranchState) -> Result<Complex64> {
        let cut: Vec<usize> = self
            .axes
            .iter()
            .zip(&self.dims)
            .filter(|(a, _)| matches!(a, Axis::Mode(_)))
            .map(|(_, &d)| d)
            .collect();
        let ex = FockState::fill(other, &cut)?;
        if ex.axes != self.axes {
            return Err(Error::LayoutMismatch);
        }
        let ip: Complex64 = self.amps.iter().zip(&ex.amps).map(|(a, b)| a.conj() * b).sum();
        Ok(ip / (self.norm_squared() * ex.norm_squared()).sqrt())
    }

    pub fn fidelity_with(&self, other: &CoherentBranchState) -> Result<f64> {
        Ok(self.overlap_with(other)?.norm_sqr())
    }

    /// Coherent expansion on the given cutoffs, no regime checks.
    fn fill(state: &CoherentBranchState, cut: &[usize]) -> Result<Self> {
        let modes = state.active_buses();
        if cut.len() != modes.len() {
            return Err(Error::OracleRegime("one cutoff per active mode required".into()));
        }
        let mut axes = Vec::new();
        let mut dims = Vec::new();
        for r in state.active_discrete() {
            let kind = state.discrete_kind(r)?;
            axes.push(Axis::Register(r, kind));
            dims.push(kind.levels());
        }
        for (&m, &c) in modes.iter().zip(cut) {
            axes.push(Axis::Mode(m));
            dims.push(c);
        }
        let mode_total: usize = cut.iter().product();
        let mut amps = vec![Complex64::new(0.0, 0.0); dims.iter().product()];
        for b in state.branches() {
            let mut base = 0usize;
            for (p, &v) in b.register.iter().enumerate() {
                base = base * dims[p] + v as usize;
            }
            let vectors: Vec<Vec<Complex64>> = b
                .bus
                .iter()
                .zip(cut)
                .map(|(&a, &c)| (0..c).map(|n| number_amplitude(n, a)).collect())
                .collect();
            for flat in 0..mode_total {
                let mut rem = flat;
                let mut amp = b.amplitude;
                for (m, v) in vectors.iter().enumerate().rev() {
                    amp *= v[rem % cut[m]];
                    rem /= cut[m];
                }
                amps[base * mode_total + flat] += amp;
            }
        }
        Ok(Self { axes, dims, amps, next_mode: state.bus_modes().len() })
    }
}

fn ln_binom(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Generalized Laguerre `L_n^{(k)}(x)` by the three-term recurrence.
fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let k = k as f64;
    let (mut prev, mut cur) = (1.0, 1.0 + k - x);
    if n == 0 {
        return prev;
    }
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * cur - (jf + k) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `⟨m|D(β)|n⟩` for `m, n < dim`.
pub fn displacement_matrix(beta: Complex64, dim: usize) -> DMatrix<Complex64> {
    let x = beta.norm_sqr();
    let r = beta.norm();
    DMatrix::from_fn(dim, dim, |m, n| {
        let (lo, hi) = (m.min(n), m.max(n));
        let k = hi - lo;
        let lag = laguerre(lo, k, x);
        if k == 0 {
            return Complex64::new((-0.5 * x).exp() * lag, 0.0);
        }
        if r == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let ln_mag = 0.5 * (ln_factorial(lo) - ln_factorial(hi)) + k as f64 * r.ln() - 0.5 * x;
        // β^k below the diagonal, (−β*)^k above
        let phase = if m > n { beta.arg() * k as f64 } else { (-beta.conj()).arg() * k as f64 };
        Complex64::from_polar(ln_mag.exp() * lag, phase)
    })
}

/// `⟨x|n⟩` of the quadrature `x(ξ)` for `n < dim`: `e^{inξ}` times the
/// Hermite function in units where the vacuum variance is 1.
pub fn quadrature_wavefunctions(x: f64, xi: f64, dim: usize) -> Vec<Complex64> {
    let q = x / std::f64::consts::SQRT_2;
    let mut h = Vec::with_capacity(dim);
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * q * q).exp();
    for n in 0..dim {
        h.push(cur);
        let next = (2.0 / (n as f64 + 1.0)).sqrt() * q * cur - (n as f64 / (n as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    let scale = 2f64.powf(-0.25);
    h.into_iter()
        .enumerate()
        .map(|(n, v)| Complex64::cis(n as f64 * xi) * (scale * v))
        .collect()
}

/// One primitive compared between the branch simulator and the oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    /// `1 − F` for state checks, largest pointwise difference otherwise.
    pub value: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

pub const FIDELITY_TOLERANCE: f64 = 1e-8;
pub const POINTWISE_TOLERANCE: f64 = 1e-6;
pub const CIRCUIT_TOLERANCE: f64 = 1e-6;

/// Phase of `⟨α(e^{iθ}−1)| D(−α) |αe^{iθ}⟩` evaluated in the Fock basis.
/// The branch convention predicts `+α² sin θ`.
pub fn displacement_phase(alpha: f64, theta: f64) -> Result<f64> {
    let a = Complex64::new(alpha, 0.0);
    let mut s = CoherentBranchState::new();
    let bus = s.add_bus(a * Complex64::cis(theta));
    let cut = oracle_cutoff(alpha.max((a * (Complex64::cis(theta) - 1.0)).norm()));
    let mut f = FockState::expand(&s, Some(&[cut]))?;
    f.displace(bus, -a)?;
    let mut reference = CoherentBranchState::new();
    reference.add_bus(a * (Complex64::cis(theta) - 1.0));
    Ok(f.overlap_with(&reference)?.conj().arg())
}

fn deficit(f: &FockState, s: &CoherentBranchState) -> Result<f64> {
    Ok((1.0 - f.fidelity_with(s)?).max(0.0))
}

fn wrap(phase: f64) -> f64 {
    let t = std::f64::consts::TAU;
    (phase + 0.5 * t).rem_euclid(t) - 0.5 * t
}

/// Every primitive of the branch simulator against its Fock-space twin at
/// probe amplitude `alpha` (at most 3), coupling `theta` and loss `eta`.
pub fn equivalence_checks(alpha: f64, theta: f64, eta: f64) -> Result<Vec<OracleCheck>> {
    use crate::measure::{self, HomodyneSetting, PhotonCountSetting};
    use crate::protocols::{ParityGate, ParityGateConfig};

    if !(alpha > 0.0 && alpha <= ORACLE_MAX_AMPLITUDE) {
        return Err(Error::OracleRegime(format!("alpha {alpha} outside (0, {ORACLE_MAX_AMPLITUDE}]")));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidLoss(eta));
    }
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let a = c(alpha, 0.0);
    let cut = oracle_cutoff(2.0 * alpha);
    let mut out = Vec::new();
    let mut push = |name, value, tolerance| out.push(OracleCheck { name, value, tolerance });

    // qutrit signal against one bus
    let mut s = CoherentBranchState::new();
    let reg = s.add_register(DiscreteKind::Fock { levels: 3 }, &[c(0.6, 0.0), c(0.0, 0.48), c(0.64, 0.0)])?;
    let bus = s.add_bus(a);
    let mut f = FockState::expand(&s, Some(&[cut]))?;
    s.cross_kerr(reg, bus, theta)?;
    f.cross_kerr(reg, bus, theta)?;
    push("cross_kerr", deficit(&f, &s)?, FIDELITY_TOLERANCE);
    s.bus_phase(bus, 0.7)?;
    f.bus_phase(bus, 0.7)?;
    push("bus_phase", deficit(&f, &s)?, FIDELITY_TOLERANCE);
    let mut sd = s.clone();
    let mut fd = f.clone();
    sd.displace(bus, -a)?;
    fd.displace(bus, -a)?;
    push("displace", deficit(&fd, &sd)?, FIDELITY_TOLERANCE);
    let phase = displacement_phase(alpha, theta)?;
    push("displacement_phase", wrap(phase - alpha * alpha * theta.sin()).abs(), POINTWISE_TOLERANCE);
    if eta > 0.0 {
        let mut sl = s.clone();
        let mut fl = f.clone();
        sl.loss_channel(bus, eta)?;
        fl.beam_splitter(bus, eta, oracle_cutoff(eta * 2.0 * alpha))?;
        push("loss_channel", deficit(&fl, &sl)?, FIDELITY_TOLERANCE);
    }

    // qubit-controlled probe rotated so that equal registers carry
    // different amplitudes; the distributions then show interference
    let mut s = CoherentBranchState::new();
    let q = s.add_qubit([c(0.8, 0.0), c(0.6, 0.0)])?;
    let bus = s.add_bus(a);
    let mut f = FockState::expand(&s, Some(&[cut]))?;
    s.cross_kerr(q, bus, theta)?;
    f.cross_kerr(q, bus, theta)?;
    let h = crate::unitary::hadamard();
    s.apply_register_unitary(q, &h)?;
    f.apply_register_unitary(q, &h)?;
    let mut worst: f64 = 0.0;
    for xi in [0.0, std::f64::consts::FRAC_PI_2, 1.1] {
        let setting = HomodyneSetting::new(xi);
        let span = 2.0 * alpha + 8.0;
        let mut x = -span;
        while x <= span {
            let d = measure::homodyne_pdf(&s, bus, &setting, x)? - f.homodyne_pdf(bus, xi, x)?;
            worst = worst.max(d.abs());
            x += 0.05;
        }
    }
    push("homodyne_pdf", worst, POINTWISE_TOLERANCE);
    let dist = measure::photon_number_distribution(&s, bus, &PhotonCountSetting::default())?;
    let mut worst: f64 = 0.0;
    for (n, p) in dist.iter().enumerate().take(cut) {
        worst = worst.max((p - f.photon_pmf(bus, n)?).abs());
    }
    push("photon_pmf", worst, POINTWISE_TOLERANCE);
    let (sc, _) = measure::condition_on_photon_number(&s, bus, 1)?;
    let mut fc = f.clone();
    fc.condition_on_photon_number(bus, 1)?;
    push("condition_photon_number", deficit(&fc, &sc)?, FIDELITY_TOLERANCE);
    let (sc, _) = measure::condition_on_quadrature(&s, bus, 0.4, 0.37)?;
    let mut fc = f.clone();
    fc.condition_on_quadrature(bus, 0.4, 0.37)?;
    push("condition_quadrature", deficit(&fc, &sc)?, FIDELITY_TOLERANCE);

    // whole parity gate, both parities
    let mut s = CoherentBranchState::new();
    let qs = s.add_qubits(2, &[c(0.3, 0.1), c(-0.5, 0.2), c(0.4, -0.3), c(0.2, 0.55)])?;
    s.normalize()?;
    let cfg = ParityGateConfig::new(alpha, theta).with_eta(eta);
    let prep = ParityGate::new(cfg)?.prepare(&s, qs[0], qs[1])?;
    let bus = prep.bus();
    let mut worst: f64 = 0.0;
    for n in [0usize, 1, 2] {
        let mut with_bus = s.clone();
        with_bus.add_bus(a);
        let mut f = FockState::expand(&with_bus, Some(&[cut]))?;
        f.cross_kerr_on_value(qs[0], bus, theta, 0)?;
        if eta > 0.0 {
            f.beam_splitter(bus, eta, oracle_cutoff(eta * 2.0 * alpha))?;
        }
        f.cross_kerr_on_value(qs[1], bus, theta, 1)?;
        f.bus_phase(bus, -theta)?;
        f.displace(bus, c(-cfg.transmission() * alpha, 0.0))?;
        f.condition_on_photon_number(bus, n)?;
        let (outcome, post) = prep.condition(measure::OutcomeValue::PhotonCount(n))?;
        for corr in &outcome.corrections.corrections {
            f.apply_register_unitary(corr.target, &corr.unitary)?;
        }
        worst = worst.max(deficit(&f, &post)?);
    }
    push("parity_gate", worst, CIRCUIT_TOLERANCE);
    Ok(out)
}
