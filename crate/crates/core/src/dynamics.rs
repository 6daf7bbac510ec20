//! Hamiltonians and propagation: midpoint-exponential Schrödinger stepping and
//! RK4 integration of the Lindblad master equation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analysis::TargetSpec;
use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, HilbertSpace, Mode, OperatorMatrix, StateVector};
use crate::protocols::{ControlSample, PulseSchedule};
use crate::sparse::{self, CsrMatrix, ParametricOperator};

/// Unitary runs fail when the norm drifts further than this.
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;
/// Lindblad runs fail past this trace drift or negative eigenvalue.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
pub const DEFAULT_STEPS: usize = 2000;
/// Step-halving acceptance for auto-refined runs.
pub const HALVING_TOLERANCE: f64 = 1e-7;
const MAX_DOUBLINGS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "frame", rename_all = "snake_case")]
pub enum Frame {
    Rwa,
    CounterRotating { omega_b_over_omega: f64 },
}

/// Schedule plus static systematic errors and the choice of frame.
#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    schedule: PulseSchedule,
    gamma: f64,
    eta: f64,
    frame: Frame,
    scale_cd: bool,
}

impl HamiltonianSpec {
    pub fn new(schedule: PulseSchedule) -> Self {
        Self {
            schedule,
            gamma: 0.0,
            eta: 0.0,
            frame: Frame::Rwa,
            scale_cd: true,
        }
    }

    /// Whether the coupling error `gamma` also scales the counterdiabatic part
    /// of the `m^dag b` coupling (default `true`: the whole applied coupling is
    /// miscalibrated). With `false` only the ideal `g` is scaled.
    pub fn with_cd_error_scaling(mut self, scale_cd: bool) -> Self {
        self.scale_cd = scale_cd;
        self
    }

    pub fn cd_error_scaling(&self) -> bool {
        self.scale_cd
    }

    pub fn with_errors(mut self, gamma: f64, eta: f64) -> Self {
        self.gamma = gamma;
        self.eta = eta;
        self
    }

    pub fn with_frame(mut self, frame: Frame) -> Result<Self> {
        if let Frame::CounterRotating { omega_b_over_omega } = frame {
            if !(omega_b_over_omega.is_finite() && omega_b_over_omega > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "counter-rotating frame needs omega_b/Omega > 0, got {omega_b_over_omega}"
                )));
            }
        }
        self.frame = frame;
        Ok(self)
    }

    pub fn schedule(&self) -> &PulseSchedule {
        &self.schedule
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn duration(&self) -> f64 {
        self.schedule.duration()
    }

    /// Coefficient of `m^dag b`: `(1 + gamma)(g_R - i g_I - i theta_dot)`, or
    /// `(1 + gamma)(g_R - i g_I) - i theta_dot` without CD scaling.
    fn hop_coefficient(&self, s: &ControlSample) -> C64 {
        let g = C64::new(s.g_real, -s.g_imag);
        let cd = C64::new(0.0, -s.theta_dot);
        if self.scale_cd {
            (g + cd) * (1.0 + self.gamma)
        } else {
            g * (1.0 + self.gamma) + cd
        }
    }

    /// Coefficient of `m^dag b^dag`: the controls' `(1 + gamma)(g_R - i g_I)`.
    /// The counterdiabatic operator has no counter-rotating partner.
    fn pair_coefficient(&self, s: &ControlSample) -> C64 {
        C64::new(s.g_real, -s.g_imag) * (1.0 + self.gamma)
    }

    fn omega_b(&self) -> f64 {
        match self.frame {
            Frame::Rwa => 0.0,
            Frame::CounterRotating { omega_b_over_omega } => {
                omega_b_over_omega * self.schedule.omega()
            }
        }
    }
}

/// The Hamiltonian as a fixed sparse family whose coefficients follow the schedule.
#[derive(Clone, Debug)]
pub(crate) struct HamiltonianFamily {
    op: ParametricOperator,
    frame: Frame,
}

impl HamiltonianFamily {
    pub(crate) fn new(space: &HilbertSpace, frame: Frame) -> Self {
        let m = sparse::ladder(space, Mode::M);
        let b = sparse::ladder(space, Mode::B);
        let m_dag = sparse::transpose(&m);
        let b_dag = sparse::transpose(&b);
        let nm = sparse::number(space, Mode::M);
        let nb = sparse::number(space, Mode::B);
        let hop = sparse::product(&m_dag, &b);
        let hop_back = sparse::product(&b_dag, &m);
        let op = match frame {
            Frame::Rwa => {
                let diff =
                    sparse::linear_combination(&[(C64::from(1.0), &nm), (C64::from(-1.0), &nb)]);
                ParametricOperator::new(&[diff, hop, hop_back])
            }
            Frame::CounterRotating { .. } => {
                let pair = sparse::product(&m_dag, &b_dag);
                let pair_back = sparse::product(&m, &b);
                ParametricOperator::new(&[nm, nb, hop, hop_back, pair, pair_back])
            }
        };
        Self { op, frame }
    }

    pub(crate) fn coefficients(&self, spec: &HamiltonianSpec, t: f64) -> Vec<C64> {
        let s = spec.schedule.sample(t);
        let c = spec.hop_coefficient(&s);
        let detuning = (1.0 + spec.eta) * s.delta;
        match self.frame {
            Frame::Rwa => vec![C64::from(0.5 * detuning), c, c.conj()],
            Frame::CounterRotating { .. } => {
                let wb = spec.omega_b();
                let pair = spec.pair_coefficient(&s);
                vec![
                    C64::from(wb + detuning),
                    C64::from(wb),
                    c,
                    c.conj(),
                    pair,
                    pair.conj(),
                ]
            }
        }
    }

    pub(crate) fn at(&self, spec: &HamiltonianSpec, t: f64) -> CsrMatrix {
        self.op.assemble(&self.coefficients(spec, t))
    }

    fn assemble_into(&self, spec: &HamiltonianSpec, t: f64, out: &mut CsrMatrix) {
        self.op.assemble_into(&self.coefficients(spec, t), out);
    }

    fn workspace(&self) -> CsrMatrix {
        self.op.pattern().clone()
    }
}

fn checked_dense(space: &HilbertSpace, h: &CsrMatrix) -> Result<OperatorMatrix> {
    let op = OperatorMatrix::from_raw(*space, sparse::to_dense(h), true);
    let deviation = op.hermiticity_deviation();
    if deviation > 1e-12 {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(op)
}

/// `H = (1+eta) Delta/2 (m^dag m - b^dag b) + c m^dag b + c^* b^dag m`
/// with `c = (1+gamma)(g_R - i g_I - i theta_dot)`.
pub fn build_hamiltonian(
    space: &HilbertSpace,
    spec: &HamiltonianSpec,
    t: f64,
) -> Result<OperatorMatrix> {
    check_time(spec, t)?;
    checked_dense(
        space,
        &HamiltonianFamily::new(space, Frame::Rwa).at(spec, t),
    )
}

/// `H = [omega_b + Delta] m^dag m + omega_b b^dag b + g m^dag (b + b^dag) + h.c. + H_CD`
/// with `H_CD = i theta_dot (b^dag m - m^dag b)`.
pub fn build_cr_hamiltonian(
    space: &HilbertSpace,
    spec: &HamiltonianSpec,
    t: f64,
) -> Result<OperatorMatrix> {
    check_time(spec, t)?;
    if !matches!(spec.frame, Frame::CounterRotating { .. }) {
        return Err(Error::InvalidInput(
            "counter-rotating Hamiltonian needs a counter-rotating frame".into(),
        ));
    }
    checked_dense(
        space,
        &HamiltonianFamily::new(space, spec.frame).at(spec, t),
    )
}

fn check_time(spec: &HamiltonianSpec, t: f64) -> Result<()> {
    let tol = 1e-12 * spec.duration();
    if !(t >= -tol && t <= spec.duration() + tol) {
        return Err(Error::InvalidInput(format!(
            "t = {t} outside [0, {}]",
            spec.duration()
        )));
    }
    Ok(())
}

/// `v <- exp(-i dt H) v` by a truncated Taylor series on substeps with
/// `dt |H|_1 <= 2` per substep, truncated below 1e-17.
pub fn expm_action(h: &CsrMatrix, dt: f64, v: &mut DVector<C64>) {
    let norm = sparse::one_norm(h) * dt.abs();
    let substeps = (norm / 2.0).ceil().max(1.0) as usize;
    let tau = dt / substeps as f64;
    let theta = norm / substeps as f64;
    let mut terms = 0;
    let mut bound = 1.0;
    while bound >= 1e-17 {
        terms += 1;
        bound *= theta / terms as f64;
        if terms > 60 {
            break;
        }
    }
    let factor = C64::new(0.0, -tau);
    let mut term = DVector::zeros(v.len());
    let mut next = DVector::zeros(v.len());
    for _ in 0..substeps {
        term.copy_from(v);
        for k in 1..=terms {
            sparse::matvec_into(h, term.as_slice(), next.as_mut_slice());
            let scale = factor / k as f64;
            for (t, n) in term.iter_mut().zip(next.iter()) {
                *t = n * scale;
            }
            *v += &term;
        }
    }
}

#[derive(Clone, Debug)]
pub enum FinalState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

/// Sampled observables along one propagation.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Target-state population at each time.
    pub populations: Vec<f64>,
    /// `<m^dag m + b^dag b>` at each time.
    pub excitations: Vec<f64>,
    /// `|‖psi‖ - 1|` or `|tr rho - 1|` at each time.
    pub norm_drifts: Vec<f64>,
    pub final_state: FinalState,
    /// Maximum of `norm_drifts`.
    pub norm_drift: f64,
    pub excitation_drift: f64,
    pub n_steps: usize,
    /// `|P_n(T) - P_2n(T)|` when the run was step-refined.
    pub step_halving_delta: Option<f64>,
    /// Smallest eigenvalue of rho seen at the checkpoints (Lindblad only).
    pub min_eigenvalue: Option<f64>,
}

impl Trajectory {
    pub fn final_population(&self) -> f64 {
        *self.populations.last().expect("trajectory has samples")
    }

    pub fn final_pure(&self) -> Option<&StateVector> {
        match &self.final_state {
            FinalState::Pure(s) => Some(s),
            FinalState::Mixed(_) => None,
        }
    }

    /// CSV with columns `t,P,norm_drift`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,P,norm_drift")?;
        for ((t, p), d) in self
            .times
            .iter()
            .zip(&self.populations)
            .zip(&self.norm_drifts)
        {
            writeln!(
                out,
                "{},{},{}",
                crate::fmt_num(*t),
                crate::fmt_num(*p),
                crate::fmt_num(*d)
            )?;
        }
        Ok(())
    }
}

fn check_steps(n_steps: usize) -> Result<()> {
    if n_steps < 100 {
        return Err(Error::InvalidInput(format!(
            "n_steps must be at least 100, got {n_steps}"
        )));
    }
    Ok(())
}

/// Fixed-step midpoint-exponential propagation:
/// `psi_{k+1} = exp(-i dt H(t_k + dt/2)) psi_k`.
pub fn propagate_schrodinger(
    spec: &HamiltonianSpec,
    psi0: &StateVector,
    target: &TargetSpec,
    n_steps: usize,
) -> Result<Trajectory> {
    check_steps(n_steps)?;
    let space = *psi0.space();
    target.check_space(&space)?;
    let family = HamiltonianFamily::new(&space, spec.frame);
    let mut h = family.workspace();
    let duration = spec.duration();
    let dt = duration / n_steps as f64;

    let mut psi = psi0.amplitudes().clone();
    let n0 = psi0.mean_excitation();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut populations = Vec::with_capacity(n_steps + 1);
    let mut excitations = Vec::with_capacity(n_steps + 1);
    let mut norm_drift = (psi.norm() - 1.0).abs();
    let mut norm_drifts = Vec::with_capacity(n_steps + 1);
    norm_drifts.push(norm_drift);
    let mut excitation_drift = 0.0f64;

    times.push(0.0);
    populations.push(target.population_amplitudes(&space, &psi));
    excitations.push(n0);
    for k in 0..n_steps {
        let t_mid = (k as f64 + 0.5) * dt;
        family.assemble_into(spec, t_mid, &mut h);
        expm_action(&h, dt, &mut psi);
        let state = StateVector::from_raw(space, psi);
        let drift = (state.norm() - 1.0).abs();
        norm_drift = norm_drift.max(drift);
        norm_drifts.push(drift);
        let n = state.mean_excitation();
        excitation_drift = excitation_drift.max((n - n0).abs());
        times.push(if k + 1 == n_steps {
            duration
        } else {
            (k + 1) as f64 * dt
        });
        populations.push(target.population_amplitudes(&space, state.amplitudes()));
        excitations.push(n);
        psi = state.into_amplitudes();
        if !norm_drift.is_finite() {
            return Err(Error::NonFinite("state during propagation".into()));
        }
    }
    if norm_drift > NORM_DRIFT_LIMIT {
        return Err(Error::NormDrift {
            drift: norm_drift,
            limit: NORM_DRIFT_LIMIT,
        });
    }
    Ok(Trajectory {
        times,
        populations,
        excitations,
        norm_drifts,
        final_state: FinalState::Pure(StateVector::from_raw(space, psi)),
        norm_drift,
        excitation_drift,
        n_steps,
        step_halving_delta: None,
        min_eigenvalue: None,
    })
}

/// Repeats `run` with doubled step counts until the final population moves by
/// less than [`HALVING_TOLERANCE`]; returns the finer run with the last delta.
pub fn refine_steps<F>(base_steps: usize, mut run: F) -> Result<Trajectory>
where
    F: FnMut(usize) -> Result<Trajectory>,
{
    let mut coarse = run(base_steps)?;
    let mut steps = base_steps;
    for _ in 0..MAX_DOUBLINGS {
        steps *= 2;
        let mut fine = run(steps)?;
        let delta = (fine.final_population() - coarse.final_population()).abs();
        fine.step_halving_delta = Some(delta);
        if delta < HALVING_TOLERANCE {
            return Ok(fine);
        }
        coarse = fine;
    }
    Ok(coarse)
}

/// [`propagate_schrodinger`] with automatic step doubling.
pub fn propagate_schrodinger_refined(
    spec: &HamiltonianSpec,
    psi0: &StateVector,
    target: &TargetSpec,
    base_steps: usize,
) -> Result<Trajectory> {
    refine_steps(base_steps, |n| propagate_schrodinger(spec, psi0, target, n))
}

/// Decay rates and thermal occupations, rates in the schedule's time units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladSpec {
    pub kappa_m: f64,
    pub kappa_b: f64,
    pub n_bar_m: f64,
    pub n_bar_b: f64,
}

impl LindbladSpec {
    pub fn new(kappa_m: f64, kappa_b: f64, n_bar_m: f64, n_bar_b: f64) -> Result<Self> {
        for (name, v) in [
            ("kappa_m", kappa_m),
            ("kappa_b", kappa_b),
            ("n_bar_m", n_bar_m),
            ("n_bar_b", n_bar_b),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(Self {
            kappa_m,
            kappa_b,
            n_bar_m,
            n_bar_b,
        })
    }

    pub fn closed() -> Self {
        Self {
            kappa_m: 0.0,
            kappa_b: 0.0,
            n_bar_m: 0.0,
            n_bar_b: 0.0,
        }
    }
}

/// Laboratory bath parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalBath {
    /// Energy decay rate of mode m, in 1/s.
    pub kappa_m: f64,
    /// Energy decay rate of mode b, in 1/s.
    pub kappa_b: f64,
    /// Mode frequencies in rad/s.
    pub omega_m: f64,
    pub omega_b: f64,
    /// Bath temperature in kelvin.
    pub temperature: f64,
    /// The coupling unit `Omega` in rad/s; simulation time is measured in `1/Omega`.
    pub omega_unit: f64,
}

impl PhysicalBath {
    /// Hybrid mode at 10 GHz, phonon at 10 MHz, `kappa_m = 10 kHz`,
    /// `kappa_b = 100 Hz`, `Omega / 2pi = 1 MHz`.
    pub fn reference(temperature: f64) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        Self {
            kappa_m: 1e4,
            kappa_b: 100.0,
            omega_m: two_pi * 10e9,
            omega_b: two_pi * 10e6,
            temperature,
            omega_unit: two_pi * 1e6,
        }
    }

    /// Dimensionless rates for a schedule running in units where `Omega = omega_scale`
    /// (1 for `T = pi`).
    pub fn to_spec(&self, omega_scale: f64) -> Result<LindbladSpec> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "temperature must be >= 0 K, got {}",
                self.temperature
            )));
        }
        LindbladSpec::new(
            self.kappa_m / self.omega_unit * omega_scale,
            self.kappa_b / self.omega_unit * omega_scale,
            thermal_occupation(self.omega_m, self.temperature),
            thermal_occupation(self.omega_b, self.temperature),
        )
    }
}

const HBAR: f64 = 1.054_571_817e-34;
const K_BOLTZMANN: f64 = 1.380_649e-23;

/// Bose-Einstein occupation at angular frequency `omega` (rad/s) and
/// temperature `t_th` (K).
pub fn thermal_occupation(omega: f64, t_th: f64) -> f64 {
    if t_th <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (K_BOLTZMANN * t_th)).exp_m1()
}

struct Dissipator {
    op: CsrMatrix,
    /// Diagonal of `op^dag op`.
    diag: Vec<f64>,
    rate: f64,
}

struct LindbladGenerator {
    family: HamiltonianFamily,
    dissipators: Vec<Dissipator>,
}

impl LindbladGenerator {
    fn new(space: &HilbertSpace, frame: Frame, bath: &LindbladSpec) -> Self {
        let mut dissipators = Vec::new();
        for (mode, kappa, n_bar) in [
            (Mode::M, bath.kappa_m, bath.n_bar_m),
            (Mode::B, bath.kappa_b, bath.n_bar_b),
        ] {
            let a = sparse::ladder(space, mode);
            let a_dag = sparse::transpose(&a);
            for (op, op_dag, rate) in [
                (a.clone(), a_dag.clone(), kappa * (n_bar + 1.0)),
                (a_dag, a, kappa * n_bar),
            ] {
                if rate == 0.0 {
                    continue;
                }
                let diag = sparse::to_dense(&sparse::product(&op_dag, &op))
                    .diagonal()
                    .iter()
                    .map(|z| z.re)
                    .collect();
                dissipators.push(Dissipator { op, diag, rate });
            }
        }
        Self {
            family: HamiltonianFamily::new(space, frame),
            dissipators,
        }
    }

    fn rhs(&self, h: &CsrMatrix, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let h_rho = sparse::mul_dense(h, rho);
        // rho is Hermitian, so rho H = (H rho)^dagger.
        let mut out = (&h_rho - h_rho.adjoint()) * C64::new(0.0, -1.0);
        let dim = rho.nrows();
        for d in &self.dissipators {
            let x = sparse::mul_dense(&d.op, rho);
            let jump = sparse::mul_dense(&d.op, &x.adjoint()).adjoint();
            out += jump * C64::from(d.rate);
            for j in 0..dim {
                for i in 0..dim {
                    out[(i, j)] -= rho[(i, j)] * (0.5 * d.rate * (d.diag[i] + d.diag[j]));
                }
            }
        }
        out
    }
}

/// Classical RK4 on the master equation
/// `d rho/dt = -i[H, rho] + sum_j r_j (o_j rho o_j^dag - {o_j^dag o_j, rho}/2)`.
pub fn propagate_lindblad(
    spec: &HamiltonianSpec,
    bath: &LindbladSpec,
    rho0: &DensityMatrix,
    target: &TargetSpec,
    n_steps: usize,
) -> Result<Trajectory> {
    check_steps(n_steps)?;
    let space = *rho0.space();
    target.check_space(&space)?;
    let generator = LindbladGenerator::new(&space, spec.frame, bath);
    let duration = spec.duration();
    let dt = duration / n_steps as f64;
    let checkpoints = 10usize;

    let mut rho = rho0.entries().clone();
    let total_number = |r: &DMatrix<C64>| -> f64 {
        (0..space.dim())
            .map(|i| r[(i, i)].re * space.excitation(i) as f64)
            .sum()
    };
    let n0 = total_number(&rho);
    let mut times = vec![0.0];
    let mut populations = vec![target.population_diagonal(&space, &rho)];
    let mut excitations = vec![n0];
    let mut trace_drift = (DensityMatrix::from_raw(space, rho.clone()).trace() - 1.0).abs();
    let mut norm_drifts = vec![trace_drift];
    let mut excitation_drift = 0.0f64;
    let mut min_eigenvalue = f64::INFINITY;

    let h_at = |t: f64| generator.family.at(spec, t);
    for k in 0..n_steps {
        let t = k as f64 * dt;
        let h0 = h_at(t);
        let hm = h_at(t + 0.5 * dt);
        let h1 = h_at(t + dt);
        let half = C64::from(0.5 * dt);
        let k1 = generator.rhs(&h0, &rho);
        let k2 = generator.rhs(&hm, &(&rho + &k1 * half));
        let k3 = generator.rhs(&hm, &(&rho + &k2 * half));
        let k4 = generator.rhs(&h1, &(&rho + &k3 * C64::from(dt)));
        rho += (k1 + (k2 + k3) * C64::from(2.0) + k4) * C64::from(dt / 6.0);
        rho = (&rho + rho.adjoint()) * C64::from(0.5);

        let current = DensityMatrix::from_raw(space, rho);
        let drift = (current.trace() - 1.0).abs();
        if !drift.is_finite() {
            return Err(Error::NonFinite("density matrix during propagation".into()));
        }
        trace_drift = trace_drift.max(drift);
        norm_drifts.push(drift);
        if (k + 1) % (n_steps / checkpoints).max(1) == 0 || k + 1 == n_steps {
            min_eigenvalue = min_eigenvalue.min(current.min_eigenvalue());
        }
        rho = current.entries().clone();
        let n = total_number(&rho);
        excitation_drift = excitation_drift.max((n - n0).abs());
        times.push(if k + 1 == n_steps {
            duration
        } else {
            (k + 1) as f64 * dt
        });
        populations.push(target.population_diagonal(&space, &rho));
        excitations.push(n);
    }
    if trace_drift > TRACE_DRIFT_LIMIT {
        return Err(Error::TraceDrift {
            drift: trace_drift,
            limit: TRACE_DRIFT_LIMIT,
        });
    }
    if min_eigenvalue < -TRACE_DRIFT_LIMIT {
        return Err(Error::NegativeEigenvalue { min_eigenvalue });
    }
    Ok(Trajectory {
        times,
        populations,
        excitations,
        norm_drifts,
        final_state: FinalState::Mixed(DensityMatrix::from_raw(space, rho)),
        norm_drift: trace_drift,
        excitation_drift,
        n_steps,
        step_halving_delta: None,
        min_eigenvalue: Some(min_eigenvalue),
    })
}

/// [`propagate_lindblad`] with automatic step doubling.
pub fn propagate_lindblad_refined(
    spec: &HamiltonianSpec,
    bath: &LindbladSpec,
    rho0: &DensityMatrix,
    target: &TargetSpec,
    base_steps: usize,
) -> Result<Trajectory> {
    refine_steps(base_steps, |n| {
        propagate_lindblad(spec, bath, rho0, target, n)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{self, build_space};
    use crate::protocols::ThetaShape;
    use std::f64::consts::PI;

    fn hop(space: &HilbertSpace) -> OperatorMatrix {
        let m = fock::annihilation_op(space, Mode::M);
        let b = fock::annihilation_op(space, Mode::B);
        m.adjoint().mul(&b).add(&b.adjoint().mul(&m))
    }

    #[test]
    fn pi_pulse_hamiltonian_is_flat_hop() {
        let space = build_space(2, 2).unwrap();
        let spec = HamiltonianSpec::new(PulseSchedule::pi_pulse(PI).unwrap());
        for t in [0.0, 1.0, PI] {
            let h = build_hamiltonian(&space, &spec, t).unwrap();
            assert!(h.max_abs_diff(&hop(&space).scale(C64::from(0.5))) < 1e-15);
        }
        assert!(build_hamiltonian(&space, &spec, 4.0).is_err());
    }

    #[test]
    fn tqd_midpoint_coupling() {
        let space = build_space(1, 1).unwrap();
        let spec = HamiltonianSpec::new(PulseSchedule::tqd(PI, ThetaShape::Linear, true).unwrap());
        let h = build_hamiltonian(&space, &spec, PI / 2.0).unwrap();
        let want = C64::new(1.0, -0.5);
        assert!((h.get((1, 0), (0, 1)) - want).norm() < 1e-14);
        assert!((h.get((0, 1), (1, 0)) - want.conj()).norm() < 1e-14);
        assert!(h.get((1, 0), (1, 0)).norm() < 1e-14);
    }

    #[test]
    fn coupling_error_scales_only_coupling() {
        let space = build_space(1, 1).unwrap();
        let sched = PulseSchedule::constant(PI, 0.8, C64::new(0.3, 0.1)).unwrap();
        let h0 = build_hamiltonian(&space, &HamiltonianSpec::new(sched.clone()), 0.5).unwrap();
        let h1 = build_hamiltonian(
            &space,
            &HamiltonianSpec::new(sched).with_errors(0.2, 0.0),
            0.5,
        )
        .unwrap();
        assert!((h1.get((1, 0), (0, 1)) - h0.get((1, 0), (0, 1)) * 1.2).norm() < 1e-15);
        assert_eq!(h1.get((1, 0), (1, 0)), h0.get((1, 0), (1, 0)));
        assert!((h0.get((1, 0), (0, 1)) - C64::new(0.3, -0.1)).norm() < 1e-15);
    }

    #[test]
    fn coupling_error_on_cd_term() {
        let space = build_space(1, 1).unwrap();
        let sched = PulseSchedule::tqd(PI, ThetaShape::Linear, true).unwrap();
        let scaled = HamiltonianSpec::new(sched.clone()).with_errors(0.2, 0.3);
        let h = build_hamiltonian(&space, &scaled, PI / 2.0).unwrap();
        assert!((h.get((1, 0), (0, 1)) - C64::new(1.2, -0.6)).norm() < 1e-14);
        let bare = scaled.with_cd_error_scaling(false);
        let h = build_hamiltonian(&space, &bare, PI / 2.0).unwrap();
        assert!((h.get((1, 0), (0, 1)) - C64::new(1.2, -0.5)).norm() < 1e-14);
    }

    #[test]
    fn cr_hamiltonian_structure() {
        let space = build_space(3, 3).unwrap();
        let diag_spec =
            HamiltonianSpec::new(PulseSchedule::constant(PI, 0.4, C64::from(0.0)).unwrap())
                .with_frame(Frame::CounterRotating {
                    omega_b_over_omega: 4.0,
                })
                .unwrap();
        let h = build_cr_hamiltonian(&space, &diag_spec, 0.3).unwrap();
        for i in 0..space.dim() {
            let (m, b) = space.levels(i);
            let want = (4.0 + 0.4) * m as f64 + 4.0 * b as f64;
            assert!((h.entries()[(i, i)].re - want).abs() < 1e-13);
        }
        assert!(
            fock::max_abs(&(h.entries() - DMatrix::from_diagonal(&h.entries().diagonal()))) == 0.0
        );

        let spec = HamiltonianSpec::new(PulseSchedule::pi_pulse(PI).unwrap())
            .with_frame(Frame::CounterRotating {
                omega_b_over_omega: 10.0,
            })
            .unwrap();
        let h = build_cr_hamiltonian(&space, &spec, 0.3).unwrap();
        assert!((h.get((1, 1), (0, 0)) - C64::from(0.5)).norm() < 1e-15);

        let tqd = HamiltonianSpec::new(PulseSchedule::tqd(PI, ThetaShape::Linear, true).unwrap())
            .with_frame(Frame::CounterRotating {
                omega_b_over_omega: 10.0,
            })
            .unwrap();
        let h = build_cr_hamiltonian(&space, &tqd, PI / 2.0).unwrap();
        assert!((h.get((1, 0), (0, 1)) - C64::new(1.0, -0.5)).norm() < 1e-14);
        assert!((h.get((1, 1), (0, 0)) - C64::new(1.0, 0.0)).norm() < 1e-14);
        let total = fock::number_op(&space, Mode::M).add(&fock::number_op(&space, Mode::B));
        assert!(fock::max_abs(h.commutator(&total).entries()) > 0.1);

        let rwa = HamiltonianSpec::new(PulseSchedule::pi_pulse(PI).unwrap());
        assert!(build_cr_hamiltonian(&space, &rwa, 0.3).is_err());
        assert!(rwa
            .clone()
            .with_frame(Frame::CounterRotating {
                omega_b_over_omega: 0.0
            })
            .is_err());
    }

    #[test]
    fn expm_action_matches_dense_eigen_route() {
        let space = build_space(3, 3).unwrap();
        let spec = HamiltonianSpec::new(PulseSchedule::tqd(PI, ThetaShape::Linear, true).unwrap());
        let h = HamiltonianFamily::new(&space, Frame::Rwa).at(&spec, 0.7);
        let dense = sparse::to_dense(&h);
        let eig = dense.clone().symmetric_eigen();
        let dt = 0.9;
        let phases =
            DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * dt)));
        let u = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
        let v0 = DVector::from_fn(space.dim(), |i, _| {
            C64::new(1.0 + i as f64, -(i as f64) * 0.3)
        });
        let mut v = v0.clone();
        expm_action(&h, dt, &mut v);
        assert!((v - u * v0).norm() < 1e-12);
    }

    #[test]
    fn pi_pulse_transfers_fock_one() {
        let space = build_space(4, 4).unwrap();
        let target = TargetSpec::fock(1);
        let psi0 = fock::fock_product_state(&space, 1, 0).unwrap();
        let spec = HamiltonianSpec::new(PulseSchedule::pi_pulse(PI).unwrap());
        let traj = propagate_schrodinger(&spec, &psi0, &target, 2000).unwrap();
        let amp = traj.final_pure().unwrap().amplitude(0, 1);
        assert!((amp - C64::new(0.0, -1.0)).norm() < 1e-6);
        assert!((traj.final_population() - 1.0).abs() < 1e-9);
        assert!(traj.norm_drift < 1e-9);
        assert!(traj.excitation_drift < 1e-8);
    }

    #[test]
    fn uncoupled_evolution_keeps_populations() {
        let space = build_space(3, 3).unwrap();
        let target = TargetSpec::fock(1);
        let psi0 = fock::fock_product_state(&space, 0, 1).unwrap();
        let spec = HamiltonianSpec::new(PulseSchedule::constant(PI, 1.7, C64::from(0.0)).unwrap());
        let traj = propagate_schrodinger(&spec, &psi0, &target, 200).unwrap();
        assert!(traj.populations.iter().all(|p| (p - 1.0).abs() < 1e-12));
        assert!(propagate_schrodinger(&spec, &psi0, &target, 50).is_err());
    }

    #[test]
    fn thermal_occupations() {
        let two_pi = 2.0 * PI;
        assert_eq!(thermal_occupation(two_pi * 1e7, 0.0), 0.0);
        // Oracle: 1/(e^x - 1) with x = h f / (k_B T).
        let x: f64 = 6.626_070_15e-34 * 1e7 / (1.380_649e-23 * 0.1);
        assert!((x - 4.80e-3).abs() < 1e-5);
        let n = thermal_occupation(two_pi * 1e7, 0.1);
        assert!((n - 1.0 / x.exp_m1()).abs() < 1e-9 * n);
        assert!((n - 207.9).abs() < 0.1);
        let n = thermal_occupation(two_pi * 1e10, 0.1);
        assert!((n - 8.3e-3).abs() < 1e-4);
    }

    #[test]
    fn lindblad_without_baths_matches_unitary() {
        let space = build_space(3, 3).unwrap();
        let target = TargetSpec::fock(1);
        let psi0 = fock::fock_product_state(&space, 1, 0).unwrap();
        let spec = HamiltonianSpec::new(PulseSchedule::tqd(PI, ThetaShape::Linear, false).unwrap());
        let pure = propagate_schrodinger(&spec, &psi0, &target, 4000).unwrap();
        let mixed = propagate_lindblad(
            &spec,
            &LindbladSpec::closed(),
            &DensityMatrix::from_pure(&psi0),
            &target,
            400,
        )
        .unwrap();
        for (a, b) in pure.populations.iter().step_by(10).zip(&mixed.populations) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(mixed.norm_drift < 1e-10);
    }

    #[test]
    fn single_mode_relaxes_to_thermal_occupation() {
        let space = build_space(30, 0).unwrap();
        let target = TargetSpec::fock(0);
        let n_bar = 0.5;
        let kappa = 1.0;
        let psi0 = fock::fock_product_state(&space, 2, 0).unwrap();
        let spec =
            HamiltonianSpec::new(PulseSchedule::constant(25.0, 0.0, C64::from(0.0)).unwrap());
        let bath = LindbladSpec::new(kappa, 0.0, n_bar, 0.0).unwrap();
        let traj = propagate_lindblad(
            &spec,
            &bath,
            &DensityMatrix::from_pure(&psi0),
            &target,
            2500,
        )
        .unwrap();
        let FinalState::Mixed(rho) = &traj.final_state else {
            panic!("mixed state expected")
        };
        assert!((rho.mean_occupation(Mode::M) - n_bar).abs() < 1e-4);
        assert!(traj.min_eigenvalue.unwrap() > -1e-10);
    }
}
