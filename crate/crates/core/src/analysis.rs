//! Target-state population, systematic-error sensitivities and error sweeps.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, Frame, HamiltonianSpec, Trajectory};
use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, HilbertSpace, StateVector, TAIL_TOLERANCE};
use crate::protocols::LrParams;
use crate::quad;

/// Error magnitudes used by [`sensitivity_numeric`].
pub const FIT_MAGNITUDES: [f64; 3] = [0.02, 0.04, 0.06];
pub const FIT_RESIDUAL_LIMIT: f64 = 1e-5;
/// Extra Fock levels per mode when counter-rotating terms break excitation conservation.
pub const CR_HEADROOM: usize = 12;

/// Initial superposition `sum_k C_k |k>_m |0>_b`, reused as the target on mode b.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetSpec {
    coeffs: BTreeMap<usize, C64>,
}

impl TargetSpec {
    /// Zero coefficients are dropped; the rest must be normalized within 1e-9.
    pub fn new(coeffs: BTreeMap<usize, C64>) -> Result<Self> {
        let coeffs: BTreeMap<_, _> = coeffs
            .into_iter()
            .filter(|(_, c)| *c != C64::new(0.0, 0.0))
            .collect();
        let norm_sq: f64 = coeffs.values().map(|c| c.norm_sqr()).sum();
        if coeffs.is_empty() || (norm_sq - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { coeffs })
    }

    pub fn fock(k: usize) -> Self {
        Self {
            coeffs: BTreeMap::from([(k, C64::new(1.0, 0.0))]),
        }
    }

    /// Even-cat coefficients truncated at `cutoff` and renormalized.
    pub fn cat(zeta: C64, cutoff: usize) -> Self {
        Self::new(fock::cat_coefficients(zeta, cutoff)).expect("cat coefficients are normalized")
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, C64> {
        &self.coeffs
    }

    /// `sum_k k |C_k|^2`.
    pub fn mean_excitation(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, c)| *k as f64 * c.norm_sqr())
            .sum()
    }

    pub fn max_k(&self) -> usize {
        *self.coeffs.keys().next_back().expect("non-empty")
    }

    pub fn check_space(&self, space: &HilbertSpace) -> Result<()> {
        let cutoff = space.n_max_m().min(space.n_max_b());
        if self.max_k() > cutoff {
            return Err(Error::OutOfCutoff {
                level: self.max_k(),
                cutoff,
            });
        }
        Ok(())
    }

    /// `sum_k C_k |k, 0>`.
    pub fn initial_state(&self, space: &HilbertSpace) -> Result<StateVector> {
        fock::superposed_initial(space, &self.coeffs)
    }

    pub(crate) fn population_amplitudes(&self, space: &HilbertSpace, amps: &DVector<C64>) -> f64 {
        self.coeffs
            .keys()
            .map(|&k| amps[space.index_of(0, k)].norm_sqr())
            .sum()
    }

    pub(crate) fn population_diagonal(&self, space: &HilbertSpace, rho: &DMatrix<C64>) -> f64 {
        self.coeffs
            .keys()
            .map(|&k| {
                let i = space.index_of(0, k);
                rho[(i, i)].re
            })
            .sum()
    }
}

/// `P = sum_{C_k != 0} |<0 k|psi>|^2`.
pub fn population(state: &StateVector, target: &TargetSpec) -> Result<f64> {
    target.check_space(state.space())?;
    Ok(target.population_amplitudes(state.space(), state.amplitudes()))
}

/// `P = sum_{C_k != 0} <0 k|rho|0 k>`.
pub fn population_mixed(rho: &DensityMatrix, target: &TargetSpec) -> Result<f64> {
    target.check_space(rho.space())?;
    Ok(target.population_diagonal(rho.space(), rho.entries()))
}

/// Raw amplitudes `<0 k|psi>` on the target support.
pub fn final_amplitudes(state: &StateVector, target: &TargetSpec) -> Result<BTreeMap<usize, C64>> {
    target.check_space(state.space())?;
    Ok(target
        .coeffs
        .keys()
        .map(|&k| (k, state.amplitude(0, k)))
        .collect())
}

/// `sum_k |C_k|^2 cos^{2k}(pi gamma / 2)`.
pub fn pi_pulse_population_analytic(target: &TargetSpec, gamma: f64) -> f64 {
    let c = (0.5 * PI * gamma).cos();
    target
        .coeffs
        .iter()
        .map(|(k, ck)| ck.norm_sqr() * c.powi(2 * *k as i32))
        .sum()
}

/// `q_g = (pi^2 / 4) n_m`.
pub fn pi_pulse_sensitivity_analytic(target: &TargetSpec) -> f64 {
    PI * PI / 4.0 * target.mean_excitation()
}

/// Initial-state description used to pick cutoffs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    Fock {
        k: usize,
    },
    /// Even cat with real amplitude `zeta` on mode m.
    Cat {
        zeta: f64,
    },
}

impl InitialState {
    /// Smallest cutoff meeting the truncation rule: `max(k + 3, 4)` for Fock
    /// states, coherent tail mass below 1e-10 for cats.
    pub fn default_cutoff(&self) -> usize {
        match *self {
            InitialState::Fock { k } => (k + 3).max(4),
            InitialState::Cat { zeta } => fock::required_cutoff(zeta * zeta, TAIL_TOLERANCE),
        }
    }

    pub fn target(&self, cutoff: usize) -> TargetSpec {
        match *self {
            InitialState::Fock { k } => TargetSpec::fock(k),
            InitialState::Cat { zeta } => TargetSpec::cat(C64::from(zeta), cutoff),
        }
    }

    /// Square space with the default cutoff, widened for counter-rotating runs.
    pub fn space(&self, frame: Frame) -> Result<HilbertSpace> {
        let extra = match frame {
            Frame::Rwa => 0,
            Frame::CounterRotating { .. } => CR_HEADROOM,
        };
        let n = self.default_cutoff() + extra;
        fock::build_space(n, n)
    }
}

impl std::fmt::Display for InitialState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialState::Fock { k } => write!(f, "fock {k}"),
            InitialState::Cat { zeta } => write!(f, "cat {zeta}"),
        }
    }
}

/// A fully specified unitary transfer run.
#[derive(Clone, Debug)]
pub struct TransferProblem {
    pub spec: HamiltonianSpec,
    pub target: TargetSpec,
    pub space: HilbertSpace,
    pub n_steps: usize,
    /// Double `n_steps` until the step-halving criterion holds.
    pub refine: bool,
}

impl TransferProblem {
    pub fn new(spec: HamiltonianSpec, initial: InitialState) -> Result<Self> {
        let space = initial.space(spec.frame())?;
        let target = initial.target(initial.default_cutoff());
        Ok(Self {
            spec,
            target,
            space,
            n_steps: dynamics::DEFAULT_STEPS,
            refine: false,
        })
    }

    pub fn with_space(mut self, space: HilbertSpace) -> Result<Self> {
        self.target.check_space(&space)?;
        self.space = space;
        Ok(self)
    }

    pub fn with_steps(mut self, n_steps: usize, refine: bool) -> Self {
        self.n_steps = n_steps;
        self.refine = refine;
        self
    }

    pub fn run(&self) -> Result<Trajectory> {
        self.run_spec(&self.spec)
    }

    fn run_spec(&self, spec: &HamiltonianSpec) -> Result<Trajectory> {
        let psi0 = self.target.initial_state(&self.space)?;
        if self.refine {
            dynamics::propagate_schrodinger_refined(spec, &psi0, &self.target, self.n_steps)
        } else {
            dynamics::propagate_schrodinger(spec, &psi0, &self.target, self.n_steps)
        }
    }

    /// Final population with the errors replaced by `(gamma, eta)`.
    pub fn final_population(&self, gamma: f64, eta: f64) -> Result<f64> {
        let spec = self.spec.clone().with_errors(gamma, eta);
        Ok(self.run_spec(&spec)?.final_population())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorAxis {
    Gamma,
    Eta,
}

impl std::fmt::Display for ErrorAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ErrorAxis::Gamma => "gamma",
            ErrorAxis::Eta => "eta",
        })
    }
}

/// Quadratic fit `P = 1 - q x^2` of the even part of `P(x)`.
#[derive(Clone, Debug, Serialize)]
pub struct Sensitivity {
    pub axis: ErrorAxis,
    pub q: f64,
    /// RMS deviation of the fit.
    pub residual: f64,
    pub magnitudes: Vec<f64>,
    /// `(P(x) + P(-x)) / 2` for each magnitude.
    pub symmetric_populations: Vec<f64>,
    pub p_zero: f64,
    /// Whether `P(0) = 1` within 1e-6, which the definition of `q` presumes.
    pub on_manifold: bool,
}

/// `q` from `P(T)` at `+-x` for `x` in [`FIT_MAGNITUDES`], with the other error at zero.
pub fn sensitivity_numeric(problem: &TransferProblem, axis: ErrorAxis) -> Result<Sensitivity> {
    sensitivity_with_magnitudes(problem, axis, &FIT_MAGNITUDES)
}

pub fn sensitivity_with_magnitudes(
    problem: &TransferProblem,
    axis: ErrorAxis,
    magnitudes: &[f64],
) -> Result<Sensitivity> {
    let at = |x: f64| match axis {
        ErrorAxis::Gamma => problem.final_population(x, 0.0),
        ErrorAxis::Eta => problem.final_population(0.0, x),
    };
    let mut points: Vec<f64> = vec![0.0];
    for &x in magnitudes {
        points.push(x);
        points.push(-x);
    }
    let values = points
        .par_iter()
        .map(|&x| at(x))
        .collect::<Result<Vec<f64>>>()?;
    let p_zero = values[0];
    let symmetric: Vec<f64> = values[1..]
        .chunks(2)
        .map(|pair| 0.5 * (pair[0] + pair[1]))
        .collect();
    let (q, residual) = fit_quadratic(magnitudes, &symmetric);
    if residual > FIT_RESIDUAL_LIMIT {
        return Err(Error::FitResidual {
            residual,
            limit: FIT_RESIDUAL_LIMIT,
        });
    }
    Ok(Sensitivity {
        axis,
        q,
        residual,
        magnitudes: magnitudes.to_vec(),
        symmetric_populations: symmetric,
        p_zero,
        on_manifold: (p_zero - 1.0).abs() <= 1e-6,
    })
}

/// Least squares for `1 - P = q x^2`; returns `(q, rms residual)`.
fn fit_quadratic(x: &[f64], p: &[f64]) -> (f64, f64) {
    let sx4: f64 = x.iter().map(|v| v.powi(4)).sum();
    let sxy: f64 = x.iter().zip(p).map(|(v, p)| v * v * (1.0 - p)).sum();
    let q = sxy / sx4;
    let rss: f64 = x
        .iter()
        .zip(p)
        .map(|(v, p)| (1.0 - p - q * v * v).powi(2))
        .sum();
    (q, (rss / x.len() as f64).sqrt())
}

/// Both sensitivities with their fit diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct SensitivityReport {
    pub q_g: f64,
    pub q_delta: f64,
    pub gamma: Sensitivity,
    pub eta: Sensitivity,
}

pub fn sensitivity_report(problem: &TransferProblem) -> Result<SensitivityReport> {
    let gamma = sensitivity_numeric(problem, ErrorAxis::Gamma)?;
    let eta = sensitivity_numeric(problem, ErrorAxis::Eta)?;
    Ok(SensitivityReport {
        q_g: gamma.q,
        q_delta: eta.q,
        gamma,
        eta,
    })
}

/// `q_g = N |int beta_dot sin^2 beta e^{-2i kappa}|^2`,
/// `q_Delta = N |int sin beta (alpha_dot/2 + kappa_dot cos beta) e^{-2i kappa}|^2`.
pub fn sensitivity_analytic_lr(params: &LrParams, n: usize) -> Result<(f64, f64)> {
    const TOL: f64 = 1e-13;
    let t_end = params.duration();
    let ig = quad::integrate(
        |t| {
            let [beta, beta_dot, _, _, kappa, _] = params.eval(t);
            C64::from_polar(beta_dot * beta.sin().powi(2), -2.0 * kappa)
        },
        0.0,
        t_end,
        TOL,
    )?;
    let id = quad::integrate(
        |t| {
            let [beta, _, _, alpha_dot, kappa, kappa_dot] = params.eval(t);
            let amp = beta.sin() * (0.5 * alpha_dot + kappa_dot * beta.cos());
            C64::from_polar(1.0, -2.0 * kappa) * amp
        },
        0.0,
        t_end,
        TOL,
    )?;
    let nf = n as f64;
    Ok((nf * ig.value.norm_sqr(), nf * id.value.norm_sqr()))
}

/// Second-order estimate `P = 1 - gamma^2 q_g - eta^2 q_Delta`, for `|gamma|, |eta| <= 0.1`.
pub fn perturbative_population_lr(
    params: &LrParams,
    n: usize,
    gamma: f64,
    eta: f64,
) -> Result<f64> {
    if gamma.abs() > 0.1 || eta.abs() > 0.1 {
        return Err(Error::InvalidInput(format!(
            "perturbative estimate needs |gamma|, |eta| <= 0.1, got ({gamma}, {eta})"
        )));
    }
    let (q_g, q_d) = sensitivity_analytic_lr(params, n)?;
    Ok(1.0 - gamma * gamma * q_g - eta * eta * q_d)
}

/// Final populations over a `(gamma, eta)` grid.
#[derive(Clone, Debug, Serialize)]
pub struct SweepGrid {
    pub gamma_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    /// `populations[i][j]` is `P(T; gamma_values[i], eta_values[j])`.
    pub populations: Vec<Vec<f64>>,
    pub metadata: BTreeMap<String, String>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// One propagation per grid point, run in parallel and assembled by index.
pub fn sweep_error_grid(
    problem: &TransferProblem,
    gamma_range: (f64, f64),
    eta_range: (f64, f64),
    resolution: usize,
) -> Result<SweepGrid> {
    for (lo, hi) in [gamma_range, eta_range] {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidInput(format!("invalid range [{lo}, {hi}]")));
        }
    }
    if resolution < 3 {
        return Err(Error::InvalidInput(format!(
            "resolution must be at least 3, got {resolution}"
        )));
    }
    let gammas = linspace(gamma_range.0, gamma_range.1, resolution);
    let etas = linspace(eta_range.0, eta_range.1, resolution);
    let flat = (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let (g, e) = (gammas[idx / resolution], etas[idx % resolution]);
            problem
                .final_population(g, e)
                .map_err(|source| Error::GridPoint {
                    gamma: g,
                    eta: e,
                    source: Box::new(source),
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    let populations = flat.chunks(resolution).map(<[f64]>::to_vec).collect();
    let mut metadata = problem.spec.schedule().metadata();
    metadata.insert("n_steps".into(), problem.n_steps.to_string());
    metadata.insert("n_max_m".into(), problem.space.n_max_m().to_string());
    metadata.insert("n_max_b".into(), problem.space.n_max_b().to_string());
    Ok(SweepGrid {
        gamma_values: gammas,
        eta_values: etas,
        populations,
        metadata,
    })
}

impl SweepGrid {
    /// Header `gamma\eta,<eta values>`, then one row per gamma.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "gamma\\eta")?;
        for e in &self.eta_values {
            write!(out, ",{}", crate::fmt_num(*e))?;
        }
        writeln!(out)?;
        for (g, row) in self.gamma_values.iter().zip(&self.populations) {
            write!(out, "{}", crate::fmt_num(*g))?;
            for p in row {
                write!(out, ",{}", crate::fmt_num(*p))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Nearest grid value to `(gamma, eta)`.
    pub fn at(&self, gamma: f64, eta: f64) -> f64 {
        let nearest = |v: &[f64], x: f64| {
            v.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
                .map(|(i, _)| i)
                .expect("non-empty")
        };
        self.populations[nearest(&self.gamma_values, gamma)][nearest(&self.eta_values, eta)]
    }
}
