//! Python bindings for the magnon-phonon transfer simulator.

use std::f64::consts::PI;

use magnotransfer_core::analysis::{self, ErrorAxis, InitialState, TransferProblem};
use magnotransfer_core::config::{self, BetaShape, ProtocolConfig, ProtocolKind, ScenarioConfig};
use magnotransfer_core::device::{self, DeviceParams, EffectiveModel};
use magnotransfer_core::dynamics::{self, Frame, HamiltonianSpec, PhysicalBath};
use magnotransfer_core::fock::{self, DensityMatrix, Mode};
use magnotransfer_core::protocols::{PulseSchedule, ThetaShape};
use magnotransfer_core::{scenario, Error};
use num_complex::Complex64 as C64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_)
        | Error::Config { .. }
        | Error::ConfigMissing(_)
        | Error::OutOfCutoff { .. }
        | Error::CutoffTooSmall { .. }
        | Error::MemoryBudget { .. }
        | Error::NotNormalized { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn value_err(msg: String) -> PyErr {
    PyValueError::new_err(msg)
}

fn to_python<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_initial(s: &str) -> PyResult<InitialState> {
    config::parse_initial(s).map_err(value_err)
}

fn parse_axis(s: &str) -> PyResult<ErrorAxis> {
    match s {
        "gamma" => Ok(ErrorAxis::Gamma),
        "eta" => Ok(ErrorAxis::Eta),
        _ => Err(value_err(format!(
            "unknown axis '{s}', expected gamma or eta"
        ))),
    }
}

fn parse_frame(frame: &str, omega_b_over_omega: f64) -> PyResult<Frame> {
    match frame {
        "rwa" => Ok(Frame::Rwa),
        "cr" | "counter_rotating" => Ok(Frame::CounterRotating { omega_b_over_omega }),
        _ => Err(value_err(format!(
            "unknown frame '{frame}', expected rwa or cr"
        ))),
    }
}

/// Truncated two-mode Fock space.
#[pyclass(frozen, skip_from_py_object, module = "magnotransfer")]
#[derive(Clone, Copy)]
struct HilbertSpace {
    inner: fock::HilbertSpace,
}

#[pymethods]
impl HilbertSpace {
    #[new]
    fn new(n_max_m: usize, n_max_b: usize) -> PyResult<Self> {
        Ok(Self {
            inner: fock::build_space(n_max_m, n_max_b).map_err(py_err)?,
        })
    }

    #[getter]
    fn n_max_m(&self) -> usize {
        self.inner.n_max_m()
    }

    #[getter]
    fn n_max_b(&self) -> usize {
        self.inner.n_max_b()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn index_of(&self, n_m: usize, n_b: usize) -> PyResult<usize> {
        self.inner.try_index_of(n_m, n_b).map_err(py_err)
    }

    fn levels(&self, index: usize) -> PyResult<(usize, usize)> {
        if index >= self.inner.dim() {
            return Err(value_err(format!(
                "index {index} out of range {}",
                self.inner.dim()
            )));
        }
        Ok(self.inner.levels(index))
    }

    fn __repr__(&self) -> String {
        format!(
            "HilbertSpace(n_max_m={}, n_max_b={})",
            self.inner.n_max_m(),
            self.inner.n_max_b()
        )
    }
}

/// Normalized pure state.
#[pyclass(frozen, module = "magnotransfer")]
struct StateVector {
    inner: fock::StateVector,
}

#[pymethods]
impl StateVector {
    #[new]
    fn new(space: &HilbertSpace, amplitudes: Vec<C64>) -> PyResult<Self> {
        let v = nalgebra_vector(amplitudes);
        Ok(Self {
            inner: fock::StateVector::new(space.inner, v).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn fock(space: &HilbertSpace, k_m: usize, k_b: usize) -> PyResult<Self> {
        Ok(Self {
            inner: fock::fock_product_state(&space.inner, k_m, k_b).map_err(py_err)?,
        })
    }

    /// Even cat state of amplitude `zeta` on mode m.
    #[staticmethod]
    fn cat(space: &HilbertSpace, zeta: C64) -> PyResult<Self> {
        Ok(Self {
            inner: fock::cat_state(&space.inner, zeta, Mode::M).map_err(py_err)?,
        })
    }

    #[getter]
    fn space(&self) -> HilbertSpace {
        HilbertSpace {
            inner: *self.inner.space(),
        }
    }

    fn amplitudes(&self) -> Vec<C64> {
        self.inner.amplitudes().iter().copied().collect()
    }

    fn amplitude(&self, n_m: usize, n_b: usize) -> PyResult<C64> {
        self.inner.space().try_index_of(n_m, n_b).map_err(py_err)?;
        Ok(self.inner.amplitude(n_m, n_b))
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn mean_excitation(&self) -> f64 {
        self.inner.mean_excitation()
    }

    fn mean_occupation(&self, mode: &str) -> PyResult<f64> {
        let mode = match mode {
            "m" => Mode::M,
            "b" => Mode::B,
            _ => return Err(value_err(format!("unknown mode '{mode}', expected m or b"))),
        };
        Ok(self.inner.mean_occupation(mode))
    }

    fn inner_product(&self, other: &StateVector) -> C64 {
        self.inner.inner(&other.inner)
    }
}

fn nalgebra_vector(v: Vec<C64>) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_vec(v)
}

/// Time-dependent control fields `Delta(t)` and `g(t)`.
#[pyclass(frozen, skip_from_py_object, module = "magnotransfer")]
#[derive(Clone)]
struct Schedule {
    inner: PulseSchedule,
}

fn beta_shape(s: &str) -> PyResult<BetaShape> {
    s.parse().map_err(value_err)
}

#[pymethods]
impl Schedule {
    /// Builds a schedule by protocol name: `pi_pulse`, `tqd`, `lr` or `lr_optimized`.
    #[new]
    #[pyo3(signature = (kind, duration = PI, theta_shape = "linear", include_cd = true, j = 1, beta_shape = "linear", alpha_amp = 1.0, kappa_amp = 1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        kind: &str,
        duration: f64,
        theta_shape: &str,
        include_cd: bool,
        j: i32,
        beta_shape: &str,
        alpha_amp: f64,
        kappa_amp: f64,
    ) -> PyResult<Self> {
        let kind: ProtocolKind = kind.parse().map_err(value_err)?;
        let theta_shape = match theta_shape {
            "linear" => ThetaShape::Linear,
            "quadratic" => ThetaShape::Quadratic,
            other => return Err(value_err(format!("unknown theta shape '{other}'"))),
        };
        let p = ProtocolConfig {
            kind,
            duration,
            theta_shape,
            include_cd,
            j,
            beta_shape: self::beta_shape(beta_shape)?,
            alpha_amp,
            kappa_amp,
        };
        Ok(Self {
            inner: scenario::build_schedule(&p, kind).map_err(py_err)?,
        })
    }

    /// `beta = pi t/T`, `alpha = -(4/3) sin^3 beta`, `kappa = beta - sin(2 beta)/2`.
    #[staticmethod]
    #[pyo3(signature = (duration = PI))]
    fn fig3(duration: f64) -> PyResult<Self> {
        let params = magnotransfer_core::protocols::LrParams::fig3(duration).map_err(py_err)?;
        Ok(Self {
            inner: PulseSchedule::lr(params).map_err(py_err)?,
        })
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration()
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega()
    }

    #[getter]
    fn tag(&self) -> String {
        self.inner.tag().to_string()
    }

    /// `(delta, g, theta_dot)` at time `t`; `g` is complex.
    fn sample(&self, t: f64) -> (f64, C64, f64) {
        let s = self.inner.sample(t);
        (s.delta, s.coupling(), s.theta_dot)
    }

    /// `n` equally spaced samples as `(t, delta, g, theta_dot)`.
    fn samples(&self, n: usize) -> PyResult<Vec<(f64, f64, C64, f64)>> {
        if n < 2 {
            return Err(value_err("need at least 2 samples".into()));
        }
        Ok(self
            .inner
            .samples(n)
            .into_iter()
            .map(|s| (s.t, s.delta, s.coupling(), s.theta_dot))
            .collect())
    }

    fn metadata(&self) -> std::collections::BTreeMap<String, String> {
        self.inner.metadata()
    }

    fn to_csv(&self, n: usize) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner
            .write_csv(n, &mut buf)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(String::from_utf8_lossy(&buf).into_owned())
    }

    /// Analytic `(q_g, q_Delta)` for invariant-based schedules, `None` otherwise.
    #[pyo3(signature = (n = 1))]
    fn lr_sensitivity(&self, n: usize) -> PyResult<Option<(f64, f64)>> {
        match self.inner.lr_params() {
            Some(p) => Ok(Some(
                analysis::sensitivity_analytic_lr(p, n).map_err(py_err)?,
            )),
            None => Ok(None),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Schedule({}, duration={})",
            self.inner.tag(),
            self.inner.duration()
        )
    }
}

/// Sampled observables from one propagation.
#[pyclass(frozen, module = "magnotransfer")]
struct Trajectory {
    inner: dynamics::Trajectory,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn populations(&self) -> Vec<f64> {
        self.inner.populations.clone()
    }

    #[getter]
    fn excitations(&self) -> Vec<f64> {
        self.inner.excitations.clone()
    }

    #[getter]
    fn final_population(&self) -> f64 {
        self.inner.final_population()
    }

    #[getter]
    fn norm_drift(&self) -> f64 {
        self.inner.norm_drift
    }

    #[getter]
    fn excitation_drift(&self) -> f64 {
        self.inner.excitation_drift
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.n_steps
    }

    #[getter]
    fn step_halving_delta(&self) -> Option<f64> {
        self.inner.step_halving_delta
    }

    #[getter]
    fn min_eigenvalue(&self) -> Option<f64> {
        self.inner.min_eigenvalue
    }

    /// Final pure state, `None` for Lindblad runs.
    fn final_state(&self) -> Option<StateVector> {
        self.inner
            .final_pure()
            .map(|s| StateVector { inner: s.clone() })
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner
            .write_csv(&mut buf)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(String::from_utf8_lossy(&buf).into_owned())
    }
}

/// A schedule, initial state, static errors and frame, ready to propagate.
#[pyclass(frozen, module = "magnotransfer")]
struct Problem {
    inner: TransferProblem,
}

#[pymethods]
impl Problem {
    #[new]
    #[pyo3(signature = (schedule, initial, gamma = 0.0, eta = 0.0, frame = "rwa", omega_b_over_omega = 10.0, steps = 2000, refine = false, cutoff = None, scale_cd = true))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        schedule: &Schedule,
        initial: &str,
        gamma: f64,
        eta: f64,
        frame: &str,
        omega_b_over_omega: f64,
        steps: usize,
        refine: bool,
        cutoff: Option<usize>,
        scale_cd: bool,
    ) -> PyResult<Self> {
        let initial = parse_initial(initial)?;
        let frame = parse_frame(frame, omega_b_over_omega)?;
        let spec = HamiltonianSpec::new(schedule.inner.clone())
            .with_errors(gamma, eta)
            .with_cd_error_scaling(scale_cd)
            .with_frame(frame)
            .map_err(py_err)?;
        let mut problem = TransferProblem::new(spec, initial)
            .map_err(py_err)?
            .with_steps(steps, refine);
        if let Some(n) = cutoff {
            let space = fock::build_space(n, n).map_err(py_err)?;
            problem = problem.with_space(space).map_err(py_err)?;
        }
        Ok(Self { inner: problem })
    }

    #[getter]
    fn space(&self) -> HilbertSpace {
        HilbertSpace {
            inner: self.inner.space,
        }
    }

    fn initial_state(&self) -> PyResult<StateVector> {
        Ok(StateVector {
            inner: self
                .inner
                .target
                .initial_state(&self.inner.space)
                .map_err(py_err)?,
        })
    }

    fn run(&self, py: Python<'_>) -> PyResult<Trajectory> {
        let inner = py.detach(|| self.inner.run()).map_err(py_err)?;
        Ok(Trajectory { inner })
    }

    /// `P(T)` with the static errors replaced by `(gamma, eta)`.
    fn final_population(&self, py: Python<'_>, gamma: f64, eta: f64) -> PyResult<f64> {
        py.detach(|| self.inner.final_population(gamma, eta))
            .map_err(py_err)
    }

    /// Quadratic-fit sensitivity along `axis` (`gamma` or `eta`).
    #[pyo3(signature = (axis, magnitudes = None))]
    fn sensitivity<'py>(
        &self,
        py: Python<'py>,
        axis: &str,
        magnitudes: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let axis = parse_axis(axis)?;
        let s = py
            .detach(|| match &magnitudes {
                Some(m) => analysis::sensitivity_with_magnitudes(&self.inner, axis, m),
                None => analysis::sensitivity_numeric(&self.inner, axis),
            })
            .map_err(py_err)?;
        to_python(py, &s)
    }

    /// `P(T)` over a `resolution x resolution` grid as a dict with
    /// `gamma_values`, `eta_values` and `populations[i][j]`.
    #[pyo3(signature = (gamma_range = (-0.2, 0.2), eta_range = (-0.2, 0.2), resolution = 41))]
    fn sweep<'py>(
        &self,
        py: Python<'py>,
        gamma_range: (f64, f64),
        eta_range: (f64, f64),
        resolution: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let grid = py
            .detach(|| analysis::sweep_error_grid(&self.inner, gamma_range, eta_range, resolution))
            .map_err(py_err)?;
        to_python(py, &grid)
    }

    /// Open-system run against the reference thermal bath at `temperature` kelvin.
    #[pyo3(signature = (temperature, steps = 400, refine = false, kappa_m = None, kappa_b = None))]
    fn lindblad(
        &self,
        py: Python<'_>,
        temperature: f64,
        steps: usize,
        refine: bool,
        kappa_m: Option<f64>,
        kappa_b: Option<f64>,
    ) -> PyResult<Trajectory> {
        if !matches!(self.inner.spec.frame(), Frame::Rwa) {
            return Err(value_err("Lindblad runs use the rwa frame".into()));
        }
        let mut bath = PhysicalBath::reference(temperature);
        if let Some(k) = kappa_m {
            bath.kappa_m = k;
        }
        if let Some(k) = kappa_b {
            bath.kappa_b = k;
        }
        let p = &self.inner;
        let inner = py
            .detach(|| {
                let spec = bath.to_spec(p.spec.schedule().omega())?;
                let rho0 = DensityMatrix::from_pure(&p.target.initial_state(&p.space)?);
                if refine {
                    dynamics::propagate_lindblad_refined(&p.spec, &spec, &rho0, &p.target, steps)
                } else {
                    dynamics::propagate_lindblad(&p.spec, &spec, &rho0, &p.target, steps)
                }
            })
            .map_err(py_err)?;
        Ok(Trajectory { inner })
    }
}

/// Closed-form `P(T)` of the pi pulse under a coupling error `gamma`.
fn pi_pulse_target(initial: &str) -> PyResult<analysis::TargetSpec> {
    let initial = parse_initial(initial)?;
    Ok(initial.target(initial.default_cutoff()))
}

#[pyfunction]
fn pi_pulse_population(initial: &str, gamma: f64) -> PyResult<f64> {
    Ok(analysis::pi_pulse_population_analytic(
        &pi_pulse_target(initial)?,
        gamma,
    ))
}

/// `(pi^2 / 4) <n>` for the pi pulse.
#[pyfunction]
fn pi_pulse_sensitivity(initial: &str) -> PyResult<f64> {
    Ok(analysis::pi_pulse_sensitivity_analytic(&pi_pulse_target(
        initial,
    )?))
}

/// Mean thermal occupation at angular frequency `omega` (rad/s) and temperature in kelvin.
#[pyfunction]
fn thermal_occupation(omega: f64, temperature: f64) -> f64 {
    dynamics::thermal_occupation(omega, temperature)
}

#[allow(clippy::too_many_arguments)]
fn device_params(
    omega_a: f64,
    omega_m: f64,
    omega_b: f64,
    omega_p: f64,
    g_ma: f64,
    g_mb: f64,
    epsilon_p: C64,
    kappa_1: f64,
    kappa_2: f64,
    kappa_b: f64,
) -> DeviceParams {
    let s = 2.0 * PI;
    DeviceParams {
        omega_a: s * omega_a,
        omega_m: s * omega_m,
        omega_b: s * omega_b,
        omega_p: s * omega_p,
        g_ma: s * g_ma,
        g_mb: s * g_mb,
        epsilon_p: epsilon_p * s,
        kappa_1: s * kappa_1,
        kappa_2: s * kappa_2,
        kappa_b: s * kappa_b,
    }
}

/// Effective two-mode model and regime diagnostics for a device given in Hz.
/// Returns a dict with `model` and `diagnostics`.
#[pyfunction]
#[pyo3(signature = (omega_a, omega_m, omega_b, omega_p, g_ma, g_mb, epsilon_p, kappa_1, kappa_2, kappa_b))]
#[allow(clippy::too_many_arguments)]
fn effective_model<'py>(
    py: Python<'py>,
    omega_a: f64,
    omega_m: f64,
    omega_b: f64,
    omega_p: f64,
    g_ma: f64,
    g_mb: f64,
    epsilon_p: C64,
    kappa_1: f64,
    kappa_2: f64,
    kappa_b: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let p = device_params(
        omega_a, omega_m, omega_b, omega_p, g_ma, g_mb, epsilon_p, kappa_1, kappa_2, kappa_b,
    );
    let model = EffectiveModel::from_params(&p).map_err(py_err)?;
    let diagnostics = device::validate_regime(&p, &model);
    to_python(
        py,
        &serde_json::json!({ "model": model, "diagnostics": diagnostics }),
    )
}

/// Runs a scenario config and writes its artifacts to `out_dir`; returns the summary dict.
#[pyfunction]
#[pyo3(signature = (text, out_dir = None))]
fn run_config<'py>(
    py: Python<'py>,
    text: &str,
    out_dir: Option<std::path::PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ScenarioConfig::from_text(text).map_err(py_err)?;
    let dir = out_dir.unwrap_or_else(|| cfg.output.clone());
    let summary = py
        .detach(|| scenario::run_scenario_in(&cfg, &dir))
        .map_err(py_err)?;
    to_python(py, &summary)
}

/// Effective config text for a scenario config, with presets applied.
#[pyfunction]
fn validate_config(text: &str) -> PyResult<String> {
    Ok(config::validate_config(text).map_err(py_err)?.to_text())
}

/// Default config text of a named preset.
#[pyfunction]
fn preset(name: &str) -> PyResult<String> {
    let sc: config::Scenario = name.parse().map_err(value_err)?;
    Ok(config::preset_text(sc).to_string())
}

#[pymodule]
fn magnotransfer(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<HilbertSpace>()?;
    m.add_class::<StateVector>()?;
    m.add_class::<Schedule>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<Problem>()?;
    m.add_function(wrap_pyfunction!(pi_pulse_population, m)?)?;
    m.add_function(wrap_pyfunction!(pi_pulse_sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(thermal_occupation, m)?)?;
    m.add_function(wrap_pyfunction!(effective_model, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    Ok(())
}
