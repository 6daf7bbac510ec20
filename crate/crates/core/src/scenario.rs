//! Execution of [`ScenarioConfig`] runs and their CSV/JSON artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{self, ErrorAxis, SensitivityReport, TransferProblem};
use crate::config::{BetaShape, ProtocolConfig, ProtocolKind, Scenario, ScenarioConfig};
use crate::device::{self, Diagnostic, EffectiveModel};
use crate::dynamics::{self, Frame, HamiltonianSpec, PhysicalBath, Trajectory};
use crate::error::Result;
use crate::fmt_num;
use crate::fock::{self, DensityMatrix};
use crate::protocols::{self, LrParams, ParamFn, PulseSchedule};

/// Headline results of one scenario run.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub description: String,
    pub initial: String,
    pub n_max_m: usize,
    pub n_max_b: usize,
    /// Final populations keyed by curve label.
    pub headline: BTreeMap<String, f64>,
    /// Worst hygiene figures over all runs.
    pub max_norm_drift: f64,
    pub max_excitation_drift: Option<f64>,
    pub max_step_halving_delta: Option<f64>,
    pub min_eigenvalue: Option<f64>,
    pub effective_model: Option<EffectiveModel>,
    pub diagnostics: Vec<Diagnostic>,
    pub files: Vec<String>,
}

/// Rendered output files, written only after every computation succeeded.
#[derive(Default)]
struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
}

impl Artifacts {
    fn add(&mut self, name: String, bytes: Vec<u8>) {
        self.files.insert(name, bytes);
    }

    fn write_into(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

struct Hygiene {
    norm: f64,
    excitation: Option<f64>,
    halving: Option<f64>,
    min_eig: Option<f64>,
}

impl Hygiene {
    fn new() -> Self {
        Self {
            norm: 0.0,
            excitation: None,
            halving: None,
            min_eig: None,
        }
    }

    fn record(&mut self, tr: &Trajectory, rwa: bool) {
        self.norm = self.norm.max(tr.norm_drift);
        if rwa && tr.min_eigenvalue.is_none() {
            self.excitation = Some(self.excitation.unwrap_or(0.0).max(tr.excitation_drift));
        }
        if let Some(d) = tr.step_halving_delta {
            self.halving = Some(self.halving.unwrap_or(0.0).max(d));
        }
        if let Some(e) = tr.min_eigenvalue {
            self.min_eig = Some(self.min_eig.map_or(e, |m: f64| m.min(e)));
        }
    }
}

/// Schedule for `kind` with the duration and shape parameters of `p`.
pub fn build_schedule(p: &ProtocolConfig, kind: ProtocolKind) -> Result<PulseSchedule> {
    let t = p.duration;
    let beta = || match p.beta_shape {
        BetaShape::Linear => protocols::linear_beta(t),
        BetaShape::Smooth => protocols::smooth_beta(t),
    };
    match kind {
        ProtocolKind::PiPulse => PulseSchedule::pi_pulse(t),
        ProtocolKind::Tqd => PulseSchedule::tqd(t, p.theta_shape, p.include_cd),
        ProtocolKind::LrOptimized => PulseSchedule::lr_optimized(t, p.j, beta()),
        ProtocolKind::Lr => PulseSchedule::lr(lr_family(t, beta(), p.alpha_amp, p.kappa_amp)?),
    }
}

/// `alpha = -(4a/3) sin^3 beta`, `kappa = k (beta - sin(2 beta)/2)`.
fn lr_family(duration: f64, beta: ParamFn, a: f64, k: f64) -> Result<LrParams> {
    let (b1, b2, b3, b4) = (beta.clone(), beta.clone(), beta.clone(), beta.clone());
    let alpha = ParamFn::with_derivative(
        format!("-(4*{a}/3)*sin(beta)^3"),
        move |t| -4.0 * a / 3.0 * b1.value(t).sin().powi(3),
        move |t| {
            let b = b2.value(t);
            -4.0 * a * b.sin().powi(2) * b.cos() * b2.rate(t, duration)
        },
    );
    let kappa = ParamFn::with_derivative(
        format!("{k}*(beta - sin(2*beta)/2)"),
        move |t| {
            let b = b3.value(t);
            k * (b - (2.0 * b).sin() / 2.0)
        },
        move |t| 2.0 * k * b4.value(t).sin().powi(2) * b4.rate(t, duration),
    );
    LrParams::new(duration, beta, alpha, kappa)
}

/// Unitary problem for `schedule` in `frame`, honoring the configured cutoff and steps.
pub fn build_problem(
    cfg: &ScenarioConfig,
    schedule: PulseSchedule,
    frame: Frame,
) -> Result<TransferProblem> {
    let spec = HamiltonianSpec::new(schedule)
        .with_errors(cfg.gamma, cfg.eta)
        .with_cd_error_scaling(cfg.scale_cd)
        .with_frame(frame)?;
    let mut problem = TransferProblem::new(spec, cfg.initial)?;
    if let Some(n) = cfg.cutoff {
        let space = fock::build_space(n, n)?;
        problem.target = cfg.initial.target(n.min(cfg.initial.default_cutoff()));
        problem = problem.with_space(space)?;
    }
    Ok(problem.with_steps(cfg.steps, cfg.refine))
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

fn csv_bytes<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn scan_csv(axis: ErrorAxis, xs: &[f64], columns: &[(String, Vec<f64>)]) -> Vec<u8> {
    let mut s = axis.to_string();
    for (name, _) in columns {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (i, x) in xs.iter().enumerate() {
        s.push_str(&fmt_num(*x));
        for (_, col) in columns {
            s.push(',');
            s.push_str(&fmt_num(col[i]));
        }
        s.push('\n');
    }
    s.into_bytes()
}

fn scan_populations(
    problem: &TransferProblem,
    axis: ErrorAxis,
    xs: &[f64],
    other: f64,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    xs.par_iter()
        .map(|&x| match axis {
            ErrorAxis::Gamma => problem.final_population(x, other),
            ErrorAxis::Eta => problem.final_population(other, x),
        })
        .collect()
}

fn key(label: &str, name: &str, value: f64) -> String {
    format!("{label}[{name}={value}]")
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    art: Artifacts,
    headline: BTreeMap<String, f64>,
    hygiene: Hygiene,
    dims: (usize, usize),
}

impl<'a> Runner<'a> {
    fn schedule(
        &mut self,
        label: &str,
        p: &ProtocolConfig,
        kind: ProtocolKind,
    ) -> Result<PulseSchedule> {
        let s = build_schedule(p, kind)?;
        let bytes = csv_bytes(|b| s.write_csv(self.cfg.schedule_samples, b))?;
        self.art.add(format!("schedule_{label}.csv"), bytes);
        Ok(s)
    }

    fn unitary(
        &mut self,
        label: &str,
        headline: &str,
        schedule: PulseSchedule,
        frame: Frame,
    ) -> Result<f64> {
        let problem = build_problem(self.cfg, schedule, frame)?;
        self.dims = (problem.space.n_max_m(), problem.space.n_max_b());
        let tr = problem.run()?;
        self.hygiene.record(&tr, frame == Frame::Rwa);
        let bytes = csv_bytes(|b| tr.write_csv(b))?;
        self.art.add(format!("trajectory_{label}.csv"), bytes);
        let p = tr.final_population();
        self.headline.insert(headline.to_string(), p);
        Ok(p)
    }

    fn lindblad(&mut self, label: &str, schedule: PulseSchedule) -> Result<()> {
        let Some(l) = &self.cfg.lindblad else {
            return Ok(());
        };
        let two_pi = 2.0 * std::f64::consts::PI;
        let omega = schedule.omega();
        let problem = build_problem(self.cfg, schedule, Frame::Rwa)?;
        self.dims = (problem.space.n_max_m(), problem.space.n_max_b());
        let psi0 = problem.target.initial_state(&problem.space)?;
        let rho0 = DensityMatrix::from_pure(&psi0);
        for &temp in &l.temperatures {
            let bath = PhysicalBath {
                kappa_m: l.kappa_m,
                kappa_b: l.kappa_b,
                omega_m: two_pi * l.omega_m_hz,
                omega_b: two_pi * l.omega_b_hz,
                temperature: temp,
                omega_unit: two_pi * l.omega_unit_hz,
            }
            .to_spec(omega)?;
            let tr = if self.cfg.refine {
                dynamics::propagate_lindblad_refined(
                    &problem.spec,
                    &bath,
                    &rho0,
                    &problem.target,
                    l.steps,
                )?
            } else {
                dynamics::propagate_lindblad(&problem.spec, &bath, &rho0, &problem.target, l.steps)?
            };
            self.hygiene.record(&tr, false);
            let bytes = csv_bytes(|b| tr.write_csv(b))?;
            self.art
                .add(format!("trajectory_{label}_T{temp}.csv"), bytes);
            self.headline
                .insert(key(label, "T", temp), tr.final_population());
        }
        Ok(())
    }

    fn scan(&mut self, file: &str, runs: Vec<(String, PulseSchedule)>) -> Result<()> {
        let Some(sc) = &self.cfg.scan else {
            return Ok(());
        };
        let xs = linspace(sc.min, sc.max, sc.points);
        let other = match sc.axis {
            ErrorAxis::Gamma => self.cfg.eta,
            ErrorAxis::Eta => self.cfg.gamma,
        };
        let axis = sc.axis.to_string();
        let mut columns = Vec::new();
        for (label, schedule) in runs {
            let problem = build_problem(self.cfg, schedule, self.cfg.frame)?;
            self.dims = (problem.space.n_max_m(), problem.space.n_max_b());
            let ps = scan_populations(&problem, sc.axis, &xs, other)?;
            for (x, p) in [(xs[0], ps[0]), (xs[xs.len() - 1], ps[ps.len() - 1])] {
                self.headline.insert(key(&label, &axis, x), p);
            }
            columns.push((format!("P_{label}"), ps));
        }
        self.art
            .add(file.to_string(), scan_csv(sc.axis, &xs, &columns));
        Ok(())
    }

    fn sweep(&mut self, schedule: PulseSchedule) -> Result<()> {
        let Some(sw) = &self.cfg.sweep else {
            return Ok(());
        };
        let problem = build_problem(self.cfg, schedule, self.cfg.frame)?;
        self.dims = (problem.space.n_max_m(), problem.space.n_max_b());
        let grid = analysis::sweep_error_grid(
            &problem,
            (sw.gamma_min, sw.gamma_max),
            (sw.eta_min, sw.eta_max),
            sw.resolution,
        )?;
        self.art
            .add("sweep.csv".into(), csv_bytes(|b| grid.write_csv(b))?);
        let mut json = Vec::new();
        grid.write_json(&mut json)?;
        json.push(b'\n');
        self.art.add("sweep.json".into(), json);
        let n = sw.resolution;
        let ridge = (0..n)
            .map(|i| grid.populations[i][i])
            .fold(f64::INFINITY, f64::min);
        self.headline.insert("P_diagonal_min".into(), ridge);
        let min = grid
            .populations
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min);
        self.headline.insert("P_grid_min".into(), min);
        Ok(())
    }
}

/// Computes every curve of the scenario, then writes all artifacts into
/// `cfg.output` and returns the summary (also written as `summary.json`).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Summary> {
    run_scenario_in(cfg, &cfg.output)
}

pub fn run_scenario_in(cfg: &ScenarioConfig, out_dir: &Path) -> Result<Summary> {
    let mut r = Runner {
        cfg,
        art: Artifacts::default(),
        headline: BTreeMap::new(),
        hygiene: Hygiene::new(),
        dims: (0, 0),
    };
    let p = &cfg.protocol;
    let kind = p.kind;
    match cfg.scenario {
        Scenario::Fig2 => {
            let mut with = p.clone();
            with.include_cd = true;
            let mut without = p.clone();
            without.include_cd = false;
            let s = r.schedule("with_cd", &with, ProtocolKind::Tqd)?;
            r.unitary("with_cd", "P_with_CD", s, cfg.frame)?;
            let s = r.schedule("without_cd", &without, ProtocolKind::Tqd)?;
            r.unitary("without_cd", "P_without_CD", s, cfg.frame)?;
        }
        Scenario::Fig3 => {
            let s = r.schedule(kind.name(), p, kind)?;
            r.unitary(kind.name(), &format!("P_{}", kind.name()), s, cfg.frame)?;
        }
        Scenario::Fig4 => {
            let mut runs = Vec::new();
            for shape in [
                protocols::ThetaShape::Linear,
                protocols::ThetaShape::Quadratic,
            ] {
                let mut q = p.clone();
                q.theta_shape = shape;
                let label = format!("tqd_{shape}");
                runs.push((label.clone(), r.schedule(&label, &q, ProtocolKind::Tqd)?));
            }
            r.scan("scan.csv", runs)?;
        }
        Scenario::Fig5 => {
            let s = r.schedule(kind.name(), p, kind)?;
            r.sweep(s)?;
        }
        Scenario::Fig6 => {
            let mut runs = Vec::new();
            for k in [
                ProtocolKind::PiPulse,
                ProtocolKind::Tqd,
                ProtocolKind::LrOptimized,
            ] {
                runs.push((k.name().to_string(), r.schedule(k.name(), p, k)?));
            }
            r.scan("scan.csv", runs)?;
        }
        Scenario::Fig7 => {
            for k in [ProtocolKind::Tqd, ProtocolKind::LrOptimized] {
                let s = r.schedule(k.name(), p, k)?;
                r.lindblad(k.name(), s)?;
            }
        }
        Scenario::Fig8 => {
            for &ratio in &cfg.cr_ratios {
                let frame = Frame::CounterRotating {
                    omega_b_over_omega: ratio,
                };
                for k in [
                    ProtocolKind::PiPulse,
                    ProtocolKind::Tqd,
                    ProtocolKind::LrOptimized,
                ] {
                    let s = r.schedule(k.name(), p, k)?;
                    let label = format!("{}_ratio{ratio}", k.name());
                    r.unitary(
                        &label,
                        &key(k.name(), "omega_b_over_omega", ratio),
                        s,
                        frame,
                    )?;
                }
            }
        }
        Scenario::Custom => {
            let s = r.schedule(kind.name(), p, kind)?;
            r.unitary(kind.name(), "P", s.clone(), cfg.frame)?;
            r.lindblad(kind.name(), s.clone())?;
            r.scan("scan.csv", vec![(kind.name().to_string(), s.clone())])?;
            r.sweep(s)?;
        }
    }

    let (effective_model, diagnostics) = match &cfg.device {
        Some(d) => {
            let m = EffectiveModel::from_params(d)?;
            let diags = device::validate_regime(d, &m);
            let mut json = serde_json::to_vec_pretty(&m)?;
            json.push(b'\n');
            r.art.add("effective_model.json".into(), json);
            (Some(m), diags)
        }
        None => (None, Vec::new()),
    };
    r.art
        .add("effective_config.txt".into(), cfg.to_text().into_bytes());

    let mut files: Vec<String> = r.art.files.keys().cloned().collect();
    files.push("summary.json".into());
    files.sort();
    let summary = Summary {
        scenario: cfg.scenario.name().into(),
        description: cfg.scenario.describe().into(),
        initial: cfg.initial.to_string(),
        n_max_m: r.dims.0,
        n_max_b: r.dims.1,
        headline: r.headline,
        max_norm_drift: r.hygiene.norm,
        max_excitation_drift: r.hygiene.excitation,
        max_step_halving_delta: r.hygiene.halving,
        min_eigenvalue: r.hygiene.min_eig,
        effective_model,
        diagnostics,
        files,
    };
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    r.art.add("summary.json".into(), json);
    r.art.write_into(out_dir)?;
    Ok(summary)
}

/// Numeric sensitivities of the configured protocol plus the analytic values
/// available for it.
#[derive(Clone, Debug, Serialize)]
pub struct SensitivityOutput {
    pub protocol: String,
    pub initial: String,
    pub numeric: SensitivityReport,
    /// `(q_g, q_Delta)` from the invariant-based integrals (invariant protocols only).
    pub analytic_lr: Option<(f64, f64)>,
    /// `(pi^2 / 4) n_m` (pi pulse only).
    pub analytic_pi_pulse: Option<f64>,
}

pub fn run_sensitivity(cfg: &ScenarioConfig) -> Result<SensitivityOutput> {
    let schedule = build_schedule(&cfg.protocol, cfg.protocol.kind)?;
    let problem = build_problem(cfg, schedule, cfg.frame)?;
    let numeric = analysis::sensitivity_report(&problem)?;
    let n_bar = problem.target.mean_excitation();
    let analytic_lr = match problem.spec.schedule().lr_params() {
        Some(params) => {
            let (g, d) = analysis::sensitivity_analytic_lr(params, 1)?;
            Some((n_bar * g, n_bar * d))
        }
        None => None,
    };
    let analytic_pi_pulse = (cfg.protocol.kind == ProtocolKind::PiPulse)
        .then(|| analysis::pi_pulse_sensitivity_analytic(&problem.target));
    Ok(SensitivityOutput {
        protocol: cfg.protocol.kind.name().into(),
        initial: cfg.initial.to_string(),
        numeric,
        analytic_lr,
        analytic_pi_pulse,
    })
}

/// Output directory for a preset run when `--out` is not given.
pub fn default_out_dir(scenario: Scenario) -> PathBuf {
    PathBuf::from(format!("out_{}", scenario.name()))
}
