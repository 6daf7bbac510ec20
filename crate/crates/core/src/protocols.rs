//! Control schedules for the state-transfer protocols: flat pi pulse,
//! transitionless driving (TQD) with its counterdiabatic term, and
//! invariant-based inverse engineering (generic and error-optimized).
//!
//! Times are in units of `1/Omega` and rates in units of `Omega = pi / T`
//! whenever `T = pi`; every schedule is parameterized by its duration `T`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, HilbertSpace, Mode, OperatorMatrix};
use crate::quad;
use crate::sparse;

/// Relative finite-difference step for derivatives not given analytically.
pub const FD_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSample {
    pub t: f64,
    pub delta: f64,
    pub g_real: f64,
    pub g_imag: f64,
    pub theta_dot: f64,
}

impl ControlSample {
    /// `g = g_R + i g_I`.
    pub fn coupling(&self) -> C64 {
        C64::new(self.g_real, self.g_imag)
    }

    fn is_finite(&self) -> bool {
        [self.t, self.delta, self.g_real, self.g_imag, self.theta_dot]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolTag {
    PiPulse,
    Tqd,
    Lr,
    LrOptimized,
    Constant,
}

impl fmt::Display for ProtocolTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProtocolTag::PiPulse => "pi_pulse",
            ProtocolTag::Tqd => "tqd",
            ProtocolTag::Lr => "lr",
            ProtocolTag::LrOptimized => "lr_optimized",
            ProtocolTag::Constant => "constant",
        };
        f.write_str(s)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A named scalar function of time, with an optional analytic derivative.
#[derive(Clone)]
pub struct ParamFn {
    label: String,
    value: ScalarFn,
    derivative: Option<ScalarFn>,
}

impl fmt::Debug for ParamFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParamFn")
            .field("label", &self.label)
            .field("analytic_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl ParamFn {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            value: Arc::new(value),
            derivative: None,
        }
    }

    pub fn with_derivative(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            value: Arc::new(value),
            derivative: Some(Arc::new(derivative)),
        }
    }

    pub fn constant(label: impl Into<String>, c: f64) -> Self {
        Self::with_derivative(label, move |_| c, |_| 0.0)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    /// Analytic derivative if present, otherwise a centered difference with
    /// step `duration * FD_STEP`.
    pub fn rate(&self, t: f64, duration: f64) -> f64 {
        match &self.derivative {
            Some(d) => d(t),
            None => {
                let h = duration * FD_STEP;
                ((self.value)(t + h) - (self.value)(t - h)) / (2.0 * h)
            }
        }
    }
}

/// `beta(t) = pi t / T`.
pub fn linear_beta(duration: f64) -> ParamFn {
    ParamFn::with_derivative("pi*t/T", move |t| PI * t / duration, move |_| PI / duration)
}

/// `beta(t) = pi [t/T - sin(2 pi t/T) / (2 pi)]`, with vanishing rate at both ends.
pub fn smooth_beta(duration: f64) -> ParamFn {
    ParamFn::with_derivative(
        "pi*(t/T - sin(2*pi*t/T)/(2*pi))",
        move |t| PI * (t / duration - (2.0 * PI * t / duration).sin() / (2.0 * PI)),
        move |t| PI / duration * (1.0 - (2.0 * PI * t / duration).cos()),
    )
}

/// Invariant parameters `beta`, `alpha` and the per-excitation phase `kappa`.
#[derive(Clone, Debug)]
pub struct LrParams {
    duration: f64,
    beta: ParamFn,
    alpha: ParamFn,
    kappa: ParamFn,
}

impl LrParams {
    /// Checks `beta(0) = 0` and `beta(T) = pi`.
    pub fn new(duration: f64, beta: ParamFn, alpha: ParamFn, kappa: ParamFn) -> Result<Self> {
        check_duration(duration)?;
        let b0 = beta.value(0.0);
        let b1 = beta.value(duration);
        if b0.abs() > 1e-9 || (b1 - PI).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "beta must run from 0 to pi, got beta(0) = {b0}, beta(T) = {b1}"
            )));
        }
        Ok(Self {
            duration,
            beta,
            alpha,
            kappa,
        })
    }

    /// `beta = pi t/T`, `alpha = -(4/3) sin^3 beta`, `kappa = beta - sin(2 beta)/2`.
    pub fn fig3(duration: f64) -> Result<Self> {
        Self::optimized(duration, 1, linear_beta(duration))
    }

    /// Error-insensitive family: `kappa = j [beta - sin(2 beta)/2]`,
    /// `alpha = -(4j/3) sin^3 beta`.
    pub fn optimized(duration: f64, j: i32, beta: ParamFn) -> Result<Self> {
        if j == 0 {
            return Err(Error::InvalidInput("j must be nonzero".into()));
        }
        let jf = f64::from(j);
        let (b1, b2, b3, b4) = (beta.clone(), beta.clone(), beta.clone(), beta.clone());
        let alpha = ParamFn::with_derivative(
            format!("-(4*{j}/3)*sin(beta)^3"),
            move |t| -4.0 * jf / 3.0 * b1.value(t).sin().powi(3),
            move |t| {
                let b = b2.value(t);
                -4.0 * jf * b.sin().powi(2) * b.cos() * b2.rate(t, duration)
            },
        );
        let kappa = ParamFn::with_derivative(
            format!("{j}*(beta - sin(2*beta)/2)"),
            move |t| {
                let b = b3.value(t);
                jf * (b - (2.0 * b).sin() / 2.0)
            },
            move |t| 2.0 * jf * b4.value(t).sin().powi(2) * b4.rate(t, duration),
        );
        Self::new(duration, beta, alpha, kappa)
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn beta(&self) -> &ParamFn {
        &self.beta
    }

    pub fn alpha(&self) -> &ParamFn {
        &self.alpha
    }

    pub fn kappa(&self) -> &ParamFn {
        &self.kappa
    }

    /// `(beta, beta_dot, alpha, alpha_dot, kappa, kappa_dot)` at `t`.
    pub fn eval(&self, t: f64) -> [f64; 6] {
        let d = self.duration;
        [
            self.beta.value(t),
            self.beta.rate(t, d),
            self.alpha.value(t),
            self.alpha.rate(t, d),
            self.kappa.value(t),
            self.kappa.rate(t, d),
        ]
    }

    /// Invariant phase per excitation, `kappa(t)`.
    pub fn lr_phase(&self, t: f64) -> f64 {
        self.kappa.value(t)
    }

    /// `kappa(0) + int_0^t kappa_dot`, the quadrature route to [`lr_phase`](Self::lr_phase).
    pub fn lr_phase_by_quadrature(&self, t: f64) -> Result<f64> {
        let out = quad::integrate(
            |s| C64::from(self.kappa.rate(s, self.duration)),
            0.0,
            t,
            1e-12,
        )?;
        Ok(self.kappa.value(0.0) + out.value.re)
    }

    /// Phase `phi_k` such that the transferred amplitude is `C_k exp(-i phi_k)`.
    ///
    /// `phi_k = k [kappa(T) - kappa(0) - (alpha(0) + alpha(T)) / 2]`; with the
    /// usual `kappa(0) = alpha(0) = alpha(T) = 0` this is `k kappa(T)`.
    pub fn total_phase(&self, k: usize) -> f64 {
        let d = self.duration;
        let kf = k as f64;
        kf * (self.kappa.value(d)
            - self.kappa.value(0.0)
            - 0.5 * (self.alpha.value(0.0) + self.alpha.value(d)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaShape {
    Linear,
    Quadratic,
}

impl ThetaShape {
    pub fn theta(self, t: f64, duration: f64) -> f64 {
        let s = t / duration;
        match self {
            ThetaShape::Linear => FRAC_PI_2 * s,
            ThetaShape::Quadratic => FRAC_PI_2 * s * s,
        }
    }

    pub fn theta_rate(self, t: f64, duration: f64) -> f64 {
        match self {
            ThetaShape::Linear => FRAC_PI_2 / duration,
            ThetaShape::Quadratic => PI * t / (duration * duration),
        }
    }
}

impl fmt::Display for ThetaShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThetaShape::Linear => "linear",
            ThetaShape::Quadratic => "quadratic",
        })
    }
}

#[derive(Clone, Debug)]
enum Kind {
    PiPulse,
    Tqd { shape: ThetaShape, include_cd: bool },
    Lr(LrParams),
    LrOptimized { j: i32, params: LrParams },
    Constant { delta: f64, coupling: C64 },
}

/// A time-parameterized control schedule on `[0, T]`.
#[derive(Clone, Debug)]
pub struct PulseSchedule {
    duration: f64,
    kind: Kind,
}

fn check_duration(duration: f64) -> Result<()> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidInput(format!(
            "duration must be positive, got {duration}"
        )));
    }
    Ok(())
}

impl PulseSchedule {
    /// Flat pulse `g = pi / (2T)`, `Delta = 0`.
    pub fn pi_pulse(duration: f64) -> Result<Self> {
        check_duration(duration)?;
        Ok(Self {
            duration,
            kind: Kind::PiPulse,
        })
    }

    /// `Delta = 2 Omega cos 2theta`, `g = Omega sin 2theta`, `Omega = pi / T`.
    pub fn tqd(duration: f64, shape: ThetaShape, include_cd: bool) -> Result<Self> {
        check_duration(duration)?;
        Ok(Self {
            duration,
            kind: Kind::Tqd { shape, include_cd },
        })
    }

    /// Controls inverted from the invariant parameters.
    pub fn lr(params: LrParams) -> Result<Self> {
        let s = Self {
            duration: params.duration,
            kind: Kind::Lr(params),
        };
        s.check_finite()?;
        Ok(s)
    }

    /// Closed-form controls of the error-optimized family (`Delta = 0` identically).
    pub fn lr_optimized(duration: f64, j: i32, beta: ParamFn) -> Result<Self> {
        let params = LrParams::optimized(duration, j, beta)?;
        let s = Self {
            duration,
            kind: Kind::LrOptimized { j, params },
        };
        s.check_finite()?;
        Ok(s)
    }

    /// Time-independent controls.
    pub fn constant(duration: f64, delta: f64, coupling: C64) -> Result<Self> {
        check_duration(duration)?;
        Ok(Self {
            duration,
            kind: Kind::Constant { delta, coupling },
        })
    }

    fn check_finite(&self) -> Result<()> {
        const PROBES: usize = 1000;
        for i in 0..=PROBES {
            let t = self.duration * i as f64 / PROBES as f64;
            if !self.sample(t).is_finite() {
                return Err(Error::NonFinite(format!("schedule sample at t = {t}")));
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Reference coupling `Omega = pi / T`.
    pub fn omega(&self) -> f64 {
        PI / self.duration
    }

    pub fn tag(&self) -> ProtocolTag {
        match self.kind {
            Kind::PiPulse => ProtocolTag::PiPulse,
            Kind::Tqd { .. } => ProtocolTag::Tqd,
            Kind::Lr(_) => ProtocolTag::Lr,
            Kind::LrOptimized { .. } => ProtocolTag::LrOptimized,
            Kind::Constant { .. } => ProtocolTag::Constant,
        }
    }

    pub fn lr_params(&self) -> Option<&LrParams> {
        match &self.kind {
            Kind::Lr(p) | Kind::LrOptimized { params: p, .. } => Some(p),
            _ => None,
        }
    }

    /// Mixing angle of the TQD path.
    pub fn theta(&self, t: f64) -> Option<f64> {
        match self.kind {
            Kind::Tqd { shape, .. } => Some(shape.theta(t, self.duration)),
            _ => None,
        }
    }

    /// Same schedule with the counterdiabatic term toggled (TQD only).
    pub fn with_cd(&self, include_cd: bool) -> Option<Self> {
        match self.kind {
            Kind::Tqd { shape, .. } => Some(Self {
                duration: self.duration,
                kind: Kind::Tqd { shape, include_cd },
            }),
            _ => None,
        }
    }

    pub fn sample(&self, t: f64) -> ControlSample {
        let duration = self.duration;
        let omega = self.omega();
        match &self.kind {
            Kind::PiPulse => ControlSample {
                t,
                delta: 0.0,
                g_real: PI / (2.0 * duration),
                g_imag: 0.0,
                theta_dot: 0.0,
            },
            Kind::Tqd { shape, include_cd } => {
                let theta = shape.theta(t, duration);
                ControlSample {
                    t,
                    delta: 2.0 * omega * (2.0 * theta).cos(),
                    g_real: omega * (2.0 * theta).sin(),
                    g_imag: 0.0,
                    theta_dot: if *include_cd {
                        shape.theta_rate(t, duration)
                    } else {
                        0.0
                    },
                }
            }
            Kind::Lr(params) => {
                let [beta, beta_dot, alpha, alpha_dot, _, kappa_dot] = params.eval(t);
                let (sb, cb) = beta.sin_cos();
                let (sa, ca) = alpha.sin_cos();
                ControlSample {
                    t,
                    delta: alpha_dot + 2.0 * kappa_dot * cb,
                    g_real: kappa_dot * ca * sb - 0.5 * beta_dot * sa,
                    g_imag: kappa_dot * sa * sb + 0.5 * beta_dot * ca,
                    theta_dot: 0.0,
                }
            }
            Kind::LrOptimized { j, params } => {
                let jf = f64::from(*j);
                let beta = params.beta.value(t);
                let beta_dot = params.beta.rate(t, duration);
                let s3 = beta.sin().powi(3);
                let (sx, cx) = (4.0 * jf / 3.0 * s3).sin_cos();
                ControlSample {
                    t,
                    delta: 0.0,
                    g_real: 2.0 * jf * beta_dot * s3 * cx + 0.5 * beta_dot * sx,
                    g_imag: -2.0 * jf * beta_dot * s3 * sx + 0.5 * beta_dot * cx,
                    theta_dot: 0.0,
                }
            }
            Kind::Constant { delta, coupling } => ControlSample {
                t,
                delta: *delta,
                g_real: coupling.re,
                g_imag: coupling.im,
                theta_dot: 0.0,
            },
        }
    }

    /// `n + 1` evenly spaced samples on `[0, T]`.
    pub fn samples(&self, n: usize) -> Vec<ControlSample> {
        let n = n.max(1);
        (0..=n)
            .map(|i| self.sample(self.duration * i as f64 / n as f64))
            .collect()
    }

    /// Named parameters describing the schedule.
    pub fn metadata(&self) -> BTreeMap<String, String> {
        let mut meta = BTreeMap::new();
        meta.insert("protocol".into(), self.tag().to_string());
        meta.insert("duration".into(), format!("{}", self.duration));
        match &self.kind {
            Kind::Tqd { shape, include_cd } => {
                meta.insert("theta_shape".into(), shape.to_string());
                meta.insert("include_cd".into(), include_cd.to_string());
            }
            Kind::Lr(p) => {
                meta.insert("beta".into(), p.beta.label().into());
                meta.insert("alpha".into(), p.alpha.label().into());
                meta.insert("kappa".into(), p.kappa.label().into());
            }
            Kind::LrOptimized { j, params } => {
                meta.insert("j".into(), j.to_string());
                meta.insert("beta".into(), params.beta.label().into());
                meta.insert("alpha".into(), params.alpha.label().into());
                meta.insert("kappa".into(), params.kappa.label().into());
            }
            Kind::Constant { delta, coupling } => {
                meta.insert("delta".into(), delta.to_string());
                meta.insert("coupling".into(), coupling.to_string());
            }
            Kind::PiPulse => {}
        }
        meta
    }

    /// CSV with columns `t,delta,g_real,g_imag,theta_dot`.
    pub fn write_csv<W: Write>(&self, n: usize, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,delta,g_real,g_imag,theta_dot")?;
        for s in self.samples(n) {
            writeln!(
                out,
                "{},{},{},{},{}",
                crate::fmt_num(s.t),
                crate::fmt_num(s.delta),
                crate::fmt_num(s.g_real),
                crate::fmt_num(s.g_imag),
                crate::fmt_num(s.theta_dot)
            )?;
        }
        Ok(())
    }
}

/// `theta_dot = (g_dot Delta - Delta_dot g) / (Delta^2 + 4 g^2)`.
pub fn theta_dot_from_controls(delta: f64, g: f64, delta_dot: f64, g_dot: f64) -> Result<f64> {
    let denom = delta * delta + 4.0 * g * g;
    if denom == 0.0 {
        return Err(Error::Singular(
            "Delta = g = 0 leaves theta undefined".into(),
        ));
    }
    Ok((g_dot * delta - delta_dot * g) / denom)
}

/// `H_CD = i theta_dot (b^dagger m - m^dagger b)`.
pub fn cd_operator(space: &HilbertSpace, theta_dot: f64) -> OperatorMatrix {
    let m = fock::annihilation_op(space, Mode::M);
    let b = fock::annihilation_op(space, Mode::B);
    let op = b.adjoint().mul(&m).sub(&m.adjoint().mul(&b));
    let entries = op.entries() * C64::new(0.0, theta_dot);
    OperatorMatrix::from_raw(*space, entries, true)
}

/// `i sum_n |d/dt eps_n><eps_n|` over the `total`-excitation eigenstates,
/// returned as the block on that excitation number (ordered by `n_m`).
///
/// The derivatives are taken on the construction itself:
/// `d/dt (A^dag)^p (B^dag)^q |0> = theta_dot [-p (A^dag)^(p-1) (B^dag)^(q+1)
/// + q (A^dag)^(p+1) (B^dag)^(q-1)] |0>`.
pub fn cd_eigenstate_sum(
    space: &HilbertSpace,
    theta: f64,
    theta_dot: f64,
    total: usize,
) -> Result<DMatrix<C64>> {
    if !space.block_complete(total) {
        return Err(Error::OutOfCutoff {
            level: total,
            cutoff: space.n_max_m().min(space.n_max_b()),
        });
    }
    let (s, c) = theta.sin_cos();
    let m_dag = sparse::transpose(&sparse::ladder(space, Mode::M));
    let b_dag = sparse::transpose(&sparse::ladder(space, Mode::B));
    let a_dag = sparse::linear_combination(&[(C64::from(c), &m_dag), (C64::from(s), &b_dag)]);
    let bb_dag = sparse::linear_combination(&[(C64::from(s), &m_dag), (C64::from(-c), &b_dag)]);
    let idx = fock::excitation_indices(space, total);
    let mut out = DMatrix::zeros(idx.len(), idx.len());
    for q in 0..=total {
        let p = total - q;
        let eps = fock::apply_powers(space, &a_dag, p, &bb_dag, q);
        let mut deps = nalgebra::DVector::zeros(space.dim());
        if p > 0 {
            let v = fock::apply_powers(space, &a_dag, p - 1, &bb_dag, q + 1);
            let scale = -(p as f64) * ((q + 1) as f64 / p as f64).sqrt();
            deps += v * C64::from(scale);
        }
        if q > 0 {
            let v = fock::apply_powers(space, &a_dag, p + 1, &bb_dag, q - 1);
            let scale = q as f64 * ((p + 1) as f64 / q as f64).sqrt();
            deps += v * C64::from(scale);
        }
        deps *= C64::new(0.0, theta_dot);
        for (r, &ir) in idx.iter().enumerate() {
            for (cc, &ic) in idx.iter().enumerate() {
                out[(r, cc)] += deps[ir] * eps[ic].conj();
            }
        }
    }
    Ok(out)
}

/// `I = cos(beta)(m^dag m - b^dag b) + sin(beta)(e^{-i alpha} m^dag b + e^{i alpha} m b^dag)`.
pub fn lr_invariant_op(space: &HilbertSpace, beta: f64, alpha: f64) -> OperatorMatrix {
    let m = fock::annihilation_op(space, Mode::M);
    let b = fock::annihilation_op(space, Mode::B);
    let diff = fock::number_op(space, Mode::M).sub(&fock::number_op(space, Mode::B));
    let hop = m.adjoint().mul(&b);
    let entries = diff.entries() * C64::from(beta.cos())
        + (hop.entries() * C64::from_polar(1.0, -alpha)
            + hop.entries().adjoint() * C64::from_polar(1.0, alpha))
            * C64::from(beta.sin());
    OperatorMatrix::from_raw(*space, entries, true)
}
