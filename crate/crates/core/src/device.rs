//! Map cavity-magnomechanics device parameters onto the effective two-mode model.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratio above which a regime condition counts as satisfied.
pub const REGIME_THRESHOLD: f64 = 10.0;

/// Physical parameters; frequencies, couplings and rates in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub omega_a: f64,
    pub omega_m: f64,
    pub omega_b: f64,
    pub omega_p: f64,
    pub g_ma: f64,
    pub g_mb: f64,
    pub epsilon_p: C64,
    pub kappa_1: f64,
    pub kappa_2: f64,
    pub kappa_b: f64,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_a", self.omega_a),
            ("omega_m", self.omega_m),
            ("omega_b", self.omega_b),
            ("omega_p", self.omega_p),
            ("g_ma", self.g_ma),
            ("g_mb", self.g_mb),
            ("kappa_1", self.kappa_1),
            ("kappa_2", self.kappa_2),
            ("kappa_b", self.kappa_b),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.epsilon_p.re.is_finite() && self.epsilon_p.im.is_finite()) {
            return Err(Error::InvalidInput("epsilon_p must be finite".into()));
        }
        Ok(())
    }
}

/// Normal modes of the photon-magnon pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hybridization {
    /// Mixing angle in `[0, pi/2]`.
    pub phi: f64,
    /// Detuning of the lower mode m from the drive.
    pub delta_minus: f64,
    /// Detuning of the upper mode a from the drive.
    pub delta_plus: f64,
    pub kappa_a: f64,
    pub kappa_m: f64,
}

/// `tan 2phi = 2 g_ma / (omega_a - omega_m)`, normal-mode detunings and
/// hybrid decay rates `kappa_a = k1 cos^2 + k2 sin^2`, `kappa_m = k1 sin^2 + k2 cos^2`.
pub fn hybridize(p: &DeviceParams) -> Result<Hybridization> {
    if p.g_ma == 0.0 && p.omega_a == p.omega_m {
        return Err(Error::Singular(
            "degenerate uncoupled modes leave phi undefined".into(),
        ));
    }
    let phi = 0.5 * (2.0 * p.g_ma).atan2(p.omega_a - p.omega_m);
    let mean = 0.5 * (p.omega_a + p.omega_m) - p.omega_p;
    let split = (0.25 * (p.omega_a - p.omega_m).powi(2) + p.g_ma * p.g_ma).sqrt();
    let (s2, c2) = (phi.sin().powi(2), phi.cos().powi(2));
    Ok(Hybridization {
        phi,
        delta_minus: mean - split,
        delta_plus: mean + split,
        kappa_a: p.kappa_1 * c2 + p.kappa_2 * s2,
        kappa_m: p.kappa_1 * s2 + p.kappa_2 * c2,
    })
}

/// `m_s = eps sin(phi) / (i Delta + kappa_m)`, `a_s = eps cos(phi) / (i Delta' + kappa_a)`,
/// with the phonon displacement neglected.
pub fn steady_amplitudes(epsilon_p: C64, h: &Hybridization) -> Result<(C64, C64)> {
    let dm = C64::new(h.kappa_m, h.delta_minus);
    let da = C64::new(h.kappa_a, h.delta_plus);
    if dm == C64::new(0.0, 0.0) || da == C64::new(0.0, 0.0) {
        return Err(Error::Singular("zero steady-state denominator".into()));
    }
    Ok((epsilon_p * h.phi.sin() / dm, epsilon_p * h.phi.cos() / da))
}

/// `g = g_mb (m_s cos^2 - a_s sin cos)`, `g' = g_mb (a_s sin^2 - m_s sin cos)`.
pub fn effective_couplings(g_mb: f64, phi: f64, m_s: C64, a_s: C64) -> (C64, C64) {
    let (s, c) = phi.sin_cos();
    (
        (m_s * c * c - a_s * s * c) * g_mb,
        (a_s * s * s - m_s * s * c) * g_mb,
    )
}

/// `Delta - omega_b`.
pub fn effective_detuning(delta_minus: f64, omega_b: f64) -> f64 {
    delta_minus - omega_b
}

/// Everything the two-mode model needs from a device.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModel {
    pub phi: f64,
    pub delta_minus: f64,
    pub delta_plus: f64,
    pub kappa_a: f64,
    pub kappa_m: f64,
    pub m_s: C64,
    pub a_s: C64,
    pub g_eff: C64,
    pub g_prime: C64,
    /// `Delta - omega_b`.
    pub detuning_offset: f64,
}

impl EffectiveModel {
    pub fn from_params(p: &DeviceParams) -> Result<Self> {
        p.validate()?;
        let h = hybridize(p)?;
        let (m_s, a_s) = steady_amplitudes(p.epsilon_p, &h)?;
        let (g_eff, g_prime) = effective_couplings(p.g_mb, h.phi, m_s, a_s);
        Ok(Self {
            phi: h.phi,
            delta_minus: h.delta_minus,
            delta_plus: h.delta_plus,
            kappa_a: h.kappa_a,
            kappa_m: h.kappa_m,
            m_s,
            a_s,
            g_eff,
            g_prime,
            detuning_offset: effective_detuning(h.delta_minus, p.omega_b),
        })
    }
}

/// One dimensionless regime condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub condition: String,
    pub ratio: f64,
    pub pass: bool,
}

impl Diagnostic {
    fn new(name: &str, condition: &str, ratio: f64) -> Self {
        Self {
            name: name.into(),
            condition: condition.into(),
            ratio,
            pass: ratio >= REGIME_THRESHOLD,
        }
    }
}

/// RWA validity `omega_b / |g|`.
pub fn rwa_diagnostic(omega_b: f64, g: C64) -> Diagnostic {
    Diagnostic::new("rwa", "omega_b / |g_eff| >= 10", omega_b / g.norm())
}

/// Strong magnon-photon coupling, weak optomechanical coupling, RWA for the
/// m-b coupling, and the upper normal mode far off resonance from b.
pub fn validate_regime(p: &DeviceParams, model: &EffectiveModel) -> Vec<Diagnostic> {
    vec![
        Diagnostic::new(
            "strong_coupling",
            "g_ma / max(kappa_1, kappa_2) >= 10",
            p.g_ma / p.kappa_1.max(p.kappa_2),
        ),
        Diagnostic::new("weak_g_mb", "omega_b / g_mb >= 10", p.omega_b / p.g_mb),
        rwa_diagnostic(p.omega_b, model.g_eff),
        Diagnostic::new(
            "red_detuned",
            "(Delta' - omega_b) / |g'| >= 10",
            (model.delta_plus - p.omega_b) / model.g_prime.norm(),
        ),
    ]
}
