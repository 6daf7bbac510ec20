//! Flat `key = value` scenario configuration with dotted sections.
//!
//! The accepted keys are documented in `docs/config_schema.md`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::analysis::{ErrorAxis, InitialState};
use crate::device::DeviceParams;
use crate::dynamics::{self, Frame};
use crate::error::{Error, Result};
use crate::protocols::ThetaShape;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Custom,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::Fig2,
        Scenario::Fig3,
        Scenario::Fig4,
        Scenario::Fig5,
        Scenario::Fig6,
        Scenario::Fig7,
        Scenario::Fig8,
        Scenario::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig2 => "fig2",
            Scenario::Fig3 => "fig3",
            Scenario::Fig4 => "fig4",
            Scenario::Fig5 => "fig5",
            Scenario::Fig6 => "fig6",
            Scenario::Fig7 => "fig7",
            Scenario::Fig8 => "fig8",
            Scenario::Custom => "custom",
        }
    }

    /// One-line description for `--help` and summaries.
    pub fn describe(self) -> &'static str {
        match self {
            Scenario::Fig2 => "TQD transfer with and without the counterdiabatic term",
            Scenario::Fig3 => "invariant-based transfer with the error-optimized parameters",
            Scenario::Fig4 => "TQD population versus gamma or eta, linear and quadratic theta",
            Scenario::Fig5 => "TQD population over the (gamma, eta) plane",
            Scenario::Fig6 => "pi pulse, TQD and optimized invariant protocol versus gamma",
            Scenario::Fig7 => "TQD and invariant protocol with thermal baths",
            Scenario::Fig8 => "all protocols with counter-rotating terms",
            Scenario::Custom => "single user-defined run",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown scenario '{s}', expected one of {}",
                    Scenario::ALL.map(Scenario::name).join(", ")
                )
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolKind {
    PiPulse,
    Tqd,
    Lr,
    LrOptimized,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::PiPulse => "pi_pulse",
            ProtocolKind::Tqd => "tqd",
            ProtocolKind::Lr => "lr",
            ProtocolKind::LrOptimized => "lr_optimized",
        }
    }
}

impl FromStr for ProtocolKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pi_pulse" => Ok(ProtocolKind::PiPulse),
            "tqd" => Ok(ProtocolKind::Tqd),
            "lr" => Ok(ProtocolKind::Lr),
            "lr_optimized" => Ok(ProtocolKind::LrOptimized),
            _ => Err(format!(
                "unknown protocol '{s}', expected pi_pulse, tqd, lr or lr_optimized"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BetaShape {
    /// `beta = pi t / T`
    Linear,
    /// `beta = pi (t/T - sin(2 pi t/T) / (2 pi))`, with vanishing end rates.
    Smooth,
}

impl BetaShape {
    pub fn name(self) -> &'static str {
        match self {
            BetaShape::Linear => "linear",
            BetaShape::Smooth => "smooth",
        }
    }
}

impl FromStr for BetaShape {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(BetaShape::Linear),
            "smooth" => Ok(BetaShape::Smooth),
            _ => Err(format!(
                "unknown beta shape '{s}', expected linear or smooth"
            )),
        }
    }
}

/// Schedule parameters shared by every protocol of a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    pub duration: f64,
    pub theta_shape: ThetaShape,
    pub include_cd: bool,
    pub j: i32,
    pub beta_shape: BetaShape,
    /// `alpha = -(4 a / 3) sin^3 beta` for the generic invariant protocol.
    pub alpha_amp: f64,
    /// `kappa = k (beta - sin(2 beta) / 2)` for the generic invariant protocol.
    pub kappa_amp: f64,
}

/// Thermal baths in laboratory units.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladConfig {
    pub temperatures: Vec<f64>,
    /// Energy decay rates in 1/s.
    pub kappa_m: f64,
    pub kappa_b: f64,
    /// Mode and unit frequencies in Hz (multiplied by 2 pi internally).
    pub omega_m_hz: f64,
    pub omega_b_hz: f64,
    pub omega_unit_hz: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    pub axis: ErrorAxis,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub resolution: usize,
}

/// Fully resolved scenario description.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub protocol: ProtocolConfig,
    pub initial: InitialState,
    pub gamma: f64,
    pub eta: f64,
    /// Whether `gamma` also scales the counterdiabatic coupling.
    pub scale_cd: bool,
    pub frame: Frame,
    /// `omega_b / Omega` values of the counter-rotating study.
    pub cr_ratios: Vec<f64>,
    pub lindblad: Option<LindbladConfig>,
    pub scan: Option<ScanConfig>,
    pub sweep: Option<SweepConfig>,
    /// Fock cutoff for both modes; `None` picks it from the initial state.
    pub cutoff: Option<usize>,
    pub steps: usize,
    pub refine: bool,
    pub schedule_samples: usize,
    pub output: PathBuf,
    pub device: Option<DeviceParams>,
}

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    value: String,
}

/// Parsed `key = value` pairs with their source lines.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.split('.').all(|part| {
            !part.is_empty()
                && part
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        })
}

impl RawConfig {
    /// Blank lines and `#` comments are skipped; keys may repeat only across layers.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Config {
                    line,
                    message: format!("expected 'key = value', got '{content}'"),
                });
            };
            let key = key.trim();
            if !valid_key(key) {
                return Err(Error::Config {
                    line,
                    message: format!("malformed key '{key}'"),
                });
            }
            let value = value.trim().to_string();
            if let Some(prev) = entries.insert(key.to_string(), Entry { line, value }) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key '{key}' (first set on line {})", prev.line),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Entries of `other` replace those of `self`.
    pub fn overlay(mut self, other: RawConfig) -> Self {
        self.entries.extend(other.entries);
        self
    }

    /// Sets `key` from a `key=value` override, recorded as line 0.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(Error::Config {
                line: 0,
                message: format!("override '{assignment}' is not key=value"),
            });
        };
        let key = key.trim();
        if !valid_key(key) {
            return Err(Error::Config {
                line: 0,
                message: format!("malformed key '{key}'"),
            });
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                line: 0,
                value: value.trim().to_string(),
            },
        );
        Ok(())
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.entries.keys().any(|k| k.starts_with(prefix))
    }
}

/// Consumes typed values from a [`RawConfig`], remembering which keys were read.
struct Reader {
    raw: RawConfig,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.raw.entries.remove(key)
    }

    fn parse<T, F>(&mut self, key: &str, default: T, f: F) -> Result<T>
    where
        F: Fn(&str) -> std::result::Result<T, String>,
    {
        match self.take(key) {
            None => Ok(default),
            Some(e) => f(&e.value).map_err(|m| Error::Config {
                line: e.line,
                message: format!("{key}: {m}"),
            }),
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        self.parse(key, default, parse_f64)
    }

    fn finite(
        &mut self,
        key: &str,
        default: f64,
        check: fn(f64) -> bool,
        what: &str,
    ) -> Result<f64> {
        let line = self.raw.entries.get(key).map(|e| e.line);
        let v = self.f64(key, default)?;
        if !check(v) {
            return Err(Error::Config {
                line: line.unwrap_or(0),
                message: format!("{key} must be {what}, got {v}"),
            });
        }
        Ok(v)
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        self.parse(key, default, |s| {
            s.parse::<usize>()
                .map_err(|_| format!("expected a non-negative integer, got '{s}'"))
        })
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        self.parse(key, default, |s| match s {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("expected true or false, got '{s}'")),
        })
    }

    fn list(&mut self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        self.parse(key, default, |s| {
            s.split(',').map(|x| parse_f64(x.trim())).collect()
        })
    }
}

/// Accepts plain floats and `pi`, `k*pi`, `pi/k` forms.
fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let bad = || format!("expected a number, got '{s}'");
    if let Some(rest) = s.strip_suffix("*pi") {
        return rest
            .trim()
            .parse::<f64>()
            .map(|v| v * PI)
            .map_err(|_| bad());
    }
    if let Some(rest) = s.strip_prefix("pi/") {
        return rest
            .trim()
            .parse::<f64>()
            .map(|v| PI / v)
            .map_err(|_| bad());
    }
    if s == "pi" {
        return Ok(PI);
    }
    let v = s.parse::<f64>().map_err(|_| bad())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Parses `fock <k>` or `cat <zeta>`.
pub fn parse_initial(s: &str) -> std::result::Result<InitialState, String> {
    let mut parts = s.split_whitespace();
    let kind = parts.next().unwrap_or("");
    let arg = parts.next();
    if parts.next().is_some() {
        return Err(format!("expected 'fock <k>' or 'cat <zeta>', got '{s}'"));
    }
    match (kind, arg) {
        ("fock", Some(k)) => k
            .parse::<usize>()
            .map(|k| InitialState::Fock { k })
            .map_err(|_| format!("fock level must be a non-negative integer, got '{k}'")),
        ("cat", Some(z)) => {
            let zeta = parse_f64(z)?;
            if zeta < 0.0 {
                return Err(format!("cat amplitude must be >= 0, got {zeta}"));
            }
            Ok(InitialState::Cat { zeta })
        }
        _ => Err(format!("expected 'fock <k>' or 'cat <zeta>', got '{s}'")),
    }
}

fn parse_theta_shape(s: &str) -> std::result::Result<ThetaShape, String> {
    match s {
        "linear" => Ok(ThetaShape::Linear),
        "quadratic" => Ok(ThetaShape::Quadratic),
        _ => Err(format!(
            "unknown theta shape '{s}', expected linear or quadratic"
        )),
    }
}

fn parse_axis(s: &str) -> std::result::Result<ErrorAxis, String> {
    match s {
        "gamma" => Ok(ErrorAxis::Gamma),
        "eta" => Ok(ErrorAxis::Eta),
        _ => Err(format!("unknown axis '{s}', expected gamma or eta")),
    }
}

/// Preset defaults as config text.
pub fn preset_text(scenario: Scenario) -> &'static str {
    match scenario {
        Scenario::Fig2 => "scenario = fig2\nprotocol.kind = tqd\ninitial = fock 1\n",
        Scenario::Fig3 => "scenario = fig3\nprotocol.kind = lr\ninitial = cat 1\n",
        Scenario::Fig4 => {
            "scenario = fig4\nprotocol.kind = tqd\ninitial = fock 1\n\
             scan.axis = gamma\nscan.min = -0.2\nscan.max = 0.2\nscan.points = 41\n"
        }
        Scenario::Fig5 => {
            "scenario = fig5\nprotocol.kind = tqd\ninitial = cat 1\n\
             sweep.gamma_min = -0.2\nsweep.gamma_max = 0.2\n\
             sweep.eta_min = -0.2\nsweep.eta_max = 0.2\nsweep.resolution = 41\n"
        }
        Scenario::Fig6 => {
            "scenario = fig6\nprotocol.kind = lr_optimized\ninitial = fock 1\n\
             scan.axis = gamma\nscan.min = -0.3\nscan.max = 0.3\nscan.points = 61\n"
        }
        Scenario::Fig7 => {
            "scenario = fig7\nprotocol.kind = tqd\ninitial = cat 1\n\
             lindblad.temperatures = 0, 0.01, 0.1, 1\n"
        }
        Scenario::Fig8 => {
            "scenario = fig8\nprotocol.kind = tqd\ninitial = fock 1\n\
             frame = counter_rotating\nframe.omega_b_over_omega = 10\n\
             cr.ratios = 10, 4\n"
        }
        Scenario::Custom => "scenario = custom\n",
    }
}

const REQUIRED: [&str; 3] = ["scenario", "protocol.kind", "initial"];

impl ScenarioConfig {
    /// Parses config text; presets named by `scenario` only seed defaults for
    /// keys the text leaves out.
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_raw(RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let missing: Vec<&str> = REQUIRED
            .into_iter()
            .filter(|k| !raw.entries.contains_key(*k))
            .collect();
        let scenario_entry = raw.entries.get("scenario").cloned();
        let raw = match &scenario_entry {
            Some(e) => {
                let sc = Scenario::from_str(&e.value).map_err(|m| Error::Config {
                    line: e.line,
                    message: format!("scenario: {m}"),
                })?;
                let base = RawConfig::parse(preset_text(sc)).expect("preset text parses");
                base.overlay(raw)
            }
            None => raw,
        };
        let still_missing: Vec<&str> = missing
            .into_iter()
            .filter(|k| !raw.entries.contains_key(*k))
            .collect();
        if !still_missing.is_empty() {
            return Err(Error::ConfigMissing(format!(
                "missing required field(s): {}",
                still_missing.join(", ")
            )));
        }
        Self::read(raw)
    }

    fn read(raw: RawConfig) -> Result<Self> {
        let has_lindblad = raw.has_prefix("lindblad.");
        let has_scan = raw.has_prefix("scan.");
        let has_sweep = raw.has_prefix("sweep.");
        let has_device = raw.has_prefix("device.");
        let mut r = Reader { raw };

        let scenario = r.parse("scenario", Scenario::Custom, Scenario::from_str)?;
        let kind = r.parse("protocol.kind", ProtocolKind::Tqd, ProtocolKind::from_str)?;
        let protocol = ProtocolConfig {
            kind,
            duration: r.finite("protocol.duration", PI, |v| v > 0.0, "> 0")?,
            theta_shape: r.parse(
                "protocol.theta_shape",
                ThetaShape::Linear,
                parse_theta_shape,
            )?,
            include_cd: r.bool("protocol.include_cd", true)?,
            j: r.parse("protocol.j", 1, |s| match s.parse::<i32>() {
                Ok(0) | Err(_) => Err(format!("expected a nonzero integer, got '{s}'")),
                Ok(j) => Ok(j),
            })?,
            beta_shape: r.parse(
                "protocol.beta_shape",
                BetaShape::Linear,
                BetaShape::from_str,
            )?,
            alpha_amp: r.f64("protocol.alpha_amp", 1.0)?,
            kappa_amp: r.f64("protocol.kappa_amp", 1.0)?,
        };
        let initial = r.parse("initial", InitialState::Fock { k: 1 }, parse_initial)?;
        let gamma = r.f64("errors.gamma", 0.0)?;
        let eta = r.f64("errors.eta", 0.0)?;
        let scale_cd = r.bool("errors.scale_cd", true)?;

        let frame_line = r.raw.entries.get("frame").map(|e| e.line).unwrap_or(0);
        let frame_kind = r.parse("frame", "rwa".to_string(), |s| match s {
            "rwa" | "counter_rotating" => Ok(s.to_string()),
            _ => Err(format!(
                "unknown frame '{s}', expected rwa or counter_rotating"
            )),
        })?;
        let ratio = r.finite("frame.omega_b_over_omega", 10.0, |v| v > 0.0, "> 0")?;
        let frame = if frame_kind == "rwa" {
            Frame::Rwa
        } else {
            Frame::CounterRotating {
                omega_b_over_omega: ratio,
            }
        };
        let cr_line = r
            .raw
            .entries
            .get("cr.ratios")
            .map(|e| e.line)
            .unwrap_or(frame_line);
        let cr_ratios = r.list("cr.ratios", vec![ratio])?;
        if cr_ratios.iter().any(|v| *v <= 0.0) {
            return Err(Error::Config {
                line: cr_line,
                message: "cr.ratios must all be > 0".into(),
            });
        }

        let lindblad = if has_lindblad {
            let t_line = r
                .raw
                .entries
                .get("lindblad.temperatures")
                .map(|e| e.line)
                .unwrap_or(0);
            let temperatures = r.list("lindblad.temperatures", vec![0.1])?;
            if temperatures.is_empty() || temperatures.iter().any(|t| *t < 0.0) {
                return Err(Error::Config {
                    line: t_line,
                    message: "lindblad.temperatures must be >= 0 K".into(),
                });
            }
            Some(LindbladConfig {
                temperatures,
                kappa_m: r.finite("lindblad.kappa_m", 1e4, |v| v >= 0.0, ">= 0")?,
                kappa_b: r.finite("lindblad.kappa_b", 100.0, |v| v >= 0.0, ">= 0")?,
                omega_m_hz: r.finite("lindblad.omega_m_hz", 10e9, |v| v > 0.0, "> 0")?,
                omega_b_hz: r.finite("lindblad.omega_b_hz", 10e6, |v| v > 0.0, "> 0")?,
                omega_unit_hz: r.finite("lindblad.omega_unit_hz", 1e6, |v| v > 0.0, "> 0")?,
                steps: r.usize("lindblad.steps", 400)?,
            })
        } else {
            None
        };

        let scan = if has_scan {
            Some(ScanConfig {
                axis: r.parse("scan.axis", ErrorAxis::Gamma, parse_axis)?,
                min: r.f64("scan.min", -0.2)?,
                max: r.f64("scan.max", 0.2)?,
                points: r.usize("scan.points", 41)?,
            })
        } else {
            None
        };
        let sweep = if has_sweep {
            Some(SweepConfig {
                gamma_min: r.f64("sweep.gamma_min", -0.2)?,
                gamma_max: r.f64("sweep.gamma_max", 0.2)?,
                eta_min: r.f64("sweep.eta_min", -0.2)?,
                eta_max: r.f64("sweep.eta_max", 0.2)?,
                resolution: r.usize("sweep.resolution", 41)?,
            })
        } else {
            None
        };

        let cutoff = r.parse("cutoff", None, |s| match s {
            "auto" => Ok(None),
            _ => s
                .parse::<usize>()
                .map(Some)
                .map_err(|_| format!("expected 'auto' or an integer, got '{s}'")),
        })?;
        let steps_line = r.raw.entries.get("steps").map(|e| e.line).unwrap_or(0);
        let steps = r.usize("steps", dynamics::DEFAULT_STEPS)?;
        if steps < 100 {
            return Err(Error::Config {
                line: steps_line,
                message: format!("steps must be at least 100, got {steps}"),
            });
        }
        let refine = r.bool("steps.refine", true)?;
        let schedule_samples = r.usize("schedule.samples", 200)?;
        let output = PathBuf::from(r.parse("output", "out".to_string(), |s| Ok(s.to_string()))?);

        let device = if has_device {
            let two_pi = 2.0 * PI;
            let pos = |r: &mut Reader, key: &str| {
                if !r.raw.entries.contains_key(key) {
                    return Err(Error::ConfigMissing(format!("device section needs {key}")));
                }
                r.finite(key, f64::NAN, |v| v > 0.0, "> 0")
            };
            Some(DeviceParams {
                omega_a: two_pi * pos(&mut r, "device.omega_a_hz")?,
                omega_m: two_pi * pos(&mut r, "device.omega_m_hz")?,
                omega_b: two_pi * pos(&mut r, "device.omega_b_hz")?,
                omega_p: two_pi * pos(&mut r, "device.omega_p_hz")?,
                g_ma: two_pi * pos(&mut r, "device.g_ma_hz")?,
                g_mb: two_pi * pos(&mut r, "device.g_mb_hz")?,
                epsilon_p: C64::new(
                    two_pi * r.f64("device.epsilon_p_re_hz", 0.0)?,
                    two_pi * r.f64("device.epsilon_p_im_hz", 0.0)?,
                ),
                kappa_1: two_pi * pos(&mut r, "device.kappa_1_hz")?,
                kappa_2: two_pi * pos(&mut r, "device.kappa_2_hz")?,
                kappa_b: two_pi * pos(&mut r, "device.kappa_b_hz")?,
            })
        } else {
            None
        };

        if let Some((key, e)) = r.raw.entries.iter().next() {
            return Err(Error::Config {
                line: e.line,
                message: format!("unknown key '{key}'"),
            });
        }
        let cfg = Self {
            scenario,
            protocol,
            initial,
            gamma,
            eta,
            scale_cd,
            frame,
            cr_ratios,
            lindblad,
            scan,
            sweep,
            cutoff,
            steps,
            refine,
            schedule_samples,
            output,
            device,
        };
        cfg.check_ranges()?;
        Ok(cfg)
    }

    fn check_ranges(&self) -> Result<()> {
        let fail = |m: String| Err(Error::ConfigMissing(m));
        if let Some(s) = &self.scan {
            if s.points < 2 || s.min >= s.max {
                return fail(format!(
                    "scan needs points >= 2 and min < max, got {} points on [{}, {}]",
                    s.points, s.min, s.max
                ));
            }
        }
        if let Some(s) = &self.sweep {
            if s.resolution < 3 || s.gamma_min > s.gamma_max || s.eta_min > s.eta_max {
                return fail("sweep needs resolution >= 3 and ordered ranges".into());
            }
        }
        if let Some(l) = &self.lindblad {
            if l.steps < 100 {
                return fail(format!(
                    "lindblad.steps must be at least 100, got {}",
                    l.steps
                ));
            }
        }
        if self.schedule_samples == 0 {
            return fail("schedule.samples must be positive".into());
        }
        Ok(())
    }

    /// Canonical text listing every effective value; parsing it back yields `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.protocol;
        let _ = writeln!(s, "scenario = {}", self.scenario.name());
        let _ = writeln!(s, "protocol.kind = {}", p.kind.name());
        let _ = writeln!(s, "protocol.duration = {:?}", p.duration);
        let _ = writeln!(s, "protocol.theta_shape = {}", p.theta_shape);
        let _ = writeln!(s, "protocol.include_cd = {}", p.include_cd);
        let _ = writeln!(s, "protocol.j = {}", p.j);
        let _ = writeln!(s, "protocol.beta_shape = {}", p.beta_shape.name());
        let _ = writeln!(s, "protocol.alpha_amp = {:?}", p.alpha_amp);
        let _ = writeln!(s, "protocol.kappa_amp = {:?}", p.kappa_amp);
        let _ = match self.initial {
            InitialState::Fock { k } => writeln!(s, "initial = fock {k}"),
            InitialState::Cat { zeta } => writeln!(s, "initial = cat {zeta:?}"),
        };
        let _ = writeln!(s, "errors.gamma = {:?}", self.gamma);
        let _ = writeln!(s, "errors.eta = {:?}", self.eta);
        let _ = writeln!(s, "errors.scale_cd = {}", self.scale_cd);
        match self.frame {
            Frame::Rwa => {
                let _ = writeln!(s, "frame = rwa");
            }
            Frame::CounterRotating { omega_b_over_omega } => {
                let _ = writeln!(s, "frame = counter_rotating");
                let _ = writeln!(s, "frame.omega_b_over_omega = {omega_b_over_omega:?}");
            }
        }
        let _ = writeln!(s, "cr.ratios = {}", join(&self.cr_ratios));
        if let Some(l) = &self.lindblad {
            let _ = writeln!(s, "lindblad.temperatures = {}", join(&l.temperatures));
            let _ = writeln!(s, "lindblad.kappa_m = {:?}", l.kappa_m);
            let _ = writeln!(s, "lindblad.kappa_b = {:?}", l.kappa_b);
            let _ = writeln!(s, "lindblad.omega_m_hz = {:?}", l.omega_m_hz);
            let _ = writeln!(s, "lindblad.omega_b_hz = {:?}", l.omega_b_hz);
            let _ = writeln!(s, "lindblad.omega_unit_hz = {:?}", l.omega_unit_hz);
            let _ = writeln!(s, "lindblad.steps = {}", l.steps);
        }
        if let Some(c) = &self.scan {
            let _ = writeln!(s, "scan.axis = {}", c.axis);
            let _ = writeln!(s, "scan.min = {:?}", c.min);
            let _ = writeln!(s, "scan.max = {:?}", c.max);
            let _ = writeln!(s, "scan.points = {}", c.points);
        }
        if let Some(w) = &self.sweep {
            let _ = writeln!(s, "sweep.gamma_min = {:?}", w.gamma_min);
            let _ = writeln!(s, "sweep.gamma_max = {:?}", w.gamma_max);
            let _ = writeln!(s, "sweep.eta_min = {:?}", w.eta_min);
            let _ = writeln!(s, "sweep.eta_max = {:?}", w.eta_max);
            let _ = writeln!(s, "sweep.resolution = {}", w.resolution);
        }
        match self.cutoff {
            None => {
                let _ = writeln!(s, "cutoff = auto");
            }
            Some(n) => {
                let _ = writeln!(s, "cutoff = {n}");
            }
        }
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "steps.refine = {}", self.refine);
        let _ = writeln!(s, "schedule.samples = {}", self.schedule_samples);
        let _ = writeln!(s, "output = {}", self.output.display());
        if let Some(d) = &self.device {
            let hz = |v: f64| v / (2.0 * PI);
            let _ = writeln!(s, "device.omega_a_hz = {:?}", hz(d.omega_a));
            let _ = writeln!(s, "device.omega_m_hz = {:?}", hz(d.omega_m));
            let _ = writeln!(s, "device.omega_b_hz = {:?}", hz(d.omega_b));
            let _ = writeln!(s, "device.omega_p_hz = {:?}", hz(d.omega_p));
            let _ = writeln!(s, "device.g_ma_hz = {:?}", hz(d.g_ma));
            let _ = writeln!(s, "device.g_mb_hz = {:?}", hz(d.g_mb));
            let _ = writeln!(s, "device.epsilon_p_re_hz = {:?}", hz(d.epsilon_p.re));
            let _ = writeln!(s, "device.epsilon_p_im_hz = {:?}", hz(d.epsilon_p.im));
            let _ = writeln!(s, "device.kappa_1_hz = {:?}", hz(d.kappa_1));
            let _ = writeln!(s, "device.kappa_2_hz = {:?}", hz(d.kappa_2));
            let _ = writeln!(s, "device.kappa_b_hz = {:?}", hz(d.kappa_b));
        }
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Parses and validates config text.
pub fn validate_config(text: &str) -> Result<ScenarioConfig> {
    ScenarioConfig::from_text(text)
}
