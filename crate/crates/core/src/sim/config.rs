//! Scenario configuration: defaults, validation, and the `key = value`
//! config-file format.

use crate::cep::risk::RiskThresholds;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Traditional,
    Soc,
}

impl Mode {
    pub fn token(self) -> &'static str {
        match self {
            Mode::Traditional => "traditional",
            Mode::Soc => "soc",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "traditional" => Some(Mode::Traditional),
            "soc" => Some(Mode::Soc),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Everything a run depends on. One tick is one minute.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub width: f64,
    pub height: f64,
    pub n_patients: usize,
    pub n_professionals: usize,
    pub n_verifiers: usize,
    pub ticks: u64,
    /// Per patient per tick probability of a new true condition.
    pub p_incident: f64,
    /// Per patient per tick probability of a spurious sensor alarm.
    pub p_false_alarm: f64,
    /// Probability that a new true condition raises a sensor alarm.
    pub sensor_sensitivity: f64,
    /// Ticks before an untreated true condition expires.
    pub t_expire: u64,
    pub c_verifier: f64,
    pub c_professional: f64,
    pub c_hospital: f64,
    pub professional_speed: f64,
    pub verifier_speed: f64,
    pub patient_speed: f64,
    /// Patrol discovery radius around an idle verifier.
    pub r_discover: f64,
    /// Per-tick probability an idle verifier discovers a nearby
    /// undetected condition. Zero disables patrolling entirely.
    pub p_discover: f64,
    pub t_verify: f64,
    pub t_pro: f64,
    pub t_hosp: f64,
    pub mode: Mode,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            width: 100.0,
            height: 100.0,
            n_patients: 100,
            n_professionals: 5,
            n_verifiers: 10,
            ticks: 4320,
            p_incident: 0.0005,
            p_false_alarm: 0.002,
            sensor_sensitivity: 0.85,
            t_expire: 240,
            c_verifier: 1.0,
            c_professional: 10.0,
            c_hospital: 50.0,
            professional_speed: 2.0,
            verifier_speed: 2.0,
            patient_speed: 1.0,
            r_discover: 5.0,
            p_discover: 0.3,
            t_verify: 0.3,
            t_pro: 0.6,
            t_hosp: 0.85,
            mode: Mode::Traditional,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

fn check(ok: bool, field: &'static str, reason: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError {
            field,
            reason: reason.into(),
        })
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let prob = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        let cost = |v: f64| v.is_finite() && v >= 0.0;

        check(pos(self.width), "width", "must be positive")?;
        check(pos(self.height), "height", "must be positive")?;
        check(prob(self.p_incident), "p_incident", "must be in [0, 1]")?;
        check(prob(self.p_false_alarm), "p_false_alarm", "must be in [0, 1]")?;
        check(
            prob(self.sensor_sensitivity),
            "sensor_sensitivity",
            "must be in [0, 1]",
        )?;
        check(prob(self.p_discover), "p_discover", "must be in [0, 1]")?;
        check(self.t_expire > 0, "t_expire", "must be positive")?;
        check(cost(self.c_verifier), "c_verifier", "must be non-negative")?;
        check(cost(self.c_professional), "c_professional", "must be non-negative")?;
        check(cost(self.c_hospital), "c_hospital", "must be non-negative")?;
        check(
            pos(self.professional_speed),
            "professional_speed",
            "must be positive",
        )?;
        check(pos(self.verifier_speed), "verifier_speed", "must be positive")?;
        check(pos(self.patient_speed), "patient_speed", "must be positive")?;
        check(
            self.r_discover.is_finite() && self.r_discover >= 0.0,
            "r_discover",
            "must be non-negative",
        )?;
        self.risk_thresholds().map(|_| ())
    }

    pub fn risk_thresholds(&self) -> Result<RiskThresholds, ConfigError> {
        RiskThresholds::new(self.t_verify, self.t_pro, self.t_hosp).map_err(|e| ConfigError {
            field: "t_verify",
            reason: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigParseError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            write!(f, "line {}: key `{}`: {}", self.line, self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigParseError {}

/// Parses `key = value` lines over the defaults. Keys are the
/// [`ScenarioConfig`] field names; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigParseError> {
    let mut cfg = ScenarioConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigParseError {
                line: lineno,
                key: String::new(),
                message: format!("expected `key = value`, got {line:?}"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        apply_key(&mut cfg, key, value).map_err(|message| ConfigParseError {
            line: lineno,
            key: key.to_string(),
            message,
        })?;
    }
    Ok(cfg)
}

fn apply_key(cfg: &mut ScenarioConfig, key: &str, value: &str) -> Result<(), String> {
    fn num<T: std::str::FromStr>(value: &str, what: &str) -> Result<T, String> {
        value
            .parse()
            .map_err(|_| format!("expected {what}, got {value:?}"))
    }

    match key {
        "width" => cfg.width = num(value, "a number")?,
        "height" => cfg.height = num(value, "a number")?,
        "n_patients" => cfg.n_patients = num(value, "a count")?,
        "n_professionals" => cfg.n_professionals = num(value, "a count")?,
        "n_verifiers" => cfg.n_verifiers = num(value, "a count")?,
        "ticks" => cfg.ticks = num(value, "a count")?,
        "p_incident" => cfg.p_incident = num(value, "a probability")?,
        "p_false_alarm" => cfg.p_false_alarm = num(value, "a probability")?,
        "sensor_sensitivity" => cfg.sensor_sensitivity = num(value, "a probability")?,
        "t_expire" => cfg.t_expire = num(value, "a tick count")?,
        "c_verifier" => cfg.c_verifier = num(value, "a cost")?,
        "c_professional" => cfg.c_professional = num(value, "a cost")?,
        "c_hospital" => cfg.c_hospital = num(value, "a cost")?,
        "professional_speed" => cfg.professional_speed = num(value, "a speed")?,
        "verifier_speed" => cfg.verifier_speed = num(value, "a speed")?,
        "patient_speed" => cfg.patient_speed = num(value, "a speed")?,
        "r_discover" => cfg.r_discover = num(value, "a distance")?,
        "p_discover" => cfg.p_discover = num(value, "a probability")?,
        "t_verify" => cfg.t_verify = num(value, "a threshold")?,
        "t_pro" => cfg.t_pro = num(value, "a threshold")?,
        "t_hosp" => cfg.t_hosp = num(value, "a threshold")?,
        "mode" => {
            cfg.mode = Mode::from_token(value)
                .ok_or_else(|| format!("expected `traditional` or `soc`, got {value:?}"))?
        }
        "seed" => cfg.seed = num(value, "an integer seed")?,
        _ => return Err("unknown key".to_string()),
    }
    Ok(())
}
