//! Risk scoring, action selection, and adaptive monitoring intervals.
//!
//! The score is a mean of per-vital deviations from configured normal
//! bands, scaled so a reading exactly on a band edge scores 0.5 and the
//! score saturates at 1. Bands are implementation defaults, not clinical
//! reference ranges.

use crate::events::VitalKind;
use std::collections::BTreeMap;
use std::fmt;

/// Normal band (low, high) for the banded vitals; binary channels have none.
pub fn normal_band(kind: VitalKind) -> Option<(f64, f64)> {
    match kind {
        VitalKind::Glucose => Some((70.0, 180.0)),
        VitalKind::HeartRate => Some((50.0, 100.0)),
        VitalKind::SystolicBp => Some((90.0, 140.0)),
        VitalKind::DiastolicBp => Some((60.0, 90.0)),
        VitalKind::Temperature => Some((36.0, 38.0)),
        VitalKind::Motion | VitalKind::FallSignal => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RiskScoreError {
    /// No banded vital was present in the input.
    NoVitals,
}

impl fmt::Display for RiskScoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskScoreError::NoVitals => write!(f, "risk score needs at least one banded vital"),
        }
    }
}

impl std::error::Error for RiskScoreError {}

/// Mean over present banded vitals of
/// `clamp(|value - band midpoint| / band width, 0, 1)`.
///
/// Band width equals twice the band halfwidth, so a reading on the band
/// edge contributes exactly 0.5. Non-banded kinds (motion, fall signal)
/// are ignored.
pub fn risk_score(latest: &BTreeMap<VitalKind, f64>) -> Result<f64, RiskScoreError> {
    let mut sum = 0.0;
    let mut n = 0u32;
    for (kind, value) in latest {
        let Some((lo, hi)) = normal_band(*kind) else {
            continue;
        };
        let mid = (lo + hi) / 2.0;
        let width = hi - lo;
        let deviation = ((value - mid).abs() / width).clamp(0.0, 1.0);
        sum += deviation;
        n += 1;
    }
    if n == 0 {
        return Err(RiskScoreError::NoVitals);
    }
    Ok(sum / n as f64)
}

/// Escalation ladder, least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CareAction {
    StayHome,
    RequestVerification,
    DispatchProfessional,
    Hospitalize,
}

impl CareAction {
    pub fn token(self) -> &'static str {
        match self {
            CareAction::StayHome => "stay_home",
            CareAction::RequestVerification => "request_verification",
            CareAction::DispatchProfessional => "dispatch_professional",
            CareAction::Hospitalize => "hospitalize",
        }
    }
}

impl fmt::Display for CareAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdOrderError {
    pub verify: f64,
    pub professional: f64,
    pub hospitalize: f64,
}

impl fmt::Display for ThresholdOrderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "risk thresholds must satisfy 0 <= {} < {} < {} <= 1",
            self.verify, self.professional, self.hospitalize
        )
    }
}

impl std::error::Error for ThresholdOrderError {}

/// Strictly increasing cut points on the risk score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskThresholds {
    pub verify: f64,
    pub professional: f64,
    pub hospitalize: f64,
}

impl RiskThresholds {
    pub fn new(verify: f64, professional: f64, hospitalize: f64) -> Result<Self, ThresholdOrderError> {
        if 0.0 <= verify && verify < professional && professional < hospitalize && hospitalize <= 1.0
        {
            Ok(RiskThresholds {
                verify,
                professional,
                hospitalize,
            })
        } else {
            Err(ThresholdOrderError {
                verify,
                professional,
                hospitalize,
            })
        }
    }
}

/// Maps a score to an action over half-open intervals, lower bound
/// inclusive: a score exactly at a threshold takes the more severe action.
pub fn decide_action(score: f64, thresholds: &RiskThresholds) -> CareAction {
    if score < thresholds.verify {
        CareAction::StayHome
    } else if score < thresholds.professional {
        CareAction::RequestVerification
    } else if score < thresholds.hospitalize {
        CareAction::DispatchProfessional
    } else {
        CareAction::Hospitalize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MonitoringError {
    MinimumAboveBase { base_secs: u64, minimum_secs: u64 },
}

impl fmt::Display for MonitoringError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MonitoringError::MinimumAboveBase { base_secs, minimum_secs } => write!(
                f,
                "minimum interval {minimum_secs}s exceeds base interval {base_secs}s"
            ),
        }
    }
}

impl std::error::Error for MonitoringError {}

/// Adaptive check-in cadence: `max(minimum, base * (1 - score))`, rounded
/// to whole seconds. Monotone non-increasing in the score.
pub fn monitoring_interval(
    score: f64,
    base_secs: u64,
    minimum_secs: u64,
) -> Result<u64, MonitoringError> {
    if minimum_secs > base_secs {
        return Err(MonitoringError::MinimumAboveBase {
            base_secs,
            minimum_secs,
        });
    }
    let scaled = (base_secs as f64 * (1.0 - score)).round();
    let scaled = if scaled.is_sign_negative() { 0 } else { scaled as u64 };
    Ok(scaled.max(minimum_secs))
}

/// A complete adaptive-monitoring decision for one patient.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskAssessment {
    pub patient_id: String,
    pub score: f64,
    pub action: CareAction,
    pub monitoring_interval_secs: u64,
}

/// Scores the latest vitals and derives the action and check-in cadence.
pub fn assess(
    patient_id: impl Into<String>,
    latest: &BTreeMap<VitalKind, f64>,
    thresholds: &RiskThresholds,
    base_interval_secs: u64,
    minimum_interval_secs: u64,
) -> Result<RiskAssessment, Box<dyn std::error::Error>> {
    let score = risk_score(latest)?;
    let action = decide_action(score, thresholds);
    let monitoring_interval_secs =
        monitoring_interval(score, base_interval_secs, minimum_interval_secs)?;
    Ok(RiskAssessment {
        patient_id: patient_id.into(),
        score,
        action,
        monitoring_interval_secs,
    })
}
