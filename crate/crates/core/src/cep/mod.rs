//! Incremental rule evaluation over a time-ordered event stream.
//!
//! The engine ingests one event at a time (timestamps must be monotone) and
//! returns the alerts that event produced, in rule order. State is bounded:
//! per (patient, kind) it keeps only readings young enough to matter for the
//! largest window among the loaded rules, plus one pending-first slot per
//! sequence rule per patient and a last-fire clock per rule per patient for
//! refractory suppression.

pub mod risk;

pub use risk::{
    assess, decide_action, monitoring_interval, normal_band, risk_score, CareAction,
    MonitoringError, RiskAssessment, RiskScoreError, RiskThresholds,
};

use crate::events::{HealthEvent, Timestamp, VitalKind};
use crate::rules::{Aggregate, Rule, RuleBody, RuleSet, Severity, TrendDirection};
use std::collections::{HashMap, VecDeque};
use std::fmt;

/// Default per-rule per-patient refractory period, in seconds.
pub const DEFAULT_REFRACTORY_SECS: u64 = 300;

/// One rule firing.
#[derive(Debug, Clone, PartialEq)]
pub struct Alert {
    pub rule_name: String,
    pub patient_id: String,
    pub fire_time: Timestamp,
    pub severity: Severity,
    /// The (timestamp, value) pairs that satisfied the rule.
    pub evidence: Vec<(Timestamp, f64)>,
    /// Trend rules only: first whole second at or after the predicted
    /// crossing of the target.
    pub predicted_crossing_time: Option<Timestamp>,
}

/// CSV encoding: `fire_time,patient_id,rule_name,severity` with a fifth
/// `predicted_crossing_time` field on trend alerts.
pub fn format_alert_line(alert: &Alert) -> String {
    let mut line = format!(
        "{},{},{},{}",
        alert.fire_time, alert.patient_id, alert.rule_name, alert.severity
    );
    if let Some(t) = alert.predicted_crossing_time {
        line.push(',');
        line.push_str(&t.to_string());
    }
    line
}

#[derive(Debug, Clone, PartialEq)]
pub enum IngestError {
    OutOfOrder { last: Timestamp, got: Timestamp },
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestError::OutOfOrder { last, got } => {
                write!(f, "event timestamp {got} precedes already-ingested {last}")
            }
        }
    }
}

impl std::error::Error for IngestError {}

/// Aggregates `values` over the half-open window `(now - window, now]`.
///
/// Returns `None` when nothing qualifies, except `count`, which returns 0.
/// `values` must be time-ordered.
pub fn window_aggregate(
    values: &[(Timestamp, f64)],
    aggregate: Aggregate,
    window_secs: u64,
    now: Timestamp,
) -> Option<f64> {
    let lower = now.checked_sub(window_secs);
    let in_window = values
        .iter()
        .filter(|(ts, _)| *ts <= now && lower.is_none_or(|lo| *ts > lo))
        .map(|(_, v)| *v);
    match aggregate {
        Aggregate::Count => Some(in_window.count() as f64),
        Aggregate::Avg => {
            let (sum, n) = in_window.fold((0.0, 0u64), |(s, n), v| (s + v, n + 1));
            (n > 0).then(|| sum / n as f64)
        }
        Aggregate::Min => in_window.reduce(f64::min),
        Aggregate::Max => in_window.reduce(f64::max),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrendError {
    TooFewPoints { got: usize },
    DegenerateTimestamps,
}

impl fmt::Display for TrendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrendError::TooFewPoints { got } => {
                write!(f, "trend fit needs at least 2 points, got {got}")
            }
            TrendError::DegenerateTimestamps => {
                write!(f, "trend fit needs at least 2 distinct timestamps")
            }
        }
    }
}

impl std::error::Error for TrendError {}

/// Ordinary least-squares line `value = slope * t + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendFit {
    /// Units per second.
    pub slope: f64,
    pub intercept: f64,
}

impl TrendFit {
    pub fn value_at(&self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }

    /// Earliest time `t >= from` at which the fitted line reaches `target`
    /// moving in `direction`, or `None` when the slope does not move toward
    /// the target.
    pub fn crossing(&self, target: f64, direction: TrendDirection, from: Timestamp) -> Option<f64> {
        let from_f = from as f64;
        match direction {
            TrendDirection::FallsBelow => {
                if self.slope >= 0.0 {
                    return None;
                }
                if self.value_at(from_f) <= target {
                    return Some(from_f);
                }
                Some((target - self.intercept) / self.slope)
            }
            TrendDirection::RisesAbove => {
                if self.slope <= 0.0 {
                    return None;
                }
                if self.value_at(from_f) >= target {
                    return Some(from_f);
                }
                Some((target - self.intercept) / self.slope)
            }
        }
    }
}

/// Fits a least-squares line through `points` using centered sums, which
/// stay numerically stable for large timestamp offsets.
pub fn trend_predict(points: &[(Timestamp, f64)]) -> Result<TrendFit, TrendError> {
    if points.len() < 2 {
        return Err(TrendError::TooFewPoints { got: points.len() });
    }
    let first_ts = points[0].0;
    if points.iter().all(|(ts, _)| *ts == first_ts) {
        return Err(TrendError::DegenerateTimestamps);
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|(ts, _)| *ts as f64).sum::<f64>() / n;
    let mean_v = points.iter().map(|(_, v)| *v).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (ts, v) in points {
        let dt = *ts as f64 - mean_t;
        sxx += dt * dt;
        sxy += dt * (*v - mean_v);
    }
    let slope = sxy / sxx;
    Ok(TrendFit {
        slope,
        intercept: mean_v - slope * mean_t,
    })
}

type PatientKey = (String, VitalKind);
type RulePatientKey = (usize, String);
/// Evidence pairs plus the predicted crossing time (trend rules only).
type RuleHit = (Vec<(Timestamp, f64)>, Option<Timestamp>);

/// Bounded evaluation state: recent readings per (patient, kind), one
/// pending-first slot per sequence rule per patient, and last-fire clocks.
#[derive(Debug, Clone, Default)]
struct EngineState {
    refractory_secs: u64,
    max_window_secs: u64,
    last_ts: Option<Timestamp>,
    rings: HashMap<PatientKey, VecDeque<(Timestamp, f64)>>,
    pending_first: HashMap<RulePatientKey, (Timestamp, f64)>,
    last_fire: HashMap<RulePatientKey, Timestamp>,
}

/// Incremental evaluator for one logical stream.
///
/// Single-writer: ingestions mutate state. Distinct engines over distinct
/// streams are independent.
#[derive(Debug, Clone)]
pub struct CepEngine {
    rules: RuleSet,
    state: EngineState,
}

impl CepEngine {
    pub fn new(rules: RuleSet) -> Self {
        Self::with_refractory(rules, DEFAULT_REFRACTORY_SECS)
    }

    /// `refractory_secs = 0` restores per-event firing.
    pub fn with_refractory(rules: RuleSet, refractory_secs: u64) -> Self {
        let max_window_secs = rules.max_window_secs();
        CepEngine {
            rules,
            state: EngineState {
                refractory_secs,
                max_window_secs,
                ..EngineState::default()
            },
        }
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    /// Feeds one event through every rule; returns the alerts it produced,
    /// in rule order. Rejects regressions in time without changing state.
    pub fn ingest(&mut self, event: &HealthEvent) -> Result<Vec<Alert>, IngestError> {
        let now = event.timestamp;
        if let Some(last) = self.state.last_ts {
            if now < last {
                return Err(IngestError::OutOfOrder { last, got: now });
            }
        }
        self.state.last_ts = Some(now);

        if self.state.max_window_secs > 0 {
            // Global eviction first: nothing older than the largest window
            // survives an ingestion, for any patient or kind.
            if let Some(cutoff) = now.checked_sub(self.state.max_window_secs) {
                for ring in self.state.rings.values_mut() {
                    while ring.front().is_some_and(|(ts, _)| *ts < cutoff) {
                        ring.pop_front();
                    }
                }
            }
            self.state
                .rings
                .entry((event.patient_id.clone(), event.kind))
                .or_default()
                .push_back((now, event.value));
        }

        let mut alerts = Vec::new();
        for (idx, rule) in self.rules.iter().enumerate() {
            if let Some((evidence, predicted)) = self.state.evaluate_rule(idx, rule, event) {
                let key = (idx, event.patient_id.clone());
                let suppressed = self.state.last_fire.get(&key).is_some_and(|last| {
                    now < last.saturating_add(self.state.refractory_secs)
                });
                if !suppressed {
                    self.state.last_fire.insert(key, now);
                    alerts.push(Alert {
                        rule_name: rule.name.clone(),
                        patient_id: event.patient_id.clone(),
                        fire_time: now,
                        severity: rule.severity,
                        evidence,
                        predicted_crossing_time: predicted,
                    });
                }
            }
        }
        Ok(alerts)
    }

    /// Test hook: true when some stored pair is older than `now - max window`.
    #[doc(hidden)]
    pub fn has_stale_state(&self, now: Timestamp) -> bool {
        let Some(cutoff) = now.checked_sub(self.state.max_window_secs) else {
            return false;
        };
        self.state
            .rings
            .values()
            .any(|ring| ring.iter().any(|(ts, _)| *ts < cutoff))
    }
}

impl EngineState {
    /// Returns evidence (and predicted crossing, for trend rules) when the
    /// rule condition becomes satisfied at this event. Sequence state
    /// transitions happen here, before refractory suppression is applied.
    fn evaluate_rule(
        &mut self,
        idx: usize,
        rule: &Rule,
        event: &HealthEvent,
    ) -> Option<RuleHit> {
        let now = event.timestamp;
        match &rule.body {
            RuleBody::Threshold(cond) => cond
                .matches(event.kind, event.value)
                .then(|| (vec![(now, event.value)], None)),
            RuleBody::Window {
                aggregate,
                kind,
                window_secs,
                comparator,
                bound,
            } => {
                if event.kind != *kind {
                    return None;
                }
                let window = self.window_pairs(&event.patient_id, *kind, *window_secs, now);
                let value = window_aggregate(&window, *aggregate, *window_secs, now)?;
                comparator.eval(value, *bound).then_some((window, None))
            }
            RuleBody::Trend {
                kind,
                window_secs,
                direction,
                target,
                horizon_secs,
            } => {
                if event.kind != *kind {
                    return None;
                }
                let window = self.window_pairs(&event.patient_id, *kind, *window_secs, now);
                let fit = trend_predict(&window).ok()?;
                let crossing = fit.crossing(*target, *direction, now)?;
                if crossing - now as f64 <= *horizon_secs as f64 {
                    Some((window, Some(crossing.ceil() as Timestamp)))
                } else {
                    None
                }
            }
            RuleBody::Sequence {
                first,
                then,
                within_secs,
            } => {
                if event.kind != first.kind && event.kind != then.kind {
                    return None;
                }
                let key = (idx, event.patient_id.clone());
                if self
                    .pending_first
                    .get(&key)
                    .is_some_and(|(ts, _)| now - ts > *within_secs)
                {
                    self.pending_first.remove(&key);
                }
                if then.matches(event.kind, event.value) {
                    if let Some(pending) = self.pending_first.remove(&key) {
                        return Some((vec![pending, (now, event.value)], None));
                    }
                }
                if first.matches(event.kind, event.value) && !self.pending_first.contains_key(&key)
                {
                    self.pending_first.insert(key, (now, event.value));
                }
                None
            }
        }
    }

    /// Pairs for `(patient, kind)` inside `(now - window, now]`, oldest first.
    fn window_pairs(
        &self,
        patient_id: &str,
        kind: VitalKind,
        window_secs: u64,
        now: Timestamp,
    ) -> Vec<(Timestamp, f64)> {
        let lower = now.checked_sub(window_secs);
        match self.rings.get(&(patient_id.to_string(), kind)) {
            Some(ring) => ring
                .iter()
                .filter(|(ts, _)| *ts <= now && lower.is_none_or(|lo| *ts > lo))
                .copied()
                .collect(),
            None => Vec::new(),
        }
    }
}
