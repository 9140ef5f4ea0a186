//! The textual rule language for alert rules.
//!
//! Grammar (whitespace-insensitive between tokens, `#` comments to end of
//! line):
//!
//! ```text
//! ruleset   := { rule } ;
//! rule      := "rule" IDENT ":" "when" body "severity" SEV ;
//! body      := threshold | window | trend | sequence ;
//! threshold := KIND CMP NUMBER ;
//! window    := AGG "(" KIND "," DUR ")" CMP NUMBER ;
//! trend     := "trend" "(" KIND "," DUR ")" DIR NUMBER "within" DUR ;
//! sequence  := threshold "then" threshold "within" DUR ;
//! AGG := "avg" | "min" | "max" | "count" ;
//! DIR := "falls_below" | "rises_above" ;
//! CMP := "<" | "<=" | ">" | ">=" ;
//! DUR := NUMBER ("s" | "m" | "h") ;
//! SEV := "info" | "warning" | "high" | "critical" ;
//! ```
//!
//! Durations normalize to whole seconds internally; the canonical formatter
//! prints the largest unit that divides the value exactly, so
//! `parse(format(r))` is structurally `r` and `format` is a fixed point.

mod parser;

pub use parser::{parse_rules, RuleParseError, RuleParseErrorKind};

use crate::events::VitalKind;
use crate::numfmt::format_decimal;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub fn token(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    pub fn eval(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregate {
    Avg,
    Min,
    Max,
    Count,
}

impl Aggregate {
    pub fn token(self) -> &'static str {
        match self {
            Aggregate::Avg => "avg",
            Aggregate::Min => "min",
            Aggregate::Max => "max",
            Aggregate::Count => "count",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "avg" => Some(Aggregate::Avg),
            "min" => Some(Aggregate::Min),
            "max" => Some(Aggregate::Max),
            "count" => Some(Aggregate::Count),
            _ => None,
        }
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrendDirection {
    FallsBelow,
    RisesAbove,
}

impl TrendDirection {
    pub fn token(self) -> &'static str {
        match self {
            TrendDirection::FallsBelow => "falls_below",
            TrendDirection::RisesAbove => "rises_above",
        }
    }
}

impl fmt::Display for TrendDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Alert severity, ordered least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Info,
    Warning,
    High,
    Critical,
}

impl Severity {
    pub fn token(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::High => "high",
            Severity::Critical => "critical",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "info" => Some(Severity::Info),
            "warning" => Some(Severity::Warning),
            "high" => Some(Severity::High),
            "critical" => Some(Severity::Critical),
            _ => None,
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One `KIND CMP NUMBER` clause.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub kind: VitalKind,
    pub comparator: Comparator,
    pub bound: f64,
}

impl Condition {
    pub fn new(kind: VitalKind, comparator: Comparator, bound: f64) -> Self {
        Condition { kind, comparator, bound }
    }

    pub fn matches(&self, kind: VitalKind, value: f64) -> bool {
        kind == self.kind && self.comparator.eval(value, self.bound)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.kind,
            self.comparator,
            format_decimal(self.bound)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleBody {
    /// Fires when a single reading satisfies the condition.
    Threshold(Condition),
    /// Fires when an aggregate over the trailing window satisfies the
    /// comparison. Windows are half-open: `(now - window, now]`.
    Window {
        aggregate: Aggregate,
        kind: VitalKind,
        window_secs: u64,
        comparator: Comparator,
        bound: f64,
    },
    /// Fires when the least-squares line over the trailing window is
    /// predicted to cross `target` within `horizon_secs`.
    Trend {
        kind: VitalKind,
        window_secs: u64,
        direction: TrendDirection,
        target: f64,
        horizon_secs: u64,
    },
    /// Fires when `then` is satisfied no later than `within_secs` after an
    /// occurrence of `first`.
    Sequence {
        first: Condition,
        then: Condition,
        within_secs: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub name: String,
    pub body: RuleBody,
    pub severity: Severity,
}

/// An ordered collection of rules with pairwise-distinct names.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuplicateRuleName(pub String);

impl fmt::Display for DuplicateRuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "duplicate rule name {:?}", self.0)
    }
}

impl std::error::Error for DuplicateRuleName {}

impl RuleSet {
    pub fn new(rules: Vec<Rule>) -> Result<Self, DuplicateRuleName> {
        for (i, rule) in rules.iter().enumerate() {
            if rules[..i].iter().any(|r| r.name == rule.name) {
                return Err(DuplicateRuleName(rule.name.clone()));
            }
        }
        Ok(RuleSet { rules })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rule> {
        self.rules.iter()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Largest window any rule looks back over; bounds engine state.
    pub fn max_window_secs(&self) -> u64 {
        self.rules
            .iter()
            .map(|r| match &r.body {
                RuleBody::Threshold(_) => 0,
                RuleBody::Window { window_secs, .. } => *window_secs,
                RuleBody::Trend { window_secs, .. } => *window_secs,
                RuleBody::Sequence { .. } => 0,
            })
            .max()
            .unwrap_or(0)
    }

    /// Canonical text: one rule per line, LF endings.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&format_rule(rule));
            out.push('\n');
        }
        out
    }
}

impl IntoIterator for RuleSet {
    type Item = Rule;
    type IntoIter = std::vec::IntoIter<Rule>;

    fn into_iter(self) -> Self::IntoIter {
        self.rules.into_iter()
    }
}

/// Prints a duration using the largest unit that divides it exactly.
pub fn format_duration(secs: u64) -> String {
    if secs > 0 && secs.is_multiple_of(3600) {
        format!("{}h", secs / 3600)
    } else if secs > 0 && secs.is_multiple_of(60) {
        format!("{}m", secs / 60)
    } else {
        format!("{secs}s")
    }
}

/// Canonical single-line form; `parse_rules(format_rule(r))` yields `r`.
pub fn format_rule(rule: &Rule) -> String {
    let body = match &rule.body {
        RuleBody::Threshold(c) => c.to_string(),
        RuleBody::Window {
            aggregate,
            kind,
            window_secs,
            comparator,
            bound,
        } => format!(
            "{aggregate}({kind}, {}) {comparator} {}",
            format_duration(*window_secs),
            format_decimal(*bound)
        ),
        RuleBody::Trend {
            kind,
            window_secs,
            direction,
            target,
            horizon_secs,
        } => format!(
            "trend({kind}, {}) {direction} {} within {}",
            format_duration(*window_secs),
            format_decimal(*target),
            format_duration(*horizon_secs)
        ),
        RuleBody::Sequence {
            first,
            then,
            within_secs,
        } => format!("{first} then {then} within {}", format_duration(*within_secs)),
    };
    format!("rule {}: when {body} severity {}", rule.name, rule.severity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duration_uses_largest_exact_unit() {
        assert_eq!(format_duration(600), "10m");
        assert_eq!(format_duration(3600), "1h");
        assert_eq!(format_duration(90), "90s");
        assert_eq!(format_duration(0), "0s");
        assert_eq!(format_duration(7200), "2h");
        assert_eq!(format_duration(5400), "90m");
    }

    #[test]
    fn threshold_formats_canonically() {
        let rule = Rule {
            name: "hypo".into(),
            body: RuleBody::Threshold(Condition::new(VitalKind::Glucose, Comparator::Lt, 70.0)),
            severity: Severity::High,
        };
        assert_eq!(format_rule(&rule), "rule hypo: when glucose < 70 severity high");
    }

    #[test]
    fn window_formats_canonically() {
        let rule = Rule {
            name: "r".into(),
            body: RuleBody::Window {
                aggregate: Aggregate::Avg,
                kind: VitalKind::Glucose,
                window_secs: 600,
                comparator: Comparator::Lt,
                bound: 70.0,
            },
            severity: Severity::High,
        };
        assert_eq!(format_rule(&rule), "rule r: when avg(glucose, 10m) < 70 severity high");
    }

    #[test]
    fn ruleset_rejects_duplicate_names() {
        let rule = Rule {
            name: "hypo".into(),
            body: RuleBody::Threshold(Condition::new(VitalKind::Glucose, Comparator::Lt, 70.0)),
            severity: Severity::High,
        };
        let err = RuleSet::new(vec![rule.clone(), rule]).unwrap_err();
        assert_eq!(err.0, "hypo");
    }

    pub(crate) fn arb_rule(name: String) -> impl Strategy<Value = Rule> {
        let kind = (0usize..7).prop_map(|i| VitalKind::ALL[i]);
        let cmp = prop_oneof![
            Just(Comparator::Lt),
            Just(Comparator::Le),
            Just(Comparator::Gt),
            Just(Comparator::Ge)
        ];
        let agg = prop_oneof![
            Just(Aggregate::Avg),
            Just(Aggregate::Min),
            Just(Aggregate::Max),
            Just(Aggregate::Count)
        ];
        let dir = prop_oneof![Just(TrendDirection::FallsBelow), Just(TrendDirection::RisesAbove)];
        let sev = prop_oneof![
            Just(Severity::Info),
            Just(Severity::Warning),
            Just(Severity::High),
            Just(Severity::Critical)
        ];
        // Bounds on a 0.001 grid so the six-decimal codec is lossless.
        let bound = (-200_000i64..1_000_000).prop_map(|n| n as f64 / 1000.0);
        let dur = 1u64..1_000_000;

        let threshold = (kind.clone(), cmp.clone(), bound.clone())
            .prop_map(|(k, c, b)| RuleBody::Threshold(Condition::new(k, c, b)));
        let window = (agg, kind.clone(), dur.clone(), cmp.clone(), bound.clone()).prop_map(
            |(aggregate, kind, window_secs, comparator, bound)| RuleBody::Window {
                aggregate,
                kind,
                window_secs,
                comparator,
                bound,
            },
        );
        let trend = (kind.clone(), dur.clone(), dir, bound.clone(), dur.clone()).prop_map(
            |(kind, window_secs, direction, target, horizon_secs)| RuleBody::Trend {
                kind,
                window_secs,
                direction,
                target,
                horizon_secs,
            },
        );
        let sequence = (
            (kind.clone(), cmp.clone(), bound.clone()),
            (kind, cmp, bound),
            dur,
        )
            .prop_map(|((k1, c1, b1), (k2, c2, b2), within_secs)| RuleBody::Sequence {
                first: Condition::new(k1, c1, b1),
                then: Condition::new(k2, c2, b2),
                within_secs,
            });

        (prop_oneof![threshold, window, trend, sequence], sev)
            .prop_map(move |(body, severity)| Rule {
                name: name.clone(),
                body,
                severity,
            })
    }

    proptest! {
        /// parse . format is the identity on rule structure.
        #[test]
        fn parse_format_roundtrip(rule in "[a-z][a-z0-9_]{0,10}".prop_flat_map(arb_rule)) {
            let text = format_rule(&rule);
            let parsed = parse_rules(&text).unwrap();
            prop_assert_eq!(parsed.rules(), std::slice::from_ref(&rule));
        }

        /// format . parse is idempotent on text.
        #[test]
        fn format_parse_idempotent(rule in "[a-z][a-z0-9_]{0,10}".prop_flat_map(arb_rule)) {
            let once = format_rule(&rule);
            let reparsed = parse_rules(&once).unwrap();
            let twice = format_rule(&reparsed.rules()[0]);
            prop_assert_eq!(once, twice);
        }
    }
}
