//! Run metrics and their CSV encoding.

use super::config::Mode;
use crate::numfmt::format_decimal;

/// Everything a finished run reports.
///
/// `total_social_cost` is always the sum of `per_intervention_costs`, and
/// `true_positives + false_negatives` equals the number of true conditions
/// that terminated (treated or expired). Incidents still open when the run
/// ends are counted in `pending_cases` only.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub mode: Mode,
    pub seed: u64,
    /// Cost of each incident that accrued any, in incident order.
    pub per_intervention_costs: Vec<f64>,
    pub total_social_cost: f64,
    /// True conditions treated.
    pub treated_cases: u64,
    /// True conditions that expired untreated.
    pub expired_cases: u64,
    /// Responder arrivals at false alarms.
    pub false_dispatches: u64,
    /// Mean alarm-to-treatment time over treated true conditions, in ticks.
    pub mean_servicing_time: f64,
    pub total_servicing_time: u64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    /// `tp / (tp + fn)`; 0 when no true condition terminated.
    pub effective_sensitivity: f64,
    pub professional_utilization: f64,
    pub verifier_utilization: f64,
    /// Incidents not yet terminated when the run ended.
    pub pending_cases: u64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "mode,seed,total_social_cost,treated_cases,\
expired_cases,false_dispatches,mean_servicing_time,tp,fp,fn,effective_sensitivity,\
professional_utilization,verifier_utilization";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mode,
            self.seed,
            format_decimal(self.total_social_cost),
            self.treated_cases,
            self.expired_cases,
            self.false_dispatches,
            format_decimal(self.mean_servicing_time),
            self.true_positives,
            self.false_positives,
            self.false_negatives,
            format_decimal(self.effective_sensitivity),
            format_decimal(self.professional_utilization),
            format_decimal(self.verifier_utilization),
        )
    }

    /// The numeric CSV columns in header order, for summary statistics.
    pub fn numeric_columns(&self) -> [f64; 11] {
        [
            self.total_social_cost,
            self.treated_cases as f64,
            self.expired_cases as f64,
            self.false_dispatches as f64,
            self.mean_servicing_time,
            self.true_positives as f64,
            self.false_positives as f64,
            self.false_negatives as f64,
            self.effective_sensitivity,
            self.professional_utilization,
            self.verifier_utilization,
        ]
    }
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for n < 2).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
