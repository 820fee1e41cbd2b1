use std::collections::BTreeMap;

use serde::Serialize;

use super::trial::{ClassicTrial, SssTrial};
use crate::protocol_sss::SecurityCase;
use crate::randao::SLOTS_PER_EPOCH;

/// Aggregate statistics of one scenario run.
///
/// Means, `fair_share` and `bias_gain` are taken over epochs that produced a
/// seed; with no such epoch they are reported as 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub trials: u64,
    pub seeded_epochs: u64,
    pub mean_attacker_slots: f64,
    pub fair_share: f64,
    pub bias_gain: f64,
    pub std_error: f64,
    pub recovery_failure_rate: f64,
    pub case_prevented: u64,
    pub case_broken: u64,
    pub case_collusion: u64,
    /// Withheld-slot count -> epochs.
    pub strategy_histogram: BTreeMap<u32, u64>,
    /// Mean number of slots the attacker actually decided over.
    pub mean_decision_slots: f64,
    pub mean_t: f64,
    pub capped_epochs: u64,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Default)]
struct Accumulator {
    trials: u64,
    seeded: u64,
    payoff_sum: u64,
    payoff_sq_sum: u128,
    stake: CompensatedSum,
    decision_slots: u64,
    unrecoverable_slots: u64,
    t_sum: u64,
    capped: u64,
    cases: BTreeMap<SecurityCase, u64>,
    histogram: BTreeMap<u32, u64>,
}

impl Accumulator {
    fn record(&mut self, payoff: Option<u32>, stake_fraction: f64, withheld: u32, decision: usize, capped: bool) {
        self.trials += 1;
        if let Some(p) = payoff {
            self.seeded += 1;
            self.payoff_sum += u64::from(p);
            self.payoff_sq_sum += u128::from(p) * u128::from(p);
            self.stake.add(stake_fraction);
        }
        *self.histogram.entry(withheld).or_default() += 1;
        self.decision_slots += decision as u64;
        self.capped += u64::from(capped);
    }

    fn finish(self) -> MetricsReport {
        let k = self.seeded as f64;
        let (mean, fair, std_error) = if self.seeded == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let mean = self.payoff_sum as f64 / k;
            let fair = SLOTS_PER_EPOCH as f64 * (self.stake.total() / k);
            let std_error = if self.seeded > 1 {
                // Exact integer sums, so no cancellation beyond the final division.
                let n = u128::from(self.seeded);
                let s = u128::from(self.payoff_sum);
                let numerator = n * self.payoff_sq_sum - s * s;
                let variance = numerator as f64 / (k * (k - 1.0));
                (variance / k).sqrt()
            } else {
                0.0
            };
            (mean, fair, std_error)
        };
        let trials = self.trials as f64;
        MetricsReport {
            trials: self.trials,
            seeded_epochs: self.seeded,
            mean_attacker_slots: mean,
            fair_share: fair,
            bias_gain: mean - fair,
            std_error,
            recovery_failure_rate: self.unrecoverable_slots as f64
                / (trials * SLOTS_PER_EPOCH as f64),
            case_prevented: self.cases.get(&SecurityCase::Prevented).copied().unwrap_or(0),
            case_broken: self.cases.get(&SecurityCase::Broken).copied().unwrap_or(0),
            case_collusion: self.cases.get(&SecurityCase::Collusion).copied().unwrap_or(0),
            strategy_histogram: self.histogram,
            mean_decision_slots: self.decision_slots as f64 / trials,
            mean_t: self.t_sum as f64 / trials,
            capped_epochs: self.capped,
        }
    }
}

pub fn summarize_classic(trials: &[ClassicTrial]) -> MetricsReport {
    let mut acc = Accumulator::default();
    for t in trials {
        acc.record(
            Some(t.payoff()),
            t.stake_fraction,
            t.outcome.chosen.withhold_count(),
            t.outcome.decision_slots.len(),
            t.capped,
        );
        acc.t_sum += SLOTS_PER_EPOCH as u64 - u64::from(t.outcome.chosen.withhold_count());
    }
    acc.finish()
}

pub fn summarize_sss(trials: &[SssTrial]) -> MetricsReport {
    let mut acc = Accumulator::default();
    for t in trials {
        acc.record(
            t.payoff,
            t.stake_fraction,
            t.outcome.chosen.withhold_count(),
            t.outcome.decision_slots.len(),
            t.capped,
        );
        acc.unrecoverable_slots += t.unrecoverable as u64;
        acc.t_sum += t.t as u64;
        *acc.cases.entry(t.case).or_default() += 1;
    }
    acc.finish()
}

/// `0:7012;1:2100;2:888` form used in flat outputs.
pub fn histogram_text(h: &BTreeMap<u32, u64>) -> String {
    h.iter()
        .map(|(k, v)| format!("{k}:{v}"))
        .collect::<Vec<_>>()
        .join(";")
}
