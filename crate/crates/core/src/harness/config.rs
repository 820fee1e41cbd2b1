use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::adversary::DEFAULT_STRATEGY_CAP;
use crate::randao::{MAX_EFFECTIVE_BALANCE, SLOTS_PER_EPOCH};
use crate::sss::SssConfig;

/// Largest strategy cap a scenario may request.
pub const MAX_STRATEGY_CAP: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Classic,
    Sss,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Classic => "classic",
            Protocol::Sss => "sss",
        })
    }
}

impl FromStr for Protocol {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classic" => Ok(Protocol::Classic),
            "sss" => Ok(Protocol::Sss),
            other => Err(HarnessError::Config(format!(
                "unknown protocol {other:?} (expected classic or sss)"
            ))),
        }
    }
}

/// How validator balances are drawn for each trial. Text form: `uniform`,
/// `pareto(SHAPE)` or `explicit(B0,B1,...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BalanceModel {
    /// Every validator at the maximum effective balance.
    Uniform,
    /// `MAX / 32 * X` with `X ~ Pareto(1, shape)`, clipped to the maximum.
    Pareto(f64),
    Explicit(Vec<u64>),
}

impl fmt::Display for BalanceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BalanceModel::Uniform => f.write_str("uniform"),
            BalanceModel::Pareto(shape) => write!(f, "pareto({shape})"),
            BalanceModel::Explicit(list) => {
                let parts: Vec<String> = list.iter().map(u64::to_string).collect();
                write!(f, "explicit({})", parts.join(","))
            }
        }
    }
}

impl From<BalanceModel> for String {
    fn from(m: BalanceModel) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for BalanceModel {
    type Error = HarnessError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl FromStr for BalanceModel {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HarnessError::Config(format!("unrecognized balance model {s:?}"));
        let s = s.trim();
        if s == "uniform" {
            return Ok(BalanceModel::Uniform);
        }
        let inner = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|rest| rest.strip_prefix('('))
                .and_then(|rest| rest.strip_suffix(')'))
        };
        if let Some(arg) = inner("pareto") {
            let shape: f64 = arg.trim().parse().map_err(|_| bad())?;
            return Ok(BalanceModel::Pareto(shape));
        }
        if let Some(arg) = inner("explicit") {
            let list = arg
                .split(',')
                .map(|b| b.trim().parse::<u64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            return Ok(BalanceModel::Explicit(list));
        }
        Err(bad())
    }
}

/// One simulation scenario. Field order is the column order of every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub validator_count: usize,
    pub balance_model: BalanceModel,
    pub attacker_stake_fraction: f64,
    pub protocol: Protocol,
    pub sss_threshold_n: usize,
    pub participation_rate: f64,
    pub epochs: u64,
    pub rng_seed: u64,
    pub strategy_cap: usize,
    /// Epoch-`j` slots forced onto attacker validators.
    pub attacker_slots: Vec<usize>,
    /// A broken Shamir epoch reuses the seed that selected it.
    pub fallback_reuse_seed: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            validator_count: 200,
            balance_model: BalanceModel::Uniform,
            attacker_stake_fraction: 0.3,
            protocol: Protocol::Classic,
            sss_threshold_n: 16,
            participation_rate: 1.0,
            epochs: 1000,
            rng_seed: 0,
            strategy_cap: DEFAULT_STRATEGY_CAP,
            attacker_slots: Vec::new(),
            fallback_reuse_seed: false,
        }
    }
}

impl ScenarioConfig {
    /// Parameter names in report order; also the legal grid keys.
    pub const FIELDS: [&'static str; 11] = [
        "validator_count",
        "balance_model",
        "attacker_stake_fraction",
        "protocol",
        "sss_threshold_n",
        "participation_rate",
        "epochs",
        "rng_seed",
        "strategy_cap",
        "attacker_slots",
        "fallback_reuse_seed",
    ];

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.validator_count == 0 {
            return fail("validator_count must be at least 1".into());
        }
        for (name, v) in [
            ("attacker_stake_fraction", self.attacker_stake_fraction),
            ("participation_rate", self.participation_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.strategy_cap > MAX_STRATEGY_CAP {
            return fail(format!(
                "strategy_cap = {} exceeds {MAX_STRATEGY_CAP}",
                self.strategy_cap
            ));
        }
        if self.protocol == Protocol::Sss {
            SssConfig::randao(self.sss_threshold_n).map_err(|_| {
                HarnessError::Config(format!(
                    "sss_threshold_n = {} must be in [1, 31]",
                    self.sss_threshold_n
                ))
            })?;
        }
        match &self.balance_model {
            BalanceModel::Uniform => {}
            BalanceModel::Pareto(shape) => {
                if !(shape.is_finite() && *shape > 0.0) {
                    return fail(format!("pareto shape {shape} must be positive"));
                }
            }
            BalanceModel::Explicit(list) => {
                if list.len() != self.validator_count {
                    return fail(format!(
                        "explicit balances list has {} entries for {} validators",
                        list.len(),
                        self.validator_count
                    ));
                }
                if let Some(b) = list.iter().find(|b| **b == 0 || **b > MAX_EFFECTIVE_BALANCE) {
                    return fail(format!(
                        "explicit balance {b} is outside [1, {MAX_EFFECTIVE_BALANCE}]"
                    ));
                }
            }
        }
        if let Some(s) = self.attacker_slots.iter().find(|s| **s >= SLOTS_PER_EPOCH) {
            return fail(format!("attacker slot {s} is outside the epoch"));
        }
        if !self.attacker_slots.is_empty() && self.attacker_stake_fraction == 0.0 {
            return fail("attacker_slots needs a nonzero attacker_stake_fraction".into());
        }
        Ok(())
    }
}

/// A parsed config file: the base scenario plus an optional `[grid]` table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub scenario: ScenarioConfig,
    pub grid: Option<toml::Table>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        let grid = match table.remove("grid") {
            None => None,
            Some(toml::Value::Table(t)) => Some(t),
            Some(_) => return Err(HarnessError::Config("[grid] must be a table".into())),
        };
        let scenario: ScenarioConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        Ok(Self { scenario, grid })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
            .and_then(|file| file.scenario.validate().map(|()| file))
            .map_err(|e| match e {
                HarnessError::Config(msg) => {
                    HarnessError::Config(format!("{}: {msg}", path.display()))
                }
                other => other,
            })
    }
}
