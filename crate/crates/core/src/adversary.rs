//! Last-revealer attacker: which slots it decides, the `2^h` withhold masks,
//! and the grind for the mask that maximizes its proposer slots two epochs on.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::randao::{
    compute_reveal, derive_seed, select_proposers, EpochState, RandaoError, Registry, Reveal,
    SLOTS_PER_EPOCH,
};

pub const DEFAULT_STRATEGY_CAP: usize = 20;
/// Masks are `u64`; anything near this is computationally absurd anyway.
pub const MAX_STRATEGY_BITS: usize = 40;

/// Below this many strategies the grind stays on the calling thread.
const PARALLEL_GRIND_MIN: u64 = 1 << 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error("{h} decision slots exceed the strategy cap of {cap}")]
    TooManyStrategies { h: usize, cap: usize },
    #[error("validator {0} is not in the registry")]
    UnknownValidator(usize),
    #[error("stake fraction {0} is outside [0, 1]")]
    BadStakeFraction(f64),
    #[error(transparent)]
    Randao(#[from] RandaoError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackerProfile {
    controlled: BTreeSet<usize>,
    stake_fraction: f64,
}

impl AttackerProfile {
    pub fn new(controlled: BTreeSet<usize>, registry: &Registry) -> Result<Self, AdversaryError> {
        if let Some(&bad) = controlled.iter().find(|&&i| i >= registry.len()) {
            return Err(AdversaryError::UnknownValidator(bad));
        }
        let held: u128 = controlled
            .iter()
            .map(|&i| u128::from(registry[i].effective_balance))
            .sum();
        let stake_fraction = held as f64 / registry.total_balance() as f64;
        Ok(Self {
            controlled,
            stake_fraction,
        })
    }

    /// Marks validators in index order until their combined balance reaches
    /// `target` of the total. The realized fraction may overshoot.
    pub fn greedy(registry: &Registry, target: f64) -> Result<Self, AdversaryError> {
        if !(0.0..=1.0).contains(&target) {
            return Err(AdversaryError::BadStakeFraction(target));
        }
        let goal = target * registry.total_balance() as f64;
        let mut held = 0u128;
        let mut controlled = BTreeSet::new();
        for v in registry.validators() {
            // Relative slack so 0.3 * total is not missed by one ulp.
            if held as f64 >= goal * (1.0 - 1e-12) {
                break;
            }
            held += u128::from(v.effective_balance);
            controlled.insert(v.index);
        }
        Self::new(controlled, registry)
    }

    pub fn controls(&self, validator: usize) -> bool {
        self.controlled.contains(&validator)
    }

    pub fn controlled(&self) -> &BTreeSet<usize> {
        &self.controlled
    }

    pub fn stake_fraction(&self) -> f64 {
        self.stake_fraction
    }

    pub fn slot_count(&self, proposers: &[usize; SLOTS_PER_EPOCH]) -> u32 {
        proposers.iter().filter(|&&p| self.controls(p)).count() as u32
    }
}

/// Bit `i` set means the `i`-th decision slot (ascending) is withheld.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Strategy {
    mask: u64,
    len: usize,
}

impl Strategy {
    pub fn new(mask: u64, len: usize) -> Self {
        assert!(len <= MAX_STRATEGY_BITS, "strategy too long");
        assert!(len == 64 || mask >> len == 0, "mask wider than strategy");
        Self { mask, len }
    }

    pub fn honest(len: usize) -> Self {
        Self::new(0, len)
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn withholds(&self, i: usize) -> bool {
        i < self.len && self.mask >> i & 1 == 1
    }

    pub fn withhold_count(&self) -> u32 {
        self.mask.count_ones()
    }

    /// Renders slot 0 of the decision list first, `1` = withhold.
    pub fn bits(&self) -> String {
        (0..self.len)
            .map(|i| if self.withholds(i) { '1' } else { '0' })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttackOutcome {
    /// Slots (or origin slots, under Shamir RANDAO) the mask bits refer to.
    pub decision_slots: Vec<usize>,
    pub chosen: Strategy,
    pub payoff: u32,
    pub honest_payoff: u32,
}

/// Longest run of attacker-held slots ending at the last slot, in ascending order.
pub fn tail_decision_slots(epoch: &EpochState, attacker: &AttackerProfile) -> Vec<usize> {
    let mut slots: Vec<usize> = (0..SLOTS_PER_EPOCH)
        .rev()
        .take_while(|&s| attacker.controls(epoch.proposer(s)))
        .collect();
    slots.reverse();
    slots
}

pub fn enumerate_strategies(h: usize, cap: usize) -> Result<Vec<Strategy>, AdversaryError> {
    check_cap(h, cap)?;
    Ok((0..1u64 << h).map(|mask| Strategy::new(mask, h)).collect())
}

fn check_cap(h: usize, cap: usize) -> Result<(), AdversaryError> {
    if h > cap || h > MAX_STRATEGY_BITS {
        return Err(AdversaryError::TooManyStrategies { h, cap });
    }
    Ok(())
}

/// Attacker slots in epoch `epoch + 2` if the final mix is `mix`.
pub fn payoff_for_mix(
    mix: &Reveal,
    epoch: u64,
    attacker: &AttackerProfile,
    registry: &Registry,
) -> Result<u32, RandaoError> {
    let proposers = select_proposers(&derive_seed(mix, epoch), registry)?;
    Ok(attacker.slot_count(&proposers))
}

/// Exhausts every mask over `options`. `base` is the mix of everything the
/// attacker cannot influence; option `i` contributes `options[i]` unless its
/// bit is set. Ties go to the numerically smallest mask, so the result does
/// not depend on how the search is scheduled.
pub fn grind(
    base: &Reveal,
    options: &[Reveal],
    epoch: u64,
    attacker: &AttackerProfile,
    registry: &Registry,
    cap: usize,
) -> Result<(Strategy, u32, u32), AdversaryError> {
    let h = options.len();
    check_cap(h, cap)?;
    let full = options.iter().fold(*base, |acc, r| acc.xor(r));
    let evaluate = |mask: u64| -> Result<(u32, Reverse<u64>), RandaoError> {
        let mix = options
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .fold(full, |acc, (_, r)| acc.xor(r));
        Ok((payoff_for_mix(&mix, epoch, attacker, registry)?, Reverse(mask)))
    };

    let count = 1u64 << h;
    let best = if count >= PARALLEL_GRIND_MIN {
        (0..count)
            .into_par_iter()
            .map(evaluate)
            .try_reduce_with(|a, b| Ok(a.max(b)))
            .expect("at least one strategy")?
    } else {
        (0..count)
            .map(evaluate)
            .try_fold(None, |best: Option<(u32, Reverse<u64>)>, item| {
                item.map(|item| Some(best.map_or(item, |b| b.max(item))))
            })?
            .expect("at least one strategy")
    };
    let honest = evaluate(0)?.0;
    let (payoff, Reverse(mask)) = best;
    Ok((Strategy::new(mask, h), payoff, honest))
}

/// Payoff of one mask over `decision_slots`. Non-decision slots contribute
/// whatever `epoch` has posted; decision slots contribute the attacker's own
/// reveal unless withheld.
pub fn evaluate_strategy(
    epoch: &EpochState,
    decision_slots: &[usize],
    strategy: &Strategy,
    attacker: &AttackerProfile,
    registry: &Registry,
) -> Result<u32, AdversaryError> {
    let (base, options) = split_mix(epoch, decision_slots, registry);
    let mix = options
        .iter()
        .enumerate()
        .filter(|(i, _)| !strategy.withholds(*i))
        .fold(base, |acc, (_, r)| acc.xor(r));
    Ok(payoff_for_mix(&mix, epoch.epoch(), attacker, registry)?)
}

fn split_mix(
    epoch: &EpochState,
    decision_slots: &[usize],
    registry: &Registry,
) -> (Reveal, Vec<Reveal>) {
    let base = epoch
        .posted()
        .iter()
        .enumerate()
        .filter(|(s, _)| !decision_slots.contains(s))
        .filter_map(|(_, r)| r.as_ref())
        .fold(Reveal::ZERO, |acc, r| acc.xor(r));
    let options = decision_slots
        .iter()
        .map(|&s| compute_reveal(&registry[epoch.proposer(s)], epoch.epoch()))
        .collect();
    (base, options)
}

/// Best withhold mask over an explicit list of decision slots.
pub fn best_strategy_over(
    epoch: &EpochState,
    decision_slots: &[usize],
    attacker: &AttackerProfile,
    registry: &Registry,
    cap: usize,
) -> Result<AttackOutcome, AdversaryError> {
    let (base, options) = split_mix(epoch, decision_slots, registry);
    let (chosen, payoff, honest_payoff) =
        grind(&base, &options, epoch.epoch(), attacker, registry, cap)?;
    Ok(AttackOutcome {
        decision_slots: decision_slots.to_vec(),
        chosen,
        payoff,
        honest_payoff,
    })
}

pub fn best_strategy(
    epoch: &EpochState,
    attacker: &AttackerProfile,
    registry: &Registry,
    cap: usize,
) -> Result<AttackOutcome, AdversaryError> {
    let slots = tail_decision_slots(epoch, attacker);
    best_strategy_over(epoch, &slots, attacker, registry, cap)
}
