//! One Monte Carlo trial: a fresh registry and attacker, one attacked epoch
//! `j`, and the attacker's resulting share of epoch `j + 2`.
//!
//! Both protocols consume the trial stream identically up to and including
//! the epoch-`j` proposer assignment, so classic and Shamir trials with the
//! same index are paired.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::config::{BalanceModel, ScenarioConfig};
use super::HarnessError;
use crate::adversary::{best_strategy_over, tail_decision_slots, AttackOutcome, AttackerProfile};
use crate::protocol_sss::{
    adversary_flip_set, best_flip_strategy_over, classify_security_case, recover_all,
    run_reveal_phase, withheld_origins, Distribution, Rushing, SecurityCase,
};
use crate::randao::{
    compute_reveal, hash, select_proposers, EpochState, Registry, Seed, Validator,
    MAX_EFFECTIVE_BALANCE, SLOTS_PER_EPOCH,
};
use crate::sss::SssConfig;

/// `ChaCha20` keyed by `SHA-256(LE64(rng_seed) || LE64(trial))`.
pub fn trial_rng(rng_seed: u64, trial: u64) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(hash(&[&rng_seed.to_le_bytes(), &trial.to_le_bytes()]))
}

fn draw_balance(model: &BalanceModel, index: usize, rng: &mut ChaCha20Rng) -> u64 {
    match model {
        BalanceModel::Uniform => MAX_EFFECTIVE_BALANCE,
        BalanceModel::Explicit(list) => list[index],
        BalanceModel::Pareto(shape) => {
            // Inverse CDF with u in (0, 1].
            let u = 1.0 - rng.gen::<f64>();
            let x = u.powf(-1.0 / shape);
            let unit = (MAX_EFFECTIVE_BALANCE / 32) as f64;
            ((unit * x) as u64).clamp(1, MAX_EFFECTIVE_BALANCE)
        }
    }
}

/// Everything both protocols share for one trial.
pub struct TrialSetup {
    pub index: u64,
    pub registry: Registry,
    pub attacker: AttackerProfile,
    /// The attacked epoch `j`.
    pub epoch: u64,
    /// Seed that selected epoch `j`'s proposers.
    pub prior_seed: Seed,
    pub proposers: [usize; SLOTS_PER_EPOCH],
    pub rng: ChaCha20Rng,
}

impl TrialSetup {
    pub fn new(cfg: &ScenarioConfig, index: u64) -> Result<Self, HarnessError> {
        let mut rng = trial_rng(cfg.rng_seed, index);
        let validators = (0..cfg.validator_count)
            .map(|i| {
                let secret_key: [u8; 32] = rng.gen();
                let effective_balance = draw_balance(&cfg.balance_model, i, &mut rng);
                Validator {
                    index: i,
                    secret_key,
                    effective_balance,
                }
            })
            .collect();
        let registry = Registry::new(validators)?;
        let attacker = AttackerProfile::greedy(&registry, cfg.attacker_stake_fraction)?;
        let prior_seed = Seed(rng.gen());
        let mut proposers = select_proposers(&prior_seed, &registry)?;
        let controlled: Vec<usize> = attacker.controlled().iter().copied().collect();
        for (k, &slot) in cfg.attacker_slots.iter().enumerate() {
            if !attacker.controls(proposers[slot]) {
                proposers[slot] = *controlled.get(k % controlled.len().max(1)).ok_or_else(|| {
                    HarnessError::Config("attacker_slots needs at least one attacker validator".into())
                })?;
            }
        }
        Ok(Self {
            index,
            registry,
            attacker,
            epoch: index + 2,
            prior_seed,
            proposers,
            rng,
        })
    }

    /// Attacker-held slots in epoch `j`.
    pub fn attacker_slots(&self) -> u32 {
        self.attacker.slot_count(&self.proposers)
    }

    /// Classic epoch with every slot except `held_back` honestly posted.
    pub fn classic_epoch(&self, held_back: &[usize]) -> Result<EpochState, HarnessError> {
        let mut state = EpochState::new(self.epoch, self.proposers);
        for slot in 0..SLOTS_PER_EPOCH {
            if !held_back.contains(&slot) {
                state.post(slot, compute_reveal(&self.registry[self.proposers[slot]], self.epoch))?;
            }
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicTrial {
    pub stake_fraction: f64,
    /// Full attacker tail length.
    pub tail: usize,
    pub outcome: AttackOutcome,
    pub capped: bool,
}

impl ClassicTrial {
    pub fn payoff(&self) -> u32 {
        self.outcome.payoff
    }
}

/// Grinds over the last `strategy_cap` tail slots; earlier tail slots reveal.
pub fn run_classic_trial(cfg: &ScenarioConfig, index: u64) -> Result<ClassicTrial, HarnessError> {
    let setup = TrialSetup::new(cfg, index)?;
    let probe = EpochState::new(setup.epoch, setup.proposers);
    let tail = tail_decision_slots(&probe, &setup.attacker);
    let decision = &tail[tail.len().saturating_sub(cfg.strategy_cap)..];
    let epoch = setup.classic_epoch(decision)?;
    let outcome = best_strategy_over(
        &epoch,
        decision,
        &setup.attacker,
        &setup.registry,
        cfg.strategy_cap,
    )?;
    Ok(ClassicTrial {
        stake_fraction: setup.attacker.stake_fraction(),
        tail: tail.len(),
        capped: decision.len() < tail.len(),
        outcome,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SssTrial {
    pub stake_fraction: f64,
    /// Attacker-held slots in epoch `j`.
    pub h: usize,
    /// Slots whose proposer distributed and joined the reveal phase.
    pub t: usize,
    pub distributed: usize,
    pub flip_set: usize,
    pub outcome: AttackOutcome,
    /// Attacker slots in epoch `j + 2`; `None` if the epoch broke without fallback.
    pub payoff: Option<u32>,
    pub unrecoverable: usize,
    pub broken: bool,
    pub case: SecurityCase,
    pub capped: bool,
}

pub fn run_sss_trial(cfg: &ScenarioConfig, index: u64) -> Result<SssTrial, HarnessError> {
    let TrialSetup {
        registry,
        attacker,
        epoch,
        prior_seed,
        proposers,
        mut rng,
        ..
    } = TrialSetup::new(cfg, index)?;
    let sss_cfg = SssConfig::randao(cfg.sss_threshold_n)
        .map_err(|e| HarnessError::Config(e.to_string()))?;

    let dist = Distribution::run(epoch, proposers, &registry, &[false; SLOTS_PER_EPOCH], &sss_cfg, &mut rng)?;
    let honest_validators: BTreeSet<usize> = proposers
        .iter()
        .copied()
        .filter(|&v| !attacker.controls(v))
        .collect();
    let participants: BTreeSet<usize> = honest_validators
        .into_iter()
        .filter(|_| rng.gen::<f64>() < cfg.participation_rate)
        .collect();

    let mut decision: Option<Result<(AttackOutcome, usize, bool), HarnessError>> = None;
    let mut decide = |state: &_| {
        let flip: Vec<usize> = adversary_flip_set(state, &dist, &attacker, &sss_cfg)
            .into_iter()
            .collect();
        let considered = &flip[..flip.len().min(cfg.strategy_cap)];
        let result = best_flip_strategy_over(
            state,
            &dist,
            considered,
            &attacker,
            &sss_cfg,
            &registry,
            cfg.strategy_cap,
        );
        let withheld = result.as_ref().map(withheld_origins).unwrap_or_default();
        decision = Some(
            result
                .map(|o| (o, flip.len(), considered.len() < flip.len()))
                .map_err(HarnessError::from),
        );
        withheld
    };
    let state = run_reveal_phase(
        &dist,
        &participants,
        Some(Rushing {
            attacker: &attacker,
            decide: &mut decide,
        }),
    );
    let (outcome, flip_set, capped) = decision.expect("adversary consulted")?;

    let fallback = cfg.fallback_reuse_seed.then_some(prior_seed);
    let recovery = recover_all(&state, &sss_cfg, fallback);
    let payoff = match recovery.seed {
        Some(seed) => Some(attacker.slot_count(&select_proposers(&seed, &registry)?)),
        None => None,
    };
    if !recovery.broken {
        debug_assert_eq!(payoff, Some(outcome.payoff));
    }
    let h = attacker.slot_count(&proposers) as usize;
    let t = state.t();
    Ok(SssTrial {
        stake_fraction: attacker.stake_fraction(),
        h,
        t,
        distributed: state.distributed_count(),
        flip_set,
        payoff,
        unrecoverable: recovery.unrecoverable_count(),
        broken: recovery.broken,
        case: classify_security_case(t, h, cfg.sss_threshold_n)?,
        capped,
        outcome,
    })
}
