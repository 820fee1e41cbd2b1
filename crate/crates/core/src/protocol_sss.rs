//! RANDAO with Shamir-shared reveals.
//!
//! During the epoch every present proposer splits its reveal into 31 shares,
//! one sealed to the proposer of each other slot. Nothing is opened until the
//! epoch ends; then participants broadcast the shares sealed to them, any
//! reveal with at least `n` broadcast shares is reconstructed, and the rest
//! count as absent exactly as in classic RANDAO. The reveal phase for epoch
//! `j` runs during epoch `j + 1`, so the recovered seed still selects epoch
//! `j + 2`.
//!
//! Sealing is modeled as access control: [`ShareEnvelope::open`] only yields
//! the point to the validator it is sealed to.
//!
//! The adversary is rushing: it sees every honest broadcast before choosing
//! which of its own shares to publish. Its only lever is the set of origin
//! slots whose recoverability hinges on its shares (the flip set).

use std::collections::BTreeSet;

use rand::RngCore;
use serde::Serialize;
use thiserror::Error;

use crate::adversary::{grind, AdversaryError, AttackOutcome, AttackerProfile};
use crate::field::{Field, SharePoint};
use crate::randao::{
    compute_reveal, derive_seed, mix_reveals, Registry, Reveal, Seed, SLOTS_PER_EPOCH,
};
use crate::sss::{self, encode_share, Secret, SssConfig, SssError};

/// origin slot, recipient slot, then the 34-byte share.
pub const ENVELOPE_WIRE_LEN: usize = 36;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("shares per reveal must be {expected}, configuration says {actual}")]
    ShareCountMismatch { expected: usize, actual: usize },
    #[error("slot {0} is outside the epoch")]
    SlotOutOfRange(usize),
    #[error("security case needs 0 <= h <= t <= 32 and n >= 1, got t = {t}, h = {h}, n = {n}")]
    BadCaseArguments { t: usize, h: usize, n: usize },
    #[error(transparent)]
    Sss(#[from] SssError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
}

/// Share abscissa for `recipient`: the 31 non-origin slots map onto `1..=31`
/// in slot order.
pub fn share_abscissa(origin: usize, recipient: usize) -> u32 {
    debug_assert_ne!(origin, recipient);
    if recipient < origin {
        recipient as u32 + 1
    } else {
        recipient as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareEnvelope {
    origin_slot: usize,
    recipient_slot: usize,
    sealed_to: usize,
    point: SharePoint,
}

impl ShareEnvelope {
    pub fn origin_slot(&self) -> usize {
        self.origin_slot
    }

    pub fn recipient_slot(&self) -> usize {
        self.recipient_slot
    }

    pub fn sealed_to(&self) -> usize {
        self.sealed_to
    }

    pub fn x(&self) -> u32 {
        self.point.x
    }

    /// The share, for its addressee only.
    pub fn open(&self, reader: usize) -> Option<&SharePoint> {
        (reader == self.sealed_to).then_some(&self.point)
    }

    /// Debug/test-vector form. Exposes the share in the clear.
    pub fn to_wire(&self) -> [u8; ENVELOPE_WIRE_LEN] {
        let mut out = [0u8; ENVELOPE_WIRE_LEN];
        out[0] = self.origin_slot as u8;
        out[1] = self.recipient_slot as u8;
        out[2..].copy_from_slice(&encode_share(Field::production(), &self.point));
        out
    }
}

/// Splits one proposer's reveal and seals a share to every other slot's proposer.
pub fn distribute_shares<R: RngCore + ?Sized>(
    slot: usize,
    reveal: &Reveal,
    cfg: &SssConfig,
    proposers: &[usize; SLOTS_PER_EPOCH],
    rng: &mut R,
) -> Result<Vec<ShareEnvelope>, ProtocolError> {
    if slot >= SLOTS_PER_EPOCH {
        return Err(ProtocolError::SlotOutOfRange(slot));
    }
    if cfg.share_count() != SssConfig::RANDAO_SHARE_COUNT {
        return Err(ProtocolError::ShareCountMismatch {
            expected: SssConfig::RANDAO_SHARE_COUNT,
            actual: cfg.share_count(),
        });
    }
    let shares = sss::split(&Secret(reveal.0), cfg, rng)?;
    Ok((0..SLOTS_PER_EPOCH)
        .filter(|&r| r != slot)
        .map(|recipient| {
            let x = share_abscissa(slot, recipient);
            ShareEnvelope {
                origin_slot: slot,
                recipient_slot: recipient,
                sealed_to: proposers[recipient],
                point: shares[x as usize - 1].clone(),
            }
        })
        .collect())
}

/// Everything published during one epoch's distribution phase.
#[derive(Debug, Clone)]
pub struct Distribution {
    epoch: u64,
    proposers: [usize; SLOTS_PER_EPOCH],
    distributed: [bool; SLOTS_PER_EPOCH],
    envelopes: Vec<ShareEnvelope>,
}

impl Distribution {
    /// Every proposer not marked absent computes its reveal and distributes it.
    pub fn run<R: RngCore + ?Sized>(
        epoch: u64,
        proposers: [usize; SLOTS_PER_EPOCH],
        registry: &Registry,
        absent: &[bool; SLOTS_PER_EPOCH],
        cfg: &SssConfig,
        rng: &mut R,
    ) -> Result<Self, ProtocolError> {
        let mut envelopes = Vec::with_capacity(SLOTS_PER_EPOCH * (SLOTS_PER_EPOCH - 1));
        let mut distributed = [false; SLOTS_PER_EPOCH];
        for slot in 0..SLOTS_PER_EPOCH {
            if absent[slot] {
                continue;
            }
            let reveal = compute_reveal(&registry[proposers[slot]], epoch);
            envelopes.extend(distribute_shares(slot, &reveal, cfg, &proposers, rng)?);
            distributed[slot] = true;
        }
        Ok(Self {
            epoch,
            proposers,
            distributed,
            envelopes,
        })
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn proposers(&self) -> &[usize; SLOTS_PER_EPOCH] {
        &self.proposers
    }

    pub fn distributed(&self) -> &[bool; SLOTS_PER_EPOCH] {
        &self.distributed
    }

    pub fn envelopes(&self) -> &[ShareEnvelope] {
        &self.envelopes
    }

    /// Shares of `origin` the attacker can open.
    fn held_by(&self, attacker: &AttackerProfile, origin: usize) -> Vec<SharePoint> {
        self.envelopes
            .iter()
            .filter(|e| e.origin_slot == origin && attacker.controls(e.sealed_to))
            .filter_map(|e| e.open(e.sealed_to).cloned())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BroadcastShare {
    pub origin_slot: usize,
    pub point: SharePoint,
    pub revealer: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RevealPhaseState {
    epoch: u64,
    proposers: [usize; SLOTS_PER_EPOCH],
    distributed: [bool; SLOTS_PER_EPOCH],
    broadcast: Vec<BroadcastShare>,
    participants: BTreeSet<usize>,
    /// Validators that broadcast honestly (the attacker's are excluded).
    honest: BTreeSet<usize>,
    t: usize,
}

impl RevealPhaseState {
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn broadcast(&self) -> &[BroadcastShare] {
        &self.broadcast
    }

    pub fn participants(&self) -> &BTreeSet<usize> {
        &self.participants
    }

    /// Slots whose proposer both distributed and takes part in the reveal phase.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn distributed_count(&self) -> usize {
        self.distributed.iter().filter(|d| **d).count()
    }

    fn points_for(&self, origin: usize, honest_only: bool) -> Vec<SharePoint> {
        self.broadcast
            .iter()
            .filter(|b| b.origin_slot == origin)
            .filter(|b| !honest_only || self.honest.contains(&b.revealer))
            .map(|b| b.point.clone())
            .collect()
    }

    fn count_t(&mut self) {
        self.t = (0..SLOTS_PER_EPOCH)
            .filter(|&s| self.distributed[s] && self.participants.contains(&self.proposers[s]))
            .count();
    }
}

/// Rushing adversary: `decide` sees the honest broadcasts and returns the
/// origin slots whose shares it withholds. All its other shares go out.
pub struct Rushing<'a> {
    pub attacker: &'a AttackerProfile,
    pub decide: &'a mut dyn FnMut(&RevealPhaseState) -> BTreeSet<usize>,
}

pub fn run_reveal_phase(
    dist: &Distribution,
    honest_participants: &BTreeSet<usize>,
    adversary: Option<Rushing<'_>>,
) -> RevealPhaseState {
    let is_attacker =
        |v: usize| adversary.as_ref().is_some_and(|a| a.attacker.controls(v));
    let honest: BTreeSet<usize> = honest_participants
        .iter()
        .copied()
        .filter(|&v| !is_attacker(v))
        .collect();

    let mut state = RevealPhaseState {
        epoch: dist.epoch,
        proposers: dist.proposers,
        distributed: dist.distributed,
        broadcast: Vec::new(),
        participants: honest.clone(),
        honest,
        t: 0,
    };
    for e in &dist.envelopes {
        if state.honest.contains(&e.sealed_to) {
            let point = e.open(e.sealed_to).expect("addressee opens").clone();
            state.broadcast.push(BroadcastShare {
                origin_slot: e.origin_slot,
                point,
                revealer: e.sealed_to,
            });
        }
    }
    state.count_t();

    if let Some(Rushing { attacker, decide }) = adversary {
        let withheld = decide(&state);
        for e in &dist.envelopes {
            if attacker.controls(e.sealed_to) && !withheld.contains(&e.origin_slot) {
                let point = e.open(e.sealed_to).expect("addressee opens").clone();
                state.broadcast.push(BroadcastShare {
                    origin_slot: e.origin_slot,
                    point,
                    revealer: e.sealed_to,
                });
            }
        }
        let present: BTreeSet<usize> = dist
            .proposers
            .iter()
            .copied()
            .filter(|&v| attacker.controls(v))
            .collect();
        state.participants.extend(present);
        state.count_t();
    }
    state
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SlotRecovery {
    Recovered(Reveal),
    NotDistributed,
    TooFewShares(usize),
    Corrupt,
}

impl SlotRecovery {
    pub fn reveal(&self) -> Option<Reveal> {
        match self {
            SlotRecovery::Recovered(r) => Some(*r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecoveryOutcome {
    pub slots: [SlotRecovery; SLOTS_PER_EPOCH],
    pub mix: Reveal,
    /// `None` when the epoch broke and no fallback seed was supplied.
    pub seed: Option<Seed>,
    /// Fewer than `n` proposers joined: no reveal can be recovered.
    pub broken: bool,
}

impl RecoveryOutcome {
    pub fn unrecoverable_count(&self) -> usize {
        self.slots.iter().filter(|s| s.reveal().is_none()).count()
    }
}

fn recover_slot(points: &[SharePoint], distributed: bool, cfg: &SssConfig) -> SlotRecovery {
    if !distributed {
        return SlotRecovery::NotDistributed;
    }
    if points.len() < cfg.threshold() {
        return SlotRecovery::TooFewShares(points.len());
    }
    match sss::recover(points, cfg) {
        Ok(secret) => SlotRecovery::Recovered(Reveal(secret.0)),
        Err(_) => SlotRecovery::Corrupt,
    }
}

/// Reconstructs every reveal that gathered `n` shares and folds them into the
/// mix. With `fallback`, a broken epoch reuses that seed instead of having none.
pub fn recover_all(
    state: &RevealPhaseState,
    cfg: &SssConfig,
    fallback: Option<Seed>,
) -> RecoveryOutcome {
    let slots: [SlotRecovery; SLOTS_PER_EPOCH] = std::array::from_fn(|origin| {
        recover_slot(&state.points_for(origin, false), state.distributed[origin], cfg)
    });
    let posted: Vec<Option<Reveal>> = slots.iter().map(SlotRecovery::reveal).collect();
    let mix = mix_reveals(&posted);
    let broken = state.t < cfg.threshold();
    let seed = if broken {
        fallback
    } else {
        Some(derive_seed(&mix, state.epoch))
    };
    RecoveryOutcome {
        slots,
        mix,
        seed,
        broken,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SecurityCase {
    /// `t >= n` and `h < n`.
    Prevented,
    /// `t < n`.
    Broken,
    /// `t >= n` and `h >= n`.
    Collusion,
}

pub fn classify_security_case(t: usize, h: usize, n: usize) -> Result<SecurityCase, ProtocolError> {
    if n == 0 || h > t || t > SLOTS_PER_EPOCH {
        return Err(ProtocolError::BadCaseArguments { t, h, n });
    }
    Ok(if t < n {
        SecurityCase::Broken
    } else if h < n {
        SecurityCase::Prevented
    } else {
        SecurityCase::Collusion
    })
}

/// Origin slots the honest broadcasts leave short of `n` but the attacker's
/// own shares would complete.
pub fn adversary_flip_set(
    state: &RevealPhaseState,
    dist: &Distribution,
    attacker: &AttackerProfile,
    cfg: &SssConfig,
) -> BTreeSet<usize> {
    let n = cfg.threshold();
    (0..SLOTS_PER_EPOCH)
        .filter(|&origin| state.distributed[origin])
        .filter(|&origin| {
            let honest = state.points_for(origin, true).len();
            let held = dist.held_by(attacker, origin).len();
            honest < n && n <= honest + held
        })
        .collect()
}

/// Best withhold subset over `flip_slots`; any other flippable slot is
/// treated as published.
pub fn best_flip_strategy_over(
    state: &RevealPhaseState,
    dist: &Distribution,
    flip_slots: &[usize],
    attacker: &AttackerProfile,
    cfg: &SssConfig,
    registry: &Registry,
    cap: usize,
) -> Result<AttackOutcome, ProtocolError> {
    let mut base = Reveal::ZERO;
    let mut options = Vec::with_capacity(flip_slots.len());
    let mut decision_slots = Vec::with_capacity(flip_slots.len());
    for origin in 0..SLOTS_PER_EPOCH {
        let mut points = state.points_for(origin, true);
        points.extend(dist.held_by(attacker, origin));
        // The attacker reconstructs whatever the honest shares plus its own allow.
        let Some(reveal) = recover_slot(&points, state.distributed[origin], cfg).reveal() else {
            continue;
        };
        if flip_slots.contains(&origin) {
            options.push(reveal);
            decision_slots.push(origin);
        } else {
            base = base.xor(&reveal);
        }
    }
    let (chosen, payoff, honest_payoff) =
        grind(&base, &options, state.epoch, attacker, registry, cap)?;
    Ok(AttackOutcome {
        decision_slots,
        chosen,
        payoff,
        honest_payoff,
    })
}

pub fn best_flip_strategy(
    state: &RevealPhaseState,
    dist: &Distribution,
    attacker: &AttackerProfile,
    cfg: &SssConfig,
    registry: &Registry,
    cap: usize,
) -> Result<AttackOutcome, ProtocolError> {
    let flip: Vec<usize> = adversary_flip_set(state, dist, attacker, cfg)
        .into_iter()
        .collect();
    best_flip_strategy_over(state, dist, &flip, attacker, cfg, registry, cap)
}

/// Origin slots the outcome withholds.
pub fn withheld_origins(outcome: &AttackOutcome) -> BTreeSet<usize> {
    outcome
        .decision_slots
        .iter()
        .enumerate()
        .filter(|(i, _)| outcome.chosen.withholds(*i))
        .map(|(_, &s)| s)
        .collect()
}
