//! Classic commit-reveal RANDAO as run by the beacon chain.
//!
//! Each slot's proposer posts a 32-byte reveal, the epoch keeps a running XOR
//! mix of everything posted, and the hashed final mix (`seed32`) is the only
//! randomness that feeds proposer selection two epochs later. A BLS signature
//! over the epoch is modeled as `SHA-256(secret_key || LE64(epoch) || DOMAIN_RANDAO)`.

use std::fmt;

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SLOTS_PER_EPOCH: usize = 32;
pub const SECONDS_PER_SLOT: u64 = 12;
/// Gwei, as on mainnet.
pub const MAX_EFFECTIVE_BALANCE: u64 = 32_000_000_000;
pub const DOMAIN_RANDAO: [u8; 4] = [0x02, 0x00, 0x00, 0x00];
pub const DOMAIN_BEACON_PROPOSER: [u8; 4] = [0x00, 0x00, 0x00, 0x00];
/// Rejection-sampling attempts per slot before selection gives up.
pub const MAX_SELECTION_ATTEMPTS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RandaoError {
    #[error("validator registry is empty")]
    EmptyRegistry,
    #[error("validator at position {position} has index {index}; indices must be dense from 0")]
    SparseIndex { position: usize, index: usize },
    #[error("validator {index} has effective balance {balance}, outside [1, {MAX_EFFECTIVE_BALANCE}]")]
    BadBalance { index: usize, balance: u64 },
    #[error("slot {slot} accepted no candidate within {MAX_SELECTION_ATTEMPTS} attempts")]
    SelectionExhausted { slot: usize },
    #[error("slot {0} is outside the epoch")]
    SlotOutOfRange(usize),
    #[error("slot {0} already carries a reveal")]
    AlreadyPosted(usize),
    #[error("epoch {0} is sealed")]
    Sealed(u64),
    #[error("epoch {0} has no seed yet; it cannot select proposers")]
    MissingSeed(u64),
    #[error("chain position {position} holds epoch {epoch}")]
    OutOfOrder { position: usize, epoch: u64 },
}

/// SHA-256 over the concatenation of `parts`.
pub fn hash(parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p);
    }
    hasher.finalize().into()
}

fn serialize_hex<S: Serializer>(bytes: &[u8; 32], serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&hex::encode(bytes))
}

/// A 32-byte RANDAO contribution, or an XOR mix of several.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Reveal(#[serde(serialize_with = "serialize_hex")] pub [u8; 32]);

impl Reveal {
    pub const ZERO: Reveal = Reveal([0u8; 32]);

    pub fn xor(&self, other: &Reveal) -> Reveal {
        let mut out = self.0;
        out.iter_mut().zip(other.0.iter()).for_each(|(a, b)| *a ^= b);
        Reveal(out)
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0u8; 32]
    }
}

impl fmt::Debug for Reveal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Reveal({})", hex::encode(self.0))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Seed(#[serde(serialize_with = "serialize_hex")] pub [u8; 32]);

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seed({})", hex::encode(self.0))
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Validator {
    pub index: usize,
    #[serde(skip)]
    pub secret_key: [u8; 32],
    pub effective_balance: u64,
}

/// Frozen validator set. Indices are dense and every balance is in range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    validators: Vec<Validator>,
}

impl Registry {
    pub fn new(validators: Vec<Validator>) -> Result<Self, RandaoError> {
        if validators.is_empty() {
            return Err(RandaoError::EmptyRegistry);
        }
        for (position, v) in validators.iter().enumerate() {
            if v.index != position {
                return Err(RandaoError::SparseIndex {
                    position,
                    index: v.index,
                });
            }
            if v.effective_balance == 0 || v.effective_balance > MAX_EFFECTIVE_BALANCE {
                return Err(RandaoError::BadBalance {
                    index: v.index,
                    balance: v.effective_balance,
                });
            }
        }
        Ok(Self { validators })
    }

    pub fn len(&self) -> usize {
        self.validators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.validators.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Validator> {
        self.validators.get(index)
    }

    pub fn validators(&self) -> &[Validator] {
        &self.validators
    }

    pub fn total_balance(&self) -> u128 {
        self.validators
            .iter()
            .map(|v| u128::from(v.effective_balance))
            .sum()
    }
}

impl std::ops::Index<usize> for Registry {
    type Output = Validator;

    fn index(&self, index: usize) -> &Validator {
        &self.validators[index]
    }
}

pub fn compute_reveal(v: &Validator, epoch: u64) -> Reveal {
    Reveal(hash(&[&v.secret_key, &epoch.to_le_bytes(), &DOMAIN_RANDAO]))
}

/// XOR-fold of the posted reveals; absent slots are the identity.
pub fn mix_reveals(posted: &[Option<Reveal>]) -> Reveal {
    posted
        .iter()
        .flatten()
        .fold(Reveal::ZERO, |acc, r| acc.xor(r))
}

/// `seed32 = H(DOMAIN_BEACON_PROPOSER || LE64(epoch) || mix)`.
pub fn derive_seed(mix: &Reveal, epoch: u64) -> Seed {
    Seed(hash(&[&DOMAIN_BEACON_PROPOSER, &epoch.to_le_bytes(), &mix.0]))
}

/// Seed for the two bootstrap epochs, derived from an all-zero mix.
pub fn genesis_seed(epoch: u64) -> Seed {
    derive_seed(&Reveal::ZERO, epoch)
}

/// Balance-weighted, fully deterministic proposer choice for each slot.
///
/// For slot `s`, attempt `c` hashes `seed || LE64(s) || LE64(c)`; the first
/// eight bytes (big-endian) pick a candidate modulo `N`, byte 8 is the
/// acceptance draw against the candidate's share of the maximum balance.
pub fn select_proposers(
    seed: &Seed,
    registry: &Registry,
) -> Result<[usize; SLOTS_PER_EPOCH], RandaoError> {
    let n = registry.len() as u64;
    let mut proposers = [0usize; SLOTS_PER_EPOCH];
    for (slot, out) in proposers.iter_mut().enumerate() {
        let slot_bytes = (slot as u64).to_le_bytes();
        let mut chosen = None;
        for attempt in 0..MAX_SELECTION_ATTEMPTS {
            let d = hash(&[&seed.0, &slot_bytes, &attempt.to_le_bytes()]);
            let candidate = u64::from_be_bytes(d[..8].try_into().expect("8 bytes")) % n;
            let balance = registry[candidate as usize].effective_balance;
            if (u128::from(d[8]) + 1) * u128::from(MAX_EFFECTIVE_BALANCE)
                <= 256 * u128::from(balance)
            {
                chosen = Some(candidate as usize);
                break;
            }
        }
        *out = chosen.ok_or(RandaoError::SelectionExhausted { slot })?;
    }
    Ok(proposers)
}

/// One epoch of block production: who proposes each slot and what was posted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EpochState {
    epoch: u64,
    proposers: [usize; SLOTS_PER_EPOCH],
    posted: [Option<Reveal>; SLOTS_PER_EPOCH],
    mix: Reveal,
    seed: Option<Seed>,
}

impl EpochState {
    pub fn new(epoch: u64, proposers: [usize; SLOTS_PER_EPOCH]) -> Self {
        Self {
            epoch,
            proposers,
            posted: [None; SLOTS_PER_EPOCH],
            mix: Reveal::ZERO,
            seed: None,
        }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn proposers(&self) -> &[usize; SLOTS_PER_EPOCH] {
        &self.proposers
    }

    pub fn proposer(&self, slot: usize) -> usize {
        self.proposers[slot]
    }

    pub fn posted(&self) -> &[Option<Reveal>; SLOTS_PER_EPOCH] {
        &self.posted
    }

    pub fn mix(&self) -> Reveal {
        self.mix
    }

    pub fn seed(&self) -> Option<Seed> {
        self.seed
    }

    pub fn post(&mut self, slot: usize, reveal: Reveal) -> Result<(), RandaoError> {
        if self.seed.is_some() {
            return Err(RandaoError::Sealed(self.epoch));
        }
        let entry = self
            .posted
            .get_mut(slot)
            .ok_or(RandaoError::SlotOutOfRange(slot))?;
        if entry.is_some() {
            return Err(RandaoError::AlreadyPosted(slot));
        }
        *entry = Some(reveal);
        self.mix = self.mix.xor(&reveal);
        Ok(())
    }

    /// Seals the epoch and derives its seed. Idempotent.
    pub fn finalize(&mut self) -> Seed {
        *self
            .seed
            .get_or_insert_with(|| derive_seed(&self.mix, self.epoch))
    }

    /// Every proposer not marked absent posts its honest reveal, then the epoch
    /// is sealed.
    pub fn play(
        &mut self,
        registry: &Registry,
        absent: &[bool; SLOTS_PER_EPOCH],
    ) -> Result<Seed, RandaoError> {
        for slot in 0..SLOTS_PER_EPOCH {
            if !absent[slot] {
                let reveal = compute_reveal(&registry[self.proposers[slot]], self.epoch);
                self.post(slot, reveal)?;
            }
        }
        Ok(self.finalize())
    }
}

/// Opens the epoch after the last one in `chain`. Epochs 0 and 1 use genesis
/// seeds; epoch `e >= 2` is drawn from the seed of epoch `e - 2`.
pub fn advance_pipeline(chain: &[EpochState], registry: &Registry) -> Result<EpochState, RandaoError> {
    for (position, state) in chain.iter().enumerate() {
        if state.epoch != position as u64 {
            return Err(RandaoError::OutOfOrder {
                position,
                epoch: state.epoch,
            });
        }
    }
    let next = chain.len() as u64;
    let seed = if next < 2 {
        genesis_seed(next)
    } else {
        let source = &chain[chain.len() - 2];
        source.seed.ok_or(RandaoError::MissingSeed(source.epoch))?
    };
    Ok(EpochState::new(next, select_proposers(&seed, registry)?))
}
