//! Shamir (n, m) threshold sharing of 32-byte secrets.
//!
//! Shares sit at abscissae `1..=m`; the secret is the constant term of a random
//! degree-(n-1) polynomial. All randomness comes from the caller's stream.

use num_bigint::BigUint;
use rand::RngCore;
use serde::Serialize;
use thiserror::Error;

use crate::field::{Field, FieldElement, FieldError, Polynomial, SharePoint};

/// Upper bound on polynomials a [`secrecy_probe`] may enumerate.
pub const PROBE_BUDGET: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SssError {
    #[error("invalid threshold configuration: n = {threshold}, m = {share_count} (need 1 <= n <= m <= 255)")]
    BadConfig { threshold: usize, share_count: usize },
    #[error("share count {share_count} does not fit below the field modulus")]
    FieldTooSmall { share_count: usize },
    #[error("need at least {need} shares to recover, have {have}")]
    InsufficientShares { have: usize, need: usize },
    #[error("shares interpolate to a value outside the secret space")]
    CorruptShares,
    #[error("exhaustive probe would enumerate more than {PROBE_BUDGET} polynomials")]
    ProbeInfeasible,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SssConfig {
    threshold: usize,
    share_count: usize,
}

impl SssConfig {
    /// One share per other slot of a 32-slot epoch.
    pub const RANDAO_SHARE_COUNT: usize = 31;

    pub fn new(threshold: usize, share_count: usize) -> Result<Self, SssError> {
        if threshold == 0 || threshold > share_count || share_count > 255 {
            return Err(SssError::BadConfig {
                threshold,
                share_count,
            });
        }
        Ok(Self {
            threshold,
            share_count,
        })
    }

    pub fn randao(threshold: usize) -> Result<Self, SssError> {
        Self::new(threshold, Self::RANDAO_SHARE_COUNT)
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn share_count(&self) -> usize {
        self.share_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Secret(pub [u8; 32]);

impl Secret {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

/// Splits a field element. Draws exactly `n - 1` uniform coefficients from `rng`.
pub fn split_element<R: RngCore + ?Sized>(
    field: &Field,
    secret: &FieldElement,
    cfg: &SssConfig,
    rng: &mut R,
) -> Result<Vec<SharePoint>, SssError> {
    if BigUint::from(cfg.share_count) >= *field.modulus() {
        return Err(SssError::FieldTooSmall {
            share_count: cfg.share_count,
        });
    }
    let mut coefficients = Vec::with_capacity(cfg.threshold);
    coefficients.push(secret.clone());
    for _ in 1..cfg.threshold {
        coefficients.push(field.sample(rng));
    }
    let poly = Polynomial::new(coefficients)?;
    Ok((1..=cfg.share_count as u32)
        .map(|x| SharePoint {
            x,
            y: field.poly_eval(&poly, &field.from_u64(u64::from(x))),
        })
        .collect())
}

/// Splits a 32-byte secret over the production field.
pub fn split<R: RngCore + ?Sized>(
    secret: &Secret,
    cfg: &SssConfig,
    rng: &mut R,
) -> Result<Vec<SharePoint>, SssError> {
    let field = Field::production();
    split_element(field, &field.embed_bytes32(&secret.0), cfg, rng)
}

/// Interpolates the `n` shares with the smallest abscissae; extra shares are
/// not consulted (see [`shares_consistent`] for a full check).
pub fn recover_element(
    field: &Field,
    points: &[SharePoint],
    cfg: &SssConfig,
) -> Result<FieldElement, SssError> {
    if points.len() < cfg.threshold {
        return Err(SssError::InsufficientShares {
            have: points.len(),
            need: cfg.threshold,
        });
    }
    let mut chosen: Vec<SharePoint> = points.to_vec();
    chosen.sort_by_key(|p| p.x);
    if chosen.windows(2).any(|w| w[0].x == w[1].x) {
        let dup = chosen.windows(2).find(|w| w[0].x == w[1].x).expect("found");
        return Err(FieldError::DuplicateAbscissa(dup[0].x).into());
    }
    chosen.truncate(cfg.threshold);
    Ok(field.interpolate_at_zero(&chosen)?)
}

pub fn recover(points: &[SharePoint], cfg: &SssConfig) -> Result<Secret, SssError> {
    let field = Field::production();
    let value = recover_element(field, points, cfg)?;
    field
        .extract_bytes32(&value)
        .map(Secret)
        .ok_or(SssError::CorruptShares)
}

/// True iff all points lie on the polynomial fixed by the first `n` of them.
pub fn shares_consistent(
    field: &Field,
    points: &[SharePoint],
    cfg: &SssConfig,
) -> Result<bool, SssError> {
    if points.len() <= cfg.threshold {
        return Ok(true);
    }
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.x);
    let (basis, rest) = sorted.split_at(cfg.threshold);
    for p in rest {
        let expected = field.interpolate_at(basis, &field.from_u64(u64::from(p.x)))?;
        if expected != p.y {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exhaustively searches for a degree-(n-1) polynomial with constant term
/// `candidate` passing through every point. Only feasible over tiny fields.
pub fn secrecy_probe(
    field: &Field,
    points: &[SharePoint],
    cfg: &SssConfig,
    candidate: &FieldElement,
) -> Result<bool, SssError> {
    let free = cfg.threshold - 1;
    let p: u64 = field
        .modulus()
        .try_into()
        .map_err(|_| SssError::ProbeInfeasible)?;
    let total = (0..free).try_fold(1u64, |acc, _| acc.checked_mul(p).filter(|t| *t <= PROBE_BUDGET));
    let total = total.ok_or(SssError::ProbeInfeasible)?;

    let xs: Vec<FieldElement> = points
        .iter()
        .map(|pt| field.from_u64(u64::from(pt.x)))
        .collect();
    let mut digits = vec![0u64; free];
    for _ in 0..total {
        let mut coefficients = Vec::with_capacity(cfg.threshold);
        coefficients.push(candidate.clone());
        coefficients.extend(digits.iter().map(|d| field.from_u64(*d)));
        let poly = Polynomial::new(coefficients)?;
        if points
            .iter()
            .zip(&xs)
            .all(|(pt, x)| field.poly_eval(&poly, x) == pt.y)
        {
            return Ok(true);
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < p {
                break;
            }
            *d = 0;
        }
    }
    Ok(false)
}

/// Wire form: 1-byte x followed by the fixed-width y encoding.
pub fn encode_share(field: &Field, point: &SharePoint) -> Vec<u8> {
    let x = u8::try_from(point.x).expect("share abscissa fits in one byte");
    let mut out = Vec::with_capacity(1 + field.encoded_len());
    out.push(x);
    out.extend(field.encode(&point.y));
    out
}

pub fn decode_share(field: &Field, bytes: &[u8]) -> Result<SharePoint, SssError> {
    let (&x, y) = bytes.split_first().ok_or(FieldError::BadEncodingLength {
        expected: 1 + field.encoded_len(),
        actual: 0,
    })?;
    if x == 0 {
        return Err(FieldError::ZeroAbscissa.into());
    }
    Ok(SharePoint {
        x: u32::from(x),
        y: field.decode(y)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Entropy stream replaying fixed bytes, so tests can force coefficients.
    struct Scripted(Vec<u8>, usize);

    impl RngCore for Scripted {
        fn next_u32(&mut self) -> u32 {
            let mut b = [0u8; 4];
            self.fill_bytes(&mut b);
            u32::from_le_bytes(b)
        }
        fn next_u64(&mut self) -> u64 {
            let mut b = [0u8; 8];
            self.fill_bytes(&mut b);
            u64::from_le_bytes(b)
        }
        fn fill_bytes(&mut self, dest: &mut [u8]) {
            for d in dest {
                *d = self.0[self.1 % self.0.len()];
                self.1 += 1;
            }
        }
        fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
            self.fill_bytes(dest);
            Ok(())
        }
    }

    fn gf(p: u64) -> Field {
        Field::small(p).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SssConfig::new(0, 3).is_err());
        assert!(SssConfig::new(4, 3).is_err());
        assert!(SssConfig::new(1, 256).is_err());
        assert!(SssConfig::new(3, 3).is_ok());
        assert_eq!(SssConfig::randao(16).unwrap().share_count(), 31);
    }

    #[test]
    fn forced_coefficient_split_over_gf17() {
        let f = gf(17);
        let cfg = SssConfig::new(2, 3).unwrap();
        let shares = split_element(&f, &f.from_u64(3), &cfg, &mut Scripted(vec![2], 0)).unwrap();
        let got: Vec<(u32, u64)> = shares
            .iter()
            .map(|s| (s.x, u64::try_from(s.y.value()).unwrap()))
            .collect();
        // f(x) = 3 + 2x evaluated by hand.
        assert_eq!(got, vec![(1, 5), (2, 7), (3, 9)]);
    }

    #[test]
    fn threshold_one_shares_equal_secret() {
        let secret = Secret([0xab; 32]);
        let cfg = SssConfig::new(1, 7).unwrap();
        let shares = split(&secret, &cfg, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        let embedded = Field::production().embed_bytes32(&secret.0);
        assert!(shares.iter().all(|s| s.y == embedded));
    }

    #[test]
    fn full_threshold_round_trip() {
        let secret = Secret(*b"0123456789abcdef0123456789abcdef");
        let cfg = SssConfig::randao(31).unwrap();
        let shares = split(&secret, &cfg, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        assert_eq!(shares.len(), 31);
        assert_eq!(recover(&shares, &cfg).unwrap(), secret);
    }

    #[test]
    fn too_few_shares() {
        let cfg = SssConfig::new(4, 6).unwrap();
        let shares = split(&Secret([1; 32]), &cfg, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        assert_eq!(
            recover(&shares[..3], &cfg),
            Err(SssError::InsufficientShares { have: 3, need: 4 })
        );
    }

    #[test]
    fn mixed_share_sets_do_not_yield_either_secret() {
        let cfg = SssConfig::new(3, 5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let a = Secret([0x11; 32]);
        let b = Secret([0x22; 32]);
        let sa = split(&a, &cfg, &mut rng).unwrap();
        let sb = split(&b, &cfg, &mut rng).unwrap();
        let mixed = vec![sa[0].clone(), sa[1].clone(), sb[2].clone(), sb[3].clone()];
        match recover(&mixed, &cfg) {
            Err(SssError::CorruptShares) => {}
            Ok(s) => assert!(s != a && s != b),
            Err(e) => panic!("unexpected {e}"),
        }
        assert!(!shares_consistent(Field::production(), &mixed, &cfg).unwrap());
        assert!(shares_consistent(Field::production(), &sa, &cfg).unwrap());
    }

    #[test]
    fn probe_examples() {
        let f = gf(17);
        let two = SssConfig::new(2, 3).unwrap();
        let one_share = [SharePoint { x: 1, y: f.from_u64(5) }];
        for c in 0..17 {
            assert!(secrecy_probe(&f, &one_share, &two, &f.from_u64(c)).unwrap());
        }
        let one = SssConfig::new(1, 3).unwrap();
        assert!(secrecy_probe(&f, &[], &one, &f.from_u64(4)).unwrap());
        let line = [
            SharePoint { x: 2, y: f.from_u64(7) },
            SharePoint { x: 3, y: f.from_u64(9) },
        ];
        assert!(secrecy_probe(&f, &line, &two, &f.from_u64(3)).unwrap());
        assert!(!secrecy_probe(&f, &line, &two, &f.from_u64(4)).unwrap());
        let big = SssConfig::new(3, 5).unwrap();
        assert_eq!(
            secrecy_probe(Field::production(), &[], &big, &f.from_u64(1)),
            Err(SssError::ProbeInfeasible)
        );
    }

    #[test]
    fn share_wire_form_is_34_bytes() {
        let f = Field::production();
        let p = SharePoint { x: 7, y: f.from_u64(0xbeef) };
        let wire = encode_share(f, &p);
        assert_eq!(wire.len(), 34);
        assert_eq!(wire[0], 7);
        assert_eq!(&wire[32..], &[0xbe, 0xef]);
        assert_eq!(decode_share(f, &wire).unwrap(), p);
        assert!(decode_share(f, &[0u8; 34]).is_err());
    }

    proptest! {
        #[test]
        fn split_is_deterministic_and_recovers(
            secret in any::<[u8; 32]>(),
            n in 1usize..8,
            extra in 0usize..6,
            seed in any::<u64>(),
        ) {
            let cfg = SssConfig::new(n, n + extra).unwrap();
            let a = split(&Secret(secret), &cfg, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
            let b = split(&Secret(secret), &cfg, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(&a, &b);
            let tail = &a[extra..];
            prop_assert_eq!(recover(tail, &cfg).unwrap(), Secret(secret));
        }
    }
}
