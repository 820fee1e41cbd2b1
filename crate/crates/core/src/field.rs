//! Prime-field arithmetic, Horner evaluation and Lagrange interpolation at zero.
//!
//! The modulus is a runtime parameter so the same code serves the production
//! field (the smallest prime above 2^256, wide enough to embed any 32-byte
//! string) and tiny test fields such as GF(17) or GF(251) where exhaustive
//! oracles are affordable.

use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::RngCore;
use serde::{Serialize, Serializer};
use thiserror::Error;

/// `PRODUCTION_MODULUS = 2^256 + PRODUCTION_OFFSET` is the smallest prime >= 2^256.
pub const PRODUCTION_OFFSET: u32 = 297;

/// Width of the production field-element encoding.
pub const PRODUCTION_ENCODED_LEN: usize = 33;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("modulus must be an odd prime greater than 2, got {0}")]
    BadModulus(BigUint),
    #[error("value {0} is outside the field")]
    OutOfRange(BigUint),
    #[error("zero has no multiplicative inverse")]
    InverseOfZero,
    #[error("interpolation needs at least one point")]
    NoPoints,
    #[error("share x-coordinate must be nonzero modulo p")]
    ZeroAbscissa,
    #[error("duplicate x-coordinate {0}")]
    DuplicateAbscissa(u32),
    #[error("polynomial needs at least one coefficient")]
    EmptyPolynomial,
    #[error("encoding must be {expected} bytes, got {actual}")]
    BadEncodingLength { expected: usize, actual: usize },
}

/// An element of a prime field. Only a [`Field`] can construct one, so the
/// value is always reduced.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldElement(BigUint);

impl FieldElement {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fe({})", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for FieldElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0.to_str_radix(16))
    }
}

/// Coefficients in ascending degree order; `coefficients[0]` is the constant term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    coefficients: Vec<FieldElement>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<FieldElement>) -> Result<Self, FieldError> {
        if coefficients.is_empty() {
            return Err(FieldError::EmptyPolynomial);
        }
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &[FieldElement] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn constant_term(&self) -> &FieldElement {
        &self.coefficients[0]
    }
}

/// One Shamir share: the polynomial evaluated at a nonzero abscissa.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SharePoint {
    pub x: u32,
    pub y: FieldElement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    modulus: BigUint,
    bits: u64,
    encoded_len: usize,
}

impl Field {
    /// Builds a field over `modulus`. Primality is the caller's promise; only
    /// cheap structural checks run here.
    pub fn new(modulus: BigUint) -> Result<Self, FieldError> {
        let two = BigUint::from(2u32);
        if modulus <= two || (&modulus % &two).is_zero() {
            return Err(FieldError::BadModulus(modulus));
        }
        let bits = modulus.bits();
        let encoded_len = bits.div_ceil(8) as usize;
        Ok(Self {
            modulus,
            bits,
            encoded_len,
        })
    }

    pub fn small(modulus: u64) -> Result<Self, FieldError> {
        Self::new(BigUint::from(modulus))
    }

    /// The 257-bit production field shared by every 32-byte secret.
    pub fn production() -> &'static Field {
        static FIELD: OnceLock<Field> = OnceLock::new();
        FIELD.get_or_init(|| {
            let modulus = (BigUint::one() << 256u32) + BigUint::from(PRODUCTION_OFFSET);
            Field::new(modulus).expect("production modulus is odd")
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    /// Bytes in the fixed-width big-endian encoding.
    pub fn encoded_len(&self) -> usize {
        self.encoded_len
    }

    pub fn element(&self, value: BigUint) -> Result<FieldElement, FieldError> {
        if value >= self.modulus {
            return Err(FieldError::OutOfRange(value));
        }
        Ok(FieldElement(value))
    }

    pub fn reduce(&self, value: BigUint) -> FieldElement {
        FieldElement(value % &self.modulus)
    }

    pub fn from_u64(&self, value: u64) -> FieldElement {
        self.reduce(BigUint::from(value))
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(BigUint::zero())
    }

    pub fn one(&self) -> FieldElement {
        FieldElement(BigUint::one())
    }

    pub fn add(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let sum = &a.0 + &b.0;
        if sum >= self.modulus {
            FieldElement(sum - &self.modulus)
        } else {
            FieldElement(sum)
        }
    }

    pub fn neg(&self, a: &FieldElement) -> FieldElement {
        if a.0.is_zero() {
            a.clone()
        } else {
            FieldElement(&self.modulus - &a.0)
        }
    }

    pub fn sub(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        if a.0 >= b.0 {
            FieldElement(&a.0 - &b.0)
        } else {
            FieldElement(&self.modulus - (&b.0 - &a.0))
        }
    }

    pub fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        FieldElement((&a.0 * &b.0) % &self.modulus)
    }

    pub fn inv(&self, a: &FieldElement) -> Result<FieldElement, FieldError> {
        if a.0.is_zero() {
            return Err(FieldError::InverseOfZero);
        }
        // Nonzero and the modulus is prime, so the gcd is 1.
        a.0.modinv(&self.modulus)
            .map(FieldElement)
            .ok_or(FieldError::InverseOfZero)
    }

    /// Uniform element by rejection sampling on `bits`-wide big-endian draws.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> FieldElement {
        let mut buf = vec![0u8; self.encoded_len];
        let excess = (self.encoded_len as u64) * 8 - self.bits;
        let top_mask = 0xffu8 >> excess;
        loop {
            rng.fill_bytes(&mut buf);
            buf[0] &= top_mask;
            let candidate = BigUint::from_bytes_be(&buf);
            if candidate < self.modulus {
                return FieldElement(candidate);
            }
        }
    }

    /// Horner's rule.
    pub fn poly_eval(&self, poly: &Polynomial, x: &FieldElement) -> FieldElement {
        let mut coefficients = poly.coefficients.iter().rev();
        let mut acc = coefficients
            .next()
            .expect("polynomial is nonempty")
            .clone();
        for c in coefficients {
            acc = self.add(&self.mul(&acc, x), c);
        }
        acc
    }

    /// Lagrange interpolation of `points`, evaluated at `at`.
    pub fn interpolate_at(
        &self,
        points: &[SharePoint],
        at: &FieldElement,
    ) -> Result<FieldElement, FieldError> {
        let xs = self.abscissae(points)?;
        let k = xs.len();

        // numerator_i = prod_{j != i} (at - x_j), via prefix/suffix products.
        let diffs: Vec<FieldElement> = xs.iter().map(|x| self.sub(at, x)).collect();
        let mut prefix = Vec::with_capacity(k + 1);
        prefix.push(self.one());
        for d in &diffs {
            let next = self.mul(prefix.last().expect("seeded"), d);
            prefix.push(next);
        }
        let mut suffix = vec![self.one(); k + 1];
        for i in (0..k).rev() {
            suffix[i] = self.mul(&suffix[i + 1], &diffs[i]);
        }

        // denominator_i = prod_{j != i} (x_i - x_j)
        let denominators: Vec<FieldElement> = (0..k)
            .map(|i| {
                xs.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .fold(self.one(), |acc, (_, xj)| {
                        self.mul(&acc, &self.sub(&xs[i], xj))
                    })
            })
            .collect();
        let inverses = self.batch_inv(&denominators)?;

        let mut acc = self.zero();
        for (i, point) in points.iter().enumerate() {
            let numerator = self.mul(&prefix[i], &suffix[i + 1]);
            let basis = self.mul(&numerator, &inverses[i]);
            acc = self.add(&acc, &self.mul(&basis, &point.y));
        }
        Ok(acc)
    }

    /// Constant term of the unique lowest-degree polynomial through `points`.
    pub fn interpolate_at_zero(&self, points: &[SharePoint]) -> Result<FieldElement, FieldError> {
        self.interpolate_at(points, &self.zero())
    }

    /// Montgomery's trick: one inversion for the whole slice.
    fn batch_inv(&self, values: &[FieldElement]) -> Result<Vec<FieldElement>, FieldError> {
        let mut running = Vec::with_capacity(values.len());
        let mut acc = self.one();
        for v in values {
            if v.is_zero() {
                return Err(FieldError::InverseOfZero);
            }
            running.push(acc.clone());
            acc = self.mul(&acc, v);
        }
        let mut inv_acc = self.inv(&acc)?;
        let mut out = vec![self.zero(); values.len()];
        for i in (0..values.len()).rev() {
            out[i] = self.mul(&inv_acc, &running[i]);
            inv_acc = self.mul(&inv_acc, &values[i]);
        }
        Ok(out)
    }

    fn abscissae(&self, points: &[SharePoint]) -> Result<Vec<FieldElement>, FieldError> {
        if points.is_empty() {
            return Err(FieldError::NoPoints);
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut xs = Vec::with_capacity(points.len());
        for p in points {
            let x = self.from_u64(u64::from(p.x));
            if x.is_zero() {
                return Err(FieldError::ZeroAbscissa);
            }
            if !seen.insert(x.clone()) {
                return Err(FieldError::DuplicateAbscissa(p.x));
            }
            xs.push(x);
        }
        Ok(xs)
    }

    /// Fixed-width big-endian encoding, `encoded_len()` bytes.
    pub fn encode(&self, a: &FieldElement) -> Vec<u8> {
        let raw = a.0.to_bytes_be();
        let mut out = vec![0u8; self.encoded_len];
        out[self.encoded_len - raw.len()..].copy_from_slice(&raw);
        out
    }

    pub fn decode(&self, bytes: &[u8]) -> Result<FieldElement, FieldError> {
        if bytes.len() != self.encoded_len {
            return Err(FieldError::BadEncodingLength {
                expected: self.encoded_len,
                actual: bytes.len(),
            });
        }
        self.element(BigUint::from_bytes_be(bytes))
    }

    /// Injects a 32-byte string as a big-endian integer. Requires p > 2^256.
    pub fn embed_bytes32(&self, bytes: &[u8; 32]) -> FieldElement {
        debug_assert!(self.bits > 256, "field too small to embed 32 bytes");
        self.reduce(BigUint::from_bytes_be(bytes))
    }

    /// Inverse of [`Field::embed_bytes32`]; `None` when the value is >= 2^256.
    pub fn extract_bytes32(&self, a: &FieldElement) -> Option<[u8; 32]> {
        if a.0.bits() > 256 {
            return None;
        }
        let raw = a.0.to_bytes_be();
        let mut out = [0u8; 32];
        out[32 - raw.len()..].copy_from_slice(&raw);
        Some(out)
    }
}
