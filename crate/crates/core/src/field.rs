//! Elements of the BN254 scalar field, the 254-bit prime field every
//! commitment, key and tree node lives in.

use std::cmp::Ordering;
use std::fmt;

use ark_bn254::Fr;
use ark_ff::{BigInteger, PrimeField, UniformRand, Zero};
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("encoding is not a canonical field element (value >= p)")]
    NonCanonical,
    #[error("expected 32 bytes, got {0}")]
    BadLength(usize),
}

/// A canonical element of F_p, p the BN254 scalar modulus.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FieldElement(pub(crate) Fr);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(ark_ff::MontFp!("0"));
    pub const ONE: FieldElement = FieldElement(ark_ff::MontFp!("1"));

    pub fn from_u64(v: u64) -> Self {
        FieldElement(Fr::from(v))
    }

    /// Signed embedding: negative values map to `p - |v|`.
    pub fn from_i64(v: i64) -> Self {
        if v >= 0 {
            Self::from_u64(v as u64)
        } else {
            FieldElement(-Fr::from(v.unsigned_abs()))
        }
    }

    pub fn from_i128(v: i128) -> Self {
        let mag = Fr::from(v.unsigned_abs());
        if v >= 0 {
            FieldElement(mag)
        } else {
            FieldElement(-mag)
        }
    }

    /// Strict decoding; values `>= p` are rejected.
    pub fn from_be_bytes(bytes: &[u8; 32]) -> Result<Self, FieldError> {
        let mut limbs = [0u64; 4];
        for (i, limb) in limbs.iter_mut().enumerate() {
            let start = 32 - 8 * (i + 1);
            *limb = u64::from_be_bytes(bytes[start..start + 8].try_into().expect("8 bytes"));
        }
        Fr::from_bigint(ark_ff::BigInt::new(limbs))
            .map(FieldElement)
            .ok_or(FieldError::NonCanonical)
    }

    pub fn from_be_slice(bytes: &[u8]) -> Result<Self, FieldError> {
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| FieldError::BadLength(bytes.len()))?;
        Self::from_be_bytes(&arr)
    }

    /// Interprets arbitrary bytes as a big-endian integer reduced mod p.
    pub fn from_be_bytes_reduced(bytes: &[u8]) -> Self {
        FieldElement(Fr::from_be_bytes_mod_order(bytes))
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        let v = self.0.into_bigint().to_bytes_be();
        let mut out = [0u8; 32];
        out[32 - v.len()..].copy_from_slice(&v);
        out
    }

    /// Least significant 64 bits of the canonical integer.
    pub fn low_u64(&self) -> u64 {
        self.0.into_bigint().0[0]
    }

    /// Returns the value as `u64` when it fits.
    pub fn to_u64(&self) -> Option<u64> {
        let limbs = self.0.into_bigint().0;
        if limbs[1..].iter().all(|l| *l == 0) {
            Some(limbs[0])
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Uniform element (rejection sampling inside arkworks).
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut adapter = RngAdapter(rng);
        FieldElement(Fr::rand(&mut adapter))
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(66);
        s.push_str("0x");
        for b in self.to_be_bytes() {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn to_decimal(&self) -> String {
        self.0.into_bigint().to_string()
    }
}

// arkworks wants a sized `Rng`; this lets callers pass `&mut dyn RngCore`.
struct RngAdapter<'a, R: RngCore + ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

impl PartialOrd for FieldElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FieldElement {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.into_bigint().cmp(&other.0.into_bigint())
    }
}

impl From<u64> for FieldElement {
    fn from(v: u64) -> Self {
        Self::from_u64(v)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fe({})", self.to_hex())
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for FieldElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_be_bytes().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FieldElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let bytes = <[u8; 32]>::deserialize(deserializer)?;
        FieldElement::from_be_bytes(&bytes).map_err(serde::de::Error::custom)
    }
}

impl std::ops::Add for FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: FieldElement) -> FieldElement {
        FieldElement(self.0 + rhs.0)
    }
}

impl std::ops::Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: FieldElement) -> FieldElement {
        FieldElement(self.0 - rhs.0)
    }
}

impl std::ops::Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: FieldElement) -> FieldElement {
        FieldElement(self.0 * rhs.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    // BN254 scalar modulus, big-endian.
    const MODULUS_HEX: &str = "30644e72e131a029b85045b68181585d2833e84879b9709143e1f593f0000001";

    fn modulus_bytes() -> [u8; 32] {
        let mut out = [0u8; 32];
        for i in 0..32 {
            out[i] = u8::from_str_radix(&MODULUS_HEX[2 * i..2 * i + 2], 16).unwrap();
        }
        out
    }

    #[test]
    fn modulus_is_rejected_and_p_minus_one_accepted() {
        let p = modulus_bytes();
        assert_eq!(FieldElement::from_be_bytes(&p), Err(FieldError::NonCanonical));
        let mut pm1 = p;
        pm1[31] -= 1;
        let fe = FieldElement::from_be_bytes(&pm1).unwrap();
        assert_eq!(fe, FieldElement::from_i64(-1));
        assert_eq!(fe.to_be_bytes(), pm1);
    }

    #[test]
    fn byte_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = FieldElement::random(&mut rng);
            assert_eq!(FieldElement::from_be_bytes(&a.to_be_bytes()).unwrap(), a);
        }
    }

    #[test]
    fn reduced_256_bit_input_is_canonical() {
        let reduced = FieldElement::from_be_bytes_reduced(&[0xff; 32]);
        assert!(FieldElement::from_be_bytes(&reduced.to_be_bytes()).is_ok());
        assert!(reduced.to_be_bytes() < modulus_bytes());
    }

    #[test]
    fn signed_embedding() {
        assert_eq!(FieldElement::from_i64(-7).0 + Fr::from(7u64), Fr::zero());
        assert_eq!(FieldElement::from_i128(-7), FieldElement::from_i64(-7));
        assert_eq!(FieldElement::from_i64(5).to_u64(), Some(5));
        assert_eq!(FieldElement::from_i64(-5).to_u64(), None);
    }

    #[test]
    fn ordering_matches_integer_order() {
        assert!(FieldElement::from_u64(3) < FieldElement::from_u64(4));
        assert!(FieldElement::from_u64(u64::MAX) < FieldElement::from_i64(-1));
    }
}
