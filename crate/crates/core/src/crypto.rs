//! Hashing, key derivation, authenticated public-key encryption and the
//! injectable randomness used by every protocol step.

use crypto_box::aead::Aead;
use crypto_box::{PublicKey, SalsaBox, SecretKey};
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::field::FieldElement;
use crate::poseidon;

pub const MAX_HASH_ARITY: usize = poseidon::MAX_WIDTH - 1;

/// Deterministic protocol RNG. Every scenario seeds one of these.
pub type ProtocolRng = ChaCha20Rng;

pub fn seeded_rng(seed: u64) -> ProtocolRng {
    ChaCha20Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("hash arity {0} outside 1..=16")]
    InvalidArity(usize),
    #[error("decryption failed")]
    DecryptionFailure,
    #[error("malformed ciphertext")]
    MalformedCiphertext,
}

/// Poseidon over 1..=16 field elements.
pub fn zk_hash(inputs: &[FieldElement]) -> Result<FieldElement, CryptoError> {
    if inputs.is_empty() || inputs.len() > MAX_HASH_ARITY {
        return Err(CryptoError::InvalidArity(inputs.len()));
    }
    Ok(poseidon::hash(inputs))
}

/// Fixed-arity form of [`zk_hash`]; the arity is checked at compile time.
pub fn hash_n<const N: usize>(inputs: [FieldElement; N]) -> FieldElement {
    const { assert!(N >= 1 && N <= MAX_HASH_ARITY) };
    poseidon::hash(&inputs)
}

/// Sponge over the width-3 permutation for sequences of any length.
/// The capacity word is initialised with the sequence length.
pub fn hash_sequence(items: &[FieldElement]) -> FieldElement {
    use ark_bn254::Fr;
    let p = poseidon::params(3);
    let mut state = [Fr::from(items.len() as u64), Fr::from(0u64), Fr::from(0u64)];
    for chunk in items.chunks(2) {
        state[1] += chunk[0].0;
        if let Some(second) = chunk.get(1) {
            state[2] += second.0;
        }
        p.permute(&mut state);
    }
    if items.is_empty() {
        p.permute(&mut state);
    }
    FieldElement(state[1])
}

/// Packs bytes into 31-byte big-endian limbs and hashes them with the
/// sponge; the byte length enters as the first absorbed word.
pub fn hash_bytes_to_field(bytes: &[u8]) -> FieldElement {
    let mut items = Vec::with_capacity(bytes.len() / 31 + 2);
    items.push(FieldElement::from_u64(bytes.len() as u64));
    items.extend(bytes.chunks(31).map(FieldElement::from_be_bytes_reduced));
    hash_sequence(&items)
}

pub fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

pub fn derive_public_key(sk: &FieldElement) -> FieldElement {
    hash_n([*sk])
}

pub fn random_field_element<R: RngCore + ?Sized>(rng: &mut R) -> FieldElement {
    FieldElement::random(rng)
}

pub fn random_bytes<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    let mut out = vec![0u8; n];
    rng.fill_bytes(&mut out);
    out
}

/// 256 random bits reduced into the field (blinding factors).
pub fn random_blinding<R: RngCore + ?Sized>(rng: &mut R) -> FieldElement {
    let mut b = [0u8; 32];
    rng.fill_bytes(&mut b);
    FieldElement::from_be_bytes_reduced(&b)
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpendKeypair {
    pub sk: FieldElement,
    pub pk: FieldElement,
}

impl SpendKeypair {
    pub fn from_secret(sk: FieldElement) -> Self {
        SpendKeypair {
            pk: derive_public_key(&sk),
            sk,
        }
    }

    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        Self::from_secret(random_field_element(rng))
    }
}

impl std::fmt::Debug for SpendKeypair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpendKeypair").field("pk", &self.pk).finish_non_exhaustive()
    }
}

/// X25519 public key of the box scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EncPublicKey(pub [u8; 32]);

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncKeypair {
    secret: [u8; 32],
    pub public: EncPublicKey,
}

impl EncKeypair {
    pub fn from_secret(secret: [u8; 32]) -> Self {
        let pk = SecretKey::from_bytes(secret).public_key();
        EncKeypair {
            secret,
            public: EncPublicKey(pk.to_bytes()),
        }
    }

    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut secret = [0u8; 32];
        rng.fill_bytes(&mut secret);
        Self::from_secret(secret)
    }

    /// Encryption key bound to a spend secret, as used for one-time keys.
    pub fn from_spend_secret(sk: &FieldElement) -> Self {
        Self::from_secret(sk.to_be_bytes())
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.secret
    }

    pub fn decrypt(&self, ct: &Ciphertext) -> Result<Vec<u8>, CryptoError> {
        decrypt(self, ct)
    }
}

impl std::fmt::Debug for EncKeypair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EncKeypair").field("public", &self.public).finish_non_exhaustive()
    }
}

pub const EPHEMERAL_LEN: usize = 32;
pub const NONCE_LEN: usize = 24;
pub const TAG_LEN: usize = 16;

/// Randomness consumed by one encryption: ephemeral X25519 secret and
/// XSalsa20 nonce. Keeping it explicit lets a prover re-encrypt to show a
/// ciphertext is well formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncRandomness {
    pub ephemeral: [u8; 32],
    pub nonce: [u8; NONCE_LEN],
}

impl EncRandomness {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut ephemeral = [0u8; 32];
        let mut nonce = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut ephemeral);
        rng.fill_bytes(&mut nonce);
        EncRandomness { ephemeral, nonce }
    }
}

/// `ephemeral_pk(32) ∥ nonce(24) ∥ box(plaintext ∥ tag)`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ciphertext(pub Vec<u8>);

impl Ciphertext {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `len(4, BE) ∥ bytes`.
    pub fn to_length_prefixed(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.0.len());
        out.extend_from_slice(&(self.0.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.0);
        out
    }
}

impl std::fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Ciphertext({} bytes)", self.0.len())
    }
}

pub fn encrypt_with(recipient: &EncPublicKey, plaintext: &[u8], randomness: &EncRandomness) -> Ciphertext {
    let eph = SecretKey::from_bytes(randomness.ephemeral);
    let eph_pk = eph.public_key();
    let salsa = SalsaBox::new(&PublicKey::from_bytes(recipient.0), &eph);
    let body = salsa
        .encrypt(&randomness.nonce.into(), plaintext)
        .expect("xsalsa20poly1305 encryption is infallible for in-memory buffers");
    let mut out = Vec::with_capacity(EPHEMERAL_LEN + NONCE_LEN + body.len());
    out.extend_from_slice(eph_pk.as_bytes());
    out.extend_from_slice(&randomness.nonce);
    out.extend_from_slice(&body);
    Ciphertext(out)
}

pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(
    recipient: &EncPublicKey,
    plaintext: &[u8],
    rng: &mut R,
) -> Ciphertext {
    encrypt_with(recipient, plaintext, &EncRandomness::generate(rng))
}

pub fn decrypt(keys: &EncKeypair, ct: &Ciphertext) -> Result<Vec<u8>, CryptoError> {
    let bytes = &ct.0;
    if bytes.len() < EPHEMERAL_LEN + NONCE_LEN + TAG_LEN {
        return Err(CryptoError::MalformedCiphertext);
    }
    let eph_pk: [u8; 32] = bytes[..EPHEMERAL_LEN].try_into().expect("32 bytes");
    // X25519 ignores the top bit; accepting it would make ciphertexts malleable.
    if eph_pk[31] & 0x80 != 0 {
        return Err(CryptoError::MalformedCiphertext);
    }
    let nonce: [u8; NONCE_LEN] = bytes[EPHEMERAL_LEN..EPHEMERAL_LEN + NONCE_LEN]
        .try_into()
        .expect("24 bytes");
    let salsa = SalsaBox::new(&PublicKey::from_bytes(eph_pk), &SecretKey::from_bytes(keys.secret));
    salsa
        .decrypt(&nonce.into(), &bytes[EPHEMERAL_LEN + NONCE_LEN..])
        .map_err(|_| CryptoError::DecryptionFailure)
}
