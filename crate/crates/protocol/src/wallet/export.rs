//! Passphrase-encrypted wallet backups.

use std::sync::Arc;

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use ed25519_dalek::SigningKey;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

use shieldpool_core::bloom::{BloomParams, RateLimitConfig};
use shieldpool_core::crypto::{random_bytes, Ciphertext, EncKeypair, ProtocolRng, SpendKeypair};
use shieldpool_core::smt::SparseTree;
use shieldpool_core::statements::{smt_key, TransparentBackend};
use shieldpool_core::utxo::Utxo;
use shieldpool_core::FieldElement;

use super::{Contact, FlaggedEntry, OwnedNote, Wallet};

const MAGIC: &[u8; 4] = b"SPW1";
const SALT_LEN: usize = 16;
const NONCE_LEN: usize = 12;
const KDF_ROUNDS: u32 = 100_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExportError {
    #[error("not a wallet backup")]
    BadFormat,
    #[error("wrong passphrase or corrupted backup")]
    Decrypt,
    #[error("backup contents malformed: {0}")]
    Corrupt(String),
}

#[derive(Serialize, Deserialize)]
struct WalletState {
    signing: [u8; 32],
    spend_sk: FieldElement,
    enc: EncKeypair,
    address: String,
    params: BloomParams,
    rate: RateLimitConfig,
    notes: Vec<OwnedNote>,
    cursor: usize,
    contacts: Vec<Contact>,
    flagged: Vec<FlaggedEntry>,
    masked: Option<FieldElement>,
    masked_enc: Option<Ciphertext>,
    bootstrap_note: Option<Utxo>,
    rng_seed: [u8; 32],
    rng_word_pos: u128,
}

fn cipher(passphrase: &str, salt: &[u8]) -> ChaCha20Poly1305 {
    let mut key = [0u8; 32];
    pbkdf2::pbkdf2_hmac::<Sha256>(passphrase.as_bytes(), salt, KDF_ROUNDS, &mut key);
    ChaCha20Poly1305::new(Key::from_slice(&key))
}

impl Wallet {
    /// `magic ∥ salt ∥ nonce ∥ aead(bincode(state))`
    pub fn export(&mut self, passphrase: &str) -> Vec<u8> {
        let salt = random_bytes(&mut self.rng, SALT_LEN);
        let nonce = random_bytes(&mut self.rng, NONCE_LEN);
        let state = WalletState {
            signing: self.signing.to_bytes(),
            spend_sk: self.spend.sk,
            enc: self.enc.clone(),
            address: self.address.clone(),
            params: self.params,
            rate: self.rate,
            notes: self.notes.clone(),
            cursor: self.cursor,
            contacts: self.contacts.clone(),
            flagged: self.flagged.clone(),
            masked: self.masked,
            masked_enc: self.masked_enc.clone(),
            bootstrap_note: self.bootstrap_note.clone(),
            rng_seed: self.rng.get_seed(),
            rng_word_pos: self.rng.get_word_pos(),
        };
        let plain = bincode::serialize(&state).expect("in-memory serialization");
        let sealed = cipher(passphrase, &salt)
            .encrypt(Nonce::from_slice(&nonce), plain.as_slice())
            .expect("encryption is infallible for in-memory buffers");
        let mut out = Vec::with_capacity(4 + SALT_LEN + NONCE_LEN + sealed.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&salt);
        out.extend_from_slice(&nonce);
        out.extend_from_slice(&sealed);
        out
    }

    pub fn import(bytes: &[u8], passphrase: &str) -> Result<Wallet, ExportError> {
        let header = 4 + SALT_LEN + NONCE_LEN;
        if bytes.len() < header || &bytes[..4] != MAGIC {
            return Err(ExportError::BadFormat);
        }
        let salt = &bytes[4..4 + SALT_LEN];
        let nonce = &bytes[4 + SALT_LEN..header];
        let plain = cipher(passphrase, salt)
            .decrypt(Nonce::from_slice(nonce), &bytes[header..])
            .map_err(|_| ExportError::Decrypt)?;
        let s: WalletState = bincode::deserialize(&plain).map_err(|e| ExportError::Corrupt(e.to_string()))?;

        let mut smt = SparseTree::new();
        for f in &s.flagged {
            smt.insert(smt_key(&f.masked), f.bloom_hash)
                .map_err(|e| ExportError::Corrupt(e.to_string()))?;
        }
        let mut rng = ProtocolRng::from_seed(s.rng_seed);
        rng.set_word_pos(s.rng_word_pos);
        Ok(Wallet {
            spend: SpendKeypair::from_secret(s.spend_sk),
            enc: s.enc,
            signing: SigningKey::from_bytes(&s.signing),
            address: s.address,
            params: s.params,
            rate: s.rate,
            notes: s.notes,
            cursor: s.cursor,
            contacts: s.contacts,
            flagged: s.flagged,
            smt,
            masked: s.masked,
            masked_enc: s.masked_enc,
            bootstrap_note: s.bootstrap_note,
            rng,
            backend: Arc::new(TransparentBackend),
        })
    }
}
