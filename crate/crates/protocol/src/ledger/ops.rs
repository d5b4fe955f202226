//! User operations, two-level nonces and op signatures.

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};

use shieldpool_core::crypto::{Ciphertext, EncPublicKey};
use shieldpool_core::statements::Proof;
use shieldpool_core::utxo::JoinSplitTx;
use shieldpool_core::FieldElement;

/// An account is identified by its op-signing verifying key.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AccountId(pub [u8; 32]);

impl AccountId {
    pub fn of(key: &SigningKey) -> Self {
        AccountId(key.verifying_key().to_bytes())
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl std::fmt::Debug for AccountId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AccountId({}..)", &self.to_hex()[..8])
    }
}

pub const NONCE_KEY_LEN: usize = 24;

/// 256-bit nonce `(key << 64) | seq` with a 192-bit key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Nonce {
    pub key: [u8; NONCE_KEY_LEN],
    pub seq: u64,
}

impl Nonce {
    pub fn new(key: u64, seq: u64) -> Self {
        let mut k = [0u8; NONCE_KEY_LEN];
        k[NONCE_KEY_LEN - 8..].copy_from_slice(&key.to_be_bytes());
        Nonce { key: k, seq }
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        out[..NONCE_KEY_LEN].copy_from_slice(&self.key);
        out[NONCE_KEY_LEN..].copy_from_slice(&self.seq.to_be_bytes());
        out
    }

    pub fn from_be_bytes(bytes: [u8; 32]) -> Self {
        Nonce {
            key: bytes[..NONCE_KEY_LEN].try_into().expect("24"),
            seq: u64::from_be_bytes(bytes[NONCE_KEY_LEN..].try_into().expect("8")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Call {
    RegisterUser {
        spend_pk: FieldElement,
        enc_pk: EncPublicKey,
        address: String,
    },
    BootstrapInit {
        commitment_proof: Proof,
        depositor_enc: EncPublicKey,
    },
    BootstrapData {
        authority_proof: Proof,
    },
    Deposit {
        tx: JoinSplitTx,
        deposit_proof: Proof,
        joinsplit_proof: Proof,
    },
    /// Internal transfer. With `output_lock` set to the burn or treasury key
    /// the compliance proofs are waived.
    Transact {
        tx: JoinSplitTx,
        acc_proofs: Vec<Proof>,
        poi_proof: Option<Proof>,
        joinsplit_proof: Proof,
        output_lock: Option<FieldElement>,
    },
    Withdraw {
        tx: JoinSplitTx,
        acc_proofs: Vec<Proof>,
        poi_proof: Proof,
        joinsplit_proof: Proof,
        recipient: String,
    },
    SmtFlag {
        masked: FieldElement,
        bloom_hash: FieldElement,
        mask_proof: Proof,
    },
    InsertEncryptedData {
        blob: Ciphertext,
    },
}

impl Call {
    pub fn name(&self) -> &'static str {
        match self {
            Call::RegisterUser { .. } => "register_user",
            Call::BootstrapInit { .. } => "bootstrap_init",
            Call::BootstrapData { .. } => "bootstrap_data",
            Call::Deposit { .. } => "deposit",
            Call::Transact { .. } => "transact",
            Call::Withdraw { .. } => "withdraw",
            Call::SmtFlag { .. } => "smt_flag",
            Call::InsertEncryptedData { .. } => "insert_encrypted_data",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserOp {
    pub sender: AccountId,
    pub nonce: Nonce,
    pub call: Call,
    pub signature: Vec<u8>,
}

const SIGN_DOMAIN: &[u8] = b"shieldpool/userop/v1";

fn signing_bytes(sender: &AccountId, nonce: &Nonce, call: &Call) -> Vec<u8> {
    let mut out = SIGN_DOMAIN.to_vec();
    out.extend_from_slice(&sender.0);
    out.extend_from_slice(&nonce.to_be_bytes());
    out.extend_from_slice(&bincode::serialize(call).expect("calls serialize"));
    out
}

impl UserOp {
    pub fn sign(key: &SigningKey, nonce: Nonce, call: Call) -> Self {
        let sender = AccountId::of(key);
        let signature = key.sign(&signing_bytes(&sender, &nonce, &call)).to_bytes().to_vec();
        UserOp {
            sender,
            nonce,
            call,
            signature,
        }
    }

    pub fn verify_signature(&self) -> bool {
        let Ok(vk) = VerifyingKey::from_bytes(&self.sender.0) else {
            return false;
        };
        let Ok(sig) = Signature::from_slice(&self.signature) else {
            return false;
        };
        vk.verify(&signing_bytes(&self.sender, &self.nonce, &self.call), &sig).is_ok()
    }
}
