use super::{Proof, Statement, StatementError, Witness};
use crate::crypto::sha256;

const TAG_DOMAIN: &[u8] = b"shieldpool/transparent-attestation/v1";
const TAG_LEN: usize = 32;

/// Produces and checks proofs. Callers only see statements, witnesses and
/// opaque attestation bytes, so a succinct backend can slot in here.
pub trait ProofBackend: Send + Sync {
    fn prove(&self, statement: &Statement, witness: &Witness) -> Result<Proof, StatementError>;
    fn verify(&self, proof: &Proof) -> bool;
}

/// Attestation is the serialized witness followed by a digest over
/// (statement, witness); verification re-runs the predicate. Provides
/// soundness and completeness but no privacy.
#[derive(Debug, Clone, Copy, Default)]
pub struct TransparentBackend;

pub(super) fn tag(statement: &Statement, witness_bytes: &[u8]) -> [u8; 32] {
    sha256(&[
        TAG_DOMAIN,
        &[statement.id() as u8],
        &statement.encode_public_inputs(),
        witness_bytes,
    ])
}

impl TransparentBackend {
    /// Recovers the embedded witness if the attestation is intact.
    pub fn open(&self, proof: &Proof) -> Option<Witness> {
        let att = &proof.attestation;
        if att.len() < TAG_LEN {
            return None;
        }
        let (body, t) = att.split_at(att.len() - TAG_LEN);
        if tag(&proof.statement, body) != t {
            return None;
        }
        bincode::deserialize(body).ok()
    }
}

impl ProofBackend for TransparentBackend {
    fn prove(&self, statement: &Statement, witness: &Witness) -> Result<Proof, StatementError> {
        if !statement.evaluate(witness)? {
            return Err(StatementError::WitnessUnsatisfied(statement.id()));
        }
        let mut attestation = bincode::serialize(witness).map_err(|e| StatementError::Malformed(e.to_string()))?;
        let t = tag(statement, &attestation);
        attestation.extend_from_slice(&t);
        Ok(Proof {
            statement: statement.clone(),
            attestation,
        })
    }

    fn verify(&self, proof: &Proof) -> bool {
        self.open(proof)
            .map(|w| proof.statement.evaluate(&w) == Ok(true))
            .unwrap_or(false)
    }
}
