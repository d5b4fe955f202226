//! Address book entries stored on-ledger as self-encrypted blobs.

use serde::{Deserialize, Serialize};

use shieldpool_core::codec::{put_prefixed, Reader};
use shieldpool_core::crypto::{encrypt, EncPublicKey};

use super::{Wallet, WalletResult};
use crate::ledger::{AccountId, Call, Ledger, Receipt};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contact {
    pub name: String,
    pub account: AccountId,
    pub enc_pk: EncPublicKey,
}

impl Contact {
    /// `len(4) ∥ name ∥ account(32) ∥ enc_pk(32)`
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(68 + self.name.len());
        put_prefixed(&mut out, self.name.as_bytes());
        out.extend_from_slice(&self.account.0);
        out.extend_from_slice(&self.enc_pk.0);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Contact, String> {
        let mut r = Reader::new(bytes);
        let name = String::from_utf8(r.prefixed()?.to_vec()).map_err(|e| e.to_string())?;
        let account = AccountId(r.array::<32>()?);
        let enc_pk = EncPublicKey(r.array::<32>()?);
        r.finish()?;
        Ok(Contact { name, account, enc_pk })
    }
}

impl Wallet {
    /// Posts `contact` encrypted to this wallet's own key.
    pub fn post_contact(&mut self, ledger: &mut Ledger, contact: &Contact) -> WalletResult<Receipt> {
        let me = self.enc.public;
        self.share_contact(ledger, contact, &me)
    }

    /// Posts `contact` encrypted to `peer`; only `peer` can read it.
    pub fn share_contact(&mut self, ledger: &mut Ledger, contact: &Contact, peer: &EncPublicKey) -> WalletResult<Receipt> {
        let blob = encrypt(peer, &contact.encode(), &mut self.rng);
        Ok(self.submit(ledger, Call::InsertEncryptedData { blob })?)
    }

    pub fn sync_contacts(&mut self, ledger: &Ledger) -> &[Contact] {
        self.scan(ledger);
        &self.contacts
    }
}
