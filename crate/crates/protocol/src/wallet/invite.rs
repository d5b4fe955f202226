//! One-time-key invite links for onboarding users with no pool funds.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;

use shieldpool_core::crypto::{random_field_element, EncKeypair, SpendKeypair};
use shieldpool_core::FieldElement;

use super::{find_notes, Recipient, Wallet, WalletError, WalletResult};
use crate::ledger::Ledger;

const LINK_VERSION: u8 = 1;
const LINK_LEN: usize = 1 + 32 + 8 + 32;

/// Carries the one-time spend secret; anyone holding it can redeem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InviteLink {
    pub otk_sk: FieldElement,
    pub amount: u64,
    pub genesis: [u8; 32],
}

impl InviteLink {
    /// base64url of `version ∥ otk_sk ∥ amount ∥ genesis`.
    pub fn encode(&self) -> String {
        let mut raw = Vec::with_capacity(LINK_LEN);
        raw.push(LINK_VERSION);
        raw.extend_from_slice(&self.otk_sk.to_be_bytes());
        raw.extend_from_slice(&self.amount.to_be_bytes());
        raw.extend_from_slice(&self.genesis);
        URL_SAFE_NO_PAD.encode(raw)
    }

    pub fn decode(s: &str) -> WalletResult<InviteLink> {
        let bad = |m: &str| WalletError::InvalidLink(m.to_string());
        let raw = URL_SAFE_NO_PAD.decode(s.trim()).map_err(|_| bad("not base64url"))?;
        if raw.len() != LINK_LEN {
            return Err(bad("wrong length"));
        }
        if raw[0] != LINK_VERSION {
            return Err(bad("unknown version"));
        }
        let otk_sk = FieldElement::from_be_slice(&raw[1..33]).map_err(|_| bad("key out of range"))?;
        Ok(InviteLink {
            otk_sk,
            amount: u64::from_be_bytes(raw[33..41].try_into().expect("8")),
            genesis: raw[41..].try_into().expect("32"),
        })
    }

    pub fn keys(&self) -> (SpendKeypair, EncKeypair) {
        (SpendKeypair::from_secret(self.otk_sk), EncKeypair::from_spend_secret(&self.otk_sk))
    }
}

impl Wallet {
    /// Pays `amount` to a fresh one-time key and returns the link.
    pub fn onboard_invite(&mut self, ledger: &mut Ledger, amount: u64) -> WalletResult<InviteLink> {
        let otk_sk = random_field_element(&mut self.rng);
        let link = InviteLink {
            otk_sk,
            amount,
            genesis: ledger.genesis_id(),
        };
        let (spend, enc) = link.keys();
        self.transfer(
            ledger,
            &Recipient {
                spend_pk: spend.pk,
                enc_pk: enc.public,
            },
            amount,
        )?;
        Ok(link)
    }

    /// Creates and registers a wallet, then sweeps the invite's notes into it.
    pub fn redeem_invite(link: &str, ledger: &mut Ledger, seed: u64, address: &str) -> WalletResult<Wallet> {
        let link = InviteLink::decode(link)?;
        if link.genesis != ledger.genesis_id() {
            return Err(WalletError::InvalidLink("different ledger".into()));
        }
        let (spend, enc) = link.keys();
        let found = find_notes(ledger, &spend, &enc);
        if found.is_empty() {
            return Err(WalletError::InvalidLink("no funds under this key".into()));
        }
        let live: Vec<_> = found.into_iter().filter(|n| !n.spent).collect();
        if live.is_empty() {
            return Err(WalletError::LinkAlreadyRedeemed);
        }
        let mut w = Wallet::create(seed, address, ledger)?;
        w.scan(ledger);
        for chunk in live.chunks(16) {
            w.sweep_notes(ledger, chunk)?;
        }
        w.scan(ledger);
        Ok(w)
    }
}
