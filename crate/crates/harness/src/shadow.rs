//! Independent bookkeeping of value entering and leaving the pool.

use serde::Serialize;

use shieldpool_protocol::ledger::{Call, Ledger, LedgerInput};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Shadow {
    /// Σ public amounts of accepted pool operations.
    pub pool: i128,
    pub accepted: u64,
    pub deposits: u64,
    pub withdrawals: u64,
}

impl Shadow {
    pub fn observe(&mut self, call: &Call) {
        let public = match call {
            Call::Deposit { tx, .. } => {
                self.deposits += 1;
                tx.public_amount
            }
            Call::Withdraw { tx, .. } => {
                self.withdrawals += 1;
                tx.public_amount
            }
            Call::Transact { tx, .. } => tx.public_amount,
            _ => return,
        };
        self.accepted += 1;
        self.pool += public as i128;
    }

    /// Records the most recent single-op batch; call only after it was accepted.
    pub fn observe_last(&mut self, ledger: &Ledger) {
        if let Some(LedgerInput::Ops(ops)) = ledger.inputs().last() {
            for op in ops {
                self.observe(&op.call);
            }
        }
    }

    /// Ledger pool balance minus the shadow total; zero when books agree.
    pub fn delta(&self, ledger: &Ledger) -> i128 {
        ledger.pool_balance() as i128 - self.pool
    }
}
