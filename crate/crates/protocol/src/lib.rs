pub mod authority;
pub mod ledger;
pub mod wallet;
