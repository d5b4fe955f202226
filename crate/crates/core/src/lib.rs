pub mod bloom;
pub mod codec;
pub mod crypto;
pub mod field;
pub mod merkle;
pub mod poseidon;
pub mod smt;
pub mod statements;
pub mod utxo;

pub use field::FieldElement;
