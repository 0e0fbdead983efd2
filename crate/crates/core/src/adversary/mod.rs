//! Adversarial environment constructions.

mod diagonal;
mod lock;
mod oracle;

pub use diagonal::DiagonalEnvironment;
pub use lock::{fixed_block_pair, part1_pair, part3_pair, BlockRule, LockEnvironment, LockParams, LockVariant};
pub use oracle::{
    ConstantPolicy, Flipped, OracleError, OraclePolicy, PolicyOracle, ProcessOracle, TablePolicy,
};
