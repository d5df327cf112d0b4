//! Simulator for guarded token transfers whose guards may be claims endorsed
//! by oracles. Blocks are appended to a token-gated block tree; a claimed
//! guard that contradicts the claims already on the chain is refused with a
//! checkable discord certificate naming the accountable authorities.

pub mod batch;
pub mod blocktree;
pub mod certificate;
pub mod digest;
pub mod lang;
pub mod logic;
pub mod runtime;
pub mod validator;
pub mod workload;
