//! Fault-tolerant multiparty session global types with timeouts, crashes
//! and thread spawning: terms, coherence checking, a labelled transition
//! semantics, state-space exploration and a small textual front end.

pub mod analysis;
pub mod coherence;
pub mod explorer;
pub mod frontend;
pub mod kernel;
pub mod semantics;
