pub mod bench;
pub mod diagram;
pub mod nl;
pub mod pddl;
pub mod proposer;
pub mod search;
pub mod sim;
#[cfg(feature = "sandbox")]
pub mod sandbox;
