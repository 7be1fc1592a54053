//! Rational closure reasoning for EL-bottom knowledge bases with defeasible
//! subsumptions and nominals.

pub mod elcore;
pub mod model;
pub mod normalize;
pub mod parse;
pub mod rc;
pub mod inet;
pub mod nominals;
pub mod oracle;
