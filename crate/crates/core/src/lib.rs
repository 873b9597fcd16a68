//! Multi-stage stochastic integer programs on Markov-chain scenario trees:
//! history aggregation of integer states, SDDP-based branch-and-cut, and
//! two-stage linear decision rules, with a hurricane disaster-relief generator.

pub mod aggregate;
pub mod hdr;
pub mod ldr;
pub mod markov;
pub mod model;
pub mod sddp;
pub mod tree;

pub use mcpolicy_lp as lp;
