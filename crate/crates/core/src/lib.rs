//! A desk-scale laboratory for RANDAO randomness.
//!
//! * [`randao`]: the classic commit-reveal beacon (reveals, XOR mix, seed,
//!   balance-weighted proposer selection, the two-epoch pipeline).
//! * [`adversary`]: the last-revealer attacker and its `2^h` withhold grind.
//! * [`field`] and [`sss`]: prime-field arithmetic and Shamir sharing.
//! * [`protocol_sss`]: RANDAO with Shamir-shared reveals and a rushing
//!   adversary at the reveal phase.
//! * [`harness`]: Monte Carlo driver, sweeps, CSV/JSON output and the CLI.

pub mod adversary;
pub mod field;
pub mod harness;
pub mod protocol_sss;
pub mod randao;
pub mod sss;
