//! Exact verification of Pufferfish and differential privacy for randomized
//! mechanisms expressed as hidden Markov models.
//!
//! The toolkit compares the probability of every observation sequence under
//! two initial information states and reports sequences whose probabilities
//! differ by more than a factor `c = e^ε`. Concrete models are checked with
//! exact integer arithmetic; parametric models are encoded as SMT queries.

pub mod algebra;
pub mod bound;
pub mod hmm;
pub mod mechanisms;
pub mod sat;
pub mod scenario;
pub mod smt;
pub mod stat;
pub mod verifier;
