//! A tabular laboratory for multi-objective MDP policy optimization.
//!
//! One finite MDP carries `m` reward functions; the crate optimizes the
//! resulting value vector under smooth scalarization, explicit constraints,
//! or a max-min trade-off. All three criteria share the same engine: an
//! anchor-changing regularized natural policy gradient whose inner loop is a
//! closed-form mirror step in logit space.
//!
//! Besides the three drivers ([`algorithms`]) there are three classic
//! baselines ([`baselines`]) built on the identical NPG step, independent
//! ground-truth solvers ([`oracle`]), a generative-model mode that replaces
//! exact evaluation with seeded Monte-Carlo estimates ([`sampling`]), and a
//! config-to-CSV experiment harness ([`harness`], also exposed as the
//! `arnpg` binary).
//!
//! Everything is exact, dense, and deterministic: dense LU for policy
//! evaluation, a dense simplex for the LPs, ChaCha8 for every random draw.
//! The [`guide`] module mirrors the mdbook under `book/`, so the narrative
//! documentation compiles as doctests.

pub mod error;

pub mod mdp;
pub mod policy;

pub mod inner_loop;
pub mod criteria;
pub mod record;
pub mod algorithms;
pub mod baselines;

pub mod oracle;
pub mod sampling;

pub mod checks;
pub mod harness;

/// The book chapters, included verbatim so their examples stay compiling.
pub mod guide {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub mod overview {}

    #[doc = include_str!("../../../book/src/mdps-and-occupancy.md")]
    pub mod mdps_and_occupancy {}

    #[doc = include_str!("../../../book/src/inner-loop.md")]
    pub mod inner_loop {}

    #[doc = include_str!("../../../book/src/algorithms.md")]
    pub mod algorithms {}

    #[doc = include_str!("../../../book/src/oracles.md")]
    pub mod oracles {}

    #[doc = include_str!("../../../book/src/sampling.md")]
    pub mod sampling {}

    #[doc = include_str!("../../../book/src/harness.md")]
    pub mod harness {}
}
