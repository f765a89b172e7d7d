//! Link performance abstraction for interference-aware MIMO-OFDM receivers.
//!
//! Predicts the instantaneous block-error rate of a maximum-likelihood
//! interference-aware receiver by combining the post-MMSE SINR lower bound
//! and the genie-aided interference-free upper bound per spatial layer,
//! with a combining weight that adapts to the instantaneous
//! interference-to-signal ratio (ISR). The crate also ships the machinery
//! needed to train and validate that model end to end:
//!
//! - [`numerics`]: small dense complex-matrix primitives.
//! - [`channels`]: seeded Rayleigh-fading two-cell channel realizations.
//! - [`constellation`]: Gray-labeled square QAM constellations.
//! - [`mib`]: AWGN mutual-information-per-bit curves and their inverses.
//! - [`bounds`]: per-layer MMSE / interference-free SINR bounds and ISR.
//! - [`oracle`]: exact (Monte-Carlo) post-MLD MIB and optimal combining ratio.
//! - [`abstraction`]: the BLER prediction pipeline (bound combining, MMIB,
//!   effective SINR, AWGN lookup).
//! - [`lls`]: a desk-scale BICM link-level simulator with a max-log joint
//!   ML demodulator, used for measured BLER and AWGN reference curves.
//! - [`training`]: directed-search fitting of the adaptive weight model
//!   against measured BLER.
//! - [`cli`]: reproducible command-line pipelines over flat files.

pub mod abstraction;
pub mod bounds;
pub mod channels;
pub mod cli;
pub mod constellation;
pub mod io;
pub mod lls;
pub mod mib;
pub mod numerics;
pub mod oracle;
pub mod training;

pub(crate) mod util;
