//! Polar codes with successive-cancellation (SC), SC-Flip and partitioned
//! SC-Flip (PSCF) decoding.
//!
//! The crate covers the whole pipeline used for decoder research:
//!
//! * [`code`]: Gaussian-approximation construction, frozen/information/CRC
//!   layouts for monolithic and partitioned codes, and polar encoding.
//! * [`crc`]: bit-serial CRC used as the per-partition outer code.
//! * [`channel`]: BPSK over AWGN with channel LLR output.
//! * [`sc`]: the SC kernel with restart support and the genie-aided oracle.
//! * [`flip`]: SC-Flip and PSCF decoders with complexity accounting.
//! * [`planner`]: first-error profiling and partition index selection.
//! * [`sim`]: seeded Monte-Carlo campaigns and CSV/JSON result files.

pub mod channel;
pub mod code;
pub mod crc;
mod error;
pub mod flip;
pub mod planner;
pub mod sc;
pub mod sim;

pub use error::{Error, Result};

/// A hard bit, always 0 or 1.
pub type Bit = u8;

/// Log-likelihood ratio. Positive values favour bit 0.
pub type Llr = f64;
