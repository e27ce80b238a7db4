// SPDX-License-Identifier: MIT OR Apache-2.0

//! Layer-wise linear probing, concept activation vectors and inference-time
//! steering for transformer encoders.
//!
//! The crate ships a synthetic intuitive-physics dataset ([`synthphys`]) and
//! a frozen toy encoder ([`encoder`]) so the whole pipeline runs on a laptop,
//! and reads/writes a plain binary dump format ([`actstore`]) so activations
//! exported from real models can be analysed the same way.
//!
//! ```no_run
//! use physteer::config::RunConfig;
//! use physteer::pipeline::{all, RunDir};
//!
//! let report = all(&RunConfig::default(), &RunDir::new("run")).unwrap();
//! println!("PEZ: {:?}", report.pez.pez_layers);
//! ```

pub mod actstore;
pub mod cli;
pub mod config;
pub mod encoder;
pub mod error;
pub mod evalkit;
pub mod pipeline;
pub mod probekit;
pub mod steer;
pub mod synthphys;
pub mod util;

pub use error::{Error, Result};
