//! File formats, the simulation harness and the command line built on
//! [`avppi_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod sim;
