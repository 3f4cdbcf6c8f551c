#![allow(clippy::needless_range_loop)]

//! File formats and the command-line front end for `kfield-core`.

pub mod cli;
pub mod io;
