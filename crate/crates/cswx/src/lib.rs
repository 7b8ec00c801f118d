//! Standard-library companion of `cswx-core`: file formats, parallel
//! distance matrices, oracle suites with timeouts, runtime benchmarks and the
//! `cswx` command line.

pub mod bench;
pub mod cli;
pub mod io;
pub mod parallel;
pub mod suites;
