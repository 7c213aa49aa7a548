//! File formats, reports and the command-line front end for `posg-core`.

pub mod cli;
pub mod io;
pub mod report;
pub mod table;
