//! Library side of the command-line tool: benchmark machinery shared by
//! the binary and the acceptance suite.

pub mod bench;
