//! Library surface of the command-line tool: the network file format and
//! the shared result-rendering used by the query commands.

pub mod format;
pub mod output;
