//! Library surface behind the `mshift` binary: the JSON job-spec format,
//! the built-in fixtures, and the command dispatcher. Exposed so the test
//! suites can drive the same code paths in process.

pub mod fixtures;
pub mod job;
pub mod run;
