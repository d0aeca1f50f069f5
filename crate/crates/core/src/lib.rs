//! Iterative, trace-driven automated program repair for `.mini` programs.
//!
//! The pipeline: run the failing tests under instrumentation ([`tracer`]),
//! build a structured repair prompt ([`promptkit`]), obtain a candidate from a
//! generator ([`patchgen`]), check it against the test suite ([`validator`]),
//! and drive the whole thing with a layered breadth/depth search ([`lpr`]).

pub mod minilang;
pub mod tracer;
pub mod corpus;
pub mod patchgen;
pub mod promptkit;
pub mod validator;
pub mod lpr;
pub mod cli;
