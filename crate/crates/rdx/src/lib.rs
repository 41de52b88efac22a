#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Config files, output formats and the command-line front end for
//! [`rdx_core`].

pub mod cli;
pub mod config;
pub mod output;
