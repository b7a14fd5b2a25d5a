//! File formats, batch evaluation, the labeling service and the command-line
//! front end around [`pathfinder_core`].

pub mod cli;
pub mod depth_io;
pub mod eval;
pub mod pipeline;
pub mod service;
pub mod store;
