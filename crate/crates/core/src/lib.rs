pub mod backend;
pub mod catalog;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod harness;
pub mod library;
pub mod metrics;
pub mod oracle;
pub mod pairs;
pub mod pipeline;
pub mod prompt;
pub mod python;
pub mod seeds;
pub mod util;
