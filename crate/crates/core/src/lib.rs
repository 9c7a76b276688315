pub mod cli;
pub mod config;
pub mod error;
pub mod fem;
pub mod gradcheck;
pub mod manufacturing;
pub mod material;
pub mod mesh;
pub mod optimizer;
pub mod orientation;
pub mod postprocess;
