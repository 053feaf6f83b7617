pub mod agent;
pub mod api;
pub mod bench;
pub mod config;
pub mod dsl;
pub mod eval;
pub mod par;
pub mod records;
pub mod scene;
pub mod spatial;
