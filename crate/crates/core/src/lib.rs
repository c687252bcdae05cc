pub mod dataset;
pub mod dsl;
pub mod harness;
pub mod noise;
pub mod semantics;
pub mod synth;
pub mod world;
