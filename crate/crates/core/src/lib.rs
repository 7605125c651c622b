pub mod config;
pub mod cppn;
pub mod descriptors;
pub mod evolution;
pub mod fluid;
pub mod formats;
pub mod harness;
pub mod lattice;
pub mod phenotype;
pub mod seed;
pub mod stats;
pub mod vec3;
