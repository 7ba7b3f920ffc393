//! Instance files and seeded instance generators.

mod generator;
mod instance;

pub use generator::{random_instance, GeneratorConfig, Topology, ValueModel};
pub use instance::{
    instance_from_file, parse_instance, serialize_instance, to_file, BuyerEntry, Instance,
    InstanceFile, IoError,
};
