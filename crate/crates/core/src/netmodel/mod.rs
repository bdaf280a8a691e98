//! Grid data model, case files and admittance matrices.

mod case;
mod ybus;

pub use case::{Branch, Bus, BusKind, GeneratorSpec, LoadSpec, NetworkCase};
pub use ybus::{
    augment_load_admittance, build_ybus, partition_ybus, set_block, AdmittanceMatrix, ShuntLoad,
    YPartition,
};
