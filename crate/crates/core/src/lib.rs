//! Ferroelectric FDSOI transistor simulator: stack electrostatics,
//! multi-domain switching, transfer curves, characterization protocols and
//! small circuits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuits;
pub mod cli;
pub mod device;
pub mod electrostatics;
pub mod error;
pub mod params;
pub mod polarization;
pub mod protocols;
pub mod svg;
pub mod table;

pub use error::{Error, Result};
pub use params::{build_device, default_fdsoi22, ConfigMap, DeviceParams, PortId};
