#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detection;
pub mod entanglement;
pub mod fock;
pub mod layout;
pub mod protocol;
pub mod rng;
pub mod tomography;
