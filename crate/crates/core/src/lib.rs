//! Indoor path loss toolkit.
//!
//! Forward prediction from a site model (free space, log-distance and
//! partition-dependent models) and the inverse analyses that go with it:
//! path loss exponent fitting, partition attenuation estimation and power
//! delay profile statistics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod fitting;
pub mod geometry;
pub mod pdp;
pub mod propagation;
pub mod sitemodel;
