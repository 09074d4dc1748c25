//! Uncoded cache placement for coded caching under nonuniform file popularity.
//!
//! The crate covers three things:
//!
//! * exact delivery rates of the modified coded caching scheme (MCCS), which
//!   skips coded messages addressed only to redundant requesters, and of the
//!   original scheme (CCS), evaluated per demand or averaged over the demand
//!   distribution ([`delivery`], [`closedform`]);
//! * lower bounds on the average rate of any scheme with uncoded placement,
//!   obtained as linear programs ([`bounds`]);
//! * the optimal popularity-first placement for the MCCS, found by searching
//!   the at-most-three-file-group closed forms and certified against a
//!   direct LP ([`optimizer`]).
//!
//! Files are indexed from 0 in decreasing order of popularity. Placement
//! entries `a[n][l]` are the size of each subfile of file `n` that is cached by
//! exactly `l` users (fraction of a file for uniform sizes, bits otherwise).

pub mod bounds;
pub mod closedform;
pub mod combinatorics;
pub mod delivery;
mod error;
pub mod lp;
pub mod model;
pub mod optimizer;

pub use error::{Error, Result};
pub use model::{Demand, DistinctSet, Instance, Placement, PlacementVector, Violation};
