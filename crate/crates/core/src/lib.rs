//! Numerical verification of a carpet criterion for rational maps.

pub mod criterion;
pub mod dynamics;
pub mod families;
pub mod geometry;
pub mod numkernel;
pub mod ratmap;
pub mod render;
pub mod solve;

pub use num_complex::Complex64;

pub use families::{FamilyError, FamilySpec};
pub use numkernel::{NumError, Poly, Root};
pub use ratmap::{chordal_distance, MapError, RationalMap, SpherePoint};
