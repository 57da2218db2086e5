//! Polyhedral functions, cones and polytopes.

mod cone;
mod dd;
mod function;
mod polytope;

pub use cone::{ConeRep, LinSubspace};
pub use function::{ActiveSets, PolyhedralFunction};
pub use polytope::PolytopeRep;
