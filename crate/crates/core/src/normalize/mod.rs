//! Control-flow normalization: loop lifting, topological order, SSA.

pub mod dom;
pub mod lift;
pub mod ssa;
pub mod topo;

pub use dom::{dominator_sets, dominators};
pub use lift::lift_loops;
pub use ssa::to_ssa;
pub use topo::{topo_indices, topo_sort};
