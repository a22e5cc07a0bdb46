//! Smolyak sparse grids on nested Chebyshev-Gauss-Lobatto nodes.

mod cgl;
mod grid;
mod interp;

pub use cgl::{barycentric_eval, cgl_nodes, node_count, NestedRule1D};
pub(crate) use grid::TermTrie;
pub use grid::{
    asymptotic_count, binomial, build_grid, build_grid_with_cap, count_points, full_grid_count, smolyak_index_set,
    GridCounts, GridStats, MultiIndex, SmolyakGrid, DEFAULT_GRID_CAP, MAX_INTERPOLATION_LEVEL,
};
pub use interp::{basis_vector, EvalScratch, Interpolant};
