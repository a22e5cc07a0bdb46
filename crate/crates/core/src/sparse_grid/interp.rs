use std::sync::Arc;

use rayon::prelude::*;

use super::grid::{SmolyakGrid, TermLayout};
use crate::error::{Error, Result};

/// Sparse-grid interpolant of nodal data.
///
/// Stored as hierarchical surpluses over the grid points, which is
/// algebraically the Smolyak combination of tensor Lagrange interpolants.
/// When every boundary value is zero, mirror-image boundary terms are merged
/// so that only `compressed_terms()` products are summed per evaluation.
#[derive(Debug, Clone)]
pub struct Interpolant {
    grid: Arc<SmolyakGrid>,
    values: Vec<f64>,
    coefs: Vec<f64>,
    zero_boundary: bool,
}

/// Reusable buffers for repeated evaluation.
#[derive(Debug, Clone)]
pub struct EvalScratch {
    basis: Vec<f64>,
    prefix: Vec<f64>,
}

impl EvalScratch {
    pub fn new(grid: &SmolyakGrid) -> Self {
        Self { basis: vec![0.0; grid.dim() * (grid.basis.n + 1)], prefix: vec![1.0; grid.dim() + 1] }
    }
}

impl Interpolant {
    pub fn fit(grid: Arc<SmolyakGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!("expected {} nodal values, got {}", grid.len(), values.len())));
        }
        let zero_boundary = (0..grid.len()).all(|p| !grid.is_boundary(p) || values[p] == 0.0);
        let surplus = hierarchize(&grid, &values);
        let layout = if zero_boundary { &grid.inner_layout } else { &grid.full_layout };
        let coefs = layout.source.iter().map(|&p| surplus[p as usize]).collect();
        Ok(Self { grid, values, coefs, zero_boundary })
    }

    /// Fit from inner-point values only, boundary values pinned to 0.
    pub fn fit_inner(grid: Arc<SmolyakGrid>, inner_values: &[f64]) -> Result<Self> {
        if inner_values.len() != grid.inner_count() {
            return Err(Error::InvalidInput(format!(
                "expected {} inner values, got {}",
                grid.inner_count(),
                inner_values.len()
            )));
        }
        let mut values = vec![0.0; grid.len()];
        for (&p, &v) in grid.inner_points().iter().zip(inner_values) {
            values[p] = v;
        }
        Self::fit(grid, values)
    }

    pub fn grid(&self) -> &Arc<SmolyakGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn has_zero_boundary(&self) -> bool {
        self.zero_boundary
    }

    /// Expansion coefficients in layout order (the trie's leaf order when
    /// the boundary values vanish).
    pub(crate) fn coefficients(&self) -> &[f64] {
        &self.coefs
    }

    fn layout(&self) -> &TermLayout {
        if self.zero_boundary {
            &self.grid.inner_layout
        } else {
            &self.grid.full_layout
        }
    }

    pub fn evaluate(&self, z: &[f64]) -> f64 {
        let mut scratch = EvalScratch::new(&self.grid);
        self.evaluate_with(z, &mut scratch)
    }

    /// With zero boundary data the result is the zero extension: exactly 0
    /// on the cube's faces. The raw expansion vanishes only at boundary grid
    /// points, since a level-1 factor reads the face-parallel centre line.
    pub fn evaluate_with(&self, z: &[f64], scratch: &mut EvalScratch) -> f64 {
        assert_eq!(z.len(), self.grid.dim(), "point dimension mismatch");
        if self.zero_boundary && z.iter().any(|v| v.abs() >= 1.0) {
            return 0.0;
        }
        let width = self.grid.basis.n + 1;
        for (j, &zj) in z.iter().enumerate() {
            self.grid.basis.fill(zj, &mut scratch.basis[j * width..(j + 1) * width]);
        }
        let rows: Vec<&[f64]> = scratch.basis.chunks_exact(width).collect();
        self.evaluate_basis(&rows, &mut scratch.prefix)
    }

    /// Sums the expansion given precomputed 1-d basis vectors (`basis_vector`)
    /// per dimension; `prefix` must have length `d + 1`.
    pub fn evaluate_basis(&self, rows: &[&[f64]], prefix: &mut [f64]) -> f64 {
        self.evaluate_rows(|j, slot| rows[j][slot], prefix)
    }

    /// As [`Self::evaluate_basis`] with basis entry `(dimension, slot)` read
    /// through `row`.
    #[inline]
    pub fn evaluate_rows(&self, row: impl Fn(usize, usize) -> f64, prefix: &mut [f64]) -> f64 {
        let d = self.grid.dim();
        let layout = self.layout();
        prefix[0] = 1.0;
        let mut sum = 0.0;
        for (t, (&c, slots)) in self.coefs.iter().zip(layout.slots.chunks_exact(d)).enumerate() {
            let start = layout.div[t] as usize;
            for j in start..d {
                prefix[j + 1] = prefix[j] * row(j, slots[j] as usize);
            }
            sum += c * prefix[d];
        }
        sum
    }

    /// Evaluates at many points (row-major, `d` per point), in parallel with
    /// per-point results independent of the thread count.
    pub fn evaluate_batch(&self, points: &[f64]) -> Vec<f64> {
        let d = self.grid.dim();
        points.par_chunks(d).map_init(|| EvalScratch::new(&self.grid), |s, z| self.evaluate_with(z, s)).collect()
    }

    /// Reference route: the combination formula summed over `P(q, d)` with
    /// product-form Lagrange polynomials on each tensor grid.
    pub fn evaluate_combination(&self, z: &[f64]) -> f64 {
        let g = &*self.grid;
        let d = g.dim();
        let n = g.basis.n;
        let fl = g.finest_level();
        let mut total = 0.0;
        for (idx, coef) in g.combination() {
            let per_dim: Vec<Vec<(u16, f64)>> = idx
                .components()
                .iter()
                .zip(z)
                .map(|(&l, &zj)| {
                    let nodes: Vec<usize> =
                        if l == 1 { vec![(n - 1) / 2] } else { (0..n).step_by(1 << (fl - l)).collect() };
                    nodes
                        .iter()
                        .map(|&k| {
                            let xk = g.basis.nodes[k];
                            let lk: f64 = nodes
                                .iter()
                                .filter(|&&m| m != k)
                                .map(|&m| (zj - g.basis.nodes[m]) / (xk - g.basis.nodes[m]))
                                .product();
                            (k as u16, lk)
                        })
                        .collect()
                })
                .collect();
            let mut pos = vec![0usize; d];
            let mut key = vec![0u16; d];
            let mut tensor = 0.0;
            loop {
                let mut w = 1.0;
                for j in 0..d {
                    let (k, lk) = per_dim[j][pos[j]];
                    key[j] = k;
                    w *= lk;
                }
                let p = g.find(&key).expect("tensor grid point missing from sparse grid");
                tensor += w * self.values[p];
                let mut j = 0;
                while j < d {
                    pos[j] += 1;
                    if pos[j] < per_dim[j].len() {
                        break;
                    }
                    pos[j] = 0;
                    j += 1;
                }
                if j == d {
                    break;
                }
            }
            total += *coef as f64 * tensor;
        }
        total
    }
}

/// All 1-d basis functions of `grid` at `z`, the input of [`Interpolant::evaluate_basis`].
pub fn basis_vector(grid: &SmolyakGrid, z: f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.basis_width()];
    grid.fill_basis(z, &mut out);
    out
}

/// Unidirectional hierarchization: along each dimension in turn, replace each
/// value by its difference from the next-coarser 1-d interpolant on its pole.
fn hierarchize(grid: &SmolyakGrid, values: &[f64]) -> Vec<f64> {
    let d = grid.dim();
    let b = &grid.basis;
    let mut s = values.to_vec();
    let mut line = vec![0.0; b.n];
    for j in 0..d {
        let poles = &grid.poles[j];
        for w in poles.offsets.windows(2) {
            let members = &poles.members[w[0] as usize..w[1] as usize];
            if members.len() == 1 {
                continue;
            }
            for &p in members {
                line[grid.node_indices(p as usize)[j] as usize] = s[p as usize];
            }
            for &p in members {
                let i = grid.node_indices(p as usize)[j] as usize;
                let row = &b.hier_rows[i];
                if row.is_empty() {
                    continue;
                }
                let coarse: f64 = row.iter().map(|&(k, l)| l * line[k]).sum();
                s[p as usize] = line[i] - coarse;
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse_grid::cgl::{barycentric_eval, cgl_nodes, lobatto_weights};
    use crate::sparse_grid::grid::build_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fit_fn(d: usize, level: usize, f: impl Fn(&[f64]) -> f64) -> Interpolant {
        let g = Arc::new(build_grid(d, level).unwrap());
        let vals = g.points().map(&f).collect();
        Interpolant::fit(g, vals).unwrap()
    }

    fn random_points(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect()
    }

    #[test]
    fn constants_reproduced() {
        let it = fit_fn(3, 4, |_| 2.5);
        for z in random_points(3, 100, 1) {
            assert!((it.evaluate(&z) - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn nodal_values_recovered() {
        let it = fit_fn(3, 4, |z| (z[0] - 0.3 * z[1] + z[2] * z[2]).sin());
        for p in 0..it.grid().len() {
            let z = it.grid().point(p).to_vec();
            assert!((it.evaluate(&z) - it.values()[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_matches_lagrange() {
        let f = |x: f64| (2.0 * x).exp() / (1.0 + x * x);
        for level in 0..=6 {
            let it = fit_fn(1, level, |z| f(z[0]));
            let rule = cgl_nodes(level + 1);
            let w = lobatto_weights(rule.nodes.len());
            let vals: Vec<f64> = rule.nodes.iter().map(|&x| f(x)).collect();
            for z in random_points(1, 50, 2) {
                let direct = barycentric_eval(&rule.nodes, &w, &vals, z[0]);
                assert!((it.evaluate(&z) - direct).abs() < 1e-12, "level {level}");
            }
        }
    }

    #[test]
    fn hierarchical_matches_combination() {
        for (d, level) in [(2, 4), (3, 3), (4, 2)] {
            let it = fit_fn(d, level, |z| z.iter().enumerate().map(|(i, x)| (i as f64 + 1.0) * x).sum::<f64>().cos());
            for z in random_points(d, 40, 3) {
                assert!((it.evaluate(&z) - it.evaluate_combination(&z)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn zero_boundary_compression_agrees() {
        let d = 3;
        let g = Arc::new(build_grid(d, 4).unwrap());
        let f = |z: &[f64]| z.iter().map(|x| 1.0 - x * x).product::<f64>() * (z[0] + 0.5 * z[1] - z[2]).exp();
        let vals: Vec<f64> = (0..g.len()).map(|p| if g.is_boundary(p) { 0.0 } else { f(g.point(p)) }).collect();
        let it = Interpolant::fit(g, vals).unwrap();
        assert!(it.has_zero_boundary());
        for z in random_points(d, 60, 4) {
            assert!((it.evaluate(&z) - it.evaluate_combination(&z)).abs() < 1e-12);
        }
    }

    #[test]
    fn polynomial_exactness() {
        // total degree <= 2^(L_I) is reproduced by the level-L_I interpolant in each direction
        let it = fit_fn(3, 3, |z| z[0].powi(4) * z[1] - 2.0 * z[1].powi(3) * z[2] + z[2].powi(2) + 1.0);
        for z in random_points(3, 200, 5) {
            let exact = z[0].powi(4) * z[1] - 2.0 * z[1].powi(3) * z[2] + z[2].powi(2) + 1.0;
            assert!((it.evaluate(&z) - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_function_symmetric_interpolant() {
        let it = fit_fn(2, 5, |z| 1.0 / (1.0 + 4.0 * (z[0] * z[0] + z[1] * z[1])));
        for z in random_points(2, 100, 6) {
            let a = it.evaluate(&z);
            let b = it.evaluate(&[z[1], z[0]]);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_matches_single() {
        let it = fit_fn(2, 4, |z| (z[0] * z[1]).exp());
        let pts: Vec<f64> = random_points(2, 30, 7).concat();
        let batch = it.evaluate_batch(&pts);
        for (k, z) in pts.chunks(2).enumerate() {
            assert_eq!(batch[k].to_bits(), it.evaluate(z).to_bits());
        }
    }

    #[test]
    fn geometric_convergence() {
        let d = 3;
        let f = |z: &[f64]| (z.iter().sum::<f64>() / d as f64).exp();
        let probes = random_points(d, 1000, 8);
        let errs: Vec<f64> = (2..=7)
            .map(|level| {
                let it = fit_fn(d, level, f);
                probes.iter().map(|z| (it.evaluate(z) - f(z)).abs()).fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0] * 0.5 || w[1] < 1e-13, "{errs:?}");
        }
        assert!(errs[5] < 1e-12, "{errs:?}");
    }

    #[test]
    fn value_count_checked() {
        let g = Arc::new(build_grid(2, 2).unwrap());
        assert!(Interpolant::fit(g.clone(), vec![0.0; 3]).is_err());
        assert!(Interpolant::fit_inner(g, &[0.0; 2]).is_err());
    }
}
