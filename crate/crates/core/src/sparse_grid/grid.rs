use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::cgl::{lobatto_node, lobatto_weights};
use crate::error::{Error, Result};

pub const DEFAULT_GRID_CAP: usize = 5_000_000;
/// Finest 1-d level is `L_I + 1`; node indices are stored as `u16`.
pub const MAX_INTERPOLATION_LEVEL: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(components: Vec<usize>) -> Result<Self> {
        if components.is_empty() || components.contains(&0) {
            return Err(Error::InvalidInput("multi-index components must be >= 1".into()));
        }
        Ok(Self(components))
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// `P(q, d) = {l : q - d + 1 <= |l| <= q}` with combination coefficients
/// `(-1)^(q - |l|) * C(d - 1, q - |l|)`, in lexicographic order.
pub fn smolyak_index_set(q: usize, d: usize) -> Vec<(MultiIndex, i64)> {
    let mut out = Vec::new();
    if d == 0 || q < d {
        return out;
    }
    let lo = (q + 1).saturating_sub(d).max(d);
    let mut current = vec![1usize; d];
    fn rec(pos: usize, sum: usize, lo: usize, q: usize, cur: &mut Vec<usize>, out: &mut Vec<(MultiIndex, i64)>) {
        let d = cur.len();
        if pos == d {
            if sum >= lo {
                let gap = q - sum;
                let mag = binomial(d - 1, gap) as i64;
                let coef = if gap.is_multiple_of(2) { mag } else { -mag };
                out.push((MultiIndex(cur.clone()), coef));
            }
            return;
        }
        let rest = d - pos - 1;
        let mut l = 1;
        while sum + l + rest <= q {
            cur[pos] = l;
            rec(pos + 1, sum + l, lo, q, cur, out);
            l += 1;
        }
    }
    rec(0, 0, lo, q, &mut current, &mut out);
    out
}

/// Exact point counts of the level-`L_I` grid in `d` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCounts {
    pub n_cgl: u128,
    pub n_inner: u128,
}

/// Counts via a convolution over introduction levels: a 1-d rule has one
/// level-1 node, two level-2 nodes (the boundary) and `2^(l-2)` new nodes at
/// level `l >= 3`. `None` when a count overflows 128 bits.
pub fn count_points(d: usize, level: usize) -> Option<GridCounts> {
    let q = level + d;
    let per_level = |l: usize, inner: bool| -> Option<u128> {
        match l {
            1 => Some(1),
            2 => Some(if inner { 0 } else { 2 }),
            _ => 1u128.checked_shl(u32::try_from(l - 2).ok()?),
        }
    };
    let count = |inner: bool| -> Option<u128> {
        // ways[s] = number of index vectors over processed dims with level sum s
        let mut ways = vec![0u128; q + 1];
        ways[0] = 1;
        for _ in 0..d {
            let mut next = vec![0u128; q + 1];
            for (s, &w) in ways.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                for l in 1..=(q - s) {
                    let add = w.checked_mul(per_level(l, inner)?)?;
                    next[s + l] = next[s + l].checked_add(add)?;
                }
            }
            ways = next;
        }
        ways.iter().try_fold(0u128, |acc, &w| acc.checked_add(w))
    };
    Some(GridCounts { n_cgl: count(false)?, n_inner: count(true)? })
}

/// Leading-order estimate `2^L_I d^L_I / L_I!` of the grid size.
pub fn asymptotic_count(d: usize, level: usize) -> f64 {
    let mut v = 1.0;
    for k in 1..=level {
        v *= 2.0 * d as f64 / k as f64;
    }
    v
}

/// Size of the full tensor grid built from the inner nodes of the finest
/// 1-d level, `(2^L_I - 1)^d`; `None` on overflow.
pub fn full_grid_count(d: usize, level: usize) -> Option<u128> {
    let base = (1u128 << level).checked_sub(1)?;
    (0..d).try_fold(1u128, |acc, _| acc.checked_mul(base))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridStats {
    pub d: usize,
    pub level: usize,
    /// Empty when the count overflows 128 bits.
    pub n_full: Option<u128>,
    pub n_cgl: u128,
    pub n_inner: u128,
}

impl GridStats {
    pub fn compute(d: usize, level: usize) -> Result<Self> {
        let c = count_points(d, level)
            .ok_or_else(|| Error::ResourceCap(format!("point count for d={d}, L_I={level} exceeds 128 bits")))?;
        Ok(Self { d, level, n_full: full_grid_count(d, level), n_cgl: c.n_cgl, n_inner: c.n_inner })
    }
}

/// Univariate hierarchical basis on the finest level of a grid.
#[derive(Debug, Clone)]
pub(crate) struct Basis1D {
    pub finest_level: usize,
    /// Number of finest-level nodes `N_f`; basis vectors carry one extra
    /// slot (`N_f`) for the merged boundary pair `z^2`.
    pub n: usize,
    pub nodes: Vec<f64>,
    pub intro: Vec<u8>,
    /// Barycentric data of levels `3..=finest_level`: node indices and weights.
    pub levels: Vec<(Vec<usize>, Vec<f64>)>,
    /// Row `i`: `(j, L^{l-1}_j(x_i))` over the nodes of the level below the
    /// introduction level `l` of index `i`; empty for the level-1 node.
    pub hier_rows: Vec<Vec<(usize, f64)>>,
}

impl Basis1D {
    pub fn new(finest_level: usize) -> Self {
        let finest_level = finest_level.max(2);
        let n = (1usize << (finest_level - 1)) + 1;
        let nodes: Vec<f64> = (0..n).map(|k| lobatto_node(k, n - 1)).collect();
        let intro: Vec<u8> = (0..n).map(|i| intro_level(i, n, finest_level) as u8).collect();
        let level_nodes = |l: usize| -> Vec<usize> {
            match l {
                1 => vec![(n - 1) / 2],
                _ => {
                    let stride = 1usize << (finest_level - l);
                    (0..n).step_by(stride).collect()
                }
            }
        };
        let levels = (3..=finest_level)
            .map(|l| {
                let idx = level_nodes(l);
                let w = lobatto_weights(idx.len());
                (idx, w)
            })
            .collect();
        let hier_rows = (0..n)
            .map(|i| {
                let l = intro[i] as usize;
                if l == 1 {
                    return Vec::new();
                }
                let below = level_nodes(l - 1);
                let x = nodes[i];
                below
                    .iter()
                    .map(|&j| {
                        let lj: f64 = below
                            .iter()
                            .filter(|&&m| m != j)
                            .map(|&m| (x - nodes[m]) / (nodes[j] - nodes[m]))
                            .product();
                        (j, lj)
                    })
                    .collect()
            })
            .collect();
        Self { finest_level, n, nodes, intro, levels, hier_rows }
    }

    pub fn mid(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Fills `out[0..=n]` with every hierarchical basis function at `z`.
    pub fn fill(&self, z: f64, out: &mut [f64]) {
        let n = self.n;
        out[self.mid()] = 1.0;
        out[0] = 0.5 * z * (z - 1.0);
        out[n - 1] = 0.5 * z * (z + 1.0);
        out[n] = z * z;
        for (idx, w) in &self.levels {
            if let Some(hit) = idx.iter().position(|&i| z - self.nodes[i] == 0.0) {
                for k in (1..idx.len()).step_by(2) {
                    out[idx[k]] = if k == hit { 1.0 } else { 0.0 };
                }
                continue;
            }
            let mut s = 0.0;
            for (&i, &wk) in idx.iter().zip(w) {
                s += wk / (z - self.nodes[i]);
            }
            for k in (1..idx.len()).step_by(2) {
                let i = idx[k];
                out[i] = w[k] / (z - self.nodes[i]) / s;
            }
        }
    }
}

fn intro_level(i: usize, n: usize, finest_level: usize) -> usize {
    if 2 * i == n - 1 {
        1
    } else if i == 0 || i == n - 1 {
        2
    } else {
        finest_level - i.trailing_zeros() as usize
    }
}

/// Term layout of a hierarchical expansion: lexicographically sorted slot
/// vectors, the first differing dimension from the previous term, and the
/// grid point supplying each coefficient.
#[derive(Debug, Clone, Default)]
pub(crate) struct TermLayout {
    pub slots: Vec<u16>,
    pub div: Vec<u8>,
    pub source: Vec<u32>,
}

impl TermLayout {
    fn build(dim: usize, mut entries: Vec<(Vec<u16>, u32)>) -> Self {
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let mut slots = Vec::with_capacity(entries.len() * dim);
        let mut div = Vec::with_capacity(entries.len());
        let mut source = Vec::with_capacity(entries.len());
        let mut prev: Option<&Vec<u16>> = None;
        for (key, src) in &entries {
            let first = match prev {
                None => 0,
                Some(p) => p.iter().zip(key).position(|(a, b)| a != b).unwrap_or(dim),
            };
            div.push(first as u8);
            slots.extend_from_slice(key);
            source.push(*src);
            prev = Some(key);
        }
        Self { slots, div, source }
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }
}

/// Prefix tree of a [`TermLayout`]: depth `k` holds the distinct length-`k`
/// slot prefixes; leaves (depth `d`) are the terms in layout order.
#[derive(Debug, Clone, Default)]
pub(crate) struct TermTrie {
    /// `slot[k - 1][node]`: slot of a depth-`k` node in dimension `k - 1`.
    pub slot: Vec<Vec<u16>>,
    /// `parent[k - 1][node]`: index of its depth-`k - 1` parent.
    pub parent: Vec<Vec<u32>>,
}

impl TermTrie {
    fn build(dim: usize, layout: &TermLayout) -> Self {
        let mut slot = vec![Vec::new(); dim];
        let mut parent = vec![Vec::new(); dim];
        for (t, slots) in layout.slots.chunks_exact(dim).enumerate() {
            let first = if t == 0 { 0 } else { layout.div[t] as usize };
            for k in first..dim {
                let p = if k == 0 { 0 } else { slot[k - 1].len() as u32 - 1 };
                slot[k].push(slots[k]);
                parent[k].push(p);
            }
        }
        Self { slot, parent }
    }

    /// Number of nodes at depth `k` (`k = 0` is the root).
    pub fn count(&self, k: usize) -> usize {
        if k == 0 {
            1
        } else {
            self.slot[k - 1].len()
        }
    }
}

/// Points of one line through the grid along a fixed dimension.
#[derive(Debug, Clone, Default)]
pub(crate) struct Poles {
    pub offsets: Vec<u32>,
    pub members: Vec<u32>,
}

/// Smolyak sparse grid on nested CGL nodes.
///
/// Points are identified by their node indices at the finest 1-d level
/// `L_I + 1`, which makes deduplication and boundary tests exact.
#[derive(Debug, Clone)]
pub struct SmolyakGrid {
    dim: usize,
    level: usize,
    indices: Vec<u16>,
    coords: Vec<f64>,
    boundary: Vec<bool>,
    inner: Vec<usize>,
    combination: Vec<(MultiIndex, i64)>,
    lookup: HashMap<Vec<u16>, u32>,
    pub(crate) basis: Basis1D,
    pub(crate) poles: Vec<Poles>,
    pub(crate) full_layout: TermLayout,
    pub(crate) inner_layout: TermLayout,
    pub(crate) inner_trie: TermTrie,
}

pub fn build_grid(d: usize, level: usize) -> Result<SmolyakGrid> {
    build_grid_with_cap(d, level, DEFAULT_GRID_CAP)
}

pub fn build_grid_with_cap(d: usize, level: usize, cap: usize) -> Result<SmolyakGrid> {
    if d == 0 {
        return Err(Error::InvalidInput("grid dimension must be >= 1".into()));
    }
    if level > MAX_INTERPOLATION_LEVEL {
        return Err(Error::InvalidInput(format!(
            "interpolation level {level} exceeds the supported maximum {MAX_INTERPOLATION_LEVEL}"
        )));
    }
    let counts = count_points(d, level).unwrap_or(GridCounts { n_cgl: u128::MAX, n_inner: u128::MAX });
    if counts.n_cgl > cap as u128 {
        return Err(Error::ResourceCap(format!(
            "sparse grid with d={d}, L_I={level} has {} points, cap is {cap}",
            counts.n_cgl
        )));
    }
    let q = level + d;
    let basis = Basis1D::new(level + 1);
    let n1 = basis.n;

    // Depth-first enumeration in lexicographic index order; a point belongs
    // to the grid iff the sum of its coordinates' introduction levels is <= q.
    let total = counts.n_cgl as usize;
    let mut indices: Vec<u16> = Vec::with_capacity(total * d);
    let mut cur = vec![0u16; d];
    fn rec(pos: usize, budget: usize, b: &Basis1D, cur: &mut Vec<u16>, out: &mut Vec<u16>) {
        let d = cur.len();
        if pos == d {
            out.extend_from_slice(cur);
            return;
        }
        let reserve = d - pos - 1;
        for i in 0..b.n {
            let l = b.intro[i] as usize;
            if l + reserve <= budget {
                cur[pos] = i as u16;
                rec(pos + 1, budget - l, b, cur, out);
            }
        }
    }
    rec(0, q, &basis, &mut cur, &mut indices);
    debug_assert_eq!(indices.len(), total * d);

    let coords: Vec<f64> = indices.iter().map(|&i| basis.nodes[i as usize]).collect();
    let boundary: Vec<bool> =
        indices.chunks_exact(d).map(|p| p.iter().any(|&i| i == 0 || i as usize == n1 - 1)).collect();
    let inner: Vec<usize> = (0..total).filter(|&p| !boundary[p]).collect();
    let lookup: HashMap<Vec<u16>, u32> =
        indices.chunks_exact(d).enumerate().map(|(p, key)| (key.to_vec(), p as u32)).collect();

    let poles = (0..d)
        .map(|j| {
            let mut ids: HashMap<Vec<u16>, usize> = HashMap::new();
            let mut groups: Vec<Vec<u32>> = Vec::new();
            for (p, key) in indices.chunks_exact(d).enumerate() {
                let mut k = key.to_vec();
                k[j] = u16::MAX;
                let id = *ids.entry(k).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[id].push(p as u32);
            }
            let mut offsets = Vec::with_capacity(groups.len() + 1);
            let mut members = Vec::with_capacity(total);
            offsets.push(0);
            for g in groups {
                members.extend(g);
                offsets.push(members.len() as u32);
            }
            Poles { offsets, members }
        })
        .collect();

    let full_layout =
        TermLayout::build(d, indices.chunks_exact(d).enumerate().map(|(p, key)| (key.to_vec(), p as u32)).collect());
    // With zero boundary data the surpluses of points mirrored through a
    // boundary coordinate coincide, and their basis functions sum to z^2.
    let merged = n1 as u16;
    let inner_layout = TermLayout::build(
        d,
        indices
            .chunks_exact(d)
            .enumerate()
            .filter(|(_, key)| key.iter().all(|&i| i != 0))
            .map(|(p, key)| {
                let slots = key.iter().map(|&i| if i as usize == n1 - 1 { merged } else { i }).collect();
                (slots, p as u32)
            })
            .collect(),
    );

    let inner_trie = TermTrie::build(d, &inner_layout);
    Ok(SmolyakGrid {
        dim: d,
        level,
        indices,
        coords,
        boundary,
        inner,
        combination: smolyak_index_set(q, d),
        lookup,
        basis,
        poles,
        full_layout,
        inner_layout,
        inner_trie,
    })
}

impl SmolyakGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundary.is_empty()
    }

    pub fn point(&self, p: usize) -> &[f64] {
        &self.coords[p * self.dim..(p + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Node indices of point `p` at the finest 1-d level.
    pub fn node_indices(&self, p: usize) -> &[u16] {
        &self.indices[p * self.dim..(p + 1) * self.dim]
    }

    pub fn is_boundary(&self, p: usize) -> bool {
        self.boundary[p]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn inner_points(&self) -> &[usize] {
        &self.inner
    }

    pub fn inner_count(&self) -> usize {
        self.inner.len()
    }

    pub fn combination(&self) -> &[(MultiIndex, i64)] {
        &self.combination
    }

    pub fn finest_level(&self) -> usize {
        self.basis.finest_level
    }

    /// Nodes of the finest 1-d level, ascending.
    pub fn finest_nodes(&self) -> &[f64] {
        &self.basis.nodes
    }

    pub fn find(&self, node_indices: &[u16]) -> Option<usize> {
        self.lookup.get(node_indices).map(|&p| p as usize)
    }

    /// Introduction level of each coordinate of point `p`, the smallest
    /// multi-index whose tensor grid contains it.
    pub fn defining_index(&self, p: usize) -> Vec<usize> {
        self.node_indices(p).iter().map(|&i| self.basis.intro[i as usize] as usize).collect()
    }

    /// Checks `|z_j| <= cos(pi / 2^(l_j - 1))` on every inner point, with `l_j`
    /// the coordinate's introduction level (raised to 2 for the centre node).
    pub fn inner_bound_holds(&self) -> bool {
        self.inner.iter().all(|&p| {
            self.point(p).iter().zip(self.defining_index(p)).all(|(&z, l)| {
                let l = l.max(2);
                let bound = (std::f64::consts::PI / (1u64 << (l - 1)) as f64).cos();
                z.abs() <= bound + 4.0 * f64::EPSILON
            })
        })
    }

    pub fn stats(&self) -> GridStats {
        GridStats {
            d: self.dim,
            level: self.level,
            n_full: full_grid_count(self.dim, self.level),
            n_cgl: self.len() as u128,
            n_inner: self.inner.len() as u128,
        }
    }

    /// Length of a 1-d basis vector: one slot per finest node plus the merged
    /// boundary pair.
    pub fn basis_width(&self) -> usize {
        self.basis.n + 1
    }

    /// Writes every 1-d hierarchical basis function at `z` into `out`.
    pub fn fill_basis(&self, z: f64, out: &mut [f64]) {
        self.basis.fill(z, out)
    }

    /// Number of expansion terms used when boundary values vanish.
    pub fn compressed_terms(&self) -> usize {
        self.inner_layout.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_counts() {
        let cgl = [145u128, 441, 1105, 2433, 4865, 9017, 15713, 26017, 41265];
        let inner = [81u128, 151, 241, 351, 481, 631, 801, 991, 1201];
        for (k, d) in (2..=10).enumerate() {
            let c = count_points(d, 5).unwrap();
            assert_eq!((c.n_cgl, c.n_inner), (cgl[k], inner[k]), "d={d}");
        }
        assert_eq!(full_grid_count(2, 5), Some(961));
        assert_eq!(full_grid_count(3, 5), Some(29791));
    }

    #[test]
    fn enumeration_matches_counts() {
        for d in 1..=5 {
            for level in 0..=5 {
                let g = build_grid(d, level).unwrap();
                let c = count_points(d, level).unwrap();
                assert_eq!(g.len() as u128, c.n_cgl);
                assert_eq!(g.inner_count() as u128, c.n_inner);
                assert!(g.inner_bound_holds());
            }
        }
    }

    #[test]
    fn trivial_grid() {
        let g = build_grid(1, 0).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.point(0), &[0.0]);
        assert_eq!(g.inner_count(), 1);
    }

    #[test]
    fn grid_is_union_of_tensor_grids() {
        let (d, level) = (3, 3);
        let g = build_grid(d, level).unwrap();
        let stride_max = g.finest_level();
        let mut seen = std::collections::HashSet::new();
        for (idx, _) in g.combination() {
            let per_dim: Vec<Vec<u16>> = idx
                .components()
                .iter()
                .map(|&l| {
                    if l == 1 {
                        vec![(g.basis.n as u16 - 1) / 2]
                    } else {
                        (0..g.basis.n).step_by(1 << (stride_max - l)).map(|i| i as u16).collect()
                    }
                })
                .collect();
            let mut key = vec![0u16; d];
            let mut pos = vec![0usize; d];
            loop {
                for j in 0..d {
                    key[j] = per_dim[j][pos[j]];
                }
                assert!(g.find(&key).is_some());
                seen.insert(key.clone());
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
        }
        assert_eq!(seen.len(), g.len());
    }

    #[test]
    fn coefficients_sum_to_one() {
        for d in 1..=12 {
            for level in 0..=6 {
                let s: i64 = smolyak_index_set(level + d, d).iter().map(|(_, c)| c).sum();
                assert_eq!(s, 1, "d={d} L_I={level}");
            }
        }
    }

    #[test]
    fn index_set_membership() {
        let set = smolyak_index_set(5, 2);
        for (idx, _) in &set {
            assert!((4..=5).contains(&idx.total()));
        }
        assert_eq!(set.len(), 3 + 4);
    }

    #[test]
    fn asymptotic_examples() {
        assert_eq!(asymptotic_count(7, 0), 1.0);
        assert!((asymptotic_count(10, 5) - 32.0 * 1e5 / 120.0).abs() < 1e-9);
        for d in 1..6 {
            assert_eq!(asymptotic_count(d, 1), 2.0 * d as f64);
            assert_eq!(count_points(d, 1).unwrap().n_cgl, 2 * d as u128 + 1);
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(build_grid_with_cap(4, 5, 100), Err(Error::ResourceCap(_))));
    }

    #[test]
    fn trie_leaves_are_terms() {
        let g = build_grid(4, 3).unwrap();
        let t = &g.inner_trie;
        assert_eq!(t.count(4), g.compressed_terms());
        for k in 1..=4 {
            assert!(t.count(k) >= t.count(k - 1));
            assert!(t.parent[k - 1].windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*t.parent[k - 1].last().unwrap() as usize, t.count(k - 1) - 1);
        }
    }

    #[test]
    fn compressed_term_counts() {
        assert_eq!(build_grid(6, 5).unwrap().compressed_terms(), 1683);
        assert_eq!(build_grid(2, 5).unwrap().compressed_terms(), 112);
    }
}
