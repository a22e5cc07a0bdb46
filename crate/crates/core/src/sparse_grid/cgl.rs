use std::f64::consts::PI;

/// Nested Chebyshev-Gauss-Lobatto rule of one level, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedRule1D {
    pub level: usize,
    pub nodes: Vec<f64>,
}

/// `1` for level 1, `2^(level-1) + 1` otherwise.
pub fn node_count(level: usize) -> usize {
    assert!(level >= 1, "CGL level starts at 1");
    if level == 1 {
        1
    } else {
        (1usize << (level - 1)) + 1
    }
}

/// Node `k` (ascending) of the CGL rule with `n + 1` points, `n` a power of two.
///
/// Written as `sin(pi (2k - n) / (2n))`: the ratio is exact under the
/// doubling `(k, n) -> (2k, 2n)`, so coarse nodes are bit-identical to the
/// corresponding fine nodes, and `sin` is odd so the rule is exactly symmetric.
pub(crate) fn lobatto_node(k: usize, n: usize) -> f64 {
    if 2 * k == n {
        return 0.0;
    }
    if k == 0 {
        return -1.0;
    }
    if k == n {
        return 1.0;
    }
    let num = 2.0 * k as f64 - n as f64;
    (num * PI / (2.0 * n as f64)).sin()
}

pub fn cgl_nodes(level: usize) -> NestedRule1D {
    let n = node_count(level);
    let nodes = if n == 1 { vec![0.0] } else { (0..n).map(|k| lobatto_node(k, n - 1)).collect() };
    NestedRule1D { level, nodes }
}

/// Barycentric weights of the CGL rule with `n` nodes: `(-1)^k`, halved at the ends.
pub(crate) fn lobatto_weights(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == n - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// Barycentric Lagrange interpolation through `(nodes, values)` at `x`.
pub fn barycentric_eval(nodes: &[f64], weights: &[f64], values: &[f64], x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&xk, &wk), &fk) in nodes.iter().zip(weights).zip(values) {
        let diff = x - xk;
        if diff == 0.0 {
            return fk;
        }
        let t = wk / diff;
        num += t * fk;
        den += t;
    }
    num / den
}
