//! Backward dynamic program for the bubbled continuation value
//! `u_k = e^{-r dt} b(z) E[max(H, u_{k+1} / b)]` on the inner sparse grid.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{decorrelate, MarketParams, OptionSpec, RotatedModel};
use crate::quadrature::{
    build_rule_capped, GaussianStepSpec, QuadratureKind, QuadratureRule, RuleSpec, DEFAULT_RULE_CAP,
};
use crate::sparse_grid::{build_grid_with_cap, GridStats, Interpolant, SmolyakGrid, TermTrie, DEFAULT_GRID_CAP};
use crate::transform::{
    bubble, bubble_from_unbounded, feasibility_check, to_bounded_scalar, to_unbounded_scalar, Feasibility,
    TransformConfig,
};

/// Default budget for the cached propagated payoffs, bubbles and basis tables.
pub const DEFAULT_MEMORY_CAP: usize = 1 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingConfig {
    /// Interpolation level `L_I`.
    pub level: usize,
    pub transform: TransformConfig,
    pub quadrature: RuleSpec,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub grid_cap: usize,
    pub rule_cap: usize,
    /// Above this many bytes of per-run caches the engine recomputes
    /// propagated quantities every step instead of storing them.
    pub memory_cap: usize,
    /// Keep every step's interpolant for [`Pricer::continuation_surface`].
    pub retain_surfaces: bool,
}

impl PricingConfig {
    pub fn new(level: usize, quadrature: RuleSpec) -> Self {
        Self {
            level,
            transform: TransformConfig::default(),
            quadrature,
            threads: None,
            grid_cap: DEFAULT_GRID_CAP,
            rule_cap: DEFAULT_RULE_CAP,
            memory_cap: DEFAULT_MEMORY_CAP,
            retain_surfaces: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingResult {
    pub price: f64,
    /// `u_0(0) / b(0)`, the continuation value at the spot.
    pub continuation_at_origin: f64,
    pub payoff_at_spot: f64,
    pub grid: GridStats,
    pub quadrature_kind: QuadratureKind,
    pub quadrature_points: usize,
    /// Safety constant `C` actually realised by the rule.
    pub max_standardized: f64,
    pub clamped_samples: usize,
    pub feasibility_margin: f64,
    /// Smallest bubble value over all propagated points.
    pub min_bubble: f64,
    pub streamed: bool,
    pub setup_seconds: f64,
    /// Wall time of the step producing `u_k`, indexed by `k`.
    pub step_seconds: Vec<f64>,
}

impl PricingResult {
    /// The result with wall times zeroed; everything left is deterministic.
    pub fn without_timings(mut self) -> Self {
        self.setup_seconds = 0.0;
        self.step_seconds.iter_mut().for_each(|t| *t = 0.0);
        self
    }
}

/// Propagated payoff `H` and bubble `b` for one (grid point, rule point) pair.
#[derive(Debug, Clone, Copy)]
struct Pair {
    h: f64,
    b: f64,
}

pub struct Pricer {
    params: MarketParams,
    spec: OptionSpec,
    cfg: PricingConfig,
    model: RotatedModel,
    grid: Arc<SmolyakGrid>,
    rule: QuadratureRule,
    feasibility: Feasibility,
    /// Unbounded coordinates `atanh(z)/L` of each finest-level 1-d node.
    node_x: Vec<f64>,
    /// Inner grid points and their bubble values.
    inner: Vec<usize>,
    inner_bubble: Vec<f64>,
    origin: usize,
    /// Per dimension: position of every rule point's coordinate in the
    /// distinct-value list, and that list's length.
    coord_idx: Vec<Vec<u32>>,
    coord_count: Vec<usize>,
    suffixes: SuffixPlan,
    surfaces: Vec<Option<Interpolant>>,
    setup_seconds: f64,
}

/// Bytes of the optional caches: `(pairs, basis tables)`.
fn cache_sizes(n_inner: usize, m: usize, nodes: usize, width: usize, coord_count: &[usize]) -> (usize, usize) {
    let pairs = n_inner.saturating_mul(m).saturating_mul(std::mem::size_of::<Pair>());
    let tables = coord_count.iter().map(|&c| nodes.saturating_mul(c).saturating_mul(width).saturating_mul(8)).sum();
    (pairs, tables)
}

impl Pricer {
    pub fn new(params: &MarketParams, spec: &OptionSpec, cfg: &PricingConfig) -> Result<Self> {
        let start = Instant::now();
        params.validate()?;
        spec.validate()?;
        cfg.transform.validate()?;
        let d = params.dim();
        let model = decorrelate(params)?;
        let dt = spec.dt();
        let step = GaussianStepSpec::from_model(&model, dt)?;
        let rule = build_rule_capped(&cfg.quadrature, &step, cfg.rule_cap)?;
        let grid = Arc::new(build_grid_with_cap(d, cfg.level, cfg.grid_cap)?);

        let check_cfg =
            TransformConfig { safety_constant: rule.max_standardized.max(f64::MIN_POSITIVE), ..cfg.transform };
        let feasibility = feasibility_check(cfg.level, &check_cfg, &model.eigenvalues, dt);
        if !feasibility.holds {
            return Err(Error::Infeasible { margin: feasibility.margin });
        }

        let node_x: Vec<f64> = grid
            .finest_nodes()
            .iter()
            .map(|&z| if z.abs() < 1.0 { to_unbounded_scalar(z, cfg.transform.scale) } else { f64::NAN })
            .collect();
        let inner = grid.inner_points().to_vec();
        let inner_bubble = inner.iter().map(|&p| bubble(grid.point(p), &cfg.transform)).collect();
        let mid = ((grid.finest_nodes().len() - 1) / 2) as u16;
        let origin_point = grid.find(&vec![mid; d]).expect("origin is a grid point");
        let origin = inner.iter().position(|&p| p == origin_point).expect("origin is an inner point");
        let (coord_idx, coord_count): (Vec<Vec<u32>>, Vec<usize>) =
            rule.coordinate_index().into_iter().map(|(vals, idx)| (idx, vals.len())).unzip();

        Ok(Self {
            params: params.clone(),
            spec: spec.clone(),
            cfg: cfg.clone(),
            model,
            grid,
            rule,
            feasibility,
            node_x,
            inner,
            inner_bubble,
            origin,
            suffixes: SuffixPlan::build(&coord_idx),
            coord_idx,
            coord_count,
            surfaces: Vec::new(),
            setup_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn grid(&self) -> &Arc<SmolyakGrid> {
        &self.grid
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn model(&self) -> &RotatedModel {
        &self.model
    }

    pub fn feasibility(&self) -> Feasibility {
        self.feasibility
    }

    /// Unbounded propagated point `atanh(z^n)/L + y^m`.
    fn propagated(&self, n: usize, m: usize, x: &mut [f64]) {
        let idx = self.grid.node_indices(self.inner[n]);
        let y = self.rule.point(m);
        for j in 0..x.len() {
            x[j] = self.node_x[idx[j] as usize] + y[j];
        }
    }

    fn pair(&self, x: &[f64], prices: &mut [f64], step: usize, n: usize) -> Result<Pair> {
        self.model.prices_from_rotated_into(&self.params, x, prices)?;
        let h = self.spec.payoff(prices);
        let b = bubble_from_unbounded(x, &self.cfg.transform);
        if !(b > self.cfg.transform.machine_eps) {
            return Err(Error::BubbleUnderflow { step, point: n, value: b });
        }
        Ok(Pair { h, b })
    }

    /// Basis tables: for dimension `j`, finest node `a` and distinct rule
    /// coordinate `c`, the 1-d basis vector at `tanh(L (x_a + y_c))`.
    fn basis_tables(&self) -> Vec<Vec<f64>> {
        let d = self.grid.dim();
        let nf = self.grid.finest_nodes().len();
        let width = nf + 1;
        (0..d)
            .map(|j| {
                let nc = self.coord_count[j];
                let mut coords = vec![0.0; nc];
                for (m, &c) in self.coord_idx[j].iter().enumerate() {
                    coords[c as usize] = self.rule.point(m)[j];
                }
                let mut table = vec![0.0; nf * nc * width];
                table.par_chunks_mut(nc * width).enumerate().for_each(|(a, block)| {
                    if a == 0 || a == nf - 1 {
                        return;
                    }
                    for (c, out) in block.chunks_exact_mut(width).enumerate() {
                        let z = to_bounded_scalar(self.node_x[a] + coords[c], self.cfg.transform.scale);
                        self.grid.fill_basis(z, out);
                    }
                });
                table
            })
            .collect()
    }

    /// Continuation values `u(z^n + y^m)` for every distinct rule point,
    /// indexed by `SuffixPlan::point`. The term trie is contracted one
    /// dimension at a time from the last, so rule points sharing trailing
    /// coordinates share partial sums.
    fn contract<'s>(&self, it: &Interpolant, tables: &[Vec<f64>], n: usize, s: &'s mut Scratch) -> &'s [f64] {
        let d = self.grid.dim();
        let width = self.grid.finest_nodes().len() + 1;
        let trie = &self.grid.inner_trie;
        let idx = self.grid.node_indices(self.inner[n]);
        s.cur.clear();
        s.cur.extend_from_slice(it.coefficients());
        for j in (0..d).rev() {
            let below = trie.count(j + 1);
            let above = trie.count(j);
            let set = &self.suffixes.sets[j];
            s.next.clear();
            s.next.resize(set.len() * above, 0.0);
            let base = idx[j] as usize * self.coord_count[j];
            let (slots, parents) = (&trie.slot[j], &trie.parent[j]);
            for (sid, &(c, tail)) in set.iter().enumerate() {
                let row = &tables[j][(base + c as usize) * width..][..width];
                let src = &s.cur[tail as usize * below..][..below];
                let dst = &mut s.next[sid * above..][..above];
                for ((&slot, &p), &g) in slots.iter().zip(parents).zip(src) {
                    dst[p as usize] += row[slot as usize] * g;
                }
            }
            std::mem::swap(&mut s.cur, &mut s.next);
        }
        &s.cur
    }

    /// Runs the backward induction and returns the time-0 price.
    pub fn run(&mut self) -> Result<PricingResult> {
        match self.cfg.threads {
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t.max(1))
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                pool.install(|| self.run_inner())
            }
            None => self.run_inner(),
        }
    }

    fn run_inner(&mut self) -> Result<PricingResult> {
        let setup = Instant::now();
        let d = self.grid.dim();
        let k_total = self.spec.exercise_count;
        let n_inner = self.inner.len();
        let m_len = self.rule.len();
        let nf = self.grid.finest_nodes().len();
        let width = nf + 1;
        let (pair_bytes, table_bytes) = cache_sizes(n_inner, m_len, nf, width, &self.coord_count);
        let cache_pairs = pair_bytes <= self.cfg.memory_cap;
        let workers = rayon::current_num_threads();
        let contraction_bytes = self.suffixes.buffer_len(&self.grid.inner_trie).saturating_mul(16 * workers);
        let use_tables = cache_pairs
            && pair_bytes.saturating_add(table_bytes).saturating_add(contraction_bytes) <= self.cfg.memory_cap;

        let pairs: Option<Vec<Pair>> = if cache_pairs {
            let rows: Vec<Result<Vec<Pair>>> = (0..n_inner)
                .into_par_iter()
                .map_init(
                    || (vec![0.0; d], vec![0.0; d]),
                    |(x, prices), n| {
                        (0..m_len)
                            .map(|m| {
                                self.propagated(n, m, x);
                                self.pair(x, prices, k_total, n)
                            })
                            .collect()
                    },
                )
                .collect();
            let mut flat = Vec::with_capacity(n_inner * m_len);
            for r in rows {
                flat.extend(r?);
            }
            Some(flat)
        } else {
            None
        };
        let tables = if use_tables { Some(self.basis_tables()) } else { None };
        let min_bubble = match &pairs {
            Some(p) => p.iter().map(|q| q.b).fold(f64::INFINITY, f64::min),
            None => f64::NAN,
        };
        let setup_seconds = self.setup_seconds + setup.elapsed().as_secs_f64();

        let disc = (-self.params.rate * self.spec.dt()).exp();
        let weights = self.rule.weights();
        let mut step_seconds = vec![0.0; k_total];
        let mut next: Option<Interpolant> = None;
        let mut min_seen = f64::INFINITY;
        self.surfaces = if self.cfg.retain_surfaces { vec![None; k_total] } else { Vec::new() };

        for k in (0..k_total).rev() {
            let t0 = Instant::now();
            let rows: Vec<usize> = if k == 0 { vec![self.origin] } else { (0..n_inner).collect() };
            let interp = next.as_ref();
            let results: Vec<Result<(f64, f64)>> = rows
                .par_iter()
                .map_init(
                    || Scratch::new(d, width),
                    |s, &n| {
                        let mut sum = 0.0;
                        let mut local_min = f64::INFINITY;
                        let contracted = match (interp, &tables) {
                            (Some(it), Some(t)) => {
                                self.contract(it, t, n, s);
                                true
                            }
                            _ => false,
                        };
                        for m in 0..m_len {
                            let pr = match &pairs {
                                Some(p) => p[n * m_len + m],
                                None => {
                                    self.propagated(n, m, &mut s.x);
                                    self.pair(&s.x, &mut s.prices, k + 1, n)?
                                }
                            };
                            local_min = local_min.min(pr.b);
                            let v = match interp {
                                None => pr.h,
                                Some(it) => {
                                    let u = if contracted {
                                        s.cur[self.suffixes.point[m] as usize]
                                    } else {
                                        self.propagated(n, m, &mut s.x);
                                        for j in 0..d {
                                            let z = to_bounded_scalar(s.x[j], self.cfg.transform.scale);
                                            self.grid.fill_basis(z, &mut s.basis[j * width..(j + 1) * width]);
                                        }
                                        let b = &s.basis;
                                        it.evaluate_rows(|j, slot| b[j * width + slot], &mut s.prefix)
                                    };
                                    pr.h.max(u / pr.b)
                                }
                            };
                            if !v.is_finite() {
                                return Err(Error::NonFinite { step: k, point: n });
                            }
                            sum += weights[m] * v;
                        }
                        let u = disc * self.inner_bubble[n] * sum;
                        if !u.is_finite() {
                            return Err(Error::NonFinite { step: k, point: n });
                        }
                        Ok((u, local_min))
                    },
                )
                .collect();
            let mut values = Vec::with_capacity(rows.len());
            for r in results {
                let (u, b) = r?;
                min_seen = min_seen.min(b);
                values.push(u);
            }
            step_seconds[k] = t0.elapsed().as_secs_f64();
            if k == 0 {
                let u0 = values[0];
                let f0 = u0 / self.inner_bubble[self.origin];
                let payoff_at_spot = self.spec.payoff(&self.params.spot);
                return Ok(PricingResult {
                    price: payoff_at_spot.max(f0),
                    continuation_at_origin: f0,
                    payoff_at_spot,
                    grid: self.grid.stats(),
                    quadrature_kind: self.rule.kind,
                    quadrature_points: m_len,
                    max_standardized: self.rule.max_standardized,
                    clamped_samples: self.rule.clamped,
                    feasibility_margin: self.feasibility.margin,
                    min_bubble: if min_bubble.is_nan() { min_seen } else { min_bubble },
                    streamed: !cache_pairs,
                    setup_seconds,
                    step_seconds,
                });
            }
            let it = Interpolant::fit_inner(self.grid.clone(), &values)?;
            if self.cfg.retain_surfaces {
                self.surfaces[k] = Some(it.clone());
            }
            next = Some(it);
        }
        unreachable!("exercise_count >= 1 is validated")
    }

    /// `F_k(z) = u_k(z) / b(z)` at probe points strictly inside the cube,
    /// for `1 <= k < K` after a run with `retain_surfaces`.
    pub fn continuation_surface(&self, k: usize, probes: &[Vec<f64>]) -> Result<Vec<f64>> {
        let it = self
            .surfaces
            .get(k)
            .and_then(|s| s.as_ref())
            .ok_or_else(|| Error::InvalidInput(format!("no retained surface for step {k}")))?;
        probes
            .iter()
            .map(|z| {
                if z.len() != self.grid.dim() {
                    return Err(Error::InvalidInput("probe dimension mismatch".into()));
                }
                if z.iter().any(|v| !(v.abs() < 1.0)) {
                    return Err(Error::InvalidInput(format!("probe {z:?} is not strictly inside the cube")));
                }
                Ok(it.evaluate(z) / bubble(z, &self.cfg.transform))
            })
            .collect()
    }

    /// Retained interpolant of `u_k`.
    pub fn surface(&self, k: usize) -> Option<&Interpolant> {
        self.surfaces.get(k).and_then(|s| s.as_ref())
    }
}

/// Distinct coordinate suffixes of the rule: `sets[j]` lists the distinct
/// `(c_j, tail)` where `c_j` indexes dimension `j`'s coordinate values and
/// `tail` is an id in `sets[j + 1]` (the empty suffix is id 0).
#[derive(Debug, Clone)]
struct SuffixPlan {
    sets: Vec<Vec<(u32, u32)>>,
    /// Id of each rule point in `sets[0]`.
    point: Vec<u32>,
}

impl SuffixPlan {
    fn build(coord_idx: &[Vec<u32>]) -> Self {
        let m_len = coord_idx.first().map_or(0, Vec::len);
        let mut tail = vec![0u32; m_len];
        let mut sets = vec![Vec::new(); coord_idx.len()];
        for (j, idx) in coord_idx.iter().enumerate().rev() {
            let mut ids: HashMap<(u32, u32), u32> = HashMap::new();
            let set = &mut sets[j];
            for (m, t) in tail.iter_mut().enumerate() {
                let key = (idx[m], *t);
                *t = *ids.entry(key).or_insert_with(|| {
                    set.push(key);
                    set.len() as u32 - 1
                });
            }
        }
        Self { sets, point: tail }
    }

    /// Largest contraction buffer, in values.
    fn buffer_len(&self, trie: &TermTrie) -> usize {
        let d = self.sets.len();
        (0..d)
            .map(|j| {
                let above = self.sets[j].len().saturating_mul(trie.count(j));
                let below = self.sets.get(j + 1).map_or(1, Vec::len).saturating_mul(trie.count(j + 1));
                above.max(below)
            })
            .max()
            .unwrap_or(1)
    }
}

struct Scratch {
    x: Vec<f64>,
    prices: Vec<f64>,
    basis: Vec<f64>,
    prefix: Vec<f64>,
    cur: Vec<f64>,
    next: Vec<f64>,
}

impl Scratch {
    fn new(d: usize, width: usize) -> Self {
        Self {
            x: vec![0.0; d],
            prices: vec![0.0; d],
            basis: vec![0.0; d * width],
            prefix: vec![1.0; d + 1],
            cur: Vec::new(),
            next: Vec::new(),
        }
    }
}

pub fn price(params: &MarketParams, spec: &OptionSpec, cfg: &PricingConfig) -> Result<PricingResult> {
    Pricer::new(params, spec, cfg)?.run()
}
