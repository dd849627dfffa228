//! Grid suprema `Q_i` and streaming order statistics `M_n^(1) ≥ … ≥ M_n^(k)`.
//!
//! The continuous supremum over `t ≥ 0` is replaced by a maximum over a
//! uniform grid on `[0, T_n]`. This underestimates `Q_i`; the bias vanishes as
//! the grid is refined and is not corrected.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::process::{GridSpec, PathSynthesizer, SamplePath, Scratch};
use crate::rng::ReplicationStreams;

/// Default horizon multiplier `g_mult`.
pub const DEFAULT_G_MULT: f64 = 3.0;

/// Default number of grid cells on `[0, T_n]`.
pub const DEFAULT_N_POINTS: usize = 1 << 12;

/// Location `t₀ = (H / (c (β − H)))^{1/β}` of the maximal standard deviation
/// of `X_H(t) / (1 + c t^β)`.
pub fn argmax_time(hurst: f64, beta: f64, c: f64) -> f64 {
    (hurst / (c * (beta - hurst))).powf(1.0 / beta)
}

/// `T_n = g_mult · t₀ · b_n^{1/β}`.
///
/// With `σ ≠ 1` the problem is solved in units of `σ`: `t₀` uses `c/σ` and the
/// level is `b_n / σ`.
pub fn truncation_horizon(model: &ModelSpec, b_n: f64, g_mult: f64) -> Result<f64> {
    model.validate()?;
    if !(b_n > 0.0 && b_n.is_finite()) {
        return Err(Error::domain("b_n", format!("must be positive, got {b_n}")));
    }
    if !(g_mult > 0.0 && g_mult.is_finite()) {
        return Err(Error::domain("g_mult", format!("must be positive, got {g_mult}")));
    }
    let t0 = argmax_time(model.hurst, model.beta, model.drifts.c / model.sigma);
    Ok(g_mult * t0 * (b_n / model.sigma).powf(1.0 / model.beta))
}

/// `max_j σ idio(t_j) + σ₀ common(t_j) − c_i t_j^β` over the shared grid.
pub fn supremum_on_grid(idio: &SamplePath, common: &SamplePath, model: &ModelSpec, c_i: f64) -> Result<f64> {
    if idio.grid != common.grid {
        return Err(Error::GridMismatch(format!(
            "idiosyncratic grid {:?} vs common grid {:?}",
            idio.grid, common.grid
        )));
    }
    if idio.values.len() != idio.grid.n_points + 1 || common.values.len() != common.grid.n_points + 1 {
        return Err(Error::GridMismatch("value count does not match grid".into()));
    }
    let grid = idio.grid;
    Ok(idio
        .values
        .iter()
        .zip(&common.values)
        .enumerate()
        .map(|(j, (x, y))| model.sigma * x + model.sigma0 * y - c_i * grid.time(j).powf(model.beta))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Bounded min-heap keeping the `k` largest values seen.
#[derive(Debug, Clone)]
pub struct TopK {
    k: usize,
    heap: BinaryHeap<Reverse<Key>>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        Self { k, heap: BinaryHeap::with_capacity(k + 1) }
    }

    #[inline]
    pub fn push(&mut self, value: f64) {
        if self.heap.len() < self.k {
            self.heap.push(Reverse(Key(value)));
        } else if let Some(Reverse(Key(min))) = self.heap.peek() {
            if value.total_cmp(min) == Ordering::Greater {
                self.heap.pop();
                self.heap.push(Reverse(Key(value)));
            }
        }
    }

    /// Current k-th largest value, if `k` values have been seen.
    pub fn threshold(&self) -> Option<f64> {
        (self.heap.len() == self.k).then(|| self.heap.peek().map(|r| r.0 .0)).flatten()
    }

    pub fn merge(mut self, other: TopK) -> TopK {
        for Reverse(Key(v)) in other.heap {
            self.push(v);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Values in nonincreasing order.
    pub fn into_sorted_desc(self) -> Vec<f64> {
        // ascending order of Reverse is descending order of the values
        self.heap.into_sorted_vec().into_iter().map(|Reverse(Key(v))| v).collect()
    }
}

/// Order statistics of one sequence `Q_1..Q_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupremaBatch {
    pub n: u64,
    pub k: usize,
    /// All `Q_i` in entity order, when retained.
    pub q_values: Option<Vec<f64>>,
    /// `M_n^(1) ≥ … ≥ M_n^(k)`.
    pub kth_stats: Vec<f64>,
    pub levels: Vec<f64>,
    /// Number of `Q_i` strictly above each level.
    pub exceed_counts: Vec<u64>,
}

fn check_order(n: u64, k: usize) -> Result<()> {
    if k == 0 || (k as u64) >= n {
        return Err(Error::domain("k", format!("must satisfy 1 <= k < n = {n}, got {k}")));
    }
    Ok(())
}

/// Streams precomputed values through the bounded heap.
pub fn order_statistics_from(values: &[f64], k: usize, levels: &[f64], retain: bool) -> Result<SupremaBatch> {
    let n = values.len() as u64;
    check_order(n, k)?;
    let mut top = TopK::new(k);
    let mut counts = vec![0u64; levels.len()];
    for &q in values {
        top.push(q);
        for (c, &l) in counts.iter_mut().zip(levels) {
            *c += u64::from(q > l);
        }
    }
    Ok(SupremaBatch {
        n,
        k,
        q_values: retain.then(|| values.to_vec()),
        kth_stats: top.into_sorted_desc(),
        levels: levels.to_vec(),
        exceed_counts: counts,
    })
}

/// `k` largest values via the bounded heap.
pub fn top_k_heap(values: &[f64], k: usize) -> Vec<f64> {
    let mut top = TopK::new(k);
    values.iter().for_each(|&v| top.push(v));
    top.into_sorted_desc()
}

/// Test oracle: bounded-heap order statistics equal those of a full sort.
pub fn kth_heap_vs_sort_oracle(values: &[f64], k: usize) -> bool {
    if k > values.len() {
        return false;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.truncate(k);
    top_k_heap(values, k) == sorted
}

/// Per-replication simulator of `Q_1..Q_n` on a fixed grid.
///
/// Idiosyncratic paths are generated in pairs: entities `2j+1` and `2j+2`
/// share the stream keyed by entity `2j+1` (one FFT yields both paths).
#[derive(Debug)]
pub struct SupremaSampler {
    model: ModelSpec,
    grid: GridSpec,
    idio: PathSynthesizer,
    common: Option<PathSynthesizer>,
    /// `t_j^β`.
    trend: Vec<f64>,
    /// `σ T^H`, mapping unit-horizon idiosyncratic values to the grid.
    idio_scale: f64,
}

struct Workspace {
    a: Vec<f64>,
    b: Vec<f64>,
    scratch: Scratch,
}

impl Workspace {
    fn new(n_points: usize) -> Self {
        Self {
            a: vec![0.0; n_points + 1],
            b: vec![0.0; n_points + 1],
            scratch: Scratch::default(),
        }
    }
}

#[derive(Debug, Clone)]
struct Partial {
    top: TopK,
    counts: Vec<u64>,
}

impl Partial {
    fn new(k: usize, levels: usize) -> Self {
        Self { top: TopK::new(k), counts: vec![0; levels] }
    }

    fn push(&mut self, q: f64, levels: &[f64]) {
        self.top.push(q);
        for (c, &l) in self.counts.iter_mut().zip(levels) {
            *c += u64::from(q > l);
        }
    }

    fn merge(self, other: Partial) -> Partial {
        Partial {
            top: self.top.merge(other.top),
            counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect(),
        }
    }
}

#[inline]
fn fused_max(scale: f64, unit: &[f64], offset: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (u, o) in unit.iter().zip(offset) {
        let v = scale.mul_add(*u, *o);
        if v > best {
            best = v;
        }
    }
    best
}

impl SupremaSampler {
    pub fn new(model: ModelSpec, grid: GridSpec) -> Result<Self> {
        model.validate()?;
        let idio = PathSynthesizer::fbm(model.hurst, grid.n_points)?;
        let common = if model.sigma0 > 0.0 {
            Some(PathSynthesizer::fbm(model.hurst_common, grid.n_points)?)
        } else {
            None
        };
        let trend = (0..=grid.n_points).map(|j| grid.time(j).powf(model.beta)).collect();
        Ok(Self {
            idio_scale: model.sigma * grid.horizon.powf(model.hurst),
            model,
            grid,
            idio,
            common,
            trend,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    /// Common-factor path of a replication on the physical grid (`None` when `σ₀ = 0`).
    pub fn common_path(&self, streams: &ReplicationStreams) -> Option<SamplePath> {
        self.common.as_ref().map(|s| {
            let mut rng = streams.common();
            let unit = s.sample_unit(&mut rng);
            let factor = self.grid.horizon.powf(self.model.hurst_common);
            SamplePath {
                values: unit.values.iter().map(|v| v * factor).collect(),
                grid: self.grid,
                hurst: self.model.hurst_common,
            }
        })
    }

    /// `σ₀ X(t_j) − c t_j^β` for drift `c`.
    fn offsets(&self, common: Option<&SamplePath>, c: f64) -> Vec<f64> {
        match common {
            Some(p) => p
                .values
                .iter()
                .zip(&self.trend)
                .map(|(x, t)| self.model.sigma0 * x - c * t)
                .collect(),
            None => self.trend.iter().map(|t| -c * t).collect(),
        }
    }

    /// Simulates one replication: a common path, then `Q_1..Q_n` streamed
    /// through a bounded heap of size `k`.
    pub fn batch(
        &self,
        n: u64,
        k: usize,
        levels: &[f64],
        retain_q: bool,
        streams: &ReplicationStreams,
    ) -> Result<SupremaBatch> {
        check_order(n, k)?;
        let common = self.common_path(streams);
        let m_n = self.model.drifts.minimal_count(n);
        let minimal = self.offsets(common.as_ref(), self.model.drifts.c);
        let elevated = if m_n < n {
            Some(self.offsets(common.as_ref(), self.model.drifts.elevated()))
        } else {
            None
        };
        let offset_for = |i: u64| -> &[f64] {
            if i <= m_n {
                &minimal
            } else {
                elevated.as_deref().expect("elevated offsets")
            }
        };
        let pairs = n.div_ceil(2);
        let n_points = self.grid.n_points;
        let scale = self.idio_scale;

        let pair_suprema = |ws: &mut Workspace, j: u64| -> (f64, Option<f64>) {
            let first = 2 * j + 1;
            let mut rng = streams.entity(first);
            self.idio.fill_unit_pair(&mut rng, &mut ws.a, &mut ws.b, &mut ws.scratch);
            let qa = fused_max(scale, &ws.a, offset_for(first));
            let qb = (first < n).then(|| fused_max(scale, &ws.b, offset_for(first + 1)));
            (qa, qb)
        };

        if retain_q {
            let q: Vec<f64> = (0..pairs)
                .into_par_iter()
                .map_init(|| Workspace::new(n_points), |ws, j| pair_suprema(ws, j))
                .collect::<Vec<_>>()
                .into_iter()
                .flat_map(|(a, b)| std::iter::once(a).chain(b))
                .collect();
            return order_statistics_from(&q, k, levels, true);
        }

        let part = (0..pairs)
            .into_par_iter()
            .fold(
                || (Workspace::new(n_points), Partial::new(k, levels.len())),
                |(mut ws, mut part), j| {
                    let (qa, qb) = pair_suprema(&mut ws, j);
                    part.push(qa, levels);
                    if let Some(qb) = qb {
                        part.push(qb, levels);
                    }
                    (ws, part)
                },
            )
            .map(|(_, p)| p)
            .reduce(|| Partial::new(k, levels.len()), Partial::merge);
        Ok(SupremaBatch {
            n,
            k,
            q_values: None,
            kth_stats: part.top.into_sorted_desc(),
            levels: levels.to_vec(),
            exceed_counts: part.counts,
        })
    }

    /// Single-threaded reference for one replication, built from the public
    /// path and supremum primitives. Same streams, same output as [`batch`](Self::batch).
    pub fn q_values_reference(&self, n: u64, streams: &ReplicationStreams) -> Result<Vec<f64>> {
        let common = self.common_path(streams).unwrap_or_else(|| SamplePath {
            values: vec![0.0; self.grid.n_points + 1],
            grid: self.grid,
            hurst: self.model.hurst_common,
        });
        let factor = self.grid.horizon.powf(self.model.hurst);
        let mut out = Vec::with_capacity(n as usize);
        for j in 0..n.div_ceil(2) {
            let first = 2 * j + 1;
            let (a, b) = self.idio.sample_unit_pair(&mut streams.entity(first));
            for (i, unit) in [(first, a), (first + 1, b)] {
                if i > n {
                    break;
                }
                let path = SamplePath {
                    values: unit.values.iter().map(|v| v * factor).collect(),
                    grid: self.grid,
                    hurst: self.model.hurst,
                };
                out.push(supremum_on_grid(&path, &common, &self.model, self.model.drifts.drift(i, n))?);
            }
        }
        Ok(out)
    }
}

/// Convenience wrapper: builds a sampler and runs one replication.
pub fn batch_order_statistics(
    model: &ModelSpec,
    n: u64,
    k: usize,
    grid: GridSpec,
    level: Option<f64>,
    streams: &ReplicationStreams,
) -> Result<SupremaBatch> {
    let levels: Vec<f64> = level.into_iter().collect();
    SupremaSampler::new(*model, grid)?.batch(n, k, &levels, false, streams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStreamPlan;
    use proptest::prelude::*;

    fn bm_model(c: f64, sigma0: f64) -> ModelSpec {
        ModelSpec::new(0.5, 0.5, 1.0, sigma0, c).unwrap()
    }

    #[test]
    fn horizon_examples() {
        let m = bm_model(1.0, 1.0);
        assert!((truncation_horizon(&m, 3.0, 3.0).unwrap() - 9.0).abs() < 1e-12);
        assert!((truncation_horizon(&m, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let m = ModelSpec::new(0.8, 0.3, 1.0, 1.0, 2.0).unwrap();
        assert!((argmax_time(0.8, 1.0, 2.0) - 2.0).abs() < 1e-12);
        assert!((truncation_horizon(&m, 1.0, 3.0).unwrap() - 6.0).abs() < 1e-12);
        assert!(truncation_horizon(&m, 0.0, 3.0).is_err());
    }

    #[test]
    fn zero_paths_give_zero() {
        let grid = GridSpec::new(8, 1.0).unwrap();
        let zero = SamplePath::from_values(vec![0.0; 9], grid, 0.5).unwrap();
        let q = supremum_on_grid(&zero, &zero, &bm_model(1.0, 1.0), 1.0).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn linear_path_supremum() {
        let grid = GridSpec::new(10, 1.0).unwrap();
        let idio = SamplePath::from_values(grid.times(), grid, 0.5).unwrap();
        let zero = SamplePath::from_values(vec![0.0; 11], grid, 0.5).unwrap();
        let q = supremum_on_grid(&idio, &zero, &bm_model(0.5, 0.0), 0.5).unwrap();
        assert!((q - 0.5).abs() < 1e-15);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = SamplePath::from_values(vec![0.0; 9], GridSpec::new(8, 1.0).unwrap(), 0.5).unwrap();
        let b = SamplePath::from_values(vec![0.0; 9], GridSpec::new(8, 2.0).unwrap(), 0.5).unwrap();
        assert!(matches!(
            supremum_on_grid(&a, &b, &bm_model(1.0, 1.0), 1.0),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn stub_order_statistics() {
        let b = order_statistics_from(&[5.0, 1.0, 3.0], 2, &[f64::INFINITY, 2.0], false).unwrap();
        assert_eq!(b.kth_stats, vec![5.0, 3.0]);
        assert_eq!(b.exceed_counts, vec![0, 2]);
        assert!(order_statistics_from(&[1.0, 2.0], 2, &[], false).is_err());
    }

    #[test]
    fn oracle_examples() {
        assert!(kth_heap_vs_sort_oracle(&[3.0, 1.0, 2.0], 2));
        assert_eq!(top_k_heap(&[3.0, 1.0, 2.0], 2), vec![3.0, 2.0]);
        assert!(kth_heap_vs_sort_oracle(&[2.0, 2.0, 2.0], 2));
        assert_eq!(top_k_heap(&[2.0, 2.0, 2.0], 2), vec![2.0, 2.0]);
        use rand::Rng;
        let mut rng = RngStreamPlan::new(11).stream(0, 0);
        let v: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        assert!(kth_heap_vs_sort_oracle(&v, 7));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn heap_matches_sort(values in prop::collection::vec(-1e6f64..1e6, 1..200), k in 1usize..20) {
            let k = k.min(values.len());
            prop_assert!(kth_heap_vs_sort_oracle(&values, k));
        }

        #[test]
        fn merged_heaps_match_sort(values in prop::collection::vec(-10i32..10, 2..100), k in 1usize..10, split in 0usize..100) {
            let values: Vec<f64> = values.into_iter().map(f64::from).collect();
            let k = k.min(values.len());
            let split = split.min(values.len());
            let mut left = TopK::new(k);
            let mut right = TopK::new(k);
            values[..split].iter().for_each(|&v| left.push(v));
            values[split..].iter().for_each(|&v| right.push(v));
            prop_assert_eq!(left.merge(right).into_sorted_desc(), top_k_heap(&values, k));
        }
    }

    #[test]
    fn batch_matches_reference_and_is_monotone() {
        let model = ModelSpec::new(0.7, 0.4, 1.0, 0.8, 1.0)
            .unwrap()
            .with_drifts(crate::model::DriftSequence::thinned(1.0, 0.6, 1.5))
            .unwrap();
        let grid = GridSpec::new(128, 20.0).unwrap();
        let sampler = SupremaSampler::new(model, grid).unwrap();
        let streams = RngStreamPlan::new(77).replication(3);
        let reference = sampler.q_values_reference(31, &streams).unwrap();
        let batch = sampler.batch(31, 4, &[0.0, 5.0], true, &streams).unwrap();
        let q = batch.q_values.as_ref().unwrap();
        for (a, b) in q.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
        assert!(batch.kth_stats.windows(2).all(|w| w[0] >= w[1]));
        let streamed = sampler.batch(31, 4, &[0.0, 5.0], false, &streams).unwrap();
        assert_eq!(streamed.kth_stats, batch.kth_stats);
        assert_eq!(streamed.exceed_counts, batch.exceed_counts);
        // exceedance consistency just below the k-th statistic
        let level = batch.kth_stats[3] - 1e-9;
        let b2 = order_statistics_from(q, 4, &[level], false).unwrap();
        assert!(b2.exceed_counts[0] >= 4);
        let inf = sampler.batch(31, 1, &[f64::INFINITY], false, &streams).unwrap();
        assert_eq!(inf.exceed_counts, vec![0]);
    }
}
