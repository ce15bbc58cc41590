//! Latin hypercube sampling of collocation points and deterministic
//! mini-batch iteration.
//!
//! All randomness flows through ChaCha8 seeded explicitly, with float
//! conversion and shuffling done on the raw 64-bit stream, so samples are
//! bit-identical across platforms for a fixed seed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problems::Domain;

fn u01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `[0, n)` by rejection, bias-free and stream-stable.
fn bounded(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    debug_assert!(n > 0);
    let zone = n * (u64::MAX / n);
    loop {
        let r = rng.next_u64();
        if r < zone {
            return r % n;
        }
    }
}

fn shuffle<T>(v: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        let j = bounded(rng, (i + 1) as u64) as usize;
        v.swap(i, j);
    }
}

/// One stratified draw per stratum on `[lo, hi]`, shuffled so strata are
/// assigned to point indices in random order.
pub fn lhs_axis(n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut vals: Vec<f64> = (0..n)
        .map(|k| {
            let frac = (k as f64 + u01(rng)) / n as f64;
            lo + (hi - lo) * frac
        })
        .collect();
    shuffle(&mut vals, rng);
    vals
}

/// Collocation points over `[0, T] × [a, b]` with per-axis stratification.
#[derive(Debug, Clone, Serialize)]
pub struct CollocationSet {
    pub points: Vec<(f64, f64)>,
    pub seed: u64,
    pub bounds: Domain,
}

/// Latin hypercube sample of `n` space-time points: projecting onto either
/// axis, each of the `n` equal strata holds exactly one point.
pub fn lhs_sample(n: usize, domain: &Domain, seed: u64) -> Result<CollocationSet> {
    if n == 0 {
        return Err(Error::Config("collocation count must be >= 1".into()));
    }
    domain.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ts = lhs_axis(n, 0.0, domain.horizon, &mut rng);
    let xs = lhs_axis(n, domain.a, domain.b, &mut rng);
    let points = ts.into_iter().zip(xs).collect();
    Ok(CollocationSet {
        points,
        seed,
        bounds: *domain,
    })
}

impl CollocationSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Export as `t,x` rows for run provenance.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::with_capacity(16 + 48 * self.points.len());
        out.push_str("t,x\n");
        for (t, x) in &self.points {
            out.push_str(&format!("{t:.17e},{x:.17e}\n"));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Deterministic epoch/batch iterator over a collocation set. Every epoch
/// visits each point exactly once in a fresh seed-derived permutation; the
/// last batch of an epoch may be short.
#[derive(Debug, Clone)]
pub struct BatchPlan {
    batch_size: usize,
    rng: ChaCha8Rng,
    order: Vec<u32>,
    cursor: usize,
    epoch: usize,
    step: usize,
}

impl BatchPlan {
    pub fn new(n_points: usize, batch_size: usize, seed: u64) -> Result<BatchPlan> {
        if n_points == 0 || batch_size == 0 {
            return Err(Error::Config(
                "batch plan needs n_points >= 1 and batch_size >= 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<u32> = (0..n_points as u32).collect();
        shuffle(&mut order, &mut rng);
        Ok(BatchPlan {
            batch_size,
            rng,
            order,
            cursor: 0,
            epoch: 0,
            step: 0,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Indices of the next batch.
    pub fn next_indices(&mut self) -> &[u32] {
        if self.cursor >= self.order.len() {
            shuffle(&mut self.order, &mut self.rng);
            self.cursor = 0;
            self.epoch += 1;
        }
        let take = self.batch_size.min(self.order.len() - self.cursor);
        let slice = &self.order[self.cursor..self.cursor + take];
        self.cursor += take;
        self.step += 1;
        slice
    }

    /// Points of the next batch, resolved against `set`.
    pub fn next_batch(&mut self, set: &CollocationSet) -> Vec<(f64, f64)> {
        self.next_indices()
            .iter()
            .map(|&i| set.points[i as usize])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_domain() -> Domain {
        Domain {
            a: 0.0,
            b: 1.0,
            horizon: 1.0,
        }
    }

    fn assert_stratified(mut vals: Vec<f64>, lo: f64, hi: f64) {
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = vals.len();
        for (k, v) in vals.iter().enumerate() {
            let stratum_lo = lo + (hi - lo) * k as f64 / n as f64;
            let stratum_hi = lo + (hi - lo) * (k + 1) as f64 / n as f64;
            assert!(
                *v >= stratum_lo && *v <= stratum_hi,
                "value {v} escaped stratum [{stratum_lo}, {stratum_hi})"
            );
        }
    }

    #[test]
    fn single_point_lies_inside_domain() {
        let set = lhs_sample(1, &unit_domain(), 7).unwrap();
        assert_eq!(set.len(), 1);
        let (t, x) = set.points[0];
        assert!((0.0..=1.0).contains(&t));
        assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn zero_points_is_a_config_error() {
        assert!(lhs_sample(0, &unit_domain(), 7).is_err());
    }

    #[test]
    fn four_points_fill_four_t_strata() {
        let set = lhs_sample(4, &unit_domain(), 3).unwrap();
        let ts: Vec<f64> = set.points.iter().map(|p| p.0).collect();
        assert_stratified(ts, 0.0, 1.0);
    }

    #[test]
    fn stratification_holds_on_both_axes_for_many_seeds() {
        let domain = Domain {
            a: -1.0,
            b: 1.0,
            horizon: 2.5,
        };
        for seed in 0..32u64 {
            for n in [1usize, 2, 3, 17, 64] {
                let set = lhs_sample(n, &domain, seed).unwrap();
                assert_stratified(set.points.iter().map(|p| p.0).collect(), 0.0, 2.5);
                assert_stratified(set.points.iter().map(|p| p.1).collect(), -1.0, 1.0);
            }
        }
    }

    #[test]
    fn table_scale_sample_has_unbiased_t_mean() {
        let n = 16384;
        let set = lhs_sample(n, &unit_domain(), 11).unwrap();
        let mean: f64 = set.points.iter().map(|p| p.0).sum::<f64>() / n as f64;
        // Stratified-uniform: sd of the mean is T/√(12n³)… bounded well by
        // the plain 3·T/√(12n) envelope used here.
        let bound = 3.0 / (12.0 * n as f64).sqrt();
        assert!((mean - 0.5).abs() <= bound, "mean {mean}, bound {bound}");
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let a = lhs_sample(128, &unit_domain(), 5).unwrap();
        let b = lhs_sample(128, &unit_domain(), 5).unwrap();
        assert_eq!(a.points, b.points);
        let c = lhs_sample(128, &unit_domain(), 6).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn full_batch_returns_whole_set_each_epoch() {
        let set = lhs_sample(32, &unit_domain(), 1).unwrap();
        let mut plan = BatchPlan::new(set.len(), 32, 9).unwrap();
        let batch = plan.next_batch(&set);
        assert_eq!(batch.len(), 32);
        let mut sorted = batch.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut expected = set.points.clone();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(sorted, expected);
    }

    #[test]
    fn unit_batches_cover_the_set_exactly_once_per_epoch() {
        let set = lhs_sample(17, &unit_domain(), 2).unwrap();
        let mut plan = BatchPlan::new(set.len(), 1, 4).unwrap();
        let mut seen = Vec::new();
        for _ in 0..17 {
            let b = plan.next_batch(&set);
            assert_eq!(b.len(), 1);
            seen.push(b[0]);
        }
        assert_eq!(plan.epoch(), 0);
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut expected = set.points.clone();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(seen, expected);
        // Next call rolls the epoch.
        plan.next_indices();
        assert_eq!(plan.epoch(), 1);
    }

    #[test]
    fn short_last_batch_and_epoch_coverage() {
        let set = lhs_sample(10, &unit_domain(), 13).unwrap();
        let mut plan = BatchPlan::new(set.len(), 4, 21).unwrap();
        let sizes: Vec<usize> = (0..3).map(|_| plan.next_indices().len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
    }

    #[test]
    fn batch_sequences_are_seed_deterministic() {
        let set = lhs_sample(64, &unit_domain(), 8).unwrap();
        let run = |seed: u64| {
            let mut plan = BatchPlan::new(set.len(), 16, seed).unwrap();
            (0..12)
                .flat_map(|_| plan.next_indices().to_vec())
                .collect::<Vec<u32>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn csv_export_roundtrips_values() {
        let set = lhs_sample(8, &unit_domain(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("points.csv");
        set.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x"));
        for ((t, x), line) in set.points.iter().zip(lines) {
            let mut cols = line.split(',');
            let tv: f64 = cols.next().unwrap().parse().unwrap();
            let xv: f64 = cols.next().unwrap().parse().unwrap();
            assert_eq!(tv, *t);
            assert_eq!(xv, *x);
        }
    }
}
