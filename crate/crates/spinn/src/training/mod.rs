//! Loss assembly and the two-stage training loop.
//!
//! The structure-preserving loss is the mean squared PDE residual of the
//! constrained output over collocation points — no initial- or boundary-
//! condition terms, because the constraint satisfies both identically. The
//! baseline three-term loss (residual + IC mismatch + periodic-pair
//! mismatch) is kept for comparison runs.
//!
//! Training runs Adam over mini-batches first, then L-BFGS on the full
//! collocation set. Everything is seed-deterministic in serial mode; with
//! `shards > 1`, batches fan out over per-shard tapes and gradients reduce
//! in fixed shard order, so runs are reproducible at a fixed shard count.

mod adam;
mod lbfgs;

pub use adam::{AdamParams, AdamState};
pub use lbfgs::{lbfgs_minimize, LbfgsConfig, LbfgsReport, Termination};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Arith;
use crate::model::SpModel;
use crate::problems::{residual_with, PdeProblem, ResidualCoeffs};
use crate::sampling::{lhs_axis, lhs_sample, BatchPlan};
use crate::tape::{Tape, Var};

/// Which loss functional to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    StructurePreserving,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub adam_steps: usize,
    pub adam: AdamParams,
    /// Optional per-step multiplicative learning-rate decay (e.g. 0.99995);
    /// `None` keeps the rate constant, matching the reference protocol.
    pub lr_decay: Option<f64>,
    pub lbfgs: LbfgsConfig,
    pub batch_size: usize,
    pub n_collocation: usize,
    pub sample_seed: u64,
    pub batch_seed: u64,
    /// Draw a fresh collocation set every this many Adam steps (0 = never).
    pub resample_every: usize,
    pub loss_mode: LossMode,
    /// Initial-condition and boundary-pair point counts for the baseline
    /// loss; ignored in structure-preserving mode.
    pub n_ic: usize,
    pub n_bc: usize,
    /// Gradient shards. 1 = fully serial.
    pub shards: usize,
    /// Emit a log row every this many Adam steps (L-BFGS logs per iteration).
    pub log_every: usize,
    pub divergence_threshold: f64,
    pub divergence_patience: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            adam_steps: 50_000,
            adam: AdamParams::default(),
            lr_decay: None,
            lbfgs: LbfgsConfig::default(),
            batch_size: 4096,
            n_collocation: 16_384,
            sample_seed: 0,
            batch_seed: 1,
            resample_every: 0,
            loss_mode: LossMode::StructurePreserving,
            n_ic: 512,
            n_bc: 512,
            shards: 1,
            log_every: 1,
            divergence_threshold: 1e6,
            divergence_patience: 1000,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        self.lbfgs.validate()?;
        if self.batch_size == 0 || self.n_collocation == 0 {
            return Err(Error::Config(
                "batch size and collocation count must be >= 1".into(),
            ));
        }
        if self.shards == 0 {
            return Err(Error::Config("shards must be >= 1".into()));
        }
        if let Some(d) = self.lr_decay {
            if !(0.0 < d && d <= 1.0) {
                return Err(Error::Config(format!(
                    "lr_decay must lie in (0, 1], got {d}"
                )));
            }
        }
        Ok(())
    }
}

/// Loss terms for one evaluation. `total = residual + ic + bc`; the last two
/// are zero in structure-preserving mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub residual: f64,
    pub ic: f64,
    pub bc: f64,
    pub per_component_residual: Vec<f64>,
}

/// Point sets for the baseline three-term loss.
#[derive(Debug, Clone)]
pub struct BaselinePoints {
    pub collocation: Vec<(f64, f64)>,
    /// x positions of initial-condition samples (t = 0).
    pub ic_x: Vec<f64>,
    /// t positions of boundary pairs (x = a vs x = a + P).
    pub bc_t: Vec<f64>,
}

/// Mean squared constrained residual over `batch`, assembled on one tape.
///
/// Returns the breakdown and the taped total, so
/// [`Tape::grad_params`] gives the parameter gradient. Intended for small
/// batches (gradient checks, tests); the training loop uses [`LossEvaluator`]
/// with per-point tape reuse instead.
pub fn sp_loss(
    tape: &mut Tape,
    model: &SpModel,
    batch: &[(f64, f64)],
) -> Result<(LossBreakdown, Var)> {
    if batch.is_empty() {
        return Err(Error::Config("sp_loss needs a non-empty batch".into()));
    }
    let handles = model.bind(tape)?;
    let coeffs = model.problem.residual_coeffs()?;
    let ncomp = model.components();
    let mut comp_sums = vec![0.0; ncomp];
    let mut total: Option<Var> = None;
    for &(t, x) in batch {
        let jets = model.eval_with(tape, &handles, t, x)?;
        let rs = residual_with(tape, &coeffs, &jets);
        for (c, r) in rs.into_iter().enumerate() {
            let sq = tape.mul(r, r);
            comp_sums[c] += tape.value_of(sq);
            total = Some(match total {
                None => sq,
                Some(acc) => tape.add(acc, sq),
            });
        }
    }
    let inv_n = 1.0 / batch.len() as f64;
    let loss = tape.scale(total.unwrap(), inv_n);
    for s in comp_sums.iter_mut() {
        *s *= inv_n;
    }
    let value = tape.value_of(loss);
    Ok((
        LossBreakdown {
            total: value,
            residual: value,
            ic: 0.0,
            bc: 0.0,
            per_component_residual: comp_sums,
        },
        loss,
    ))
}

/// Baseline three-term loss on one tape: mean squared residual of the raw
/// network output, plus mean squared IC mismatch, plus mean squared
/// periodic-pair mismatch.
pub fn baseline_loss(
    tape: &mut Tape,
    model: &SpModel,
    points: &BaselinePoints,
) -> Result<(LossBreakdown, Var)> {
    if points.collocation.is_empty() || points.ic_x.is_empty() || points.bc_t.is_empty() {
        return Err(Error::Config(
            "baseline loss needs non-empty collocation, IC and BC sets".into(),
        ));
    }
    let handles = model.bind(tape)?;
    let coeffs = model.problem.residual_coeffs()?;
    let ncomp = model.components();
    let period = model.problem.domain.period();
    let a = model.problem.domain.a;

    let mut comp_sums = vec![0.0; ncomp];
    let mut res_total: Option<Var> = None;
    for &(t, x) in &points.collocation {
        let jets = model.eval_with(tape, &handles, t, x)?;
        let rs = residual_with(tape, &coeffs, &jets);
        for (c, r) in rs.into_iter().enumerate() {
            let sq = tape.mul(r, r);
            comp_sums[c] += tape.value_of(sq);
            res_total = Some(match res_total {
                None => sq,
                Some(acc) => tape.add(acc, sq),
            });
        }
    }
    let inv_ncl = 1.0 / points.collocation.len() as f64;
    let res_term = tape.scale(res_total.unwrap(), inv_ncl);
    for s in comp_sums.iter_mut() {
        *s *= inv_ncl;
    }

    let mut ic_total: Option<Var> = None;
    for &x in &points.ic_x {
        let jets = model.eval_with(tape, &handles, 0.0, x)?;
        for (c, jet) in jets.iter().enumerate() {
            let u0 = model.problem.u0_jet(c, x).u;
            let diff = tape.add_k(jet.u, -u0);
            let sq = tape.mul(diff, diff);
            ic_total = Some(match ic_total {
                None => sq,
                Some(acc) => tape.add(acc, sq),
            });
        }
    }
    let ic_term = tape.scale(ic_total.unwrap(), 1.0 / points.ic_x.len() as f64);

    let mut bc_total: Option<Var> = None;
    for &t in &points.bc_t {
        let left = model.eval_with(tape, &handles, t, a)?;
        let right = model.eval_with(tape, &handles, t, a + period)?;
        for c in 0..ncomp {
            let diff = tape.sub(left[c].u, right[c].u);
            let sq = tape.mul(diff, diff);
            bc_total = Some(match bc_total {
                None => sq,
                Some(acc) => tape.add(acc, sq),
            });
        }
    }
    let bc_term = tape.scale(bc_total.unwrap(), 1.0 / points.bc_t.len() as f64);

    let partial = tape.add(res_term, ic_term);
    let loss = tape.add(partial, bc_term);

    Ok((
        LossBreakdown {
            total: tape.value_of(loss),
            residual: tape.value_of(res_term),
            ic: tape.value_of(ic_term),
            bc: tape.value_of(bc_term),
            per_component_residual: comp_sums,
        },
        loss,
    ))
}

struct Shard {
    tape: Tape,
    handles: Vec<Var>,
    grad: Vec<f64>,
    comp_sums: Vec<f64>,
    loss_sum: f64,
}

/// Reusable loss+gradient engine with per-point tapes and optional sharding.
///
/// Gradients accumulate per point in batch order within a shard and shards
/// reduce in index order, so results are deterministic for a fixed shard
/// count (and bitwise reproducible run-to-run).
pub struct LossEvaluator {
    coeffs: ResidualCoeffs,
    shards: Vec<Shard>,
    n_params: usize,
    ncomp: usize,
}

impl LossEvaluator {
    pub fn new(model: &SpModel, shards: usize) -> Result<LossEvaluator> {
        if shards == 0 {
            return Err(Error::Config("shards must be >= 1".into()));
        }
        let n_params = model.param_count();
        let ncomp = model.components();
        let shards = (0..shards)
            .map(|_| Shard {
                tape: Tape::new(n_params),
                handles: Vec::new(),
                grad: vec![0.0; n_params],
                comp_sums: vec![0.0; ncomp],
                loss_sum: 0.0,
            })
            .collect();
        Ok(LossEvaluator {
            coeffs: model.problem.residual_coeffs()?,
            shards,
            n_params,
            ncomp,
        })
    }

    fn prepare(&mut self, params: &[f64]) -> Result<()> {
        for shard in &mut self.shards {
            shard.handles = shard.tape.bind_params(params)?;
            shard.grad.fill(0.0);
            shard.comp_sums.fill(0.0);
            shard.loss_sum = 0.0;
        }
        Ok(())
    }

    /// Σ over shards in index order of per-shard sums, scaled by 1/n; the
    /// residual-term gradient lands in `grad` (overwritten).
    fn reduce(&mut self, n: usize, grad: &mut [f64]) -> (f64, Vec<f64>) {
        let inv = 1.0 / n as f64;
        grad.fill(0.0);
        let mut loss = 0.0;
        let mut comps = vec![0.0; self.ncomp];
        for shard in &self.shards {
            loss += shard.loss_sum;
            for (acc, g) in grad.iter_mut().zip(&shard.grad) {
                *acc += g;
            }
            for (acc, c) in comps.iter_mut().zip(&shard.comp_sums) {
                *acc += c;
            }
        }
        for g in grad.iter_mut() {
            *g *= inv;
        }
        for c in comps.iter_mut() {
            *c *= inv;
        }
        (loss * inv, comps)
    }

    /// Structure-preserving loss and gradient over `points`.
    pub fn sp_loss_grad(
        &mut self,
        model: &SpModel,
        params: &[f64],
        points: &[(f64, f64)],
        grad: &mut [f64],
    ) -> Result<LossBreakdown> {
        if points.is_empty() {
            return Err(Error::Config("sp_loss needs a non-empty batch".into()));
        }
        if grad.len() != self.n_params {
            return Err(Error::Config("gradient buffer length mismatch".into()));
        }
        self.prepare(params)?;
        let coeffs = self.coeffs;
        if self.shards.len() == 1 {
            residual_chunk(model, &coeffs, &mut self.shards[0], points)?;
        } else {
            let chunk = points.len().div_ceil(self.shards.len());
            self.shards
                .par_iter_mut()
                .zip(points.par_chunks(chunk))
                .map(|(shard, chunk)| residual_chunk(model, &coeffs, shard, chunk))
                .collect::<Result<Vec<()>>>()?;
        }
        let (total, comps) = self.reduce(points.len(), grad);
        Ok(LossBreakdown {
            total,
            residual: total,
            ic: 0.0,
            bc: 0.0,
            per_component_residual: comps,
        })
    }

    /// Baseline three-term loss and gradient.
    pub fn baseline_loss_grad(
        &mut self,
        model: &SpModel,
        params: &[f64],
        points: &BaselinePoints,
        grad: &mut [f64],
    ) -> Result<LossBreakdown> {
        if points.collocation.is_empty() || points.ic_x.is_empty() || points.bc_t.is_empty() {
            return Err(Error::Config(
                "baseline loss needs non-empty collocation, IC and BC sets".into(),
            ));
        }
        if grad.len() != self.n_params {
            return Err(Error::Config("gradient buffer length mismatch".into()));
        }
        self.prepare(params)?;
        let coeffs = self.coeffs;
        if self.shards.len() == 1 {
            residual_chunk(model, &coeffs, &mut self.shards[0], &points.collocation)?;
        } else {
            let chunk = points.collocation.len().div_ceil(self.shards.len());
            self.shards
                .par_iter_mut()
                .zip(points.collocation.par_chunks(chunk))
                .map(|(shard, chunk)| residual_chunk(model, &coeffs, shard, chunk))
                .collect::<Result<Vec<()>>>()?;
        }
        let (res_term, comps) = self.reduce(points.collocation.len(), grad);

        // IC and BC terms are small sets; evaluate serially on shard 0 and
        // fold their scaled gradients into the output buffer.
        let ncomp = self.ncomp;
        let shard = &mut self.shards[0];
        let mut term_grad = vec![0.0; self.n_params];

        let mut ic_sum = 0.0;
        for &x in &points.ic_x {
            shard.tape.reset();
            let jets = model.eval_with(&mut shard.tape, &shard.handles, 0.0, x)?;
            let mut point_total: Option<Var> = None;
            for (c, jet) in jets.iter().enumerate() {
                let u0 = model.problem.u0_jet(c, x).u;
                let diff = shard.tape.add_k(jet.u, -u0);
                let sq = shard.tape.mul(diff, diff);
                point_total = Some(match point_total {
                    None => sq,
                    Some(acc) => shard.tape.add(acc, sq),
                });
            }
            let pt = point_total.unwrap();
            ic_sum += shard.tape.value_of(pt);
            shard.tape.accumulate_grad(pt, 1.0, &mut term_grad)?;
        }
        let inv_ic = 1.0 / points.ic_x.len() as f64;
        for (acc, g) in grad.iter_mut().zip(&term_grad) {
            *acc += g * inv_ic;
        }
        let ic_term = ic_sum * inv_ic;

        term_grad.fill(0.0);
        let a = model.problem.domain.a;
        let period = model.problem.domain.period();
        let mut bc_sum = 0.0;
        for &t in &points.bc_t {
            shard.tape.reset();
            let left = model.eval_with(&mut shard.tape, &shard.handles, t, a)?;
            let right = model.eval_with(&mut shard.tape, &shard.handles, t, a + period)?;
            let mut point_total: Option<Var> = None;
            for c in 0..ncomp {
                let diff = shard.tape.sub(left[c].u, right[c].u);
                let sq = shard.tape.mul(diff, diff);
                point_total = Some(match point_total {
                    None => sq,
                    Some(acc) => shard.tape.add(acc, sq),
                });
            }
            let pt = point_total.unwrap();
            bc_sum += shard.tape.value_of(pt);
            shard.tape.accumulate_grad(pt, 1.0, &mut term_grad)?;
        }
        let inv_bc = 1.0 / points.bc_t.len() as f64;
        for (acc, g) in grad.iter_mut().zip(&term_grad) {
            *acc += g * inv_bc;
        }
        let bc_term = bc_sum * inv_bc;

        Ok(LossBreakdown {
            total: res_term + ic_term + bc_term,
            residual: res_term,
            ic: ic_term,
            bc: bc_term,
            per_component_residual: comps,
        })
    }
}

/// Per-point residual loss over one chunk: rebuild the expression, read the
/// value, run the reverse pass, accumulate into the shard.
fn residual_chunk(
    model: &SpModel,
    coeffs: &ResidualCoeffs,
    shard: &mut Shard,
    chunk: &[(f64, f64)],
) -> Result<()> {
    for &(t, x) in chunk {
        shard.tape.reset();
        let jets = model.eval_with(&mut shard.tape, &shard.handles, t, x)?;
        let rs = residual_with(&mut shard.tape, coeffs, &jets);
        let mut point_total: Option<Var> = None;
        for (c, r) in rs.into_iter().enumerate() {
            let sq = shard.tape.mul(r, r);
            shard.comp_sums[c] += shard.tape.value_of(sq);
            point_total = Some(match point_total {
                None => sq,
                Some(acc) => shard.tape.add(acc, sq),
            });
        }
        let pt = point_total.unwrap();
        shard.loss_sum += shard.tape.value_of(pt);
        shard.tape.accumulate_grad(pt, 1.0, &mut shard.grad)?;
    }
    Ok(())
}

/// One row of the training log. Wall time is informational and excluded from
/// determinism comparisons.
#[derive(Debug, Clone, Serialize)]
pub struct LogRow {
    pub phase: &'static str,
    pub step: usize,
    pub total: f64,
    pub residual: f64,
    pub ic: f64,
    pub bc: f64,
    pub grad_norm: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::with_capacity(64 + 120 * self.rows.len());
        out.push_str("phase,step,total,residual_term,ic_term,bc_term,grad_norm,wall_ms\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.3}\n",
                r.phase, r.step, r.total, r.residual, r.ic, r.bc, r.grad_norm, r.wall_ms
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Bitwise equality of every deterministic column (wall time excluded).
    pub fn numeric_eq(&self, other: &TrainingLog) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.phase == b.phase
                    && a.step == b.step
                    && a.total.to_bits() == b.total.to_bits()
                    && a.residual.to_bits() == b.residual.to_bits()
                    && a.ic.to_bits() == b.ic.to_bits()
                    && a.bc.to_bits() == b.bc.to_bits()
                    && a.grad_norm.to_bits() == b.grad_norm.to_bits()
            })
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: SpModel,
    pub log: TrainingLog,
    pub lbfgs: Option<LbfgsReport>,
    /// Set when training stopped early (divergence, non-finite gradients).
    pub aborted: Option<String>,
    pub adam_seconds: f64,
    pub lbfgs_seconds: f64,
    pub final_loss: f64,
}

/// Two-stage training: Adam over mini-batches, then L-BFGS on the full
/// collocation set. Fully seed-deterministic in serial mode (`shards = 1`).
pub fn train(
    problem: &PdeProblem,
    model_config: &crate::model::ModelConfig,
    cfg: &TrainingConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let model = SpModel::build(problem, model_config)?;
    match cfg.loss_mode {
        LossMode::StructurePreserving if !model.config.constrained => {
            return Err(Error::Config(
                "structure-preserving training requires a constrained model".into(),
            ));
        }
        LossMode::Baseline if model.config.constrained => {
            return Err(Error::Config(
                "baseline training requires an unconstrained model \
                 (set constrained = false)"
                    .into(),
            ));
        }
        _ => {}
    }
    train_model(model, cfg)
}

/// Training loop over an already-built model.
pub fn train_model(mut model: SpModel, cfg: &TrainingConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let problem = model.problem.clone();

    let mut collocation = lhs_sample(cfg.n_collocation, &problem.domain, cfg.sample_seed)?;
    let mut plan = BatchPlan::new(collocation.len(), cfg.batch_size, cfg.batch_seed)?;
    let baseline_points = match cfg.loss_mode {
        LossMode::Baseline => {
            use rand::SeedableRng;
            // Separate IC/BC streams derived from the sample seed.
            let mut ic_rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.sample_seed ^ 0x4943);
            let mut bc_rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.sample_seed ^ 0x4243);
            Some((
                lhs_axis(cfg.n_ic, problem.domain.a, problem.domain.b, &mut ic_rng),
                lhs_axis(cfg.n_bc, 0.0, problem.domain.horizon, &mut bc_rng),
            ))
        }
        LossMode::StructurePreserving => None,
    };

    let mut evaluator = LossEvaluator::new(&model, cfg.shards)?;
    let mut params = model.flat_params();
    let mut grad = vec![0.0; params.len()];
    let mut adam = AdamState::new(params.len());
    let mut log = TrainingLog::default();
    let mut aborted = None;
    let mut divergence_streak = 0usize;
    let mut lr = cfg.adam.lr;
    let mut resample_round = 0u64;

    let mut eval_batch = |evaluator: &mut LossEvaluator,
                          model: &SpModel,
                          params: &[f64],
                          pts: &[(f64, f64)],
                          grad: &mut [f64]|
     -> Result<LossBreakdown> {
        match (&cfg.loss_mode, &baseline_points) {
            (LossMode::StructurePreserving, _) => {
                evaluator.sp_loss_grad(model, params, pts, grad)
            }
            (LossMode::Baseline, Some((ic_x, bc_t))) => {
                let bp = BaselinePoints {
                    collocation: pts.to_vec(),
                    ic_x: ic_x.clone(),
                    bc_t: bc_t.clone(),
                };
                evaluator.baseline_loss_grad(model, params, &bp, grad)
            }
            (LossMode::Baseline, None) => unreachable!(),
        }
    };

    // ---- Adam phase over mini-batches -----------------------------------
    let adam_start = std::time::Instant::now();
    let mut batch_points: Vec<(f64, f64)> = Vec::with_capacity(cfg.batch_size);
    for step in 1..=cfg.adam_steps {
        batch_points.clear();
        for &i in plan.next_indices() {
            batch_points.push(collocation.points[i as usize]);
        }
        let breakdown = eval_batch(&mut evaluator, &model, &params, &batch_points, &mut grad)?;
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();

        if cfg.log_every > 0 && (step % cfg.log_every == 0 || step == 1) {
            log.rows.push(LogRow {
                phase: "adam",
                step,
                total: breakdown.total,
                residual: breakdown.residual,
                ic: breakdown.ic,
                bc: breakdown.bc,
                grad_norm,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }

        if breakdown.total > cfg.divergence_threshold {
            divergence_streak += 1;
            if divergence_streak >= cfg.divergence_patience {
                aborted = Some(format!(
                    "training diverged: loss {} above {} for {} consecutive steps \
                     (adam step {step})",
                    breakdown.total, cfg.divergence_threshold, divergence_streak
                ));
                break;
            }
        } else {
            divergence_streak = 0;
        }

        if let Err(e) = adam.step(&mut params, &grad, &cfg.adam, lr) {
            aborted = Some(format!("{e} (loss {})", breakdown.total));
            break;
        }
        if let Some(d) = cfg.lr_decay {
            lr *= d;
        }

        if cfg.resample_every > 0 && step % cfg.resample_every == 0 {
            resample_round += 1;
            collocation = lhs_sample(
                cfg.n_collocation,
                &problem.domain,
                cfg.sample_seed.wrapping_add(resample_round),
            )?;
            plan = BatchPlan::new(
                collocation.len(),
                cfg.batch_size,
                cfg.batch_seed.wrapping_add(resample_round),
            )?;
        }
    }
    let adam_seconds = adam_start.elapsed().as_secs_f64();

    // ---- L-BFGS phase on the full collocation set ------------------------
    let lbfgs_start = std::time::Instant::now();
    let mut lbfgs_report = None;
    if aborted.is_none() && cfg.lbfgs.max_iters > 0 {
        let full = collocation.points.clone();
        let mut objective = |x: &[f64], g: &mut [f64]| -> Result<f64> {
            Ok(eval_batch(&mut evaluator, &model, x, &full, g)?.total)
        };
        let log_rows = std::cell::RefCell::new(Vec::new());
        let report = lbfgs_minimize(&mut objective, &mut params, &cfg.lbfgs, |iter, f, gnorm| {
            log_rows.borrow_mut().push(LogRow {
                phase: "lbfgs",
                step: iter,
                total: f,
                residual: f,
                ic: 0.0,
                bc: 0.0,
                grad_norm: gnorm,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        })?;
        log.rows.extend(log_rows.into_inner());
        lbfgs_report = Some(report);
    }
    let lbfgs_seconds = lbfgs_start.elapsed().as_secs_f64();

    // Final full-set loss for the record (baseline uses its three terms).
    let final_loss = eval_batch(
        &mut evaluator,
        &model,
        &params,
        &collocation.points,
        &mut grad,
    )?
    .total;

    model.set_flat_params(&params)?;
    Ok(TrainOutcome {
        model,
        log,
        lbfgs: lbfgs_report,
        aborted,
        adam_seconds,
        lbfgs_seconds,
        final_loss,
    })
}
