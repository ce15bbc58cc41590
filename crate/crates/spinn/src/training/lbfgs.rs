//! Limited-memory BFGS with two-loop recursion and a strong-Wolfe line
//! search (Nocedal & Wright, Algorithms 7.4 / 3.5 / 3.6).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbfgsConfig {
    pub max_iters: usize,
    pub memory: usize,
    /// Terminate when the gradient max-norm drops below this.
    pub grad_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search_evals: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            max_iters: 500,
            memory: 50,
            grad_tol: 1e-9,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evals: 30,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::Config("lbfgs memory must be >= 1".into()));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::Config(
                "lbfgs needs 0 < c1 < c2 < 1 for strong Wolfe".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradTol,
    MaxIters,
    /// Line search could not satisfy the Wolfe conditions; the best iterate
    /// so far is returned. Reported, not fatal.
    LineSearchFailure,
    AlreadyOptimal,
}

#[derive(Debug, Clone, Serialize)]
pub struct LbfgsReport {
    pub iterations: usize,
    pub evaluations: usize,
    pub final_loss: f64,
    pub grad_norm: f64,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Minimize `f` in place. `f(x, grad_out)` returns the loss and fills the
/// gradient. `on_iter(iter, loss, grad_norm)` fires after each accepted step.
pub fn lbfgs_minimize<F, C>(
    f: &mut F,
    x: &mut [f64],
    cfg: &LbfgsConfig,
    mut on_iter: C,
) -> Result<LbfgsReport>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
    C: FnMut(usize, f64, f64),
{
    cfg.validate()?;
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut fx = f(x, &mut grad)?;
    let mut evaluations = 1;
    if !fx.is_finite() {
        return Err(Error::Numerical(format!(
            "loss is not finite at the initial point ({fx})"
        )));
    }
    if norm_inf(&grad) <= cfg.grad_tol {
        return Ok(LbfgsReport {
            iterations: 0,
            evaluations,
            final_loss: fx,
            grad_norm: norm_inf(&grad),
            termination: Termination::AlreadyOptimal,
        });
    }

    let mut history: VecDeque<Pair> = VecDeque::with_capacity(cfg.memory);
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;

    for iter in 0..cfg.max_iters {
        // Two-loop recursion: d = −H·∇f
        let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for pair in history.iter().rev() {
            let a = pair.rho * dot(&pair.s, &d);
            for i in 0..n {
                d[i] -= a * pair.y[i];
            }
            alphas.push(a);
        }
        if let Some(last) = history.back() {
            let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
            for v in d.iter_mut() {
                *v *= gamma;
            }
        }
        for (pair, a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = pair.rho * dot(&pair.y, &d);
            for i in 0..n {
                d[i] += (a - b) * pair.s[i];
            }
        }

        let mut dg = dot(&d, &grad);
        if dg >= 0.0 {
            // Curvature information went stale; restart from steepest descent.
            history.clear();
            for i in 0..n {
                d[i] = -grad[i];
            }
            dg = dot(&d, &grad);
        }

        let alpha0 = if iter == 0 {
            (1.0 / norm_inf(&grad)).min(1.0)
        } else {
            1.0
        };
        let ls = strong_wolfe(f, x, fx, &grad, &d, dg, alpha0, cfg)?;
        evaluations += ls.evaluations;
        let Some(step) = ls.accepted else {
            termination = Termination::LineSearchFailure;
            break;
        };

        // s = α·d, y = ∇f₊ − ∇f
        let mut s = vec![0.0; n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            s[i] = step.alpha * d[i];
            x[i] += s[i];
            y[i] = step.grad[i] - grad[i];
        }
        fx = step.loss;
        grad = step.grad;
        iterations = iter + 1;

        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&y, &y).max(1e-300) {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back(Pair {
                s,
                y,
                rho: 1.0 / sy,
            });
        }

        let gnorm = norm_inf(&grad);
        on_iter(iterations, fx, gnorm);
        if gnorm <= cfg.grad_tol {
            termination = Termination::GradTol;
            break;
        }
    }

    Ok(LbfgsReport {
        iterations,
        evaluations,
        final_loss: fx,
        grad_norm: norm_inf(&grad),
        termination,
    })
}

struct Accepted {
    alpha: f64,
    loss: f64,
    grad: Vec<f64>,
}

struct LineSearchOutcome {
    accepted: Option<Accepted>,
    evaluations: usize,
}

/// Strong-Wolfe line search along `d` from `x0`. `phi0`/`dphi0` are the loss
/// and directional derivative at α = 0 (dphi0 < 0).
fn strong_wolfe<F>(
    f: &mut F,
    x0: &[f64],
    phi0: f64,
    _grad0: &[f64],
    d: &[f64],
    dphi0: f64,
    alpha0: f64,
    cfg: &LbfgsConfig,
) -> Result<LineSearchOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let n = x0.len();
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut evals = 0;

    let mut eval = |alpha: f64, xt: &mut Vec<f64>, gt: &mut Vec<f64>| -> Result<(f64, f64)> {
        for i in 0..n {
            xt[i] = x0[i] + alpha * d[i];
        }
        let phi = f(xt, gt)?;
        Ok((phi, dot(gt, d)))
    };

    let mut alpha_prev = 0.0;
    let mut phi_prev = phi0;
    let mut dphi_prev = dphi0;
    let mut alpha = alpha0;
    let mut bracket: Option<(f64, f64, f64, f64, f64, f64)> = None; // (lo, phi_lo, dphi_lo, hi, phi_hi, dphi_hi)

    for _ in 0..cfg.max_line_search_evals {
        let (phi, dphi) = eval(alpha, &mut xt, &mut gt)?;
        evals += 1;
        if !phi.is_finite() {
            // Step went somewhere wild; shrink hard.
            alpha *= 0.1;
            continue;
        }
        if phi > phi0 + cfg.c1 * alpha * dphi0 || (phi >= phi_prev && alpha_prev > 0.0) {
            bracket = Some((alpha_prev, phi_prev, dphi_prev, alpha, phi, dphi));
            break;
        }
        if dphi.abs() <= -cfg.c2 * dphi0 {
            return Ok(LineSearchOutcome {
                accepted: Some(Accepted {
                    alpha,
                    loss: phi,
                    grad: gt,
                }),
                evaluations: evals,
            });
        }
        if dphi >= 0.0 {
            bracket = Some((alpha, phi, dphi, alpha_prev, phi_prev, dphi_prev));
            break;
        }
        alpha_prev = alpha;
        phi_prev = phi;
        dphi_prev = dphi;
        alpha *= 2.0;
    }

    let Some((mut lo, mut phi_lo, mut dphi_lo, mut hi, mut phi_hi, _dphi_hi)) = bracket else {
        return Ok(LineSearchOutcome {
            accepted: None,
            evaluations: evals,
        });
    };

    // Zoom: quadratic interpolation using φ(lo), φ'(lo), φ(hi), safeguarded
    // toward the interior of the bracket.
    while evals < cfg.max_line_search_evals {
        let denom = 2.0 * (phi_hi - phi_lo - dphi_lo * (hi - lo));
        let mut cand = if denom.abs() > 1e-300 {
            lo - dphi_lo * (hi - lo) * (hi - lo) / denom
        } else {
            0.5 * (lo + hi)
        };
        let (lo_r, hi_r) = if lo < hi { (lo, hi) } else { (hi, lo) };
        let width = hi_r - lo_r;
        if !cand.is_finite() || cand <= lo_r + 0.1 * width || cand >= hi_r - 0.1 * width {
            cand = 0.5 * (lo + hi);
        }

        let (phi, dphi) = eval(cand, &mut xt, &mut gt)?;
        evals += 1;
        if phi > phi0 + cfg.c1 * cand * dphi0 || phi >= phi_lo {
            hi = cand;
            phi_hi = phi;
        } else {
            if dphi.abs() <= -cfg.c2 * dphi0 {
                return Ok(LineSearchOutcome {
                    accepted: Some(Accepted {
                        alpha: cand,
                        loss: phi,
                        grad: gt,
                    }),
                    evaluations: evals,
                });
            }
            if dphi * (hi - lo) >= 0.0 {
                hi = lo;
                phi_hi = phi_lo;
            }
            lo = cand;
            phi_lo = phi;
            dphi_lo = dphi;
        }
        if (hi - lo).abs() * norm_inf(d) < 1e-16 {
            break;
        }
    }

    Ok(LineSearchOutcome {
        accepted: None,
        evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_converges_fast_and_tight() {
        // ‖θ − θ*‖² has exact Newton direction after one update pair.
        let target: Vec<f64> = (0..8).map(|i| i as f64 * 0.3 - 1.0).collect();
        let mut f = |x: &[f64], g: &mut [f64]| {
            let mut loss = 0.0;
            for i in 0..x.len() {
                let d = x[i] - target[i];
                loss += d * d;
                g[i] = 2.0 * d;
            }
            Ok(loss)
        };
        let mut x = vec![0.0; 8];
        let report = lbfgs_minimize(&mut f, &mut x, &LbfgsConfig::default(), |_, _, _| {}).unwrap();
        assert!(report.iterations <= 16, "{} iters", report.iterations);
        let dist: f64 = x
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(dist <= 1e-10, "distance {dist}");
    }

    #[test]
    fn rosenbrock_reaches_minimum() {
        let mut f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            let loss = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            Ok(loss)
        };
        let mut x = vec![-1.2, 1.0];
        let report = lbfgs_minimize(&mut f, &mut x, &LbfgsConfig::default(), |_, _, _| {}).unwrap();
        assert!(
            report.final_loss <= 1e-8,
            "loss {} after {} iters ({:?})",
            report.final_loss,
            report.iterations,
            report.termination
        );
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn already_optimal_start_terminates_immediately() {
        let mut f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * x[0];
            Ok(x[0] * x[0])
        };
        let mut x = vec![0.0];
        let report = lbfgs_minimize(&mut f, &mut x, &LbfgsConfig::default(), |_, _, _| {}).unwrap();
        assert_eq!(report.iterations, 0);
        assert_eq!(report.termination, Termination::AlreadyOptimal);
    }

    #[test]
    fn non_finite_initial_loss_is_an_error() {
        let mut f = |_: &[f64], g: &mut [f64]| {
            g[0] = 0.0;
            Ok(f64::INFINITY)
        };
        let mut x = vec![1.0];
        assert!(lbfgs_minimize(&mut f, &mut x, &LbfgsConfig::default(), |_, _, _| {}).is_err());
    }

    #[test]
    fn config_validation_rejects_bad_wolfe_constants() {
        let bad = LbfgsConfig {
            c1: 0.95,
            c2: 0.9,
            ..LbfgsConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = LbfgsConfig {
            memory: 0,
            ..LbfgsConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
