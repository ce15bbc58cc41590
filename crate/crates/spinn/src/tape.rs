//! Reverse-mode gradient tape over scalar operations.
//!
//! The tape is a Wengert list: each appended node stores its opcode, operand
//! indices and value. Values are computed eagerly on append, so a "forward
//! pass" is just building the expression; [`Tape::grad_params`] then runs one
//! reverse sweep and accumulates parameter adjoints.
//!
//! Intended use in training: bind the parameter vector once, [`Tape::mark`]
//! the position, then per collocation point rewind to the mark, rebuild the
//! residual expression and run the reverse pass. The parameter prefix is kept
//! across rewinds; node storage is reused, so the hot loop does not allocate.
//!
//! A tape is single-writer. Parallelism over batch shards uses one tape per
//! shard and reduces shard gradients in fixed shard order.

use crate::error::{Error, Result};
use crate::jet::Arith;

/// Handle to a scalar recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Op {
    Const,
    Param,
    Add,
    Sub,
    Mul,
    Neg,
    /// `aux * a`
    Scale,
    /// `a + aux`
    AddK,
    Tanh,
    Exp,
    Sin,
    Cos,
    Recip,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    a: u32,
    b: u32,
    aux: f64,
}

/// Wengert-list tape with a fixed number of parameter slots.
#[derive(Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    vals: Vec<f64>,
    adj: Vec<f64>,
    /// Node index per parameter slot; `u32::MAX` when unbound.
    param_nodes: Vec<u32>,
    params_bound: bool,
    /// Length of the protected prefix (canonical constants + bound params).
    frozen: usize,
}

/// Position returned by [`Tape::mark`], consumed by [`Tape::rewind`].
#[derive(Debug, Clone, Copy)]
pub struct TapeMark(usize);

const ZERO: Var = Var(0);
const ONE: Var = Var(1);

impl Tape {
    /// Tape with `n_params` parameter slots. Slots must be bound with
    /// [`Tape::bind_params`] before use.
    pub fn new(n_params: usize) -> Tape {
        let mut t = Tape {
            nodes: Vec::with_capacity(1024),
            vals: Vec::with_capacity(1024),
            adj: Vec::new(),
            param_nodes: vec![u32::MAX; n_params],
            params_bound: false,
            frozen: 0,
        };
        t.push(Op::Const, 0, 0, 0.0); // canonical zero
        t.push(Op::Const, 0, 0, 1.0); // canonical one
        t.frozen = 2;
        t
    }

    pub fn n_params(&self) -> usize {
        self.param_nodes.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, a: u32, b: u32, aux: f64) -> Var {
        let idx = self.nodes.len() as u32;
        let val = match op {
            Op::Const => aux,
            Op::Param => aux,
            Op::Add => self.vals[a as usize] + self.vals[b as usize],
            Op::Sub => self.vals[a as usize] - self.vals[b as usize],
            Op::Mul => self.vals[a as usize] * self.vals[b as usize],
            Op::Neg => -self.vals[a as usize],
            Op::Scale => aux * self.vals[a as usize],
            Op::AddK => self.vals[a as usize] + aux,
            Op::Tanh => self.vals[a as usize].tanh(),
            Op::Exp => self.vals[a as usize].exp(),
            Op::Sin => self.vals[a as usize].sin(),
            Op::Cos => self.vals[a as usize].cos(),
            Op::Recip => self.vals[a as usize].recip(),
        };
        self.nodes.push(Node { op, a, b, aux });
        self.vals.push(val);
        Var(idx)
    }

    /// Bind all parameter slots to `values`, in slot order, directly after the
    /// canonical constants. Re-binding updates values in place.
    pub fn bind_params(&mut self, values: &[f64]) -> Result<Vec<Var>> {
        if values.len() != self.param_nodes.len() {
            return Err(Error::Tape(format!(
                "bind_params: expected {} values, got {}",
                self.param_nodes.len(),
                values.len()
            )));
        }
        if !self.params_bound {
            // First bind: append param nodes and freeze them.
            let mut handles = Vec::with_capacity(values.len());
            for (slot, &v) in values.iter().enumerate() {
                let var = self.push(Op::Param, slot as u32, 0, v);
                self.param_nodes[slot] = var.0;
                handles.push(var);
            }
            self.frozen = self.nodes.len();
            self.params_bound = true;
            Ok(handles)
        } else {
            // Subsequent binds only refresh values.
            let mut handles = Vec::with_capacity(values.len());
            for (slot, &v) in values.iter().enumerate() {
                let idx = self.param_nodes[slot] as usize;
                self.nodes[idx].aux = v;
                self.vals[idx] = v;
                handles.push(Var(self.param_nodes[slot]));
            }
            Ok(handles)
        }
    }

    /// Current position; nodes appended later can be discarded with
    /// [`Tape::rewind`].
    pub fn mark(&self) -> TapeMark {
        TapeMark(self.nodes.len())
    }

    /// Discard nodes above `mark`, keeping capacity. The frozen prefix
    /// (constants and parameters) cannot be rewound away.
    pub fn rewind(&mut self, mark: TapeMark) {
        let keep = mark.0.max(self.frozen);
        self.nodes.truncate(keep);
        self.vals.truncate(keep);
    }

    /// Reset to the frozen prefix. Idempotent.
    pub fn reset(&mut self) {
        self.nodes.truncate(self.frozen);
        self.vals.truncate(self.frozen);
    }

    pub fn value_of(&self, v: Var) -> f64 {
        self.vals[v.0 as usize]
    }

    /// Reverse sweep from `out` seeded with `seed`; parameter adjoints are
    /// added into `grads` (not zeroed first, so batches can accumulate).
    pub fn accumulate_grad(&mut self, out: Var, seed: f64, grads: &mut [f64]) -> Result<()> {
        let n = self.nodes.len();
        if (out.0 as usize) >= n {
            return Err(Error::Tape(format!(
                "reverse pass on rewound or incomplete tape: node {} out of {}",
                out.0, n
            )));
        }
        if grads.len() != self.param_nodes.len() {
            return Err(Error::Tape(format!(
                "gradient buffer has {} slots, tape has {}",
                grads.len(),
                self.param_nodes.len()
            )));
        }
        let top = out.0 as usize;
        self.adj.clear();
        self.adj.resize(top + 1, 0.0);
        self.adj[top] = seed;

        for i in (0..=top).rev() {
            let g = self.adj[i];
            if g == 0.0 {
                continue;
            }
            let node = self.nodes[i];
            let a = node.a as usize;
            let b = node.b as usize;
            match node.op {
                Op::Const => {}
                Op::Param => {
                    grads[a] += g;
                }
                Op::Add => {
                    self.adj[a] += g;
                    self.adj[b] += g;
                }
                Op::Sub => {
                    self.adj[a] += g;
                    self.adj[b] -= g;
                }
                Op::Mul => {
                    self.adj[a] += g * self.vals[b];
                    self.adj[b] += g * self.vals[a];
                }
                Op::Neg => {
                    self.adj[a] -= g;
                }
                Op::Scale => {
                    self.adj[a] += g * node.aux;
                }
                Op::AddK => {
                    self.adj[a] += g;
                }
                Op::Tanh => {
                    let y = self.vals[i];
                    self.adj[a] += g * (1.0 - y * y);
                }
                Op::Exp => {
                    self.adj[a] += g * self.vals[i];
                }
                Op::Sin => {
                    self.adj[a] += g * self.vals[a].cos();
                }
                Op::Cos => {
                    self.adj[a] -= g * self.vals[a].sin();
                }
                Op::Recip => {
                    let y = self.vals[i];
                    self.adj[a] -= g * y * y;
                }
            }
        }
        Ok(())
    }

    /// Gradient of `loss` with respect to every parameter slot.
    pub fn grad_params(&mut self, loss: Var) -> Result<Vec<f64>> {
        let mut grads = vec![0.0; self.param_nodes.len()];
        self.accumulate_grad(loss, 1.0, &mut grads)?;
        Ok(grads)
    }
}

impl Arith for Tape {
    type S = Var;

    fn lit(&mut self, v: f64) -> Var {
        if v == 0.0 {
            ZERO
        } else if v == 1.0 {
            ONE
        } else {
            self.push(Op::Const, 0, 0, v)
        }
    }

    fn add(&mut self, a: Var, b: Var) -> Var {
        if a == ZERO {
            return b;
        }
        if b == ZERO {
            return a;
        }
        self.push(Op::Add, a.0, b.0, 0.0)
    }

    fn sub(&mut self, a: Var, b: Var) -> Var {
        if b == ZERO {
            return a;
        }
        if a == ZERO {
            return self.push(Op::Neg, b.0, 0, 0.0);
        }
        self.push(Op::Sub, a.0, b.0, 0.0)
    }

    fn mul(&mut self, a: Var, b: Var) -> Var {
        if a == ZERO || b == ZERO {
            return ZERO;
        }
        if a == ONE {
            return b;
        }
        if b == ONE {
            return a;
        }
        self.push(Op::Mul, a.0, b.0, 0.0)
    }

    fn neg(&mut self, a: Var) -> Var {
        if a == ZERO {
            return ZERO;
        }
        self.push(Op::Neg, a.0, 0, 0.0)
    }

    fn scale(&mut self, a: Var, k: f64) -> Var {
        if a == ZERO || k == 0.0 {
            return ZERO;
        }
        if k == 1.0 {
            return a;
        }
        self.push(Op::Scale, a.0, 0, k)
    }

    fn add_k(&mut self, a: Var, k: f64) -> Var {
        if k == 0.0 {
            return a;
        }
        if a == ZERO {
            return self.lit(k);
        }
        self.push(Op::AddK, a.0, 0, k)
    }

    fn tanh(&mut self, a: Var) -> Var {
        if a == ZERO {
            return ZERO;
        }
        self.push(Op::Tanh, a.0, 0, 0.0)
    }

    fn exp(&mut self, a: Var) -> Var {
        if a == ZERO {
            return ONE;
        }
        self.push(Op::Exp, a.0, 0, 0.0)
    }

    fn sin(&mut self, a: Var) -> Var {
        if a == ZERO {
            return ZERO;
        }
        self.push(Op::Sin, a.0, 0, 0.0)
    }

    fn cos(&mut self, a: Var) -> Var {
        if a == ZERO {
            return ONE;
        }
        self.push(Op::Cos, a.0, 0, 0.0)
    }

    fn recip(&mut self, a: Var) -> Var {
        if a == ONE {
            return ONE;
        }
        self.push(Op::Recip, a.0, 0, 0.0)
    }

    fn value(&self, a: Var) -> f64 {
        self.vals[a.0 as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{jet_mul, jet_tanh, Jet, Jet4, Values};

    #[test]
    fn gradient_of_theta_squared() {
        let mut tape = Tape::new(1);
        let p = tape.bind_params(&[3.0]).unwrap();
        let loss = tape.mul(p[0], p[0]);
        let g = tape.grad_params(loss).unwrap();
        assert_eq!(g, vec![6.0]);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let mut tape = Tape::new(2);
        tape.bind_params(&[1.5, -0.5]).unwrap();
        let loss = tape.lit(7.25);
        let g = tape.grad_params(loss).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn reverse_on_rewound_tape_is_an_error() {
        let mut tape = Tape::new(1);
        let p = tape.bind_params(&[2.0]).unwrap();
        let mark = tape.mark();
        let loss = tape.mul(p[0], p[0]);
        tape.rewind(mark);
        assert!(tape.grad_params(loss).is_err());
    }

    #[test]
    fn reset_is_idempotent_and_reusable() {
        let mut tape = Tape::new(1);
        let p = tape.bind_params(&[4.0]).unwrap();
        for _ in 0..3 {
            let loss = tape.mul(p[0], p[0]);
            let g = tape.grad_params(loss).unwrap();
            assert_eq!(g, vec![8.0]);
            tape.reset();
            tape.reset();
        }
    }

    #[test]
    fn rebinding_updates_values_without_growing() {
        let mut tape = Tape::new(1);
        tape.bind_params(&[1.0]).unwrap();
        let len = tape.len();
        let p = tape.bind_params(&[5.0]).unwrap();
        assert_eq!(tape.len(), len);
        let loss = tape.mul(p[0], p[0]);
        assert_eq!(tape.value_of(loss), 25.0);
    }

    #[test]
    fn chain_gradients_match_finite_differences() {
        // loss(a, b) = tanh(a·x + b)² + sin(a)·exp(b) at fixed x.
        let x = 0.83;
        let f = |a: f64, b: f64| (a * x + b).tanh().powi(2) + a.sin() * b.exp();
        let (a0, b0) = (0.41, -0.27);

        let mut tape = Tape::new(2);
        let p = tape.bind_params(&[a0, b0]).unwrap();
        let xv = tape.lit(x);
        let ax = tape.mul(p[0], xv);
        let inner = tape.add(ax, p[1]);
        let th = tape.tanh(inner);
        let th2 = tape.mul(th, th);
        let sa = tape.sin(p[0]);
        let eb = tape.exp(p[1]);
        let rhs = tape.mul(sa, eb);
        let loss = tape.add(th2, rhs);
        assert!((tape.value_of(loss) - f(a0, b0)).abs() < 1e-15);

        let g = tape.grad_params(loss).unwrap();
        let h = 1e-6;
        let fd_a = (f(a0 + h, b0) - f(a0 - h, b0)) / (2.0 * h);
        let fd_b = (f(a0, b0 + h) - f(a0, b0 - h)) / (2.0 * h);
        assert!((g[0] - fd_a).abs() / fd_a.abs() < 1e-6, "{} vs {}", g[0], fd_a);
        assert!((g[1] - fd_b).abs() / fd_b.abs() < 1e-6, "{} vs {}", g[1], fd_b);
    }

    #[test]
    fn taped_jet_values_equal_plain_jet_values() {
        // Same jet expression through Values and through a tape must agree
        // exactly: identical formulas, identical operation order.
        let t = 0.37;
        let x = -0.56;
        let w = 1.23;

        let mut vals = Values;
        let plain = {
            let tj = Jet::time(&mut vals, t);
            let xj = Jet::space(&mut vals, x);
            let prod = jet_mul(&mut vals, tj, xj);
            let scaled = crate::jet::jet_smul(&mut vals, w, prod);
            jet_tanh(&mut vals, scaled)
        };

        let mut tape = Tape::new(1);
        let p = tape.bind_params(&[w]).unwrap();
        let taped = {
            let tj = Jet::time(&mut tape, t);
            let xj = Jet::space(&mut tape, x);
            let prod = jet_mul(&mut tape, tj, xj);
            let scaled = crate::jet::jet_smul(&mut tape, p[0], prod);
            jet_tanh(&mut tape, scaled)
        };
        let taped_vals: Vec<f64> = taped.slots().iter().map(|v| tape.value_of(*v)).collect();
        let plain_vals: Vec<f64> = Jet4::slots(&plain).to_vec();
        assert_eq!(taped_vals, plain_vals);
    }

    #[test]
    fn zero_one_folding_produces_no_spurious_nodes() {
        let mut tape = Tape::new(0);
        tape.bind_params(&[]).unwrap();
        let len0 = tape.len();
        let z = tape.lit(0.0);
        let o = tape.lit(1.0);
        let a = tape.lit(2.5);
        assert_eq!(tape.len(), len0 + 1); // only 2.5 appended
        assert_eq!(tape.mul(z, a), z);
        assert_eq!(tape.mul(o, a), a);
        assert_eq!(tape.add(z, a), a);
        assert_eq!(tape.scale(a, 1.0), a);
        assert_eq!(tape.len(), len0 + 1);
    }
}
