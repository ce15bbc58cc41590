//! Truncated Taylor jets: a scalar field value together with its time
//! derivative and spatial derivatives through order four.
//!
//! A [`Jet`] carries six slots `(u, u_t, u_x, u_xx, u_xxx, u_xxxx)`. Mixed
//! t–x derivatives are not tracked: no residual in the problem catalog needs
//! them, and the six-slot layout keeps propagation cheap. Products follow the
//! generalized Leibniz rule per axis; unary functions (tanh, exp, sin, cos,
//! reciprocal) compose via Faà di Bruno with hard-coded coefficients for
//! orders ≤ 4.
//!
//! All rules are written once, generic over an [`Arith`] scalar context:
//! [`Values`] evaluates in plain `f64`, while [`crate::tape::Tape`] records
//! the same operations for reverse-mode parameter gradients. The two paths
//! therefore cannot drift apart.

/// Scalar context for jet arithmetic.
///
/// `S` is the scalar representation: `f64` for direct evaluation, a tape
/// variable for recorded evaluation.
pub trait Arith {
    type S: Copy;

    /// Embed a literal constant.
    fn lit(&mut self, v: f64) -> Self::S;
    fn add(&mut self, a: Self::S, b: Self::S) -> Self::S;
    fn sub(&mut self, a: Self::S, b: Self::S) -> Self::S;
    fn mul(&mut self, a: Self::S, b: Self::S) -> Self::S;
    fn neg(&mut self, a: Self::S) -> Self::S;
    /// `a * k` for a literal factor.
    fn scale(&mut self, a: Self::S, k: f64) -> Self::S;
    /// `a + k` for a literal offset.
    fn add_k(&mut self, a: Self::S, k: f64) -> Self::S;
    fn tanh(&mut self, a: Self::S) -> Self::S;
    fn exp(&mut self, a: Self::S) -> Self::S;
    fn sin(&mut self, a: Self::S) -> Self::S;
    fn cos(&mut self, a: Self::S) -> Self::S;
    fn recip(&mut self, a: Self::S) -> Self::S;
    /// Current numeric value of a scalar (identity for `f64`).
    fn value(&self, a: Self::S) -> f64;
}

/// Plain `f64` evaluation context.
#[derive(Debug, Default, Clone, Copy)]
pub struct Values;

impl Arith for Values {
    type S = f64;

    #[inline(always)]
    fn lit(&mut self, v: f64) -> f64 {
        v
    }
    #[inline(always)]
    fn add(&mut self, a: f64, b: f64) -> f64 {
        a + b
    }
    #[inline(always)]
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        a - b
    }
    #[inline(always)]
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    #[inline(always)]
    fn neg(&mut self, a: f64) -> f64 {
        -a
    }
    #[inline(always)]
    fn scale(&mut self, a: f64, k: f64) -> f64 {
        a * k
    }
    #[inline(always)]
    fn add_k(&mut self, a: f64, k: f64) -> f64 {
        a + k
    }
    #[inline(always)]
    fn tanh(&mut self, a: f64) -> f64 {
        a.tanh()
    }
    #[inline(always)]
    fn exp(&mut self, a: f64) -> f64 {
        a.exp()
    }
    #[inline(always)]
    fn sin(&mut self, a: f64) -> f64 {
        a.sin()
    }
    #[inline(always)]
    fn cos(&mut self, a: f64) -> f64 {
        a.cos()
    }
    #[inline(always)]
    fn recip(&mut self, a: f64) -> f64 {
        a.recip()
    }
    #[inline(always)]
    fn value(&self, a: f64) -> f64 {
        a
    }
}

/// Six-slot Taylor jet over scalar type `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<S> {
    pub u: S,
    pub ut: S,
    pub ux: S,
    pub uxx: S,
    pub uxxx: S,
    pub uxxxx: S,
}

/// Jet with concrete `f64` slots — the currency of residual evaluation.
pub type Jet4 = Jet<f64>;

impl<S: Copy> Jet<S> {
    pub fn slots(&self) -> [S; 6] {
        [self.u, self.ut, self.ux, self.uxx, self.uxxx, self.uxxxx]
    }

    pub fn from_slots(s: [S; 6]) -> Self {
        Jet {
            u: s[0],
            ut: s[1],
            ux: s[2],
            uxx: s[3],
            uxxx: s[4],
            uxxxx: s[5],
        }
    }

    /// Jet of a constant: value `v`, every derivative exactly zero.
    pub fn constant<A: Arith<S = S>>(cx: &mut A, v: f64) -> Self {
        let z = cx.lit(0.0);
        Jet {
            u: cx.lit(v),
            ut: z,
            ux: z,
            uxx: z,
            uxxx: z,
            uxxxx: z,
        }
    }

    /// Jet of the time coordinate itself: `u = t`, `u_t = 1`.
    pub fn time<A: Arith<S = S>>(cx: &mut A, t: f64) -> Self {
        let z = cx.lit(0.0);
        Jet {
            u: cx.lit(t),
            ut: cx.lit(1.0),
            ux: z,
            uxx: z,
            uxxx: z,
            uxxxx: z,
        }
    }

    /// Jet of the space coordinate itself: `u = x`, `u_x = 1`.
    pub fn space<A: Arith<S = S>>(cx: &mut A, x: f64) -> Self {
        let z = cx.lit(0.0);
        Jet {
            u: cx.lit(x),
            ut: z,
            ux: cx.lit(1.0),
            uxx: z,
            uxxx: z,
            uxxxx: z,
        }
    }
}

impl Jet4 {
    pub fn is_finite(&self) -> bool {
        self.slots().iter().all(|v| v.is_finite())
    }

    /// Lift an `f64` jet into another context as a constant (no parameter
    /// dependence). Used for ψ, φ and embedding features on the tape.
    pub fn lift<A: Arith>(&self, cx: &mut A) -> Jet<A::S> {
        Jet {
            u: cx.lit(self.u),
            ut: cx.lit(self.ut),
            ux: cx.lit(self.ux),
            uxx: cx.lit(self.uxx),
            uxxx: cx.lit(self.uxxx),
            uxxxx: cx.lit(self.uxxxx),
        }
    }
}

pub fn jet_add<A: Arith>(cx: &mut A, a: Jet<A::S>, b: Jet<A::S>) -> Jet<A::S> {
    Jet {
        u: cx.add(a.u, b.u),
        ut: cx.add(a.ut, b.ut),
        ux: cx.add(a.ux, b.ux),
        uxx: cx.add(a.uxx, b.uxx),
        uxxx: cx.add(a.uxxx, b.uxxx),
        uxxxx: cx.add(a.uxxxx, b.uxxxx),
    }
}

pub fn jet_sub<A: Arith>(cx: &mut A, a: Jet<A::S>, b: Jet<A::S>) -> Jet<A::S> {
    Jet {
        u: cx.sub(a.u, b.u),
        ut: cx.sub(a.ut, b.ut),
        ux: cx.sub(a.ux, b.ux),
        uxx: cx.sub(a.uxx, b.uxx),
        uxxx: cx.sub(a.uxxx, b.uxxx),
        uxxxx: cx.sub(a.uxxxx, b.uxxxx),
    }
}

pub fn jet_neg<A: Arith>(cx: &mut A, a: Jet<A::S>) -> Jet<A::S> {
    Jet {
        u: cx.neg(a.u),
        ut: cx.neg(a.ut),
        ux: cx.neg(a.ux),
        uxx: cx.neg(a.uxx),
        uxxx: cx.neg(a.uxxx),
        uxxxx: cx.neg(a.uxxxx),
    }
}

/// Add a literal constant to the value slot; derivatives are unchanged.
pub fn jet_add_const<A: Arith>(cx: &mut A, a: Jet<A::S>, k: f64) -> Jet<A::S> {
    Jet {
        u: cx.add_k(a.u, k),
        ..a
    }
}

/// Multiply every slot by the literal `k`.
pub fn jet_scale<A: Arith>(cx: &mut A, a: Jet<A::S>, k: f64) -> Jet<A::S> {
    Jet {
        u: cx.scale(a.u, k),
        ut: cx.scale(a.ut, k),
        ux: cx.scale(a.ux, k),
        uxx: cx.scale(a.uxx, k),
        uxxx: cx.scale(a.uxxx, k),
        uxxxx: cx.scale(a.uxxxx, k),
    }
}

/// Multiply every slot by a scalar `s` that is constant in `t` and `x`
/// (e.g. a network weight). Equivalent to `jet_mul` with the jet
/// `{s, 0, 0, 0, 0, 0}` but six multiplies instead of the full Leibniz form.
pub fn jet_smul<A: Arith>(cx: &mut A, s: A::S, a: Jet<A::S>) -> Jet<A::S> {
    Jet {
        u: cx.mul(s, a.u),
        ut: cx.mul(s, a.ut),
        ux: cx.mul(s, a.ux),
        uxx: cx.mul(s, a.uxx),
        uxxx: cx.mul(s, a.uxxx),
        uxxxx: cx.mul(s, a.uxxxx),
    }
}

/// Leibniz product through order 4 in x and order 1 in t.
///
/// The t-slot uses the plain product rule; the x-slots use binomial
/// coefficients 1, 2 / 1, 3, 3 / 1, 4, 6, 4.
pub fn jet_mul<A: Arith>(cx: &mut A, a: Jet<A::S>, b: Jet<A::S>) -> Jet<A::S> {
    let u = cx.mul(a.u, b.u);

    let t1 = cx.mul(a.ut, b.u);
    let t2 = cx.mul(a.u, b.ut);
    let ut = cx.add(t1, t2);

    let x1 = cx.mul(a.ux, b.u);
    let x2 = cx.mul(a.u, b.ux);
    let ux = cx.add(x1, x2);

    let xx1 = cx.mul(a.uxx, b.u);
    let xx2 = cx.mul(a.ux, b.ux);
    let xx2 = cx.scale(xx2, 2.0);
    let xx3 = cx.mul(a.u, b.uxx);
    let uxx = cx.add(xx1, xx2);
    let uxx = cx.add(uxx, xx3);

    let x3a = cx.mul(a.uxxx, b.u);
    let x3b = cx.mul(a.uxx, b.ux);
    let x3b = cx.scale(x3b, 3.0);
    let x3c = cx.mul(a.ux, b.uxx);
    let x3c = cx.scale(x3c, 3.0);
    let x3d = cx.mul(a.u, b.uxxx);
    let uxxx = cx.add(x3a, x3b);
    let uxxx = cx.add(uxxx, x3c);
    let uxxx = cx.add(uxxx, x3d);

    let x4a = cx.mul(a.uxxxx, b.u);
    let x4b = cx.mul(a.uxxx, b.ux);
    let x4b = cx.scale(x4b, 4.0);
    let x4c = cx.mul(a.uxx, b.uxx);
    let x4c = cx.scale(x4c, 6.0);
    let x4d = cx.mul(a.ux, b.uxxx);
    let x4d = cx.scale(x4d, 4.0);
    let x4e = cx.mul(a.u, b.uxxxx);
    let uxxxx = cx.add(x4a, x4b);
    let uxxxx = cx.add(uxxxx, x4c);
    let uxxxx = cx.add(uxxxx, x4d);
    let uxxxx = cx.add(uxxxx, x4e);

    Jet {
        u,
        ut,
        ux,
        uxx,
        uxxx,
        uxxxx,
    }
}

/// Faà di Bruno composition `f ∘ a` given `f0 = f(a.u)` and the derivatives
/// `d1..d4` of `f` at `a.u`.
///
/// Order-4 partition coefficients: `(a')⁴:1, (a')²a'':6, (a'')²:3,
/// a'a''':4, a'''':1`.
fn jet_compose<A: Arith>(
    cx: &mut A,
    a: Jet<A::S>,
    f0: A::S,
    d1: A::S,
    d2: A::S,
    d3: A::S,
    d4: A::S,
) -> Jet<A::S> {
    let ut = cx.mul(d1, a.ut);
    let ux = cx.mul(d1, a.ux);

    let ux2 = cx.mul(a.ux, a.ux);

    // f''·(a')² + f'·a''
    let p1 = cx.mul(d2, ux2);
    let p2 = cx.mul(d1, a.uxx);
    let uxx = cx.add(p1, p2);

    // f'''·(a')³ + 3 f''·a'·a'' + f'·a'''
    let ux3 = cx.mul(ux2, a.ux);
    let q1 = cx.mul(d3, ux3);
    let q2 = cx.mul(a.ux, a.uxx);
    let q2 = cx.mul(d2, q2);
    let q2 = cx.scale(q2, 3.0);
    let q3 = cx.mul(d1, a.uxxx);
    let uxxx = cx.add(q1, q2);
    let uxxx = cx.add(uxxx, q3);

    // f''''·(a')⁴ + 6 f'''·(a')²·a'' + 3 f''·(a'')² + 4 f''·a'·a''' + f'·a''''
    let ux4 = cx.mul(ux2, ux2);
    let r1 = cx.mul(d4, ux4);
    let r2 = cx.mul(ux2, a.uxx);
    let r2 = cx.mul(d3, r2);
    let r2 = cx.scale(r2, 6.0);
    let uxx2 = cx.mul(a.uxx, a.uxx);
    let r3 = cx.mul(d2, uxx2);
    let r3 = cx.scale(r3, 3.0);
    let r4 = cx.mul(a.ux, a.uxxx);
    let r4 = cx.mul(d2, r4);
    let r4 = cx.scale(r4, 4.0);
    let r5 = cx.mul(d1, a.uxxxx);
    let uxxxx = cx.add(r1, r2);
    let uxxxx = cx.add(uxxxx, r3);
    let uxxxx = cx.add(uxxxx, r4);
    let uxxxx = cx.add(uxxxx, r5);

    Jet {
        u: f0,
        ut,
        ux,
        uxx,
        uxxx,
        uxxxx,
    }
}

/// tanh of a jet. Derivatives of tanh are expressed through `y = tanh(u)`
/// and `s = 1 − y²`, so the taped form stays differentiable by the reverse
/// pass without any extra rules.
pub fn jet_tanh<A: Arith>(cx: &mut A, a: Jet<A::S>) -> Jet<A::S> {
    let y = cx.tanh(a.u);
    let y2 = cx.mul(y, y);
    let ny2 = cx.neg(y2);
    let s = cx.add_k(ny2, 1.0); // sech² u

    // tanh' = s, tanh'' = −2ys, tanh''' = −2s² + 4y²s, tanh'''' = 16ys² − 8y³s
    let ys = cx.mul(y, s);
    let d2 = cx.scale(ys, -2.0);

    let s2 = cx.mul(s, s);
    let y2s = cx.mul(y2, s);
    let a3 = cx.scale(s2, -2.0);
    let b3 = cx.scale(y2s, 4.0);
    let d3 = cx.add(a3, b3);

    let ys2 = cx.mul(y, s2);
    let y3s = cx.mul(y2, ys);
    let a4 = cx.scale(ys2, 16.0);
    let b4 = cx.scale(y3s, -8.0);
    let d4 = cx.add(a4, b4);

    jet_compose(cx, a, y, s, d2, d3, d4)
}

/// exp of a jet: every derivative of f equals f itself.
pub fn jet_exp<A: Arith>(cx: &mut A, a: Jet<A::S>) -> Jet<A::S> {
    let e = cx.exp(a.u);
    jet_compose(cx, a, e, e, e, e, e)
}

pub fn jet_sin<A: Arith>(cx: &mut A, a: Jet<A::S>) -> Jet<A::S> {
    let s = cx.sin(a.u);
    let c = cx.cos(a.u);
    let ns = cx.neg(s);
    let nc = cx.neg(c);
    jet_compose(cx, a, s, c, ns, nc, s)
}

pub fn jet_cos<A: Arith>(cx: &mut A, a: Jet<A::S>) -> Jet<A::S> {
    let c = cx.cos(a.u);
    let s = cx.sin(a.u);
    let ns = cx.neg(s);
    let nc = cx.neg(c);
    jet_compose(cx, a, c, ns, nc, s, c)
}

/// 1/a as a jet. Total on finite non-zero `a.u`; propagates ±inf/NaN
/// otherwise, like scalar division.
pub fn jet_recip<A: Arith>(cx: &mut A, a: Jet<A::S>) -> Jet<A::S> {
    let r = cx.recip(a.u); // u⁻¹
    let r2 = cx.mul(r, r);
    let d1 = cx.neg(r2); // −u⁻²
    let r3 = cx.mul(r2, r);
    let d2 = cx.scale(r3, 2.0); // 2u⁻³
    let r4 = cx.mul(r2, r2);
    let d3 = cx.scale(r4, -6.0); // −6u⁻⁴
    let r5 = cx.mul(r4, r);
    let d4 = cx.scale(r5, 24.0); // 24u⁻⁵
    jet_compose(cx, a, r, d1, d2, d3, d4)
}

/// Integer power by repeated multiplication (n ≥ 1).
pub fn jet_powi<A: Arith>(cx: &mut A, a: Jet<A::S>, n: u32) -> Jet<A::S> {
    assert!(n >= 1, "jet_powi requires n >= 1");
    let mut acc = a;
    for _ in 1..n {
        acc = jet_mul(cx, acc, a);
    }
    acc
}

// Operator sugar for the f64 jet; delegates to the generic rules.

impl std::ops::Add for Jet4 {
    type Output = Jet4;
    fn add(self, rhs: Jet4) -> Jet4 {
        jet_add(&mut Values, self, rhs)
    }
}

impl std::ops::Sub for Jet4 {
    type Output = Jet4;
    fn sub(self, rhs: Jet4) -> Jet4 {
        jet_sub(&mut Values, self, rhs)
    }
}

impl std::ops::Mul for Jet4 {
    type Output = Jet4;
    fn mul(self, rhs: Jet4) -> Jet4 {
        jet_mul(&mut Values, self, rhs)
    }
}

impl std::ops::Neg for Jet4 {
    type Output = Jet4;
    fn neg(self) -> Jet4 {
        jet_neg(&mut Values, self)
    }
}

impl Jet4 {
    pub fn value(v: f64) -> Jet4 {
        Jet::constant(&mut Values, v)
    }
    pub fn at_time(t: f64) -> Jet4 {
        Jet::time(&mut Values, t)
    }
    pub fn at_space(x: f64) -> Jet4 {
        Jet::space(&mut Values, x)
    }
    pub fn scaled(self, k: f64) -> Jet4 {
        jet_scale(&mut Values, self, k)
    }
    pub fn tanh(self) -> Jet4 {
        jet_tanh(&mut Values, self)
    }
    pub fn exp(self) -> Jet4 {
        jet_exp(&mut Values, self)
    }
    pub fn sin(self) -> Jet4 {
        jet_sin(&mut Values, self)
    }
    pub fn cos(self) -> Jet4 {
        jet_cos(&mut Values, self)
    }
    pub fn recip(self) -> Jet4 {
        jet_recip(&mut Values, self)
    }
    pub fn powi(self, n: u32) -> Jet4 {
        jet_powi(&mut Values, self, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Taylor-series oracle: normalized coefficients c[k] = f⁽ᵏ⁾/k! of a
    /// function of x, composed by power-series recurrences. Independent of
    /// the Leibniz/Faà-di-Bruno slot formulas above.
    mod series {
        pub fn mul(a: &[f64; 5], b: &[f64; 5]) -> [f64; 5] {
            let mut c = [0.0; 5];
            for k in 0..5 {
                for j in 0..=k {
                    c[k] += a[j] * b[k - j];
                }
            }
            c
        }

        /// y = tanh(a) via the ODE y' = (1 − y²)·a'.
        pub fn tanh(a: &[f64; 5]) -> [f64; 5] {
            let mut y = [0.0; 5];
            y[0] = a[0].tanh();
            for k in 0..4 {
                // w = 1 − y², using coefficients of y up to order k
                let w = {
                    let mut yy = [0.0; 5];
                    for i in 0..=k {
                        for j in 0..=(k - i) {
                            yy[i + j] += y[i] * y[j];
                        }
                    }
                    let mut w = [0.0; 5];
                    w[0] = 1.0 - yy[0];
                    for i in 1..5 {
                        w[i] = -yy[i];
                    }
                    w
                };
                // (k+1) y[k+1] = Σ_{j=0..k} (j+1) a[j+1] w[k−j]
                let mut s = 0.0;
                for j in 0..=k {
                    s += (j + 1) as f64 * a[j + 1] * w[k - j];
                }
                y[k + 1] = s / (k + 1) as f64;
            }
            y
        }

        /// y = exp(a) via y' = y·a'.
        pub fn exp(a: &[f64; 5]) -> [f64; 5] {
            let mut y = [0.0; 5];
            y[0] = a[0].exp();
            for k in 0..4 {
                let mut s = 0.0;
                for j in 0..=k {
                    s += (j + 1) as f64 * a[j + 1] * y[k - j];
                }
                y[k + 1] = s / (k + 1) as f64;
            }
            y
        }

        /// y = 1/a via a·y = 1.
        pub fn recip(a: &[f64; 5]) -> [f64; 5] {
            let mut y = [0.0; 5];
            y[0] = 1.0 / a[0];
            for k in 1..5 {
                let mut s = 0.0;
                for j in 1..=k {
                    s += a[j] * y[k - j];
                }
                y[k] = -s / a[0];
            }
            y
        }

        /// (sin a, cos a) via the coupled system s' = c·a', c' = −s·a'.
        pub fn sin_cos(a: &[f64; 5]) -> ([f64; 5], [f64; 5]) {
            let mut s = [0.0; 5];
            let mut c = [0.0; 5];
            s[0] = a[0].sin();
            c[0] = a[0].cos();
            for k in 0..4 {
                let mut ds = 0.0;
                let mut dc = 0.0;
                for j in 0..=k {
                    ds += (j + 1) as f64 * a[j + 1] * c[k - j];
                    dc -= (j + 1) as f64 * a[j + 1] * s[k - j];
                }
                s[k + 1] = ds / (k + 1) as f64;
                c[k + 1] = dc / (k + 1) as f64;
            }
            (s, c)
        }
    }

    /// x-derivatives of a jet as normalized Taylor coefficients.
    fn jet_to_series(j: Jet4) -> [f64; 5] {
        [j.u, j.ux, j.uxx / 2.0, j.uxxx / 6.0, j.uxxxx / 24.0]
    }

    fn series_to_jet(c: [f64; 5], ut: f64) -> Jet4 {
        Jet4 {
            u: c[0],
            ut,
            ux: c[1],
            uxx: 2.0 * c[2],
            uxxx: 6.0 * c[3],
            uxxxx: 24.0 * c[4],
        }
    }

    fn assert_rel(actual: f64, expected: f64, tol: f64, what: &str) {
        let rel = (actual - expected).abs() / expected.abs().max(1e-12);
        assert!(
            rel <= tol,
            "{what}: actual {actual:e}, expected {expected:e}, rel {rel:e} > {tol:e}"
        );
    }

    fn pseudo_jet(seed: u64) -> Jet4 {
        // Small deterministic LCG so property-style checks need no RNG dep here.
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        Jet4 {
            u: next(),
            ut: next(),
            ux: next(),
            uxx: next(),
            uxxx: next(),
            uxxxx: next(),
        }
    }

    #[test]
    fn mul_of_constants_has_zero_derivatives() {
        let c = Jet4::value(2.0) * Jet4::value(3.0);
        assert_eq!(c.u, 6.0);
        assert_eq!(c.ut, 0.0);
        assert_eq!(c.ux, 0.0);
        assert_eq!(c.uxx, 0.0);
        assert_eq!(c.uxxx, 0.0);
        assert_eq!(c.uxxxx, 0.0);
    }

    #[test]
    fn leibniz_expansion_matches_hand_formula() {
        for seed in 0..50u64 {
            let a = pseudo_jet(seed);
            let b = pseudo_jet(seed + 1000);
            let c = a * b;
            assert_eq!(c.u, a.u * b.u);
            assert_eq!(c.ut, a.ut * b.u + a.u * b.ut);
            assert_eq!(c.ux, a.ux * b.u + a.u * b.ux);
            assert_eq!(c.uxx, a.uxx * b.u + (a.ux * b.ux) * 2.0 + a.u * b.uxx);
            assert_eq!(
                c.uxxx,
                a.uxxx * b.u + (a.uxx * b.ux) * 3.0 + (a.ux * b.uxx) * 3.0 + a.u * b.uxxx
            );
            assert_eq!(
                c.uxxxx,
                a.uxxxx * b.u
                    + (a.uxxx * b.ux) * 4.0
                    + (a.uxx * b.uxx) * 6.0
                    + (a.ux * b.uxxx) * 4.0
                    + a.u * b.uxxxx
            );
        }
    }

    #[test]
    fn sin_cubed_second_derivative_matches_symbolic() {
        // d²/dx² sin³x = 6 sin x cos²x − 3 sin³x
        let x = 0.3;
        let s = Jet4::at_space(x).sin();
        let s3 = s * s * s;
        let expected = 6.0 * x.sin() * x.cos().powi(2) - 3.0 * x.sin().powi(3);
        assert_rel(s3.uxx, expected, 1e-14, "d²(sin³)/dx²");
    }

    #[test]
    fn tanh_of_zero_constant_is_zero() {
        let c = Jet4::value(0.0).tanh();
        assert_eq!(c.slots(), [0.0; 6]);
    }

    #[test]
    fn tanh_of_identity_has_unit_slope_at_origin() {
        let j = Jet4::at_space(0.0).tanh();
        assert_eq!(j.ux, 1.0);
        // tanh‴(0) = −2, tanh''(0) = tanh''''(0) = 0
        assert_eq!(j.uxx, 0.0);
        assert_rel(j.uxxx, -2.0, 1e-15, "tanh'''(0)");
        assert_eq!(j.uxxxx, 0.0);
    }

    #[test]
    fn tanh_fourth_derivative_matches_finite_differences() {
        // tanh of an affine chain: f(x) = tanh(0.7x + 0.2), compare uxxxx
        // against the 5-point fourth-difference with Richardson extrapolation.
        let g = |x: f64| (0.7 * x + 0.2).tanh();
        let x0 = 0.37;
        let d4 = |h: f64| {
            (g(x0 + 2.0 * h) - 4.0 * g(x0 + h) + 6.0 * g(x0) - 4.0 * g(x0 - h) + g(x0 - 2.0 * h))
                / h.powi(4)
        };
        let h = 1e-2;
        let fd = (4.0 * d4(h / 2.0) - d4(h)) / 3.0;

        let xj = Jet4::at_space(x0);
        let inner = xj.scaled(0.7) + Jet4::value(0.2);
        let jet = inner.tanh();
        assert_rel(jet.uxxxx, fd, 1e-4, "tanh chain uxxxx vs FD");
    }

    #[test]
    fn compositions_match_series_oracle_on_polynomials() {
        // a(x) = 0.3 + 0.9x − 0.4x² + 0.2x³ − 0.05x⁴ around x = 0
        let coeffs = [0.3, 0.9, -0.4, 0.2, -0.05];
        let a = series_to_jet(coeffs, 0.0);

        let cases: Vec<(&str, Jet4, [f64; 5])> = vec![
            ("tanh", a.tanh(), series::tanh(&coeffs)),
            ("exp", a.exp(), series::exp(&coeffs)),
            ("recip", a.recip(), series::recip(&coeffs)),
            ("sin", a.sin(), series::sin_cos(&coeffs).0),
            ("cos", a.cos(), series::sin_cos(&coeffs).1),
            ("mul", a * a, series::mul(&coeffs, &coeffs)),
        ];
        for (name, jet, expect) in cases {
            let got = jet_to_series(jet);
            for k in 0..5 {
                assert_rel(got[k], expect[k], 1e-12, &format!("{name} order {k}"));
            }
        }
    }

    #[test]
    fn time_slot_follows_plain_product_and_chain_rules() {
        let a = pseudo_jet(7);
        let b = pseudo_jet(8);
        let p = a * b;
        assert_eq!(p.ut, a.ut * b.u + a.u * b.ut);
        let e = a.exp();
        assert_rel(e.ut, a.u.exp() * a.ut, 1e-15, "exp ut");
        let t = a.tanh();
        let sech2 = 1.0 - a.u.tanh().powi(2);
        assert_rel(t.ut, sech2 * a.ut, 1e-15, "tanh ut");
    }

    #[test]
    fn finite_inputs_stay_finite() {
        for seed in 0..200u64 {
            let a = pseudo_jet(seed);
            let b = pseudo_jet(seed + 10_000);
            for j in [a + b, a * b, a.tanh(), a.exp(), a.sin(), a.cos()] {
                assert!(j.is_finite(), "non-finite slots from finite inputs");
            }
        }
    }

    #[test]
    fn powi_is_repeated_multiplication() {
        let a = pseudo_jet(42);
        let cubed = a.powi(3);
        let manual = a * a * a;
        assert_eq!(cubed.slots(), manual.slots());
    }
}
