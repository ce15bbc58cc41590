//! Benchmark catalog: stiff 1-D periodic PDEs with their domains, physical
//! parameters, initial conditions, and residual forms evaluated on jets.
//!
//! Initial conditions are built from jet arithmetic, so their spatial
//! derivatives through order four are analytic, not finite-differenced.
//! Residuals are algebraic functions of jet slots, written once and generic
//! over the scalar context so the training tape records exactly the same
//! formulas the plain evaluator computes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{jet_mul, jet_powi, jet_scale, Arith, Jet, Jet4, Values};

/// Space-time box `[a, b] × [0, horizon]` with period `b − a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub a: f64,
    pub b: f64,
    pub horizon: f64,
}

impl Domain {
    pub fn new(a: f64, b: f64, horizon: f64) -> Result<Domain> {
        let d = Domain { a, b, horizon };
        d.validate()?;
        Ok(d)
    }

    pub fn period(&self) -> f64 {
        self.b - self.a
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a < self.b) {
            return Err(Error::Config(format!(
                "domain requires a < b, got [{}, {}]",
                self.a, self.b
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!(
                "domain horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Which benchmark equation a problem instance is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdeKind {
    Burgers,
    AllenCahnI,
    AllenCahnII,
    CahnHilliard,
    KuramotoSivashinsky,
    GrayScott,
    BelousovZhabotinsky,
    NonlinearSchrodinger,
}

/// A concrete PDE instance: equation, domain, parameters, initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeProblem {
    pub id: String,
    pub kind: PdeKind,
    pub components: usize,
    pub domain: Domain,
    /// Flat named parameter map so callers can override any value.
    pub params: BTreeMap<String, f64>,
    /// Default number of Fourier harmonics for the periodic embedding.
    pub default_m: usize,
    /// Replaces the catalog initial condition with per-component constants.
    /// Useful for steady-state sanity checks (e.g. Gray-Scott at (1, 0)).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_ic: Option<Vec<f64>>,
}

/// Parameter values pulled out of the map once, for hot residual loops.
#[derive(Debug, Clone, Copy)]
pub struct ResidualCoeffs {
    kind: PdeKind,
    c: [f64; 4],
}

/// Outcome of [`PdeProblem::validate`]: each named check with its measured
/// value and tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub problem: String,
    pub pass: bool,
    pub checks: Vec<ValidationCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Informational checks are reported but do not gate the overall verdict.
    pub gating: bool,
}

/// Tolerance for the periodic compatibility of initial data: the Gray-Scott
/// and Belousov-Zhabotinsky initial conditions are periodic only up to
/// ~1e-11, which sits below every solver error floor.
pub const IC_COMPATIBILITY_TOL: f64 = 1e-8;

fn params(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect()
}

/// The eight benchmark problems (Allen-Cahn appears twice: the two parameter
/// cases behave differently enough to track separately).
pub fn catalog() -> Vec<PdeProblem> {
    vec![
        PdeProblem {
            id: "burgers".into(),
            kind: PdeKind::Burgers,
            components: 1,
            domain: Domain {
                a: -1.0,
                b: 1.0,
                horizon: 1.0,
            },
            params: params(&[("nu", 0.01 / std::f64::consts::PI)]),
            default_m: 10,
            constant_ic: None,
        },
        PdeProblem {
            id: "allen-cahn-1".into(),
            kind: PdeKind::AllenCahnI,
            components: 1,
            domain: Domain {
                a: -1.0,
                b: 1.0,
                horizon: 1.0,
            },
            params: params(&[("gamma1", 0.001), ("gamma2", 5.0)]),
            default_m: 10,
            constant_ic: None,
        },
        PdeProblem {
            id: "allen-cahn-2".into(),
            kind: PdeKind::AllenCahnII,
            components: 1,
            domain: Domain {
                a: -1.0,
                b: 1.0,
                horizon: 1.0,
            },
            params: params(&[("gamma1", 0.001), ("gamma2", 4.0)]),
            default_m: 12,
            constant_ic: None,
        },
        PdeProblem {
            id: "cahn-hilliard".into(),
            kind: PdeKind::CahnHilliard,
            components: 1,
            domain: Domain {
                a: -1.0,
                b: 1.0,
                horizon: 1.0,
            },
            params: params(&[("epsilon1", 1e-2), ("epsilon2", 1e-4)]),
            default_m: 10,
            constant_ic: None,
        },
        PdeProblem {
            id: "kuramoto-sivashinsky".into(),
            kind: PdeKind::KuramotoSivashinsky,
            components: 1,
            domain: Domain {
                a: 0.0,
                b: 32.0 * std::f64::consts::PI,
                horizon: 20.0,
            },
            params: BTreeMap::new(),
            default_m: 20,
            constant_ic: None,
        },
        PdeProblem {
            id: "gray-scott".into(),
            kind: PdeKind::GrayScott,
            components: 2,
            domain: Domain {
                a: -50.0,
                b: 50.0,
                horizon: 20.0,
            },
            params: params(&[
                ("epsilon1", 1.0),
                ("epsilon2", 0.01),
                ("b", 0.02),
                ("k", 0.0562),
            ]),
            default_m: 12,
            constant_ic: None,
        },
        PdeProblem {
            id: "belousov-zhabotinsky".into(),
            kind: PdeKind::BelousovZhabotinsky,
            components: 3,
            domain: Domain {
                a: -1.0,
                b: 1.0,
                horizon: 3.0,
            },
            params: params(&[("epsilon1", 1e-5), ("epsilon2", 2e-5)]),
            default_m: 24,
            constant_ic: None,
        },
        PdeProblem {
            id: "nls".into(),
            kind: PdeKind::NonlinearSchrodinger,
            components: 2,
            domain: Domain {
                a: -std::f64::consts::PI,
                b: std::f64::consts::PI,
                horizon: 2.0,
            },
            params: BTreeMap::new(),
            default_m: 10,
            constant_ic: None,
        },
    ]
}

/// Look a problem up by id.
pub fn by_id(id: &str) -> Result<PdeProblem> {
    catalog()
        .into_iter()
        .find(|p| p.id == id)
        .ok_or_else(|| {
            let ids: Vec<String> = catalog().into_iter().map(|p| p.id).collect();
            Error::Config(format!(
                "unknown problem id '{id}'; known ids: {}",
                ids.join(", ")
            ))
        })
}

impl PdeProblem {
    pub fn param(&self, name: &str) -> Result<f64> {
        self.params.get(name).copied().ok_or_else(|| {
            Error::Config(format!("problem '{}' has no parameter '{name}'", self.id))
        })
    }

    /// Override a named parameter; unknown names are rejected so typos fail
    /// fast.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        match self.params.get_mut(name) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(Error::Config(format!(
                "problem '{}' has no parameter '{name}' (available: {})",
                self.id,
                self.params.keys().cloned().collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    /// Copy of this problem with a shorter (or longer) time horizon.
    pub fn with_horizon(&self, horizon: f64) -> PdeProblem {
        let mut p = self.clone();
        p.domain.horizon = horizon;
        p
    }

    /// Copy of this problem with constant initial data, one value per
    /// component.
    pub fn with_constant_ic(&self, values: &[f64]) -> Result<PdeProblem> {
        if values.len() != self.components {
            return Err(Error::Config(format!(
                "constant IC needs {} values, got {}",
                self.components,
                values.len()
            )));
        }
        let mut p = self.clone();
        p.constant_ic = Some(values.to_vec());
        Ok(p)
    }

    pub fn component_names(&self) -> Vec<&'static str> {
        match self.kind {
            PdeKind::GrayScott => vec!["u", "v"],
            PdeKind::BelousovZhabotinsky => vec!["u", "v", "w"],
            PdeKind::NonlinearSchrodinger => vec!["re", "im"],
            _ => vec!["u"],
        }
    }

    /// Human-readable initial-condition formulas, one per component, for
    /// provenance export.
    pub fn ic_expressions(&self) -> Vec<String> {
        match self.kind {
            PdeKind::Burgers => vec!["-sin(pi*x)".into()],
            PdeKind::AllenCahnI => vec!["x^2*cos(pi*x)".into()],
            PdeKind::AllenCahnII => vec!["x^2*sin(2*pi*x)".into()],
            PdeKind::CahnHilliard => vec!["-cos(2*pi*x)".into()],
            PdeKind::KuramotoSivashinsky => vec!["cos(x/16)*(1+sin((x-1)/16))".into()],
            PdeKind::GrayScott => vec![
                "1 - sin(pi*(x-50)/100)^4/2".into(),
                "sin(pi*(x-50)/100)^4/4".into(),
            ],
            PdeKind::BelousovZhabotinsky => vec![
                "exp(-100*(x+0.5)^2)".into(),
                "exp(-100*x^2)".into(),
                "exp(-100*(x-0.5)^2)".into(),
            ],
            PdeKind::NonlinearSchrodinger => {
                vec!["2/(2-sqrt(2)*cos(x)) - 1".into(), "0".into()]
            }
        }
    }

    /// Initial condition of one component as a jet in x (time slot zero),
    /// with analytic derivatives through order four.
    ///
    /// Outside `[a, b)` the coordinate is wrapped by the period first: the
    /// problem is periodic, so u₀ means its periodic extension. Points inside
    /// the base interval pass through untouched.
    pub fn u0_jet(&self, component: usize, x: f64) -> Jet4 {
        let x = if x >= self.domain.a && x < self.domain.b {
            x
        } else {
            self.domain.a + (x - self.domain.a).rem_euclid(self.domain.period())
        };
        self.u0_jet_raw(component, x)
    }

    /// Initial condition evaluated on the analytic formula as written, with
    /// no periodic wrapping. [`PdeProblem::validate`] uses this to measure
    /// the true endpoint mismatch.
    pub fn u0_jet_raw(&self, component: usize, x: f64) -> Jet4 {
        let cx = &mut Values;
        if let Some(consts) = &self.constant_ic {
            return Jet::constant(cx, consts[component]);
        }
        let xj = Jet::space(cx, x);
        match self.kind {
            PdeKind::Burgers => {
                // −sin(πx)
                let arg = jet_scale(cx, xj, std::f64::consts::PI);
                let s = crate::jet::jet_sin(cx, arg);
                jet_scale(cx, s, -1.0)
            }
            PdeKind::AllenCahnI => {
                // x² cos(πx)
                let x2 = jet_mul(cx, xj, xj);
                let arg = jet_scale(cx, xj, std::f64::consts::PI);
                let c = crate::jet::jet_cos(cx, arg);
                jet_mul(cx, x2, c)
            }
            PdeKind::AllenCahnII => {
                // x² sin(2πx)
                let x2 = jet_mul(cx, xj, xj);
                let arg = jet_scale(cx, xj, 2.0 * std::f64::consts::PI);
                let s = crate::jet::jet_sin(cx, arg);
                jet_mul(cx, x2, s)
            }
            PdeKind::CahnHilliard => {
                // −cos(2πx)
                let arg = jet_scale(cx, xj, 2.0 * std::f64::consts::PI);
                let c = crate::jet::jet_cos(cx, arg);
                jet_scale(cx, c, -1.0)
            }
            PdeKind::KuramotoSivashinsky => {
                // cos(x/16)·(1 + sin((x−1)/16))
                let a1 = jet_scale(cx, xj, 1.0 / 16.0);
                let c = crate::jet::jet_cos(cx, a1);
                let shifted = crate::jet::jet_add_const(cx, xj, -1.0);
                let a2 = jet_scale(cx, shifted, 1.0 / 16.0);
                let s = crate::jet::jet_sin(cx, a2);
                let one_plus = crate::jet::jet_add_const(cx, s, 1.0);
                jet_mul(cx, c, one_plus)
            }
            PdeKind::GrayScott => {
                // s⁴ with s = sin(π(x−50)/100); u = 1 − s⁴/2, v = s⁴/4
                let shifted = crate::jet::jet_add_const(cx, xj, -50.0);
                let arg = jet_scale(cx, shifted, std::f64::consts::PI / 100.0);
                let s = crate::jet::jet_sin(cx, arg);
                let s4 = jet_powi(cx, s, 4);
                match component {
                    0 => {
                        let half = jet_scale(cx, s4, -0.5);
                        crate::jet::jet_add_const(cx, half, 1.0)
                    }
                    _ => jet_scale(cx, s4, 0.25),
                }
            }
            PdeKind::BelousovZhabotinsky => {
                // exp(−100(x − c)²) with c ∈ {−0.5, 0, 0.5}
                let center = match component {
                    0 => -0.5,
                    1 => 0.0,
                    _ => 0.5,
                };
                let shifted = crate::jet::jet_add_const(cx, xj, -center);
                let sq = jet_mul(cx, shifted, shifted);
                let arg = jet_scale(cx, sq, -100.0);
                crate::jet::jet_exp(cx, arg)
            }
            PdeKind::NonlinearSchrodinger => {
                // 2/(2 − √2 cos x) − 1, imaginary part identically zero
                match component {
                    0 => {
                        let c = crate::jet::jet_cos(cx, xj);
                        let scaled = jet_scale(cx, c, -(2.0f64.sqrt()));
                        let denom = crate::jet::jet_add_const(cx, scaled, 2.0);
                        let inv = crate::jet::jet_recip(cx, denom);
                        let two_inv = jet_scale(cx, inv, 2.0);
                        crate::jet::jet_add_const(cx, two_inv, -1.0)
                    }
                    _ => Jet::constant(cx, 0.0),
                }
            }
        }
    }

    /// Pull residual coefficients out of the parameter map once.
    pub fn residual_coeffs(&self) -> Result<ResidualCoeffs> {
        let c = match self.kind {
            PdeKind::Burgers => [self.param("nu")?, 0.0, 0.0, 0.0],
            PdeKind::AllenCahnI | PdeKind::AllenCahnII => {
                [self.param("gamma1")?, self.param("gamma2")?, 0.0, 0.0]
            }
            PdeKind::CahnHilliard => {
                [self.param("epsilon1")?, self.param("epsilon2")?, 0.0, 0.0]
            }
            PdeKind::KuramotoSivashinsky => [0.0; 4],
            PdeKind::GrayScott => [
                self.param("epsilon1")?,
                self.param("epsilon2")?,
                self.param("b")?,
                self.param("k")?,
            ],
            PdeKind::BelousovZhabotinsky => {
                [self.param("epsilon1")?, self.param("epsilon2")?, 0.0, 0.0]
            }
            PdeKind::NonlinearSchrodinger => [0.0; 4],
        };
        Ok(ResidualCoeffs {
            kind: self.kind,
            c,
        })
    }

    /// Residual values for one point, plain f64 path.
    pub fn residual(&self, jets: &[Jet4]) -> Result<Vec<f64>> {
        let coeffs = self.residual_coeffs()?;
        Ok(residual_with(&mut Values, &coeffs, jets))
    }

    /// Periodic-compatibility and parameter sanity report.
    ///
    /// Endpoint value mismatch gates the verdict at [`IC_COMPATIBILITY_TOL`].
    /// Endpoint slope mismatch is reported but informational: the Allen-Cahn
    /// Case I initial condition `x²cos(πx)` has slopes ±2 at the boundary,
    /// and the equation smooths the kink immediately, so training and the
    /// reference solver are both well-posed with it.
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();

        for comp in 0..self.components {
            let left = self.u0_jet_raw(comp, self.domain.a);
            let right = self.u0_jet_raw(comp, self.domain.b);
            let value_mismatch = (left.u - right.u).abs();
            checks.push(ValidationCheck {
                name: format!("u0[{comp}] endpoint value mismatch"),
                measured: value_mismatch,
                tolerance: IC_COMPATIBILITY_TOL,
                pass: value_mismatch <= IC_COMPATIBILITY_TOL,
                gating: true,
            });
            let slope_mismatch = (left.ux - right.ux).abs();
            checks.push(ValidationCheck {
                name: format!("u0[{comp}] endpoint slope mismatch"),
                measured: slope_mismatch,
                tolerance: IC_COMPATIBILITY_TOL,
                pass: slope_mismatch <= IC_COMPATIBILITY_TOL,
                gating: false,
            });
        }

        // Parameter positivity: every cataloged physical constant is a rate
        // or coefficient that must be strictly positive.
        for (name, value) in &self.params {
            checks.push(ValidationCheck {
                name: format!("parameter '{name}' positive"),
                measured: *value,
                tolerance: f64::INFINITY,
                pass: *value > 0.0,
                gating: true,
            });
        }

        checks.push(ValidationCheck {
            name: "domain well-formed".into(),
            measured: self.domain.period(),
            tolerance: f64::INFINITY,
            pass: self.domain.validate().is_ok(),
            gating: true,
        });

        ValidationReport {
            problem: self.id.clone(),
            pass: checks.iter().all(|c| c.pass || !c.gating),
            checks,
        }
    }
}

/// Residual of the PDE at one point, from the jet of each component.
///
/// Written against the scalar context so the same formula serves plain
/// evaluation and tape recording. The Cahn-Hilliard `(u³)_xx` term is
/// expanded analytically to `6u·u_x² + 3u²·u_xx`.
pub fn residual_with<A: Arith>(
    cx: &mut A,
    coeffs: &ResidualCoeffs,
    jets: &[Jet<A::S>],
) -> Vec<A::S> {
    match coeffs.kind {
        PdeKind::Burgers => {
            let nu = coeffs.c[0];
            let j = &jets[0];
            // u_t + u·u_x − ν·u_xx
            let uux = cx.mul(j.u, j.ux);
            let adv = cx.add(j.ut, uux);
            let diff = cx.scale(j.uxx, nu);
            vec![cx.sub(adv, diff)]
        }
        PdeKind::AllenCahnI | PdeKind::AllenCahnII => {
            let (g1, g2) = (coeffs.c[0], coeffs.c[1]);
            let j = &jets[0];
            // u_t − γ₁·u_xx + γ₂·(u³ − u)
            let u2 = cx.mul(j.u, j.u);
            let u3 = cx.mul(u2, j.u);
            let cubic = cx.sub(u3, j.u);
            let lin = cx.scale(j.uxx, g1);
            let r = cx.sub(j.ut, lin);
            let reac = cx.scale(cubic, g2);
            vec![cx.add(r, reac)]
        }
        PdeKind::CahnHilliard => {
            let (e1, e2) = (coeffs.c[0], coeffs.c[1]);
            let j = &jets[0];
            // u_t − ε₁(−u_xx − ε₂·u_xxxx + 6u·u_x² + 3u²·u_xx)
            let ux2 = cx.mul(j.ux, j.ux);
            let t1 = cx.mul(j.u, ux2);
            let t1 = cx.scale(t1, 6.0);
            let u2 = cx.mul(j.u, j.u);
            let t2 = cx.mul(u2, j.uxx);
            let t2 = cx.scale(t2, 3.0);
            let nonlin = cx.add(t1, t2);
            let fourth = cx.scale(j.uxxxx, e2);
            let lin = cx.add(j.uxx, fourth);
            let rhs = cx.sub(nonlin, lin);
            let rhs = cx.scale(rhs, e1);
            vec![cx.sub(j.ut, rhs)]
        }
        PdeKind::KuramotoSivashinsky => {
            let j = &jets[0];
            // u_t + u_xx + u_xxxx + u·u_x
            let uux = cx.mul(j.u, j.ux);
            let r = cx.add(j.ut, j.uxx);
            let r = cx.add(r, j.uxxxx);
            vec![cx.add(r, uux)]
        }
        PdeKind::GrayScott => {
            let (e1, e2, b, k) = (coeffs.c[0], coeffs.c[1], coeffs.c[2], coeffs.c[3]);
            let (u, v) = (&jets[0], &jets[1]);
            let v2 = cx.mul(v.u, v.u);
            let uv2 = cx.mul(u.u, v2);
            // u_t − ε₁·u_xx − b(1 − u) + u·v²
            let du = cx.scale(u.uxx, e1);
            let ru = cx.sub(u.ut, du);
            let bu = cx.scale(u.u, b);
            let ru = cx.add(ru, bu);
            let ru = cx.add_k(ru, -b);
            let ru = cx.add(ru, uv2);
            // v_t − ε₂·v_xx + (b + k)·v − u·v²
            let dv = cx.scale(v.uxx, e2);
            let rv = cx.sub(v.ut, dv);
            let kv = cx.scale(v.u, b + k);
            let rv = cx.add(rv, kv);
            let rv = cx.sub(rv, uv2);
            vec![ru, rv]
        }
        PdeKind::BelousovZhabotinsky => {
            let (e1, e2) = (coeffs.c[0], coeffs.c[1]);
            let (u, v, w) = (&jets[0], &jets[1], &jets[2]);
            let uv = cx.mul(u.u, v.u);
            let u2 = cx.mul(u.u, u.u);
            // u_t − ε₁·u_xx − u − v + uv + u²
            let du = cx.scale(u.uxx, e1);
            let ru = cx.sub(u.ut, du);
            let ru = cx.sub(ru, u.u);
            let ru = cx.sub(ru, v.u);
            let ru = cx.add(ru, uv);
            let ru = cx.add(ru, u2);
            // v_t − ε₂·v_xx − w + v + uv
            let dv = cx.scale(v.uxx, e2);
            let rv = cx.sub(v.ut, dv);
            let rv = cx.sub(rv, w.u);
            let rv = cx.add(rv, v.u);
            let rv = cx.add(rv, uv);
            // w_t − ε₁·w_xx − u + w
            let dw = cx.scale(w.uxx, e1);
            let rw = cx.sub(w.ut, dw);
            let rw = cx.sub(rw, u.u);
            let rw = cx.add(rw, w.u);
            vec![ru, rv, rw]
        }
        PdeKind::NonlinearSchrodinger => {
            let (p, q) = (&jets[0], &jets[1]);
            // u = p + iq, u_t = i·u_xx + i|u|²u split into real/imag parts:
            //   p_t + q_xx + (p² + q²)·q = 0
            //   q_t − p_xx − (p² + q²)·p = 0
            let p2 = cx.mul(p.u, p.u);
            let q2 = cx.mul(q.u, q.u);
            let mag = cx.add(p2, q2);
            let magq = cx.mul(mag, q.u);
            let rre = cx.add(p.ut, q.uxx);
            let rre = cx.add(rre, magq);
            let magp = cx.mul(mag, p.u);
            let rim = cx.sub(q.ut, p.uxx);
            let rim = cx.sub(rim, magp);
            vec![rre, rim]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_eight_entries_with_expected_params() {
        let cat = catalog();
        assert_eq!(cat.len(), 8);

        let ac1 = by_id("allen-cahn-1").unwrap();
        assert_eq!(ac1.param("gamma1").unwrap(), 0.001);
        assert_eq!(ac1.param("gamma2").unwrap(), 5.0);

        let ac2 = by_id("allen-cahn-2").unwrap();
        assert_eq!(ac2.param("gamma2").unwrap(), 4.0);

        let gs = by_id("gray-scott").unwrap();
        assert_eq!(gs.param("k").unwrap(), 0.0562);
        assert_eq!(gs.param("b").unwrap(), 0.02);

        let ch = by_id("cahn-hilliard").unwrap();
        assert_eq!(ch.param("epsilon1").unwrap(), 1e-2);
        assert_eq!(ch.param("epsilon2").unwrap(), 1e-4);

        let bz = by_id("belousov-zhabotinsky").unwrap();
        assert_eq!(bz.components, 3);
        assert_eq!(bz.domain.horizon, 3.0);

        assert!(by_id("no-such-problem").is_err());
    }

    #[test]
    fn allen_cahn_equilibrium_residual_is_zero() {
        let ac = by_id("allen-cahn-1").unwrap();
        let jet = Jet4::value(1.0);
        let r = ac.residual(&[jet]).unwrap();
        assert_eq!(r, vec![0.0]);
    }

    #[test]
    fn gray_scott_trivial_steady_state() {
        let gs = by_id("gray-scott").unwrap();
        let r = gs
            .residual(&[Jet4::value(1.0), Jet4::value(0.0)])
            .unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
    }

    #[test]
    fn nls_plane_wave_residual_vanishes() {
        // u = a·exp(i a² t) is an exact x-independent solution.
        let nls = by_id("nls").unwrap();
        let a = 0.7_f64;
        let t = 0.3_f64;
        let phase = a * a * t;
        let mut p = Jet4::value(a * phase.cos());
        let mut q = Jet4::value(a * phase.sin());
        p.ut = -a * a * a * phase.sin();
        q.ut = a * a * a * phase.cos();
        let r = nls.residual(&[p, q]).unwrap();
        assert!(r[0].abs() <= 1e-12, "re residual {}", r[0]);
        assert!(r[1].abs() <= 1e-12, "im residual {}", r[1]);
    }

    #[test]
    fn initial_conditions_have_correct_endpoint_values() {
        // AC-I: u0(±1) = 1·cos(±π) = −1 on both ends.
        let ac = by_id("allen-cahn-1").unwrap();
        let l = ac.u0_jet(0, -1.0);
        let r = ac.u0_jet(0, 1.0);
        assert!((l.u + 1.0).abs() < 1e-15);
        assert!((r.u + 1.0).abs() < 1e-15);

        // Burgers: u0(x) = −sin(πx) vanishes at ±1.
        let b = by_id("burgers").unwrap();
        assert!(b.u0_jet(0, -1.0).u.abs() < 1e-15);
        assert!(b.u0_jet(0, 1.0).u.abs() < 1e-15);
    }

    #[test]
    fn u0_derivatives_match_finite_differences() {
        for problem in catalog() {
            for comp in 0..problem.components {
                let x0 = problem.domain.a + 0.37 * problem.domain.period();
                let jet = problem.u0_jet(comp, x0);
                let f = |x: f64| problem.u0_jet(comp, x).u;
                let scale = problem.domain.period() / 2.0;
                let h = 1e-3 * scale;
                let d1h = |h: f64| (f(x0 + h) - f(x0 - h)) / (2.0 * h);
                let d2h = |h: f64| (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h);
                // Richardson: kills the h² truncation term, which matters for
                // the narrow BZ Gaussians.
                let d1 = (4.0 * d1h(h / 2.0) - d1h(h)) / 3.0;
                let d2 = (4.0 * d2h(h / 2.0) - d2h(h)) / 3.0;
                let tol = 1e-5 * (1.0 + jet.ux.abs().max(jet.uxx.abs()));
                assert!(
                    (jet.ux - d1).abs() <= tol,
                    "{} comp {comp}: ux {} vs fd {}",
                    problem.id,
                    jet.ux,
                    d1
                );
                assert!(
                    (jet.uxx - d2).abs() <= tol * 10.0,
                    "{} comp {comp}: uxx {} vs fd {}",
                    problem.id,
                    jet.uxx,
                    d2
                );
            }
        }
    }

    #[test]
    fn every_catalog_entry_validates() {
        for problem in catalog() {
            let report = problem.validate();
            assert!(
                report.pass,
                "{} failed validation: {:?}",
                problem.id,
                report
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn bz_gaussian_endpoint_mismatch_is_tiny_but_nonzero() {
        let bz = by_id("belousov-zhabotinsky").unwrap();
        let mismatch = (bz.u0_jet_raw(0, -1.0).u - bz.u0_jet_raw(0, 1.0).u).abs();
        // e^{−25} ≈ 1.4e-11: inside tolerance, not exactly periodic.
        assert!(mismatch > 1e-12 && mismatch < 1e-8, "mismatch {mismatch}");
    }

    #[test]
    fn synthetic_linear_ic_fails_validation() {
        // u0 = x on [−1, 1] has endpoint mismatch 2 → must fail.
        // Emulated by checking the report machinery on a doctored problem:
        // Burgers with domain shifted so sin(πx) loses periodicity.
        let mut p = by_id("burgers").unwrap();
        p.domain.b = 0.5;
        let report = p.validate();
        assert!(!report.pass);
    }

    #[test]
    fn cahn_hilliard_expansion_matches_jet_cube() {
        // 6u·u_x² + 3u²·u_xx must equal the uxx slot of u³ computed by
        // Leibniz composition.
        for seed in 0..20u64 {
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(11);
            let mut next = || {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
            };
            let j = Jet4 {
                u: next(),
                ut: next(),
                ux: next(),
                uxx: next(),
                uxxx: next(),
                uxxxx: next(),
            };
            let cube = j * j * j;
            let expanded = 6.0 * j.u * j.ux * j.ux + 3.0 * j.u * j.u * j.uxx;
            let rel = (cube.uxx - expanded).abs() / expanded.abs().max(1e-12);
            assert!(rel < 1e-14, "rel {rel}");
        }
    }

    #[test]
    fn param_override_rejects_unknown_names() {
        let mut ac = by_id("allen-cahn-1").unwrap();
        assert!(ac.set_param("gamma2", 4.0).is_ok());
        assert_eq!(ac.param("gamma2").unwrap(), 4.0);
        assert!(ac.set_param("gamma3", 1.0).is_err());
    }

    #[test]
    fn ks_residual_quadratic_form() {
        // KS is linear except u·u_x: residual(αa) − α·residual_linear parts
        // leaves exactly the quadratic advection term.
        let ks = by_id("kuramoto-sivashinsky").unwrap();
        let a = Jet4 {
            u: 0.3,
            ut: -0.2,
            ux: 0.7,
            uxx: 0.1,
            uxxx: -0.4,
            uxxxx: 0.9,
        };
        let alpha = 2.5;
        let scaled = a.scaled(alpha);
        let r1 = ks.residual(&[a]).unwrap()[0];
        let r2 = ks.residual(&[scaled]).unwrap()[0];
        let linear = a.ut + a.uxx + a.uxxxx;
        let quad = a.u * a.ux;
        assert!((r1 - (linear + quad)).abs() < 1e-14);
        assert!((r2 - (alpha * linear + alpha * alpha * quad)).abs() < 1e-12);
    }
}
