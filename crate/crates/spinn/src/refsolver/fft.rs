//! Thin transform layer over rustfft: complex transforms plus a
//! real-to-complex pair that stores the half spectrum (Hermitian symmetry
//! reconstructs the rest on the way back).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft as RustFft, FftPlanner};

pub struct Fft {
    n: usize,
    forward: Arc<dyn RustFft<f64>>,
    inverse: Arc<dyn RustFft<f64>>,
}

impl Fft {
    pub fn new(n: usize) -> Fft {
        let mut planner = FftPlanner::new();
        Fft {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// Half-spectrum length for real fields.
    pub fn spec_len(&self) -> usize {
        self.n / 2 + 1
    }

    /// Unnormalized forward transform of a real signal; writes bins
    /// `0..=n/2`.
    pub fn forward_r2c(&self, x: &[f64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.spec_len());
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        out.copy_from_slice(&buf[..self.spec_len()]);
    }

    /// Inverse of [`Fft::forward_r2c`], normalized by `1/n`.
    pub fn inverse_c2r(&self, spec: &[Complex64], out: &mut [f64]) {
        debug_assert_eq!(spec.len(), self.spec_len());
        debug_assert_eq!(out.len(), self.n);
        let mut buf = vec![Complex64::default(); self.n];
        buf[..spec.len()].copy_from_slice(spec);
        for k in 1..self.n - self.n / 2 {
            buf[self.n - k] = spec[k].conj();
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re * scale;
        }
    }

    /// Unnormalized in-place forward transform of a complex signal.
    pub fn forward_c2c(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.forward.process(buf);
    }

    /// Normalized in-place inverse transform of a complex signal.
    pub fn inverse_c2c(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.inverse.process(buf);
        let scale = 1.0 / self.n as f64;
        for b in buf.iter_mut() {
            *b *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_roundtrip_is_machine_precision() {
        let n = 256;
        let fft = Fft::new(n);
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                (3.0 * t).sin() + 0.5 * (7.0 * t).cos() + 0.1 * (t * 0.5).sin()
            })
            .collect();
        let mut spec = vec![Complex64::default(); fft.spec_len()];
        fft.forward_r2c(&x, &mut spec);
        let mut back = vec![0.0; n];
        fft.inverse_c2r(&spec, &mut back);
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err: f64 = x
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err / norm <= 1e-13, "roundtrip rel err {}", err / norm);
    }

    #[test]
    fn complex_roundtrip_is_machine_precision() {
        let n = 128;
        let fft = Fft::new(n);
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.1).sin(), (i as f64 * 0.07).cos()))
            .collect();
        let mut buf = x.clone();
        fft.forward_c2c(&mut buf);
        fft.inverse_c2c(&mut buf);
        let norm: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let err: f64 = x
            .iter()
            .zip(&buf)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err / norm <= 1e-13);
    }

    #[test]
    fn pure_mode_lands_in_expected_bin() {
        let n = 64;
        let fft = Fft::new(n);
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 5.0 * i as f64 / n as f64).cos())
            .collect();
        let mut spec = vec![Complex64::default(); fft.spec_len()];
        fft.forward_r2c(&x, &mut spec);
        // cos(5θ): bin 5 holds n/2, everything else ~0.
        for (k, c) in spec.iter().enumerate() {
            let mag = c.norm();
            if k == 5 {
                assert!((mag - n as f64 / 2.0).abs() < 1e-9);
            } else {
                assert!(mag < 1e-9, "bin {k} magnitude {mag}");
            }
        }
    }
}
