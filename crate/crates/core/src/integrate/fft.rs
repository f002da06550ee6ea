use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft as FftPlan, FftPlanner};

use super::IntegrateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    /// Inverse transform, normalized by 1/N.
    Inverse,
}

/// Planned complex FFT of one power-of-two length.
#[derive(Clone)]
pub struct Fft {
    len: usize,
    forward: Arc<dyn FftPlan<f64>>,
    inverse: Arc<dyn FftPlan<f64>>,
}

impl std::fmt::Debug for Fft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft").field("len", &self.len).finish()
    }
}

impl Fft {
    pub fn new(len: usize) -> Result<Self, IntegrateError> {
        if len == 0 || !len.is_power_of_two() {
            return Err(IntegrateError::NotPowerOfTwo(len));
        }
        let mut planner = FftPlanner::new();
        Ok(Fft {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Transforms `data` in place.
    pub fn process(&self, data: &mut [Complex64], direction: Direction) {
        assert_eq!(data.len(), self.len, "FFT buffer length");
        match direction {
            Direction::Forward => self.forward.process(data),
            Direction::Inverse => {
                self.inverse.process(data);
                let scale = 1.0 / self.len as f64;
                data.iter_mut().for_each(|z| *z *= scale);
            }
        }
    }

    pub fn forward_real(&self, field: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.process(&mut buf, Direction::Forward);
        buf
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut buf = spectrum.to_vec();
        self.process(&mut buf, Direction::Inverse);
        buf.into_iter().map(|z| z.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn naive_dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let ang = -std::f64::consts::TAU * (k * j) as f64 / n as f64;
                        Complex64::new(v * ang.cos(), v * ang.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn impulse_and_constant() {
        let fft = Fft::new(8).unwrap();
        let mut e0 = vec![0.0; 8];
        e0[0] = 1.0;
        assert!(fft.forward_real(&e0).iter().all(|z| (*z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let c = fft.forward_real(&[2.5; 8]);
        assert!((c[0] - Complex64::new(20.0, 0.0)).norm() < 1e-14);
        assert!(c[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn matches_naive_dft_and_round_trips() {
        let mut rng = stream(21, &[]);
        let x: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fft = Fft::new(64).unwrap();
        let spec = fft.forward_real(&x);
        for (a, b) in spec.iter().zip(naive_dft(&x)) {
            assert!((a - b).norm() < 1e-12);
        }
        let back = fft.inverse_real(&spec);
        let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert_eq!(Fft::new(48).unwrap_err(), IntegrateError::NotPowerOfTwo(48));
        assert!(Fft::new(0).is_err());
    }
}
