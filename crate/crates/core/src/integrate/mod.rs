//! Numerical integrators: adaptive Dormand–Prince for ODEs, pseudo-spectral
//! steppers for the Burgers and Kuramoto–Sivashinsky equations, and the FFT
//! they share.

mod fft;
mod ode;
mod spectral;

pub use fft::{Direction, Fft};
pub use ode::{solve_ode, OdeSolution, OdeSolveConfig};
pub use spectral::{step_burgers, step_ks, EtdCoefficients, SpectralGrid};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("FFT length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("step size underflow at t = {t}: trajectory diverged")]
    StepUnderflow { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("exceeded {0} integration steps")]
    TooManySteps(usize),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}
