//! Periodic pseudo-spectral steppers on a 64-point grid.

use rustfft::num_complex::Complex64;

use super::{Direction, Fft, IntegrateError};

/// Periodic grid with FFT-ordered wavenumbers.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    pub n_x: usize,
    pub domain_length: f64,
    /// Wavenumbers for odd derivatives; the Nyquist entry is zero.
    pub wavenumbers: Vec<f64>,
    /// Squared wavenumbers with the Nyquist mode kept.
    pub wavenumbers_sq: Vec<f64>,
    /// 2/3-rule mask: true for retained modes.
    pub dealias: Vec<bool>,
    fft: Fft,
}

impl SpectralGrid {
    pub fn new(n_x: usize, domain_length: f64) -> Result<Self, IntegrateError> {
        let fft = Fft::new(n_x)?;
        let base = std::f64::consts::TAU / domain_length;
        let index = |j: usize| -> i64 {
            if j <= n_x / 2 {
                j as i64
            } else {
                j as i64 - n_x as i64
            }
        };
        let wavenumbers = (0..n_x)
            .map(|j| if j == n_x / 2 { 0.0 } else { base * index(j) as f64 })
            .collect();
        let wavenumbers_sq = (0..n_x).map(|j| (base * index(j) as f64).powi(2)).collect();
        let cutoff = n_x as i64 / 3;
        let dealias = (0..n_x).map(|j| index(j).abs() <= cutoff && j != n_x / 2).collect();
        Ok(SpectralGrid {
            n_x,
            domain_length,
            wavenumbers,
            wavenumbers_sq,
            dealias,
            fft,
        })
    }

    pub fn burgers() -> Self {
        Self::new(crate::systems::FIELD_POINTS, crate::systems::BURGERS_LENGTH).expect("64 is a power of two")
    }

    pub fn ks() -> Self {
        Self::new(crate::systems::FIELD_POINTS, crate::systems::KS_LENGTH).expect("64 is a power of two")
    }

    pub fn fft(&self) -> &Fft {
        &self.fft
    }

    fn to_spectrum(&self, u: &[f64]) -> Vec<Complex64> {
        self.fft.forward_real(u)
    }

    fn to_field(&self, v: &[Complex64]) -> Vec<f64> {
        self.fft.inverse_real(v)
    }

    /// Spectrum of `−∂x(u²/2)` from the spectrum of u; dealiased when asked.
    fn advection(&self, v: &[Complex64], dealias: bool) -> Vec<Complex64> {
        let mut buf = v.to_vec();
        self.fft.process(&mut buf, Direction::Inverse);
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.5 * z.re * z.re, 0.0));
        self.fft.process(&mut buf, Direction::Forward);
        for (j, z) in buf.iter_mut().enumerate() {
            *z = if dealias && !self.dealias[j] {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -self.wavenumbers[j]) * *z
            };
        }
        buf
    }
}

fn check_finite(u: &[f64]) -> Result<(), IntegrateError> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(IntegrateError::NonFinite { t: f64::NAN })
    }
}

fn diffuse(v: &mut [Complex64], grid: &SpectralGrid, nu: f64, dt: f64) {
    for (z, k2) in v.iter_mut().zip(&grid.wavenumbers_sq) {
        *z *= (-nu * k2 * dt).exp();
    }
}

/// One Strang-split step of viscous Burgers `u_t + u u_x = ν u_xx`: exact
/// half-step diffusion, one dealiased RK4 step of the conservative advection
/// term, exact half-step diffusion.
pub fn step_burgers(u: &[f64], dt: f64, nu: f64, grid: &SpectralGrid) -> Result<Vec<f64>, IntegrateError> {
    if !(nu > 0.0) {
        return Err(IntegrateError::InvalidConfig("viscosity must be positive".into()));
    }
    if u.len() != grid.n_x {
        return Err(IntegrateError::InvalidConfig(format!("field length {} != grid {}", u.len(), grid.n_x)));
    }
    let mut v = grid.to_spectrum(u);
    diffuse(&mut v, grid, nu, 0.5 * dt);

    let axpy = |base: &[Complex64], k: &[Complex64], s: f64| -> Vec<Complex64> {
        base.iter().zip(k).map(|(b, k)| b + k * s).collect()
    };
    let k1 = grid.advection(&v, true);
    let k2 = grid.advection(&axpy(&v, &k1, 0.5 * dt), true);
    let k3 = grid.advection(&axpy(&v, &k2, 0.5 * dt), true);
    let k4 = grid.advection(&axpy(&v, &k3, dt), true);
    for j in 0..v.len() {
        v[j] += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (dt / 6.0);
    }

    diffuse(&mut v, grid, nu, 0.5 * dt);
    let out = grid.to_field(&v);
    check_finite(&out)?;
    Ok(out)
}

/// ETD-RK4 coefficients for `u_t = L u + N(u)` with `L = k² − k⁴`, evaluated
/// by averaging over a 32-point contour around each eigenvalue.
#[derive(Debug, Clone)]
pub struct EtdCoefficients {
    pub dt: f64,
    e: Vec<f64>,
    e2: Vec<f64>,
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

const CONTOUR_POINTS: usize = 32;

impl EtdCoefficients {
    pub fn new(grid: &SpectralGrid, dt: f64) -> Self {
        let n = grid.n_x;
        let roots: Vec<Complex64> = (1..=CONTOUR_POINTS)
            .map(|j| Complex64::from_polar(1.0, std::f64::consts::PI * (j as f64 - 0.5) / CONTOUR_POINTS as f64))
            .collect();
        let mut c = EtdCoefficients {
            dt,
            e: vec![0.0; n],
            e2: vec![0.0; n],
            q: vec![0.0; n],
            f1: vec![0.0; n],
            f2: vec![0.0; n],
            f3: vec![0.0; n],
        };
        for j in 0..n {
            let k = grid.wavenumbers[j];
            let l = k * k - k.powi(4);
            c.e[j] = (dt * l).exp();
            c.e2[j] = (dt * l / 2.0).exp();
            let (mut q, mut f1, mut f2, mut f3) = (0.0, 0.0, 0.0, 0.0);
            for r in &roots {
                let lr = dt * l + r;
                let ex = lr.exp();
                let lr3 = lr * lr * lr;
                q += (((lr / 2.0).exp() - 1.0) / lr).re;
                f1 += ((-4.0 - lr + ex * (4.0 - 3.0 * lr + lr * lr)) / lr3).re;
                f2 += ((2.0 + lr + ex * (lr - 2.0)) / lr3).re;
                f3 += ((-4.0 - 3.0 * lr - lr * lr + ex * (4.0 - lr)) / lr3).re;
            }
            let m = CONTOUR_POINTS as f64;
            c.q[j] = dt * q / m;
            c.f1[j] = dt * f1 / m;
            c.f2[j] = dt * f2 / m;
            c.f3[j] = dt * f3 / m;
        }
        c
    }
}

/// One ETD-RK4 step of Kuramoto–Sivashinsky `u_t + u u_x + u_xx + u_xxxx = 0`.
pub fn step_ks(u: &[f64], coeffs: &EtdCoefficients, grid: &SpectralGrid) -> Result<Vec<f64>, IntegrateError> {
    if u.len() != grid.n_x {
        return Err(IntegrateError::InvalidConfig(format!("field length {} != grid {}", u.len(), grid.n_x)));
    }
    let c = coeffs;
    let v = grid.to_spectrum(u);
    let nl = |w: &[Complex64]| grid.advection(w, false);
    let nv = nl(&v);
    let a: Vec<Complex64> = (0..v.len()).map(|j| v[j] * c.e2[j] + nv[j] * c.q[j]).collect();
    let na = nl(&a);
    let b: Vec<Complex64> = (0..v.len()).map(|j| v[j] * c.e2[j] + na[j] * c.q[j]).collect();
    let nb = nl(&b);
    let cc: Vec<Complex64> = (0..v.len())
        .map(|j| a[j] * c.e2[j] + (nb[j] * 2.0 - nv[j]) * c.q[j])
        .collect();
    let nc = nl(&cc);
    let next: Vec<Complex64> = (0..v.len())
        .map(|j| v[j] * c.e[j] + nv[j] * c.f1[j] + (na[j] + nb[j]) * (2.0 * c.f2[j]) + nc[j] * c.f3[j])
        .collect();
    let out = grid.to_field(&next);
    check_finite(&out)?;
    Ok(out)
}
