//! Dormand–Prince 5(4) with PI step-size control and the 4th-order continuous
//! extension, sampled onto a uniform output grid.

use super::IntegrateError;

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolveConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub t_span: (f64, f64),
    /// Number of uniformly spaced output samples, including both endpoints.
    pub n_out: usize,
    pub max_steps: usize,
}

impl OdeSolveConfig {
    pub fn new(t_span: (f64, f64), n_out: usize) -> Self {
        OdeSolveConfig {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            t_span,
            n_out,
            max_steps: 10_000_000,
        }
    }

    fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(IntegrateError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.n_out < 2 {
            return Err(IntegrateError::InvalidConfig("n_out must be at least 2".into()));
        }
        if !(self.t_span.1 > self.t_span.0) {
            return Err(IntegrateError::InvalidConfig("empty time span".into()));
        }
        Ok(())
    }
}

/// States on the uniform output grid, row-major `n_out × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub dim: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl OdeSolution {
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

fn rms_norm(v: &[f64], scale: &[f64]) -> f64 {
    (v.iter().zip(scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Integrates `dx/dt = field(t, x)` over `cfg.t_span` and samples the dense
/// output at `cfg.n_out` uniform times.
pub fn solve_ode<F>(mut field: F, x0: &[f64], cfg: &OdeSolveConfig) -> Result<OdeSolution, IntegrateError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    let n = x0.len();
    let (t0, t1) = cfg.t_span;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::NonFinite { t: t0 });
    }
    let times: Vec<f64> = (0..cfg.n_out)
        .map(|i| t0 + (t1 - t0) * i as f64 / (cfg.n_out - 1) as f64)
        .collect();
    let mut states = Vec::with_capacity(cfg.n_out * n);
    states.extend_from_slice(x0);
    let mut next_out = 1;

    let mut y = x0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut scale = vec![0.0; n];
    let mut cont = vec![vec![0.0; n]; 5];

    field(t0, &y, &mut k[0]);
    let h_max = t1 - t0;
    let mut h = initial_step(&mut field, t0, &y, &k[0], cfg, h_max);
    let mut t = t0;
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    let (mut accepted, mut rejected) = (0usize, 0usize);

    while next_out < cfg.n_out {
        if accepted + rejected >= cfg.max_steps {
            return Err(IntegrateError::TooManySteps(cfg.max_steps));
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(IntegrateError::StepUnderflow { t });
        }
        if t + h > t1 {
            h = t1 - t;
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k[0][i];
        }
        field(t + C2 * h, &ytmp, &mut k[1]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        field(t + C3 * h, &ytmp, &mut k[2]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        field(t + C4 * h, &ytmp, &mut k[3]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        field(t + C5 * h, &ytmp, &mut k[4]);
        for i in 0..n {
            ytmp[i] = y[i]
                + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        field(t + h, &ytmp, &mut k[5]);
        for i in 0..n {
            y1[i] = y[i]
                + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        field(t + h, &y1, &mut k[6]);

        for i in 0..n {
            err[i] = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            scale[i] = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y1[i].abs());
        }
        let err_norm = rms_norm(&err, &scale);
        if !err_norm.is_finite() || y1.iter().any(|v| !v.is_finite()) {
            // Treat as a rejection with a hard shrink; underflow check catches divergence.
            h *= FAC_MIN;
            rejected += 1;
            last_rejected = true;
            continue;
        }

        let fac11 = err_norm.powf(0.2 - BETA * 0.75);
        if err_norm <= 1.0 {
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            fac_old = err_norm.max(1e-4);

            for i in 0..n {
                let ydiff = y1[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k[6][i] - bspl;
                cont[4][i] = h
                    * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            let t_new = t + h;
            while next_out < cfg.n_out && (times[next_out] <= t_new || next_out == cfg.n_out - 1 && t_new >= t1) {
                let theta = (times[next_out] - t) / h;
                let theta1 = 1.0 - theta;
                for i in 0..n {
                    let v = cont[0][i]
                        + theta * (cont[1][i] + theta1 * (cont[2][i] + theta * (cont[3][i] + theta1 * cont[4][i])));
                    states.push(v);
                }
                next_out += 1;
            }

            y.copy_from_slice(&y1);
            let k7 = k[6].clone();
            k[0].copy_from_slice(&k7);
            t = t_new;
            accepted += 1;
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new.min(h_max);
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            rejected += 1;
            last_rejected = true;
        }
    }

    if states.iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::NonFinite { t });
    }
    Ok(OdeSolution {
        times,
        states,
        dim: n,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

// Automatic initial step from scaled norms of the state and derivatives.
fn initial_step<F>(field: &mut F, t0: f64, y0: &[f64], f0: &[f64], cfg: &OdeSolveConfig, h_max: f64) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let sk: Vec<f64> = y0.iter().map(|y| cfg.abs_tol + cfg.rel_tol * y.abs()).collect();
    let d0 = rms_norm(y0, &sk);
    let d1 = rms_norm(f0, &sk);
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(h_max);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    field(t0 + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms_norm(&diff, &sk) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    (100.0 * h0).min(h1).min(h_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn harmonic_oscillator_full_period() {
        let cfg = OdeSolveConfig::new((0.0, TAU), 101);
        let sol = solve_ode(|_, x, d| {
            d[0] = x[1];
            d[1] = -x[0];
        }, &[1.0, 0.0], &cfg)
        .unwrap();
        let last = sol.state(100);
        assert!((last[0] - 1.0).abs() < 1e-6 && last[1].abs() < 1e-6, "{last:?}");
        for (i, t) in sol.times.iter().enumerate() {
            let s = sol.state(i);
            assert!((s[0] - t.cos()).abs() < 1e-7, "dense output at t={t}");
            assert!((s[1] + t.sin()).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_field_gives_constant_trajectory() {
        let cfg = OdeSolveConfig::new((0.0, 5.0), 11);
        let sol = solve_ode(|_, _, d| d.fill(0.0), &[3.0, -2.0, 0.5], &cfg).unwrap();
        for i in 0..11 {
            assert_eq!(sol.state(i), &[3.0, -2.0, 0.5]);
        }
    }

    #[test]
    fn blow_up_is_reported() {
        // x' = x², x(0) = 1 blows up at t = 1.
        let cfg = OdeSolveConfig::new((0.0, 2.0), 5);
        let err = solve_ode(|_, x, d| d[0] = x[0] * x[0], &[1.0], &cfg).unwrap_err();
        assert!(matches!(err, IntegrateError::StepUnderflow { .. } | IntegrateError::NonFinite { .. } | IntegrateError::TooManySteps(_)), "{err:?}");
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = OdeSolveConfig::new((0.0, 1.0), 1);
        assert!(matches!(solve_ode(|_, _, _| {}, &[0.0], &cfg), Err(IntegrateError::InvalidConfig(_))));
        let cfg = OdeSolveConfig::new((0.0, 1.0), 3);
        assert!(matches!(solve_ode(|_, _, _| {}, &[f64::NAN], &cfg), Err(IntegrateError::NonFinite { .. })));
    }

    #[test]
    fn deterministic() {
        let cfg = OdeSolveConfig::new((0.0, 3.0), 50);
        let f = |_: f64, x: &[f64], d: &mut [f64]| {
            d[0] = 10.0 * (x[1] - x[0]);
            d[1] = x[0] * (28.0 - x[2]) - x[1];
            d[2] = x[0] * x[1] - 8.0 / 3.0 * x[2];
        };
        let a = solve_ode(f, &[1.0, 2.0, 3.0], &cfg).unwrap();
        let b = solve_ode(f, &[1.0, 2.0, 3.0], &cfg).unwrap();
        assert_eq!(a, b);
    }
}
