//! The nine benchmark systems: equations of motion, parameter and
//! initial-condition samplers, and closed-form invariants.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter count mismatch for {system}: expected {expected}, got {got}")]
    ParamMismatch {
        system: SystemId,
        expected: usize,
        got: usize,
    },
    #[error("{0} is a PDE system and has no ODE vector field")]
    NotAnOde(SystemId),
    #[error("{0} has no closed-form conserved quantity")]
    NoTrueLaw(SystemId),
    #[error("invariant of {0} requires a strictly positive state")]
    NonPositiveState(SystemId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    MassSpring,
    LotkaVolterra,
    CoupledSprings,
    HenonHeiles,
    DoublePendulum,
    Lorenz,
    ThreeBody,
    Burgers,
    Ks,
}

impl SystemId {
    pub const ALL: [SystemId; 9] = [
        SystemId::MassSpring,
        SystemId::LotkaVolterra,
        SystemId::CoupledSprings,
        SystemId::HenonHeiles,
        SystemId::DoublePendulum,
        SystemId::Lorenz,
        SystemId::ThreeBody,
        SystemId::Burgers,
        SystemId::Ks,
    ];

    pub const TRUE_LAW: [SystemId; 4] = [
        SystemId::MassSpring,
        SystemId::LotkaVolterra,
        SystemId::CoupledSprings,
        SystemId::HenonHeiles,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemId::MassSpring => "mass_spring",
            SystemId::LotkaVolterra => "lotka_volterra",
            SystemId::CoupledSprings => "coupled_springs",
            SystemId::HenonHeiles => "henon_heiles",
            SystemId::DoublePendulum => "double_pendulum",
            SystemId::Lorenz => "lorenz",
            SystemId::ThreeBody => "three_body",
            SystemId::Burgers => "burgers",
            SystemId::Ks => "ks",
        }
    }

    pub fn kind(self) -> SystemKind {
        match self {
            SystemId::Burgers | SystemId::Ks => SystemKind::Pde,
            _ => SystemKind::Ode,
        }
    }

    pub fn has_true_law(self) -> bool {
        Self::TRUE_LAW.contains(&self)
    }

    pub fn spec(self) -> SystemSpec {
        SystemSpec::of(self)
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemId {
    type Err = SystemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SystemId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| SystemError::UnknownSystem(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Ode,
    Pde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: &'static str,
    pub lower: f64,
    pub upper: f64,
}

const fn range(name: &'static str, lower: f64, upper: f64) -> ParamRange {
    ParamRange { name, lower, upper }
}

/// Static description of one benchmark system at full scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSpec {
    pub id: SystemId,
    pub dim: usize,
    pub kind: SystemKind,
    pub has_true_law: bool,
    pub param_ranges: Vec<ParamRange>,
    /// Output sampling step in time units.
    pub dt: f64,
    /// Samples per trajectory.
    pub steps: usize,
    pub n_traj: usize,
}

pub const LORENZ_SIGMA: f64 = 10.0;
pub const LORENZ_RHO: f64 = 28.0;
pub const LORENZ_BETA: f64 = 8.0 / 3.0;
pub const PENDULUM_GRAVITY: f64 = 9.8;
pub const EARTH_MOON_MU: f64 = 0.01215;
pub const BURGERS_VISCOSITY: f64 = 0.05;
pub const BURGERS_LENGTH: f64 = TAU;
pub const KS_LENGTH: f64 = 32.0;
pub const FIELD_POINTS: usize = 64;

impl SystemSpec {
    pub fn of(id: SystemId) -> Self {
        let (dim, param_ranges, dt) = match id {
            SystemId::MassSpring => (2, vec![range("k", 0.5, 1.5), range("m", 0.5, 1.5)], 0.1),
            SystemId::LotkaVolterra => (
                2,
                vec![
                    range("alpha", 0.15, 0.35),
                    range("beta", 0.065, 0.085),
                    range("gamma", 0.14, 0.16),
                    range("delta", 0.06, 0.08),
                ],
                0.1,
            ),
            SystemId::CoupledSprings => (
                4,
                vec![range("k1", 0.8, 1.2), range("k2", 0.8, 1.2), range("k3", 0.8, 1.2)],
                0.1,
            ),
            SystemId::HenonHeiles => (4, vec![], 0.1),
            SystemId::DoublePendulum => (4, vec![], 0.05),
            SystemId::Lorenz => (3, vec![], 0.01),
            SystemId::ThreeBody => (4, vec![], 0.05),
            SystemId::Burgers => (3, vec![], 0.002),
            SystemId::Ks => (3, vec![], 0.1),
        };
        let n_traj = match id.kind() {
            SystemKind::Ode => 500,
            SystemKind::Pde => 1000,
        };
        SystemSpec {
            id,
            dim,
            kind: id.kind(),
            has_true_law: id.has_true_law(),
            param_ranges,
            dt,
            steps: 500,
            n_traj,
        }
    }

    /// Constants used by fixed-parameter systems, as name/value pairs.
    pub fn constants(&self) -> Vec<(&'static str, f64)> {
        match self.id {
            SystemId::Lorenz => vec![
                ("sigma", LORENZ_SIGMA),
                ("rho", LORENZ_RHO),
                ("beta", LORENZ_BETA),
            ],
            SystemId::DoublePendulum => {
                vec![("m1", 1.0), ("m2", 1.0), ("l1", 1.0), ("l2", 1.0), ("g", PENDULUM_GRAVITY)]
            }
            SystemId::ThreeBody => vec![("mu", EARTH_MOON_MU)],
            SystemId::Burgers => vec![("nu", BURGERS_VISCOSITY), ("length", BURGERS_LENGTH)],
            SystemId::Ks => vec![("length", KS_LENGTH)],
            _ => vec![],
        }
    }
}

/// Physical parameters of one trajectory, ordered as in `SystemSpec::param_ranges`
/// (or `SystemSpec::constants` for fixed-parameter systems).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl ParamSet {
    pub fn new(system: SystemId, values: Vec<f64>) -> Result<Self, SystemError> {
        let spec = system.spec();
        let names: Vec<String> = if spec.param_ranges.is_empty() {
            spec.constants().iter().map(|(n, _)| n.to_string()).collect()
        } else {
            spec.param_ranges.iter().map(|r| r.name.to_string()).collect()
        };
        if names.len() != values.len() {
            return Err(SystemError::ParamMismatch {
                system,
                expected: names.len(),
                got: values.len(),
            });
        }
        Ok(ParamSet { names, values })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

fn check_ode(id: SystemId, x: &[f64], p: &ParamSet) -> Result<(), SystemError> {
    if id.kind() == SystemKind::Pde {
        return Err(SystemError::NotAnOde(id));
    }
    let spec = id.spec();
    if x.len() != spec.dim {
        return Err(SystemError::DimensionMismatch {
            expected: spec.dim,
            got: x.len(),
        });
    }
    let expected = if spec.param_ranges.is_empty() {
        spec.constants().len()
    } else {
        spec.param_ranges.len()
    };
    if p.values.len() != expected {
        return Err(SystemError::ParamMismatch {
            system: id,
            expected,
            got: p.values.len(),
        });
    }
    Ok(())
}

/// Evaluates `dx/dt = f(x; p)`.
pub fn vector_field(id: SystemId, x: &[f64], p: &ParamSet) -> Result<Vec<f64>, SystemError> {
    check_ode(id, x, p)?;
    let mut out = vec![0.0; x.len()];
    rhs(id, &p.values, x, &mut out);
    Ok(out)
}

/// Unchecked right-hand side used inside the integrator loop.
///
/// Panics on PDE systems; callers validate with [`vector_field`] first.
pub(crate) fn rhs(id: SystemId, p: &[f64], x: &[f64], out: &mut [f64]) {
    match id {
        SystemId::MassSpring => {
            let (k, m) = (p[0], p[1]);
            out[0] = x[1] / m;
            out[1] = -k * x[0];
        }
        SystemId::LotkaVolterra => {
            let (a, b, g, d) = (p[0], p[1], p[2], p[3]);
            out[0] = a * x[0] - b * x[0] * x[1];
            out[1] = d * x[0] * x[1] - g * x[1];
        }
        SystemId::CoupledSprings => {
            let (k1, k2, k3) = (p[0], p[1], p[2]);
            let (q1, q2) = (x[0], x[1]);
            out[0] = x[2];
            out[1] = x[3];
            out[2] = -k1 * q1 + k2 * (q2 - q1);
            out[3] = -k2 * (q2 - q1) - k3 * q2;
        }
        SystemId::HenonHeiles => {
            let (qx, qy) = (x[0], x[1]);
            out[0] = x[2];
            out[1] = x[3];
            out[2] = -qx - 2.0 * qx * qy;
            out[3] = -qy - qx * qx + qy * qy;
        }
        SystemId::DoublePendulum => pendulum_rhs(x, out),
        SystemId::Lorenz => {
            out[0] = LORENZ_SIGMA * (x[1] - x[0]);
            out[1] = x[0] * (LORENZ_RHO - x[2]) - x[1];
            out[2] = x[0] * x[1] - LORENZ_BETA * x[2];
        }
        SystemId::ThreeBody => three_body_rhs(x, out),
        SystemId::Burgers | SystemId::Ks => panic!("{id} has no ODE right-hand side"),
    }
}

// Canonical double pendulum, state (θ1, θ2, p1, p2), with m1 = m2 = L1 = L2 = 1:
//   H  = (p1² + 2 p2² − 2 p1 p2 cos Δ) / (2 (1 + sin² Δ)) − 2 g cos θ1 − g cos θ2,  Δ = θ1 − θ2
//   θ1' = (p1 − p2 cos Δ) / (1 + sin² Δ)
//   θ2' = (2 p2 − p1 cos Δ) / (1 + sin² Δ)
//   c1  = p1 p2 sin Δ / (1 + sin² Δ)
//   c2  = (p1² + 2 p2² − 2 p1 p2 cos Δ) sin 2Δ / (2 (1 + sin² Δ)²)
//   p1' = −2 g sin θ1 − c1 + c2
//   p2' = −g sin θ2 + c1 − c2
fn pendulum_rhs(x: &[f64], out: &mut [f64]) {
    let g = PENDULUM_GRAVITY;
    let (t1, t2, p1, p2) = (x[0], x[1], x[2], x[3]);
    let delta = t1 - t2;
    let (s, c) = delta.sin_cos();
    let den = 1.0 + s * s;
    let c1 = p1 * p2 * s / den;
    let c2 = (p1 * p1 + 2.0 * p2 * p2 - 2.0 * p1 * p2 * c) * (2.0 * delta).sin() / (2.0 * den * den);
    out[0] = (p1 - p2 * c) / den;
    out[1] = (2.0 * p2 - p1 * c) / den;
    out[2] = -2.0 * g * t1.sin() - c1 + c2;
    out[3] = -g * t2.sin() + c1 - c2;
}

fn pendulum_energy(x: &[f64]) -> f64 {
    let g = PENDULUM_GRAVITY;
    let (t1, t2, p1, p2) = (x[0], x[1], x[2], x[3]);
    let delta = t1 - t2;
    let s = delta.sin();
    (p1 * p1 + 2.0 * p2 * p2 - 2.0 * p1 * p2 * delta.cos()) / (2.0 * (1.0 + s * s))
        - 2.0 * g * t1.cos()
        - g * t2.cos()
}

// Circular restricted three-body problem in the co-rotating frame, state
// (x, y, vx, vy), primaries at (−μ, 0) and (1 − μ, 0).
fn three_body_rhs(s: &[f64], out: &mut [f64]) {
    let mu = EARTH_MOON_MU;
    let (x, y, vx, vy) = (s[0], s[1], s[2], s[3]);
    let r1 = ((x + mu).powi(2) + y * y).sqrt();
    let r2 = ((x - 1.0 + mu).powi(2) + y * y).sqrt();
    let (r1c, r2c) = (r1.powi(3), r2.powi(3));
    out[0] = vx;
    out[1] = vy;
    out[2] = 2.0 * vy + x - (1.0 - mu) * (x + mu) / r1c - mu * (x - 1.0 + mu) / r2c;
    out[3] = -2.0 * vx + y - (1.0 - mu) * y / r1c - mu * y / r2c;
}

fn jacobi_constant(s: &[f64]) -> f64 {
    let mu = EARTH_MOON_MU;
    let (x, y, vx, vy) = (s[0], s[1], s[2], s[3]);
    let r1 = ((x + mu).powi(2) + y * y).sqrt();
    let r2 = ((x - 1.0 + mu).powi(2) + y * y).sqrt();
    x * x + y * y + 2.0 * (1.0 - mu) / r1 + 2.0 * mu / r2 - (vx * vx + vy * vy)
}

/// Position of the L4 Lagrange point for the Earth–Moon mass ratio.
pub fn lagrange_l4() -> (f64, f64) {
    (0.5 - EARTH_MOON_MU, 3f64.sqrt() / 2.0)
}

/// The closed-form conserved quantity of a true-law system.
pub fn true_invariant(id: SystemId, x: &[f64], p: &ParamSet) -> Result<f64, SystemError> {
    if !id.has_true_law() {
        return Err(SystemError::NoTrueLaw(id));
    }
    check_ode(id, x, p)?;
    let v = &p.values;
    Ok(match id {
        SystemId::MassSpring => x[1] * x[1] / (2.0 * v[1]) + 0.5 * v[0] * x[0] * x[0],
        SystemId::LotkaVolterra => {
            if x[0] <= 0.0 || x[1] <= 0.0 {
                return Err(SystemError::NonPositiveState(id));
            }
            let (a, b, g, d) = (v[0], v[1], v[2], v[3]);
            d * x[0] - g * x[0].ln() + b * x[1] - a * x[1].ln()
        }
        SystemId::CoupledSprings => {
            let (k1, k2, k3) = (v[0], v[1], v[2]);
            let (q1, q2, p1, p2) = (x[0], x[1], x[2], x[3]);
            0.5 * (p1 * p1 + p2 * p2 + k1 * q1 * q1 + k2 * (q2 - q1).powi(2) + k3 * q2 * q2)
        }
        SystemId::HenonHeiles => henon_heiles_energy(x),
        _ => unreachable!(),
    })
}

pub(crate) fn henon_heiles_energy(x: &[f64]) -> f64 {
    let (qx, qy, px, py) = (x[0], x[1], x[2], x[3]);
    0.5 * (px * px + py * py) + 0.5 * (qx * qx + qy * qy) + qx * qx * qy - qy.powi(3) / 3.0
}

/// Gradient of [`true_invariant`] with respect to the state.
pub fn true_invariant_gradient(
    id: SystemId,
    x: &[f64],
    p: &ParamSet,
) -> Result<Vec<f64>, SystemError> {
    true_invariant(id, x, p)?;
    let v = &p.values;
    Ok(match id {
        SystemId::MassSpring => vec![v[0] * x[0], x[1] / v[1]],
        SystemId::LotkaVolterra => {
            let (a, b, g, d) = (v[0], v[1], v[2], v[3]);
            vec![d - g / x[0], b - a / x[1]]
        }
        SystemId::CoupledSprings => {
            let (k1, k2, k3) = (v[0], v[1], v[2]);
            let (q1, q2) = (x[0], x[1]);
            vec![k1 * q1 - k2 * (q2 - q1), k2 * (q2 - q1) + k3 * q2, x[2], x[3]]
        }
        SystemId::HenonHeiles => {
            let (qx, qy) = (x[0], x[1]);
            vec![qx + 2.0 * qx * qy, qy + qx * qx - qy * qy, x[2], x[3]]
        }
        _ => unreachable!(),
    })
}

/// First integrals that exist physically but are not scored as conservation
/// laws: double-pendulum energy and the three-body Jacobi constant. Returns
/// the true invariant for true-law systems and `None` for the rest.
pub fn reference_integral(id: SystemId, x: &[f64], p: &ParamSet) -> Option<f64> {
    match id {
        SystemId::DoublePendulum => Some(pendulum_energy(x)),
        SystemId::ThreeBody => Some(jacobi_constant(x)),
        _ => true_invariant(id, x, p).ok(),
    }
}

/// Draws one parameter set; fixed-parameter systems return their constants.
pub fn sample_params<R: Rng + ?Sized>(id: SystemId, rng: &mut R) -> ParamSet {
    let spec = id.spec();
    let values = if spec.param_ranges.is_empty() {
        spec.constants().iter().map(|(_, v)| *v).collect()
    } else {
        spec.param_ranges
            .iter()
            .map(|r| rng.gen_range(r.lower..=r.upper))
            .collect()
    };
    ParamSet::new(id, values).expect("sampler matches spec")
}

/// Initial state of one trajectory: an ODE state vector or a PDE field.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    State(Vec<f64>),
    Field(Vec<f64>),
}

/// Largest total energy allowed for Hénon–Heiles initial conditions.
pub const HENON_HEILES_MAX_ENERGY: f64 = 1.0 / 12.0;

pub fn sample_initial_condition<R: Rng + ?Sized>(id: SystemId, rng: &mut R) -> InitialState {
    let mut uniform = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(lo..hi)).collect()
    };
    match id {
        SystemId::MassSpring => InitialState::State(uniform(-1.0, 1.0, 2)),
        SystemId::LotkaVolterra => InitialState::State(uniform(5.0, 15.0, 2)),
        SystemId::CoupledSprings => InitialState::State(uniform(-0.5, 0.5, 4)),
        SystemId::HenonHeiles => loop {
            let x = uniform(-0.5, 0.5, 4);
            let h = henon_heiles_energy(&x);
            if h > 0.0 && h <= HENON_HEILES_MAX_ENERGY {
                break InitialState::State(x);
            }
        },
        SystemId::DoublePendulum => {
            let mut x = uniform(-0.5, 0.5, 2);
            x.extend([0.0, 0.0]);
            InitialState::State(x)
        }
        SystemId::Lorenz => InitialState::State(uniform(-10.0, 10.0, 3)),
        SystemId::ThreeBody => {
            let (lx, ly) = lagrange_l4();
            let r = 0.05 * rng.gen::<f64>().sqrt();
            let angle = rng.gen_range(0.0..TAU);
            let speed = rng.gen_range(-0.02..0.02);
            let (s, c) = angle.sin_cos();
            InitialState::State(vec![lx + r * c, ly + r * s, -speed * s, speed * c])
        }
        SystemId::Burgers => {
            let m = rng.gen_range(2..=5usize);
            let modes: Vec<(f64, f64)> = (0..m)
                .map(|_| (rng.gen_range(-0.3..0.3), rng.gen_range(0.0..TAU)))
                .collect();
            InitialState::Field(burgers_initial_field(&modes))
        }
        SystemId::Ks => {
            let modes: Vec<(f64, f64)> = (0..5)
                .map(|_| (rng.gen_range(-0.01..0.01), rng.gen_range(0.0..TAU)))
                .collect();
            InitialState::Field(ks_initial_field(&modes))
        }
    }
}

/// `u0(x) = Σ a_m sin(m x + φ_m)` on the 64-point grid over [0, 2π); `modes[m-1] = (a_m, φ_m)`.
pub fn burgers_initial_field(modes: &[(f64, f64)]) -> Vec<f64> {
    let dx = BURGERS_LENGTH / FIELD_POINTS as f64;
    (0..FIELD_POINTS)
        .map(|j| {
            let x = j as f64 * dx;
            modes
                .iter()
                .enumerate()
                .map(|(i, &(a, phi))| a * ((i + 1) as f64 * x + phi).sin())
                .sum()
        })
        .collect()
}

/// `u0(x) = Σ a_m cos(2π m x / L + φ_m)` on the 64-point grid over [0, 32).
pub fn ks_initial_field(modes: &[(f64, f64)]) -> Vec<f64> {
    let dx = KS_LENGTH / FIELD_POINTS as f64;
    (0..FIELD_POINTS)
        .map(|j| {
            let x = j as f64 * dx;
            modes
                .iter()
                .enumerate()
                .map(|(i, &(a, phi))| a * (2.0 * PI * (i + 1) as f64 * x / KS_LENGTH + phi).cos())
                .sum()
        })
        .collect()
}
