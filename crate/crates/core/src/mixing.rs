//! Two-point motion statistics and Lagrangian mixing diagnostics.
//!
//! Pairs are advanced under shared noise, so `d(x_t, y_t)` only moves through
//! the spatial variation of the fields. Weak-norm mixing of the scalar is
//! read off Fourier pairings of the initial datum against the forward flow,
//! `c_z(t) = ∫ u(x) e^{-i z·φ_t(x)} dμ(x)`, which equals `û_t(z)` by volume
//! preservation; no backward flow is integrated.

use crate::conditions::{sample_direction, sample_point};
use crate::fields::{Phase, VelocityModel};
use crate::flow::{grid_steps, realization_seed, FlowError, FlowState, StepParams, Stepper};
use crate::noise::{derive_seed, Increments, NoiseRealization};
use crate::stats::{DecaySeries, Moments};
use crate::torus::{self, TWO_PI};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MixingError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("observable has mean {0:e} under μ⊗μ, expected 0")]
    NotMeanZero(f64),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// How the two particles of a pair receive noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Both driven by the same `W` and `W̃`; the two-point motion.
    #[default]
    Shared,
    /// Each particle gets its own noise. Only useful to show what the
    /// coupling buys.
    Independent,
}

const PAIR_TAG: u64 = 0x2B0;
const SECOND_PARTICLE_TAG: u64 = 0x2B1;

/// `t ↦ (d(x_t, y_t))` sampled on `steps`, one realization.
fn pair_distances(
    model: &VelocityModel,
    stepper: &mut Stepper<'_>,
    x: &[f64],
    y: &[f64],
    params: &StepParams,
    steps: &[u64],
    seed: u64,
    coupling: Coupling,
) -> Result<Vec<f64>, FlowError> {
    let d = model.dim();
    let k = model.n_modes();
    let noise = NoiseRealization::new(seed, params.dt, k, d);
    let mut out = Vec::with_capacity(steps.len());
    let mut inc = Increments::zeros(k, d);
    let last = *steps.last().unwrap();
    let mut next = 0;
    match coupling {
        Coupling::Shared => {
            let mut state = FlowState::new(d, &[x.to_vec(), y.to_vec()]);
            for s in 0..=last {
                while next < steps.len() && steps[next] == s {
                    out.push(torus::distance(state.position(0), state.position(1)));
                    next += 1;
                }
                if s == last {
                    break;
                }
                noise.fill(s, &mut inc);
                stepper.step(&mut state, &inc, params)?;
            }
        }
        Coupling::Independent => {
            let other = NoiseRealization::new(derive_seed(seed, SECOND_PARTICLE_TAG, 0), params.dt, k, d);
            let mut a = FlowState::new(d, &[x.to_vec()]);
            let mut b = FlowState::new(d, &[y.to_vec()]);
            for s in 0..=last {
                while next < steps.len() && steps[next] == s {
                    out.push(torus::distance(a.position(0), b.position(0)));
                    next += 1;
                }
                if s == last {
                    break;
                }
                noise.fill(s, &mut inc);
                stepper.step(&mut a, &inc, params)?;
                other.fill(s, &mut inc);
                stepper.step(&mut b, &inc, params)?;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPointParams {
    pub amplitude: f64,
    pub kappa: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p_list: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub dt: f64,
    pub n_realizations: u64,
    pub seed: u64,
    pub coupling: Coupling,
}

/// `E[d(x_t, y_t)^{-p}]` for each `p` in `p_list`, with Monte Carlo errors.
/// The returned series are not fitted.
pub fn two_point_moments(
    model: &VelocityModel,
    params: &TwoPointParams,
) -> Result<Vec<DecaySeries>, MixingError> {
    if params.x.len() != model.dim() || params.y.len() != model.dim() {
        return Err(MixingError::Precondition("pair dimension mismatch".into()));
    }
    if torus::distance(&params.x, &params.y) == 0.0 {
        return Err(MixingError::Precondition("x = y".into()));
    }
    if params.p_list.is_empty() || params.p_list.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(MixingError::Precondition("p_list must lie in (0, 1]".into()));
    }
    let steps = grid_steps(&params.t_grid, params.dt)?;
    let step = StepParams::new(params.dt, params.amplitude, params.kappa);
    let paths: Vec<Vec<f64>> = (0..params.n_realizations)
        .into_par_iter()
        .map_init(
            || Stepper::new(model),
            |st, r| {
                pair_distances(
                    model,
                    st,
                    &params.x,
                    &params.y,
                    &step,
                    &steps,
                    realization_seed(params.seed, r),
                    params.coupling,
                )
            },
        )
        .collect::<Result<_, _>>()?;
    Ok(params
        .p_list
        .iter()
        .map(|&p| {
            let mut values = Vec::with_capacity(steps.len());
            let mut ses = Vec::with_capacity(steps.len());
            for i in 0..steps.len() {
                let m = Moments::from_slice(&paths.iter().map(|d| d[i].powf(-p)).collect::<Vec<_>>());
                values.push(m.mean);
                ses.push(m.std_error());
            }
            DecaySeries::new(params.t_grid.clone(), values, ses)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VpParams {
    pub amplitude: f64,
    pub kappa: f64,
    pub p: f64,
    pub separations: Vec<f64>,
    pub t_star: f64,
    pub dt: f64,
    pub n_realizations: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VpRecord {
    pub separation: f64,
    /// `Ê[d_{t*}^{-p}] / δ^{-p}`.
    pub rho: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VpReport {
    pub p: f64,
    pub t_star: f64,
    pub records: Vec<VpRecord>,
    pub max_rho: f64,
    /// `Ê[d_{t*}^{-p}]` at the largest separation: the additive constant.
    pub plateau: f64,
    /// `e^{-Λ̂(p) A² t*}` when a unit-amplitude `Λ̂(p)` was supplied.
    pub target: Option<f64>,
    /// `ρ` at the smallest separation divided by the target.
    pub small_ratio: Option<f64>,
}

/// Contraction of `V_p = d^{-p}` over `[0, t*]` from random pairs at each
/// separation (uniform base point, uniform direction).
pub fn vp_drift_check(
    model: &VelocityModel,
    params: &VpParams,
    lambda_p_unit: Option<f64>,
) -> Result<VpReport, MixingError> {
    if !(params.p > 0.0 && params.p <= 1.0) {
        return Err(MixingError::Precondition("p must lie in (0, 1]".into()));
    }
    if params.separations.is_empty() || params.separations.iter().any(|s| !(*s > 0.0)) {
        return Err(MixingError::Precondition("separations must be positive".into()));
    }
    let steps = grid_steps(&[params.t_star], params.dt)?;
    let step = StepParams::new(params.dt, params.amplitude, params.kappa);
    let d = model.dim();
    let mut records = Vec::new();
    for &delta in &params.separations {
        let finals: Vec<f64> = (0..params.n_realizations)
            .into_par_iter()
            .map_init(
                || Stepper::new(model),
                |st, r| {
                    let x = sample_point(derive_seed(params.seed, PAIR_TAG, 0), r, d);
                    let e = sample_direction(derive_seed(params.seed, PAIR_TAG, 1), r, d);
                    let y: Vec<f64> = x.iter().zip(&e).map(|(a, b)| torus::wrap(a + delta * b)).collect();
                    // the realization seed does not depend on δ: paired comparison across δ and κ
                    let dist = pair_distances(
                        model,
                        st,
                        &x,
                        &y,
                        &step,
                        &steps,
                        realization_seed(params.seed, r),
                        Coupling::Shared,
                    )?;
                    Ok::<f64, FlowError>(dist[0])
                },
            )
            .collect::<Result<_, _>>()?;
        let m = Moments::from_slice(&finals.iter().map(|d| (d / delta).powf(-params.p)).collect::<Vec<_>>());
        records.push(VpRecord {
            separation: delta,
            rho: m.mean,
            std_error: m.std_error(),
        });
    }
    let max_rho = records.iter().map(|r| r.rho).fold(f64::NEG_INFINITY, f64::max);
    let largest = records
        .iter()
        .max_by(|a, b| a.separation.total_cmp(&b.separation))
        .unwrap();
    let smallest = records
        .iter()
        .min_by(|a, b| a.separation.total_cmp(&b.separation))
        .unwrap();
    let target = lambda_p_unit.map(|l| (-l * params.amplitude.powi(2) * params.t_star).exp());
    Ok(VpReport {
        p: params.p,
        t_star: params.t_star,
        plateau: largest.rho * largest.separation.powf(-params.p),
        max_rho,
        small_ratio: target.map(|t| smallest.rho / t),
        target,
        records,
    })
}

/// `cos(n·x)` or `sin(n·x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigFactor {
    pub phase: Phase,
    pub wavevector: Vec<i64>,
}

impl TrigFactor {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let arg: f64 = self.wavevector.iter().zip(x).map(|(&n, &xi)| n as f64 * xi).sum();
        match self.phase {
            Phase::Cos => arg.cos(),
            Phase::Sin => arg.sin(),
        }
    }

    /// Midpoint-rule mean over `T^d` with `q` points per dimension.
    pub fn quadrature_mean(&self, q: usize) -> f64 {
        let d = self.wavevector.len();
        let h = TWO_PI / q as f64;
        let total = q.pow(d as u32);
        let mut x = vec![0.0; d];
        let mut acc = 0.0;
        for idx in 0..total {
            let mut rem = idx;
            for xi in x.iter_mut() {
                *xi = (rem % q) as f64 * h + 0.5 * h;
                rem /= q;
            }
            acc += self.eval(&x);
        }
        acc / total as f64
    }
}

/// Product observable `ψ(x, y) = f(x) g(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub left: TrigFactor,
    pub right: TrigFactor,
}

impl Observable {
    /// `cos(x¹) cos(y¹)` in dimension `d`.
    pub fn cos_cos(d: usize) -> Self {
        let mut n = vec![0; d];
        n[0] = 1;
        let f = TrigFactor {
            phase: Phase::Cos,
            wavevector: n,
        };
        Observable {
            left: f.clone(),
            right: f,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.left.eval(x) * self.right.eval(y)
    }

    /// Mean under `μ⊗μ` by the midpoint rule (exact for `q` above the frequencies).
    pub fn quadrature_mean(&self, q: usize) -> f64 {
        self.left.quadrature_mean(q) * self.right.quadrature_mean(q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationParams {
    pub amplitude: f64,
    pub kappa: f64,
    pub observable: Observable,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub dt: f64,
    pub n_realizations: u64,
    pub seed: u64,
}

/// Tolerance of the mean-zero precondition.
pub const MEAN_ZERO_TOLERANCE: f64 = 1e-10;

/// `|Ê ψ(x_t, y_t)|` with Monte Carlo errors, fitted on the window where the
/// signal exceeds `noise_factor` standard errors (from `t_min` on).
pub fn correlation_decay(
    model: &VelocityModel,
    params: &CorrelationParams,
    t_min: f64,
    noise_factor: f64,
) -> Result<DecaySeries, MixingError> {
    let d = model.dim();
    if params.x.len() != d || params.y.len() != d {
        return Err(MixingError::Precondition("pair dimension mismatch".into()));
    }
    let q = 4 * params
        .observable
        .left
        .wavevector
        .iter()
        .chain(&params.observable.right.wavevector)
        .map(|n| n.unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
        + 8;
    let mean = params.observable.quadrature_mean(q);
    if mean.abs() > MEAN_ZERO_TOLERANCE {
        return Err(MixingError::NotMeanZero(mean));
    }
    let steps = grid_steps(&params.t_grid, params.dt)?;
    let step = StepParams::new(params.dt, params.amplitude, params.kappa);
    let k = model.n_modes();
    let paths: Vec<Vec<f64>> = (0..params.n_realizations)
        .into_par_iter()
        .map_init(
            || Stepper::new(model),
            |st, r| -> Result<Vec<f64>, FlowError> {
                let noise = NoiseRealization::new(realization_seed(params.seed, r), params.dt, k, d);
                let mut state = FlowState::new(d, &[params.x.clone(), params.y.clone()]);
                let mut inc = Increments::zeros(k, d);
                let mut out = Vec::with_capacity(steps.len());
                let mut next = 0;
                let last = *steps.last().unwrap();
                for s in 0..=last {
                    while next < steps.len() && steps[next] == s {
                        out.push(params.observable.eval(state.position(0), state.position(1)));
                        next += 1;
                    }
                    if s == last {
                        break;
                    }
                    noise.fill(s, &mut inc);
                    st.step(&mut state, &inc, &step)?;
                }
                Ok(out)
            },
        )
        .collect::<Result<_, _>>()?;
    let mut values = Vec::with_capacity(steps.len());
    let mut ses = Vec::with_capacity(steps.len());
    for i in 0..steps.len() {
        let m = Moments::from_slice(&paths.iter().map(|p| p[i]).collect::<Vec<_>>());
        values.push(m.mean.abs());
        ses.push(m.std_error());
    }
    Ok(DecaySeries::new(params.t_grid.clone(), values, ses).fit_auto(t_min, noise_factor))
}

/// Initial scalar for the pairings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScalarInit {
    /// `Σ c_j trig_j(n_j · x)`.
    Modes { terms: Vec<(f64, TrigFactor)> },
    /// Values at the midpoint quadrature nodes, first coordinate fastest.
    Grid { values: Vec<f64> },
}

impl ScalarInit {
    /// `cos(x¹) + sin(2x²)`.
    pub fn standard_2d() -> Self {
        ScalarInit::Modes {
            terms: vec![
                (
                    1.0,
                    TrigFactor {
                        phase: Phase::Cos,
                        wavevector: vec![1, 0],
                    },
                ),
                (
                    1.0,
                    TrigFactor {
                        phase: Phase::Sin,
                        wavevector: vec![0, 2],
                    },
                ),
            ],
        }
    }

    pub fn constant(d: usize) -> Self {
        ScalarInit::Modes {
            terms: vec![(
                1.0,
                TrigFactor {
                    phase: Phase::Cos,
                    wavevector: vec![0; d],
                },
            )],
        }
    }

    fn nodes(&self, d: usize, q: usize) -> Result<Vec<f64>, MixingError> {
        let total = q.pow(d as u32);
        match self {
            ScalarInit::Grid { values } => {
                if values.len() != total {
                    return Err(MixingError::Precondition(format!(
                        "grid initial datum has {} values, expected {total}",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
            ScalarInit::Modes { terms } => {
                if terms.iter().any(|(_, f)| f.wavevector.len() != d) {
                    return Err(MixingError::Precondition("term dimension mismatch".into()));
                }
                let h = TWO_PI / q as f64;
                let mut x = vec![0.0; d];
                Ok((0..total)
                    .map(|idx| {
                        let mut rem = idx;
                        for xi in x.iter_mut() {
                            *xi = (rem % q) as f64 * h + 0.5 * h;
                            rem /= q;
                        }
                        terms.iter().map(|(c, f)| c * f.eval(&x)).sum()
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingParams {
    pub amplitude: f64,
    pub kappa: f64,
    pub initial: ScalarInit,
    pub z_cut: usize,
    pub t_grid: Vec<f64>,
    pub dt: f64,
    /// Quadrature nodes per dimension.
    pub quadrature: usize,
    /// Independent `W̃` streams averaged per `W` path (ignored when κ = 0).
    pub inner_samples: u64,
    /// Independent `W` paths.
    pub realizations: u64,
    pub seed: u64,
    /// Enforce a vanishing mean of the initial datum.
    pub require_mean_zero: bool,
}

/// Pairings `c_z(t)` of one `W` path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingSeries {
    pub times: Vec<f64>,
    /// All `z ≠ 0` with `|z|_∞ ≤ z_cut`, lexicographic.
    pub wavevectors: Vec<Vec<i64>>,
    /// `coefficients[t][j]` pairs with `wavevectors[j]`.
    pub coefficients: Vec<Vec<Complex64>>,
    pub quadrature: usize,
    pub inner_samples: u64,
    /// Mean of `u²` over the quadrature nodes.
    pub mean_square: f64,
}

impl PairingSeries {
    /// Size of `|c_z|²` for a fully mixed field: the nodes then act as
    /// `N = Q^d` random samples, so each pairing carries a quadrature error
    /// of variance about `mean(u²)/N`. Summed with the `H^{-s}` weights this
    /// is the floor below which the proxy stops decaying.
    pub fn hminus_floor(&self, s: f64) -> f64 {
        let n = (self.quadrature as f64).powi(self.wavevectors[0].len() as i32);
        let w: f64 = self
            .wavevectors
            .iter()
            .map(|z| (1.0 + z.iter().map(|&c| (c * c) as f64).sum::<f64>()).powf(-s))
            .sum();
        w * self.mean_square / n
    }

    pub fn index_of(&self, z: &[i64]) -> Option<usize> {
        self.wavevectors.iter().position(|w| w == z)
    }

    /// `Σ_z (1 + |z|²)^{-s} |c_z(t)|²` per time, the squared `H^{-s}` proxy.
    pub fn hminus_proxy(&self, s: f64) -> Vec<f64> {
        let weights: Vec<f64> = self
            .wavevectors
            .iter()
            .map(|z| (1.0 + z.iter().map(|&c| (c * c) as f64).sum::<f64>()).powf(-s))
            .collect();
        self.coefficients
            .iter()
            .map(|cs| cs.iter().zip(&weights).map(|(c, w)| w * c.norm_sqr()).sum())
            .collect()
    }

    /// Largest `|c_z(t) - conj(c_{-z}(t))|` over all retained pairs and times.
    pub fn conjugate_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, z) in self.wavevectors.iter().enumerate() {
            let neg: Vec<i64> = z.iter().map(|c| -c).collect();
            if let Some(k) = self.index_of(&neg) {
                for cs in &self.coefficients {
                    worst = worst.max((cs[j] - cs[k].conj()).norm());
                }
            }
        }
        worst
    }
}

fn lattice(d: usize, z_cut: usize) -> Vec<Vec<i64>> {
    let side = 2 * z_cut + 1;
    let mut out = Vec::new();
    for idx in 0..side.pow(d as u32) {
        let mut rem = idx;
        let mut z = vec![0i64; d];
        for j in (0..d).rev() {
            z[j] = (rem % side) as i64 - z_cut as i64;
            rem /= side;
        }
        if z.iter().any(|&c| c != 0) {
            out.push(z);
        }
    }
    out
}

/// `Σ_q w_q e^{-i z·y_q}` for all `z` of the lattice, accumulated into `acc`.
fn accumulate_pairings(
    positions: &[f64],
    weights: &[f64],
    d: usize,
    z_cut: usize,
    lattice: &[Vec<i64>],
    acc: &mut [Complex64],
) {
    let side = 2 * z_cut + 1;
    let mut powers = vec![Complex64::new(0.0, 0.0); d * side];
    for (q, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let y = &positions[q * d..(q + 1) * d];
        for j in 0..d {
            let e = Complex64::from_polar(1.0, -y[j]);
            let table = &mut powers[j * side..(j + 1) * side];
            table[z_cut] = Complex64::new(1.0, 0.0);
            for n in 1..=z_cut {
                table[z_cut + n] = table[z_cut + n - 1] * e;
                table[z_cut - n] = table[z_cut + n].conj();
            }
        }
        for (c, z) in acc.iter_mut().zip(lattice) {
            let mut v = Complex64::new(w, 0.0);
            for j in 0..d {
                v *= powers[j * side + (z[j] + z_cut as i64) as usize];
            }
            *c += v;
        }
    }
}

/// Pairings of one `(W, W̃)` path; `c[t][z]` before quadrature normalization.
fn pairing_path(
    model: &VelocityModel,
    params: &PairingParams,
    u: &[f64],
    lattice: &[Vec<i64>],
    steps: &[u64],
    noise: &NoiseRealization,
) -> Result<Vec<Vec<Complex64>>, FlowError> {
    let d = model.dim();
    let q = params.quadrature;
    let h = TWO_PI / q as f64;
    let total = q.pow(d as u32);
    let mut start = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = vec![0.0; d];
        for xi in x.iter_mut() {
            *xi = (rem % q) as f64 * h + 0.5 * h;
            rem /= q;
        }
        start.push(x);
    }
    let mut state = FlowState::new(d, &start);
    let mut stepper = Stepper::new(model);
    let step = StepParams::new(params.dt, params.amplitude, params.kappa);
    let mut inc = Increments::zeros(model.n_modes(), d);
    let mut out = Vec::with_capacity(steps.len());
    let last = *steps.last().unwrap();
    let mut next = 0;
    for s in 0..=last {
        while next < steps.len() && steps[next] == s {
            let mut acc = vec![Complex64::new(0.0, 0.0); lattice.len()];
            accumulate_pairings(&state.positions, u, d, params.z_cut, lattice, &mut acc);
            out.push(acc);
            next += 1;
        }
        if s == last {
            break;
        }
        noise.fill(s, &mut inc);
        stepper.step(&mut state, &inc, &step)?;
    }
    Ok(out)
}

/// Fourier pairings for each of `params.realizations` independent `W` paths.
pub fn mixing_pairing(
    model: &VelocityModel,
    params: &PairingParams,
) -> Result<Vec<PairingSeries>, MixingError> {
    let d = model.dim();
    if params.z_cut == 0 {
        return Err(MixingError::Precondition("z_cut must be ≥ 1".into()));
    }
    if params.quadrature < 4 * params.z_cut {
        return Err(MixingError::Precondition(format!(
            "quadrature {} below 4·z_cut = {}",
            params.quadrature,
            4 * params.z_cut
        )));
    }
    if params.realizations == 0 {
        return Err(MixingError::Precondition("need at least one realization".into()));
    }
    let u = params.initial.nodes(d, params.quadrature)?;
    let scale = 1.0 / u.len() as f64;
    if params.require_mean_zero {
        let mean = u.iter().sum::<f64>() * scale;
        let size = u.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        if mean.abs() > 1e-12 * size {
            return Err(MixingError::Precondition(format!(
                "initial datum has mean {mean:e}"
            )));
        }
    }
    let steps = grid_steps(&params.t_grid, params.dt)?;
    let lattice = lattice(d, params.z_cut);
    let inner = if params.kappa > 0.0 {
        params.inner_samples.max(1)
    } else {
        1
    };
    let jobs: Vec<(u64, u64)> = (0..params.realizations)
        .flat_map(|r| (0..inner).map(move |i| (r, i)))
        .collect();
    let paths: Vec<Vec<Vec<Complex64>>> = jobs
        .par_iter()
        .map(|&(r, i)| {
            let noise = NoiseRealization::new(realization_seed(params.seed, r), params.dt, model.n_modes(), d)
                .with_viscous_stream(i);
            pairing_path(model, params, &u, &lattice, &steps, &noise)
        })
        .collect::<Result<_, _>>()?;
    let norm = scale / inner as f64;
    let mean_square = u.iter().map(|v| v * v).sum::<f64>() * scale;
    Ok(paths
        .chunks(inner as usize)
        .map(|group| {
            let coefficients = (0..steps.len())
                .map(|t| {
                    (0..lattice.len())
                        .map(|j| group.iter().map(|p| p[t][j]).sum::<Complex64>() * norm)
                        .collect()
                })
                .collect();
            PairingSeries {
                times: params.t_grid.clone(),
                wavevectors: lattice.clone(),
                coefficients,
                quadrature: params.quadrature,
                inner_samples: inner,
                mean_square,
            }
        })
        .collect())
}

/// Mean over realizations of the squared `H^{-s}` proxy. The per-point error
/// combines the Monte Carlo standard error across realizations with the
/// quadrature floor of [`PairingSeries::hminus_floor`].
pub fn hminus_decay(series: &[PairingSeries], s: f64) -> DecaySeries {
    let floor = series.iter().map(|p| p.hminus_floor(s)).sum::<f64>() / series.len() as f64;
    let proxies: Vec<Vec<f64>> = series.iter().map(|p| p.hminus_proxy(s)).collect();
    let n_t = series[0].times.len();
    let mut values = Vec::with_capacity(n_t);
    let mut ses = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let m = Moments::from_slice(&proxies.iter().map(|p| p[t]).collect::<Vec<_>>());
        values.push(m.mean);
        ses.push(m.std_error().hypot(floor));
    }
    DecaySeries::new(series[0].times.clone(), values, ses)
}
