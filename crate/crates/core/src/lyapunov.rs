//! Top Lyapunov exponent, moment Lyapunov function and the twisted-semigroup
//! eigen-estimator.
//!
//! * `λ₁ = lim (1/t) log ‖Dφ_t(x)‖`, estimated from QR log-growth over the
//!   second half of each run.
//! * `Λ(p) = -lim (1/t) log E |Dφ_t(x) v|^{-p}`, estimated from the
//!   accumulated log-growth of the normalized tangent flow.
//! * `P̂^p_t ψ(x, v) = E[|Dφ_t(x) v|^{-p} ψ(φ_t x, v_t)]`, discretized on
//!   space cells × angle bins (d = 2) and power-iterated; its leading
//!   eigenvalue is `e^{-Λ(p) t}`.

use crate::conditions::{sample_direction, sample_point};
use crate::fields::VelocityModel;
use crate::flow::{qr_renormalize, realization_seed, step_count, FlowError, FlowState, StepParams, Stepper};
use crate::noise::{derive_seed, uniform, Increments, NoiseRealization};
use crate::stats::Moments;
use crate::torus::{self, TWO_PI};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LyapunovError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("power iteration did not converge in {iterations} iterations (last change {change:.3e})")]
    NoConvergence { iterations: usize, change: f64 },
}

const POINT_TAG: u64 = 0x1A9;
const DIRECTION_TAG: u64 = 0x1AA;
const EIGEN_TAG: u64 = 0x1AB;

/// Normal 97.5% quantile used for the reported confidence intervals.
pub const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambda1Params {
    pub amplitude: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_realizations: u64,
    pub seed: u64,
    pub qr_every: u64,
}

impl Lambda1Params {
    pub fn new(amplitude: f64, t_end: f64, dt: f64, n_realizations: u64, seed: u64) -> Self {
        Lambda1Params {
            amplitude,
            t_end,
            dt,
            n_realizations,
            seed,
            qr_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lambda1_hat: f64,
    pub std_error: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_realizations: u64,
    /// `(G(T) - G(T/2)) / (T/2)` per realization.
    pub finite_time: Vec<f64>,
    /// Mean of `G(T)/T` minus the estimate: the burn-in drift, a bias proxy.
    pub burn_in_drift: f64,
}

impl LyapunovEstimate {
    pub fn ci95(&self) -> (f64, f64) {
        (
            self.lambda1_hat - Z_975 * self.std_error,
            self.lambda1_hat + Z_975 * self.std_error,
        )
    }

    pub fn excludes_zero(&self) -> bool {
        let (lo, hi) = self.ci95();
        lo > 0.0 || hi < 0.0
    }
}

/// Top Lyapunov exponent with burn-in `T/2`.
pub fn estimate_lambda1(
    model: &VelocityModel,
    params: &Lambda1Params,
) -> Result<LyapunovEstimate, LyapunovError> {
    if params.t_end < 50.0 {
        return Err(LyapunovError::Precondition(format!(
            "T = {} is shorter than 50 decorrelation times",
            params.t_end
        )));
    }
    if params.n_realizations < 8 {
        return Err(LyapunovError::Precondition(format!(
            "{} realizations, need at least 8",
            params.n_realizations
        )));
    }
    let n_steps = step_count(params.t_end, params.dt)?;
    let half = n_steps / 2;
    let d = model.dim();
    let step = StepParams::new(params.dt, params.amplitude, 0.0);
    let runs: Vec<(f64, f64)> = (0..params.n_realizations)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64), LyapunovError> {
            let x0 = sample_point(derive_seed(params.seed, POINT_TAG, 0), r, d);
            let noise =
                NoiseRealization::new(realization_seed(params.seed, r), params.dt, model.n_modes(), d);
            let mut state = FlowState::new(d, &[x0]).with_tangents();
            let mut stepper = Stepper::new(model);
            let mut inc = Increments::zeros(model.n_modes(), d);
            let mut at_half = 0.0;
            for s in 0..n_steps {
                noise.fill(s, &mut inc);
                stepper.step(&mut state, &inc, &step)?;
                let done = s + 1;
                let qr_due = params.qr_every > 0 && done % params.qr_every == 0;
                if qr_due || done == half || done == n_steps {
                    qr_renormalize(&mut state)?;
                }
                if done == half {
                    at_half = state.qr_log_growth.as_ref().unwrap()[0];
                }
            }
            let total = state.qr_log_growth.as_ref().unwrap()[0];
            let t_half = half as f64 * params.dt;
            let t_end = n_steps as f64 * params.dt;
            Ok(((total - at_half) / (t_end - t_half), total / t_end))
        })
        .collect::<Result<_, _>>()?;
    let finite_time: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let m = Moments::from_slice(&finite_time);
    let full = Moments::from_slice(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    Ok(LyapunovEstimate {
        lambda1_hat: m.mean,
        std_error: m.std_error(),
        t_end: params.t_end,
        dt: params.dt,
        n_realizations: params.n_realizations,
        burn_in_drift: full.mean - m.mean,
        finite_time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentParams {
    pub amplitude: f64,
    pub p_grid: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub n_samples: u64,
    pub seed: u64,
}

/// `Λ̂` on a p-grid together with the samples it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentLyapunovCurve {
    pub p: Vec<f64>,
    pub lambda: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Largest single-sample share of `Σ_m e^{-p L_m}`.
    pub max_weight_fraction: Vec<f64>,
    /// False where one sample carries more than half of the weight.
    pub reliable: Vec<bool>,
    /// `Λ̂` recomputed at `T/2`; the difference is a finite-T bias proxy.
    pub lambda_half: Vec<f64>,
    pub t_end: f64,
    /// `L_m(T)`, accumulated `log |Dφ_T v|` per sample.
    pub log_growth: Vec<f64>,
    /// `L_m(T/2)`.
    pub log_growth_half: Vec<f64>,
}

/// Largest weight fraction above which a p-value is flagged unreliable.
pub const MAX_WEIGHT_FRACTION: f64 = 0.5;

/// `-(1/T) log((1/M) Σ_m e^{-p L_m})` by log-sum-exp, and the largest weight fraction.
pub fn moment_lyapunov_from_samples(log_growth: &[f64], p: f64, t: f64) -> (f64, f64) {
    if p == 0.0 || log_growth.is_empty() {
        return (0.0, 1.0 / log_growth.len().max(1) as f64);
    }
    let amax = log_growth
        .iter()
        .map(|l| -p * l)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_growth.iter().map(|l| (-p * l - amax).exp()).sum();
    let log_mean = amax + sum.ln() - (log_growth.len() as f64).ln();
    (-log_mean / t, 1.0 / sum)
}

impl MomentLyapunovCurve {
    pub fn lambda_at(&self, p: f64) -> f64 {
        moment_lyapunov_from_samples(&self.log_growth, p, self.t_end).0
    }

    /// Index of `p` in the grid.
    pub fn index_of(&self, p: f64) -> Option<usize> {
        self.p.iter().position(|&q| (q - p).abs() < 1e-12)
    }

    /// Jackknife mean-corrected value and standard error of `f(Λ̂(ps))`.
    pub fn jackknife(&self, ps: &[f64], f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
        jackknife(&self.log_growth, self.t_end, ps, f)
    }
}

/// Leave-one-out jackknife of a statistic of `Λ̂` at the points `ps`.
/// Returns the full-sample statistic and its standard error.
pub fn jackknife(log_growth: &[f64], t: f64, ps: &[f64], f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let m = log_growth.len();
    let full: Vec<f64> = ps
        .iter()
        .map(|&p| moment_lyapunov_from_samples(log_growth, p, t).0)
        .collect();
    let stat = f(&full);
    if m < 2 {
        return (stat, f64::NAN);
    }
    // per p: shift and total so each leave-one-out value is O(1)
    let prep: Vec<(f64, f64)> = ps
        .iter()
        .map(|&p| {
            let amax = log_growth
                .iter()
                .map(|l| -p * l)
                .fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = log_growth.iter().map(|l| (-p * l - amax).exp()).sum();
            (amax, sum)
        })
        .collect();
    let mut acc = Moments::default();
    let mut vals = vec![0.0; ps.len()];
    for i in 0..m {
        for (j, &p) in ps.iter().enumerate() {
            vals[j] = if p == 0.0 {
                0.0
            } else {
                let (amax, sum) = prep[j];
                let rest = (sum - (-p * log_growth[i] - amax).exp()).max(f64::MIN_POSITIVE);
                -(amax + rest.ln() - ((m - 1) as f64).ln()) / t
            };
        }
        acc.push(f(&vals));
    }
    let mf = m as f64;
    let se = ((mf - 1.0) / mf * acc.variance() * (mf - 1.0)).sqrt();
    (stat, se)
}

/// Accumulated unit-tangent log-growth of one `(x, v)` sample, at `T/2` and `T`.
fn unit_tangent_growth(
    model: &VelocityModel,
    stepper: &mut Stepper<'_>,
    x0: Vec<f64>,
    v0: Vec<f64>,
    step: &StepParams,
    n_steps: u64,
    noise_seed: u64,
) -> Result<(FlowState, f64), FlowError> {
    let d = model.dim();
    let noise = NoiseRealization::new(noise_seed, step.dt, model.n_modes(), d);
    let mut state = FlowState::new(d, &[x0]).with_unit_tangents(&[v0]);
    let mut inc = Increments::zeros(model.n_modes(), d);
    let mut half = 0.0;
    for s in 0..n_steps {
        noise.fill(s, &mut inc);
        stepper.step(&mut state, &inc, step)?;
        if s + 1 == n_steps / 2 {
            half = state.log_growth.as_ref().unwrap()[0];
        }
    }
    Ok((state, half))
}

/// Moment Lyapunov function on `params.p_grid`.
pub fn estimate_moment_lyapunov(
    model: &VelocityModel,
    params: &MomentParams,
) -> Result<MomentLyapunovCurve, LyapunovError> {
    if params.p_grid.is_empty() || params.p_grid.iter().any(|p| !(-1.0..=1.0).contains(p)) {
        return Err(LyapunovError::Precondition(
            "p grid must be a nonempty subset of [-1, 1]".into(),
        ));
    }
    if params.n_samples < 1000 {
        return Err(LyapunovError::Precondition(format!(
            "{} samples, need at least 1000",
            params.n_samples
        )));
    }
    let n_steps = step_count(params.t_end, params.dt)?;
    let d = model.dim();
    let step = StepParams::new(params.dt, params.amplitude, 0.0);
    let samples: Vec<(f64, f64)> = (0..params.n_samples)
        .into_par_iter()
        .map_init(
            || Stepper::new(model),
            |stepper, m| -> Result<(f64, f64), LyapunovError> {
                let x0 = sample_point(derive_seed(params.seed, POINT_TAG, 1), m, d);
                let v0 = sample_direction(derive_seed(params.seed, DIRECTION_TAG, 1), m, d);
                let (state, half) = unit_tangent_growth(
                    model,
                    stepper,
                    x0,
                    v0,
                    &step,
                    n_steps,
                    realization_seed(params.seed, m),
                )?;
                Ok((state.log_growth.unwrap()[0], half))
            },
        )
        .collect::<Result<_, _>>()?;
    let log_growth: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let log_growth_half: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let t_end = n_steps as f64 * params.dt;
    let t_half = (n_steps / 2) as f64 * params.dt;
    let mut curve = MomentLyapunovCurve {
        p: params.p_grid.clone(),
        lambda: vec![],
        std_error: vec![],
        max_weight_fraction: vec![],
        reliable: vec![],
        lambda_half: vec![],
        t_end,
        log_growth,
        log_growth_half,
    };
    for &p in &params.p_grid {
        let (lam, frac) = moment_lyapunov_from_samples(&curve.log_growth, p, t_end);
        let (_, se) = curve.jackknife(&[p], |v| v[0]);
        curve.lambda.push(if p == 0.0 { 0.0 } else { lam });
        curve.std_error.push(if p == 0.0 { 0.0 } else { se });
        curve.max_weight_fraction.push(frac);
        curve.reliable.push(p == 0.0 || frac <= MAX_WEIGHT_FRACTION);
        curve
            .lambda_half
            .push(moment_lyapunov_from_samples(&curve.log_growth_half, p, t_half).0);
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub p_small: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub lambda1: f64,
    pub lambda1_se: f64,
    pub difference: f64,
    pub combined_se: f64,
    /// `|slope - λ̂₁| ≤ max(0.1 λ̂₁, 2 · combined SE)`.
    pub pass: bool,
}

/// Central difference `(Λ̂(p) - Λ̂(-p)) / 2p` against `λ̂₁`.
pub fn check_slope_at_zero(
    curve: &MomentLyapunovCurve,
    lambda1: &LyapunovEstimate,
    p_small: f64,
) -> Result<SlopeReport, LyapunovError> {
    if curve.index_of(p_small).is_none() || curve.index_of(-p_small).is_none() {
        return Err(LyapunovError::Precondition(format!(
            "curve lacks ±{p_small}"
        )));
    }
    let (slope, slope_se) =
        curve.jackknife(&[p_small, -p_small], |v| (v[0] - v[1]) / (2.0 * p_small));
    let difference = slope - lambda1.lambda1_hat;
    let combined_se = (slope_se * slope_se + lambda1.std_error * lambda1.std_error).sqrt();
    let pass = difference.abs() <= (0.1 * lambda1.lambda1_hat.abs()).max(2.0 * combined_se);
    Ok(SlopeReport {
        p_small,
        slope,
        slope_se,
        lambda1: lambda1.lambda1_hat,
        lambda1_se: lambda1.std_error,
        difference,
        combined_se,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityRecord {
    pub p: [f64; 3],
    /// Second divided difference of `Λ̂` over the triple.
    pub second_difference: f64,
    pub std_error: f64,
    pub ok: bool,
}

/// Second divided differences over consecutive grid triples; each must be
/// at most `2 SE` above zero.
pub fn check_concavity(curve: &MomentLyapunovCurve) -> Vec<ConcavityRecord> {
    let mut idx: Vec<usize> = (0..curve.p.len()).collect();
    idx.sort_by(|&a, &b| curve.p[a].total_cmp(&curve.p[b]));
    idx.windows(3)
        .map(|w| {
            let ps = [curve.p[w[0]], curve.p[w[1]], curve.p[w[2]]];
            let dd = |v: &[f64]| {
                let s1 = (v[1] - v[0]) / (ps[1] - ps[0]);
                let s2 = (v[2] - v[1]) / (ps[2] - ps[1]);
                2.0 * (s2 - s1) / (ps[2] - ps[0])
            };
            let (val, se) = curve.jackknife(&ps, dd);
            ConcavityRecord {
                p: ps,
                second_difference: val,
                std_error: se,
                ok: val <= 2.0 * se,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JensenRecord {
    pub p: f64,
    pub lambda: f64,
    pub bound: f64,
    pub ok: bool,
}

/// `Λ̂(p) ≤ p λ̂₁ + 2 SE` for every positive grid point.
pub fn check_jensen(curve: &MomentLyapunovCurve, lambda1: &LyapunovEstimate) -> Vec<JensenRecord> {
    curve
        .p
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| {
            let bound = p * lambda1.lambda1_hat + 2.0 * curve.std_error[i];
            JensenRecord {
                p,
                lambda: curve.lambda[i],
                bound,
                ok: curve.lambda[i] <= bound,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenParams {
    pub amplitude: f64,
    pub p: f64,
    /// Space cells per dimension (1 for translation-invariant fields).
    pub x_cells: usize,
    /// Bins of the projective angle `θ ∈ [0, π)`.
    pub angle_bins: usize,
    pub t_step: f64,
    pub dt: f64,
    pub samples_per_cell: u64,
    /// Independent sub-matrices used for the batch standard error.
    pub batches: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl EigenParams {
    pub fn new(amplitude: f64, p: f64, seed: u64) -> Self {
        EigenParams {
            amplitude,
            p,
            x_cells: 1,
            angle_bins: 32,
            t_step: 1.0,
            dt: 1e-2,
            samples_per_cell: 512,
            batches: 8,
            max_iterations: 10_000,
            tolerance: 1e-13,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistedEigen {
    pub lambda: f64,
    pub std_error: f64,
    pub eigenvalue: f64,
    /// Cell values normalized to mean 1; cell index `(i·n + j)·bins + a`.
    pub eigenfunction: Vec<f64>,
    pub batch_lambdas: Vec<f64>,
    pub iterations: usize,
    pub x_cells: usize,
    pub angle_bins: usize,
}

/// Leading eigenpair of a row-stochastic-like nonnegative matrix by power iteration.
/// Returns `(eigenvalue, eigenvector with mean 1, iterations)`.
pub fn power_iteration(
    matrix: &[f64],
    n: usize,
    max_iterations: usize,
    tolerance: f64,
) -> Result<(f64, Vec<f64>, usize), LyapunovError> {
    let mut psi = vec![1.0; n];
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for it in 1..=max_iterations {
        for (i, out) in next.iter_mut().enumerate() {
            *out = matrix[i * n..(i + 1) * n]
                .iter()
                .zip(&psi)
                .map(|(a, b)| a * b)
                .sum();
        }
        let mu = next.iter().sum::<f64>() / psi.iter().sum::<f64>();
        let mean = next.iter().sum::<f64>() / n as f64;
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(LyapunovError::NoConvergence {
                iterations: it,
                change: f64::NAN,
            });
        }
        change = 0.0;
        for (p, q) in psi.iter_mut().zip(&next) {
            let v = q / mean;
            change = f64::max(change, (v - *p).abs());
            *p = v;
        }
        if change < tolerance {
            return Ok((mu, psi, it));
        }
    }
    Err(LyapunovError::NoConvergence {
        iterations: max_iterations,
        change,
    })
}

fn angle_bin(v: &[f64], bins: usize) -> usize {
    let mut th = v[1].atan2(v[0]);
    if th < 0.0 {
        th += PI;
    }
    if th >= PI {
        th -= PI;
    }
    ((th / PI * bins as f64) as usize).min(bins - 1)
}

fn x_cell(x: &[f64], n: usize) -> usize {
    let i = ((torus::wrap(x[0]) / TWO_PI * n as f64) as usize).min(n - 1);
    let j = ((torus::wrap(x[1]) / TWO_PI * n as f64) as usize).min(n - 1);
    i * n + j
}

/// Ulam discretization of the twisted semigroup on `T² × RP¹` and its leading eigenpair.
pub fn estimate_twisted_eigen(
    model: &VelocityModel,
    params: &EigenParams,
) -> Result<TwistedEigen, LyapunovError> {
    if model.dim() != 2 {
        return Err(LyapunovError::Precondition(format!(
            "eigen-estimator needs d = 2, got d = {}",
            model.dim()
        )));
    }
    if params.x_cells == 0 || params.angle_bins == 0 || params.batches == 0 {
        return Err(LyapunovError::Precondition("empty discretization".into()));
    }
    if params.samples_per_cell < params.batches as u64 {
        return Err(LyapunovError::Precondition(
            "fewer samples per cell than batches".into(),
        ));
    }
    let n_steps = step_count(params.t_step, params.dt)?;
    let (nx, na, nb) = (params.x_cells, params.angle_bins, params.batches);
    let n = nx * nx * na;
    let step = StepParams::new(params.dt, params.amplitude, 0.0);
    let cell_seed = derive_seed(params.seed, EIGEN_TAG, 0);
    // rows[c] holds nb sub-rows of length n
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map_init(
            || Stepper::new(model),
            |stepper, c| -> Result<Vec<f64>, LyapunovError> {
                let (xc, a) = (c / na, c % na);
                let (i, j) = (xc / nx, xc % nx);
                let mut row = vec![0.0; nb * n];
                let mut counts = vec![0u64; nb];
                for s in 0..params.samples_per_cell {
                    let u = |k: u64| uniform(cell_seed, c as u64, s, k);
                    let x0 = vec![
                        (i as f64 + u(0)) * TWO_PI / nx as f64,
                        (j as f64 + u(1)) * TWO_PI / nx as f64,
                    ];
                    let th = (a as f64 + u(2)) * PI / na as f64;
                    let v0 = vec![th.cos(), th.sin()];
                    let noise_seed = realization_seed(derive_seed(params.seed, EIGEN_TAG, 1 + c as u64), s);
                    let (state, _) =
                        unit_tangent_growth(model, stepper, x0, v0, &step, n_steps, noise_seed)?;
                    let l = state.log_growth.as_ref().unwrap()[0];
                    let to = x_cell(state.position(0), nx) * na
                        + angle_bin(state.unit_tangent(0).unwrap(), na);
                    let b = (s % nb as u64) as usize;
                    row[b * n + to] += (-params.p * l).exp();
                    counts[b] += 1;
                }
                for b in 0..nb {
                    for v in &mut row[b * n..(b + 1) * n] {
                        *v /= counts[b] as f64;
                    }
                }
                Ok(row)
            },
        )
        .collect::<Result<_, _>>()?;
    let assemble = |batch: Option<usize>| -> Vec<f64> {
        let mut m = vec![0.0; n * n];
        for (c, row) in rows.iter().enumerate() {
            for b in 0..nb {
                if batch.is_some_and(|k| k != b) {
                    continue;
                }
                for (t, v) in row[b * n..(b + 1) * n].iter().enumerate() {
                    m[c * n + t] += v;
                }
            }
            if batch.is_none() {
                for v in &mut m[c * n..(c + 1) * n] {
                    *v /= nb as f64;
                }
            }
        }
        m
    };
    let full = assemble(None);
    let (mu, psi, iterations) =
        power_iteration(&full, n, params.max_iterations, params.tolerance)?;
    let mut batch_lambdas = Vec::with_capacity(nb);
    for b in 0..nb {
        let (mb, _, _) = power_iteration(&assemble(Some(b)), n, params.max_iterations, params.tolerance)?;
        batch_lambdas.push(-mb.ln() / params.t_step);
    }
    let std_error = if nb > 1 {
        Moments::from_slice(&batch_lambdas).std_error()
    } else {
        f64::NAN
    };
    Ok(TwistedEigen {
        lambda: -mu.ln() / params.t_step,
        std_error,
        eigenvalue: mu,
        eigenfunction: psi,
        batch_lambdas,
        iterations,
        x_cells: nx,
        angle_bins: na,
    })
}
