//! Pseudo-spectral solver on `T²` for
//! `du + A Σ_k ⟨σ_k, ∇u⟩ ∘ dW^k = (κΔu + Cu) dt`.
//!
//! Fourier convention: `u(x) = Σ_z û(z) e^{iz·x}` with `‖u‖²_{L²} = Σ |û(z)|²`
//! on the normalized measure, so `û = FFT(u)/N²`. The state is kept in Fourier
//! space. `κΔ + C` is applied exactly through the integrating factor
//! `e^{(-κ|z|² + C) dt}`. The transport term is formed in physical space and
//! truncated to `|z|_∞ ≤ N/3` after every product.

use crate::fields::{Phase, VelocityModel};
use crate::flow::step_count;
use crate::noise::{Increments, NoiseRealization};
use crate::stats::{median, DecaySeries};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("grid size {0} is not a power of two ≥ 8")]
    BadGrid(usize),
    #[error("the Eulerian solver needs d = 2, got d = {0}")]
    Dimension(usize),
    #[error("mode wavevector {0:?} is not resolved on an N = {1} grid")]
    Unresolved(Vec<i64>, usize),
    #[error("field has mean {0:e}; negative Sobolev index needs a mean-zero field")]
    NotMeanZero(f64),
    #[error("CFL guard: A·max|σ|·dt = {value:.3e} exceeds half the grid spacing {limit:.3e}")]
    Cfl { value: f64, limit: f64 },
    #[error("numerical blow-up at t = {0}")]
    BlowUp(f64),
    #[error("exponential series did not converge in {0} terms")]
    SeriesDivergence(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl From<crate::flow::FlowError> for SpectralError {
    fn from(e: crate::flow::FlowError) -> Self {
        SpectralError::InvalidParameter(e.to_string())
    }
}

#[inline]
fn freq(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Real scalar on an `N × N` grid, stored by its Fourier coefficients in FFT
/// order: `coeffs[k1·N + k2] = û(freq(k1), freq(k2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub n: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(n: usize) -> Result<Self, SpectralError> {
        check_grid(n)?;
        Ok(SpectralField {
            n,
            coeffs: vec![Complex64::new(0.0, 0.0); n * n],
        })
    }

    /// Grid values `values[i1·N + i2] = u(2π i1/N, 2π i2/N)`.
    pub fn from_values(n: usize, values: &[f64]) -> Result<Self, SpectralError> {
        check_grid(n)?;
        if values.len() != n * n {
            return Err(SpectralError::InvalidParameter(format!(
                "{} values for an {n}×{n} grid",
                values.len()
            )));
        }
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Fft2::new(n).forward(&mut data);
        Ok(SpectralField { n, coeffs: data })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self, SpectralError> {
        let h = TAU / n as f64;
        let values: Vec<f64> = (0..n * n)
            .map(|i| f((i / n) as f64 * h, (i % n) as f64 * h))
            .collect();
        Self::from_values(n, &values)
    }

    pub fn values(&self) -> Vec<f64> {
        let mut data = self.coeffs.clone();
        Fft2::new(self.n).inverse(&mut data);
        data.iter().map(|c| c.re).collect()
    }

    pub fn coefficient(&self, z: [i64; 2]) -> Complex64 {
        let n = self.n as i64;
        let k1 = z[0].rem_euclid(n) as usize;
        let k2 = z[1].rem_euclid(n) as usize;
        self.coeffs[k1 * self.n + k2]
    }

    pub fn mean(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖∇u‖²_{L²} = Σ |z|² |û|²`.
    pub fn gradient_norm_sq(&self) -> f64 {
        self.weighted_sum(|z2| z2)
    }

    fn weighted_sum(&self, w: impl Fn(f64) -> f64) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for k1 in 0..n {
            let z1 = freq(k1, n) as f64;
            for k2 in 0..n {
                let z2 = freq(k2, n) as f64;
                let c = self.coeffs[k1 * n + k2];
                if c.re != 0.0 || c.im != 0.0 {
                    acc += w(z1 * z1 + z2 * z2) * c.norm_sqr();
                }
            }
        }
        acc
    }

    /// Energy in modes outside `|z|_∞ ≤ N/3`.
    pub fn aliased_energy(&self) -> f64 {
        let n = self.n;
        let cut = (n / 3) as i64;
        let mut acc = 0.0;
        for k1 in 0..n {
            for k2 in 0..n {
                if freq(k1, n).abs() > cut || freq(k2, n).abs() > cut {
                    acc += self.coeffs[k1 * n + k2].norm_sqr();
                }
            }
        }
        acc
    }

    /// Largest `|û(z) - conj(û(-z))|`.
    pub fn conjugate_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for k1 in 0..n {
            for k2 in 0..n {
                let m1 = (n - k1) % n;
                let m2 = (n - k2) % n;
                worst = worst.max((self.coeffs[k1 * n + k2] - self.coeffs[m1 * n + m2].conj()).norm());
            }
        }
        worst
    }

    /// Zero every mode outside `|z|_∞ ≤ N/3`.
    pub fn dealias(&mut self) {
        let mask = dealias_mask(self.n);
        for (c, keep) in self.coeffs.iter_mut().zip(&mask) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// `(Σ_z (1 + |z|²)^s |û(z)|²)^{1/2}` over the stored modes.
pub fn sobolev_norm(field: &SpectralField, s: f64) -> Result<f64, SpectralError> {
    if s < 0.0 {
        let mean = field.mean().norm();
        if mean > 1e-12 * field.l2_norm().max(1e-300) {
            return Err(SpectralError::NotMeanZero(mean));
        }
    }
    if s == 0.0 {
        return Ok(field.l2_norm());
    }
    Ok(field.weighted_sum(|z2| (1.0 + z2).powf(s)).sqrt())
}

fn check_grid(n: usize) -> Result<(), SpectralError> {
    if n < 8 || !n.is_power_of_two() {
        return Err(SpectralError::BadGrid(n));
    }
    Ok(())
}

fn dealias_mask(n: usize) -> Vec<bool> {
    let cut = (n / 3) as i64;
    (0..n * n)
        .map(|i| freq(i / n, n).abs() <= cut && freq(i % n, n).abs() <= cut)
        .collect()
}

/// Square 2-D complex FFT built from row transforms and in-place transposes.
struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Fft2 {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    fn transpose(&self, data: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            for j in i + 1..n {
                data.swap(i * n + j, j * n + i);
            }
        }
    }

    /// Grid values to `û` (scaled by `1/N²`).
    fn forward(&mut self, data: &mut [Complex64]) {
        self.fwd.process_with_scratch(data, &mut self.scratch);
        self.transpose(data);
        self.fwd.process_with_scratch(data, &mut self.scratch);
        self.transpose(data);
        let scale = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// `û` to grid values.
    fn inverse(&mut self, data: &mut [Complex64]) {
        self.inv.process_with_scratch(data, &mut self.scratch);
        self.transpose(data);
        self.inv.process_with_scratch(data, &mut self.scratch);
        self.transpose(data);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportScheme {
    /// Integrating-factor stochastic Heun.
    #[default]
    Heun,
    /// Strang splitting around `exp(B)`, the exact propagator of the
    /// frozen-increment transport operator (norm preserving).
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdeParams {
    pub amplitude: f64,
    pub kappa: f64,
    pub c: f64,
    pub dt: f64,
    pub scheme: TransportScheme,
}

/// Step operator for one model, grid and parameter set.
pub struct SpdeSolver {
    n: usize,
    params: SpdeParams,
    fft: Fft2,
    mask: Vec<bool>,
    zx: Vec<f64>,
    zy: Vec<f64>,
    factor: Vec<f64>,
    half_factor: Vec<f64>,
    // per mode: FFT index of +z and -z, and the complex weights of e^{±iz·x}
    mode_slots: Vec<(usize, usize, Complex64, Complex64)>,
    mode_polarization: Vec<[f64; 2]>,
    velocity: Vec<Complex64>,
    work: Vec<Complex64>,
    work2: Vec<Complex64>,
    work3: Vec<Complex64>,
    max_speed: f64,
}

/// Largest ratio of successive Taylor terms accepted before giving up.
const MAX_SERIES_TERMS: usize = 200;

impl SpdeSolver {
    pub fn new(model: &VelocityModel, n: usize, params: SpdeParams) -> Result<Self, SpectralError> {
        check_grid(n)?;
        if model.dim() != 2 {
            return Err(SpectralError::Dimension(model.dim()));
        }
        if !(params.dt > 0.0) || params.kappa < 0.0 {
            return Err(SpectralError::InvalidParameter(format!(
                "need dt > 0 and κ ≥ 0, got dt = {}, κ = {}",
                params.dt, params.kappa
            )));
        }
        let half = (n / 2) as i64;
        let mut mode_slots = Vec::with_capacity(model.n_modes());
        let mut mode_polarization = Vec::with_capacity(model.n_modes());
        for m in model.modes() {
            let z = &m.wavevector;
            if z.iter().any(|c| c.abs() >= half) {
                return Err(SpectralError::Unresolved(z.clone(), n));
            }
            let idx = |s: i64| {
                let k1 = (s * z[0]).rem_euclid(n as i64) as usize;
                let k2 = (s * z[1]).rem_euclid(n as i64) as usize;
                k1 * n + k2
            };
            // cos = (e^{+} + e^{-})/2, sin = (e^{+} - e^{-})/(2i)
            let (wp, wm) = match m.phase {
                Phase::Cos => (Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)),
                Phase::Sin => (Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5)),
            };
            mode_slots.push((idx(1), idx(-1), wp * m.amplitude, wm * m.amplitude));
            mode_polarization.push([m.polarization[0], m.polarization[1]]);
        }
        let mut zx = vec![0.0; n * n];
        let mut zy = vec![0.0; n * n];
        let mut factor = vec![0.0; n * n];
        let mut half_factor = vec![0.0; n * n];
        for k1 in 0..n {
            for k2 in 0..n {
                let i = k1 * n + k2;
                zx[i] = freq(k1, n) as f64;
                zy[i] = freq(k2, n) as f64;
                let rate = -params.kappa * (zx[i] * zx[i] + zy[i] * zy[i]) + params.c;
                factor[i] = (rate * params.dt).exp();
                half_factor[i] = (0.5 * rate * params.dt).exp();
            }
        }
        let h = TAU / n as f64;
        let mut max_speed: f64 = 0.0;
        for i in 0..n * n {
            let x = [(i / n) as f64 * h, (i % n) as f64 * h];
            max_speed = max_speed.max(model.rms_speed(&x));
        }
        Ok(SpdeSolver {
            n,
            params,
            fft: Fft2::new(n),
            mask: dealias_mask(n),
            zx,
            zy,
            factor,
            half_factor,
            mode_slots,
            mode_polarization,
            velocity: vec![Complex64::new(0.0, 0.0); n * n],
            work: vec![Complex64::new(0.0, 0.0); n * n],
            work2: vec![Complex64::new(0.0, 0.0); n * n],
            work3: vec![Complex64::new(0.0, 0.0); n * n],
            max_speed,
        })
    }

    pub fn params(&self) -> &SpdeParams {
        &self.params
    }

    /// `A · max_x (Σ_k |σ_k(x)|²)^{1/2} · dt` against `h/2`.
    pub fn check_cfl(&self) -> Result<(), SpectralError> {
        let value = self.params.amplitude.abs() * self.max_speed * self.params.dt;
        let limit = 0.5 * TAU / self.n as f64;
        if value > limit {
            return Err(SpectralError::Cfl { value, limit });
        }
        Ok(())
    }

    /// Physical `V₁ + i V₂` with `V = A Σ_k ΔW^k σ_k`.
    fn synthesize_velocity(&mut self, inc: &Increments) {
        let a = self.params.amplitude;
        let v = &mut self.velocity;
        v.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (k, &(ip, im, wp, wm)) in self.mode_slots.iter().enumerate() {
            let w = a * inc.transport[k];
            if w == 0.0 {
                continue;
            }
            let [p1, p2] = self.mode_polarization[k];
            // pack the two real components as V₁ + i V₂ in Fourier space
            let pack = Complex64::new(p1, p2);
            v[ip] += wp * pack * w;
            v[im] += wm * pack * w;
        }
        self.fft.inverse(&mut self.velocity);
    }

    /// `out = -P(V·∇u)` for the current velocity.
    fn transport(&mut self, u: &[Complex64], out: &mut [Complex64]) {
        let n2 = self.n * self.n;
        let i = Complex64::new(0.0, 1.0);
        // ∂₁u + i ∂₂u, both real in physical space
        for k in 0..n2 {
            self.work[k] = u[k] * (i * self.zx[k]) + u[k] * (i * self.zy[k]) * i;
        }
        self.fft.inverse(&mut self.work);
        for k in 0..n2 {
            let g = self.work[k];
            let v = self.velocity[k];
            self.work[k] = Complex64::new(v.re * g.re + v.im * g.im, 0.0);
        }
        self.fft.forward(&mut self.work);
        for k in 0..n2 {
            out[k] = if self.mask[k] { -self.work[k] } else { Complex64::new(0.0, 0.0) };
        }
    }

    /// Advance one step with the given increments.
    pub fn step(&mut self, field: &mut SpectralField, inc: &Increments) -> Result<(), SpectralError> {
        if inc.transport.len() != self.mode_slots.len() {
            return Err(SpectralError::InvalidParameter(format!(
                "{} increments for {} modes",
                inc.transport.len(),
                self.mode_slots.len()
            )));
        }
        if field.n != self.n {
            return Err(SpectralError::InvalidParameter("grid size mismatch".into()));
        }
        self.check_cfl()?;
        let n2 = self.n * self.n;
        let transport_on = self.params.amplitude != 0.0 && inc.transport.iter().any(|w| *w != 0.0);
        if !transport_on {
            for (c, f) in field.coeffs.iter_mut().zip(&self.factor) {
                *c *= *f;
            }
            return Ok(());
        }
        self.synthesize_velocity(inc);
        let u = &mut field.coeffs;
        let mut a = std::mem::take(&mut self.work2);
        let mut b = std::mem::take(&mut self.work3);
        match self.params.scheme {
            TransportScheme::Heun => {
                // a = B u ; u* = E(u + a) ; u' = E(u + a/2) + B(u*)/2
                self.transport(u, &mut a);
                for k in 0..n2 {
                    b[k] = self.factor[k] * (u[k] + a[k]);
                }
                let ustar = b.clone();
                self.transport(&ustar, &mut b);
                for k in 0..n2 {
                    u[k] = self.factor[k] * (u[k] + 0.5 * a[k]) + 0.5 * b[k];
                }
            }
            TransportScheme::Exponential => {
                for k in 0..n2 {
                    u[k] *= self.half_factor[k];
                }
                // Taylor series of exp(B) applied to u
                let norm0 = u.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                a.copy_from_slice(u);
                let mut converged = norm0 == 0.0;
                for term in 1..=MAX_SERIES_TERMS {
                    if converged {
                        break;
                    }
                    let src = a.clone();
                    self.transport(&src, &mut a);
                    let inv = 1.0 / term as f64;
                    let mut tn = 0.0;
                    for k in 0..n2 {
                        a[k] *= inv;
                        u[k] += a[k];
                        tn += a[k].norm_sqr();
                    }
                    if tn.sqrt() <= 1e-16 * norm0 {
                        converged = true;
                    }
                }
                if !converged {
                    self.work2 = a;
                    self.work3 = b;
                    return Err(SpectralError::SeriesDivergence(MAX_SERIES_TERMS));
                }
                for k in 0..n2 {
                    u[k] *= self.half_factor[k];
                }
            }
        }
        self.work2 = a;
        self.work3 = b;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub t: f64,
    pub l2: f64,
    pub h1: f64,
    pub hminus1: f64,
    /// `‖∇u‖²`.
    pub grad_sq: f64,
}

impl HistoryRow {
    fn of(t: f64, f: &SpectralField) -> Self {
        let l2 = f.l2_norm();
        let h1 = sobolev_norm(f, 1.0).unwrap_or(f64::NAN);
        let hminus1 = f.weighted_sum(|z2| 1.0 / (1.0 + z2)).sqrt();
        HistoryRow {
            t,
            l2,
            h1,
            hminus1,
            grad_sq: f.gradient_norm_sq(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdeRun {
    pub history: Vec<HistoryRow>,
    pub field: SpectralField,
}

/// Blow-up threshold on `‖u_t‖ / ‖u_0‖` (beyond any `e^{Ct}` growth).
const BLOW_UP_FACTOR: f64 = 1e6;

/// Integrate `[0, t_end]`, recording norms at every step.
pub fn run_spde(
    model: &VelocityModel,
    u0: &SpectralField,
    params: &SpdeParams,
    t_end: f64,
    seed: u64,
) -> Result<SpdeRun, SpectralError> {
    let n_steps = step_count(t_end, params.dt)?;
    let mut solver = SpdeSolver::new(model, u0.n, *params)?;
    solver.check_cfl()?;
    let noise = NoiseRealization::new(seed, params.dt, model.n_modes(), 2);
    let mut inc = Increments::zeros(model.n_modes(), 2);
    let mut field = u0.clone();
    field.dealias();
    let l0 = field.l2_norm();
    let mut history = vec![HistoryRow::of(0.0, &field)];
    for s in 0..n_steps {
        noise.fill(s, &mut inc);
        solver.step(&mut field, &inc)?;
        let t = (s + 1) as f64 * params.dt;
        let row = HistoryRow::of(t, &field);
        let bound = BLOW_UP_FACTOR * l0.max(1e-300) * (params.c.max(0.0) * t).exp();
        if !row.l2.is_finite() || row.l2 > bound {
            return Err(SpectralError::BlowUp(t));
        }
        history.push(row);
    }
    Ok(SpdeRun { history, field })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBalance {
    /// `r(t) / ‖u_0‖²`.
    pub relative_residual: Vec<f64>,
    pub max_relative: f64,
}

/// `r(t) = ‖u₀‖² − ‖u_t‖² − 2κ∫₀ᵗ‖∇u‖² ds + 2C∫₀ᵗ‖u‖² ds` by the trapezoid rule.
pub fn energy_balance(history: &[HistoryRow], kappa: f64, c: f64) -> EnergyBalance {
    let e0 = history[0].l2 * history[0].l2;
    let mut integral = 0.0;
    let mut out = Vec::with_capacity(history.len());
    let density = |r: &HistoryRow| 2.0 * kappa * r.grad_sq - 2.0 * c * r.l2 * r.l2;
    for (i, r) in history.iter().enumerate() {
        if i > 0 {
            let p = &history[i - 1];
            integral += 0.5 * (r.t - p.t) * (density(p) + density(r));
        }
        out.push((e0 - r.l2 * r.l2 - integral) / e0);
    }
    let max_relative = out.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    EnergyBalance {
        relative_residual: out,
        max_relative,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub amplitudes: Vec<f64>,
    pub kappa: f64,
    pub c: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_realizations: u64,
    pub seed: u64,
    pub scheme: TransportScheme,
    /// Start of the fit window; the window runs to `t_end`.
    pub fit_from: f64,
    /// Record the L² norm every this many steps.
    pub record_every: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub amplitude: f64,
    /// Median over realizations of `‖u_t‖_{L²}`, fitted.
    pub series: DecaySeries,
    pub rate: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub entries: Vec<SweepEntry>,
    /// `γ̂` strictly increasing along the amplitude list.
    pub monotone: bool,
    /// Least-squares slope of `log γ̂` against `log A` over the largest amplitudes.
    pub exponent: Option<f64>,
}

/// L² decay rate `γ̂(A)` for each amplitude. Realization `r` uses the same
/// noise seed for every amplitude.
pub fn enhanced_dissipation_sweep(
    model: &VelocityModel,
    u0: &SpectralField,
    params: &SweepParams,
) -> Result<SweepSummary, SpectralError> {
    if params.amplitudes.is_empty() || params.amplitudes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpectralError::InvalidParameter(
            "amplitude list must be nonempty and ascending".into(),
        ));
    }
    if u0.mean().norm() > 1e-12 * u0.l2_norm() {
        return Err(SpectralError::NotMeanZero(u0.mean().norm()));
    }
    if params.n_realizations == 0 || params.record_every == 0 {
        return Err(SpectralError::InvalidParameter(
            "need realizations ≥ 1 and record_every ≥ 1".into(),
        ));
    }
    let n_steps = step_count(params.t_end, params.dt)?;
    let jobs: Vec<(usize, u64)> = (0..params.amplitudes.len())
        .flat_map(|a| (0..params.n_realizations).map(move |r| (a, r)))
        .collect();
    let runs: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(a, r)| {
            let sp = SpdeParams {
                amplitude: params.amplitudes[a],
                kappa: params.kappa,
                c: params.c,
                dt: params.dt,
                scheme: params.scheme,
            };
            let mut solver = SpdeSolver::new(model, u0.n, sp)?;
            let noise = NoiseRealization::new(
                crate::flow::realization_seed(params.seed, r),
                params.dt,
                model.n_modes(),
                2,
            );
            let mut inc = Increments::zeros(model.n_modes(), 2);
            let mut field = u0.clone();
            field.dealias();
            let l0 = field.l2_norm();
            let mut out = vec![l0];
            for s in 0..n_steps {
                noise.fill(s, &mut inc);
                solver.step(&mut field, &inc)?;
                if (s + 1) % params.record_every == 0 {
                    let l = field.l2_norm();
                    let t = (s + 1) as f64 * params.dt;
                    if !l.is_finite() || l > BLOW_UP_FACTOR * l0 * (params.c.max(0.0) * t).exp() {
                        return Err(SpectralError::BlowUp(t));
                    }
                    out.push(l);
                }
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;
    let times: Vec<f64> = (0..runs[0].len())
        .map(|i| i as f64 * params.record_every as f64 * params.dt)
        .collect();
    let nr = params.n_realizations as usize;
    let mut entries = Vec::with_capacity(params.amplitudes.len());
    for (a, &amp) in params.amplitudes.iter().enumerate() {
        let group = &runs[a * nr..(a + 1) * nr];
        let mut values = Vec::with_capacity(times.len());
        let mut ses = Vec::with_capacity(times.len());
        for t in 0..times.len() {
            let col: Vec<f64> = group.iter().map(|g| g[t]).collect();
            let m = crate::stats::Moments::from_slice(&col);
            values.push(median(&col));
            // asymptotic standard error of a sample median under normality
            ses.push(1.2533 * m.std_error());
        }
        let series = DecaySeries::new(times.clone(), values, ses)
            .fit_time_window(params.fit_from, params.t_end);
        let (rate, r2) = series
            .fit
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |f| (f.rate, f.r2));
        entries.push(SweepEntry {
            amplitude: amp,
            series,
            rate,
            r2,
        });
    }
    let monotone = entries.windows(2).all(|w| w[1].rate > w[0].rate);
    let pts: Vec<(f64, f64)> = entries
        .iter()
        .filter(|e| e.amplitude > 0.0 && e.rate > 0.0)
        .map(|e| (e.amplitude.ln(), e.rate.ln()))
        .collect();
    let top = &pts[pts.len().saturating_sub(3)..];
    let exponent = crate::stats::linear_fit(top).map(|f| f.slope);
    Ok(SweepSummary {
        entries,
        monotone,
        exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos1(n: usize) -> SpectralField {
        SpectralField::from_fn(n, |x, _| x.cos()).unwrap()
    }

    #[test]
    fn fourier_convention() {
        let f = cos1(16);
        assert!((f.coefficient([1, 0]) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((f.coefficient([-1, 0]) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((f.l2_norm() - 0.5f64.sqrt()).abs() < 1e-15);
        let v = f.values();
        assert!((v[0] - 1.0).abs() < 1e-14);
        assert!((v[16 * 4] - (TAU * 4.0 / 16.0).cos()).abs() < 1e-14);
        let s = SpectralField::from_fn(16, |_, y| (2.0 * y).sin()).unwrap();
        assert!((s.coefficient([0, 2]) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn sobolev_examples() {
        let f = cos1(16);
        let l2 = f.l2_norm();
        assert!((sobolev_norm(&f, 1.0).unwrap() / l2 - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(sobolev_norm(&f, 0.0).unwrap(), l2);
        let g = SpectralField::from_fn(16, |x, y| 1.0 + x.cos() + y.sin()).unwrap();
        assert!(matches!(sobolev_norm(&g, -1.0), Err(SpectralError::NotMeanZero(_))));
        assert!(sobolev_norm(&g, 1.0).is_ok());
    }

    #[test]
    fn grid_guard() {
        assert!(SpectralField::zeros(12).is_err());
        assert!(SpectralField::zeros(4).is_err());
        assert!(SpectralField::zeros(32).is_ok());
    }

    #[test]
    fn pure_heat_is_exact() {
        let m = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        let params = SpdeParams {
            amplitude: 0.0,
            kappa: 0.1,
            c: 0.0,
            dt: 1e-3,
            scheme: TransportScheme::Heun,
        };
        let run = run_spde(&m, &cos1(32), &params, 1.0, 1).unwrap();
        let ratio = run.history.last().unwrap().l2 / run.history[0].l2;
        assert!((ratio - (-0.1f64).exp()).abs() < 1e-12);
        assert!(energy_balance(&run.history, 0.1, 0.0).max_relative < 1e-8);
    }

    #[test]
    fn growth_term_is_exact() {
        let m = VelocityModel::baxendale_rozovskii();
        let params = SpdeParams {
            amplitude: 0.0,
            kappa: 0.0,
            c: 0.3,
            dt: 0.05,
            scheme: TransportScheme::Heun,
        };
        let run = run_spde(&m, &cos1(16), &params, 1.0, 1).unwrap();
        let ratio = run.history.last().unwrap().l2 / run.history[0].l2;
        assert!((ratio - 0.3f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn transport_conserves_and_stays_real() {
        let m = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        for scheme in [TransportScheme::Heun, TransportScheme::Exponential] {
            let params = SpdeParams {
                amplitude: 1.0,
                kappa: 0.0,
                c: 0.0,
                dt: 1e-3,
                scheme,
            };
            let run = run_spde(&m, &cos1(32), &params, 0.2, 3).unwrap();
            let drift = (run.history.last().unwrap().l2 / run.history[0].l2 - 1.0).abs();
            assert!(drift < 1e-4, "{scheme:?}: {drift}");
            assert!(run.field.conjugate_defect() < 1e-13);
            assert!(run.field.mean().norm() < 1e-14);
            assert_eq!(run.field.aliased_energy(), 0.0);
        }
    }

    #[test]
    fn exponential_preserves_norm_to_roundoff() {
        let m = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        let params = SpdeParams {
            amplitude: 4.0,
            kappa: 0.0,
            c: 0.0,
            dt: 1e-2,
            scheme: TransportScheme::Exponential,
        };
        let u0 = SpectralField::from_fn(32, |x, y| x.cos() + (2.0 * y).sin()).unwrap();
        let run = run_spde(&m, &u0, &params, 0.5, 5).unwrap();
        let drift = (run.history.last().unwrap().l2 / run.history[0].l2 - 1.0).abs();
        assert!(drift < 1e-12, "{drift}");
    }

    #[test]
    fn cfl_guard_trips() {
        let m = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        let params = SpdeParams {
            amplitude: 1e4,
            kappa: 0.0,
            c: 0.0,
            dt: 1e-2,
            scheme: TransportScheme::Heun,
        };
        assert!(matches!(
            run_spde(&m, &cos1(16), &params, 0.1, 1),
            Err(SpectralError::Cfl { .. })
        ));
    }

    #[test]
    fn unresolved_modes_rejected() {
        let m = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        let params = SpdeParams {
            amplitude: 1.0,
            kappa: 0.0,
            c: 0.0,
            dt: 1e-2,
            scheme: TransportScheme::Heun,
        };
        assert!(matches!(
            SpdeSolver::new(&m, 8, params),
            Err(SpectralError::Unresolved(..))
        ));
    }

    #[test]
    fn constant_velocity_translates() {
        // σ = (1, 0) constant: u_t(x) = u_0(x - A W_t e₁), |û| unchanged, phase e^{-i z₁ A W}
        let m = VelocityModel::constant(vec![1.0, 0.0]);
        let params = SpdeParams {
            amplitude: 1.0,
            kappa: 0.0,
            c: 0.0,
            dt: 1e-2,
            scheme: TransportScheme::Exponential,
        };
        let mut solver = SpdeSolver::new(&m, 16, params).unwrap();
        let mut f = cos1(16);
        let inc = Increments {
            transport: vec![0.3],
            viscous: vec![0.0, 0.0],
        };
        solver.step(&mut f, &inc).unwrap();
        let want = Complex64::from_polar(0.5, -0.3);
        assert!((f.coefficient([1, 0]) - want).norm() < 1e-14);
    }

    #[test]
    fn heat_residual_and_sweep_baseline() {
        let m = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        let params = SweepParams {
            amplitudes: vec![0.0],
            kappa: 0.05,
            c: 0.0,
            t_end: 2.0,
            dt: 0.01,
            n_realizations: 2,
            seed: 1,
            scheme: TransportScheme::Heun,
            fit_from: 0.0,
            record_every: 10,
        };
        let s = enhanced_dissipation_sweep(&m, &cos1(32), &params).unwrap();
        assert!((s.entries[0].rate - 0.05).abs() < 1e-10);
        let mut bad = params.clone();
        bad.amplitudes = vec![1.0, 0.5];
        assert!(enhanced_dissipation_sweep(&m, &cos1(32), &bad).is_err());
    }
}
