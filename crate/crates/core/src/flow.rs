//! Stratonovich integration of the stochastic flow
//! `dφ = A Σ_k σ_k(φ) ∘ dW^k + √(2κ) dW̃` and its linearization.
//!
//! All particles of a [`FlowState`] see the same increments. The default
//! scheme is the stochastic Heun predictor–corrector, applied jointly to the
//! position, the tangent matrix `J` (`dJ = A Σ_k Dσ_k(x) J ∘ dW^k`) and the
//! unit tangent `v`. The viscous fields are constant, so their contribution
//! is an exact additive kick that does not touch `J`.

use crate::fields::{EvalScratch, VelocityModel};
use crate::noise::{self, Increments, NoiseRealization};
use crate::torus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("increment block has {got_modes} transport / {got_dim} viscous entries, expected {modes} / {dim}")]
    IncrementShape {
        modes: usize,
        dim: usize,
        got_modes: usize,
        got_dim: usize,
    },
    #[error("tangent matrices are not tracked by this state")]
    MissingTangents,
    #[error("unit tangent vectors are not tracked by this state")]
    MissingUnitTangents,
    #[error("the Euler–Maruyama path only advances positions")]
    EulerWithTangents,
    #[error("tangent matrix of particle {particle} is singular or non-finite (integrator blow-up)")]
    Singular { particle: usize },
    #[error("invalid run parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Heun,
    /// Positions only; consistent when every `⟨Dσ_k, σ_k⟩` vanishes.
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub dt: f64,
    pub amplitude: f64,
    pub kappa: f64,
    pub scheme: Scheme,
}

impl StepParams {
    pub fn new(dt: f64, amplitude: f64, kappa: f64) -> Self {
        StepParams {
            dt,
            amplitude,
            kappa,
            scheme: Scheme::Heun,
        }
    }
}

/// Ensemble of particles with optional linearized quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub t: f64,
    pub dim: usize,
    /// `P × d`, wrapped into `[0, 2π)`.
    pub positions: Vec<f64>,
    /// `P × d × d`, row-major per particle.
    pub tangents: Option<Vec<f64>>,
    /// `P × d`, unit norm after every step.
    pub unit_tangents: Option<Vec<f64>>,
    /// Accumulated `log |J v|` of the unit-tangent renormalizations.
    pub log_growth: Option<Vec<f64>>,
    /// Accumulated `log R₁₁` of the QR renormalizations of `J`.
    pub qr_log_growth: Option<Vec<f64>>,
}

impl FlowState {
    pub fn new(dim: usize, positions: &[Vec<f64>]) -> Self {
        let mut flat = Vec::with_capacity(positions.len() * dim);
        for p in positions {
            assert_eq!(p.len(), dim, "particle dimension mismatch");
            flat.extend(p.iter().map(|&c| torus::wrap(c)));
        }
        FlowState {
            t: 0.0,
            dim,
            positions: flat,
            tangents: None,
            unit_tangents: None,
            log_growth: None,
            qr_log_growth: None,
        }
    }

    pub fn n_particles(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// Start tracking `J = I` for every particle.
    pub fn with_tangents(mut self) -> Self {
        let d = self.dim;
        let mut t = vec![0.0; self.n_particles() * d * d];
        for p in 0..self.n_particles() {
            for i in 0..d {
                t[p * d * d + i * d + i] = 1.0;
            }
        }
        self.tangents = Some(t);
        self.qr_log_growth = Some(vec![0.0; self.n_particles()]);
        self
    }

    /// Start tracking unit tangents from the given directions (normalized here).
    pub fn with_unit_tangents(mut self, directions: &[Vec<f64>]) -> Self {
        assert_eq!(directions.len(), self.n_particles());
        let mut flat = Vec::with_capacity(directions.len() * self.dim);
        for v in directions {
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            flat.extend(v.iter().map(|c| c / n));
        }
        self.unit_tangents = Some(flat);
        self.log_growth = Some(vec![0.0; self.n_particles()]);
        self
    }

    pub fn tangent(&self, i: usize) -> Option<&[f64]> {
        let d2 = self.dim * self.dim;
        self.tangents.as_ref().map(|t| &t[i * d2..(i + 1) * d2])
    }

    pub fn unit_tangent(&self, i: usize) -> Option<&[f64]> {
        let d = self.dim;
        self.unit_tangents.as_ref().map(|v| &v[i * d..(i + 1) * d])
    }
}

/// Reusable buffers for one worker.
pub struct Stepper<'m> {
    model: &'m VelocityModel,
    scratch: EvalScratch,
    weights: Vec<f64>,
    kick: Vec<f64>,
    vel0: Vec<f64>,
    vel1: Vec<f64>,
    jac0: Vec<f64>,
    jac1: Vec<f64>,
    xp: Vec<f64>,
    tmp: Vec<f64>,
    tmp2: Vec<f64>,
}

impl<'m> Stepper<'m> {
    pub fn new(model: &'m VelocityModel) -> Self {
        let d = model.dim();
        Stepper {
            model,
            scratch: model.new_scratch(),
            weights: vec![0.0; model.n_modes()],
            kick: vec![0.0; d],
            vel0: vec![0.0; d],
            vel1: vec![0.0; d],
            jac0: vec![0.0; d * d],
            jac1: vec![0.0; d * d],
            xp: vec![0.0; d],
            tmp: vec![0.0; d * d],
            tmp2: vec![0.0; d * d],
        }
    }

    pub fn model(&self) -> &VelocityModel {
        self.model
    }

    /// Advance every tracked quantity of `state` by one step.
    pub fn step(
        &mut self,
        state: &mut FlowState,
        inc: &Increments,
        params: &StepParams,
    ) -> Result<(), FlowError> {
        let d = self.model.dim();
        if inc.transport.len() != self.model.n_modes() || inc.viscous.len() != d {
            return Err(FlowError::IncrementShape {
                modes: self.model.n_modes(),
                dim: d,
                got_modes: inc.transport.len(),
                got_dim: inc.viscous.len(),
            });
        }
        if params.scheme == Scheme::EulerMaruyama
            && (state.tangents.is_some() || state.unit_tangents.is_some())
        {
            return Err(FlowError::EulerWithTangents);
        }
        for (w, dw) in self.weights.iter_mut().zip(&inc.transport) {
            *w = params.amplitude * dw;
        }
        let visc = (2.0 * params.kappa).sqrt();
        for (k, dw) in self.kick.iter_mut().zip(&inc.viscous) {
            *k = visc * dw;
        }
        let track_j = state.tangents.is_some();
        let track_v = state.unit_tangents.is_some();
        let need_jac = track_j || track_v;
        for p in 0..state.n_particles() {
            let x = &mut state.positions[p * d..(p + 1) * d];
            self.vel0.iter_mut().for_each(|v| *v = 0.0);
            if need_jac {
                self.jac0.iter_mut().for_each(|v| *v = 0.0);
                self.model.accumulate_velocity_jacobian(
                    x,
                    &self.weights,
                    &mut self.vel0,
                    &mut self.jac0,
                    &mut self.scratch,
                );
            } else {
                self.model
                    .accumulate_velocity(x, &self.weights, &mut self.vel0, &mut self.scratch);
            }
            if params.scheme == Scheme::EulerMaruyama {
                for i in 0..d {
                    x[i] = torus::wrap(x[i] + self.vel0[i] + self.kick[i]);
                }
                continue;
            }
            for i in 0..d {
                self.xp[i] = x[i] + self.vel0[i] + self.kick[i];
            }
            self.vel1.iter_mut().for_each(|v| *v = 0.0);
            if need_jac {
                self.jac1.iter_mut().for_each(|v| *v = 0.0);
                self.model.accumulate_velocity_jacobian(
                    &self.xp,
                    &self.weights,
                    &mut self.vel1,
                    &mut self.jac1,
                    &mut self.scratch,
                );
            } else {
                self.model
                    .accumulate_velocity(&self.xp, &self.weights, &mut self.vel1, &mut self.scratch);
            }
            for i in 0..d {
                x[i] = torus::wrap(x[i] + 0.5 * (self.vel0[i] + self.vel1[i]) + self.kick[i]);
            }
            if let Some(tangents) = state.tangents.as_mut() {
                let j = &mut tangents[p * d * d..(p + 1) * d * d];
                // tmp = B0 J ; tmp2 = J + B0 J ; J += (B0 J + B1 tmp2)/2
                matmul(&self.jac0, j, &mut self.tmp, d);
                for (t2, (a, b)) in self.tmp2.iter_mut().zip(j.iter().zip(&self.tmp)) {
                    *t2 = a + b;
                }
                let (tmp, tmp2) = (&mut self.tmp, &mut self.tmp2);
                for i in 0..d {
                    for c in 0..d {
                        let mut s = 0.0;
                        for l in 0..d {
                            s += self.jac1[i * d + l] * tmp2[l * d + c];
                        }
                        j[i * d + c] += 0.5 * (tmp[i * d + c] + s);
                    }
                }
            }
            if let Some(units) = state.unit_tangents.as_mut() {
                let v = &mut units[p * d..(p + 1) * d];
                let b0v = &mut self.tmp[..d];
                for i in 0..d {
                    b0v[i] = (0..d).map(|l| self.jac0[i * d + l] * v[l]).sum();
                }
                let vp = &mut self.tmp2[..d];
                for i in 0..d {
                    vp[i] = v[i] + b0v[i];
                }
                let mut norm2 = 0.0;
                for i in 0..d {
                    let b1vp: f64 = (0..d).map(|l| self.jac1[i * d + l] * vp[l]).sum();
                    let w = v[i] + 0.5 * (b0v[i] + b1vp);
                    self.xp[i] = w;
                    norm2 += w * w;
                }
                let norm = norm2.sqrt();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(FlowError::Singular { particle: p });
                }
                for i in 0..d {
                    v[i] = self.xp[i] / norm;
                }
                if let Some(lg) = state.log_growth.as_mut() {
                    lg[p] += norm.ln();
                }
            }
        }
        state.t += params.dt;
        Ok(())
    }
}

#[inline]
fn matmul(a: &[f64], b: &[f64], out: &mut [f64], d: usize) {
    for i in 0..d {
        for c in 0..d {
            let mut s = 0.0;
            for l in 0..d {
                s += a[i * d + l] * b[l * d + c];
            }
            out[i * d + c] = s;
        }
    }
}

/// One Heun step of the positions (and any tracked tangents).
pub fn step(
    model: &VelocityModel,
    state: &mut FlowState,
    inc: &Increments,
    params: &StepParams,
) -> Result<(), FlowError> {
    Stepper::new(model).step(state, inc, params)
}

/// One joint Heun step of `(x, J)`.
pub fn step_tangent(
    model: &VelocityModel,
    state: &mut FlowState,
    inc: &Increments,
    params: &StepParams,
) -> Result<(), FlowError> {
    if state.tangents.is_none() {
        return Err(FlowError::MissingTangents);
    }
    step(model, state, inc, params)
}

/// One joint Heun step of `(x, v)`, renormalizing `v` and accumulating `log |·|`.
pub fn step_unit_tangent(
    model: &VelocityModel,
    state: &mut FlowState,
    inc: &Increments,
    params: &StepParams,
) -> Result<(), FlowError> {
    if state.unit_tangents.is_none() {
        return Err(FlowError::MissingUnitTangents);
    }
    step(model, state, inc, params)
}

/// Replace every `J` by the `Q` factor of `J = QR` (positive diagonal `R`) and
/// add `log R₁₁` to the QR log-growth.
pub fn qr_renormalize(state: &mut FlowState) -> Result<(), FlowError> {
    let d = state.dim;
    let n = state.n_particles();
    let tangents = state.tangents.as_mut().ok_or(FlowError::MissingTangents)?;
    let growth = state
        .qr_log_growth
        .get_or_insert_with(|| vec![0.0; n]);
    let mut col = vec![0.0; d];
    for p in 0..n {
        let j = &mut tangents[p * d * d..(p + 1) * d * d];
        // modified Gram–Schmidt on the columns, twice for stability
        for c in 0..d {
            for i in 0..d {
                col[i] = j[i * d + c];
            }
            for _ in 0..2 {
                for q in 0..c {
                    let dot: f64 = (0..d).map(|i| col[i] * j[i * d + q]).sum();
                    for i in 0..d {
                        col[i] -= dot * j[i * d + q];
                    }
                }
            }
            let r = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(r > 1e-300 && r.is_finite()) {
                return Err(FlowError::Singular { particle: p });
            }
            if c == 0 {
                growth[p] += r.ln();
            }
            for i in 0..d {
                j[i * d + c] = col[i] / r;
            }
        }
    }
    Ok(())
}

/// Upper-triangular diagonal of the positive-diagonal QR of one `d × d` matrix.
pub fn qr_diagonal(j: &[f64], d: usize) -> Vec<f64> {
    let mut state = FlowState {
        t: 0.0,
        dim: d,
        positions: vec![0.0; d],
        tangents: Some(j.to_vec()),
        unit_tangents: None,
        log_growth: None,
        qr_log_growth: None,
    };
    let mut out = Vec::with_capacity(d);
    // R_cc = ⟨q_c, j_c⟩
    if qr_renormalize(&mut state).is_ok() {
        let q = state.tangents.unwrap();
        for c in 0..d {
            out.push((0..d).map(|i| q[i * d + c] * j[i * d + c]).sum());
        }
    }
    out
}

/// Number of steps of size `dt` covering `[0, t_end]`.
pub fn step_count(t_end: f64, dt: f64) -> Result<u64, FlowError> {
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(FlowError::InvalidParameter(format!(
            "need dt > 0 and T > 0, got dt = {dt}, T = {t_end}"
        )));
    }
    let n = (t_end / dt).round();
    if ((n * dt - t_end) / t_end).abs() > 1e-9 {
        return Err(FlowError::InvalidParameter(format!(
            "T = {t_end} is not a multiple of dt = {dt}"
        )));
    }
    Ok(n as u64)
}

/// Step indices of an observation grid; every time must be a nonnegative
/// multiple of `dt` and the grid strictly increasing.
pub fn grid_steps(t_grid: &[f64], dt: f64) -> Result<Vec<u64>, FlowError> {
    if t_grid.is_empty() {
        return Err(FlowError::InvalidParameter("empty time grid".into()));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let n = if t == 0.0 { 0 } else { step_count(t, dt)? };
        if out.last().is_some_and(|&l| l >= n) {
            return Err(FlowError::InvalidParameter(format!(
                "time grid not strictly increasing at t = {t}"
            )));
        }
        out.push(n);
    }
    Ok(out)
}

/// Parameters of one ensemble run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub initial_positions: Vec<Vec<f64>>,
    /// Initial unit tangents; tracked when present.
    pub initial_directions: Option<Vec<Vec<f64>>>,
    pub track_tangents: bool,
    pub t_end: f64,
    pub params: StepParams,
    pub seed: u64,
    /// Snapshot cadence in steps.
    pub snapshot_every: u64,
    /// QR cadence in steps (only with tracked tangents); 0 disables.
    pub qr_every: u64,
}

impl EnsembleConfig {
    pub fn positions_only(
        initial_positions: Vec<Vec<f64>>,
        t_end: f64,
        params: StepParams,
        seed: u64,
    ) -> Self {
        EnsembleConfig {
            initial_positions,
            initial_directions: None,
            track_tangents: false,
            t_end,
            params,
            seed,
            snapshot_every: 1,
            qr_every: 10,
        }
    }

    pub fn initial_state(&self, dim: usize) -> FlowState {
        let mut s = FlowState::new(dim, &self.initial_positions);
        if self.track_tangents {
            s = s.with_tangents();
        }
        if let Some(dirs) = &self.initial_directions {
            s = s.with_unit_tangents(dirs);
        }
        s
    }
}

/// Seed of realization `r` derived from a run seed.
pub fn realization_seed(seed: u64, r: u64) -> u64 {
    noise::derive_seed(seed, 0x4EA1, r)
}

/// Integrate one realization and return snapshots at every `snapshot_every`
/// steps, including `t = 0` and `t = T`.
pub fn run_ensemble(
    model: &VelocityModel,
    cfg: &EnsembleConfig,
) -> Result<Vec<FlowState>, FlowError> {
    let n_steps = step_count(cfg.t_end, cfg.params.dt)?;
    if cfg.snapshot_every == 0 {
        return Err(FlowError::InvalidParameter("snapshot_every must be ≥ 1".into()));
    }
    let noise = NoiseRealization::new(cfg.seed, cfg.params.dt, model.n_modes(), model.dim());
    let mut state = cfg.initial_state(model.dim());
    let mut stepper = Stepper::new(model);
    let mut inc = Increments::zeros(model.n_modes(), model.dim());
    let mut out = vec![state.clone()];
    for s in 0..n_steps {
        noise.fill(s, &mut inc);
        stepper.step(&mut state, &inc, &cfg.params)?;
        state.t = (s + 1) as f64 * cfg.params.dt;
        let done = s + 1;
        if state.tangents.is_some() && cfg.qr_every > 0 && done % cfg.qr_every == 0 {
            qr_renormalize(&mut state)?;
        }
        if done % cfg.snapshot_every == 0 || done == n_steps {
            out.push(state.clone());
        }
    }
    Ok(out)
}

/// Independent realizations `0..n` (seeds derived from `cfg.seed`), run in
/// parallel and returned in realization order.
pub fn run_realizations(
    model: &VelocityModel,
    cfg: &EnsembleConfig,
    n: u64,
) -> Result<Vec<Vec<FlowState>>, FlowError> {
    (0..n)
        .into_par_iter()
        .map(|r| {
            let mut c = cfg.clone();
            c.seed = realization_seed(cfg.seed, r);
            run_ensemble(model, &c)
        })
        .collect()
}

/// Snapshot dump: `realization,t,particle,x1..xd[,J11..Jdd][,v1..vd],log_growth`.
pub fn write_snapshots_csv<W: Write>(
    mut w: W,
    runs: &[(u64, Vec<FlowState>)],
) -> std::io::Result<()> {
    let Some(first) = runs.iter().flat_map(|r| r.1.first()).next() else {
        return Ok(());
    };
    let d = first.dim;
    let mut header = vec!["realization".to_string(), "t".into(), "particle".into()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    if first.tangents.is_some() {
        for i in 1..=d {
            header.extend((1..=d).map(|j| format!("J{i}{j}")));
        }
    }
    if first.unit_tangents.is_some() {
        header.extend((1..=d).map(|i| format!("v{i}")));
    }
    header.push("log_growth".into());
    writeln!(w, "{}", header.join(","))?;
    for (r, snaps) in runs {
        for s in snaps {
            for p in 0..s.n_particles() {
                let mut row = vec![r.to_string(), crate::fmt_f64(s.t), p.to_string()];
                row.extend(s.position(p).iter().map(|v| crate::fmt_f64(*v)));
                if let Some(j) = s.tangent(p) {
                    row.extend(j.iter().map(|v| crate::fmt_f64(*v)));
                }
                if let Some(v) = s.unit_tangent(p) {
                    row.extend(v.iter().map(|c| crate::fmt_f64(*c)));
                }
                let lg = s
                    .log_growth
                    .as_ref()
                    .or(s.qr_log_growth.as_ref())
                    .map(|g| g[p])
                    .unwrap_or(0.0);
                row.push(crate::fmt_f64(lg));
                writeln!(w, "{}", row.join(","))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::sample_point;
    use crate::stats::{median, Moments};
    use std::f64::consts::FRAC_PI_2;

    fn det2(j: &[f64]) -> f64 {
        j[0] * j[3] - j[1] * j[2]
    }

    #[test]
    fn zero_increments_leave_positions_unchanged() {
        let m = VelocityModel::kraichnan(2, 4.0, 2).unwrap();
        let mut s = FlowState::new(2, &[vec![1.0, 2.0], vec![3.0, 0.5]]).with_tangents();
        let before = s.clone();
        let inc = Increments::zeros(m.n_modes(), 2);
        step(&m, &mut s, &inc, &StepParams::new(0.01, 1.0, 0.0)).unwrap();
        assert_eq!(s.positions, before.positions);
        assert_eq!(s.tangents, before.tangents);
    }

    #[test]
    fn constant_field_translates_exactly() {
        let m = VelocityModel::constant(vec![1.0, 0.0]);
        let mut s = FlowState::new(2, &[vec![1.0, 2.0]])
            .with_tangents()
            .with_unit_tangents(&[vec![0.6, 0.8]]);
        let inc = Increments {
            transport: vec![0.3],
            viscous: vec![0.0, 0.0],
        };
        let params = StepParams::new(0.01, 2.0, 0.0);
        step(&m, &mut s, &inc, &params).unwrap();
        assert_eq!(s.positions, vec![1.6, 2.0]);
        assert_eq!(s.tangent(0).unwrap(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.unit_tangent(0).unwrap(), &[0.6, 0.8]);
        assert_eq!(s.log_growth.as_ref().unwrap()[0], 0.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let m = VelocityModel::baxendale_rozovskii();
        let mut s = FlowState::new(2, &[vec![0.0, 0.0]]);
        let bad = Increments::zeros(3, 2);
        assert!(matches!(
            step(&m, &mut s, &bad, &StepParams::new(0.01, 1.0, 0.0)),
            Err(FlowError::IncrementShape { .. })
        ));
        let inc = Increments::zeros(4, 2);
        assert_eq!(
            step_tangent(&m, &mut s, &inc, &StepParams::new(0.01, 1.0, 0.0)),
            Err(FlowError::MissingTangents)
        );
        assert_eq!(
            step_unit_tangent(&m, &mut s, &inc, &StepParams::new(0.01, 1.0, 0.0)),
            Err(FlowError::MissingUnitTangents)
        );
    }

    #[test]
    fn br_tangent_first_order_update_vanishes() {
        // Dσ₁(π/2, 0) = 0 and σ₁(π/2,0) = (0,1) moves x only along x², where
        // Dσ₁ stays 0, so J is unchanged to round-off.
        let m = VelocityModel::baxendale_rozovskii();
        let mut s = FlowState::new(2, &[vec![FRAC_PI_2, 0.0]]).with_tangents();
        let inc = Increments {
            transport: vec![0.05, 0.0, 0.0, 0.0],
            viscous: vec![0.0, 0.0],
        };
        step_tangent(&m, &mut s, &inc, &StepParams::new(1e-3, 1.0, 0.0)).unwrap();
        let j = s.tangent(0).unwrap();
        assert!((j[0] - 1.0).abs() < 1e-15 && (j[3] - 1.0).abs() < 1e-15);
        assert!(j[1].abs() < 1e-15 && j[2].abs() < 1e-15);
    }

    #[test]
    fn viscous_kicks_give_brownian_variance() {
        // no transport modes: x_T - x_0 = √(2κ) W̃_T exactly
        let m = VelocityModel::custom(2, vec![]).unwrap();
        let (kappa, dt, n_steps) = (0.05, 0.01, 100u64);
        let particles = 10_000;
        let mut disp = Moments::default();
        for p in 0..particles {
            let noise = NoiseRealization::new(realization_seed(3, p), dt, 0, 2);
            let mut s = FlowState::new(2, &[vec![3.0, 3.0]]);
            let mut stepper = Stepper::new(&m);
            for k in 0..n_steps {
                stepper
                    .step(&mut s, &noise.increments(k), &StepParams::new(dt, 1.0, kappa))
                    .unwrap();
            }
            disp.push(torus::wrap_signed(s.positions[0] - 3.0));
        }
        let t = dt * n_steps as f64;
        let var = disp.variance();
        // se of a sample variance of a Gaussian is var·sqrt(2/(n-1))
        let se = 2.0 * kappa * t * (2.0 / (particles as f64 - 1.0)).sqrt();
        assert!((var - 2.0 * kappa * t).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn unit_tangents_stay_unit_and_match_tangent_flow() {
        let m = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        let v0 = vec![0.6, -0.8];
        let mut s = FlowState::new(2, &[vec![1.0, 5.0]])
            .with_tangents()
            .with_unit_tangents(&[v0.clone()]);
        let noise = NoiseRealization::new(21, 0.01, m.n_modes(), 2);
        let params = StepParams::new(0.01, 1.0, 0.0);
        let mut stepper = Stepper::new(&m);
        for k in 0..100 {
            stepper.step(&mut s, &noise.increments(k), &params).unwrap();
            let v = s.unit_tangent(0).unwrap();
            assert!(((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs() < 1e-14);
        }
        let j = s.tangent(0).unwrap();
        let jv = [j[0] * v0[0] + j[1] * v0[1], j[2] * v0[0] + j[3] * v0[1]];
        let direct = (jv[0] * jv[0] + jv[1] * jv[1]).sqrt().ln();
        let acc = s.log_growth.as_ref().unwrap()[0];
        assert!((direct - acc).abs() < 1e-8, "{direct} vs {acc}");
    }

    #[test]
    fn qr_examples() {
        let mut s = FlowState::new(2, &vec![vec![0.0, 0.0]; 3]).with_tangents();
        s.tangents = Some(vec![
            1.0, 0.0, 0.0, 1.0, //
            2.0, 0.0, 0.0, 2.0, //
            0.0, 1.0, 1.0, 0.0,
        ]);
        qr_renormalize(&mut s).unwrap();
        let g = s.qr_log_growth.as_ref().unwrap();
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 2f64.ln()).abs() < 1e-15);
        assert_eq!(g[2], 0.0);
        assert_eq!(s.tangent(0).unwrap(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.tangent(2).unwrap(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(qr_diagonal(&[0.0, 1.0, 1.0, 0.0], 2), vec![1.0, 1.0]);
        s.tangents = Some(vec![0.0; 12]);
        assert_eq!(qr_renormalize(&mut s), Err(FlowError::Singular { particle: 0 }));
    }

    #[test]
    fn qr_columns_orthonormal() {
        let mut s = FlowState::new(3, &[vec![0.0; 3]]).with_tangents();
        s.tangents = Some(vec![2.0, 1.0, 0.5, -1.0, 3.0, 0.2, 0.4, 0.1, 1.5]);
        qr_renormalize(&mut s).unwrap();
        let q = s.tangent(0).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = (0..3).map(|i| q[i * 3 + a] * q[i * 3 + b]).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shared_noise_keeps_coincident_particles_together() {
        let m = VelocityModel::kraichnan(2, 4.0, 3).unwrap();
        let cfg = EnsembleConfig {
            initial_positions: vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![4.0, 2.0]],
            snapshot_every: 10,
            ..EnsembleConfig::positions_only(vec![], 1.0, StepParams::new(0.01, 1.0, 0.1), 5)
        };
        let snaps = run_ensemble(&m, &cfg).unwrap();
        for s in &snaps {
            assert_eq!(s.position(0), s.position(1));
        }
        let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
        assert_eq!(times.len(), 11);
        for (i, t) in times.iter().enumerate() {
            assert!((t - 0.1 * i as f64).abs() < 1e-12);
        }
        let again = run_ensemble(&m, &cfg).unwrap();
        assert_eq!(snaps, again);
    }

    #[test]
    fn determinant_defect_is_small() {
        let m = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        let dt = 1e-3;
        let defects: Vec<f64> = (0..16u64)
            .map(|r| {
                let cfg = EnsembleConfig {
                    initial_positions: vec![sample_point(9, r, 2)],
                    track_tangents: true,
                    qr_every: 0,
                    snapshot_every: 1000,
                    ..EnsembleConfig::positions_only(vec![], 1.0, StepParams::new(dt, 1.0, 0.0), 0)
                };
                let cfg = EnsembleConfig {
                    seed: realization_seed(77, r),
                    ..cfg
                };
                let snaps = run_ensemble(&m, &cfg).unwrap();
                (det2(snaps.last().unwrap().tangent(0).unwrap()) - 1.0).abs()
            })
            .collect();
        assert!(median(&defects) < 5e-3);
    }

    #[test]
    fn euler_and_heun_agree_pathwise_to_order_dt() {
        let m = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        let dt = 1e-3;
        let noise = NoiseRealization::new(5, dt, m.n_modes(), 2);
        let mut a = FlowState::new(2, &[vec![2.0, 1.0]]);
        let mut b = a.clone();
        let heun = StepParams::new(dt, 1.0, 0.0);
        let em = StepParams {
            scheme: Scheme::EulerMaruyama,
            ..heun
        };
        let mut st = Stepper::new(&m);
        for k in 0..1000 {
            let inc = noise.increments(k);
            st.step(&mut a, &inc, &heun).unwrap();
            st.step(&mut b, &inc, &em).unwrap();
        }
        let gap = torus::distance(a.position(0), b.position(0));
        assert!(gap < 0.05, "gap {gap}");
        let mut c = FlowState::new(2, &[vec![0.0, 0.0]]).with_tangents();
        assert_eq!(
            st.step(&mut c, &noise.increments(0), &em),
            Err(FlowError::EulerWithTangents)
        );
    }

    #[test]
    fn csv_dump_has_expected_columns() {
        let m = VelocityModel::baxendale_rozovskii();
        let cfg = EnsembleConfig {
            initial_positions: vec![vec![0.1, 0.2]],
            initial_directions: Some(vec![vec![1.0, 0.0]]),
            track_tangents: true,
            snapshot_every: 5,
            ..EnsembleConfig::positions_only(vec![], 0.1, StepParams::new(0.01, 1.0, 0.0), 1)
        };
        let snaps = run_ensemble(&m, &cfg).unwrap();
        let mut buf = Vec::new();
        write_snapshots_csv(&mut buf, &[(0, snaps)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "realization,t,particle,x1,x2,J11,J12,J21,J22,v1,v2,log_growth"
        );
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn grid_steps_validation() {
        assert_eq!(grid_steps(&[0.0, 0.5, 1.0], 0.1).unwrap(), vec![0, 5, 10]);
        assert!(grid_steps(&[0.5, 0.5], 0.1).is_err());
        assert!(grid_steps(&[0.55], 0.1).is_err());
        assert!(grid_steps(&[], 0.1).is_err());
    }

    #[test]
    fn step_count_validation() {
        assert_eq!(step_count(1.0, 1e-3).unwrap(), 1000);
        assert!(step_count(1.0, 0.3).is_err());
        assert!(step_count(-1.0, 0.1).is_err());
    }
}
