//! Velocity mode families `(σ_k)` on `T^d`.
//!
//! Every built-in mode is a single Fourier component
//! `σ(x) = amplitude · a · trig(z·x)` with `trig ∈ {cos, sin}`, so values,
//! Jacobians and Hessians are exact closed-form trigonometric expressions.
//! A constant field is the `z = 0`, cosine-phase special case.

use crate::noise;
use crate::torus::TWO_PI;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("Kraichnan roughness alpha must exceed 2, got {0}")]
    AlphaTooSmall(f64),
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("zmax must be at least 1")]
    EmptyTruncation,
    #[error("mode index {index} out of range for a family of {len} modes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("custom mode {index}: {reason}")]
    InvalidMode { index: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Cos,
    Sin,
}

/// `amplitude · polarization · trig(wavevector · x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub wavevector: Vec<i64>,
    pub polarization: Vec<f64>,
    pub amplitude: f64,
    pub phase: Phase,
}

impl TrigMode {
    #[inline]
    fn angle(&self, x: &[f64]) -> f64 {
        self.wavevector
            .iter()
            .zip(x)
            .map(|(&z, &c)| z as f64 * c)
            .sum()
    }

    /// (trig, trig') at the current angle.
    #[inline]
    fn trig_pair(&self, x: &[f64]) -> (f64, f64) {
        let (s, c) = self.angle(x).sin_cos();
        match self.phase {
            Phase::Cos => (c, -s),
            Phase::Sin => (s, c),
        }
    }

    /// ⟨a, z⟩; zero for divergence-free modes.
    pub fn transversality(&self) -> f64 {
        self.polarization
            .iter()
            .zip(&self.wavevector)
            .map(|(a, &z)| a * z as f64)
            .sum()
    }
}

/// Which family a model belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    KraichnanTorus { d: usize, alpha: f64, zmax: usize },
    BaxendaleRozovskii,
    Custom,
}

/// Structured-text description of a model, used by configs and manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Kraichnan {
        d: usize,
        alpha: f64,
        zmax: usize,
    },
    Br,
    Custom {
        d: usize,
        modes: Vec<TrigMode>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<VelocityModel, FieldError> {
        match self {
            ModelSpec::Kraichnan { d, alpha, zmax } => VelocityModel::kraichnan(*d, *alpha, *zmax),
            ModelSpec::Br => Ok(VelocityModel::baxendale_rozovskii()),
            ModelSpec::Custom { d, modes } => VelocityModel::custom(*d, modes.clone()),
        }
    }
}

/// Scratch buffers for the hot evaluation path.
#[derive(Debug, Clone, Default)]
pub struct EvalScratch {
    // e^{i n x_j} for n = -m_j..=m_j, dimension blocks back to back
    powers: Vec<(f64, f64)>,
}

/// An immutable family of analytic velocity modes.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    kind: ModelKind,
    dim: usize,
    modes: Vec<TrigMode>,
    // flattened copies for the inner loops
    coef: Vec<f64>,
    cos_phase: Vec<bool>,
    zmax_dim: Vec<usize>,
    // consecutive modes sharing a wavevector form a group
    group_start: Vec<usize>,
    group_z: Vec<f64>,
    group_pidx: Vec<usize>,
}

impl VelocityModel {
    fn from_modes(kind: ModelKind, dim: usize, modes: Vec<TrigMode>) -> Self {
        let mut coef = Vec::with_capacity(modes.len() * dim);
        let mut zmax_dim = vec![0usize; dim];
        for m in &modes {
            coef.extend(m.polarization.iter().map(|a| a * m.amplitude));
            for (j, &z) in m.wavevector.iter().enumerate() {
                zmax_dim[j] = zmax_dim[j].max(z.unsigned_abs() as usize);
            }
        }
        let mut offset = Vec::with_capacity(dim);
        let mut acc = 0;
        for &m in &zmax_dim {
            offset.push(acc + m);
            acc += 2 * m + 1;
        }
        let mut group_start = Vec::new();
        let mut group_z = Vec::new();
        let mut group_pidx = Vec::new();
        for (k, m) in modes.iter().enumerate() {
            if k == 0 || modes[k - 1].wavevector != m.wavevector {
                group_start.push(k);
                for (j, &z) in m.wavevector.iter().enumerate() {
                    group_z.push(z as f64);
                    group_pidx.push((offset[j] as i64 + z) as usize);
                }
            }
        }
        group_start.push(modes.len());
        let cos_phase = modes.iter().map(|m| m.phase == Phase::Cos).collect();
        VelocityModel {
            kind,
            dim,
            modes,
            coef,
            cos_phase,
            zmax_dim,
            group_start,
            group_z,
            group_pidx,
        }
    }

    /// Kraichnan modes on `T^d` truncated to `|z|_∞ ≤ zmax`.
    ///
    /// For each pair `{z, -z}` (with `z` lexicographically positive) and each
    /// polarization `a^ℓ ⊥ z` the family holds a cosine and a sine mode with
    /// amplitude `1/(2|z|^{(d+α)/2})`, which makes the mode-sum covariance
    /// equal to `Σ_z [δ_ij - z_i z_j/|z|²] cos(z·r) / (8|z|^{d+α})`.
    pub fn kraichnan(d: usize, alpha: f64, zmax: usize) -> Result<Self, FieldError> {
        if d < 2 {
            return Err(FieldError::DimensionTooSmall(d));
        }
        // also rejects NaN
        if !(alpha > 2.0) {
            return Err(FieldError::AlphaTooSmall(alpha));
        }
        if zmax == 0 {
            return Err(FieldError::EmptyTruncation);
        }
        let mut modes = Vec::new();
        for z in positive_half_lattice(d, zmax as i64) {
            let norm2: i64 = z.iter().map(|c| c * c).sum();
            let norm = (norm2 as f64).sqrt();
            let amplitude = 0.5 / norm.powf(0.5 * (d as f64 + alpha));
            for a in transverse_basis(&z) {
                for phase in [Phase::Cos, Phase::Sin] {
                    modes.push(TrigMode {
                        wavevector: z.clone(),
                        polarization: a.clone(),
                        amplitude,
                        phase,
                    });
                }
            }
        }
        Ok(Self::from_modes(
            ModelKind::KraichnanTorus { d, alpha, zmax },
            d,
            modes,
        ))
    }

    /// The four Baxendale–Rozovskii fields on `T²`:
    /// `(0, sin x¹)`, `(0, cos x¹)`, `(sin x², 0)`, `(cos x², 0)`.
    pub fn baxendale_rozovskii() -> Self {
        let mode = |z: [i64; 2], a: [f64; 2], phase| TrigMode {
            wavevector: z.to_vec(),
            polarization: a.to_vec(),
            amplitude: 1.0,
            phase,
        };
        let modes = vec![
            mode([1, 0], [0.0, 1.0], Phase::Sin),
            mode([1, 0], [0.0, 1.0], Phase::Cos),
            mode([0, 1], [1.0, 0.0], Phase::Sin),
            mode([0, 1], [1.0, 0.0], Phase::Cos),
        ];
        Self::from_modes(ModelKind::BaxendaleRozovskii, 2, modes)
    }

    pub fn custom(dim: usize, modes: Vec<TrigMode>) -> Result<Self, FieldError> {
        if dim == 0 {
            return Err(FieldError::DimensionTooSmall(dim));
        }
        for (index, m) in modes.iter().enumerate() {
            if m.wavevector.len() != dim || m.polarization.len() != dim {
                return Err(FieldError::InvalidMode {
                    index,
                    reason: format!("expected {dim} components"),
                });
            }
            if !m.amplitude.is_finite() || m.polarization.iter().any(|a| !a.is_finite()) {
                return Err(FieldError::InvalidMode {
                    index,
                    reason: "non-finite coefficient".into(),
                });
            }
        }
        Ok(Self::from_modes(ModelKind::Custom, dim, modes))
    }

    /// A single constant field, handy as a degenerate reference model.
    pub fn constant(vector: Vec<f64>) -> Self {
        let dim = vector.len();
        Self::from_modes(
            ModelKind::Custom,
            dim,
            vec![TrigMode {
                wavevector: vec![0; dim],
                polarization: vector,
                amplitude: 1.0,
                phase: Phase::Cos,
            }],
        )
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[TrigMode] {
        &self.modes
    }

    /// Same model restricted to the listed modes (in the given order).
    pub fn subfamily(&self, indices: &[usize]) -> Result<Self, FieldError> {
        let modes = indices
            .iter()
            .map(|&i| self.mode(i).cloned())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_modes(ModelKind::Custom, self.dim, modes))
    }

    fn mode(&self, k: usize) -> Result<&TrigMode, FieldError> {
        self.modes.get(k).ok_or(FieldError::IndexOutOfRange {
            index: k,
            len: self.modes.len(),
        })
    }

    /// `σ_k(x)`.
    pub fn eval_sigma(&self, k: usize, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        let m = self.mode(k)?;
        let (t, _) = m.trig_pair(x);
        Ok(m.polarization.iter().map(|a| m.amplitude * a * t).collect())
    }

    /// `Dσ_k(x)` with entry `(i, j) = ∂σ_k^i / ∂x^j`.
    pub fn eval_jacobian(&self, k: usize, x: &[f64]) -> Result<DMatrix<f64>, FieldError> {
        let m = self.mode(k)?;
        let (_, dt) = m.trig_pair(x);
        let d = self.dim;
        Ok(DMatrix::from_fn(d, d, |i, j| {
            m.amplitude * dt * m.polarization[i] * m.wavevector[j] as f64
        }))
    }

    /// `D²σ_k(x)`: entry `[i][(j, l)] = ∂²σ_k^i / ∂x^j ∂x^l`.
    pub fn eval_hessian(&self, k: usize, x: &[f64]) -> Result<Vec<DMatrix<f64>>, FieldError> {
        let m = self.mode(k)?;
        let (t, _) = m.trig_pair(x);
        let d = self.dim;
        Ok((0..d)
            .map(|i| {
                DMatrix::from_fn(d, d, |j, l| {
                    -m.amplitude
                        * t
                        * m.polarization[i]
                        * (m.wavevector[j] * m.wavevector[l]) as f64
                })
            })
            .collect())
    }

    /// All `σ_k(x)` as rows of a `K × d` matrix.
    pub fn sigma_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_modes(), self.dim);
        for (k, m) in self.modes.iter().enumerate() {
            let (t, _) = m.trig_pair(x);
            for i in 0..self.dim {
                out[(k, i)] = m.amplitude * m.polarization[i] * t;
            }
        }
        out
    }

    /// `Σ_k σ_k(x) ⊗ σ_k(y)`.
    pub fn covariance(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let sx = self.sigma_matrix(x);
        let sy = self.sigma_matrix(y);
        sx.transpose() * sy
    }

    /// Pointwise RMS speed `(Σ_k |σ_k(x)|²)^{1/2}`.
    pub fn rms_speed(&self, x: &[f64]) -> f64 {
        self.sigma_matrix(x).norm()
    }

    pub fn new_scratch(&self) -> EvalScratch {
        EvalScratch {
            powers: vec![(0.0, 0.0); self.zmax_dim.iter().map(|m| 2 * m + 1).sum()],
        }
    }

    fn fill_powers(&self, x: &[f64], scratch: &mut EvalScratch) {
        let mut base = 0;
        for (j, &m) in self.zmax_dim.iter().enumerate() {
            let table = &mut scratch.powers[base..base + 2 * m + 1];
            base += 2 * m + 1;
            table[m] = (1.0, 0.0);
            if m == 0 {
                continue;
            }
            let (s, c) = x[j].sin_cos();
            let (mut re, mut im) = (1.0, 0.0);
            for n in 1..=m {
                let nre = re * c - im * s;
                im = re * s + im * c;
                re = nre;
                table[m + n] = (re, im);
                table[m - n] = (re, -im);
            }
        }
    }

    /// `(cos z·x, sin z·x)` of group `g` from the filled power table.
    #[inline]
    fn group_phase(&self, g: usize, scratch: &EvalScratch) -> (f64, f64) {
        let d = self.dim;
        let (mut re, mut im) = (1.0, 0.0);
        for &p in &self.group_pidx[g * d..(g + 1) * d] {
            let (pr, pi) = scratch.powers[p];
            let nre = re * pr - im * pi;
            im = re * pi + im * pr;
            re = nre;
        }
        (re, im)
    }

    /// `vel += Σ_k w_k σ_k(x)`.
    pub fn accumulate_velocity(
        &self,
        x: &[f64],
        weights: &[f64],
        vel: &mut [f64],
        scratch: &mut EvalScratch,
    ) {
        let d = self.dim;
        self.fill_powers(x, scratch);
        for g in 0..self.group_start.len() - 1 {
            let (c, s) = self.group_phase(g, scratch);
            for k in self.group_start[g]..self.group_start[g + 1] {
                let t = weights[k] * if self.cos_phase[k] { c } else { s };
                for (v, a) in vel.iter_mut().zip(&self.coef[k * d..(k + 1) * d]) {
                    *v += t * a;
                }
            }
        }
    }

    /// `vel += Σ_k w_k σ_k(x)` and `jac += Σ_k w_k Dσ_k(x)` (row-major `d × d`).
    pub fn accumulate_velocity_jacobian(
        &self,
        x: &[f64],
        weights: &[f64],
        vel: &mut [f64],
        jac: &mut [f64],
        scratch: &mut EvalScratch,
    ) {
        let d = self.dim;
        if d == 2 {
            return self.accumulate_velocity_jacobian_2d(x, weights, vel, jac, scratch);
        }
        self.fill_powers(x, scratch);
        let mut grad = vec![0.0; d];
        for g in 0..self.group_start.len() - 1 {
            let (c, s) = self.group_phase(g, scratch);
            grad.iter_mut().for_each(|v| *v = 0.0);
            for k in self.group_start[g]..self.group_start[g + 1] {
                let w = weights[k];
                let (t, dt) = if self.cos_phase[k] { (c, -s) } else { (s, c) };
                let a = &self.coef[k * d..(k + 1) * d];
                for i in 0..d {
                    vel[i] += w * t * a[i];
                    grad[i] += w * dt * a[i];
                }
            }
            // Dσ = (∂ amplitude) a zᵀ, shared by the whole group
            let z = &self.group_z[g * d..(g + 1) * d];
            for i in 0..d {
                for j in 0..d {
                    jac[i * d + j] += grad[i] * z[j];
                }
            }
        }
    }

    fn accumulate_velocity_jacobian_2d(
        &self,
        x: &[f64],
        weights: &[f64],
        vel: &mut [f64],
        jac: &mut [f64],
        scratch: &mut EvalScratch,
    ) {
        self.fill_powers(x, scratch);
        let (mut v0, mut v1) = (0.0, 0.0);
        let (mut j00, mut j01, mut j10, mut j11) = (0.0, 0.0, 0.0, 0.0);
        for g in 0..self.group_start.len() - 1 {
            let (c, s) = self.group_phase(g, scratch);
            let (mut g0, mut g1) = (0.0, 0.0);
            for k in self.group_start[g]..self.group_start[g + 1] {
                let w = weights[k];
                let (t, dt) = if self.cos_phase[k] { (c, -s) } else { (s, c) };
                let (a0, a1) = (self.coef[2 * k], self.coef[2 * k + 1]);
                v0 += w * t * a0;
                v1 += w * t * a1;
                g0 += w * dt * a0;
                g1 += w * dt * a1;
            }
            let (z0, z1) = (self.group_z[2 * g], self.group_z[2 * g + 1]);
            j00 += g0 * z0;
            j01 += g0 * z1;
            j10 += g1 * z0;
            j11 += g1 * z1;
        }
        vel[0] += v0;
        vel[1] += v1;
        jac[0] += j00;
        jac[1] += j01;
        jac[2] += j10;
        jac[3] += j11;
    }
}

/// Lexicographically positive lattice points with `|z|_∞ ≤ zmax`, in lexicographic order.
fn positive_half_lattice(d: usize, zmax: i64) -> Vec<Vec<i64>> {
    let side = (2 * zmax + 1) as usize;
    let total = side.pow(d as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut rem = idx;
        let mut z = vec![0i64; d];
        for j in (0..d).rev() {
            z[j] = (rem % side) as i64 - zmax;
            rem /= side;
        }
        if let Some(first) = z.iter().find(|&&c| c != 0) {
            if *first > 0 {
                out.push(z);
            }
        }
    }
    out
}

/// Orthonormal basis of `z^⊥`.
///
/// d = 2 uses `(-z₂, z₁)/|z|`; higher dimensions run Gram–Schmidt over the
/// standard basis in index order, skipping vectors too close to span.
pub fn transverse_basis(z: &[i64]) -> Vec<Vec<f64>> {
    let d = z.len();
    let zf: Vec<f64> = z.iter().map(|&c| c as f64).collect();
    let norm = zf.iter().map(|c| c * c).sum::<f64>().sqrt();
    if d == 2 {
        return vec![vec![-zf[1] / norm, zf[0] / norm]];
    }
    let zhat: Vec<f64> = zf.iter().map(|c| c / norm).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for e in 0..d {
        if basis.len() == d - 1 {
            break;
        }
        let mut v = vec![0.0; d];
        v[e] = 1.0;
        for b in std::iter::once(&zhat).chain(basis.iter()) {
            let p: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= p * bi;
            }
        }
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n < 1e-6 {
            continue;
        }
        // second pass for orthogonality to round-off
        for b in std::iter::once(&zhat).chain(basis.iter()) {
            let p: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum::<f64>() / n;
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= p * n * bi;
            }
        }
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        basis.push(v.into_iter().map(|c| c / n).collect());
    }
    basis
}

/// Truncated closed-form Kraichnan covariance
/// `Σ_{0<|z|_∞≤zmax} [δ_ij - z_i z_j/|z|²] cos(z·r) / (8|z|^{d+α})`.
pub fn covariance_closed_form(d: usize, alpha: f64, zmax: usize, r: &[f64]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(d, d);
    let zmax = zmax as i64;
    let side = (2 * zmax + 1) as usize;
    for idx in 0..side.pow(d as u32) {
        let mut rem = idx;
        let mut z = vec![0i64; d];
        for j in (0..d).rev() {
            z[j] = (rem % side) as i64 - zmax;
            rem /= side;
        }
        let norm2: i64 = z.iter().map(|c| c * c).sum();
        if norm2 == 0 {
            continue;
        }
        let n2 = norm2 as f64;
        let phase: f64 = z.iter().zip(r).map(|(&a, b)| a as f64 * b).sum();
        let w = phase.cos() / (8.0 * n2.powf(0.5 * (d as f64 + alpha)));
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                out[(i, j)] += w * (delta - (z[i] * z[j]) as f64 / n2);
            }
        }
    }
    out
}

/// One sampled measurement of a condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub points: Vec<Vec<f64>>,
    pub value: f64,
    pub threshold: f64,
    pub ok: bool,
}

/// Outcome of a sampled condition check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub check: String,
    pub records: Vec<ConditionRecord>,
    pub min: f64,
    pub max: f64,
    pub pass: bool,
}

impl ConditionReport {
    pub fn from_records(check: impl Into<String>, records: Vec<ConditionRecord>) -> Self {
        let min = records.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
        let max = records
            .iter()
            .map(|r| r.value)
            .fold(f64::NEG_INFINITY, f64::max);
        let pass = records.iter().all(|r| r.ok);
        ConditionReport {
            check: check.into(),
            records,
            min,
            max,
            pass,
        }
    }
}

/// Summability data for the `|z|_∞ = n` shells of a Fourier family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSum {
    pub shell: usize,
    /// `Σ_k ‖σ_k‖²_∞ + ‖Dσ_k‖²_∞ + ‖D²σ_k‖_∞ ‖σ_k‖_∞` over the shell.
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub divergence: ConditionReport,
    pub self_advection: ConditionReport,
    pub shells: Vec<ShellSum>,
    /// Least-squares slope of `log sum` against `log n` (Kraichnan only).
    pub shell_slope: Option<f64>,
    /// Analytic bound on the discarded shells `n > zmax` (Kraichnan only).
    pub tail_bound: Option<f64>,
}

impl StructuralReport {
    pub fn pass(&self) -> bool {
        self.divergence.pass && self.self_advection.pass
    }
}

pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Sample `nsamples` uniform points and measure `max_k |div σ_k|` and
/// `max_k |⟨Dσ_k, σ_k⟩|` there; add shell sums for Fourier families.
pub fn structural_checks(model: &VelocityModel, nsamples: usize, seed: u64) -> StructuralReport {
    let d = model.dim();
    let mut div_records = Vec::with_capacity(nsamples);
    let mut adv_records = Vec::with_capacity(nsamples);
    for s in 0..nsamples {
        let x: Vec<f64> = (0..d)
            .map(|j| TWO_PI * noise::uniform(seed, 0xF1E1D, s as u64, j as u64))
            .collect();
        let mut max_div: f64 = 0.0;
        let mut max_adv: f64 = 0.0;
        for k in 0..model.n_modes() {
            let jac = model.eval_jacobian(k, &x).expect("index in range");
            let sig = model.eval_sigma(k, &x).expect("index in range");
            max_div = max_div.max(jac.trace().abs());
            let adv = &jac * nalgebra::DVector::from_column_slice(&sig);
            max_adv = max_adv.max(adv.amax());
        }
        div_records.push(ConditionRecord {
            points: vec![x.clone()],
            value: max_div,
            threshold: IDENTITY_TOLERANCE,
            ok: max_div <= IDENTITY_TOLERANCE,
        });
        adv_records.push(ConditionRecord {
            points: vec![x],
            value: max_adv,
            threshold: IDENTITY_TOLERANCE,
            ok: max_adv <= IDENTITY_TOLERANCE,
        });
    }

    let mut shell_map: std::collections::BTreeMap<usize, f64> = Default::default();
    for m in model.modes() {
        let n = m.wavevector.iter().map(|z| z.unsigned_abs()).max().unwrap_or(0) as usize;
        let zn = m
            .wavevector
            .iter()
            .map(|&z| (z * z) as f64)
            .sum::<f64>()
            .sqrt();
        let an = m.polarization.iter().map(|a| a * a).sum::<f64>().sqrt() * m.amplitude.abs();
        // sup norms of a·trig, a zᵀ·trig', a⊗z⊗z·trig
        let s0 = an;
        let s1 = an * zn;
        let s2 = an * zn * zn;
        *shell_map.entry(n).or_default() += s0 * s0 + s1 * s1 + s2 * s0;
    }
    let shells: Vec<ShellSum> = shell_map
        .into_iter()
        .map(|(shell, sum)| ShellSum { shell, sum })
        .collect();

    let (shell_slope, tail_bound) = match model.kind() {
        ModelKind::KraichnanTorus { d, alpha, zmax } => {
            let pts: Vec<(f64, f64)> = shells
                .iter()
                .filter(|s| s.shell > 0 && s.sum > 0.0)
                .map(|s| ((s.shell as f64).ln(), s.sum.ln()))
                .collect();
            let slope = crate::stats::linear_fit(&pts).map(|f| f.slope);
            (slope, Some(kraichnan_tail_bound(*d, *alpha, *zmax)))
        }
        _ => (None, None),
    };

    StructuralReport {
        divergence: ConditionReport::from_records("divergence", div_records),
        self_advection: ConditionReport::from_records("self-advection", adv_records),
        shells,
        shell_slope,
        tail_bound,
    }
}

/// Bound on `Σ_{n>zmax}` of the shell sums of the untruncated Kraichnan family.
///
/// A shell holds `(2n+1)^d - (2n-1)^d ≤ 2d(3n)^{d-1}` wavevectors, each with
/// `d-1` modes of squared amplitude `1/(4|z|^{d+α}) ≤ 1/(4n^{d+α})` and
/// `1 + 2|z|² ≤ (1+2d)n²`, so the shell sum is at most `B n^{1-α}` and the tail
/// at most `B zmax^{2-α}/(α-2)`.
pub fn kraichnan_tail_bound(d: usize, alpha: f64, zmax: usize) -> f64 {
    let df = d as f64;
    let b = (df - 1.0) * 2.0 * df * 3f64.powf(df - 1.0) * (1.0 + 2.0 * df) / 4.0;
    b * (zmax as f64).powf(2.0 - alpha) / (alpha - 2.0)
}
