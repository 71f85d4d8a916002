//! Span, ellipticity and Lie-bracket checks for finite mode families.
//!
//! Bracket convention: `[f, g](x) = Dg(x) f(x) - Df(x) g(x)`. Only spans are
//! ever tested, so the opposite convention gives identical ranks.

use crate::fields::{FieldError, VelocityModel};
use crate::torus::{self, TWO_PI};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_RELATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ConditionError {
    #[error("two-point quantities are undefined on the diagonal x = y")]
    Diagonal,
    #[error("tangent direction must be a unit vector, |v| = {0}")]
    NotUnit(f64),
    #[error("dimension mismatch: model is {model}-dimensional, input has {input}")]
    Dimension { model: usize, input: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generators {
    RawFields,
    FieldsAndBrackets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanResult {
    pub points: Vec<Vec<f64>>,
    pub rank: usize,
    pub ambient_dim: usize,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
    pub generators: Generators,
}

/// Rank and extreme singular values of the row set `rows` (`n × dim`).
fn span_of(rows: &DMatrix<f64>) -> (usize, f64, f64) {
    let dim = rows.ncols();
    if rows.nrows() == 0 {
        return (0, 0.0, 0.0);
    }
    // singular values of the rows = sqrt(eigenvalues of the Gram matrix)
    let svd = rows.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.resize(dim, 0.0);
    let largest = sv[0];
    let rank = if largest == 0.0 {
        0
    } else {
        sv.iter()
            .filter(|&&s| s > RANK_RELATIVE_TOLERANCE * largest)
            .count()
    };
    (rank, sv[dim - 1].max(0.0), largest)
}

fn check_dim(model: &VelocityModel, x: &[f64]) -> Result<(), ConditionError> {
    if x.len() != model.dim() {
        return Err(ConditionError::Dimension {
            model: model.dim(),
            input: x.len(),
        });
    }
    Ok(())
}

/// `[σ_j, σ_k](x) = Dσ_k(x) σ_j(x) - Dσ_j(x) σ_k(x)`.
pub fn lie_bracket(
    model: &VelocityModel,
    j: usize,
    k: usize,
    x: &[f64],
) -> Result<Vec<f64>, ConditionError> {
    check_dim(model, x)?;
    let sj = DVector::from_vec(model.eval_sigma(j, x)?);
    let sk = DVector::from_vec(model.eval_sigma(k, x)?);
    let dj = model.eval_jacobian(j, x)?;
    let dk = model.eval_jacobian(k, x)?;
    Ok((dk * sj - dj * sk).iter().copied().collect())
}

/// The bracket of the two-point fields `σ ⊕ σ`, evaluated blockwise at `(x, y)`.
pub fn two_point_lie_bracket(
    model: &VelocityModel,
    j: usize,
    k: usize,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<f64>, ConditionError> {
    let mut out = lie_bracket(model, j, k, x)?;
    out.extend(lie_bracket(model, j, k, y)?);
    Ok(out)
}

fn all_brackets(model: &VelocityModel, x: &[f64]) -> Result<Vec<Vec<f64>>, ConditionError> {
    let n = model.n_modes();
    let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for j in 0..n {
        for k in (j + 1)..n {
            out.push(lie_bracket(model, j, k, x)?);
        }
    }
    Ok(out)
}

/// Hörmander span at one point: rank of `{σ_k(x)}`, augmented by first-order
/// brackets when the raw fields are rank deficient.
pub fn check_span_a(model: &VelocityModel, x: &[f64]) -> Result<SpanResult, ConditionError> {
    check_dim(model, x)?;
    let d = model.dim();
    let rows = model.sigma_matrix(x);
    let (rank, smin, smax) = span_of(&rows);
    if rank == d {
        return Ok(SpanResult {
            points: vec![x.to_vec()],
            rank,
            ambient_dim: d,
            smallest_singular_value: smin,
            largest_singular_value: smax,
            generators: Generators::RawFields,
        });
    }
    let brackets = all_brackets(model, x)?;
    let mut aug = DMatrix::zeros(rows.nrows() + brackets.len(), d);
    aug.rows_mut(0, rows.nrows()).copy_from(&rows);
    for (i, b) in brackets.iter().enumerate() {
        for c in 0..d {
            aug[(rows.nrows() + i, c)] = b[c];
        }
    }
    let (rank, smin, smax) = span_of(&aug);
    Ok(SpanResult {
        points: vec![x.to_vec()],
        rank,
        ambient_dim: d,
        smallest_singular_value: smin,
        largest_singular_value: smax,
        generators: Generators::FieldsAndBrackets,
    })
}

fn smallest_eigenvalue(gram: DMatrix<f64>) -> f64 {
    gram.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of `Σ_k (σ_k(x) ⊕ σ_k(y)) ⊗ (σ_k(x) ⊕ σ_k(y))`.
pub fn two_point_ellipticity(
    model: &VelocityModel,
    x: &[f64],
    y: &[f64],
) -> Result<f64, ConditionError> {
    check_dim(model, x)?;
    check_dim(model, y)?;
    if torus::distance(x, y) == 0.0 {
        return Err(ConditionError::Diagonal);
    }
    let d = model.dim();
    let sx = model.sigma_matrix(x);
    let sy = model.sigma_matrix(y);
    let mut rows = DMatrix::zeros(model.n_modes(), 2 * d);
    rows.columns_mut(0, d).copy_from(&sx);
    rows.columns_mut(d, d).copy_from(&sy);
    Ok(smallest_eigenvalue(rows.transpose() * rows).max(0.0))
}

/// `σ̃_k(x, v) = Dσ_k(x) v - v ⟨v, Dσ_k(x) v⟩`.
pub fn sigma_tilde(
    model: &VelocityModel,
    k: usize,
    x: &[f64],
    v: &[f64],
) -> Result<Vec<f64>, ConditionError> {
    let dv = model.eval_jacobian(k, x)? * DVector::from_column_slice(v);
    let radial: f64 = dv.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(dv.iter().zip(v).map(|(a, b)| a - radial * b).collect())
}

/// Orthonormal basis of `v^⊥` (Gram–Schmidt over the standard basis).
fn sphere_tangent_basis(v: &[f64]) -> Vec<DVector<f64>> {
    let d = v.len();
    let vv = DVector::from_column_slice(v);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(d - 1);
    for e in 0..d {
        if basis.len() == d - 1 {
            break;
        }
        let mut w = DVector::zeros(d);
        w[e] = 1.0;
        for _ in 0..2 {
            for b in std::iter::once(&vv).chain(basis.iter()) {
                let p = w.dot(b);
                w -= b * p;
            }
        }
        let n = w.norm();
        if n > 1e-6 {
            basis.push(w / n);
        }
    }
    basis
}

/// Smallest eigenvalue of the Gram matrix of `σ_k(x) ⊕ Π_{v^⊥} σ̃_k(x, v)`,
/// with the sphere part written in an orthonormal basis of `v^⊥`
/// (test space of dimension `2d - 1`).
pub fn tangent_ellipticity(
    model: &VelocityModel,
    x: &[f64],
    v: &[f64],
) -> Result<f64, ConditionError> {
    check_dim(model, x)?;
    check_dim(model, v)?;
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(ConditionError::NotUnit(norm));
    }
    let d = model.dim();
    let basis = sphere_tangent_basis(v);
    let mut rows = DMatrix::zeros(model.n_modes(), 2 * d - 1);
    for k in 0..model.n_modes() {
        let s = model.eval_sigma(k, x)?;
        let st = DVector::from_vec(sigma_tilde(model, k, x, v)?);
        for i in 0..d {
            rows[(k, i)] = s[i];
        }
        for (b, e) in basis.iter().enumerate() {
            rows[(k, d + b)] = st.dot(e);
        }
    }
    Ok(smallest_eigenvalue(rows.transpose() * rows).max(0.0))
}

/// Rank of the two-point span at `(x, y)`: the raw fields `σ_k ⊕ σ_k`, and
/// optionally every first-order two-point bracket.
pub fn two_point_span(
    model: &VelocityModel,
    x: &[f64],
    y: &[f64],
    generators: Generators,
) -> Result<SpanResult, ConditionError> {
    check_dim(model, x)?;
    check_dim(model, y)?;
    let d = model.dim();
    let n = model.n_modes();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut v = model.eval_sigma(k, x)?;
        v.extend(model.eval_sigma(k, y)?);
        vectors.push(v);
    }
    if generators == Generators::FieldsAndBrackets {
        for j in 0..n {
            for k in (j + 1)..n {
                vectors.push(two_point_lie_bracket(model, j, k, x, y)?);
            }
        }
    }
    let rows = DMatrix::from_fn(vectors.len(), 2 * d, |i, c| vectors[i][c]);
    let (rank, smin, smax) = span_of(&rows);
    Ok(SpanResult {
        points: vec![x.to_vec(), y.to_vec()],
        rank,
        ambient_dim: 2 * d,
        smallest_singular_value: smin,
        largest_singular_value: smax,
        generators,
    })
}

/// Two-point Hörmander span of the Baxendale–Rozovskii family: 4 raw fields
/// plus their 6 first-order brackets.
pub fn check_br_two_point_span(x: &[f64], y: &[f64]) -> Result<SpanResult, ConditionError> {
    two_point_span(
        &VelocityModel::baxendale_rozovskii(),
        x,
        y,
        Generators::FieldsAndBrackets,
    )
}

/// Distance from `x - y` to the lattice `πZ²`, i.e. to the set where the raw
/// Baxendale–Rozovskii two-point fields lose rank (includes the diagonal).
pub fn br_degeneracy_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let r = torus::wrap(a - b);
            let m = r.rem_euclid(PI);
            let e = m.min(PI - m);
            e * e
        })
        .sum::<f64>()
        .sqrt()
}

/// A uniform random point on `T^d` from the counter-based stream.
pub fn sample_point(seed: u64, index: u64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|j| TWO_PI * crate::noise::uniform(seed, 0xC0D1, index, j as u64))
        .collect()
}

/// A uniform random unit vector in `R^d`.
pub fn sample_direction(seed: u64, index: u64, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim)
        .map(|j| crate::noise::normal(seed, 0xD1EC, index, j as u64))
        .collect();
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.iter_mut().for_each(|c| *c /= n);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Phase, TrigMode};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn span_a_examples() {
        let k = VelocityModel::kraichnan(2, 4.0, 1).unwrap();
        for i in 0..20 {
            let x = sample_point(1, i, 2);
            assert_eq!(check_span_a(&k, &x).unwrap().rank, 2);
        }
        let br = VelocityModel::baxendale_rozovskii();
        let r = check_span_a(&br, &[0.0, 0.0]).unwrap();
        assert_eq!(r.rank, 2);
        assert_eq!(r.generators, Generators::RawFields);
        let single = br.subfamily(&[0]).unwrap();
        let r = check_span_a(&single, &[0.0, 0.0]).unwrap();
        assert_eq!(r.rank, 0);
        assert_eq!(r.generators, Generators::FieldsAndBrackets);
    }

    #[test]
    fn two_point_ellipticity_examples() {
        let br = VelocityModel::baxendale_rozovskii();
        let v = two_point_ellipticity(&br, &[0.0, 0.0], &[PI, PI]).unwrap();
        assert!(v.abs() < 1e-14);
        assert_eq!(
            two_point_ellipticity(&br, &[1.0, 1.0], &[1.0, 1.0]),
            Err(ConditionError::Diagonal)
        );
        let k = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        let mut checked = 0;
        let mut i = 0;
        while checked < 100 {
            let x = sample_point(2, i, 2);
            let y = sample_point(3, i, 2);
            i += 1;
            if torus::distance(&x, &y) < 0.1 {
                continue;
            }
            let e = two_point_ellipticity(&k, &x, &y).unwrap();
            assert!(e > 0.0);
            // swapping the points swaps the blocks, same spectrum
            let e2 = two_point_ellipticity(&k, &y, &x).unwrap();
            assert!((e - e2).abs() <= 1e-12 * e.max(1e-12));
            checked += 1;
        }
    }

    #[test]
    fn sigma_tilde_examples() {
        let br = VelocityModel::baxendale_rozovskii();
        let st = sigma_tilde(&br, 0, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(st, vec![0.0, 1.0]);
        let c = VelocityModel::constant(vec![0.3, -0.2]);
        let st = sigma_tilde(&c, 0, &[1.0, 2.0], &[0.6, 0.8]).unwrap();
        assert!(st.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn tangent_ellipticity_positive_for_kraichnan() {
        let k = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        for i in 0..100 {
            let x = sample_point(4, i, 2);
            let v = sample_direction(5, i, 2);
            assert!(tangent_ellipticity(&k, &x, &v).unwrap() > 0.0);
        }
        assert!(matches!(
            tangent_ellipticity(&k, &[0.0, 0.0], &[1.0, 1.0]),
            Err(ConditionError::NotUnit(_))
        ));
    }

    #[test]
    fn br_bracket_matches_closed_form() {
        let br = VelocityModel::baxendale_rozovskii();
        for i in 0..50 {
            let x = sample_point(6, i, 2);
            let b = lie_bracket(&br, 0, 2, &x).unwrap();
            let expect = [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin()];
            // convention-independent: equal up to a global sign
            let plus = (b[0] - expect[0]).abs().max((b[1] - expect[1]).abs());
            let minus = (b[0] + expect[0]).abs().max((b[1] + expect[1]).abs());
            assert!(plus.min(minus) < 1e-14);
        }
    }

    #[test]
    fn bracket_antisymmetry_and_trivial_cases() {
        let k = VelocityModel::kraichnan(2, 4.0, 2).unwrap();
        for i in 0..100 {
            let x = sample_point(7, i, 2);
            let a = (i as usize * 7) % k.n_modes();
            let b = (i as usize * 13 + 1) % k.n_modes();
            let ab = lie_bracket(&k, a, b, &x).unwrap();
            let ba = lie_bracket(&k, b, a, &x).unwrap();
            for c in 0..2 {
                assert!((ab[c] + ba[c]).abs() < 1e-12);
            }
            assert!(lie_bracket(&k, a, a, &x).unwrap().iter().all(|v| *v == 0.0));
        }
        let consts = VelocityModel::custom(
            2,
            vec![
                TrigMode {
                    wavevector: vec![0, 0],
                    polarization: vec![1.0, 0.0],
                    amplitude: 1.0,
                    phase: Phase::Cos,
                },
                TrigMode {
                    wavevector: vec![0, 0],
                    polarization: vec![0.0, 2.0],
                    amplitude: 1.0,
                    phase: Phase::Cos,
                },
            ],
        )
        .unwrap();
        assert_eq!(lie_bracket(&consts, 0, 1, &[0.5, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn brackets_match_finite_differences() {
        // [f, g] = Dg f - Df g with Jacobians from central differences of σ
        let h = 1e-4;
        let k = VelocityModel::kraichnan(2, 4.0, 2).unwrap();
        let fd_jac = |m: usize, x: &[f64]| {
            let mut jac = [[0.0; 2]; 2];
            for j in 0..2 {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += h;
                xm[j] -= h;
                let sp = k.eval_sigma(m, &xp).unwrap();
                let sm = k.eval_sigma(m, &xm).unwrap();
                for i in 0..2 {
                    jac[i][j] = (sp[i] - sm[i]) / (2.0 * h);
                }
            }
            jac
        };
        for i in 0..100 {
            let x = sample_point(8, i, 2);
            let (a, b) = ((i as usize) % k.n_modes(), (i as usize * 5 + 3) % k.n_modes());
            let (sa, sb) = (k.eval_sigma(a, &x).unwrap(), k.eval_sigma(b, &x).unwrap());
            let (ja, jb) = (fd_jac(a, &x), fd_jac(b, &x));
            let exact = lie_bracket(&k, a, b, &x).unwrap();
            for r in 0..2 {
                let fd = (jb[r][0] * sa[0] + jb[r][1] * sa[1]) - (ja[r][0] * sb[0] + ja[r][1] * sb[1]);
                assert!((fd - exact[r]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn br_two_point_span_examples() {
        let r = check_br_two_point_span(&[0.3, 1.1], &[2.0, 0.7]).unwrap();
        assert_eq!(r.rank, 4);
        let r = check_br_two_point_span(&[0.3, 1.1], &[0.3, 1.1]).unwrap();
        assert_eq!(r.rank, 2);
        let br = VelocityModel::baxendale_rozovskii();
        let raw = two_point_span(&br, &[0.0, 0.0], &[PI, PI], Generators::RawFields).unwrap();
        assert_eq!(raw.rank, 2);
        let full = check_br_two_point_span(&[0.0, 0.0], &[PI, PI]).unwrap();
        assert_eq!(full.rank, 4);
        let generic = two_point_span(&br, &[0.3, 1.1], &[2.0, 0.7], Generators::RawFields).unwrap();
        assert_eq!(generic.rank, 4);
    }

    #[test]
    fn degeneracy_distance() {
        assert!(br_degeneracy_distance(&[0.0, 0.0], &[PI, PI]) < 1e-15);
        assert!(br_degeneracy_distance(&[1.0, 2.0], &[1.0, 2.0]) == 0.0);
        let dd = br_degeneracy_distance(&[FRAC_PI_2, 0.0], &[0.0, 0.0]);
        assert!((dd - FRAC_PI_2).abs() < 1e-15);
    }
}
