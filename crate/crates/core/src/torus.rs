//! Flat torus `[0, 2π)^d` with the wrapped Euclidean distance.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// Injectivity radius of the flat torus of side 2π.
pub const INJECTIVITY_RADIUS: f64 = PI;

/// Reduce a coordinate into `[0, 2π)`.
#[inline]
pub fn wrap(c: f64) -> f64 {
    let w = c.rem_euclid(TWO_PI);
    // rem_euclid rounds tiny negatives up to exactly 2π
    if w >= TWO_PI {
        0.0
    } else {
        w
    }
}

/// Reduce a difference into `[-π, π)`.
#[inline]
pub fn wrap_signed(c: f64) -> f64 {
    let w = wrap(c + PI) - PI;
    if w >= PI {
        w - TWO_PI
    } else {
        w
    }
}

#[inline]
pub fn wrap_in_place(x: &mut [f64]) {
    for c in x.iter_mut() {
        *c = wrap(*c);
    }
}

/// Coordinatewise wrapped displacement `x - y`, each entry in `[-π, π)`.
pub fn displacement(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| wrap_signed(a - b)).collect()
}

/// Geodesic distance on the flat torus.
#[inline]
pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let r = wrap_signed(a - b);
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// A point of `T^d`. Coordinates are wrapped on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        let mut c = coords.into();
        wrap_in_place(&mut c);
        TorusPoint(c)
    }

    pub fn origin(dim: usize) -> Self {
        TorusPoint(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Translate by `delta` and wrap.
    pub fn shifted(&self, delta: &[f64]) -> Self {
        TorusPoint::new(self.0.iter().zip(delta).map(|(a, b)| a + b).collect::<Vec<_>>())
    }

    pub fn distance(&self, other: &TorusPoint) -> f64 {
        distance(&self.0, &other.0)
    }
}

impl AsRef<[f64]> for TorusPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
