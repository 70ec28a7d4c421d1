//! Eisenstein integers `a + bω` with `ω = exp(2πi/3)` and the rings of
//! lattice points sharing one squared magnitude.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// The primitive cube root of unity `exp(2πi/3)`.
pub fn omega() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI / 3.0)
}

/// A point `a + bω` of the hexagonal lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EisensteinInt {
    pub a: i64,
    pub b: i64,
}

impl EisensteinInt {
    pub const fn new(a: i64, b: i64) -> Self {
        Self { a, b }
    }

    /// Squared magnitude `a² − ab + b²`.
    pub fn norm(self) -> u64 {
        let (a, b) = (self.a as i128, self.b as i128);
        (a * a - a * b + b * b) as u64
    }

    pub fn to_complex(self) -> Complex64 {
        // a + b(-1/2 + i√3/2), written out to avoid rounding in cos(2π/3)
        Complex64::new(
            self.a as f64 - 0.5 * self.b as f64,
            0.5 * 3f64.sqrt() * self.b as f64,
        )
    }

    /// Multiplication by ω: `(a + bω)ω = −b + (a − b)ω`.
    pub fn mul_omega(self) -> Self {
        Self::new(-self.b, self.a - self.b)
    }
}

impl std::ops::Neg for EisensteinInt {
    type Output = Self;

    fn neg(self) -> Self {
        Self::new(-self.a, -self.b)
    }
}

/// All lattice points at squared radius `radius_sq`, sorted by `(a, b)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ring {
    pub radius_sq: u64,
    pub points: Vec<EisensteinInt>,
}

impl Ring {
    pub fn radius(&self) -> f64 {
        (self.radius_sq as f64).sqrt()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

/// Exhaustive scan over `|a|, |b| ≤ ceil(2·sqrt(radius_sq))`.
///
/// The norm form satisfies `a² − ab + b² ≥ (3/4)·max(a, b)²`, so the box
/// contains every solution. An unrepresentable norm yields an empty ring.
pub fn enumerate_ring(radius_sq: u64) -> Ring {
    let bound = (2.0 * (radius_sq as f64).sqrt()).ceil() as i64;
    let mut points = Vec::new();
    for a in -bound..=bound {
        for b in -bound..=bound {
            let e = EisensteinInt::new(a, b);
            if e.norm() == radius_sq {
                points.push(e);
            }
        }
    }
    Ring { radius_sq, points }
}

/// Non-empty rings with `1 ≤ radius_sq ≤ max_radius_sq`, ascending.
pub fn list_rings(max_radius_sq: u64) -> Vec<Ring> {
    (1..=max_radius_sq)
        .map(enumerate_ring)
        .filter(|r| !r.is_empty())
        .collect()
}
