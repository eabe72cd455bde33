//! Trigonometric polynomials on the circle `[0, 1)`.
//!
//! Everything in this crate that needs a smooth function (map lifts, roof
//! functions, perturbation bases) is built from these, because derivatives
//! and modulus-of-derivative bounds are exactly computable from the
//! coefficient lists.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// `constant + Σ_k sin[k-1]·sin(2πkx) + cos[k-1]·cos(2πkx)`, with `x` in
/// units of full turns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    #[serde(default)]
    pub constant: f64,
    /// Coefficient of `sin(2πkx)` at index `k - 1`.
    #[serde(default)]
    pub sin: Vec<f64>,
    /// Coefficient of `cos(2πkx)` at index `k - 1`.
    #[serde(default)]
    pub cos: Vec<f64>,
}

impl TrigPoly {
    pub fn new(constant: f64, sin: Vec<f64>, cos: Vec<f64>) -> Self {
        Self { constant, sin, cos }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { constant: c, sin: Vec::new(), cos: Vec::new() }
    }

    /// A single `a·sin(2πkx)` term.
    pub fn sine(k: usize, a: f64) -> Self {
        assert!(k >= 1, "frequency must be at least 1");
        let mut sin = vec![0.0; k];
        sin[k - 1] = a;
        Self { constant: 0.0, sin, cos: Vec::new() }
    }

    /// A single `b·cos(2πkx)` term.
    pub fn cosine(k: usize, b: f64) -> Self {
        assert!(k >= 1, "frequency must be at least 1");
        let mut cos = vec![0.0; k];
        cos[k - 1] = b;
        Self { constant: 0.0, sin: Vec::new(), cos }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0
            && self.sin.iter().all(|&a| a == 0.0)
            && self.cos.iter().all(|&b| b == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.constant;
        for (i, &a) in self.sin.iter().enumerate() {
            if a != 0.0 {
                v += a * (TAU * (i + 1) as f64 * x).sin();
            }
        }
        for (i, &b) in self.cos.iter().enumerate() {
            if b != 0.0 {
                v += b * (TAU * (i + 1) as f64 * x).cos();
            }
        }
        v
    }

    /// Term-wise derivative.
    pub fn deriv(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for (i, &a) in self.sin.iter().enumerate() {
            if a != 0.0 {
                let w = TAU * (i + 1) as f64;
                v += a * w * (w * x).cos();
            }
        }
        for (i, &b) in self.cos.iter().enumerate() {
            if b != 0.0 {
                let w = TAU * (i + 1) as f64;
                v -= b * w * (w * x).sin();
            }
        }
        v
    }

    /// `Σ_k 2πk(|a_k| + |b_k|)`: bounds `|p'|` everywhere.
    pub fn deriv_coeff_bound(&self) -> f64 {
        let mut v = 0.0;
        for (i, &a) in self.sin.iter().enumerate() {
            v += a.abs() * TAU * (i + 1) as f64;
        }
        for (i, &b) in self.cos.iter().enumerate() {
            v += b.abs() * TAU * (i + 1) as f64;
        }
        v
    }

    /// `Σ_k (2πk)²(|a_k| + |b_k|)`: bounds `|p''|` everywhere.
    pub fn deriv2_coeff_bound(&self) -> f64 {
        let mut v = 0.0;
        for (i, &a) in self.sin.iter().enumerate() {
            let w = TAU * (i + 1) as f64;
            v += a.abs() * w * w;
        }
        for (i, &b) in self.cos.iter().enumerate() {
            let w = TAU * (i + 1) as f64;
            v += b.abs() * w * w;
        }
        v
    }

    /// Certified upper bound on `sup |p'|`: maximum of `|p'|` over a uniform
    /// grid of `grid` points, corrected by the Lipschitz slack `sup|p''|·h/2`.
    pub fn certified_deriv_sup(&self, grid: usize) -> f64 {
        if self.sin.is_empty() && self.cos.is_empty() {
            return 0.0;
        }
        let grid = grid.max(16 * self.max_frequency());
        let mut max = 0.0f64;
        for i in 0..grid {
            let x = i as f64 / grid as f64;
            max = max.max(self.deriv(x).abs());
        }
        max + self.deriv2_coeff_bound() * 0.5 / grid as f64
    }

    /// Largest maximum of `|p'|` observed on a uniform grid, no slack.
    pub fn grid_deriv_max(&self, grid: usize) -> f64 {
        let mut max = 0.0f64;
        for i in 0..grid {
            let x = i as f64 / grid as f64;
            max = max.max(self.deriv(x).abs());
        }
        max
    }

    pub fn max_frequency(&self) -> usize {
        self.sin.len().max(self.cos.len()).max(1)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            constant: self.constant * s,
            sin: self.sin.iter().map(|a| a * s).collect(),
            cos: self.cos.iter().map(|b| b * s).collect(),
        }
    }

    /// `self += t · other`, extending coefficient lists as needed.
    pub fn add_scaled(&mut self, other: &Self, t: f64) {
        self.constant += t * other.constant;
        if self.sin.len() < other.sin.len() {
            self.sin.resize(other.sin.len(), 0.0);
        }
        for (i, &a) in other.sin.iter().enumerate() {
            self.sin[i] += t * a;
        }
        if self.cos.len() < other.cos.len() {
            self.cos.resize(other.cos.len(), 0.0);
        }
        for (i, &b) in other.cos.iter().enumerate() {
            self.cos[i] += t * b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_deriv_match_closed_forms() {
        let p = TrigPoly::new(0.5, vec![0.25], vec![0.0, -0.125]);
        let x = 0.3;
        let expected = 0.5 + 0.25 * (TAU * x).sin() - 0.125 * (2.0 * TAU * x).cos();
        assert!((p.eval(x) - expected).abs() < 1e-15);
        let expected_d = 0.25 * TAU * (TAU * x).cos() + 0.125 * 2.0 * TAU * (2.0 * TAU * x).sin();
        assert!((p.deriv(x) - expected_d).abs() < 1e-12);
    }

    #[test]
    fn certified_sup_dominates_samples() {
        let p = TrigPoly::new(0.0, vec![0.3, -0.1], vec![0.2]);
        let sup = p.certified_deriv_sup(4096);
        for i in 0..100_000 {
            let x = i as f64 / 100_000.0;
            assert!(p.deriv(x).abs() <= sup);
        }
    }

    #[test]
    fn constant_poly_has_zero_derivative_bound() {
        let p = TrigPoly::constant(0.3);
        assert_eq!(p.certified_deriv_sup(1024), 0.0);
        assert_eq!(p.deriv(0.123), 0.0);
    }

    #[test]
    fn add_scaled_is_affine() {
        let mut p = TrigPoly::sine(1, 1.0);
        p.add_scaled(&TrigPoly::cosine(3, 2.0), -0.5);
        for i in 0..64 {
            let x = i as f64 / 64.0;
            let expected = (TAU * x).sin() - (3.0 * TAU * x).cos();
            assert!((p.eval(x) - expected).abs() < 1e-14);
        }
    }
}
