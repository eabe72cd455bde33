//! Degree-`ℓ` expanding circle maps with a fixed point at 0.
//!
//! A map is specified through its lift `F(x) = ℓx + p(x)` where `p` is a
//! trigonometric polynomial. This keeps `F'` and `F''` exactly computable,
//! so the expansion bounds `λ ≤ F' ≤ Λ` can be certified (grid extrema plus
//! a Lipschitz correction from the coefficient bound on `F''`) instead of
//! merely sampled.

use crate::error::{Error, Result};
use crate::trig::TrigPoly;
use serde::{Deserialize, Serialize};

/// Residual tolerance for branch inversion. Inversion must be far more
/// accurate than any counting tolerance downstream.
pub const NEWTON_TOL: f64 = 1e-12;
/// Iteration cap for the safeguarded Newton solver.
pub const NEWTON_MAX_ITERS: usize = 100;
/// Grid used to certify the expansion bounds at construction.
const CERT_GRID: usize = 1 << 16;
/// Slack allowed when checking that the lift fixes 0 modulo 1.
const FIXED_POINT_TOL: f64 = 1e-9;

/// Map a real number to its representative in `[0, 1)`.
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// The `ℓ` branch intervals `ℐ(j) = [α_j, α_{j+1})` on which the map is a
/// bijection onto the circle. `α_0 = 0` and `F(α_j) = j` to solver accuracy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchPartition {
    endpoints: Vec<f64>,
}

impl BranchPartition {
    /// Sorted branch endpoints `α_0 = 0 < α_1 < … < α_{ℓ-1}`.
    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    /// Half-open interval `[α_j, α_{j+1})`, with `α_ℓ = 1`.
    pub fn interval(&self, j: usize) -> (f64, f64) {
        let hi = if j + 1 < self.endpoints.len() { self.endpoints[j + 1] } else { 1.0 };
        (self.endpoints[j], hi)
    }

    /// Index of the interval containing `x ∈ [0, 1)`.
    pub fn symbol_of(&self, x: f64) -> usize {
        match self.endpoints.binary_search_by(|e| e.total_cmp(&x)) {
            Ok(j) => j,
            Err(0) => 0,
            Err(k) => k - 1,
        }
    }
}

/// An expanding circle map of degree `ℓ ≥ 2` with `F(0) ≡ 0 (mod 1)`.
///
/// Values are immutable after construction; all operations are pure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircleMap {
    degree: usize,
    perturbation: TrigPoly,
    /// Integer subtracted from the raw lift so that `F(0) = 0`.
    offset: f64,
    lambda: f64,
    upper_lambda: f64,
    deriv2_bound: f64,
    partition: BranchPartition,
}

impl CircleMap {
    /// Build and validate a map from its degree and lift perturbation.
    ///
    /// Rejects maps whose certified expansion lower bound is not `> 1` and
    /// lifts that do not fix 0 modulo 1.
    pub fn new(degree: usize, perturbation: TrigPoly) -> Result<Self> {
        if degree < 2 {
            return Err(Error::DegreeTooSmall(degree));
        }
        let f0 = perturbation.eval(0.0);
        let offset = f0.round();
        if (f0 - offset).abs() > FIXED_POINT_TOL {
            return Err(Error::FixedPointViolated { f0, tol: FIXED_POINT_TOL });
        }

        let deriv2_bound = perturbation.deriv2_coeff_bound();
        let mut dmin = f64::INFINITY;
        let mut dmax = f64::NEG_INFINITY;
        for i in 0..CERT_GRID {
            let x = i as f64 / CERT_GRID as f64;
            let d = degree as f64 + perturbation.deriv(x);
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        let slack = deriv2_bound * 0.5 / CERT_GRID as f64;
        let lambda = dmin - slack;
        let upper_lambda = dmax + slack;
        if !(lambda > 1.0) {
            return Err(Error::NotExpanding { lambda });
        }

        let mut map = Self {
            degree,
            perturbation,
            offset,
            lambda,
            upper_lambda,
            deriv2_bound,
            partition: BranchPartition { endpoints: vec![0.0] },
        };
        let mut endpoints = vec![0.0];
        for j in 1..degree {
            let target = j as f64;
            let guess = target / degree as f64;
            endpoints.push(map.solve_lift(target, 0.0, 1.0, guess, j)?);
        }
        map.partition = BranchPartition { endpoints };
        Ok(map)
    }

    /// The unperturbed map `x ↦ ℓx`.
    pub fn linear(degree: usize) -> Result<Self> {
        Self::new(degree, TrigPoly::zero())
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn perturbation(&self) -> &TrigPoly {
        &self.perturbation
    }

    /// Certified bounds `(λ, Λ)` with `1 < λ ≤ F' ≤ Λ` everywhere.
    pub fn expansion_bounds(&self) -> (f64, f64) {
        (self.lambda, self.upper_lambda)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn upper_lambda(&self) -> f64 {
        self.upper_lambda
    }

    /// Certified bound on `|F''|`.
    pub fn second_derivative_bound(&self) -> f64 {
        self.deriv2_bound
    }

    pub fn partition(&self) -> &BranchPartition {
        &self.partition
    }

    /// Monotone lift with `F(0) = 0` and `F(x+1) = F(x) + ℓ`.
    pub fn lift(&self, x: f64) -> f64 {
        self.degree as f64 * x + self.perturbation.eval(x) - self.offset
    }

    /// `E(x) = F(x) mod 1`.
    pub fn eval(&self, x: f64) -> f64 {
        frac(self.lift(frac(x)))
    }

    /// `E` applied `n` times.
    pub fn iterate(&self, x: f64, n: usize) -> f64 {
        let mut y = frac(x);
        for _ in 0..n {
            y = self.eval(y);
        }
        y
    }

    /// `F'(x) ∈ [λ, Λ]`.
    pub fn derivative(&self, x: f64) -> f64 {
        self.degree as f64 + self.perturbation.deriv(frac(x))
    }

    /// The unique `y ∈ ℐ(j)` with `F(y) = x + j`, to residual `1e-12`.
    ///
    /// Safeguarded Newton on the bracketing interval `[α_j, α_{j+1}]` with a
    /// bisection fallback; non-convergence within the iteration cap is
    /// reported as an error, never clamped away.
    pub fn inverse_branch(&self, j: usize, x: f64) -> Result<f64> {
        if j >= self.degree {
            return Err(Error::InvalidSymbol { symbol: j, degree: self.degree });
        }
        let x = frac(x);
        let target = x + j as f64;
        let (lo, hi) = self.partition.interval(j);
        // F is within solver accuracy of j and j+1 at the bracket ends, so a
        // linear interpolation is an excellent starting point (exact for
        // linear maps).
        let guess = lo + (hi - lo) * x;
        self.solve_lift(target, lo, hi, guess, j)
    }

    /// Safeguarded Newton for `F(y) = target` on the bracket `[lo, hi]`.
    fn solve_lift(&self, target: f64, mut lo: f64, mut hi: f64, guess: f64, branch: usize) -> Result<f64> {
        let mut y = guess.clamp(lo, hi);
        let mut residual = 0.0;
        for _ in 0..NEWTON_MAX_ITERS {
            residual = self.lift(y) - target;
            if residual.abs() <= NEWTON_TOL {
                return Ok(y);
            }
            if residual > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let step = residual / self.derivative(y);
            let next = y - step;
            y = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        }
        Err(Error::InverseBranchDiverged { branch, target, residual })
    }
}
