//! Roof functions `τ : S¹ → ℝ` driving the fiber rotation, their certified
//! derivative bounds, coboundary constructors, and affine perturbation
//! families `τ_t = τ + Σ t_i φ_i`.

use crate::circle_map::CircleMap;
use crate::error::{Error, Result};
use crate::trig::TrigPoly;
use serde::{Deserialize, Serialize};

/// Grid used when certifying `sup |τ'|` for trigonometric roofs.
const ROOF_CERT_GRID: usize = 1 << 14;

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Kind {
    Trig(TrigPoly),
    /// `φ∘E − φ + c`, kept in composite form so the telescoping identity
    /// holds to machine precision instead of truncation accuracy.
    Coboundary { phi: TrigPoly, c: f64, map: CircleMap },
}

/// A roof function together with a certified upper bound on `‖τ'‖∞`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoofFunction {
    kind: Kind,
    sup_deriv: f64,
}

impl RoofFunction {
    /// Wrap a trigonometric polynomial; `sup_deriv` is certified from a grid
    /// maximum plus the Lipschitz slack of `τ''`.
    pub fn from_trig(poly: TrigPoly) -> Self {
        let sup_deriv = poly.certified_deriv_sup(ROOF_CERT_GRID);
        Self { kind: Kind::Trig(poly), sup_deriv }
    }

    /// `τ ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self::from_trig(TrigPoly::constant(c))
    }

    /// Wrap a trigonometric polynomial with an analytically known bound on
    /// `‖τ'‖∞`. The bound is validated against a grid maximum of `|τ'|`.
    pub fn with_certified_sup_deriv(poly: TrigPoly, sup_deriv: f64) -> Result<Self> {
        let observed = poly.grid_deriv_max(ROOF_CERT_GRID);
        if sup_deriv < observed {
            return Err(Error::InvalidArgument(format!(
                "claimed sup |tau'| = {sup_deriv} is below the observed grid maximum {observed}"
            )));
        }
        Ok(Self { kind: Kind::Trig(poly), sup_deriv })
    }

    /// The coboundary `τ = φ∘E − φ + c`.
    ///
    /// Stored as a composite evaluator (it is not itself a trigonometric
    /// polynomial); the derivative bound is certified from a grid maximum of
    /// `|E'·(φ'∘E) − φ'|` plus slack from a coefficient bound on `τ''`.
    pub fn coboundary(phi: TrigPoly, c: f64, map: &CircleMap) -> Self {
        let (_, upper) = map.expansion_bounds();
        // τ'' = E''·(φ'∘E) + (E')²·(φ''∘E) − φ''
        let second_bound = map.second_derivative_bound() * phi.deriv_coeff_bound()
            + (upper * upper + 1.0) * phi.deriv2_coeff_bound();
        let kind = Kind::Coboundary { phi, c, map: map.clone() };
        let tmp = Self { kind, sup_deriv: 0.0 };
        let mut max = 0.0f64;
        for i in 0..ROOF_CERT_GRID {
            let x = i as f64 / ROOF_CERT_GRID as f64;
            max = max.max(tmp.derivative(x).abs());
        }
        let sup_deriv = max + second_bound * 0.5 / ROOF_CERT_GRID as f64;
        Self { sup_deriv, ..tmp }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Trig(p) => p.eval(x),
            Kind::Coboundary { phi, c, map } => phi.eval(map.eval(x)) - phi.eval(x) + c,
        }
    }

    /// `τ'(x)`, exact term-wise for trigonometric roofs and via the chain
    /// rule `E'·(φ'∘E) − φ'` for coboundaries.
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Trig(p) => p.deriv(x),
            Kind::Coboundary { phi, map, .. } => {
                map.derivative(x) * phi.deriv(map.eval(x)) - phi.deriv(x)
            }
        }
    }

    /// Certified upper bound on `‖τ'‖∞`.
    pub fn sup_deriv(&self) -> f64 {
        self.sup_deriv
    }

    /// The trigonometric coefficients, when the roof is in trigonometric form.
    pub fn as_trig(&self) -> Option<&TrigPoly> {
        match &self.kind {
            Kind::Trig(p) => Some(p),
            Kind::Coboundary { .. } => None,
        }
    }

    /// The `(φ, c)` data of a coboundary roof.
    pub fn as_coboundary(&self) -> Option<(&TrigPoly, f64)> {
        match &self.kind {
            Kind::Trig(_) => None,
            Kind::Coboundary { phi, c, .. } => Some((phi, *c)),
        }
    }

    /// `(ϑ_τ, ϑ_R) = (‖τ'‖∞/(λ−1), R/(λ−1))`.
    ///
    /// Fails when `R` does not exceed the certified bound on `‖τ'‖∞`: the
    /// cone construction requires `R > ‖τ'‖∞`.
    pub fn theta(&self, lambda: f64, r: f64) -> Result<(f64, f64)> {
        if !(lambda > 1.0) {
            return Err(Error::NotExpanding { lambda });
        }
        if !(r > self.sup_deriv) {
            return Err(Error::ConeRadiusTooSmall { r, sup_deriv: self.sup_deriv });
        }
        Ok((self.sup_deriv / (lambda - 1.0), r / (lambda - 1.0)))
    }
}

/// The affine family `τ_t(x) = τ(x) + Σ_{i=1}^m t_i φ_i(x)`.
///
/// The base roof and the basis functions are trigonometric polynomials so
/// that `apply_params` can combine coefficients exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationFamily {
    base: TrigPoly,
    basis: Vec<TrigPoly>,
}

impl PerturbationFamily {
    pub fn new(base: &RoofFunction, basis: Vec<TrigPoly>) -> Result<Self> {
        let base = base.as_trig().cloned().ok_or_else(|| {
            Error::InvalidArgument(
                "perturbation family base must be a trigonometric roof".into(),
            )
        })?;
        if basis.is_empty() {
            return Err(Error::InvalidArgument("perturbation basis must be nonempty".into()));
        }
        Ok(Self { base, basis })
    }

    /// The Fourier basis `{scale·sin 2πkx, scale·cos 2πkx : 1 ≤ k ≤ max_freq}`,
    /// ordered by frequency with the sine first, so `m = 2·max_freq`.
    pub fn fourier(base: &RoofFunction, max_freq: usize, scale: f64) -> Result<Self> {
        if max_freq == 0 {
            return Err(Error::InvalidArgument("fourier basis needs max_freq >= 1".into()));
        }
        let mut basis = Vec::with_capacity(2 * max_freq);
        for k in 1..=max_freq {
            basis.push(TrigPoly::sine(k, scale));
            basis.push(TrigPoly::cosine(k, scale));
        }
        Self::new(base, basis)
    }

    /// Number of parameters `m`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn base(&self) -> &TrigPoly {
        &self.base
    }

    pub fn basis(&self) -> &[TrigPoly] {
        &self.basis
    }

    /// Coefficient-wise affine combination; `sup_deriv` is recertified.
    pub fn apply_params(&self, t: &[f64]) -> RoofFunction {
        assert_eq!(t.len(), self.basis.len(), "parameter vector length mismatch");
        let mut poly = self.base.clone();
        for (ti, phi) in t.iter().zip(&self.basis) {
            poly.add_scaled(phi, *ti);
        }
        RoofFunction::from_trig(poly)
    }

    /// Upper bound on `‖τ_t'‖∞` valid for every `t ∈ [−1,1]^m`, used to
    /// validate a cone radius for a whole scan up front.
    pub fn sup_deriv_bound_on_cube(&self) -> f64 {
        let mut v = RoofFunction::from_trig(self.base.clone()).sup_deriv();
        for phi in &self.basis {
            v += phi.deriv_coeff_bound();
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn sine_roof() -> RoofFunction {
        // τ = sin(2πx)/(2π), τ' = cos(2πx), ‖τ'‖∞ = 1 exactly.
        RoofFunction::with_certified_sup_deriv(TrigPoly::sine(1, 1.0 / TAU), 1.0).unwrap()
    }

    #[test]
    fn roof_derivative_values() {
        let tau = sine_roof();
        assert!((tau.derivative(0.0) - 1.0).abs() < 1e-15);
        assert!((tau.derivative(0.5) + 1.0).abs() < 1e-15);
        let c = RoofFunction::constant(0.7);
        assert_eq!(c.derivative(0.123), 0.0);
    }

    #[test]
    fn theta_values() {
        let tau = sine_roof();
        let (t_tau, t_r) = tau.theta(2.0, 2.0).unwrap();
        assert_eq!((t_tau, t_r), (1.0, 2.0));

        let c = RoofFunction::constant(0.3);
        assert_eq!(c.theta(2.0, 1.0).unwrap(), (0.0, 1.0));

        let (t_tau, t_r) = tau.theta(1.5, 3.0).unwrap();
        assert!((t_tau - 2.0).abs() < 1e-12);
        assert!((t_r - 6.0).abs() < 1e-12);

        assert!(matches!(
            tau.theta(2.0, 0.5),
            Err(crate::error::Error::ConeRadiusTooSmall { .. })
        ));
    }

    #[test]
    fn coboundary_values_at_fixed_point() {
        let map = CircleMap::linear(2).unwrap();

        let zero_phi = RoofFunction::coboundary(TrigPoly::zero(), 0.3, &map);
        assert_eq!(zero_phi.eval(0.44), 0.3);
        assert_eq!(zero_phi.derivative(0.44), 0.0);
        assert_eq!(zero_phi.sup_deriv(), 0.0);

        let phi = TrigPoly::sine(1, 0.1);
        let tau = RoofFunction::coboundary(phi, 0.0, &map);
        // φ(0) = φ(E(0)): the fixed point cancels.
        assert!(tau.eval(0.0).abs() < 1e-15);
        // τ'(0) = 2·(0.1·2π) − 0.1·2π = 0.2π
        assert!((tau.derivative(0.0) - 0.2 * std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn coboundary_sup_deriv_dominates_samples() {
        let map = CircleMap::new(2, TrigPoly::sine(1, 0.05)).unwrap();
        let tau = RoofFunction::coboundary(TrigPoly::sine(2, 0.07), 0.1, &map);
        let sup = tau.sup_deriv();
        for i in 0..100_000 {
            let x = i as f64 / 100_000.0;
            assert!(tau.derivative(x).abs() <= sup);
        }
    }

    #[test]
    fn apply_params_is_affine() {
        let base = RoofFunction::from_trig(TrigPoly::sine(1, 1.0));
        let family = PerturbationFamily::fourier(&base, 2, 1.0).unwrap();
        assert_eq!(family.dim(), 4);

        let zero = family.apply_params(&[0.0; 4]);
        for i in 0..256 {
            let x = i as f64 / 256.0;
            assert!((zero.eval(x) - base.eval(x)).abs() < 1e-12);
        }

        let t = [0.3, -0.2, 0.05, 0.9];
        let s = [-0.1, 0.4, 0.7, -0.3];
        let sum: Vec<f64> = t.iter().zip(&s).map(|(a, b)| a + b).collect();
        let lhs_t = family.apply_params(&t);
        let lhs_s = family.apply_params(&s);
        let rhs = family.apply_params(&sum);
        for i in 0..256 {
            let x = i as f64 / 256.0;
            let lhs = lhs_t.eval(x) + lhs_s.eval(x) - base.eval(x);
            assert!((lhs - rhs.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_params_linearity_from_zero_base() {
        let base = RoofFunction::constant(0.0);
        let family =
            PerturbationFamily::new(&base, vec![TrigPoly::sine(1, 1.0)]).unwrap();
        let tau = family.apply_params(&[2.0]);
        for i in 0..64 {
            let x = i as f64 / 64.0;
            assert!((tau.eval(x) - 2.0 * (TAU * x).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn summed_coefficients_certified() {
        // base sin 2πx, basis {cos 2πx}, t = 1: sup |τ'| ≤ 2π√2, certified.
        let base = RoofFunction::from_trig(TrigPoly::sine(1, 1.0));
        let family =
            PerturbationFamily::new(&base, vec![TrigPoly::cosine(1, 1.0)]).unwrap();
        let tau = family.apply_params(&[1.0]);
        let analytic = TAU * 2.0f64.sqrt();
        assert!(tau.sup_deriv() >= analytic - 1e-9);
        assert!(tau.sup_deriv() <= analytic + 1e-2);
    }
}
