//! Proof constants, paper grids, the affine parameter map of a perturbation
//! family with its Jacobian, witness extraction, and seeded Monte Carlo
//! parameter scans.

use crate::branch_enum::{map_branches, Word};
use crate::captivity::{ncal, XStrategy};
use crate::circle_map::CircleMap;
use crate::cocycle::{PerturbationFamily, RoofFunction};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Relative singular-value threshold below which the linear part is treated
/// as rank-deficient (not surjective), making the Jacobian 0.
pub const RANK_RTOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Proof constants and grids
// ---------------------------------------------------------------------------

/// The quantities driving the counting argument: an interval cover of
/// `[log λ, log Λ]` by overlapping intervals shorter than `ρ/3`, the depth
/// constant `N = ⌈6ρ⁻¹ log⌈2Λ⌉⌉`, and the smallest `q` with
/// `(q+1)·N·e^{−qρ/2} < 1/(4J)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProofConstants {
    pub rho: f64,
    pub lambda: f64,
    pub upper_lambda: f64,
    /// Open intervals `I_j = (a_j, b_j)`, sorted, overlapping.
    pub intervals: Vec<(f64, f64)>,
    /// Shrink margin: `I_j' = (a_j + ε, b_j − ε)` still cover.
    pub epsilon: f64,
    pub big_n: usize,
    pub q: usize,
}

/// Outcome of re-checking the defining conditions of a constants bundle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConstantsCheck {
    pub n_formula: bool,
    pub q_inequality: bool,
    pub q_minimal: bool,
    pub intervals_short: bool,
    pub intervals_cover: bool,
    pub shrunk_cover: bool,
}

impl ConstantsCheck {
    pub fn all(&self) -> bool {
        self.n_formula
            && self.q_inequality
            && self.q_minimal
            && self.intervals_short
            && self.intervals_cover
            && self.shrunk_cover
    }
}

impl ProofConstants {
    pub fn j(&self) -> usize {
        self.intervals.len()
    }

    /// Index of the lowest interval containing `rate` (ties to the lower
    /// index; the cover is closed for classification so every rate in
    /// `[log λ, log Λ]` is assigned).
    pub fn classify(&self, rate: f64) -> usize {
        let v = rate.clamp(self.lambda.ln(), self.upper_lambda.ln());
        for (j, &(a, b)) in self.intervals.iter().enumerate() {
            if a <= v && v <= b {
                return j;
            }
        }
        self.intervals.len() - 1
    }

    /// Re-verify the defining inequalities and cover properties.
    pub fn check(&self) -> ConstantsCheck {
        let j = self.j() as f64;
        let n_expected =
            (6.0 / self.rho * (2.0 * self.upper_lambda).ceil().ln()).ceil() as usize;
        let q_value = |q: usize| (q as f64 + 1.0) * self.big_n as f64 * (-(q as f64) * self.rho / 2.0).exp();
        let lo = self.lambda.ln();
        let hi = self.upper_lambda.ln();
        let mut covered = self.intervals.first().is_some_and(|&(a, _)| a < lo)
            && self.intervals.last().is_some_and(|&(_, b)| b > hi);
        let mut shrunk_covered = self.intervals.first().is_some_and(|&(a, _)| a + self.epsilon < lo)
            && self.intervals.last().is_some_and(|&(_, b)| b - self.epsilon > hi);
        for w in self.intervals.windows(2) {
            let (_, b0) = w[0];
            let (a1, _) = w[1];
            covered &= a1 < b0;
            shrunk_covered &= a1 + self.epsilon < b0 - self.epsilon;
        }
        ConstantsCheck {
            n_formula: self.big_n == n_expected,
            q_inequality: q_value(self.q) < 1.0 / (4.0 * j),
            q_minimal: self.q == 1 || q_value(self.q - 1) >= 1.0 / (4.0 * j),
            intervals_short: self.intervals.iter().all(|&(a, b)| b - a < self.rho / 3.0),
            intervals_cover: covered,
            shrunk_cover: shrunk_covered,
        }
    }
}

fn interval_cover(rho: f64, lambda: f64, upper_lambda: f64) -> (Vec<(f64, f64)>, f64) {
    let lo = lambda.ln();
    let hi = upper_lambda.ln();
    let span = hi - lo;
    let pad = rho / 24.0;
    let epsilon = rho / 96.0;
    if span <= f64::EPSILON {
        return (vec![(lo - pad, lo + pad)], epsilon);
    }
    let j = ((span / (rho / 12.0)).ceil() as usize).max(1);
    let step = span / j as f64;
    let intervals = (0..j)
        .map(|k| (lo + k as f64 * step - pad, lo + (k + 1) as f64 * step + pad))
        .collect();
    (intervals, epsilon)
}

/// Build the constants bundle: equal-length overlapping cover, `N` from its
/// defining formula, and the smallest valid `q` by linear scan.
pub fn proof_constants(rho: f64, lambda: f64, upper_lambda: f64) -> Result<ProofConstants> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    if !(lambda > 1.0) {
        return Err(Error::NotExpanding { lambda });
    }
    if upper_lambda < lambda {
        return Err(Error::InvalidArgument(format!(
            "upper expansion bound {upper_lambda} is below the lower bound {lambda}"
        )));
    }
    let (intervals, epsilon) = interval_cover(rho, lambda, upper_lambda);
    let j = intervals.len() as f64;
    let big_n = (6.0 / rho * (2.0 * upper_lambda).ceil().ln()).ceil() as usize;
    let mut q = 1usize;
    loop {
        let value = (q as f64 + 1.0) * big_n as f64 * (-(q as f64) * rho / 2.0).exp();
        if value < 1.0 / (4.0 * j) {
            break;
        }
        q += 1;
        if q > 10_000_000 {
            return Err(Error::InvalidArgument(
                "no admissible q below 10^7; rho is too small".into(),
            ));
        }
    }
    Ok(ProofConstants { rho, lambda, upper_lambda, intervals, epsilon, big_n, q })
}

impl ProofConstants {
    /// Same cover, user-chosen `N` and `q`. Relaxed bundles let the witness
    /// extraction run at desk-scale depths; they typically fail [`Self::check`].
    pub fn with_overrides(
        rho: f64,
        lambda: f64,
        upper_lambda: f64,
        big_n: usize,
        q: usize,
    ) -> Result<Self> {
        let base = proof_constants(rho, lambda, upper_lambda)?;
        Ok(ProofConstants { big_n, q, ..base })
    }
}

/// The finite grids shifted to in the counting argument: base points with
/// `⌈2Λ⌉ⁿ x ∈ ℤ` and unit-vector angles on the same mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grids {
    pub t_points: Vec<f64>,
    pub s_angles: Vec<f64>,
    pub truncated: bool,
}

pub fn grids(n: usize, upper_lambda: f64, cap: usize) -> Grids {
    let m = (2.0 * upper_lambda).ceil() as u64;
    let size = m.checked_pow(n as u32).filter(|&s| s <= cap as u64);
    match size {
        Some(s) => {
            let pts: Vec<f64> = (0..s).map(|i| i as f64 / s as f64).collect();
            Grids { t_points: pts.clone(), s_angles: pts, truncated: false }
        }
        None => {
            let pts: Vec<f64> = (0..cap).map(|i| i as f64 / cap as f64).collect();
            Grids { t_points: pts.clone(), s_angles: pts, truncated: true }
        }
    }
}

// ---------------------------------------------------------------------------
// The affine parameter map and its Jacobian
// ---------------------------------------------------------------------------

/// The affine map `t ↦ (Sₙ(x; α; τ_t))_{α ∈ A}` of a perturbation family:
/// `linear[row][i] = Σ_k φ_i'(x_{[α]_k})/(Eᵏ)'(x_{[α]_k})` and the offset is
/// the unperturbed slope vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineParameterMap {
    pub linear: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub base_point: f64,
    pub words: Vec<Word>,
}

impl AffineParameterMap {
    pub fn from_parts(linear: Vec<Vec<f64>>, offset: Vec<f64>) -> Self {
        AffineParameterMap { linear, offset, base_point: 0.0, words: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.linear.len()
    }

    pub fn cols(&self) -> usize {
        self.linear.first().map_or(0, Vec::len)
    }

    pub fn apply(&self, t: &[f64]) -> Vec<f64> {
        assert_eq!(t.len(), self.cols(), "parameter vector length mismatch");
        self.linear
            .iter()
            .zip(&self.offset)
            .map(|(row, off)| off + row.iter().zip(t).map(|(l, ti)| l * ti).sum::<f64>())
            .collect()
    }

    /// Restriction to a coordinate subspace of the domain.
    pub fn restrict_columns(&self, cols: &[usize]) -> AffineParameterMap {
        let linear = self
            .linear
            .iter()
            .map(|row| cols.iter().map(|&c| row[c]).collect())
            .collect();
        AffineParameterMap {
            linear,
            offset: self.offset.clone(),
            base_point: self.base_point,
            words: self.words.clone(),
        }
    }
}

/// Build the affine parameter map for `x` and a set of equal-length words,
/// one backward pass per word.
pub fn g_map(
    map: &CircleMap,
    family: &PerturbationFamily,
    x: f64,
    words: &[Word],
) -> Result<AffineParameterMap> {
    if words.is_empty() {
        return Err(Error::InvalidArgument("g_map needs at least one word".into()));
    }
    let n = words[0].len();
    if n == 0 || words.iter().any(|w| w.len() != n) {
        return Err(Error::InvalidArgument(
            "g_map words must share a common positive length".into(),
        ));
    }
    let m = family.dim();
    let mut linear = Vec::with_capacity(words.len());
    let mut offset = Vec::with_capacity(words.len());
    for word in words {
        let mut row = vec![0.0; m];
        let mut slope = 0.0;
        let mut y = crate::circle_map::frac(x);
        let mut d = 1.0;
        for &sym in word.symbols() {
            y = map.inverse_branch(sym as usize, y)?;
            d *= map.derivative(y);
            for (i, phi) in family.basis().iter().enumerate() {
                row[i] += phi.deriv(y) / d;
            }
            slope += family.base().deriv(y) / d;
        }
        linear.push(row);
        offset.push(slope);
    }
    Ok(AffineParameterMap { linear, offset, base_point: x, words: words.to_vec() })
}

/// Volume-scaling factor of the linear part restricted orthogonally to its
/// kernel: the product of singular values when the map is surjective, 0
/// otherwise (rank decided at relative threshold [`RANK_RTOL`]).
pub fn jacobian_rows(rows: &[Vec<f64>]) -> f64 {
    let p = rows.len();
    if p == 0 {
        return 1.0;
    }
    let m = rows[0].len();
    if p > m {
        return 0.0;
    }
    let mat = DMatrix::from_fn(p, m, |i, j| rows[i][j]);
    let svd = mat.svd(false, false);
    let values = svd.singular_values;
    let s_max = values.iter().copied().fold(0.0f64, f64::max);
    if s_max == 0.0 {
        return 0.0;
    }
    let s_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if s_min < RANK_RTOL * s_max {
        return 0.0;
    }
    values.iter().product()
}

pub fn jacobian(g: &AffineParameterMap) -> f64 {
    jacobian_rows(&g.linear)
}

/// Spot-check `Jac(M) ≥ Jac(M|_L)` on random coordinate subspaces `L`.
pub fn jac_monotonicity_check(g: &AffineParameterMap, trials: usize, seed: u64) -> bool {
    let full = jacobian(g);
    let m = g.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let k = rng.random_range(1..=m);
        let mut cols: Vec<usize> = (0..m).collect();
        for i in 0..k {
            let j = rng.random_range(i..m);
            cols.swap(i, j);
        }
        cols.truncate(k);
        cols.sort_unstable();
        let restricted = jacobian(&g.restrict_columns(&cols));
        if full < restricted - 1e-9 {
            return false;
        }
    }
    true
}

/// Volume of the unit ball in `ℝᵏ` via `V_k = V_{k−2}·2π/k`.
fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(k - 2) * std::f64::consts::TAU / k as f64,
    }
}

/// Monte Carlo check of the preimage-measure bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LebBoundCheck {
    /// Fraction of unit-ball samples `z` with `g(z)` inside the target ball.
    pub empirical: f64,
    /// `(V_{m−p}/V_m)·Jac⁻¹·Leb(X)`, normalized like the empirical side.
    pub bound: f64,
    /// Binomial standard error of the empirical fraction.
    pub sigma: f64,
    pub pass: bool,
}

/// Estimate `Leb{‖z‖ ≤ 1 : g(z) ∈ X}` for `X` the ball of the given radius
/// around `g(0)` and compare against the Jacobian bound, with a `3σ`
/// Monte Carlo slack on the pass decision.
pub fn leb_bound_check(
    g: &AffineParameterMap,
    target_radius: f64,
    samples: usize,
    seed: u64,
) -> Result<LebBoundCheck> {
    let p = g.rows();
    let m = g.cols();
    let jac = jacobian(g);
    if jac == 0.0 {
        return Err(Error::InvalidArgument(
            "the linear part is not surjective (Jac = 0); the bound is vacuous".into(),
        ));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let center = &g.offset;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    let mut z = vec![0.0; m];
    for _ in 0..samples {
        sample_unit_ball(&mut rng, &mut z);
        let image = g.apply(&z);
        let dist2: f64 =
            image.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist2 <= target_radius * target_radius {
            hits += 1;
        }
    }
    let empirical = hits as f64 / samples as f64;
    let leb_x = unit_ball_volume(p) * target_radius.powi(p as i32);
    let bound = unit_ball_volume(m - p) / unit_ball_volume(m) / jac * leb_x;
    let sigma = (empirical * (1.0 - empirical) / samples as f64).sqrt();
    let rel_sigma = if empirical > 0.0 { sigma / empirical } else { 0.0 };
    let pass = empirical <= bound * (1.0 + 3.0 * rel_sigma) + 1e-12;
    Ok(LebBoundCheck { empirical, bound, sigma, pass })
}

fn sample_unit_ball(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let m = out.len();
    loop {
        let mut norm2 = 0.0;
        for v in out.iter_mut() {
            let g = gaussian(rng);
            *v = g;
            norm2 += g * g;
        }
        if norm2 > 0.0 {
            let radius = rng.random::<f64>().powf(1.0 / m as f64);
            let scale = radius / norm2.sqrt();
            for v in out.iter_mut() {
                *v *= scale;
            }
            return;
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one value per call is plenty here.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

// ---------------------------------------------------------------------------
// Witness extraction
// ---------------------------------------------------------------------------

/// One selected truncation class: the depth-`q` prefix `β` and the member
/// words `Σ(β)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessGroup {
    pub prefix: Word,
    pub members: Vec<Word>,
}

/// The constructive witness of a large count: the argmax base point and
/// slope, the derivative class, and the `2(q+1)N` largest truncation groups.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptivityWitness {
    pub x: f64,
    pub slope: f64,
    /// Index into the constants' interval cover.
    pub class_index: usize,
    pub groups: Vec<WitnessGroup>,
    /// Required lower bound `e^{ρn}·ℓ^{−q}/(2J)` on every group size.
    pub group_size_floor: f64,
}

/// Follow the constructive argument at finite depth: find the argmax,
/// classify member branches by the derivative interval containing
/// `(1/n)·log Dₙ` (ties to the lower index), keep the largest class, group
/// it by depth-`q` truncation and select the `2(q+1)N` largest groups.
///
/// Returns `None` when the finite-depth conditions fail: `n ≤ q`, fewer
/// nonempty groups than required, or a selected group below the cardinality
/// floor.
pub fn witness_extract(
    map: &CircleMap,
    tau: &RoofFunction,
    r: f64,
    n: usize,
    constants: &ProofConstants,
    strategy: &XStrategy,
) -> Result<Option<CaptivityWitness>> {
    let q = constants.q;
    if n <= q {
        return Ok(None);
    }
    let best = ncal(map, tau, r, n, strategy)?;
    let x = best.witness_x;
    let slope = best.witness_slope;

    let (lambda, _) = map.expansion_bounds();
    let (_, theta_r) = tau.theta(lambda, r)?;
    let profiles = map_branches(map, tau, x, n, |v| (v.slope, v.derivative))?;

    // Member branches, classified by derivative interval.
    let mut class_counts = vec![0usize; constants.j()];
    let mut members: Vec<(u64, usize)> = Vec::new();
    for (rank, &(s, d)) in profiles.iter().enumerate() {
        let half = theta_r / d;
        if s - half <= slope && slope <= s + half {
            let class = constants.classify(d.ln() / n as f64);
            class_counts[class] += 1;
            members.push((rank as u64, class));
        }
    }
    let best_class = class_counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(j, _)| j)
        .unwrap_or(0);

    // Group the winning class by depth-q truncation. Ranks are lexicographic,
    // so the prefix is an integer division.
    let ell = map.degree() as u64;
    let suffix_size = ell.pow((n - q) as u32);
    let mut groups: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for &(rank, class) in &members {
        if class == best_class {
            groups.entry(rank / suffix_size).or_default().push(rank);
        }
    }

    let need = 2 * (q + 1) * constants.big_n;
    if groups.len() < need {
        return Ok(None);
    }
    let mut ordered: Vec<(u64, Vec<u64>)> = groups.into_iter().collect();
    ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    ordered.truncate(need);

    let floor = (constants.rho * n as f64).exp() * (ell as f64).powi(-(q as i32))
        / (2.0 * constants.j() as f64);
    if ordered.iter().any(|(_, members)| (members.len() as f64) < floor) {
        return Ok(None);
    }

    let groups = ordered
        .into_iter()
        .map(|(prefix_rank, member_ranks)| WitnessGroup {
            prefix: Word::from_rank(prefix_rank, q, map.degree()),
            members: member_ranks
                .into_iter()
                .map(|rank| Word::from_rank(rank, n, map.degree()))
                .collect(),
        })
        .collect();
    Ok(Some(CaptivityWitness { x, slope, class_index: best_class, groups, group_size_floor: floor }))
}

// ---------------------------------------------------------------------------
// Parameter scans
// ---------------------------------------------------------------------------

/// Per-depth outcome of a scan: how many parameter samples exceeded the
/// growth threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: usize,
    pub hits: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub rows: Vec<ScanRow>,
    pub samples: usize,
    pub seed: u64,
    pub rho: f64,
    pub r: f64,
    pub grid_points: usize,
    pub family_dim: usize,
}

/// Whether a count at depth `n` means `count^{1/n} ≥ e^ρ`.
///
/// Compared in log space with a `1e-9` slack; at `ρ ≥ log ℓ` the comparison
/// is strict, so the saturated count `ℓⁿ` does not register as a hit there.
pub fn captivity_hit(count: u64, n: usize, rho: f64, degree: usize) -> bool {
    let lhs = (count.max(1) as f64).ln();
    let threshold = rho * n as f64;
    if rho >= (degree as f64).ln() {
        lhs > threshold + 1e-9
    } else {
        lhs >= threshold - 1e-9
    }
}

/// Seeded Monte Carlo scan: for each `t` drawn uniformly from `[−1,1]^m`
/// (one counter-based stream per sample index, so the draw order is
/// independent of threading), report the fraction of samples whose count
/// root at depth `n` reaches `e^ρ`.
#[allow(clippy::too_many_arguments)]
pub fn parameter_scan(
    map: &CircleMap,
    family: &PerturbationFamily,
    r: f64,
    rho: f64,
    n_values: &[usize],
    samples: usize,
    seed: u64,
    grid_points: usize,
) -> Result<ScanOutcome> {
    if samples == 0 {
        return Err(Error::InvalidArgument("scan needs at least one sample".into()));
    }
    if n_values.is_empty() {
        return Err(Error::InvalidArgument("scan needs at least one depth".into()));
    }
    let m = family.dim();
    let strategy = XStrategy::Grid { points: grid_points };
    let per_sample: Vec<Result<Vec<bool>>> = (0..samples)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64 + 1);
            let t: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tau_t = family.apply_params(&t);
            n_values
                .iter()
                .map(|&n| {
                    let out = ncal(map, &tau_t, r, n, &strategy)?;
                    Ok(captivity_hit(out.count, n, rho, map.degree()))
                })
                .collect()
        })
        .collect();

    let mut hits = vec![0usize; n_values.len()];
    for sample in per_sample {
        for (slot, hit) in hits.iter_mut().zip(sample?) {
            *slot += usize::from(hit);
        }
    }
    let rows = n_values
        .iter()
        .zip(hits)
        .map(|(&n, h)| ScanRow { n, hits: h, fraction: h as f64 / samples as f64 })
        .collect();
    Ok(ScanOutcome {
        rows,
        samples,
        seed,
        rho,
        r,
        grid_points,
        family_dim: m,
    })
}

// ---------------------------------------------------------------------------
// Fourier-basis adequacy survey
// ---------------------------------------------------------------------------

/// Result of sampling `Jac(G_{x,A})` for the configured basis over random
/// prefix sets and extensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacSurvey {
    pub min_jac: f64,
    /// A basis rescaling `s` with `Jac ≥ 1` after scaling (`Jac` scales as
    /// `s^rows`); `None` when a rank-deficient sample was hit.
    pub required_scale: Option<f64>,
    pub rows: usize,
    pub trials: usize,
}

/// Sample `Jac(G_{x,A})` for `A` built from random distinct depth-`q`
/// prefixes with random depth-`n` extensions, reporting the minimum and the
/// rescaling that would push it to 1.
#[allow(clippy::too_many_arguments)]
pub fn fourier_jac_survey(
    map: &CircleMap,
    family: &PerturbationFamily,
    n: usize,
    q: usize,
    rows: usize,
    xs: &[f64],
    trials_per_x: usize,
    seed: u64,
) -> Result<JacSurvey> {
    if n <= q {
        return Err(Error::InvalidArgument("survey needs n > q".into()));
    }
    if rows > family.dim() {
        return Err(Error::InvalidArgument(
            "survey rows exceed the family dimension; Jac would be 0".into(),
        ));
    }
    let ell = map.degree() as u64;
    let prefix_count = ell
        .checked_pow(q as u32)
        .ok_or_else(|| Error::InvalidArgument("q too large".into()))?;
    if (rows as u64) > prefix_count {
        return Err(Error::InvalidArgument("more rows than depth-q prefixes".into()));
    }
    let suffix_count = ell
        .checked_pow((n - q) as u32)
        .ok_or_else(|| Error::InvalidArgument("n too large".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_jac = f64::INFINITY;
    let mut trials = 0usize;
    for &x in xs {
        for _ in 0..trials_per_x {
            let mut prefixes = Vec::with_capacity(rows);
            while prefixes.len() < rows {
                let cand = rng.random_range(0..prefix_count);
                if !prefixes.contains(&cand) {
                    prefixes.push(cand);
                }
            }
            let words: Vec<Word> = prefixes
                .iter()
                .map(|&p| {
                    let ext = rng.random_range(0..suffix_count);
                    Word::from_rank(p * suffix_count + ext, n, map.degree())
                })
                .collect();
            let g = g_map(map, family, x, &words)?;
            min_jac = min_jac.min(jacobian(&g));
            trials += 1;
        }
    }
    let required_scale = if min_jac > 0.0 {
        Some((1.0 / min_jac).powf(1.0 / rows as f64).max(1.0))
    } else {
        None
    };
    Ok(JacSurvey { min_jac, required_scale, rows, trials })
}
