//! Cone-interval calculus and the counting functions.
//!
//! For a branch `α` of depth `n` rooted at `x`, the image of the cone
//! `𝒦_R` under `Dfⁿ(x_α)` is the set of slopes `[Sₙ − ϑ_R/Dₙ, Sₙ + ϑ_R/Dₙ]`.
//! Counting how many of these closed intervals share a point (an endpoint
//! sweep) realizes the inner supremum over unit vectors exactly; the outer
//! supremum over base points is sampled by a configurable strategy, so every
//! reported count is a certified lower bound for the supremum over the
//! circle with an exact inner maximization.

use crate::branch_enum::{map_branches, tail_bound, BranchState, Word};
use crate::circle_map::{frac, CircleMap};
use crate::cocycle::RoofFunction;
use crate::error::{Error, Result};
use crate::sweep::{
    max_overlap_count, max_overlap_witness, max_weighted_overlap, EndpointSweep, SlopeInterval,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Guard band for floating-point marginality detection: counts are re-run
/// with endpoints widened and narrowed by this much, and a disagreement
/// flags the configuration instead of silently resolving it.
pub const MARGINALITY_GUARD: f64 = 1e-9;

/// Slack for the advisory Fekete monotonicity check on exact-sup inputs,
/// and the improvement tolerance of the adaptive refinement driver.
pub const FEKETE_SLACK: f64 = 1e-12;

/// The slope interval `Dfⁿ(x_α)𝒦_R`, closed at both ends.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeInterval {
    /// `Sₙ(x; α)`.
    pub center: f64,
    /// `ϑ_R / Dₙ`.
    pub half_width: f64,
    pub word: Word,
    /// `1 / Dₙ = 1 / det Dfⁿ`.
    pub weight: f64,
}

impl ConeInterval {
    pub fn lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half_width
    }
}

/// Build the cone-image interval of a branch for cone parameter `ϑ_R`.
pub fn cone_interval(branch: &BranchState, theta_r: f64) -> ConeInterval {
    ConeInterval {
        center: branch.slope,
        half_width: theta_r / branch.derivative,
        word: branch.word.clone(),
        weight: 1.0 / branch.derivative,
    }
}

/// Maximum number of closed intervals sharing a point, the leftmost
/// maximizing slope, and the member words sorted lexicographically.
pub fn max_overlap(intervals: &[ConeInterval]) -> (u64, Option<f64>, Vec<Word>) {
    let compact: Vec<SlopeInterval> = intervals
        .iter()
        .enumerate()
        .map(|(i, iv)| SlopeInterval { lo: iv.lo(), hi: iv.hi(), id: i as u64, weight: iv.weight })
        .collect();
    let (depth, witness, ids) = max_overlap_witness(&compact);
    let mut words: Vec<Word> =
        ids.into_iter().map(|id| intervals[id as usize].word.clone()).collect();
    words.sort_unstable();
    (depth, witness, words)
}

/// Per-branch `(slope, derivative)` pairs in lexicographic word order.
fn branch_profiles(
    map: &CircleMap,
    tau: &RoofFunction,
    x: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    map_branches(map, tau, x, n, |v| (v.slope, v.derivative))
}

fn slope_intervals(profiles: &[(f64, f64)], theta_r: f64) -> Vec<SlopeInterval> {
    profiles
        .iter()
        .enumerate()
        .map(|(i, &(s, d))| SlopeInterval::new(s, theta_r / d, i as u64, 1.0 / d))
        .collect()
}

fn theta_r_for(map: &CircleMap, tau: &RoofFunction, r: f64) -> Result<f64> {
    let (lambda, _) = map.expansion_bounds();
    let (_, theta_r) = tau.theta(lambda, r)?;
    Ok(theta_r)
}

/// Count-only inner supremum: one endpoint sort per base point, no witness
/// materialization. Used by the strategy driver; witnesses are rebuilt only
/// at the winning point.
fn count_point(profiles: &[(f64, f64)], theta_r: f64) -> (u64, f64, bool) {
    let pairs: Vec<(f64, f64)> = profiles
        .iter()
        .map(|&(s, d)| {
            let h = theta_r / d;
            (s - h, s + h)
        })
        .collect();
    let sweep = EndpointSweep::new(pairs);
    let (count, point) = sweep.count_with_point();
    let marginal = sweep.count(MARGINALITY_GUARD) != sweep.count(-MARGINALITY_GUARD);
    (count, point.unwrap_or(0.0), marginal)
}

/// The exact inner supremum over unit vectors at a single base point.
#[derive(Debug, Clone)]
pub struct NcalAt {
    pub count: u64,
    pub witness_slope: f64,
    pub witness_words: Vec<Word>,
    /// Guard-band disagreement: the count changed under a `1e-9` widening or
    /// narrowing of every interval.
    pub marginal: bool,
}

/// `#{α ∈ 𝒜ⁿ : v ∈ Dfⁿ(x_α)𝒦_R}` maximized exactly over `v` for this `x`.
pub fn ncal_at(map: &CircleMap, tau: &RoofFunction, r: f64, n: usize, x: f64) -> Result<NcalAt> {
    let theta_r = theta_r_for(map, tau, r)?;
    let profiles = branch_profiles(map, tau, x, n)?;
    let intervals = slope_intervals(&profiles, theta_r);
    let (count, witness, ids) = max_overlap_witness(&intervals);
    let widened = max_overlap_count(&intervals, MARGINALITY_GUARD);
    let narrowed = max_overlap_count(&intervals, -MARGINALITY_GUARD);
    let words =
        ids.into_iter().map(|id| Word::from_rank(id, n, map.degree())).collect();
    Ok(NcalAt {
        count,
        witness_slope: witness.unwrap_or(0.0),
        witness_words: words,
        marginal: widened != narrowed,
    })
}

/// Strategy for sampling the outer supremum over base points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum XStrategy {
    /// Uniform grid of `points` base points.
    Grid { points: usize },
    /// The grid `{x : ⌈2Λ⌉ⁿ x ∈ ℤ}` at the largest depth whose size stays
    /// within `max_points`; falls back to a uniform grid (flagged truncated)
    /// if even depth 1 is too large.
    PaperGrid { max_points: usize },
    /// Start from a `coarse` uniform grid and refine around the running
    /// argmax until the value stabilizes for two refinement rounds.
    Adaptive { coarse: usize, max_rounds: usize },
}

impl XStrategy {
    pub fn describe(&self) -> String {
        match self {
            XStrategy::Grid { points } => format!("grid({points})"),
            XStrategy::PaperGrid { max_points } => format!("paper_grid(cap={max_points})"),
            XStrategy::Adaptive { coarse, max_rounds } => {
                format!("adaptive(coarse={coarse}, max_rounds={max_rounds})")
            }
        }
    }
}

/// Base points sampled by a strategy (the adaptive strategy starts from its
/// coarse grid).
pub struct SampledPoints {
    pub xs: Vec<f64>,
    pub truncated: bool,
}

pub fn sample_points(strategy: &XStrategy, map: &CircleMap, n: usize) -> SampledPoints {
    match strategy {
        XStrategy::Grid { points } | XStrategy::Adaptive { coarse: points, .. } => {
            let points = (*points).max(1);
            SampledPoints { xs: uniform_grid(points), truncated: false }
        }
        XStrategy::PaperGrid { max_points } => {
            let max_points = (*max_points).max(1) as u64;
            let m = (2.0 * map.upper_lambda()).ceil() as u64;
            if m > max_points {
                return SampledPoints {
                    xs: uniform_grid(max_points as usize),
                    truncated: true,
                };
            }
            let mut size = 1u64;
            let mut depth = 0usize;
            while depth < n && size.saturating_mul(m) <= max_points {
                size *= m;
                depth += 1;
            }
            SampledPoints {
                xs: (0..size).map(|i| i as f64 / size as f64).collect(),
                truncated: depth < n,
            }
        }
    }
}

fn uniform_grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| i as f64 / points as f64).collect()
}

/// One evaluated base point inside the strategy driver.
struct Candidate {
    x: f64,
    value: f64,
    flag: bool,
}

/// Maximize a per-point evaluation over a strategy. Points are evaluated in
/// parallel but merged in a fixed order with ties resolved toward the
/// smaller base point, so the result is independent of the worker count.
fn sup_over_strategy(
    map: &CircleMap,
    n: usize,
    strategy: &XStrategy,
    eval: &(dyn Fn(f64) -> Result<(f64, bool)> + Sync),
) -> Result<(Candidate, bool, bool)> {
    let initial = sample_points(strategy, map, n);
    let (mut best, mut any_flag) = eval_batch(&initial.xs, eval)?;

    if let XStrategy::Adaptive { coarse, max_rounds } = strategy {
        let mut spacing = 1.0 / (*coarse).max(1) as f64;
        let mut stable = 0usize;
        let mut round = 0usize;
        while stable < 2 && round < *max_rounds {
            spacing /= 8.0;
            let xs: Vec<f64> =
                (-8..=8).map(|i| frac(best.x + i as f64 * spacing)).collect();
            let (cand, flag) = eval_batch(&xs, eval)?;
            any_flag |= flag;
            let improved = cand.value > best.value + FEKETE_SLACK;
            best = merge(best, cand);
            stable = if improved { 0 } else { stable + 1 };
            round += 1;
        }
    }
    Ok((best, any_flag, initial.truncated))
}

fn eval_batch(
    xs: &[f64],
    eval: &(dyn Fn(f64) -> Result<(f64, bool)> + Sync),
) -> Result<(Candidate, bool)> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("no base points sampled".into()));
    }
    let evaluated: Vec<Result<Candidate>> = xs
        .par_iter()
        .map(|&x| {
            let (value, flag) = eval(x)?;
            Ok(Candidate { x, value, flag })
        })
        .collect();
    let mut best: Option<Candidate> = None;
    let mut any_flag = false;
    for cand in evaluated {
        let cand = cand?;
        any_flag |= cand.flag;
        best = Some(match best {
            None => cand,
            Some(b) => merge(b, cand),
        });
    }
    Ok((best.expect("nonempty batch"), any_flag))
}

fn merge(a: Candidate, b: Candidate) -> Candidate {
    if b.value > a.value || (b.value == a.value && b.x < a.x) {
        b
    } else {
        a
    }
}

/// The sampled outer supremum of [`ncal_at`]: a certified lower bound for
/// `𝒩(τ, R; n)` that is exact in the unit-vector supremum at each point.
#[derive(Debug, Clone)]
pub struct Ncal {
    pub count: u64,
    pub witness_x: f64,
    pub witness_slope: f64,
    pub witness_words: Vec<Word>,
    /// Any sampled point showed guard-band disagreement.
    pub marginal: bool,
    /// The paper grid was truncated to fit the point cap.
    pub truncated_grid: bool,
}

pub fn ncal(
    map: &CircleMap,
    tau: &RoofFunction,
    r: f64,
    n: usize,
    strategy: &XStrategy,
) -> Result<Ncal> {
    let theta_r = theta_r_for(map, tau, r)?;
    let eval = |x: f64| -> Result<(f64, bool)> {
        let profiles = branch_profiles(map, tau, x, n)?;
        let (count, _, marginal) = count_point(&profiles, theta_r);
        Ok((count as f64, marginal))
    };
    let (best, marginal, truncated) = sup_over_strategy(map, n, strategy, &eval)?;
    // Witnesses are only materialized at the argmax.
    let at = ncal_at(map, tau, r, n, best.x)?;
    debug_assert_eq!(at.count, best.value as u64);
    Ok(Ncal {
        count: at.count,
        witness_x: best.x,
        witness_slope: at.witness_slope,
        witness_words: at.witness_words,
        marginal,
        truncated_grid: truncated,
    })
}

/// Sequence of `n`-th roots with advisory monotonicity checks on doubling
/// pairs `(n, 2n)`. For exact-sup inputs submultiplicativity forces the
/// roots to be non-increasing along the chain; with grid lower bounds the
/// flags are advisory only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeketeRoots {
    pub entries: Vec<(usize, f64)>,
    /// Pairs `(n, 2n)` with `root(2n) > root(n) + 1e-12`.
    pub advisories: Vec<(usize, usize)>,
}

pub fn fekete_roots(values: &[(usize, u64)]) -> FeketeRoots {
    let entries: Vec<(usize, f64)> = values
        .iter()
        .map(|&(n, count)| (n, (count.max(1) as f64).powf(1.0 / n as f64)))
        .collect();
    let mut advisories = Vec::new();
    for &(n, root_n) in &entries {
        if let Some(&(n2, root_2n)) = entries.iter().find(|&&(m, _)| m == 2 * n) {
            if root_2n > root_n + FEKETE_SLACK {
                advisories.push((n, n2));
            }
        }
    }
    FeketeRoots { entries, advisories }
}

/// Weighted variant of the counting function: the supremum over sampled
/// base points and over slopes of `Σ 1/Dₙ` across the intervals containing
/// the slope.
pub fn weighted_n(
    map: &CircleMap,
    tau: &RoofFunction,
    r: f64,
    n: usize,
    strategy: &XStrategy,
) -> Result<f64> {
    let theta_r = theta_r_for(map, tau, r)?;
    let eval = |x: f64| -> Result<(f64, bool)> {
        let profiles = branch_profiles(map, tau, x, n)?;
        let intervals = slope_intervals(&profiles, theta_r);
        let (best, _) = max_weighted_overlap(&intervals);
        Ok((best, false))
    };
    let (best, _, _) = sup_over_strategy(map, n, strategy, &eval)?;
    Ok(best.value)
}

/// Which summation the pairwise weighted count uses.
///
/// `Intersecting` sums the weights of branches whose cone interval meets the
/// reference branch's interval (cones not transversal); this is the reading
/// forced by the coboundary characterization. `Disjoint` sums over empty
/// intersections instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverlapMode {
    Intersecting,
    Disjoint,
}

/// Supremum over sampled base points and reference branches `w` of the
/// weighted sum over branches whose interval intersects (or misses) `w`'s.
pub fn weighted_m(
    map: &CircleMap,
    tau: &RoofFunction,
    r: f64,
    n: usize,
    strategy: &XStrategy,
    mode: OverlapMode,
) -> Result<f64> {
    let theta_r = theta_r_for(map, tau, r)?;
    let eval = |x: f64| -> Result<(f64, bool)> {
        let profiles = branch_profiles(map, tau, x, n)?;
        let intervals = slope_intervals(&profiles, theta_r);
        Ok((pairwise_weighted_max(&intervals, mode), false))
    };
    let (best, _, _) = sup_over_strategy(map, n, strategy, &eval)?;
    Ok(best.value)
}

/// For each reference interval, the intersecting weight sum is
/// `total − Σ_{lo_i > hi_w} w_i − Σ_{hi_i < lo_w} w_i`, computed with sorted
/// endpoint arrays and prefix sums.
fn pairwise_weighted_max(intervals: &[SlopeInterval], mode: OverlapMode) -> f64 {
    if intervals.is_empty() {
        return 0.0;
    }
    let total: f64 = intervals.iter().map(|iv| iv.weight).sum();

    let mut by_lo: Vec<(f64, f64)> = intervals.iter().map(|iv| (iv.lo, iv.weight)).collect();
    by_lo.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut suffix_by_lo = vec![0.0; by_lo.len() + 1];
    for i in (0..by_lo.len()).rev() {
        suffix_by_lo[i] = suffix_by_lo[i + 1] + by_lo[i].1;
    }

    let mut by_hi: Vec<(f64, f64)> = intervals.iter().map(|iv| (iv.hi, iv.weight)).collect();
    by_hi.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut prefix_by_hi = vec![0.0; by_hi.len() + 1];
    for i in 0..by_hi.len() {
        prefix_by_hi[i + 1] = prefix_by_hi[i] + by_hi[i].1;
    }

    let mut best = f64::NEG_INFINITY;
    for w in intervals {
        let right = by_lo.partition_point(|&(lo, _)| lo <= w.hi);
        let strictly_right = suffix_by_lo[right];
        let left = by_hi.partition_point(|&(hi, _)| hi < w.lo);
        let strictly_left = prefix_by_hi[left];
        let intersecting = total - strictly_right - strictly_left;
        let value = match mode {
            OverlapMode::Intersecting => intersecting,
            OverlapMode::Disjoint => total - intersecting,
        };
        best = best.max(value);
    }
    best
}

/// `(min over sampled x of the minimal branch derivative)^{-1/n}`.
pub fn chi_estimate(map: &CircleMap, n: usize, xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("chi estimate needs base points".into()));
    }
    let zero = RoofFunction::constant(0.0);
    let mins: Vec<Result<f64>> = xs
        .par_iter()
        .map(|&x| {
            let profiles = branch_profiles(map, &zero, x, n)?;
            Ok(profiles.iter().map(|&(_, d)| d).fold(f64::INFINITY, f64::min))
        })
        .collect();
    let mut min_d = f64::INFINITY;
    for m in mins {
        min_d = min_d.min(m?);
    }
    Ok(min_d.powf(-1.0 / n as f64))
}

/// Bracket for the infinite-sum count over finite words.
///
/// Each branch's infinite-extension slope is pinned to `Sₙ ± ϑ_τ/Dₙ`, so
/// counting with half-widths `(R̃ ∓ ϑ_τ)/Dₙ` yields certified lower and
/// upper values of the supremum restricted to the sampled base points.
/// Per-point bracket: counts with shrunk and inflated half-widths
/// `(R̃ ∓ ϑ_τ)/Dₙ` (branches whose shrunk interval empties out are dropped).
pub fn ntilde_at(
    map: &CircleMap,
    tau: &RoofFunction,
    r_tilde: f64,
    n: usize,
    x: f64,
) -> Result<(u64, u64)> {
    if !(r_tilde > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "the comparison radius must be positive, got {r_tilde}"
        )));
    }
    let (lambda, _) = map.expansion_bounds();
    let theta_tau = tau.sup_deriv() / (lambda - 1.0);
    let profiles = branch_profiles(map, tau, x, n)?;
    let count_with = |radius: f64| -> u64 {
        let intervals: Vec<SlopeInterval> = profiles
            .iter()
            .enumerate()
            .filter(|&(_, &(_, d))| radius / d >= 0.0)
            .map(|(i, &(s, d))| SlopeInterval::new(s, radius / d, i as u64, 1.0 / d))
            .collect();
        max_overlap_count(&intervals, 0.0)
    };
    Ok((count_with(r_tilde - theta_tau), count_with(r_tilde + theta_tau)))
}

pub fn ntilde(
    map: &CircleMap,
    tau: &RoofFunction,
    r_tilde: f64,
    n: usize,
    strategy: &XStrategy,
) -> Result<(u64, u64)> {
    let lower_eval =
        |x: f64| -> Result<(f64, bool)> { Ok((ntilde_at(map, tau, r_tilde, n, x)?.0 as f64, false)) };
    let upper_eval =
        |x: f64| -> Result<(f64, bool)> { Ok((ntilde_at(map, tau, r_tilde, n, x)?.1 as f64, false)) };
    let (lower, _, _) = sup_over_strategy(map, n, strategy, &lower_eval)?;
    let (upper, _, _) = sup_over_strategy(map, n, strategy, &upper_eval)?;
    Ok((lower.value as u64, upper.value as u64))
}

/// Certified upper bound on the spread of the limit slopes `S(x; α)` over
/// all branches at `x`: the observed spread of `Sₙ` plus twice the tail
/// bound. Exactly zero for constant roofs and of order `λ⁻ⁿ` for
/// coboundaries, but bounded away from zero for genuine non-coboundaries.
pub fn coboundary_spread(map: &CircleMap, tau: &RoofFunction, x: f64, n: usize) -> Result<f64> {
    let (lambda, _) = map.expansion_bounds();
    let profiles = branch_profiles(map, tau, x, n)?;
    let mut min_s = f64::INFINITY;
    let mut max_s = f64::NEG_INFINITY;
    for &(s, _) in &profiles {
        min_s = min_s.min(s);
        max_s = max_s.max(s);
    }
    Ok((max_s - min_s) + 2.0 * tail_bound(tau, lambda, n))
}

/// Spread of Birkhoff averages over all periodic words of period `≤ max_period`.
pub fn birkhoff_spread(
    map: &CircleMap,
    tau: &RoofFunction,
    max_period: usize,
) -> Result<f64> {
    let mut min_avg = f64::INFINITY;
    let mut max_avg = f64::NEG_INFINITY;
    for p in 1..=max_period {
        let total = (map.degree() as u64).pow(p as u32);
        for rank in 0..total {
            let word = Word::from_rank(rank, p, map.degree());
            let avg = crate::branch_enum::birkhoff_average(map, tau, &word)?;
            min_avg = min_avg.min(avg);
            max_avg = max_avg.max(avg);
        }
    }
    Ok(max_avg - min_avg)
}

/// The refined cone radius `R'_m = ‖τ'‖∞ + λ⁻ᵐ(R − ‖τ'‖∞) < R` after `m`
/// forward steps.
pub fn refined_radius(map: &CircleMap, tau: &RoofFunction, r: f64, m: usize) -> f64 {
    let (lambda, _) = map.expansion_bounds();
    let sup = tau.sup_deriv();
    sup + lambda.powi(-(m as i32)) * (r - sup)
}

/// Exact per-point form of the submultiplicative inequality.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Submultiplicativity {
    /// `count(x; R; n+m)`.
    pub lhs: u64,
    /// `count(x; R'_m; n)`.
    pub head: u64,
    /// `max over w ∈ E⁻ⁿ(x) of count(w; R; m)`.
    pub tail_max: u64,
    pub holds: bool,
}

/// Check `count(x; R; n+m) ≤ count(x; R'_m; n) · max_{w ∈ E⁻ⁿ(x)} count(w; R; m)`
/// as exact integers. The middle factor uses the refined radius and the last
/// factor maximizes the depth-`m` count over the depth-`n` preimages of `x`,
/// which is where the decomposition of `f^{n+m}` actually evaluates it.
pub fn submultiplicativity_check(
    map: &CircleMap,
    tau: &RoofFunction,
    r: f64,
    n: usize,
    m: usize,
    x: f64,
) -> Result<Submultiplicativity> {
    let theta_r = theta_r_for(map, tau, r)?;
    let r_refined = refined_radius(map, tau, r, m);
    let theta_refined = theta_r_for(map, tau, r_refined)?;

    let lhs = count_point(&branch_profiles(map, tau, x, n + m)?, theta_r).0;
    let head = count_point(&branch_profiles(map, tau, x, n)?, theta_refined).0;
    let zero = RoofFunction::constant(0.0);
    let preimages = map_branches(map, &zero, x, n, |v| v.point)?;
    let tails: Vec<Result<u64>> = preimages
        .par_iter()
        .map(|&w| Ok(count_point(&branch_profiles(map, tau, w, m)?, theta_r).0))
        .collect();
    let mut tail_max = 0u64;
    for t in tails {
        tail_max = tail_max.max(t?);
    }
    Ok(Submultiplicativity { lhs, head, tail_max, holds: lhs <= head * tail_max })
}

/// Bulk form of [`submultiplicativity_check`]: verifies every split of
/// every total depth `≤ max_total` at one base point.
///
/// Each depth is enumerated once; the depth-`m` branch data rooted at a
/// depth-`n` preimage `w = x_β` is derived from the cocycle relations
/// `D^w_m(γ) = D_{n+m}(βγ)/D_n(β)` and `S^w_m(γ) = D_n(β)·(S_{n+m}(βγ) −
/// S_n(β))` over the contiguous lexicographic block of extensions of `β`,
/// instead of re-solving the inverse branches at `w`.
pub fn submultiplicativity_table(
    map: &CircleMap,
    tau: &RoofFunction,
    r: f64,
    max_total: usize,
    x: f64,
) -> Result<Vec<(usize, usize, Submultiplicativity)>> {
    if max_total < 2 {
        return Err(Error::InvalidArgument("need max_total >= 2".into()));
    }
    let theta_r = theta_r_for(map, tau, r)?;
    let mut profiles: Vec<Vec<(f64, f64)>> = Vec::with_capacity(max_total + 1);
    profiles.push(Vec::new());
    for depth in 1..=max_total {
        profiles.push(branch_profiles(map, tau, x, depth)?);
    }
    let ell = map.degree();
    let mut out = Vec::new();
    for total in 2..=max_total {
        let lhs = count_point(&profiles[total], theta_r).0;
        for n in 1..total {
            let m = total - n;
            let theta_refined = theta_r_for(map, tau, refined_radius(map, tau, r, m))?;
            let head = count_point(&profiles[n], theta_refined).0;
            let block = ell.pow(m as u32);
            let deep = &profiles[total];
            let tail_max = profiles[n]
                .par_iter()
                .enumerate()
                .map(|(prefix, &(s_n, d_n))| {
                    let pairs: Vec<(f64, f64)> = deep[prefix * block..(prefix + 1) * block]
                        .iter()
                        .map(|&(s, d)| {
                            let center = d_n * (s - s_n);
                            let half = theta_r * d_n / d;
                            (center - half, center + half)
                        })
                        .collect();
                    EndpointSweep::new(pairs).count_with_point().0
                })
                .reduce(|| 0, u64::max);
            out.push((
                n,
                m,
                Submultiplicativity { lhs, head, tail_max, holds: lhs <= head * tail_max },
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch_enum::enumerate_branches;
    use crate::trig::TrigPoly;
    use std::f64::consts::TAU;

    fn doubling() -> CircleMap {
        CircleMap::linear(2).unwrap()
    }

    fn sine_roof() -> RoofFunction {
        RoofFunction::with_certified_sup_deriv(TrigPoly::sine(1, 1.0 / TAU), 1.0).unwrap()
    }

    #[test]
    fn cone_interval_hand_values() {
        let b = BranchState { word: Word::new(vec![0]), point: 0.0, derivative: 2.0, slope: 0.5 };
        let iv = cone_interval(&b, 2.0);
        assert_eq!((iv.lo(), iv.hi()), (-0.5, 1.5));
        assert_eq!(iv.weight, 0.5);

        let b2 = BranchState { word: Word::new(vec![1]), point: 0.0, derivative: 4.0, slope: -0.5 };
        let iv2 = cone_interval(&b2, 2.0);
        assert_eq!((iv2.lo(), iv2.hi()), (-1.0, 0.0));
    }

    #[test]
    fn cone_interval_flat_roof() {
        let map = doubling();
        let tau = RoofFunction::constant(0.0);
        let n = 4;
        let theta_r = 1.5;
        for b in enumerate_branches(&map, &tau, 0.3, n).unwrap() {
            let iv = cone_interval(&b, theta_r);
            let expected = theta_r / 2f64.powi(n as i32);
            assert_eq!(iv.center, 0.0);
            assert!((iv.half_width - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn cone_intervals_respect_refined_radius() {
        let map = CircleMap::new(2, TrigPoly::sine(1, 0.05)).unwrap();
        let tau = RoofFunction::from_trig(TrigPoly::sine(1, 0.2));
        let r = 2.0;
        let (lambda, _) = map.expansion_bounds();
        for n in [1usize, 3, 6] {
            let theta_r = tau.theta(lambda, r).unwrap().1;
            let refined = refined_radius(&map, &tau, r, n) / (lambda - 1.0);
            for b in enumerate_branches(&map, &tau, 0.37, n).unwrap() {
                let iv = cone_interval(&b, theta_r);
                assert!(iv.hi() <= refined + 1e-9, "n={n}");
                assert!(iv.lo() >= -refined - 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn max_overlap_simple_and_empty() {
        let mk = |lo: f64, hi: f64, id: u8| ConeInterval {
            center: 0.5 * (lo + hi),
            half_width: 0.5 * (hi - lo),
            word: Word::new(vec![id]),
            weight: 1.0,
        };
        let (depth, witness, words) = max_overlap(&[mk(0.0, 2.0, 0), mk(1.0, 3.0, 1), mk(5.0, 6.0, 2)]);
        assert_eq!(depth, 2);
        assert_eq!(witness, Some(1.0));
        assert_eq!(words.len(), 2);

        assert_eq!(max_overlap(&[]), (0, None, Vec::new()));
    }

    #[test]
    fn max_overlap_depth_two_case() {
        // centers {0.75, 0.25, −0.5, −0.5}, half-width 0.5 → depth 3 at −0.25.
        let map = doubling();
        let tau = sine_roof();
        let theta_r = 2.0;
        let intervals: Vec<ConeInterval> = enumerate_branches(&map, &tau, 0.0, 2)
            .unwrap()
            .iter()
            .map(|b| cone_interval(b, theta_r))
            .collect();
        let (depth, witness, _) = max_overlap(&intervals);
        assert_eq!(depth, 3);
        assert!((witness.unwrap() + 0.25).abs() < 1e-12);

        // Brute-force endpoint oracle agrees.
        let compact: Vec<SlopeInterval> = intervals
            .iter()
            .enumerate()
            .map(|(i, iv)| SlopeInterval { lo: iv.lo(), hi: iv.hi(), id: i as u64, weight: 1.0 })
            .collect();
        assert_eq!(crate::sweep::brute_force_max_overlap(&compact), 3);
    }

    #[test]
    fn ncal_at_flat_roof_saturates() {
        let map = doubling();
        let tau = RoofFunction::constant(0.9);
        for n in [1usize, 4, 7] {
            let at = ncal_at(&map, &tau, 1.0, n, 0.37).unwrap();
            assert_eq!(at.count, 1 << n);
            assert!(!at.marginal);
        }
    }

    #[test]
    fn ncal_at_depth_one_split() {
        let map = doubling();
        let tau = sine_roof();
        let at = ncal_at(&map, &tau, 2.0, 1, 0.0).unwrap();
        assert_eq!(at.count, 2);
    }

    #[test]
    fn ncal_at_coboundary_saturates() {
        let map = doubling();
        let phi = TrigPoly::sine(1, 0.1);
        let tau = RoofFunction::coboundary(phi, 0.0, &map);
        // ϑ_R > ‖φ'‖∞ + ϑ_τ keeps the common line inside every cone.
        let r = 3.0;
        for n in [1usize, 5, 9] {
            let at = ncal_at(&map, &tau, r, n, 0.21).unwrap();
            assert_eq!(at.count, 1 << n, "n={n}");
        }
    }

    #[test]
    fn ncal_rejects_small_radius() {
        let map = doubling();
        let tau = sine_roof();
        assert!(matches!(
            ncal(&map, &tau, 0.5, 3, &XStrategy::Grid { points: 8 }),
            Err(Error::ConeRadiusTooSmall { .. })
        ));
    }

    #[test]
    fn ncal_constant_roof_any_strategy() {
        let map = doubling();
        let tau = RoofFunction::constant(0.3);
        for strategy in [
            XStrategy::Grid { points: 32 },
            XStrategy::PaperGrid { max_points: 64 },
            XStrategy::Adaptive { coarse: 8, max_rounds: 6 },
        ] {
            let out = ncal(&map, &tau, 1.0, 5, &strategy).unwrap();
            assert_eq!(out.count, 32, "{}", strategy.describe());
        }
    }

    #[test]
    fn ncal_generic_roof_loses_branches() {
        let map = doubling();
        let tau = sine_roof();
        let out = ncal(&map, &tau, 2.0, 8, &XStrategy::Grid { points: 512 }).unwrap();
        assert!(out.count >= 1 && out.count < 256, "count {}", out.count);
        assert_eq!(out.witness_words.len(), out.count as usize);
    }

    #[test]
    fn ncal_monotone_in_radius() {
        let map = doubling();
        let tau = sine_roof();
        let grid = XStrategy::Grid { points: 64 };
        let small = ncal(&map, &tau, 1.5, 6, &grid).unwrap();
        let large = ncal(&map, &tau, 3.0, 6, &grid).unwrap();
        assert!(small.count <= large.count);
    }

    #[test]
    fn paper_grid_sampling() {
        let map = doubling();
        let pts = sample_points(&XStrategy::PaperGrid { max_points: 100 }, &map, 1);
        assert_eq!(pts.xs, vec![0.0, 0.25, 0.5, 0.75]);
        assert!(!pts.truncated);

        let pts2 = sample_points(&XStrategy::PaperGrid { max_points: 100 }, &map, 2);
        assert_eq!(pts2.xs.len(), 16);
        assert!(!pts2.truncated);

        let pts3 = sample_points(&XStrategy::PaperGrid { max_points: 64 }, &map, 20);
        assert_eq!(pts3.xs.len(), 64);
        assert!(pts3.truncated);
    }

    #[test]
    fn fekete_roots_basic() {
        let saturated = fekete_roots(&[(2, 4), (4, 16), (8, 256)]);
        for &(_, root) in &saturated.entries {
            assert!((root - 2.0).abs() < 1e-12);
        }
        assert!(saturated.advisories.is_empty());

        let captive = fekete_roots(&[(2, 1), (4, 1), (8, 1)]);
        for &(_, root) in &captive.entries {
            assert_eq!(root, 1.0);
        }

        let violating = fekete_roots(&[(2, 2), (4, 9)]);
        assert_eq!(violating.advisories, vec![(2, 4)]);
    }

    #[test]
    fn weighted_counts_flat_roof() {
        let map = doubling();
        let tau = RoofFunction::constant(0.0);
        let grid = XStrategy::Grid { points: 16 };
        let n = weighted_n(&map, &tau, 1.0, 6, &grid).unwrap();
        assert!((n - 1.0).abs() < 1e-12);
        let m = weighted_m(&map, &tau, 1.0, 6, &grid, OverlapMode::Intersecting).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        let d = weighted_m(&map, &tau, 1.0, 6, &grid, OverlapMode::Disjoint).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn weighted_counts_below_distortion_sum() {
        let map = CircleMap::new(2, TrigPoly::sine(1, 0.05)).unwrap();
        let tau = RoofFunction::from_trig(TrigPoly::sine(1, 0.2));
        let n = 7;
        let xs = [0.0, 0.22, 0.63];
        for &x in &xs {
            let total = crate::branch_enum::distortion_sum(&map, x, n).unwrap();
            let profiles = branch_profiles(&map, &tau, x, n).unwrap();
            let theta_r = theta_r_for(&map, &tau, 1.5).unwrap();
            let intervals = slope_intervals(&profiles, theta_r);
            let (w, _) = max_weighted_overlap(&intervals);
            assert!(w <= total + 1e-12);
            let pm = pairwise_weighted_max(&intervals, OverlapMode::Intersecting);
            assert!(pm <= total + 1e-12);
        }
    }

    #[test]
    fn weighted_n_matches_per_slope_brute_force() {
        let map = doubling();
        let tau = sine_roof();
        let n = 8;
        let x = 0.4375;
        let theta_r = theta_r_for(&map, &tau, 2.0).unwrap();
        let profiles = branch_profiles(&map, &tau, x, n).unwrap();
        let intervals = slope_intervals(&profiles, theta_r);
        let (sweep_value, _) = max_weighted_overlap(&intervals);

        // Brute force: evaluate the weighted membership sum at every endpoint.
        let mut brute = 0.0f64;
        for probe in intervals.iter().flat_map(|iv| [iv.lo, iv.hi]) {
            let sum: f64 = intervals
                .iter()
                .filter(|iv| iv.lo <= probe && probe <= iv.hi)
                .map(|iv| iv.weight)
                .sum();
            brute = brute.max(sum);
        }
        assert!((sweep_value - brute).abs() < 1e-12);
        // All weights are 2⁻ⁿ on the doubling map, so the weighted count is
        // the plain count rescaled.
        let at = ncal_at(&map, &tau, 2.0, n, x).unwrap();
        assert!((sweep_value - at.count as f64 / 256.0).abs() < 1e-12);
    }

    #[test]
    fn chi_linear_maps() {
        let xs = uniform_grid(8);
        assert!((chi_estimate(&doubling(), 6, &xs).unwrap() - 0.5).abs() < 1e-12);
        let triple = CircleMap::linear(3).unwrap();
        assert!((chi_estimate(&triple, 4, &xs).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn chi_perturbed_in_bounds() {
        let map = CircleMap::new(2, TrigPoly::sine(1, 0.05)).unwrap();
        let (lo, hi) = map.expansion_bounds();
        let chi = chi_estimate(&map, 6, &uniform_grid(16)).unwrap();
        assert!(chi >= 1.0 / hi - 1e-12 && chi <= 1.0 / lo + 1e-12);
    }

    #[test]
    fn ntilde_flat_roof_exact() {
        let map = doubling();
        let tau = RoofFunction::constant(0.25);
        let grid = XStrategy::Grid { points: 8 };
        for r_tilde in [0.3, 1.0, 5.0] {
            let (lower, upper) = ntilde(&map, &tau, r_tilde, 5, &grid).unwrap();
            assert_eq!((lower, upper), (32, 32));
        }
    }

    #[test]
    fn ntilde_brackets_ncal() {
        let map = doubling();
        let tau = sine_roof();
        let r = 2.0;
        let (lambda, _) = map.expansion_bounds();
        let (theta_tau, theta_r) = tau.theta(lambda, r).unwrap();
        let grid = XStrategy::Grid { points: 32 };
        for n in [3usize, 6] {
            let pts = sample_points(&grid, &map, n);
            for &x in &pts.xs {
                let count = ncal_at(&map, &tau, r, n, x).unwrap().count;
                // Lower: R̃ with ϑ_R ≥ R̃ + ϑ_τ.
                let r_small = theta_r - theta_tau;
                let profiles = branch_profiles(&map, &tau, x, n).unwrap();
                let shrunk: Vec<SlopeInterval> = profiles
                    .iter()
                    .enumerate()
                    .filter(|&(_, &(_, d))| (r_small - theta_tau) / d >= 0.0)
                    .map(|(i, &(s, d))| {
                        SlopeInterval::new(s, (r_small - theta_tau) / d, i as u64, 1.0)
                    })
                    .collect();
                let lower_at = max_overlap_count(&shrunk, 0.0);
                assert!(lower_at <= count, "x={x}, n={n}");
                // Upper: R̃ > ϑ_R + ϑ_τ.
                let r_big = theta_r + theta_tau + 0.1;
                let inflated: Vec<SlopeInterval> = profiles
                    .iter()
                    .enumerate()
                    .map(|(i, &(s, d))| {
                        SlopeInterval::new(s, (r_big + theta_tau) / d, i as u64, 1.0)
                    })
                    .collect();
                let upper_at = max_overlap_count(&inflated, 0.0);
                assert!(count <= upper_at, "x={x}, n={n}");
            }
        }
    }

    #[test]
    fn ntilde_lower_below_upper() {
        let map = CircleMap::new(2, TrigPoly::sine(1, 0.04)).unwrap();
        let tau = RoofFunction::from_trig(TrigPoly::new(0.0, vec![0.15], vec![0.1]));
        let grid = XStrategy::Grid { points: 16 };
        let (lower, upper) = ntilde(&map, &tau, 1.2, 5, &grid).unwrap();
        assert!(lower <= upper);
    }

    #[test]
    fn coboundary_spread_values() {
        let map = doubling();

        let constant = RoofFunction::constant(0.55);
        assert_eq!(coboundary_spread(&map, &constant, 0.3, 8).unwrap(), 0.0);

        let phi = TrigPoly::sine(1, 0.1);
        let cob = RoofFunction::coboundary(phi.clone(), 0.0, &map);
        let spread = coboundary_spread(&map, &cob, 0.3, 12).unwrap();
        let phi_deriv_sup = 0.1 * TAU;
        let (lambda, _) = map.expansion_bounds();
        let bound = 2.0 * phi_deriv_sup / 4096.0 + 2.0 * tail_bound(&cob, lambda, 12);
        assert!(spread <= bound + 1e-12, "spread {spread} bound {bound}");

        let generic = sine_roof();
        let spread = coboundary_spread(&map, &generic, 0.0, 12).unwrap();
        assert!(spread > 0.5);
    }

    #[test]
    fn submultiplicativity_small_cases() {
        let map = CircleMap::new(2, TrigPoly::sine(1, 0.05)).unwrap();
        let tau = RoofFunction::from_trig(TrigPoly::sine(1, 0.2));
        for (n, m) in [(2usize, 2usize), (3, 2), (4, 3)] {
            let check = submultiplicativity_check(&map, &tau, 1.5, n, m, 0.3).unwrap();
            assert!(check.holds, "n={n} m={m}: {check:?}");
        }
    }

    #[test]
    fn submultiplicativity_table_matches_per_pair_checks() {
        // The bulk table derives preimage-level branch data from the cocycle
        // relations; the per-pair check re-enumerates at the preimages. Both
        // routes must produce the same exact integers.
        let map = CircleMap::new(2, TrigPoly::new(0.0, vec![0.04], vec![0.01, -0.01])).unwrap();
        let tau = RoofFunction::from_trig(TrigPoly::new(0.1, vec![0.25], vec![-0.15]));
        let table = submultiplicativity_table(&map, &tau, 2.2, 7, 0.41).unwrap();
        assert_eq!(table.len(), 6 + 5 + 4 + 3 + 2 + 1);
        for (n, m, bulk) in table {
            let direct = submultiplicativity_check(&map, &tau, 2.2, n, m, 0.41).unwrap();
            assert_eq!(bulk.lhs, direct.lhs, "n={n} m={m}");
            assert_eq!(bulk.head, direct.head, "n={n} m={m}");
            assert_eq!(bulk.tail_max, direct.tail_max, "n={n} m={m}");
            assert!(bulk.holds, "n={n} m={m}: {bulk:?}");
        }
    }

    #[test]
    fn guard_band_flags_marginal_and_clear_configurations() {
        let map = doubling();

        // Comfortably non-marginal: constant roof, intervals nest deeply.
        let tau = RoofFunction::constant(0.0);
        let at = ncal_at(&map, &tau, 1.0, 6, 0.11).unwrap();
        assert!(!at.marginal);

        // Engineered marginal case: at x = 0, n = 1 the two cone intervals
        // are [−1/2 − h, 1/2 + h] shifted to ±1/2, touching with overlap
        // 2e-10 — inside the guard band, so widening and narrowing disagree.
        let tau = sine_roof();
        let at = ncal_at(&map, &tau, 1.0 + 2e-10, 1, 0.0).unwrap();
        assert_eq!(at.count, 2);
        assert!(at.marginal, "2e-10 overlap must be flagged");

        // Same setup with a decisive overlap: not marginal.
        let at = ncal_at(&map, &tau, 1.1, 1, 0.0).unwrap();
        assert_eq!(at.count, 2);
        assert!(!at.marginal);

        // The flag propagates through the strategy driver.
        let out = ncal(&map, &tau, 1.0 + 2e-10, 1, &XStrategy::Grid { points: 4 }).unwrap();
        assert!(out.marginal);
    }
}
