//! Symbolic backward-orbit machinery.
//!
//! Words over the alphabet `{0, …, ℓ−1}` index the `ℓⁿ` inverse branches of
//! `Eⁿ`. A depth-first walk maintains the branch point `x_α`, the derivative
//! product `Dₙ = (Eⁿ)'(x_α)` and the slope `Sₙ = Σ_k τ'(x_{[α]_k})/Dₖ`
//! incrementally, so every node costs one inverse-branch solve and the
//! whole enumeration needs memory proportional to the depth.

use crate::circle_map::CircleMap;
use crate::cocycle::RoofFunction;
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A word over the branch alphabet.
///
/// `symbols[k]` is the symbol chosen at depth `k + 1`, i.e. the first entry
/// is applied to the root point first. Truncations are prefixes, and the
/// enumeration below streams words in lexicographic order of this
/// representation, so witnesses are reproducible.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(symbols: Vec<u8>) -> Self {
        Word(symbols)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    /// The depth-`p` truncation (the first `p` symbols).
    pub fn truncate(&self, p: usize) -> Word {
        Word(self.0[..p.min(self.0.len())].to_vec())
    }

    /// Rank of the word in the lexicographic stream of depth-`len` words.
    pub fn rank(&self, degree: usize) -> u64 {
        let mut r = 0u64;
        for &s in &self.0 {
            r = r * degree as u64 + s as u64;
        }
        r
    }

    /// Inverse of [`Word::rank`].
    pub fn from_rank(mut rank: u64, len: usize, degree: usize) -> Self {
        let mut symbols = vec![0u8; len];
        for k in (0..len).rev() {
            symbols[k] = (rank % degree as u64) as u8;
            rank /= degree as u64;
        }
        Word(symbols)
    }
}

/// A fully materialized branch of `E⁻ⁿ` rooted at some `x`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchState {
    pub word: Word,
    /// The branch point `x_α`.
    pub point: f64,
    /// `Dₙ = (Eⁿ)'(x_α)`.
    pub derivative: f64,
    /// `Sₙ(x; α)`, the slope of the image of the horizontal line.
    pub slope: f64,
}

impl BranchState {
    /// The depth-0 state at the root: empty word, derivative 1, slope 0.
    pub fn root(x: f64) -> Self {
        BranchState { word: Word::empty(), point: x, derivative: 1.0, slope: 0.0 }
    }
}

/// Borrowed view of a branch during enumeration; the symbol buffer is reused
/// between callbacks.
#[derive(Debug, Clone, Copy)]
pub struct BranchView<'a> {
    pub symbols: &'a [u8],
    pub point: f64,
    pub derivative: f64,
    pub slope: f64,
}

impl BranchView<'_> {
    pub fn to_state(&self) -> BranchState {
        BranchState {
            word: Word::new(self.symbols.to_vec()),
            point: self.point,
            derivative: self.derivative,
            slope: self.slope,
        }
    }
}

/// One backward step: `y' = E⁻¹_symbol(y)`, `D' = E'(y')·D`, `S' = S + τ'(y')/D'`.
pub fn extend(
    state: &BranchState,
    symbol: usize,
    map: &CircleMap,
    tau: &RoofFunction,
) -> Result<BranchState> {
    let y = map.inverse_branch(symbol, state.point)?;
    let e = map.derivative(y);
    let d = e * state.derivative;
    let s = state.slope + tau.derivative(y) / d;
    let mut symbols = state.word.symbols().to_vec();
    symbols.push(symbol as u8);
    Ok(BranchState { word: Word::new(symbols), point: y, derivative: d, slope: s })
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: FnMut(BranchView<'_>)>(
    map: &CircleMap,
    tau: &RoofFunction,
    buf: &mut Vec<u8>,
    y: f64,
    d: f64,
    s: f64,
    remaining: usize,
    f: &mut F,
) -> Result<()> {
    if remaining == 0 {
        f(BranchView { symbols: buf, point: y, derivative: d, slope: s });
        return Ok(());
    }
    for j in 0..map.degree() {
        let y2 = map.inverse_branch(j, y)?;
        let e = map.derivative(y2);
        let d2 = e * d;
        let s2 = s + tau.derivative(y2) / d2;
        buf.push(j as u8);
        recurse(map, tau, buf, y2, d2, s2, remaining - 1, f)?;
        buf.pop();
    }
    Ok(())
}

/// Depth-first walk over all `ℓⁿ` branches of `E⁻ⁿ(x)` in lexicographic
/// order, invoking `f` once per leaf.
pub fn visit_branches<F: FnMut(BranchView<'_>)>(
    map: &CircleMap,
    tau: &RoofFunction,
    x: f64,
    n: usize,
    mut f: F,
) -> Result<()> {
    let mut buf = Vec::with_capacity(n);
    recurse(map, tau, &mut buf, crate::circle_map::frac(x), 1.0, 0.0, n, &mut f)
}

/// Collect every branch as an owned [`BranchState`], in lexicographic order.
pub fn enumerate_branches(
    map: &CircleMap,
    tau: &RoofFunction,
    x: f64,
    n: usize,
) -> Result<Vec<BranchState>> {
    let capacity = map
        .degree()
        .checked_pow(n.min(u32::MAX as usize) as u32)
        .unwrap_or(usize::MAX)
        .min(1 << 22);
    let mut out = Vec::with_capacity(capacity);
    visit_branches(map, tau, x, n, |v| out.push(v.to_state()))?;
    Ok(out)
}

/// Map every branch through `f` and collect in lexicographic order,
/// splitting the top-level symbols across threads for `n` past a small
/// threshold. The per-branch arithmetic is identical to the serial walk and
/// subtree results are concatenated in symbol order, so the output does not
/// depend on the worker count.
pub fn map_branches<T, F>(
    map: &CircleMap,
    tau: &RoofFunction,
    x: f64,
    n: usize,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(BranchView<'_>) -> T + Sync,
{
    if n == 0 {
        return Err(Error::InvalidArgument("branch depth must be at least 1".into()));
    }
    let x = crate::circle_map::frac(x);
    if n < 8 {
        let mut out = Vec::new();
        visit_branches(map, tau, x, n, |v| out.push(f(v)))?;
        return Ok(out);
    }
    let subtrees: Vec<Result<Vec<T>>> = (0..map.degree())
        .into_par_iter()
        .map(|j| {
            let y = map.inverse_branch(j, x)?;
            let e = map.derivative(y);
            let d = e;
            let s = tau.derivative(y) / d;
            let mut buf = Vec::with_capacity(n);
            buf.push(j as u8);
            let mut out = Vec::new();
            recurse(map, tau, &mut buf, y, d, s, n - 1, &mut |v| out.push(f(v)))?;
            Ok(out)
        })
        .collect();
    let mut out = Vec::new();
    for sub in subtrees {
        out.extend(sub?);
    }
    Ok(out)
}

/// `Σ_{y ∈ E⁻ⁿ(x)} 1/(Eⁿ)'(y)`, the distortion sum whose uniform bounds
/// control small-derivative branch counts.
pub fn distortion_sum(map: &CircleMap, x: f64, n: usize) -> Result<f64> {
    let zero = RoofFunction::constant(0.0);
    let partials = map_branches(map, &zero, x, n, |v| 1.0 / v.derivative)?;
    Ok(partials.iter().sum())
}

/// `#{y ∈ E⁻ⁿ(x) : (Eⁿ)'(y) ≤ e^{bn}}`.
///
/// The comparison is made in log space with `1e-9` absolute slack so that
/// exact boundary cases (a linear map with `b = log ℓ`) are classified the
/// way real arithmetic would.
pub fn count_small_derivative(map: &CircleMap, x: f64, n: usize, b: f64) -> Result<u64> {
    let threshold = b * n as f64 + 1e-9;
    let zero = RoofFunction::constant(0.0);
    let flags = map_branches(map, &zero, x, n, |v| u64::from(v.derivative.ln() <= threshold))?;
    Ok(flags.iter().sum())
}

/// Certified bound `ϑ_τ·λ⁻ⁿ` on `|S(x;α) − Sₙ(x;α)|` over all infinite
/// extensions of a depth-`n` branch.
pub fn tail_bound(tau: &RoofFunction, lambda: f64, n: usize) -> f64 {
    tau.sup_deriv() / (lambda - 1.0) * lambda.powi(-(n as i32))
}

/// A periodic point located through the contraction of a composed inverse
/// branch. The all-`(ℓ−1)` word's fixed point sits on the interval boundary
/// `0 ≡ 1`; it is reported as 0 with the flag set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub point: f64,
    pub on_boundary: bool,
}

/// The unique fixed point of the composed inverse branch of `word`, which
/// satisfies `E^{|word|}(x) = x`.
pub fn periodic_point(map: &CircleMap, word: &Word) -> Result<PeriodicPoint> {
    if word.is_empty() {
        return Err(Error::InvalidArgument("periodic point needs a nonempty word".into()));
    }
    let top = (map.degree() - 1) as u8;
    if word.symbols().iter().all(|&s| s == top) {
        // The composed branch fixes the interval boundary 1 ≡ 0 exactly;
        // iterating would collapse onto 1.0 and wrap around.
        return Ok(PeriodicPoint { point: 0.0, on_boundary: true });
    }
    let mut x = 0.5;
    for _ in 0..500 {
        let mut y = x;
        for &s in word.symbols() {
            y = map.inverse_branch(s as usize, y)?;
        }
        let done = (y - x).abs() <= 1e-14;
        x = y;
        if done {
            return Ok(PeriodicPoint { point: x, on_boundary: false });
        }
    }
    Err(Error::InvalidArgument(format!(
        "periodic-point contraction did not settle for word {:?}",
        word.symbols()
    )))
}

/// Birkhoff average `(1/p)·Σ τ(Eⁱ x)` along the periodic orbit of `word`.
///
/// Constant across all periodic orbits exactly when τ is cohomologous to a
/// constant, so differences between averages witness non-coboundaries.
pub fn birkhoff_average(map: &CircleMap, tau: &RoofFunction, word: &Word) -> Result<f64> {
    let p = word.len();
    let x0 = periodic_point(map, word)?.point;
    let mut sum = 0.0;
    let mut x = x0;
    for _ in 0..p {
        sum += tau.eval(x);
        x = map.eval(x);
    }
    Ok(sum / p as f64)
}
