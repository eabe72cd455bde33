//! Endpoint sweep over closed slope intervals.
//!
//! Membership throughout the crate is the non-strict inequality
//! `|S − s| ≤ ϑ/D`, so at equal coordinates open events are processed before
//! close events and touching endpoints count as overlapping.

/// A closed interval `[lo, hi]` carrying the lexicographic branch rank and
/// the weight `1/Dₙ`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SlopeInterval {
    pub lo: f64,
    pub hi: f64,
    pub id: u64,
    pub weight: f64,
}

impl SlopeInterval {
    pub fn new(center: f64, half_width: f64, id: u64, weight: f64) -> Self {
        SlopeInterval { lo: center - half_width, hi: center + half_width, id, weight }
    }
}

fn sorted_events(intervals: &[SlopeInterval], delta: f64) -> Vec<(f64, bool, u64)> {
    let mut events = Vec::with_capacity(2 * intervals.len());
    for iv in intervals {
        let lo = iv.lo - delta;
        let hi = iv.hi + delta;
        if lo > hi {
            continue; // narrowed away entirely
        }
        events.push((lo, false, iv.id));
        events.push((hi, true, iv.id));
    }
    // Opens (false) sort before closes (true) at equal coordinates.
    events.sort_unstable_by(|a, b| {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });
    events
}

/// Maximum number of intervals sharing a point, with every endpoint widened
/// (`delta > 0`) or narrowed (`delta < 0`) for guard-band rechecks.
pub(crate) fn max_overlap_count(intervals: &[SlopeInterval], delta: f64) -> u64 {
    let events = sorted_events(intervals, delta);
    let mut depth = 0u64;
    let mut best = 0u64;
    for (_, close, _) in events {
        if close {
            depth -= 1;
        } else {
            depth += 1;
            best = best.max(depth);
        }
    }
    best
}

/// Maximum overlap depth plus the leftmost maximizing point and the ids of
/// the intervals containing it (sorted, i.e. lexicographic in branch words).
pub(crate) fn max_overlap_witness(
    intervals: &[SlopeInterval],
) -> (u64, Option<f64>, Vec<u64>) {
    let events = sorted_events(intervals, 0.0);
    let mut depth = 0u64;
    let mut best = 0u64;
    let mut witness = None;
    for (coord, close, _) in &events {
        if *close {
            depth -= 1;
        } else {
            depth += 1;
            if depth > best {
                best = depth;
                witness = Some(*coord);
            }
        }
    }
    let Some(w) = witness else {
        return (0, None, Vec::new());
    };
    let mut ids: Vec<u64> = intervals
        .iter()
        .filter(|iv| iv.lo <= w && w <= iv.hi)
        .map(|iv| iv.id)
        .collect();
    ids.sort_unstable();
    (best, Some(w), ids)
}

/// Count-optimized sweep state: intervals sorted by left endpoint alongside
/// an independently sorted array of right endpoints. One sort pays for any
/// number of guard-band counting passes (a two-pointer merge each).
pub(crate) struct EndpointSweep {
    /// `(lo, hi)` sorted by `lo`.
    pairs: Vec<(f64, f64)>,
    his: Vec<f64>,
    min_width: f64,
}

impl EndpointSweep {
    pub fn new(mut pairs: Vec<(f64, f64)>) -> Self {
        let mut min_width = f64::INFINITY;
        for &(lo, hi) in &pairs {
            min_width = min_width.min(hi - lo);
        }
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut his: Vec<f64> = pairs.iter().map(|&(_, hi)| hi).collect();
        his.sort_unstable_by(f64::total_cmp);
        EndpointSweep { pairs, his, min_width }
    }

    /// Maximum overlap with every interval replaced by `[lo − delta, hi + delta]`.
    pub fn count(&self, delta: f64) -> u64 {
        if delta < 0.0 && self.min_width < -2.0 * delta {
            // Some intervals narrow away entirely; the merge below would
            // process their close before their open. Filter and re-sort.
            let filtered: Vec<SlopeInterval> = self
                .pairs
                .iter()
                .enumerate()
                .map(|(i, &(lo, hi))| SlopeInterval { lo, hi, id: i as u64, weight: 1.0 })
                .collect();
            return max_overlap_count(&filtered, delta);
        }
        self.merge_count(2.0 * delta).0
    }

    /// Maximum overlap plus the leftmost maximizing coordinate.
    pub fn count_with_point(&self) -> (u64, Option<f64>) {
        let (best, arg) = self.merge_count(0.0);
        (best, arg)
    }

    /// Two-pointer merge: at each open `los[i]`, the depth is the number of
    /// opens so far minus the closes strictly before it (`his[j] + slack <
    /// los[i]`), which is exactly the closed-interval membership count with
    /// touching endpoints overlapping.
    fn merge_count(&self, slack: f64) -> (u64, Option<f64>) {
        let n = self.pairs.len();
        let mut j = 0usize;
        let mut best = 0u64;
        let mut arg = None;
        for i in 0..n {
            let lo = self.pairs[i].0;
            while j < n && self.his[j] + slack < lo {
                j += 1;
            }
            let depth = (i + 1 - j) as u64;
            if depth > best {
                best = depth;
                arg = Some(lo);
            }
        }
        (best, arg)
    }
}

/// Maximum over points of the total weight of the intervals containing the
/// point, and the leftmost maximizing point. The maximum of this piecewise
/// constant function is attained at some interval's left endpoint.
pub(crate) fn max_weighted_overlap(intervals: &[SlopeInterval]) -> (f64, Option<f64>) {
    let mut events: Vec<(f64, bool, f64)> = Vec::with_capacity(2 * intervals.len());
    for iv in intervals {
        events.push((iv.lo, false, iv.weight));
        events.push((iv.hi, true, iv.weight));
    }
    events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut sum = 0.0f64;
    let mut best = 0.0f64;
    let mut witness = None;
    for (coord, close, w) in events {
        if close {
            sum -= w;
        } else {
            sum += w;
            if sum > best {
                best = sum;
                witness = Some(coord);
            }
        }
    }
    (best, witness)
}

#[cfg(test)]
pub(crate) fn brute_force_max_overlap(intervals: &[SlopeInterval]) -> u64 {
    let mut best = 0u64;
    for probe in intervals.iter().flat_map(|iv| [iv.lo, iv.hi]) {
        let count = intervals.iter().filter(|iv| iv.lo <= probe && probe <= iv.hi).count();
        best = best.max(count as u64);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64, id: u64) -> SlopeInterval {
        SlopeInterval { lo, hi, id, weight: 1.0 }
    }

    fn sweep_of(set: &[SlopeInterval]) -> EndpointSweep {
        EndpointSweep::new(set.iter().map(|iv| (iv.lo, iv.hi)).collect())
    }

    #[test]
    fn simple_overlap() {
        let set = [iv(0.0, 2.0, 0), iv(1.0, 3.0, 1), iv(5.0, 6.0, 2)];
        let (depth, witness, ids) = max_overlap_witness(&set);
        assert_eq!(depth, 2);
        assert_eq!(witness, Some(1.0));
        assert_eq!(ids, vec![0, 1]);
        assert_eq!(sweep_of(&set).count_with_point(), (2, Some(1.0)));
    }

    #[test]
    fn empty_input() {
        assert_eq!(max_overlap_witness(&[]), (0, None, Vec::new()));
        assert_eq!(max_weighted_overlap(&[]), (0.0, None));
        assert_eq!(sweep_of(&[]).count_with_point(), (0, None));
    }

    #[test]
    fn touching_endpoints_count() {
        let set = [iv(0.0, 1.0, 0), iv(1.0, 2.0, 1)];
        let (depth, witness, ids) = max_overlap_witness(&set);
        assert_eq!(depth, 2);
        assert_eq!(witness, Some(1.0));
        assert_eq!(ids, vec![0, 1]);
        assert_eq!(sweep_of(&set).count_with_point(), (2, Some(1.0)));
    }

    #[test]
    fn guard_band_detects_marginal_configurations() {
        // Gap of 5e-10 between the intervals: widening by 1e-9 merges them,
        // narrowing keeps them apart.
        let set = [iv(0.0, 1.0, 0), iv(1.0 + 5e-10, 2.0, 1)];
        let sweep = sweep_of(&set);
        assert_eq!(sweep.count(0.0), 1);
        assert_eq!(sweep.count(1e-9), 2);
        assert_eq!(sweep.count(-1e-9), 1);
        assert_eq!(max_overlap_count(&set, 1e-9), 2);
    }

    #[test]
    fn narrowing_can_empty_an_interval() {
        let set = [iv(0.5, 0.5, 0), iv(0.0, 2.0, 1)];
        let sweep = sweep_of(&set);
        assert_eq!(sweep.count(0.0), 2);
        assert_eq!(sweep.count(-1e-9), 1);
        assert_eq!(max_overlap_count(&set, -1e-9), 1);
    }

    #[test]
    fn weighted_overlap_prefix_sums() {
        let set = [
            SlopeInterval { lo: 0.0, hi: 2.0, id: 0, weight: 0.25 },
            SlopeInterval { lo: 1.0, hi: 3.0, id: 1, weight: 0.5 },
            SlopeInterval { lo: 2.5, hi: 4.0, id: 2, weight: 0.125 },
        ];
        let (best, witness) = max_weighted_overlap(&set);
        assert!((best - 0.75).abs() < 1e-15);
        assert_eq!(witness, Some(1.0));
    }

    #[test]
    fn merge_count_matches_event_sweep_on_random_sets() {
        // Deterministic pseudo-random intervals; includes duplicates and
        // touching endpoints.
        let mut state = 0x2545f491u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 1000) as f64 / 100.0
        };
        for _ in 0..200 {
            let set: Vec<SlopeInterval> = (0..37)
                .map(|i| {
                    let a = next();
                    let b = next();
                    iv(a.min(b), a.max(b), i)
                })
                .collect();
            let sweep = sweep_of(&set);
            for delta in [0.0, 1e-9, -1e-9, 0.3, -0.3] {
                assert_eq!(sweep.count(delta), max_overlap_count(&set, delta), "delta {delta}");
            }
            assert_eq!(sweep.count_with_point().0, brute_force_max_overlap(&set));
        }
    }

    #[test]
    fn matches_brute_force_on_fixed_sets() {
        let set = [
            iv(0.0, 0.5, 0),
            iv(0.25, 0.75, 1),
            iv(0.5, 1.0, 2),
            iv(-1.0, 0.0, 3),
            iv(0.49, 0.51, 4),
        ];
        assert_eq!(max_overlap_count(&set, 0.0), brute_force_max_overlap(&set));
        assert_eq!(sweep_of(&set).count(0.0), brute_force_max_overlap(&set));
    }
}
