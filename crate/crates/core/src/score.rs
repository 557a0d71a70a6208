//! IPC-2014 agile scoring: each solver is scored per problem against the
//! fastest solver, and domain scores are per-solver sums.

/// Wall-clock result of one solver on one problem, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunTime {
    Solved(f64),
    Unsolved,
}

/// Times are clamped to at least one second before comparison, so sub-second
/// differences never affect the score. With `T*` the best clamped time, a
/// solver with clamped time `T` scores `1 / (1 + log10(T / T*))`; unsolved
/// entries score 0. If nobody solved the problem, everybody scores 0.
pub fn agile_score(times: &[RunTime]) -> Vec<f64> {
    let clamp = |t: f64| t.max(1.0);
    let best = times
        .iter()
        .filter_map(|t| match t {
            RunTime::Solved(s) => Some(clamp(*s)),
            RunTime::Unsolved => None,
        })
        .fold(f64::INFINITY, f64::min);
    times
        .iter()
        .map(|t| match t {
            RunTime::Solved(s) if best.is_finite() => 1.0 / (1.0 + (clamp(*s) / best).log10()),
            _ => 0.0,
        })
        .collect()
}
