//! Posterior computations over a compiled trellis: the observation
//! marginal, and enumeration of signal sequences by descending conditional
//! probability with lexicographic tie-breaking.
//!
//! The enumeration is a lazy best-first search over prefixes. The
//! priority of a prefix is its accumulated log-weight plus the exact
//! maximum achievable suffix weight from [`backward_max_suffix`]; because
//! that heuristic is admissible *and* consistent, a complete sequence is
//! popped only once nothing unexplored can beat it, so items stream out
//! in descending joint weight without ever materializing `|𝐗|^t` paths.
//!
//! Floating-point ties: two log-weights count as tied when they differ by
//! at most [`TIE_TOL`]. True ties come from identical products of model
//! constants accumulated in the same (position) order, so they round
//! identically; the tolerance only needs to absorb noise in the heap
//! priorities, not in the final weights. Completed sequences are gathered
//! in a slack window around the current best and re-sorted so that tied
//! items always emerge in lexicographic order, whatever order the heap
//! produced them in.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{Error, Result};
use crate::models::{joint_log_prob, Trellis};
use crate::numeric::log2_sum_exp;

/// Two log₂ weights within this distance are treated as equal ranks.
pub const TIE_TOL: f64 = 1e-12;

/// Completed paths within this slack of the current best are collected
/// into one batch before tie resolution; must be well above [`TIE_TOL`]
/// and well below any genuine weight gap.
const GROUP_SLACK: f64 = 1e-9;

/// Default cap on the number of enumerated items (2²²). Set sizes are
/// exponential in `t` by design, so callers must opt into more.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 1 << 22;

/// Guard for [`brute_force_ranked`]: refuse to materialize more than 2²⁰
/// sequences.
pub const BRUTE_FORCE_GUARD: u128 = 1 << 20;

/// One enumerated signal sequence with its joint weight and posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedItem {
    pub sequence: Vec<u8>,
    /// log₂ of the (possibly unnormalized) joint weight of `(x, z)`.
    pub log2_joint: f64,
    /// log₂ P(x | z) = `log2_joint` − normalizer.
    pub log2_posterior: f64,
    /// P(x | z) in linear domain.
    pub posterior: f64,
}

// ----------------------------------------------------------------------
// Forward / backward passes
// ----------------------------------------------------------------------

/// log₂ of the observation's normalizing constant: `log₂ Σ_x 2^joint(x)`.
///
/// Runs the standard forward recursion in `O(t·|𝐗|²)` with log-sum-exp
/// at every step. Returns `NEG_INFINITY` iff the observation is
/// impossible under the model; downstream operations reject that case
/// with [`Error::ImpossibleObservation`].
pub fn forward_log_marginal(trellis: &Trellis) -> f64 {
    let s = trellis.n_states();
    let mut alpha: Vec<f64> = trellis.initial().to_vec();
    let mut next = vec![f64::NEG_INFINITY; s];
    let mut terms = vec![f64::NEG_INFINITY; s];
    for p in 1..trellis.len() {
        let step = trellis.step(p - 1);
        for (cur, slot) in next.iter_mut().enumerate() {
            for (prev, term) in terms.iter_mut().enumerate() {
                *term = alpha[prev] + step[prev * s + cur];
            }
            *slot = log2_sum_exp(&terms);
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    log2_sum_exp(&alpha)
}

/// Exact best-suffix table: `V[p][s]` is the maximum total log₂ weight of
/// positions `p+1 .. t-1` over all completions starting from state `s` at
/// position `p`; `V[t-1][s] = 0` (empty suffix).
pub fn backward_max_suffix(trellis: &Trellis) -> Vec<Vec<f64>> {
    let s = trellis.n_states();
    let t = trellis.len();
    let mut v = vec![vec![0.0f64; s]; t];
    for p in (0..t - 1).rev() {
        let step = trellis.step(p);
        for prev in 0..s {
            let mut best = f64::NEG_INFINITY;
            for cur in 0..s {
                let w = step[prev * s + cur] + v[p + 1][cur];
                if w > best {
                    best = w;
                }
            }
            v[p][prev] = best;
        }
    }
    v
}

/// log₂ P(x | z) for a single sequence.
pub fn posterior_log_prob(trellis: &Trellis, x: &[u8]) -> Result<f64> {
    let normalizer = forward_log_marginal(trellis);
    if normalizer == f64::NEG_INFINITY {
        return Err(Error::ImpossibleObservation);
    }
    Ok(joint_log_prob(trellis, x)? - normalizer)
}

// ----------------------------------------------------------------------
// Ranked enumeration
// ----------------------------------------------------------------------

/// Frontier entry of the best-first search. `priority` is the exact final
/// log-weight for complete paths and an upper bound (prefix weight + best
/// suffix) otherwise. The heap pops highest priority first; equal
/// priorities pop in ascending lexicographic prefix order, which makes
/// the search order fully deterministic.
#[derive(Debug)]
struct Frontier {
    priority: f64,
    log2_weight: f64,
    prefix: Vec<u8>,
    complete: bool,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            // Lexicographically smaller prefix = greater heap entry.
            .then_with(|| other.prefix.cmp(&self.prefix))
    }
}

/// Lazy stream of signal sequences in descending posterior order.
///
/// Single-consumer: advance with [`RankedStream::next_item`]. The stream
/// caps its total output at the `limit` passed to
/// [`enumerate_descending`]; hitting the cap while items remain is
/// reported as [`Error::EnumerationLimit`], distinct from ordinary
/// exhaustion (`Ok(None)`).
#[derive(Debug)]
pub struct RankedStream {
    heap: BinaryHeap<Frontier>,
    ready: VecDeque<(f64, Vec<u8>)>,
    trellis_len: usize,
    n_states: usize,
    steps_flat: Vec<Vec<f64>>,
    suffix: Vec<Vec<f64>>,
    normalizer: f64,
    limit: usize,
    emitted: usize,
}

/// Start the ranked enumeration for a trellis.
///
/// `limit` bounds the total number of items the stream will deliver;
/// use [`DEFAULT_ENUMERATION_LIMIT`] unless a tighter or looser bound is
/// called for. Errors immediately if the observation is impossible.
pub fn enumerate_descending(trellis: &Trellis, limit: usize) -> Result<RankedStream> {
    let normalizer = forward_log_marginal(trellis);
    if normalizer == f64::NEG_INFINITY {
        return Err(Error::ImpossibleObservation);
    }
    let suffix = backward_max_suffix(trellis);
    let t = trellis.len();
    let s = trellis.n_states();

    let mut heap = BinaryHeap::new();
    for (state, (&w, &ahead)) in trellis.initial().iter().zip(&suffix[0]).enumerate() {
        if w == f64::NEG_INFINITY {
            continue;
        }
        heap.push(Frontier {
            priority: w + ahead,
            log2_weight: w,
            prefix: vec![state as u8],
            complete: t == 1,
        });
    }

    Ok(RankedStream {
        heap,
        ready: VecDeque::new(),
        trellis_len: t,
        n_states: s,
        steps_flat: (0..t.saturating_sub(1))
            .map(|p| trellis.step(p).to_vec())
            .collect(),
        suffix,
        normalizer,
        limit,
        emitted: 0,
    })
}

impl RankedStream {
    /// log₂ of the normalizing constant shared by all emitted posteriors.
    pub fn normalizer_log2(&self) -> f64 {
        self.normalizer
    }

    /// Number of items delivered so far.
    pub fn emitted(&self) -> usize {
        self.emitted
    }

    /// Next sequence in descending posterior order.
    ///
    /// `Ok(None)` means the enumeration is complete (every positive-weight
    /// sequence has been delivered). [`Error::EnumerationLimit`] means the
    /// limit was reached with items still pending.
    pub fn next_item(&mut self) -> Result<Option<RankedItem>> {
        if self.ready.is_empty() {
            self.refill();
        }
        match self.ready.front() {
            None => Ok(None),
            Some(_) => {
                if self.emitted >= self.limit {
                    return Err(Error::EnumerationLimit { limit: self.limit });
                }
                let (log2_joint, sequence) = self.ready.pop_front().expect("checked non-empty");
                self.emitted += 1;
                let log2_posterior = log2_joint - self.normalizer;
                Ok(Some(RankedItem {
                    sequence,
                    log2_joint,
                    log2_posterior,
                    posterior: log2_posterior.exp2(),
                }))
            }
        }
    }

    fn expand(&mut self, entry: Frontier) {
        let s = self.n_states;
        let pos = entry.prefix.len();
        let step = &self.steps_flat[pos - 1];
        let prev = *entry.prefix.last().expect("prefix non-empty") as usize;
        for cur in 0..s {
            let w = step[prev * s + cur];
            if w == f64::NEG_INFINITY {
                continue;
            }
            let log2_weight = entry.log2_weight + w;
            let mut prefix = Vec::with_capacity(pos + 1);
            prefix.extend_from_slice(&entry.prefix);
            prefix.push(cur as u8);
            self.heap.push(Frontier {
                priority: log2_weight + self.suffix[pos][cur],
                log2_weight,
                prefix,
                complete: pos + 1 == self.trellis_len,
            });
        }
    }

    /// Pop from the heap until the next batch of completed sequences is
    /// certain, resolve ties lexicographically, and queue the leading tie
    /// group for emission. Completed paths that belong to later ranks are
    /// pushed back with their exact weight as priority.
    fn refill(&mut self) {
        let mut pending: Vec<(f64, Vec<u8>)> = Vec::new();
        let mut best = f64::NEG_INFINITY;
        while let Some(top) = self.heap.peek() {
            if !pending.is_empty() && top.priority < best - GROUP_SLACK {
                break;
            }
            let entry = self.heap.pop().expect("peeked non-empty");
            if entry.complete {
                if entry.log2_weight > best {
                    best = entry.log2_weight;
                }
                pending.push((entry.log2_weight, entry.prefix));
            } else {
                self.expand(entry);
            }
        }
        if pending.is_empty() {
            return;
        }
        let spans = sort_desc_with_lex_ties(&mut pending);
        let first_span = spans.first().copied().unwrap_or(pending.len());
        for (log2_weight, prefix) in pending.drain(first_span..).rev() {
            self.heap.push(Frontier {
                priority: log2_weight,
                log2_weight,
                prefix,
                complete: true,
            });
        }
        self.ready.extend(pending);
    }
}

/// Advance `x` to the lexicographically next sequence over `s` symbols;
/// false once the odometer wraps.
pub(crate) fn advance_odometer(x: &mut [u8], s: usize) -> bool {
    for pos in (0..x.len()).rev() {
        if (x[pos] as usize) + 1 < s {
            x[pos] += 1;
            x[pos + 1..].fill(0);
            return true;
        }
    }
    false
}

/// Sort `(log₂ weight, sequence)` pairs by descending weight, then
/// re-sort every tie run (consecutive weights within [`TIE_TOL`] of each
/// other, chained) into ascending lexicographic order. Returns the
/// exclusive end index of each run.
fn sort_desc_with_lex_ties(items: &mut [(f64, Vec<u8>)]) -> Vec<usize> {
    items.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let mut spans = Vec::new();
    let mut start = 0;
    // Identify run boundaries on the weight-sorted order first, then
    // lex-sort each run; runs never merge because lex-sorting only moves
    // weights upward relative to the run minimum.
    let n = items.len();
    for i in 1..=n {
        if i == n || items[i - 1].0 - items[i].0 > TIE_TOL {
            if i - start > 1 {
                items[start..i].sort_by(|a, b| a.1.cmp(&b.1));
            }
            spans.push(i);
            start = i;
        }
    }
    spans
}

/// Exhaustively rank every sequence: the oracle counterpart of
/// [`enumerate_descending`].
///
/// Enumerates all `|𝐗|^t` sequences, drops the zero-posterior ones, and
/// sorts by (descending posterior, ascending lexicographic within tie
/// runs). Posteriors are normalized by the same forward marginal the
/// streaming path uses. Guarded to `|𝐗|^t ≤ 2²⁰`.
pub fn brute_force_ranked(trellis: &Trellis) -> Result<Vec<RankedItem>> {
    let s = trellis.n_states();
    let t = trellis.len();
    let mut total: u128 = 1;
    for _ in 0..t {
        total = total.saturating_mul(s as u128);
        if total > BRUTE_FORCE_GUARD {
            return Err(Error::BruteForceTooLarge {
                states: s,
                positions: t,
            });
        }
    }
    let normalizer = forward_log_marginal(trellis);
    if normalizer == f64::NEG_INFINITY {
        return Err(Error::ImpossibleObservation);
    }

    let mut items: Vec<(f64, Vec<u8>)> = Vec::new();
    let mut x = vec![0u8; t];
    loop {
        let joint = joint_log_prob(trellis, &x)?;
        if joint > f64::NEG_INFINITY {
            items.push((joint, x.clone()));
        }
        if !advance_odometer(&mut x, s) {
            break;
        }
    }

    sort_desc_with_lex_ties(&mut items);
    Ok(items
        .into_iter()
        .map(|(log2_joint, sequence)| {
            let log2_posterior = log2_joint - normalizer;
            RankedItem {
                sequence,
                log2_joint,
                log2_posterior,
                posterior: log2_posterior.exp2(),
            }
        })
        .collect())
}
