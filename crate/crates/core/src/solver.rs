//! Relative value iteration for the average-cost Bellman equation
//!
//! ```text
//! θ + V(s) = min_u { Δ + Σ_n β_n u_n (C^s_n + C^u_n(h_n)) + E[V(s') | s, u] }
//! ```
//!
//! Sweeps are data-parallel over `(A, Δ)` blocks. Every output cell is
//! computed in a fixed order by exactly one worker, so results do not
//! depend on the number of threads.

use std::time::{Duration, Instant};

use log::{debug, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::scalar::Scalar;

/// Relative values over the flat state space plus the average cost.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction<T> {
    pub v: Vec<T>,
    pub theta: T,
}

/// Chosen action index (into the [`ActionSpace`](crate::model::ActionSpace))
/// for every state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolicyTable {
    actions: Vec<u32>,
}

impl PolicyTable {
    pub fn new(actions: Vec<u32>) -> Self {
        Self { actions }
    }

    #[inline]
    pub fn action(&self, state: usize) -> usize {
        self.actions[state] as usize
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.actions
    }

    pub fn set(&mut self, state: usize, action: usize) {
        self.actions[state] = action as u32;
    }
}

/// `Q(s, a)` stored row-major, one row of `n_actions` per state.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable<T> {
    n_actions: usize,
    data: Vec<T>,
}

impl<T: Scalar> QTable<T> {
    pub fn new(n_actions: usize, data: Vec<T>) -> Self {
        assert!(n_actions > 0 && data.len().is_multiple_of(n_actions));
        Self { n_actions, data }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_states(&self) -> usize {
        self.data.len() / self.n_actions
    }

    #[inline]
    pub fn row(&self, state: usize) -> &[T] {
        &self.data[state * self.n_actions..(state + 1) * self.n_actions]
    }
}

/// Index and value of the smallest entry. Ties go to the lowest index,
/// which puts the no-op first.
#[inline]
pub fn argmin<T: Scalar>(row: &[T]) -> (usize, T) {
    let mut best = 0;
    let mut best_q = row[0];
    for (a, &q) in row.iter().enumerate().skip(1) {
        if q < best_q {
            best = a;
            best_q = q;
        }
    }
    (best, best_q)
}

pub fn greedy_policy<T: Scalar>(q: &QTable<T>) -> PolicyTable {
    PolicyTable::new(
        (0..q.n_states())
            .map(|s| argmin(q.row(s)).0 as u32)
            .collect(),
    )
}

pub struct Backup<T> {
    pub values: Vec<T>,
    pub q: QTable<T>,
}

/// One Bellman backup of `v`, keeping every `Q(s, a)`.
pub fn bellman_backup<T: Scalar>(kernel: &Kernel<T>, v: &[T]) -> Backup<T> {
    let space = kernel.space();
    let (nh, na) = (space.n_channels(), kernel.actions().len());
    let w = kernel.channel_expectation(v);
    let mut values = vec![T::zero(); space.len()];
    let mut q = vec![T::zero(); space.len() * na];
    values
        .par_chunks_mut(nh)
        .zip(q.par_chunks_mut(nh * na))
        .enumerate()
        .for_each_init(
            || vec![T::zero(); na],
            |cont, (block, (out, q_block))| {
                let (age_idx, dest) = space.split_block(block);
                kernel.continuation(&w, age_idx, dest, cont);
                let stage = T::from_u32(dest).unwrap();
                for (h, value) in out.iter_mut().enumerate() {
                    let row = &mut q_block[h * na..(h + 1) * na];
                    for ((slot, &c), &k) in row.iter_mut().zip(kernel.costs_at(h)).zip(cont.iter())
                    {
                        *slot = stage + c + k;
                    }
                    *value = argmin(row).1;
                }
            },
        );
    Backup {
        values,
        q: QTable::new(na, q),
    }
}

/// Backup without materializing Q: writes `T v` and its greedy actions.
fn sweep<T: Scalar>(kernel: &Kernel<T>, v: &[T], out: &mut [T], policy: &mut [u32]) {
    let space = kernel.space();
    let (nh, na) = (space.n_channels(), kernel.actions().len());
    let w = kernel.channel_expectation(v);
    out.par_chunks_mut(nh)
        .zip(policy.par_chunks_mut(nh))
        .enumerate()
        .for_each_init(
            || (vec![T::zero(); na], vec![T::zero(); na]),
            |(cont, row), (block, (out, pol))| {
                let (age_idx, dest) = space.split_block(block);
                kernel.continuation(&w, age_idx, dest, cont);
                let stage = T::from_u32(dest).unwrap();
                for (h, (value, act)) in out.iter_mut().zip(pol.iter_mut()).enumerate() {
                    for ((slot, &c), &k) in row.iter_mut().zip(kernel.costs_at(h)).zip(cont.iter())
                    {
                        *slot = stage + c + k;
                    }
                    let (a, q) = argmin(row);
                    *value = q;
                    *act = a as u32;
                }
            },
        );
}

/// `(min, max)` of `b - a`.
pub(crate) fn diff_range<T: Scalar>(a: &[T], b: &[T]) -> (T, T) {
    a.par_iter()
        .zip(b.par_iter())
        .map(|(&x, &y)| {
            let d = y - x;
            (d, d)
        })
        .reduce_with(|(lo1, hi1), (lo2, hi2)| (lo1.min_of(lo2), hi1.max_of(hi2)))
        .expect("empty state space")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions<T> {
    /// Stop once `span(T V − V) <= tol`.
    pub tol: T,
    pub max_iter: usize,
    /// State pinned to zero after each sweep.
    pub reference: usize,
    /// Step size `τ` of `V ← V + τ (T V − V)`. `1` is plain relative value
    /// iteration; values below one make every policy aperiodic, which
    /// periodic AoI cycles need. The stopping rule and `θ` do not change.
    pub damping: T,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-9),
            max_iter: 100_000,
            reference: 0,
            damping: T::lit(0.5),
        }
    }
}

impl<T: Scalar> SolveOptions<T> {
    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_reference(mut self, reference: usize) -> Self {
        self.reference = reference;
        self
    }

    pub fn with_damping(mut self, damping: T) -> Self {
        self.damping = damping;
        self
    }

    pub(crate) fn validate(&self, n_states: usize) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::validation("tol", "tolerance must be positive"));
        }
        if self.max_iter < 1 {
            return Err(Error::validation(
                "max_iter",
                "at least one iteration is required",
            ));
        }
        if self.reference >= n_states {
            return Err(Error::validation(
                "reference",
                format!("reference state {} outside 0..{n_states}", self.reference),
            ));
        }
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::validation("damping", "damping must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_span: f64,
    pub theta: f64,
    pub wall_time: Duration,
    /// Sweeps where the span grew instead of shrinking.
    pub span_increases: usize,
}

#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub value: ValueFunction<T>,
    pub policy: PolicyTable,
    pub report: SolveReport,
}

/// Runs (optionally damped) relative value iteration from `V = 0`.
///
/// The returned `V` is the last iterate, whose backup satisfied the span
/// test, and the policy is greedy with respect to it. `θ` is the midpoint
/// of the last difference vector.
pub fn relative_value_iteration<T: Scalar>(
    kernel: &Kernel<T>,
    opts: &SolveOptions<T>,
) -> Result<Solution<T>> {
    let n = kernel.space().len();
    opts.validate(n)?;
    let start = Instant::now();
    let two = T::lit(2.0);

    let mut v = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    let mut policy = vec![0u32; n];
    let mut prev_span: Option<T> = None;
    let mut span_increases = 0;
    let mut span = T::zero();

    for iteration in 1..=opts.max_iter {
        sweep(kernel, &v, &mut next, &mut policy);
        let (lo, hi) = diff_range(&v, &next);
        span = hi - lo;
        if let Some(prev) = prev_span {
            if span > prev {
                if span_increases == 0 {
                    warn!("span grew from {prev} to {span} at iteration {iteration}");
                }
                span_increases += 1;
            }
        }
        prev_span = Some(span);

        if span <= opts.tol {
            let theta = (hi + lo) / two;
            let report = SolveReport {
                iterations: iteration,
                final_span: span.as_f64(),
                theta: theta.as_f64(),
                wall_time: start.elapsed(),
                span_increases,
            };
            debug!("converged: {report:?}");
            return Ok(Solution {
                value: ValueFunction { v, theta },
                policy: PolicyTable::new(policy),
                report,
            });
        }

        if opts.damping == T::one() {
            std::mem::swap(&mut v, &mut next);
        } else {
            let tau = opts.damping;
            v.par_iter_mut()
                .zip(next.par_iter())
                .for_each(|(x, &y)| *x += tau * (y - *x));
        }
        let shift = v[opts.reference];
        v.par_iter_mut().for_each(|x| *x -= shift);
    }

    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        final_span: span.as_f64(),
    })
}
