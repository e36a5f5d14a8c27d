//! Factored one-step transition structure.
//!
//! The next state splits into three independent parts: the destination age
//! is a deterministic function of `(A, Δ, u)`, each type-I device age moves
//! on its own two-branch chain, and the channel vector is redrawn i.i.d.
//! Because the fresh channel vector is independent of everything else, a
//! Bellman backup only needs `W(A', Δ') = E_h'[V(A', Δ', h')]`, which is
//! computed once per sweep by contracting one device axis at a time.

use rayon::prelude::*;

use crate::error::Result;
use crate::model::{
    device_aoi_successors, next_dest_aoi, Action, ActionSpace, State, StateSpace, SystemConfig,
    NOOP,
};
use crate::scalar::Scalar;

/// Per-device channel marginals. The joint law is their product.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDistribution<T> {
    per_device: Vec<Vec<T>>,
}

impl<T: Scalar> ChannelDistribution<T> {
    pub fn new(cfg: &SystemConfig<T>) -> Self {
        Self {
            per_device: cfg
                .devices()
                .iter()
                .map(|d| d.channel.probs().to_vec())
                .collect(),
        }
    }

    pub fn marginal(&self, device: usize) -> &[T] {
        &self.per_device[device]
    }

    /// Probability of one channel vector, multiplied in device order.
    pub fn prob(&self, channel: &[usize]) -> T {
        channel
            .iter()
            .zip(&self.per_device)
            .fold(T::one(), |acc, (&h, p)| acc * p[h])
    }

    /// Expectation of one `(A, Δ)` block over the channel vector. `block`
    /// is laid out like the state space (last device fastest) and is
    /// consumed as scratch space.
    pub fn contract(&self, block: &mut [T]) -> T {
        let mut len = block.len();
        for probs in self.per_device.iter().rev() {
            let k = probs.len();
            len /= k;
            for i in 0..len {
                let row = &block[i * k..(i + 1) * k];
                let mut acc = T::zero();
                for (&p, &v) in probs.iter().zip(row) {
                    acc += p * v;
                }
                block[i] = acc;
            }
        }
        debug_assert_eq!(len, 1);
        block[0]
    }
}

/// Successor lists of every type-I device, indexed `[device][A_n - 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AgeTransitionTable<T> {
    rows: Vec<Vec<Vec<(u32, T)>>>,
}

impl<T: Scalar> AgeTransitionTable<T> {
    pub fn new(cfg: &SystemConfig<T>) -> Result<Self> {
        let rows = cfg.devices()[..cfg.n_type_i()]
            .iter()
            .map(|d| {
                (1..=d.aoi_cap)
                    .map(|a| device_aoi_successors(d, a))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    pub fn row(&self, device: usize, aoi: u32) -> &[(u32, T)] {
        &self.rows[device][aoi as usize - 1]
    }

    /// Joint successors of a whole age vector: the product of the
    /// per-device lists, first device varying slowest.
    pub fn joint(&self, ages: &[u32]) -> Vec<(Vec<u32>, T)> {
        let mut out = vec![(Vec::with_capacity(ages.len()), T::one())];
        for (n, &a) in ages.iter().enumerate() {
            let row = self.row(n, a);
            out = out
                .into_iter()
                .flat_map(|(prefix, p)| {
                    row.iter().map(move |&(next, q)| {
                        let mut v = prefix.clone();
                        v.push(next);
                        (v, p * q)
                    })
                })
                .collect();
        }
        out
    }
}

/// Where `(A, Δ)` goes under one action, channel left out.
#[derive(Clone, Debug, PartialEq)]
pub struct SuccessorDistribution<T> {
    pub dest_aoi: u32,
    /// Next type-I age vectors with their probabilities.
    pub ages: Vec<(Vec<u32>, T)>,
}

pub fn successor_distribution<T: Scalar>(
    cfg: &SystemConfig<T>,
    s: &State,
    a: &Action,
) -> Result<SuccessorDistribution<T>> {
    let table = AgeTransitionTable::new(cfg)?;
    Ok(SuccessorDistribution {
        dest_aoi: next_dest_aoi(cfg, s, a),
        ages: table.joint(&s.device_aoi[..cfg.n_type_i()]),
    })
}

/// `W(A, Δ) = E_h[V(A, Δ, h)]` for every `(A, Δ)` block.
pub fn channel_expectation<T: Scalar>(
    channels: &ChannelDistribution<T>,
    space: &StateSpace,
    v: &[T],
) -> Vec<T> {
    assert_eq!(
        v.len(),
        space.len(),
        "value function does not match the state space"
    );
    let nh = space.n_channels();
    v.par_chunks(nh)
        .map_init(
            || vec![T::zero(); nh],
            |scratch, block| {
                scratch.copy_from_slice(block);
                channels.contract(scratch)
            },
        )
        .collect()
}

/// Everything a Bellman backup needs, precomputed once per instance.
#[derive(Clone, Debug)]
pub struct Kernel<T> {
    cfg: SystemConfig<T>,
    space: StateSpace,
    actions: ActionSpace,
    channels: ChannelDistribution<T>,
    ages: AgeTransitionTable<T>,
    /// `[age index] -> [(next age index, probability)]`
    age_successors: Vec<Vec<(usize, T)>>,
    /// `[channel index * |U| + action]`, weighted energy.
    action_costs: Vec<T>,
    /// Scheduled type-I devices of each action.
    scheduled_type_i: Vec<Vec<usize>>,
}

impl<T: Scalar> Kernel<T> {
    pub fn new(cfg: &SystemConfig<T>) -> Result<Self> {
        Self::with_space(cfg, StateSpace::new(cfg)?)
    }

    pub fn with_space(cfg: &SystemConfig<T>, space: StateSpace) -> Result<Self> {
        let actions = ActionSpace::new(cfg.n_devices(), cfg.m_required());
        let channels = ChannelDistribution::new(cfg);
        let ages = AgeTransitionTable::new(cfg)?;
        let age_successors = (0..space.n_ages())
            .map(|i| {
                ages.joint(&space.ages(i))
                    .into_iter()
                    .map(|(next, p)| (space.age_index(&next), p))
                    .collect()
            })
            .collect();
        let n1 = cfg.n_type_i();
        let scheduled_type_i = actions
            .iter()
            .map(|a| a.devices().iter().copied().filter(|&n| n < n1).collect())
            .collect();
        let mut action_costs = Vec::with_capacity(space.n_channels() * actions.len());
        for h in 0..space.n_channels() {
            let channel = space.channel_vector(h);
            for a in actions.iter() {
                let cost = a.devices().iter().fold(T::zero(), |acc, &n| {
                    acc + cfg.device(n).weighted_cost(channel[n])
                });
                action_costs.push(cost);
            }
        }
        Ok(Self {
            cfg: cfg.clone(),
            space,
            actions,
            channels,
            ages,
            age_successors,
            action_costs,
            scheduled_type_i,
        })
    }

    pub fn config(&self) -> &SystemConfig<T> {
        &self.cfg
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn channels(&self) -> &ChannelDistribution<T> {
        &self.channels
    }

    pub fn age_table(&self) -> &AgeTransitionTable<T> {
        &self.ages
    }

    pub fn age_successors(&self, age_idx: usize) -> &[(usize, T)] {
        &self.age_successors[age_idx]
    }

    /// Weighted energy of every action at channel index `h`.
    #[inline]
    pub fn costs_at(&self, h: usize) -> &[T] {
        let na = self.actions.len();
        &self.action_costs[h * na..(h + 1) * na]
    }

    /// Destination age after taking `action` from `(ages, dest)`.
    #[inline]
    pub fn dest_after(&self, ages: &[u32], dest: u32, action: usize) -> u32 {
        let cap = self.space.dest_cap();
        if action == NOOP {
            (dest + 1).min(cap)
        } else {
            let oldest = self.scheduled_type_i[action]
                .iter()
                .map(|&n| ages[n])
                .max()
                .unwrap_or(0);
            (oldest + 1).min(cap)
        }
    }

    pub fn channel_expectation(&self, v: &[T]) -> Vec<T> {
        channel_expectation(&self.channels, &self.space, v)
    }

    /// Expected continuation `Σ_A' Pr[A'|A] W(A', Δ'(a))` for every action
    /// from block `(age_idx, dest)`.
    pub fn continuation(&self, w: &[T], age_idx: usize, dest: u32, out: &mut [T]) {
        let ages = self.space.ages(age_idx);
        let succ = &self.age_successors[age_idx];
        for (a, slot) in out.iter_mut().enumerate() {
            let next_dest = self.dest_after(&ages, dest, a);
            let mut acc = T::zero();
            for &(next_age, p) in succ {
                acc += p * w[self.space.block_index(next_age, next_dest)];
            }
            *slot = acc;
        }
    }
}
