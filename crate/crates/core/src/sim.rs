//! Seeded slot-by-slot simulation of the scheduling system.
//!
//! Each slot: draw the channel vector, draw type-I arrivals and update the
//! device ages, ask the policy for an action on the post-arrival state,
//! charge `Δ(t)` plus the weighted energy, then move `Δ`.
//!
//! Every random source has its own ChaCha stream derived from the master
//! seed: stream `n` drives the channel of device `n`, stream `N + n` the
//! arrivals of device `n`. Runs are bit-reproducible per
//! `(config, policy, slots, seed)`.

use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{next_dest_aoi, ActionSpace, State, StateSpace, SystemConfig, NOOP};
use crate::scalar::Scalar;
use crate::solver::PolicyTable;
use crate::special_case::{cheapest_m, ReducedModel, ReducedSolution};

/// A stationary scheduling rule. Returns an index into the config's
/// [`ActionSpace`].
pub trait Policy {
    fn decide(&mut self, state: &State) -> usize;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn decide(&mut self, state: &State) -> usize {
        (**self).decide(state)
    }
}

/// Never schedules anyone.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeverTransmit;

impl Policy for NeverTransmit {
    fn decide(&mut self, _: &State) -> usize {
        NOOP
    }
}

/// Looks up a solved [`PolicyTable`].
#[derive(Clone, Debug)]
pub struct TablePolicy {
    space: StateSpace,
    table: PolicyTable,
}

pub fn policy_from_table<T: Scalar>(
    cfg: &SystemConfig<T>,
    table: PolicyTable,
) -> Result<TablePolicy> {
    let space = StateSpace::new(cfg)?;
    if table.len() != space.len() {
        return Err(Error::DimensionMismatch {
            expected: space.len(),
            found: table.len(),
        });
    }
    let n_actions = ActionSpace::new(cfg.n_devices(), cfg.m_required()).len();
    if let Some(&bad) = table.as_slice().iter().find(|&&a| a as usize >= n_actions) {
        return Err(Error::DimensionMismatch {
            expected: n_actions,
            found: bad as usize + 1,
        });
    }
    Ok(TablePolicy { space, table })
}

impl Policy for TablePolicy {
    fn decide(&mut self, state: &State) -> usize {
        self.table.action(self.space.index(state))
    }
}

/// Plays a reduced `(Δ, C_h)` policy on the full system: transmit means
/// scheduling `N(h)`.
#[derive(Clone, Debug)]
pub struct ReducedPolicy<T> {
    model: ReducedModel<T>,
    transmit: Vec<bool>,
    designated: Vec<usize>,
}

pub fn reduced_policy_adapter<T: Scalar>(
    cfg: &SystemConfig<T>,
    model: &ReducedModel<T>,
    solution: &ReducedSolution<T>,
) -> Result<ReducedPolicy<T>> {
    let space = StateSpace::new(cfg)?;
    if space.n_channels() != model.n_channel_vectors() || space.n_ages() != 1 {
        return Err(Error::DimensionMismatch {
            expected: model.n_channel_vectors(),
            found: space.n_channels(),
        });
    }
    if solution.transmit.len() != model.len() {
        return Err(Error::DimensionMismatch {
            expected: model.len(),
            found: solution.transmit.len(),
        });
    }
    let actions = ActionSpace::new(cfg.n_devices(), cfg.m_required());
    let designated = (0..model.n_channel_vectors())
        .map(|h| {
            actions
                .index_of(model.designated(h))
                .ok_or_else(|| Error::Contract("designated action outside the action space".into()))
        })
        .collect::<Result<_>>()?;
    Ok(ReducedPolicy {
        model: model.clone(),
        transmit: solution.transmit.clone(),
        designated,
    })
}

impl<T: Scalar> Policy for ReducedPolicy<T> {
    fn decide(&mut self, state: &State) -> usize {
        let h = self.model.channel_flat(&state.channel_idx);
        let c = self.model.cost_state_of(h);
        if self.transmit[self.model.index(state.dest_aoi, c)] {
            self.designated[h]
        } else {
            NOOP
        }
    }
}

/// One-step lookahead: maximizes `(Δ − Δ') − weighted energy`, i.e.
/// minimizes `Δ' + weighted energy`. Ties go to the no-op, then to the
/// lowest action index.
#[derive(Clone, Debug)]
pub struct MyopicPolicy<T> {
    cfg: SystemConfig<T>,
    actions: ActionSpace,
}

pub fn myopic_policy<T: Scalar>(cfg: &SystemConfig<T>) -> MyopicPolicy<T> {
    MyopicPolicy {
        cfg: cfg.clone(),
        actions: ActionSpace::new(cfg.n_devices(), cfg.m_required()),
    }
}

impl<T: Scalar> MyopicPolicy<T> {
    /// `Δ'(a) + Σ_{n∈a} β_n (C^s_n + C^u_n(h_n))` for every action.
    pub fn scores(&self, state: &State) -> Vec<T> {
        self.actions
            .iter()
            .map(|a| {
                let dest = T::from_u32(next_dest_aoi(&self.cfg, state, a)).unwrap();
                a.devices().iter().fold(dest, |acc, &n| {
                    acc + self.cfg.device(n).weighted_cost(state.channel_idx[n])
                })
            })
            .collect()
    }
}

impl<T: Scalar> Policy for MyopicPolicy<T> {
    fn decide(&mut self, state: &State) -> usize {
        crate::solver::argmin(&self.scores(state)).0
    }
}

/// Always schedules the `M` devices with the smallest weighted energy.
#[derive(Clone, Debug)]
pub struct AlwaysCheapest<T> {
    cfg: SystemConfig<T>,
    actions: ActionSpace,
}

pub fn always_cheapest<T: Scalar>(cfg: &SystemConfig<T>) -> AlwaysCheapest<T> {
    AlwaysCheapest {
        cfg: cfg.clone(),
        actions: ActionSpace::new(cfg.n_devices(), cfg.m_required()),
    }
}

impl<T: Scalar> Policy for AlwaysCheapest<T> {
    fn decide(&mut self, state: &State) -> usize {
        let a = cheapest_m(&self.cfg, &state.channel_idx);
        self.actions
            .index_of(&a)
            .expect("cheapest set is a valid action")
    }
}

/// Transmits a uniformly random `M`-subset with probability `p`.
#[derive(Clone, Debug)]
pub struct RandomPolicy {
    n_actions: usize,
    p_transmit: f64,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new<T: Scalar>(cfg: &SystemConfig<T>, p_transmit: f64, seed: u64) -> Self {
        Self {
            n_actions: ActionSpace::new(cfg.n_devices(), cfg.m_required()).len(),
            p_transmit,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn decide(&mut self, _: &State) -> usize {
        if self.rng.random::<f64>() < self.p_transmit {
            self.rng.random_range(1..self.n_actions)
        } else {
            NOOP
        }
    }
}

/// What happened in one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotRecord {
    /// The state the policy observed.
    pub state: State,
    pub action: usize,
    /// Which type-I devices received a packet this slot.
    pub arrivals: Vec<bool>,
    /// Unweighted energy spent by each device.
    pub energy: Vec<f64>,
    /// `Δ(t) + Σ_n β_n · energy_n`.
    pub weighted_cost: f64,
}

/// Steps the system one slot at a time.
pub struct Simulator<T> {
    cfg: SystemConfig<T>,
    actions: ActionSpace,
    state: State,
    channel_rngs: Vec<ChaCha8Rng>,
    arrival_rngs: Vec<ChaCha8Rng>,
    channel_cdfs: Vec<Vec<f64>>,
    arrival_rates: Vec<f64>,
}

impl<T: Scalar> Simulator<T> {
    /// Starts from all ages at 1 and `Δ = 1`.
    pub fn new(cfg: &SystemConfig<T>, seed: u64) -> Self {
        let n = cfg.n_devices();
        let n1 = cfg.n_type_i();
        let stream = |k: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            rng
        };
        let channel_cdfs = cfg
            .devices()
            .iter()
            .map(|d| {
                let mut acc = 0.0;
                d.channel
                    .probs()
                    .iter()
                    .map(|p| {
                        acc += p.as_f64();
                        acc
                    })
                    .collect()
            })
            .collect();
        let mut device_aoi = vec![1; n1];
        device_aoi.resize(n, 0);
        Self {
            actions: ActionSpace::new(n, cfg.m_required()),
            state: State {
                device_aoi,
                dest_aoi: 1,
                channel_idx: vec![0; n],
            },
            channel_rngs: (0..n).map(stream).collect(),
            arrival_rngs: (0..n1).map(|i| stream(n + i)).collect(),
            channel_cdfs,
            arrival_rates: cfg.devices()[..n1]
                .iter()
                .map(|d| d.arrival_rate.as_f64())
                .collect(),
            cfg: cfg.clone(),
        }
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn step<P: Policy + ?Sized>(&mut self, policy: &mut P) -> SlotRecord {
        for (n, rng) in self.channel_rngs.iter_mut().enumerate() {
            let u: f64 = rng.random();
            let cdf = &self.channel_cdfs[n];
            // the last bucket absorbs rounding in the cumulative sums
            self.state.channel_idx[n] = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
        }
        let mut arrivals = Vec::with_capacity(self.arrival_rngs.len());
        for (n, rng) in self.arrival_rngs.iter_mut().enumerate() {
            let arrived = rng.random::<f64>() < self.arrival_rates[n];
            let cap = self.cfg.device(n).aoi_cap;
            let a = &mut self.state.device_aoi[n];
            *a = if arrived { 1 } else { (*a + 1).min(cap) };
            arrivals.push(arrived);
        }

        let action = policy.decide(&self.state);
        let act = self.actions.get(action);
        let mut energy = vec![0.0; self.cfg.n_devices()];
        let mut weighted_cost = self.state.dest_aoi as f64;
        for &n in act.devices() {
            let d = self.cfg.device(n);
            let h = self.state.channel_idx[n];
            energy[n] = d.energy(h).as_f64();
            weighted_cost += d.weighted_cost(h).as_f64();
        }
        let record = SlotRecord {
            state: self.state.clone(),
            action,
            arrivals,
            energy,
            weighted_cost,
        };
        self.state.dest_aoi = next_dest_aoi(&self.cfg, &self.state, act);
        record
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOptions {
    pub slots: u64,
    pub seed: u64,
    /// Slots simulated before accumulation starts.
    pub burn_in: u64,
}

impl SimOptions {
    pub fn new(slots: u64, seed: u64) -> Self {
        Self {
            slots,
            seed,
            burn_in: 0,
        }
    }

    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }
}

/// Number of batches behind the batch-means standard errors.
pub const BATCHES: u64 = 50;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimMetrics {
    pub avg_dest_aoi: f64,
    pub avg_energy_per_device: Vec<f64>,
    pub avg_weighted_cost: f64,
    pub slots_simulated: u64,
    pub seed: u64,
    /// Batch-means standard errors; NaN with fewer than two slots per batch.
    pub se_dest_aoi: f64,
    pub se_weighted_cost: f64,
    pub se_total_energy: f64,
}

impl SimMetrics {
    /// Unweighted energy summed over devices.
    pub fn avg_total_energy(&self) -> f64 {
        self.avg_energy_per_device.iter().sum()
    }
}

fn batch_standard_error(batches: &[f64]) -> f64 {
    let k = batches.len() as f64;
    if batches.len() < 2 {
        return f64::NAN;
    }
    let mean = batches.iter().sum::<f64>() / k;
    let var = batches.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (var / k).sqrt()
}

pub fn simulate<T: Scalar, P: Policy + ?Sized>(
    cfg: &SystemConfig<T>,
    policy: &mut P,
    opts: SimOptions,
) -> Result<SimMetrics> {
    if opts.slots < 1 {
        return Err(Error::validation("slots", "at least one slot is required"));
    }
    let mut sim = Simulator::new(cfg, opts.seed);
    for _ in 0..opts.burn_in {
        sim.step(policy);
    }
    let n = cfg.n_devices();
    let batch_len = opts.slots / BATCHES;
    let mut aoi_sum: u64 = 0;
    let mut energy_sum = vec![0.0; n];
    let mut weighted_sum = 0.0;
    let (mut b_aoi, mut b_cost, mut b_energy) = (0u64, 0.0, 0.0);
    let (mut batch_aoi, mut batch_cost, mut batch_energy) = (vec![], vec![], vec![]);
    let mut in_batch = 0;
    for _ in 0..opts.slots {
        let r = sim.step(policy);
        aoi_sum += r.state.dest_aoi as u64;
        let slot_energy: f64 = r.energy.iter().sum();
        for (acc, e) in energy_sum.iter_mut().zip(&r.energy) {
            *acc += e;
        }
        weighted_sum += r.weighted_cost;
        if batch_len >= 2 {
            b_aoi += r.state.dest_aoi as u64;
            b_cost += r.weighted_cost;
            b_energy += slot_energy;
            in_batch += 1;
            if in_batch == batch_len && (batch_aoi.len() as u64) < BATCHES {
                let len = batch_len as f64;
                batch_aoi.push(b_aoi as f64 / len);
                batch_cost.push(b_cost / len);
                batch_energy.push(b_energy / len);
                (b_aoi, b_cost, b_energy, in_batch) = (0, 0.0, 0.0, 0);
            }
        }
    }
    let t = opts.slots as f64;
    Ok(SimMetrics {
        avg_dest_aoi: aoi_sum as f64 / t,
        avg_energy_per_device: energy_sum.iter().map(|e| e / t).collect(),
        avg_weighted_cost: weighted_sum / t,
        slots_simulated: opts.slots,
        seed: opts.seed,
        se_dest_aoi: batch_standard_error(&batch_aoi),
        se_weighted_cost: batch_standard_error(&batch_cost),
        se_total_energy: batch_standard_error(&batch_energy),
    })
}

/// Independent replications, one per seed, run in parallel and returned in
/// seed order.
pub fn simulate_replications<T, P, F>(
    cfg: &SystemConfig<T>,
    seeds: &[u64],
    slots: u64,
    make_policy: F,
) -> Result<Vec<SimMetrics>>
where
    T: Scalar,
    P: Policy,
    F: Fn(u64) -> P + Sync,
{
    seeds
        .par_iter()
        .map(|&seed| simulate(cfg, &mut make_policy(seed), SimOptions::new(slots, seed)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub policy: String,
    pub beta: Option<f64>,
    pub metrics: SimMetrics,
}

/// One row per `(policy, seed, slots, beta)` with every metric; per-device
/// energies go in `energy_<n>` columns.
pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = rows
        .first()
        .map_or(0, |r| r.metrics.avg_energy_per_device.len());
    let mut header: Vec<String> = [
        "policy",
        "seed",
        "slots",
        "beta",
        "avg_dest_aoi",
        "avg_weighted_cost",
        "avg_total_energy",
        "se_dest_aoi",
        "se_weighted_cost",
        "se_total_energy",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..n).map(|i| format!("energy_{i}")));
    w.write_record(&header)?;
    for row in rows {
        let m = &row.metrics;
        let mut rec = vec![
            row.policy.clone(),
            m.seed.to_string(),
            m.slots_simulated.to_string(),
            row.beta.map(|b| b.to_string()).unwrap_or_default(),
            m.avg_dest_aoi.to_string(),
            m.avg_weighted_cost.to_string(),
            m.avg_total_energy().to_string(),
            m.se_dest_aoi.to_string(),
            m.se_weighted_cost.to_string(),
            m.se_total_energy.to_string(),
        ];
        rec.extend(m.avg_energy_per_device.iter().map(|e| e.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
