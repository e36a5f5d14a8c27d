//! Reference implementations used as oracles. They enumerate the joint
//! state and channel spaces directly and share no code with the solver
//! beyond the configuration accessors.
#![allow(dead_code)]

use aoi_core::experiments::{generate_instance, ExperimentSpec};
use aoi_core::{ChannelModel, DeviceSpec, SystemConfig};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Ages (type-I only), destination age and channel indices of one state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefState {
    pub ages: Vec<u32>,
    pub dest: u32,
    pub channel: Vec<usize>,
}

fn radices(cfg: &SystemConfig<f64>) -> Vec<usize> {
    let mut r: Vec<usize> = cfg.devices()[..cfg.n_type_i()]
        .iter()
        .map(|d| d.aoi_cap as usize)
        .collect();
    r.push(cfg.dest_aoi_cap() as usize);
    r.extend(cfg.devices().iter().map(|d| d.channel.len()));
    r
}

pub fn n_states(cfg: &SystemConfig<f64>) -> usize {
    radices(cfg).iter().product()
}

/// Row-major index with the last channel coordinate varying fastest.
pub fn encode(cfg: &SystemConfig<f64>, s: &RefState) -> usize {
    let digits = s
        .ages
        .iter()
        .map(|&a| a as usize - 1)
        .chain(std::iter::once(s.dest as usize - 1))
        .chain(s.channel.iter().copied());
    digits.zip(radices(cfg)).fold(0, |acc, (d, r)| acc * r + d)
}

pub fn all_states(cfg: &SystemConfig<f64>) -> Vec<RefState> {
    let r = radices(cfg);
    let n1 = cfg.n_type_i();
    (0..n_states(cfg))
        .map(|mut idx| {
            let mut digits = vec![0; r.len()];
            for k in (0..r.len()).rev() {
                digits[k] = idx % r[k];
                idx /= r[k];
            }
            RefState {
                ages: digits[..n1].iter().map(|&d| d as u32 + 1).collect(),
                dest: digits[n1] as u32 + 1,
                channel: digits[n1 + 1..].to_vec(),
            }
        })
        .collect()
}

/// Every M-subset in lexicographic order, preceded by the empty action.
pub fn all_actions(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = vec![vec![]];
    rec(0, n, m, &mut Vec::new(), &mut out);
    out
}

fn cartesian(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &k in sizes {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

/// `E_h'[V(A, Δ, h')]` for every `(A, Δ)` block, by summing over all joint
/// channel vectors with product probabilities. Indexed like the blocks:
/// ages row-major, then `Δ`.
pub fn brute_channel_expectation(cfg: &SystemConfig<f64>, v: &[f64]) -> Vec<f64> {
    let sizes: Vec<usize> = cfg.devices().iter().map(|d| d.channel.len()).collect();
    let joint = cartesian(&sizes);
    let age_caps: Vec<usize> = cfg.devices()[..cfg.n_type_i()]
        .iter()
        .map(|d| d.aoi_cap as usize)
        .collect();
    let mut out = Vec::new();
    for ages in cartesian(&age_caps) {
        for dest in 1..=cfg.dest_aoi_cap() {
            let mut acc = 0.0;
            for h in &joint {
                let p: f64 = h
                    .iter()
                    .enumerate()
                    .map(|(n, &i)| cfg.device(n).channel.probs()[i])
                    .product();
                let s = RefState {
                    ages: ages.iter().map(|&a| a as u32 + 1).collect(),
                    dest,
                    channel: h.clone(),
                };
                acc += p * v[encode(cfg, &s)];
            }
            out.push(acc);
        }
    }
    out
}

fn age_prob(lambda: f64, cap: u32, from: u32, to: u32) -> f64 {
    let mut p = 0.0;
    if to == 1 {
        p += lambda;
    }
    if to == (from + 1).min(cap) {
        p += 1.0 - lambda;
    }
    p
}

/// `Q(s, a)` for every state and action by enumerating every successor
/// `(A', h')` of the whole system.
pub fn naive_q(cfg: &SystemConfig<f64>, v: &[f64]) -> Vec<Vec<f64>> {
    let n1 = cfg.n_type_i();
    let n = cfg.n_devices();
    let cap = cfg.dest_aoi_cap();
    let actions = all_actions(n, cfg.m_required());
    let sizes: Vec<usize> = cfg.devices().iter().map(|d| d.channel.len()).collect();
    let joint_h = cartesian(&sizes);
    let age_caps: Vec<usize> = cfg.devices()[..n1]
        .iter()
        .map(|d| d.aoi_cap as usize)
        .collect();
    let joint_a = cartesian(&age_caps);
    all_states(cfg)
        .iter()
        .map(|s| {
            actions
                .iter()
                .map(|a| {
                    let mut q = s.dest as f64;
                    for &k in a {
                        let d = cfg.device(k);
                        q += d.weight * (d.sampling_cost + d.tx_cost[s.channel[k]]);
                    }
                    let next_dest = if a.is_empty() {
                        (s.dest + 1).min(cap)
                    } else {
                        let oldest = a
                            .iter()
                            .map(|&k| if k < n1 { s.ages[k] } else { 0 })
                            .max()
                            .unwrap();
                        (oldest + 1).min(cap)
                    };
                    for next_ages in &joint_a {
                        let next_ages: Vec<u32> = next_ages.iter().map(|&x| x as u32 + 1).collect();
                        let pa: f64 = (0..n1)
                            .map(|k| {
                                let d = cfg.device(k);
                                age_prob(d.arrival_rate, d.aoi_cap, s.ages[k], next_ages[k])
                            })
                            .product();
                        if pa == 0.0 {
                            continue;
                        }
                        for h in &joint_h {
                            let ph: f64 = h
                                .iter()
                                .enumerate()
                                .map(|(k, &i)| cfg.device(k).channel.probs()[i])
                                .product();
                            let t = RefState {
                                ages: next_ages.clone(),
                                dest: next_dest,
                                channel: h.clone(),
                            };
                            q += pa * ph * v[encode(cfg, &t)];
                        }
                    }
                    q
                })
                .collect()
        })
        .collect()
}

/// Shape of a random test instance.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub n_type_i: usize,
    pub n_type_ii: usize,
    pub m: usize,
    pub aoi_cap: u32,
    pub dest_cap: u32,
    pub channel_states: usize,
}

/// A random configuration with per-device weights, non-uniform channel
/// probabilities and transmit costs non-increasing in the channel index.
pub fn random_config(seed: u64, shape: Shape) -> SystemConfig<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut devices = Vec::new();
    for i in 0..shape.n_type_i + shape.n_type_ii {
        let k = shape.channel_states;
        let mut values: Vec<f64> = (0..k)
            .map(|j| j as f64 + rng.random_range(0.5..1.0))
            .collect();
        values.sort_by(f64::total_cmp);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let mut tx: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..3.0)).collect();
        tx.sort_by(|a, b| b.total_cmp(a));
        let channel = ChannelModel::new(values, probs).unwrap();
        let weight = rng.random_range(0.2..2.0);
        devices.push(if i < shape.n_type_i {
            DeviceSpec::type_i(
                rng.random_range(0.1..0.9),
                tx,
                channel,
                shape.aoi_cap,
                weight,
            )
        } else {
            DeviceSpec::type_ii(rng.random_range(0.05..1.5), tx, channel, weight)
        });
    }
    SystemConfig::new(devices, shape.m, shape.dest_cap).unwrap()
}

/// Small mixed shapes cycled by seed; every state space stays below 5000.
pub fn small_mixed_shape(seed: u64) -> Shape {
    const SHAPES: [Shape; 5] = [
        Shape {
            n_type_i: 1,
            n_type_ii: 2,
            m: 2,
            aoi_cap: 4,
            dest_cap: 5,
            channel_states: 3,
        },
        Shape {
            n_type_i: 2,
            n_type_ii: 1,
            m: 2,
            aoi_cap: 3,
            dest_cap: 4,
            channel_states: 3,
        },
        Shape {
            n_type_i: 2,
            n_type_ii: 2,
            m: 2,
            aoi_cap: 3,
            dest_cap: 4,
            channel_states: 2,
        },
        Shape {
            n_type_i: 1,
            n_type_ii: 3,
            m: 3,
            aoi_cap: 3,
            dest_cap: 5,
            channel_states: 2,
        },
        Shape {
            n_type_i: 3,
            n_type_ii: 0,
            m: 2,
            aoi_cap: 3,
            dest_cap: 5,
            channel_states: 3,
        },
    ];
    SHAPES[seed as usize % SHAPES.len()]
}

/// All-type-II instances with three devices, four channel states and a
/// destination cap of 6.
pub fn type_ii_instance(seed: u64) -> SystemConfig<f64> {
    let spec = ExperimentSpec {
        n_type_i: 0,
        n_type_ii: 3,
        m_required: 2,
        dest_aoi_cap: 6,
        channel_states: 4,
        ..ExperimentSpec::default()
    };
    generate_instance(&spec, seed).unwrap()
}

/// The default experiment shape with five channel states per device.
pub fn large_mixed_instance() -> SystemConfig<f64> {
    let spec = ExperimentSpec {
        channel_states: 5,
        ..ExperimentSpec::default()
    };
    generate_instance(&spec, 2).unwrap()
}
