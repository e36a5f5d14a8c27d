//! Randomized instances and the weighting-factor sweep comparing the
//! optimal policy with the myopic baseline.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::model::{ChannelModel, DeviceSpec, SystemConfig};
use crate::scalar::Scalar;
use crate::sim::{myopic_policy, policy_from_table, simulate, SimMetrics, SimOptions};
use crate::solver::{relative_value_iteration, SolveOptions};

/// `count` points spaced geometrically from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub n_type_i: usize,
    pub n_type_ii: usize,
    pub m_required: usize,
    pub dest_aoi_cap: u32,
    pub aoi_cap: u32,
    pub channel_states: usize,
    pub lambda_range: [f64; 2],
    /// Range of `C^u`; the cost at channel value `h` is `C^u / h`.
    pub tx_base_range: [f64; 2],
    pub sampling_range: [f64; 2],
    pub channel_value_range: [f64; 2],
    pub beta_grid: Vec<f64>,
    pub slots: u64,
    pub seeds: Vec<u64>,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            n_type_i: 2,
            n_type_ii: 3,
            m_required: 2,
            dest_aoi_cap: 6,
            aoi_cap: 6,
            channel_states: 4,
            lambda_range: [0.3, 0.8],
            tx_base_range: [2.0, 3.0],
            sampling_range: [1.0, 2.0],
            channel_value_range: [1.0, 2.0],
            beta_grid: log_grid(0.05, 5.0, 7),
            slots: 50_000,
            seeds: vec![1, 2, 3, 4, 5],
            tol: 1e-9,
            max_iter: 100_000,
            damping: 0.5,
        }
    }
}

impl ExperimentSpec {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: Self = crate::model::deserialize_with_path(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("lambda_range", self.lambda_range),
            ("tx_base_range", self.tx_base_range),
            ("sampling_range", self.sampling_range),
            ("channel_value_range", self.channel_value_range),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::validation(
                    name,
                    "expected [low, high] with low <= high",
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.lambda_range[0])
            || !(0.0..=1.0).contains(&self.lambda_range[1])
        {
            return Err(Error::validation(
                "lambda_range",
                "arrival rates must lie in [0, 1]",
            ));
        }
        if self.channel_value_range[0] <= 0.0 {
            return Err(Error::validation(
                "channel_value_range",
                "channel values must be positive",
            ));
        }
        if self.sampling_range[0] <= 0.0 && self.n_type_ii > 0 {
            return Err(Error::validation(
                "sampling_range",
                "sampling costs must be positive",
            ));
        }
        if self.channel_states == 0 {
            return Err(Error::validation(
                "channel_states",
                "at least one channel state",
            ));
        }
        if let Some(i) = self
            .beta_grid
            .iter()
            .position(|b| !(*b > 0.0 && b.is_finite()))
        {
            return Err(Error::validation(
                format!("beta_grid[{i}]"),
                "weights must be positive",
            ));
        }
        if self.slots == 0 {
            return Err(Error::validation("slots", "at least one slot"));
        }
        Ok(())
    }

    pub fn solve_options<T: Scalar>(&self) -> SolveOptions<T> {
        SolveOptions::default()
            .with_tol(T::lit(self.tol))
            .with_max_iter(self.max_iter)
            .with_damping(T::lit(self.damping))
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn draw_channel(rng: &mut ChaCha8Rng, spec: &ExperimentSpec) -> Vec<f64> {
    loop {
        let mut values: Vec<f64> = (0..spec.channel_states)
            .map(|_| uniform(rng, spec.channel_value_range))
            .collect();
        values.sort_by(f64::total_cmp);
        if values.windows(2).all(|w| w[0] < w[1]) {
            return values;
        }
    }
}

/// Draws one instance: per device its rate or sampling cost, `C^u`, and
/// sorted channel values with equal probabilities; `C^u(h) = C^u / h`.
/// All weights are 1.
pub fn generate_instance<T: Scalar>(spec: &ExperimentSpec, seed: u64) -> Result<SystemConfig<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut devices = Vec::with_capacity(spec.n_type_i + spec.n_type_ii);
    for i in 0..spec.n_type_i + spec.n_type_ii {
        let type_i = i < spec.n_type_i;
        let first = if type_i {
            uniform(&mut rng, spec.lambda_range)
        } else {
            uniform(&mut rng, spec.sampling_range)
        };
        let base = uniform(&mut rng, spec.tx_base_range);
        let values = draw_channel(&mut rng, spec);
        let tx_cost = values.iter().map(|&h| T::lit(base / h)).collect();
        let channel = ChannelModel::uniform(values.into_iter().map(T::lit).collect())?;
        devices.push(if type_i {
            DeviceSpec::type_i(T::lit(first), tx_cost, channel, spec.aoi_cap, T::one())
        } else {
            DeviceSpec::type_ii(T::lit(first), tx_cost, channel, T::one())
        });
    }
    SystemConfig::new(devices, spec.m_required, spec.dest_aoi_cap)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub seed: u64,
    pub beta: f64,
    pub policy: String,
    /// Solver average cost, for the optimal policy only.
    pub theta: Option<f64>,
    pub metrics: SimMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepFailure {
    pub seed: u64,
    pub beta: f64,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

/// Relative gains of the optimal policy over the myopic one at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Improvement {
    pub seed: u64,
    pub beta: f64,
    /// `100 (myopic − optimal) / myopic` of the weighted cost.
    pub weighted_cost_pct: f64,
    pub dest_aoi_pct: f64,
    /// Same formula for energy; negative when the optimal policy spends more.
    pub energy_pct: f64,
}

fn sweep_point(
    spec: &ExperimentSpec,
    base: &SystemConfig<f64>,
    seed: u64,
    beta: f64,
) -> Result<Vec<SweepRow>> {
    let cfg = base.with_uniform_weight(beta)?;
    let kernel = Kernel::new(&cfg)?;
    let solution = relative_value_iteration(&kernel, &spec.solve_options())?;
    let opts = SimOptions::new(spec.slots, seed);
    let mut optimal = policy_from_table(&cfg, solution.policy)?;
    let optimal_metrics = simulate(&cfg, &mut optimal, opts)?;
    let myopic_metrics = simulate(&cfg, &mut myopic_policy(&cfg), opts)?;
    Ok(vec![
        SweepRow {
            seed,
            beta,
            policy: "optimal".into(),
            theta: Some(solution.value.theta),
            metrics: optimal_metrics,
        },
        SweepRow {
            seed,
            beta,
            policy: "myopic".into(),
            theta: None,
            metrics: myopic_metrics,
        },
    ])
}

/// For every seed and `β`: solve, then simulate the optimal and myopic
/// policies with the same simulation seed. Points run in parallel; rows
/// come back ordered by seed, then `β`. A failed point is recorded and the
/// rest still run.
pub fn beta_sweep(spec: &ExperimentSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let instances = spec
        .seeds
        .iter()
        .map(|&seed| generate_instance::<f64>(spec, seed).map(|c| (seed, c)))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, f64)> = (0..instances.len())
        .flat_map(|i| spec.beta_grid.iter().map(move |&b| (i, b)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(i, beta)| {
            let (seed, cfg) = &instances[i];
            (*seed, beta, sweep_point(spec, cfg, *seed, beta))
        })
        .collect();
    let mut outcome = SweepOutcome::default();
    for (seed, beta, result) in results {
        match result {
            Ok(rows) => outcome.rows.extend(rows),
            Err(e) => outcome.failures.push(SweepFailure {
                seed,
                beta,
                error: e.to_string(),
            }),
        }
    }
    Ok(outcome)
}

pub fn improvements(rows: &[SweepRow]) -> Vec<Improvement> {
    let pct = |myopic: f64, optimal: f64| 100.0 * (myopic - optimal) / myopic;
    rows.iter()
        .filter(|r| r.policy == "optimal")
        .filter_map(|opt| {
            let my = rows
                .iter()
                .find(|r| r.policy == "myopic" && r.seed == opt.seed && r.beta == opt.beta)?;
            Some(Improvement {
                seed: opt.seed,
                beta: opt.beta,
                weighted_cost_pct: pct(my.metrics.avg_weighted_cost, opt.metrics.avg_weighted_cost),
                dest_aoi_pct: pct(my.metrics.avg_dest_aoi, opt.metrics.avg_dest_aoi),
                energy_pct: pct(
                    my.metrics.avg_total_energy(),
                    opt.metrics.avg_total_energy(),
                ),
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "seed",
        "beta",
        "policy",
        "theta",
        "avg_weighted_cost",
        "avg_dest_aoi",
        "avg_total_energy",
        "se_weighted_cost",
        "se_dest_aoi",
        "se_total_energy",
        "slots",
    ])?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.seed.to_string(),
            r.beta.to_string(),
            r.policy.clone(),
            r.theta.map(|t| t.to_string()).unwrap_or_default(),
            m.avg_weighted_cost.to_string(),
            m.avg_dest_aoi.to_string(),
            m.avg_total_energy().to_string(),
            m.se_weighted_cost.to_string(),
            m.se_dest_aoi.to_string(),
            m.se_total_energy.to_string(),
            m.slots_simulated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_improvements_csv<W: Write>(out: W, rows: &[Improvement]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "seed",
        "beta",
        "weighted_cost_pct",
        "dest_aoi_pct",
        "energy_pct",
    ])?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.beta.to_string(),
            r.weighted_cost_pct.to_string(),
            r.dest_aoi_pct.to_string(),
            r.energy_pct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `sweep.csv`, `improvements.csv`, `failures.csv`, and one
/// `instance_<seed>.json` per seed into `dir`.
pub fn write_sweep_outputs(
    dir: &Path,
    spec: &ExperimentSpec,
    outcome: &SweepOutcome,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_sweep_csv(fs::File::create(dir.join("sweep.csv"))?, &outcome.rows)?;
    write_improvements_csv(
        fs::File::create(dir.join("improvements.csv"))?,
        &improvements(&outcome.rows),
    )?;
    let mut w = csv::Writer::from_writer(fs::File::create(dir.join("failures.csv"))?);
    w.write_record(["seed", "beta", "error"])?;
    for f in &outcome.failures {
        w.write_record([f.seed.to_string(), f.beta.to_string(), f.error.clone()])?;
    }
    w.flush()?;
    for &seed in &spec.seeds {
        let cfg = generate_instance::<f64>(spec, seed)?;
        fs::write(
            dir.join(format!("instance_{seed}.json")),
            cfg.to_json_string()?,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_shape_and_cost_law() {
        let spec = ExperimentSpec::default();
        let cfg = generate_instance::<f64>(&spec, 7).unwrap();
        assert_eq!(cfg.n_devices(), 5);
        assert_eq!(cfg.n_type_i(), 2);
        assert_eq!(cfg.m_required(), 2);
        for d in cfg.devices() {
            let v = d.channel.values();
            assert!(v.windows(2).all(|w| w[0] < w[1]));
            assert!(d.tx_cost.windows(2).all(|w| w[1] < w[0]));
            assert!(v.iter().all(|&h| (1.0..2.0).contains(&h)));
            assert!(d.channel.probs().iter().all(|&p| p == 0.25));
            // C^u(h) h is the same base for every channel state
            let base = d.tx_cost[0] * v[0];
            assert!((2.0..3.0).contains(&base));
            for (c, h) in d.tx_cost.iter().zip(v) {
                assert!((c * h - base).abs() < 1e-12);
            }
            if d.is_type_i() {
                assert!((0.3..0.8).contains(&d.arrival_rate));
            } else {
                assert!((1.0..2.0).contains(&d.sampling_cost));
            }
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let spec = ExperimentSpec::default();
        let a = generate_instance::<f64>(&spec, 3)
            .unwrap()
            .to_json_string()
            .unwrap();
        let b = generate_instance::<f64>(&spec, 3)
            .unwrap()
            .to_json_string()
            .unwrap();
        let c = generate_instance::<f64>(&spec, 4)
            .unwrap()
            .to_json_string()
            .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn default_grid_is_log_spaced() {
        let g = log_grid(0.05, 5.0, 7);
        assert_eq!(g.len(), 7);
        assert!((g[0] - 0.05).abs() < 1e-15 && (g[6] - 5.0).abs() < 1e-12);
        assert!((g[3] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spec_json_defaults_and_errors() {
        let spec = ExperimentSpec::from_json_str(r#"{"seeds": [9], "slots": 100}"#).unwrap();
        assert_eq!(spec.seeds, vec![9]);
        assert_eq!(spec.n_type_ii, 3);
        let err = ExperimentSpec::from_json_str(r#"{"beta_grid": [1.0, -2.0]}"#).unwrap_err();
        assert!(err.to_string().contains("beta_grid[1]"), "{err}");
        let err = ExperimentSpec::from_json_str(r#"{"slots": "many"}"#).unwrap_err();
        assert!(err.to_string().contains("slots"), "{err}");
    }

    #[test]
    fn small_sweep_rows_and_failures() {
        let spec = ExperimentSpec {
            n_type_i: 1,
            n_type_ii: 2,
            dest_aoi_cap: 4,
            aoi_cap: 3,
            channel_states: 2,
            beta_grid: vec![0.5, 2.0],
            slots: 2_000,
            seeds: vec![1, 2],
            ..ExperimentSpec::default()
        };
        let out = beta_sweep(&spec).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.rows.len(), 8);
        assert_eq!(improvements(&out.rows).len(), 4);
        let key: Vec<(u64, f64, &str)> = out
            .rows
            .iter()
            .map(|r| (r.seed, r.beta, r.policy.as_str()))
            .collect();
        assert_eq!(key[0], (1, 0.5, "optimal"));
        assert_eq!(key[3], (1, 2.0, "myopic"));

        let starved = ExperimentSpec {
            max_iter: 1,
            ..spec
        };
        let out = beta_sweep(&starved).unwrap();
        assert!(out.rows.is_empty());
        assert_eq!(out.failures.len(), 4);
        assert!(out.failures[0].error.contains("no convergence"));
    }
}
