//! Problem instance, product state space, action space, and the one-step
//! age dynamics.
//!
//! States are points `(A, Δ, h)`: the ages held by the type-I devices, the
//! age at the destination, and one channel index per device. They are
//! encoded mixed-radix, row-major, in the order
//!
//! ```text
//! A_0, A_1, .., A_{N1-1}, Δ, h_0, h_1, .., h_{N-1}
//! ```
//!
//! so the channel indices are the fastest-varying digits and every
//! `(A, Δ)` pair owns a contiguous block of `|H|` states. Device ages and
//! `Δ` start at 1; channel indices start at 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest state space [`StateSpace::new`] accepts.
pub const DEFAULT_STATE_CAP: usize = 50_000_000;

/// Finite i.i.d. block-fading channel of one device. Index order is value
/// order, so every monotonicity statement about channels uses indices.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelModel<T> {
    values: Vec<T>,
    probs: Vec<T>,
}

impl<T: Scalar> ChannelModel<T> {
    pub fn new(values: Vec<T>, probs: Vec<T>) -> Result<Self> {
        Self::checked(values, probs, "channel")
    }

    /// Equiprobable channel over `values`.
    pub fn uniform(values: Vec<T>) -> Result<Self> {
        let p = T::one() / T::from_count(values.len().max(1));
        let probs = vec![p; values.len()];
        Self::new(values, probs)
    }

    fn checked(values: Vec<T>, probs: Vec<T>, path: &str) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation(
                format!("{path}.values"),
                "at least one channel state is required",
            ));
        }
        if values.len() != probs.len() {
            return Err(Error::validation(
                format!("{path}.probs"),
                format!("expected {} entries, found {}", values.len(), probs.len()),
            ));
        }
        for (i, w) in values.windows(2).enumerate() {
            if !(w[0] < w[1]) {
                return Err(Error::validation(
                    format!("{path}.values[{}]", i + 1),
                    "channel values must be strictly increasing",
                ));
            }
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite_value() || p < T::zero() {
                return Err(Error::validation(
                    format!("{path}.probs[{i}]"),
                    "probabilities must be non-negative",
                ));
            }
        }
        let total = probs.iter().fold(T::zero(), |acc, &p| acc + p);
        if (total - T::one()).abs() > T::probability_tolerance() {
            return Err(Error::validation(
                format!("{path}.probs"),
                format!("probabilities sum to {total}, not 1"),
            ));
        }
        Ok(Self { values, probs })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceKind {
    /// Updates arrive as a Bernoulli process into a one-packet buffer.
    #[serde(alias = "type_i", alias = "I")]
    TypeI,
    /// Updates are generated at will for a sampling cost.
    #[serde(alias = "type_ii", alias = "II")]
    TypeII,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceSpec<T> {
    pub kind: DeviceKind,
    /// Per-slot arrival probability. Zero for type-II devices.
    pub arrival_rate: T,
    /// Energy to generate a fresh sample. Zero for type-I devices.
    pub sampling_cost: T,
    /// Transmission energy per channel state, aligned with `channel.values()`.
    pub tx_cost: Vec<T>,
    pub channel: ChannelModel<T>,
    /// Cap on the device age. Ignored for type-II devices.
    pub aoi_cap: u32,
    pub weight: T,
}

impl<T: Scalar> DeviceSpec<T> {
    pub fn type_i(
        arrival_rate: T,
        tx_cost: Vec<T>,
        channel: ChannelModel<T>,
        aoi_cap: u32,
        weight: T,
    ) -> Self {
        Self {
            kind: DeviceKind::TypeI,
            arrival_rate,
            sampling_cost: T::zero(),
            tx_cost,
            channel,
            aoi_cap,
            weight,
        }
    }

    pub fn type_ii(sampling_cost: T, tx_cost: Vec<T>, channel: ChannelModel<T>, weight: T) -> Self {
        Self {
            kind: DeviceKind::TypeII,
            arrival_rate: T::zero(),
            sampling_cost,
            tx_cost,
            channel,
            aoi_cap: 0,
            weight,
        }
    }

    pub fn is_type_i(&self) -> bool {
        self.kind == DeviceKind::TypeI
    }

    /// Unweighted energy `C^s + C^u(h)` of one update at channel index `h`.
    #[inline]
    pub fn energy(&self, h: usize) -> T {
        self.sampling_cost + self.tx_cost[h]
    }

    /// `β (C^s + C^u(h))`.
    #[inline]
    pub fn weighted_cost(&self, h: usize) -> T {
        self.weight * self.energy(h)
    }

    fn validate(&self, path: &str) -> Result<()> {
        let field = |name: &str| format!("{path}.{name}");
        if self.tx_cost.len() != self.channel.len() {
            return Err(Error::validation(
                field("tx_cost"),
                format!(
                    "expected {} entries (one per channel state), found {}",
                    self.channel.len(),
                    self.tx_cost.len()
                ),
            ));
        }
        for (i, &c) in self.tx_cost.iter().enumerate() {
            if !c.is_finite_value() || c < T::zero() {
                return Err(Error::validation(
                    format!("{path}.tx_cost[{i}]"),
                    "transmission cost must be finite and non-negative",
                ));
            }
        }
        for (i, w) in self.tx_cost.windows(2).enumerate() {
            if w[1] > w[0] {
                return Err(Error::validation(
                    format!("{path}.tx_cost[{}]", i + 1),
                    "transmission cost must be non-increasing in the channel state",
                ));
            }
        }
        if !self.weight.is_finite_value() || self.weight <= T::zero() {
            return Err(Error::validation(
                field("weight"),
                "weight must be positive",
            ));
        }
        match self.kind {
            DeviceKind::TypeI => {
                if self.sampling_cost != T::zero() {
                    return Err(Error::validation(
                        field("sampling_cost"),
                        "type-I devices have no sampling cost",
                    ));
                }
                if !(self.arrival_rate >= T::zero() && self.arrival_rate <= T::one()) {
                    return Err(Error::validation(
                        field("lambda"),
                        "arrival rate must lie in [0, 1]",
                    ));
                }
                if self.aoi_cap < 1 {
                    return Err(Error::validation(
                        field("aoi_cap"),
                        "age cap must be at least 1",
                    ));
                }
            }
            DeviceKind::TypeII => {
                if !self.sampling_cost.is_finite_value() || self.sampling_cost <= T::zero() {
                    return Err(Error::validation(
                        field("sampling_cost"),
                        "type-II devices need a positive sampling cost",
                    ));
                }
                if self.arrival_rate != T::zero() {
                    return Err(Error::validation(
                        field("lambda"),
                        "type-II devices have no arrival process",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A complete problem instance. Type-I devices come first.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig<T> {
    devices: Vec<DeviceSpec<T>>,
    m_required: usize,
    dest_aoi_cap: u32,
}

impl<T: Scalar> SystemConfig<T> {
    pub fn new(devices: Vec<DeviceSpec<T>>, m_required: usize, dest_aoi_cap: u32) -> Result<Self> {
        for (i, d) in devices.iter().enumerate() {
            d.validate(&format!("devices[{i}]"))?;
        }
        if let Some(pos) = devices
            .windows(2)
            .position(|w| !w[0].is_type_i() && w[1].is_type_i())
        {
            return Err(Error::validation(
                format!("devices[{}].kind", pos + 1),
                "type-I devices must precede type-II devices",
            ));
        }
        if m_required < 2 || m_required > devices.len() {
            return Err(Error::validation(
                "m_required",
                format!("must satisfy 2 <= M <= N = {}", devices.len()),
            ));
        }
        if dest_aoi_cap < 1 {
            return Err(Error::validation("dest_aoi_cap", "must be at least 1"));
        }
        Ok(Self {
            devices,
            m_required,
            dest_aoi_cap,
        })
    }

    pub fn devices(&self) -> &[DeviceSpec<T>] {
        &self.devices
    }

    pub fn device(&self, n: usize) -> &DeviceSpec<T> {
        &self.devices[n]
    }

    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn n_type_i(&self) -> usize {
        self.devices.iter().take_while(|d| d.is_type_i()).count()
    }

    pub fn all_type_ii(&self) -> bool {
        self.n_type_i() == 0
    }

    pub fn m_required(&self) -> usize {
        self.m_required
    }

    pub fn dest_aoi_cap(&self) -> u32 {
        self.dest_aoi_cap
    }

    /// Same instance with every device weight replaced by `beta`.
    pub fn with_uniform_weight(&self, beta: T) -> Result<Self> {
        let devices = self
            .devices
            .iter()
            .cloned()
            .map(|mut d| {
                d.weight = beta;
                d
            })
            .collect();
        Self::new(devices, self.m_required, self.dest_aoi_cap)
    }

    /// The common device weight, if all devices share one.
    pub fn uniform_weight(&self) -> Option<T> {
        let first = self.devices.first()?.weight;
        self.devices
            .iter()
            .all(|d| d.weight == first)
            .then_some(first)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawConfig = deserialize_with_path(s)?;
        raw.into_config()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&RawConfig::from_config(self))?)
    }
}

/// A point of the product state space. `device_aoi` has one entry per
/// device; type-II entries are always 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct State {
    pub device_aoi: Vec<u32>,
    pub dest_aoi: u32,
    pub channel_idx: Vec<usize>,
}

/// Mixed-radix bijection between [`State`]s and `0..len()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSpace {
    n_devices: usize,
    aoi_caps: Vec<u32>,
    dest_cap: u32,
    channel_sizes: Vec<usize>,
    n_ages: usize,
    n_channels: usize,
    len: usize,
}

impl StateSpace {
    pub fn new<T: Scalar>(cfg: &SystemConfig<T>) -> Result<Self> {
        Self::with_cap(cfg, DEFAULT_STATE_CAP)
    }

    pub fn with_cap<T: Scalar>(cfg: &SystemConfig<T>, cap: usize) -> Result<Self> {
        let aoi_caps: Vec<u32> = cfg.devices()[..cfg.n_type_i()]
            .iter()
            .map(|d| d.aoi_cap)
            .collect();
        let channel_sizes: Vec<usize> = cfg.devices().iter().map(|d| d.channel.len()).collect();
        let n_ages: u128 = aoi_caps.iter().map(|&c| c as u128).product();
        let n_channels: u128 = channel_sizes.iter().map(|&c| c as u128).product();
        let size = n_ages * cfg.dest_aoi_cap() as u128 * n_channels;
        if size > cap as u128 {
            return Err(Error::StateSpaceTooLarge { size, cap });
        }
        Ok(Self {
            n_devices: cfg.n_devices(),
            aoi_caps,
            dest_cap: cfg.dest_aoi_cap(),
            channel_sizes,
            n_ages: n_ages as usize,
            n_channels: n_channels as usize,
            len: size as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_type_i(&self) -> usize {
        self.aoi_caps.len()
    }

    pub fn n_devices(&self) -> usize {
        self.n_devices
    }

    /// `|A| = ∏ Â_n` over type-I devices.
    pub fn n_ages(&self) -> usize {
        self.n_ages
    }

    /// `|H| = ∏ |H_n|` over all devices.
    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn dest_cap(&self) -> u32 {
        self.dest_cap
    }

    pub fn aoi_caps(&self) -> &[u32] {
        &self.aoi_caps
    }

    pub fn channel_sizes(&self) -> &[usize] {
        &self.channel_sizes
    }

    /// Number of `(A, Δ)` blocks; each holds `n_channels()` states.
    pub fn n_blocks(&self) -> usize {
        self.n_ages * self.dest_cap as usize
    }

    #[inline]
    pub fn block_index(&self, age_idx: usize, dest_aoi: u32) -> usize {
        age_idx * self.dest_cap as usize + (dest_aoi as usize - 1)
    }

    /// Inverse of [`block_index`](Self::block_index).
    #[inline]
    pub fn split_block(&self, block: usize) -> (usize, u32) {
        let d = self.dest_cap as usize;
        (block / d, (block % d) as u32 + 1)
    }

    #[inline]
    pub fn compose(&self, age_idx: usize, dest_aoi: u32, channel: usize) -> usize {
        self.block_index(age_idx, dest_aoi) * self.n_channels + channel
    }

    /// Splits a flat index into `(age index, Δ, channel index)`.
    #[inline]
    pub fn decompose(&self, index: usize) -> (usize, u32, usize) {
        let (age_idx, dest) = self.split_block(index / self.n_channels);
        (age_idx, dest, index % self.n_channels)
    }

    /// Flat index of the type-I age vector (ages start at 1).
    pub fn age_index(&self, ages: &[u32]) -> usize {
        debug_assert_eq!(ages.len(), self.aoi_caps.len());
        ages.iter()
            .zip(&self.aoi_caps)
            .fold(0, |acc, (&a, &cap)| acc * cap as usize + (a as usize - 1))
    }

    pub fn ages(&self, mut age_idx: usize) -> Vec<u32> {
        let mut out = vec![0; self.aoi_caps.len()];
        for (slot, &cap) in out.iter_mut().zip(&self.aoi_caps).rev() {
            *slot = (age_idx % cap as usize) as u32 + 1;
            age_idx /= cap as usize;
        }
        out
    }

    pub fn channel_index(&self, channel: &[usize]) -> usize {
        debug_assert_eq!(channel.len(), self.channel_sizes.len());
        channel
            .iter()
            .zip(&self.channel_sizes)
            .fold(0, |acc, (&h, &k)| acc * k + h)
    }

    pub fn channel_vector(&self, mut channel: usize) -> Vec<usize> {
        let mut out = vec![0; self.channel_sizes.len()];
        for (slot, &k) in out.iter_mut().zip(&self.channel_sizes).rev() {
            *slot = channel % k;
            channel /= k;
        }
        out
    }

    pub fn contains(&self, s: &State) -> bool {
        let n1 = self.n_type_i();
        s.device_aoi.len() == self.n_devices
            && s.channel_idx.len() == self.n_devices
            && (1..=self.dest_cap).contains(&s.dest_aoi)
            && s.device_aoi[..n1]
                .iter()
                .zip(&self.aoi_caps)
                .all(|(&a, &cap)| (1..=cap).contains(&a))
            && s.device_aoi[n1..].iter().all(|&a| a == 0)
            && s.channel_idx
                .iter()
                .zip(&self.channel_sizes)
                .all(|(&h, &k)| h < k)
    }

    pub fn index(&self, s: &State) -> usize {
        debug_assert!(self.contains(s), "state out of range: {s:?}");
        let n1 = self.n_type_i();
        self.compose(
            self.age_index(&s.device_aoi[..n1]),
            s.dest_aoi,
            self.channel_index(&s.channel_idx),
        )
    }

    pub fn state(&self, index: usize) -> State {
        assert!(index < self.len, "state index {index} out of range");
        let (age_idx, dest_aoi, channel) = self.decompose(index);
        let mut device_aoi = self.ages(age_idx);
        device_aoi.resize(self.n_devices, 0);
        State {
            device_aoi,
            dest_aoi,
            channel_idx: self.channel_vector(channel),
        }
    }

    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.len).map(|i| self.state(i))
    }
}

pub fn enumerate_states<T: Scalar>(cfg: &SystemConfig<T>) -> Result<StateSpace> {
    StateSpace::new(cfg)
}

/// Either no transmission or exactly `M` distinct devices, sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    devices: Vec<usize>,
}

impl Action {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn schedule(mut devices: Vec<usize>) -> Self {
        devices.sort_unstable();
        devices.dedup();
        Self { devices }
    }

    pub fn devices(&self) -> &[usize] {
        &self.devices
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }
}

/// `{Empty}` followed by every `M`-subset in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSpace {
    actions: Vec<Action>,
}

pub const NOOP: usize = 0;

impl ActionSpace {
    pub fn new(n_devices: usize, m: usize) -> Self {
        let mut actions = vec![Action::empty()];
        if m >= 1 && m <= n_devices {
            let mut combo: Vec<usize> = (0..m).collect();
            loop {
                actions.push(Action {
                    devices: combo.clone(),
                });
                // advance to the next combination in lexicographic order
                let Some(i) = (0..m).rev().find(|&i| combo[i] < n_devices - m + i) else {
                    break;
                };
                combo[i] += 1;
                for j in i + 1..m {
                    combo[j] = combo[j - 1] + 1;
                }
            }
        }
        Self { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Action {
        &self.actions[idx]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Action> {
        self.actions.iter()
    }

    pub fn index_of(&self, a: &Action) -> Option<usize> {
        if a.is_empty() {
            return Some(NOOP);
        }
        // non-empty actions are sorted lexicographically after the no-op
        self.actions[1..].binary_search(a).ok().map(|i| i + 1)
    }
}

pub fn enumerate_actions<T: Scalar>(cfg: &SystemConfig<T>) -> ActionSpace {
    ActionSpace::new(cfg.n_devices(), cfg.m_required())
}

/// Weighted energy `Σ_{n∈a} β_n (C^s_n + C^u_n(h_n))` of action `a` in `s`.
pub fn action_cost<T: Scalar>(cfg: &SystemConfig<T>, a: &Action, s: &State) -> T {
    a.devices().iter().fold(T::zero(), |acc, &n| {
        acc + cfg.device(n).weighted_cost(s.channel_idx[n])
    })
}

/// Destination age in the next slot. A full schedule resets it to the
/// oldest scheduled packet age plus one; anything else lets it grow.
pub fn next_dest_aoi<T: Scalar>(cfg: &SystemConfig<T>, s: &State, a: &Action) -> u32 {
    let cap = cfg.dest_aoi_cap();
    if a.len() == cfg.m_required() {
        let oldest = a
            .devices()
            .iter()
            .map(|&n| s.device_aoi[n])
            .max()
            .unwrap_or(0);
        (oldest + 1).min(cap)
    } else {
        (s.dest_aoi + 1).min(cap)
    }
}

/// Next-slot distribution of a type-I device age. Zero-probability
/// branches are dropped and coinciding targets merged.
pub fn device_aoi_successors<T: Scalar>(spec: &DeviceSpec<T>, aoi: u32) -> Result<Vec<(u32, T)>> {
    if !spec.is_type_i() {
        return Err(Error::Contract(
            "device age transitions exist only for type-I devices".into(),
        ));
    }
    if aoi < 1 || aoi > spec.aoi_cap {
        return Err(Error::Contract(format!(
            "device age {aoi} outside 1..={}",
            spec.aoi_cap
        )));
    }
    let lambda = spec.arrival_rate;
    let stale = (aoi + 1).min(spec.aoi_cap);
    let mut out: Vec<(u32, T)> = Vec::with_capacity(2);
    for (target, p) in [(1, lambda), (stale, T::one() - lambda)] {
        if p == T::zero() {
            continue;
        }
        match out.iter_mut().find(|(t, _)| *t == target) {
            Some(entry) => entry.1 += p,
            None => out.push((target, p)),
        }
    }
    Ok(out)
}

// JSON document layout.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    values: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    kind: DeviceKind,
    #[serde(default)]
    lambda: f64,
    #[serde(default)]
    sampling_cost: f64,
    tx_cost: Vec<f64>,
    channel: RawChannel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aoi_cap: Option<u32>,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    devices: Vec<RawDevice>,
    m_required: usize,
    dest_aoi_cap: u32,
}

fn convert<T: Scalar>(x: f64, path: impl FnOnce() -> String) -> Result<T> {
    if !x.is_finite() {
        return Err(Error::validation(path(), "value must be finite"));
    }
    T::from_f64(x).ok_or_else(|| Error::validation(path(), "value not representable"))
}

fn convert_all<T: Scalar>(xs: &[f64], path: &str) -> Result<Vec<T>> {
    xs.iter()
        .enumerate()
        .map(|(i, &x)| convert(x, || format!("{path}[{i}]")))
        .collect()
}

impl RawConfig {
    fn into_config<T: Scalar>(self) -> Result<SystemConfig<T>> {
        let mut devices = Vec::with_capacity(self.devices.len());
        for (i, d) in self.devices.into_iter().enumerate() {
            let path = format!("devices[{i}]");
            let channel = ChannelModel::checked(
                convert_all(&d.channel.values, &format!("{path}.channel.values"))?,
                convert_all(&d.channel.probs, &format!("{path}.channel.probs"))?,
                &format!("{path}.channel"),
            )?;
            let tx_cost = convert_all(&d.tx_cost, &format!("{path}.tx_cost"))?;
            let weight = convert(d.weight, || format!("{path}.weight"))?;
            let spec = match d.kind {
                DeviceKind::TypeI => {
                    let cap = d.aoi_cap.ok_or_else(|| {
                        Error::validation(format!("{path}.aoi_cap"), "required for type-I devices")
                    })?;
                    let mut spec = DeviceSpec::type_i(
                        convert(d.lambda, || format!("{path}.lambda"))?,
                        tx_cost,
                        channel,
                        cap,
                        weight,
                    );
                    spec.sampling_cost =
                        convert(d.sampling_cost, || format!("{path}.sampling_cost"))?;
                    spec
                }
                DeviceKind::TypeII => {
                    let mut spec = DeviceSpec::type_ii(
                        convert(d.sampling_cost, || format!("{path}.sampling_cost"))?,
                        tx_cost,
                        channel,
                        weight,
                    );
                    spec.arrival_rate = convert(d.lambda, || format!("{path}.lambda"))?;
                    spec.aoi_cap = d.aoi_cap.unwrap_or(0);
                    spec
                }
            };
            devices.push(spec);
        }
        SystemConfig::new(devices, self.m_required, self.dest_aoi_cap)
    }

    fn from_config<T: Scalar>(cfg: &SystemConfig<T>) -> Self {
        let f = |xs: &[T]| xs.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        RawConfig {
            devices: cfg
                .devices()
                .iter()
                .map(|d| RawDevice {
                    kind: d.kind,
                    lambda: d.arrival_rate.as_f64(),
                    sampling_cost: d.sampling_cost.as_f64(),
                    tx_cost: f(&d.tx_cost),
                    channel: RawChannel {
                        values: f(d.channel.values()),
                        probs: f(d.channel.probs()),
                    },
                    aoi_cap: d.is_type_i().then_some(d.aoi_cap),
                    weight: d.weight.as_f64(),
                })
                .collect(),
            m_required: cfg.m_required(),
            dest_aoi_cap: cfg.dest_aoi_cap(),
        }
    }
}

/// Deserializes JSON, reporting failures with the offending field path.
pub(crate) fn deserialize_with_path<D: serde::de::DeserializeOwned>(s: &str) -> Result<D> {
    let de = &mut serde_json::Deserializer::from_str(s);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::validation(path, e.into_inner().to_string())
    })
}
