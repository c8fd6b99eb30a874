//! Event-driven simulation of the interacting network.
//!
//! Between spikes every potential moves with its own Lévy driver. When
//! neuron `i` reaches zero for the `k`-th time it is reset to `xi_ii^(k)` and
//! every other potential `j` is raised by `xi_ij^(k)`. The continuous part is
//! advanced with fixed Euler steps; crossings between grid points are
//! detected with the Brownian-bridge minimum formula (one Bernoulli draw per
//! coordinate and sub-interval).
//!
//! Randomness is split per neuron: the driving noise of neuron `i` and the
//! signal rows it emits come from separate streams of the replica key, and
//! both are consumed in an order that never depends on the network state.
//! [`simulate`] and [`decoupled_simulate`] with the same key therefore see
//! the same trajectories of `X` and the same signal matrices, ordinal by
//! ordinal.

use std::io::{self, Write};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_nonnegative, require_positive, ParamError, SimError};
use crate::levy::{crossing_probability, Law, LawFamily, LevySpec, StepDraws};
use crate::linalg::Matrix;
use crate::rng::{ReplicaKey, Stream};

/// Default cap on the number of spikes of a single neuron in one run.
pub const DEFAULT_MAX_SPIKES: u64 = 1_000_000;

/// Drivers and signal laws of an `n`-neuron network. Row `i` of
/// `signal_laws` holds the laws of the signals emitted when neuron `i`
/// spikes; the diagonal entry is its reset level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkConfig {
    specs: Vec<LevySpec>,
    signal_laws: Vec<Vec<Law>>,
}

/// Parameters of a network where all neurons share `nu`, neuron `i` resets
/// to mean level `h[i]` and signals every other neuron with mean `w[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricParams {
    pub h: Vec<f64>,
    pub w: Vec<f64>,
    pub nu: f64,
}

impl SymmetricParams {
    pub fn n(&self) -> usize {
        self.h.len()
    }

    /// `1 + sum_k w_k / (h_k - w_k)` over all neurons.
    pub fn load_factor(&self) -> f64 {
        1.0 + self
            .h
            .iter()
            .zip(&self.w)
            .map(|(h, w)| w / (h - w))
            .sum::<f64>()
    }

    /// Upper bound on the fluid emptying time from a unit-norm start.
    pub fn emptying_bound(&self) -> f64 {
        self.load_factor() / self.nu
    }
}

impl NetworkConfig {
    pub fn new(specs: Vec<LevySpec>, signal_laws: Vec<Vec<Law>>) -> Result<Self, ParamError> {
        let n = specs.len();
        if n == 0 {
            return Err(ParamError::Invalid("network needs at least one neuron".into()));
        }
        if signal_laws.len() != n || signal_laws.iter().any(|row| row.len() != n) {
            return Err(ParamError::Invalid(format!(
                "signal law matrix must be {n}x{n}"
            )));
        }
        for (i, spec) in specs.iter().enumerate() {
            spec.validate()
                .map_err(|e| ParamError::Invalid(format!("neuron {i}: {e}")))?;
        }
        for (i, row) in signal_laws.iter().enumerate() {
            for (j, law) in row.iter().enumerate() {
                law.validate()
                    .map_err(|e| ParamError::Invalid(format!("signal law ({i}, {j}): {e}")))?;
            }
        }
        Ok(Self { specs, signal_laws })
    }

    /// Network with a shared driver and constant-family signals of the given means.
    pub fn from_means(
        spec: LevySpec,
        means: &Matrix,
        family: LawFamily,
    ) -> Result<Self, ParamError> {
        let n = means.n();
        let laws = (0..n)
            .map(|i| (0..n).map(|j| Law::with_mean(family, means[(i, j)])).collect())
            .collect();
        Self::new(vec![spec; n], laws)
    }

    /// Symmetric preset: common `nu`, `b_ii = h[i]`, `b_ij = w[i]` for `j != i`.
    pub fn symmetric(
        h: &[f64],
        w: &[f64],
        nu: f64,
        noise: &LevySpec,
        family: LawFamily,
    ) -> Result<Self, ParamError> {
        if h.len() != w.len() || h.is_empty() {
            return Err(ParamError::Invalid(format!(
                "h and w must be non-empty and of equal length (got {} and {})",
                h.len(),
                w.len()
            )));
        }
        for (i, (&hi, &wi)) in h.iter().zip(w).enumerate() {
            require_positive("w", wi)?;
            if !(hi > wi) {
                return Err(ParamError::Invalid(format!(
                    "neuron {i}: H must exceed w (got H = {hi}, w = {wi})"
                )));
            }
        }
        let n = h.len();
        let mut means = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                means[(i, j)] = if i == j { h[i] } else { w[i] };
            }
        }
        let spec = LevySpec { nu, ..noise.clone() };
        Self::from_means(spec, &means, family)
    }

    pub fn n(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[LevySpec] {
        &self.specs
    }

    pub fn signal_laws(&self) -> &[Vec<Law>] {
        &self.signal_laws
    }

    /// `b_ij = E xi_ij`.
    pub fn mean_matrix(&self) -> Matrix {
        let n = self.n();
        let mut b = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = self.signal_laws[i][j].mean();
            }
        }
        b
    }

    pub fn nu(&self) -> Vec<f64> {
        self.specs.iter().map(|s| s.nu).collect()
    }

    /// Recognises the symmetric structure in the mean matrix, if present.
    pub fn symmetric_params(&self) -> Option<SymmetricParams> {
        let b = self.mean_matrix();
        let nu = self.specs[0].nu;
        if self.specs.iter().any(|s| s.nu != nu) {
            return None;
        }
        let n = self.n();
        let mut h = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for i in 0..n {
            let wi = if n == 1 { 0.0 } else { b[(i, (i + 1) % n)] };
            let same = (0..n)
                .filter(|&j| j != i)
                .all(|j| (b[(i, j)] - wi).abs() <= 1e-12 * wi.abs().max(1.0));
            if !same || b[(i, i)] <= wi {
                return None;
            }
            h.push(b[(i, i)]);
            w.push(wi);
        }
        Some(SymmetricParams { h, w, nu })
    }

    /// Copy of this network with every cross-signal law replaced.
    pub fn with_cross_signals(&self, law: Law) -> Result<Self, ParamError> {
        let mut laws = self.signal_laws.clone();
        for (i, row) in laws.iter_mut().enumerate() {
            for (j, l) in row.iter_mut().enumerate() {
                if i != j {
                    *l = law.clone();
                }
            }
        }
        Self::new(self.specs.clone(), laws)
    }
}

/// Whether cross-signals are delivered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    Full,
    /// Cross-signals replaced by zero; with `bar` the initial state of each
    /// neuron is an independent draw of its reset law.
    Decoupled { bar: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub horizon: f64,
    pub dt: f64,
    /// Record a sample every this many steps (the final step is always recorded).
    pub sample_stride: usize,
    pub max_spikes: u64,
}

impl SimOptions {
    pub fn new(horizon: f64, dt: f64) -> Self {
        Self {
            horizon,
            dt,
            sample_stride: 100,
            max_spikes: DEFAULT_MAX_SPIKES,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        require_positive("dt", self.dt)?;
        require_positive("horizon", self.horizon)?;
        if self.horizon < self.dt * (1.0 - 1e-12) {
            return Err(ParamError::Invalid(format!(
                "horizon {} shorter than one step {}",
                self.horizon, self.dt
            )));
        }
        if self.sample_stride == 0 {
            return Err(ParamError::Invalid("sample_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of Euler steps covering the horizon.
    pub fn steps(&self) -> u64 {
        steps_for(self.horizon, self.dt)
    }
}

pub(crate) fn steps_for(horizon: f64, dt: f64) -> u64 {
    let ratio = horizon / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as u64
    } else {
        ratio.ceil() as u64
    }
}

/// How a crossing inside a step was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossingKind {
    /// The potential is non-positive at the end of the step.
    Endpoint,
    /// Non-positive just before a jump inside the step.
    Interior,
    /// Endpoints positive; the bridge correction fired.
    Bridge,
}

#[derive(Debug, Clone, Copy)]
struct Crossing {
    kind: CrossingKind,
    offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub time: f64,
    /// Index of the Euler step (1-based: the step ending at `step * dt`).
    pub step: u64,
    pub neuron: usize,
    /// 1-based spike count of this neuron.
    pub ordinal: u64,
    pub kind: CrossingKind,
    /// Signal row actually applied (zero off the diagonal when decoupled).
    pub signals: Vec<f64>,
    /// Potential discarded by the reset: the pre-spike value at the end of the step.
    pub reset_residual: f64,
}

/// Trajectory of one run. Sample values are recorded after the spikes of
/// their step have been applied (right limits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub seed: u64,
    pub replica: u64,
    pub coupling: Coupling,
    pub dt: f64,
    pub z0: Vec<f64>,
    pub sample_steps: Vec<u64>,
    pub sample_times: Vec<f64>,
    pub z_samples: Vec<Vec<f64>>,
    /// Cumulative driver `X(t)` at the sample times.
    pub x_samples: Vec<Vec<f64>>,
    pub eta_samples: Vec<Vec<u64>>,
    pub spike_log: Vec<SpikeEvent>,
    pub eta_final: Vec<u64>,
    pub z_final: Vec<f64>,
}

#[derive(Serialize)]
struct SampleLine<'a> {
    t: f64,
    z: &'a [f64],
    x: &'a [f64],
    eta: &'a [u64],
}

impl SimRecord {
    pub fn n(&self) -> usize {
        self.z0.len()
    }

    pub fn horizon(&self) -> f64 {
        *self.sample_times.last().unwrap_or(&0.0)
    }

    /// Spike counts per neuron among events with `step <= step_limit`.
    pub fn counts_through_step(&self, step_limit: u64) -> Vec<u64> {
        let mut eta = vec![0; self.n()];
        for e in self.spike_log.iter().take_while(|e| e.step <= step_limit) {
            eta[e.neuron] += 1;
        }
        eta
    }

    /// Spike counts per neuron among events with `time <= t`.
    pub fn counts_until(&self, t: f64) -> Vec<u64> {
        let mut eta = vec![0; self.n()];
        for e in self.spike_log.iter().filter(|e| e.time <= t) {
            eta[e.neuron] += 1;
        }
        eta
    }

    /// Step indices of the spikes of each neuron, in ordinal order.
    pub fn spike_steps(&self) -> Vec<Vec<u64>> {
        let mut out = vec![Vec::new(); self.n()];
        for e in &self.spike_log {
            out[e.neuron].push(e.step);
        }
        out
    }

    /// Largest deviation, over samples and neurons, between the recorded
    /// potential and `z0 + X(t) + sum_j S_ji(eta_j(t))` corrected by the
    /// potentials discarded at the resets of neuron `i`.
    pub fn reconstruction_error(&self) -> f64 {
        let n = self.n();
        let mut signal_sum = vec![0.0; n];
        let mut worst: f64 = 0.0;
        let mut events = self.spike_log.iter().peekable();
        for (s, &step) in self.sample_steps.iter().enumerate() {
            while let Some(e) = events.next_if(|e| e.step <= step) {
                for (acc, v) in signal_sum.iter_mut().zip(&e.signals) {
                    *acc += v;
                }
                signal_sum[e.neuron] -= e.reset_residual;
            }
            for i in 0..n {
                let rebuilt = self.z0[i] + self.x_samples[s][i] + signal_sum[i];
                let scale = 1.0 + self.z_samples[s][i].abs() + self.x_samples[s][i].abs();
                worst = worst.max((rebuilt - self.z_samples[s][i]).abs() / scale);
            }
        }
        worst
    }

    /// One JSON object per sample time: `{"t", "z", "x", "eta"}`.
    pub fn write_samples_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for s in 0..self.sample_times.len() {
            let line = SampleLine {
                t: self.sample_times[s],
                z: &self.z_samples[s],
                x: &self.x_samples[s],
                eta: &self.eta_samples[s],
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Spike log as CSV with columns `time,neuron,ordinal`.
    pub fn write_spikes_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "time,neuron,ordinal")?;
        for e in &self.spike_log {
            writeln!(out, "{:.16e},{},{}", e.time, e.neuron, e.ordinal)?;
        }
        Ok(())
    }
}

/// Applies a spike of neuron `i`: its potential is set to `xi_row[i]` and
/// every other coordinate is raised by `xi_row[j]`.
pub fn apply_spike(z: &[f64], i: usize, xi_row: &[f64]) -> Result<Vec<f64>, SimError> {
    let mut out = z.to_vec();
    apply_spike_in_place(&mut out, i, xi_row)?;
    Ok(out)
}

fn check_row(i: usize, xi_row: &[f64], cross: bool) -> Result<(), SimError> {
    for (j, &v) in xi_row.iter().enumerate() {
        if (cross || j == i) && !(v > 0.0 && v.is_finite()) {
            return Err(SimError::NonPositiveSignal {
                neuron: i,
                target: j,
                value: v,
            });
        }
    }
    Ok(())
}

fn apply_spike_in_place(z: &mut [f64], i: usize, xi_row: &[f64]) -> Result<(), SimError> {
    if xi_row.len() != z.len() || i >= z.len() {
        return Err(ParamError::Invalid(format!(
            "spike of neuron {i} with a {}-entry row on a {}-neuron state",
            xi_row.len(),
            z.len()
        ))
        .into());
    }
    check_row(i, xi_row, true)?;
    for (j, (zj, &v)) in z.iter_mut().zip(xi_row).enumerate() {
        if j == i {
            *zj = v;
        } else {
            *zj += v;
        }
    }
    Ok(())
}

/// Step-by-step simulator. Use [`simulate`] / [`decoupled_simulate`] for
/// recorded runs; the engine is exposed for stopping-time experiments.
pub struct Engine<'c> {
    config: &'c NetworkConfig,
    coupling: Coupling,
    dt: f64,
    max_spikes: u64,
    step: u64,
    z: Vec<f64>,
    x: Vec<f64>,
    eta: Vec<u64>,
    noise: Vec<ChaCha8Rng>,
    signals: Vec<ChaCha8Rng>,
    draws: StepDraws,
    pending: Vec<Option<Crossing>>,
    row: Vec<f64>,
    record_events: bool,
    events: Vec<SpikeEvent>,
}

impl<'c> Engine<'c> {
    pub fn new(
        config: &'c NetworkConfig,
        z0: &[f64],
        coupling: Coupling,
        key: ReplicaKey,
        dt: f64,
    ) -> Result<Self, SimError> {
        let n = config.n();
        require_positive("dt", dt)?;
        let z = match coupling {
            Coupling::Decoupled { bar: true } => (0..n)
                .map(|i| {
                    let mut rng = key.stream(Stream::Initial(i));
                    config.signal_laws[i][i].sample(&mut rng)
                })
                .collect(),
            _ => {
                if z0.len() != n {
                    return Err(ParamError::Invalid(format!(
                        "initial state has {} entries for {n} neurons",
                        z0.len()
                    ))
                    .into());
                }
                for &v in z0 {
                    require_nonnegative("z0", v)?;
                }
                z0.to_vec()
            }
        };
        Ok(Self {
            config,
            coupling,
            dt,
            max_spikes: DEFAULT_MAX_SPIKES,
            step: 0,
            z,
            x: vec![0.0; n],
            eta: vec![0; n],
            noise: (0..n).map(|i| key.stream(Stream::Noise(i))).collect(),
            signals: (0..n).map(|i| key.stream(Stream::Signals(i))).collect(),
            draws: StepDraws::default(),
            pending: vec![None; n],
            row: vec![0.0; n],
            record_events: false,
            events: Vec::new(),
        })
    }

    pub fn with_max_spikes(mut self, max_spikes: u64) -> Self {
        self.max_spikes = max_spikes;
        self
    }

    pub fn recording_events(mut self, on: bool) -> Self {
        self.record_events = on;
        self
    }

    pub fn state(&self) -> &[f64] {
        &self.z
    }

    pub fn driver(&self) -> &[f64] {
        &self.x
    }

    pub fn counts(&self) -> &[u64] {
        &self.eta
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn take_events(&mut self) -> Vec<SpikeEvent> {
        std::mem::take(&mut self.events)
    }

    /// Advances one Euler step; returns the number of spikes it produced.
    pub fn step(&mut self) -> Result<usize, SimError> {
        let n = self.z.len();
        let t0 = self.time();

        for i in 0..n {
            let spec = &self.config.specs[i];
            spec.draw_step(self.dt, &mut self.noise[i], &mut self.draws);
            let last = self.draws.pieces.len() - 1;
            let mut a = self.z[i];
            let mut offset = 0.0;
            let mut crossing = None;
            for (m, piece) in self.draws.pieces.iter().enumerate() {
                let b = a + piece.increment;
                if crossing.is_none() {
                    if b <= 0.0 {
                        let kind = if m == last {
                            CrossingKind::Endpoint
                        } else {
                            CrossingKind::Interior
                        };
                        crossing = Some(Crossing {
                            kind,
                            offset: offset + piece.len,
                        });
                    } else if spec.sigma > 0.0
                        && self.draws.uniforms[m]
                            < crossing_probability(a, b, spec.sigma, piece.len)
                    {
                        // midpoint of the sub-interval (of the step when there are no jumps)
                        crossing = Some(Crossing {
                            kind: CrossingKind::Bridge,
                            offset: offset + 0.5 * piece.len,
                        });
                    }
                }
                a = b;
                offset += piece.len;
                if let Some(jump) = self.draws.jumps.get(m) {
                    a += jump.size;
                }
            }
            self.x[i] += self.draws.total();
            self.z[i] = a;
            self.pending[i] = crossing;
        }

        // Crossings are resolved in increasing neuron index. A signal received
        // earlier in this loop may lift an endpoint crossing back above zero.
        let mut spikes = 0;
        for i in 0..n {
            let Some(crossing) = self.pending[i].take() else {
                continue;
            };
            if crossing.kind == CrossingKind::Endpoint && self.z[i] > 0.0 {
                continue;
            }
            for (slot, law) in self.row.iter_mut().zip(&self.config.signal_laws[i]) {
                *slot = law.sample(&mut self.signals[i]);
            }
            let residual = self.z[i];
            match self.coupling {
                Coupling::Full => apply_spike_in_place(&mut self.z, i, &self.row)?,
                Coupling::Decoupled { .. } => {
                    check_row(i, &self.row, false)?;
                    self.z[i] = self.row[i];
                    for (j, v) in self.row.iter_mut().enumerate() {
                        if j != i {
                            *v = 0.0;
                        }
                    }
                }
            }
            self.eta[i] += 1;
            spikes += 1;
            let time = match crossing.kind {
                CrossingKind::Endpoint => (self.step + 1) as f64 * self.dt,
                _ => t0 + crossing.offset,
            };
            if self.eta[i] > self.max_spikes {
                return Err(SimError::SpikeExplosion {
                    neuron: i,
                    limit: self.max_spikes,
                    time,
                });
            }
            if self.record_events {
                self.events.push(SpikeEvent {
                    time,
                    step: self.step + 1,
                    neuron: i,
                    ordinal: self.eta[i],
                    kind: crossing.kind,
                    signals: self.row.clone(),
                    reset_residual: residual,
                });
            }
        }
        self.step += 1;
        Ok(spikes)
    }
}

fn run(
    config: &NetworkConfig,
    z0: &[f64],
    options: &SimOptions,
    key: ReplicaKey,
    coupling: Coupling,
) -> Result<SimRecord, SimError> {
    options.validate()?;
    for &v in z0 {
        require_finite("z0", v)?;
    }
    let mut engine = Engine::new(config, z0, coupling, key, options.dt)?
        .with_max_spikes(options.max_spikes)
        .recording_events(true);
    let n_steps = options.steps();
    let stride = options.sample_stride as u64;
    let capacity = (n_steps / stride + 2) as usize;
    let mut record = SimRecord {
        seed: key.seed,
        replica: key.replica,
        coupling,
        dt: options.dt,
        z0: engine.state().to_vec(),
        sample_steps: Vec::with_capacity(capacity),
        sample_times: Vec::with_capacity(capacity),
        z_samples: Vec::with_capacity(capacity),
        x_samples: Vec::with_capacity(capacity),
        eta_samples: Vec::with_capacity(capacity),
        spike_log: Vec::new(),
        eta_final: Vec::new(),
        z_final: Vec::new(),
    };
    let push_sample = |record: &mut SimRecord, engine: &Engine<'_>| {
        let s = engine.steps_taken();
        record.sample_steps.push(s);
        record.sample_times.push(s as f64 * options.dt);
        record.z_samples.push(engine.state().to_vec());
        record.x_samples.push(engine.driver().to_vec());
        record.eta_samples.push(engine.counts().to_vec());
    };
    push_sample(&mut record, &engine);
    for s in 1..=n_steps {
        if engine.step()? > 0 {
            record.spike_log.append(&mut engine.events);
        }
        if s % stride == 0 || s == n_steps {
            push_sample(&mut record, &engine);
        }
    }
    record.eta_final = engine.counts().to_vec();
    record.z_final = engine.state().to_vec();
    Ok(record)
}

/// Simulates the interacting network from `z0`.
pub fn simulate(
    config: &NetworkConfig,
    z0: &[f64],
    options: &SimOptions,
    key: ReplicaKey,
) -> Result<SimRecord, SimError> {
    run(config, z0, options, key, Coupling::Full)
}

/// Simulates the network with all cross-signals replaced by zero, on the same
/// noise and signal draws as [`simulate`] with the same key. With `bar_mode`
/// the initial state is drawn from the reset laws and `z0` is ignored.
pub fn decoupled_simulate(
    config: &NetworkConfig,
    z0: &[f64],
    options: &SimOptions,
    key: ReplicaKey,
    bar_mode: bool,
) -> Result<SimRecord, SimError> {
    run(config, z0, options, key, Coupling::Decoupled { bar: bar_mode })
}
