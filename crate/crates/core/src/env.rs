//! Planar rover environment.
//!
//! A genotype parameterises a one-hidden-layer controller that maps the
//! rover's pose to a (forward speed, turn rate) command. The pose is
//! integrated with explicit Euler unicycle kinematics at the control rate and
//! sampled at a lower rate to produce the sensory streams that learnt
//! descriptors are built from.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Channel order of [`SensoryData`] produced by [`rollout`].
pub const CHANNELS: [&str; 6] = ["x", "y", "sin_theta", "cos_theta", "v", "omega"];

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Downstream task, each paired with a hand-coded descriptor and fitness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskId {
    Navigation,
    Forward,
    HalfTurn,
}

impl TaskId {
    pub const ALL: [TaskId; 3] = [TaskId::Navigation, TaskId::Forward, TaskId::HalfTurn];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskId::Navigation => "navigation",
            TaskId::Forward => "forward",
            TaskId::HalfTurn => "half-turn",
        }
    }

    /// Lower and upper bounds of the task fitness on this environment.
    pub fn fitness_range(self, params: &RoverParams) -> (f64, f64) {
        match self {
            TaskId::Forward => {
                let reach = params.reach();
                (-reach, reach)
            }
            TaskId::Navigation | TaskId::HalfTurn => (-PI, 0.0),
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "navigation" | "nav" => Ok(TaskId::Navigation),
            "forward" | "moving-forward" => Ok(TaskId::Forward),
            "half-turn" | "halfturn" | "half-roll" => Ok(TaskId::HalfTurn),
            _ => Err(Error::UnknownTask(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoverParams {
    /// Controller inputs: x, y (scaled by `arena_scale`), sin(theta), cos(theta).
    pub state_dim: usize,
    pub hidden: usize,
    /// Controller outputs: forward speed and turn rate commands.
    pub control_dim: usize,
    pub timestep: f64,
    pub episode_length: f64,
    pub sample_rate_hz: f64,
    pub max_speed: f64,
    pub max_turn_rate: f64,
    pub arena_scale: f64,
}

impl Default for RoverParams {
    fn default() -> Self {
        Self {
            state_dim: 4,
            hidden: 8,
            control_dim: 2,
            timestep: 0.02,
            episode_length: 3.0,
            sample_rate_hz: 10.0,
            max_speed: 1.0,
            max_turn_rate: PI,
            arena_scale: 3.0,
        }
    }
}

impl RoverParams {
    pub fn genotype_dim(&self) -> usize {
        (self.state_dim + 1) * self.hidden + (self.hidden + 1) * self.control_dim
    }

    pub fn control_steps(&self) -> usize {
        (self.episode_length / self.timestep).round() as usize
    }

    /// Number of sensory samples per channel.
    pub fn samples(&self) -> usize {
        (self.episode_length * self.sample_rate_hz).round() as usize
    }

    pub fn channels(&self) -> usize {
        CHANNELS.len()
    }

    /// Largest distance the rover can cover in one episode.
    pub fn reach(&self) -> f64 {
        self.max_speed * self.episode_length
    }
}

/// Sensory streams of one episode: `channels` rows of `steps` samples, stored
/// row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SensoryData {
    channels: usize,
    steps: usize,
    values: Vec<f64>,
}

impl SensoryData {
    pub fn new(channels: usize, steps: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != channels * steps {
            return Err(Error::Dimension {
                expected: channels * steps,
                got: values.len(),
            });
        }
        Ok(Self {
            channels,
            steps,
            values,
        })
    }

    pub fn constant(channels: usize, steps: usize, value: f64) -> Self {
        Self {
            channels,
            steps,
            values: vec![value; channels * steps],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.steps..(c + 1) * self.steps]
    }

    /// Flattened channel-major view.
    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Per-channel mean over time.
    pub fn channel_means(&self) -> Vec<f64> {
        (0..self.channels)
            .map(|c| self.channel(c).iter().sum::<f64>() / self.steps as f64)
            .collect()
    }
}

/// Scalar facts about an episode consumed by fitness functions, hand-coded
/// descriptors and task solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvSummary {
    pub x: f64,
    pub y: f64,
    /// Final heading, wrapped to `(-pi, pi]`.
    pub theta: f64,
    /// Fraction of control steps with |speed command| > 0.5.
    pub duty: f64,
    /// Mean absolute turn rate in rad/s.
    pub mean_abs_turn: f64,
}

impl EnvSummary {
    pub const STATIONARY: EnvSummary = EnvSummary {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
        duty: 0.0,
        mean_abs_turn: 0.0,
    };
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceStep {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

struct Controller<'a> {
    params: &'a RoverParams,
    genotype: &'a [f64],
}

impl Controller<'_> {
    /// Returns normalised (speed, turn) commands in [-1, 1].
    fn command(&self, state: &[f64; 4], hidden: &mut [f64]) -> (f64, f64) {
        let p = self.params;
        let stride = p.state_dim + 1;
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &self.genotype[j * stride..(j + 1) * stride];
            let mut acc = row[p.state_dim];
            for (w, s) in row.iter().zip(state.iter()) {
                acc += w * s;
            }
            *h = acc.tanh();
        }
        let base = stride * p.hidden;
        let out_stride = p.hidden + 1;
        let mut out = [0.0; 2];
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.genotype[base + k * out_stride..base + (k + 1) * out_stride];
            let mut acc = row[p.hidden];
            for (w, h) in row.iter().zip(hidden.iter()) {
                acc += w * h;
            }
            *o = acc.clamp(-1.0, 1.0);
        }
        (out[0], out[1])
    }
}

fn simulate(
    params: &RoverParams,
    genotype: &[f64],
    mut trace: Option<&mut Vec<TraceStep>>,
) -> Result<(SensoryData, EnvSummary)> {
    if genotype.len() != params.genotype_dim() {
        return Err(Error::GenotypeLength {
            expected: params.genotype_dim(),
            got: genotype.len(),
        });
    }
    // The controller layout is fixed to the 4-input / 2-output rover.
    debug_assert_eq!(params.state_dim, 4);
    debug_assert_eq!(params.control_dim, 2);

    let steps = params.control_steps();
    let samples = params.samples();
    let stride = (steps / samples).max(1);
    let controller = Controller { params, genotype };
    let mut hidden = vec![0.0; params.hidden];

    let mut streams = vec![0.0; CHANNELS.len() * samples];
    let (mut x, mut y, mut theta) = (0.0f64, 0.0f64, 0.0f64);
    let mut active = 0usize;
    let mut abs_turn = 0.0;
    let mut sample = 0usize;

    for step in 0..steps {
        let state = [
            x / params.arena_scale,
            y / params.arena_scale,
            theta.sin(),
            theta.cos(),
        ];
        let (v_cmd, w_cmd) = controller.command(&state, &mut hidden);
        let v = v_cmd * params.max_speed;
        let omega = w_cmd * params.max_turn_rate;
        if v_cmd.abs() > 0.5 {
            active += 1;
        }
        abs_turn += omega.abs();

        x += v * theta.cos() * params.timestep;
        y += v * theta.sin() * params.timestep;
        theta = wrap_angle(theta + omega * params.timestep);

        if let Some(trace) = trace.as_deref_mut() {
            trace.push(TraceStep {
                t: (step + 1) as f64 * params.timestep,
                x,
                y,
                theta,
                v,
                omega,
            });
        }

        if (step + 1) % stride == 0 && sample < samples {
            let row = [x, y, theta.sin(), theta.cos(), v, omega];
            for (c, value) in row.into_iter().enumerate() {
                streams[c * samples + sample] = value;
            }
            sample += 1;
        }
    }

    let summary = EnvSummary {
        x,
        y,
        theta,
        duty: active as f64 / steps as f64,
        mean_abs_turn: abs_turn / steps as f64,
    };
    let sensory = SensoryData::new(CHANNELS.len(), samples, streams)?;
    Ok((sensory, summary))
}

/// Runs one deterministic episode.
pub fn rollout(params: &RoverParams, genotype: &[f64]) -> Result<(SensoryData, EnvSummary)> {
    simulate(params, genotype, None)
}

/// Like [`rollout`], additionally returning the per-control-step trajectory.
pub fn rollout_traced(
    params: &RoverParams,
    genotype: &[f64],
) -> Result<(SensoryData, EnvSummary, Vec<TraceStep>)> {
    let mut trace = Vec::with_capacity(params.control_steps());
    let (sensory, summary) = simulate(params, genotype, Some(&mut trace))?;
    Ok((sensory, summary, trace))
}

pub fn hand_coded_bd(task: TaskId, summary: &EnvSummary) -> Vec<f64> {
    match task {
        TaskId::Navigation => vec![summary.x, summary.y],
        TaskId::Forward => vec![summary.duty, summary.mean_abs_turn],
        TaskId::HalfTurn => vec![summary.theta.sin(), summary.theta.cos()],
    }
}

/// Heading at the end of the circular arc that leaves the origin along +x and
/// passes through `(x, y)`.
pub fn arc_target_heading(x: f64, y: f64) -> f64 {
    wrap_angle(2.0 * y.atan2(x))
}

pub fn fitness(task: TaskId, summary: &EnvSummary) -> f64 {
    match task {
        TaskId::Navigation => {
            -wrap_angle(summary.theta - arc_target_heading(summary.x, summary.y)).abs()
        }
        TaskId::Forward => summary.x,
        TaskId::HalfTurn => -wrap_angle(summary.theta - PI).abs(),
    }
}
