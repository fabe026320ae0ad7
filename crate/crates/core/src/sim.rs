//! Fixed-step closed-loop integration of the delayed stochastic system and
//! the weighted ISE/ISDCO objective.
//!
//! Per sample: the controller reads the frequency deviation delayed by the
//! sensor-side network, produces a command, and the plant consumes that
//! command delayed by the actuator-side network. Delayed and exogenous
//! signals are held across the step; the plant advances its states as
//! described in [`crate::plant`]. Anything that goes wrong inside an
//! evaluation (infeasible genome, divergence, non-finite state) maps to the
//! penalty objective so optimizers always see a finite value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exo::ExoTrace;
use crate::foctrl::{build_controller, FoGenome};
use crate::plant::{ComponentPowers, PlantConfig, PlantInputs, PlantState};

/// Which signal enters the control-effort term of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveMode {
    /// The controller output itself (default).
    ControlSignal,
    /// Its per-sample first difference.
    ControlIncrement,
}

/// Integration horizon, objective weights and controller realization knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Sample period (s).
    pub dt: f64,
    /// Horizon (s).
    pub t_max: f64,
    /// Relative weight of the squared frequency error.
    pub weight_w: f64,
    /// Normalizer bringing the control-effort term onto the error scale.
    pub k_norm: f64,
    /// Objective assigned to unstable or infeasible evaluations.
    pub j_penalty: f64,
    /// |delta_f| beyond which the run is declared diverged.
    pub divergence_threshold: f64,
    pub objective_mode: ObjectiveMode,
    /// Operator band for the controller realization (rad/s).
    pub ora_omega_b: f64,
    pub ora_omega_h: f64,
    /// Half order of the operator realization.
    pub ora_n: usize,
    /// Upper search/feasibility bounds for the controller orders.
    pub lambda_max: f64,
    pub mu_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            t_max: 300.0,
            weight_w: 0.5,
            k_norm: 1e5,
            j_penalty: 1e4,
            divergence_threshold: 10.0,
            objective_mode: ObjectiveMode::ControlSignal,
            ora_omega_b: 0.01,
            ora_omega_h: 100.0,
            ora_n: 2,
            lambda_max: 2.0,
            mu_max: 1.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::config("sim.dt", "must be positive"));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::config("sim.t_max", "must be positive"));
        }
        let steps = self.t_max / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::config("sim.t_max", "must be a whole multiple of dt"));
        }
        if !(0.0..=1.0).contains(&self.weight_w) {
            return Err(Error::config("sim.weight_w", "must lie in [0, 1]"));
        }
        if !(self.k_norm > 0.0) {
            return Err(Error::config("sim.k_norm", "must be positive"));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(Error::config("sim.divergence_threshold", "must be positive"));
        }
        if !(self.ora_omega_b > 0.0 && self.ora_omega_h > self.ora_omega_b) {
            return Err(Error::config("sim.ora_omega_b", "band edges must satisfy 0 < low < high"));
        }
        if self.ora_n < 1 {
            return Err(Error::config("sim.ora_n", "half order must be at least 1"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }
}

/// Ring buffer of past samples with zero initial history.
#[derive(Debug, Clone)]
pub struct DelayBuffer {
    buf: Vec<f64>,
    cursor: usize,
}

impl DelayBuffer {
    /// `capacity` must exceed the largest delay (in samples) ever read.
    pub fn new(capacity: usize) -> DelayBuffer {
        DelayBuffer { buf: vec![0.0; capacity.max(1)], cursor: 0 }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.buf[self.cursor] = x;
        self.cursor = (self.cursor + 1) % self.buf.len();
    }

    /// Sample written `steps_ago` pushes ago; `read(0)` is the most recent.
    /// Slots never written read as zero.
    #[inline]
    pub fn read(&self, steps_ago: usize) -> f64 {
        debug_assert!(steps_ago < self.buf.len());
        let n = self.buf.len();
        self.buf[(self.cursor + n - 1 - steps_ago) % n]
    }
}

/// Everything one closed-loop run produces.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub j: f64,
    pub ise: f64,
    pub isdco: f64,
    pub stable: bool,
    pub steps_run: usize,
    /// Frequency deviation per sample (length steps + 1).
    pub delta_f: Vec<f64>,
    /// Controller output per sample.
    pub u: Vec<f64>,
    /// Delayed command as seen by the actuators.
    pub u_delayed: Vec<f64>,
    /// Component powers per sample; populated when requested.
    pub powers: Option<Vec<ComponentPowers>>,
}

impl SimResult {
    fn penalty(cfg: &SimConfig) -> SimResult {
        SimResult {
            j: cfg.j_penalty,
            ise: f64::NAN,
            isdco: f64::NAN,
            stable: false,
            steps_run: 0,
            delta_f: Vec::new(),
            u: Vec::new(),
            u_delayed: Vec::new(),
            powers: None,
        }
    }
}

/// Trapezoidal ISE/ISDCO quadrature and the weighted objective
/// `J = w*ise + ((1-w)/k_norm)*isdco`.
pub fn objective(delta_f: &[f64], u: &[f64], cfg: &SimConfig) -> (f64, f64, f64) {
    assert_eq!(delta_f.len(), u.len(), "traces must share a sample grid");
    let ise = trapezoid_of_squares(delta_f, cfg.dt);
    let isdco = match cfg.objective_mode {
        ObjectiveMode::ControlSignal => trapezoid_of_squares(u, cfg.dt),
        ObjectiveMode::ControlIncrement => {
            let mut prev = 0.0;
            let diffs: Vec<f64> = u
                .iter()
                .map(|&x| {
                    let d = x - prev;
                    prev = x;
                    d
                })
                .collect();
            trapezoid_of_squares(&diffs, cfg.dt)
        }
    };
    let j = cfg.weight_w * ise + (1.0 - cfg.weight_w) / cfg.k_norm * isdco;
    (j, ise, isdco)
}

fn trapezoid_of_squares(x: &[f64], dt: f64) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in 0..x.len() - 1 {
        acc += 0.5 * dt * (x[k] * x[k] + x[k + 1] * x[k + 1]);
    }
    acc
}

/// Run the closed loop over the trace and score it.
///
/// `store_powers` controls whether the per-component power series is kept;
/// the frequency and command series are always recorded.
pub fn integrate(
    genome: &FoGenome,
    trace: &ExoTrace,
    plant_cfg: &PlantConfig,
    sim_cfg: &SimConfig,
    store_powers: bool,
) -> SimResult {
    if !genome.is_feasible(sim_cfg.lambda_max, sim_cfg.mu_max) {
        return SimResult::penalty(sim_cfg);
    }
    let mut controller = match build_controller(
        genome,
        (sim_cfg.ora_omega_b, sim_cfg.ora_omega_h),
        sim_cfg.ora_n,
        sim_cfg.dt,
    ) {
        Ok(c) => c,
        Err(_) => return SimResult::penalty(sim_cfg),
    };

    let n_steps = sim_cfg.n_steps();
    assert!(
        trace.len() > n_steps,
        "trace covers {} samples but the horizon needs {}",
        trace.len(),
        n_steps + 1
    );
    let dt = sim_cfg.dt;
    let mut plant = PlantState::new(plant_cfg);
    let capacity = trace.max_delay_steps() + 1;
    let mut f_buf = DelayBuffer::new(capacity);
    let mut u_buf = DelayBuffer::new(capacity);

    let mut delta_f = Vec::with_capacity(n_steps + 1);
    let mut u_trace = Vec::with_capacity(n_steps + 1);
    let mut u_delayed_trace = Vec::with_capacity(n_steps + 1);
    let mut powers = store_powers.then(|| {
        let mut v = Vec::with_capacity(n_steps + 1);
        v.push(ComponentPowers::default());
        v
    });
    delta_f.push(0.0);

    for k in 0..n_steps {
        f_buf.push(plant.delta_f);
        let f_delayed = f_buf.read(trace.tau_sc_steps[k]);
        let u = controller.step(f_delayed);
        u_buf.push(u);
        let u_delayed = u_buf.read(trace.tau_ca_steps[k]);
        u_trace.push(u);
        u_delayed_trace.push(u_delayed);

        let inputs = PlantInputs {
            u_delayed,
            p_wind_pu: trace.p_wind_pu[k],
            phi: trace.phi[k],
            p_load_pu: trace.p_load_pu[k],
        };
        let p = plant.step(plant_cfg, &inputs, dt);
        delta_f.push(plant.delta_f);
        if let Some(powers) = powers.as_mut() {
            powers.push(p);
        }

        if !u.is_finite() || !plant.is_healthy(sim_cfg.divergence_threshold) {
            let mut result = SimResult::penalty(sim_cfg);
            result.steps_run = k + 1;
            return result;
        }
    }

    // closing sample so both series span the full horizon
    f_buf.push(plant.delta_f);
    let f_delayed = f_buf.read(trace.tau_sc_steps[n_steps]);
    let u = controller.step(f_delayed);
    u_buf.push(u);
    u_trace.push(u);
    u_delayed_trace.push(u_buf.read(trace.tau_ca_steps[n_steps]));

    let (j, ise, isdco) = objective(&delta_f, &u_trace, sim_cfg);
    SimResult {
        j,
        ise,
        isdco,
        stable: true,
        steps_run: n_steps,
        delta_f,
        u: u_trace,
        u_delayed: u_delayed_trace,
        powers,
    }
}

/// Objective value of a genome on a frozen trace: a pure, total function.
pub fn fitness(
    genome: &FoGenome,
    trace: &ExoTrace,
    plant_cfg: &PlantConfig,
    sim_cfg: &SimConfig,
) -> f64 {
    integrate(genome, trace, plant_cfg, sim_cfg, false).j
}
