//! Seeded generators for the exogenous stochastic signals: wind speed and
//! turbine power, solar irradiation, load demand, and the two network
//! delays. A whole run's worth of samples is frozen into an [`ExoTrace`]
//! before any controller is evaluated, so every candidate controller sees
//! the identical realization.
//!
//! Each signal draws from its own sub-stream of the master seed; toggling
//! one noise source never shifts the others.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RNG sub-stream identifiers fanned out from one master seed.
pub mod streams {
    pub const WIND: u64 = 1;
    pub const PV: u64 = 2;
    pub const LOAD: u64 = 3;
    pub const DELAY: u64 = 4;
    pub const OPTIMIZER: u64 = 10;
    pub const ROBUST: u64 = 11;
    pub const EVAL: u64 = 12;
}

/// A seeded generator on one named sub-stream of the master seed.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Sum-of-steps profile: `value(t)` adds every amplitude whose onset time
/// has passed (onset inclusive).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepProfile(pub Vec<(f64, f64)>);

impl StepProfile {
    pub fn value(&self, t: f64) -> f64 {
        self.0
            .iter()
            .filter(|(t0, _)| t >= *t0)
            .map(|(_, a)| a)
            .sum()
    }
}

/// Amplitude convention for the harmonic wind-noise synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindNoiseScaling {
    /// Component amplitude `2*sigma^2*sqrt(S_V(w_i))*dw`.
    SigmaSquaredPrefactor,
    /// Component amplitude `sqrt(2*S_V(w_i)*dw)`, the usual harmonic
    /// synthesis normalization; kept selectable for sensitivity studies.
    HarmonicSynthesis,
}

/// Wind model: base step profile, harmonic noise, and the turbine geometry
/// converting speed to mechanical power.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindParams {
    pub base_profile: StepProfile,
    /// Noise variance (sigma^2).
    pub sigma_sq: f64,
    /// Surface drag coefficient.
    pub surface_drag: f64,
    /// Turbulence scale (m).
    pub turbulence_scale: f64,
    /// Mean wind speed at reference height (m/s).
    pub mean_speed: f64,
    /// Number of harmonic components.
    pub n_freq: usize,
    /// Frequency step between components (rad/s).
    pub d_omega: f64,
    pub noise_scaling: WindNoiseScaling,
    /// Blade radius (m).
    pub blade_radius: f64,
    /// Blade rotational speed (rad/s).
    pub blade_omega: f64,
    /// Blade pitch angle (rad).
    pub pitch_beta: f64,
    /// Air density (kg/m^3).
    pub air_density: f64,
    /// Rotor swept area (m^2).
    pub rotor_area: f64,
    /// Rated capacity per turbine for per-unit normalization (kW).
    pub rated_power_kw: f64,
}

impl Default for WindParams {
    fn default() -> Self {
        WindParams {
            base_profile: StepProfile(vec![(0.0, 7.5), (200.0, -3.0), (250.0, 10.5)]),
            sigma_sq: 200.0,
            surface_drag: 0.004,
            turbulence_scale: 2000.0,
            mean_speed: 7.5,
            n_freq: 50,
            d_omega: 0.5,
            noise_scaling: WindNoiseScaling::SigmaSquaredPrefactor,
            blade_radius: 23.5,
            blade_omega: 3.14,
            pitch_beta: 0.1745,
            air_density: 1.25,
            rotor_area: 1735.0,
            rated_power_kw: 350.0,
        }
    }
}

impl WindParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_freq == 0 {
            return Err(Error::config("exo.wind.n_freq", "needs at least one component"));
        }
        for (path, v) in [
            ("exo.wind.d_omega", self.d_omega),
            ("exo.wind.mean_speed", self.mean_speed),
            ("exo.wind.rated_power_kw", self.rated_power_kw),
            ("exo.wind.blade_radius", self.blade_radius),
            ("exo.wind.rotor_area", self.rotor_area),
        ] {
            if !(v > 0.0) {
                return Err(Error::config(path, format!("must be positive, got {v}")));
            }
        }
        if self.sigma_sq < 0.0 {
            return Err(Error::config("exo.wind.sigma_sq", "variance cannot be negative"));
        }
        Ok(())
    }
}

/// Spectral density of the wind noise at `omega`.
pub fn spectral_density(omega: f64, p: &WindParams) -> f64 {
    let f = p.turbulence_scale;
    let ratio = f * omega / (p.mean_speed * std::f64::consts::PI);
    2.0 * p.surface_drag * f * f * omega.abs()
        / (std::f64::consts::PI.powi(2) * (1.0 + ratio * ratio).powf(4.0 / 3.0))
}

fn noise_amplitude(omega: f64, p: &WindParams) -> f64 {
    match p.noise_scaling {
        WindNoiseScaling::SigmaSquaredPrefactor => {
            2.0 * p.sigma_sq * spectral_density(omega, p).sqrt() * p.d_omega
        }
        WindNoiseScaling::HarmonicSynthesis => (2.0 * spectral_density(omega, p) * p.d_omega).sqrt(),
    }
}

/// Wind speed at time `t` given the per-trace component phases; phases are
/// drawn once per trace, uniform on [0, 2*pi).
pub fn wind_speed(t: f64, p: &WindParams, phases: &[f64]) -> f64 {
    debug_assert_eq!(phases.len(), p.n_freq);
    let mut noise = 0.0;
    for (i, &phi) in phases.iter().enumerate() {
        let omega = (i as f64 + 0.5) * p.d_omega;
        noise += noise_amplitude(omega, p) * (omega * t + phi).cos();
    }
    p.base_profile.value(t) + noise
}

/// Aerodynamic power coefficient as a function of tip-speed ratio, clamped
/// below at zero (a turbine delivers no negative mechanical power here).
pub fn power_coefficient(tip_speed_ratio: f64, p: &WindParams) -> f64 {
    let beta = p.pitch_beta;
    let cp = (0.44 - 0.0167 * beta) * (std::f64::consts::PI * (tip_speed_ratio - 3.0)
        / (15.0 - 0.3 * beta))
        .sin()
        - 0.0184 * (tip_speed_ratio - 3.0) * beta;
    cp.max(0.0)
}

/// Mechanical turbine power (W) at wind speed `v`; nonpositive speeds give
/// no generation.
pub fn wind_power(v: f64, p: &WindParams) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let tip_speed_ratio = p.blade_radius * p.blade_omega / v;
    let cp = power_coefficient(tip_speed_ratio, p);
    0.5 * p.air_density * p.rotor_area * cp * v.powi(3)
}

/// PV conversion constants and the irradiation/load step schedules.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvLoadParams {
    /// PV conversion efficiency.
    pub eta: f64,
    /// PV array surface (m^2).
    pub area_m2: f64,
    /// Ambient temperature (deg C).
    pub ambient_temp_c: f64,
    /// Irradiation schedule (kW/m^2).
    pub phi_profile: StepProfile,
    /// Half-width of the uniform irradiation noise.
    pub phi_noise: f64,
    /// Load schedule (per-unit).
    pub load_profile: StepProfile,
    /// Half-width of the uniform load noise.
    pub load_noise: f64,
}

impl Default for PvLoadParams {
    fn default() -> Self {
        PvLoadParams {
            eta: 0.10,
            area_m2: 4084.0,
            ambient_temp_c: 25.0,
            phi_profile: StepProfile(vec![(0.0, 0.5), (25.0, -0.3), (75.0, 0.3), (150.0, -0.3)]),
            phi_noise: 0.1,
            load_profile: StepProfile(vec![
                (0.0, 1.0),
                (50.0, -0.4),
                (100.0, -0.1),
                (175.0, 0.2),
                (225.0, 0.2),
            ]),
            load_noise: 0.05,
        }
    }
}

impl PvLoadParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.eta && self.eta < 1.0) {
            return Err(Error::config("exo.pv_load.eta", "must lie in (0, 1)"));
        }
        if !(self.area_m2 > 0.0) {
            return Err(Error::config("exo.pv_load.area_m2", "must be positive"));
        }
        if self.phi_noise < 0.0 || self.load_noise < 0.0 {
            return Err(Error::config("exo.pv_load.phi_noise", "noise widths cannot be negative"));
        }
        Ok(())
    }

    /// Noisy irradiation sample at `t` (kW/m^2).
    pub fn irradiation(&self, t: f64, rng: &mut impl Rng) -> f64 {
        self.phi_profile.value(t) + sym_noise(rng, self.phi_noise)
    }

    /// PV electrical power (kW) for a given irradiation.
    pub fn pv_power_from_phi(&self, phi: f64) -> f64 {
        self.eta * self.area_m2 * phi * (1.0 - 0.005 * (self.ambient_temp_c + 25.0))
    }

    /// Noisy PV power sample at `t` (kW).
    pub fn pv_power(&self, t: f64, rng: &mut impl Rng) -> f64 {
        self.pv_power_from_phi(self.irradiation(t, rng))
    }

    /// Noisy load demand sample at `t` (per-unit).
    pub fn load_demand(&self, t: f64, rng: &mut impl Rng) -> f64 {
        self.load_profile.value(t) + sym_noise(rng, self.load_noise)
    }
}

fn sym_noise(rng: &mut impl Rng, half_width: f64) -> f64 {
    if half_width == 0.0 {
        0.0
    } else {
        rng.random_range(-half_width..half_width)
    }
}

/// Uniform bounds of the sensor-side and actuator-side network delays (s).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelayParams {
    pub low: f64,
    pub high: f64,
}

impl Default for DelayParams {
    fn default() -> Self {
        DelayParams { low: 0.05, high: 0.15 }
    }
}

impl DelayParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.low >= 0.0 && self.low < self.high) {
            return Err(Error::config(
                "exo.delay",
                format!("need 0 <= low < high, got [{}, {}]", self.low, self.high),
            ));
        }
        Ok(())
    }
}

/// All exogenous model parameters bundled.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExoParams {
    pub wind: WindParams,
    pub pv_load: PvLoadParams,
    pub delay: DelayParams,
}

impl ExoParams {
    pub fn validate(&self) -> Result<()> {
        self.wind.validate()?;
        self.pv_load.validate()?;
        self.delay.validate()
    }
}

/// One frozen realization of every exogenous signal, sampled on the
/// simulation grid. Fully determined by `(seed, params, dt, duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExoTrace {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    /// Wind generation per turbine, per-unit.
    pub p_wind_pu: Vec<f64>,
    /// Solar irradiation (kW/m^2).
    pub phi: Vec<f64>,
    /// Load demand, per-unit.
    pub p_load_pu: Vec<f64>,
    /// Sensor-to-controller delay, in whole samples.
    pub tau_sc_steps: Vec<usize>,
    /// Controller-to-actuator delay, in whole samples.
    pub tau_ca_steps: Vec<usize>,
}

impl ExoTrace {
    /// Number of samples (steps + 1; both endpoints included).
    pub fn len(&self) -> usize {
        self.p_wind_pu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_wind_pu.is_empty()
    }

    pub fn max_delay_steps(&self) -> usize {
        self.tau_sc_steps
            .iter()
            .chain(&self.tau_ca_steps)
            .copied()
            .max()
            .unwrap_or(0)
    }
}

/// Build one reproducible realization covering `duration` at step `dt`.
///
/// Delays are drawn per sample from the uniform bounds and rounded to whole
/// samples; wind phases are drawn once; irradiation and load noise are drawn
/// per sample.
pub fn build_trace(seed: u64, dt: f64, duration: f64, params: &ExoParams) -> Result<ExoTrace> {
    if !(dt > 0.0) {
        return Err(Error::config("sim.dt", "must be positive"));
    }
    if !(duration > 0.0) {
        return Err(Error::config("sim.t_max", "must be positive"));
    }
    params.validate()?;
    let steps = (duration / dt).round() as usize;
    let n = steps + 1;

    let mut wind_rng = stream_rng(seed, streams::WIND);
    let mut pv_rng = stream_rng(seed, streams::PV);
    let mut load_rng = stream_rng(seed, streams::LOAD);
    let mut delay_rng = stream_rng(seed, streams::DELAY);

    let phases: Vec<f64> = (0..params.wind.n_freq)
        .map(|_| wind_rng.random_range(0.0..std::f64::consts::TAU))
        .collect();

    let mut p_wind_pu = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    let mut p_load_pu = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        let v = wind_speed(t, &params.wind, &phases);
        p_wind_pu.push(wind_power(v, &params.wind) / (params.wind.rated_power_kw * 1e3));
        phi.push(params.pv_load.irradiation(t, &mut pv_rng));
        p_load_pu.push(params.pv_load.load_demand(t, &mut load_rng));
    }

    let draw_delay = |rng: &mut ChaCha12Rng| -> usize {
        (rng.random_range(params.delay.low..params.delay.high) / dt).round() as usize
    };
    let tau_sc_steps: Vec<usize> = (0..n).map(|_| draw_delay(&mut delay_rng)).collect();
    let tau_ca_steps: Vec<usize> = (0..n).map(|_| draw_delay(&mut delay_rng)).collect();

    Ok(ExoTrace {
        dt,
        duration,
        seed,
        p_wind_pu,
        phi,
        p_load_pu,
        tau_sc_steps,
        tau_ca_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn quiet_params() -> ExoParams {
        let mut p = ExoParams::default();
        p.wind.sigma_sq = 0.0;
        p.pv_load.phi_noise = 0.0;
        p.pv_load.load_noise = 0.0;
        p
    }

    #[test]
    fn base_wind_profile_reproduces_the_step_schedule() {
        let p = WindParams { sigma_sq: 0.0, ..WindParams::default() };
        let phases = vec![0.0; p.n_freq];
        assert_eq!(wind_speed(100.0, &p, &phases), 7.5);
        assert_eq!(wind_speed(225.0, &p, &phases), 4.5);
        assert_eq!(wind_speed(260.0, &p, &phases), 15.0);
    }

    #[test]
    fn spectral_density_vanishes_at_dc() {
        assert_eq!(spectral_density(0.0, &WindParams::default()), 0.0);
    }

    #[test]
    fn turbine_yields_nothing_at_tip_speed_ratio_three() {
        let p = WindParams::default();
        let v = p.blade_radius * p.blade_omega / 3.0;
        assert_abs_diff_eq!(wind_power(v, &p), 0.0, epsilon = 1e-9);
        // the tabulated speed from the same condition
        assert_eq!(wind_power(24.598, &p), 0.0);
        assert_eq!(wind_power(-1.0, &p), 0.0);
        assert_eq!(wind_power(0.0, &p), 0.0);
    }

    #[test]
    fn turbine_power_at_mean_wind_matches_hand_evaluation() {
        // lambda = 23.5*3.14/7.5 = 9.8387, Cp = 0.4112, P = 1.881e5 W
        let p = WindParams::default();
        let power = wind_power(7.5, &p);
        assert_relative_eq!(power, 1.881e5, max_relative = 0.01);
    }

    #[test]
    fn power_is_cubic_in_speed_at_fixed_coefficient() {
        let p = WindParams::default();
        for v in [4.0, 7.5, 12.0] {
            let lambda = p.blade_radius * p.blade_omega / v;
            let cp = power_coefficient(lambda, &p);
            let expected = 0.5 * p.air_density * p.rotor_area * cp * v.powi(3);
            assert_relative_eq!(wind_power(v, &p), expected, max_relative = 1e-12);
            // doubling v at the same coefficient scales the closed form by 8
            let doubled = 0.5 * p.air_density * p.rotor_area * cp * (2.0 * v).powi(3);
            assert_relative_eq!(doubled, 8.0 * expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn pv_temperature_factor_and_profile_evaluate_directly() {
        let p = PvLoadParams::default();
        assert_eq!(1.0 - 0.005 * (p.ambient_temp_c + 25.0), 0.75);
        assert_abs_diff_eq!(p.pv_power_from_phi(0.2), 61.26, epsilon = 1e-9);
        assert_eq!(p.pv_power_from_phi(0.0), 0.0);
        assert_abs_diff_eq!(p.phi_profile.value(50.0), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn load_profile_reproduces_the_step_schedule() {
        let p = PvLoadParams::default();
        assert_abs_diff_eq!(p.load_profile.value(60.0), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(p.load_profile.value(110.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.load_profile.value(230.0), 0.9, epsilon = 1e-12);
        assert_eq!(p.load_profile.value(0.0), 1.0);
    }

    #[test]
    fn load_noise_stays_within_its_support() {
        let p = PvLoadParams::default();
        let mut rng = stream_rng(9, streams::LOAD);
        for k in 0..5000 {
            let t = k as f64 * 0.01;
            let noisy = p.load_demand(t, &mut rng);
            assert!((noisy - p.load_profile.value(t)).abs() <= 0.05);
        }
    }

    #[test]
    fn traces_are_bit_identical_under_one_seed() {
        let params = ExoParams::default();
        let a = build_trace(1234, 0.01, 30.0, &params).unwrap();
        let b = build_trace(1234, 0.01, 30.0, &params).unwrap();
        assert_eq!(a, b);
        let c = build_trace(1235, 0.01, 30.0, &params).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn delays_round_to_the_expected_sample_range() {
        let params = ExoParams::default();
        let trace = build_trace(7, 0.01, 300.0, &params).unwrap();
        assert_eq!(trace.len(), 30_001);
        for &tau in trace.tau_sc_steps.iter().chain(&trace.tau_ca_steps) {
            assert!((5..=15).contains(&tau), "delay {tau} samples");
        }
        let mean = trace.tau_sc_steps.iter().map(|&s| s as f64 * 0.01).sum::<f64>()
            / trace.tau_sc_steps.len() as f64;
        assert_abs_diff_eq!(mean, 0.100, epsilon = 0.002);
    }

    #[test]
    fn quiet_trace_follows_the_profiles_exactly() {
        let params = quiet_params();
        let trace = build_trace(5, 0.01, 300.0, &params).unwrap();
        for (k, (&phi, &load)) in trace.phi.iter().zip(&trace.p_load_pu).enumerate() {
            let t = k as f64 * 0.01;
            assert_eq!(phi, params.pv_load.phi_profile.value(t));
            assert_eq!(load, params.pv_load.load_profile.value(t));
        }
        // sigma^2 = 0 kills the harmonic noise, so wind power follows the
        // base profile through the cubic map
        let p235 = wind_power(4.5, &params.wind) / (params.wind.rated_power_kw * 1e3);
        assert_eq!(trace.p_wind_pu[22_500], p235);
    }

    #[test]
    fn wind_noise_is_zero_mean_over_the_horizon() {
        let params = ExoParams::default();
        let mut rng = stream_rng(11, streams::WIND);
        let phases: Vec<f64> = (0..params.wind.n_freq)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let n = 30_001;
        let noise: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 * 0.01;
                wind_speed(t, &params.wind, &phases) - params.wind.base_profile.value(t)
            })
            .collect();
        let mean = noise.iter().sum::<f64>() / n as f64;
        let var = noise.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05 * var.sqrt(), "mean {mean}, std {}", var.sqrt());
    }

    #[test]
    fn noise_sub_streams_are_independent() {
        let base = build_trace(3, 0.01, 10.0, &ExoParams::default()).unwrap();
        let mut no_wind = ExoParams::default();
        no_wind.wind.sigma_sq = 0.0;
        let trace = build_trace(3, 0.01, 10.0, &no_wind).unwrap();
        // silencing the wind leaves the other streams untouched
        assert_eq!(base.phi, trace.phi);
        assert_eq!(base.p_load_pu, trace.p_load_pu);
        assert_eq!(base.tau_sc_steps, trace.tau_sc_steps);
    }
}
