//! The hybrid power system block diagram: renewable generation, the
//! electrolyzer/fuel-cell hydrogen path, controllable storage and generation
//! with slew limits, and the grid frequency swing dynamics.
//!
//! All powers are per-unit. Every subsystem is a first-order lag; within one
//! sample period each block sees a constant input (the upstream output
//! produced earlier in the same step), so the lags advance with their exact
//! zero-order-hold solution while the swing state advances with the shared
//! third-order stepper.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::bs3_scalar;

/// First-order lag `K/(1 + sT)` with its dynamic state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstOrderBlock {
    pub gain: f64,
    pub time_constant: f64,
    pub state: f64,
    #[serde(skip)]
    cached: Option<(f64, f64)>,
}

impl FirstOrderBlock {
    pub fn new(gain: f64, time_constant: f64) -> FirstOrderBlock {
        FirstOrderBlock { gain, time_constant, state: 0.0, cached: None }
    }

    /// Advance one sample under a held input:
    /// `y <- y + (1 - exp(-dt/T)) * (K*u - y)`.
    #[inline]
    pub fn step(&mut self, u: f64, dt: f64) -> f64 {
        let alpha = match self.cached {
            Some((cdt, a)) if cdt == dt => a,
            _ => {
                let a = 1.0 - (-dt / self.time_constant).exp();
                self.cached = Some((dt, a));
                a
            }
        };
        self.state += alpha * (self.gain * u - self.state);
        self.state
    }
}

/// Slew-rate limiter; `max_rate` is per-unit per second.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateLimiter {
    pub max_rate: f64,
    pub last_output: f64,
}

impl RateLimiter {
    pub fn new(max_rate: f64) -> RateLimiter {
        RateLimiter { max_rate, last_output: 0.0 }
    }

    #[inline]
    pub fn apply(&mut self, candidate: f64, dt: f64) -> f64 {
        let bound = self.max_rate * dt;
        let delta = (candidate - self.last_output).clamp(-bound, bound);
        self.last_output += delta;
        self.last_output
    }
}

/// Irradiation-to-per-unit conversion for the photovoltaic path.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvConversion {
    /// Cell conversion efficiency.
    pub eta: f64,
    /// Array surface (m^2).
    pub area_m2: f64,
    /// Ambient temperature (deg C).
    pub ambient_temp_c: f64,
    /// Rated capacity used for per-unit normalization (kW).
    pub rated_kw: f64,
}

impl Default for PvConversion {
    fn default() -> Self {
        PvConversion { eta: 0.10, area_m2: 4084.0, ambient_temp_c: 25.0, rated_kw: 200.0 }
    }
}

impl PvConversion {
    /// Electrical power (kW) for irradiation `phi` (kW/m^2).
    pub fn power_kw(&self, phi: f64) -> f64 {
        self.eta * self.area_m2 * phi * (1.0 - 0.005 * (self.ambient_temp_c + 25.0))
    }

    pub fn per_unit(&self, phi: f64) -> f64 {
        self.power_kw(phi) / self.rated_kw
    }
}

/// Sign convention of the power imbalance driving the swing state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwingSign {
    /// `dPe = P_supply - P_load`; net-negative loop gain with the nominal
    /// storage gains and positive controller gains.
    SupplyMinusLoad,
    /// The opposite ordering, kept selectable for sign experiments.
    LoadMinusSupply,
}

/// Gains, time constants and structural constants of the hybrid system.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    pub k_wtg: f64,
    pub t_wtg: f64,
    pub k_pv: f64,
    pub t_pv: f64,
    pub k_ae: f64,
    pub t_ae: f64,
    pub k_fc: f64,
    pub t_fc: f64,
    pub k_deg: f64,
    pub t_deg: f64,
    pub k_fess: f64,
    pub t_fess: f64,
    pub k_bess: f64,
    pub t_bess: f64,
    /// Equivalent inertia constant.
    pub inertia_m: f64,
    /// Equivalent damping constant.
    pub damping_d: f64,
    /// Fraction of renewable generation routed to the grid; the rest feeds
    /// the electrolyzer.
    pub k_split: f64,
    pub n_wtg: usize,
    pub n_fc: usize,
    /// Slew bounds (per-unit/s).
    pub rate_deg: f64,
    pub rate_fess: f64,
    pub rate_bess: f64,
    pub pv: PvConversion,
    pub swing_sign: SwingSign,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            k_wtg: 1.0,
            t_wtg: 1.5,
            k_pv: 1.0,
            t_pv: 1.8,
            k_ae: 0.002,
            t_ae: 0.5,
            k_fc: 0.01,
            t_fc: 4.0,
            k_deg: 0.003,
            t_deg: 2.0,
            k_fess: -0.01,
            t_fess: 0.1,
            k_bess: -0.003,
            t_bess: 0.1,
            inertia_m: 0.4,
            damping_d: 0.03,
            k_split: 0.6,
            n_wtg: 3,
            n_fc: 2,
            rate_deg: 0.01,
            rate_fess: 0.9,
            rate_bess: 0.2,
            pv: PvConversion::default(),
            swing_sign: SwingSign::SupplyMinusLoad,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("plant.t_wtg", self.t_wtg),
            ("plant.t_pv", self.t_pv),
            ("plant.t_ae", self.t_ae),
            ("plant.t_fc", self.t_fc),
            ("plant.t_deg", self.t_deg),
            ("plant.t_fess", self.t_fess),
            ("plant.t_bess", self.t_bess),
            ("plant.inertia_m", self.inertia_m),
            ("plant.damping_d", self.damping_d),
            ("plant.rate_deg", self.rate_deg),
            ("plant.rate_fess", self.rate_fess),
            ("plant.rate_bess", self.rate_bess),
            ("plant.pv.rated_kw", self.pv.rated_kw),
        ];
        for (path, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(path, format!("must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.k_split) {
            return Err(Error::config(
                "plant.k_split",
                format!("must lie in [0, 1], got {}", self.k_split),
            ));
        }
        if self.n_wtg == 0 || self.n_fc == 0 {
            return Err(Error::config("plant.n_wtg", "unit counts must be at least 1"));
        }
        if !(0.0 < self.pv.eta && self.pv.eta < 1.0) {
            return Err(Error::config(
                "plant.pv.eta",
                format!("must lie in (0, 1), got {}", self.pv.eta),
            ));
        }
        Ok(())
    }
}

/// Exogenous and control inputs for one plant step, all held over the step.
#[derive(Debug, Clone, Copy)]
pub struct PlantInputs {
    /// Actuator command after the network delay.
    pub u_delayed: f64,
    /// Wind generation input, already per-unit.
    pub p_wind_pu: f64,
    /// Solar irradiation (kW/m^2); converted internally.
    pub phi: f64,
    /// Load demand, per-unit.
    pub p_load_pu: f64,
}

/// Per-step component powers, after rate limiting where applicable.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ComponentPowers {
    pub wtg: f64,
    pub pv: f64,
    pub ae: f64,
    pub fc: f64,
    pub deg: f64,
    pub fess: f64,
    pub bess: f64,
    /// `k_split * (wtg + pv)`, the renewable share delivered to the grid.
    pub renewable_to_grid: f64,
    /// Total supplied power entering the swing balance.
    pub supply: f64,
}

/// Dynamic state of every block plus the grid frequency deviation.
#[derive(Debug, Clone)]
pub struct PlantState {
    wtg: Vec<FirstOrderBlock>,
    pv: FirstOrderBlock,
    ae: FirstOrderBlock,
    fc: Vec<FirstOrderBlock>,
    deg: FirstOrderBlock,
    fess: FirstOrderBlock,
    bess: FirstOrderBlock,
    lim_deg: RateLimiter,
    lim_fess: RateLimiter,
    lim_bess: RateLimiter,
    pub delta_f: f64,
}

impl PlantState {
    pub fn new(cfg: &PlantConfig) -> PlantState {
        PlantState {
            wtg: (0..cfg.n_wtg)
                .map(|_| FirstOrderBlock::new(cfg.k_wtg, cfg.t_wtg))
                .collect(),
            pv: FirstOrderBlock::new(cfg.k_pv, cfg.t_pv),
            ae: FirstOrderBlock::new(cfg.k_ae, cfg.t_ae),
            fc: (0..cfg.n_fc)
                .map(|_| FirstOrderBlock::new(cfg.k_fc, cfg.t_fc))
                .collect(),
            deg: FirstOrderBlock::new(cfg.k_deg, cfg.t_deg),
            fess: FirstOrderBlock::new(cfg.k_fess, cfg.t_fess),
            bess: FirstOrderBlock::new(cfg.k_bess, cfg.t_bess),
            lim_deg: RateLimiter::new(cfg.rate_deg),
            lim_fess: RateLimiter::new(cfg.rate_fess),
            lim_bess: RateLimiter::new(cfg.rate_bess),
            delta_f: 0.0,
        }
    }

    /// Advance every block one sample and integrate the swing state.
    ///
    /// Order: wind and solar lags, the electrolyzer on the off-grid renewable
    /// share, the fuel cells on the electrolyzer output, then the three
    /// commanded devices each followed by its rate limiter, and finally the
    /// swing balance on the assembled supply.
    pub fn step(&mut self, cfg: &PlantConfig, inputs: &PlantInputs, dt: f64) -> ComponentPowers {
        let mut wtg = 0.0;
        for block in &mut self.wtg {
            wtg += block.step(inputs.p_wind_pu, dt);
        }
        let pv = self.pv.step(cfg.pv.per_unit(inputs.phi), dt);
        let renewable = wtg + pv;

        let ae = self.ae.step((1.0 - cfg.k_split) * renewable, dt);
        let mut fc = 0.0;
        for block in &mut self.fc {
            fc += block.step(ae, dt);
        }

        let deg = self.lim_deg.apply(self.deg.step(inputs.u_delayed, dt), dt);
        let fess = self.lim_fess.apply(self.fess.step(inputs.u_delayed, dt), dt);
        let bess = self.lim_bess.apply(self.bess.step(inputs.u_delayed, dt), dt);

        let renewable_to_grid = cfg.k_split * renewable;
        let supply = renewable_to_grid + fc + deg + fess + bess;
        let dpe = match cfg.swing_sign {
            SwingSign::SupplyMinusLoad => supply - inputs.p_load_pu,
            SwingSign::LoadMinusSupply => inputs.p_load_pu - supply,
        };
        let (m, d) = (cfg.inertia_m, cfg.damping_d);
        self.delta_f = bs3_scalar(|f| (dpe - d * f) / m, self.delta_f, dt);

        ComponentPowers {
            wtg,
            pv,
            ae,
            fc,
            deg,
            fess,
            bess,
            renewable_to_grid,
            supply,
        }
    }

    /// True while the frequency deviation is finite and below the threshold.
    pub fn is_healthy(&self, divergence_threshold: f64) -> bool {
        self.delta_f.is_finite() && self.delta_f.abs() <= divergence_threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const DT: f64 = 0.01;

    #[test]
    fn first_order_block_reaches_63_percent_at_one_time_constant() {
        let mut b = FirstOrderBlock::new(1.0, 1.5);
        let steps = (1.5 / DT).round() as usize;
        let mut y = 0.0;
        for _ in 0..steps {
            y = b.step(1.0, DT);
        }
        assert_abs_diff_eq!(y, 1.0 - (-1.0f64).exp(), epsilon = 1e-3);
    }

    #[test]
    fn first_order_block_settles_to_dc_gain() {
        let mut b = FirstOrderBlock::new(0.01, 4.0);
        let mut y = 0.0;
        for _ in 0..(60.0 / DT) as usize {
            y = b.step(1.0, DT);
        }
        assert_relative_eq!(y, 0.01, max_relative = 1e-6);
        let mut idle = FirstOrderBlock::new(1.0, 1.0);
        assert_eq!(idle.step(0.0, DT), 0.0);
    }

    #[test]
    fn rate_limiter_clamps_slew() {
        let mut lim = RateLimiter::new(0.9);
        assert_eq!(lim.apply(0.0, DT), 0.0);
        assert_abs_diff_eq!(lim.apply(1.0, DT), 0.009, epsilon = 1e-15);
        let mut lim = RateLimiter::new(0.9);
        lim.last_output = 0.5;
        assert_eq!(lim.apply(0.5005, DT), 0.5005);
    }

    #[test]
    fn zero_inputs_keep_the_plant_at_rest() {
        let cfg = PlantConfig::default();
        let mut plant = PlantState::new(&cfg);
        let inputs = PlantInputs { u_delayed: 0.0, p_wind_pu: 0.0, phi: 0.0, p_load_pu: 0.0 };
        for _ in 0..1000 {
            let p = plant.step(&cfg, &inputs, DT);
            assert_eq!(plant.delta_f, 0.0);
            assert_eq!(p.supply, 0.0);
        }
    }

    #[test]
    fn constant_surplus_settles_at_dpe_over_damping() {
        // a negative load is a clean way to impose dPe = +0.1 with the
        // storage loop open and renewables idle
        let cfg = PlantConfig::default();
        let mut plant = PlantState::new(&cfg);
        let inputs = PlantInputs { u_delayed: 0.0, p_wind_pu: 0.0, phi: 0.0, p_load_pu: -0.1 };
        for _ in 0..(200.0 / DT) as usize {
            plant.step(&cfg, &inputs, DT);
        }
        assert_abs_diff_eq!(plant.delta_f, 0.1 / 0.03, epsilon = 1e-3);
    }

    #[test]
    fn swing_follows_analytic_first_order_response() {
        let cfg = PlantConfig::default();
        let mut plant = PlantState::new(&cfg);
        let inputs = PlantInputs { u_delayed: 0.0, p_wind_pu: 0.0, phi: 0.0, p_load_pu: -0.1 };
        let (m, d) = (cfg.inertia_m, cfg.damping_d);
        for k in 0..(100.0 / DT) as usize {
            plant.step(&cfg, &inputs, DT);
            let t = (k + 1) as f64 * DT;
            let expected = (0.1 / d) * (1.0 - (-d * t / m).exp());
            assert_abs_diff_eq!(plant.delta_f, expected, epsilon = 1e-3);
        }
    }

    #[test]
    fn renewable_split_routes_forty_percent_to_the_electrolyzer() {
        let cfg = PlantConfig::default();
        let mut plant = PlantState::new(&cfg);
        // steady renewable sum of 1.0: three unit-gain turbines at 0.2 plus
        // solar at 0.4, i.e. phi such that pv per-unit input is 0.4
        let phi = 0.4 * cfg.pv.rated_kw / (cfg.pv.eta * cfg.pv.area_m2 * 0.75);
        let inputs = PlantInputs { u_delayed: 0.0, p_wind_pu: 0.2, phi, p_load_pu: 0.0 };
        let mut last = ComponentPowers::default();
        for _ in 0..(120.0 / DT) as usize {
            last = plant.step(&cfg, &inputs, DT);
        }
        let renewable = last.wtg + last.pv;
        assert_relative_eq!(renewable, 1.0, max_relative = 1e-6);
        assert_relative_eq!((1.0 - cfg.k_split) * renewable, 0.4, max_relative = 1e-6);
        assert_relative_eq!(last.renewable_to_grid, 0.6, max_relative = 1e-6);
    }

    #[test]
    fn full_split_starves_the_hydrogen_path() {
        let cfg = PlantConfig { k_split: 1.0, ..PlantConfig::default() };
        let mut plant = PlantState::new(&cfg);
        let inputs = PlantInputs { u_delayed: 0.0, p_wind_pu: 0.5, phi: 0.3, p_load_pu: 0.0 };
        for _ in 0..5000 {
            let p = plant.step(&cfg, &inputs, DT);
            assert_eq!(p.ae, 0.0);
            assert_eq!(p.fc, 0.0);
        }
    }

    #[test]
    fn storage_gains_invert_the_control_command() {
        let cfg = PlantConfig::default();
        let mut plant = PlantState::new(&cfg);
        let inputs = PlantInputs { u_delayed: 1.0, p_wind_pu: 0.0, phi: 0.0, p_load_pu: 0.0 };
        let mut last = ComponentPowers::default();
        for _ in 0..2000 {
            last = plant.step(&cfg, &inputs, DT);
        }
        assert!(last.fess < 0.0 && last.bess < 0.0 && last.deg > 0.0);
    }

    #[test]
    fn slew_bounds_hold_at_every_step() {
        let cfg = PlantConfig::default();
        let mut plant = PlantState::new(&cfg);
        let mut prev = ComponentPowers::default();
        for k in 0..20_000 {
            // aggressive square-wave command to exercise the limiters
            let u = if (k / 50) % 2 == 0 { 40.0 } else { -40.0 };
            let inputs = PlantInputs { u_delayed: u, p_wind_pu: 0.0, phi: 0.0, p_load_pu: 0.0 };
            let p = plant.step(&cfg, &inputs, DT);
            assert!((p.fess - prev.fess).abs() <= cfg.rate_fess * DT + 1e-12);
            assert!((p.bess - prev.bess).abs() <= cfg.rate_bess * DT + 1e-12);
            assert!((p.deg - prev.deg).abs() <= cfg.rate_deg * DT + 1e-12);
            prev = p;
        }
    }

    #[test]
    fn response_scales_linearly_with_unbounded_limiters() {
        let cfg = PlantConfig {
            rate_deg: f64::INFINITY,
            rate_fess: f64::INFINITY,
            rate_bess: f64::INFINITY,
            ..PlantConfig::default()
        };
        let mut a = PlantState::new(&cfg);
        let mut b = PlantState::new(&cfg);
        let scale = 3.5;
        for k in 0..3000 {
            let t = k as f64 * DT;
            let (u, w, phi, l) = ((2.0 * t).sin(), 0.3 + 0.1 * t.cos(), 0.2, (0.5 * t).sin());
            let pa = a.step(
                &cfg,
                &PlantInputs { u_delayed: u, p_wind_pu: w, phi, p_load_pu: l },
                DT,
            );
            let pb = b.step(
                &cfg,
                &PlantInputs {
                    u_delayed: scale * u,
                    p_wind_pu: scale * w,
                    phi: scale * phi,
                    p_load_pu: scale * l,
                },
                DT,
            );
            assert_relative_eq!(pb.supply, scale * pa.supply, max_relative = 1e-12);
            assert_relative_eq!(b.delta_f, scale * a.delta_f, max_relative = 1e-12);
        }
    }
}
