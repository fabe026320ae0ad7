//! Band-limited rational realizations of fractional differ-integral
//! operators and the discrete-time FOPID/PID controller assembled from them.
//!
//! A fractional operator `s^gamma` is approximated over a frequency band
//! `(omega_b, omega_h)` by a ladder of `2n+1` real zero/pole cells. The
//! controller realizes `Kp + Ki/s^lambda + Kd*s^mu` with the integral branch
//! split into an exact discrete integrator cascaded with the band-limited
//! realization of `s^(1-lambda)`, which keeps the steady-state frequency
//! error at zero.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Specification of a band-limited rational approximation of `s^gamma`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OraSpec {
    /// Order of differ-integration, in [-1, 1].
    pub gamma: f64,
    /// Lower band edge (rad/s).
    pub omega_b: f64,
    /// Upper band edge (rad/s).
    pub omega_h: f64,
    /// Half order; the realized filter has 2n+1 zero/pole cells.
    pub n: usize,
}

impl OraSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_b > 0.0) {
            return Err(Error::config("ora.omega_b", "band edge must be positive"));
        }
        if !(self.omega_h > self.omega_b) {
            return Err(Error::config(
                "ora.omega_h",
                "upper band edge must exceed lower band edge",
            ));
        }
        if self.n < 1 {
            return Err(Error::config("ora.n", "half order must be at least 1"));
        }
        if !(self.gamma.abs() <= 1.0) {
            return Err(Error::Domain(format!(
                "differ-integration order {} outside [-1, 1]",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// One discrete first-order cell `(s + zero)/(s + pole)` (or `1/(s + pole)`
/// when `zero` is absent) realized by the bilinear map, in transposed
/// direct form II.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Cell {
    b0: f64,
    b1: f64,
    a1: f64,
    state: f64,
}

impl Cell {
    fn new(zero: Option<f64>, pole: f64, dt: f64) -> Result<Cell> {
        let c = 2.0 / dt;
        let den = c + pole;
        if den.abs() < f64::EPSILON * c {
            return Err(Error::Numeric(format!(
                "bilinear map singular: pole {pole} at -2/dt"
            )));
        }
        let (b0, b1) = match zero {
            Some(z) => ((c + z) / den, (z - c) / den),
            None => (1.0 / den, 1.0 / den),
        };
        let a1 = (pole - c) / den;
        debug_assert!(a1.abs() < 1.0, "discrete pole left the unit circle");
        Ok(Cell { b0, b1, a1, state: 0.0 })
    }

    #[inline]
    fn step(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.state;
        self.state = self.b1 * x - self.a1 * y;
        y
    }

    /// Discrete transfer evaluated at z = 1.
    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1) / (1.0 + self.a1)
    }
}

/// Zero/pole/gain realization of a fractional operator, optionally carrying
/// a discrete-time state after [`RationalFilter::discretize`].
///
/// Zeros and poles are stored as positive corner frequencies; the underlying
/// continuous factors are `(s + zero)` and `(s + pole)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RationalFilter {
    pub zeros: Vec<f64>,
    pub poles: Vec<f64>,
    pub gain: f64,
    cells: Vec<Cell>,
    dt: Option<f64>,
}

impl RationalFilter {
    /// A filter that passes its input unchanged.
    pub fn unity() -> RationalFilter {
        RationalFilter {
            zeros: Vec::new(),
            poles: Vec::new(),
            gain: 1.0,
            cells: Vec::new(),
            dt: None,
        }
    }

    pub fn new(zeros: Vec<f64>, poles: Vec<f64>, gain: f64) -> RationalFilter {
        assert!(
            zeros.len() <= poles.len(),
            "filter must be proper: {} zeros > {} poles",
            zeros.len(),
            poles.len()
        );
        RationalFilter {
            zeros,
            poles,
            gain,
            cells: Vec::new(),
            dt: None,
        }
    }

    /// Continuous-time frequency response at `omega` (rad/s).
    pub fn freq_response(&self, omega: f64) -> Complex64 {
        let s = Complex64::new(0.0, omega);
        let mut g = Complex64::new(self.gain, 0.0);
        for &z in &self.zeros {
            g *= s + z;
        }
        for &p in &self.poles {
            g /= s + p;
        }
        g
    }

    /// Continuous DC gain `G(0)`.
    pub fn dc_gain(&self) -> f64 {
        let num: f64 = self.zeros.iter().product();
        let den: f64 = self.poles.iter().product();
        self.gain * num / den
    }

    /// Sampled realization via the bilinear (trapezoidal) map, with zeroed
    /// state. The map preserves stability and the DC gain.
    pub fn discretize(&self, dt: f64) -> Result<RationalFilter> {
        if !(dt > 0.0) {
            return Err(Error::config("dt", "sample period must be positive"));
        }
        let mut cells = Vec::with_capacity(self.poles.len());
        for (i, &p) in self.poles.iter().enumerate() {
            cells.push(Cell::new(self.zeros.get(i).copied(), p, dt)?);
        }
        Ok(RationalFilter {
            zeros: self.zeros.clone(),
            poles: self.poles.clone(),
            gain: self.gain,
            cells,
            dt: Some(dt),
        })
    }

    /// DC gain of the discrete realization (z = 1).
    pub fn discrete_dc_gain(&self) -> f64 {
        self.gain * self.cells.iter().map(Cell::dc_gain).product::<f64>()
    }

    pub fn is_discrete(&self) -> bool {
        self.dt.is_some()
    }

    /// Advance the discrete realization one sample.
    ///
    /// The filter must have been discretized first.
    #[inline]
    pub fn step(&mut self, x: f64) -> f64 {
        debug_assert!(self.dt.is_some(), "step() on a continuous-only filter");
        let mut y = self.gain * x;
        for cell in &mut self.cells {
            y = cell.step(y);
        }
        y
    }

    pub fn reset(&mut self) {
        for cell in &mut self.cells {
            cell.state = 0.0;
        }
    }
}

/// Synthesize the zero/pole ladder approximating `s^gamma` over the band.
///
/// With k running over `-n..=n` and `N = 2n+1`, the corner frequencies are
///
/// ```text
/// zero_k = omega_b * (omega_h/omega_b)^((k + n + 0.5*(1-gamma))/N)
/// pole_k = omega_b * (omega_h/omega_b)^((k + n + 0.5*(1+gamma))/N)
/// gain   = omega_h^gamma
/// ```
pub fn oustaloup_realize(spec: &OraSpec) -> Result<RationalFilter> {
    spec.validate()?;
    let n = spec.n as i64;
    let order = 2 * spec.n + 1;
    let ratio = spec.omega_h / spec.omega_b;
    let mut zeros = Vec::with_capacity(order);
    let mut poles = Vec::with_capacity(order);
    for k in -n..=n {
        let base = (k + n) as f64;
        let ez = (base + 0.5 * (1.0 - spec.gamma)) / order as f64;
        let ep = (base + 0.5 * (1.0 + spec.gamma)) / order as f64;
        zeros.push(spec.omega_b * ratio.powf(ez));
        poles.push(spec.omega_b * ratio.powf(ep));
    }
    Ok(RationalFilter::new(zeros, poles, spec.omega_h.powf(spec.gamma)))
}

/// The five controller tuning knobs. PID mode fixes `lambda = mu = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FoGenome {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl Default for FoGenome {
    fn default() -> Self {
        FoGenome { kp: 0.0, ki: 0.0, kd: 0.0, lambda: 1.0, mu: 1.0 }
    }
}

/// Controller structure searched by the optimizer: three knobs for PID
/// (orders pinned at one) or all five for FOPID.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenomeStructure {
    Pid,
    Fopid,
}

impl GenomeStructure {
    pub fn dim(self) -> usize {
        match self {
            GenomeStructure::Pid => 3,
            GenomeStructure::Fopid => 5,
        }
    }
}

impl FoGenome {
    pub fn new(kp: f64, ki: f64, kd: f64, lambda: f64, mu: f64) -> FoGenome {
        FoGenome { kp, ki, kd, lambda, mu }
    }

    pub fn pid(kp: f64, ki: f64, kd: f64) -> FoGenome {
        FoGenome { kp, ki, kd, lambda: 1.0, mu: 1.0 }
    }

    /// Map an optimizer position vector onto a genome.
    pub fn from_position(structure: GenomeStructure, x: &[f64]) -> FoGenome {
        match structure {
            GenomeStructure::Pid => {
                assert!(x.len() >= 3);
                FoGenome::pid(x[0], x[1], x[2])
            }
            GenomeStructure::Fopid => {
                assert!(x.len() >= 5);
                FoGenome::new(x[0], x[1], x[2], x[3], x[4])
            }
        }
    }

    pub fn as_vec(&self, structure: GenomeStructure) -> Vec<f64> {
        match structure {
            GenomeStructure::Pid => vec![self.kp, self.ki, self.kd],
            GenomeStructure::Fopid => vec![self.kp, self.ki, self.kd, self.lambda, self.mu],
        }
    }

    /// Feasibility per the tuning rules: no negative gain or order, and the
    /// orders must stay inside the realizable range of the operator band.
    pub fn is_feasible(&self, lambda_max: f64, mu_max: f64) -> bool {
        self.kp >= 0.0
            && self.ki >= 0.0
            && self.kd >= 0.0
            && (0.0..=lambda_max).contains(&self.lambda)
            && (0.0..=mu_max).contains(&self.mu)
    }
}

/// Discrete-time FOPID controller.
///
/// Both branch filters share the sample period; an instance is confined to
/// one simulation at a time.
#[derive(Debug, Clone)]
pub struct Controller {
    pub genome: FoGenome,
    /// Band-limited realization of `s^(1 - lambda)`, feeding the integrator.
    integral_shaper: RationalFilter,
    /// Band-limited realization of `s^mu`.
    derivative: RationalFilter,
    integ_acc: f64,
    integ_prev: f64,
    dt: f64,
}

/// Assemble a controller from a feasible genome.
///
/// The integral branch is an exact trapezoidal integrator in series with the
/// band-limited realization of `s^(1-lambda)`; the derivative branch is the
/// realization of `s^mu`. With `lambda = mu = 1` this degenerates to a
/// classical parallel PID with a band-limited derivative.
pub fn build_controller(
    genome: &FoGenome,
    band: (f64, f64),
    n: usize,
    dt: f64,
) -> Result<Controller> {
    if genome.kp < 0.0 || genome.ki < 0.0 || genome.kd < 0.0 {
        return Err(Error::Infeasible(format!(
            "negative gain in ({}, {}, {})",
            genome.kp, genome.ki, genome.kd
        )));
    }
    if genome.lambda < 0.0 || genome.mu < 0.0 {
        return Err(Error::Infeasible(format!(
            "negative order in (lambda={}, mu={})",
            genome.lambda, genome.mu
        )));
    }
    let (omega_b, omega_h) = band;
    let integral_shaper = oustaloup_realize(&OraSpec {
        gamma: 1.0 - genome.lambda,
        omega_b,
        omega_h,
        n,
    })?
    .discretize(dt)?;
    let derivative = oustaloup_realize(&OraSpec {
        gamma: genome.mu,
        omega_b,
        omega_h,
        n,
    })?
    .discretize(dt)?;
    Ok(Controller {
        genome: *genome,
        integral_shaper,
        derivative,
        integ_acc: 0.0,
        integ_prev: 0.0,
        dt,
    })
}

impl Controller {
    /// Advance one sample: `u = kp*e + ki*I[s^(1-lambda) e] + kd*D[s^mu e]`.
    #[inline]
    pub fn step(&mut self, e: f64) -> f64 {
        debug_assert!(e.is_finite());
        let shaped = self.integral_shaper.step(e);
        self.integ_acc += 0.5 * self.dt * (shaped + self.integ_prev);
        self.integ_prev = shaped;
        let derived = self.derivative.step(e);
        self.genome.kp * e + self.genome.ki * self.integ_acc + self.genome.kd * derived
    }

    pub fn reset(&mut self) {
        self.integral_shaper.reset();
        self.derivative.reset();
        self.integ_acc = 0.0;
        self.integ_prev = 0.0;
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}
