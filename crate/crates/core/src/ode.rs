//! Fixed-step Bogacki-Shampine (third order, three stages) integration.
//!
//! The closed-loop simulation advances its continuous states with this
//! scheme; exogenous and delayed inputs are held constant across the stages
//! of a step, so the right-hand sides seen here are autonomous.

/// One BS3 step for a scalar ODE `y' = f(y)`.
pub fn bs3_scalar(f: impl Fn(f64) -> f64, y: f64, dt: f64) -> f64 {
    let k1 = f(y);
    let k2 = f(y + 0.5 * dt * k1);
    let k3 = f(y + 0.75 * dt * k2);
    y + dt * (2.0 * k1 + 3.0 * k2 + 4.0 * k3) / 9.0
}

/// One BS3 step for a system `y' = f(y)`, advancing `y` in place.
pub fn bs3_step(f: impl Fn(&[f64], &mut [f64]), y: &mut [f64], dt: f64) {
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut stage = vec![0.0; n];

    f(y, &mut k1);
    for i in 0..n {
        stage[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(&stage, &mut k2);
    for i in 0..n {
        stage[i] = y[i] + 0.75 * dt * k2[i];
    }
    f(&stage, &mut k3);
    for i in 0..n {
        y[i] += dt * (2.0 * k1[i] + 3.0 * k2[i] + 4.0 * k3[i]) / 9.0;
    }
}
