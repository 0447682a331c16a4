//! Fractional-order plant `G_f(s) = b_o / (s^mu + a_o)` and its time-domain simulation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::fracops::{frac_pow, FracOperator, FractionalOperator, GlOperator, Memory, Realization};

/// Plant coefficients for `y^(mu) + a_o y = b_o u + d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub a_o: f64,
    pub b_o: f64,
    pub mu: f64,
}

impl PlantParams {
    pub fn new(a_o: f64, b_o: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(invalid("mu", format!("plant order must satisfy 0 < mu < 1, got {mu}")));
        }
        Self::checked(a_o, b_o, mu)
    }

    /// The integer-order limit `mu = 1`, used when checking that the
    /// fractional structures reduce to their integer-order counterparts.
    pub fn integer_limit(a_o: f64, b_o: f64) -> Result<Self> {
        Self::checked(a_o, b_o, 1.0)
    }

    fn checked(a_o: f64, b_o: f64, mu: f64) -> Result<Self> {
        if !a_o.is_finite() {
            return Err(invalid("a_o", "must be finite"));
        }
        if b_o == 0.0 || !b_o.is_finite() {
            return Err(invalid("b_o", "plant gain must be finite and nonzero"));
        }
        Ok(Self { a_o, b_o, mu })
    }

    /// `G_f(s) = 1 / (s^0.8 + 10)`.
    pub fn reference() -> Self {
        Self { a_o: 10.0, b_o: 1.0, mu: 0.8 }
    }

    /// Same plant with `b_o` scaled by `factor`.
    pub fn with_gain_scale(&self, factor: f64) -> Result<Self> {
        Self::checked(self.a_o, self.b_o * factor, self.mu)
    }
}

/// `b_o / (s^mu + a_o)` on the principal branch.
pub fn plant_tf(params: &PlantParams, s: Complex64) -> Result<Complex64> {
    let den = frac_pow(s, params.mu)? + params.a_o;
    if den.norm() <= f64::EPSILON * (1.0 + params.a_o.abs()) {
        return Err(Error::Domain { s, reason: "plant pole: s^mu + a_o = 0" });
    }
    Ok(params.b_o / den)
}

/// Time-domain plant with zero initial conditions.
#[derive(Clone, Debug)]
pub struct FracPlant {
    params: PlantParams,
    ts: f64,
    op: FracOperator,
    y: f64,
}

impl FracPlant {
    pub fn new(params: PlantParams, ts: f64) -> Result<Self> {
        Self::with_realization(params, ts, Realization::GrunwaldLetnikov, Memory::Full)
    }

    pub fn with_realization(params: PlantParams, ts: f64, realization: Realization, memory: Memory) -> Result<Self> {
        if !(ts > 0.0) || !ts.is_finite() {
            return Err(invalid("Ts", format!("sample period must be positive, got {ts}")));
        }
        // mu = 1 has no Oustaloup design; GL covers the integer limit.
        let realization = if params.mu >= 1.0 { Realization::GrunwaldLetnikov } else { realization };
        let mut op = FracOperator::new(params.mu, ts, realization, memory)?;
        if op.feedthrough() + params.a_o == 0.0 {
            return Err(Error::Singular("Ts^-mu + a_o = 0 in the plant update"));
        }
        // y(0) = 0 starts the history.
        op.push(0.0);
        Ok(Self { params, ts, op, y: 0.0 })
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    /// Most recent output sample.
    pub fn output(&self) -> f64 {
        self.y
    }

    /// Advances one sample under input `u` and disturbance `d`.
    ///
    /// Solves the discretized `y^(mu) + a_o y = b_o u + d` for the new sample:
    /// `y = (b_o u + d - memory) / (Ts^-mu w_0 + a_o)`.
    pub fn step(&mut self, u: f64, d: f64) -> Result<f64> {
        let rhs = self.params.b_o * u + d;
        self.y = self.op.solve_next(rhs, self.params.a_o)?;
        Ok(self.y)
    }
}

/// External disturbance (or any scalar excitation) as a function of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    Zero,
    Step { amplitude: f64, onset: f64 },
    Sinusoid { amplitude: f64, frequency: f64 },
    Samples { values: Vec<f64> },
}

pub type DisturbanceSignal = Signal;

impl Signal {
    pub fn unit_step() -> Self {
        Signal::Step { amplitude: 1.0, onset: 0.0 }
    }

    /// Value at sample `k` of a grid with period `ts`.
    pub fn at(&self, k: usize, ts: f64) -> f64 {
        let t = k as f64 * ts;
        match self {
            Signal::Zero => 0.0,
            // Half a sample of slack so onsets on the grid are not lost to rounding.
            Signal::Step { amplitude, onset } => {
                if t + 0.5 * ts >= *onset {
                    *amplitude
                } else {
                    0.0
                }
            }
            Signal::Sinusoid { amplitude, frequency } => amplitude * (frequency * t).sin(),
            Signal::Samples { values } => values[k],
        }
    }

    /// Checks a sampled signal covers `n` samples.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Signal::Samples { values } if values.len() < n => Err(invalid(
                "samples",
                format!("signal has {} samples, horizon needs {n}", values.len()),
            )),
            Signal::Step { amplitude, onset } if !amplitude.is_finite() || !onset.is_finite() => {
                Err(invalid("signal", "step parameters must be finite"))
            }
            Signal::Sinusoid { amplitude, frequency } if !amplitude.is_finite() || !frequency.is_finite() => {
                Err(invalid("signal", "sinusoid parameters must be finite"))
            }
            _ => Ok(()),
        }
    }
}

/// Ground-truth lumped disturbances reconstructed from a recorded run.
#[derive(Clone, Debug)]
pub struct Disturbances {
    /// `-a_o y + (b_o - b) u + d`, the IFESO extended state.
    pub f_ifo: Vec<f64>,
    /// `f_ifo + q`, the IESO extended state.
    pub f_io: Vec<f64>,
    /// Same expression as `f_ifo`, estimated by the FESO.
    pub f_fo: Vec<f64>,
    /// `q = y' - y^(mu)`.
    pub q: Vec<f64>,
}

/// Central-difference derivative, one-sided at both ends.
pub fn derivative(x: &[f64], ts: f64) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    out[0] = (x[1] - x[0]) / ts;
    out[n - 1] = (x[n - 1] - x[n - 2]) / ts;
    for k in 1..n - 1 {
        out[k] = (x[k + 1] - x[k - 1]) / (2.0 * ts);
    }
    out
}

/// Rebuilds `f_ifo`, `f_io`, `f_fo` and `q` from `(u, y, d)` for scoring observers.
pub fn reconstruct_disturbances(traj: &Trajectory, plant: &PlantParams, b: f64) -> Result<Disturbances> {
    let n = traj.len();
    if n < 3 {
        return Err(Error::ShortTrajectory(n));
    }
    let ts = traj.ts;
    let ydot = derivative(&traj.y, ts);
    let mut gl = GlOperator::new(plant.mu, ts)?;
    let yfrac: Vec<f64> = traj.y.iter().map(|&y| gl.apply(y)).collect();

    let f_ifo: Vec<f64> = (0..n)
        .map(|k| -plant.a_o * traj.y[k] + (plant.b_o - b) * traj.u[k] + traj.d[k])
        .collect();
    let q: Vec<f64> = ydot.iter().zip(&yfrac).map(|(a, b)| a - b).collect();
    let f_io = f_ifo.iter().zip(&q).map(|(f, q)| f + q).collect();
    Ok(Disturbances { f_fo: f_ifo.clone(), f_ifo, f_io, q })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TS: f64 = 1.0 / 8000.0;

    #[test]
    fn dc_gain() {
        let g = plant_tf(&PlantParams::reference(), Complex64::new(0.0, 0.0)).unwrap();
        assert!((g - Complex64::new(0.1, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn tf_at_unit_frequency() {
        let g = plant_tf(&PlantParams::reference(), Complex64::new(0.0, 1.0)).unwrap();
        let phi = 0.4 * std::f64::consts::PI;
        let expected = 1.0 / Complex64::new(phi.cos() + 10.0, phi.sin());
        assert!((g - expected).norm() < 1e-15);
    }

    #[test]
    fn tf_magnitude_two_ways() {
        let p = PlantParams::reference();
        let g = plant_tf(&p, Complex64::new(0.0, 100.0)).unwrap();
        let phi = 0.4 * std::f64::consts::PI;
        let r = 100f64.powf(0.8);
        let mag = 1.0 / ((r * phi.cos() + 10.0).powi(2) + (r * phi.sin()).powi(2)).sqrt();
        assert!((g.norm() - mag).abs() < 1e-12);
    }

    #[test]
    fn tf_pole_is_reported() {
        // s^0.5 = 1 at s = 1; a_o = -1 puts a pole there.
        let p = PlantParams::new(-1.0, 1.0, 0.5).unwrap();
        assert!(matches!(plant_tf(&p, Complex64::new(1.0, 0.0)), Err(Error::Domain { .. })));
    }

    #[test]
    fn parameter_validation() {
        assert!(PlantParams::new(10.0, 1.0, 1.0).is_err());
        assert!(PlantParams::new(10.0, 1.0, 0.0).is_err());
        assert!(PlantParams::new(10.0, 0.0, 0.5).is_err());
        assert!(PlantParams::integer_limit(10.0, 1.0).is_ok());
    }

    #[test]
    fn zero_input_stays_zero() {
        let mut plant = FracPlant::new(PlantParams::reference(), TS).unwrap();
        for _ in 0..500 {
            assert_eq!(plant.step(0.0, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn step_onset_on_grid() {
        let s = Signal::Step { amplitude: 2.0, onset: 1.0 };
        assert_eq!(s.at(7999, TS), 0.0);
        assert_eq!(s.at(8000, TS), 2.0);
        assert!(Signal::Samples { values: vec![0.0; 3] }.validate(4).is_err());
    }

    #[test]
    fn reconstruction_trivial_cases() {
        let n = 50;
        let ts = 1e-3;
        let mut traj = Trajectory::with_capacity(ts, n);
        for k in 0..n {
            let t = k as f64 * ts;
            traj.push_row(t, 1.0, (3.0 * t).sin(), 0.5, 0.0, 0.0, 0.0, 0.0, 0.0);
        }
        let plant = PlantParams::new(0.0, 2.0, 0.5).unwrap();
        let dist = reconstruct_disturbances(&traj, &plant, 2.0).unwrap();
        assert!(dist.f_ifo.iter().all(|v| *v == 0.0));
        assert!(dist.f_fo.iter().all(|v| *v == 0.0));

        let short = Trajectory::with_capacity(ts, 2);
        assert!(matches!(reconstruct_disturbances(&short, &plant, 2.0), Err(Error::ShortTrajectory(0))));
    }

    #[test]
    fn integer_order_q_vanishes() {
        let n = 2000;
        let ts = 1e-3;
        let mut traj = Trajectory::with_capacity(ts, n);
        for k in 0..n {
            let t = k as f64 * ts;
            // y(0) = 0 keeps the GL start consistent with the record.
            traj.push_row(t, 0.0, (2.0 * t).sin(), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        }
        let plant = PlantParams::integer_limit(1.0, 1.0).unwrap();
        let dist = reconstruct_disturbances(&traj, &plant, 1.0).unwrap();
        // backward vs central difference: O(Ts * y'') = 4e-3
        for q in &dist.q[1..n - 1] {
            assert!(q.abs() < 5e-3, "{q}");
        }
    }
}
