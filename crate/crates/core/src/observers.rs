//! Extended state observers: integer-order (IESO), fractional-order (FESO)
//! and improved fractional-order (IFESO).
//!
//! All three share the gain vector `L = (beta1, beta2)` and the correction
//! `y - z1`; they differ in which derivative drives each state:
//!
//! | observer | `z1` equation                         | `z2` equation            |
//! |----------|---------------------------------------|--------------------------|
//! | IESO     | `z1' = z2 + b u + beta1 (y - z1)`     | `z2' = beta2 (y - z1)`   |
//! | FESO     | `z1^(mu) = z2 + b u + beta1 (y - z1)` | `z2^(mu) = beta2 (y - z1)` |
//! | IFESO    | `z1' = z2 + b u + q + beta1 (y - z1)` | `z2' = beta2 (y - z1)`   |
//!
//! The IFESO output `q = z1' - z1^(mu)` appears on both sides of its own `z1`
//! equation; substituting it gives `z1^(mu) = z2 + b u + beta1 (y - z1)`,
//! which is the form advanced here.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fracops::{FracOperator, FractionalOperator, Memory, Realization};

/// Observer gain vector `L = (beta1, beta2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    pub beta1: f64,
    pub beta2: f64,
}

impl ObserverGains {
    pub fn new(beta1: f64, beta2: f64) -> Result<Self> {
        if !(beta1 > 0.0 && beta1.is_finite()) {
            return Err(invalid("beta1", format!("must be positive, got {beta1}")));
        }
        if !(beta2 > 0.0 && beta2.is_finite()) {
            return Err(invalid("beta2", format!("must be positive, got {beta2}")));
        }
        Ok(Self { beta1, beta2 })
    }
}

/// Bandwidth parameterization: both observer poles at `-omega_o`,
/// i.e. `beta1 = 2 omega_o`, `beta2 = omega_o^2`.
pub fn bandwidth_gains(omega_o: f64) -> Result<ObserverGains> {
    if !(omega_o > 0.0 && omega_o.is_finite()) {
        return Err(invalid("omega_o", format!("observer bandwidth must be positive, got {omega_o}")));
    }
    Ok(ObserverGains { beta1: 2.0 * omega_o, beta2: omega_o * omega_o })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ObserverKind {
    Ieso,
    Feso,
    Ifeso,
}

/// Observer state and the fractional operators it owns.
///
/// `z1`, `z2` are the estimates available before the current measurement is
/// absorbed; [`Eso::step`] consumes `(u_k, y_k)` and moves them to `k + 1`.
#[derive(Clone, Debug)]
pub struct Eso {
    kind: ObserverKind,
    gains: ObserverGains,
    b: f64,
    ts: f64,
    z1: f64,
    z2: f64,
    q_hat: f64,
    prev_z1: f64,
    z1_op: Option<FracOperator>,
    z2_op: Option<FracOperator>,
}

impl Eso {
    pub fn new(kind: ObserverKind, gains: ObserverGains, b: f64, mu: f64, ts: f64) -> Result<Self> {
        Self::with_realization(kind, gains, b, mu, ts, Realization::GrunwaldLetnikov, Memory::Full)
    }

    pub fn with_realization(
        kind: ObserverKind,
        gains: ObserverGains,
        b: f64,
        mu: f64,
        ts: f64,
        realization: Realization,
        memory: Memory,
    ) -> Result<Self> {
        if b == 0.0 || !b.is_finite() {
            return Err(invalid("b", "controller gain must be finite and nonzero"));
        }
        if !(ts > 0.0) || !ts.is_finite() {
            return Err(invalid("Ts", "sample period must be positive"));
        }
        if kind != ObserverKind::Ieso && !(mu > 0.0 && mu <= 1.0) {
            return Err(invalid("mu", format!("observer order must lie in (0, 1], got {mu}")));
        }
        let realization = if mu >= 1.0 { Realization::GrunwaldLetnikov } else { realization };
        let make = || -> Result<FracOperator> {
            let mut op = FracOperator::new(mu, ts, realization, memory)?;
            op.push(0.0);
            Ok(op)
        };
        let (z1_op, z2_op) = match kind {
            ObserverKind::Ieso => (None, None),
            ObserverKind::Feso => (Some(make()?), Some(make()?)),
            ObserverKind::Ifeso => (Some(make()?), None),
        };
        Ok(Self { kind, gains, b, ts, z1: 0.0, z2: 0.0, q_hat: 0.0, prev_z1: 0.0, z1_op, z2_op })
    }

    pub fn kind(&self) -> ObserverKind {
        self.kind
    }

    pub fn gains(&self) -> ObserverGains {
        self.gains
    }

    /// Estimate of `x1 = y`.
    pub fn z1(&self) -> f64 {
        self.z1
    }

    /// Estimate of the extended state (the lumped disturbance).
    pub fn z2(&self) -> f64 {
        self.z2
    }

    /// Estimate of `q = y' - y^(mu)`; identically zero for IESO and FESO.
    pub fn q_hat(&self) -> f64 {
        self.q_hat
    }

    pub fn prev_z1(&self) -> f64 {
        self.prev_z1
    }

    pub fn is_finite(&self) -> bool {
        self.z1.is_finite() && self.z2.is_finite() && self.q_hat.is_finite()
    }

    /// Open-loop advance with known input `u` and measurement `y`.
    pub fn step(&mut self, u: f64, y: f64) -> Result<()> {
        match self.kind {
            ObserverKind::Ieso => self.ieso_step(u, y),
            ObserverKind::Feso => self.feso_step(u, y),
            ObserverKind::Ifeso => self.ifeso_step(u, y),
        }
    }

    fn ieso_step(&mut self, u: f64, y: f64) -> Result<()> {
        let ObserverGains { beta1, beta2 } = self.gains;
        let e = y - self.z1;
        self.prev_z1 = self.z1;
        self.z1 += self.ts * (self.z2 + self.b * u + beta1 * e);
        self.z2 += self.ts * beta2 * e;
        Ok(())
    }

    fn feso_step(&mut self, u: f64, y: f64) -> Result<()> {
        let ObserverGains { beta1, beta2 } = self.gains;
        let e = y - self.z1;
        let z1_rhs = self.z2 + self.b * u + beta1 * e;
        let z1_op = self.z1_op.as_mut().expect("FESO owns a z1 operator");
        let z2_op = self.z2_op.as_mut().expect("FESO owns a z2 operator");
        self.prev_z1 = self.z1;
        self.z1 = z1_op.solve_next(z1_rhs, 0.0)?;
        self.z2 = z2_op.solve_next(beta2 * e, 0.0)?;
        Ok(())
    }

    fn ifeso_step(&mut self, u: f64, y: f64) -> Result<()> {
        let ObserverGains { beta1, beta2 } = self.gains;
        let e = y - self.z1;
        let frac_rate = self.z2 + self.b * u + beta1 * e;
        let op = self.z1_op.as_mut().expect("IFESO owns a z1 operator");
        let z1_next = op.solve_next(frac_rate, 0.0)?;
        self.prev_z1 = self.z1;
        self.q_hat = (z1_next - self.z1) / self.ts - frac_rate;
        self.z1 = z1_next;
        self.z2 += self.ts * beta2 * e;
        Ok(())
    }

    /// Closed-loop IFESO advance that also returns the control input.
    ///
    /// The law `u = (u0 - z2 - q)/b` and the IFESO both contain `u` and `q`
    /// in the same sample, so they are solved together: the `u` terms cancel
    /// from the `z1` equation, leaving `z1' = u0 + beta1 (y - z1)`, and `u` is
    /// then the unique value for which `z1^(mu) = z2 + b u + beta1 (y - z1)`
    /// holds at the new sample. The returned `u` satisfies the law exactly
    /// with the `q_hat` stored afterwards, and feeding it to [`Eso::step`]
    /// on a copy of the pre-step state reproduces the same `z1`, `z2`.
    pub fn ifeso_closed_step(&mut self, u0: f64, y: f64) -> Result<f64> {
        if self.kind != ObserverKind::Ifeso {
            return Err(invalid("variant", "closed-loop resolution applies to the IFESO only"));
        }
        let ObserverGains { beta1, beta2 } = self.gains;
        let e = y - self.z1;
        let z1_next = self.z1 + self.ts * (u0 + beta1 * e);
        let op = self.z1_op.as_mut().expect("IFESO owns a z1 operator");
        let frac_rate = op.push(z1_next);
        let u = (frac_rate - self.z2 - beta1 * e) / self.b;
        if !u.is_finite() {
            return Err(Error::Singular("non-finite control from the IFESO"));
        }
        self.q_hat = (z1_next - self.z1) / self.ts - frac_rate;
        self.prev_z1 = self.z1;
        self.z1 = z1_next;
        self.z2 += self.ts * beta2 * e;
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TS: f64 = 1.0 / 8000.0;

    #[test]
    fn bandwidth_examples() {
        assert_eq!(bandwidth_gains(400.0).unwrap(), ObserverGains { beta1: 800.0, beta2: 160000.0 });
        assert_eq!(bandwidth_gains(1600.0).unwrap(), ObserverGains { beta1: 3200.0, beta2: 2.56e6 });
        assert_eq!(bandwidth_gains(1.0).unwrap(), ObserverGains { beta1: 2.0, beta2: 1.0 });
        assert!(bandwidth_gains(0.0).is_err());
        assert!(bandwidth_gains(-3.0).is_err());
        assert!(ObserverGains::new(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_inputs_keep_zero_state() {
        let gains = bandwidth_gains(400.0).unwrap();
        for kind in [ObserverKind::Ieso, ObserverKind::Feso, ObserverKind::Ifeso] {
            let mut eso = Eso::new(kind, gains, 1.0, 0.8, TS).unwrap();
            for _ in 0..1000 {
                eso.step(0.0, 0.0).unwrap();
                assert_eq!((eso.z1(), eso.z2(), eso.q_hat()), (0.0, 0.0, 0.0));
            }
        }
    }

    #[test]
    fn ieso_constant_output_equilibrium() {
        let omega_o = 400.0;
        let mut eso = Eso::new(ObserverKind::Ieso, bandwidth_gains(omega_o).unwrap(), 1.0, 0.8, TS).unwrap();
        let steps = (20.0 / omega_o / TS).ceil() as usize;
        for _ in 0..steps {
            eso.step(0.0, 1.0).unwrap();
        }
        assert!((eso.z1() - 1.0).abs() < 0.01, "{}", eso.z1());
        // z2 decays from its peak of order omega_o
        assert!(eso.z2().abs() < 0.01 * omega_o, "{}", eso.z2());
        for _ in 0..steps {
            eso.step(0.0, 1.0).unwrap();
        }
        assert!(eso.z2().abs() < 0.01);
    }

    #[test]
    fn feso_constant_output_equilibrium() {
        let mut eso = Eso::new(ObserverKind::Feso, bandwidth_gains(400.0).unwrap(), 1.0, 0.8, TS).unwrap();
        for _ in 0..8000 {
            eso.step(0.0, 1.0).unwrap();
        }
        assert!((eso.z1() - 1.0).abs() < 1e-3, "{}", eso.z1());
        assert!(eso.z2().abs() < 1.0, "{}", eso.z2());
        assert_eq!(eso.q_hat(), 0.0);
    }

    #[test]
    fn ifeso_at_integer_order_matches_ieso() {
        let gains = bandwidth_gains(400.0).unwrap();
        let mut a = Eso::new(ObserverKind::Ifeso, gains, 1.0, 1.0, TS).unwrap();
        let mut b = Eso::new(ObserverKind::Ieso, gains, 1.0, 1.0, TS).unwrap();
        let mut sq = 0.0;
        let n = 4000;
        for k in 0..n {
            let t = k as f64 * TS;
            let (u, y) = ((7.0 * t).cos(), (3.0 * t).sin() + 0.2);
            a.step(u, y).unwrap();
            b.step(u, y).unwrap();
            assert!(a.q_hat().abs() < 1e-6);
            sq += (a.z1() - b.z1()).powi(2) + (a.z2() - b.z2()).powi(2);
        }
        assert!((sq / n as f64).sqrt() < 1e-6);
    }

    #[test]
    fn closed_step_is_consistent_with_open_step() {
        let gains = bandwidth_gains(400.0).unwrap();
        let mut closed = Eso::new(ObserverKind::Ifeso, gains, 1.3, 0.8, TS).unwrap();
        for k in 0..300 {
            let y = (k as f64 * 0.01).sin();
            let z2_before = closed.z2();
            let mut open = closed.clone();
            let u0 = 150.0 * (1.0 - closed.z1());
            let u = closed.ifeso_closed_step(u0, y).unwrap();
            let law = (u0 - z2_before - closed.q_hat()) / 1.3;
            assert!((u - law).abs() < 1e-9 * (1.0 + u.abs()), "k={k}");
            open.step(u, y).unwrap();
            assert!((open.z1() - closed.z1()).abs() < 1e-9 * (1.0 + closed.z1().abs()));
            assert_eq!(open.z2(), closed.z2());
        }
    }

    #[test]
    fn closed_step_rejects_other_variants() {
        let gains = bandwidth_gains(400.0).unwrap();
        let mut eso = Eso::new(ObserverKind::Ieso, gains, 1.0, 0.8, TS).unwrap();
        assert!(eso.ifeso_closed_step(1.0, 0.0).is_err());
    }
}
