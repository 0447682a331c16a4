//! Closed-loop ADRC structures and the fixed-step simulation engine.
//!
//! Every structure uses the proportional outer loop `u0 = K (v_d - z1)` and
//! cancels the estimated disturbance through `u = (u0 - z2 - q_hat) / b`:
//!
//! - IADRC: IESO, `q_hat = 0`;
//! - FADRC: FESO, `q_hat = 0`;
//! - IFADRC: IFESO with its `q_hat` output.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fracops::{Memory, Realization};
use crate::observers::{bandwidth_gains, Eso, ObserverKind};
use crate::plant::{FracPlant, PlantParams, Signal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Iadrc,
    Fadrc,
    Ifadrc,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Iadrc, Variant::Fadrc, Variant::Ifadrc];

    pub fn observer(self) -> ObserverKind {
        match self {
            Variant::Iadrc => ObserverKind::Ieso,
            Variant::Fadrc => ObserverKind::Feso,
            Variant::Ifadrc => ObserverKind::Ifeso,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Iadrc => "iadrc",
            Variant::Fadrc => "fadrc",
            Variant::Ifadrc => "ifadrc",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iadrc" => Ok(Variant::Iadrc),
            "fadrc" => Ok(Variant::Fadrc),
            "ifadrc" => Ok(Variant::Ifadrc),
            other => Err(invalid("variant", format!("expected iadrc, fadrc or ifadrc, got `{other}`"))),
        }
    }
}

/// Controller and simulation settings.
#[derive(Clone, Debug, PartialEq)]
pub struct AdrcConfig {
    pub variant: Variant,
    /// Proportional gain `K`.
    pub gain: f64,
    pub omega_o: f64,
    /// Controller's nominal input gain `b`.
    pub b: f64,
    pub ts: f64,
    pub horizon: f64,
    pub realization: Realization,
    pub memory: Memory,
    /// Any state beyond this magnitude counts as divergence.
    pub divergence_limit: f64,
}

impl AdrcConfig {
    /// `K = 150`, `omega_o = 400`, `b = 1`, 8 kHz, 1 s horizon.
    pub fn reference(variant: Variant) -> Self {
        Self {
            variant,
            gain: 150.0,
            omega_o: 400.0,
            b: 1.0,
            ts: 1.0 / 8000.0,
            horizon: 1.0,
            realization: Realization::GrunwaldLetnikov,
            memory: Memory::Full,
            divergence_limit: 1e12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(invalid("K", format!("proportional gain must be positive, got {}", self.gain)));
        }
        if !(self.omega_o > 0.0 && self.omega_o.is_finite()) {
            return Err(invalid("omega_o", format!("must be positive, got {}", self.omega_o)));
        }
        if self.b == 0.0 || !self.b.is_finite() {
            return Err(invalid("b", "must be finite and nonzero"));
        }
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return Err(invalid("Ts", format!("must be positive, got {}", self.ts)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.horizon / self.ts).round() as usize
    }
}

/// Recorded closed-loop signals, one row per sample.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub ts: f64,
    pub t: Vec<f64>,
    pub v_d: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub u0: Vec<f64>,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub q_hat: Vec<f64>,
    pub d: Vec<f64>,
}

pub const TRAJECTORY_HEADER: &str = "t,v_d,y,u,u0,z1,z2,q_hat,d";

impl Trajectory {
    pub fn with_capacity(ts: f64, n: usize) -> Self {
        let v = || Vec::with_capacity(n);
        Self { ts, t: v(), v_d: v(), y: v(), u: v(), u0: v(), z1: v(), z2: v(), q_hat: v(), d: v() }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push_row(&mut self, t: f64, v_d: f64, y: f64, u: f64, u0: f64, z1: f64, z2: f64, q_hat: f64, d: f64) {
        self.t.push(t);
        self.v_d.push(v_d);
        self.y.push(y);
        self.u.push(u);
        self.u0.push(u0);
        self.z1.push(z1);
        self.z2.push(z2);
        self.q_hat.push(q_hat);
        self.d.push(d);
    }

    fn columns(&self) -> [&Vec<f64>; 9] {
        [&self.t, &self.v_d, &self.y, &self.u, &self.u0, &self.z1, &self.z2, &self.q_hat, &self.d]
    }

    /// CSV with [`TRAJECTORY_HEADER`], shortest round-trip decimal per value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        let cols = self.columns();
        for k in 0..self.len() {
            for (i, col) in cols.iter().enumerate() {
                if i > 0 {
                    w.write_all(b",")?;
                }
                write!(w, "{:?}", col[k])?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, origin: &str) -> Result<Self> {
        let corrupt = |reason: String| Error::Corrupt { path: origin.to_string(), reason };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
        if header != TRAJECTORY_HEADER {
            return Err(corrupt(format!("unexpected header `{header}`")));
        }
        let mut traj = Trajectory::default();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut vals = [0.0; 9];
            for (i, field) in rec.iter().enumerate() {
                vals[i] = field
                    .parse()
                    .map_err(|_| corrupt(format!("row {}: bad number `{field}`", line + 1)))?;
            }
            let [t, v_d, y, u, u0, z1, z2, q_hat, d] = vals;
            traj.push_row(t, v_d, y, u, u0, z1, z2, q_hat, d);
        }
        traj.ts = match traj.t.as_slice() {
            [a, b, ..] => b - a,
            _ => return Err(corrupt("fewer than two rows".into())),
        };
        Ok(traj)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), &path.display().to_string())
    }
}

/// `u = (u0 - z2 - q_hat) / b`.
pub fn control_law(u0: f64, z2: f64, q_hat: f64, b: f64) -> f64 {
    (u0 - z2 - q_hat) / b
}

/// Simulates one closed loop from zero initial conditions.
///
/// Sample `k`: read `y_k`; form `u0_k = K (v_d,k - z1_k)` and `u_k`; advance
/// the observer with `(u_k, y_k)` and the plant with `(u_k, d_k)`.
pub fn run_closed_loop(cfg: &AdrcConfig, plant: &PlantParams, reference: &Signal, disturbance: &Signal) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.samples();
    reference.validate(n)?;
    disturbance.validate(n)?;

    let gains = bandwidth_gains(cfg.omega_o)?;
    let mut eso = Eso::with_realization(cfg.variant.observer(), gains, cfg.b, plant.mu, cfg.ts, cfg.realization, cfg.memory)?;
    let mut sys = FracPlant::with_realization(*plant, cfg.ts, cfg.realization, cfg.memory)?;
    let mut traj = Trajectory::with_capacity(cfg.ts, n);

    for k in 0..n {
        let t = k as f64 * cfg.ts;
        let y = sys.output();
        let v = reference.at(k, cfg.ts);
        let d = disturbance.at(k, cfg.ts);
        let (z1, z2) = (eso.z1(), eso.z2());
        let u0 = cfg.gain * (v - z1);
        let (u, q_hat) = match cfg.variant {
            Variant::Iadrc | Variant::Fadrc => {
                let u = control_law(u0, z2, 0.0, cfg.b);
                eso.step(u, y)?;
                (u, 0.0)
            }
            Variant::Ifadrc => {
                let u = eso.ifeso_closed_step(u0, y)?;
                (u, eso.q_hat())
            }
        };
        traj.push_row(t, v, y, u, u0, z1, z2, q_hat, d);

        let y_next = sys.step(u, d)?;
        let bound = cfg.divergence_limit;
        if !(y_next.abs() <= bound && u.abs() <= bound && eso.z1().abs() <= bound && eso.z2().abs() <= bound) {
            return Err(Error::Diverged { step: k, time: t });
        }
    }
    Ok(traj)
}

/// Reruns the loop with the plant gain scaled, controller `b` unchanged.
pub fn loop_gain_variants(
    cfg: &AdrcConfig,
    plant: &PlantParams,
    reference: &Signal,
    disturbance: &Signal,
    scales: &[f64],
) -> Result<Vec<Trajectory>> {
    if scales.is_empty() {
        return Err(invalid("scales", "at least one scale is required"));
    }
    if let Some(bad) = scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(invalid("scales", format!("scales must be positive, got {bad}")));
    }
    scales
        .par_iter()
        .map(|&s| run_closed_loop(cfg, &plant.with_gain_scale(s)?, reference, disturbance))
        .collect()
}

/// Default loop-gain spread.
pub const DEFAULT_GAIN_SCALES: [f64; 3] = [0.5, 1.0, 2.0];

/// Scalar step-response figures of merit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// Percent above the final reference value.
    pub overshoot_pct: f64,
    /// 2 % settling time, seconds.
    pub settling_time: f64,
    /// 10-90 % rise time, seconds (NaN when the band is never crossed).
    pub rise_time: f64,
    /// `|y_end - v_end| / |v_end|`, or `|y_end|` when the reference ends at zero.
    pub steady_state_error: f64,
    /// RMS of `y' - u0` over the record.
    pub residual_rms: f64,
}

impl Trajectory {
    pub fn step_metrics(&self) -> StepMetrics {
        let n = self.len();
        if n == 0 {
            return StepMetrics::default();
        }
        let target = self.v_d[n - 1];
        let y_end = self.y[n - 1];
        let scale = target.abs();
        let (overshoot_pct, steady_state_error) = if scale > 0.0 {
            let peak = self.y.iter().map(|y| (y - target) * target.signum()).fold(0.0, f64::max);
            (100.0 * peak / scale, (y_end - target).abs() / scale)
        } else {
            (0.0, y_end.abs())
        };

        let band = 0.02 * if scale > 0.0 { scale } else { 1.0 };
        let settling_time = match self.y.iter().rposition(|y| (y - target).abs() > band) {
            Some(i) if i + 1 < n => self.t[i + 1],
            Some(_) => f64::INFINITY,
            None => 0.0,
        };

        let rise_time = if scale > 0.0 {
            let frac = |y: f64| y * target.signum() / scale;
            let lo = self.y.iter().position(|y| frac(*y) >= 0.1);
            let hi = self.y.iter().position(|y| frac(*y) >= 0.9);
            match (lo, hi) {
                (Some(a), Some(b)) => self.t[b] - self.t[a],
                _ => f64::NAN,
            }
        } else {
            0.0
        };

        StepMetrics { overshoot_pct, settling_time, rise_time, steady_state_error, residual_rms: self.compensation_residual_rms(0, n) }
    }

    /// RMS of `y' - u0` over rows `[from, to)`: mismatch against the ideal integrator `y' = u0`.
    pub fn compensation_residual_rms(&self, from: usize, to: usize) -> f64 {
        let to = to.min(self.len());
        if to <= from || self.len() < 2 {
            return 0.0;
        }
        let ydot = crate::plant::derivative(&self.y, self.ts);
        let sq: f64 = (from..to).map(|k| (ydot[k] - self.u0[k]).powi(2)).sum();
        (sq / (to - from) as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_law_arithmetic() {
        assert_eq!(control_law(0.0, 0.0, 0.0, 1.0), 0.0);
        assert_eq!(control_law(5.0, 2.0, 1.0, 2.0), 1.0);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("IFADRC".parse::<Variant>().unwrap(), Variant::Ifadrc);
        assert!("pid".parse::<Variant>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = AdrcConfig::reference(Variant::Ifadrc);
        cfg.validate().unwrap();
        cfg.horizon = 0.0;
        assert!(cfg.validate().is_err());
        cfg = AdrcConfig::reference(Variant::Iadrc);
        cfg.b = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::InvalidParameter { name: "b", .. })));
        cfg = AdrcConfig::reference(Variant::Iadrc);
        cfg.gain = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_reference_gives_zero_trajectory() {
        let mut cfg = AdrcConfig::reference(Variant::Ifadrc);
        cfg.horizon = 0.05;
        for variant in Variant::ALL {
            cfg.variant = variant;
            let traj = run_closed_loop(&cfg, &PlantParams::reference(), &Signal::Zero, &Signal::Zero).unwrap();
            assert_eq!(traj.len(), 400);
            for col in traj.columns().iter().skip(1) {
                assert!(col.iter().all(|v| *v == 0.0));
            }
            assert_eq!(traj.step_metrics(), StepMetrics::default());
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut cfg = AdrcConfig::reference(Variant::Ifadrc);
        cfg.horizon = 0.01;
        let traj = run_closed_loop(&cfg, &PlantParams::reference(), &Signal::unit_step(), &Signal::Zero).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,v_d,y,u,u0,z1,z2,q_hat,d\n"));
        let back = Trajectory::read_csv(buf.as_slice(), "mem").unwrap();
        assert_eq!(back.y, traj.y);
        assert_eq!(back.q_hat, traj.q_hat);
    }

    #[test]
    fn corrupt_csv_rejected() {
        let bad = "t,v_d,y\n0,1,2\n";
        assert!(matches!(Trajectory::read_csv(bad.as_bytes(), "x"), Err(Error::Corrupt { .. })));
        let bad = format!("{TRAJECTORY_HEADER}\n0,1,2,3,4,5,6,7,oops\n");
        assert!(Trajectory::read_csv(bad.as_bytes(), "x").is_err());
    }

    #[test]
    fn loop_gain_scale_validation() {
        let cfg = AdrcConfig::reference(Variant::Ifadrc);
        let p = PlantParams::reference();
        assert!(loop_gain_variants(&cfg, &p, &Signal::unit_step(), &Signal::Zero, &[]).is_err());
        assert!(loop_gain_variants(&cfg, &p, &Signal::unit_step(), &Signal::Zero, &[1.0, -2.0]).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        // A sign-mismatched controller gain destabilizes every structure.
        let mut cfg = AdrcConfig::reference(Variant::Iadrc);
        cfg.b = -1.0;
        let err = run_closed_loop(&cfg, &PlantParams::reference(), &Signal::unit_step(), &Signal::Zero).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }
}
