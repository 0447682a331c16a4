//! Observer transfer functions, compensated objects and their mismatch
//! against the ideal integrator `1/s`.
//!
//! All observers use bandwidth gains `β1 = 2ω_o`, `β2 = ω_o²`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fracops::frac_pow;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const C1: Complex64 = Complex64 { re: 1.0, im: 0.0 };

fn check_pole(den: Complex64, s: Complex64, what: &'static str) -> Result<()> {
    if den.norm() <= 1e-300 || !den.is_finite() {
        return Err(Error::Domain { s, reason: what });
    }
    Ok(())
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(name, format!("must be positive, got {v}")));
    }
    Ok(())
}

/// Linear observer response `Z = H_y Y + H_u U`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObserverResponse {
    pub z1_y: Complex64,
    pub z1_u: Complex64,
    pub z2_y: Complex64,
    pub z2_u: Complex64,
    /// `Q/Z1 = s − s^μ`; zero for the integer observer.
    pub q_z1: Complex64,
}

/// Integer-order ESO. `mu` is accepted for symmetry and unused.
pub fn ieso_transfer(omega_o: f64, b: f64, _mu: f64, s: Complex64) -> Result<ObserverResponse> {
    check_positive("omega_o", omega_o)?;
    let (b1, b2) = (2.0 * omega_o, omega_o * omega_o);
    let den = s * s + b1 * s + b2;
    check_pole(den, s, "IESO pole")?;
    Ok(ObserverResponse {
        z1_y: (b1 * s + b2) / den,
        z1_u: b * s / den,
        z2_y: b2 * s / den,
        z2_u: -b2 * b / den,
        q_z1: C0,
    })
}

/// Improved fractional ESO.
pub fn ifeso_transfer(omega_o: f64, b: f64, mu: f64, s: Complex64) -> Result<ObserverResponse> {
    check_positive("omega_o", omega_o)?;
    let (b1, b2) = (2.0 * omega_o, omega_o * omega_o);
    let s_mu = frac_pow(s, mu)?;
    let den = s_mu * s + b1 * s + b2;
    check_pole(den, s, "IFESO pole")?;
    Ok(ObserverResponse {
        z1_y: (b1 * s + b2) / den,
        z1_u: b * s / den,
        z2_y: b2 * s_mu / den,
        z2_u: -b2 * b / den,
        q_z1: s - s_mu,
    })
}

/// Plant `b_o/(s^μ + a_o)` with the observer's nominal gain `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompensatedParams {
    pub a_o: f64,
    pub b_o: f64,
    pub b: f64,
    pub mu: f64,
    pub omega_o: f64,
}

impl CompensatedParams {
    /// `b = b_o = 1`.
    pub fn matched(a_o: f64, mu: f64, omega_o: f64) -> Self {
        Self { a_o, b_o: 1.0, b: 1.0, mu, omega_o }
    }

    fn validate(&self) -> Result<()> {
        check_positive("omega_o", self.omega_o)?;
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(invalid("mu", format!("order must lie in (0, 1], got {}", self.mu)));
        }
        if self.b == 0.0 || self.b_o == 0.0 {
            return Err(invalid("b", "gains must be nonzero"));
        }
        Ok(())
    }
}

/// Compensated object of the IADRC loop, `u0 → y`.
pub fn g_io(p: &CompensatedParams, s: Complex64) -> Result<Complex64> {
    p.validate()?;
    if s == C0 {
        return Err(Error::Domain { s, reason: "integrating pole at s = 0" });
    }
    let w = p.omega_o;
    let s_mu = frac_pow(s, p.mu)?;
    let num = p.b_o * (s + w) * (s + w);
    let den = s * (p.b_o * w * w + p.a_o * p.b * (s + 2.0 * w) + p.b * s_mu * (s + 2.0 * w));
    check_pole(den, s, "G_io pole")?;
    Ok(num / den)
}

/// Compensated object of the IFADRC loop, `u0 → y`.
pub fn g_ifio(p: &CompensatedParams, s: Complex64) -> Result<Complex64> {
    p.validate()?;
    if s == C0 {
        return Err(Error::Domain { s, reason: "integrating pole at s = 0" });
    }
    let w = p.omega_o;
    let s_mu = frac_pow(s, p.mu)?;
    let num = p.b_o * (s_mu * s + 2.0 * w * s + w * w);
    let den = s * (p.b_o * w * (2.0 * s - 2.0 * s_mu + w) + p.a_o * p.b * (s + 2.0 * w) + p.b * s_mu * (s + 2.0 * w));
    check_pole(den, s, "G_ifio pole")?;
    Ok(num / den)
}

/// `1 − jω G(jω)`.
pub fn delta<G>(g: G, omega: f64) -> Result<Complex64>
where
    G: Fn(Complex64) -> Result<Complex64>,
{
    check_positive("omega", omega)?;
    let jw = Complex64::new(0.0, omega);
    Ok(C1 - jw * g(jw)?)
}

fn mse_args(omega: f64, a_o: f64, mu: f64, omega_o: f64) -> Result<()> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(invalid("omega", format!("must be non-negative, got {omega}")));
    }
    if !a_o.is_finite() {
        return Err(invalid("a_o", "must be finite"));
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(invalid("mu", format!("order must lie in (0, 1], got {mu}")));
    }
    check_positive("omega_o", omega_o)
}

/// `|1 − jω G_io(jω)|²` in closed form, `b = b_o`.
pub fn mse_io(omega: f64, a_o: f64, mu: f64, omega_o: f64) -> Result<f64> {
    mse_args(omega, a_o, mu, omega_o)?;
    let (b1, b2) = (2.0 * omega_o, omega_o * omega_o);
    let (sn, c) = (PI * mu / 2.0).sin_cos();
    let wm = omega.powf(mu);
    let n1 = (b1 * b1 + omega * omega) * (a_o * a_o + omega * omega + wm * wm + 2.0 * wm * (a_o * c - omega * sn));
    let re = b1 * (a_o + wm * c) + b2 - omega * wm * sn;
    let im = omega * (a_o + wm * c) + b1 * wm * sn;
    let d1 = re * re + im * im;
    if d1 == 0.0 {
        return Err(Error::Singular("e_io denominator vanishes"));
    }
    Ok(n1 / d1)
}

/// `|1 − jω G_ifio(jω)|²` in closed form, `b = b_o`.
pub fn mse_ifio(omega: f64, a_o: f64, mu: f64, omega_o: f64) -> Result<f64> {
    mse_args(omega, a_o, mu, omega_o)?;
    let (b1, b2) = (2.0 * omega_o, omega_o * omega_o);
    let (sn, c) = (PI * mu / 2.0).sin_cos();
    let wm = omega.powf(mu);
    let n2 = a_o * a_o * (b1 * b1 + omega * omega);
    let re = a_o * b1 + b2 - omega.powf(1.0 + mu) * sn;
    let im = omega * (a_o + b1 + wm * c);
    let d2 = re * re + im * im;
    if d2 == 0.0 {
        return Err(Error::Singular("e_ifio denominator vanishes"));
    }
    Ok(n2 / d2)
}

/// Log-spaced grid over `[lo, hi]` with `per_decade` points per decade.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    check_positive("omega_low", lo)?;
    if !(hi > lo && hi.is_finite()) {
        return Err(invalid("omega_high", format!("must exceed the lower bound {lo}, got {hi}")));
    }
    if per_decade == 0 {
        return Err(invalid("per_decade", "must be at least one"));
    }
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round().max(1.0) as usize;
    let (l0, l1) = (lo.log10(), hi.log10());
    Ok((0..=n).map(|i| 10f64.powf(l0 + (l1 - l0) * i as f64 / n as f64)).collect())
}

pub const DEFAULT_GRID: (f64, f64, usize) = (1e-1, 1e5, 60);

pub fn default_grid() -> Vec<f64> {
    let (lo, hi, n) = DEFAULT_GRID;
    log_grid(lo, hi, n).expect("static grid")
}

/// Both MSE curves on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MseCurves {
    pub omega: Vec<f64>,
    pub e_io: Vec<f64>,
    pub e_ifio: Vec<f64>,
}

pub fn mse_curves(p: &CompensatedParams, omega: &[f64]) -> Result<MseCurves> {
    p.validate()?;
    if p.b != p.b_o {
        return Err(invalid("b", format!("closed-form MSE assumes b = b_o, got b = {} and b_o = {}", p.b, p.b_o)));
    }
    let pairs: Vec<(f64, f64)> = omega
        .par_iter()
        .map(|&w| Ok((mse_io(w, p.a_o, p.mu, p.omega_o)?, mse_ifio(w, p.a_o, p.mu, p.omega_o)?)))
        .collect::<Result<_>>()?;
    let (e_io, e_ifio) = pairs.into_iter().unzip();
    Ok(MseCurves { omega: omega.to_vec(), e_io, e_ifio })
}

impl MseCurves {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "omega_rad_s,e_io,e_ifio")?;
        for i in 0..self.omega.len() {
            writeln!(w, "{:?},{:?},{:?}", self.omega[i], self.e_io[i], self.e_ifio[i])?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Largest `e_io / e_ifio` over points where both are nonzero.
    pub fn max_ratio(&self) -> f64 {
        self.e_io
            .iter()
            .zip(&self.e_ifio)
            .filter(|(a, b)| **a > 0.0 && **b > 0.0)
            .map(|(a, b)| a / b)
            .fold(f64::NAN, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    ComplexResponse,
    Mse,
    MagDb,
    PhaseDeg,
}

/// One real-valued curve. Singular grid points carry NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct FreqCurve {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: CurveKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bode {
    pub mag_db: FreqCurve,
    pub phase_deg: FreqCurve,
}

/// Magnitude (dB) and unwrapped phase (degrees) of `G(jω)`.
pub fn bode<G>(g: G, omega: &[f64]) -> Result<Bode>
where
    G: Fn(Complex64) -> Result<Complex64> + Sync,
{
    if omega.is_empty() {
        return Err(invalid("omega", "grid is empty"));
    }
    if omega.windows(2).any(|w| !(w[1] > w[0])) || omega[0] <= 0.0 {
        return Err(invalid("omega", "grid must be positive and strictly increasing"));
    }
    let resp: Vec<Option<Complex64>> = omega
        .par_iter()
        .map(|&w| match g(Complex64::new(0.0, w)) {
            Ok(v) if v.is_finite() && v.norm() > 0.0 => Ok(Some(v)),
            Ok(_) | Err(Error::Domain { .. }) | Err(Error::Singular(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    let mag: Vec<f64> = resp.iter().map(|v| v.map_or(f64::NAN, |v| 20.0 * v.norm().log10())).collect();
    let mut phase = Vec::with_capacity(resp.len());
    let mut prev: Option<f64> = None;
    for v in &resp {
        match v {
            None => phase.push(f64::NAN),
            Some(v) => {
                let raw = v.arg().to_degrees();
                let un = match prev {
                    Some(p) => raw + 360.0 * ((p - raw) / 360.0).round(),
                    None => raw,
                };
                prev = Some(un);
                phase.push(un);
            }
        }
    }
    Ok(Bode {
        mag_db: FreqCurve { omega: omega.to_vec(), values: mag, kind: CurveKind::MagDb },
        phase_deg: FreqCurve { omega: omega.to_vec(), values: phase, kind: CurveKind::PhaseDeg },
    })
}

impl Bode {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "omega_rad_s,mag_db,phase_deg")?;
        for i in 0..self.mag_db.omega.len() {
            writeln!(w, "{:?},{:?},{:?}", self.mag_db.omega[i], self.mag_db.values[i], self.phase_deg.values[i])?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// `20 log10 |jω G(jω)|`: 0 dB everywhere for a perfect integrator.
pub fn integrator_deviation_db<G>(g: G, omega: f64) -> Result<f64>
where
    G: Fn(Complex64) -> Result<Complex64>,
{
    let jw = Complex64::new(0.0, omega);
    Ok(20.0 * (jw * g(jw)?).norm().log10())
}
