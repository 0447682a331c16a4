//! IFADRC closed-loop stability in the commensurate `w` plane.
//!
//! With `mu = p/q` and `s = w^q`, the closed loop has the characteristic
//! polynomial
//!
//! ```text
//! b w^(2q+p) + (b_o β1 + a_o b) w^(2q) + (b K + β1 b − β1 b_o) w^(q+p)
//!   + (a_o b β1 + a_o b K + K b_o β1 + b_o β2) w^q + b_o β2 K
//! ```
//!
//! and is BIBO stable when every root satisfies `|arg w| > λ π / 2`, `λ = 1/q`.

use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::control::AdrcConfig;
use crate::error::{invalid, Error, Result};
use crate::observers::bandwidth_gains;
use crate::plant::PlantParams;

pub const DEFAULT_RATIONAL_TOL: f64 = 1e-9;
pub const MAX_DENOMINATOR: u32 = 100;
pub const DEGREE_CAP: usize = 300;
pub const ROOT_RESIDUAL_TOL: f64 = 1e-8;
/// Roots this close to the sector boundary are flagged marginal.
pub const SECTOR_GUARD: f64 = 1e-9;

/// Smallest-denominator fraction `p/q` with `|p/q − mu| <= tol`, `q <= 100`.
pub fn rationalize_order(mu: f64, tol: f64) -> Result<(u32, u32)> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(invalid("mu", format!("order must lie in (0, 1], got {mu}")));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("tolerance must be positive, got {tol}")));
    }
    for q in 1..=MAX_DENOMINATOR {
        let p = (mu * q as f64).round();
        if p >= 1.0 && (p / q as f64 - mu).abs() <= tol {
            // The first hit has minimal q, so p and q are already coprime.
            return Ok((p as u32, q));
        }
    }
    Err(Error::IrrationalOrder { mu, tol, max_den: MAX_DENOMINATOR })
}

/// Sufficient condition for IFESO BIBO stability.
pub fn ifeso_gain_check(beta1: f64, beta2: f64) -> bool {
    beta1 > 0.0 && beta2 > 0.0
}

/// Parameters entering the characteristic polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopParams {
    pub b: f64,
    pub b_o: f64,
    pub a_o: f64,
    #[serde(rename = "K")]
    pub gain: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl LoopParams {
    pub fn from_config(cfg: &AdrcConfig, plant: &PlantParams) -> Result<Self> {
        let g = bandwidth_gains(cfg.omega_o)?;
        Ok(Self { b: cfg.b, b_o: plant.b_o, a_o: plant.a_o, gain: cfg.gain, beta1: g.beta1, beta2: g.beta2 })
    }

    /// K = 150, ω_o = 400, b = b_o = 1, a_o = 10.
    pub fn reference() -> Self {
        Self { b: 1.0, b_o: 1.0, a_o: 10.0, gain: 150.0, beta1: 800.0, beta2: 160_000.0 }
    }
}

/// Real polynomial, coefficient `k` multiplies `w^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    /// Trailing zero high-order coefficients are dropped.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, w: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * w + c)
    }

    fn eval_with_derivative(&self, w: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        self.coeffs.iter().rev().fold((zero, zero), |(p, dp), c| (p * w + c, dp * w + p))
    }

    /// `|P(w)| / Σ |c_k| max(1, |w|)^k`.
    pub fn relative_residual(&self, w: Complex64) -> f64 {
        let r = w.norm().max(1.0);
        let scale: f64 = self.coeffs.iter().enumerate().map(|(k, c)| c.abs() * r.powi(k as i32)).sum();
        if scale == 0.0 {
            0.0
        } else {
            self.eval(w).norm() / scale
        }
    }

    /// All complex roots, with their relative residuals.
    ///
    /// Eigenvalues of the balanced companion matrix, each polished by one
    /// Newton step (kept only if it lowers the residual).
    pub fn roots(&self) -> Result<(Vec<Complex64>, Vec<f64>)> {
        let n = self.degree();
        let lead = self.coeffs[n];
        if n == 0 || lead == 0.0 {
            return Err(invalid("poly", "degree must be at least one"));
        }
        if !self.coeffs.iter().all(|c| c.is_finite()) {
            return Err(invalid("poly", "coefficients must be finite"));
        }
        // Zero roots split off exactly; the companion matrix sees the rest.
        let zeros = self.coeffs.iter().take_while(|c| **c == 0.0).count();
        let m = n - zeros;
        let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
        if m > 0 {
            let mut comp = DMatrix::<f64>::zeros(m, m);
            for j in 0..m {
                comp[(0, j)] = -self.coeffs[zeros + m - 1 - j] / lead;
            }
            for i in 1..m {
                comp[(i, i - 1)] = 1.0;
            }
            balance_parlett_reinsch(&mut comp);
            let schur = Schur::try_new(comp, f64::EPSILON, 10_000 * m).ok_or(Error::RootFinding { best_residual: f64::NAN })?;
            roots.extend(schur.complex_eigenvalues().iter().copied());
        }

        let mut residuals = Vec::with_capacity(n);
        for w in roots.iter_mut() {
            let r0 = self.relative_residual(*w);
            let (p, dp) = self.eval_with_derivative(*w);
            if dp.norm() > 0.0 {
                let cand = *w - p / dp;
                let r1 = self.relative_residual(cand);
                if cand.is_finite() && r1 < r0 {
                    *w = cand;
                    residuals.push(r1);
                    continue;
                }
            }
            residuals.push(r0);
        }
        let worst = residuals.iter().cloned().fold(0.0, f64::max);
        if !(worst < ROOT_RESIDUAL_TOL) {
            return Err(Error::RootFinding { best_residual: worst });
        }
        Ok((roots, residuals))
    }
}

/// Characteristic polynomial of the IFADRC loop for `mu = p / q_den`.
#[derive(Clone, Debug, PartialEq)]
pub struct CharPoly {
    pub poly: Polynomial,
    pub p: u32,
    pub q_den: u32,
    pub lambda: f64,
    pub params: LoopParams,
}

impl CharPoly {
    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.poly.coeffs
    }
}

pub fn build_char_poly(params: &LoopParams, p: u32, q_den: u32) -> Result<CharPoly> {
    let LoopParams { b, b_o, a_o, gain: k, beta1, beta2 } = *params;
    if p == 0 || q_den == 0 {
        return Err(invalid("p/q", "p and q must be positive integers"));
    }
    if p > q_den {
        return Err(invalid("p/q", format!("order {p}/{q_den} exceeds one")));
    }
    for (name, v) in [("b", b), ("b_o", b_o), ("a_o", a_o), ("K", k), ("beta1", beta1), ("beta2", beta2)] {
        if !v.is_finite() {
            return Err(invalid(name, "must be finite"));
        }
    }
    if b == 0.0 {
        return Err(invalid("b", "must be nonzero"));
    }
    let (p, q) = (p as usize, q_den as usize);
    let degree = 2 * q + p;
    if degree > DEGREE_CAP {
        return Err(Error::DegreeCap { degree, cap: DEGREE_CAP });
    }
    // Powers can coincide when q = p (mu = 1), hence +=.
    let mut c = vec![0.0; degree + 1];
    c[2 * q + p] += b;
    c[2 * q] += b_o * beta1 + a_o * b;
    c[q + p] += b * k + beta1 * b - beta1 * b_o;
    c[q] += a_o * b * beta1 + a_o * b * k + k * b_o * beta1 + b_o * beta2;
    c[0] += b_o * beta2 * k;
    Ok(CharPoly {
        poly: Polynomial { coeffs: c },
        p: p as u32,
        q_den: q as u32,
        lambda: 1.0 / q as f64,
        params: *params,
    })
}

/// Builds the polynomial straight from a controller/plant pair.
pub fn char_poly_for(cfg: &AdrcConfig, plant: &PlantParams) -> Result<CharPoly> {
    let (p, q) = rationalize_order(plant.mu, DEFAULT_RATIONAL_TOL)?;
    build_char_poly(&LoopParams::from_config(cfg, plant)?, p, q)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootInfo {
    pub re: f64,
    pub im: f64,
    pub arg: f64,
}

/// Outcome of the sector test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub degree: usize,
    pub lambda: f64,
    pub roots: Vec<RootInfo>,
    /// `min |arg w_i| − λ π / 2`, radians.
    pub margin: f64,
    pub stable: bool,
    /// Some root lies within the guard band of the sector boundary.
    #[serde(default)]
    pub marginal: bool,
    pub residual_max: f64,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl StabilityReport {
    pub fn complex_roots(&self) -> Vec<Complex64> {
        self.roots.iter().map(|r| Complex64::new(r.re, r.im)).collect()
    }

    pub fn args(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.arg).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn sector_test(poly: &CharPoly) -> Result<StabilityReport> {
    let (roots, residuals) = poly.poly.roots()?;
    let half_sector = poly.lambda * PI / 2.0;
    let infos: Vec<RootInfo> = roots.iter().map(|w| RootInfo { re: w.re, im: w.im, arg: w.arg() }).collect();
    let min_arg = infos.iter().map(|r| r.arg.abs()).fold(f64::INFINITY, f64::min);
    let margin = min_arg - half_sector;
    let marginal = margin.abs() <= SECTOR_GUARD;
    Ok(StabilityReport {
        degree: poly.degree(),
        lambda: poly.lambda,
        roots: infos,
        margin,
        stable: margin > SECTOR_GUARD,
        marginal,
        residual_max: residuals.iter().cloned().fold(0.0, f64::max),
        residuals,
    })
}

/// Sector test for a controller/plant pair.
pub fn check_config(cfg: &AdrcConfig, plant: &PlantParams) -> Result<StabilityReport> {
    sector_test(&char_poly_for(cfg, plant)?)
}

/// Smallest `K` in `[k_lo, k_max]` at which the sector test fails.
///
/// Scans a log grid, then bisects the first stable-to-unstable bracket.
/// `None` when every scanned gain is stable.
pub fn critical_gain(params: &LoopParams, p: u32, q_den: u32, k_lo: f64, k_max: f64) -> Result<Option<f64>> {
    if !(k_lo > 0.0 && k_max > k_lo && k_max.is_finite()) {
        return Err(invalid("K", format!("need 0 < k_lo < k_max, got [{k_lo}, {k_max}]")));
    }
    let stable_at = |k: f64| -> Result<bool> {
        let mut lp = *params;
        lp.gain = k;
        Ok(sector_test(&build_char_poly(&lp, p, q_den)?)?.stable)
    };
    if !stable_at(k_lo)? {
        return Ok(Some(k_lo));
    }
    const SCAN: usize = 200;
    let ratio = (k_max / k_lo).powf(1.0 / SCAN as f64);
    let mut lo = k_lo;
    for i in 1..=SCAN {
        let hi = if i == SCAN { k_max } else { k_lo * ratio.powi(i as i32) };
        if !stable_at(hi)? {
            let (mut a, mut b) = (lo, hi);
            while (b - a) > 1e-9 * b {
                let mid = 0.5 * (a + b);
                if stable_at(mid)? {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Ok(Some(b));
        }
        lo = hi;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationalize_examples() {
        assert_eq!(rationalize_order(0.8, 1e-9).unwrap(), (4, 5));
        assert_eq!(rationalize_order(0.5, 1e-9).unwrap(), (1, 2));
        assert_eq!(rationalize_order(0.6, 1e-9).unwrap(), (3, 5));
        assert_eq!(rationalize_order(0.37, 1e-9).unwrap(), (37, 100));
        assert_eq!(rationalize_order(1.0, 1e-9).unwrap(), (1, 1));
        assert!(matches!(rationalize_order(std::f64::consts::FRAC_1_SQRT_2, 1e-9), Err(Error::IrrationalOrder { .. })));
        assert!(rationalize_order(0.0, 1e-9).is_err());
        assert!(rationalize_order(0.5, 0.0).is_err());
    }

    #[test]
    fn gain_check_examples() {
        assert!(ifeso_gain_check(800.0, 160_000.0));
        assert!(!ifeso_gain_check(0.0, 1.0));
        assert!(!ifeso_gain_check(-2.0, 4.0));
        assert!(!ifeso_gain_check(1.0, 0.0));
    }

    #[test]
    fn reference_polynomial_coefficients() {
        let cp = build_char_poly(&LoopParams::reference(), 4, 5).unwrap();
        assert_eq!(cp.degree(), 14);
        let mut expect = vec![0.0; 15];
        expect[14] = 1.0;
        expect[10] = 810.0;
        expect[9] = 150.0;
        expect[5] = 289_500.0;
        expect[0] = 2.4e7;
        assert_eq!(cp.coeffs(), expect.as_slice());
        assert_eq!(cp.lambda, 0.2);
    }

    #[test]
    fn matched_gain_cancels_beta1() {
        let lp = LoopParams { b: 1.0, b_o: 1.0, a_o: 3.0, gain: 77.0, beta1: 1234.0, beta2: 5.0 };
        let cp = build_char_poly(&lp, 3, 5).unwrap();
        assert_eq!(cp.coeffs()[8], 77.0);
        let lp = LoopParams { a_o: 0.0, ..lp };
        let cp = build_char_poly(&lp, 3, 5).unwrap();
        assert_eq!(cp.coeffs()[10], 1234.0);
        assert_eq!(cp.coeffs()[5], 77.0 * 1234.0 + 5.0);
    }

    #[test]
    fn degree_cap_enforced() {
        let err = build_char_poly(&LoopParams::reference(), 99, 151).unwrap_err();
        assert!(matches!(err, Error::DegreeCap { degree: 401, .. }));
    }

    #[test]
    fn simple_roots() {
        let (r, _) = Polynomial::new(vec![-1.0, 0.0, 1.0]).roots().unwrap();
        let mut re: Vec<f64> = r.iter().map(|w| w.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 1.0).abs() < 1e-12 && (re[1] - 1.0).abs() < 1e-12);
        assert!(r.iter().all(|w| w.im.abs() < 1e-12));

        let (r, _) = Polynomial::new(vec![-32.0, 0.0, 0.0, 0.0, 0.0, 1.0]).roots().unwrap();
        assert_eq!(r.len(), 5);
        let mut angles: Vec<f64> = r.iter().map(|w| w.arg().rem_euclid(2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        for (k, (w, a)) in r.iter().zip(&angles).enumerate() {
            assert!((w.norm() - 2.0).abs() < 1e-12);
            assert!((a - 2.0 * PI * k as f64 / 5.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_roots_split_off() {
        let (r, res) = Polynomial::new(vec![0.0, 0.0, 2.0, 1.0]).roots().unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.iter().filter(|w| w.norm() == 0.0).count(), 2);
        assert!(res.iter().all(|x| *x < 1e-14));
    }

    #[test]
    fn reference_is_stable() {
        let rep = sector_test(&build_char_poly(&LoopParams::reference(), 4, 5).unwrap()).unwrap();
        assert!(rep.stable && !rep.marginal);
        assert_eq!(rep.roots.len(), 14);
        assert!(rep.margin > 0.0);
        assert!(rep.residual_max < ROOT_RESIDUAL_TOL);
        assert!(rep.args().iter().all(|a| a.abs() > 0.1 * PI));
    }

    #[test]
    fn positive_real_root_is_unstable() {
        // (w - 1)(w^2 + 1) with λ = 0.2.
        let cp = CharPoly {
            poly: Polynomial::new(vec![-1.0, 1.0, -1.0, 1.0]),
            p: 1,
            q_den: 5,
            lambda: 0.2,
            params: LoopParams::reference(),
        };
        let rep = sector_test(&cp).unwrap();
        assert!(!rep.stable);
        assert!((rep.margin + 0.1 * PI).abs() < 1e-9);
    }

    #[test]
    fn sign_mismatch_is_unstable() {
        let lp = LoopParams { b: -1.0, ..LoopParams::reference() };
        let rep = sector_test(&build_char_poly(&lp, 4, 5).unwrap()).unwrap();
        assert!(!rep.stable);
    }

    #[test]
    fn matched_reference_has_no_critical_gain() {
        let k = critical_gain(&LoopParams::reference(), 4, 5, 1.0, 1e6).unwrap();
        assert_eq!(k, None);
    }

    #[test]
    fn report_json_fields() {
        let rep = sector_test(&build_char_poly(&LoopParams::reference(), 4, 5).unwrap()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        for key in ["degree", "lambda", "roots", "margin", "stable", "residual_max"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["roots"].as_array().unwrap().len(), 14);
        assert!(v["roots"][0].get("arg").is_some());
    }
}
