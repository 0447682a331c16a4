//! Fractional-calculus kernel.
//!
//! Two time-domain realizations of `D^mu` are provided: the Grünwald–Letnikov
//! (GL) sum and a band-limited Oustaloup filter discretized with the bilinear
//! transform. Both implement [`FractionalOperator`], which exposes the split
//! `output = feedthrough * x_n + memory_term` needed to solve implicit updates
//! such as `y^(mu) + a y = r` one sample at a time.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Default short-memory length: one second at 8 kHz.
pub const DEFAULT_MEMORY_LEN: usize = 8000;

/// GL binomial weights `w_k = w_{k-1} (1 - (mu + 1) / k)`, `w_0 = 1`.
pub fn gl_coefficients(mu: f64, count: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(count);
    if count == 0 {
        return w;
    }
    w.push(1.0);
    for k in 1..count {
        let prev = w[k - 1];
        w.push(prev * (1.0 - (mu + 1.0) / k as f64));
    }
    w
}

/// Principal-branch complex power `s^mu`.
///
/// On the positive imaginary axis this gives
/// `(j w)^mu = w^mu (cos(mu pi/2) + j sin(mu pi/2))`.
pub fn frac_pow(s: Complex64, mu: f64) -> Result<Complex64> {
    if s == Complex64::new(0.0, 0.0) {
        if mu > 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        return Err(Error::Domain { s, reason: "0^mu is undefined for mu <= 0" });
    }
    if mu == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let r = s.norm().powf(mu);
    let theta = s.arg() * mu;
    Ok(Complex64::from_polar(r, theta))
}

/// A causal, sample-by-sample realization of `D^mu`.
pub trait FractionalOperator {
    /// Weight applied to the sample about to be pushed.
    fn feedthrough(&self) -> f64;

    /// Output contribution of the stored past for the next sample.
    fn memory_term(&self) -> f64;

    /// Commits `x` as the newest sample and returns `D^mu x` at that sample.
    fn push(&mut self, x: f64) -> f64;

    /// Finds the next sample `x` satisfying `D^mu x + diag * x = rhs` and commits it.
    fn solve_next(&mut self, rhs: f64, diag: f64) -> Result<f64> {
        let denom = self.feedthrough() + diag;
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Singular("feedthrough + diagonal term vanishes"));
        }
        let x = (rhs - self.memory_term()) / denom;
        self.push(x);
        Ok(x)
    }
}

/// Grünwald–Letnikov differintegrator of order `mu` at step `Ts`.
#[derive(Clone, Debug)]
pub struct GlOperator {
    order: f64,
    step: f64,
    scale: f64,
    coeffs: Vec<f64>,
    history: Vec<f64>,
    memory_len: Option<usize>,
}

impl GlOperator {
    /// Full-memory operator with empty history.
    pub fn new(order: f64, step: f64) -> Result<Self> {
        if !order.is_finite() {
            return Err(invalid("mu", "order must be finite"));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(invalid("Ts", format!("step must be positive, got {step}")));
        }
        Ok(Self {
            order,
            step,
            scale: step.powf(-order),
            coeffs: vec![1.0],
            history: Vec::new(),
            memory_len: None,
        })
    }

    /// Short-memory operator keeping the newest `memory_len` samples.
    pub fn with_memory(order: f64, step: f64, memory_len: usize) -> Result<Self> {
        if memory_len == 0 {
            return Err(invalid("memory_len", "must be at least 1"));
        }
        let mut op = Self::new(order, step)?;
        op.memory_len = Some(memory_len);
        op.coeffs = gl_coefficients(order, memory_len);
        Ok(op)
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn memory_len(&self) -> Option<usize> {
        self.memory_len
    }

    /// Coefficients computed so far (at least `w_0`).
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Samples inside the memory window, oldest first.
    pub fn history(&self) -> &[f64] {
        match self.memory_len {
            Some(m) if self.history.len() > m => &self.history[self.history.len() - m..],
            _ => &self.history,
        }
    }

    /// `D^mu` of the pushed sample, per the windowed GL sum.
    pub fn apply(&mut self, sample: f64) -> f64 {
        self.push(sample)
    }

    fn ensure_coeffs(&mut self, n: usize) {
        while self.coeffs.len() < n {
            let k = self.coeffs.len();
            let prev = self.coeffs[k - 1];
            self.coeffs.push(prev * (1.0 - (self.order + 1.0) / k as f64));
        }
    }

    fn compact(&mut self) {
        if let Some(m) = self.memory_len {
            if self.history.len() >= 2 * m {
                let cut = self.history.len() - m;
                self.history.drain(..cut);
            }
        }
    }
}

impl FractionalOperator for GlOperator {
    fn feedthrough(&self) -> f64 {
        self.scale
    }

    fn memory_term(&self) -> f64 {
        // Terms j = 1..min(n, M - 1) pair with the newest stored samples.
        let past = self.history();
        let terms = match self.memory_len {
            Some(m) => past.len().min(m - 1),
            None => past.len(),
        };
        if terms == 0 {
            return 0.0;
        }
        let tail = &past[past.len() - terms..];
        let sum: f64 = self.coeffs[1..=terms].iter().zip(tail.iter().rev()).map(|(a, b)| a * b).sum();
        self.scale * sum
    }

    fn push(&mut self, x: f64) -> f64 {
        self.history.push(x);
        self.compact();
        let n = self.history().len();
        // one extra weight so memory_term can cover the next sample
        self.ensure_coeffs(n + 1);
        let window = self.history();
        let sum: f64 = self.coeffs[..n].iter().zip(window.iter().rev()).map(|(a, b)| a * b).sum();
        self.scale * sum
    }
}

/// Continuous Oustaloup approximation of `s^mu` over `[band_low, band_high]`.
///
/// Zeros and poles are stored as their (negative real) s-plane locations.
#[derive(Clone, Debug)]
pub struct OustaloupFilter {
    pub order: f64,
    pub band_low: f64,
    pub band_high: f64,
    pub n_cells: usize,
    pub zeros: Vec<f64>,
    pub poles: Vec<f64>,
    pub gain: f64,
}

/// Recursive pole/zero placement with `2N + 1` first-order cells.
pub fn oustaloup_design(mu: f64, band_low: f64, band_high: f64, n_cells: usize) -> Result<OustaloupFilter> {
    if !(mu.abs() > 0.0 && mu.abs() < 1.0) {
        return Err(invalid("mu", format!("Oustaloup design needs 0 < |mu| < 1, got {mu}")));
    }
    if !(band_low > 0.0 && band_low < band_high && band_high.is_finite()) {
        return Err(invalid("band", format!("need 0 < band_low < band_high, got [{band_low}, {band_high}]")));
    }
    if n_cells == 0 {
        return Err(invalid("n_cells", "must be at least 1"));
    }
    let n = n_cells as f64;
    let ratio = band_high / band_low;
    let cells = 2 * n_cells + 1;
    let mut zeros = Vec::with_capacity(cells);
    let mut poles = Vec::with_capacity(cells);
    for i in 0..cells {
        let k = i as f64 - n;
        let zero = band_low * ratio.powf((k + n + 0.5 * (1.0 - mu)) / (2.0 * n + 1.0));
        let pole = band_low * ratio.powf((k + n + 0.5 * (1.0 + mu)) / (2.0 * n + 1.0));
        zeros.push(-zero);
        poles.push(-pole);
    }
    Ok(OustaloupFilter {
        order: mu,
        band_low,
        band_high,
        n_cells,
        zeros,
        poles,
        gain: band_high.powf(mu),
    })
}

impl OustaloupFilter {
    pub fn response(&self, s: Complex64) -> Complex64 {
        self.zeros
            .iter()
            .zip(&self.poles)
            .fold(Complex64::new(self.gain, 0.0), |acc, (&z, &p)| acc * (s - z) / (s - p))
    }

    /// Bilinear (trapezoidal) discretization at step `ts`.
    pub fn discretize(&self, ts: f64) -> Result<DiscreteOustaloup> {
        if !(ts > 0.0) {
            return Err(invalid("Ts", "step must be positive"));
        }
        let c = 2.0 / ts;
        let sections = self
            .zeros
            .iter()
            .zip(&self.poles)
            .map(|(&z, &p)| {
                // (s - z)/(s - p) with s = c (1 - q^-1)/(1 + q^-1)
                let a0 = c - p;
                FirstOrderSection {
                    b0: (c - z) / a0,
                    b1: (-c - z) / a0,
                    a1: (-c - p) / a0,
                    state: 0.0,
                }
            })
            .collect();
        Ok(DiscreteOustaloup { gain: self.gain, sections, step: ts, order: self.order })
    }
}

#[derive(Clone, Debug)]
struct FirstOrderSection {
    b0: f64,
    b1: f64,
    a1: f64,
    state: f64,
}

impl FirstOrderSection {
    fn output(&self, x: f64) -> f64 {
        self.b0 * x + self.state
    }

    fn commit(&mut self, x: f64) -> f64 {
        let y = self.output(x);
        self.state = self.b1 * x - self.a1 * y;
        y
    }
}

/// Cascade of bilinear first-order sections realizing an Oustaloup filter.
#[derive(Clone, Debug)]
pub struct DiscreteOustaloup {
    gain: f64,
    sections: Vec<FirstOrderSection>,
    step: f64,
    order: f64,
}

impl DiscreteOustaloup {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    /// Frequency response of the discrete cascade at `omega` rad/s.
    pub fn response(&self, omega: f64) -> Complex64 {
        let zinv = Complex64::from_polar(1.0, -omega * self.step);
        self.sections.iter().fold(Complex64::new(self.gain, 0.0), |acc, s| {
            acc * (s.b0 + s.b1 * zinv) / (1.0 + s.a1 * zinv)
        })
    }
}

impl FractionalOperator for DiscreteOustaloup {
    fn feedthrough(&self) -> f64 {
        self.sections.iter().fold(self.gain, |acc, s| acc * s.b0)
    }

    fn memory_term(&self) -> f64 {
        self.sections.iter().fold(0.0, |x, s| s.output(x)) * self.gain
    }

    fn push(&mut self, x: f64) -> f64 {
        let mut v = x;
        for s in &mut self.sections {
            v = s.commit(v);
        }
        v * self.gain
    }
}

/// Which time-domain realization backs a fractional operator.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Realization {
    #[default]
    GrunwaldLetnikov,
    /// Oustaloup filter over `[band_low, band_high]` with `n_cells`.
    Oustaloup { band_low: f64, band_high: f64, n_cells: usize },
}

impl Realization {
    /// Default Oustaloup band `[1e-2, 1e4]` rad/s with 5 cells.
    pub fn oustaloup_default() -> Self {
        Realization::Oustaloup { band_low: 1e-2, band_high: 1e4, n_cells: 5 }
    }
}

/// Memory policy for GL operators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Memory {
    #[default]
    Full,
    Short(usize),
}

/// A fractional operator of either realization.
#[derive(Clone, Debug)]
pub enum FracOperator {
    Gl(GlOperator),
    Oustaloup(DiscreteOustaloup),
}

impl FracOperator {
    pub fn new(order: f64, step: f64, realization: Realization, memory: Memory) -> Result<Self> {
        match realization {
            Realization::GrunwaldLetnikov => {
                let op = match memory {
                    Memory::Full => GlOperator::new(order, step)?,
                    Memory::Short(m) => GlOperator::with_memory(order, step, m)?,
                };
                Ok(FracOperator::Gl(op))
            }
            Realization::Oustaloup { band_low, band_high, n_cells } => {
                let filt = oustaloup_design(order, band_low, band_high, n_cells)?;
                Ok(FracOperator::Oustaloup(filt.discretize(step)?))
            }
        }
    }
}

impl FractionalOperator for FracOperator {
    fn feedthrough(&self) -> f64 {
        match self {
            FracOperator::Gl(op) => op.feedthrough(),
            FracOperator::Oustaloup(op) => op.feedthrough(),
        }
    }

    fn memory_term(&self) -> f64 {
        match self {
            FracOperator::Gl(op) => op.memory_term(),
            FracOperator::Oustaloup(op) => op.memory_term(),
        }
    }

    fn push(&mut self, x: f64) -> f64 {
        match self {
            FracOperator::Gl(op) => op.push(x),
            FracOperator::Oustaloup(op) => op.push(x),
        }
    }
}

/// Exact phase of `(j w)^mu` in degrees.
pub fn ideal_phase_deg(mu: f64) -> f64 {
    (mu * FRAC_PI_2).to_degrees()
}
