//! Scripted reproduction runs, one per figure, writing CSV data plus a
//! manifest and a metrics table into `<output_dir>/<id>/`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::control::{loop_gain_variants, run_closed_loop, AdrcConfig, StepMetrics, Trajectory, Variant, DEFAULT_GAIN_SCALES};
use crate::error::{invalid, Error, Result};
use crate::fracops::{Memory, Realization};
use crate::freqdom::{bode, g_ifio, g_io, log_grid, mse_curves, Bode, CompensatedParams, MseCurves, DEFAULT_GRID};
use crate::plant::{PlantParams, Signal};
use crate::stability::{check_config, StabilityReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
    Fig12,
    Fig13,
    Fig14,
    Custom,
}

impl ExperimentId {
    /// Every figure, in order.
    pub const FIGURES: [ExperimentId; 11] = [
        ExperimentId::Fig4,
        ExperimentId::Fig5,
        ExperimentId::Fig6,
        ExperimentId::Fig7,
        ExperimentId::Fig8,
        ExperimentId::Fig9,
        ExperimentId::Fig10,
        ExperimentId::Fig11,
        ExperimentId::Fig12,
        ExperimentId::Fig13,
        ExperimentId::Fig14,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Fig4 => "fig4",
            ExperimentId::Fig5 => "fig5",
            ExperimentId::Fig6 => "fig6",
            ExperimentId::Fig7 => "fig7",
            ExperimentId::Fig8 => "fig8",
            ExperimentId::Fig9 => "fig9",
            ExperimentId::Fig10 => "fig10",
            ExperimentId::Fig11 => "fig11",
            ExperimentId::Fig12 => "fig12",
            ExperimentId::Fig13 => "fig13",
            ExperimentId::Fig14 => "fig14",
            ExperimentId::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        ExperimentId::FIGURES
            .iter()
            .chain(std::iter::once(&ExperimentId::Custom))
            .find(|id| id.as_str() == lower)
            .copied()
            .ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

/// What a `custom` experiment produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CustomKind {
    Simulate,
    Stability,
    Mse,
    Bode,
    Sweep,
}

impl FromStr for CustomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simulate" => Ok(CustomKind::Simulate),
            "stability" => Ok(CustomKind::Stability),
            "mse" => Ok(CustomKind::Mse),
            "bode" => Ok(CustomKind::Bode),
            "sweep" => Ok(CustomKind::Sweep),
            other => Err(invalid("kind", format!("expected simulate, stability, mse, bode or sweep, got `{other}`"))),
        }
    }
}

/// Every tunable parameter, keyed by the names accepted in overrides and
/// config files.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    pub a_o: f64,
    pub b_o: f64,
    pub b: f64,
    pub mu: f64,
    pub gain: f64,
    pub omega_o: f64,
    pub ts: f64,
    pub horizon: f64,
    pub variant: Variant,
    pub scales: Vec<f64>,
    /// Reference step amplitude.
    pub step: f64,
    /// Disturbance step amplitude and onset.
    pub d_step: f64,
    pub d_onset: f64,
    pub realization: Realization,
    /// 0 keeps the full history.
    pub memory_len: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub points_per_decade: usize,
    pub kind: Option<CustomKind>,
    /// Swept key for `kind = sweep`; `scale` sweeps the plant gain.
    pub sweep_param: String,
    pub sweep_values: Vec<f64>,
}

/// `(key, description)` for every accepted parameter key.
pub const PARAM_KEYS: [(&str, &str); 21] = [
    ("a_o", "plant coefficient a_o (default 10)"),
    ("b_o", "true plant input gain b_o (default 1)"),
    ("b", "controller's nominal input gain b (default 1)"),
    ("mu", "plant order, 0 < mu <= 1 (default 0.8)"),
    ("K", "proportional gain (default 150)"),
    ("omega_o", "observer bandwidth in rad/s; beta1 = 2 omega_o, beta2 = omega_o^2 (default 400)"),
    ("Ts", "sample period in s (default 1/8000)"),
    ("horizon", "simulated time in s (default 1)"),
    ("variant", "iadrc | fadrc | ifadrc (default ifadrc)"),
    ("scales", "comma-separated plant gain factors for loop-gain sweeps (default 0.5,1,2)"),
    ("step", "reference step amplitude (default 1)"),
    ("d_step", "disturbance step amplitude (default 0)"),
    ("d_onset", "disturbance step onset in s (default 0.5)"),
    ("realization", "gl | oustaloup time-domain fractional operator (default gl)"),
    ("memory_len", "GL history length in samples, 0 for full memory (default 0)"),
    ("omega_min", "lowest grid frequency in rad/s (default 0.1)"),
    ("omega_max", "highest grid frequency in rad/s (default 1e5)"),
    ("points_per_decade", "grid density (default 60)"),
    ("kind", "custom experiment output: simulate | stability | mse | bode | sweep"),
    ("sweep_param", "key varied by a sweep: scale, or any numeric key such as K or omega_o (default scale)"),
    ("sweep_values", "comma-separated values for sweep_param (default: the scales list)"),
];

impl Default for ParamSet {
    fn default() -> Self {
        let (omega_min, omega_max, points_per_decade) = DEFAULT_GRID;
        Self {
            a_o: 10.0,
            b_o: 1.0,
            b: 1.0,
            mu: 0.8,
            gain: 150.0,
            omega_o: 400.0,
            ts: 1.0 / 8000.0,
            horizon: 1.0,
            variant: Variant::Ifadrc,
            scales: DEFAULT_GAIN_SCALES.to_vec(),
            step: 1.0,
            d_step: 0.0,
            d_onset: 0.5,
            realization: Realization::GrunwaldLetnikov,
            memory_len: 0,
            omega_min,
            omega_max,
            points_per_decade,
            kind: None,
            sweep_param: "scale".into(),
            sweep_values: Vec::new(),
        }
    }
}

fn parse_num<T: FromStr>(key: &'static str, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| invalid(key, format!("cannot parse `{raw}` for key `{key}`")))
}

fn parse_list(key: &'static str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(key, s)).collect()
}

impl ParamSet {
    /// Defaults for a given figure: frequency-domain figures use
    /// `a_o = 10`, `omega_o = 1600`; fig8 uses `mu = 0.6`, fig9 `mu = 0.9`.
    pub fn for_experiment(id: ExperimentId) -> Self {
        let base = Self::default();
        match id {
            ExperimentId::Fig4 | ExperimentId::Fig5 | ExperimentId::Fig6 | ExperimentId::Fig7 | ExperimentId::Fig8 => {
                Self { omega_o: 1600.0, mu: 0.6, ..base }
            }
            ExperimentId::Fig9 => Self { omega_o: 1600.0, mu: 0.9, ..base },
            _ => base,
        }
    }

    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let key = key.trim();
        match key {
            "a_o" => self.a_o = parse_num("a_o", raw)?,
            "b_o" => self.b_o = parse_num("b_o", raw)?,
            "b" => self.b = parse_num("b", raw)?,
            "mu" => self.mu = parse_num("mu", raw)?,
            "K" => self.gain = parse_num("K", raw)?,
            "omega_o" => self.omega_o = parse_num("omega_o", raw)?,
            "Ts" => self.ts = parse_num("Ts", raw)?,
            "horizon" => self.horizon = parse_num("horizon", raw)?,
            "variant" => self.variant = raw.trim().parse()?,
            "scales" => self.scales = parse_list("scales", raw)?,
            "step" => self.step = parse_num("step", raw)?,
            "d_step" => self.d_step = parse_num("d_step", raw)?,
            "d_onset" => self.d_onset = parse_num("d_onset", raw)?,
            "realization" => {
                self.realization = match raw.trim().to_ascii_lowercase().as_str() {
                    "gl" => Realization::GrunwaldLetnikov,
                    "oustaloup" => Realization::oustaloup_default(),
                    other => return Err(invalid("realization", format!("expected gl or oustaloup, got `{other}`"))),
                }
            }
            "memory_len" => self.memory_len = parse_num("memory_len", raw)?,
            "omega_min" => self.omega_min = parse_num("omega_min", raw)?,
            "omega_max" => self.omega_max = parse_num("omega_max", raw)?,
            "points_per_decade" => self.points_per_decade = parse_num("points_per_decade", raw)?,
            "kind" => self.kind = Some(raw.parse()?),
            "sweep_param" => self.sweep_param = raw.trim().to_string(),
            "sweep_values" => self.sweep_values = parse_list("sweep_values", raw)?,
            other => return Err(invalid("key", format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply(&mut self, overrides: &BTreeMap<String, String>) -> Result<()> {
        overrides.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    pub fn plant(&self) -> Result<PlantParams> {
        if self.mu == 1.0 {
            PlantParams::integer_limit(self.a_o, self.b_o)
        } else {
            PlantParams::new(self.a_o, self.b_o, self.mu)
        }
    }

    pub fn config(&self, variant: Variant) -> AdrcConfig {
        AdrcConfig {
            variant,
            gain: self.gain,
            omega_o: self.omega_o,
            b: self.b,
            ts: self.ts,
            horizon: self.horizon,
            realization: self.realization,
            memory: if self.memory_len == 0 { Memory::Full } else { Memory::Short(self.memory_len) },
            ..AdrcConfig::reference(variant)
        }
    }

    pub fn reference_signal(&self) -> Signal {
        Signal::Step { amplitude: self.step, onset: 0.0 }
    }

    pub fn disturbance(&self) -> Signal {
        if self.d_step == 0.0 {
            Signal::Zero
        } else {
            Signal::Step { amplitude: self.d_step, onset: self.d_onset }
        }
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        log_grid(self.omega_min, self.omega_max, self.points_per_decade)
    }

    pub fn compensated(&self) -> CompensatedParams {
        CompensatedParams { a_o: self.a_o, b_o: self.b_o, b: self.b, mu: self.mu, omega_o: self.omega_o }
    }

    fn controller_json(&self, variant: Variant) -> Value {
        json!({
            "variant": variant,
            "a_o": self.a_o, "b_o": self.b_o, "b": self.b, "mu": self.mu,
            "K": self.gain, "omega_o": self.omega_o, "Ts": self.ts, "horizon": self.horizon,
            "step": self.step, "d_step": self.d_step, "d_onset": self.d_onset,
            "realization": realization_name(&self.realization), "memory_len": self.memory_len,
        })
    }

    fn freq_json(&self, c: &CompensatedParams) -> Value {
        json!({
            "a_o": c.a_o, "b_o": c.b_o, "b": c.b, "mu": c.mu, "omega_o": c.omega_o,
            "omega_min": self.omega_min, "omega_max": self.omega_max,
            "points_per_decade": self.points_per_decade,
        })
    }
}

fn realization_name(r: &Realization) -> &'static str {
    match r {
        Realization::GrunwaldLetnikov => "gl",
        Realization::Oustaloup { .. } => "oustaloup",
    }
}

/// Parses a flat `key = value` text. `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| invalid("config", format!("line {}: expected `key = value`, got `{line}`", i + 1)))?;
        let k = k.trim();
        if !PARAM_KEYS.iter().any(|(name, _)| *name == k) {
            return Err(invalid("key", format!("line {}: unknown key `{k}`", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub overrides: BTreeMap<String, String>,
    pub output_dir: PathBuf,
    /// Directory name; defaults to the id.
    pub label: Option<String>,
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId, output_dir: impl Into<PathBuf>) -> Self {
        Self { id, overrides: BTreeMap::new(), output_dir: output_dir.into(), label: None }
    }

    pub fn with_override(mut self, key: &str, value: &str) -> Self {
        self.overrides.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn directory(&self) -> PathBuf {
        self.output_dir.join(self.label.as_deref().unwrap_or(self.id.as_str()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Trajectory,
    Mse,
    Bode,
    Stability,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// File name relative to the experiment directory.
    pub file: String,
    pub kind: ArtifactKind,
    pub parameters: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: ExperimentId,
    /// Overrides exactly as supplied.
    pub overrides: BTreeMap<String, String>,
    pub artifacts: Vec<Artifact>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";

struct Writer {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Writer {
    fn trajectory(&mut self, file: String, traj: &Trajectory, parameters: Value) -> Result<()> {
        traj.save_csv(&self.dir.join(&file))?;
        self.artifacts.push(Artifact { file, kind: ArtifactKind::Trajectory, parameters });
        Ok(())
    }

    fn mse(&mut self, file: String, curves: &MseCurves, parameters: Value) -> Result<()> {
        curves.save_csv(&self.dir.join(&file))?;
        self.artifacts.push(Artifact { file, kind: ArtifactKind::Mse, parameters });
        Ok(())
    }

    fn bode(&mut self, file: String, b: &Bode, parameters: Value) -> Result<()> {
        b.save_csv(&self.dir.join(&file))?;
        self.artifacts.push(Artifact { file, kind: ArtifactKind::Bode, parameters });
        Ok(())
    }

    fn stability(&mut self, file: String, rep: &StabilityReport, parameters: Value) -> Result<()> {
        std::fs::write(self.dir.join(&file), rep.to_json()? + "\n")?;
        self.artifacts.push(Artifact { file, kind: ArtifactKind::Stability, parameters });
        Ok(())
    }
}

fn mse_sweep(w: &mut Writer, ps: &ParamSet, label: &str, values: &[f64], set: impl Fn(&mut CompensatedParams, f64)) -> Result<()> {
    let grid = ps.grid()?;
    for &v in values {
        let mut c = ps.compensated();
        set(&mut c, v);
        w.mse(format!("mse_{label}_{v:?}.csv"), &mse_curves(&c, &grid)?, ps.freq_json(&c))?;
    }
    Ok(())
}

fn bode_pair(w: &mut Writer, ps: &ParamSet) -> Result<()> {
    let grid = ps.grid()?;
    let c = ps.compensated();
    w.bode("bode_g_io.csv".into(), &bode(|s| g_io(&c, s), &grid)?, ps.freq_json(&c))?;
    w.bode("bode_g_ifio.csv".into(), &bode(|s| g_ifio(&c, s), &grid)?, ps.freq_json(&c))?;
    Ok(())
}

fn gain_sweep(w: &mut Writer, ps: &ParamSet, variant: Variant) -> Result<()> {
    let cfg = ps.config(variant);
    let plant = ps.plant()?;
    let trajs = loop_gain_variants(&cfg, &plant, &ps.reference_signal(), &ps.disturbance(), &ps.scales)?;
    for (scale, traj) in ps.scales.iter().zip(&trajs) {
        let mut params = ps.controller_json(variant);
        params["b_o"] = json!(plant.b_o * scale);
        params["gain_scale"] = json!(scale);
        w.trajectory(format!("{variant}_scale_{scale:?}.csv"), traj, params)?;
    }
    Ok(())
}

fn simulate_all(w: &mut Writer, ps: &ParamSet, variants: &[Variant]) -> Result<()> {
    let plant = ps.plant()?;
    let trajs: Vec<Trajectory> = variants
        .par_iter()
        .map(|v| run_closed_loop(&ps.config(*v), &plant, &ps.reference_signal(), &ps.disturbance()))
        .collect::<Result<_>>()?;
    for (v, traj) in variants.iter().zip(&trajs) {
        w.trajectory(format!("{v}.csv"), traj, ps.controller_json(*v))?;
    }
    Ok(())
}

fn stability_json(ps: &ParamSet) -> Value {
    let mut v = ps.controller_json(Variant::Ifadrc);
    for k in ["horizon", "step", "d_step", "d_onset", "realization", "memory_len", "variant"] {
        v.as_object_mut().expect("object").remove(k);
    }
    v
}

fn run_custom(w: &mut Writer, ps: &ParamSet) -> Result<()> {
    let kind = ps.kind.ok_or_else(|| invalid("kind", "custom experiments need `kind`"))?;
    match kind {
        CustomKind::Simulate | CustomKind::Stability => {
            let plant = ps.plant()?;
            // The sector test covers the IFADRC loop only.
            if kind == CustomKind::Stability || ps.variant == Variant::Ifadrc {
                let rep = check_config(&ps.config(Variant::Ifadrc), &plant)?;
                if !rep.stable {
                    return Err(Error::Unstable { margin: rep.margin, report: Box::new(rep) });
                }
                if kind == CustomKind::Stability {
                    return w.stability("stability.json".into(), &rep, stability_json(ps));
                }
            }
            simulate_all(w, ps, &[ps.variant])
        }
        CustomKind::Mse => {
            let c = ps.compensated();
            w.mse("mse.csv".into(), &mse_curves(&c, &ps.grid()?)?, ps.freq_json(&c))
        }
        CustomKind::Bode => bode_pair(w, ps),
        CustomKind::Sweep => sweep(w, ps),
    }
}

fn sweep(w: &mut Writer, ps: &ParamSet) -> Result<()> {
    let key = ps.sweep_param.as_str();
    if key == "scale" {
        let mut ps = ps.clone();
        if !ps.sweep_values.is_empty() {
            ps.scales = ps.sweep_values.clone();
        }
        return gain_sweep(w, &ps, ps.variant);
    }
    if ps.sweep_values.is_empty() {
        return Err(invalid("sweep_values", format!("sweeping `{key}` needs sweep_values")));
    }
    let points: Vec<ParamSet> = ps
        .sweep_values
        .iter()
        .map(|v| {
            let mut p = ps.clone();
            p.set(key, &format!("{v:?}"))?;
            Ok(p)
        })
        .collect::<Result<_>>()?;
    let trajs: Vec<Trajectory> = points
        .par_iter()
        .map(|p| run_closed_loop(&p.config(p.variant), &p.plant()?, &p.reference_signal(), &p.disturbance()))
        .collect::<Result<_>>()?;
    for ((p, v), traj) in points.iter().zip(&ps.sweep_values).zip(&trajs) {
        w.trajectory(format!("{}_{key}_{v:?}.csv", p.variant), traj, p.controller_json(p.variant))?;
    }
    Ok(())
}

/// Runs one experiment and writes its directory. Returns the manifest.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Manifest> {
    let mut ps = ParamSet::for_experiment(spec.id);
    ps.apply(&spec.overrides)?;
    let dir = spec.directory();
    std::fs::create_dir_all(&dir)?;
    let mut w = Writer { dir: dir.clone(), artifacts: Vec::new() };

    match spec.id {
        ExperimentId::Fig4 => {
            let c = ps.compensated();
            w.mse("mse.csv".into(), &mse_curves(&c, &ps.grid()?)?, ps.freq_json(&c))?;
        }
        ExperimentId::Fig5 => mse_sweep(&mut w, &ps, "mu", &[0.4, 0.6, 0.8], |c, v| c.mu = v)?,
        ExperimentId::Fig6 => mse_sweep(&mut w, &ps, "a_o", &[5.0, 10.0, 20.0], |c, v| c.a_o = v)?,
        ExperimentId::Fig7 => mse_sweep(&mut w, &ps, "omega_o", &[800.0, 1600.0, 3200.0], |c, v| c.omega_o = v)?,
        ExperimentId::Fig8 | ExperimentId::Fig9 => bode_pair(&mut w, &ps)?,
        ExperimentId::Fig10 => {
            let rep = check_config(&ps.config(Variant::Ifadrc), &ps.plant()?)?;
            w.stability("stability.json".into(), &rep, stability_json(&ps))?;
        }
        ExperimentId::Fig11 => simulate_all(&mut w, &ps, &Variant::ALL)?,
        ExperimentId::Fig12 => gain_sweep(&mut w, &ps, Variant::Iadrc)?,
        ExperimentId::Fig13 => gain_sweep(&mut w, &ps, Variant::Fadrc)?,
        ExperimentId::Fig14 => gain_sweep(&mut w, &ps, Variant::Ifadrc)?,
        ExperimentId::Custom => run_custom(&mut w, &ps)?,
    }

    let manifest = Manifest { id: spec.id, overrides: spec.overrides.clone(), artifacts: w.artifacts };
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    let metrics = summarize(&dir.join(MANIFEST_FILE))?;
    metrics.save_csv(&dir.join(METRICS_FILE))?;
    Ok(manifest)
}

/// Runs several experiments in parallel.
pub fn run_experiments(specs: &[ExperimentSpec]) -> Vec<Result<Manifest>> {
    specs.par_iter().map(run_experiment).collect()
}

/// One metrics row. Fields that do not apply to an artifact are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub artifact: String,
    pub overshoot_pct: Option<f64>,
    pub settling_time_s: Option<f64>,
    pub rise_time_s: Option<f64>,
    pub steady_state_error: Option<f64>,
    pub residual_rms: Option<f64>,
    pub max_mse_ratio: Option<f64>,
    pub stability_margin: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn row(&self, artifact: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.artifact == artifact)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        if self.rows.is_empty() {
            writeln!(w, "artifact,overshoot_pct,settling_time_s,rise_time_s,steady_state_error,residual_rms,max_mse_ratio,stability_margin")?;
        }
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn read_mse(path: &Path) -> Result<MseCurves> {
    let corrupt = |reason: String| Error::Corrupt { path: path.display().to_string(), reason };
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != "omega_rad_s,e_io,e_ifio" {
        return Err(corrupt(format!("unexpected header `{header}`")));
    }
    let mut c = MseCurves { omega: vec![], e_io: vec![], e_ifio: vec![] };
    for rec in rdr.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec.iter().map(|f| f.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| corrupt(e.to_string()))?;
        if vals.len() != 3 {
            return Err(corrupt("expected three columns".into()));
        }
        c.omega.push(vals[0]);
        c.e_io.push(vals[1]);
        c.e_ifio.push(vals[2]);
    }
    Ok(c)
}

fn trajectory_row(file: &str, m: StepMetrics) -> MetricsRow {
    MetricsRow {
        artifact: file.to_string(),
        overshoot_pct: Some(m.overshoot_pct),
        settling_time_s: Some(m.settling_time),
        rise_time_s: Some(m.rise_time),
        steady_state_error: Some(m.steady_state_error),
        residual_rms: Some(m.residual_rms),
        ..Default::default()
    }
}

/// Reads a manifest and every artifact it lists, producing one metrics row
/// per trajectory, MSE curve and stability report.
pub fn summarize(manifest_path: &Path) -> Result<MetricsTable> {
    let text = std::fs::read_to_string(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Corrupt { path: manifest_path.display().to_string(), reason: e.to_string() })?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut rows = Vec::new();
    for a in &manifest.artifacts {
        let path = dir.join(&a.file);
        match a.kind {
            ArtifactKind::Trajectory => rows.push(trajectory_row(&a.file, Trajectory::load_csv(&path)?.step_metrics())),
            ArtifactKind::Mse => rows.push(MetricsRow {
                artifact: a.file.clone(),
                max_mse_ratio: Some(read_mse(&path)?.max_ratio()),
                ..Default::default()
            }),
            ArtifactKind::Stability => {
                let rep: StabilityReport = serde_json::from_str(&std::fs::read_to_string(&path)?)
                    .map_err(|e| Error::Corrupt { path: path.display().to_string(), reason: e.to_string() })?;
                rows.push(MetricsRow { artifact: a.file.clone(), stability_margin: Some(rep.margin), ..Default::default() });
            }
            ArtifactKind::Bode => {
                if !path.is_file() {
                    return Err(Error::Corrupt { path: path.display().to_string(), reason: "missing".into() });
                }
            }
        }
    }
    Ok(MetricsTable { rows })
}
