use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fracadrc::experiments::{
    parse_config_text, run_experiment, run_experiments, ExperimentId, ExperimentSpec, Manifest, ParamSet, MANIFEST_FILE,
};
use fracadrc::{Error, StabilityReport};

const KEYS_HELP: &str = "Parameter keys (usable as --<key> flags or `key = value` lines in --config):
  a_o                plant coefficient a_o (default 10)
  b_o                true plant input gain b_o (default 1)
  b                  controller's nominal input gain b (default 1)
  mu                 plant order, 0 < mu <= 1 (default 0.8)
  K                  proportional gain (default 150)
  omega_o            observer bandwidth in rad/s (default 400)
  Ts                 sample period in s (default 1/8000)
  horizon            simulated time in s (default 1)
  variant            iadrc | fadrc | ifadrc (default ifadrc)
  scales             plant gain factors for loop-gain sweeps (default 0.5,1,2)
  step               reference step amplitude (default 1)
  d_step, d_onset    disturbance step amplitude and onset (default 0, 0.5 s)
  realization        gl | oustaloup (default gl)
  memory_len         GL history in samples, 0 for full memory (default 0)
  omega_min          lowest grid frequency in rad/s (default 0.1)
  omega_max          highest grid frequency in rad/s (default 1e5)
  points_per_decade  grid density (default 60)
  sweep_param        key varied by `sweep` (default scale)
  sweep_values       values for sweep_param

Exit codes: 0 success, 1 invalid arguments or I/O failure, 2 unstable, 3 simulation diverged.";

#[derive(Parser, Debug)]
#[command(name = "fracadrc", version, about = "ADRC for fractional-order plants: simulation, stability and frequency analysis", after_help = KEYS_HELP)]
struct Cli {
    /// Flat `key = value` parameter file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Format of the summary printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One closed-loop step response written as a trajectory CSV.
    Simulate(Params),
    /// Loop-gain sweep (default) or a sweep over any numeric key.
    Sweep(Params),
    /// Bode data of both compensated objects.
    Bode(Params),
    /// Closed-form MSE curves of both compensated objects.
    Mse(Params),
    /// Sector test of the IFADRC closed loop. Exit 0 if stable, 2 if not.
    Stability(Params),
    /// Regenerate a figure's data (fig4 .. fig14) or `all`.
    Reproduce {
        target: String,
        #[command(flatten)]
        params: Params,
    },
}

#[derive(Args, Debug, Default)]
#[command(after_help = KEYS_HELP)]
struct Params {
    /// Plant coefficient a_o.
    #[arg(long = "a_o", allow_hyphen_values = true)]
    a_o: Option<String>,
    /// True plant input gain b_o.
    #[arg(long = "b_o", allow_hyphen_values = true)]
    b_o: Option<String>,
    /// Controller's nominal input gain b.
    #[arg(long = "b", allow_hyphen_values = true)]
    b: Option<String>,
    /// Plant order, 0 < mu <= 1.
    #[arg(long = "mu")]
    mu: Option<String>,
    /// Proportional gain.
    #[arg(long = "K", allow_hyphen_values = true)]
    k: Option<String>,
    /// Observer bandwidth (rad/s).
    #[arg(long = "omega_o")]
    omega_o: Option<String>,
    /// Sample period (s).
    #[arg(long = "Ts")]
    ts: Option<String>,
    /// Simulated time (s).
    #[arg(long = "horizon")]
    horizon: Option<String>,
    /// iadrc | fadrc | ifadrc.
    #[arg(long = "variant")]
    variant: Option<String>,
    /// Comma-separated plant gain factors.
    #[arg(long = "scales")]
    scales: Option<String>,
    /// Reference step amplitude.
    #[arg(long = "step", allow_hyphen_values = true)]
    step: Option<String>,
    /// Disturbance step amplitude.
    #[arg(long = "d_step", allow_hyphen_values = true)]
    d_step: Option<String>,
    /// Disturbance step onset (s).
    #[arg(long = "d_onset")]
    d_onset: Option<String>,
    /// gl | oustaloup.
    #[arg(long = "realization")]
    realization: Option<String>,
    /// GL history length in samples, 0 for full memory.
    #[arg(long = "memory_len")]
    memory_len: Option<String>,
    /// Lowest grid frequency (rad/s).
    #[arg(long = "omega_min")]
    omega_min: Option<String>,
    /// Highest grid frequency (rad/s).
    #[arg(long = "omega_max")]
    omega_max: Option<String>,
    /// Grid points per decade.
    #[arg(long = "points_per_decade")]
    points_per_decade: Option<String>,
    /// Key varied by `sweep`.
    #[arg(long = "sweep_param")]
    sweep_param: Option<String>,
    /// Comma-separated values for sweep_param.
    #[arg(long = "sweep_values", allow_hyphen_values = true)]
    sweep_values: Option<String>,
}

impl Params {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("a_o", &self.a_o),
            ("b_o", &self.b_o),
            ("b", &self.b),
            ("mu", &self.mu),
            ("K", &self.k),
            ("omega_o", &self.omega_o),
            ("Ts", &self.ts),
            ("horizon", &self.horizon),
            ("variant", &self.variant),
            ("scales", &self.scales),
            ("step", &self.step),
            ("d_step", &self.d_step),
            ("d_onset", &self.d_onset),
            ("realization", &self.realization),
            ("memory_len", &self.memory_len),
            ("omega_min", &self.omega_min),
            ("omega_max", &self.omega_max),
            ("points_per_decade", &self.points_per_decade),
            ("sweep_param", &self.sweep_param),
            ("sweep_values", &self.sweep_values),
        ]
    }
}

/// Config-file values, then flags on top; validated against a parameter set.
fn overrides(config: Option<&Path>, params: &Params) -> Result<BTreeMap<String, String>, Error> {
    let mut map = match config {
        Some(path) => parse_config_text(&std::fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    for (key, value) in params.pairs() {
        if let Some(v) = value {
            map.insert(key.to_string(), v.clone());
        }
    }
    // Surface bad keys or values before any work starts.
    ParamSet::default().apply(&map)?;
    Ok(map)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Unstable { .. } => 2,
        Error::Diverged { .. } => 3,
        _ => 1,
    }
}

fn print_stability(rep: &StabilityReport, format: Format) {
    match format {
        Format::Json => println!("{}", rep.to_json().unwrap_or_default()),
        Format::Text => {
            let verdict = if rep.stable {
                "stable"
            } else if rep.marginal {
                "unstable (marginal)"
            } else {
                "unstable"
            };
            println!("verdict: {verdict}");
            println!("margin_rad: {:?}", rep.margin);
            println!("degree: {}", rep.degree);
            println!("lambda: {:?}", rep.lambda);
            println!("residual_max: {:e}", rep.residual_max);
        }
    }
}

fn print_manifest(dir: &Path, m: &Manifest, format: Format) {
    match format {
        Format::Json => println!("{}", serde_json::to_string(m).unwrap_or_default()),
        Format::Text => {
            for a in &m.artifacts {
                println!("{}", dir.join(&a.file).display());
            }
        }
    }
}

fn custom(cli: &Cli, params: &Params, kind: &str, label: &str) -> Result<(), Error> {
    let mut map = overrides(cli.config.as_deref(), params)?;
    map.insert("kind".into(), kind.into());
    let spec = ExperimentSpec { overrides: map, ..ExperimentSpec::new(ExperimentId::Custom, &cli.out) }.with_label(label);
    let manifest = run_experiment(&spec)?;
    print_manifest(&spec.directory(), &manifest, cli.format);
    Ok(())
}

fn stability(cli: &Cli, params: &Params) -> Result<(), Error> {
    let mut map = overrides(cli.config.as_deref(), params)?;
    map.insert("kind".into(), "stability".into());
    let spec = ExperimentSpec { overrides: map, ..ExperimentSpec::new(ExperimentId::Custom, &cli.out) }.with_label("stability");
    match run_experiment(&spec) {
        Ok(_) => {
            let text = std::fs::read_to_string(spec.directory().join("stability.json"))?;
            let rep: StabilityReport = serde_json::from_str(&text)?;
            print_stability(&rep, cli.format);
            Ok(())
        }
        Err(Error::Unstable { margin, report }) => {
            print_stability(&report, cli.format);
            Err(Error::Unstable { margin, report })
        }
        Err(e) => Err(e),
    }
}

fn reproduce(cli: &Cli, target: &str, params: &Params) -> Result<(), Error> {
    let map = overrides(cli.config.as_deref(), params)?;
    let ids: Vec<ExperimentId> = if target.eq_ignore_ascii_case("all") {
        ExperimentId::FIGURES.to_vec()
    } else {
        match target.parse()? {
            ExperimentId::Custom => return Err(Error::UnknownExperiment(target.to_string())),
            id => vec![id],
        }
    };
    let specs: Vec<ExperimentSpec> =
        ids.iter().map(|id| ExperimentSpec { overrides: map.clone(), ..ExperimentSpec::new(*id, &cli.out) }).collect();
    let results = run_experiments(&specs);

    let mut index = Vec::new();
    let mut first_err = None;
    for (spec, res) in specs.iter().zip(results) {
        match res {
            Ok(m) => {
                print_manifest(&spec.directory(), &m, cli.format);
                index.push(serde_json::json!({ "id": spec.id, "manifest": format!("{}/{MANIFEST_FILE}", spec.id) }));
            }
            Err(e) => {
                eprintln!("{}: {e}", spec.id);
                first_err.get_or_insert(e);
            }
        }
    }
    if ids.len() > 1 {
        let doc = serde_json::json!({ "overrides": map, "experiments": index });
        std::fs::write(cli.out.join(MANIFEST_FILE), serde_json::to_string_pretty(&doc)? + "\n")?;
    }
    first_err.map_or(Ok(()), Err)
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Simulate(p) => custom(cli, p, "simulate", "simulate"),
        Command::Sweep(p) => custom(cli, p, "sweep", "sweep"),
        Command::Bode(p) => custom(cli, p, "bode", "bode"),
        Command::Mse(p) => custom(cli, p, "mse", "mse"),
        Command::Stability(p) => stability(cli, p),
        Command::Reproduce { target, params } => reproduce(cli, target, params),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, Error::Unstable { .. }) {
                eprintln!("error: {e}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
