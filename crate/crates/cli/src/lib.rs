//! `aifml` command-line tool.
//!
//! Exit codes: 0 success, 1 validation or domain error, 2 usage error,
//! 3 I/O error (including an unreachable broker).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use aifml_core::analytics::{
    self, synthetic, train_val_test, AnalyticsError, Dataset, ModelConfig, Provenance, PAPER_EPOCHS,
    TRAIN_FRACTION,
};
use aifml_core::netlink::{run_class_simulation, serve, ClassConfig, DeviceRole, NetError, Transport};
use aifml_core::pso::{tune_kb, PsoConfig, TuneConfig, Tunable, TuningData};
use aifml_core::raa::{read_log, sessions_from_log, team_report, RaaConfig, RaaError};
use aifml_core::{parse_fml, serialize_fml, validate, FmlDocument, FmlError, DEFAULT_RESOLUTION};
use clap::builder::TypedValueParser;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod mqtt;
pub mod net;

use mqtt::{MqttSettings, MqttTransport};

#[derive(Debug, Parser)]
#[command(name = "aifml", version, about = "Fuzzy knowledge bases, RAA sessions and learning analytics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check and run FML knowledge bases.
    #[command(subcommand)]
    Fml(FmlCommand),
    /// Tune membership functions against a dataset with PSO.
    Tune(TuneArgs),
    /// Simulate classes and summarize session logs.
    #[command(subcommand)]
    Raa(RaaCommand),
    /// Train the learning-performance regressor.
    #[command(subcommand)]
    Analytics(AnalyticsCommand),
    /// Run the RAA service or a device against an MQTT broker.
    #[command(subcommand)]
    Net(NetCommand),
}

#[derive(Debug, Subcommand)]
pub enum FmlCommand {
    /// Print every violation, or OK.
    Validate { path: PathBuf },
    /// Infer crisp outputs for the given inputs.
    Infer {
        path: PathBuf,
        /// `name=value`, once per input variable.
        #[arg(long = "input", value_parser = parse_assignment, required = true)]
        inputs: Vec<(String, f64)>,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION, value_parser = clap::value_parser!(u64).range(3..).map(|v| v as usize))]
        resolution: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TunableArg {
    All,
    Inputs,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub fml: PathBuf,
    /// CSV with one column per input variable and the output last.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
    pub iters: usize,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(2..).map(|v| v as usize))]
    pub swarm: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub tunable: TunableArg,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION, value_parser = clap::value_parser!(u64).range(3..).map(|v| v as usize))]
    pub resolution: usize,
}

#[derive(Debug, Subcommand)]
pub enum RaaCommand {
    /// Run a class through the in-process broker and write its session log.
    Simulate {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
        students: usize,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
        sentences: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Split students into this many teams T1..; 0 keeps one team.
        #[arg(long, default_value_t = 6)]
        teams: usize,
        #[arg(long, default_value = "c1")]
        class: String,
    },
    /// Per-team average score and correct/partial counts of a session log.
    Stats { log: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum AnalyticsCommand {
    /// Train once and print the training report as JSON.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
        epochs: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train one model per epoch count and print the table as JSON.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated epoch counts.
        #[arg(long, value_delimiter = ',', default_values_t = PAPER_EPOCHS)]
        epochs: Vec<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write a synthetic student dataset.
    Synth {
        #[arg(long, default_value_t = 1125)]
        records: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Noise-free y = 20 + 60 * x8 instead of the roster model.
        #[arg(long)]
        affine: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DeviceKind {
    Robot,
    Display,
}

impl From<DeviceKind> for DeviceRole {
    fn from(k: DeviceKind) -> Self {
        match k {
            DeviceKind::Robot => DeviceRole::Robot,
            DeviceKind::Display => DeviceRole::Display,
        }
    }
}

#[derive(Debug, Args)]
pub struct BrokerArgs {
    /// `host:port` of the MQTT broker.
    #[arg(long)]
    pub broker: String,
    #[arg(long)]
    pub class: String,
    /// MQTT client id; also names the persistent broker session.
    #[arg(long)]
    pub client_id: Option<String>,
    /// Connection attempts before giving up.
    #[arg(long, default_value_t = 5)]
    pub retries: u32,
}

#[derive(Debug, Subcommand)]
pub enum NetCommand {
    /// Score utterances and publish results, display updates and robot actions.
    Serve {
        #[command(flatten)]
        broker: BrokerArgs,
        /// Journal file making sessions survive restarts.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Session log CSV written on shutdown.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Simulate the robot or the learning tool's display.
    Device {
        #[arg(value_enum)]
        kind: DeviceKind,
        #[command(flatten)]
        broker: BrokerArgs,
        /// Observation log, appended to and reread on restart.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected name=value, got '{s}'"))?;
    let value: f64 = value.trim().parse().map_err(|_| format!("'{value}' is not a number"))?;
    Ok((name.trim().to_owned(), value))
}

/// A command failure and its exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn domain(message: impl fmt::Display) -> Self {
        Self { code: 1, message: message.to_string() }
    }

    pub fn usage(message: impl fmt::Display) -> Self {
        Self { code: 2, message: message.to_string() }
    }

    pub fn io(message: impl fmt::Display) -> Self {
        Self { code: 3, message: message.to_string() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<NetError> for Failure {
    fn from(e: NetError) -> Self {
        match e {
            NetError::BrokerDisconnected(_) | NetError::Io(_) => Failure::io(e),
            NetError::InvalidConfig(_) => Failure::usage(e),
            _ => Failure::domain(e),
        }
    }
}

impl From<AnalyticsError> for Failure {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::Io(_) => Failure::io(e),
            _ => Failure::domain(e),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

/// Prints `text` and copies it to `report` if given.
fn emit(text: &str, report: Option<&Path>) -> Result<(), Failure> {
    println!("{text}");
    match report {
        Some(p) => write(p, &format!("{text}\n")),
        None => Ok(()),
    }
}

fn load_fml(path: &Path) -> Result<FmlDocument, Failure> {
    parse_fml(&read(path)?).map_err(|e| Failure::domain(format!("{}: {e}", path.display())))
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Fml(c) => fml(c),
        Command::Tune(a) => tune(a),
        Command::Raa(c) => raa(c),
        Command::Analytics(c) => analytics(c),
        Command::Net(c) => net_command(c),
    }
}

fn fml(cmd: FmlCommand) -> Result<(), Failure> {
    match cmd {
        FmlCommand::Validate { path } => {
            let text = read(&path)?;
            let violations = match parse_fml(&text) {
                Ok(doc) => validate(&doc),
                Err(FmlError::SemanticError(v)) => v,
                Err(e) => return Err(Failure::domain(format!("{}: {e}", path.display()))),
            };
            if violations.is_empty() {
                println!("OK");
                return Ok(());
            }
            for v in &violations {
                println!("{v}");
            }
            Err(Failure::domain(format!("{} violation(s)", violations.len())))
        }
        FmlCommand::Infer { path, inputs, resolution } => {
            let doc = load_fml(&path)?;
            let mut values = BTreeMap::new();
            for (name, value) in inputs {
                if values.insert(name.clone(), value).is_some() {
                    return Err(Failure::usage(format!("input '{name}' given twice")));
                }
            }
            let result = aifml_core::infer(&doc, &values, resolution).map_err(Failure::domain)?;
            for (name, value) in &result.outputs {
                println!("{name}\t{}", crisp(*value));
            }
            Ok(())
        }
    }
}

/// Nine decimals without trailing zeros.
fn crisp(v: f64) -> String {
    let s = format!("{v:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn tune(a: TuneArgs) -> Result<(), Failure> {
    let doc = load_fml(&a.fml)?;
    let data = TuningData::from_csv(&doc, read(&a.data)?.as_bytes()).map_err(Failure::domain)?;
    let config = TuneConfig {
        pso: PsoConfig {
            swarm_size: a.swarm,
            iterations: a.iters,
            seed: a.seed,
            ..PsoConfig::default()
        },
        tunable: match a.tunable {
            TunableArg::All => Tunable::All,
            TunableArg::Inputs => Tunable::Inputs,
        },
        resolution: a.resolution,
    };
    let result = tune_kb(&doc, &data, &config).map_err(Failure::domain)?;
    write(&a.out, &serialize_fml(&result.document))?;
    println!("initial MSE\t{}", result.initial_mse);
    println!("final MSE\t{}", result.final_mse);
    Ok(())
}

fn raa(cmd: RaaCommand) -> Result<(), Failure> {
    match cmd {
        RaaCommand::Simulate { students, sentences, seed, out, teams, class } => {
            let mut cfg = ClassConfig::new(class, students, sentences, seed);
            cfg.teams = (teams > 0).then_some(teams);
            let run = run_class_simulation(&cfg)?;
            write(&out, &run.log_csv())?;
            println!("wrote {} utterances to {}", run.rows.len(), out.display());
            Ok(())
        }
        RaaCommand::Stats { log } => {
            let text = read(&log)?;
            let rows = if text.trim().is_empty() {
                Vec::new()
            } else {
                read_log(text.as_bytes()).map_err(Failure::domain)?
            };
            let teams = sessions_from_log(&rows).map_err(Failure::domain)?;
            let report = team_report(&teams).map_err(|e| match e {
                RaaError::EmptySession => Failure::domain(format!("EmptySession: {e}")),
                e => Failure::domain(e),
            })?;
            print!("{report}");
            Ok(())
        }
    }
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    let name = path.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned());
    Dataset::from_csv(name, read(path)?.as_bytes())
        .map_err(|e| Failure::domain(format!("{}: {e}", path.display())))
}

fn analytics(cmd: AnalyticsCommand) -> Result<(), Failure> {
    match cmd {
        AnalyticsCommand::Train { data, epochs, seed, report } => {
            let ds = load_dataset(&data)?;
            let scaled = match ds.provenance {
                Provenance::Scaled => ds,
                Provenance::Raw => ds.scale_fit_transform()?.0,
            };
            let (tr, va, te) = train_val_test(&scaled, TRAIN_FRACTION, seed)?;
            let (model, mut rep) = analytics::train(&ModelConfig::default(), &tr, &va, epochs, seed)?;
            rep.mse_test = Some(analytics::evaluate(&model, &te));
            rep.sizes.test = te.len();
            let json = serde_json::to_string_pretty(&rep).expect("report serializes");
            emit(&json, report.as_deref())
        }
        AnalyticsCommand::Sweep { data, epochs, seed, report } => {
            let ds = load_dataset(&data)?;
            let rep = analytics::epoch_sweep(&ds, &epochs, seed)?;
            eprint!("{rep}");
            emit(&rep.to_json(), report.as_deref())
        }
        AnalyticsCommand::Synth { records, seed, out, affine } => {
            let ds = if affine {
                synthetic::affine(records, seed)
            } else {
                synthetic::generate(&synthetic::SyntheticConfig { records, seed, ..Default::default() })
            };
            let file = fs::File::create(&out).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
            ds.to_csv(io::BufWriter::new(file))?;
            println!("wrote {} records to {}", ds.len(), out.display());
            Ok(())
        }
    }
}

/// Set by the interrupt handler; every long-running loop checks it.
pub fn install_interrupt() -> Arc<AtomicBool> {
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, std::sync::atomic::Ordering::SeqCst)) {
        log::warn!("cannot install interrupt handler: {e}");
    }
    stop
}

fn connect(args: &BrokerArgs, default_id: String) -> Result<MqttTransport, Failure> {
    let mut settings =
        MqttSettings::parse(&args.broker, args.client_id.as_deref().unwrap_or(&default_id)).map_err(Failure::usage)?;
    settings.retries = args.retries;
    Ok(MqttTransport::connect(settings)?)
}

fn net_command(cmd: NetCommand) -> Result<(), Failure> {
    let stop = install_interrupt();
    let idle = Duration::ZERO;
    match cmd {
        NetCommand::Serve { broker, store, log } => {
            let mut service = net::Service::open(&broker.class, store.as_deref(), RaaConfig::default())?;
            let mut t = connect(&broker, format!("aifml-raa-{}", broker.class))?;
            let outcome = serve(&mut service, &mut t as &mut dyn Transport, &stop, idle);
            t.disconnect();
            if let Some(path) = &log {
                let n = service.export(&broker.class, path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
                log::info!("wrote {n} session rows to {}", path.display());
            }
            let handled = outcome?;
            log::info!("handled {handled} deliveries");
            Ok(())
        }
        NetCommand::Device { kind, broker, log } => {
            let mut device = net::LoggedDevice::open(kind.into(), &broker.class, log.as_deref(), true)
                .map_err(|e| Failure::io(format!("device log: {e}")))?;
            let name = match kind {
                DeviceKind::Robot => "robot",
                DeviceKind::Display => "display",
            };
            let mut t = connect(&broker, format!("aifml-{name}-{}", broker.class))?;
            let outcome = serve(&mut device, &mut t as &mut dyn Transport, &stop, idle);
            t.disconnect();
            let handled = outcome?;
            log::info!("handled {handled} deliveries");
            Ok(())
        }
    }
}
