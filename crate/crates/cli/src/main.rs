use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bilimo::adc::levels_from_budget;
use bilimo::bundle::{export_design, export_dictionary};
use bilimo::combiner::{analog_filter_response, design_multitone, write_responses_csv, DesignParams};
use bilimo::harness::{run_sweep, write_csv, ArrayKind, ExperimentSpec, Method, PointSpec};
use bilimo::recovery::Regularization;
use bilimo::statistics::CompressionKind;
use bilimo::{CoeffModel, CompressionMatrix, SignalStatistics, SteeringDictionary};

/// Bit-limited MIMO radar receiver design and simulation.
#[derive(Parser)]
#[command(name = "bilimo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the acquisition design for one operating point and export it.
    Design(DesignArgs),
    /// Run a single sweep point.
    Simulate(SimArgs),
    /// Run the full sweep over every axis value.
    Sweep(SimArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    budget_bits: Vec<u64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    dcr: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// gaussian, bernoulli or dft.
    #[arg(long, value_delimiter = ',')]
    matrix_kind: Vec<CompressionKind>,
    #[arg(long)]
    eta: Option<f64>,
    /// ula or random (ignored when the config file holds explicit positions).
    #[arg(long)]
    array: Option<String>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated subset of bilimo, task_ignorant, noquan_dr, noquan_lmmse.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    /// LASSO weight as a fraction of max|A^H s|.
    #[arg(long)]
    rho_scale: Option<f64>,
    /// gaussian or unit_modulus.
    #[arg(long)]
    coeff_model: Option<CoeffModel>,
    /// Fill the wall_ms column.
    #[arg(long)]
    timing: bool,
    /// Output CSV; a JSON provenance file is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    common: Common,
    /// Output bundle path.
    #[arg(long)]
    out: PathBuf,
    /// Also export the filter frequency responses as CSV.
    #[arg(long)]
    responses: Option<PathBuf>,
    /// Also export the dictionary bundle.
    #[arg(long)]
    dictionary: Option<PathBuf>,
}

fn load_spec(common: &Common) -> Result<ExperimentSpec> {
    let mut spec: ExperimentSpec = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(s) = common.seed {
        spec.seed = s;
    }
    if !common.budget_bits.is_empty() {
        spec.budget_bits = common.budget_bits.clone();
    }
    if !common.snr_db.is_empty() {
        spec.snr_db = common.snr_db.clone();
    }
    if !common.dcr.is_empty() {
        spec.dcr = common.dcr.clone();
    }
    if !common.k.is_empty() {
        spec.k = common.k.clone();
    }
    if !common.matrix_kind.is_empty() {
        spec.matrix_kinds = common.matrix_kind.clone();
    }
    if let Some(eta) = common.eta {
        spec.params.eta = eta;
        if let Some(cfg) = spec.config.as_mut() {
            cfg.eta = eta;
        }
    }
    match common.array.as_deref() {
        None => {}
        Some("ula") => spec.array = ArrayKind::Ula,
        Some("random") => spec.array = ArrayKind::Random,
        Some(other) => bail!("unknown array kind {other:?}"),
    }
    Ok(spec)
}

fn apply_sim_flags(args: &SimArgs, spec: &mut ExperimentSpec) {
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if !args.methods.is_empty() {
        spec.methods = args.methods.clone();
    }
    if let Some(r) = args.rho_scale {
        spec.recovery.rho = Regularization::Relative(r);
    }
    if let Some(c) = args.coeff_model {
        spec.coeff_model = c;
    }
    if args.timing {
        spec.timing = true;
    }
}

fn single<T: Copy>(values: &[T], name: &str) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => bail!("{name} must have exactly one value for this command, got {}", values.len()),
    }
}

fn simulate(args: SimArgs, whole_sweep: bool) -> Result<()> {
    let mut spec = load_spec(&args.common)?;
    apply_sim_flags(&args, &mut spec);
    if !whole_sweep {
        single(&spec.budget_bits, "--budget-bits")?;
        single(&spec.snr_db, "--snr-db")?;
        single(&spec.dcr, "--dcr")?;
        single(&spec.k, "--k")?;
        single(&spec.matrix_kinds, "--matrix-kind")?;
    }
    let result = run_sweep::<f64>(&spec)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(&result.rows, BufWriter::new(file), spec.timing)?;
            let sidecar = sidecar_path(path);
            let mut w = BufWriter::new(File::create(&sidecar)?);
            serde_json::to_writer_pretty(&mut w, &result.provenance)?;
            w.write_all(b"\n")?;
            log::info!("wrote {} and {}", path.display(), sidecar.display());
        }
        None => write_csv(&result.rows, std::io::stdout().lock(), spec.timing)?,
    }
    if result.provenance.failures > 0 {
        log::warn!("{} trials failed and were excluded", result.provenance.failures);
    }
    Ok(())
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn design(args: DesignArgs) -> Result<()> {
    let spec = load_spec(&args.common)?;
    spec.validate()?;
    let cfg = spec.resolve_config()?;
    let point = PointSpec {
        index: 0,
        budget_bits: single(&spec.budget_bits, "--budget-bits")?,
        snr_db: single(&spec.snr_db, "--snr-db")?,
        dcr: single(&spec.dcr, "--dcr")?,
        k: single(&spec.k, "--k")?,
        kind: single(&spec.matrix_kinds, "--matrix-kind")?,
    };
    let cfg = cfg.with_snr_db(point.snr_db);
    let stats = SignalStatistics::isotropic(&cfg, point.k);
    let mut rng = bilimo::harness::stream_rng(spec.seed, point.index, u64::MAX, bilimo::harness::Stream::Compression);
    let comp = CompressionMatrix::random(&mut rng, &cfg, point.dcr, point.kind)?;
    let channels = comp.channels();
    let levels = levels_from_budget(point.budget_bits, channels, cfg.tones)?;
    let design = design_multitone(&stats, &comp, &DesignParams { channels, levels, eta: cfg.eta })?;
    log::info!(
        "P = {channels}, b = {levels}, support = {:.6}, eps_lmmse = {:.6}, eps_emse = {:.6}",
        design.support,
        design.lmmse,
        design.emse
    );
    export_design(&design, &cfg, Some(spec.seed))?.write(BufWriter::new(File::create(&args.out)?))?;
    if let Some(path) = &args.responses {
        let mut all = Vec::new();
        for p in 0..channels {
            for n in 0..cfg.rx_count {
                all.extend(analog_filter_response(&design, &cfg, p, n, None)?);
            }
        }
        write_responses_csv(BufWriter::new(File::create(path)?), &all)?;
    }
    if let Some(path) = &args.dictionary {
        let dict = SteeringDictionary::new(&cfg)?;
        export_dictionary(&dict, &cfg, Some(spec.seed)).write(BufWriter::new(File::create(path)?))?;
    }
    println!(
        "channels={channels} levels={levels} support={} eps_lmmse={} eps_emse={}",
        design.support, design.lmmse, design.emse
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Design(a) => design(a),
        Command::Simulate(a) => simulate(a, false),
        Command::Sweep(a) => simulate(a, true),
    }
}
