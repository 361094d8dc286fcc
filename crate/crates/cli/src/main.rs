use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use combsense::ccs::{nyquist_shifts, pcs_shifts, rcs_shifts, ShiftKind};
use combsense::codebook::io::{write_mask_csv, CodebookFile, Provenance};
use combsense::codebook::{build_codebook, Codebook};
use combsense::sim::analysis::{coherence_samples, sweep_comparison, write_coherence_csv, write_psf_csv, write_sweep_csv};
use combsense::sim::rng::{stream, Stage};
use combsense::sim::{run_experiment, sidecar_path, write_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "combsense", version, about = "Comb-structured beam training: codebook design, sweeps and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design an AWM codebook and write it as JSON.
    Design {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Codebook JSON output.
        #[arg(long, default_value = "codebook.json")]
        out: PathBuf,
        /// Also write |Z| for every sector and cell.
        #[arg(long)]
        mask_csv: Option<PathBuf>,
    },
    /// Compare noiseless sweep power of the comb codebook and the contiguous baseline.
    SweepAnalysis {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Run the full Monte-Carlo pipeline and write one CSV row per (M, SNR).
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// CSV output; falls back to `output_path` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Point spread function of one shift set, plus coherence samples.
    Psf {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Sector index (row-major over the block grid).
        #[arg(long, default_value_t = 0)]
        sector: usize,
        /// Number of random draws for the coherence table.
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        #[arg(long, default_value = "psf.csv")]
        out: PathBuf,
        #[arg(long)]
        coherence_out: Option<PathBuf>,
    },
}

/// Flags mirroring `ExperimentConfig`. Values from `--config` win over flags.
#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; its fields override the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_e: Option<usize>,
    #[arg(long)]
    n_a: Option<usize>,
    /// Phase-shifter resolution in bits.
    #[arg(long)]
    q: Option<u32>,
    #[arg(long)]
    l_taps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_omni_db_list: Option<Vec<f64>>,
    /// nyquist, pcs or rcs.
    #[arg(long)]
    shift_kind: Option<String>,
    /// optimized or random.
    #[arg(long)]
    weight_mode: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    rays_min: Option<usize>,
    #[arg(long)]
    rays_max: Option<usize>,
    /// on-grid or off-grid.
    #[arg(long)]
    grid_mode: Option<String>,
    #[arg(long)]
    n_seq: Option<usize>,
    #[arg(long)]
    n_fft: Option<usize>,
    #[arg(long)]
    total_power: Option<f64>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<combsense::Error> for Failure {
    fn from(e: combsense::Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn merge(base: &mut Map<String, Value>, over: Map<String, Value>) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Object(b)), Value::Object(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ConfigArgs {
    fn flags(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("n", self.n.map(Value::from));
        put("n_e", self.n_e.map(Value::from));
        put("n_a", self.n_a.map(Value::from));
        put("q", self.q.map(Value::from));
        put("l_taps", self.l_taps.map(Value::from));
        put("m_list", self.m_list.clone().map(Value::from));
        put("snr_omni_db_list", self.snr_omni_db_list.clone().map(Value::from));
        put("shift_kind", self.shift_kind.clone().map(Value::from));
        put("weight_mode", self.weight_mode.clone().map(Value::from));
        put("trials", self.trials.map(Value::from));
        put("base_seed", self.base_seed.map(Value::from));
        put("rays_min", self.rays_min.map(Value::from));
        put("rays_max", self.rays_max.map(Value::from));
        put("grid_mode", self.grid_mode.clone().map(Value::from));
        put("n_seq", self.n_seq.map(Value::from));
        put("n_fft", self.n_fft.map(Value::from));
        put("total_power", self.total_power.map(Value::from));
        m
    }

    fn resolve(&self) -> Result<ExperimentConfig, Failure> {
        let Value::Object(mut base) = serde_json::to_value(ExperimentConfig::default()).expect("serializable")
        else {
            unreachable!("config serializes to an object")
        };
        merge(&mut base, self.flags());
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(file)) => merge(&mut base, file),
                Ok(_) => return Err(Failure::Config(format!("{}: expected a JSON object", path.display()))),
                Err(e) => return Err(Failure::Config(format!("{}: {e}", path.display()))),
            }
        }
        serde_json::from_value(Value::Object(base)).map_err(|e| Failure::Config(e.to_string()))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn codebook_for(cfg: &ExperimentConfig) -> Result<Codebook, Failure> {
    Ok(build_codebook(cfg.n, cfg.n_e, cfg.n_a, cfg.q, cfg.weight_mode, &cfg.pecan)?)
}

fn design(cfg: &ExperimentConfig, out: &Path, mask_csv: Option<&Path>) -> Result<(), Failure> {
    let book = codebook_for(cfg)?;
    let prov = serde_json::json!({
        "n": cfg.n, "n_e": cfg.n_e, "n_a": cfg.n_a, "q": cfg.q,
        "weight_mode": cfg.weight_mode, "pecan": cfg.pecan,
    });
    CodebookFile::from_codebook(&book, Provenance::new(prov)).save(out)?;
    if let Some(p) = mask_csv {
        write_mask_csv(&book, create(p)?)?;
    }
    let worst = book
        .masks()
        .iter()
        .map(|m| m.uniformity_ratio())
        .fold(0.0f64, f64::max);
    eprintln!("{} sectors, worst uniformity ratio {worst:.3}, wrote {}", book.len(), out.display());
    Ok(())
}

fn sweep_analysis(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let book = codebook_for(cfg)?;
    let rows = sweep_comparison(&book, &cfg.channel_model(), cfg.trials, cfg.base_seed)?;
    write_sweep_csv(&rows, create(out)?)?;
    eprintln!("{} trials, wrote {}", rows.len(), out.display());
    Ok(())
}

fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(), Failure> {
    let path = out
        .or(cfg.output_path.as_deref())
        .ok_or_else(|| Failure::Config("output_path: give --out or set output_path".into()))?;
    cfg.validate()?;
    let result = run_experiment(cfg)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_experiment(cfg, &result, path)?;
    eprintln!(
        "{} rows, wrote {} and {}",
        result.rows.len(),
        path.display(),
        sidecar_path(path).display()
    );
    Ok(())
}

fn psf(
    cfg: &ExperimentConfig,
    sector: usize,
    seeds: usize,
    out: &Path,
    coherence_out: Option<&Path>,
) -> Result<(), Failure> {
    let spec = cfg.layout()?.sector(sector)?;
    let m = *cfg
        .m_list
        .first()
        .ok_or_else(|| Failure::Config("m_list: must list at least one measurement count".into()))?;
    let mut rng = stream(cfg.base_seed, 0, Stage::Analysis, 3);
    let set = match cfg.shift_kind {
        ShiftKind::Nyquist => nyquist_shifts(&spec),
        ShiftKind::Pcs => pcs_shifts(&spec, m, &mut rng)?,
        ShiftKind::Rcs => rcs_shifts(cfg.n, m, &mut rng)?,
        ShiftKind::Custom => return Err(Failure::Config("shift_kind: custom shift sets are not available here".into())),
    };
    write_psf_csv(&set, create(out)?)?;
    if let Some(p) = coherence_out {
        let rows = coherence_samples(&spec, m, seeds, cfg.base_seed)?;
        write_coherence_csv(&rows, create(p)?)?;
    }
    eprintln!("{} shifts, wrote {}", set.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // bad flags are configuration errors; --help and --version are not
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Design { cfg, out, mask_csv } => cfg.resolve().and_then(|c| design(&c, out, mask_csv.as_deref())),
        Command::SweepAnalysis { cfg, out } => cfg.resolve().and_then(|c| sweep_analysis(&c, out)),
        Command::Run { cfg, out } => cfg.resolve().and_then(|c| run(&c, out.as_deref())),
        Command::Psf {
            cfg,
            sector,
            seeds,
            out,
            coherence_out,
        } => cfg
            .resolve()
            .and_then(|c| psf(&c, *sector, *seeds, out, coherence_out.as_deref())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
