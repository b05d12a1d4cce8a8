use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use entropystop::harness::{
    build_report, load_csv, load_source, mode_stats, read_rows_csv, run_grid, run_traced, write_rows_csv, write_trace,
    DataSource, GridSpec, Mode, ModelSpec, RunConfig,
};
use entropystop::models::{AeConfig, SvddConfig};
use entropystop::synth::{replay_manifest, write_suite, InjectionKind, SuiteConfig, SuiteManifest, MANIFEST_FILE};
use entropystop::Dataset;

/// Label-free training stopping for unsupervised outlier detectors.
#[derive(Parser)]
#[command(name = "entropystop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model on one dataset and write its result and trace.
    Train(TrainArgs),
    /// Sweep an autoencoder hyperparameter grid over datasets and modes.
    Grid(GridArgs),
    /// Generate a synthetic suite with injected outliers.
    Inject(InjectArgs),
    /// Compare naive and entropy runs from sweep CSVs.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Ae,
    Svdd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Naive,
    Entropy,
    Optimal,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Naive => Mode::Naive,
            ModeArg::Entropy => Mode::Entropy,
            ModeArg::Optimal => Mode::Optimal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Local,
    Global,
    Cluster,
}

impl From<KindArg> for InjectionKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Local => InjectionKind::Local,
            KindArg::Global => InjectionKind::Global,
            KindArg::Cluster => InjectionKind::Cluster,
        }
    }
}

/// Training settings shared by `train` and `grid`. Unset flags keep the
/// config file's values, or the defaults without one.
#[derive(Args)]
struct TrainFlags {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Evaluation-set size for the entropy.
    #[arg(long)]
    n_eval: Option<usize>,
    /// Stopper patience k.
    #[arg(long)]
    patience: Option<usize>,
    /// Stopper relative-drop threshold.
    #[arg(long)]
    r_down: Option<f64>,
    /// Remove label-1 rows after loading.
    #[arg(long)]
    drop_label_1: bool,
    /// Use the features as given instead of standardizing them.
    #[arg(long)]
    no_standardize: bool,
}

impl TrainFlags {
    fn base_config(&self) -> Result<Option<RunConfig>> {
        self.config
            .as_deref()
            .map(|p| RunConfig::read(p).with_context(|| format!("reading config {}", p.display())))
            .transpose()
    }

    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(b) = self.batch_size {
            cfg.batch_size = b;
        }
        if let Some(lr) = self.lr {
            cfg.optimizer.lr = lr;
        }
        if let Some(n) = self.n_eval {
            cfg.n_eval = n;
        }
        if let Some(k) = self.patience {
            cfg.stopper.patience = k;
        }
        if let Some(r) = self.r_down {
            cfg.stopper.r_down = r;
        }
    }

    fn load(&self, path: &Path) -> Result<Dataset> {
        load_csv(path, self.drop_label_1, !self.no_standardize).with_context(|| format!("loading {}", path.display()))
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long, value_enum, default_value = "entropy")]
    mode: ModeArg,
    /// Dataset CSV; optional when the config file names its data.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainFlags,
    /// Record the entropy curve in naive and optimal mode too.
    #[arg(long)]
    track_entropy: bool,
    /// Add inlier/outlier mean losses to the trace (needs labels).
    #[arg(long)]
    diagnostics: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// `small` (16 configurations) or `full` (64; alias `paper`). `--epochs`
    /// and `--lr` replace the preset's list for that hyperparameter.
    #[arg(long, default_value = "small")]
    grid: String,
    /// Dataset CSVs or directories of them.
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "naive,entropy,optimal")]
    modes: Vec<ModeArg>,
    #[command(flatten)]
    flags: TrainFlags,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cluster")]
    kind: Vec<KindArg>,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    ratio: Vec<f64>,
    /// Inliers per dataset.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    d: usize,
    /// Mixture components.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Ground-truth mixtures; each yields one dataset per kind and ratio.
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides the per-kind default.
    #[arg(long)]
    alpha: Option<f64>,
    /// Regenerate the suite an existing manifest describes.
    #[arg(long, conflicts_with_all = ["kind", "ratio", "n", "d", "k", "count", "seed", "alpha"])]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "suite")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep CSVs written by `grid`; rows are pooled.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train(a) => train(a),
        Command::Grid(a) => grid(a),
        Command::Inject(a) => inject(a),
        Command::Report(a) => report(a),
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let file_cfg = a.flags.base_config()?;
    let ds = match (&a.data, file_cfg.as_ref().and_then(|c| c.data.as_ref())) {
        (Some(p), _) => a.flags.load(p)?,
        (None, Some(src)) => load_source(src).context("loading the config's data")?,
        (None, None) => bail!("no data: pass --data or name it in the config file"),
    };
    let d = ds.n_features();
    let mut cfg = match (file_cfg, a.model) {
        (Some(mut c), Some(kind)) => {
            c.model = default_model(kind, d);
            c
        }
        (Some(c), None) => c,
        (None, kind) => {
            let mut c = RunConfig::default_ae(d, 0);
            c.model = default_model(kind.unwrap_or(ModelKind::Ae), d);
            c
        }
    };
    a.flags.apply(&mut cfg);
    cfg.track_entropy |= a.track_entropy;
    if let Some(p) = &a.data {
        cfg.data = Some(DataSource::Csv {
            path: p.clone(),
            drop_label_1: a.flags.drop_label_1,
            standardize: !a.flags.no_standardize,
        });
    }
    let mode = Mode::from(a.mode);
    let (result, trace) = run_traced(&cfg, &ds, mode, a.diagnostics)?;

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let stem = format!("{}_{}_{}_s{}", result.dataset, mode, cfg.short_hash(), cfg.seed);
    let json = a.out.join(format!("{stem}.json"));
    let csv = a.out.join(format!("{stem}.trace.csv"));
    result.write_json(&json)?;
    write_trace(&trace, &csv)?;
    fs::write(a.out.join(format!("{stem}.config.json")), serde_json::to_string_pretty(&cfg)? + "\n")?;

    let auc = result.auc.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "{} {} {}: auc {auc}, selected iter {} of {} (max {}), {:.2}s",
        result.dataset, result.model, mode, result.selected_iter, result.total_iters, result.max_iters, result.wall_time_s
    );
    println!("wrote {} and {}", json.display(), csv.display());
    Ok(())
}

fn default_model(kind: ModelKind, d: usize) -> ModelSpec {
    match kind {
        ModelKind::Ae => ModelSpec::Ae(AeConfig::default_for(d)),
        ModelKind::Svdd => ModelSpec::Svdd(SvddConfig::default_for(d)),
    }
}

/// Files as given; directories contribute their `*.csv` files in name order.
fn expand_data(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            if found.is_empty() {
                bail!("no CSV files in {}", p.display());
            }
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn grid(a: GridArgs) -> Result<()> {
    let mut spec: GridSpec = a.grid.parse()?;
    if let Some(e) = a.flags.epochs {
        spec.epochs = vec![e];
    }
    if let Some(lr) = a.flags.lr {
        spec.lr = vec![lr];
    }
    let files = expand_data(&a.data)?;
    let datasets = files.iter().map(|p| a.flags.load(p)).collect::<Result<Vec<_>>>()?;
    let mut base = match a.flags.base_config()? {
        Some(c) => c,
        None => RunConfig::default_ae(datasets[0].n_features(), 0),
    };
    a.flags.apply(&mut base);
    base.data = None;
    let configs = spec.configs(&base)?;
    let modes: Vec<Mode> = a.modes.iter().map(|&m| m.into()).collect();
    eprintln!(
        "{} datasets x {} configurations x {} modes",
        datasets.len(),
        configs.len(),
        modes.len()
    );
    let rows = run_grid(&datasets, &configs, &modes)?;

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let stem = format!("grid_{}_{}_s{}", a.grid, base.short_hash(), base.seed);
    let runs = a.out.join(format!("{stem}.runs.csv"));
    write_rows_csv(&rows, &runs)?;
    let stats = mode_stats(&rows);
    fs::write(a.out.join(format!("{stem}.stats.json")), serde_json::to_string_pretty(&stats)? + "\n")?;

    let failed = rows.iter().filter(|r| !r.succeeded()).count();
    println!("{:<8} {:>5} {:>6} {:>9} {:>9} {:>10}", "mode", "runs", "failed", "mean_auc", "std_auc", "mean_iters");
    let f = |v: Option<f64>, p: usize| v.map_or("n/a".to_string(), |x| format!("{x:.p$}"));
    for s in &stats {
        println!(
            "{:<8} {:>5} {:>6} {:>9} {:>9} {:>10}",
            s.mode,
            s.runs,
            s.failed,
            f(s.mean_auc, 4),
            f(s.std_auc, 4),
            f(s.mean_total_iters, 1)
        );
    }
    println!("wrote {}", runs.display());
    if failed > 0 {
        eprintln!("{failed} of {} runs failed; see the error column", rows.len());
    }
    Ok(())
}

fn inject(a: InjectArgs) -> Result<()> {
    let manifest = match &a.manifest {
        Some(p) => {
            let m = SuiteManifest::read(p).with_context(|| format!("reading manifest {}", p.display()))?;
            replay_manifest(&m, &a.out)?
        }
        None => {
            let mut cfg = SuiteConfig::new(
                a.count,
                a.n,
                a.d,
                a.k,
                a.kind.iter().map(|&k| k.into()).collect(),
                a.ratio.clone(),
                a.seed,
            );
            cfg.alpha = a.alpha;
            write_suite(&cfg, &a.out)?
        }
    };
    for e in &manifest.datasets {
        println!("{}: {} rows, {} outliers", e.file, e.rows, e.outliers);
    }
    println!(
        "wrote {} datasets and {} to {}",
        manifest.datasets.len(),
        MANIFEST_FILE,
        a.out.display()
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for p in &a.runs {
        rows.extend(read_rows_csv(p).with_context(|| format!("reading {}", p.display()))?);
    }
    let rep = build_report(&rows)?;
    print!("{rep}");
    if let Some(out) = &a.out {
        rep.write_csv(fs::File::create(out).with_context(|| format!("creating {}", out.display()))?)?;
    }
    Ok(())
}
