//! Command-line interface: fit, weights, transform, phenotypes, sparsity,
//! synth, and aggregate subcommands over manifest-described datasets and
//! model archives.
//!
//! Errors print one `error: <category>: <message>` line on stderr and exit
//! nonzero. All randomness flows from `--seed`; thread count is controlled
//! by `RAYON_NUM_THREADS`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use clap::{ArgAction, Args, Parser, Subcommand};

use sicnmf::io::manifest::MatrixFormat;
use sicnmf::io::{self, archive::ArchivedModel};
use sicnmf::{
    drop_empty_rows, export_features, extract_phenotypes, render_phenotypes, sparsity_profile,
    transform_detailed, Collection, CollectionSchema, Error, Mode, NoiseModel, Result,
    SolverConfig, SourceMatrix, SynthSpec, Weighting,
};

#[derive(Parser)]
#[command(
    name = "sicnmf",
    about = "Sparse collective non-negative matrix factorization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a factorization and write a model archive.
    Fit(FitArgs),
    /// Compute divergence weights from independent single-source fits.
    Weights(WeightsArgs),
    /// Project new rows onto the factors of a fitted archive.
    Transform(TransformArgs),
    /// Export top-k phenotypes from a fitted archive.
    Phenotypes(PhenotypesArgs),
    /// Print sparsity profiles of one or more archives.
    Sparsity(SparsityArgs),
    /// Generate a planted synthetic dataset plus its ground-truth archive.
    Synth(SynthArgs),
    /// Aggregate two sources into one co-occurrence count matrix.
    Aggregate(AggregateArgs),
}

#[derive(Args)]
struct SolverFlags {
    /// Latent dimensions.
    #[arg(long, default_value_t = 20)]
    rank: usize,
    /// Fit mode: sicnmf (simplex columns + Frobenius budget) or cnmf.
    #[arg(long, default_value = "sicnmf")]
    mode: String,
    /// Frobenius budget on the loadings (sicnmf mode only).
    #[arg(long, default_value_t = 500.0)]
    eta: f64,
    /// Weight each source by its independent fit divergence.
    #[arg(long, conflicts_with = "unweighted")]
    weighted: bool,
    /// Weight every source equally (the default).
    #[arg(long)]
    unweighted: bool,
    /// Independent seeded restarts; the best final objective wins.
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Outer iteration cap.
    #[arg(long, default_value_t = 200)]
    max_outer: usize,
    /// Relative objective-change stopping threshold.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Projected-gradient steps per block update.
    #[arg(long, default_value_t = 50)]
    max_inner: usize,
    /// Inner stop relative to the block's initial projected-gradient norm.
    #[arg(long, default_value_t = 1e-4)]
    inner_tol: f64,
    /// Disable the per-feature bias factors.
    #[arg(long, action = ArgAction::SetTrue)]
    no_bias: bool,
}

impl SolverFlags {
    fn to_config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            rank: self.rank,
            mode: Mode::from_str(&self.mode)?,
            eta: self.eta,
            weighting: if self.weighted {
                Weighting::IndependentFit
            } else {
                Weighting::Uniform
            },
            restarts: self.restarts,
            max_outer: self.max_outer,
            outer_tol: self.tol,
            max_inner: self.max_inner,
            inner_tol: self.inner_tol,
            seed: self.seed,
            fit_bias: !self.no_bias,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    /// Dataset manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Output archive directory.
    #[arg(long)]
    out: PathBuf,
    /// Drop patients with no nonzero entry in any source.
    #[arg(long)]
    drop_empty_rows: bool,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct WeightsArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    drop_empty_rows: bool,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct TransformArgs {
    /// Fitted model archive.
    #[arg(long)]
    archive: PathBuf,
    /// Manifest of the rows to project.
    #[arg(long)]
    manifest: PathBuf,
    /// Output feature table path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    drop_empty_rows: bool,
    /// Relative objective-change stop for the convex loading solve.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Outer iteration cap for the loading solve.
    #[arg(long, default_value_t = 500)]
    max_outer: usize,
}

#[derive(Args)]
struct PhenotypesArgs {
    #[arg(long)]
    archive: PathBuf,
    /// Entities kept per source per phenotype; 0 keeps everything.
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SparsityArgs {
    /// Entries above this threshold count as nonzero.
    #[arg(long, default_value_t = sicnmf::DEFAULT_ZERO_THRESHOLD)]
    threshold: f64,
    /// Archives to profile.
    #[arg(required = true)]
    archives: Vec<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 300)]
    patients: usize,
    /// Comma-separated entity counts per source.
    #[arg(long, default_value = "80,40", value_delimiter = ',')]
    cols: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    rank: usize,
    /// Nonzero entities planted per factor column per source.
    #[arg(long, default_value_t = 6)]
    active: usize,
    #[arg(long, default_value_t = 4.0)]
    loading_scale: f64,
    #[arg(long, default_value_t = 0.2)]
    bias_scale: f64,
    /// Noise model: poisson, none, or gaussian:SIGMA.
    #[arg(long, default_value = "poisson")]
    noise: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write matrices as MatrixMarket instead of triplet TSV.
    #[arg(long)]
    matrix_market: bool,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Source whose columns become the rows of the aggregate.
    #[arg(long)]
    rows: String,
    /// Source whose columns become the columns of the aggregate.
    #[arg(long)]
    cols: String,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// Name of the aggregated source; defaults to "<rows>_x_<cols>".
    #[arg(long)]
    name: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let first_line = e.to_string().lines().next().unwrap_or("invalid arguments").to_string();
            eprintln!("error: usage: {first_line}");
            return ExitCode::from(2);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Weights(args) => cmd_weights(args),
        Command::Transform(args) => cmd_transform(args),
        Command::Phenotypes(args) => cmd_phenotypes(args),
        Command::Sparsity(args) => cmd_sparsity(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Aggregate(args) => cmd_aggregate(args),
    }
}

fn load_collection(manifest: &Path, drop_empty: bool) -> Result<Collection> {
    let c = io::read_collection(manifest)?;
    Ok(if drop_empty { drop_empty_rows(&c) } else { c })
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let cfg = args.solver.to_config()?;
    let collection = load_collection(&args.manifest, args.drop_empty_rows)?;
    let model = sicnmf::fit(&collection, &cfg)?;

    let archived = ArchivedModel {
        schema: CollectionSchema::of(&collection),
        patient_labels: collection.patient_labels.to_vec(),
        config: cfg,
        model,
    };
    io::write_model(&args.out, &archived)?;

    let m = &archived.model;
    println!("archive\t{}", args.out.display());
    println!("patients\t{}", collection.n_patients);
    println!("sources\t{}", collection.n_sources());
    println!("rank\t{}", m.rank);
    println!("mode\t{}", m.mode);
    println!("eta\t{}", m.eta);
    for (s, a) in archived.schema.sources.iter().zip(&m.alpha) {
        println!("alpha_{}\t{a:.16e}", s.name);
    }
    println!("outer_iterations\t{}", m.objective_trace.len().saturating_sub(1));
    if let Some(f) = m.final_objective() {
        println!("objective\t{f:.16e}");
    }
    Ok(())
}

fn cmd_weights(args: WeightsArgs) -> Result<()> {
    let cfg = args.solver.to_config()?;
    let collection = load_collection(&args.manifest, args.drop_empty_rows)?;
    let report = sicnmf::source_weight_report(&collection, &cfg)?;
    println!("source\talpha\tindependent_divergence");
    for (v, src) in collection.sources.iter().enumerate() {
        println!(
            "{}\t{:.16e}\t{:.16e}",
            src.name, report.alpha[v], report.independent_divergence[v]
        );
    }
    Ok(())
}

fn cmd_transform(args: TransformArgs) -> Result<()> {
    let archived = io::read_model(&args.archive)?;
    let rows = load_collection(&args.manifest, args.drop_empty_rows)?;

    // the loading solve is convex and deterministic: tighter defaults
    // than a full fit, no seed involved
    let cfg = SolverConfig {
        outer_tol: args.tol,
        max_outer: args.max_outer,
        rank: archived.model.rank,
        mode: archived.model.mode,
        eta: archived.model.eta,
        ..archived.config.clone()
    };

    let (loadings, objective) =
        transform_detailed(&rows, &archived.model, &archived.schema, &cfg)?;
    let table = export_features(&loadings, &rows.patient_labels)?;
    io::write_text(&args.out, &table)?;

    println!("features\t{}", args.out.display());
    println!("rows\t{}", loadings.nrows());
    println!("rank\t{}", loadings.ncols());
    println!("objective\t{objective:.16e}");
    Ok(())
}

fn cmd_phenotypes(args: PhenotypesArgs) -> Result<()> {
    let archived = io::read_model(&args.archive)?;
    let k = if args.top_k == 0 { None } else { Some(args.top_k) };
    let set = extract_phenotypes(&archived.model, &archived.schema, k)?;
    let text = render_phenotypes(&set);
    match &args.out {
        Some(path) => io::write_text(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_sparsity(args: SparsityArgs) -> Result<()> {
    println!("archive\teta\tphenotype\tsource\tnnz");
    for path in &args.archives {
        let archived = io::read_model(path)?;
        let profile = sparsity_profile(&archived.model, args.threshold);
        let name = path.display();
        let eta = archived.model.eta;
        for k in 0..archived.model.rank {
            for (v, s) in archived.schema.sources.iter().enumerate() {
                println!("{name}\t{eta}\t{}\t{}\t{}", k + 1, s.name, profile.per_source_nnz[v][k]);
            }
            println!("{name}\t{eta}\t{}\tall\t{}", k + 1, profile.per_phenotype_nnz[k]);
        }
        println!("{name}\t{eta}\tmedian\tall\t{}", profile.median_nnz);
    }
    Ok(())
}

fn parse_noise(s: &str) -> Result<NoiseModel> {
    match s {
        "poisson" => Ok(NoiseModel::Poisson),
        "none" => Ok(NoiseModel::None),
        other => {
            if let Some(sigma) = other.strip_prefix("gaussian:") {
                let sigma: f64 = sigma.parse().map_err(|_| {
                    Error::Config(format!("cannot parse gaussian sigma {sigma:?}"))
                })?;
                Ok(NoiseModel::Gaussian(sigma))
            } else {
                Err(Error::Config(format!(
                    "unknown noise model {other:?} (expected poisson, none, or gaussian:SIGMA)"
                )))
            }
        }
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_patients: args.patients,
        source_cols: args.cols.clone(),
        rank: args.rank,
        active_per_column: args.active,
        loading_scale: args.loading_scale,
        bias_scale: args.bias_scale,
        noise: parse_noise(&args.noise)?,
        seed: args.seed,
    };
    let (collection, truth) = sicnmf::generate(&spec)?;

    let format = if args.matrix_market {
        MatrixFormat::MatrixMarket
    } else {
        MatrixFormat::TripletTsv
    };
    let manifest_path = io::write_collection(&args.out, &collection, format)?;

    let truth_cfg = SolverConfig {
        rank: spec.rank,
        mode: truth.mode,
        eta: truth.eta,
        seed: spec.seed,
        ..SolverConfig::default()
    };
    let archived = ArchivedModel {
        schema: CollectionSchema::of(&collection),
        patient_labels: collection.patient_labels.to_vec(),
        config: truth_cfg,
        model: truth,
    };
    io::write_model(&args.out.join("truth"), &archived)?;

    println!("manifest\t{}", manifest_path.display());
    println!("truth\t{}", args.out.join("truth").display());
    println!("patients\t{}", collection.n_patients);
    for src in &collection.sources {
        println!("source\t{}\t{}\t{}", src.name, src.n_cols, src.nnz());
    }
    Ok(())
}

fn cmd_aggregate(args: AggregateArgs) -> Result<()> {
    let collection = load_collection(&args.manifest, false)?;
    let find = |name: &str| -> Result<&SourceMatrix> {
        collection
            .sources
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Config(format!("manifest has no source named {name:?}")))
    };
    let a = find(&args.rows)?;
    let b = find(&args.cols)?;
    let mut agg = io::aggregate_cooccurrence(a, b)?;
    if let Some(name) = args.name {
        agg.name = name;
    }

    let out_collection = Collection {
        n_patients: agg.n_rows,
        patient_labels: Arc::clone(&agg.row_labels),
        sources: vec![agg],
    };
    let manifest_path =
        io::write_collection(&args.out, &out_collection, MatrixFormat::TripletTsv)?;
    println!("manifest\t{}", manifest_path.display());
    println!("rows\t{}", out_collection.n_patients);
    println!("cols\t{}", out_collection.sources[0].n_cols);
    println!("nnz\t{}", out_collection.sources[0].nnz());
    Ok(())
}
