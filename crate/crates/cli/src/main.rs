//! `dsnorm`: build, normalize and compare Gaussian-kernel affinity matrices.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use dsnorm::datagen::{
    add_ball_noise, add_gaussian_hetero_noise, gen_circle, gen_scrna, read_labels,
    read_matrix_market, subsample_indices, write_labels, BallNoiseSpec, CircleSpec,
    GaussianHeteroNoiseSpec, LabeledDataset, RngSeed, ScrnaSpec,
};
use dsnorm::experiments::{
    geometric_grid, probe_epsilon, run_convergence_study, run_eigen_study, run_labeled_study,
    ConvergenceStudySpec, EigenStudySpec, ScrnaStudyConfig,
};
use dsnorm::io::{
    fmt_f64, read_data_csv, read_matrix_csv, read_vector_csv, write_data_csv, write_matrix_csv,
    write_table, write_vector_csv,
};
use dsnorm::kernel::{gaussian_kernel, KernelMatrix};
use dsnorm::linalg::{Matrix, SymMatrix, Vector};
use dsnorm::normalize::{self, AffinityMatrix, SinkhornConfig, Variant};
use dsnorm::spectral::{decompose, embed2d};
use dsnorm::Error;

#[derive(Parser, Debug)]
#[command(
    name = "dsnorm",
    version,
    about = "Gaussian-kernel affinities and their normalizations"
)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// `key = value` file supplying defaults for the subcommand's flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Data CSV (one point per row) to Gaussian kernel CSV.
    Kernel {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kernel CSV to affinity CSV plus scaling vector.
    Normalize(NormalizeArgs),
    /// Smallest kernel width on a geometric grid at which Sinkhorn converges.
    ProbeEpsilon {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        lo: f64,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
        #[arg(long, default_value_t = 25)]
        count: usize,
        #[command(flatten)]
        sinkhorn: SinkhornArgs,
        /// Also write every tried width to this CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic data.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Matrix Market counts (genes x cells) to a data CSV of cells.
    IngestMtx {
        #[arg(long)]
        mtx: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Label sidecar: one integer per cell, in column order.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Where to write the labels of the kept cells.
        #[arg(long)]
        labels_out: Option<PathBuf>,
        /// Per-label sample sizes, e.g. `0:1000,1:1000`.
        #[arg(long, requires = "labels")]
        sample: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep raw counts instead of scaling each cell to sum to one.
        #[arg(long)]
        raw: bool,
    },
    /// Affinity CSV to a 2D spectral embedding CSV.
    Embed {
        #[arg(long)]
        affinity: PathBuf,
        #[arg(long, value_enum)]
        variant: VariantArg,
        /// Scaling vector written by `normalize`; required for the row variant.
        #[arg(long)]
        scaling: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the three leading eigenvalues here.
        #[arg(long)]
        eigenvalues: Option<PathBuf>,
    },
    /// Run a study and write its CSVs.
    #[command(subcommand)]
    Study(StudyCmd),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Row,
    #[value(alias = "symmetric")]
    Sym,
    Doubly,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Row => Variant::Row,
            VariantArg::Sym => Variant::Symmetric,
            VariantArg::Doubly => Variant::Doubly,
        }
    }
}

#[derive(Args, Debug)]
struct SinkhornArgs {
    /// Stopping tolerance on the ratio gap.
    #[arg(long, default_value_t = 1e-12)]
    delta: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iters: usize,
}

impl SinkhornArgs {
    fn config(&self) -> dsnorm::Result<SinkhornConfig> {
        SinkhornConfig::new(self.delta, self.max_iters)
    }
}

#[derive(Args, Debug)]
struct NormalizeArgs {
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long, value_enum)]
    variant: VariantArg,
    #[arg(long)]
    out: PathBuf,
    /// Scaling vector output (default: `<out stem>_scaling.csv`).
    #[arg(long)]
    scaling: Option<PathBuf>,
    /// Sinkhorn report output as `key,value` rows (doubly only).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Kernel width the kernel file was built with; kept as metadata.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[command(flatten)]
    sinkhorn: SinkhornArgs,
}

#[derive(Subcommand, Debug)]
enum SimulateCmd {
    /// Unit circle in a random 2-plane of R^m, optionally noisy.
    Circle {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = NoiseArg::None)]
        noise: NoiseArg,
        #[arg(long)]
        out: PathBuf,
        /// Clean points, when noise is added.
        #[arg(long)]
        clean_out: Option<PathBuf>,
        /// Sampled angles, one per line.
        #[arg(long)]
        thetas_out: Option<PathBuf>,
    },
    /// Two-batch multinomial expression data with cell-type labels.
    Scrna {
        #[arg(long, default_value_t = 4000)]
        m: usize,
        /// Cells per group: type 0, type 1 at low depth, type 1 at high depth.
        #[arg(long, value_delimiter = ',', default_values_t = [500, 250, 250])]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        labels_out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NoiseArg {
    None,
    /// Heteroskedastic Gaussian noise with default ranges.
    Gaussian,
    /// Angle-dependent uniform ball noise with default radii.
    Ball,
}

#[derive(Subcommand, Debug)]
enum StudyCmd {
    /// Clean-vs-noisy Frobenius error against ambient dimension.
    Convergence {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [100, 316, 1000, 3162])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Inclusive m range of the slope fit, e.g. `1000,3162`.
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<usize>>,
        #[command(flatten)]
        sinkhorn: SinkhornArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leading eigenvectors of clean vs. ball-noised circle data.
    Eigen {
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        m: usize,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[command(flatten)]
        sinkhorn: SinkhornArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// kNN cell-type inconsistency of each normalization.
    Scrna {
        /// Labeled data CSV; simulated when absent.
        #[arg(long, requires = "labels")]
        data: Option<PathBuf>,
        #[arg(long, requires = "data")]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        m: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [100, 50, 50])]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 20)]
        k_max: usize,
        #[command(flatten)]
        sinkhorn: SinkhornArgs,
        #[arg(long)]
        out: PathBuf,
        /// Directory for log10 affinity dumps.
        #[arg(long)]
        dump_dir: Option<PathBuf>,
    },
}

fn read_kernel(path: &Path, epsilon: f64) -> dsnorm::Result<KernelMatrix> {
    KernelMatrix::from_gram(SymMatrix::try_from_matrix(read_matrix_csv(path)?)?, epsilon)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn run_normalize(a: &NormalizeArgs) -> dsnorm::Result<()> {
    let k = read_kernel(&a.kernel, a.epsilon)?;
    let w = match Variant::from(a.variant) {
        Variant::Row => normalize::row_stochastic(&k)?,
        Variant::Symmetric => normalize::symmetric_normalize(&k)?,
        Variant::Doubly => {
            let (w, report) = normalize::sinkhorn_symmetric(&k, &a.sinkhorn.config()?)?;
            let rows = [
                ("iters", report.iters.to_string()),
                ("final_ratio_gap", fmt_f64(report.final_ratio_gap)),
                ("converged", report.converged.to_string()),
                ("rate_estimate", fmt_f64(report.rate_estimate)),
            ];
            for (key, v) in &rows {
                println!("{key}: {v}");
            }
            if let Some(p) = &a.report {
                write_table(
                    p,
                    &["key", "value"],
                    rows.iter().map(|(k, v)| vec![k.to_string(), v.clone()]),
                )?;
            }
            w
        }
    };
    write_matrix_csv(&a.out, &w.to_matrix())?;
    let scaling = a
        .scaling
        .clone()
        .unwrap_or_else(|| sibling(&a.out, "scaling"));
    write_vector_csv(scaling, w.scaling())
}

fn run_embed(
    affinity: &Path,
    variant: Variant,
    scaling: Option<&Path>,
    out: &Path,
    eigenvalues: Option<&Path>,
) -> dsnorm::Result<()> {
    let m = read_matrix_csv(affinity)?;
    let s = match scaling {
        Some(p) => read_vector_csv(p)?,
        None if variant == Variant::Row => {
            return Err(Error::Input(
                "the row variant needs --scaling (inverse kernel row sums)".into(),
            ))
        }
        None => Vector::new(vec![1.0; m.rows()]),
    };
    // The width is not needed for the spectrum.
    let w = AffinityMatrix::from_parts(m, variant, s, 1.0)?;
    let dec = decompose(&w, 3)?;
    let emb = embed2d(&dec)?;
    let coords: Vec<Vec<f64>> = emb.coords.iter().map(|c| c.to_vec()).collect();
    write_matrix_csv(out, &Matrix::from_rows(&coords)?)?;
    if let Some(p) = eigenvalues {
        write_vector_csv(p, &dec.eigenvalues)?;
    }
    Ok(())
}

fn parse_sample(spec: &str) -> dsnorm::Result<Vec<(i64, usize)>> {
    spec.split(',')
        .map(|part| {
            let (l, c) = part.split_once(':').ok_or_else(|| {
                Error::Input(format!("sample entry `{part}` is not `label:count`"))
            })?;
            let bad = || Error::Input(format!("sample entry `{part}` is not `label:count`"));
            Ok((
                l.trim().parse().map_err(|_| bad())?,
                c.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

fn three_counts(counts: &[usize]) -> dsnorm::Result<[usize; 3]> {
    counts
        .try_into()
        .map_err(|_| Error::Input(format!("--counts takes three values, got {}", counts.len())))
}

fn run(cli: Cli) -> dsnorm::Result<()> {
    match cli.command {
        Cmd::Kernel { data, epsilon, out } => {
            let k = gaussian_kernel(&read_data_csv(data)?, epsilon)?;
            write_matrix_csv(out, &k.gram().to_matrix())
        }
        Cmd::Normalize(a) => run_normalize(&a),
        Cmd::ProbeEpsilon {
            data,
            lo,
            hi,
            count,
            sinkhorn,
            out,
        } => {
            let x = read_data_csv(data)?;
            let r = probe_epsilon(&x, &geometric_grid(lo, hi, count)?, &sinkhorn.config()?)?;
            if let Some(p) = out {
                write_table(
                    p,
                    &["epsilon", "converged", "iters"],
                    r.outcomes.iter().map(|o| {
                        vec![
                            fmt_f64(o.epsilon),
                            o.converged.to_string(),
                            o.iters.to_string(),
                        ]
                    }),
                )?;
            }
            match r.smallest_convergent {
                Some(e) => {
                    println!("{}", fmt_f64(e));
                    Ok(())
                }
                None => Err(Error::Study(format!(
                    "Sinkhorn converged for no width in [{lo}, {hi}]; increase epsilon"
                ))),
            }
        }
        Cmd::Simulate(SimulateCmd::Circle {
            n,
            m,
            seed,
            noise,
            out,
            clean_out,
            thetas_out,
        }) => {
            let seed = RngSeed(seed);
            let c = gen_circle(&CircleSpec::new(n, m), seed.derive(&[0]))?;
            let noisy = match noise {
                NoiseArg::None => c.points.clone(),
                NoiseArg::Gaussian => {
                    add_gaussian_hetero_noise(
                        &c.points,
                        &GaussianHeteroNoiseSpec::default(),
                        seed.derive(&[1]),
                    )?
                    .0
                }
                NoiseArg::Ball => add_ball_noise(
                    &c.points,
                    &c.thetas,
                    &BallNoiseSpec::default(),
                    seed.derive(&[1]),
                )?,
            };
            write_data_csv(out, &noisy)?;
            if let Some(p) = clean_out {
                write_data_csv(p, &c.points)?;
            }
            if let Some(p) = thetas_out {
                write_vector_csv(p, &c.thetas)?;
            }
            Ok(())
        }
        Cmd::Simulate(SimulateCmd::Scrna {
            m,
            counts,
            seed,
            out,
            labels_out,
        }) => {
            let spec = ScrnaSpec::two_batch_scaled(m, three_counts(&counts)?);
            let ds = gen_scrna(&spec, RngSeed(seed))?;
            write_data_csv(out, &ds.data)?;
            write_labels(labels_out, &ds.labels)
        }
        Cmd::IngestMtx {
            mtx,
            out,
            labels,
            labels_out,
            sample,
            seed,
            raw,
        } => {
            let counts = read_matrix_market(&mtx)?;
            let labels = labels.map(read_labels).transpose()?;
            if let Some(l) = &labels {
                if l.len() != counts.n_cells() {
                    return Err(Error::Dimension(format!(
                        "{} labels for {} cells",
                        l.len(),
                        counts.n_cells()
                    )));
                }
            }
            let (counts, labels) = match (sample.as_deref(), labels) {
                (Some(s), Some(l)) => {
                    let idx = subsample_indices(&l, &parse_sample(s)?, RngSeed(seed))?;
                    let kept = idx.iter().map(|&i| l[i]).collect();
                    (counts.select_cells(&idx)?, Some(kept))
                }
                (_, l) => (counts, l),
            };
            write_data_csv(out, &counts.to_data(!raw)?)?;
            match (labels_out, labels) {
                (Some(p), Some(l)) => write_labels(p, &l),
                (Some(_), None) => Err(Error::Input("--labels-out needs --labels".into())),
                _ => Ok(()),
            }
        }
        Cmd::Embed {
            affinity,
            variant,
            scaling,
            out,
            eigenvalues,
        } => run_embed(
            &affinity,
            variant.into(),
            scaling.as_deref(),
            &out,
            eigenvalues.as_deref(),
        ),
        Cmd::Study(StudyCmd::Convergence {
            n,
            dims,
            trials,
            epsilon,
            seed,
            window,
            sinkhorn,
            out,
        }) => {
            let spec = ConvergenceStudySpec {
                n,
                dims,
                trials,
                epsilon,
                noise: GaussianHeteroNoiseSpec::default(),
                seed: RngSeed(seed),
                sinkhorn: sinkhorn.config()?,
                fit_window: match window.as_deref() {
                    None => None,
                    Some(&[lo, hi]) => Some((lo, hi)),
                    Some(_) => return Err(Error::Input("--window takes two values: lo,hi".into())),
                },
            };
            let r = run_convergence_study(&spec)?;
            r.export_csv(&out)?;
            for (v, s) in &r.slopes {
                println!("{v}: {}", s.map_or_else(|| "undefined".into(), fmt_f64));
            }
            Ok(())
        }
        Cmd::Study(StudyCmd::Eigen {
            n,
            m,
            epsilon,
            seed,
            k,
            sinkhorn,
            out,
        }) => {
            let mut spec =
                EigenStudySpec::new(n, m, epsilon, BallNoiseSpec::default(), RngSeed(seed));
            spec.k = k;
            spec.sinkhorn = sinkhorn.config()?;
            let r = run_eigen_study(&spec)?;
            r.export_csv(&out)?;
            for v in &r.variants {
                println!("{}: {}", v.variant, fmt_f64(v.subspace_affinity));
            }
            Ok(())
        }
        Cmd::Study(StudyCmd::Scrna {
            data,
            labels,
            m,
            counts,
            seed,
            epsilon,
            k_max,
            sinkhorn,
            out,
            dump_dir,
        }) => {
            let ds = match (data, labels) {
                (Some(d), Some(l)) => LabeledDataset::new(read_data_csv(d)?, read_labels(l)?)?,
                _ => gen_scrna(
                    &ScrnaSpec::two_batch_scaled(m, three_counts(&counts)?),
                    RngSeed(seed),
                )?,
            };
            let cfg = ScrnaStudyConfig {
                epsilon,
                k_max,
                sinkhorn: sinkhorn.config()?,
            };
            let r = run_labeled_study(&ds, &cfg)?;
            r.export_csv(&out)?;
            if let Some(dir) = dump_dir {
                r.dump_log10(dir)?;
            }
            for c in &r.curves {
                println!("{} k=1: {}", c.variant, fmt_f64(c.values[0]));
            }
            Ok(())
        }
    }
}

fn command() -> clap::Command {
    fn overriding(cmd: clap::Command) -> clap::Command {
        let names: Vec<String> = cmd
            .get_subcommands()
            .map(|s| s.get_name().to_string())
            .collect();
        names
            .into_iter()
            .fold(cmd.args_override_self(true), |c, name| {
                c.mut_subcommand(name, overriding)
            })
    }
    overriding(Cli::command())
}

fn subcommand_path(m: &clap::ArgMatches) -> Vec<String> {
    let mut path = Vec::new();
    let mut cur = m;
    while let Some((name, sub)) = cur.subcommand() {
        path.push(name.to_string());
        cur = sub;
    }
    path
}

/// Exit 1 for usage and input errors, 2 for numerical failures.
fn parse_args(argv: Vec<String>) -> Result<Cli, ExitCode> {
    let fail = |e: clap::Error| {
        let _ = e.print();
        if e.use_stderr() {
            ExitCode::from(1)
        } else {
            ExitCode::SUCCESS
        }
    };
    let cmd = command();
    // A lenient first pass finds the config file and the subcommand even when
    // required flags are still missing from the command line.
    let argv = match cmd.clone().ignore_errors(true).try_get_matches_from(&argv) {
        Ok(pre) => match pre.get_one::<PathBuf>("config") {
            Some(path) => config::read_config(path)
                .and_then(|pairs| config::merge(&cmd, &argv, &subcommand_path(&pre), &pairs))
                .map_err(|msg| {
                    eprintln!("error: {msg}");
                    ExitCode::from(1)
                })?,
            None => argv,
        },
        Err(_) => argv,
    };
    let matches = cmd.try_get_matches_from(argv).map_err(fail)?;
    Cli::from_arg_matches(&matches).map_err(fail)
}

fn main() -> ExitCode {
    let cli = match parse_args(std::env::args().collect()) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .expect("thread pool configured once");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
