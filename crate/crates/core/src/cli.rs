//! Command-line driver behind the `nmdf` binary.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::eval::{self, ErrorReport};
use crate::io::{self, BlockDataset, GlyphOptions};
use crate::manifold::{self, Point};
use crate::nmdf::{self, Method, Params};
use crate::synth;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Component value of the near-zero base point.
pub const NEAR_ZERO: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(name = "nmdf", version, about = "Nonnegative factorization of manifold-valued data")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cut a TFLD tensor field into voxel blocks and write a dataset.
    Ingest {
        tfld: PathBuf,
        #[arg(long, default_value = "4,4,4", value_parser = parse_block)]
        block: [usize; 3],
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a factorization at one rank.
    Factorize {
        dataset: PathBuf,
        #[arg(long, default_value = "cc-nmdf")]
        method: Method,
        #[arg(long)]
        rank: usize,
        #[command(flatten)]
        base: BaseArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a stored factorization against its dataset.
    Errors {
        dataset: PathBuf,
        fac: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Record wall-clock time (otherwise the column is 0).
        #[arg(long)]
        timing: bool,
    },
    /// Fit and evaluate over a range of ranks.
    Sweep {
        dataset: PathBuf,
        /// `lo:hi:count` (linearly spaced, rounded) or a comma-separated list.
        #[arg(long, default_value = "2:35:12", value_parser = parse_ranks)]
        ranks: RankList,
        #[arg(long, default_value = "cc-nmdf")]
        method: Method,
        #[command(flatten)]
        base: BaseArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        timing: bool,
    },
    /// Draw the manifold-valued factors of a factorization as ellipse glyphs.
    Render {
        fac: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Glyph grid per factor, `ROWSxCOLS`.
        #[arg(long, value_parser = parse_layout)]
        layout: Option<(usize, usize)>,
        /// Pixels per unit square-root eigenvalue (default: fit the largest glyph to its cell).
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Check that all log-mapped data are pairwise nonnegatively correlated at a base point.
    CheckBasepoint {
        dataset: PathBuf,
        #[command(flatten)]
        base: BaseArgs,
    },
    /// Compare the near-zero and barycenter base points at one rank.
    Compare {
        dataset: PathBuf,
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value = "cc-nmdf")]
        method: Method,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Write a synthetic diffusion-tensor field in TFLD format.
    Synth {
        #[arg(long, default_value = "8,8,8", value_parser = parse_block)]
        dims: [usize; 3],
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaseKind {
    NearZero,
    Barycenter,
    File,
}

#[derive(Debug, Args)]
struct BaseArgs {
    #[arg(long, value_enum, default_value = "near-zero")]
    basepoint: BaseKind,
    /// Point JSON, required with `--basepoint file`.
    #[arg(long)]
    basepoint_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, default_value_t = 5)]
    max_sub_iter: usize,
    /// K-means restarts for the initialization.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FitArgs {
    fn params(&self) -> Params {
        Params {
            delta: self.delta,
            max_iter: self.max_iter,
            max_sub_iter: self.max_sub_iter,
            restarts: self.restarts,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone)]
struct RankList(Vec<usize>);

fn parse_block(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [a, b, c] if a > 0 && b > 0 && c > 0 => Ok([a, b, c]),
        _ => Err("expected three positive integers, e.g. 4,4,4".into()),
    }
}

fn parse_ranks(s: &str) -> std::result::Result<RankList, String> {
    let num = |p: &str| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}"));
    let ranks = if s.contains(':') {
        let parts: Vec<usize> = s.split(':').map(num).collect::<std::result::Result<_, _>>()?;
        match parts[..] {
            [lo, hi, count] if lo >= 1 && lo <= hi && count >= 1 => eval::linspace_ranks(lo, hi, count),
            _ => return Err("expected lo:hi:count with 1 <= lo <= hi and count >= 1".into()),
        }
    } else {
        s.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>()?
    };
    if ranks.contains(&0) {
        return Err("ranks must be positive".into());
    }
    Ok(RankList(ranks))
}

fn parse_layout(s: &str) -> std::result::Result<(usize, usize), String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or("expected ROWSxCOLS, e.g. 8x8")?;
    let r: usize = r.trim().parse().map_err(|e| format!("{r:?}: {e}"))?;
    let c: usize = c.trim().parse().map_err(|e| format!("{c:?}: {e}"))?;
    Ok((r, c))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Writes through a buffer and flushes, so an I/O failure is reported rather than dropped.
fn write_to(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file =
        File::create(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn load_dataset(path: &Path) -> Result<BlockDataset> {
    let ds = io::read_dataset_json(open(path)?)?;
    if ds.points.is_empty() {
        return Err(Error::InvalidInput(format!("{}: dataset has no points", path.display())));
    }
    Ok(ds)
}

fn near_zero(ds: &BlockDataset) -> Result<Point> {
    Point::scaled_identity(&ds.descriptor, NEAR_ZERO)
}

fn barycenter(ds: &BlockDataset) -> Result<Point> {
    let b = manifold::barycenter(&ds.points, 1e-10, 200)?;
    log::info!("barycenter: {} iterations, residual {:e}", b.iterations, b.residual);
    Ok(b.point)
}

fn basepoint(ds: &BlockDataset, args: &BaseArgs) -> Result<Point> {
    match args.basepoint {
        BaseKind::NearZero => near_zero(ds),
        BaseKind::Barycenter => barycenter(ds),
        BaseKind::File => {
            let path = args
                .basepoint_file
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("--basepoint file needs --basepoint-file".into()))?;
            let q: Point = serde_json::from_reader(open(path)?)?;
            if q.descriptor() != &ds.descriptor {
                return Err(Error::ShapeMismatch("base point and dataset live on different manifolds".into()));
            }
            Ok(q)
        }
    }
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest { tfld, block, out } => {
            let field = io::parse_tfld(open(&tfld)?)?;
            let ds = io::extract_blocks(&field, block)?;
            log::info!("{} blocks on {:?}", ds.points.len(), ds.descriptor);
            if ds.points.is_empty() {
                log::warn!("no complete block in {}", tfld.display());
            }
            write_to(&out, |w| io::write_dataset_json(&ds, w))
        }
        Command::Factorize { dataset, method, rank, base, fit, out } => {
            let ds = load_dataset(&dataset)?;
            let q = basepoint(&ds, &base)?;
            let fac = eval::fit(&ds.points, &q, rank, method, &fit.params())?;
            if let Some(last) = fac.objective_trace.last() {
                log::info!("{} rank {rank}: final objective {last:e}", method.name());
            }
            write_to(&out, |w| io::write_factorization_json(&fac, w))
        }
        Command::Errors { dataset, fac, out, timing } => {
            let ds = load_dataset(&dataset)?;
            let fac = io::read_factorization_json(open(&fac)?)?;
            let start = Instant::now();
            let mut report = eval::error_report(&ds.points, &fac)?;
            report.wall_time_s = start.elapsed().as_secs_f64();
            write_to(&out, |w| io::write_report_csv(&[report], timing, w))
        }
        Command::Sweep { dataset, ranks, method, base, fit, out, timing } => {
            let ds = load_dataset(&dataset)?;
            let q = basepoint(&ds, &base)?;
            let entries = eval::rank_sweep(&ds.points, &q, &ranks.0, method, &fit.params());
            let mut reports: Vec<ErrorReport> = Vec::new();
            let mut first_err = None;
            for entry in entries {
                match entry.result {
                    Ok(r) => reports.push(r),
                    Err(e) => {
                        eprintln!("rank {} skipped: {e}", entry.rank);
                        first_err.get_or_insert(e);
                    }
                }
            }
            if reports.is_empty() {
                if let Some(e) = first_err {
                    return Err(e);
                }
            }
            write_to(&out, |w| io::write_report_csv(&reports, timing, w))
        }
        Command::Render { fac, out, layout, scale } => {
            let fac = io::read_factorization_json(open(&fac)?)?;
            let opts = GlyphOptions { layout, scale, comment: command_line() };
            let svg = io::render_glyphs(&fac.y, &opts)?;
            write_to(&out, |w| Ok(w.write_all(svg.as_bytes())?))
        }
        Command::CheckBasepoint { dataset, base } => {
            let ds = load_dataset(&dataset)?;
            let q = basepoint(&ds, &base)?;
            let check = nmdf::verify_basepoint(&ds.points, &q)?;
            println!("ok={} min_inner={:e}", check.ok, check.min_inner);
            Ok(())
        }
        Command::Compare { dataset, rank, method, fit } => {
            let ds = load_dataset(&dataset)?;
            let params = fit.params();
            println!("basepoint,ok,min_inner,exact,tangent,cc");
            for (name, q) in [("near-zero", near_zero(&ds)?), ("barycenter", barycenter(&ds)?)] {
                let check = nmdf::verify_basepoint(&ds.points, &q)?;
                let fac = eval::fit(&ds.points, &q, rank, method, &params)?;
                let r = eval::error_report(&ds.points, &fac)?;
                println!("{name},{},{:e},{},{},{}", check.ok, check.min_inner, r.exact, r.tangent, r.cc);
            }
            Ok(())
        }
        Command::Synth { dims, seed, out } => {
            let field = synth::dti_field(&mut synth::rng(seed), dims)?;
            write_to(&out, |w| io::write_tfld(&field, w))
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_DATA
    }
}

/// Parses `args` (program name first), runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_specs() {
        assert_eq!(parse_ranks("2:35:12").unwrap().0, eval::default_ranks());
        assert_eq!(parse_ranks("3, 5,8").unwrap().0, vec![3, 5, 8]);
        assert_eq!(parse_ranks("4:4:1").unwrap().0, vec![4]);
        assert!(parse_ranks("0:3:2").is_err());
        assert!(parse_ranks("5:3:2").is_err());
        assert!(parse_ranks("1,0").is_err());
    }

    #[test]
    fn block_and_layout_specs() {
        assert_eq!(parse_block("4,4,4").unwrap(), [4, 4, 4]);
        assert!(parse_block("4,4").is_err());
        assert!(parse_block("4,0,4").is_err());
        assert_eq!(parse_layout("8x8").unwrap(), (8, 8));
        assert!(parse_layout("8").is_err());
    }

    #[test]
    fn missing_files_are_data_errors() {
        assert_eq!(run(["nmdf", "ingest", "/nonexistent/field.tfld", "--out", "/nonexistent/x.json"]), EXIT_DATA);
    }

    #[test]
    fn error_classes() {
        assert_eq!(exit_code(&Error::SolverFailure("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::Parse { line: 1, reason: "x".into() }), EXIT_DATA);
    }
}
