//! Command-line front end: `estimate`, `benchmark`, `verify`, `generate`.
//!
//! Exit codes: 0 success, 1 verification mismatch, 2 input error.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::doc::DocMode;
use crate::error::{Error, Result};
use crate::harness::{
    aggregate, bootstrap_estimates, estimate_accuracy, format_aggregate_table, format_percent_cell, format_ranking,
    percentile_interval, rank_methods, run_benchmark, BenchmarkConfig, DimensionData, Method,
};
use crate::io::{load_dump_as, write_aggregate_csv, write_dump, write_runs_csv, DumpFormat};
use crate::ordering::{predicted_classes, predicted_isomorphic, Checker, OrderingVerdict};
use crate::par::Execution;
use crate::score::ScoreFunctionId;
use crate::seed;
use crate::simplex::{Convention, PredictionSet};
use crate::synth::{generate, make_shift_pair, GeneratorSpec, Shift};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "atc", version, about = "Accuracy estimation from softmax outputs by average thresholded confidence")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate target accuracy from a labeled source dump and a target dump.
    Estimate(EstimateArgs),
    /// Bootstrap benchmark of estimators over one dump pair per dimension.
    Benchmark(BenchmarkArgs),
    /// Check which score functions induce the same ordering on the simplex.
    Verify(VerifyArgs),
    /// Write a synthetic prediction dump.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodFamily {
    Atc,
    Doc,
    DocReg,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Dump format; guessed from the extension when omitted.
    #[arg(long)]
    pub format: Option<DumpFormat>,
    /// Reject rows whose components do not sum to 1 within 1e-9.
    #[arg(long)]
    pub no_renormalize: bool,
}

impl InputArgs {
    fn load(&self, path: &Path) -> Result<PredictionSet> {
        let format = self.format.unwrap_or_else(|| DumpFormat::from_path(path));
        load_dump_as(path, format, !self.no_renormalize).map_err(|e| with_path(e, path))
    }
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io(_) => e,
        other => Error::InvalidConfig(format!("{}: {other}", path.display())),
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Labeled source dump.
    #[arg(long)]
    pub source: PathBuf,
    /// Target dump; labels are ignored.
    #[arg(long)]
    pub target: PathBuf,
    /// Score function id or `all`.
    #[arg(long, default_value = "all")]
    pub score: String,
    #[arg(long, value_enum, default_value = "atc")]
    pub method: MethodFamily,
    #[arg(long, default_value = "accuracy")]
    pub convention: Convention,
    /// Bootstrap resamples of the source split; 0 disables.
    #[arg(long, default_value_t = 0)]
    pub boot: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub ci: f64,
    /// Labeled calibration dumps for doc-reg.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub calibration: Vec<PathBuf>,
    /// Print one JSON record per estimate.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// `VALIDATION,TEST[,CALIBRATION...]` dumps for one dimension; repeatable.
    #[arg(long = "pair", value_name = "VAL,TEST[,CAL...]")]
    pub pairs: Vec<String>,
    /// Use generated data instead of dumps.
    #[arg(long, conflicts_with = "pairs")]
    pub synthetic: bool,
    /// Class counts for synthetic data.
    #[arg(long, value_delimiter = ',', default_value = "6")]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.8)]
    pub accuracy: f64,
    #[arg(long, default_value_t = 5.0)]
    pub concentration: f64,
    /// Temperature of the synthetic test split.
    #[arg(long, default_value_t = 1.5)]
    pub temperature: f64,
    /// Synthetic calibration splits generated for doc-reg.
    #[arg(long, default_value_t = 4)]
    pub calibration_sets: usize,
    #[arg(long, default_value_t = 1000)]
    pub boot: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated methods; defaults to the six ATC variants and doc.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 0.95)]
    pub ci: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Leave k = 2 out of the ranking.
    #[arg(long)]
    pub exclude_binary: bool,
    /// Means closer than this count as tied in the ranking.
    #[arg(long, default_value_t = 1e-10)]
    pub precision: f64,
    /// Run bootstrap iterations on one thread.
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Random simplex points checked pairwise.
    #[arg(long, default_value_t = 2000)]
    pub points: usize,
    /// Extra pairs for the counterexample search (grid first, then random).
    #[arg(long, default_value_t = 100_000)]
    pub budget: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Restrict to one pair, e.g. `l2n,l2u`.
    #[arg(long, value_name = "A,B", value_parser = parse_id_pair)]
    pub pair: Option<(ScoreFunctionId, ScoreFunctionId)>,
    #[arg(long, default_value_t = crate::ordering::DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub sequential: bool,
}

fn parse_id_pair(s: &str) -> std::result::Result<(ScoreFunctionId, ScoreFunctionId), String> {
    match s.split(',').collect::<Vec<_>>()[..] {
        [a, b] => Ok((a.trim().parse()?, b.trim().parse()?)),
        _ => Err(format!("expected two comma-separated score ids, got '{s}'")),
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.8)]
    pub accuracy: f64,
    #[arg(long, default_value_t = 5.0)]
    pub concentration: f64,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<DumpFormat>,
    /// Omit the label column.
    #[arg(long)]
    pub no_labels: bool,
}

/// Runs a parsed command, writing human or JSON output to `out`. Returns
/// the process exit code; errors map to [`EXIT_INPUT`] in `main`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Estimate(a) => cmd_estimate(&a, out),
        Command::Benchmark(a) => cmd_benchmark(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Generate(a) => cmd_generate(&a, out),
    }
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

#[derive(Debug, Serialize)]
struct EstimateRecord {
    method: Method,
    convention: Convention,
    estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    boot_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci_high: Option<f64>,
}

fn cmd_estimate(a: &EstimateArgs, out: &mut dyn Write) -> Result<i32> {
    if a.boot > 0 && !(a.ci > 0.0 && a.ci < 1.0) {
        return Err(Error::InvalidConfig(format!("ci must be in (0, 1), got {}", a.ci)));
    }
    let methods: Vec<Method> = match a.method {
        MethodFamily::Atc if a.score == "all" => ScoreFunctionId::ALL.into_iter().map(Method::Atc).collect(),
        MethodFamily::Atc => vec![Method::Atc(a.score.parse().map_err(Error::InvalidConfig)?)],
        MethodFamily::Doc => vec![Method::Doc(DocMode::Naive)],
        MethodFamily::DocReg => vec![Method::Doc(DocMode::Regression)],
    };
    let source = a.input.load(&a.source)?;
    if !source.is_labeled() {
        return Err(Error::MissingLabels);
    }
    let target = a.input.load(&a.target)?.without_labels();
    let calibration = a
        .calibration
        .iter()
        .map(|p| a.input.load(p))
        .collect::<Result<Vec<_>>>()?;

    for method in methods {
        let est = estimate_accuracy(method, &source, &target, &calibration)?.to(a.convention);
        let mut rec = EstimateRecord {
            method,
            convention: a.convention,
            estimate: est.value(),
            boot_mean: None,
            ci_low: None,
            ci_high: None,
        };
        if a.boot > 0 {
            let mut boots = bootstrap_estimates(method, &source, &target, &calibration, a.boot, a.seed, Execution::Parallel)?;
            if a.convention == Convention::Error {
                boots.iter_mut().for_each(|x| *x = 1.0 - *x);
            }
            let (lo, hi) = percentile_interval(&boots, a.ci);
            rec.boot_mean = Some(boots.iter().sum::<f64>() / boots.len() as f64);
            rec.ci_low = Some(lo);
            rec.ci_high = Some(hi);
        }
        if a.json {
            writeln!(out, "{}", serde_json::to_string(&rec).expect("serializable"))?;
        } else {
            write!(out, "{:<8} {} {:.2}%", method.display_name(), a.convention, 100.0 * rec.estimate)?;
            if let (Some(m), Some(lo), Some(hi)) = (rec.boot_mean, rec.ci_low, rec.ci_high) {
                write!(out, "  bootstrap {}", format_percent_cell(m, lo, hi))?;
            }
            writeln!(out)?;
        }
    }
    Ok(EXIT_OK)
}

fn synthetic_dimension(a: &BenchmarkArgs, k: usize, need_calibration: bool) -> Result<DimensionData> {
    let spec = GeneratorSpec::new(k, a.n, a.accuracy, seed::derive(&[a.seed, k as u64]))
        .with_concentration(a.concentration);
    let (val, test) = make_shift_pair(&spec, Shift::temperature(a.temperature))?;
    let mut data = DimensionData::new(val, test);
    if need_calibration {
        // Calibration temperatures spread evenly over (1, 1 + 2|T - 1|].
        let span = 2.0 * (a.temperature - 1.0).abs().max(0.25);
        let calibration = (0..a.calibration_sets)
            .map(|j| {
                let t = 1.0 + span * (j + 1) as f64 / a.calibration_sets as f64;
                generate(
                    &spec
                        .clone()
                        .with_seed(seed::derive(&[spec.seed, 0x0063_616c_6962, j as u64]))
                        .with_shift(Shift::temperature(t)),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        data = data.with_calibration(calibration);
    }
    Ok(data)
}

fn load_pair(a: &BenchmarkArgs, spec: &str) -> Result<DimensionData> {
    let paths: Vec<&str> = spec.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if paths.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "--pair needs VAL,TEST[,CAL...], got '{spec}'"
        )));
    }
    let mut sets = paths
        .iter()
        .map(|p| a.input.load(Path::new(p)))
        .collect::<Result<Vec<_>>>()?;
    let rest = sets.split_off(2);
    let test = sets.pop().unwrap();
    let val = sets.pop().unwrap();
    Ok(DimensionData::new(val, test).with_calibration(rest))
}

fn cmd_benchmark(a: &BenchmarkArgs, out: &mut dyn Write) -> Result<i32> {
    let config = BenchmarkConfig {
        methods: if a.methods.is_empty() {
            Method::default_set()
        } else {
            a.methods.clone()
        },
        n_boot: a.boot,
        ci_level: a.ci,
        master_seed: a.seed,
        execution: execution(a.sequential),
    };
    config.validate()?;
    let need_calibration = config.methods.contains(&Method::Doc(DocMode::Regression));
    let data: Vec<DimensionData> = if a.synthetic {
        let mut ks = a.k.clone();
        ks.sort_unstable();
        ks.dedup();
        ks.iter()
            .map(|&k| synthetic_dimension(a, k, need_calibration))
            .collect::<Result<_>>()?
    } else {
        if a.pairs.is_empty() {
            return Err(Error::InvalidConfig("give --pair at least once, or --synthetic".into()));
        }
        let mut d = a.pairs.iter().map(|p| load_pair(a, p)).collect::<Result<Vec<_>>>()?;
        d.sort_by_key(DimensionData::dimension);
        if d.windows(2).any(|w| w[0].dimension() == w[1].dimension()) {
            return Err(Error::InvalidConfig("two --pair entries share a class count".into()));
        }
        d
    };

    let records = run_benchmark(&data, &config)?;
    let rows = aggregate(&records, config.ci_level);

    fs::create_dir_all(&a.out_dir)?;
    let runs_path = a.out_dir.join("runs.csv");
    let agg_path = a.out_dir.join("aggregate.csv");
    write_runs_csv(File::create(&runs_path)?, &records)?;
    write_aggregate_csv(File::create(&agg_path)?, &rows)?;

    writeln!(out, "mean absolute error in percent [{:.0}% interval]", 100.0 * config.ci_level)?;
    write!(out, "{}", format_aggregate_table(&rows))?;
    writeln!(out)?;
    write!(out, "{}", format_ranking(&rank_methods(&rows, a.precision, a.exclude_binary)))?;
    writeln!(out, "wrote {} and {}", runs_path.display(), agg_path.display())?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct PairRecord {
    a: ScoreFunctionId,
    b: ScoreFunctionId,
    k: usize,
    predicted_isomorphic: bool,
    verdict: OrderingVerdict,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    k: usize,
    pairs: Vec<PairRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    classes: Option<Vec<Vec<ScoreFunctionId>>>,
    predicted_classes: Vec<Vec<ScoreFunctionId>>,
    matches_prediction: bool,
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    if a.k < 2 {
        return Err(Error::InvalidConfig(format!("k must be >= 2, got {}", a.k)));
    }
    if a.points < 2 {
        return Err(Error::InvalidConfig("--points must be >= 2".into()));
    }
    let checker = Checker::default().with_eps(a.eps).with_execution(execution(a.sequential));
    let ids = ScoreFunctionId::ALL;
    let pairs: Vec<(ScoreFunctionId, ScoreFunctionId)> = match &a.pair {
        Some(p) => vec![*p],
        None => (0..ids.len())
            .flat_map(|i| (i + 1..ids.len()).map(move |j| (ids[i], ids[j])))
            .collect(),
    };
    let records = pairs
        .into_iter()
        .map(|(x, y)| {
            Ok(PairRecord {
                a: x,
                b: y,
                k: a.k,
                predicted_isomorphic: predicted_isomorphic(x, y, a.k),
                verdict: checker.compare(&x, &y, a.k, a.points, a.budget, a.seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let predicted = predicted_classes(a.k);
    let classes = a.pair.is_none().then(|| {
        let consistent = |x: ScoreFunctionId, y: ScoreFunctionId| {
            records
                .iter()
                .any(|r| ((r.a, r.b) == (x, y) || (r.a, r.b) == (y, x)) && r.verdict.is_consistent())
        };
        crate::ordering::components(ids.len(), |i, j| consistent(ids[i], ids[j]))
            .into_iter()
            .map(|c| c.into_iter().map(|i| ids[i]).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    });
    let matches = records
        .iter()
        .all(|r| r.verdict.is_consistent() == r.predicted_isomorphic)
        && classes.as_ref().is_none_or(|c| *c == predicted);

    let report = VerifyReport {
        k: a.k,
        pairs: records,
        classes,
        predicted_classes: predicted,
        matches_prediction: matches,
    };
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("serializable"))?;
    } else {
        write_verify_human(&report, out)?;
    }
    Ok(if matches { EXIT_OK } else { EXIT_MISMATCH })
}

fn class_string(classes: &[Vec<ScoreFunctionId>]) -> String {
    classes
        .iter()
        .map(|c| format!("{{{}}}", c.iter().map(|id| id.name()).collect::<Vec<_>>().join(", ")))
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_verify_human(r: &VerifyReport, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "k = {}", r.k)?;
    for p in &r.pairs {
        let status = if p.verdict.is_consistent() {
            "consistent"
        } else {
            "counterexample"
        };
        writeln!(
            out,
            "{:>6} vs {:<6} {:<14} pairs={:<10} predicted={}",
            p.a.name(),
            p.b.name(),
            status,
            p.verdict.pairs_checked,
            if p.predicted_isomorphic { "isomorphic" } else { "distinct" }
        )?;
        if let Some(w) = &p.verdict.witness {
            writeln!(
                out,
                "    p={:?} q={:?}\n    {}: {} vs {}   {}: {} vs {}",
                w.p.components(),
                w.q.components(),
                p.a.name(),
                w.a_p,
                w.a_q,
                p.b.name(),
                w.b_p,
                w.b_q
            )?;
        }
    }
    if let Some(c) = &r.classes {
        writeln!(out, "classes:   {}", class_string(c))?;
    }
    writeln!(out, "predicted: {}", class_string(&r.predicted_classes))?;
    writeln!(out, "{}", if r.matches_prediction { "MATCH" } else { "MISMATCH" })?;
    Ok(())
}

fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<i32> {
    let spec = GeneratorSpec::new(a.k, a.n, a.accuracy, a.seed)
        .with_concentration(a.concentration)
        .with_shift(Shift::temperature(a.temperature));
    let mut data = generate(&spec)?;
    if a.no_labels {
        data = data.without_labels();
    }
    match &a.out {
        Some(path) => {
            let format = a.format.unwrap_or_else(|| DumpFormat::from_path(path));
            write_dump(File::create(path)?, &data, format)?;
        }
        None => write_dump(out, &data, a.format.unwrap_or_default())?,
    }
    Ok(EXIT_OK)
}
