//! Subcommand drivers and on-disk artifacts.
//!
//! Settings come from built-in defaults, then an optional JSON config file,
//! then command-line flags; later sources win. Every command validates its
//! inputs, computes everything in memory and only then writes its output
//! directory, so a failed run leaves no partial artifacts.
//!
//! `run_report.json` echoes the effective configuration and counts and is
//! byte-identical across reruns. Wall time is kept apart in `timing.json`.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::forecast::{default_grid, evaluate_methods, tune_hyperparams, Method};
use crate::ingest::{
    bin_periods, parse_events, parse_series, Binning, Delimiter, EventFormat, EventLog, PeriodCount, PeriodSpec,
    ScalarSeries,
};
use crate::markov::{
    average_transition, frobenius_diff_series, normalize_rows, quadrant_summary, stationary, StationaryOptions,
    TransitionMatrix, ZeroRowPolicy,
};
use crate::netbuild::{build_network_shared, positive_scc, stable_core, CoreMode, CoreResult, SignedNetwork};
use crate::output::{fmt_float, Artifacts, CsvText};
use crate::stats::{stability_vs_exogenous, AlignMode, AlignOptions, Invert};
use crate::triads::{
    balanced_share, census, proportion, top_types, transition_counts, BalanceModel, CensusVector, TransitionCounts,
    TriadCode, TriadTypeTable, NODE_PERMUTATIONS, NUM_CODES,
};
use crate::tvsolver::{estimate, total_variation, PenaltyMode, SolverConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Number of most frequent types whose share is reported as the operative
/// set.
const OPERATIVE_TYPES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSettings {
    /// Number of final periods forecast one step ahead.
    pub holdout: usize,
    /// Select lambdas by walk-forward validation before the holdout.
    pub tune: bool,
    pub validation: usize,
    /// `[lambda1, lambda2]` pairs; the built-in grid when absent.
    pub grid: Option<Vec<(f64, f64)>>,
    /// Restrict RMSE to these type ids.
    pub types: Option<Vec<usize>>,
}

impl Default for ForecastSettings {
    fn default() -> Self {
        Self {
            holdout: 5,
            tune: false,
            validation: 5,
            grid: None,
            types: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelateSettings {
    pub modes: Vec<AlignMode>,
    /// Which aligned series is replaced by its reciprocal.
    pub invert: Invert,
    pub lags: usize,
}

impl Default for CorrelateSettings {
    fn default() -> Self {
        Self {
            modes: vec![AlignMode::Annualize, AlignMode::Interpolate],
            invert: Invert::Second,
            lags: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub events: Option<PathBuf>,
    /// Exogenous `label,value` series for `correlate`.
    pub series: Option<PathBuf>,
    pub out: PathBuf,
    pub event_format: EventFormat,
    pub series_delimiter: Delimiter,
    /// First period start; the earliest event when absent.
    pub start_date: Option<NaiveDate>,
    pub period_days: u32,
    /// Fixed number of periods; cover the data when absent.
    pub period_count: Option<usize>,
    pub keep_tail: bool,
    /// `union` or `fixed:PATH` (one actor id per line).
    pub core_mode: String,
    /// `classical`, `clustering`, `transitivity` or `all`.
    pub balance_model: String,
    pub zero_row_policy: ZeroRowPolicy,
    pub solver: SolverConfig,
    pub forecast: ForecastSettings,
    pub correlate: CorrelateSettings,
    /// Seed for stochastic utilities; the pipeline itself is deterministic.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            events: None,
            series: None,
            out: PathBuf::from("out"),
            event_format: EventFormat::default(),
            series_delimiter: Delimiter::Auto,
            start_date: None,
            period_days: 84,
            period_count: None,
            keep_tail: false,
            core_mode: "union".into(),
            balance_model: "all".into(),
            zero_row_policy: ZeroRowPolicy::Identity,
            solver: SolverConfig::default(),
            forecast: ForecastSettings::default(),
            correlate: CorrelateSettings::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))
    }

    fn balance_models(&self) -> Result<Vec<BalanceModel>> {
        match self.balance_model.as_str() {
            "all" => Ok(BalanceModel::ALL.to_vec()),
            other => Ok(vec![other.parse()?]),
        }
    }

    fn core_mode(&self) -> Result<CoreMode> {
        match self.core_mode.as_str() {
            "union" => Ok(CoreMode::UnionOfCores),
            other => {
                let path = other.strip_prefix("fixed:").ok_or_else(|| {
                    Error::InvalidArgument(format!("core mode must be `union` or `fixed:FILE`, got {other:?}"))
                })?;
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let names: Vec<String> = text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(str::to_owned)
                    .collect();
                if names.is_empty() {
                    return Err(Error::InvalidArgument(format!("core list {path} is empty")));
                }
                Ok(CoreMode::FixedList(names))
            }
        }
    }

    fn events_path(&self) -> Result<&Path> {
        let path = self
            .events
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("no events file given (--events or config `events`)".into()))?;
        if !path.is_file() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "events file not found"),
            ));
        }
        Ok(path)
    }

    fn series_path(&self) -> Result<&Path> {
        let path = self
            .series
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("no exogenous series given (--series or config `series`)".into()))?;
        if !path.is_file() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "series file not found"),
            ));
        }
        Ok(path)
    }

    fn check_out_dir(&self) -> Result<()> {
        if self.out.exists() && !self.out.is_dir() {
            return Err(Error::InvalidArgument(format!(
                "output path {} exists and is not a directory",
                self.out.display()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "triad-dynamics", version, about = "Triad dynamics of signed temporal networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build per-period signed networks and core/periphery membership.
    BuildNetworks(CommonArgs),
    /// Triad census, proportions and balanced shares per period.
    Census(CommonArgs),
    /// Empirical transition matrices, average, stationary vector.
    Transitions(CommonArgs),
    /// Time-varying transition matrices from the convex estimator.
    Estimate(CommonArgs),
    /// Walk-forward one-step forecast comparison.
    Forecast(CommonArgs),
    /// Frobenius differences of consecutive empirical matrices.
    Stability(CommonArgs),
    /// Stability series against an exogenous series.
    Correlate(CommonArgs),
    /// Built-in combinatorial checks; needs no input.
    Selftest,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long, value_name = "YYYY-MM-DD")]
    pub start_date: Option<NaiveDate>,
    #[arg(long)]
    pub period_days: Option<u32>,
    #[arg(long)]
    pub period_count: Option<usize>,
    #[arg(long, conflicts_with = "keep_tail")]
    pub drop_tail: bool,
    #[arg(long)]
    pub keep_tail: bool,
    /// `union` or `fixed:FILE`.
    #[arg(long)]
    pub core_mode: Option<String>,
    /// classical, clustering, transitivity or all.
    #[arg(long)]
    pub balance_model: Option<String>,
    /// matrix or row-groups.
    #[arg(long)]
    pub penalty_mode: Option<PenaltyMode>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub holdout: Option<usize>,
    /// Tune lambdas on the periods before the holdout.
    #[arg(long)]
    pub tune: bool,
    /// exact, annualize or interpolate.
    #[arg(long)]
    pub align: Option<AlignMode>,
    /// none, first or second.
    #[arg(long)]
    pub invert: Option<String>,
    #[arg(long)]
    pub lags: Option<usize>,
    #[arg(long)]
    pub date_format: Option<String>,
    /// auto, comma or tab.
    #[arg(long)]
    pub delimiter: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_delimiter(s: &str) -> Result<Delimiter> {
    match s {
        "auto" => Ok(Delimiter::Auto),
        "comma" | "," => Ok(Delimiter::Comma),
        "tab" | "\\t" => Ok(Delimiter::Tab),
        other => Err(Error::InvalidArgument(format!("unknown delimiter {other:?}"))),
    }
}

impl CommonArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $flag:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        if self.out.is_some() {
            cfg.out = self.out.clone().unwrap();
        }
        if self.events.is_some() {
            cfg.events = self.events.clone();
        }
        if self.series.is_some() {
            cfg.series = self.series.clone();
        }
        if self.start_date.is_some() {
            cfg.start_date = self.start_date;
        }
        if self.period_count.is_some() {
            cfg.period_count = self.period_count;
        }
        set!(cfg.period_days, self.period_days);
        if self.drop_tail {
            cfg.keep_tail = false;
        }
        if self.keep_tail {
            cfg.keep_tail = true;
        }
        set!(cfg.core_mode, self.core_mode);
        set!(cfg.balance_model, self.balance_model);
        set!(cfg.solver.penalty_mode, self.penalty_mode);
        set!(cfg.solver.lambda1, self.lambda1);
        set!(cfg.solver.lambda2, self.lambda2);
        set!(cfg.solver.max_iters, self.max_iters);
        set!(cfg.solver.tol, self.tol);
        set!(cfg.forecast.holdout, self.holdout);
        if self.tune {
            cfg.forecast.tune = true;
        }
        if let Some(mode) = self.align {
            cfg.correlate.modes = vec![mode];
        }
        if let Some(inv) = &self.invert {
            cfg.correlate.invert = match inv.as_str() {
                "none" => Invert::None,
                "first" => Invert::First,
                "second" => Invert::Second,
                other => return Err(Error::InvalidArgument(format!("unknown inversion {other:?}"))),
            };
        }
        set!(cfg.correlate.lags, self.lags);
        set!(cfg.event_format.date_format, self.date_format);
        if let Some(d) = &self.delimiter {
            let d = parse_delimiter(d)?;
            cfg.event_format.delimiter = d;
            cfg.series_delimiter = d;
        }
        set!(cfg.seed, self.seed);
        cfg.balance_models()?;
        Ok(cfg)
    }
}

/// Loaded events, periods, networks and the analysis node set.
struct Pipeline {
    log: EventLog,
    binning: Binning,
    networks: Vec<SignedNetwork>,
    cores: Vec<CoreResult>,
    /// Stable node set used for triad statistics, ascending.
    analysis: Vec<usize>,
}

impl Pipeline {
    fn load(cfg: &RunConfig) -> Result<Self> {
        let path = cfg.events_path()?;
        let core_mode = cfg.core_mode()?;
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let log = parse_events(BufReader::new(file), &cfg.event_format).map_err(|e| with_path(e, path))?;
        let start_date = match cfg.start_date {
            Some(d) => d,
            None => log.first_date().ok_or(Error::NoEvents)?,
        };
        let spec = PeriodSpec {
            start_date,
            period_length_days: cfg.period_days,
            period_count: cfg.period_count.map_or(PeriodCount::Auto, PeriodCount::Fixed),
            keep_tail: cfg.keep_tail,
        };
        let binning = bin_periods(&log, &spec)?;
        let ids: Arc<[String]> = log.registry.names().into();
        let networks: Vec<SignedNetwork> = binning
            .buckets
            .par_iter()
            .enumerate()
            .map(|(k, bucket)| {
                let events: Vec<_> = bucket.iter().map(|&i| log.events[i]).collect();
                build_network_shared(&events, ids.clone(), k)
            })
            .collect();
        let cores = networks.par_iter().map(positive_scc).collect();
        let analysis: Vec<usize> = stable_core(&networks, &core_mode)?.into_iter().collect();
        Ok(Self {
            log,
            binning,
            networks,
            cores,
            analysis,
        })
    }

    fn label(&self, period: usize) -> String {
        self.binning.periods[period].start.to_string()
    }

    fn require_analysis(&self) -> Result<()> {
        if self.analysis.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "the stable node set has {} nodes; triad statistics need at least 3 (try --core-mode fixed:FILE)",
                self.analysis.len()
            )));
        }
        Ok(())
    }

    fn censuses(&self) -> Result<Vec<CensusVector>> {
        self.require_analysis()?;
        self.networks.par_iter().map(|net| census(net, &self.analysis)).collect()
    }

    fn transition_counts(&self) -> Result<Vec<TransitionCounts>> {
        self.require_analysis()?;
        if self.networks.len() < 2 {
            return Err(Error::NoPeriods(format!(
                "transitions need at least 2 periods, got {}",
                self.networks.len()
            )));
        }
        (0..self.networks.len() - 1)
            .into_par_iter()
            .map(|k| transition_counts(&self.networks[k], &self.networks[k + 1], &self.analysis))
            .collect()
    }

    fn empirical(&self, cfg: &RunConfig) -> Result<Vec<TransitionMatrix>> {
        Ok(self
            .transition_counts()?
            .iter()
            .map(|c| normalize_rows(c, cfg.zero_row_policy))
            .collect())
    }

    fn counts(&self) -> Value {
        json!({
            "rows": self.log.report.rows,
            "events": self.log.report.retained,
            "self_loops": self.log.report.self_loops,
            "malformed": self.log.report.malformed,
            "actors": self.log.registry.len(),
            "periods": self.binning.periods.len(),
            "events_outside_periods": self.binning.excluded,
            "analysis_nodes": self.analysis.len(),
        })
    }

    fn analysis_names(&self) -> Vec<&str> {
        self.analysis.iter().map(|&i| self.log.registry.name(i)).collect()
    }
}

fn with_path(err: Error, path: &Path) -> Error {
    match err {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::MalformedInput { bad, total, sample } => Error::MalformedInput {
            bad,
            total,
            sample: format!("{}: {sample}", path.display()),
        },
        other => other,
    }
}

fn report(command: &str, cfg: &RunConfig, counts: Value, details: Value) -> Value {
    json!({
        "command": command,
        "version": VERSION,
        "config": cfg,
        "counts": counts,
        "details": details,
    })
}

fn finish(cfg: &RunConfig, mut files: Artifacts, run_report: Value, started: Instant) -> Result<()> {
    files.add_json("run_report.json", &run_report)?;
    files.add_json("timing.json", &json!({ "wall_seconds": started.elapsed().as_secs_f64() }))?;
    files.write_all(&cfg.out)
}

fn matrix_csv(m: &TransitionMatrix, skip_zero: bool) -> String {
    let mut csv = CsvText::with_header(&["from_type", "to_type", "probability"]);
    for i in 0..m.dim() {
        for (j, &p) in m.row(i).iter().enumerate() {
            if skip_zero && p == 0.0 {
                continue;
            }
            csv.row([i.to_string(), j.to_string(), fmt_float(p)]);
        }
    }
    csv.into_string()
}

pub fn cmd_build_networks(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    cfg.check_out_dir()?;
    let pl = Pipeline::load(cfg)?;
    let names = pl.log.registry.names();
    let mut files = Artifacts::new();

    let mut periods = Vec::new();
    let mut dyads = CsvText::with_header(&[
        "period",
        "start",
        "positive",
        "negative",
        "analysis_positive",
        "analysis_negative",
    ]);
    for (k, net) in pl.networks.iter().enumerate() {
        let mut csv = CsvText::with_header(&["source_id", "target_id", "sign"]);
        let (mut pos, mut neg) = (0usize, 0usize);
        for i in 0..net.n() {
            for j in 0..net.n() {
                let s = net.sign(i, j);
                if s != 0 {
                    csv.row([names[i].as_str(), names[j].as_str(), &s.to_string()]);
                    if s > 0 {
                        pos += 1;
                    } else {
                        neg += 1;
                    }
                }
            }
        }
        files.add(format!("networks/period_{k:03}.csv"), csv.into_string());

        let active: Vec<usize> = (0..net.n()).filter(|&i| net.is_active(i)).collect();
        let (all_pos, all_neg) = dyad_fractions(net, &active);
        let (an_pos, an_neg) = if pl.analysis.len() >= 2 {
            let (p, n) = dyad_fractions(net, &pl.analysis);
            (fmt_float(p), fmt_float(n))
        } else {
            (String::new(), String::new())
        };
        dyads.row([k.to_string(), pl.label(k), fmt_float(all_pos), fmt_float(all_neg), an_pos, an_neg]);

        let period = &pl.binning.periods[k];
        let core = &pl.cores[k];
        periods.push(json!({
            "index": k,
            "start": period.start.to_string(),
            "end": period.end.to_string(),
            "events": pl.binning.buckets[k].len(),
            "active_nodes": active.len(),
            "positive_edges": pos,
            "negative_edges": neg,
            "core": core.core.iter().map(|&i| &names[i]).collect::<Vec<_>>(),
            "periphery": core.periphery.iter().map(|&i| &names[i]).collect::<Vec<_>>(),
        }));
    }
    files.add("dyad_fractions.csv", dyads.into_string());
    files.add_json(
        "manifest.json",
        &json!({
            "period_days": cfg.period_days,
            "periods": periods,
            "actors": names,
            "stable_core": pl.analysis_names(),
            "parse": pl.log.report,
        }),
    )?;
    let rep = report("build-networks", cfg, pl.counts(), json!({}));
    finish(cfg, files, rep, started)
}

/// Positive and negative fractions over the ordered pairs of `nodes`.
fn dyad_fractions(net: &SignedNetwork, nodes: &[usize]) -> (f64, f64) {
    if nodes.len() < 2 {
        return (0.0, 0.0);
    }
    let (mut pos, mut neg) = (0usize, 0usize);
    for &i in nodes {
        for &j in nodes {
            match net.sign(i, j) {
                1 => pos += 1,
                -1 => neg += 1,
                _ => {}
            }
        }
    }
    let pairs = (nodes.len() * (nodes.len() - 1)) as f64;
    (pos as f64 / pairs, neg as f64 / pairs)
}

fn type_table_csv(table: &TriadTypeTable) -> String {
    let mut csv = CsvText::with_header(&[
        "type_id",
        "canonical_code",
        "e_ij",
        "e_ji",
        "e_ik",
        "e_ki",
        "e_jk",
        "e_kj",
        "orbit_size",
        "classical",
        "clustering",
        "transitivity",
    ]);
    for t in 0..table.num_types() {
        let code = table.canonical(t);
        let mut row = vec![t.to_string(), code.value().to_string()];
        row.extend(code.signs().iter().map(|s| s.to_string()));
        row.push(table.orbit_size(t).to_string());
        row.extend(BalanceModel::ALL.iter().map(|&m| u8::from(table.is_balanced(t, m)).to_string()));
        csv.row(row);
    }
    csv.into_string()
}

fn wide_header(first: &[&str], types: usize) -> Vec<String> {
    first
        .iter()
        .map(|s| s.to_string())
        .chain((0..types).map(|t| format!("type_{t}")))
        .collect()
}

pub fn cmd_census(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    cfg.check_out_dir()?;
    let models = cfg.balance_models()?;
    let pl = Pipeline::load(cfg)?;
    let censuses = pl.censuses()?;
    let table = TriadTypeTable::global();
    let props: Vec<Vec<f64>> = censuses.iter().map(proportion).collect::<Result<_>>()?;

    let mut counts_csv = CsvText::default();
    counts_csv.row(wide_header(&["period", "start", "total"], table.num_types()));
    let mut prop_csv = CsvText::default();
    prop_csv.row(wide_header(&["period", "start"], table.num_types()));
    let mut header = vec!["period".to_string(), "start".to_string()];
    header.extend(models.iter().map(|m| m.name().to_string()));
    let mut share_csv = CsvText::default();
    share_csv.row(header);
    let mut totals = vec![0u64; table.num_types()];
    for (k, (c, p)) in censuses.iter().zip(&props).enumerate() {
        let mut row = vec![k.to_string(), pl.label(k), c.total().to_string()];
        row.extend(c.counts.iter().map(u64::to_string));
        counts_csv.row(row);
        let mut row = vec![k.to_string(), pl.label(k)];
        row.extend(p.iter().map(|&x| fmt_float(x)));
        prop_csv.row(row);
        let mut row = vec![k.to_string(), pl.label(k)];
        row.extend(models.iter().map(|&m| fmt_float(balanced_share(p, table, m))));
        share_csv.row(row);
        totals.iter_mut().zip(&c.counts).for_each(|(t, x)| *t += x);
    }

    let grand: u64 = totals.iter().sum();
    let top = top_types(&totals, OPERATIVE_TYPES);
    let covered: u64 = top.iter().map(|&t| totals[t]).sum();
    let mut files = Artifacts::new();
    files.add("census.csv", counts_csv.into_string());
    files.add("proportions.csv", prop_csv.into_string());
    files.add("balanced_share.csv", share_csv.into_string());
    files.add("type_table.csv", type_table_csv(table));
    let details = json!({
        "triples_per_period": censuses.first().map_or(0, CensusVector::total),
        "operative_types": top,
        "operative_share": covered as f64 / grand as f64,
        "comparisons": {
            "operative_share": { "value": covered as f64 / grand as f64, "reference": 0.91 },
        },
    });
    let rep = report("census", cfg, pl.counts(), details);
    finish(cfg, files, rep, started)
}

pub fn cmd_transitions(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    cfg.check_out_dir()?;
    let models = cfg.balance_models()?;
    let pl = Pipeline::load(cfg)?;
    let counts = pl.transition_counts()?;
    let mats: Vec<TransitionMatrix> = counts.iter().map(|c| normalize_rows(c, cfg.zero_row_policy)).collect();
    let table = TriadTypeTable::global();
    let avg = average_transition(&mats)?;
    let pi = stationary(&avg, &StationaryOptions::default())?;

    let mut files = Artifacts::new();
    for (k, (c, m)) in counts.iter().zip(&mats).enumerate() {
        let mut csv = CsvText::with_header(&["from_type", "to_type", "count", "probability"]);
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                let p = m.get(i, j);
                if p != 0.0 {
                    csv.row([i.to_string(), j.to_string(), c.get(i, j).to_string(), fmt_float(p)]);
                }
            }
        }
        files.add(format!("transitions/matrix_{k:03}.csv"), csv.into_string());
    }
    files.add("average.csv", matrix_csv(&avg, true));
    let mut st = CsvText::with_header(&["type_id", "probability"]);
    for (t, p) in pi.iter().enumerate() {
        st.row([t.to_string(), fmt_float(*p)]);
    }
    files.add("stationary.csv", st.into_string());
    let quadrants: Vec<_> = models
        .iter()
        .map(|&m| quadrant_summary(&mats, table, m))
        .collect::<Result<_>>()?;
    files.add_json("quadrants.json", &quadrants)?;

    let balanced_mass: serde_json::Map<String, Value> = models
        .iter()
        .map(|&m| (m.name().to_string(), json!(balanced_share(&pi, table, m))))
        .collect();
    let details = json!({
        "matrices": mats.len(),
        "stationary_balanced_mass": balanced_mass,
        "comparisons": {
            "stationary_balanced_mass": { "value": balanced_mass, "reference_lower_bound": 0.85 },
        },
    });
    let rep = report("transitions", cfg, pl.counts(), details);
    finish(cfg, files, rep, started)
}

pub fn cmd_estimate(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    cfg.check_out_dir()?;
    let models = cfg.balance_models()?;
    let pl = Pipeline::load(cfg)?;
    let phats = pl.empirical(cfg)?;
    let res = estimate(&phats, &cfg.solver)?;
    let diagnostics = json!({
        "converged": res.converged,
        "iterations": res.iterations,
        "final_objective": res.final_objective,
        "primal_residual": res.primal_residual,
        "dual_residual": res.dual_residual,
    });
    if !res.converged {
        let mut files = Artifacts::new();
        let mut trace = CsvText::with_header(&["iteration", "objective"]);
        for (i, v) in res.objective_trace.iter().enumerate() {
            trace.row([i.to_string(), fmt_float(*v)]);
        }
        files.add("objective_trace.csv", trace.into_string());
        let rep = report("estimate", cfg, pl.counts(), json!({ "solver": diagnostics }));
        finish(cfg, files, rep, started)?;
        return Err(Error::NotConverged {
            iterations: res.iterations,
            residual: res.primal_residual.max(res.dual_residual),
        });
    }
    let table = TriadTypeTable::global();
    let mut files = Artifacts::new();
    for (k, m) in res.matrices.iter().enumerate() {
        files.add(format!("estimated/matrix_{k:03}.csv"), matrix_csv(m, false));
    }
    let mut trace = CsvText::with_header(&["iteration", "objective"]);
    for (i, v) in res.objective_trace.iter().enumerate() {
        trace.row([i.to_string(), fmt_float(*v)]);
    }
    files.add("objective_trace.csv", trace.into_string());
    let quadrants: Vec<_> = models
        .iter()
        .map(|&m| quadrant_summary(&res.matrices, table, m))
        .collect::<Result<_>>()?;
    files.add_json("quadrants.json", &quadrants)?;
    let tv = if res.matrices.len() >= 2 {
        Some(total_variation(&res.matrices)?)
    } else {
        None
    };
    let empirical_tv = if phats.len() >= 2 { Some(total_variation(&phats)?) } else { None };
    let details = json!({
        "solver": diagnostics,
        "total_variation": tv,
        "empirical_total_variation": empirical_tv,
    });
    let rep = report("estimate", cfg, pl.counts(), details);
    finish(cfg, files, rep, started)
}

pub fn cmd_forecast(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    cfg.check_out_dir()?;
    let settings = &cfg.forecast;
    let pl = Pipeline::load(cfg)?;
    let props: Vec<Vec<f64>> = pl.censuses()?.iter().map(proportion).collect::<Result<_>>()?;
    let phats = pl.empirical(cfg)?;
    let subset = settings.types.as_deref();

    let mut solver = cfg.solver.clone();
    let mut tuning = Value::Null;
    if settings.tune {
        let cut = props.len().saturating_sub(settings.holdout);
        if cut < 2 {
            return Err(Error::InvalidArgument("no periods left for tuning before the holdout".into()));
        }
        let grid = settings.grid.clone().unwrap_or_else(default_grid);
        let tuned = tune_hyperparams(&props[..cut], &phats[..cut - 1], &grid, settings.validation, &solver, subset)?;
        solver.lambda1 = tuned.lambda1;
        solver.lambda2 = tuned.lambda2;
        tuning = serde_json::to_value(&tuned)?;
    }
    let rep_fc = evaluate_methods(&props, &phats, &Method::ALL, &solver, settings.holdout, subset)?;

    let mut csv = CsvText::with_header(&["step", "method", "rmse"]);
    for m in Method::ALL {
        for (s, v) in rep_fc.steps.iter().zip(&rep_fc.rmse[&m]) {
            csv.row([s.to_string(), m.name().to_string(), fmt_float(*v)]);
        }
    }
    let mean: serde_json::Map<String, Value> = Method::ALL
        .iter()
        .map(|&m| (m.name().to_string(), json!(rep_fc.mean_rmse(m))))
        .collect();
    let mut files = Artifacts::new();
    files.add("forecast.csv", csv.into_string());
    let summary = json!({
        "steps": rep_fc.steps,
        "step_starts": rep_fc.steps.iter().map(|&s| pl.label(s)).collect::<Vec<_>>(),
        "mean_rmse": mean,
        "lambda1": solver.lambda1,
        "lambda2": solver.lambda2,
        "tuning": tuning,
    });
    files.add_json("forecast_summary.json", &summary)?;
    let rep = report("forecast", cfg, pl.counts(), summary);
    finish(cfg, files, rep, started)
}

fn stability_series(pl: &Pipeline, cfg: &RunConfig) -> Result<ScalarSeries> {
    let mats = pl.empirical(cfg)?;
    let raw = frobenius_diff_series(&mats)?;
    let labels = raw
        .labels
        .iter()
        .map(|l| l.parse::<usize>().map(|k| pl.label(k)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    ScalarSeries::new(labels, raw.values)
}

fn series_csv(s: &ScalarSeries) -> String {
    let mut csv = CsvText::with_header(&["label", "value"]);
    for (l, v) in s.iter() {
        csv.row([l.to_string(), v.map(fmt_float).unwrap_or_default()]);
    }
    csv.into_string()
}

pub fn cmd_stability(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    cfg.check_out_dir()?;
    let pl = Pipeline::load(cfg)?;
    let series = stability_series(&pl, cfg)?;
    let mut files = Artifacts::new();
    files.add("frobenius.csv", series_csv(&series));
    let rep = report("stability", cfg, pl.counts(), json!({ "points": series.len() }));
    finish(cfg, files, rep, started)
}

pub fn cmd_correlate(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    cfg.check_out_dir()?;
    let series_path = cfg.series_path()?;
    let file = File::open(series_path).map_err(|e| Error::io(series_path, e))?;
    let exogenous = parse_series(BufReader::new(file), cfg.series_delimiter).map_err(|e| with_path(e, series_path))?;
    if cfg.correlate.modes.is_empty() {
        return Err(Error::InvalidArgument("no alignment modes configured".into()));
    }
    let pl = Pipeline::load(cfg)?;
    let series = stability_series(&pl, cfg)?;
    let reports = cfg
        .correlate
        .modes
        .iter()
        .map(|&mode| {
            let opts = AlignOptions {
                mode,
                invert: cfg.correlate.invert,
            };
            stability_vs_exogenous(&series, &exogenous, opts, cfg.correlate.lags)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut files = Artifacts::new();
    files.add("frobenius.csv", series_csv(&series));
    files.add_json("correlate.json", &reports)?;
    let comparisons: Vec<Value> = reports
        .iter()
        .map(|r| json!({ "alignment": r.alignment, "pearson_r": r.pearson.r, "pearson_p": r.pearson.p, "reference_r": 0.88 }))
        .collect();
    let rep = report("correlate", cfg, pl.counts(), json!({ "comparisons": comparisons }));
    finish(cfg, files, rep, started)
}

/// Outcome of one built-in check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: usize,
    pub actual: usize,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.expected == self.actual
    }
}

/// Combinatorial invariants of a type table.
pub fn selftest_checks(table: &TriadTypeTable) -> Vec<Check> {
    let check = |name: &str, expected: usize, actual: usize| Check {
        name: name.into(),
        expected,
        actual,
    };
    let orbit_total: usize = (0..table.num_types()).map(|t| table.orbit_size(t)).sum();
    // Burnside: the class count is the mean number of codes fixed by a node
    // permutation.
    let fixed: usize = NODE_PERMUTATIONS
        .iter()
        .map(|&perm| {
            (0..NUM_CODES as u16)
                .filter(|&c| {
                    let code = TriadCode::new(c).expect("code in range");
                    code.permuted(perm) == code
                })
                .count()
        })
        .sum();
    let burnside = fixed / NODE_PERMUTATIONS.len();
    vec![
        check("isomorphism classes", 138, table.num_types()),
        check("Burnside class count", burnside, table.num_types()),
        check("orbit sizes sum to 729", NUM_CODES, orbit_total),
        check("complete classes", 16, table.complete_count()),
        check("classical-balanced classes", 24, table.balanced_count(BalanceModel::Classical)),
        check("clustering-balanced classes", 44, table.balanced_count(BalanceModel::Clustering)),
        check("transitivity-balanced classes", 93, table.balanced_count(BalanceModel::Transitivity)),
    ]
}

/// Prints one line per check; returns whether all passed.
pub fn cmd_selftest() -> bool {
    let checks = selftest_checks(TriadTypeTable::global());
    for c in &checks {
        let status = if c.passed() { "ok" } else { "FAILED" };
        println!("{status:6} {}: expected {}, got {}", c.name, c.expected, c.actual);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        println!("selftest passed ({} checks)", checks.len());
        true
    } else {
        println!("selftest failed: {}", failed.join(", "));
        false
    }
}

/// Exit status for an error: 1 for analysis failures, 2 for input or
/// configuration problems.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NotConverged { .. } | Error::ZeroVariance | Error::RankDeficient { .. } | Error::TooFewPairs(_) => 1,
        _ => 2,
    }
}

/// Runs a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let (name, args) = match &cli.command {
        Command::Selftest => return if cmd_selftest() { 0 } else { 1 },
        Command::BuildNetworks(a) => ("build-networks", a),
        Command::Census(a) => ("census", a),
        Command::Transitions(a) => ("transitions", a),
        Command::Estimate(a) => ("estimate", a),
        Command::Forecast(a) => ("forecast", a),
        Command::Stability(a) => ("stability", a),
        Command::Correlate(a) => ("correlate", a),
    };
    let result = args.resolve().and_then(|cfg| match name {
        "build-networks" => cmd_build_networks(&cfg),
        "census" => cmd_census(&cfg),
        "transitions" => cmd_transitions(&cfg),
        "estimate" => cmd_estimate(&cfg),
        "forecast" => cmd_forecast(&cfg),
        "stability" => cmd_stability(&cfg),
        _ => cmd_correlate(&cfg),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {name}: {e}");
            exit_code(&e)
        }
    }
}
