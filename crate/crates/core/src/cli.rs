//! Command-line front end. Every artifact embeds the [`RunConfig`] that
//! produced it, so rerunning the embedded config reproduces the file byte for
//! byte.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::capacity::{trace_boundary, RatePair};
use crate::channel::{load_channel, ChannelSpec};
use crate::converse::{run_proof_suite, ProofSuiteConfig, ProofSuiteReport};
use crate::error::{Error, Result};
use crate::exponent::{
    f_sup, property_suite, ExponentParams, ExponentSurface, OmegaConfig, PropertyConfig,
    PropertyReport, SearchConfig,
};
use crate::grid::parse_grid;
use crate::optim::OptConfig;
use crate::simulator::{
    decay_scan, run_lemma_suite, DecayRow, Ensemble, LemmaSuiteConfig, LemmaSuiteReport,
};
use crate::DegradedBroadcastChannel;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "dbc",
    version,
    about = "Capacity regions and strong-converse exponents of degraded broadcast channels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Trace the capacity region by sweeping supporting hyperplanes.
    Capacity(CapacityArgs),
    /// Evaluate the strong-converse exponent F(R1,R2).
    Exponent(ExponentArgs),
    /// Check monotonicity/convexity in lambda, the small-lambda limit and F > 0 outside the region.
    VerifyProperties(PropertiesArgs),
    /// Telescoping, Hoelder and potential-bound checks on random feedback processes.
    CheckProof(ProofArgs),
    /// Exact correct-decoding probability of sampled codes against the finite-n bound.
    Simulate(SimulateArgs),
    /// Change-of-measure lemmas on random codes.
    CheckLemmas(LemmaArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Common {
    /// Channel JSON file.
    #[arg(long)]
    pub channel: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CapacityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// `a:b:step`, comma list, or `logspace(a,b,k)`.
    #[arg(long, default_value = "0.1:4.0:0.1")]
    pub mu_grid: String,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    /// Report rates in bits instead of nats.
    #[arg(long)]
    pub bits: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SearchArgs {
    /// Restarts per Omega maximization.
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Points per axis of the log-spaced (mu, lambda) grid.
    #[arg(long, default_value_t = 25)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 3)]
    pub refine_rounds: usize,
}

impl SearchArgs {
    fn config(&self, seed: u64) -> Result<SearchConfig> {
        if self.restarts == 0 || self.grid_points < 2 {
            return Err(Error::ConfigParse(
                "need restarts >= 1 and grid-points >= 2".into(),
            ));
        }
        let base = SearchConfig::default();
        Ok(SearchConfig {
            grid_points: self.grid_points,
            refine_rounds: self.refine_rounds,
            omega: OmegaConfig {
                opt: OptConfig {
                    restarts: self.restarts,
                    seed,
                    ..base.omega.opt.clone()
                },
                ..base.omega.clone()
            },
            ..base
        })
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExponentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub r1: f64,
    #[arg(long)]
    pub r2: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub bits: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PropertiesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Random test joints for the lambda-shape checks.
    #[arg(long, default_value_t = 50)]
    pub random_q: usize,
    /// Sampled rate pairs outside the region.
    #[arg(long, default_value_t = 10)]
    pub exterior: usize,
    #[arg(long, default_value = "0.5,1,2")]
    pub mus: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ProofArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Largest blocklength; instances cycle through 1..=n.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    #[arg(long, default_value = "1,2,4")]
    pub l_sizes: String,
    #[arg(long, default_value = "0.25,0.5,0.75")]
    pub thetas: String,
    #[arg(long, default_value = "0.5,1,2")]
    pub mus: String,
    /// Random auxiliary sequences compared against the adaptive choice.
    #[arg(long, default_value_t = 2)]
    pub extra_aux: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub r1: f64,
    #[arg(long)]
    pub r2: f64,
    /// Comma list of blocklengths.
    #[arg(long, default_value = "2,3,4")]
    pub n: String,
    #[arg(long, default_value = "superposition", value_parser = parse_ensemble)]
    pub ensemble: Ensemble,
    /// Number of sampled codes per blocklength; code seeds are seed, seed+1, ...
    #[arg(long, default_value_t = 50)]
    pub seeds: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub bits: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LemmaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value = "1,2,3")]
    pub n: String,
    #[arg(long, default_value = "1,2,4")]
    pub k_sizes: String,
    #[arg(long, default_value = "1,2,4")]
    pub l_sizes: String,
    #[arg(long, default_value_t = 100)]
    pub codes: usize,
    /// Random auxiliary choices per code.
    #[arg(long, default_value_t = 10)]
    pub aux: usize,
    #[arg(long, default_value = "0.05,0.2")]
    pub etas: String,
}

fn parse_ensemble(s: &str) -> std::result::Result<Ensemble, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Capacity(a) => &a.common,
            Command::Exponent(a) => &a.common,
            Command::VerifyProperties(a) => &a.common,
            Command::CheckProof(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::CheckLemmas(a) => &a.common,
        }
    }
}

/// Everything needed to reproduce an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema: u32,
    pub version: String,
    pub channel_spec: ChannelSpec,
    #[serde(flatten)]
    pub command: Command,
}

/// A JSON artifact: the config plus the command's result fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub schema: u32,
    pub config: RunConfig,
    pub units: Units,
    pub passed: Option<bool>,
    #[serde(flatten)]
    pub result: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    fn from_flag(bits: bool) -> Self {
        if bits {
            Units::Bits
        } else {
            Units::Nats
        }
    }

    fn scale(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => 1.0 / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSummary {
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(with = "crate::float_serde")]
    pub pre_clamp: f64,
    pub mu_star: f64,
    pub lambda_star: f64,
    pub omega: f64,
    pub certificate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub mu: f64,
    pub value: f64,
    pub r1_corner: f64,
    pub r2_corner: f64,
}

/// Result of one invocation: the serialized artifact and whether every
/// verified inequality held.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub bytes: Vec<u8>,
    pub passed: bool,
}

/// Runs a parsed command and writes its artifact (atomically when `--out` is
/// given). A failed check still writes its report, then returns
/// [`Error::BoundViolated`].
pub fn run(command: &Command) -> Result<Artifact> {
    let common = command.common();
    let ch = load_channel(&common.channel)?;
    let config = RunConfig {
        schema: SCHEMA,
        version: env!("CARGO_PKG_VERSION").to_string(),
        channel_spec: ch.to_spec(),
        command: command.clone(),
    };
    let artifact = render(&config, &ch)?;
    match &common.out {
        Some(path) => write_atomic(path, &artifact.bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&artifact.bytes)
                .and_then(|_| out.flush())
                .map_err(|e| Error::ConfigParse(format!("stdout: {e}")))?;
        }
    }
    if !artifact.passed {
        return Err(Error::BoundViolated(format!(
            "{} reported failed checks",
            command_name(command)
        )));
    }
    Ok(artifact)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Capacity(_) => "capacity",
        Command::Exponent(_) => "exponent",
        Command::VerifyProperties(_) => "verify-properties",
        Command::CheckProof(_) => "check-proof",
        Command::Simulate(_) => "simulate",
        Command::CheckLemmas(_) => "check-lemmas",
    }
}

/// Computes the artifact for `config` without touching the filesystem.
pub fn render(config: &RunConfig, ch: &DegradedBroadcastChannel) -> Result<Artifact> {
    let seed = config.command.common().seed;
    match &config.command {
        Command::Capacity(a) => {
            let grid = parse_grid(&a.mu_grid)?;
            if grid.iter().any(|&m| m <= 0.0) {
                return Err(Error::ConfigParse("mu grid must be positive".into()));
            }
            if a.restarts == 0 {
                return Err(Error::ConfigParse("restarts must be >= 1".into()));
            }
            let cfg = OptConfig::default()
                .with_restarts(a.restarts)
                .with_seed(seed);
            let boundary = trace_boundary(ch, &grid, &cfg)?;
            let mut bytes = csv_header(config, Units::from_flag(a.bits))?;
            boundary.write_csv(&mut bytes, a.bits).map_err(io_err)?;
            Ok(Artifact {
                bytes,
                passed: true,
            })
        }
        Command::Exponent(a) => {
            let r = RatePair::new(a.r1, a.r2)?;
            let surface = ExponentSurface::new(ch.clone(), a.search.config(seed)?);
            let res = f_sup(&surface, r)?;
            let units = Units::from_flag(a.bits);
            let s = units.scale();
            let summary = ExponentSummary {
                f: res.f * s,
                pre_clamp: res.pre_clamp * s,
                mu_star: res.mu_star,
                lambda_star: res.lambda_star,
                omega: res.omega * s,
                certificate: res.certificate,
            };
            json_artifact(config, units, None, summary)
        }
        Command::VerifyProperties(a) => {
            let cfg = PropertyConfig {
                mus: parse_grid(&a.mus)?,
                random_q: a.random_q,
                exterior_points: a.exterior,
                seed,
                ..PropertyConfig::default()
            };
            let report: PropertyReport = property_suite(ch, &cfg, &a.search.config(seed)?)?;
            json_artifact(config, Units::Nats, Some(true), report)
        }
        Command::CheckProof(a) => {
            if a.n == 0 || a.instances == 0 {
                return Err(Error::ConfigParse("n and instances must be >= 1".into()));
            }
            let cfg = ProofSuiteConfig {
                n_list: (1..=a.n).collect(),
                l_sizes: parse_usize_list(&a.l_sizes)?,
                instances: a.instances,
                thetas: parse_grid(&a.thetas)?,
                mus: parse_grid(&a.mus)?,
                extra_random_aux: a.extra_aux,
                seed,
                ..ProofSuiteConfig::default()
            };
            let report: ProofSuiteReport = run_proof_suite(ch, &cfg)?;
            let passed = report.all_passed();
            json_artifact(config, Units::Nats, Some(passed), report)
        }
        Command::Simulate(a) => {
            let r = RatePair::new(a.r1, a.r2)?;
            let n_list = parse_usize_list(&a.n)?;
            if a.seeds == 0 {
                return Err(Error::ConfigParse("seeds must be >= 1".into()));
            }
            let seeds: Vec<u64> = (0..a.seeds).map(|i| seed.wrapping_add(i)).collect();
            let surface = ExponentSurface::new(ch.clone(), a.search.config(seed)?);
            let f = f_sup(&surface, r)?;
            let params = ExponentParams::new(f.mu_star, f.lambda_star)?;
            let rows = decay_scan(ch, r, &n_list, a.ensemble, &seeds, &params, f.f)?;
            let units = Units::from_flag(a.bits);
            let s = units.scale();
            let rows: Vec<DecayRow> = rows
                .into_iter()
                .map(|row| DecayRow {
                    exponent: row.exponent * s,
                    bound_exponent: row.bound_exponent * s,
                    f: row.f * s,
                    ..row
                })
                .collect();
            let mut bytes = csv_header(config, units)?;
            crate::simulator::write_decay_csv(&rows, &mut bytes).map_err(io_err)?;
            Ok(Artifact {
                bytes,
                passed: true,
            })
        }
        Command::CheckLemmas(a) => {
            let cfg = LemmaSuiteConfig {
                n_list: parse_usize_list(&a.n)?,
                k_sizes: parse_usize_list(&a.k_sizes)?,
                l_sizes: parse_usize_list(&a.l_sizes)?,
                codes: a.codes,
                aux_per_code: a.aux,
                etas: parse_grid(&a.etas)?,
                seed,
            };
            let report: LemmaSuiteReport = run_lemma_suite(ch, &cfg)?;
            let passed = report.all_passed();
            json_artifact(config, Units::Nats, Some(passed), report)
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Internal(format!("serialization: {e}"))
}

fn json_artifact<T: Serialize>(
    config: &RunConfig,
    units: Units,
    passed: Option<bool>,
    result: T,
) -> Result<Artifact> {
    let report = Report {
        schema: SCHEMA,
        config: config.clone(),
        units,
        passed,
        result,
    };
    let mut bytes =
        serde_json::to_vec_pretty(&report).map_err(|e| Error::Internal(e.to_string()))?;
    bytes.push(b'\n');
    Ok(Artifact {
        bytes,
        passed: passed.unwrap_or(true),
    })
}

#[derive(Serialize, Deserialize)]
struct CsvHeader {
    schema: u32,
    units: Units,
    config: RunConfig,
}

fn csv_header(config: &RunConfig, units: Units) -> Result<Vec<u8>> {
    let header = CsvHeader {
        schema: SCHEMA,
        units,
        config: config.clone(),
    };
    let json = serde_json::to_string(&header).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(format!("# {json}\n").into_bytes())
}

/// Comma-separated positive integers, strictly ascending.
pub fn parse_usize_list(spec: &str) -> Result<Vec<usize>> {
    let values = spec
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::ConfigParse(format!("not a positive integer: {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.contains(&0) || values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::ConfigParse(format!(
            "need strictly ascending positive integers: {spec:?}"
        )));
    }
    Ok(values)
}

/// Writes through a temporary file in the target directory, so readers never
/// see a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| Error::ConfigParse(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Loads a JSON artifact emitted by [`run`].
pub fn load_report<T: DeserializeOwned>(text: &str) -> Result<Report<T>> {
    let report: Report<T> =
        serde_json::from_str(text).map_err(|e| Error::ConfigParse(format!("report: {e}")))?;
    if report.schema != SCHEMA {
        return Err(Error::ConfigParse(format!(
            "unsupported schema {}",
            report.schema
        )));
    }
    Ok(report)
}

/// Splits a CSV artifact into its embedded config, units and data lines.
fn split_csv<'a>(text: &'a str, columns: &str) -> Result<(RunConfig, Units, Vec<Vec<&'a str>>)> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or_default();
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| Error::ConfigParse("missing '# {config}' header line".into()))?;
    let header: CsvHeader =
        serde_json::from_str(json).map_err(|e| Error::ConfigParse(format!("header: {e}")))?;
    if header.schema != SCHEMA {
        return Err(Error::ConfigParse(format!(
            "unsupported schema {}",
            header.schema
        )));
    }
    if lines.next() != Some(columns) {
        return Err(Error::ConfigParse(format!("expected columns {columns}")));
    }
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').collect())
        .collect();
    Ok((header.config, header.units, rows))
}

fn field<T: std::str::FromStr>(row: &[&str], i: usize) -> Result<T> {
    row.get(i)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::ConfigParse(format!("bad CSV field {i} in {row:?}")))
}

pub fn load_capacity_csv(text: &str) -> Result<(RunConfig, Units, Vec<CapacityRow>)> {
    let (config, units, rows) = split_csv(text, "mu,value,R1_corner,R2_corner")?;
    let rows = rows
        .iter()
        .map(|r| {
            Ok(CapacityRow {
                mu: field(r, 0)?,
                value: field(r, 1)?,
                r1_corner: field(r, 2)?,
                r2_corner: field(r, 3)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((config, units, rows))
}

pub fn load_decay_csv(text: &str) -> Result<(RunConfig, Units, Vec<DecayRow>)> {
    let (config, units, rows) = split_csv(text, "n,seed,p_correct,exponent,bound_exponent,F")?;
    let rows = rows
        .iter()
        .map(|r| {
            Ok(DecayRow {
                n: field(r, 0)?,
                seed: field(r, 1)?,
                p_correct: field(r, 2)?,
                exponent: field(r, 3)?,
                bound_exponent: field(r, 4)?,
                f: field(r, 5)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((config, units, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Command {
        let mut full = vec!["dbc"];
        full.extend_from_slice(args);
        Cli::try_parse_from(full).unwrap().command
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = parse(&[
            "exponent",
            "--channel",
            "ch.json",
            "--r1",
            "0.8",
            "--r2",
            "0.1",
            "--restarts",
            "32",
        ]);
        let cfg = RunConfig {
            schema: SCHEMA,
            version: "x".into(),
            channel_spec: DegradedBroadcastChannel::identity(2).to_spec(),
            command: c,
        };
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("\"command\":\"exponent\""));
        assert_eq!(serde_json::from_str::<RunConfig>(&s).unwrap(), cfg);
    }

    #[test]
    fn usage_errors() {
        assert!(Cli::try_parse_from(["dbc", "exponent", "--channel", "c.json"]).is_err());
        assert!(Cli::try_parse_from([
            "dbc",
            "simulate",
            "--channel",
            "c",
            "--r1",
            "1",
            "--r2",
            "1",
            "--ensemble",
            "x"
        ])
        .is_err());
        assert!(parse_usize_list("2,1").is_err());
        assert!(parse_usize_list("0,1").is_err());
        assert_eq!(parse_usize_list("2,3,4").unwrap(), vec![2, 3, 4]);
    }

    #[test]
    fn capacity_csv_loader() {
        let cfg = RunConfig {
            schema: SCHEMA,
            version: "x".into(),
            channel_spec: DegradedBroadcastChannel::identity(2).to_spec(),
            command: parse(&["capacity", "--channel", "id.json", "--mu-grid", "1:1:1"]),
        };
        let mut text = csv_header(&cfg, Units::Nats).unwrap();
        text.extend_from_slice(b"mu,value,R1_corner,R2_corner\n1,0.69,0.69,0\n");
        let (back, units, rows) = load_capacity_csv(std::str::from_utf8(&text).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(units, Units::Nats);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].value, 0.69);
        assert!(load_capacity_csv("mu,value\n").is_err());
    }
}
