//! Command-line surface and the fully resolved run configuration.
//!
//! Defaults, applied when a flag is absent:
//!
//! | field        | default                                                        |
//! |--------------|----------------------------------------------------------------|
//! | `dim`        | 3                                                              |
//! | `beta`       | `critical`                                                     |
//! | `t`          | 400 for sigma-dist and clt, 1e5 for h-chain, 1e4 for escape, else 1000 |
//! | `step`       | 0.02 for the samplers, else 0.01                               |
//! | `samples`    | 100000                                                         |
//! | `seed`       | 1                                                              |
//! | `box_radius` | 16 for moments, 4 for h-chain, else 10                         |
//! | `lambda`     | 0.01..10 for i-lambda, 1e-1..1e-5 for asymptotics              |
//! | `sampler`    | `renewal`                                                      |
//! | `output`     | `$HOMOPOLYMER_OUTPUT_DIR`, else the working directory          |
//! | `format`     | `csv`                                                          |

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, Result};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "HOMOPOLYMER_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// beta_d = 1 / I(0), the escape probability and the asymptotic constants
    CriticalBeta,
    /// I(lambda) on a list of lambda values
    ILambda,
    /// Ground state psi on a box and its stationary law
    Eigenfunction,
    /// p_beta(t, 0, 0) against its critical asymptotics
    HeatKernel,
    /// Z_{beta,t}(0) against its critical asymptotics
    Partition,
    /// I(0) - I(lambda) against its leading small-lambda term
    Asymptotics,
    /// Weighted law of sigma_t / t
    SigmaDist,
    /// Endpoint moments and characteristic function of x_t / sqrt(t)
    Clt,
    /// Ground-state transformed chain in the globular phase
    HChain,
    /// Radial moments of the stationary law
    Moments,
    /// Monte Carlo escape probability
    Escape,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CriticalBeta => "critical-beta",
            Command::ILambda => "i-lambda",
            Command::Eigenfunction => "eigenfunction",
            Command::HeatKernel => "heat-kernel",
            Command::Partition => "partition",
            Command::Asymptotics => "asymptotics",
            Command::SigmaDist => "sigma-dist",
            Command::Clt => "clt",
            Command::HChain => "h-chain",
            Command::Moments => "moments",
            Command::Escape => "escape",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Path sampler behind sigma-dist and clt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Renewal decomposition at the origin (weights stay bounded at criticality)
    Renewal,
    /// Free walks reweighted by e^{beta L_t}
    Free,
}

/// `--beta`: a number or `critical`, resolved at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSpec {
    Critical,
    Value(f64),
}

impl FromStr for BetaSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("critical") {
            return Ok(BetaSpec::Critical);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(BetaSpec::Value(v)),
            _ => Err(format!("beta must be a non-negative number or \"critical\", got {s:?}")),
        }
    }
}

impl fmt::Display for BetaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaSpec::Critical => f.write_str("critical"),
            BetaSpec::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for BetaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BetaSpec::Critical => s.serialize_str("critical"),
            BetaSpec::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for BetaSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => BetaSpec::from_str(&v.to_string()),
            Raw::Text(s) => BetaSpec::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "homopolymer", version, about = "Pinned homopolymer experiments on Z^d")]
pub struct Cli {
    /// Experiment to run
    #[arg(value_enum, required_unless_present = "config")]
    pub command: Option<Command>,
    /// Lattice dimension d
    #[arg(long)]
    pub dim: Option<usize>,
    /// Pinning strength: a number or "critical"
    #[arg(long)]
    pub beta: Option<BetaSpec>,
    /// Time horizon (escape: cutoff time; h-chain: total time)
    #[arg(long, visible_alias = "horizon", allow_negative_numbers = true)]
    pub t: Option<f64>,
    /// Time step of the Volterra grid or of the first-return tables
    #[arg(long, allow_negative_numbers = true)]
    pub step: Option<f64>,
    /// Number of Monte Carlo samples
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Half-width of the box |x|_inf <= R for eigenfunctions and moments
    #[arg(long, allow_negative_numbers = true)]
    pub box_radius: Option<i64>,
    /// Comma-separated lambda values for i-lambda and asymptotics
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerKind>,
    /// Output directory
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Re-run the resolved configuration stored in a metadata sidecar
    #[arg(
        long,
        conflicts_with_all = [
            "command", "dim", "beta", "t", "step", "samples", "seed",
            "box_radius", "lambda", "sampler", "output", "format",
        ]
    )]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub dim: usize,
    pub beta: BetaSpec,
    pub t: f64,
    pub step: f64,
    pub samples: usize,
    pub seed: u64,
    pub box_radius: i64,
    pub lambdas: Vec<f64>,
    pub sampler: SamplerKind,
    pub output: PathBuf,
    pub format: Format,
}

const I_LAMBDA_GRID: [f64; 10] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];
const ASYMPTOTIC_GRID: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

impl RunConfig {
    /// Fills absent flags with the documented defaults and validates the
    /// generic ranges. `env_output` is the value of [`OUTPUT_DIR_ENV`].
    pub fn resolve(cli: &Cli, env_output: Option<&str>) -> Result<Self> {
        let command = cli
            .command
            .ok_or_else(|| CliError::Usage("an experiment name is required".into()))?;
        let t = cli.t.unwrap_or(match command {
            Command::SigmaDist | Command::Clt => 400.0,
            Command::HChain => 1e5,
            Command::Escape => 1e4,
            _ => 1000.0,
        });
        // A coarser kernel step fails the step-halving check at criticality
        // by t = 1000 in d = 3.
        let step = cli.step.unwrap_or_else(|| {
            let default = match command {
                Command::SigmaDist | Command::Clt => homopolymer::montecarlo::RENEWAL_STEP,
                _ => 0.01,
            };
            default.min(t)
        });
        let lambdas = cli.lambda.clone().unwrap_or_else(|| match command {
            Command::ILambda => I_LAMBDA_GRID.to_vec(),
            Command::Asymptotics => ASYMPTOTIC_GRID.to_vec(),
            _ => Vec::new(),
        });
        let output = cli
            .output
            .clone()
            .or_else(|| env_output.filter(|s| !s.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let config = RunConfig {
            command,
            dim: cli.dim.unwrap_or(3),
            beta: cli.beta.unwrap_or(BetaSpec::Critical),
            t,
            step,
            samples: cli.samples.unwrap_or(100_000),
            seed: cli.seed.unwrap_or(1),
            box_radius: cli.box_radius.unwrap_or(match command {
                Command::Moments => 16,
                Command::HChain => 4,
                _ => 10,
            }),
            lambdas,
            sampler: cli.sampler.unwrap_or(SamplerKind::Renewal),
            output,
            format: cli.format.unwrap_or(Format::Csv),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(1..=8).contains(&self.dim) {
            return bad(format!("dim must be in 1..=8, got {}", self.dim));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return bad(format!("t must be positive and finite, got {}", self.t));
        }
        if !(self.step > 0.0) || self.step > self.t {
            return bad(format!("step must lie in (0, t], got {}", self.step));
        }
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if !(1..=10_000).contains(&self.box_radius) {
            return bad(format!("box radius must be in 1..=10000, got {}", self.box_radius));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return bad(format!("lambda values must be finite and >= 0, got {l}"));
        }
        if let BetaSpec::Value(b) = self.beta {
            if !(b >= 0.0) || !b.is_finite() {
                return bad(format!("beta must be finite and >= 0, got {b}"));
            }
        }
        Ok(())
    }

    /// File stem shared by the data file, the sidecar and the plot data.
    pub fn stem(&self) -> PathBuf {
        self.output.join(self.command.name())
    }
}

/// Parses argv into a resolved configuration; `--config` loads the one
/// stored in a sidecar. Help and version requests surface as clap errors.
pub fn parse_args<I, T>(args: I, env_output: Option<&str>) -> std::result::Result<RunConfig, ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(ParseOutcome::Clap)?;
    if let Some(path) = &cli.config {
        return crate::output::load_sidecar_config(path).map_err(ParseOutcome::Cli);
    }
    RunConfig::resolve(&cli, env_output).map_err(ParseOutcome::Cli)
}

#[derive(Debug)]
pub enum ParseOutcome {
    Clap(clap::Error),
    Cli(CliError),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_spec_parses_and_round_trips() {
        assert_eq!("critical".parse::<BetaSpec>().unwrap(), BetaSpec::Critical);
        assert_eq!("2.5".parse::<BetaSpec>().unwrap(), BetaSpec::Value(2.5));
        assert!("-1".parse::<BetaSpec>().is_err());
        assert!("nan".parse::<BetaSpec>().is_err());
        for b in [BetaSpec::Critical, BetaSpec::Value(3.25)] {
            let s = serde_json::to_string(&b).unwrap();
            assert_eq!(serde_json::from_str::<BetaSpec>(&s).unwrap(), b);
        }
    }

    #[test]
    fn defaults_depend_on_the_command() {
        let c = parse_args(["homopolymer", "sigma-dist"], None).unwrap();
        assert_eq!((c.t, c.step, c.samples), (400.0, 0.02, 100_000));
        assert_eq!(c.output, PathBuf::from("."));
        let c = parse_args(["homopolymer", "heat-kernel", "--t", "0.005"], Some("/tmp/x")).unwrap();
        assert_eq!(c.step, 0.005);
        assert_eq!(c.output, PathBuf::from("/tmp/x"));
        let c = parse_args(["homopolymer", "i-lambda", "--lambda", "0.5,1"], None).unwrap();
        assert_eq!(c.lambdas, vec![0.5, 1.0]);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for args in [
            vec!["homopolymer", "partition", "--t", "-1"],
            vec!["homopolymer", "partition", "--dim", "0"],
            vec!["homopolymer", "partition", "--step", "5", "--t", "1"],
        ] {
            assert!(matches!(parse_args(args, None), Err(ParseOutcome::Cli(CliError::Config(_)))));
        }
        assert!(matches!(
            parse_args(["homopolymer", "nonsense"], None),
            Err(ParseOutcome::Clap(_))
        ));
    }
}
