use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use snn_stdp::mnist::Split;

use crate::commands;
use crate::config::{parse_classes, KernelKind, RuleKind, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "snn-stdp", version, about = "Train and probe a three-layer LIF network with windowed STDP")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train with the configured rule and save metrics and weights.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Error rate of a saved network on one split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Output-layer V/P traces and spikes for one image at two step sizes.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Index into the (filtered, capped) split.
        #[arg(long)]
        sample: usize,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Present an all-zero image instead of the sample's pixels.
        #[arg(long)]
        blank: bool,
    },
    /// Train the windowed and all-pairs rules side by side.
    CompareRules {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classes(pub Vec<u8>);

fn classes(s: &str) -> Result<Classes, String> {
    parse_classes(s).map(Classes)
}

/// Flags shared by every command. Each one overrides the config file.
#[derive(Debug, Default, Args)]
pub struct Common {
    /// TOML file with any subset of the run settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory with the IDX files (default: $SNN_STDP_DATA, else data/mnist).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Parent directory for run outputs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated digits, or `all`.
    #[arg(long, value_parser = classes)]
    pub classes: Option<Classes>,
    /// Training images to keep (0 keeps all).
    #[arg(long)]
    pub train_cap: Option<usize>,
    /// Test images to keep (0 keeps all).
    #[arg(long)]
    pub test_cap: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Euler step, ms.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleKind>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelKind>,
}

impl Common {
    /// Defaults, then the config file, then these flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    c.$field = v;
                }
            )*};
        }
        set!(seed, data_dir, out, train_cap, test_cap, epochs, alpha, beta, dt, rule, kernel);
        if let Some(Classes(list)) = &self.classes {
            c.classes = list.clone();
        }
        Ok(c)
    }
}

/// Run one parsed command line; returns the output directory.
pub fn run(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::Train { common } => commands::cmd_train(&common.resolve()?),
        Command::Eval { common, checkpoint, split } => {
            Ok(commands::cmd_eval(&common.resolve()?, &checkpoint, split.into())?.0)
        }
        Command::Trace { common, checkpoint, sample, split, blank } => {
            Ok(commands::cmd_trace(&common.resolve()?, &checkpoint, sample, split.into(), blank)?.0)
        }
        Command::CompareRules { common } => Ok(commands::cmd_compare_rules(&common.resolve()?)?.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "epochs = 7\nalpha = 0.5\nseed = 3\n").unwrap();
        let cli = Cli::try_parse_from([
            "snn-stdp",
            "train",
            "--config",
            path.to_str().unwrap(),
            "--alpha",
            "0.25",
            "--classes",
            "2,3",
            "--rule",
            "allpairs",
            "--kernel",
            "exp",
        ])
        .unwrap();
        let Command::Train { common } = cli.command else { panic!("wrong command") };
        let c = common.resolve().unwrap();
        assert_eq!(c.epochs, 7);
        assert_eq!(c.alpha, 0.25);
        assert_eq!(c.seed, 3);
        assert_eq!(c.classes, vec![2, 3]);
        assert_eq!(c.rule, RuleKind::Allpairs);
        assert_eq!(c.kernel, KernelKind::Exp);
        assert_eq!(c.beta, RunConfig::default().beta);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(Cli::try_parse_from(["snn-stdp", "train", "--rule", "some"]).is_err());
        assert!(Cli::try_parse_from(["snn-stdp", "train", "--classes", "1,z"]).is_err());
        assert!(Cli::try_parse_from(["snn-stdp", "trace", "--checkpoint", "w.txt"]).is_err());
    }
}
