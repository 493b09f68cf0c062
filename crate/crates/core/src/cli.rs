//! `qtcnn` command line: `prepare`, `train`, `sweep`, `eval` and `params`.
//!
//! Settings resolve as built-in defaults, then the TOML file given with
//! `--config`, then command-line flags. The effective settings are written
//! next to every artifact as `config.json`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{prepare, CsvOptions, DataSource, Manifest, PrepareOptions, Splits};
use crate::error::{Error, Result};
use crate::generator::DEFAULT_MAPPING_HIDDEN;
use crate::nn::CnnArchitecture;
use crate::runner::{
    evaluate, param_report, sweep_blocks, train, Checkpoint, Mode, RunRecord, Seeds, TrainConfig,
};

pub const CONFIG_VERSION: u32 = 1;
const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "qtcnn", version, about = "Quantum-trained CNN for audio-feature classification")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; init, shuffle and split seeds are derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode, split, scale and window a feature table into a manifest.
    Prepare(PrepareArgs),
    /// Train one model on a prepared manifest.
    Train(TrainArgs),
    /// Train QT models over a list of block counts plus the classical baseline.
    Sweep(SweepArgs),
    /// Evaluate a checkpoint on one split of a manifest.
    Eval(EvalArgs),
    /// Print the trainable-parameter accounting.
    Params(ParamsArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Feature CSV with one row per frame.
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Generate the seeded two-Gaussian stand-in dataset instead of reading a file.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub segment_column: Option<String>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Train, validation and test fractions, e.g. `0.8,0.1,0.1`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub ratios: Option<Vec<f64>>,
    #[arg(long)]
    pub n_per_class: Option<usize>,
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Qt,
    Classical,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Qt => Mode::Qt,
            ModeArg::Classical => Mode::Classical,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    /// Defaults to `<out-dir>/manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub mapping_hidden: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: TrainFlags,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub blocks: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: TrainFlags,
    /// Comma list (`12,24,48`) or range with step (`12..96:12`, inclusive).
    #[arg(long)]
    pub blocks: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    /// Take the input shape from a manifest instead of `--window/--features`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub mapping_hidden: Option<usize>,
}

/// Contents of the `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub version: Option<u32>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub input: Option<PathBuf>,
    pub synthetic: Option<bool>,
    pub label_column: Option<String>,
    pub segment_column: Option<String>,
    pub window: Option<usize>,
    pub ratios: Option<[f64; 3]>,
    pub n_per_class: Option<usize>,
    pub features: Option<usize>,
    pub separation: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub manifest: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub blocks: Option<usize>,
    pub sweep_blocks: Option<Vec<usize>>,
    pub mapping_hidden: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(v) = cfg.version {
            if v != CONFIG_VERSION {
                return Err(Error::Config(format!(
                    "config version {v} is not supported (expected {CONFIG_VERSION})"
                )));
            }
        }
        Ok(cfg)
    }
}

/// Parses `12,24,48` or `12..96:12`.
pub fn parse_block_list(list: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse block list '{list}'"));
    let list = list.trim();
    let blocks: Vec<usize> = if let Some((range, step)) = list.split_once(':') {
        let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        let step: usize = step.trim().parse().map_err(|_| bad())?;
        if step == 0 || lo > hi {
            return Err(bad());
        }
        (lo..=hi).step_by(step).collect()
    } else {
        list.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if blocks.is_empty() || blocks.contains(&0) {
        return Err(bad());
    }
    Ok(blocks)
}

struct Context {
    file: FileConfig,
    seed: u64,
    out_dir: PathBuf,
}

impl Context {
    fn seeds(&self) -> Seeds {
        Seeds::from_base(self.seed)
    }

    fn manifest_path(&self, flag: &Option<PathBuf>) -> PathBuf {
        flag.clone()
            .or_else(|| self.file.train.manifest.clone())
            .unwrap_or_else(|| self.out_dir.join("manifest.json"))
    }

    fn train_config(&self, flags: &TrainFlags, manifest: &Manifest) -> TrainConfig {
        let t = &self.file.train;
        let defaults = TrainConfig::default();
        TrainConfig {
            mode: t.mode.unwrap_or(defaults.mode),
            epochs: flags.epochs.or(t.epochs).unwrap_or(defaults.epochs),
            batch_size: flags.batch_size.or(t.batch_size).unwrap_or(defaults.batch_size),
            learning_rate: flags.lr.or(t.learning_rate).unwrap_or(defaults.learning_rate),
            n_blocks: t.blocks.unwrap_or(defaults.n_blocks),
            mapping_hidden: flags
                .mapping_hidden
                .or(t.mapping_hidden)
                .unwrap_or(DEFAULT_MAPPING_HIDDEN),
            seeds: self.seeds(),
            arch: CnnArchitecture::for_input(manifest.window(), manifest.features()),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn load_data(path: &Path) -> Result<(Manifest, Splits)> {
    let manifest = Manifest::load(path)?;
    let splits = manifest.materialize()?;
    Ok((manifest, splits))
}

/// Effective settings of a training command, echoed into its outputs.
#[derive(Serialize)]
struct EffectiveTrain<'a> {
    manifest: &'a Path,
    train: &'a TrainConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_blocks: Option<&'a [usize]>,
}

fn cmd_prepare(ctx: &Context, args: &PrepareArgs, out: &mut dyn Write) -> Result<()> {
    let d = &ctx.file.data;
    let seeds = ctx.seeds();
    let synthetic = args.synthetic || (args.input.is_none() && d.synthetic.unwrap_or(false));
    let source = if synthetic {
        DataSource::Synthetic {
            n_per_class: args.n_per_class.or(d.n_per_class).unwrap_or(500),
            features: args.features.or(d.features).unwrap_or(26),
            separation: args.separation.or(d.separation).unwrap_or(6.0),
            seed: ctx.seed,
        }
    } else {
        let path = args.input.clone().or_else(|| d.input.clone()).ok_or_else(|| {
            Error::Config("prepare needs --input <csv> or --synthetic".into())
        })?;
        let defaults = CsvOptions::default();
        DataSource::Csv {
            path,
            columns: CsvOptions {
                label_column: args
                    .label_column
                    .clone()
                    .or_else(|| d.label_column.clone())
                    .unwrap_or(defaults.label_column),
                segment_column: args
                    .segment_column
                    .clone()
                    .or_else(|| d.segment_column.clone())
                    .unwrap_or(defaults.segment_column),
            },
        }
    };
    let ratios = match (&args.ratios, d.ratios) {
        (Some(r), _) => [r[0], r[1], r[2]],
        (None, Some(r)) => r,
        (None, None) => PrepareOptions::default().ratios,
    };
    let options = PrepareOptions {
        window: args.window.or(d.window).unwrap_or(5),
        ratios,
        split_seed: seeds.split,
    };
    let (manifest, splits) = prepare(&source, &options)?;
    let path = ctx.out_dir.join("manifest.json");
    write_file(&path, &manifest.to_json()?)?;
    writeln!(
        out,
        "wrote {}\nwindows: {} ({} x {}), classes {:?} = {:?}\nsplits: train {}, validation {}, test {}",
        path.display(),
        manifest.n_windows,
        manifest.window(),
        manifest.features(),
        manifest.label_map.classes,
        manifest.class_counts,
        splits.train.len(),
        splits.validation.len(),
        splits.test.len()
    )
    .map_err(io_out)
}

fn epochs_jsonl(record: &RunRecord) -> Result<String> {
    let mut s = String::new();
    for e in &record.epochs {
        s.push_str(&serde_json::to_string(e)?);
        s.push('\n');
    }
    Ok(s)
}

fn run_summary(record: &RunRecord) -> String {
    let mut s = format!(
        "mode: {}\ntrainable parameters: {}\nclassical parameters: {}\nparameter ratio: {:.2}%\n",
        record.config.mode,
        record.trainable,
        record.classical_params,
        100.0 * record.parameter_ratio
    );
    if record.config.mode == Mode::Qt {
        s.push_str(&format!("qnn blocks: {}\n", record.config.n_blocks));
    }
    s.push_str(&format!(
        "epochs: {} (best validation at epoch {})\n\
         train accuracy: {:.4}\nvalidation accuracy: {:.4}\ntest accuracy: {:.4}\ntest loss: {:.6}\n",
        record.epochs.len(),
        record.best_epoch,
        record.train.accuracy,
        record.validation.accuracy,
        record.test.accuracy,
        record.test.loss
    ));
    s
}

fn cmd_train(ctx: &Context, args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let manifest_path = ctx.manifest_path(&args.common.manifest);
    let (manifest, splits) = load_data(&manifest_path)?;
    let mut config = ctx.train_config(&args.common, &manifest);
    if let Some(m) = args.mode {
        config.mode = m.into();
    }
    if let Some(b) = args.blocks {
        config.n_blocks = b;
    }
    let outcome = train(&config, &splits)?;
    let run_dir = ctx.out_dir.join(match config.mode {
        Mode::Qt => format!("qt-b{}", config.n_blocks),
        Mode::Classical => "classical".into(),
    });
    write_json(
        &run_dir.join("config.json"),
        &EffectiveTrain {
            manifest: &manifest_path,
            train: &outcome.record.config,
            sweep_blocks: None,
        },
    )?;
    write_json(&run_dir.join("record.json"), &outcome.record)?;
    write_file(&run_dir.join("epochs.jsonl"), &epochs_jsonl(&outcome.record)?)?;
    Checkpoint::from_outcome(&outcome).save(run_dir.join("checkpoint.json"))?;
    let summary = run_summary(&outcome.record);
    write_file(&run_dir.join("summary.txt"), &summary)?;
    writeln!(out, "{summary}run directory: {}", run_dir.display()).map_err(io_out)
}

fn cmd_sweep(ctx: &Context, args: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let manifest_path = ctx.manifest_path(&args.common.manifest);
    let (manifest, splits) = load_data(&manifest_path)?;
    let config = ctx.train_config(&args.common, &manifest);
    let blocks = match (&args.blocks, &ctx.file.train.sweep_blocks) {
        (Some(s), _) => parse_block_list(s)?,
        (None, Some(b)) => b.clone(),
        (None, None) => parse_block_list("12..96:12")?,
    };
    let table = sweep_blocks(&config, &blocks, &splits)?;
    let dir = ctx.out_dir.join("sweep");
    write_json(
        &dir.join("config.json"),
        &EffectiveTrain {
            manifest: &manifest_path,
            train: &config,
            sweep_blocks: Some(&blocks),
        },
    )?;
    write_file(&dir.join("sweep.csv"), &table.to_csv())?;
    write_file(&dir.join("sweep.txt"), &table.to_text())?;
    for r in &table.records {
        let name = match r.config.mode {
            Mode::Qt => format!("record-qt-b{}.json", r.config.n_blocks),
            Mode::Classical => "record-classical.json".into(),
        };
        write_json(&dir.join(name), r)?;
    }
    writeln!(out, "{}sweep directory: {}", table.to_text(), dir.display()).map_err(io_out)
}

fn cmd_eval(ctx: &Context, args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let (_, splits) = load_data(&ctx.manifest_path(&args.manifest))?;
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let split = match args.split {
        SplitArg::Train => &splits.train,
        SplitArg::Validation => &splits.validation,
        SplitArg::Test => &splits.test,
    };
    let metrics = evaluate(&ckpt.arch, &ckpt.params, split)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&metrics)?).map_err(io_out)
}

fn cmd_params(ctx: &Context, args: &ParamsArgs, out: &mut dyn Write) -> Result<()> {
    let (window, features) = match &args.manifest {
        Some(p) => {
            let m = Manifest::load(p)?;
            (m.window(), m.features())
        }
        None => (
            args.window.or(ctx.file.data.window).unwrap_or(5),
            args.features.or(ctx.file.data.features).unwrap_or(26),
        ),
    };
    let arch = CnnArchitecture::for_input(window, features);
    let blocks = args
        .blocks
        .or(ctx.file.train.blocks)
        .unwrap_or(TrainConfig::default().n_blocks);
    let hidden = args
        .mapping_hidden
        .or(ctx.file.train.mapping_hidden)
        .unwrap_or(DEFAULT_MAPPING_HIDDEN);
    let report = param_report(&arch, blocks, hidden)?;
    write!(out, "{}", report.to_text()).map_err(io_out)
}

/// Runs a parsed command line, writing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let ctx = Context {
        seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        out_dir: cli
            .out_dir
            .clone()
            .or_else(|| file.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("qtcnn-out")),
        file,
    };
    match &cli.command {
        Command::Prepare(a) => cmd_prepare(&ctx, a, out),
        Command::Train(a) => cmd_train(&ctx, a, out),
        Command::Sweep(a) => cmd_sweep(&ctx, a, out),
        Command::Eval(a) => cmd_eval(&ctx, a, out),
        Command::Params(a) => cmd_params(&ctx, a, out),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Argument errors come back as [`Error::Config`].
pub fn run_from<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    execute(&cli, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_lists() {
        assert_eq!(parse_block_list("12,24, 48").unwrap(), vec![12, 24, 48]);
        assert_eq!(
            parse_block_list("12..96:12").unwrap(),
            vec![12, 24, 36, 48, 60, 72, 84, 96]
        );
        assert!(parse_block_list("0,12").is_err());
        assert!(parse_block_list("12..6:1").is_err());
        assert!(parse_block_list("a").is_err());
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "version = 1\n[train]\nepochs = 3\nbogus = 1\n").unwrap();
        assert!(matches!(FileConfig::load(&p), Err(Error::Config(_))));
        std::fs::write(&p, "version = 1\nseed = 7\n[train]\nepochs = 3\nmode = \"classical\"\n").unwrap();
        let c = FileConfig::load(&p).unwrap();
        assert_eq!(c.train.epochs, Some(3));
        assert_eq!(c.train.mode, Some(Mode::Classical));
        std::fs::write(&p, "version = 2\n").unwrap();
        assert!(FileConfig::load(&p).is_err());
    }

    #[test]
    fn params_report_defaults() {
        let mut out = Vec::new();
        run_from(["qtcnn", "params", "--blocks", "96"], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("classical CNN parameters (M): 3373"));
        assert!(text.contains("qubits (N = ceil(log2 M)):     12"));
        assert!(text.contains("QNN rotation angles:          1152"));
        assert!(text.contains("QT trainable total:           1461"));
        assert!(text.contains("reference total:              1464"));
    }
}
