//! Resolving training settings and running one training job.

use std::path::PathBuf;

use sau_core::activation::ActivationKind;
use sau_core::dataset::{load_mnist, make_sine_regression, make_xor, resolve_data_dir, DatasetError, DatasetSplit, MnistPart};
use sau_core::nn::{init_network, train, LrSchedule, NetworkSpec, OptimizerKind, OutputKind, TrainConfig, TrainReport};

use crate::config::ConfigFile;
use crate::{CliError, TrainFlags};

pub const TRAIN_KEYS: &[&str] = &[
    "dataset",
    "data-dir",
    "arch",
    "activation",
    "alpha",
    "n",
    "epochs",
    "batch",
    "optimizer",
    "lr",
    "momentum",
    "weight-decay",
    "schedule",
    "seed",
    "train-limit",
    "test-limit",
    "sine-points",
    "output",
];

pub const COMPARE_KEYS: &[&str] = &[
    "dataset",
    "data-dir",
    "arch",
    "activations",
    "repeats",
    "alpha",
    "n",
    "epochs",
    "batch",
    "optimizer",
    "lr",
    "momentum",
    "weight-decay",
    "schedule",
    "seed",
    "train-limit",
    "test-limit",
    "sine-points",
    "output",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetChoice {
    Mnist,
    Xor,
    Sine,
}

impl DatasetChoice {
    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "mnist" => Ok(DatasetChoice::Mnist),
            "xor" => Ok(DatasetChoice::Xor),
            "sine" => Ok(DatasetChoice::Sine),
            other => Err(CliError::Usage(format!(
                "unknown dataset '{other}' (expected mnist, xor or sine)"
            ))),
        }
    }

    fn default_hidden(self) -> Vec<usize> {
        match self {
            DatasetChoice::Mnist => vec![256],
            DatasetChoice::Xor => vec![8],
            DatasetChoice::Sine => vec![64],
        }
    }
}

/// Fully resolved settings: flags, then config file, then defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: DatasetChoice,
    pub data_dir: PathBuf,
    pub hidden: Vec<usize>,
    pub alpha: Option<f64>,
    pub n: Option<f64>,
    pub train: TrainConfig,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub sine_points: usize,
    pub output: Option<PathBuf>,
}

fn parse_arch(s: &str) -> Result<Vec<usize>, CliError> {
    let widths: Result<Vec<usize>, _> = s.split(',').map(|w| w.trim().parse::<usize>()).collect();
    match widths {
        Ok(w) if !w.is_empty() && !w.contains(&0) => Ok(w),
        _ => Err(CliError::Usage(format!(
            "bad --arch '{s}': expected positive widths like 256 or 128,64"
        ))),
    }
}

pub fn load_config(flags: &TrainFlags, keys: &[&str]) -> Result<ConfigFile, CliError> {
    match &flags.config {
        Some(p) => ConfigFile::load(p, keys),
        None => Ok(ConfigFile::default()),
    }
}

impl RunConfig {
    pub fn resolve(flags: &TrainFlags, file: &ConfigFile) -> Result<Self, CliError> {
        let dataset = DatasetChoice::parse(&file.pick(flags.dataset.clone(), "dataset")?.unwrap_or_else(|| "mnist".into()))?;
        let hidden = match file.pick(flags.arch.clone(), "arch")? {
            Some(a) => parse_arch(&a)?,
            None => dataset.default_hidden(),
        };
        let optimizer_name = file
            .pick(flags.optimizer.clone(), "optimizer")?
            .unwrap_or_else(|| "adam".into());
        let momentum = file.pick(flags.momentum, "momentum")?;
        let weight_decay = file.pick(flags.weight_decay, "weight-decay")?;
        let optimizer = match optimizer_name.as_str() {
            "adam" => {
                if momentum.is_some() || weight_decay.is_some() {
                    return Err(CliError::Usage(
                        "momentum and weight-decay apply to --optimizer sgd only".into(),
                    ));
                }
                OptimizerKind::adam()
            }
            "sgd" => OptimizerKind::SgdMomentum {
                momentum: momentum.unwrap_or(0.9),
                weight_decay: weight_decay.unwrap_or(0.0),
            },
            other => return Err(CliError::Usage(format!("unknown optimizer '{other}' (expected adam or sgd)"))),
        };
        let epochs = file.pick(flags.epochs, "epochs")?.unwrap_or(5);
        let lr_schedule = match file.pick(flags.schedule.clone(), "schedule")?.as_deref() {
            None | Some("constant") => LrSchedule::Constant,
            Some("cosine") => LrSchedule::CosineAnnealing { total_epochs: epochs },
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "unknown schedule '{other}' (expected constant or cosine)"
                )))
            }
        };
        let train = TrainConfig {
            optimizer,
            learning_rate: file.pick(flags.lr, "lr")?.unwrap_or(1e-3),
            lr_schedule,
            batch_size: file.pick(flags.batch, "batch")?.unwrap_or(128),
            epochs,
            seed: file.pick(flags.seed, "seed")?.unwrap_or(42),
        };
        train.validate().map_err(|e| CliError::Usage(e.to_string()))?;

        let alpha = file.pick(flags.alpha, "alpha")?;
        if let Some(a) = alpha {
            if !a.is_finite() {
                return Err(CliError::Usage(format!("--alpha must be finite, got {a}")));
            }
        }
        let n = file.pick(flags.n, "n")?;
        if let Some(n) = n {
            if !(n.is_finite() && n > 0.0) {
                return Err(CliError::Usage(format!("--n must be positive, got {n}")));
            }
        }
        let sine_points = file.pick(flags.sine_points, "sine-points")?.unwrap_or(256);
        if sine_points == 0 {
            return Err(CliError::Usage("--sine-points must be >= 1".into()));
        }
        let data_dir: Option<PathBuf> = file.pick(flags.data_dir.clone(), "data-dir")?;
        Ok(RunConfig {
            dataset,
            data_dir: resolve_data_dir(data_dir.as_deref()),
            hidden,
            alpha,
            n,
            train,
            train_limit: file.pick(flags.train_limit, "train-limit")?,
            test_limit: file.pick(flags.test_limit, "test-limit")?,
            sine_points,
            output: file.pick(flags.output.clone(), "output")?,
        })
    }

    pub fn activation(&self, name: &str) -> Result<ActivationKind, CliError> {
        ActivationKind::from_name(name, self.alpha, self.n).map_err(|e| CliError::Usage(e.to_string()))
    }
}

pub struct Data {
    pub train: DatasetSplit,
    pub test: DatasetSplit,
    pub output: OutputKind,
}

fn io(e: DatasetError) -> CliError {
    CliError::Io(e.to_string())
}

pub fn load_data(cfg: &RunConfig) -> Result<Data, CliError> {
    let (mut train, mut test, output) = match cfg.dataset {
        DatasetChoice::Mnist => match (
            load_mnist(&cfg.data_dir, MnistPart::Train),
            load_mnist(&cfg.data_dir, MnistPart::Test),
        ) {
            (Ok(train), Ok(test)) => (train, test, OutputKind::Softmax),
            (Err(DatasetError::MissingFiles { expected: mut a }), Err(DatasetError::MissingFiles { expected: b })) => {
                a.extend(b);
                return Err(io(DatasetError::MissingFiles { expected: a }));
            }
            (Err(e), _) | (_, Err(e)) => return Err(io(e)),
        },
        DatasetChoice::Xor => (make_xor(), make_xor(), OutputKind::Softmax),
        DatasetChoice::Sine => (
            make_sine_regression(cfg.sine_points, cfg.train.seed),
            make_sine_regression(cfg.sine_points, cfg.train.seed.wrapping_add(1)),
            OutputKind::Linear,
        ),
    };
    if let Some(k) = cfg.train_limit {
        train = train.take(k);
    }
    if let Some(k) = cfg.test_limit {
        test = test.take(k);
    }
    if train.is_empty() || test.is_empty() {
        return Err(CliError::Usage("train and test sets must be non-empty".into()));
    }
    Ok(Data { train, test, output })
}

pub fn run_once(cfg: &RunConfig, data: &Data, activation: ActivationKind, seed: u64) -> Result<TrainReport, CliError> {
    let mut sizes = vec![data.train.inputs.cols()];
    sizes.extend(&cfg.hidden);
    sizes.push(data.train.output_size());
    let spec = NetworkSpec::new(sizes, activation, data.output, seed);
    let mut net = init_network(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    log::info!("training {} on {} ({:?})", activation, data.train.name, spec.layer_sizes);
    train(&mut net, &data.train, &data.test, &train_cfg).map_err(|e| CliError::Failed(format!("{activation}: {e}")))
}
