//! JSON experiment configuration: parsing, validation and per-run planning.

use std::fmt;
use std::path::PathBuf;

use serde::Deserialize;
use serde_json::Value;
use signopt_core::comms::{auto_rounds, distributed_presets, Compressor, DistributedOptions, FccConfig};
use signopt_core::nalgebra::DMatrix;
use signopt_core::optim::{single_node_presets, Hyper, OptimizerKind, OptimizerState, PresetHyper, RunOptions};
use signopt_core::problems::{
    split_workers, Objective, PenaltyNet, SmoothnessConstants, StochasticOracle, WorkerOracle,
};
use signopt_core::rng::{standard_normal_vec, Purpose};
use signopt_core::signcore::DescentOperator;
use signopt_core::{Error as CoreError, Execution, ParamVec};

/// A configuration problem located at a dotted field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn at(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self { path: path.into(), message: message.to_string() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "config error: {}", self.message)
        } else {
            write!(f, "config error at `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type CfgResult<T> = Result<T, ConfigError>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub init: InitConfig,
    pub optimizer: OptimizerConfig,
    #[serde(rename = "T")]
    pub horizon: Horizon,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub compression: Option<CompressionConfig>,
    #[serde(default)]
    pub logging: LoggingConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_name() -> String {
    "run".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Horizon {
    Single(u64),
    Grid(Vec<u64>),
}

impl Horizon {
    pub fn values(&self) -> Vec<u64> {
        match self {
            Horizon::Single(t) => vec![*t],
            Horizon::Grid(ts) => ts.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    RankOne,
    ScalarPower,
    ScalarExp,
    Cubic,
    PenaltyNet,
}

/// Problem descriptor. Which optional fields apply depends on `kind`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub d: Option<usize>,
    /// Quadratic: diagonal of `A` (defaults to all ones).
    pub diag: Option<Vec<f64>>,
    /// Quadratic: full `A` as rows.
    pub a: Option<Vec<Vec<f64>>>,
    /// Quadratic: linear term.
    pub b: Option<Vec<f64>>,
    /// Rank-one: spectral norm of the random spike `Y` (default 2).
    pub y_norm: Option<f64>,
    /// Rank-one: explicit symmetric `Y` as rows.
    pub y: Option<Vec<Vec<f64>>>,
    /// Seed for randomly generated problem data.
    pub seed: Option<u64>,
    pub exponent: Option<u32>,
    /// Penalty network: input features, targets, hidden width and penalty.
    pub features: Option<Vec<f64>>,
    pub targets: Option<Vec<f64>>,
    pub hidden: Option<usize>,
    pub rho_bar: Option<f64>,
    /// `"derived"` or an object of smoothness constants.
    pub constants: Option<Value>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Zeros,
    Constant {
        value: f64,
    },
    /// `N(0, scale^2 I)`, seeded per run.
    Gaussian {
        scale: f64,
    },
    /// Closed-form minimizer plus `offset` times a seeded random sign pattern.
    NearMinimizer {
        offset: f64,
    },
    Explicit {
        w0: Vec<f64>,
    },
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig::Gaussian { scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerChoice {
    SignSgd,
    ASignSgd,
    Lion,
    GSignSgd,
    Sgd,
    Sgdm,
    CaSignSgd,
}

impl OptimizerChoice {
    fn core_kind(self) -> OptimizerKind {
        match self {
            OptimizerChoice::SignSgd => OptimizerKind::SignSgd,
            OptimizerChoice::ASignSgd | OptimizerChoice::CaSignSgd => OptimizerKind::ASignSgd,
            OptimizerChoice::Lion => OptimizerKind::Lion,
            OptimizerChoice::GSignSgd => OptimizerKind::GSignSgd,
            OptimizerChoice::Sgd => OptimizerKind::Sgd,
            OptimizerChoice::Sgdm => OptimizerKind::Sgdm,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OptimizerChoice::CaSignSgd => "ca_sign_sgd",
            other => other.core_kind().name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Preset {
    #[serde(rename = "theorem1")]
    SingleNode,
    #[serde(rename = "theorem1_accel")]
    SingleNodeAccel,
    #[serde(rename = "theorem2")]
    Distributed,
    #[serde(rename = "theorem2_accel")]
    DistributedAccel,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::SingleNode => "theorem1",
            Preset::SingleNodeAccel => "theorem1_accel",
            Preset::Distributed => "theorem2",
            Preset::DistributedAccel => "theorem2_accel",
        }
    }

    fn accelerated(self) -> bool {
        matches!(self, Preset::SingleNodeAccel | Preset::DistributedAccel)
    }

    fn distributed(self) -> bool {
        matches!(self, Preset::Distributed | Preset::DistributedAccel)
    }

    fn required(self) -> &'static [&'static str] {
        if self.accelerated() {
            &["L1", "H1", "H2"]
        } else {
            &["L1"]
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerChoice,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub zeta: Option<f64>,
    pub lambda: Option<f64>,
    /// `"sign"` (default) or `"l2_normalize"`; only `g_sign_sgd` may change it.
    pub operator: Option<String>,
    pub preset: Option<Preset>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub sigma_bar: f64,
    #[serde(default = "one")]
    pub n: usize,
    /// Seed for the worker heterogeneity draw.
    #[serde(default)]
    pub bias_seed: u64,
}

fn one() -> usize {
    1
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { sigma: 0.0, sigma_bar: 0.0, n: 1, bias_seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompressionKind {
    TopK,
    Identity,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionConfig {
    pub kind: CompressionKind,
    pub k: Option<usize>,
    /// Round count or `"auto"` (the default).
    pub u: Option<Value>,
    #[serde(default)]
    pub eval_at_v: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoggingConfig {
    #[serde(default)]
    pub exact_grad_logging: bool,
    #[serde(default)]
    pub smoothness_trace: bool,
    /// Step-grid spacing of the smoothness estimator.
    pub smoothness_delta: Option<f64>,
}

/// Fully validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub objective: Objective,
    /// Constants declared in the problem descriptor, if any.
    pub constants: Option<SmoothnessConstants>,
    workers: Option<WorkerOracle>,
}

/// Everything needed to execute one `(T, seed)` run.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub run_id: String,
    pub state0: OptimizerState,
    pub options: RunOptions,
    pub distributed: Option<DistributedOptions>,
    pub warnings: Vec<String>,
}

/// Parses and validates a JSON document.
pub fn parse_config(text: &str) -> CfgResult<Experiment> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::at(path, e.into_inner())
    })?;
    Experiment::new(config)
}

fn core_err(path: &str, e: CoreError) -> ConfigError {
    ConfigError::at(path, e)
}

fn matrix(rows: &[Vec<f64>], path: &str) -> CfgResult<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(ConfigError::at(path, "expected a non-empty square matrix"));
    }
    Ok(DMatrix::from_row_iterator(n, n, rows.iter().flatten().copied()))
}

impl ProblemConfig {
    fn reject_extra(&self, allowed: &[&str]) -> CfgResult<()> {
        let present = [
            ("diag", self.diag.is_some()),
            ("a", self.a.is_some()),
            ("b", self.b.is_some()),
            ("y_norm", self.y_norm.is_some()),
            ("y", self.y.is_some()),
            ("seed", self.seed.is_some()),
            ("exponent", self.exponent.is_some()),
            ("features", self.features.is_some()),
            ("targets", self.targets.is_some()),
            ("hidden", self.hidden.is_some()),
            ("rho_bar", self.rho_bar.is_some()),
        ];
        for (name, set) in present {
            if set && !allowed.contains(&name) {
                return Err(ConfigError::at(format!("problem.{name}"), "not a parameter of this problem kind"));
            }
        }
        Ok(())
    }

    fn dim(&self) -> CfgResult<usize> {
        match self.d {
            Some(0) => Err(ConfigError::at("problem.d", "must be >= 1")),
            Some(d) => Ok(d),
            None => Err(ConfigError::at("problem.d", "missing field")),
        }
    }

    fn check_dim(&self, actual: usize) -> CfgResult<()> {
        match self.d {
            Some(d) if d != actual => {
                Err(ConfigError::at("problem.d", format!("is {d} but the problem data has dimension {actual}")))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> CfgResult<Objective> {
        let obj = match self.kind {
            ProblemKind::Quadratic => {
                self.reject_extra(&["diag", "a", "b"])?;
                let a = match (&self.a, &self.diag) {
                    (Some(_), Some(_)) => {
                        return Err(ConfigError::at("problem.a", "give either `a` or `diag`, not both"))
                    }
                    (Some(rows), None) => matrix(rows, "problem.a")?,
                    (None, Some(diag)) => {
                        DMatrix::from_diagonal(&signopt_core::nalgebra::DVector::from_column_slice(diag))
                    }
                    (None, None) => DMatrix::identity(self.dim()?, self.dim()?),
                };
                let b = self.b.clone().unwrap_or_else(|| vec![0.0; a.nrows()]);
                let obj = Objective::quadratic(a, b).map_err(|e| core_err("problem", e))?;
                self.check_dim(obj.dim())?;
                obj
            }
            ProblemKind::RankOne => {
                self.reject_extra(&["y_norm", "y", "seed"])?;
                let obj = match &self.y {
                    Some(rows) => {
                        if self.y_norm.is_some() || self.seed.is_some() {
                            return Err(ConfigError::at("problem.y", "explicit `y` excludes `y_norm` and `seed`"));
                        }
                        Objective::rank_one(matrix(rows, "problem.y")?).map_err(|e| core_err("problem.y", e))?
                    }
                    None => Objective::rank_one_spiked(self.dim()?, self.y_norm.unwrap_or(2.0), self.seed.unwrap_or(0))
                        .map_err(|e| core_err("problem", e))?,
                };
                self.check_dim(obj.dim())?;
                obj
            }
            ProblemKind::ScalarPower => {
                self.reject_extra(&["exponent"])?;
                let n = self.exponent.ok_or_else(|| ConfigError::at("problem.exponent", "missing field"))?;
                Objective::scalar_power(n, self.dim()?).map_err(|e| core_err("problem.exponent", e))?
            }
            ProblemKind::ScalarExp => {
                self.reject_extra(&[])?;
                Objective::scalar_exp(self.dim()?).map_err(|e| core_err("problem", e))?
            }
            ProblemKind::Cubic => {
                self.reject_extra(&[])?;
                Objective::cubic(self.dim()?).map_err(|e| core_err("problem", e))?
            }
            ProblemKind::PenaltyNet => {
                self.reject_extra(&["features", "targets", "hidden", "rho_bar"])?;
                let need = |v: &Option<Vec<f64>>, name: &str| {
                    v.clone().ok_or_else(|| ConfigError::at(format!("problem.{name}"), "missing field"))
                };
                let net = PenaltyNet::new(
                    need(&self.features, "features")?,
                    need(&self.targets, "targets")?,
                    self.hidden.unwrap_or(4),
                    self.rho_bar.unwrap_or(1.0),
                )
                .map_err(|e| core_err("problem", e))?;
                let obj = Objective::penalty_net(net).map_err(|e| core_err("problem", e))?;
                self.check_dim(obj.dim())?;
                obj
            }
        };
        Ok(obj)
    }

    /// Declared constants: `"derived"` takes the objective's closed-form ones.
    fn declared_constants(&self, obj: &Objective) -> CfgResult<Option<SmoothnessConstants>> {
        match &self.constants {
            None => Ok(None),
            Some(Value::String(s)) if s == "derived" => Ok(Some(*obj.smoothness())),
            Some(v @ Value::Object(_)) => {
                let k: SmoothnessConstants = serde_path_to_error::deserialize(v.clone())
                    .map_err(|e| ConfigError::at(format!("problem.constants.{}", e.path()), e.into_inner()))?;
                k.validate().map_err(|e| core_err("problem.constants", e))?;
                Ok(Some(k))
            }
            Some(_) => Err(ConfigError::at("problem.constants", "expected \"derived\" or an object of constants")),
        }
    }
}

fn has_constant(k: &SmoothnessConstants, name: &str) -> bool {
    match name {
        "L1" => k.l1.is_some(),
        "H1" => k.h1.is_some(),
        "H2" => k.h2.is_some(),
        _ => false,
    }
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> CfgResult<Self> {
        let objective = config.problem.build()?;
        let constants = config.problem.declared_constants(&objective)?;
        let objective = match constants {
            Some(k) => objective.with_smoothness(k).map_err(|e| core_err("problem.constants", e))?,
            None => objective,
        };
        let distributed = config.optimizer.kind == OptimizerChoice::CaSignSgd;
        let noise = &config.noise;
        if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
            return Err(ConfigError::at("noise.sigma", "must be finite and >= 0"));
        }
        if noise.n == 0 {
            return Err(ConfigError::at("noise.n", "must be >= 1"));
        }
        if !distributed {
            if noise.n != 1 || noise.sigma_bar != 0.0 {
                return Err(ConfigError::at(
                    "noise.n",
                    "multiple or heterogeneous workers need optimizer.kind = ca_sign_sgd",
                ));
            }
            if config.compression.is_some() {
                return Err(ConfigError::at("compression", "compression needs optimizer.kind = ca_sign_sgd"));
            }
        }
        let workers = if distributed {
            let w = split_workers(&objective, noise.n, noise.sigma_bar, noise.bias_seed)
                .and_then(|w| w.with_noise(noise.sigma))
                .map_err(|e| core_err("noise.sigma_bar", e))?;
            Some(w)
        } else {
            None
        };
        if config.seeds.is_empty() {
            return Err(ConfigError::at("seeds", "need at least one seed"));
        }
        let horizons = config.horizon.values();
        if horizons.is_empty() || horizons.contains(&0) {
            return Err(ConfigError::at("T", "every horizon must be >= 1"));
        }
        if let Some(delta) = config.logging.smoothness_delta {
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(ConfigError::at("logging.smoothness_delta", "must lie in (0, 1]"));
            }
        }
        let exp = Self { config, objective, constants, workers };
        exp.check_optimizer()?;
        for &t in &horizons {
            exp.plan(t, exp.config.seeds[0])?;
        }
        Ok(exp)
    }

    pub fn horizons(&self) -> Vec<u64> {
        self.config.horizon.values()
    }

    pub fn workers(&self) -> Option<&WorkerOracle> {
        self.workers.as_ref()
    }

    pub fn single_oracle(&self) -> StochasticOracle {
        StochasticOracle::new(self.objective.clone(), self.config.noise.sigma).expect("sigma validated")
    }

    fn check_optimizer(&self) -> CfgResult<()> {
        let opt = &self.config.optimizer;
        if let Some(preset) = opt.preset {
            let fits = match preset {
                Preset::SingleNode => matches!(opt.kind, OptimizerChoice::SignSgd | OptimizerChoice::ASignSgd),
                Preset::SingleNodeAccel => opt.kind == OptimizerChoice::ASignSgd,
                Preset::Distributed | Preset::DistributedAccel => opt.kind == OptimizerChoice::CaSignSgd,
            };
            if !fits {
                return Err(ConfigError::at(
                    "optimizer.preset",
                    format!("preset '{}' does not apply to {}", preset.name(), opt.kind.name()),
                ));
            }
            let Some(k) = &self.constants else {
                return Err(ConfigError::at(
                    "problem.constants",
                    format!("preset '{}' requires smoothness constant {}", preset.name(), preset.required()[0]),
                ));
            };
            if let Some(missing) = preset.required().iter().find(|name| !has_constant(k, name)) {
                return Err(ConfigError::at(
                    "problem.constants",
                    format!("preset '{}' requires smoothness constant {missing}", preset.name()),
                ));
            }
            for (field, set) in [("gamma", opt.gamma.is_some()), ("theta", opt.theta.is_some())] {
                if set {
                    return Err(ConfigError::at(format!("optimizer.{field}"), "conflicts with the preset"));
                }
            }
        } else if opt.gamma.is_none() {
            return Err(ConfigError::at("optimizer.gamma", "missing field (or give a preset)"));
        }
        let zeta_free =
            matches!(opt.kind, OptimizerChoice::ASignSgd | OptimizerChoice::GSignSgd | OptimizerChoice::CaSignSgd);
        if !zeta_free && opt.zeta.is_some_and(|z| z != 0.0) {
            return Err(ConfigError::at("optimizer.zeta", format!("{} has no extrapolation", opt.kind.name())));
        }
        if opt.kind != OptimizerChoice::GSignSgd && opt.operator.as_deref().is_some_and(|o| o != "sign") {
            return Err(ConfigError::at("optimizer.operator", "only g_sign_sgd accepts a non-sign operator"));
        }
        if let Some(c) = &self.config.compression {
            if c.kind == CompressionKind::Identity && c.k.is_some() {
                return Err(ConfigError::at("compression.k", "identity compression takes no k"));
            }
        }
        Ok(())
    }

    fn hyper_for(&self, t: u64) -> CfgResult<(Hyper, Vec<String>, Option<u32>)> {
        let opt = &self.config.optimizer;
        let d = self.objective.dim();
        let operator = match &opt.operator {
            Some(name) => DescentOperator::by_name(name, d).map_err(|e| core_err("optimizer.operator", e))?,
            None => DescentOperator::sign(d),
        };
        let lambda = opt.lambda.unwrap_or(0.0);
        let (preset, rounds) = match opt.preset {
            None => {
                let hyper = Hyper::new(
                    opt.gamma.expect("checked"),
                    opt.theta.unwrap_or(0.0),
                    opt.zeta.unwrap_or(0.0),
                    lambda,
                    operator,
                )
                .map_err(|e| core_err("optimizer", e))?;
                return Ok((hyper, Vec::new(), None));
            }
            Some(p) => {
                let k = self.constants.as_ref().expect("checked");
                if p.distributed() {
                    let (h, u) = distributed_presets(t, self.config.noise.n, d, self.delta()?, k, p.accelerated())
                        .map_err(|e| core_err("optimizer.preset", e))?;
                    (h, Some(u))
                } else {
                    (single_node_presets(t, k, p.accelerated(), d).map_err(|e| core_err("optimizer.preset", e))?, None)
                }
            }
        };
        let PresetHyper { gamma, theta, zeta, warnings } = preset;
        let zeta = match opt.zeta {
            None => zeta,
            Some(z) => {
                let accel = theta / (1.0 - theta);
                let matches = z == 0.0 || (z - accel).abs() <= 1e-9 * accel.max(1.0);
                if !matches {
                    return Err(ConfigError::at(
                        "optimizer.zeta",
                        format!("with a preset zeta must be 0 or theta/(1-theta) = {accel} (T = {t})"),
                    ));
                }
                z
            }
        };
        let hyper = Hyper::new(gamma, theta, zeta, lambda, operator).map_err(|e| core_err("optimizer", e))?;
        Ok((hyper, warnings, rounds))
    }

    fn compressor(&self) -> CfgResult<Compressor> {
        let d = self.objective.dim();
        match &self.config.compression {
            None => Ok(Compressor::identity(d)),
            Some(c) => match c.kind {
                CompressionKind::Identity => Ok(Compressor::identity(d)),
                CompressionKind::TopK => {
                    let k = c.k.ok_or_else(|| ConfigError::at("compression.k", "missing field"))?;
                    Compressor::top_k(k, d).map_err(|e| core_err("compression.k", e))
                }
            },
        }
    }

    fn delta(&self) -> CfgResult<f64> {
        Ok(self.compressor()?.delta())
    }

    fn fcc_for(&self, t: u64, preset_rounds: Option<u32>) -> CfgResult<FccConfig> {
        let compressor = self.compressor()?;
        let explicit = match self.config.compression.as_ref().and_then(|c| c.u.as_ref()) {
            None => None,
            Some(Value::String(s)) if s == "auto" => None,
            Some(Value::Number(n)) => Some(
                n.as_u64()
                    .and_then(|u| u32::try_from(u).ok())
                    .ok_or_else(|| ConfigError::at("compression.u", "must be a non-negative integer"))?,
            ),
            Some(_) => return Err(ConfigError::at("compression.u", "expected an integer or \"auto\"")),
        };
        let u = match (explicit, preset_rounds) {
            (Some(u), _) => u,
            (None, Some(u)) => u,
            (None, None) => {
                let accelerated = self.config.optimizer.preset.is_some_and(Preset::accelerated);
                auto_rounds(t, self.config.noise.n, compressor.dim, compressor.delta(), accelerated)
                    .map_err(|e| core_err("compression.u", e))?
            }
        };
        FccConfig::new(compressor, u).map_err(|e| core_err("compression.u", e))
    }

    fn initial_point(&self, seed: u64) -> CfgResult<ParamVec> {
        let d = self.objective.dim();
        let draw = || standard_normal_vec(d, seed, 0, 0, Purpose::Initialization);
        let w0 = match &self.config.init {
            InitConfig::Zeros => ParamVec::zeros(d),
            InitConfig::Constant { value } => ParamVec::new(vec![*value; d]).map_err(|e| core_err("init.value", e))?,
            InitConfig::Gaussian { scale } => {
                ParamVec::new(draw().into_iter().map(|z| scale * z).collect()).map_err(|e| core_err("init.scale", e))?
            }
            InitConfig::NearMinimizer { offset } => {
                let center = self
                    .objective
                    .minimizer()
                    .ok_or_else(|| ConfigError::at("init.kind", "this problem has no closed-form minimizer"))?;
                let pattern = draw();
                ParamVec::new(center.iter().zip(&pattern).map(|(c, z)| c + offset * z.signum()).collect())
                    .map_err(|e| core_err("init.offset", e))?
            }
            InitConfig::Explicit { w0 } => {
                let w = ParamVec::new(w0.clone()).map_err(|e| core_err("init.w0", e))?;
                w.ensure_dim(d).map_err(|e| core_err("init.w0", e))?;
                w
            }
        };
        Ok(w0)
    }

    pub fn run_id(&self, t: u64, seed: u64) -> String {
        format!("{}_{}_T{t}_seed{seed}", self.config.name, self.config.optimizer.kind.name())
    }

    /// Builds the initial state and options of one run.
    pub fn plan(&self, t: u64, seed: u64) -> CfgResult<RunPlan> {
        let (hyper, warnings, rounds) = self.hyper_for(t)?;
        let kind = self.config.optimizer.kind;
        let state0 = OptimizerState::new(kind.core_kind(), hyper, self.initial_point(seed)?);
        let logging = &self.config.logging;
        let options = RunOptions {
            steps: t,
            seed,
            exact_grad_logging: logging.exact_grad_logging,
            keep_trajectory: logging.smoothness_trace,
        };
        let distributed = if kind == OptimizerChoice::CaSignSgd {
            Some(DistributedOptions {
                fcc: self.fcc_for(t, rounds)?,
                eval_at_v: self.config.compression.as_ref().is_some_and(|c| c.eval_at_v),
                exec: Execution::default(),
            })
        } else {
            None
        };
        Ok(RunPlan { run_id: self.run_id(t, seed), state0, options, distributed, warnings })
    }
}
