//! Experiment configuration: strict-schema JSON with defaults expanded at
//! resolution time. Every run writes the fully-resolved config next to its
//! outputs so it can be re-run bit-for-bit.

use serde::{Deserialize, Serialize};

use crate::pde::{FieldFn, HeatProblem};
use crate::qmodel::Entangler;
use crate::train::{LossWeights, ModelConfig, ModelKind, Reduction};

use super::CliError;

/// Diffusion coefficient: a plain number or a π-expression like "0.01/pi".
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Kappa {
    Number(f64),
    Expr(String),
}

impl Kappa {
    pub fn value(&self) -> Result<f64, CliError> {
        match self {
            Kappa::Number(v) => Ok(*v),
            Kappa::Expr(s) => parse_kappa(s),
        }
    }
}

fn parse_kappa(s: &str) -> Result<f64, CliError> {
    let t = s.trim().replace(' ', "");
    let bad = || CliError::Config(format!("cannot parse kappa expression `{s}`"));
    if t == "pi" {
        return Ok(std::f64::consts::PI);
    }
    if let Some(prefix) = t.strip_suffix("/pi") {
        return prefix
            .parse::<f64>()
            .map(|v| v / std::f64::consts::PI)
            .map_err(|_| bad());
    }
    if let Some(prefix) = t.strip_suffix("*pi") {
        return prefix
            .parse::<f64>()
            .map(|v| v * std::f64::consts::PI)
            .map_err(|_| bad());
    }
    t.parse::<f64>().map_err(|_| bad())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Kappa>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space_bounds: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ic: Option<FieldFn>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc: Option<FieldFn>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub kind: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_qubits: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entangler: Option<Entangler>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fnn_hidden: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux_layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mlp_hidden: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollocationBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Lbfgs,
    Adam,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_bc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_ic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction: Option<Reduction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Analytic,
    Rk45,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Output artifacts: "csv" always; "ppm" adds heatmap images.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_nx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_times: Option<Vec<f64>>,
    /// Spatial resolution of the RK45 oracle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_nx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceKind>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemBlock,
    pub model: ModelBlock,
    #[serde(default)]
    pub collocation: CollocationBlock,
    #[serde(default)]
    pub training: TrainingBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Everything concrete; what the run directory records.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub problem: HeatProblem,
    pub model: ModelConfig,
    pub nx: usize,
    pub nt: usize,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub weights: LossWeights,
    pub reduction: Reduction,
    pub seed: u64,
    pub tolerance: f64,
    pub lr: f64,
    pub out_dir: String,
    pub formats: Vec<String>,
    pub eval_nx: usize,
    pub eval_times: Vec<f64>,
    pub oracle_nx: usize,
    pub reference: ReferenceKind,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let dim = self.problem.dim;
        if dim != 1 && dim != 2 {
            return Err(CliError::Config(format!("problem.dim must be 1 or 2, got {dim}")));
        }
        let defaults = if dim == 1 {
            HeatProblem::default_1d()
        } else {
            HeatProblem::default_2d()
        };
        let kappa = match &self.problem.kappa {
            Some(k) => k.value()?,
            None => defaults.kappa,
        };
        let problem = HeatProblem {
            dim,
            kappa,
            space_bounds: self
                .problem
                .space_bounds
                .clone()
                .unwrap_or(defaults.space_bounds),
            t_max: self.problem.t_max.unwrap_or(defaults.t_max),
            ic: self.problem.ic.clone().unwrap_or(defaults.ic),
            bc: self.problem.bc.clone().unwrap_or(defaults.bc),
        };
        problem
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;

        // paper-scale circuit defaults: 6 qubits for 1D, 4 qubits / 10
        // layers for 2D
        let n_qubits = self.model.n_qubits.unwrap_or(if dim == 1 { 6 } else { 4 });
        let n_layers = self.model.n_layers.unwrap_or(if dim == 1 { 5 } else { 10 });
        if n_qubits == 0 || n_qubits > crate::qsim::MAX_QUBITS {
            return Err(CliError::Config(format!("model.n_qubits {n_qubits} out of range")));
        }
        if n_layers == 0 && self.model.kind != ModelKind::Pinn {
            return Err(CliError::Config("model.n_layers must be >= 1".into()));
        }
        let model = ModelConfig {
            kind: self.model.kind,
            n_qubits,
            n_layers,
            entangler: self.model.entangler.unwrap_or(Entangler::Ring),
            fnn_hidden: self.model.fnn_hidden.clone().unwrap_or(vec![10, 10]),
            aux_layers: self.model.aux_layers,
            mlp_hidden: self.model.mlp_hidden.clone().unwrap_or(vec![50, 50, 50, 50]),
        };

        let nx = self.collocation.nx.unwrap_or(50);
        let nt = self.collocation.nt.unwrap_or(50);

        let weights = LossWeights {
            lambda_bc: self.training.lambda_bc.unwrap_or(1.0),
            lambda_ic: self.training.lambda_ic.unwrap_or(1.0),
        };
        let formats = self
            .output
            .formats
            .clone()
            .unwrap_or_else(|| vec!["csv".to_string()]);
        for f in &formats {
            if f != "csv" && f != "ppm" {
                return Err(CliError::Config(format!("unknown output format `{f}`")));
            }
        }
        let eval_times = match &self.output.eval_times {
            Some(ts) => {
                if ts.is_empty()
                    || ts.windows(2).any(|w| w[0] >= w[1])
                    || ts[0] < 0.0
                    || *ts.last().unwrap() > problem.t_max
                {
                    return Err(CliError::Config(
                        "output.eval_times must be sorted within [0, t_max]".into(),
                    ));
                }
                ts.clone()
            }
            None => {
                if dim == 1 {
                    vec![0.25, 0.5, 1.0]
                } else {
                    vec![0.0, 0.039, 0.058, 0.097]
                }
            }
        };
        let reference = self.output.reference.unwrap_or({
            if matches!(problem.ic, FieldFn::SineMode { .. }) && problem.bc == FieldFn::Zero {
                ReferenceKind::Analytic
            } else {
                ReferenceKind::Rk45
            }
        });

        Ok(Resolved {
            config: self.clone(),
            problem,
            model,
            nx,
            nt,
            optimizer: self.training.optimizer.unwrap_or(OptimizerKind::Lbfgs),
            epochs: self.training.epochs.unwrap_or(150),
            weights,
            reduction: self.training.reduction.unwrap_or(Reduction::Sum),
            seed: self.training.seed.unwrap_or(0),
            tolerance: self.training.tolerance.unwrap_or(1e-9),
            lr: self.training.lr.unwrap_or(1e-3),
            out_dir: self.output.dir.clone().unwrap_or_else(|| "runs/run".into()),
            formats,
            eval_nx: self.output.eval_nx.unwrap_or(50),
            eval_times,
            oracle_nx: self.output.oracle_nx.unwrap_or(if dim == 1 { 201 } else { 50 }),
            reference,
        })
    }
}

impl Resolved {
    /// The config with every default written out, as stored in run dirs.
    pub fn echo(&self) -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemBlock {
                dim: self.problem.dim,
                kappa: Some(
                    self.config
                        .problem
                        .kappa
                        .clone()
                        .unwrap_or(Kappa::Number(self.problem.kappa)),
                ),
                space_bounds: Some(self.problem.space_bounds.clone()),
                t_max: Some(self.problem.t_max),
                ic: Some(self.problem.ic.clone()),
                bc: Some(self.problem.bc.clone()),
            },
            model: ModelBlock {
                kind: self.model.kind,
                n_qubits: Some(self.model.n_qubits),
                n_layers: Some(self.model.n_layers),
                entangler: Some(self.model.entangler),
                fnn_hidden: Some(self.model.fnn_hidden.clone()),
                aux_layers: Some(self.model.aux_layers.unwrap_or(self.model.n_layers)),
                mlp_hidden: Some(self.model.mlp_hidden.clone()),
            },
            collocation: CollocationBlock {
                nx: Some(self.nx),
                nt: Some(self.nt),
            },
            training: TrainingBlock {
                optimizer: Some(self.optimizer),
                epochs: Some(self.epochs),
                lambda_bc: Some(self.weights.lambda_bc),
                lambda_ic: Some(self.weights.lambda_ic),
                reduction: Some(self.reduction),
                seed: Some(self.seed),
                tolerance: Some(self.tolerance),
                lr: Some(self.lr),
            },
            output: OutputBlock {
                dir: Some(self.out_dir.clone()),
                formats: Some(self.formats.clone()),
                eval_nx: Some(self.eval_nx),
                eval_times: Some(self.eval_times.clone()),
                oracle_nx: Some(self.oracle_nx),
                reference: Some(self.reference),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_expressions_parse() {
        assert!((parse_kappa("0.01/pi").unwrap() - 0.01 / std::f64::consts::PI).abs() < 1e-18);
        assert!((parse_kappa("2/pi").unwrap() - 2.0 / std::f64::consts::PI).abs() < 1e-16);
        assert!((parse_kappa("0.5*pi").unwrap() - 0.5 * std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(parse_kappa("0.25").unwrap(), 0.25);
        assert_eq!(parse_kappa("pi").unwrap(), std::f64::consts::PI);
        assert!(parse_kappa("two/pi").is_err());
    }

    #[test]
    fn minimal_config_resolves_with_paper_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": {"dim": 1}, "model": {"kind": "fnn-te-qpinn"}}"#,
        )
        .unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.model.n_qubits, 6);
        assert!((r.problem.kappa - 0.01 / std::f64::consts::PI).abs() < 1e-18);
        assert_eq!(r.epochs, 150);
        assert_eq!((r.nx, r.nt), (50, 50));
        assert_eq!(r.reference, ReferenceKind::Analytic);

        let cfg2 = ExperimentConfig::from_json(
            r#"{"problem": {"dim": 2}, "model": {"kind": "qnn-te-qpinn"}}"#,
        )
        .unwrap();
        let r2 = cfg2.resolve().unwrap();
        assert_eq!((r2.model.n_qubits, r2.model.n_layers), (4, 10));
        assert_eq!(r2.eval_times, vec![0.0, 0.039, 0.058, 0.097]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = r#"{"problem": {"dim": 1, "kapa": 0.1}, "model": {"kind": "pinn"}}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
        let bad2 = r#"{"problem": {"dim": 1}, "model": {"kind": "pinn"}, "extra": 1}"#;
        assert!(ExperimentConfig::from_json(bad2).is_err());
    }

    #[test]
    fn kappa_string_survives_the_echo() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": {"dim": 1, "kappa": "0.01/pi"}, "model": {"kind": "pinn"}}"#,
        )
        .unwrap();
        let echo = cfg.resolve().unwrap().echo();
        assert_eq!(echo.problem.kappa, Some(Kappa::Expr("0.01/pi".into())));
        // resolved echo itself resolves to the same settings
        let again = echo.resolve().unwrap();
        assert!((again.problem.kappa - 0.01 / std::f64::consts::PI).abs() < 1e-18);
    }

    #[test]
    fn bad_eval_times_rejected() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": {"dim": 1}, "model": {"kind": "pinn"},
                "output": {"eval_times": [0.5, 0.25]}}"#,
        )
        .unwrap();
        assert!(cfg.resolve().is_err());
    }
}
