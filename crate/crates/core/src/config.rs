use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::kernels::{CompositeKernel, KernelFactor, MatrixFamily};
use crate::matrix::SquareMatrix;
use crate::maximal::BallFamily;
use crate::operators::{CommutatorSpec, OperatorSpec, QuadratureSpec, SingularCellPolicy};
use crate::verify::family::TestFamily;
use crate::verify::report::{InequalityReport, SingleRun};
use crate::verify::{
    coifman_check, endpoint_check, pointwise_sharp_check, strong_type_check, two_weight_check,
    weighted_bmo_check, EndpointMode, TwoWeightPairing,
};
use crate::weights::{make_example_weight, BmoFunction, Weight, WeightPreset};
use crate::young::YoungFunction;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub tau: f64,
    pub tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { tau: 0.2, tol: 1e-9 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub box_half: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub policy: String,
    pub subdivision: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    /// ricci-sjogren | riesz | fractional-pair | power-pair
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<YoungFunction>,
    /// power-pair only: the two factor orders.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<f64>>,
    /// power-pair only: 1D matrix scalars, one per factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_scalars: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairingConfig {
    pub e: YoungFunction,
    pub f: YoungFunction,
    pub phi: YoungFunction,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// coifman | pointwise-sharp | strong-type | weighted-bmo | two-weight | endpoint
    pub check: String,
    pub operator: OperatorConfig,
    pub grid: GridConfig,
    /// unit | constant:<c> | power:<gamma> | log-example | spiky
    pub weight: String,
    /// log-abs | smooth-bounded | zero
    pub symbol: String,
    pub order: u32,
    /// standard | zero
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<YoungFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing: Option<PairingConfig>,
    /// endpoint only: phi-direct | derived-d
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaConfig>,
}

fn default_family() -> String {
    "standard".to_string()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub seeds: Vec<u64>,
    pub scenarios: Vec<ScenarioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// Parse and validate a configuration document.
pub fn load_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
        Error::Config(format!(
            "parse failure at line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    if !cfg.version.starts_with('1') {
        return Err(Error::Config(format!(
            "unrecognized config version {:?}",
            cfg.version
        )));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::Config("seeds must be explicit and non-empty".into()));
    }
    for sc in &cfg.scenarios {
        validate_scenario(sc)?;
    }
    Ok(cfg)
}

fn validate_scenario(sc: &ScenarioConfig) -> Result<()> {
    let known = [
        "coifman",
        "pointwise-sharp",
        "strong-type",
        "weighted-bmo",
        "two-weight",
        "endpoint",
    ];
    if !known.contains(&sc.check.as_str()) {
        return Err(Error::Config(format!(
            "scenario {:?}: unknown check {:?}",
            sc.name, sc.check
        )));
    }
    if !(sc.grid.dim == 1 || sc.grid.dim == 2) {
        return Err(Error::Config(format!(
            "scenario {:?}: dim must be 1 or 2",
            sc.name
        )));
    }
    let need = |field: &str, present: bool| -> Result<()> {
        if present {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "scenario {:?} ({}) requires field {:?}",
                sc.name, sc.check, field
            )))
        }
    };
    match sc.check.as_str() {
        "coifman" => {
            need("p", sc.p.is_some())?;
            need("phi", sc.phi.is_some())?;
        }
        "pointwise-sharp" => {
            need("delta", sc.delta.is_some())?;
            need("eps", sc.eps.is_some())?;
            need("phi", sc.phi.is_some())?;
        }
        "strong-type" => {
            need("p", sc.p.is_some())?;
            need("q", sc.q.is_some())?;
        }
        "weighted-bmo" => need("r", sc.r.is_some())?,
        "two-weight" => {
            need("p", sc.p.is_some())?;
            need("pairing", sc.pairing.is_some())?;
        }
        "endpoint" => {
            need("endpoint_mode", sc.endpoint_mode.is_some())?;
            need("lambda", sc.lambda.is_some())?;
            match sc.endpoint_mode.as_deref() {
                Some("phi-direct") => {
                    need("phi", sc.phi.is_some())?;
                    need("r", sc.r.is_some())?;
                }
                Some("derived-d") => {
                    need("pairing", sc.pairing.is_some())?;
                    need("p", sc.p.is_some())?;
                }
                Some(other) => {
                    return Err(Error::Config(format!(
                        "scenario {:?}: unknown endpoint mode {other:?}",
                        sc.name
                    )))
                }
                None => unreachable!(),
            }
        }
        _ => unreachable!(),
    }
    Ok(())
}

pub fn build_operator(oc: &OperatorConfig, dim: usize) -> Result<OperatorSpec> {
    let psi = oc.psi.clone().unwrap_or_else(YoungFunction::linear);
    let kernel = match oc.preset.as_str() {
        "ricci-sjogren" => {
            let alpha = oc
                .alpha
                .ok_or_else(|| Error::Config("ricci-sjogren preset requires alpha".into()))?;
            if dim != 1 {
                return Err(Error::Config("ricci-sjogren preset is one-dimensional".into()));
            }
            CompositeKernel::ricci_sjogren(alpha, &psi)?
        }
        "riesz" => {
            let alpha = oc
                .alpha
                .ok_or_else(|| Error::Config("riesz preset requires alpha".into()))?;
            CompositeKernel::riesz(dim, alpha, &psi)?
        }
        "fractional-pair" => {
            let alpha = oc
                .alpha
                .ok_or_else(|| Error::Config("fractional-pair preset requires alpha".into()))?;
            if dim != 1 {
                return Err(Error::Config("fractional-pair preset is one-dimensional".into()));
            }
            CompositeKernel::fractional_pair(alpha, &psi)?
        }
        "power-pair" => {
            if dim != 1 {
                return Err(Error::Config("power-pair preset is one-dimensional".into()));
            }
            let orders = oc
                .orders
                .as_ref()
                .ok_or_else(|| Error::Config("power-pair preset requires orders".into()))?;
            let scalars = oc
                .matrix_scalars
                .as_ref()
                .ok_or_else(|| Error::Config("power-pair preset requires matrix_scalars".into()))?;
            if orders.len() != scalars.len() || orders.is_empty() {
                return Err(Error::Config(
                    "power-pair orders and matrix_scalars must have equal nonzero length".into(),
                ));
            }
            let factors: Vec<KernelFactor> = orders
                .iter()
                .map(|&a| KernelFactor::power(1, a, psi.clone()))
                .collect::<Result<_>>()?;
            let mats =
                MatrixFamily::new(scalars.iter().map(|&s| SquareMatrix::new_1d(s)).collect())?;
            CompositeKernel::new(factors, mats)?
        }
        other => return Err(Error::Config(format!("unknown operator preset {other:?}"))),
    };
    let quadrature = match &oc.quadrature {
        None => QuadratureSpec::default(),
        Some(qc) => QuadratureSpec {
            policy: match qc.policy.as_str() {
                "exclude" => SingularCellPolicy::Exclude,
                "cell-average" => SingularCellPolicy::CellAverage,
                other => {
                    return Err(Error::Config(format!(
                        "unknown singular-cell policy {other:?}"
                    )))
                }
            },
            subdivision: qc.subdivision,
        },
    };
    OperatorSpec::new(kernel, quadrature)
}

pub fn resolve_weight(name: &str, spec: &GridSpec) -> Result<Weight> {
    if name == "unit" {
        return make_example_weight(spec, WeightPreset::Constant(1.0));
    }
    if let Some(c) = name.strip_prefix("constant:") {
        let c: f64 = c
            .parse()
            .map_err(|_| Error::Config(format!("bad constant weight {name:?}")))?;
        return make_example_weight(spec, WeightPreset::Constant(c));
    }
    if let Some(g) = name.strip_prefix("power:") {
        let g: f64 = g
            .parse()
            .map_err(|_| Error::Config(format!("bad power weight {name:?}")))?;
        return make_example_weight(spec, WeightPreset::Power(g));
    }
    if name == "log-example" {
        return make_example_weight(spec, WeightPreset::LogExample);
    }
    if name == "spiky" {
        let dim = spec.dim();
        let mut half = f64::INFINITY;
        for axis in 0..dim {
            half = half.min((-spec.lo(axis)).min(spec.hi(axis)));
        }
        let (lo, hi) = (0.15 * half, 0.2 * half);
        let w = GridFunction::from_fn(spec.clone(), |p| {
            let r = p.norm(dim);
            if (lo..hi).contains(&r) {
                50.0
            } else {
                1.0
            }
        });
        return Weight::new(w);
    }
    Err(Error::Config(format!("unknown weight preset {name:?}")))
}

pub fn resolve_symbol(
    name: &str,
    fam: &TestFamily,
    spec: &GridSpec,
    balls: &BallFamily,
) -> Result<BmoFunction> {
    if name == "zero" {
        return BmoFunction::new(GridFunction::constant(spec.clone(), 0.0), balls);
    }
    fam.symbol(name)
        .cloned()
        .ok_or_else(|| Error::Config(format!("unknown symbol preset {name:?}")))
}

fn lambda_values(lc: &LambdaConfig) -> Result<Vec<f64>> {
    if !(lc.min > 0.0) || !(lc.max > lc.min) || lc.count < 2 {
        return Err(Error::Config(
            "lambda grid needs 0 < min < max and count >= 2".into(),
        ));
    }
    let n = lc.count;
    Ok((0..n)
        .map(|k| lc.min * (lc.max / lc.min).powf(k as f64 / (n - 1) as f64))
        .collect())
}

/// Run one scenario at one resolution.
pub fn run_scenario_at(sc: &ScenarioConfig, seeds: &[u64], n: usize) -> Result<SingleRun> {
    let spec = GridSpec::symmetric(sc.grid.dim, sc.grid.box_half, n)?;
    let balls = BallFamily::all_centered(&spec);
    let fam = match sc.family.as_str() {
        "standard" => TestFamily::standard(&spec, &balls, seeds)?,
        "zero" => TestFamily::zero(&spec),
        other => return Err(Error::Config(format!("unknown family preset {other:?}"))),
    };
    let standard_pool;
    let symbol_pool = if sc.family == "standard" {
        &fam
    } else {
        standard_pool = TestFamily::standard(&spec, &balls, seeds)?;
        &standard_pool
    };
    let w = resolve_weight(&sc.weight, &spec)?;
    let b = resolve_symbol(&sc.symbol, symbol_pool, &spec, &balls)?;
    let op = build_operator(&sc.operator, sc.grid.dim)?;
    let cspec = CommutatorSpec::new(op, b, sc.order);
    let missing = |f: &str| Error::Config(format!("missing field {f:?}"));
    match sc.check.as_str() {
        "coifman" => coifman_check(
            &cspec,
            sc.phi.as_ref().ok_or_else(|| missing("phi"))?,
            sc.p.ok_or_else(|| missing("p"))?,
            &w,
            &fam,
        ),
        "pointwise-sharp" => pointwise_sharp_check(
            &cspec,
            sc.phi.as_ref().ok_or_else(|| missing("phi"))?,
            sc.delta.ok_or_else(|| missing("delta"))?,
            sc.eps.ok_or_else(|| missing("eps"))?,
            &fam,
        ),
        "strong-type" => strong_type_check(
            &cspec,
            sc.p.ok_or_else(|| missing("p"))?,
            sc.q.ok_or_else(|| missing("q"))?,
            &w,
            &fam,
        ),
        "weighted-bmo" => weighted_bmo_check(
            &cspec,
            sc.r.ok_or_else(|| missing("r"))?,
            &w,
            &fam,
        ),
        "two-weight" => {
            let pc = sc.pairing.as_ref().ok_or_else(|| missing("pairing"))?;
            two_weight_check(
                &cspec,
                sc.p.ok_or_else(|| missing("p"))?,
                &TwoWeightPairing {
                    e: pc.e.clone(),
                    f: pc.f.clone(),
                    phi: pc.phi.clone(),
                },
                &w,
                &fam,
            )
        }
        "endpoint" => {
            let mode = match sc.endpoint_mode.as_deref() {
                Some("phi-direct") => EndpointMode::PhiDirect {
                    phi: sc.phi.clone().ok_or_else(|| missing("phi"))?,
                    r: sc.r.ok_or_else(|| missing("r"))?,
                },
                Some("derived-d") => {
                    let pc = sc.pairing.as_ref().ok_or_else(|| missing("pairing"))?;
                    EndpointMode::DerivedD {
                        pairing: TwoWeightPairing {
                            e: pc.e.clone(),
                            f: pc.f.clone(),
                            phi: pc.phi.clone(),
                        },
                        p: sc.p.ok_or_else(|| missing("p"))?,
                    }
                }
                _ => return Err(missing("endpoint_mode")),
            };
            let lambda = lambda_values(sc.lambda.as_ref().ok_or_else(|| missing("lambda"))?)?;
            endpoint_check(&cspec, &mode, &w, &lambda, &fam)
        }
        other => Err(Error::Config(format!("unknown check {other:?}"))),
    }
}

/// Run one scenario at its configured resolution and at double resolution,
/// merging the two into a refinement-checked report.
pub fn run_scenario(
    sc: &ScenarioConfig,
    seeds: &[u64],
    tau: f64,
    config_echo: &str,
) -> Result<InequalityReport> {
    let coarse = run_scenario_at(sc, seeds, sc.grid.n)?;
    let fine = run_scenario_at(sc, seeds, sc.grid.n * 2)?;
    Ok(InequalityReport::two_resolution(
        &sc.name,
        coarse,
        fine,
        tau,
        config_echo,
    ))
}

/// Run every scenario in order; the echo is the exact config text.
pub fn run_all(cfg: &RunConfig, config_echo: &str) -> Result<Vec<InequalityReport>> {
    cfg.scenarios
        .iter()
        .map(|sc| run_scenario(sc, &cfg.seeds, cfg.thresholds.tau, config_echo))
        .collect()
}
