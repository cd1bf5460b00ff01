use crate::error::Result;
use crate::grid::{GridFunction, GridSpec, Point};
use crate::maximal::BallFamily;
use crate::rng::Rng;
use crate::weights::{make_example_weight, BmoFunction, Weight, WeightPreset};

const SIGN_BLOCKS_1D: usize = 32;
const SIGN_BLOCKS_2D: usize = 16;

/// One test function with a stable identifier.
#[derive(Clone, Debug)]
pub struct TestCase {
    pub id: String,
    pub f: GridFunction,
}

/// The function/weight/symbol pool a scenario draws from. Every member is
/// supported inside the safe band of the box, away from the origin and the
/// boundary, and is a fixed function of space so that coarse and fine grids
/// sample the same object.
#[derive(Clone, Debug)]
pub struct TestFamily {
    spec: GridSpec,
    cases: Vec<TestCase>,
    weights: Vec<(String, Weight)>,
    symbols: Vec<(String, BmoFunction)>,
    seeds: Vec<u64>,
}

/// Support band [inner, outer] used by every family member.
pub fn safe_band(spec: &GridSpec) -> (f64, f64) {
    let mut half = f64::INFINITY;
    for axis in 0..spec.dim() {
        half = half.min((-spec.lo(axis)).min(spec.hi(axis)));
    }
    (half / 20.0, half / 4.0)
}

fn cos_bump(t: f64, center: f64, radius: f64) -> f64 {
    let u = (t - center) / radius;
    if u.abs() >= 1.0 {
        0.0
    } else {
        let c = (0.5 * std::f64::consts::PI * u).cos();
        c * c
    }
}

fn band_mask(r: f64, a: f64, b: f64) -> f64 {
    if (a..=b).contains(&r) {
        1.0
    } else {
        0.0
    }
}

fn sign_blocks_1d(seed: u64, a: f64, b: f64) -> impl Fn(f64) -> f64 {
    let mut rng = Rng::new(seed);
    let signs: Vec<f64> = (0..SIGN_BLOCKS_1D).map(|_| rng.sign()).collect();
    move |x: f64| {
        if x.abs() < a || x.abs() > b {
            return 0.0;
        }
        let u = (x + b) / (2.0 * b) * SIGN_BLOCKS_1D as f64;
        let idx = (u.floor() as usize).min(SIGN_BLOCKS_1D - 1);
        signs[idx]
    }
}

fn sign_blocks_2d(seed: u64, a: f64, b: f64) -> impl Fn(&Point) -> f64 {
    let mut rng = Rng::new(seed);
    let n = SIGN_BLOCKS_2D;
    let signs: Vec<f64> = (0..n * n).map(|_| rng.sign()).collect();
    move |p: &Point| {
        let r = p.norm(2);
        if r < a || r > b {
            return 0.0;
        }
        let ux = ((p.x + b) / (2.0 * b) * n as f64).floor();
        let uy = ((p.y + b) / (2.0 * b) * n as f64).floor();
        let ix = (ux.max(0.0) as usize).min(n - 1);
        let iy = (uy.max(0.0) as usize).min(n - 1);
        signs[iy * n + ix]
    }
}

fn catalog_1d(spec: &GridSpec, seeds: &[u64]) -> Vec<TestCase> {
    let (a, b) = safe_band(spec);
    let mid = 0.5 * (a + b);
    let quarter = 0.5 * (b - a);
    let mut cases: Vec<TestCase> = Vec::new();
    let mut push = |id: &str, f: GridFunction| {
        cases.push(TestCase {
            id: id.to_string(),
            f,
        })
    };

    push(
        "indicator-right",
        GridFunction::from_fn(spec.clone(), |p| band_mask(p.x, a, b)),
    );
    push(
        "indicator-even",
        GridFunction::from_fn(spec.clone(), |p| band_mask(p.x.abs(), a, b)),
    );
    push(
        "indicator-left-short",
        GridFunction::from_fn(spec.clone(), |p| band_mask(-p.x, a, mid)),
    );
    push(
        "bump-right",
        GridFunction::from_fn(spec.clone(), |p| cos_bump(p.x, mid, quarter)),
    );
    push(
        "bump-even",
        GridFunction::from_fn(spec.clone(), |p| {
            cos_bump(p.x, mid, quarter) + cos_bump(p.x, -mid, quarter)
        }),
    );
    push(
        "bump-tall-left",
        GridFunction::from_fn(spec.clone(), |p| {
            2.0 * cos_bump(p.x, -mid, quarter / 1.5)
        }),
    );
    for &s in seeds {
        let pattern = sign_blocks_1d(s, a, b);
        push(
            &format!("random-signs-{s}"),
            GridFunction::from_fn(spec.clone(), |p| pattern(p.x)),
        );
    }
    for m in 1..=3usize {
        let freq = 2.0 * std::f64::consts::PI * m as f64 / (b - a);
        push(
            &format!("oscillatory-{m}"),
            GridFunction::from_fn(spec.clone(), |p| {
                band_mask(p.x.abs(), a, b) * (freq * p.x).sin()
            }),
        );
    }
    cases
}

fn catalog_2d(spec: &GridSpec, seeds: &[u64]) -> Vec<TestCase> {
    let (a, b) = safe_band(spec);
    let mid = 0.5 * (a + b);
    let quarter = 0.5 * (b - a);
    let mut cases: Vec<TestCase> = Vec::new();
    let mut push = |id: &str, f: GridFunction| {
        cases.push(TestCase {
            id: id.to_string(),
            f,
        })
    };

    push(
        "indicator-annulus",
        GridFunction::from_fn(spec.clone(), |p| band_mask(p.norm(2), a, b)),
    );
    push(
        "indicator-half-annulus",
        GridFunction::from_fn(spec.clone(), |p| {
            if p.x > 0.0 {
                band_mask(p.norm(2), a, b)
            } else {
                0.0
            }
        }),
    );
    push(
        "indicator-thin-annulus",
        GridFunction::from_fn(spec.clone(), |p| band_mask(p.norm(2), a, mid)),
    );
    push(
        "bump-ring",
        GridFunction::from_fn(spec.clone(), |p| cos_bump(p.norm(2), mid, quarter)),
    );
    push(
        "bump-offset",
        GridFunction::from_fn(spec.clone(), |p| {
            cos_bump(p.sub(&Point::new_2d(mid, 0.0)).norm(2), 0.0, quarter)
        }),
    );
    push(
        "bump-tall-ring",
        GridFunction::from_fn(spec.clone(), |p| {
            2.0 * cos_bump(p.norm(2), mid, quarter / 1.5)
        }),
    );
    for &s in seeds {
        let pattern = sign_blocks_2d(s, a, b);
        push(
            &format!("random-signs-{s}"),
            GridFunction::from_fn(spec.clone(), |p| pattern(&p)),
        );
    }
    for m in 1..=3usize {
        let freq = 2.0 * std::f64::consts::PI * m as f64 / (b - a);
        push(
            &format!("oscillatory-{m}"),
            GridFunction::from_fn(spec.clone(), |p| {
                band_mask(p.norm(2), a, b) * (freq * (p.x + p.y)).sin()
            }),
        );
    }
    cases
}

impl TestFamily {
    /// The default pool: indicators, smooth bumps, seeded block-sign
    /// patterns, oscillatory profiles; unit, power, and logarithmic weights;
    /// a logarithmic and a smooth bounded symbol.
    pub fn standard(spec: &GridSpec, balls: &BallFamily, seeds: &[u64]) -> Result<TestFamily> {
        let cases = if spec.dim() == 1 {
            catalog_1d(spec, seeds)
        } else {
            catalog_2d(spec, seeds)
        };
        let weights = vec![
            (
                "unit".to_string(),
                make_example_weight(spec, WeightPreset::Constant(1.0))?,
            ),
            (
                "power-0.3".to_string(),
                make_example_weight(spec, WeightPreset::Power(0.3))?,
            ),
            (
                "log-example".to_string(),
                make_example_weight(spec, WeightPreset::LogExample)?,
            ),
        ];
        let dim = spec.dim();
        let symbols = vec![
            (
                "log-abs".to_string(),
                BmoFunction::new(
                    GridFunction::from_fn(spec.clone(), |p| p.norm(dim).ln()),
                    balls,
                )?,
            ),
            (
                "smooth-bounded".to_string(),
                BmoFunction::new(
                    GridFunction::from_fn(spec.clone(), |p| {
                        let r2 = p.norm(dim).powi(2);
                        (p.x + p.y) / (1.0 + r2)
                    }),
                    balls,
                )?,
            ),
        ];
        Ok(TestFamily {
            spec: spec.clone(),
            cases,
            weights,
            symbols,
            seeds: seeds.to_vec(),
        })
    }

    /// A bespoke case list with no weights or symbols attached.
    pub fn from_cases(spec: &GridSpec, cases: Vec<(String, GridFunction)>) -> TestFamily {
        TestFamily {
            spec: spec.clone(),
            cases: cases
                .into_iter()
                .map(|(id, f)| TestCase { id, f })
                .collect(),
            weights: Vec::new(),
            symbols: Vec::new(),
            seeds: Vec::new(),
        }
    }

    /// A single identically-zero test function and no weights or symbols.
    pub fn zero(spec: &GridSpec) -> TestFamily {
        TestFamily {
            spec: spec.clone(),
            cases: vec![TestCase {
                id: "zero".to_string(),
                f: GridFunction::constant(spec.clone(), 0.0),
            }],
            weights: Vec::new(),
            symbols: Vec::new(),
            seeds: Vec::new(),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn cases(&self) -> &[TestCase] {
        &self.cases
    }

    pub fn weights(&self) -> &[(String, Weight)] {
        &self.weights
    }

    pub fn symbols(&self) -> &[(String, BmoFunction)] {
        &self.symbols
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn weight(&self, name: &str) -> Option<&Weight> {
        self.weights.iter().find(|(n, _)| n == name).map(|(_, w)| w)
    }

    pub fn symbol(&self, name: &str) -> Option<&BmoFunction> {
        self.symbols.iter().find(|(n, _)| n == name).map(|(_, b)| b)
    }
}
