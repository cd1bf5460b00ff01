use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::matrix::SquareMatrix;
use crate::maximal::{sharp_maximal, BallFamily, PrefixField};
use crate::orlicz::luxemburg_values;
use crate::young::YoungFunction;
use rayon::prelude::*;

/// Where a weight's values came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightProvenance {
    Constant,
    Power,
    LogExample,
    Custom,
}

/// A strictly positive cell field.
#[derive(Clone, Debug)]
pub struct Weight {
    w: GridFunction,
    provenance: WeightProvenance,
}

impl Weight {
    pub fn new(w: GridFunction) -> Result<Self> {
        Self::with_provenance(w, WeightProvenance::Custom)
    }

    fn with_provenance(w: GridFunction, provenance: WeightProvenance) -> Result<Self> {
        for (i, &v) in w.values().iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "weight must be strictly positive and finite; cell {i} holds {v}"
                )));
            }
        }
        Ok(Weight { w, provenance })
    }

    pub fn field(&self) -> &GridFunction {
        &self.w
    }

    pub fn spec(&self) -> &GridSpec {
        self.w.spec()
    }

    pub fn provenance(&self) -> WeightProvenance {
        self.provenance
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.w.value(idx)
    }

    /// Pointwise power w^s as a new weight.
    pub fn pow(&self, s: f64) -> Weight {
        Weight {
            w: self.w.map(|v| v.powf(s)),
            provenance: WeightProvenance::Custom,
        }
    }

    /// Pointwise cap min(w, bound).
    pub fn min_truncated(&self, bound: f64) -> Result<Weight> {
        if bound <= 0.0 {
            return Err(Error::Domain(format!("cap {bound} must be positive")));
        }
        Weight::new(self.w.map(|v| v.min(bound)))
    }
}

/// Built-in weight presets on a grid.
#[derive(Clone, Copy, Debug)]
pub enum WeightPreset {
    /// w = c.
    Constant(f64),
    /// w = |x|^gamma. Strongly negative gamma stops being integrable in the
    /// continuum; at grid scale it stays finite and the class constants
    /// report the blow-up under refinement.
    Power(f64),
    /// w = log(1/|x|) for |x| <= 1/e, else 1. Radial, nonincreasing, and in
    /// A_1 with a modest constant.
    LogExample,
}

pub fn make_example_weight(spec: &GridSpec, preset: WeightPreset) -> Result<Weight> {
    let dim = spec.dim();
    let (f, provenance) = match preset {
        WeightPreset::Constant(c) => {
            if !(c > 0.0) {
                return Err(Error::Domain(format!("constant weight {c} not positive")));
            }
            (
                GridFunction::constant(spec.clone(), c),
                WeightProvenance::Constant,
            )
        }
        WeightPreset::Power(gamma) => (
            GridFunction::from_fn(spec.clone(), |p| p.norm(dim).powf(gamma)),
            WeightProvenance::Power,
        ),
        WeightPreset::LogExample => (
            GridFunction::from_fn(spec.clone(), |p| {
                let r = p.norm(dim);
                if r <= (-1.0f64).exp() {
                    (1.0 / r).ln()
                } else {
                    1.0
                }
            }),
            WeightProvenance::LogExample,
        ),
    };
    Weight::with_provenance(f, provenance)
}

fn sup_over_balls<F>(family: &BallFamily, eval: F) -> f64
where
    F: Fn(&[(usize, usize, usize)]) -> f64 + Sync,
{
    let spec = family.spec();
    let nr = family.radii().len();
    (0..spec.cell_count())
        .into_par_iter()
        .map(|ci| {
            let mut best = 0.0f64;
            for ri in 0..nr {
                let rows = family.ball(ci, ri).rows(spec);
                if rows.is_empty() {
                    continue;
                }
                best = best.max(eval(&rows));
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

fn rows_count(rows: &[(usize, usize, usize)]) -> f64 {
    rows.iter()
        .map(|&(_, ix0, ix1)| ix1 - ix0 + 1)
        .sum::<usize>() as f64
}

fn rows_extreme(
    spec: &GridSpec,
    rows: &[(usize, usize, usize)],
    w: &GridFunction,
    take_max: bool,
) -> f64 {
    let mut out = if take_max { f64::MIN } else { f64::MAX };
    for &(iy, ix0, ix1) in rows {
        for ix in ix0..=ix1 {
            let v = w.value(spec.index(ix, iy));
            out = if take_max { out.max(v) } else { out.min(v) };
        }
    }
    out
}

fn check_exponent(name: &str, e: f64, min: f64) -> Result<()> {
    if e.is_nan() || e < min {
        return Err(Error::Domain(format!("{name} = {e} below {min}")));
    }
    Ok(())
}

/// Muckenhoupt constant sup_B (avg_B w) (avg_B w^(1-p'))^(p-1); the p = 1
/// form is sup_B (avg_B w) / (min_B w).
pub fn ap_constant(w: &Weight, p: f64, family: &BallFamily) -> Result<f64> {
    check_exponent("p", p, 1.0)?;
    let spec = w.spec();
    if spec != family.spec() {
        return Err(Error::Config("weight and family on different grids".into()));
    }
    let avg_pre = PrefixField::new(spec, |i| w.value(i));
    if p == 1.0 {
        return Ok(sup_over_balls(family, |rows| {
            let avg = avg_pre.ball_sum(rows) / rows_count(rows);
            avg / rows_extreme(spec, rows, w.field(), false)
        }));
    }
    let dual_exp = -1.0 / (p - 1.0);
    let dual_pre = PrefixField::new(spec, |i| w.value(i).powf(dual_exp));
    Ok(sup_over_balls(family, |rows| {
        let count = rows_count(rows);
        let avg = avg_pre.ball_sum(rows) / count;
        let dual = dual_pre.ball_sum(rows) / count;
        avg * dual.powf(p - 1.0)
    }))
}

/// Two-exponent constant sup_B ||w||_{q,B} ||w^{-1}||_{p',B} with normalized
/// power averages; q may be infinite (essential supremum), and p = 1 makes
/// the dual norm an essential supremum of w^{-1}.
pub fn apq_constant(w: &Weight, p: f64, q: f64, family: &BallFamily) -> Result<f64> {
    check_exponent("p", p, 1.0)?;
    check_exponent("q", q, 1.0)?;
    let spec = w.spec();
    if spec != family.spec() {
        return Err(Error::Config("weight and family on different grids".into()));
    }
    let q_pre = if q.is_finite() {
        Some(PrefixField::new(spec, |i| w.value(i).powf(q)))
    } else {
        None
    };
    let p_dual = if p > 1.0 { Some(p / (p - 1.0)) } else { None };
    let dual_pre = p_dual.map(|pd| PrefixField::new(spec, |i| w.value(i).powf(-pd)));
    Ok(sup_over_balls(family, |rows| {
        let count = rows_count(rows);
        let lhs = match &q_pre {
            Some(pre) => (pre.ball_sum(rows) / count).powf(1.0 / q),
            None => rows_extreme(spec, rows, w.field(), true),
        };
        let rhs = match (&dual_pre, p_dual) {
            (Some(pre), Some(pd)) => (pre.ball_sum(rows) / count).powf(1.0 / pd),
            _ => 1.0 / rows_extreme(spec, rows, w.field(), false),
        };
        lhs * rhs
    }))
}

/// Bump constant sup_B ||w||_{q,B} ||w^{-1}||_{Psi,B}: power average on the
/// left, Luxemburg norm on the right.
pub fn bump_constant(
    w: &Weight,
    q: f64,
    psi: &YoungFunction,
    family: &BallFamily,
) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::Domain(format!("bump exponent q = {q} must exceed 1")));
    }
    let spec = w.spec();
    if spec != family.spec() {
        return Err(Error::Config("weight and family on different grids".into()));
    }
    let q_pre = PrefixField::new(spec, |i| w.value(i).powf(q));
    let nr = family.radii().len();
    let per_center: Vec<f64> = (0..spec.cell_count())
        .into_par_iter()
        .map(|ci| {
            let mut scratch = Vec::new();
            let mut best = 0.0f64;
            for ri in 0..nr {
                let rows = family.ball(ci, ri).rows(spec);
                if rows.is_empty() {
                    continue;
                }
                let count = rows_count(&rows);
                let lhs = (q_pre.ball_sum(&rows) / count).powf(1.0 / q);
                scratch.clear();
                for &(iy, ix0, ix1) in &rows {
                    for ix in ix0..=ix1 {
                        scratch.push(1.0 / w.value(spec.index(ix, iy)));
                    }
                }
                let rhs = luxemburg_values(&scratch, 1.0 / count, psi).unwrap_or(f64::INFINITY);
                best = best.max(lhs * rhs);
            }
            best
        })
        .collect();
    Ok(per_center.into_iter().fold(0.0, f64::max))
}

/// Smallest sampled Muckenhoupt constant over p in {1.5, 2, 4, 8}; a modest
/// value at any sampled p certifies membership in the union class.
pub fn a_infinity_constant(w: &Weight, family: &BallFamily) -> Result<f64> {
    let mut best = f64::INFINITY;
    for p in [1.5, 2.0, 4.0, 8.0] {
        best = best.min(ap_constant(w, p, family)?);
    }
    Ok(best)
}

/// Transformation bound for w under x -> Ax.
#[derive(Clone, Copy, Debug)]
pub struct MatrixCompatReport {
    /// sup over covered grid points of w(Ax)/w(x), w(Ax) by nearest cell.
    pub sup: f64,
    /// Fraction of grid points whose image Ax stays inside the box.
    pub coverage: f64,
}

pub fn matrix_compat_constant(w: &Weight, a: &SquareMatrix) -> Result<MatrixCompatReport> {
    let spec = w.spec();
    if a.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: a.dim(),
        });
    }
    a.inverse()?;
    let mut sup = 0.0f64;
    let mut covered = 0usize;
    for i in 0..spec.cell_count() {
        let x = spec.midpoint(i);
        let ax = a.apply(x);
        if let Some(j) = spec.nearest_cell(&ax) {
            covered += 1;
            sup = sup.max(w.value(j) / w.value(i));
        }
    }
    if covered == 0 {
        return Err(Error::Domain(
            "every transformed grid point leaves the box".into(),
        ));
    }
    Ok(MatrixCompatReport {
        sup,
        coverage: covered as f64 / spec.cell_count() as f64,
    })
}

/// BMO norm as the largest sharp-maximal value over the grid.
pub fn bmo_norm(b: &GridFunction, family: &BallFamily) -> Result<f64> {
    let s = sharp_maximal(b, family)?;
    Ok(s.values().iter().fold(0.0f64, |m, &v| m.max(v)))
}

/// Weighted BMO norm sup_x w(x) M^# f(x).
pub fn weighted_bmo_norm(f: &GridFunction, w: &Weight, family: &BallFamily) -> Result<f64> {
    if f.spec() != w.spec() {
        return Err(Error::Config("field and weight on different grids".into()));
    }
    let s = sharp_maximal(f, family)?;
    Ok((0..f.spec().cell_count()).fold(0.0f64, |m, i| m.max(w.value(i) * s.value(i))))
}

/// A symbol with its cached BMO norm.
#[derive(Clone, Debug)]
pub struct BmoFunction {
    b: GridFunction,
    norm: f64,
}

impl BmoFunction {
    pub fn new(b: GridFunction, family: &BallFamily) -> Result<Self> {
        let norm = bmo_norm(&b, family)?;
        Ok(BmoFunction { b, norm })
    }

    pub fn field(&self) -> &GridFunction {
        &self.b
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// clamp(b, -bound, bound) with its norm refreshed on the same family.
    pub fn truncated(&self, bound: f64, family: &BallFamily) -> Result<BmoFunction> {
        if !(bound > 0.0) {
            return Err(Error::Domain(format!("clamp bound {bound} must be positive")));
        }
        BmoFunction::new(self.b.map(|v| v.clamp(-bound, bound)), family)
    }
}

/// Nested-average comparison: |avg_inner b - avg_outer b| divided by
/// (#outer/#inner) * ||b||_BMO. When `outer` is a ball of the family the
/// chain avg_inner|b - avg_outer b| <= (#outer/#inner) osc_outer(b) makes
/// this ratio at most 1 up to roundoff.
pub fn bmo_nested_average_ratio(
    b: &BmoFunction,
    inner: &[usize],
    outer: &[usize],
) -> Result<f64> {
    if inner.is_empty() || outer.is_empty() {
        return Err(Error::Domain("cell sets must be non-empty".into()));
    }
    let outer_set: std::collections::BTreeSet<usize> = outer.iter().copied().collect();
    if !inner.iter().all(|i| outer_set.contains(i)) {
        return Err(Error::Domain("inner cell set must lie inside outer".into()));
    }
    let avg = |cells: &[usize]| -> f64 {
        cells.iter().map(|&i| b.field().value(i)).sum::<f64>() / cells.len() as f64
    };
    let num = (avg(inner) - avg(outer)).abs();
    let scale = outer.len() as f64 / inner.len() as f64;
    if b.norm() <= 1e-15 {
        if num <= 1e-12 {
            return Ok(0.0);
        }
        return Err(Error::Domain(
            "vanishing BMO norm against a non-trivial average gap".into(),
        ));
    }
    Ok(num / (scale * b.norm()))
}

/// Weighted Lebesgue norm (int |f|^p w)^(1/p) over the whole box.
pub fn weighted_lp_norm(f: &GridFunction, w: &Weight, p: f64) -> Result<f64> {
    if f.spec() != w.spec() {
        return Err(Error::Config("field and weight on different grids".into()));
    }
    check_exponent("p", p, 1.0)?;
    let sum: f64 = f
        .values()
        .iter()
        .zip(w.field().values())
        .map(|(&v, &wv)| v.abs().powf(p) * wv)
        .sum();
    Ok((sum * f.spec().cell_volume()).powf(1.0 / p))
}
