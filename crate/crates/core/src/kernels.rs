use crate::error::{Error, Result};
use crate::grid::{Annulus, GridFunction, GridSpec, Point};
use crate::matrix::SquareMatrix;
use crate::orlicz::annulus_norm;
use crate::young::YoungFunction;
use std::sync::Arc;

const DET_EPS: f64 = 1e-12;
const SIZE_GRID_1D: usize = 512;
const SIZE_GRID_2D: usize = 64;

/// The matrices A_1 ... A_m pairing each kernel factor with its argument
/// x - A_i y. Construction requires each A_i invertible (inverses are
/// cached); the pairwise-difference condition is reported by
/// [`check_hypothesis_h`] rather than enforced here, so degenerate families
/// can be built and diagnosed.
#[derive(Clone, Debug)]
pub struct MatrixFamily {
    dim: usize,
    matrices: Vec<SquareMatrix>,
    inverses: Vec<SquareMatrix>,
}

impl MatrixFamily {
    pub fn new(matrices: Vec<SquareMatrix>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::Domain("matrix family must be non-empty".into()));
        }
        let dim = matrices[0].dim();
        let mut inverses = Vec::with_capacity(matrices.len());
        for a in &matrices {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.dim(),
                });
            }
            inverses.push(a.inverse()?);
        }
        Ok(MatrixFamily {
            dim,
            matrices,
            inverses,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrix(&self, i: usize) -> &SquareMatrix {
        &self.matrices[i]
    }

    pub fn inverse(&self, i: usize) -> &SquareMatrix {
        &self.inverses[i]
    }

    /// Family of the inverses, for the adjoint operator.
    pub fn inverted(&self) -> Result<MatrixFamily> {
        MatrixFamily::new(self.inverses.clone())
    }

    /// Scale separation constant 2 max_i ||A_i|| ||A_i^{-1}||.
    pub fn c_a(&self) -> f64 {
        let mut best = 0.0f64;
        for (a, inv) in self.matrices.iter().zip(&self.inverses) {
            best = best.max(a.op_norm() * inv.op_norm());
        }
        2.0 * best
    }
}

#[derive(Clone, Copy, Debug)]
pub struct HypothesisReport {
    pub pass: bool,
    /// Minimum |det(A_i - A_j)| over pairs; single-matrix families report
    /// |det A_1| (the binding quantity for the hypothesis).
    pub min_det: f64,
}

pub fn check_hypothesis_h(family: &MatrixFamily) -> HypothesisReport {
    let m = family.len();
    let mut pass = true;
    let mut min_det = f64::INFINITY;
    for i in 0..m {
        let a = family.matrix(i);
        if a.det().abs() <= DET_EPS {
            pass = false;
        }
        if m == 1 {
            min_det = a.det().abs();
        }
        let residual = a.mul(family.inverse(i)).sub_identity_norm();
        if residual > 1e-10 {
            pass = false;
        }
        for j in 0..i {
            let diff = a.sub(family.matrix(j));
            let d = diff.det().abs();
            min_det = min_det.min(d);
            if d <= DET_EPS {
                pass = false;
            }
        }
    }
    HypothesisReport { pass, min_det }
}

/// Angular part of a rough kernel.
#[derive(Clone, Copy, Debug)]
pub enum RoughOmega {
    /// 1D: value on the positive and negative half-lines.
    TwoValues { plus: f64, minus: f64 },
    /// 2D: constant + c cos(theta) + s sin(theta) on the unit circle.
    Trig { constant: f64, cos_coeff: f64, sin_coeff: f64 },
}

impl RoughOmega {
    fn eval(&self, t: &Point, r: f64) -> f64 {
        match *self {
            RoughOmega::TwoValues { plus, minus } => {
                if t.x >= 0.0 {
                    plus
                } else {
                    minus
                }
            }
            RoughOmega::Trig {
                constant,
                cos_coeff,
                sin_coeff,
            } => constant + cos_coeff * t.x / r + sin_coeff * t.y / r,
        }
    }

    fn bound(&self) -> f64 {
        match *self {
            RoughOmega::TwoValues { plus, minus } => plus.abs().max(minus.abs()),
            RoughOmega::Trig {
                constant,
                cos_coeff,
                sin_coeff,
            } => constant.abs() + (cos_coeff * cos_coeff + sin_coeff * sin_coeff).sqrt(),
        }
    }
}

#[derive(Clone)]
enum FactorForm {
    /// |t|^(alpha_i - n).
    Power,
    /// Omega(t/|t|) |t|^(alpha_i - n).
    Rough(RoughOmega),
    Custom(Arc<dyn Fn(&Point) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for FactorForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FactorForm::Power => write!(f, "Power"),
            FactorForm::Rough(om) => write!(f, "Rough({om:?})"),
            FactorForm::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// One factor k_i of a composite kernel, together with its homogeneity
/// order alpha_i and the Young function its size/smoothness conditions are
/// measured against.
#[derive(Clone, Debug)]
pub struct KernelFactor {
    form: FactorForm,
    dim: usize,
    alpha_i: f64,
    psi: YoungFunction,
}

impl KernelFactor {
    fn validated(form: FactorForm, dim: usize, alpha_i: f64, psi: YoungFunction) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Domain(format!("dimension {dim} unsupported")));
        }
        if !(0.0..dim as f64).contains(&alpha_i) {
            return Err(Error::Domain(format!(
                "factor order {alpha_i} outside [0, {dim})"
            )));
        }
        Ok(KernelFactor {
            form,
            dim,
            alpha_i,
            psi,
        })
    }

    pub fn power(dim: usize, alpha_i: f64, psi: YoungFunction) -> Result<Self> {
        Self::validated(FactorForm::Power, dim, alpha_i, psi)
    }

    pub fn rough(dim: usize, alpha_i: f64, psi: YoungFunction, omega: RoughOmega) -> Result<Self> {
        match (dim, omega) {
            (1, RoughOmega::TwoValues { .. }) | (2, RoughOmega::Trig { .. }) => {}
            _ => {
                return Err(Error::Domain(
                    "angular part does not match the dimension".into(),
                ))
            }
        }
        Self::validated(FactorForm::Rough(omega), dim, alpha_i, psi)
    }

    pub fn custom(
        dim: usize,
        alpha_i: f64,
        psi: YoungFunction,
        eval: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::validated(FactorForm::Custom(Arc::new(eval)), dim, alpha_i, psi)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_i
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn psi(&self) -> &YoungFunction {
        &self.psi
    }

    /// |Omega| bound for rough factors, 1 for the power form.
    pub fn angular_bound(&self) -> f64 {
        match &self.form {
            FactorForm::Rough(om) => om.bound(),
            _ => 1.0,
        }
    }

    pub fn eval(&self, t: &Point) -> f64 {
        match &self.form {
            FactorForm::Power => {
                let r = t.norm(self.dim);
                r.powf(self.alpha_i - self.dim as f64)
            }
            FactorForm::Rough(om) => {
                let r = t.norm(self.dim);
                if r == 0.0 {
                    return f64::INFINITY;
                }
                om.eval(t, r) * r.powf(self.alpha_i - self.dim as f64)
            }
            FactorForm::Custom(f) => f(t),
        }
    }

    /// The adjoint-side factor t -> k(-A t).
    pub fn precomposed_negated(&self, a: &SquareMatrix) -> Result<KernelFactor> {
        if a.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: a.dim(),
            });
        }
        let base = self.clone();
        let a = *a;
        Self::validated(
            FactorForm::Custom(Arc::new(move |t: &Point| base.eval(&a.apply(t.scale(-1.0))))),
            self.dim,
            self.alpha_i,
            self.psi.clone(),
        )
    }
}

/// Product kernel K(x, y) = k_1(x - A_1 y) ... k_m(x - A_m y).
#[derive(Clone, Debug)]
pub struct CompositeKernel {
    factors: Vec<KernelFactor>,
    matrices: MatrixFamily,
    alpha_total: f64,
}

impl CompositeKernel {
    pub fn new(factors: Vec<KernelFactor>, matrices: MatrixFamily) -> Result<Self> {
        if factors.is_empty() || factors.len() != matrices.len() {
            return Err(Error::Domain(format!(
                "factor count {} must match matrix count {}",
                factors.len(),
                matrices.len()
            )));
        }
        let n = matrices.dim() as f64;
        for f in &factors {
            if f.dim() != matrices.dim() {
                return Err(Error::DimensionMismatch {
                    expected: matrices.dim(),
                    got: f.dim(),
                });
            }
        }
        let m = factors.len() as f64;
        let mut alpha_total = factors.iter().map(|f| f.alpha()).sum::<f64>() - n * (m - 1.0);
        if alpha_total.abs() < 1e-12 {
            alpha_total = 0.0;
        }
        if !(0.0..n).contains(&alpha_total) {
            return Err(Error::Domain(format!(
                "total homogeneity {alpha_total} outside [0, {n})"
            )));
        }
        Ok(CompositeKernel {
            factors,
            matrices,
            alpha_total,
        })
    }

    pub fn factors(&self) -> &[KernelFactor] {
        &self.factors
    }

    pub fn matrices(&self) -> &MatrixFamily {
        &self.matrices
    }

    pub fn dim(&self) -> usize {
        self.matrices.dim()
    }

    pub fn m(&self) -> usize {
        self.factors.len()
    }

    pub fn alpha_total(&self) -> f64 {
        self.alpha_total
    }

    pub fn eval(&self, x: &Point, y: &Point) -> f64 {
        let mut prod = 1.0;
        for (f, i) in self.factors.iter().zip(0..) {
            let t = x.sub(&self.matrices.matrix(i).apply(*y));
            prod *= f.eval(&t);
        }
        prod
    }

    /// True when some factor argument x - A_i y falls within tol of 0.
    pub fn is_singular(&self, x: &Point, y: &Point, tol: f64) -> bool {
        (0..self.m()).any(|i| {
            x.sub(&self.matrices.matrix(i).apply(*y)).norm(self.dim()) <= tol
        })
    }

    /// Images A_i^{-1} x where y-integration becomes singular for target x.
    pub fn singular_images(&self, x: &Point) -> Vec<Point> {
        (0..self.m())
            .map(|i| self.matrices.inverse(i).apply(*x))
            .collect()
    }

    /// Kernel of the adjoint operator: factors t -> k_i(-A_i t) paired with
    /// the inverse matrices.
    pub fn adjoint(&self) -> Result<CompositeKernel> {
        let factors = self
            .factors
            .iter()
            .zip(0..)
            .map(|(f, i)| f.precomposed_negated(self.matrices.matrix(i)))
            .collect::<Result<Vec<_>>>()?;
        CompositeKernel::new(factors, self.matrices.inverted()?)
    }

    /// 1D two-factor kernel |x-y|^(-alpha) |x+y|^(alpha-1): factor orders
    /// 1-alpha and alpha, matrices (1, -1), total homogeneity 0.
    pub fn ricci_sjogren(alpha: f64, psi: &YoungFunction) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Domain(format!("parameter {alpha} outside [0, 1)")));
        }
        let factors = vec![
            KernelFactor::power(1, 1.0 - alpha, psi.clone())?,
            KernelFactor::power(1, alpha, psi.clone())?,
        ];
        let matrices =
            MatrixFamily::new(vec![SquareMatrix::new_1d(1.0), SquareMatrix::new_1d(-1.0)])?;
        CompositeKernel::new(factors, matrices)
    }

    /// Single-factor |x-y|^(alpha-n): the fractional integral I_alpha.
    pub fn riesz(dim: usize, alpha: f64, psi: &YoungFunction) -> Result<Self> {
        let factors = vec![KernelFactor::power(dim, alpha, psi.clone())?];
        CompositeKernel::new(factors, MatrixFamily::new(vec![SquareMatrix::identity(dim)])?)
    }

    /// 1D two-factor kernel with equal orders summing to 1 + alpha_total:
    /// a genuinely fractional composite with matrices (1, -1).
    pub fn fractional_pair(alpha_total: f64, psi: &YoungFunction) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha_total) {
            return Err(Error::Domain(format!(
                "total order {alpha_total} outside [0, 1)"
            )));
        }
        let each = 0.5 * (1.0 + alpha_total);
        let factors = vec![
            KernelFactor::power(1, each, psi.clone())?,
            KernelFactor::power(1, each, psi.clone())?,
        ];
        let matrices =
            MatrixFamily::new(vec![SquareMatrix::new_1d(1.0), SquareMatrix::new_1d(-1.0)])?;
        CompositeKernel::new(factors, matrices)
    }
}

fn factor_grid(dim: usize, half: f64) -> Result<GridSpec> {
    let n = if dim == 1 { SIZE_GRID_1D } else { SIZE_GRID_2D };
    GridSpec::symmetric(dim, half, n)
}

fn sample_factor(spec: &GridSpec, eval: impl Fn(&Point) -> f64) -> GridFunction {
    GridFunction::from_fn(spec.clone(), |p| eval(&p))
}

#[derive(Clone, Debug)]
pub struct SizeReport {
    /// sup over the s grid of s^(n - alpha_i) * ||k||_{Psi, s < |t| <= 2s}.
    pub constant: f64,
    pub per_s: Vec<f64>,
}

/// Fractional size condition: each scale s gets a fresh grid on
/// [-2s, 2s]^n whose cells align with the shell edges, the factor is
/// sampled in closed form, and the shell Luxemburg norm is weighted by
/// s^(n - alpha_i).
pub fn size_constant(k: &KernelFactor, s_grid: &[f64]) -> Result<SizeReport> {
    if s_grid.is_empty() || s_grid.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Domain("scale grid must be positive".into()));
    }
    let n = k.dim() as f64;
    let mut per_s = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let spec = factor_grid(k.dim(), 2.0 * s)?;
        let field = sample_factor(&spec, |p| k.eval(p));
        let norm = annulus_norm(&field, &Annulus::new(Point::origin(), s), k.psi())?;
        per_s.push(s.powf(n - k.alpha()) * norm);
    }
    let constant = per_s.iter().fold(0.0f64, |m, &v| m.max(v));
    Ok(SizeReport { constant, per_s })
}

#[derive(Clone, Debug)]
pub struct HormanderReport {
    /// Truncated sum of (2^j R)^(n - alpha_i) j^order * shell norms of the
    /// difference k(. - x) - k(.).
    pub partial_sum: f64,
    /// Mean base-2 log ratio of the last three consecutive terms; negative
    /// slopes certify empirical summability.
    pub tail_slope: f64,
    pub terms: Vec<f64>,
}

/// Smoothness (Hörmander-type) condition of order `order` for one factor,
/// sampled at displacement x with inner radius R = r_factor |x|.
pub fn hormander_constant(
    k: &KernelFactor,
    order: u32,
    x: &Point,
    r_factor: f64,
    m_terms: usize,
) -> Result<HormanderReport> {
    if !(r_factor > 1.0) {
        return Err(Error::Domain(format!(
            "inner-radius factor {r_factor} must exceed 1"
        )));
    }
    if m_terms < 8 {
        return Err(Error::Domain(format!(
            "need at least 8 shells, got {m_terms}"
        )));
    }
    let dim = k.dim();
    let n = dim as f64;
    let r0 = r_factor * x.norm(dim);
    if !(r0 > 0.0) {
        return Err(Error::Domain("displacement x must be non-zero".into()));
    }
    let mut terms = Vec::with_capacity(m_terms);
    for j in 1..=m_terms {
        let s = r0 * 2.0f64.powi(j as i32 - 1);
        let spec = factor_grid(dim, 2.0 * s)?;
        let field = sample_factor(&spec, |p| k.eval(&p.sub(x)) - k.eval(p));
        let norm = annulus_norm(&field, &Annulus::new(Point::origin(), s), k.psi())?;
        terms.push(s.powf(n - k.alpha()) * (j as f64).powi(order as i32) * norm);
    }
    let partial_sum = terms.iter().sum();
    let mut slopes = Vec::new();
    for w in terms[terms.len().saturating_sub(4)..].windows(2) {
        if w[0] > 0.0 && w[1] > 0.0 {
            slopes.push((w[1] / w[0]).log2());
        }
    }
    let tail_slope = if slopes.is_empty() {
        f64::NEG_INFINITY
    } else {
        slopes.iter().sum::<f64>() / slopes.len() as f64
    };
    Ok(HormanderReport {
        partial_sum,
        tail_slope,
        terms,
    })
}
