use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, Point};
use crate::kernels::CompositeKernel;
use crate::weights::BmoFunction;
use rayon::prelude::*;

/// How cells containing a kernel singularity enter the quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingularCellPolicy {
    /// Drop the whole cell.
    Exclude,
    /// Subdivide the cell, drop only sub-cells containing a singularity,
    /// and sum the kernel over the remaining sub-midpoints against the
    /// cell's function value.
    CellAverage,
}

#[derive(Clone, Copy, Debug)]
pub struct QuadratureSpec {
    pub policy: SingularCellPolicy,
    pub subdivision: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            policy: SingularCellPolicy::CellAverage,
            subdivision: 8,
        }
    }
}

/// A discretized integral operator f -> int K(x, y) f(y) dy.
#[derive(Clone, Debug)]
pub struct OperatorSpec {
    kernel: CompositeKernel,
    quadrature: QuadratureSpec,
}

impl OperatorSpec {
    pub fn new(kernel: CompositeKernel, quadrature: QuadratureSpec) -> Result<Self> {
        if quadrature.policy == SingularCellPolicy::CellAverage && quadrature.subdivision < 4 {
            return Err(Error::Domain(format!(
                "subdivision {} below 4",
                quadrature.subdivision
            )));
        }
        Ok(OperatorSpec { kernel, quadrature })
    }

    pub fn with_default_quadrature(kernel: CompositeKernel) -> Self {
        OperatorSpec {
            kernel,
            quadrature: QuadratureSpec::default(),
        }
    }

    pub fn kernel(&self) -> &CompositeKernel {
        &self.kernel
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        self.quadrature
    }

    /// The adjoint operator under the same quadrature policy.
    pub fn adjoint(&self) -> Result<OperatorSpec> {
        Ok(OperatorSpec {
            kernel: self.kernel.adjoint()?,
            quadrature: self.quadrature,
        })
    }
}

/// T with the factor (b(x) - b(y))^order inserted.
#[derive(Clone, Debug)]
pub struct CommutatorSpec {
    base: OperatorSpec,
    b: BmoFunction,
    order: u32,
}

impl CommutatorSpec {
    pub fn new(base: OperatorSpec, b: BmoFunction, order: u32) -> Self {
        CommutatorSpec { base, b, order }
    }

    pub fn base(&self) -> &OperatorSpec {
        &self.base
    }

    pub fn symbol(&self) -> &BmoFunction {
        &self.b
    }

    pub fn order(&self) -> u32 {
        self.order
    }
}

fn cell_contains(spec: &GridSpec, midpoint: &Point, z: &Point, scale: f64) -> bool {
    let hx = 0.5 * spec.h(0) * scale;
    if (midpoint.x - z.x).abs() > hx * (1.0 + 1e-9) {
        return false;
    }
    if spec.dim() == 2 {
        let hy = 0.5 * spec.h(1) * scale;
        if (midpoint.y - z.y).abs() > hy * (1.0 + 1e-9) {
            return false;
        }
    }
    true
}

/// For a homogeneity-zero kernel the quadrature degenerates only where two
/// singularity images coincide at grid scale while f carries mass in those
/// very cells: there the product kernel behaves like |y - z|^{-n} through
/// the support. One cell-width away every kernel value on supp f is bounded
/// by a fixed grid-scale constant, so such targets stay admissible.
fn degenerate_guard(kernel: &CompositeKernel, f: &GridFunction, x: &Point) -> Result<()> {
    if kernel.alpha_total() > 0.0 {
        return Ok(());
    }
    let images = kernel.singular_images(x);
    let spec = f.spec();
    let h = spec.max_h();
    let dim = spec.dim();
    for i in 0..images.len() {
        for j in 0..i {
            if images[i].dist(&images[j], dim) > 2.0 * h {
                continue;
            }
            let mass = spec.points().enumerate().any(|(c, p)| {
                f.value(c) != 0.0
                    && (p.dist(&images[i], dim) <= 1.1 * h || p.dist(&images[j], dim) <= 1.1 * h)
            });
            if mass {
                return Err(Error::Domain(format!(
                    "target ({}, {}) sits where singularities collide inside supp f",
                    x.x, x.y
                )));
            }
        }
    }
    Ok(())
}

fn quadrature_at(
    kernel: &CompositeKernel,
    quad: QuadratureSpec,
    f: &GridFunction,
    x: &Point,
    weight: impl Fn(usize) -> f64,
) -> f64 {
    let spec = f.spec();
    let vol = spec.cell_volume();
    let images = kernel.singular_images(x);
    let mut acc = 0.0;
    for (c, y) in spec.points().enumerate() {
        let fv = f.value(c);
        if fv == 0.0 {
            continue;
        }
        let singular = images.iter().any(|z| cell_contains(spec, &y, z, 1.0));
        if !singular {
            acc += kernel.eval(x, &y) * fv * weight(c) * vol;
            continue;
        }
        if quad.policy == SingularCellPolicy::Exclude {
            continue;
        }
        let sub = quad.subdivision;
        let sub_scale = 1.0 / sub as f64;
        let sub_vol = vol * sub_scale.powi(spec.dim() as i32);
        let hx = spec.h(0);
        let mut cell_acc = 0.0;
        if spec.dim() == 1 {
            for sx in 0..sub {
                let ys = Point::new_1d(y.x - 0.5 * hx + (sx as f64 + 0.5) * hx * sub_scale);
                if images.iter().any(|z| cell_contains(spec, &ys, z, sub_scale)) {
                    continue;
                }
                cell_acc += kernel.eval(x, &ys);
            }
        } else {
            let hy = spec.h(1);
            for sx in 0..sub {
                for sy in 0..sub {
                    let ys = Point::new_2d(
                        y.x - 0.5 * hx + (sx as f64 + 0.5) * hx * sub_scale,
                        y.y - 0.5 * hy + (sy as f64 + 0.5) * hy * sub_scale,
                    );
                    if images.iter().any(|z| cell_contains(spec, &ys, z, sub_scale)) {
                        continue;
                    }
                    cell_acc += kernel.eval(x, &ys);
                }
            }
        }
        acc += cell_acc * fv * weight(c) * sub_vol;
    }
    acc
}

/// Evaluate T f at each target point.
pub fn apply(spec: &OperatorSpec, f: &GridFunction, targets: &[Point]) -> Result<Vec<f64>> {
    if spec.kernel.dim() != f.spec().dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.kernel.dim(),
            got: f.spec().dim(),
        });
    }
    for x in targets {
        degenerate_guard(&spec.kernel, f, x)?;
    }
    Ok(targets
        .par_iter()
        .map(|x| quadrature_at(&spec.kernel, spec.quadrature, f, x, |_| 1.0))
        .collect())
}

/// Evaluate T over every grid midpoint.
pub fn apply_to_field(spec: &OperatorSpec, f: &GridFunction) -> Result<GridFunction> {
    let targets: Vec<Point> = f.spec().points().collect();
    let values = apply(spec, f, &targets)?;
    GridFunction::new(f.spec().clone(), values)
}

/// Evaluate the order-k commutator (b(x) - b(y))^k against the kernel.
pub fn apply_commutator(
    cspec: &CommutatorSpec,
    f: &GridFunction,
    targets: &[Point],
) -> Result<Vec<f64>> {
    let base = &cspec.base;
    if base.kernel.dim() != f.spec().dim() {
        return Err(Error::DimensionMismatch {
            expected: base.kernel.dim(),
            got: f.spec().dim(),
        });
    }
    if cspec.order == 0 {
        return apply(base, f, targets);
    }
    if cspec.b.field().spec() != f.spec() {
        return Err(Error::Config(
            "symbol and argument live on different grids".into(),
        ));
    }
    for x in targets {
        degenerate_guard(&base.kernel, f, x)?;
    }
    let b = cspec.b.field();
    let order = cspec.order as i32;
    targets
        .par_iter()
        .map(|x| {
            let bx = b
                .sample_nearest(x)
                .ok_or_else(|| Error::Domain(format!("target ({}, {}) outside box", x.x, x.y)))?;
            Ok(quadrature_at(&base.kernel, base.quadrature, f, x, |c| {
                (bx - b.value(c)).powi(order)
            }))
        })
        .collect()
}

pub fn commutator_field(cspec: &CommutatorSpec, f: &GridFunction) -> Result<GridFunction> {
    let targets: Vec<Point> = f.spec().points().collect();
    let values = apply_commutator(cspec, f, &targets)?;
    GridFunction::new(f.spec().clone(), values)
}

/// Evaluate the adjoint T* g at each target.
pub fn apply_adjoint(spec: &OperatorSpec, g: &GridFunction, targets: &[Point]) -> Result<Vec<f64>> {
    apply(&spec.adjoint()?, g, targets)
}

/// e^{z b(x)} T(f e^{-z b})(x) with an overflow guard on |z| ||b||_inf.
pub fn conjugated_apply(
    spec: &OperatorSpec,
    b: &BmoFunction,
    z: f64,
    f: &GridFunction,
    targets: &[Point],
) -> Result<Vec<f64>> {
    let bmax = b.field().max_abs();
    if z.abs() * bmax > 20.0 {
        return Err(Error::NormOverflow(format!(
            "|z| ||b||_inf = {} exceeds the overflow guard",
            z.abs() * bmax
        )));
    }
    if b.field().spec() != f.spec() {
        return Err(Error::Config(
            "symbol and argument live on different grids".into(),
        ));
    }
    let damped = f.zip_with(b.field(), |fv, bv| fv * (-z * bv).exp())?;
    let vals = apply(spec, &damped, targets)?;
    let bf = b.field();
    targets
        .iter()
        .zip(vals)
        .map(|(x, v)| {
            let bx = bf
                .sample_nearest(x)
                .ok_or_else(|| Error::Domain(format!("target ({}, {}) outside box", x.x, x.y)))?;
            Ok((z * bx).exp() * v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::CompositeKernel;
    use crate::maximal::BallFamily;
    use crate::rng::Rng;
    use crate::young::YoungFunction;

    fn lin() -> YoungFunction {
        YoungFunction::linear()
    }

    fn indicator(spec: &GridSpec) -> GridFunction {
        GridFunction::from_fn(spec.clone(), |p| {
            if p.x.abs() <= 1.0 {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn zero_function_maps_to_zero() {
        let kernel = CompositeKernel::riesz(1, 0.5, &lin()).unwrap();
        let op = OperatorSpec::with_default_quadrature(kernel);
        let spec = GridSpec::symmetric(1, 4.0, 64).unwrap();
        let f = GridFunction::constant(spec, 0.0);
        let out = apply(&op, &f, &[Point::new_1d(0.3), Point::new_1d(2.0)]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn riesz_indicator_closed_form() {
        let alpha = 0.5;
        let kernel = CompositeKernel::riesz(1, alpha, &lin()).unwrap();
        let spec = GridSpec::symmetric(1, 4.0, 512).unwrap();
        let f = indicator(&spec);
        let expected = (3.0f64.powf(alpha) - 1.0) / alpha;
        for policy in [SingularCellPolicy::Exclude, SingularCellPolicy::CellAverage] {
            let op = OperatorSpec::new(
                kernel.clone(),
                QuadratureSpec {
                    policy,
                    subdivision: 8,
                },
            )
            .unwrap();
            let got = apply(&op, &f, &[Point::new_1d(2.0)]).unwrap()[0];
            assert!(
                (got - expected).abs() < 5e-4 * expected,
                "{policy:?}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn homogeneity_zero_composite_matches_reference_value() {
        // Closed form of the two-factor |x-y|^(-1/2)|x+y|^(-1/2) integral of
        // the unit-interval indicator at x = 1/2:
        // pi + 2 ln((1 + sqrt(1 - x^2)) / x).
        let kernel = CompositeKernel::ricci_sjogren(0.5, &lin()).unwrap();
        let op = OperatorSpec::new(
            kernel,
            QuadratureSpec {
                policy: SingularCellPolicy::CellAverage,
                subdivision: 2048,
            },
        )
        .unwrap();
        let spec = GridSpec::symmetric(1, 2.0, 512).unwrap();
        let f = indicator(&spec);
        let x = 0.5f64;
        let expected = std::f64::consts::PI + 2.0 * ((1.0 + (1.0 - x * x).sqrt()) / x).ln();
        let got = apply(&op, &f, &[Point::new_1d(x)]).unwrap()[0];
        assert!(
            (got - expected).abs() < 0.01 * expected,
            "{got} vs {expected}"
        );
    }

    #[test]
    fn subdivision_refinement_is_stable() {
        let kernel = CompositeKernel::ricci_sjogren(0.5, &lin()).unwrap();
        let spec = GridSpec::symmetric(1, 2.0, 512).unwrap();
        let f = indicator(&spec);
        let x = [Point::new_1d(0.4)];
        let mut vals = Vec::new();
        for sub in [16usize, 32] {
            let op = OperatorSpec::new(
                kernel.clone(),
                QuadratureSpec {
                    policy: SingularCellPolicy::CellAverage,
                    subdivision: sub,
                },
            )
            .unwrap();
            vals.push(apply(&op, &f, &x).unwrap()[0]);
        }
        assert!(
            (vals[1] - vals[0]).abs() < 0.01 * vals[1].abs(),
            "subdivision drift {vals:?}"
        );
    }

    #[test]
    fn linearity_is_exact() {
        let kernel = CompositeKernel::fractional_pair(0.25, &lin()).unwrap();
        let op = OperatorSpec::with_default_quadrature(kernel);
        let spec = GridSpec::symmetric(1, 2.0, 128).unwrap();
        let mut rng = Rng::new(5);
        let f = GridFunction::from_fn(spec.clone(), |p| {
            if p.x.abs() < 1.0 {
                rng.range(-1.0, 1.0)
            } else {
                0.0
            }
        });
        let g = GridFunction::from_fn(spec.clone(), |p| {
            if p.x.abs() < 1.0 {
                rng.range(-1.0, 1.0)
            } else {
                0.0
            }
        });
        let combo = f.zip_with(&g, |a, b| 2.5 * a - 0.75 * b).unwrap();
        let targets: Vec<Point> = (0..8).map(|k| Point::new_1d(-1.5 + 0.4 * k as f64)).collect();
        let tf = apply(&op, &f, &targets).unwrap();
        let tg = apply(&op, &g, &targets).unwrap();
        let tc = apply(&op, &combo, &targets).unwrap();
        for i in 0..targets.len() {
            let want = 2.5 * tf[i] - 0.75 * tg[i];
            assert!((tc[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    fn test_symbol(spec: &GridSpec, fam: &BallFamily) -> BmoFunction {
        BmoFunction::new(
            GridFunction::from_fn(spec.clone(), |p| p.x.abs().max(1e-6).ln()),
            fam,
        )
        .unwrap()
    }

    #[test]
    fn commutator_reductions() {
        let kernel = CompositeKernel::fractional_pair(0.25, &lin()).unwrap();
        let op = OperatorSpec::with_default_quadrature(kernel);
        let spec = GridSpec::symmetric(1, 2.0, 128).unwrap();
        let fam = BallFamily::all_centered(&spec);
        let f = indicator(&spec).map(|v| 0.5 * v);
        let targets: Vec<Point> = (0..6).map(|k| Point::new_1d(-1.1 + 0.45 * k as f64)).collect();

        let b = test_symbol(&spec, &fam);
        let c0 = CommutatorSpec::new(op.clone(), b.clone(), 0);
        let direct = apply(&op, &f, &targets).unwrap();
        let via = apply_commutator(&c0, &f, &targets).unwrap();
        assert_eq!(direct, via);

        let constant = BmoFunction::new(GridFunction::constant(spec.clone(), 2.0), &fam).unwrap();
        let c1 = CommutatorSpec::new(op.clone(), constant, 1);
        for v in apply_commutator(&c1, &f, &targets).unwrap() {
            assert!(v.abs() < 1e-14);
        }

        // Order 1 as the binomial expansion b Tf - T(bf).
        let c1 = CommutatorSpec::new(op.clone(), b.clone(), 1);
        let got = apply_commutator(&c1, &f, &targets).unwrap();
        let tf = apply(&op, &f, &targets).unwrap();
        let tbf = apply(&op, &f.zip_with(b.field(), |a, c| a * c).unwrap(), &targets).unwrap();
        for (i, x) in targets.iter().enumerate() {
            let bx = b.field().sample_nearest(x).unwrap();
            let want = bx * tf[i] - tbf[i];
            assert!(
                (got[i] - want).abs() <= 1e-10 * want.abs().max(1.0),
                "target {i}: {} vs {want}",
                got[i]
            );
        }
    }

    #[test]
    fn commutator_leibniz_ladder() {
        let kernel = CompositeKernel::fractional_pair(0.3, &lin()).unwrap();
        let op = OperatorSpec::with_default_quadrature(kernel);
        let spec = GridSpec::symmetric(1, 2.0, 96).unwrap();
        let fam = BallFamily::all_centered(&spec);
        let b = test_symbol(&spec, &fam);
        let f = indicator(&spec);
        let targets = [Point::new_1d(0.33), Point::new_1d(-0.71)];
        let k = 2u32;
        let ck = CommutatorSpec::new(op.clone(), b.clone(), k);
        let got = apply_commutator(&ck, &f, &targets).unwrap();
        let mut want = vec![0.0; targets.len()];
        for j in 0..=k {
            let coeff = match j {
                0 => 1.0,
                1 => -2.0,
                _ => 1.0,
            };
            let arg = f
                .zip_with(b.field(), |a, c| a * c.powi(j as i32))
                .unwrap();
            let t = apply(&op, &arg, &targets).unwrap();
            for (i, x) in targets.iter().enumerate() {
                let bx = b.field().sample_nearest(x).unwrap();
                want[i] += coeff * bx.powi((k - j) as i32) * t[i];
            }
        }
        for i in 0..targets.len() {
            assert!(
                (got[i] - want[i]).abs() <= 1e-9 * want[i].abs().max(1.0),
                "target {i}: {} vs {}",
                got[i],
                want[i]
            );
        }
    }

    #[test]
    fn adjoint_of_symmetric_operator_is_itself() {
        let kernel = CompositeKernel::riesz(1, 0.4, &lin()).unwrap();
        let op = OperatorSpec::with_default_quadrature(kernel);
        let spec = GridSpec::symmetric(1, 2.0, 128).unwrap();
        let mut rng = Rng::new(88);
        let g = GridFunction::from_fn(spec.clone(), |p| {
            if p.x.abs() < 1.0 {
                rng.range(-1.0, 1.0)
            } else {
                0.0
            }
        });
        let targets = [Point::new_1d(1.4), Point::new_1d(-0.2)];
        let a = apply(&op, &g, &targets).unwrap();
        let b = apply_adjoint(&op, &g, &targets).unwrap();
        for i in 0..targets.len() {
            assert!((a[i] - b[i]).abs() <= 1e-12 * a[i].abs().max(1.0));
        }
    }

    #[test]
    fn duality_pairing_under_exclusion_is_exact() {
        // With matrices of unit norm the excluded (x, y) pairs coincide for
        // T and T*, so the discrete pairings are transposes of each other.
        let kernel = CompositeKernel::ricci_sjogren(0.4, &lin()).unwrap();
        let op = OperatorSpec::new(
            kernel,
            QuadratureSpec {
                policy: SingularCellPolicy::Exclude,
                subdivision: 8,
            },
        )
        .unwrap();
        let spec = GridSpec::symmetric(1, 2.0, 128).unwrap();
        let mut rng = Rng::new(9);
        let f = GridFunction::from_fn(spec.clone(), |p| {
            if (0.1..0.5).contains(&p.x.abs()) {
                rng.range(-1.0, 1.0)
            } else {
                0.0
            }
        });
        let g = GridFunction::from_fn(spec.clone(), |p| {
            if (0.1..0.5).contains(&p.x.abs()) {
                rng.range(-1.0, 1.0)
            } else {
                0.0
            }
        });
        let tf = apply_to_field(&op, &f).unwrap();
        let adj = op.adjoint().unwrap();
        let tsg = apply_to_field(&adj, &g).unwrap();
        let lhs = tf.zip_with(&g, |a, b| a * b).unwrap().integral();
        let rhs = tsg.zip_with(&f, |a, b| a * b).unwrap().integral();
        assert!(
            (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-12),
            "{lhs} vs {rhs}"
        );
    }

    #[test]
    fn conjugation_reductions_and_derivative() {
        let kernel = CompositeKernel::fractional_pair(0.25, &lin()).unwrap();
        let op = OperatorSpec::with_default_quadrature(kernel);
        let spec = GridSpec::symmetric(1, 2.0, 96).unwrap();
        let fam = BallFamily::all_centered(&spec);
        let b = test_symbol(&spec, &fam);
        let f = indicator(&spec);
        let targets = [Point::new_1d(0.27), Point::new_1d(-0.63)];

        let base = apply(&op, &f, &targets).unwrap();
        let at_zero = conjugated_apply(&op, &b, 0.0, &f, &targets).unwrap();
        for i in 0..targets.len() {
            assert!((base[i] - at_zero[i]).abs() <= 1e-12 * base[i].abs().max(1.0));
        }

        let constant = BmoFunction::new(GridFunction::constant(spec.clone(), 3.0), &fam).unwrap();
        let conj = conjugated_apply(&op, &constant, 1.3, &f, &targets).unwrap();
        for i in 0..targets.len() {
            assert!((base[i] - conj[i]).abs() <= 1e-11 * base[i].abs().max(1.0));
        }

        let c1 = CommutatorSpec::new(op.clone(), b.clone(), 1);
        let comm = apply_commutator(&c1, &f, &targets).unwrap();
        let mut errs = Vec::new();
        for z in [0.2, 0.1] {
            let plus = conjugated_apply(&op, &b, z, &f, &targets).unwrap();
            let minus = conjugated_apply(&op, &b, -z, &f, &targets).unwrap();
            let err: f64 = targets
                .iter()
                .enumerate()
                .map(|(i, _)| ((plus[i] - minus[i]) / (2.0 * z) - comm[i]).abs())
                .sum();
            errs.push(err);
        }
        let ratio = errs[0] / errs[1];
        assert!(
            (3.5..=4.5).contains(&ratio),
            "central-difference error ratio {ratio}, errors {errs:?}"
        );
    }

    #[test]
    fn degenerate_targets_rejected_only_with_nearby_mass() {
        let kernel = CompositeKernel::ricci_sjogren(0.5, &lin()).unwrap();
        let op = OperatorSpec::with_default_quadrature(kernel);
        let spec = GridSpec::symmetric(1, 2.0, 128).unwrap();
        let near_zero = GridFunction::from_fn(spec.clone(), |p| {
            if p.x.abs() < 0.05 {
                1.0
            } else {
                0.0
            }
        });
        let away = GridFunction::from_fn(spec.clone(), |p| {
            if (0.2..0.5).contains(&p.x.abs()) {
                1.0
            } else {
                0.0
            }
        });
        let target = [Point::new_1d(0.01)];
        assert!(apply(&op, &near_zero, &target).is_err());
        assert!(apply(&op, &away, &target).is_ok());
    }

    #[test]
    fn conjugation_overflow_guard() {
        let kernel = CompositeKernel::riesz(1, 0.5, &lin()).unwrap();
        let op = OperatorSpec::with_default_quadrature(kernel);
        let spec = GridSpec::symmetric(1, 2.0, 64).unwrap();
        let fam = BallFamily::all_centered(&spec);
        let big = BmoFunction::new(GridFunction::constant(spec.clone(), 300.0), &fam).unwrap();
        let f = indicator(&spec);
        assert!(conjugated_apply(&op, &big, 0.1, &f, &[Point::new_1d(1.5)]).is_err());
    }
}
