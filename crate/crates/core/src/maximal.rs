use crate::error::{Error, Result};
use crate::grid::{Ball, GridFunction, GridSpec, Point, BALL_EPS};
use crate::orlicz::luxemburg_values_solver;
use crate::young::{YoungFunction, YoungKind};
use rayon::prelude::*;

/// A finite family of balls: one ball per (cell midpoint, radius) pair.
///
/// Radii always start at half the smallest cell width, so every cell carries
/// a singleton ball and pointwise domination M f >= |f| holds, and extend
/// past twice the box diameter so every ball doubling stays inside the
/// family's scale range.
#[derive(Clone, Debug)]
pub struct BallFamily {
    spec: GridSpec,
    radii: Vec<f64>,
}

impl BallFamily {
    /// Dyadic radii r_j = (h_min / 2) * 2^j at every cell midpoint.
    pub fn all_centered(spec: &GridSpec) -> Self {
        let r0 = 0.5 * min_h(spec);
        let target = 2.0 * spec.diameter();
        let mut radii = vec![r0];
        while *radii.last().unwrap() < target {
            let next = radii.last().unwrap() * 2.0;
            radii.push(next);
        }
        BallFamily {
            spec: spec.clone(),
            radii,
        }
    }

    /// Dense radii r_k = k * h_min / 2 at every cell midpoint. Intended for
    /// cross-checking the dyadic family on small grids.
    pub fn oracle(spec: &GridSpec) -> Result<Self> {
        let step = 0.5 * min_h(spec);
        let target = 2.0 * spec.diameter();
        let count = (target / step).ceil() as usize + 1;
        if spec.cell_count() * count > 2_000_000 {
            return Err(Error::Domain(format!(
                "dense ball family would hold {} balls; use all_centered",
                spec.cell_count() * count
            )));
        }
        let radii = (1..=count).map(|k| k as f64 * step).collect();
        Ok(BallFamily {
            spec: spec.clone(),
            radii,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn ball(&self, center_idx: usize, radius_idx: usize) -> Ball {
        Ball::new(self.spec.midpoint(center_idx), self.radii[radius_idx])
    }

    pub fn ball_count(&self) -> usize {
        self.spec.cell_count() * self.radii.len()
    }
}

fn min_h(spec: &GridSpec) -> f64 {
    if spec.dim() == 2 {
        spec.h(0).min(spec.h(1))
    } else {
        spec.h(0)
    }
}

/// Per-row cumulative sums of a cell field, so any ball row-range sums in
/// O(rows) instead of O(cells).
pub(crate) struct PrefixField {
    pre: Vec<Vec<f64>>,
}

impl PrefixField {
    pub(crate) fn new(spec: &GridSpec, value: impl Fn(usize) -> f64) -> Self {
        let n = spec.cells_per_axis();
        let ny = if spec.dim() == 2 { n } else { 1 };
        let mut pre = Vec::with_capacity(ny);
        for iy in 0..ny {
            let mut row = Vec::with_capacity(n + 1);
            row.push(0.0);
            let mut acc = 0.0;
            for ix in 0..n {
                acc += value(spec.index(ix, iy));
                row.push(acc);
            }
            pre.push(row);
        }
        PrefixField { pre }
    }

    pub(crate) fn ball_sum(&self, rows: &[(usize, usize, usize)]) -> f64 {
        rows.iter()
            .map(|&(iy, ix0, ix1)| self.pre[iy][ix1 + 1] - self.pre[iy][ix0])
            .sum()
    }
}

fn per_ball_values<F>(family: &BallFamily, eval: F) -> Vec<f64>
where
    F: Fn(&Ball, &[(usize, usize, usize)], &mut Vec<f64>) -> f64 + Sync,
{
    let spec = &family.spec;
    let nr = family.radii.len();
    (0..spec.cell_count())
        .into_par_iter()
        .flat_map_iter(|ci| {
            let center = spec.midpoint(ci);
            let mut scratch = Vec::new();
            let mut out = Vec::with_capacity(nr);
            for &r in &family.radii {
                let ball = Ball::new(center, r);
                let rows = ball.rows(spec);
                out.push(eval(&ball, &rows, &mut scratch));
            }
            out.into_iter()
        })
        .collect()
}

/// The Orlicz maximal operator over a ball family, stored as per-ball values
/// so both the cell field and off-grid point queries see the same suprema.
pub struct PrecomputedMaximal {
    family: BallFamily,
    values: Vec<f64>,
    field: GridFunction,
}

impl PrecomputedMaximal {
    /// M_{alpha,psi} f: sup over balls of |B|^(alpha/n) times the Luxemburg
    /// norm of f on B. |B| is the unclipped ball measure; the norm average
    /// is taken over the discretized ball with its own cell-count measure,
    /// which keeps constants exact fixed points of the averaging operator.
    pub fn new(
        f: &GridFunction,
        family: &BallFamily,
        alpha: f64,
        psi: &YoungFunction,
    ) -> Result<Self> {
        let spec = f.spec();
        if spec != &family.spec {
            return Err(Error::Config(
                "maximal operator requires the field and family on one grid".into(),
            ));
        }
        let n = spec.dim() as f64;
        if alpha < 0.0 || alpha >= n {
            return Err(Error::Domain(format!(
                "fractional order {alpha} outside [0, {n})"
            )));
        }
        let dim = spec.dim();

        enum Path {
            Linear(PrefixField),
            Power(f64, PrefixField),
            Max,
            Solver,
        }
        let path = match psi.kind() {
            YoungKind::Linear => Path::Linear(PrefixField::new(spec, |i| f.value(i).abs())),
            YoungKind::Power { r } => {
                Path::Power(r, PrefixField::new(spec, |i| f.value(i).abs().powf(r)))
            }
            YoungKind::LinfMarker => Path::Max,
            _ => Path::Solver,
        };

        let values = per_ball_values(family, |ball, rows, scratch| {
            if rows.is_empty() {
                return 0.0;
            }
            let count: usize = rows.iter().map(|&(_, ix0, ix1)| ix1 - ix0 + 1).sum();
            let count = count as f64;
            let weight = if alpha == 0.0 {
                1.0
            } else {
                ball.measure_unclipped(dim).powf(alpha / n)
            };
            let norm = match &path {
                Path::Linear(pre) => pre.ball_sum(rows) / count,
                Path::Power(r, pre) => (pre.ball_sum(rows) / count).powf(1.0 / r),
                Path::Max => rows
                    .iter()
                    .flat_map(|&(iy, ix0, ix1)| {
                        (ix0..=ix1).map(move |ix| (ix, iy))
                    })
                    .fold(0.0f64, |m, (ix, iy)| m.max(f.value(spec.index(ix, iy)).abs())),
                Path::Solver => {
                    scratch.clear();
                    for &(iy, ix0, ix1) in rows {
                        for ix in ix0..=ix1 {
                            scratch.push(f.value(spec.index(ix, iy)).abs());
                        }
                    }
                    luxemburg_values_solver(scratch, 1.0 / count, psi)
                        .unwrap_or(f64::INFINITY)
                }
            };
            weight * norm
        });

        let mut field = GridFunction::constant(spec.clone(), 0.0);
        let nr = family.radii.len();
        for ci in 0..spec.cell_count() {
            let center = spec.midpoint(ci);
            for (ri, &r) in family.radii.iter().enumerate() {
                let v = values[ci * nr + ri];
                let ball = Ball::new(center, r);
                for (iy, ix0, ix1) in ball.rows(spec) {
                    for ix in ix0..=ix1 {
                        let idx = spec.index(ix, iy);
                        let slot = &mut field.values_mut()[idx];
                        if v > *slot {
                            *slot = v;
                        }
                    }
                }
            }
        }

        Ok(PrecomputedMaximal {
            family: family.clone(),
            values,
            field,
        })
    }

    pub fn field(&self) -> &GridFunction {
        &self.field
    }

    pub fn into_field(self) -> GridFunction {
        self.field
    }

    /// Supremum over family balls containing x; x need not be a midpoint.
    /// Points no ball reaches give 0.
    pub fn at(&self, x: &Point) -> f64 {
        let spec = &self.family.spec;
        let dim = spec.dim();
        let radii = &self.family.radii;
        let nr = radii.len();
        let mut best = 0.0f64;
        for ci in 0..spec.cell_count() {
            let d = spec.midpoint(ci).dist(x, dim);
            let first = radii.partition_point(|&r| d > r * (1.0 + BALL_EPS));
            for ri in first..nr {
                best = best.max(self.values[ci * nr + ri]);
            }
        }
        best
    }
}

/// One-shot field form of the Orlicz maximal operator.
pub fn orlicz_maximal(
    f: &GridFunction,
    family: &BallFamily,
    alpha: f64,
    psi: &YoungFunction,
) -> Result<GridFunction> {
    Ok(PrecomputedMaximal::new(f, family, alpha, psi)?.into_field())
}

/// Fractional averaging maximal operator M_alpha (Luxemburg norm = mean).
pub fn fractional_maximal(f: &GridFunction, family: &BallFamily, alpha: f64) -> Result<GridFunction> {
    orlicz_maximal(f, family, alpha, &YoungFunction::linear())
}

/// Sharp maximal function: sup over balls of the mean oscillation
/// (1/|B|) int_B |f - avg_B f|, averaged over the discretized ball.
pub fn sharp_maximal(f: &GridFunction, family: &BallFamily) -> Result<GridFunction> {
    let spec = f.spec();
    if spec != &family.spec {
        return Err(Error::Config(
            "sharp maximal requires the field and family on one grid".into(),
        ));
    }
    let pre = PrefixField::new(spec, |i| f.value(i));
    let values = per_ball_values(family, |_, rows, _| {
        if rows.is_empty() {
            return 0.0;
        }
        let count: usize = rows.iter().map(|&(_, ix0, ix1)| ix1 - ix0 + 1).sum();
        let avg = pre.ball_sum(rows) / count as f64;
        let mut dev = 0.0;
        for &(iy, ix0, ix1) in rows {
            for ix in ix0..=ix1 {
                dev += (f.value(spec.index(ix, iy)) - avg).abs();
            }
        }
        dev / count as f64
    });
    Ok(scatter_max(spec, family, &values))
}

fn scatter_max(spec: &GridSpec, family: &BallFamily, values: &[f64]) -> GridFunction {
    let mut field = GridFunction::constant(spec.clone(), 0.0);
    let nr = family.radii.len();
    for ci in 0..spec.cell_count() {
        let center = spec.midpoint(ci);
        for (ri, &r) in family.radii.iter().enumerate() {
            let v = values[ci * nr + ri];
            let ball = Ball::new(center, r);
            for (iy, ix0, ix1) in ball.rows(spec) {
                for ix in ix0..=ix1 {
                    let idx = spec.index(ix, iy);
                    let slot = &mut field.values_mut()[idx];
                    if v > *slot {
                        *slot = v;
                    }
                }
            }
        }
    }
    field
}

/// delta-sharp maximal: M^#_delta f = (M^# |f|^delta)^(1/delta).
pub fn delta_sharp(f: &GridFunction, family: &BallFamily, delta: f64) -> Result<GridFunction> {
    if delta <= 0.0 || delta > 1.0 {
        return Err(Error::Domain(format!(
            "delta-sharp exponent {delta} outside (0, 1]"
        )));
    }
    let powered = f.map(|v| v.abs().powf(delta));
    Ok(sharp_maximal(&powered, family)?.map(|v| v.powf(1.0 / delta)))
}

/// M_eps g = (M |g|^eps)^(1/eps) with the averaging maximal operator.
pub fn eps_maximal(f: &GridFunction, family: &BallFamily, eps: f64) -> Result<GridFunction> {
    if eps <= 0.0 || eps > 1.0 {
        return Err(Error::Domain(format!(
            "maximal exponent {eps} outside (0, 1]"
        )));
    }
    let powered = f.map(|v| v.abs().powf(eps));
    Ok(fractional_maximal(&powered, family, 0.0)?.map(|v| v.powf(1.0 / eps)))
}

/// k-fold composition of the averaging maximal operator.
pub fn iterated_maximal(f: &GridFunction, family: &BallFamily, k: u32) -> Result<GridFunction> {
    let mut g = f.map(f64::abs);
    for _ in 0..k {
        g = fractional_maximal(&g, family, 0.0)?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn small_field(n: usize, seed: u64) -> GridFunction {
        let spec = GridSpec::symmetric(1, 1.0, n).unwrap();
        let mut rng = Rng::new(seed);
        GridFunction::from_fn(spec, |_| rng.range(-2.0, 2.0))
    }

    #[test]
    fn family_radii_span_singletons_to_doubled_diameter() {
        let spec = GridSpec::symmetric(1, 1.0, 64).unwrap();
        let fam = BallFamily::all_centered(&spec);
        let radii = fam.radii();
        assert!((radii[0] - 0.5 * spec.h(0)).abs() < 1e-15);
        assert!(*radii.last().unwrap() >= 2.0 * spec.diameter());
        for w in radii.windows(2) {
            assert!((w[1] / w[0] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_field_fixed_point() {
        for (dim, n) in [(1usize, 64usize), (2, 16)] {
            let spec = GridSpec::symmetric(dim, 1.0, n).unwrap();
            let fam = BallFamily::all_centered(&spec);
            let f = GridFunction::constant(spec, 3.5);
            let m = fractional_maximal(&f, &fam, 0.0).unwrap();
            for &v in m.values() {
                assert!((v - 3.5).abs() < 1e-12, "dim {dim}: got {v}");
            }
        }
    }

    #[test]
    fn dominates_pointwise() {
        let f = small_field(64, 11);
        let fam = BallFamily::all_centered(f.spec());
        for psi in [
            YoungFunction::linear(),
            YoungFunction::power(2.0).unwrap(),
            YoungFunction::power_log(1.0, 1.0).unwrap(),
        ] {
            let m = orlicz_maximal(&f, &fam, 0.0, &psi).unwrap();
            for i in 0..f.values().len() {
                assert!(
                    m.value(i) >= f.value(i).abs() * (1.0 - 1e-12),
                    "cell {i}: M = {}, |f| = {}",
                    m.value(i),
                    f.value(i).abs()
                );
            }
        }
    }

    #[test]
    fn iteration_is_monotone() {
        let f = small_field(64, 5);
        let fam = BallFamily::all_centered(f.spec());
        let m1 = iterated_maximal(&f, &fam, 1).unwrap();
        let m2 = iterated_maximal(&f, &fam, 2).unwrap();
        for i in 0..m1.values().len() {
            assert!(m2.value(i) >= m1.value(i) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn monotone_in_the_field() {
        let f = small_field(64, 21);
        let g = f.map(|v| v.abs() + 0.3);
        let fam = BallFamily::all_centered(f.spec());
        let psi = YoungFunction::power_log(1.0, 2.0).unwrap();
        let mf = orlicz_maximal(&f, &fam, 0.0, &psi).unwrap();
        let mg = orlicz_maximal(&g, &fam, 0.0, &psi).unwrap();
        for i in 0..mf.values().len() {
            assert!(mf.value(i) <= mg.value(i) + 1e-10);
        }
    }

    #[test]
    fn fractional_weight_uses_unclipped_measure() {
        let spec = GridSpec::symmetric(1, 1.0, 64).unwrap();
        let fam = BallFamily::all_centered(&spec);
        let f = GridFunction::constant(spec, 1.0);
        let m = fractional_maximal(&f, &fam, 0.5).unwrap();
        let r_max = *fam.radii().last().unwrap();
        let expected = (2.0 * r_max).powf(0.5);
        for &v in m.values() {
            assert!((v - expected).abs() < 1e-10, "got {v}, expected {expected}");
        }
    }

    #[test]
    fn point_queries_match_field_at_midpoints() {
        let f = small_field(48, 33);
        let fam = BallFamily::all_centered(f.spec());
        let psi = YoungFunction::power(2.0).unwrap();
        let pre = PrecomputedMaximal::new(&f, &fam, 0.3, &psi).unwrap();
        for i in (0..48).step_by(5) {
            let x = f.spec().midpoint(i);
            let field_v = pre.field().value(i);
            let query_v = pre.at(&x);
            assert!(
                (field_v - query_v).abs() <= 1e-14 * field_v.max(1.0),
                "cell {i}: field {field_v}, query {query_v}"
            );
        }
    }

    #[test]
    fn point_query_matches_brute_force_off_grid() {
        let f = small_field(16, 77);
        let spec = f.spec().clone();
        let fam = BallFamily::all_centered(&spec);
        let psi = YoungFunction::linear();
        let pre = PrecomputedMaximal::new(&f, &fam, 0.0, &psi).unwrap();
        let x = Point::new_1d(0.171);
        let mut brute = 0.0f64;
        for ci in 0..spec.cell_count() {
            for ri in 0..fam.radii().len() {
                let ball = fam.ball(ci, ri);
                if !ball.contains(&x, 1) {
                    continue;
                }
                let cells = ball.cells(&spec);
                if cells.is_empty() {
                    continue;
                }
                let avg =
                    cells.iter().map(|&i| f.value(i).abs()).sum::<f64>() / cells.len() as f64;
                brute = brute.max(avg);
            }
        }
        let got = pre.at(&x);
        assert!((got - brute).abs() <= 1e-12 * brute.max(1.0), "{got} vs {brute}");
    }

    #[test]
    fn sharp_of_constant_vanishes() {
        let spec = GridSpec::symmetric(1, 1.0, 64).unwrap();
        let fam = BallFamily::all_centered(&spec);
        let f = GridFunction::constant(spec, 7.0);
        let s = sharp_maximal(&f, &fam).unwrap();
        for &v in s.values() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn sharp_of_linear_field_is_half_mean_range() {
        // For f = 3x on [-1, 1] the largest mean oscillation over any
        // subinterval is attained on the whole box: avg |3x| = 1.5, and the
        // midpoint sums are exact for this integrand, so the supremum is
        // exactly 1.5 at every cell (every cell lies in a whole-box ball).
        let spec = GridSpec::symmetric(1, 1.0, 64).unwrap();
        let fam = BallFamily::all_centered(&spec);
        let f = GridFunction::from_fn(spec, |p| 3.0 * p.x);
        let s = sharp_maximal(&f, &fam).unwrap();
        for &v in s.values() {
            assert!((v - 1.5).abs() < 1e-12, "got {v}");
        }
    }

    #[test]
    fn sharp_of_sign_is_one_everywhere() {
        // Any ball sees values +/-1 with mean a, giving oscillation 1 - a^2;
        // the whole-box ball splits evenly (a = 0), so the supremum is 1.
        let spec = GridSpec::symmetric(1, 1.0, 64).unwrap();
        let fam = BallFamily::all_centered(&spec);
        let f = GridFunction::from_fn(spec, |p| if p.x > 0.0 { 1.0 } else { -1.0 });
        let s = sharp_maximal(&f, &fam).unwrap();
        for &v in s.values() {
            assert!((v - 1.0).abs() < 1e-12, "got {v}");
        }
    }

    #[test]
    fn sharp_is_dominated_by_twice_maximal() {
        let f = small_field(64, 13);
        let fam = BallFamily::all_centered(f.spec());
        let s = sharp_maximal(&f, &fam).unwrap();
        let m = fractional_maximal(&f, &fam, 0.0).unwrap();
        for i in 0..s.values().len() {
            assert!(s.value(i) <= 2.0 * m.value(i) + 1e-12);
        }
    }

    #[test]
    fn reflection_covariance_is_exact() {
        // On a symmetric grid the map x -> -x permutes cells, so the maximal
        // field of the reflected function is the reflected maximal field.
        let spec = GridSpec::symmetric(1, 1.0, 32).unwrap();
        let mut rng = Rng::new(17);
        let f = GridFunction::from_fn(spec.clone(), |_| rng.range(0.0, 2.0));
        let fam = BallFamily::all_centered(&spec);
        let reflected = GridFunction::from_fn(spec.clone(), |p| {
            f.sample_nearest(&Point::new_1d(-p.x)).unwrap()
        });
        let psi = YoungFunction::power_log(1.0, 1.0).unwrap();
        let mf = PrecomputedMaximal::new(&f, &fam, 0.3, &psi).unwrap();
        let mr = PrecomputedMaximal::new(&reflected, &fam, 0.3, &psi).unwrap();
        for i in 0..spec.cell_count() {
            let x = spec.midpoint(i);
            let lhs = mr.at(&Point::new_1d(-x.x));
            let rhs = mf.field().value(i);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * rhs.max(1.0),
                "cell {i}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn composition_with_power_maximal_stays_comparable() {
        let f = small_field(48, 29);
        let fam = BallFamily::all_centered(f.spec());
        let mr = orlicz_maximal(&f, &fam, 0.0, &YoungFunction::power(2.0).unwrap()).unwrap();
        let mmr = fractional_maximal(&mr, &fam, 0.0).unwrap();
        for i in 0..mr.values().len() {
            let ratio = mmr.value(i) / mr.value(i);
            assert!(
                (1.0 - 1e-12..=4.0).contains(&ratio),
                "cell {i}: ratio {ratio}"
            );
        }
    }

    #[test]
    fn delta_sharp_at_one_is_sharp_of_abs() {
        let f = small_field(32, 3);
        let fam = BallFamily::all_centered(f.spec());
        let a = delta_sharp(&f, &fam, 1.0).unwrap();
        let b = sharp_maximal(&f.map(f64::abs), &fam).unwrap();
        for i in 0..a.values().len() {
            assert!((a.value(i) - b.value(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_family_brackets_dyadic_family() {
        let f = small_field(32, 9);
        let dyadic = BallFamily::all_centered(f.spec());
        let dense = BallFamily::oracle(f.spec()).unwrap();
        let md = fractional_maximal(&f, &dyadic, 0.0).unwrap();
        let mo = fractional_maximal(&f, &dense, 0.0).unwrap();
        for i in 0..md.values().len() {
            assert!(mo.value(i) >= md.value(i) * (1.0 - 1e-12));
            assert!(
                mo.value(i) <= 3.0 * md.value(i) + 1e-12,
                "cell {i}: dense {} far above dyadic {}",
                mo.value(i),
                md.value(i)
            );
        }
    }

    #[test]
    fn oracle_family_size_guard() {
        let spec = GridSpec::symmetric(2, 1.0, 128).unwrap();
        assert!(BallFamily::oracle(&spec).is_err());
    }

    #[test]
    fn eps_maximal_interpolates_linear_case() {
        let f = small_field(48, 41);
        let fam = BallFamily::all_centered(f.spec());
        let a = eps_maximal(&f, &fam, 1.0).unwrap();
        let b = fractional_maximal(&f, &fam, 0.0).unwrap();
        for i in 0..a.values().len() {
            assert!((a.value(i) - b.value(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_point_query_consistency() {
        let spec = GridSpec::symmetric(2, 1.0, 12).unwrap();
        let mut rng = Rng::new(55);
        let f = GridFunction::from_fn(spec.clone(), |_| rng.range(0.0, 3.0));
        let fam = BallFamily::all_centered(&spec);
        let pre = PrecomputedMaximal::new(&f, &fam, 0.0, &YoungFunction::linear()).unwrap();
        for i in [0usize, 17, 64, 143] {
            let x = spec.midpoint(i);
            assert!((pre.field().value(i) - pre.at(&x)).abs() < 1e-13);
        }
    }
}
