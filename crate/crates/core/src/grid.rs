use crate::error::{Error, Result};

/// Relative slack used in ball membership tests. Midpoint distances are exact
/// to rounding, so any slack well above 1e-13 and well below one cell width
/// gives stable, symmetric cell sets; boundary ties at lattice distances are
/// resolved towards inclusion.
pub const BALL_EPS: f64 = 1e-9;

const MIN_CELLS_PER_AXIS: usize = 8;

/// Point of the line (y = 0) or the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new_1d(x: f64) -> Self {
        Point { x, y: 0.0 }
    }

    pub fn new_2d(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn origin() -> Self {
        Point { x: 0.0, y: 0.0 }
    }

    pub fn norm(&self, dim: usize) -> f64 {
        if dim == 1 {
            self.x.abs()
        } else {
            self.x.hypot(self.y)
        }
    }

    pub fn dist(&self, other: &Point, dim: usize) -> f64 {
        self.sub(other).norm(dim)
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point {
            x: self.x - other.x,
            y: self.y - other.y,
        }
    }

    pub fn add(&self, other: &Point) -> Point {
        Point {
            x: self.x + other.x,
            y: self.y + other.y,
        }
    }

    pub fn scale(&self, c: f64) -> Point {
        Point {
            x: c * self.x,
            y: c * self.y,
        }
    }
}

/// Uniform midpoint grid over an axis-aligned box in dimension 1 or 2, with
/// `n` cells per axis. Cell `i` along an axis has midpoint `lo + (i + 1/2) h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dim: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    n: usize,
}

impl GridSpec {
    pub fn new(dim: usize, lo: &[f64], hi: &[f64], n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Domain(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if n < MIN_CELLS_PER_AXIS {
            return Err(Error::GridTooCoarse {
                n,
                min: MIN_CELLS_PER_AXIS,
            });
        }
        if lo.len() < dim || hi.len() < dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: lo.len().min(hi.len()),
            });
        }
        let mut lo_a = [0.0; 2];
        let mut hi_a = [0.0; 2];
        for k in 0..dim {
            if !lo[k].is_finite() || !hi[k].is_finite() || hi[k] <= lo[k] {
                return Err(Error::Domain(format!(
                    "invalid box on axis {k}: [{}, {}]",
                    lo[k], hi[k]
                )));
            }
            lo_a[k] = lo[k];
            hi_a[k] = hi[k];
        }
        Ok(GridSpec {
            dim,
            lo: lo_a,
            hi: hi_a,
            n,
        })
    }

    /// Box [-half, half]^dim with n cells per axis.
    pub fn symmetric(dim: usize, half: f64, n: usize) -> Result<Self> {
        GridSpec::new(dim, &[-half, -half], &[half, half], n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.lo[axis]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.hi[axis]
    }

    pub fn h(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.n as f64
    }

    pub fn max_h(&self) -> f64 {
        (0..self.dim).map(|k| self.h(k)).fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|k| self.h(k)).product()
    }

    pub fn cell_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn box_measure(&self) -> f64 {
        (0..self.dim).map(|k| self.hi[k] - self.lo[k]).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim)
            .map(|k| (self.hi[k] - self.lo[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    pub fn split_index(&self, idx: usize) -> (usize, usize) {
        if self.dim == 1 {
            (idx, 0)
        } else {
            (idx % self.n, idx / self.n)
        }
    }

    pub fn midpoint(&self, idx: usize) -> Point {
        let (ix, iy) = self.split_index(idx);
        let x = self.lo[0] + (ix as f64 + 0.5) * self.h(0);
        if self.dim == 1 {
            Point::new_1d(x)
        } else {
            Point::new_2d(x, self.lo[1] + (iy as f64 + 0.5) * self.h(1))
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.cell_count()).map(move |i| self.midpoint(i))
    }

    pub fn contains(&self, p: &Point) -> bool {
        let tol = 1e-9 * self.max_h();
        let mut inside = p.x >= self.lo[0] - tol && p.x <= self.hi[0] + tol;
        if self.dim == 2 {
            inside = inside && p.y >= self.lo[1] - tol && p.y <= self.hi[1] + tol;
        }
        inside
    }

    /// Index of the cell whose interior (or boundary, ties clamped inward)
    /// holds `p`, or None when `p` is outside the box.
    pub fn nearest_cell(&self, p: &Point) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let clampi = |v: f64, h: f64, lo: f64| -> usize {
            let i = ((v - lo) / h).floor() as i64;
            i.clamp(0, self.n as i64 - 1) as usize
        };
        let ix = clampi(p.x, self.h(0), self.lo[0]);
        if self.dim == 1 {
            Some(ix)
        } else {
            let iy = clampi(p.y, self.h(1), self.lo[1]);
            Some(self.index(ix, iy))
        }
    }

    /// Grid over the same box with `factor` times as many cells per axis.
    pub fn refined(&self, factor: usize) -> Result<GridSpec> {
        GridSpec::new(self.dim, &self.lo[..self.dim], &self.hi[..self.dim], self.n * factor)
    }
}

/// Scalar field sampled at cell midpoints.
#[derive(Debug, Clone)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.cell_count() {
            return Err(Error::DimensionMismatch {
                expected: spec.cell_count(),
                got: values.len(),
            });
        }
        Ok(GridFunction { spec, values })
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(Point) -> f64) -> Self {
        let values = (0..spec.cell_count()).map(|i| f(spec.midpoint(i))).collect();
        GridFunction { spec, values }
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        let values = vec![c; spec.cell_count()];
        GridFunction { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn sample_nearest(&self, p: &Point) -> Option<f64> {
        self.spec.nearest_cell(p).map(|i| self.values[i])
    }

    /// Midpoint-rule integral over the whole box.
    pub fn integral(&self) -> f64 {
        self.spec.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            spec: self.spec.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        if self.spec != other.spec {
            return Err(Error::Domain("grid functions on different grids".into()));
        }
        Ok(GridFunction {
            spec: self.spec.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// Euclidean ball (disc, or interval in dimension 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn contains(&self, p: &Point, dim: usize) -> bool {
        p.dist(&self.center, dim) <= self.radius * (1.0 + BALL_EPS)
    }

    /// Lebesgue measure of the full ball, ignoring the grid box.
    pub fn measure_unclipped(&self, dim: usize) -> f64 {
        if dim == 1 {
            2.0 * self.radius
        } else {
            std::f64::consts::PI * self.radius * self.radius
        }
    }

    /// Lebesgue measure of the intersection with the grid box (exact).
    pub fn measure_clipped(&self, spec: &GridSpec) -> f64 {
        if spec.dim() == 1 {
            let a = (self.center.x - self.radius).max(spec.lo(0));
            let b = (self.center.x + self.radius).min(spec.hi(0));
            (b - a).max(0.0)
        } else {
            disc_box_area(
                self.center,
                self.radius,
                spec.lo(0),
                spec.hi(0),
                spec.lo(1),
                spec.hi(1),
            )
        }
    }

    /// Per-row index ranges of midpoints inside the ball, clipped to the grid.
    /// Each entry is (iy, ix_min, ix_max) with inclusive bounds. This is the
    /// canonical enumeration: every consumer of ball cells goes through it.
    pub fn rows(&self, spec: &GridSpec) -> Vec<(usize, usize, usize)> {
        let r = self.radius * (1.0 + BALL_EPS);
        let r2 = r * r;
        let hx = spec.h(0);
        let n = spec.cells_per_axis() as i64;
        let row_span = |w: f64| -> Option<(usize, usize)> {
            if w < 0.0 {
                return None;
            }
            let t_min = (self.center.x - w - spec.lo(0)) / hx - 0.5;
            let t_max = (self.center.x + w - spec.lo(0)) / hx - 0.5;
            let mut i0 = (t_min - 1e-6).ceil() as i64;
            let mut i1 = (t_max + 1e-6).floor() as i64;
            i0 = i0.max(0);
            i1 = i1.min(n - 1);
            let inside = |i: i64| -> bool {
                let x = spec.lo(0) + (i as f64 + 0.5) * hx;
                (x - self.center.x).abs() <= w
            };
            while i0 <= i1 && !inside(i0) {
                i0 += 1;
            }
            while i1 >= i0 && !inside(i1) {
                i1 -= 1;
            }
            if i0 > i1 {
                None
            } else {
                Some((i0 as usize, i1 as usize))
            }
        };
        if spec.dim() == 1 {
            return row_span(r)
                .map(|(a, b)| vec![(0usize, a, b)])
                .unwrap_or_default();
        }
        let hy = spec.h(1);
        let ty_min = (self.center.y - r - spec.lo(1)) / hy - 0.5;
        let ty_max = (self.center.y + r - spec.lo(1)) / hy - 0.5;
        let j0 = ((ty_min - 1e-6).ceil() as i64).max(0);
        let j1 = ((ty_max + 1e-6).floor() as i64).min(n - 1);
        let mut out = Vec::new();
        for j in j0..=j1 {
            let y = spec.lo(1) + (j as f64 + 0.5) * hy;
            let dy2 = (y - self.center.y) * (y - self.center.y);
            if dy2 > r2 {
                continue;
            }
            let w = (r2 - dy2).sqrt();
            if let Some((a, b)) = row_span(w) {
                out.push((j as usize, a, b));
            }
        }
        out
    }

    /// Flat indices of all midpoints inside the ball (clipped to the grid).
    pub fn cells(&self, spec: &GridSpec) -> Vec<usize> {
        let mut out = Vec::new();
        for (iy, a, b) in self.rows(spec) {
            for ix in a..=b {
                out.push(spec.index(ix, iy));
            }
        }
        out
    }

    pub fn cell_count(&self, spec: &GridSpec) -> usize {
        self.rows(spec).iter().map(|(_, a, b)| b - a + 1).sum()
    }
}

/// Closed annulus shell { p : s < |p - c| <= 2 s }.
#[derive(Debug, Clone, Copy)]
pub struct Annulus {
    pub center: Point,
    pub inner: f64,
}

impl Annulus {
    pub fn new(center: Point, inner: f64) -> Self {
        Annulus { center, inner }
    }

    pub fn outer(&self) -> f64 {
        2.0 * self.inner
    }

    pub fn contains(&self, p: &Point, dim: usize) -> bool {
        let d = p.dist(&self.center, dim);
        d > self.inner && d <= self.outer() * (1.0 + BALL_EPS)
    }

    /// Flat indices of midpoints in the shell.
    pub fn cells(&self, spec: &GridSpec) -> Vec<usize> {
        let outer = Ball::new(self.center, self.outer());
        outer
            .cells(spec)
            .into_iter()
            .filter(|&i| {
                let d = spec.midpoint(i).dist(&self.center, spec.dim());
                d > self.inner
            })
            .collect()
    }

    /// Enclosing ball B(c, 2s), the normalizing ball for shell averages.
    pub fn enclosing_ball(&self) -> Ball {
        Ball::new(self.center, self.outer())
    }
}

/// Area of the intersection of the disc B(center, r) with the box
/// [x0, x1] x [y0, y1], computed in closed form.
pub fn disc_box_area(center: Point, r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    debug_assert!(r > 0.0);
    let a0 = x0 - center.x;
    let a1 = x1 - center.x;
    let b0 = y0 - center.y;
    let b1 = y1 - center.y;
    let f = |x: f64, y: f64| corner_area(x, y, r);
    (f(a1, b1) - f(a0, b1) - f(a1, b0) + f(a0, b0)).max(0.0)
}

/// Area of { (u, v) : u <= x, v <= y, u^2 + v^2 <= r^2 }.
fn corner_area(x: f64, y: f64, r: f64) -> f64 {
    // Antiderivative of sqrt(r^2 - u^2): S(t) = (t sqrt(r^2-t^2) + r^2 asin(t/r)) / 2.
    let s = |t: f64| -> f64 {
        let t = t.clamp(-r, r);
        0.5 * (t * (r * r - t * t).max(0.0).sqrt() + r * r * (t / r).clamp(-1.0, 1.0).asin())
    };
    let xb = x.clamp(-r, r);
    let yb = y.clamp(-r, r);
    if x <= -r || y <= -r {
        return 0.0;
    }
    let c = (r * r - yb * yb).max(0.0).sqrt();
    if yb >= 0.0 {
        // Rows split at |u| = c where the chord height crosses y.
        let mut area = 0.0;
        let t1 = xb.min(-c);
        area += 2.0 * (s(t1) + s(r));
        if xb > -c {
            let t2 = xb.min(c);
            area += yb * (t2 + c) + s(t2) + s(c);
        }
        if xb > c {
            area += 2.0 * (s(xb) - s(c));
        }
        area
    } else {
        let t2 = xb.min(c);
        if t2 <= -c {
            0.0
        } else {
            yb * (t2 + c) + s(t2) + s(c)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use std::f64::consts::PI;

    #[test]
    fn spec_validation() {
        assert!(GridSpec::new(3, &[0.0], &[1.0], 16).is_err());
        assert!(matches!(
            GridSpec::new(1, &[0.0], &[1.0], 4),
            Err(Error::GridTooCoarse { .. })
        ));
        assert!(GridSpec::new(1, &[1.0], &[0.0], 16).is_err());
        assert!(GridSpec::new(2, &[-1.0, -1.0], &[1.0, 1.0], 16).is_ok());
    }

    #[test]
    fn midpoints_and_volume_1d() {
        let g = GridSpec::new(1, &[0.0], &[1.0], 10).unwrap();
        assert_eq!(g.cell_count(), 10);
        assert!((g.cell_volume() - 0.1).abs() < 1e-15);
        assert!((g.midpoint(0).x - 0.05).abs() < 1e-15);
        assert!((g.midpoint(9).x - 0.95).abs() < 1e-15);
    }

    #[test]
    fn midpoints_2d_indexing() {
        let g = GridSpec::symmetric(2, 1.0, 8).unwrap();
        let idx = g.index(3, 5);
        let (ix, iy) = g.split_index(idx);
        assert_eq!((ix, iy), (3, 5));
        let p = g.midpoint(idx);
        assert!((p.x - (-1.0 + 3.5 * 0.25)).abs() < 1e-15);
        assert!((p.y - (-1.0 + 5.5 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn constant_integral_matches_box_measure() {
        let g = GridSpec::symmetric(2, 2.0, 16).unwrap();
        let f = GridFunction::constant(g, 3.0);
        assert!((f.integral() - 3.0 * 16.0).abs() < 1e-12);
    }

    #[test]
    fn integral_of_linear_function_exact_midpoint() {
        // Midpoint rule is exact for affine integrands.
        let g = GridSpec::new(1, &[0.0], &[2.0], 64).unwrap();
        let f = GridFunction::from_fn(g, |p| 3.0 * p.x + 1.0);
        assert!((f.integral() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn nearest_cell_round_trip() {
        let g = GridSpec::symmetric(2, 1.5, 12).unwrap();
        for i in 0..g.cell_count() {
            let p = g.midpoint(i);
            assert_eq!(g.nearest_cell(&p), Some(i));
        }
        assert_eq!(g.nearest_cell(&Point::new_2d(9.0, 0.0)), None);
        // Boundary points clamp inward.
        assert_eq!(g.nearest_cell(&Point::new_2d(1.5, 1.5)), Some(g.cell_count() - 1));
    }

    #[test]
    fn ball_cells_1d_symmetric() {
        let g = GridSpec::symmetric(1, 1.0, 64).unwrap();
        let b = Ball::new(Point::origin(), 0.5);
        let cells = b.cells(&g);
        // Midpoints in [-0.5, 0.5]: 32 of them, symmetric around 0.
        assert_eq!(cells.len(), 32);
        let sum: f64 = cells.iter().map(|&i| g.midpoint(i).x).sum();
        assert!(sum.abs() < 1e-12);
    }

    #[test]
    fn ball_cell_count_approaches_disc_area() {
        let g = GridSpec::symmetric(2, 2.0, 256).unwrap();
        let b = Ball::new(Point::new_2d(0.3, -0.2), 1.0);
        let approx = b.cell_count(&g) as f64 * g.cell_volume();
        assert!((approx - PI).abs() < 0.01, "approx = {approx}");
    }

    #[test]
    fn ball_rows_match_predicate() {
        let g = GridSpec::symmetric(2, 1.0, 32).unwrap();
        let b = Ball::new(Point::new_2d(0.1, 0.2), 0.6);
        let from_rows: std::collections::BTreeSet<usize> = b.cells(&g).into_iter().collect();
        let brute: std::collections::BTreeSet<usize> = (0..g.cell_count())
            .filter(|&i| b.contains(&g.midpoint(i), 2))
            .collect();
        assert_eq!(from_rows, brute);
    }

    #[test]
    fn singleton_ball_contains_own_midpoint() {
        let g = GridSpec::symmetric(2, 1.0, 16).unwrap();
        for i in 0..g.cell_count() {
            let b = Ball::new(g.midpoint(i), g.h(0) / 2.0);
            let cells = b.cells(&g);
            assert_eq!(cells, vec![i]);
        }
    }

    #[test]
    fn clipped_measure_1d() {
        let g = GridSpec::new(1, &[0.0], &[1.0], 16).unwrap();
        let b = Ball::new(Point::new_1d(0.1), 0.5);
        assert!((b.measure_clipped(&g) - 0.6).abs() < 1e-15);
        assert!((b.measure_unclipped(1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn disc_area_exact_cases() {
        let c = Point::origin();
        let full = disc_box_area(c, 1.0, -2.0, 2.0, -2.0, 2.0);
        assert!((full - PI).abs() < 1e-12);
        let half = disc_box_area(c, 1.0, 0.0, 2.0, -2.0, 2.0);
        assert!((half - PI / 2.0).abs() < 1e-12);
        let quarter = disc_box_area(c, 1.0, 0.0, 2.0, 0.0, 2.0);
        assert!((quarter - PI / 4.0).abs() < 1e-12);
        let empty = disc_box_area(c, 1.0, 3.0, 4.0, 0.0, 1.0);
        assert!(empty.abs() < 1e-12);
        // Box fully inside the disc: area is the box.
        let boxed = disc_box_area(c, 10.0, -1.0, 1.0, -1.0, 1.0);
        assert!((boxed - 4.0).abs() < 1e-10);
    }

    #[test]
    fn disc_area_monte_carlo() {
        let mut rng = Rng::new(12345);
        for case in 0..6 {
            let cx = -0.5 + 0.3 * case as f64;
            let center = Point::new_2d(cx, 0.2 * case as f64 - 0.4);
            let r = 0.4 + 0.25 * case as f64;
            let (x0, x1, y0, y1) = (-1.0, 1.3, -0.8, 1.1);
            let exact = disc_box_area(center, r, x0, x1, y0, y1);
            let trials = 400_000;
            let mut hits = 0u64;
            for _ in 0..trials {
                let p = Point::new_2d(rng.range(x0, x1), rng.range(y0, y1));
                if p.dist(&center, 2) <= r {
                    hits += 1;
                }
            }
            let mc = hits as f64 / trials as f64 * (x1 - x0) * (y1 - y0);
            assert!(
                (mc - exact).abs() < 0.02,
                "case {case}: mc = {mc}, exact = {exact}"
            );
        }
    }

    #[test]
    fn annulus_membership_and_cells() {
        let g = GridSpec::symmetric(1, 4.0, 512).unwrap();
        let a = Annulus::new(Point::origin(), 1.0);
        assert!(!a.contains(&Point::new_1d(0.5), 1));
        assert!(a.contains(&Point::new_1d(1.5), 1));
        assert!(a.contains(&Point::new_1d(2.0), 1));
        assert!(!a.contains(&Point::new_1d(2.5), 1));
        // Shell edges fall on cell boundaries, so the cell count is exact.
        assert_eq!(a.cells(&g).len(), 128);
    }

    #[test]
    fn refined_grid_shares_box() {
        let g = GridSpec::symmetric(2, 1.0, 16).unwrap();
        let r = g.refined(2).unwrap();
        assert_eq!(r.cells_per_axis(), 32);
        assert!((r.box_measure() - g.box_measure()).abs() < 1e-15);
    }
}
