use crate::error::{Error, Result};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::f64::consts::E;

/// Relative tolerance for inverse and complementary computations.
pub const YOUNG_TOL: f64 = 1e-9;

/// Margin on the integrand tail slope below -1 required to certify a growth
/// integral as convergent.
pub const BP_SLOPE_MARGIN: f64 = 0.05;

const BISECT_MAX: usize = 200;
const DIVERGENCE_CAP: f64 = 1e12;

/// Young-function kinds. All are convex, nondecreasing, vanish at 0 and grow
/// without bound, except the essential-supremum sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YoungKind {
    /// t
    Linear,
    /// t^r, r > 1
    Power { r: f64 },
    /// t^r log(e+t)^beta, r >= 1, beta > 0
    PowerLog { r: f64, beta: f64 },
    /// e^t - 1
    ExpMinusOne,
    /// Sentinel for L-infinity norms; never evaluated pointwise. Its inverse
    /// is taken to be identically 1 so that product compatibility conditions
    /// degenerate to the remaining factors.
    LinfMarker,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoungFunction {
    kind: YoungKind,
    t0: f64,
}

impl YoungFunction {
    pub fn linear() -> Self {
        YoungFunction {
            kind: YoungKind::Linear,
            t0: 1.0,
        }
    }

    pub fn power(r: f64) -> Result<Self> {
        if !(r > 1.0) || !r.is_finite() {
            return Err(Error::Domain(format!("power exponent must be > 1, got {r}")));
        }
        Ok(YoungFunction {
            kind: YoungKind::Power { r },
            t0: 1.0,
        })
    }

    pub fn power_log(r: f64, beta: f64) -> Result<Self> {
        if !(r >= 1.0) || !r.is_finite() {
            return Err(Error::Domain(format!("power-log exponent must be >= 1, got {r}")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!("power-log beta must be > 0, got {beta}")));
        }
        Ok(YoungFunction {
            kind: YoungKind::PowerLog { r, beta },
            t0: 1.0,
        })
    }

    pub fn exp_minus_one() -> Self {
        YoungFunction {
            kind: YoungKind::ExpMinusOne,
            t0: 1.0,
        }
    }

    pub fn linf_marker() -> Self {
        YoungFunction {
            kind: YoungKind::LinfMarker,
            t0: 1.0,
        }
    }

    /// t log(e+t)^k, the weak-type endpoint family; k = 0 gives t itself.
    pub fn phi_k(k: u32) -> Self {
        if k == 0 {
            YoungFunction::linear()
        } else {
            YoungFunction::power_log(1.0, k as f64).expect("valid parameters")
        }
    }

    pub fn with_t0(mut self, t0: f64) -> Result<Self> {
        if !(t0 >= 0.0) || !t0.is_finite() {
            return Err(Error::Domain(format!("t0 must be >= 0, got {t0}")));
        }
        self.t0 = t0;
        Ok(self)
    }

    pub fn kind(&self) -> YoungKind {
        self.kind
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn is_linf(&self) -> bool {
        matches!(self.kind, YoungKind::LinfMarker)
    }

    fn raw_eval(&self, t: f64) -> f64 {
        match self.kind {
            YoungKind::Linear => t,
            YoungKind::Power { r } => t.powf(r),
            YoungKind::PowerLog { r, beta } => {
                if t == 0.0 {
                    0.0
                } else {
                    t.powf(r) * (E + t).ln().powf(beta)
                }
            }
            YoungKind::ExpMinusOne => t.exp_m1(),
            YoungKind::LinfMarker => f64::NAN,
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if self.is_linf() {
            return Err(Error::Domain(
                "essential-supremum sentinel is not pointwise-evaluable".into(),
            ));
        }
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("Young functions take t >= 0, got {t}")));
        }
        Ok(self.raw_eval(t))
    }

    /// Generalized inverse: t with eval(t) = s, by closed form where
    /// available and by bracketing bisection otherwise. The sentinel kind
    /// returns 1 by convention (see LinfMarker).
    pub fn inverse(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("inverse takes s >= 0, got {s}")));
        }
        match self.kind {
            YoungKind::LinfMarker => Ok(1.0),
            YoungKind::Linear => Ok(s),
            YoungKind::Power { r } => Ok(s.powf(1.0 / r)),
            YoungKind::ExpMinusOne => Ok(s.ln_1p()),
            YoungKind::PowerLog { r, beta } => {
                if s == 0.0 {
                    return Ok(0.0);
                }
                // log(e+t) >= 1 gives eval(t) >= t^r, so s^(1/r) brackets
                // from above; shrinking by the log factor brackets from below.
                let hi = s.powf(1.0 / r);
                let lo = hi / (E + hi).ln().powf(beta / r).max(1.0);
                let mut a = lo;
                let mut b = hi;
                for _ in 0..BISECT_MAX {
                    let mid = 0.5 * (a + b);
                    if self.raw_eval(mid) < s {
                        a = mid;
                    } else {
                        b = mid;
                    }
                    if (b - a) <= YOUNG_TOL * b.max(1e-300) {
                        break;
                    }
                }
                Ok(0.5 * (a + b))
            }
        }
    }
}

impl Serialize for YoungFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let (kind, params) = match self.kind {
            YoungKind::Linear => ("linear", vec![]),
            YoungKind::Power { r } => ("power", vec![r]),
            YoungKind::PowerLog { r, beta } => ("power-log", vec![r, beta]),
            YoungKind::ExpMinusOne => ("exp-minus-one", vec![]),
            YoungKind::LinfMarker => ("linf", vec![]),
        };
        let repr = YoungRepr {
            kind: kind.to_string(),
            params,
            t0: if self.t0 == 1.0 { None } else { Some(self.t0) },
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for YoungFunction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = YoungRepr::deserialize(deserializer)?;
        let need = |n: usize| -> std::result::Result<(), D::Error> {
            if repr.params.len() == n {
                Ok(())
            } else {
                Err(D::Error::custom(format!(
                    "kind {:?} takes {} parameter(s), got {}",
                    repr.kind,
                    n,
                    repr.params.len()
                )))
            }
        };
        let base = match repr.kind.as_str() {
            "linear" => {
                need(0)?;
                YoungFunction::linear()
            }
            "power" => {
                need(1)?;
                YoungFunction::power(repr.params[0]).map_err(D::Error::custom)?
            }
            "power-log" => {
                need(2)?;
                YoungFunction::power_log(repr.params[0], repr.params[1]).map_err(D::Error::custom)?
            }
            "exp-minus-one" => {
                need(0)?;
                YoungFunction::exp_minus_one()
            }
            "linf" => {
                need(0)?;
                YoungFunction::linf_marker()
            }
            other => return Err(D::Error::custom(format!("unknown Young kind {other:?}"))),
        };
        match repr.t0 {
            Some(t0) => base.with_t0(t0).map_err(D::Error::custom),
            None => Ok(base),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct YoungRepr {
    kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t0: Option<f64>,
}

/// sup_t (s t - psi(t)) for one s; None when the supremum diverges.
fn conjugate_at(psi: &YoungFunction, s: f64) -> Option<f64> {
    if s <= 0.0 {
        return Some(0.0);
    }
    let g = |t: f64| s * t - psi.raw_eval(t);
    let mut t_hi = 1.0;
    let mut last = g(t_hi);
    loop {
        let next = g(2.0 * t_hi);
        if next > last {
            t_hi *= 2.0;
            last = next;
            if t_hi > DIVERGENCE_CAP {
                return None;
            }
        } else {
            break;
        }
    }
    // Golden-section maximization of the concave objective on [0, 2 t_hi].
    let inv_phi = 0.618_033_988_749_894_9;
    let mut a = 0.0;
    let mut b = 2.0 * t_hi;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    for _ in 0..90 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = g(x1);
        }
    }
    Some(f1.max(f2).max(0.0))
}

/// Tabulated Legendre-type transform of a Young function.
#[derive(Debug, Clone)]
pub struct ComplementaryFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
    s_max: f64,
    degenerate_at: Option<f64>,
}

impl ComplementaryFunction {
    pub fn degenerate_at(&self) -> Option<f64> {
        self.degenerate_at
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    /// Interpolated transform value; +infinity past the degeneracy point.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("complementary takes s >= 0, got {s}")));
        }
        if let Some(d) = self.degenerate_at {
            if s > d {
                return Ok(f64::INFINITY);
            }
        }
        let last = *self.nodes.last().expect("non-empty table");
        if s > last * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "s = {s} beyond tabulated range [0, {last}]"
            )));
        }
        let s = s.min(last);
        let idx = match self.nodes.binary_search_by(|n| n.partial_cmp(&s).unwrap()) {
            Ok(i) => return Ok(self.values[i]),
            Err(i) => i,
        };
        // Local quadratic interpolation: exact for parabolic transforms and
        // one order better than chords elsewhere.
        let j = idx.clamp(1, self.nodes.len() - 2);
        let (s0, s1, s2) = (self.nodes[j - 1], self.nodes[j], self.nodes[j + 1]);
        let (v0, v1, v2) = (self.values[j - 1], self.values[j], self.values[j + 1]);
        let l0 = (s - s1) * (s - s2) / ((s0 - s1) * (s0 - s2));
        let l1 = (s - s0) * (s - s2) / ((s1 - s0) * (s1 - s2));
        let l2 = (s - s0) * (s - s1) / ((s2 - s0) * (s2 - s1));
        Ok((v0 * l0 + v1 * l1 + v2 * l2).max(0.0))
    }

    /// Smallest s with eval(s) >= y, by table inversion. Past the table a
    /// degenerate transform jumps to +infinity, so the degeneracy point is
    /// returned there.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::Domain(format!("inverse takes y >= 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let vmax = *self.values.last().unwrap();
        if vmax < y {
            return match self.degenerate_at {
                Some(d) => Ok(d),
                None => Err(Error::Domain(format!(
                    "y = {y} beyond tabulated transform range (max {vmax})"
                ))),
            };
        }
        let mut i = self.values.partition_point(|&v| v < y);
        i = i.max(1);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        let (s0, s1) = (self.nodes[i - 1], self.nodes[i]);
        if v1 <= v0 {
            return Ok(s1);
        }
        Ok(s0 + (s1 - s0) * (y - v0) / (v1 - v0))
    }

    /// Discrete Young-function shape checks on the table itself.
    pub fn is_young_shape(&self, tol: f64) -> bool {
        if self.values[0].abs() > tol {
            return false;
        }
        let monotone = self.values.windows(2).all(|w| w[1] >= w[0] - tol);
        let convex = self
            .values
            .windows(3)
            .all(|w| w[2] - 2.0 * w[1] + w[0] >= -tol * w[2].abs().max(1.0));
        monotone && convex
    }
}

/// Tabulate sup_t (s t - psi(t)) on [0, s_max].
pub fn complementary(psi: &YoungFunction, s_max: f64) -> Result<ComplementaryFunction> {
    if psi.is_linf() {
        return Err(Error::Domain(
            "complementary of the essential-supremum sentinel is not tabulated".into(),
        ));
    }
    if !(s_max > 0.0) || !s_max.is_finite() {
        return Err(Error::Domain(format!("s_max must be positive, got {s_max}")));
    }
    const NODES: usize = 513;
    let mut nodes = Vec::with_capacity(NODES);
    let mut values = Vec::with_capacity(NODES);
    let mut degenerate_at = None;
    for i in 0..NODES {
        let s = s_max * i as f64 / (NODES - 1) as f64;
        match conjugate_at(psi, s) {
            Some(v) => {
                let v = match values.last() {
                    Some(&prev) => v.max(prev),
                    None => v,
                };
                nodes.push(s);
                values.push(v);
            }
            None => {
                degenerate_at = Some(nodes.last().copied().unwrap_or(0.0));
                break;
            }
        }
    }
    if nodes.len() < 2 {
        return Err(Error::DegenerateComplementary);
    }
    Ok(ComplementaryFunction {
        nodes,
        values,
        s_max,
        degenerate_at,
    })
}

/// Smallest s with sup_t (s t - psi(t)) >= y, computed directly (no table),
/// treating a divergent supremum as +infinity. This is the canonical way the
/// complementary inverse enters product compatibility conditions.
pub fn complementary_inverse(psi: &YoungFunction, y: f64) -> Result<f64> {
    if psi.is_linf() {
        return Err(Error::Domain(
            "complementary inverse of the essential-supremum sentinel is undefined".into(),
        ));
    }
    if !(y >= 0.0) {
        return Err(Error::Domain(format!("inverse takes y >= 0, got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let reaches = |s: f64| -> bool {
        match conjugate_at(psi, s) {
            None => true,
            Some(v) => v >= y,
        }
    };
    let mut hi = 1.0;
    let mut doublings = 0;
    while !reaches(hi) {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::NormOverflow(
                "complementary transform never reaches the requested level".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if reaches(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// sup over a logarithmic t-grid of
///   prod_i psis[i]^{-1}(t) * prod_j (complementary inverse of extra[j])(t)
///   * phi^{-1}(t) / t.
/// A finite value certifies the product compatibility hypothesis on the
/// sampled range. `extra` carries the functions that enter through their
/// complementary inverses (the commutator slot); it may be empty, which gives
/// the plain Hoelder-product form.
pub fn compatibility_constant(
    psis: &[YoungFunction],
    extra: &[YoungFunction],
    phi: &YoungFunction,
    t_range: (f64, f64),
) -> Result<f64> {
    if psis.is_empty() && extra.is_empty() {
        return Err(Error::Domain("empty compatibility product".into()));
    }
    let (t_lo, t_hi) = t_range;
    if !(t_lo > 0.0) || !(t_hi > t_lo) {
        return Err(Error::Domain(format!("invalid t range [{t_lo}, {t_hi}]")));
    }
    let floor = psis
        .iter()
        .chain(extra.iter())
        .chain(std::iter::once(phi))
        .map(|p| p.t0())
        .fold(0.0, f64::max);
    if t_lo < floor * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "t range starts at {t_lo}, below the largest threshold t0 = {floor}"
        )));
    }
    const SAMPLES: usize = 160;
    let mut sup = 0.0f64;
    for i in 0..SAMPLES {
        let t = t_lo * (t_hi / t_lo).powf(i as f64 / (SAMPLES - 1) as f64);
        let mut prod = phi.inverse(t)?;
        for psi in psis {
            prod *= psi.inverse(t)?;
        }
        for e in extra {
            prod *= complementary_inverse(e, t)?;
        }
        sup = sup.max(prod / t);
    }
    Ok(sup)
}

/// Report from a truncated growth-integral certification.
#[derive(Debug, Clone, Copy)]
pub struct BpReport {
    pub value: f64,
    pub tail_slope: f64,
    pub certified: bool,
}

/// Shared truncated-integral engine: integrates eval(t)^exponent * t^(-q)
/// over [1, t_max] in log coordinates and measures the tail slope of the
/// integrand over the last half-decade.
fn bp_core(eval: &dyn Fn(f64) -> f64, exponent: f64, q: f64, t_max: f64) -> BpReport {
    if t_max <= 1.0 {
        return BpReport {
            value: 0.0,
            tail_slope: 0.0,
            certified: false,
        };
    }
    let integrand = |t: f64| eval(t).powf(exponent) * t.powf(-q);
    const NODES: usize = 4096;
    let u_max = t_max.ln();
    let du = u_max / NODES as f64;
    let mut acc = 0.0;
    for i in 0..NODES {
        let u = (i as f64 + 0.5) * du;
        let t = u.exp();
        acc += integrand(t) * t * du;
    }
    let t_hi = t_max;
    let t_lo = t_max / 10.0f64.sqrt().min(t_max.sqrt());
    let g_hi = integrand(t_hi);
    let g_lo = integrand(t_lo);
    let tail_slope = if !g_hi.is_finite() || !g_lo.is_finite() {
        f64::INFINITY
    } else if g_hi > 0.0 && g_lo > 0.0 {
        (g_hi.ln() - g_lo.ln()) / (t_hi.ln() - t_lo.ln())
    } else {
        f64::NEG_INFINITY
    };
    BpReport {
        value: acc,
        tail_slope,
        certified: acc.is_finite() && tail_slope < -(1.0 + BP_SLOPE_MARGIN),
    }
}

/// Truncated growth integral int_1^T phi(t)^(q/p) t^(-q) dt with
/// 1/q = 1/p - alpha/n, plus its tail slope; slope < -(1 + margin) certifies
/// the fractional-maximal growth condition heuristically.
pub fn bp_alpha_integral(
    phi: &YoungFunction,
    p: f64,
    alpha: f64,
    n: usize,
    t_max: f64,
) -> Result<BpReport> {
    if phi.is_linf() {
        return Err(Error::Domain(
            "growth integral of the essential-supremum sentinel is undefined".into(),
        ));
    }
    if !(p > 1.0) {
        return Err(Error::Domain(format!("need p > 1, got {p}")));
    }
    let nf = n as f64;
    if !(0.0..nf).contains(&alpha) {
        return Err(Error::Domain(format!("need 0 <= alpha < n, got {alpha}")));
    }
    if alpha > 0.0 && p >= nf / alpha {
        return Err(Error::Domain(format!("need p < n/alpha = {}, got {p}", nf / alpha)));
    }
    if !(t_max >= 1.0) {
        return Err(Error::Domain(format!("need T >= 1, got {t_max}")));
    }
    let q = 1.0 / (1.0 / p - alpha / nf);
    Ok(bp_core(&|t| phi.raw_eval(t), q / p, q, t_max))
}

/// Certification report for the two-part maximal-boundedness hypothesis.
#[derive(Debug, Clone, Copy)]
pub struct MaximalHypothesisReport {
    pub pass: bool,
    /// Worst (largest) integrand tail slope among the sampled growth classes.
    pub worst_b_slope: f64,
    /// sup over t of phi^{-1}(t) t^{alpha/n} / eta^{-1}(t).
    pub growth_sup: f64,
    /// Log-log slope of that ratio over the last decade; <= small means the
    /// comparison holds asymptotically, not just on the sampled range.
    pub growth_slope: f64,
}

/// Two-part hypothesis under which the Orlicz fractional maximal operator is
/// bounded: every sampled class above the threshold certifies the growth
/// integral of the shifted power of eta, and phi^{-1}(t) t^{alpha/n} is
/// dominated by eta^{-1}(t) on the sampled range.
pub fn maximal_boundedness_hypothesis(
    eta: &YoungFunction,
    phi: &YoungFunction,
    beta: f64,
    p: f64,
    alpha: f64,
    n: usize,
) -> Result<MaximalHypothesisReport> {
    if eta.is_linf() || phi.is_linf() {
        return Err(Error::Domain("sentinel kinds have no growth hypothesis".into()));
    }
    let nf = n as f64;
    if !(1.0 <= beta && beta < p) {
        return Err(Error::Domain(format!("need 1 <= beta < p, got beta = {beta}, p = {p}")));
    }
    if alpha < 0.0 || alpha >= nf {
        return Err(Error::Domain(format!("need 0 <= alpha < n, got {alpha}")));
    }
    if alpha > 0.0 && p >= nf / alpha {
        return Err(Error::Domain(format!("need p < n/alpha = {}", nf / alpha)));
    }
    if nf - alpha * beta <= 0.0 {
        return Err(Error::Domain(format!(
            "threshold undefined: n - alpha*beta = {}",
            nf - alpha * beta
        )));
    }
    let rho_floor = beta * (nf - alpha) / (nf - alpha * beta);
    let mut worst_slope = f64::NEG_INFINITY;
    let mut all_certified = true;
    for mult in [1.05, 1.5, 2.5, 5.0] {
        let rho = rho_floor * mult;
        let shift = 1.0 + rho * alpha / (nf - alpha);
        let class_p = rho * nf / (nf - alpha);
        let report = bp_core(&|t| eta.raw_eval(t).powf(shift), 1.0, class_p, 1e6);
        worst_slope = worst_slope.max(report.tail_slope);
        all_certified = all_certified && report.certified;
    }
    let t_lo = eta.t0().max(phi.t0()).max(1.0);
    let t_hi = 1e6;
    const SAMPLES: usize = 120;
    let ratio_at = |t: f64| -> Result<f64> {
        let denom = eta.inverse(t)?;
        Ok(if denom > 0.0 {
            phi.inverse(t)? * t.powf(alpha / nf) / denom
        } else {
            f64::INFINITY
        })
    };
    let mut growth_sup = 0.0f64;
    for i in 0..SAMPLES {
        let t = t_lo * (t_hi / t_lo).powf(i as f64 / (SAMPLES - 1) as f64);
        growth_sup = growth_sup.max(ratio_at(t)?);
    }
    let growth_slope = (ratio_at(t_hi)?.ln() - ratio_at(t_hi / 10.0)?.ln()) / 10.0f64.ln();
    let pass = all_certified && growth_sup < 1e10 && growth_slope < BP_SLOPE_MARGIN;
    Ok(MaximalHypothesisReport {
        pass,
        worst_b_slope: worst_slope,
        growth_sup,
        growth_slope,
    })
}
