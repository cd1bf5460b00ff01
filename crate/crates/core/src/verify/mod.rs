pub mod family;
pub mod report;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::matrix::SquareMatrix;
use crate::maximal::{
    delta_sharp, eps_maximal, orlicz_maximal, BallFamily, PrecomputedMaximal,
};
use crate::operators::{apply_to_field, commutator_field, CommutatorSpec, OperatorSpec};
use crate::weights::{
    a_infinity_constant, apq_constant, matrix_compat_constant, weighted_bmo_norm,
    weighted_lp_norm, BmoFunction, Weight,
};
use crate::young::{bp_alpha_integral, compatibility_constant, YoungFunction};
use family::TestFamily;
use report::SingleRun;
use std::collections::BTreeMap;

const FLOAT_GUARD: f64 = 1e50;
const RHS_FLOOR: f64 = 1e-300;
const LHS_NOISE: f64 = 1e-12;

fn plain_lp_norm(f: &GridFunction, p: f64) -> f64 {
    let h = f.spec().cell_volume();
    let sum: f64 = f.values().iter().map(|v| v.abs().powf(p)).sum();
    (h * sum).powf(1.0 / p)
}

/// h^d Σ_x g(x) w(Ax), restricted to the cells A maps back into the box.
fn composed_weight_integral(g: &GridFunction, w: &Weight, a: &SquareMatrix) -> f64 {
    let spec = g.spec();
    let h = spec.cell_volume();
    let mut acc = 0.0;
    for (idx, x) in spec.points().enumerate() {
        if let Some(c) = spec.nearest_cell(&a.apply(x)) {
            acc += g.value(idx) * w.value(c);
        }
    }
    h * acc
}

enum RatioOutcome {
    Value(f64),
    Skip(String),
}

fn ratio_outcome(lhs: f64, rhs: f64) -> RatioOutcome {
    if !lhs.is_finite() || lhs > FLOAT_GUARD {
        return RatioOutcome::Skip("left-hand side beyond the float guard".into());
    }
    if rhs <= RHS_FLOOR {
        if lhs <= LHS_NOISE {
            RatioOutcome::Value(0.0)
        } else {
            RatioOutcome::Skip(format!(
                "right-hand side vanished with left-hand side {lhs:.3e}"
            ))
        }
    } else {
        RatioOutcome::Value(lhs / rhs)
    }
}

fn factor_young_functions(spec: &OperatorSpec) -> Vec<YoungFunction> {
    spec.kernel()
        .factors()
        .iter()
        .map(|f| f.psi().clone())
        .collect()
}

fn check_same_grid(fam: &TestFamily, others: &[&crate::grid::GridSpec]) -> Result<()> {
    for s in others {
        if *s != fam.spec() {
            return Err(Error::Config(
                "scenario inputs live on different grids".into(),
            ));
        }
    }
    Ok(())
}

/// Weighted Coifman-type inequality for the k-order commutator: compares
/// ∫|T^k_b f|^p w against ‖b‖^{kp} Σ_i ∫ (M_{α,φ} f)^p w(A_i x) dx.
pub fn coifman_check(
    cspec: &CommutatorSpec,
    phi: &YoungFunction,
    p: f64,
    w: &Weight,
    fam: &TestFamily,
) -> Result<SingleRun> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("need p >= 1, got {p}")));
    }
    check_same_grid(fam, &[w.spec(), cspec.symbol().field().spec()])?;
    let spec = fam.spec();
    let balls = BallFamily::all_centered(spec);
    let kernel = cspec.base().kernel();
    let alpha = kernel.alpha_total();
    let order = cspec.order();
    let bnorm = cspec.symbol().norm();

    let mut certs = BTreeMap::new();
    let a_inf = a_infinity_constant(w, &balls)?;
    certs.insert("a_infinity".to_string(), a_inf);
    if !a_inf.is_finite() {
        return Ok(SingleRun::gated(
            "weight has no finite A_infinity certificate at grid scale".into(),
            certs,
        ));
    }
    let psis = factor_young_functions(cspec.base());
    let extras = [YoungFunction::phi_k(order)];
    let t_lo = psis
        .iter()
        .chain(extras.iter())
        .chain(std::iter::once(phi))
        .map(|y| y.t0())
        .fold(1.0f64, f64::max);
    let compat = match compatibility_constant(&psis, &extras, phi, (t_lo, t_lo * 1e6)) {
        Ok(c) => c,
        Err(e) => {
            return Ok(SingleRun::gated(
                format!("compatibility constant unavailable: {e}"),
                certs,
            ))
        }
    };
    certs.insert("compatibility".to_string(), compat);
    if !compat.is_finite() {
        return Ok(SingleRun::gated(
            "compatibility constant diverges on the probe range".into(),
            certs,
        ));
    }
    if alpha == 0.0 {
        let mut probe = 0.0f64;
        for case in fam.cases() {
            let denom = plain_lp_norm(&case.f, 2.0);
            if denom == 0.0 {
                continue;
            }
            let tf = apply_to_field(cspec.base(), &case.f)?;
            probe = probe.max(plain_lp_norm(&tf, 2.0) / denom);
        }
        certs.insert("strong_22_probe".to_string(), probe);
        if !probe.is_finite() {
            return Ok(SingleRun::gated(
                "strong (2,2) probe of the base operator diverged".into(),
                certs,
            ));
        }
    }
    let mats = kernel.matrices();
    let mut compat_sum = Some(0.0f64);
    for i in 0..mats.len() {
        match matrix_compat_constant(w, mats.matrix(i)) {
            Ok(rep) if rep.sup.is_finite() => {
                certs.insert(format!("matrix_compat_{i}"), rep.sup);
                certs.insert(format!("matrix_coverage_{i}"), rep.coverage);
                compat_sum = compat_sum.map(|s| s + rep.sup);
            }
            _ => compat_sum = None,
        }
    }

    let mut run = SingleRun {
        certificates: certs,
        ..SingleRun::default()
    };
    let mut simplified_sup = 0.0f64;
    for case in fam.cases() {
        let tf = commutator_field(cspec, &case.f)?;
        let lhs = weighted_lp_norm(&tf, w, p)?.powf(p);
        let mp = orlicz_maximal(&case.f, &balls, alpha, phi)?.map(|v| v.powf(p));
        let mut rhs = 0.0;
        for i in 0..mats.len() {
            rhs += composed_weight_integral(&mp, w, mats.matrix(i));
        }
        rhs *= bnorm.powf(order as f64 * p);
        match ratio_outcome(lhs, rhs) {
            RatioOutcome::Value(r) => run.push_ratio(case.id.clone(), r),
            RatioOutcome::Skip(reason) => run.push_skip(case.id.clone(), reason),
        }
        if let Some(cs) = compat_sum {
            let plain = composed_weight_integral(&mp, w, &SquareMatrix::identity(spec.dim()));
            let rhs_simple = bnorm.powf(order as f64 * p) * cs * plain;
            if let RatioOutcome::Value(r) = ratio_outcome(lhs, rhs_simple) {
                simplified_sup = simplified_sup.max(r);
            }
        }
    }
    if compat_sum.is_some() {
        run.certificates
            .insert("simplified_ratio_sup".to_string(), simplified_sup);
    }
    Ok(run)
}

/// The order-zero wiring of the same inequality; shares the coifman code
/// path exactly.
pub fn theorem24_check(
    base: &OperatorSpec,
    phi: &YoungFunction,
    p: f64,
    w: &Weight,
    fam: &TestFamily,
) -> Result<SingleRun> {
    let spec = fam.spec();
    let balls = BallFamily::all_centered(spec);
    let b = BmoFunction::new(GridFunction::constant(spec.clone(), 0.0), &balls)?;
    coifman_check(&CommutatorSpec::new(base.clone(), b, 0), phi, p, w, fam)
}

/// Pointwise sharp-function bound: per grid point compares
/// M^#_δ(T^k_b f) against Σ_{l<k} ‖b‖^{k−l} M_ε(T^l_b f) + ‖b‖^k Σ_i (M_{α,φ} f)(A_i^{-1} x).
pub fn pointwise_sharp_check(
    cspec: &CommutatorSpec,
    phi: &YoungFunction,
    delta: f64,
    eps: f64,
    fam: &TestFamily,
) -> Result<SingleRun> {
    if !(delta > 0.0 && delta < eps && eps <= 1.0) {
        return Err(Error::Domain(format!(
            "need 0 < delta < eps <= 1, got delta = {delta}, eps = {eps}"
        )));
    }
    check_same_grid(fam, &[cspec.symbol().field().spec()])?;
    let spec = fam.spec();
    let balls = BallFamily::all_centered(spec);
    let kernel = cspec.base().kernel();
    let alpha = kernel.alpha_total();
    let order = cspec.order();
    let bnorm = cspec.symbol().norm();
    let mats = kernel.matrices();

    let mut run = SingleRun::default();
    let mut inconsistent = 0u64;
    for case in fam.cases() {
        let tk = commutator_field(cspec, &case.f)?;
        let lhs_field = delta_sharp(&tk, &balls, delta)?;
        let mut lower = Vec::new();
        for l in 0..order {
            let tl = commutator_field(
                &CommutatorSpec::new(cspec.base().clone(), cspec.symbol().clone(), l),
                &case.f,
            )?;
            lower.push(eps_maximal(&tl, &balls, eps)?);
        }
        let mphi = PrecomputedMaximal::new(&case.f, &balls, alpha, phi)?;
        let mut case_sup = 0.0f64;
        let mut guarded = false;
        for (idx, x) in spec.points().enumerate() {
            let mut rhs = 0.0;
            for (l, field) in lower.iter().enumerate() {
                rhs += bnorm.powf((order - l as u32) as f64) * field.value(idx);
            }
            let mut msum = 0.0;
            for i in 0..mats.len() {
                msum += mphi.at(&mats.inverse(i).apply(x));
            }
            rhs += bnorm.powf(order as f64) * msum;
            let lhs = lhs_field.value(idx);
            if !lhs.is_finite() || lhs > FLOAT_GUARD {
                guarded = true;
                continue;
            }
            if rhs <= RHS_FLOOR {
                if lhs > LHS_NOISE {
                    inconsistent += 1;
                }
                continue;
            }
            case_sup = case_sup.max(lhs / rhs);
        }
        if guarded {
            run.push_skip(case.id.clone(), "left-hand side beyond the float guard".into());
        } else {
            run.push_ratio(case.id.clone(), case_sup);
        }
    }
    run.certificates
        .insert("inconsistent_points".to_string(), inconsistent as f64);
    Ok(run)
}

/// Weighted strong-type (p, q) estimate for the commutator:
/// ‖T^k_b f‖_{L^q(w^q)} ≤ c ‖b‖^k ‖f‖_{L^p(w^p)}.
pub fn strong_type_check(
    cspec: &CommutatorSpec,
    p: f64,
    q: f64,
    w: &Weight,
    fam: &TestFamily,
) -> Result<SingleRun> {
    check_same_grid(fam, &[w.spec(), cspec.symbol().field().spec()])?;
    let spec = fam.spec();
    let kernel = cspec.base().kernel();
    let alpha = kernel.alpha_total();
    let n = spec.dim() as f64;
    if !(p > 1.0) {
        return Err(Error::Domain(format!("need p > 1, got {p}")));
    }
    if alpha > 0.0 && p >= n / alpha {
        return Err(Error::Domain(format!(
            "need p < n/alpha = {}, got {p}",
            n / alpha
        )));
    }
    if !q.is_finite() {
        return Err(Error::Config("q must be finite".into()));
    }
    let q_expected = 1.0 / (1.0 / p - alpha / n);
    if (q - q_expected).abs() > 1e-9 * q_expected {
        return Err(Error::Config(format!(
            "q = {q} inconsistent with 1/q = 1/p - alpha/n = 1/{q_expected}"
        )));
    }
    let balls = BallFamily::all_centered(spec);
    let mut certs = BTreeMap::new();
    let apq = apq_constant(w, p, q, &balls)?;
    certs.insert("a_pq".to_string(), apq);
    if !apq.is_finite() {
        return Ok(SingleRun::gated(
            "weight has no finite A_{p,q} certificate at grid scale".into(),
            certs,
        ));
    }
    let mats = kernel.matrices();
    for i in 0..mats.len() {
        let rep = match matrix_compat_constant(w, mats.matrix(i)) {
            Ok(rep) if rep.sup.is_finite() => rep,
            _ => {
                return Ok(SingleRun::gated(
                    format!("weight compatibility with matrix {i} not certified"),
                    certs,
                ))
            }
        };
        certs.insert(format!("matrix_compat_{i}"), rep.sup);
        certs.insert(format!("matrix_coverage_{i}"), rep.coverage);
    }

    let order = cspec.order();
    let bnorm = cspec.symbol().norm();
    let wq = w.pow(q);
    let wp = w.pow(p);
    let mut run = SingleRun {
        certificates: certs,
        ..SingleRun::default()
    };
    for case in fam.cases() {
        let tf = commutator_field(cspec, &case.f)?;
        let lhs = weighted_lp_norm(&tf, &wq, q)?;
        let rhs = bnorm.powf(order as f64) * weighted_lp_norm(&case.f, &wp, p)?;
        match ratio_outcome(lhs, rhs) {
            RatioOutcome::Value(r) => run.push_ratio(case.id.clone(), r),
            RatioOutcome::Skip(reason) => run.push_skip(case.id.clone(), reason),
        }
    }
    Ok(run)
}

/// Weighted-BMO estimate: sup_x w·M^#(T^k_b f) ≤ c ‖b‖^k ‖f w‖_{n/α}.
pub fn weighted_bmo_check(
    cspec: &CommutatorSpec,
    r: f64,
    w: &Weight,
    fam: &TestFamily,
) -> Result<SingleRun> {
    check_same_grid(fam, &[w.spec(), cspec.symbol().field().spec()])?;
    let spec = fam.spec();
    let kernel = cspec.base().kernel();
    let alpha = kernel.alpha_total();
    let n = spec.dim() as f64;
    if alpha <= 0.0 {
        return Err(Error::Domain(
            "alpha = 0 leaves the exponent n/alpha undefined".into(),
        ));
    }
    if !(r > 0.0) || alpha * r >= n {
        return Err(Error::Domain(format!(
            "need 0 < r < n/alpha = {}, got {r}",
            n / alpha
        )));
    }
    let balls = BallFamily::all_centered(spec);
    let mut certs = BTreeMap::new();
    let apq = apq_constant(&w.pow(r), n / (alpha * r), f64::INFINITY, &balls)?;
    certs.insert("a_p_infty_of_w_r".to_string(), apq);
    if !apq.is_finite() {
        return Ok(SingleRun::gated(
            "w^r has no finite A(n/(alpha r), infinity) certificate".into(),
            certs,
        ));
    }
    let mats = kernel.matrices();
    for i in 0..mats.len() {
        let rep = match matrix_compat_constant(w, mats.matrix(i)) {
            Ok(rep) if rep.sup.is_finite() => rep,
            _ => {
                return Ok(SingleRun::gated(
                    format!("weight compatibility with matrix {i} not certified"),
                    certs,
                ))
            }
        };
        certs.insert(format!("matrix_compat_{i}"), rep.sup);
        certs.insert(format!("matrix_coverage_{i}"), rep.coverage);
    }

    let order = cspec.order();
    let bnorm = cspec.symbol().norm();
    let mut run = SingleRun {
        certificates: certs,
        ..SingleRun::default()
    };
    for case in fam.cases() {
        let tf = commutator_field(cspec, &case.f)?;
        let lhs = weighted_bmo_norm(&tf, w, &balls)?;
        let fw = case.f.zip_with(w.field(), |a, b| a * b)?;
        let rhs = bnorm.powf(order as f64) * plain_lp_norm(&fw, n / alpha);
        match ratio_outcome(lhs, rhs) {
            RatioOutcome::Value(r) => run.push_ratio(case.id.clone(), r),
            RatioOutcome::Skip(reason) => run.push_skip(case.id.clone(), reason),
        }
    }
    Ok(run)
}

/// The Young-function triple (E, F, φ) whose factorization E^{-1}F^{-1} ≤ φ^{-1}
/// drives the two-weight and endpoint estimates; D is derived as D(t) = F(t^{1/p}).
#[derive(Clone, Debug)]
pub struct TwoWeightPairing {
    pub e: YoungFunction,
    pub f: YoungFunction,
    pub phi: YoungFunction,
}

impl TwoWeightPairing {
    pub fn derive_d(&self, p: f64) -> Result<YoungFunction> {
        let kind = self.f.kind();
        if let crate::young::YoungKind::Power { r: sigma } = kind {
            let e = sigma / p;
            if (e - 1.0).abs() <= 1e-9 {
                return Ok(YoungFunction::linear());
            }
            if e > 1.0 {
                return Ok(YoungFunction::power(e)?);
            }
            return Err(Error::Config(format!(
                "D construction inconsistent: F = t^{sigma} with p = {p} gives exponent {e} < 1"
            )));
        }
        if matches!(kind, crate::young::YoungKind::Linear) && (p - 1.0).abs() <= 1e-9 {
            return Ok(YoungFunction::linear());
        }
        Err(Error::Config(
            "D construction inconsistent: F must be a power-type Young function".into(),
        ))
    }

    /// Certificates for E ∈ B_{p'} and the inverse pairing; None means
    /// certified, Some carries the gating reason.
    fn certify(&self, p: f64, n: usize, certs: &mut BTreeMap<String, f64>) -> Result<Option<String>> {
        if !(p > 1.0) {
            return Err(Error::Domain(format!("need p > 1, got {p}")));
        }
        let p_dual = p / (p - 1.0);
        let bp = bp_alpha_integral(&self.e, p_dual, 0.0, n, 1e8)?;
        certs.insert("e_growth_integral".to_string(), bp.value);
        certs.insert("e_growth_slope".to_string(), bp.tail_slope);
        if !bp.certified {
            return Ok(Some(format!(
                "E fails the B_{p_dual} growth integral (tail slope {:.3})",
                bp.tail_slope
            )));
        }
        let mut sup = 0.0f64;
        for k in 0..160 {
            let t = 1e-3 * (1e9f64).powf(k as f64 / 159.0);
            let num = self.e.inverse(t)? * self.f.inverse(t)?;
            let den = self.phi.inverse(t)?;
            if den > 0.0 {
                sup = sup.max(num / den);
            }
        }
        certs.insert("inverse_pairing_sup".to_string(), sup);
        if !sup.is_finite() {
            return Ok(Some(
                "inverse pairing E^{-1}F^{-1}/phi^{-1} is unbounded on the probe range".into(),
            ));
        }
        Ok(None)
    }
}

/// Two-weight estimate with an arbitrary positive weight u:
/// ∫ |T^k_b f|^p u ≤ c ∫ |f|^p Σ_i (M_{αp,D} u)(A_i x) dx.
pub fn two_weight_check(
    cspec: &CommutatorSpec,
    p: f64,
    pairing: &TwoWeightPairing,
    u: &Weight,
    fam: &TestFamily,
) -> Result<SingleRun> {
    check_same_grid(fam, &[u.spec(), cspec.symbol().field().spec()])?;
    let spec = fam.spec();
    let kernel = cspec.base().kernel();
    let alpha = kernel.alpha_total();
    let n = spec.dim() as f64;
    if alpha * p >= n {
        return Err(Error::Domain(format!(
            "alpha p = {} leaves M_(alpha p) undefined; need < {n}",
            alpha * p
        )));
    }
    let d = pairing.derive_d(p)?;
    let mut certs = BTreeMap::new();
    if let Some(reason) = pairing.certify(p, spec.dim(), &mut certs)? {
        return Ok(SingleRun::gated(reason, certs));
    }
    let balls = BallFamily::all_centered(spec);
    let mu = PrecomputedMaximal::new(u.field(), &balls, alpha * p, &d)?;
    let mats = kernel.matrices();
    let comp: Vec<f64> = spec
        .points()
        .map(|x| (0..mats.len()).map(|i| mu.at(&mats.matrix(i).apply(x))).sum())
        .collect();

    let h = spec.cell_volume();
    let mut run = SingleRun {
        certificates: certs,
        ..SingleRun::default()
    };
    for case in fam.cases() {
        let tf = commutator_field(cspec, &case.f)?;
        let lhs = weighted_lp_norm(&tf, u, p)?.powf(p);
        let rhs: f64 = h
            * case
                .f
                .values()
                .iter()
                .zip(&comp)
                .map(|(f, c)| f.abs().powf(p) * c)
                .sum::<f64>();
        match ratio_outcome(lhs, rhs) {
            RatioOutcome::Value(r) => run.push_ratio(case.id.clone(), r),
            RatioOutcome::Skip(reason) => run.push_skip(case.id.clone(), reason),
        }
    }
    Ok(run)
}

/// How the endpoint estimate builds the weight transform S.
#[derive(Clone, Debug)]
pub enum EndpointMode {
    /// S = M_φ with φ dominating t^r for some r > 1 beyond t0.
    PhiDirect { phi: YoungFunction, r: f64 },
    /// S = M_D with D derived from the (E, F, φ) factorization at exponent p.
    DerivedD { pairing: TwoWeightPairing, p: f64 },
}

/// Endpoint weak-type estimate at α_total = 0:
/// u{ |T^k_b f| > λ } ≤ c ∫ φ_k(|f|/λ) Σ_i (S u)(A_i x) dx across a λ sweep.
pub fn endpoint_check(
    cspec: &CommutatorSpec,
    mode: &EndpointMode,
    u: &Weight,
    lambda_grid: &[f64],
    fam: &TestFamily,
) -> Result<SingleRun> {
    check_same_grid(fam, &[u.spec(), cspec.symbol().field().spec()])?;
    let spec = fam.spec();
    let kernel = cspec.base().kernel();
    if kernel.alpha_total() != 0.0 {
        return Err(Error::Domain(format!(
            "endpoint estimate requires total order 0, got {}",
            kernel.alpha_total()
        )));
    }
    if lambda_grid.is_empty() || lambda_grid.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Domain("lambda grid must be positive".into()));
    }
    let mut certs = BTreeMap::new();
    let s_young = match mode {
        EndpointMode::PhiDirect { phi, r } => {
            if !(*r > 1.0) {
                return Err(Error::Domain(format!("need r > 1, got {r}")));
            }
            let t_lo = phi.t0().max(1e-3);
            let mut sup = 0.0f64;
            for k in 0..160 {
                let t = t_lo * (1e8 / t_lo).powf(k as f64 / 159.0);
                sup = sup.max(t.powf(*r) / phi.eval(t)?);
            }
            certs.insert("phi_minorant_sup".to_string(), sup);
            if !sup.is_finite() {
                return Ok(SingleRun::gated(
                    format!("t^{r} is not dominated by phi beyond t0"),
                    certs,
                ));
            }
            phi.clone()
        }
        EndpointMode::DerivedD { pairing, p } => {
            if let Some(reason) = pairing.certify(*p, spec.dim(), &mut certs)? {
                return Ok(SingleRun::gated(reason, certs));
            }
            pairing.derive_d(*p)?
        }
    };
    let balls = BallFamily::all_centered(spec);
    let su = PrecomputedMaximal::new(u.field(), &balls, 0.0, &s_young)?;
    let mats = kernel.matrices();
    let comp: Vec<f64> = spec
        .points()
        .map(|x| (0..mats.len()).map(|i| su.at(&mats.matrix(i).apply(x))).sum())
        .collect();
    let phi_k = YoungFunction::phi_k(cspec.order());

    let h = spec.cell_volume();
    let mut run = SingleRun {
        certificates: certs,
        ..SingleRun::default()
    };
    for case in fam.cases() {
        let tf = commutator_field(cspec, &case.f)?;
        let mut any_level = false;
        for &lambda in lambda_grid {
            let mut level = 0.0;
            for (idx, v) in tf.values().iter().enumerate() {
                if v.abs() > lambda {
                    level += u.value(idx);
                }
            }
            let level = h * level;
            if level > 0.0 {
                any_level = true;
            }
            let mut den = 0.0;
            for (idx, v) in case.f.values().iter().enumerate() {
                if *v != 0.0 {
                    den += phi_k.eval(v.abs() / lambda)? * comp[idx];
                }
            }
            let den = h * den;
            let id = format!("{}|lambda={lambda}", case.id);
            match ratio_outcome(level, den) {
                RatioOutcome::Value(r) => run.push_ratio(id, r),
                RatioOutcome::Skip(reason) => run.push_skip(id, reason),
            }
        }
        if !any_level {
            run.push_skip(
                case.id.clone(),
                "degenerate: level set empty at every lambda".into(),
            );
        }
    }
    Ok(run)
}
