use crate::error::{Error, Result};
use crate::grid::{Annulus, Ball, GridFunction};
use crate::young::{YoungFunction, YoungKind};

/// Relative tolerance of the Luxemburg norm root-finder.
pub const LUX_TOL: f64 = 1e-11;

const MAX_DOUBLINGS: usize = 60;

/// Core solver over a slice of absolute cell values. `scale` is
/// cell_volume / |B|, so the normalized integral of psi(|f|/lambda) is
/// scale * sum(psi(v/lambda)).
pub(crate) fn luxemburg_values(values: &[f64], scale: f64, psi: &YoungFunction) -> Result<f64> {
    match psi.kind() {
        YoungKind::LinfMarker => Ok(values.iter().fold(0.0f64, |m, &v| m.max(v))),
        YoungKind::Linear => Ok(scale * values.iter().sum::<f64>()),
        YoungKind::Power { r } => {
            let sum: f64 = values.iter().map(|&v| v.powf(r)).sum();
            Ok((scale * sum).powf(1.0 / r))
        }
        _ => luxemburg_values_solver(values, scale, psi),
    }
}

/// Root-finder path, exposed separately so the closed-form reductions can be
/// validated against it.
pub(crate) fn luxemburg_values_solver(
    values: &[f64],
    scale: f64,
    psi: &YoungFunction,
) -> Result<f64> {
    if psi.is_linf() {
        return Err(Error::Domain(
            "essential-supremum norms have no root-finder form".into(),
        ));
    }
    let max_abs = values.iter().fold(0.0f64, |m, &v| m.max(v));
    if max_abs == 0.0 {
        return Ok(0.0);
    }
    let g = |lambda: f64| -> f64 {
        let mut acc = 0.0;
        for &v in values {
            if v > 0.0 {
                acc += psi.eval(v / lambda).unwrap_or(f64::INFINITY);
                if !acc.is_finite() {
                    return f64::INFINITY;
                }
            }
        }
        scale * acc - 1.0
    };
    // Bracket the root of the decreasing predicate g.
    let mut hi = max_abs;
    let mut g_hi = g(hi);
    let mut grow = 0;
    while g_hi > 0.0 {
        hi *= 2.0;
        g_hi = g(hi);
        grow += 1;
        if grow > MAX_DOUBLINGS {
            return Err(Error::NormOverflow(format!(
                "no admissible lambda below {hi:.3e}"
            )));
        }
    }
    let mut lo = 0.5 * hi;
    let mut g_lo = g(lo);
    while g_lo <= 0.0 {
        hi = lo;
        g_hi = g_lo;
        lo *= 0.5;
        if lo < 1e-300 {
            return Ok(0.0);
        }
        g_lo = g(lo);
    }
    // Illinois false position on [lo, hi].
    let mut side = 0i32;
    for _ in 0..80 {
        if hi - lo <= LUX_TOL * hi {
            break;
        }
        let x = if g_lo.is_finite() {
            let denom = g_lo - g_hi;
            if denom.abs() < 1e-300 {
                0.5 * (lo + hi)
            } else {
                (lo * (-g_hi) + hi * g_lo) / denom
            }
        } else {
            0.5 * (lo + hi)
        };
        let x = x.clamp(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo));
        let gx = g(x);
        if gx > 0.0 {
            lo = x;
            g_lo = gx;
            if side == 1 {
                g_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            g_hi = gx;
            if side == -1 && g_lo.is_finite() {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
    Ok(hi)
}

fn gather(f: &GridFunction, ball: &Ball) -> Result<(Vec<f64>, f64)> {
    let spec = f.spec();
    let cells = ball.cells(spec);
    if cells.is_empty() {
        return Err(Error::EmptyBall {
            x: ball.center.x,
            y: ball.center.y,
            radius: ball.radius,
        });
    }
    let measure = ball.measure_clipped(spec);
    let values: Vec<f64> = cells.iter().map(|&i| f.value(i).abs()).collect();
    Ok((values, spec.cell_volume() / measure))
}

/// Luxemburg norm of f over the cells of a ball:
/// inf { lambda > 0 : (1/|B|) sum_cells psi(|f|/lambda) h^d <= 1 },
/// with |B| the exact Lebesgue measure of the ball clipped to the grid box.
/// The essential-supremum sentinel yields max |f| over the cells.
pub fn luxemburg_norm(f: &GridFunction, ball: &Ball, psi: &YoungFunction) -> Result<f64> {
    let (values, scale) = gather(f, ball)?;
    luxemburg_values(&values, scale, psi)
}

/// Root-finder evaluation of the same norm, bypassing closed-form reductions.
pub fn luxemburg_norm_bisection(f: &GridFunction, ball: &Ball, psi: &YoungFunction) -> Result<f64> {
    let (values, scale) = gather(f, ball)?;
    luxemburg_values_solver(&values, scale, psi)
}

/// Norm of f restricted to the shell s < |x - c| <= 2s, measured in the
/// enclosing ball B(c, 2s).
pub fn annulus_norm(f: &GridFunction, shell: &Annulus, psi: &YoungFunction) -> Result<f64> {
    let spec = f.spec();
    let ball = shell.enclosing_ball();
    let cells = ball.cells(spec);
    if cells.is_empty() {
        return Err(Error::EmptyBall {
            x: ball.center.x,
            y: ball.center.y,
            radius: ball.radius,
        });
    }
    let measure = ball.measure_clipped(spec);
    let dim = spec.dim();
    let values: Vec<f64> = cells
        .iter()
        .map(|&i| {
            if shell.contains(&spec.midpoint(i), dim) {
                f.value(i).abs()
            } else {
                0.0
            }
        })
        .collect();
    luxemburg_values(&values, spec.cell_volume() / measure, psi)
}

/// Ratio of the normalized L^1 average of f_1 ... f_m g over a ball to the
/// product of their Orlicz norms. Finite product compatibility of the psis
/// with phi bounds this ratio by a fixed constant.
pub fn generalized_holder_check(
    fs: &[GridFunction],
    g: &GridFunction,
    psis: &[YoungFunction],
    phi: &YoungFunction,
    ball: &Ball,
) -> Result<f64> {
    if fs.is_empty() || fs.len() != psis.len() {
        return Err(Error::Domain(format!(
            "need matching non-empty function/Young lists, got {} and {}",
            fs.len(),
            psis.len()
        )));
    }
    let spec = g.spec();
    let cells = ball.cells(spec);
    if cells.is_empty() {
        return Err(Error::EmptyBall {
            x: ball.center.x,
            y: ball.center.y,
            radius: ball.radius,
        });
    }
    let measure = ball.measure_clipped(spec);
    let mut lhs = 0.0;
    for &i in &cells {
        let mut prod = g.value(i).abs();
        for f in fs {
            prod *= f.value(i).abs();
        }
        lhs += prod;
    }
    lhs *= spec.cell_volume() / measure;
    let mut rhs = luxemburg_norm(g, ball, phi)?;
    for (f, psi) in fs.iter().zip(psis) {
        rhs *= luxemburg_norm(f, ball, psi)?;
    }
    if rhs == 0.0 {
        if lhs <= 1e-14 {
            return Ok(0.0);
        }
        return Err(Error::Domain(
            "product norm vanished while the left side did not".into(),
        ));
    }
    Ok(lhs / rhs)
}
