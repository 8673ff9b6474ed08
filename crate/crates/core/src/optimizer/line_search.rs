use super::{dotf, Evaluation, OptimizerConfig};
use crate::error::Result;

pub(super) enum LineSearchOutcome {
    Accepted { alpha: f64, eval: Evaluation, evaluations: usize },
    /// `stalled` marks a failure where no decrease above rounding level was found.
    Failed { evaluations: usize, stalled: bool },
    NonFinite { evaluations: usize },
}

struct Point {
    alpha: f64,
    f: f64,
    d: f64,
}

/// Strong-Wolfe bracketing and zoom with safeguarded cubic interpolation.
pub(super) fn strong_wolfe<E>(
    eval: &E,
    x: &[f64],
    start: &Evaluation,
    p: &[f64],
    initial_step: f64,
    cfg: &OptimizerConfig,
) -> Result<LineSearchOutcome>
where
    E: Fn(&[f64]) -> Result<Evaluation>,
{
    let f0 = start.cost;
    let d0 = dotf(&start.grad, p);
    let (c1, c2) = (cfg.wolfe_c1, cfg.wolfe_c2);
    let count = std::cell::Cell::new(0usize);
    let trial = |alpha: f64| -> Result<Option<(Point, Evaluation)>> {
        let xt: Vec<f64> = x.iter().zip(p).map(|(a, b)| a + alpha * b).collect();
        let e = eval(&xt)?;
        count.set(count.get() + 1);
        if !e.is_finite() {
            return Ok(None);
        }
        let pt = Point { alpha, f: e.cost, d: dotf(&e.grad, p) };
        Ok(Some((pt, e)))
    };
    let armijo = |pt: &Point| pt.f <= f0 + c1 * pt.alpha * d0;
    let curvature = |pt: &Point| pt.d.abs() <= -c2 * d0;

    let mut prev = Point { alpha: 0.0, f: f0, d: d0 };
    let mut alpha = initial_step;
    let mut bracket: Option<(Point, Point)> = None;
    for i in 0..cfg.max_line_search {
        let Some((pt, e)) = trial(alpha)? else {
            return Ok(LineSearchOutcome::NonFinite { evaluations: count.get() });
        };
        if !armijo(&pt) || (i > 0 && pt.f >= prev.f) {
            bracket = Some((prev, pt));
            break;
        }
        if curvature(&pt) {
            return Ok(LineSearchOutcome::Accepted { alpha, eval: e, evaluations: count.get() });
        }
        if pt.d >= 0.0 {
            bracket = Some((pt, prev));
            break;
        }
        alpha *= 2.0;
        prev = pt;
    }
    let Some((mut lo, mut hi)) = bracket else {
        return Ok(LineSearchOutcome::Failed { evaluations: count.get(), stalled: false });
    };

    while count.get() < cfg.max_line_search {
        let width = (hi.alpha - lo.alpha).abs();
        if width < 1e-16 * lo.alpha.abs().max(1.0) {
            break;
        }
        let alpha = interpolate(&lo, &hi);
        let Some((pt, e)) = trial(alpha)? else {
            return Ok(LineSearchOutcome::NonFinite { evaluations: count.get() });
        };
        if !armijo(&pt) || pt.f >= lo.f {
            hi = pt;
        } else {
            if curvature(&pt) {
                return Ok(LineSearchOutcome::Accepted { alpha, eval: e, evaluations: count.get() });
            }
            if pt.d * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = pt;
        }
    }
    let stalled = (lo.f - f0).abs() <= 1e-12 * f0.abs().max(1.0);
    Ok(LineSearchOutcome::Failed { evaluations: count.get(), stalled })
}

/// Cubic minimizer of the Hermite interpolant, kept away from the bracket ends.
fn interpolate(a: &Point, b: &Point) -> f64 {
    let (left, right) = (a.alpha.min(b.alpha), a.alpha.max(b.alpha));
    let margin = 0.1 * (right - left);
    let d1 = a.d + b.d - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.d * b.d;
    let cubic = if disc >= 0.0 {
        let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
        b.alpha - (b.alpha - a.alpha) * (b.d + d2 - d1) / (b.d - a.d + 2.0 * d2)
    } else {
        f64::NAN
    };
    if cubic.is_finite() && cubic >= left + margin && cubic <= right - margin {
        cubic
    } else {
        0.5 * (left + right)
    }
}
