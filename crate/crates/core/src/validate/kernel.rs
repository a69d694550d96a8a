//! Checks on kernel grids alone: mass, sign, the semigroup identity, and the
//! action on functions.

use ndarray::Array2;

use super::{coverage_of, full_period, Outcome, Tolerances, ValidationReport, Witness};
use crate::error::{Error, Result};
use crate::exponent::LevyMeasureSpec;
use crate::freekernel::KernelGrid;

/// Quadrature weights for the `y` nodes: equal weights on a full period,
/// trapezoid weights on an open window.
fn y_weights(g: &KernelGrid) -> Result<Vec<f64>> {
    let n = g.y_nodes.len();
    if n < 2 {
        return Err(Error::GridMismatch("need at least two y nodes".into()));
    }
    let h = g.y_nodes[1] - g.y_nodes[0];
    if !(h > 0.0) || g.y_nodes.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::GridMismatch("y nodes are not uniform".into()));
    }
    let mut w = vec![h; n];
    if full_period(g).is_none() {
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
    }
    Ok(w)
}

/// `T_t f(x_i) = ∫ f(y) p_t(x_i, y) dy` by quadrature over each row.
pub fn apply_semigroup(p: &KernelGrid, f: &dyn Fn(f64) -> f64) -> Result<Vec<f64>> {
    let w = y_weights(p)?;
    let fw: Vec<f64> = p.y_nodes.iter().zip(&w).map(|(y, w)| f(*y) * w).collect();
    Ok(p.values.rows().into_iter().map(|row| row.iter().zip(&fw).map(|(a, b)| a * b).sum()).collect())
}

/// Row sums `∫p_t(x, y) dy` against 1.
///
/// On a full circle there is no mass outside the grid.  On an open window the
/// mass beyond the window edges is estimated by `t μ{u > r}` on each side (the
/// one-jump approximation) and added; when that estimate exceeds the tail
/// tolerance, or no measure is supplied, the verdict is inconclusive.
pub fn check_conservation(family: &[KernelGrid], tail: Option<&LevyMeasureSpec>, tol: &Tolerances) -> Result<ValidationReport> {
    let mut rep = ValidationReport::new("conservation", coverage_of(family), tol.mass);
    let mut worst_tail: f64 = 0.0;
    let mut undecided = false;
    for g in family {
        let w = y_weights(g)?;
        let periodic = full_period(g).is_some();
        let (y_lo, y_hi) = (g.y_nodes[0], g.y_nodes[g.y_nodes.len() - 1]);
        for (i, &x) in g.x_nodes.iter().enumerate() {
            let sum: f64 = g.values.row(i).iter().zip(&w).map(|(a, b)| a * b).sum();
            let outside = if periodic {
                0.0
            } else {
                match tail {
                    Some(m) => {
                        let (rl, rr) = (x - y_lo, y_hi - x);
                        if rl <= 0.0 || rr <= 0.0 {
                            f64::INFINITY
                        } else {
                            0.5 * g.t * (m.mass_beyond(rl)? + m.mass_beyond(rr)?)
                        }
                    }
                    None => {
                        undecided = true;
                        0.0
                    }
                }
            };
            worst_tail = worst_tail.max(outside);
            let r = (sum + if outside.is_finite() { outside } else { 0.0 } - 1.0).abs();
            if r > rep.worst_residual {
                rep.worst_residual = r;
                rep.witness = Some(Witness { t: g.t, x, y: f64::NAN, value: sum });
            }
        }
    }
    rep.constants.insert("tail_mass".into(), worst_tail);
    if undecided {
        rep.notes.push("open window without a measure for the tail estimate".into());
    }
    let verdict = if undecided || worst_tail > tol.tail_mass {
        Outcome::Inconclusive
    } else if rep.worst_residual <= tol.mass {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    rep.set_verdict(verdict);
    if rep.pass {
        rep.witness = None;
    }
    Ok(rep)
}

fn flag_value(flags: &[String], key: &str) -> Option<f64> {
    flags.iter().find_map(|f| {
        f.split_whitespace().find_map(|tok| tok.strip_prefix(key).and_then(|v| v.parse::<f64>().ok()))
    })
}

/// Smallest entry against `-tol · max`, with the clamping record of the assembly.
pub fn check_nonnegativity(family: &[KernelGrid], tol: &Tolerances) -> Result<ValidationReport> {
    let mut rep = ValidationReport::new("nonnegativity", coverage_of(family), tol.negativity);
    let max = family.iter().map(|g| g.max_abs()).fold(0.0, f64::max);
    let mut min = f64::INFINITY;
    let mut clamped = 0.0;
    let mut flagged = 0.0;
    let mut raw_min = f64::INFINITY;
    for g in family {
        for ((i, j), &v) in g.values.indexed_iter() {
            if v < min {
                min = v;
                rep.witness = Some(Witness { t: g.t, x: g.x_nodes[i], y: g.y_nodes[j], value: v });
            }
        }
        clamped += flag_value(&g.meta.flags, "negative_clamped=").unwrap_or(0.0);
        flagged += flag_value(&g.meta.flags, "negative_flagged=").unwrap_or(0.0);
        if let Some(m) = flag_value(&g.meta.flags, "min=") {
            raw_min = raw_min.min(m);
        }
    }
    if !raw_min.is_finite() {
        raw_min = min;
    }
    let depth = if max > 0.0 { (-raw_min.min(min)).max(0.0) / max } else { 0.0 };
    rep.worst_residual = depth;
    rep.constants.insert("min".into(), min);
    rep.constants.insert("raw_min".into(), raw_min.min(min));
    rep.constants.insert("max".into(), max);
    rep.constants.insert("clamped".into(), clamped);
    rep.constants.insert("flagged".into(), flagged);
    if clamped > 0.0 {
        rep.notes.push(format!("{clamped} entries in [-{:.0e}·max, 0) were clamped to zero", tol.negativity));
    }
    rep.set_verdict(if depth <= tol.negativity { Outcome::Pass } else { Outcome::Fail });
    if rep.pass {
        rep.witness = None;
    }
    Ok(rep)
}

fn same_nodes(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(u, v)| (u - v).abs() <= 1e-9 * (1.0 + u.abs()))
}

/// `max |∫p_s(x,z) p_{t-s}(z,y) dz - p_t(x,y)| / max p_t`.
///
/// `ps` must be sampled on all `z` nodes in `y`, `pts` on the same `z` nodes in
/// `x`. A factor that puts more than half of its mass on one node is too
/// concentrated for the grid and makes the verdict inconclusive.
pub fn check_chapman_kolmogorov(
    ps: &KernelGrid,
    pts: &KernelGrid,
    pt: &KernelGrid,
    tolerance: f64,
) -> Result<ValidationReport> {
    if !same_nodes(&ps.y_nodes, &pts.x_nodes) {
        return Err(Error::GridMismatch("inner nodes of the two factors differ".into()));
    }
    if !same_nodes(&ps.x_nodes, &pt.x_nodes) || !same_nodes(&pts.y_nodes, &pt.y_nodes) {
        return Err(Error::GridMismatch("outer nodes differ from the target kernel".into()));
    }
    if ((ps.t + pts.t) - pt.t).abs() > 1e-9 * pt.t {
        return Err(Error::InvalidSpec(format!("times {} + {} do not add up to {}", ps.t, pts.t, pt.t)));
    }
    let family = [ps.clone(), pts.clone(), pt.clone()];
    let mut rep = ValidationReport::new("chapman_kolmogorov", coverage_of(&family), tolerance);
    let w = y_weights(ps)?;
    let h = w[1];
    let weighted = Array2::from_shape_fn(ps.values.dim(), |(i, j)| ps.values[(i, j)] * w[j]);
    let composed = weighted.dot(&pts.values);
    let scale = pt.max_abs();
    for ((i, j), &v) in composed.indexed_iter() {
        let r = (v - pt.values[(i, j)]).abs() / scale;
        if r > rep.worst_residual {
            rep.worst_residual = r;
            rep.witness = Some(Witness { t: pt.t, x: pt.x_nodes[i], y: pt.y_nodes[j], value: v });
        }
    }
    let concentration = ps.max_abs().max(pts.max_abs()) * h;
    rep.constants.insert("cell_mass".into(), concentration);
    let verdict = if concentration > 0.5 {
        rep.notes.push(format!("a factor puts {concentration:.2} of its mass on one node; refine the grid"));
        Outcome::Inconclusive
    } else if rep.worst_residual <= tolerance {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    if full_period(ps).is_none() {
        rep.notes.push("inner integral over an open window".into());
    }
    rep.set_verdict(verdict);
    if rep.pass {
        rep.witness = None;
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freekernel::{GridMeta, Provenance};
    use std::f64::consts::PI;

    /// Wrapped Cauchy kernel on a circle of length `l` with `n` nodes.
    fn wrapped_cauchy(t: f64, n: usize, l: f64) -> KernelGrid {
        let h = l / n as f64;
        let xs: Vec<f64> = (0..n).map(|j| -0.5 * l + j as f64 * h).collect();
        // closed form of the periodized Cauchy density
        let k = |z: f64| {
            let a = 2.0 * PI / l;
            (a / (2.0 * PI)) * (a * t).sinh() / ((a * t).cosh() - (a * z).cos())
        };
        let v = Array2::from_shape_fn((n, n), |(i, j)| k(xs[j] - xs[i]));
        KernelGrid::new(
            t,
            xs.clone(),
            xs,
            v,
            GridMeta { provenance: Provenance::P0, err_est: 0.0, spacing: h, half_width: 0.5 * l, flags: vec![] },
        )
        .unwrap()
    }

    #[test]
    fn free_kernel_conserves_mass_on_the_circle() {
        let fam = [wrapped_cauchy(0.25, 256, 8.0 * PI), wrapped_cauchy(1.0, 256, 8.0 * PI)];
        let rep = check_conservation(&fam, None, &Tolerances::default()).unwrap();
        assert!(rep.pass && rep.worst_residual < 1e-6, "{rep:?}");
    }

    #[test]
    fn truncated_window_is_inconclusive() {
        let g = wrapped_cauchy(0.5, 256, 8.0 * PI);
        let keep: Vec<usize> = (96..160).collect();
        let v = Array2::from_shape_fn((keep.len(), keep.len()), |(i, j)| g.values[(keep[i], keep[j])]);
        let xs: Vec<f64> = keep.iter().map(|&k| g.x_nodes[k]).collect();
        let w = KernelGrid::new(0.5, xs.clone(), xs, v, g.meta.clone()).unwrap();
        let rep = check_conservation(&[w], Some(&LevyMeasureSpec::cauchy()), &Tolerances::default()).unwrap();
        assert_eq!(rep.verdict, Outcome::Inconclusive);
    }

    #[test]
    fn cauchy_semigroup_identity_holds() {
        let (a, b, c) = (wrapped_cauchy(0.25, 256, 8.0 * PI), wrapped_cauchy(0.25, 256, 8.0 * PI), wrapped_cauchy(0.5, 256, 8.0 * PI));
        let rep = check_chapman_kolmogorov(&a, &b, &c, 2e-3).unwrap();
        assert!(rep.pass && rep.worst_residual < 1e-4, "{rep:?}");
    }

    #[test]
    fn mismatched_times_are_rejected() {
        let a = wrapped_cauchy(0.25, 64, 8.0 * PI);
        assert!(check_chapman_kolmogorov(&a, &a, &a, 1e-2).is_err());
    }

    #[test]
    fn semigroup_action_is_a_contraction_and_keeps_constants() {
        let g = wrapped_cauchy(0.3, 256, 8.0 * PI);
        let one = apply_semigroup(&g, &|_| 1.0).unwrap();
        assert!(one.iter().all(|v| (v - 1.0).abs() < 1e-6));
        let f = |x: f64| (-(x * x)).exp() * x.cos() * 2.0 - 0.5;
        let tf = apply_semigroup(&g, &f).unwrap();
        let sup_f = g.y_nodes.iter().map(|y| f(*y).abs()).fold(0.0, f64::max);
        assert!(tf.iter().all(|v| v.abs() <= sup_f + 1e-12));
    }

    #[test]
    fn negative_entries_beyond_tolerance_fail() {
        let mut g = wrapped_cauchy(0.3, 64, 8.0 * PI);
        g.values[(3, 40)] = -1e-3 * g.max_abs();
        let rep = check_nonnegativity(&[g], &Tolerances::default()).unwrap();
        assert_eq!(rep.verdict, Outcome::Fail);
        assert!(rep.witness.is_some());
    }
}
