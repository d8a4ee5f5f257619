//! Monte-Carlo localization oracle.
//!
//! Independent of both the band-geometry machinery and the learned
//! regressors: each trial draws a fresh noisy reading vector and recovers
//! (position, force) by least squares against the forward model, via a
//! coarse grid search refined with damped Gauss-Newton. The spread of the
//! estimates over many trials is an empirical uncertainty to hold the
//! geometric constructions against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::overlap_count;
use crate::model::{noisy_readings_stream, AttenuationModel, ContactEvent, NoiseModel, TaxelLayout};
use crate::superres::localizable_2d;

/// Empirical localization statistics over Monte-Carlo trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McEstimate {
    /// Sample standard deviation of the estimated x position (mm).
    pub sigma_p: f64,
    /// Sample standard deviation along y (2D layouts only).
    pub sigma_py: Option<f64>,
    /// Sample standard deviation of the estimated force (N).
    pub sigma_f: f64,
    pub mean_position: [f64; 2],
    pub mean_force: f64,
    pub trials: usize,
    pub failures: usize,
}

/// Least-squares cost of hypothesis (p, F) against a reading vector.
fn cost(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    readings: &[f64],
    p: [f64; 2],
    force: f64,
) -> f64 {
    let mut acc = 0.0;
    for (i, &s) in readings.iter().enumerate() {
        let r = model.response_unclamped(force, layout.distance(i, p)).max(0.0) - s;
        acc += r * r;
    }
    acc
}

/// Best force for a fixed position, exact over the piecewise-quadratic
/// segments between activation thresholds.
fn best_force_at(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    readings: &[f64],
    p: [f64; 2],
) -> (f64, f64) {
    let n = layout.len();
    let mut thresholds: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let att = model.lambda * layout.distance(i, p).powf(model.alpha);
            (att, att + model.c * readings[i])
        })
        .collect();
    thresholds.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut best = (0.0, cost(model, layout, readings, p, 0.0));
    let mut prefix = 0.0;
    for j in 0..n {
        prefix += thresholds[j].1;
        let seg_lo = thresholds[j].0;
        let seg_hi = if j + 1 < n { thresholds[j + 1].0 } else { f64::INFINITY };
        // With taxels 0..=j active, the optimum is the mean of (att_i + c*s_i).
        let f_star = (prefix / (j + 1) as f64).clamp(seg_lo, seg_hi.min(1e12));
        let c = cost(model, layout, readings, p, f_star);
        if c < best.1 {
            best = (f_star, c);
        }
    }
    best
}

fn solve_sym(a: &mut [[f64; 3]; 3], b: &mut [f64; 3], dim: usize) -> Option<[f64; 3]> {
    // Gaussian elimination with partial pivoting on the leading dim x dim block.
    let mut x = [0.0; 3];
    for k in 0..dim {
        let mut piv = k;
        for r in k + 1..dim {
            if a[r][k].abs() > a[piv][k].abs() {
                piv = r;
            }
        }
        if a[piv][k].abs() < 1e-300 {
            return None;
        }
        if piv != k {
            a.swap(k, piv);
            b.swap(k, piv);
        }
        for r in k + 1..dim {
            let f = a[r][k] / a[k][k];
            for c in k..dim {
                a[r][c] -= f * a[k][c];
            }
            b[r] -= f * b[k];
        }
    }
    for k in (0..dim).rev() {
        let mut acc = b[k];
        for c in k + 1..dim {
            acc -= a[k][c] * x[c];
        }
        x[k] = acc / a[k][k];
    }
    Some(x)
}

/// Damped Gauss-Newton refinement of (position, force) from a grid start.
/// Returns `None` when the step fails to converge within the budget.
fn refine(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    readings: &[f64],
    start: ([f64; 2], f64),
    two_d: bool,
) -> Option<([f64; 2], f64)> {
    let dim = if two_d { 3 } else { 2 };
    let mut p = start.0;
    let mut force = start.1;
    let mut current = cost(model, layout, readings, p, force);
    let mut damping = 1e-10;
    for _ in 0..100 {
        // Residuals and normal equations. Parameter order: x[, y], F.
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (i, &s) in readings.iter().enumerate() {
            let d = layout.distance(i, p);
            let u = model.response_unclamped(force, d);
            let r = u.max(0.0) - s;
            let mut row = [0.0; 3];
            if u > 0.0 {
                let slope = if d > 1e-12 {
                    model.lambda * model.alpha * d.powf(model.alpha - 1.0) / model.c
                } else {
                    0.0
                };
                let tx = layout.position(i);
                if d > 1e-12 {
                    row[0] = -slope * (p[0] - tx[0]) / d;
                    if two_d {
                        row[1] = -slope * (p[1] - tx[1]) / d;
                    }
                }
                row[dim - 1] = 1.0 / model.c;
            }
            for a in 0..dim {
                for b in 0..dim {
                    jtj[a][b] += row[a] * row[b];
                }
                jtr[a] += row[a] * r;
            }
        }

        let mut improved = false;
        for _ in 0..10 {
            let mut a = jtj;
            for k in 0..dim {
                a[k][k] += damping * (1.0 + jtj[k][k]);
            }
            let mut rhs = [-jtr[0], -jtr[1], -jtr[2]];
            let Some(step) = solve_sym(&mut a, &mut rhs, dim) else {
                damping *= 10.0;
                continue;
            };
            let q = if two_d {
                [p[0] + step[0], p[1] + step[1]]
            } else {
                [p[0] + step[0], p[1]]
            };
            let f_new = (force + step[dim - 1]).max(0.0);
            let c_new = cost(model, layout, readings, q, f_new);
            if c_new <= current {
                let step_norm = step[..dim].iter().map(|s| s * s).sum::<f64>().sqrt();
                p = q;
                force = f_new;
                current = c_new;
                damping = (damping / 4.0).max(1e-12);
                improved = true;
                if step_norm < 1e-7 {
                    return Some((p, force));
                }
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            // No decrease possible; accept if the gradient is already flat.
            let g_norm = jtr[..dim].iter().map(|g| g * g).sum::<f64>().sqrt();
            return if g_norm < 1e-9 { Some((p, force)) } else { None };
        }
    }
    None
}

/// Single least-squares inversion of one reading vector (grid + refine).
pub fn invert_readings(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    readings: &[f64],
) -> Option<([f64; 2], f64)> {
    let two_d = layout.dimensionality() == 2;
    let spacing = layout.nominal_spacing().max(1e-6);
    let step = spacing / 50.0;
    let (lo, hi) = layout.bounding_box();
    let pad = 0.5 * spacing;

    let mut best: Option<(f64, [f64; 2], f64)> = None;
    let mut consider = |p: [f64; 2]| {
        let (f, c) = best_force_at(model, layout, readings, p);
        if best.as_ref().map_or(true, |(bc, _, _)| c < *bc) {
            best = Some((c, p, f));
        }
    };
    if two_d {
        let nx = (((hi[0] - lo[0]) + 2.0 * pad) / step).ceil() as usize + 1;
        let ny = (((hi[1] - lo[1]) + 2.0 * pad) / step).ceil() as usize + 1;
        for iy in 0..ny {
            for ix in 0..nx {
                consider([lo[0] - pad + ix as f64 * step, lo[1] - pad + iy as f64 * step]);
            }
        }
    } else {
        let nx = (((hi[0] - lo[0]) + 2.0 * pad) / step).ceil() as usize + 1;
        for ix in 0..nx {
            consider([lo[0] - pad + ix as f64 * step, 0.0]);
        }
    }
    let (_, p0, f0) = best?;
    refine(model, layout, readings, (p0, f0), two_d)
}

/// Monte-Carlo spread of the least-squares estimator at a contact.
///
/// Draws `trials` noisy reading vectors (streams keyed on `seed`), inverts
/// each, and reports sample standard deviations. Fails when more than 5% of
/// the trials do not converge.
pub fn mc_oracle(
    model: &AttenuationModel,
    noise: &NoiseModel,
    layout: &TaxelLayout,
    contact: &ContactEvent,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if trials < 2 {
        return Err(Error::InvalidParameter("need at least 2 trials".into()));
    }
    let two_d = layout.dimensionality() == 2;
    if two_d {
        if !localizable_2d(model, layout, contact)? {
            return Err(Error::InvalidParameter(
                "contact is not localizable (needs 3 non-collinear active taxels)".into(),
            ));
        }
    } else if overlap_count(model, layout, contact) < 2 {
        return Err(Error::InvalidParameter(
            "contact activates fewer than 2 taxels".into(),
        ));
    }
    let noise = NoiseModel { seed, ..*noise };

    let estimates: Vec<Option<([f64; 2], f64)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let readings =
                noisy_readings_stream(model, &noise, layout, &[*contact], t as u64).ok()?;
            invert_readings(model, layout, &readings)
        })
        .collect();

    let good: Vec<([f64; 2], f64)> = estimates.iter().flatten().copied().collect();
    let failures = trials - good.len();
    if failures * 20 > trials {
        return Err(Error::NonConvergent(format!(
            "{failures} of {trials} trials failed to converge"
        )));
    }
    let n = good.len() as f64;
    let mean_x = good.iter().map(|(p, _)| p[0]).sum::<f64>() / n;
    let mean_y = good.iter().map(|(p, _)| p[1]).sum::<f64>() / n;
    let mean_f = good.iter().map(|(_, f)| f).sum::<f64>() / n;
    let var = |get: &dyn Fn(&([f64; 2], f64)) -> f64, mean: f64| {
        good.iter().map(|e| (get(e) - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    Ok(McEstimate {
        sigma_p: var(&|e| e.0[0], mean_x).sqrt(),
        sigma_py: two_d.then(|| var(&|e| e.0[1], mean_y).sqrt()),
        sigma_f: var(&|e| e.1, mean_f).sqrt(),
        mean_position: [mean_x, mean_y],
        mean_force: mean_f,
        trials,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_model() -> AttenuationModel {
        AttenuationModel::new(1.0, 1.0, 2.0, 0.0).unwrap()
    }

    #[test]
    fn noiseless_inversion_is_exact() {
        let m = unit_model();
        let layout = TaxelLayout::line(vec![0.0, 2.0]).unwrap();
        let noise = NoiseModel::noiseless();
        let contact = ContactEvent::at_1d(0.8, 2.5).unwrap();
        let est = mc_oracle(&m, &noise, &layout, &contact, 16, 0).unwrap();
        assert_abs_diff_eq!(est.mean_position[0], 0.8, epsilon = 1e-6);
        assert_abs_diff_eq!(est.mean_force, 2.5, epsilon = 1e-6);
        assert!(est.sigma_p < 1e-7);
        assert!(est.sigma_f < 1e-7);
        assert_eq!(est.failures, 0);
    }

    #[test]
    fn canonical_two_taxel_spread() {
        // Exact error propagation for this symmetric quadratic case gives
        // sigma_p = sigma_s*sqrt(2)/4 and sigma_f = sigma_s/sqrt(2).
        let m = unit_model();
        let layout = TaxelLayout::line(vec![0.0, 2.0]).unwrap();
        let noise = NoiseModel::new(0.1, 0.0, 0).unwrap();
        let contact = ContactEvent::at_1d(1.0, 2.0).unwrap();
        let est = mc_oracle(&m, &noise, &layout, &contact, 4000, 42).unwrap();
        let expect_p = 0.1 * (2.0_f64).sqrt() / 4.0;
        let expect_f = 0.1 / (2.0_f64).sqrt();
        assert!((est.sigma_p - expect_p).abs() / expect_p < 0.08, "{}", est.sigma_p);
        assert!((est.sigma_f - expect_f).abs() / expect_f < 0.08, "{}", est.sigma_f);
    }

    #[test]
    fn third_taxel_tightens_position() {
        let m = AttenuationModel::new(1.0, 1.0, 2.0, 0.0).unwrap();
        let noise = NoiseModel::new(0.1, 0.0, 0).unwrap();
        let contact = ContactEvent::at_1d(0.8, 15.0).unwrap();
        let two = TaxelLayout::line(vec![0.0, 2.0]).unwrap();
        let three = TaxelLayout::line(vec![0.0, 2.0, 4.0]).unwrap();
        let a = mc_oracle(&m, &noise, &two, &contact, 1500, 7).unwrap();
        let b = mc_oracle(&m, &noise, &three, &contact, 1500, 7).unwrap();
        assert!(
            b.sigma_p < a.sigma_p,
            "three-taxel sigma {} vs two-taxel {}",
            b.sigma_p,
            a.sigma_p
        );
    }

    #[test]
    fn rejects_unlocalizable_contacts() {
        let m = unit_model();
        let noise = NoiseModel::noiseless();
        let one = TaxelLayout::line(vec![0.0, 10.0]).unwrap();
        let weak = ContactEvent::at_1d(0.0, 0.5).unwrap();
        assert!(mc_oracle(&m, &noise, &one, &weak, 10, 0).is_err());
    }

    #[test]
    fn two_d_inversion_recovers_contact() {
        let m = unit_model();
        let layout =
            TaxelLayout::plane(vec![[0.0, 0.0], [4.0, 0.0], [2.0, 3.0], [2.0, -1.0]]).unwrap();
        let noise = NoiseModel::new(0.05, 0.0, 0).unwrap();
        let contact = ContactEvent::at_2d(1.8, 0.9, 25.0).unwrap();
        let est = mc_oracle(&m, &noise, &layout, &contact, 300, 3).unwrap();
        assert_abs_diff_eq!(est.mean_position[0], 1.8, epsilon = 0.05);
        assert_abs_diff_eq!(est.mean_position[1], 0.9, epsilon = 0.05);
        assert!(est.sigma_py.is_some());
    }
}
