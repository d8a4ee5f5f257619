//! Isoline extraction and parameter recovery from scan data.
//!
//! The per-taxel readings of a scan are linearly interpolated along the
//! depth axis to find, at each position, the force at which the reading
//! crosses a chosen level. The resulting (distance, force) points form an
//! empirical isoline, which is fitted with `F = g + lambda * d^alpha`. The
//! force intercepts `g` across levels give the sensor-to-force constant `c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AttenuationModel;
use crate::synth::ScanDataset;

/// Empirical isoline: (distance mm, force N) points at one reading level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsolineSample {
    pub level: f64,
    pub points: Vec<(f64, f64)>,
}

/// Fitted isoline parameters for one level.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IsolineFit {
    pub level: f64,
    /// Force intercept g at distance zero (N).
    pub g: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub residual_rms: f64,
}

/// Origin-constrained linear fit of g over level, with per-level ratios as
/// a linearity diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CEstimate {
    pub c: f64,
    /// (level, g/level) for every level with a nonzero reading.
    pub per_level_ratio: Vec<(f64, f64)>,
    /// Largest absolute deviation of a per-level ratio from c.
    pub max_deviation: f64,
}

/// Constant-parameter model recovered from fits, plus the per-level table
/// the reduction came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedModel {
    pub model: AttenuationModel,
    pub c_estimate: CEstimate,
    pub per_level: Vec<IsolineFit>,
}

/// Full calibration of one taxel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaxelCalibration {
    pub taxel_index: usize,
    pub c: f64,
    pub levels: Vec<IsolineFit>,
}

impl TaxelCalibration {
    /// Fitted parameters at the isoline level matching a force threshold
    /// (level closest to `force / c`).
    pub fn level_params_for_force(&self, force: f64) -> Result<&IsolineFit> {
        if self.levels.is_empty() {
            return Err(Error::InvalidParameter("calibration has no levels".into()));
        }
        let target = force / self.c;
        Ok(self
            .levels
            .iter()
            .min_by(|a, b| {
                (a.level - target)
                    .abs()
                    .partial_cmp(&(b.level - target).abs())
                    .unwrap()
            })
            .unwrap())
    }
}

/// Extracts empirical isolines for one taxel.
///
/// Per scan position, readings and forces are linearly interpolated across
/// consecutive depth steps; the first depth at which the reading crosses a
/// level yields one (distance, force) point. Positions that never cross the
/// level are skipped; fewer than four crossings for a level is an error.
pub fn extract_isolines(
    dataset: &ScanDataset,
    taxel_index: usize,
    levels: &[f64],
) -> Result<Vec<IsolineSample>> {
    if taxel_index >= dataset.taxel_count() {
        return Err(Error::InvalidParameter(format!(
            "taxel index {taxel_index} out of range ({} taxels)",
            dataset.taxel_count()
        )));
    }
    if levels.is_empty() {
        return Err(Error::InvalidParameter("no levels requested".into()));
    }
    let center = dataset.metadata.layout.position(taxel_index);

    // Group rows by scan position, keeping depth order within each group.
    let mut groups: Vec<(&[f64; 2], Vec<&crate::synth::ScanRow>)> = Vec::new();
    for row in &dataset.rows {
        match groups.last_mut() {
            Some((p, rows)) if **p == row.position => rows.push(row),
            _ => groups.push((&row.position, vec![row])),
        }
    }
    for (_, rows) in &mut groups {
        rows.sort_by(|a, b| a.depth.partial_cmp(&b.depth).unwrap());
    }

    let mut samples = Vec::with_capacity(levels.len());
    for &level in levels {
        let mut points = Vec::new();
        for (pos, rows) in &groups {
            if rows.len() < 2 {
                continue;
            }
            let distance =
                ((pos[0] - center[0]).powi(2) + (pos[1] - center[1]).powi(2)).sqrt();
            for w in rows.windows(2) {
                let r0 = w[0].readings[taxel_index];
                let r1 = w[1].readings[taxel_index];
                if (r0 - level) * (r1 - level) <= 0.0 && r0 != r1 {
                    let t = (level - r0) / (r1 - r0);
                    let force = w[0].force + t * (w[1].force - w[0].force);
                    points.push((distance, force));
                    break;
                }
            }
        }
        if points.len() < 4 {
            return Err(Error::InsufficientCoverage(format!(
                "level {level}: only {} crossings (need 4)",
                points.len()
            )));
        }
        samples.push(IsolineSample { level, points });
    }
    Ok(samples)
}

/// Sum of squared residuals of the best (g, lambda) for a fixed alpha,
/// solved exactly from the 2x2 normal equations. `None` when the design is
/// rank deficient at this alpha.
fn profile_sse(points: &[(f64, f64)], alpha: f64) -> Option<(f64, f64, f64)> {
    let n = points.len() as f64;
    let mut su = 0.0;
    let mut suu = 0.0;
    let mut sf = 0.0;
    let mut suf = 0.0;
    for &(d, f) in points {
        let u = d.powf(alpha);
        su += u;
        suu += u * u;
        sf += f;
        suf += u * f;
    }
    let det = n * suu - su * su;
    let scale = (n * suu).abs().max(1.0);
    if det.abs() < 1e-12 * scale {
        return None;
    }
    let g = (suu * sf - su * suf) / det;
    let lambda = (n * suf - su * sf) / det;
    let mut sse = 0.0;
    for &(d, f) in points {
        let r = f - g - lambda * d.powf(alpha);
        sse += r * r;
    }
    Some((g, lambda, sse))
}

/// Alpha search range for isoline fits.
pub const ALPHA_RANGE: (f64, f64) = (0.2, 6.0);

/// Fits `F = g + lambda * d^alpha` to an isoline sample.
///
/// For fixed alpha the problem is linear in (g, lambda) and solved exactly;
/// alpha itself is found by golden-section search over [`ALPHA_RANGE`],
/// converged when the bracket is narrower than 1e-6.
pub fn fit_isoline(sample: &IsolineSample) -> Result<IsolineFit> {
    let points = &sample.points;
    if points.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    let mut distances: Vec<f64> = points.iter().map(|p| p.0).collect();
    distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distances.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if distances.len() < 2 {
        return Err(Error::DegenerateFit(
            "all points share one distance; alpha is unidentifiable".into(),
        ));
    }
    if points.iter().any(|&(d, f)| d < 0.0 || !d.is_finite() || !f.is_finite()) {
        return Err(Error::InvalidParameter("isoline points must be finite with d >= 0".into()));
    }

    let sse_at = |alpha: f64| profile_sse(points, alpha).map_or(f64::INFINITY, |r| r.2);
    let (mut a, mut b) = ALPHA_RANGE;
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = sse_at(x1);
    let mut f2 = sse_at(x2);
    while b - a > 1e-6 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = sse_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = sse_at(x2);
        }
    }
    let alpha = 0.5 * (a + b);
    let (g, lambda, sse) = profile_sse(points, alpha).ok_or_else(|| {
        Error::DegenerateFit(format!("rank-deficient design at alpha = {alpha}"))
    })?;
    if !(lambda > 0.0) {
        return Err(Error::DegenerateFit(format!(
            "fitted attenuation coefficient is not positive ({lambda})"
        )));
    }
    Ok(IsolineFit {
        level: sample.level,
        g,
        lambda,
        alpha,
        residual_rms: (sse / points.len() as f64).sqrt(),
    })
}

/// Sensor-to-force constant from the force intercepts: slope of the
/// origin-constrained least-squares line through (level, g).
pub fn estimate_c(fits: &[IsolineFit]) -> Result<CEstimate> {
    let mut distinct: Vec<f64> = fits.iter().map(|f| f.level).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if distinct.len() < 2 {
        return Err(Error::InvalidParameter(
            "estimate_c needs fits at two distinct levels".into(),
        ));
    }
    let num: f64 = fits.iter().map(|f| f.level * f.g).sum();
    let den: f64 = fits.iter().map(|f| f.level * f.level).sum();
    if den == 0.0 {
        return Err(Error::InvalidParameter("all levels are zero".into()));
    }
    let c = num / den;
    let per_level_ratio: Vec<(f64, f64)> = fits
        .iter()
        .filter(|f| f.level != 0.0)
        .map(|f| (f.level, f.g / f.level))
        .collect();
    let max_deviation = per_level_ratio
        .iter()
        .map(|(_, r)| (r - c).abs())
        .fold(0.0, f64::max);
    Ok(CEstimate { c, per_level_ratio, max_deviation })
}

/// Reduces per-level fits to one constant-parameter model: c from
/// [`estimate_c`], lambda and alpha as residual-weighted means over levels.
/// The per-level table is preserved for threshold-resolved Omega reports.
pub fn build_model_from_fits(fits: &[IsolineFit], s_min: f64) -> Result<FittedModel> {
    if fits.is_empty() {
        return Err(Error::InvalidParameter("no fits given".into()));
    }
    let c_estimate = if fits.len() == 1 {
        let f = &fits[0];
        if f.level <= 0.0 {
            return Err(Error::InvalidParameter(
                "single-fit c needs a positive level".into(),
            ));
        }
        CEstimate {
            c: f.g / f.level,
            per_level_ratio: vec![(f.level, f.g / f.level)],
            max_deviation: 0.0,
        }
    } else {
        estimate_c(fits)?
    };

    let g_scale = fits.iter().map(|f| f.g.abs()).fold(1.0, f64::max);
    let eps = (1e-9 * g_scale).powi(2);
    let mut wsum = 0.0;
    let mut lambda = 0.0;
    let mut alpha = 0.0;
    for f in fits {
        let w = 1.0 / (f.residual_rms * f.residual_rms + eps);
        wsum += w;
        lambda += w * f.lambda;
        alpha += w * f.alpha;
    }
    let model = AttenuationModel::new(c_estimate.c, lambda / wsum, alpha / wsum, s_min)?;
    Ok(FittedModel { model, c_estimate, per_level: fits.to_vec() })
}

/// Default extraction levels: `count` evenly spaced values between just
/// above the detection threshold and the 95th-percentile reading of the
/// taxel.
pub fn default_levels(dataset: &ScanDataset, taxel_index: usize, count: usize) -> Vec<f64> {
    let mut readings: Vec<f64> = dataset
        .rows
        .iter()
        .map(|r| r.readings[taxel_index])
        .filter(|s| s.is_finite())
        .collect();
    readings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let hi = readings[((readings.len() - 1) as f64 * 0.95) as usize];
    let lo = dataset.metadata.model.s_min;
    let n = count.max(1);
    (1..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect()
}

/// Extract, fit and reduce one taxel. `levels` defaults to
/// [`default_levels`] with 8 levels.
pub fn calibrate_taxel(
    dataset: &ScanDataset,
    taxel_index: usize,
    levels: Option<&[f64]>,
) -> Result<TaxelCalibration> {
    let default;
    let levels = match levels {
        Some(l) => l,
        None => {
            default = default_levels(dataset, taxel_index, 8);
            &default
        }
    };
    let samples = extract_isolines(dataset, taxel_index, levels)?;
    let fits: Vec<IsolineFit> = samples.iter().map(fit_isoline).collect::<Result<_>>()?;
    let c = build_model_from_fits(&fits, dataset.metadata.model.s_min)?
        .c_estimate
        .c;
    Ok(TaxelCalibration { taxel_index, c, levels: fits })
}

/// Calibrate every taxel of a dataset (independent per-taxel fits).
pub fn calibrate_all(dataset: &ScanDataset, level_count: usize) -> Result<Vec<TaxelCalibration>> {
    use rayon::prelude::*;
    (0..dataset.taxel_count())
        .into_par_iter()
        .map(|i| {
            let levels = default_levels(dataset, i, level_count);
            calibrate_taxel(dataset, i, Some(&levels))
        })
        .collect()
}
