//! Super-resolution factor computations and multi-contact discriminability.
//!
//! The super-resolution factor counts virtual taxels per real taxel: with a
//! localization uncertainty `sigma_p`, a virtual taxel is `2*sigma_p` wide,
//! so a stretch `D` covered by `n` real taxels resolves
//! `Omega = D / (n * 2 * sigma_p)` locations per taxel.

use serde::{Deserialize, Serialize};

use crate::calib::TaxelCalibration;
use crate::error::{Error, Result};
use crate::geometry::intersect_tvis_1d;
use crate::model::{mean_readings, AttenuationModel, ContactEvent, TaxelLayout};

/// Force sweep used when averaging per-taxel Omega over thresholds:
/// 0.02 N steps over 0.02 N to 1.5 N.
pub const DEFAULT_FORCE_SWEEP: (f64, f64, f64) = (0.02, 1.5, 0.02);

/// Positions closer than this to a true contact are not spurious (mm).
pub const SPURIOUS_MATCH_TOLERANCE_MM: f64 = 0.05;

/// How an Omega value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaMethod {
    /// Directly from a pairwise sigma_p.
    Pairwise,
    /// Closed form from the isoline slope at the worst point between a pair.
    Analytic1d,
    /// Closed form including a force-reference noise term.
    DualNoise,
    /// Area ratio of the sensing surface to the virtual taxel ellipse.
    Area2d,
    /// Measured from a trained regressor's errors.
    EmpiricalMl,
}

/// A super-resolution factor with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OmegaReport {
    pub omega: f64,
    pub method: OmegaMethod,
    /// Force range the value was averaged over, when applicable.
    pub force_range: Option<(f64, f64)>,
    /// Per-force-threshold curve `(force, omega)`, when computed.
    pub per_force_curve: Option<Vec<(f64, f64)>>,
}

/// `Omega = D / (n * 2 * sigma_p)`.
pub fn omega_pairwise(spacing: f64, n: usize, sigma_p: f64) -> Result<f64> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    if n < 1 {
        return Err(Error::InvalidParameter("taxel count must be >= 1".into()));
    }
    if !(sigma_p > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_p must be strictly positive (got {sigma_p}); a vanishing \
             uncertainty means unbounded super-resolution and is reported as \
             a flag by callers, not as a number"
        )));
    }
    Ok(spacing / (n as f64 * 2.0 * sigma_p))
}

/// Analytic Omega for a taxel pair, evaluated at the mid-gap contact point:
/// `Omega = D * lambda * alpha * (D/2)^(alpha-1) / (2 * 2 * sigma_S)` with
/// `sigma_S = c * sigma_s` in force units.
///
/// The midpoint is the worst contact position only for `alpha >= 2`;
/// `midpoint_worst_case` is false otherwise and the value is an estimate
/// rather than a lower bound of the pair's Omega profile.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OmegaAnalytic {
    pub omega: f64,
    pub midpoint_worst_case: bool,
}

pub fn omega_analytic_1d(
    model: &AttenuationModel,
    spacing: f64,
    sigma_s: f64,
) -> Result<OmegaAnalytic> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    if !(sigma_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_s must be strictly positive, got {sigma_s}"
        )));
    }
    let sigma_force = model.c * sigma_s;
    let omega = spacing * model.lambda * model.alpha * (spacing / 2.0).powf(model.alpha - 1.0)
        / (2.0 * 2.0 * sigma_force);
    Ok(OmegaAnalytic { omega, midpoint_worst_case: model.alpha >= 2.0 })
}

/// Analytic Omega for one sensor unit when both the taxel and the force
/// reference are noisy:
/// `Omega_i = D * lambda_i * alpha_i * (D/2)^(alpha_i-1) / (2 * 2 * (sigma_sf + c_i * sigma_si))`.
pub fn omega_dual_noise(
    lambda: f64,
    alpha: f64,
    c: f64,
    sigma_sf: f64,
    sigma_si: f64,
    spacing: f64,
) -> Result<f64> {
    for (name, v) in [
        ("lambda", lambda),
        ("alpha", alpha),
        ("c", c),
        ("spacing", spacing),
    ] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    if !(sigma_sf >= 0.0) || !(sigma_si >= 0.0) || sigma_sf + c * sigma_si <= 0.0 {
        return Err(Error::InvalidParameter(
            "combined noise sigma_sf + c*sigma_si must be positive".into(),
        ));
    }
    Ok(spacing * lambda * alpha * (spacing / 2.0).powf(alpha - 1.0)
        / (2.0 * 2.0 * (sigma_sf + c * sigma_si)))
}

/// Device-level Omega for a 1D sensor from per-taxel calibrations: for each
/// force threshold in the sweep, look up each taxel's fitted parameters at
/// the matching isoline level, compute its dual-noise Omega, average over
/// taxels, then average the per-threshold values over the range.
pub fn omega_device_1d(
    taxels: &[TaxelCalibration],
    sigma_sf: f64,
    sigma_si: f64,
    spacing: f64,
    sweep: (f64, f64, f64),
) -> Result<OmegaReport> {
    if taxels.is_empty() {
        return Err(Error::InvalidParameter("no taxel calibrations".into()));
    }
    let (lo, hi, step) = sweep;
    if !(step > 0.0) || !(hi >= lo) || !(lo > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad force sweep ({lo}, {hi}, {step})"
        )));
    }
    let mut curve = Vec::new();
    let mut threshold = lo;
    while threshold <= hi + 1e-12 {
        let mut acc = 0.0;
        for t in taxels {
            let level = t.level_params_for_force(threshold)?;
            acc += omega_dual_noise(level.lambda, level.alpha, t.c, sigma_sf, sigma_si, spacing)?;
        }
        curve.push((threshold, acc / taxels.len() as f64));
        threshold += step;
    }
    let omega = curve.iter().map(|(_, o)| o).sum::<f64>() / curve.len() as f64;
    Ok(OmegaReport {
        omega,
        method: OmegaMethod::DualNoise,
        force_range: Some((lo, hi)),
        per_force_curve: Some(curve),
    })
}

/// 2D Omega as an area ratio: `Omega = (A / (pi * sigma_px * sigma_py)) / n_real`.
pub fn omega_area_2d(area: f64, sigma_px: f64, sigma_py: f64, n_real: usize) -> Result<f64> {
    for (name, v) in [("area", area), ("sigma_px", sigma_px), ("sigma_py", sigma_py)] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    if n_real < 1 {
        return Err(Error::InvalidParameter("n_real must be >= 1".into()));
    }
    Ok(area / (std::f64::consts::PI * sigma_px * sigma_py) / n_real as f64)
}

/// Counts backing a rule-based discriminability verdict.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RuleBasis {
    /// Taxels strictly between the two contact positions.
    pub taxels_between: usize,
    /// Taxels activated by both contacts.
    pub shared_active: usize,
    /// Taxels activated by exactly one contact, per contact.
    pub clean_per_contact: [usize; 2],
}

/// Rule verdict and brute-force evidence for a two-contact configuration.
/// The two are recorded separately; disagreements are preserved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscriminabilityVerdict {
    pub discriminable: bool,
    pub rule_basis: RuleBasis,
    /// Spurious positions found by the brute-force check, when it ran.
    pub spurious_points: Vec<f64>,
    /// Brute-force verdict (`spurious_points.is_empty()`), when it ran.
    pub oracle_discriminable: Option<bool>,
}

fn activation_set(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    contact: &ContactEvent,
) -> Vec<bool> {
    (0..layout.len())
        .map(|i| model.activates(contact.force, layout.distance(i, contact.position)))
        .collect()
}

/// Rule-based check for whether two simultaneous 1D contacts can be told
/// apart.
///
/// Reading of the condition implemented here (the source statement is
/// ambiguous; the brute-force sweep in `spurious_intersections` is the
/// ground truth this rule is calibrated against):
/// - at least two taxels lie strictly between the contacts,
/// - at most one taxel is activated by both contacts, and
/// - each contact keeps at least two activated taxels of its own that the
///   other contact does not reach, so its triangulation pair is
///   uncontaminated.
pub fn discriminable_two_contacts_1d(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    contacts: (&ContactEvent, &ContactEvent),
) -> Result<DiscriminabilityVerdict> {
    if layout.dimensionality() != 1 {
        return Err(Error::DimensionMismatch(
            "two-contact rule applies to 1D layouts".into(),
        ));
    }
    let (a, b) = contacts;
    let (p_lo, p_hi) = if a.position[0] <= b.position[0] {
        (a.position[0], b.position[0])
    } else {
        (b.position[0], a.position[0])
    };
    let taxels_between = layout
        .xs()
        .iter()
        .filter(|&&x| x > p_lo && x < p_hi)
        .count();
    let act_a = activation_set(model, layout, a);
    let act_b = activation_set(model, layout, b);
    let shared_active = act_a
        .iter()
        .zip(&act_b)
        .filter(|(x, y)| **x && **y)
        .count();
    let clean_a = act_a
        .iter()
        .zip(&act_b)
        .filter(|(x, y)| **x && !**y)
        .count();
    let clean_b = act_a
        .iter()
        .zip(&act_b)
        .filter(|(x, y)| !**x && **y)
        .count();

    let discriminable =
        taxels_between >= 2 && shared_active <= 1 && clean_a >= 2 && clean_b >= 2;
    Ok(DiscriminabilityVerdict {
        discriminable,
        rule_basis: RuleBasis {
            taxels_between,
            shared_active,
            clean_per_contact: [clean_a, clean_b],
        },
        spurious_points: Vec::new(),
        oracle_discriminable: None,
    })
}

/// Brute-force spurious-contact oracle for up to three simultaneous 1D
/// contacts.
///
/// Combined noiseless readings are computed and candidate single-contact
/// hypotheses are taken from every pairwise isoline crossing of active
/// taxels. A candidate survives only if it over-predicts no reading by more
/// than `sigma_s` (under superposition one contact cannot contribute more
/// than the observed total). Every assignment of `contacts.len()` surviving
/// candidates whose summed predictions match all readings within `sigma_s`
/// is then collected; positions appearing in consistent assignments that
/// match no true contact within [`SPURIOUS_MATCH_TOLERANCE_MM`] are
/// spurious. When no assignment is consistent the pairwise triangulation
/// itself has failed (contaminated shared taxels shift every crossing), and
/// the surviving candidate positions stand as the erroneous detections.
/// An empty list means the configuration is discriminable.
pub fn spurious_intersections(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    contacts: &[ContactEvent],
    sigma_s: f64,
) -> Result<Vec<f64>> {
    if layout.dimensionality() != 1 {
        return Err(Error::DimensionMismatch(
            "spurious-intersection oracle applies to 1D layouts".into(),
        ));
    }
    if contacts.is_empty() {
        return Err(Error::InvalidParameter("no contacts given".into()));
    }
    if contacts.len() > 3 {
        return Err(Error::ComplexityLimit(format!(
            "oracle supports at most 3 contacts, got {}",
            contacts.len()
        )));
    }
    let readings = mean_readings(model, layout, contacts)?;
    let xs = layout.xs();
    let active: Vec<usize> = (0..layout.len())
        .filter(|&i| readings[i] >= model.s_min && readings[i] > 0.0)
        .collect();
    let band = sigma_s.max(1e-9 * readings.iter().fold(1.0_f64, |m, r| m.max(r.abs())));

    // Candidate single-contact hypotheses from pairwise isoline crossings,
    // pruned to those that do not over-predict any reading on their own.
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    let pad = 2.0 * layout.nominal_spacing();
    let (x_min, x_max) = (xs[0] - pad, xs[xs.len() - 1] + pad);
    for (ai, &i) in active.iter().enumerate() {
        for &j in active.iter().skip(ai + 1) {
            let roots = match intersect_tvis_1d(model, (xs[i], xs[j]), (readings[i], readings[j]))
            {
                Ok(r) => r,
                Err(Error::NoIntersection(_)) | Err(Error::UnboundedSolution(_)) => continue,
                Err(Error::InvalidParameter(_)) => continue,
                Err(e) => return Err(e),
            };
            for (p, f) in roots {
                if f <= 0.0 || p < x_min || p > x_max {
                    continue;
                }
                let plausible = (0..layout.len()).all(|k| {
                    model.response_unclamped(f, (p - xs[k]).abs()).max(0.0)
                        <= readings[k] + band
                });
                if plausible {
                    candidates.push((p, f));
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    candidates.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-7 && (a.1 - b.1).abs() < 1e-7);

    let n = contacts.len();
    let mut any_consistent = false;
    let mut consistent_positions: Vec<f64> = Vec::new();

    // Assignments: multisets of `n` candidates (a candidate may repeat,
    // covering near-coincident contacts).
    let m = candidates.len();
    let mut check = |assignment: &[usize]| {
        for (k, &s_obs) in readings.iter().enumerate() {
            let mut pred = 0.0;
            for &ci in assignment {
                let (p, f) = candidates[ci];
                pred += model.response_unclamped(f, (p - xs[k]).abs()).max(0.0);
            }
            if (pred - s_obs).abs() > band {
                return;
            }
        }
        any_consistent = true;
        for &ci in assignment {
            consistent_positions.push(candidates[ci].0);
        }
    };
    match n {
        1 => {
            for a in 0..m {
                check(&[a]);
            }
        }
        2 => {
            for a in 0..m {
                for b in a..m {
                    check(&[a, b]);
                }
            }
        }
        _ => {
            for a in 0..m {
                for b in a..m {
                    for c in b..m {
                        check(&[a, b, c]);
                    }
                }
            }
        }
    }
    if !any_consistent {
        // Reconstruction failure: report what the pairwise triangulation
        // would have detected.
        consistent_positions = candidates.iter().map(|c| c.0).collect();
    }

    let mut spurious: Vec<f64> = consistent_positions
        .into_iter()
        .filter(|p| {
            contacts
                .iter()
                .all(|c| (c.position[0] - p).abs() > SPURIOUS_MATCH_TOLERANCE_MM)
        })
        .collect();
    spurious.sort_by(|a, b| a.partial_cmp(b).unwrap());
    spurious.dedup_by(|a, b| (*a - *b).abs() <= SPURIOUS_MATCH_TOLERANCE_MM);
    Ok(spurious)
}

/// Rule verdict plus the brute-force evidence for the same configuration.
pub fn discriminability_report(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    contacts: (&ContactEvent, &ContactEvent),
    sigma_s: f64,
) -> Result<DiscriminabilityVerdict> {
    let mut verdict = discriminable_two_contacts_1d(model, layout, contacts)?;
    let spurious =
        spurious_intersections(model, layout, &[*contacts.0, *contacts.1], sigma_s)?;
    verdict.oracle_discriminable = Some(spurious.is_empty());
    verdict.spurious_points = spurious;
    Ok(verdict)
}

/// Largest triangle area spanned by any triple of the given points (mm^2).
fn max_triangle_area(points: &[[f64; 2]]) -> f64 {
    let mut best = 0.0_f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            for k in (j + 1)..points.len() {
                let [ax, ay] = points[i];
                let [bx, by] = points[j];
                let [cx, cy] = points[k];
                let area = 0.5 * ((bx - ax) * (cy - ay) - (cx - ax) * (by - ay)).abs();
                best = best.max(area);
            }
        }
    }
    best
}

/// Collinearity tolerance for 2D localizability (mm^2).
pub const COLLINEARITY_AREA_MM2: f64 = 1e-6;

/// Whether a single 2D contact is uniquely localizable: at least three
/// activated taxels that are not collinear (mirror symmetry about a line of
/// taxels leaves two positions indistinguishable).
pub fn localizable_2d(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    contact: &ContactEvent,
) -> Result<bool> {
    if layout.dimensionality() != 2 {
        return Err(Error::DimensionMismatch("localizable_2d needs a 2D layout".into()));
    }
    let active: Vec<[f64; 2]> = (0..layout.len())
        .filter(|&i| model.activates(contact.force, layout.distance(i, contact.position)))
        .map(|i| layout.position(i))
        .collect();
    Ok(active.len() >= 3 && max_triangle_area(&active) > COLLINEARITY_AREA_MM2)
}

/// Two-contact variant: at least six taxels must respond in total, and the
/// activated set must not be collinear.
pub fn localizable_two_2d(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    contacts: (&ContactEvent, &ContactEvent),
) -> Result<bool> {
    if layout.dimensionality() != 2 {
        return Err(Error::DimensionMismatch("localizable_two_2d needs a 2D layout".into()));
    }
    let act_a = activation_set(model, layout, contacts.0);
    let act_b = activation_set(model, layout, contacts.1);
    let active: Vec<[f64; 2]> = (0..layout.len())
        .filter(|&i| act_a[i] || act_b[i])
        .map(|i| layout.position(i))
        .collect();
    Ok(active.len() >= 6 && max_triangle_area(&active) > COLLINEARITY_AREA_MM2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{approx_sigma_p, corner_uncertainty};
    use approx::assert_relative_eq;

    fn model(c: f64, lambda: f64, alpha: f64, s_min: f64) -> AttenuationModel {
        AttenuationModel::new(c, lambda, alpha, s_min).unwrap()
    }

    #[test]
    fn omega_pairwise_examples() {
        assert_relative_eq!(omega_pairwise(1.0, 2, 0.05).unwrap(), 5.0);
        assert_relative_eq!(omega_pairwise(6.5, 2, 6.5 / 4.0).unwrap(), 1.0);
        assert!(omega_pairwise(1.0, 2, 0.0).is_err());
    }

    #[test]
    fn omega_pairwise_chains_with_corner_example() {
        let m = model(1.0, 1.0, 2.0, 0.0);
        let est = corner_uncertainty(&m, (0.0, 2.0), (1.0, 1.0), 0.1).unwrap();
        assert_relative_eq!(
            omega_pairwise(2.0, 2, est.sigma_p).unwrap(),
            10.0,
            max_relative = 1e-5
        );
    }

    #[test]
    fn omega_analytic_examples() {
        let m = model(1.0, 1.0, 2.0, 0.0);
        let a = omega_analytic_1d(&m, 1.0, 0.1).unwrap();
        assert_relative_eq!(a.omega, 2.5);
        assert!(a.midpoint_worst_case);

        let b = omega_analytic_1d(&m, 2.0, 0.1).unwrap();
        assert_relative_eq!(b.omega, 10.0);

        // Doubling lambda doubles Omega; doubling D quadruples it at alpha=2.
        let m2 = model(1.0, 2.0, 2.0, 0.0);
        assert_relative_eq!(omega_analytic_1d(&m2, 1.0, 0.1).unwrap().omega, 5.0);
        let sub = omega_analytic_1d(&model(1.0, 1.0, 1.5, 0.0), 1.0, 0.1).unwrap();
        assert!(!sub.midpoint_worst_case);
    }

    #[test]
    fn omega_dual_noise_examples() {
        // sigma_sf = 0 reduces to the single-noise analytic value.
        let m = model(1.0, 1.0, 2.0, 0.0);
        let a = omega_analytic_1d(&m, 2.0, 0.1).unwrap().omega;
        let b = omega_dual_noise(1.0, 2.0, 1.0, 0.0, 0.1, 2.0).unwrap();
        assert_relative_eq!(a, b);

        let v = omega_dual_noise(1.0, 2.0, 1.0, 0.05, 0.05, 6.5).unwrap();
        assert_relative_eq!(v, 105.625, max_relative = 1e-12);

        let half = omega_dual_noise(1.0, 2.0, 1.0, 0.1, 0.1, 6.5).unwrap();
        assert_relative_eq!(half, v / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn omega_area_examples() {
        let v = omega_area_2d(26.0 * 26.0, 0.085, 0.085, 25).unwrap();
        assert!((v - 1191.0).abs() < 1.0, "got {v}");

        let a: f64 = 100.0;
        let n = 4;
        let s = (a / (std::f64::consts::PI * n as f64)).sqrt();
        assert_relative_eq!(omega_area_2d(a, s, s, n).unwrap(), 1.0, max_relative = 1e-12);

        let q = omega_area_2d(a, s / 2.0, s / 2.0, n).unwrap();
        assert_relative_eq!(q, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn omega_chain_identity() {
        // Pairwise Omega through the mid-gap slope approximation reproduces
        // the analytic closed form exactly.
        let m = model(1.0, 0.7, 2.6, 0.0);
        let spacing = 3.0;
        let sigma = 0.02;
        let sp = approx_sigma_p(&m, spacing, spacing / 2.0, sigma).unwrap();
        let via_pairwise = omega_pairwise(spacing, 2, sp).unwrap();
        let direct = omega_analytic_1d(&m, spacing, sigma).unwrap().omega;
        assert_relative_eq!(via_pairwise, direct, max_relative = 1e-13);
    }

    fn line6() -> TaxelLayout {
        TaxelLayout::line((0..6).map(|i| i as f64 * 6.5).collect()).unwrap()
    }

    #[test]
    fn discriminable_far_contacts() {
        // Footprint radius sqrt(F/lambda) = 4.7 mm: each contact reaches
        // exactly its two bracketing taxels.
        let m = model(1.0, 0.09, 2.0, 0.0);
        let layout = line6();
        let a = ContactEvent::at_1d(3.0, 2.0).unwrap();
        let b = ContactEvent::at_1d(29.0, 2.0).unwrap();
        let v = discriminable_two_contacts_1d(&m, &layout, (&a, &b)).unwrap();
        assert!(v.discriminable, "{:?}", v.rule_basis);
        assert!(v.rule_basis.taxels_between >= 2);
        assert_eq!(v.rule_basis.shared_active, 0);
    }

    #[test]
    fn not_discriminable_when_sharing_a_needed_taxel() {
        let m = model(1.0, 0.02, 2.0, 0.0);
        let layout = line6();
        // Close contacts: footprints overlap on the taxels between them.
        let a = ContactEvent::at_1d(8.0, 2.0).unwrap();
        let b = ContactEvent::at_1d(18.0, 2.0).unwrap();
        let v = discriminable_two_contacts_1d(&m, &layout, (&a, &b)).unwrap();
        assert!(!v.discriminable, "{:?}", v.rule_basis);
        assert!(v.rule_basis.shared_active >= 1);
    }

    #[test]
    fn identical_contacts_not_discriminable() {
        let m = model(1.0, 0.05, 2.0, 0.0);
        let layout = line6();
        let a = ContactEvent::at_1d(10.0, 1.0).unwrap();
        let v = discriminable_two_contacts_1d(&m, &layout, (&a, &a)).unwrap();
        assert!(!v.discriminable);
        assert_eq!(v.rule_basis.taxels_between, 0);
    }

    #[test]
    fn oracle_single_contact_clean() {
        let m = model(1.0, 0.09, 2.0, 0.0);
        let layout = line6();
        let c = ContactEvent::at_1d(9.0, 2.0).unwrap();
        let spurious = spurious_intersections(&m, &layout, &[c], 1e-6).unwrap();
        assert!(spurious.is_empty(), "{spurious:?}");
    }

    #[test]
    fn oracle_far_pair_clean_close_pair_spurious() {
        let m = model(1.0, 0.09, 2.0, 0.0);
        let layout = line6();
        let far = [
            ContactEvent::at_1d(3.0, 2.0).unwrap(),
            ContactEvent::at_1d(29.0, 2.0).unwrap(),
        ];
        let s = spurious_intersections(&m, &layout, &far, 1e-6).unwrap();
        assert!(s.is_empty(), "{s:?}");

        // Contacts sharing taxels: combined readings shift the pairwise
        // crossings away from the true positions.
        let close = [
            ContactEvent::at_1d(11.0, 2.0).unwrap(),
            ContactEvent::at_1d(15.0, 2.0).unwrap(),
        ];
        let s = spurious_intersections(&m, &layout, &close, 1e-3).unwrap();
        assert!(!s.is_empty());
    }

    #[test]
    fn oracle_rejects_too_many_contacts() {
        let m = model(1.0, 0.09, 2.0, 0.0);
        let layout = line6();
        let c = ContactEvent::at_1d(9.0, 2.0).unwrap();
        let err = spurious_intersections(&m, &layout, &[c; 4], 1e-6).unwrap_err();
        assert!(matches!(err, Error::ComplexityLimit(_)));
    }

    #[test]
    fn localizable_2d_cases() {
        let m = model(1.0, 1.0, 2.0, 0.0);
        // Triangle of taxels.
        let tri = TaxelLayout::plane(vec![[0.0, 0.0], [4.0, 0.0], [2.0, 3.0]]).unwrap();
        let centroid = ContactEvent::at_2d(2.0, 1.0, 30.0).unwrap();
        assert!(localizable_2d(&m, &tri, &centroid).unwrap());

        // Weak contact reaching only two taxels.
        let weak = ContactEvent::at_2d(2.0, 0.0, 4.5).unwrap();
        assert!(!localizable_2d(&m, &tri, &weak).unwrap());

        // Three collinear active taxels.
        let row = TaxelLayout::plane(vec![[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]]).unwrap();
        let strong = ContactEvent::at_2d(2.0, 0.0, 50.0).unwrap();
        assert!(!localizable_2d(&m, &row, &strong).unwrap());
    }

    #[test]
    fn localizable_two_2d_needs_six() {
        let m = model(1.0, 1.0, 2.0, 0.0);
        let grid = TaxelLayout::plane(
            (0..3)
                .flat_map(|i| (0..2).map(move |j| [i as f64 * 3.0, j as f64 * 3.0]))
                .collect(),
        )
        .unwrap();
        let a = ContactEvent::at_2d(1.0, 1.5, 100.0).unwrap();
        let b = ContactEvent::at_2d(5.0, 1.5, 100.0).unwrap();
        assert!(localizable_two_2d(&m, &grid, (&a, &b)).unwrap());

        let weak_a = ContactEvent::at_2d(1.0, 1.5, 5.0).unwrap();
        let weak_b = ContactEvent::at_2d(5.0, 1.5, 5.0).unwrap();
        assert!(!localizable_two_2d(&m, &grid, (&weak_a, &weak_b)).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(512))]

            /// omega_pairwise(approx_sigma_p at D/2) == omega_analytic_1d exactly.
            #[test]
            fn omega_chain_exact(
                lambda in 0.01f64..10.0,
                alpha in 2.0f64..5.0,
                spacing in 0.1f64..20.0,
                sigma in 1e-4f64..0.5,
                c in 0.1f64..5.0,
            ) {
                let m = AttenuationModel::new(c, lambda, alpha, 0.0).unwrap();
                let sp = approx_sigma_p(&m, spacing, spacing / 2.0, sigma).unwrap();
                let via = omega_pairwise(spacing, 2, sp).unwrap();
                let direct = omega_analytic_1d(&m, spacing, sigma).unwrap().omega;
                let rel = (via - direct).abs() / direct;
                prop_assert!(rel < 1e-12, "rel = {rel}");
            }

            /// Omega grows with lambda and D (D >= 2), falls with sigma.
            #[test]
            fn omega_monotonicity(
                lambda in 0.01f64..5.0,
                alpha in 2.0f64..4.0,
                spacing in 2.0f64..10.0,
                sigma in 1e-3f64..0.2,
            ) {
                let base = omega_analytic_1d(
                    &AttenuationModel::new(1.0, lambda, alpha, 0.0).unwrap(), spacing, sigma,
                ).unwrap().omega;
                let more_lambda = omega_analytic_1d(
                    &AttenuationModel::new(1.0, lambda * 1.5, alpha, 0.0).unwrap(), spacing, sigma,
                ).unwrap().omega;
                let more_alpha = omega_analytic_1d(
                    &AttenuationModel::new(1.0, lambda, alpha + 0.5, 0.0).unwrap(), spacing, sigma,
                ).unwrap().omega;
                let more_spacing = omega_analytic_1d(
                    &AttenuationModel::new(1.0, lambda, alpha, 0.0).unwrap(), spacing * 1.5, sigma,
                ).unwrap().omega;
                let more_sigma = omega_analytic_1d(
                    &AttenuationModel::new(1.0, lambda, alpha, 0.0).unwrap(), spacing, sigma * 2.0,
                ).unwrap().omega;
                prop_assert!(more_lambda >= base);
                prop_assert!(more_alpha >= base);
                prop_assert!(more_spacing >= base);
                prop_assert!(more_sigma < base);
            }
        }
    }
}
