//! Isoline intersection geometry.
//!
//! Two taxels reading `S1` and `S2` constrain a single contact to the
//! crossing of their isolines `c*S1 + lambda*|p - x1|^alpha` and
//! `c*S2 + lambda*|p - x2|^alpha`. Measurement noise widens each isoline
//! into a band of half-height `c*sigma_s`; the band intersection is the set
//! of (position, force) hypotheses consistent with the readings. Its extent
//! gives the localization uncertainty `sigma_p` and force uncertainty
//! `sigma_f`. With more than two taxels the region is the intersection of
//! all bands and shrinks accordingly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttenuationModel, ContactEvent, NoiseModel, TaxelLayout};

/// Position tolerance of the bisection root finder (mm).
pub const ROOT_TOLERANCE_MM: f64 = 1e-9;

/// Search cap: isoline crossings farther than this from the taxel pair are
/// treated as absent (relevant only for sub-linear attenuation with nearly
/// matched readings, where the outside crossing recedes to infinity).
const SEARCH_CAP_MM: f64 = 1e9;

/// How a band intersection is shaped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntersectionKind {
    /// Contact between the taxel pair; bounded on all sides.
    BetweenPair,
    /// Contact outside the pair; bounded, but force error grows with distance.
    OutsidePair,
    /// Three or more active taxels constrain the region.
    MultiTaxel,
    /// The region escapes the search domain; the affected sigma is infinite.
    Unbounded,
    /// Several disjoint regions are consistent with the readings.
    Ambiguous,
}

/// Uncertainty of a localized contact at one query point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertaintyEstimate {
    /// Estimated contact position (mm); `[x, 0]` in 1D.
    pub position: [f64; 2],
    /// Estimated contact force (N).
    pub force: f64,
    /// Position uncertainty along x (mm). Infinite when unbounded.
    pub sigma_p: f64,
    /// Position uncertainty along y (mm); present for 2D layouts only.
    pub sigma_py: Option<f64>,
    /// Force uncertainty (N). Infinite when unbounded.
    pub sigma_f: f64,
    pub kind: IntersectionKind,
    /// Number of disjoint consistent regions (>= 1 when any solution exists).
    pub region_count: usize,
}

/// Difference of the two isoline forces at position `p`.
#[inline]
fn curve_gap(model: &AttenuationModel, x1: f64, g1: f64, x2: f64, g2: f64, p: f64) -> f64 {
    model.tvi_force_raw(g1, (p - x1).abs()) - model.tvi_force_raw(g2, (p - x2).abs())
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    for _ in 0..220 {
        if hi - lo <= ROOT_TOLERANCE_MM {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All crossings of two isolines given by force intercepts `g1`, `g2` at
/// centers `x1 < x2`. Returns positions sorted ascending; empty when the
/// curves never meet. Errors with [`Error::UnboundedSolution`] when the
/// curves coincide along a half-line (linear attenuation degenerate case).
fn intersect_raw(
    model: &AttenuationModel,
    x1: f64,
    g1: f64,
    x2: f64,
    g2: f64,
) -> Result<Vec<(f64, f64)>> {
    debug_assert!(x1 < x2);
    let span = x2 - x1;
    let alpha = model.alpha;
    let delta_g = g1 - g2;
    let scale = g1
        .abs()
        .max(g2.abs())
        .max(model.lambda * span.powf(alpha))
        .max(1.0);
    let tol = 1e-12 * scale;
    let h = |p: f64| curve_gap(model, x1, g1, x2, g2, p);

    let h1 = h(x1);
    let h2 = h(x2);
    let mut roots: Vec<f64> = Vec::new();

    if h1.abs() <= tol {
        roots.push(x1);
    }
    if h2.abs() <= tol {
        roots.push(x2);
    }
    // Between the taxels the gap is strictly increasing for every alpha > 0.
    if h1 < -tol && h2 > tol {
        roots.push(bisect(h, x1, x2, h1));
    }

    if (alpha - 1.0).abs() < 1e-12 {
        // Linear attenuation: the gap is constant on each outside half-line.
        if h1.abs() <= tol || h2.abs() <= tol {
            return Err(Error::UnboundedSolution(
                "isolines coincide along a half-line for alpha = 1".into(),
            ));
        }
    } else {
        let cap = SEARCH_CAP_MM.max(1e3 * span);
        // Left of the pair the gap is monotone in p: increasing toward x1 for
        // alpha > 1 (limit -inf), decreasing toward x1 for alpha < 1 (limit
        // delta_g).
        let left_needed = if alpha > 1.0 {
            h1 > tol
        } else {
            h1 < -tol && delta_g > tol
        };
        if left_needed {
            let mut w = 4.0 * span.max(1.0);
            loop {
                let lo = x1 - w;
                let v = h(lo);
                if (v > 0.0) != (h1 > 0.0) && v != 0.0 {
                    roots.push(bisect(&h, lo, x1, v));
                    break;
                }
                w *= 2.0;
                if w > cap {
                    break;
                }
            }
        }
        // Right of the pair, mirrored.
        let right_needed = if alpha > 1.0 {
            h2 < -tol
        } else {
            h2 > tol && delta_g < -tol
        };
        if right_needed {
            let mut w = 4.0 * span.max(1.0);
            loop {
                let hi = x2 + w;
                let v = h(hi);
                if (v > 0.0) != (h2 > 0.0) && v != 0.0 {
                    roots.push(bisect(&h, x2, hi, h2));
                    break;
                }
                w *= 2.0;
                if w > cap {
                    break;
                }
            }
        }
    }

    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 10.0 * ROOT_TOLERANCE_MM);
    Ok(roots
        .into_iter()
        .map(|p| {
            let f1 = model.tvi_force_raw(g1, (p - x1).abs());
            let f2 = model.tvi_force_raw(g2, (p - x2).abs());
            (p, 0.5 * (f1 + f2))
        })
        .collect())
}

/// Crossings of the isolines of two taxel readings: every `(position, force)`
/// at which both mean readings would be observed.
///
/// At most one crossing exists for `alpha >= 1`; for `alpha < 1` a second
/// crossing can appear outside the pair, and near-equal readings additionally
/// produce unbounded outside regions once noise bands are considered (see
/// [`feasible_region`], which reports those as extra components).
pub fn intersect_tvis_1d(
    model: &AttenuationModel,
    taxel_positions: (f64, f64),
    readings: (f64, f64),
) -> Result<Vec<(f64, f64)>> {
    let (mut x1, mut x2) = taxel_positions;
    let (mut s1, mut s2) = readings;
    if s1 < model.s_min || s2 < model.s_min {
        return Err(Error::InvalidParameter(format!(
            "readings ({s1}, {s2}) below detection threshold {}",
            model.s_min
        )));
    }
    if x1 == x2 {
        return Err(Error::InvalidParameter("taxel positions must differ".into()));
    }
    if x1 > x2 {
        std::mem::swap(&mut x1, &mut x2);
        std::mem::swap(&mut s1, &mut s2);
    }
    let roots = intersect_raw(model, x1, model.c * s1, x2, model.c * s2)?;
    if roots.is_empty() {
        return Err(Error::NoIntersection(format!(
            "isolines for readings ({s1}, {s2}) never meet"
        )));
    }
    Ok(roots)
}

/// Exact two-taxel uncertainty from the four crossings of the noise-offset
/// isoline band boundaries.
///
/// Each isoline is shifted by `+-c*sigma_s` in force; the four pairwise
/// crossings of the shifted curves bound the consistent region, and the
/// half-extents of their bounding box give `sigma_p` and `sigma_f`.
pub fn corner_uncertainty(
    model: &AttenuationModel,
    taxel_positions: (f64, f64),
    readings: (f64, f64),
    sigma_s: f64,
) -> Result<UncertaintyEstimate> {
    if !(sigma_s >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_s must be non-negative, got {sigma_s}"
        )));
    }
    let base = intersect_tvis_1d(model, taxel_positions, readings)?;
    let (mut x1, mut x2) = taxel_positions;
    let (mut s1, mut s2) = readings;
    if x1 > x2 {
        std::mem::swap(&mut x1, &mut x2);
        std::mem::swap(&mut s1, &mut s2);
    }

    let primary = *base
        .iter()
        .find(|(p, _)| *p > x1 && *p < x2)
        .unwrap_or_else(|| {
            let mid = 0.5 * (x1 + x2);
            base.iter()
                .min_by(|a, b| (a.0 - mid).abs().partial_cmp(&(b.0 - mid).abs()).unwrap())
                .unwrap()
        });
    let kind = if base.len() > 1 {
        IntersectionKind::Ambiguous
    } else if primary.0 > x1 && primary.0 < x2 {
        IntersectionKind::BetweenPair
    } else {
        IntersectionKind::OutsidePair
    };

    let unbounded = |kind_hint: IntersectionKind| UncertaintyEstimate {
        position: [primary.0, 0.0],
        force: primary.1,
        sigma_p: f64::INFINITY,
        sigma_py: None,
        sigma_f: f64::INFINITY,
        kind: kind_hint,
        region_count: base.len(),
    };

    let offset = model.c * sigma_s;
    let mut p_min = f64::INFINITY;
    let mut p_max = f64::NEG_INFINITY;
    let mut f_min = f64::INFINITY;
    let mut f_max = f64::NEG_INFINITY;
    for (o1, o2) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let g1 = model.c * s1 + o1 * offset;
        let g2 = model.c * s2 + o2 * offset;
        let corners = match intersect_raw(model, x1, g1, x2, g2) {
            Ok(c) => c,
            Err(Error::UnboundedSolution(_)) => return Ok(unbounded(IntersectionKind::Unbounded)),
            Err(e) => return Err(e),
        };
        let Some(&(p, f)) = corners.iter().min_by(|a, b| {
            (a.0 - primary.0)
                .abs()
                .partial_cmp(&(b.0 - primary.0).abs())
                .unwrap()
        }) else {
            return Ok(unbounded(IntersectionKind::Unbounded));
        };
        p_min = p_min.min(p);
        p_max = p_max.max(p);
        f_min = f_min.min(f);
        f_max = f_max.max(f);
    }

    Ok(UncertaintyEstimate {
        position: [primary.0, 0.0],
        force: primary.1,
        sigma_p: 0.5 * (p_max - p_min),
        sigma_py: None,
        sigma_f: 0.5 * (f_max - f_min),
        kind,
        region_count: base.len(),
    })
}

/// First-order (parallelogram) approximation of the position uncertainty
/// between a taxel pair at spacing `spacing`, from the isoline slopes at the
/// contact: `sigma_p = 2*c*sigma_s / (m1 + m2)` with
/// `m_i = lambda*alpha*d_i^(alpha-1)`.
pub fn approx_sigma_p(
    model: &AttenuationModel,
    spacing: f64,
    d: f64,
    sigma_s: f64,
) -> Result<f64> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    if !(d > 0.0 && d < spacing) {
        return Err(Error::InvalidParameter(format!(
            "d = {d} outside the between-taxel range (0, {spacing})"
        )));
    }
    if !(sigma_s >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_s must be non-negative, got {sigma_s}"
        )));
    }
    let m1 = model.lambda * model.alpha * d.powf(model.alpha - 1.0);
    let m2 = model.lambda * model.alpha * (spacing - d).powf(model.alpha - 1.0);
    if m1 + m2 == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * model.c * sigma_s / (m1 + m2))
}

/// Default position resolution for [`feasible_region`]: fine enough to
/// resolve the expected sigma_p with about five cells.
pub fn default_resolution(model: &AttenuationModel, spacing: f64, sigma_s: f64) -> f64 {
    let a = spacing / 200.0;
    let b = sigma_s * model.c / (5.0 * model.lambda * spacing);
    a.min(b).clamp(1e-4, 0.1)
}

/// One cell of a feasible region (position cell with its exact force range).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FeasibleCell {
    pub x: f64,
    pub y: f64,
    pub force_lo: f64,
    pub force_hi: f64,
}

/// A connected component of the feasible set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionComponent {
    /// Bounding-box center of the component, position part.
    pub center: [f64; 2],
    pub force_center: f64,
    /// Bounding-box half extents per position axis.
    pub half_extent: [f64; 2],
    pub force_half_extent: f64,
    pub cells: usize,
    /// Per-axis flags: the component reaches the edge of the search domain
    /// along x / along y.
    pub touches: [bool; 2],
}

impl RegionComponent {
    pub fn touches_boundary(&self) -> bool {
        self.touches[0] || self.touches[1]
    }
}

/// Feasible set of (position, force) hypotheses for a reading vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub estimate: UncertaintyEstimate,
    pub components: Vec<RegionComponent>,
    pub cells: Vec<FeasibleCell>,
    pub resolution: f64,
}

/// Feasible force interval at one position for one active taxel, taking the
/// zero clamp of the forward response into account. Always a single interval.
#[inline]
fn force_interval(
    model: &AttenuationModel,
    reading: f64,
    band: f64,
    distance: f64,
) -> (f64, f64) {
    let att = model.lambda * distance.powf(model.alpha);
    if reading > band {
        (att + model.c * (reading - band), att + model.c * (reading + band))
    } else {
        // A clamped (zero) response already lies within the band.
        (0.0, att + model.c * (reading + band))
    }
}

struct ColumnScan {
    /// Per-cell feasible force interval, `None` when empty.
    intervals: Vec<Option<(f64, f64)>>,
}

fn scan_columns(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    active: &[(usize, f64)],
    band: f64,
    points: &[[f64; 2]],
) -> ColumnScan {
    let intervals = points
        .par_iter()
        .map(|&p| {
            let mut lo = 0.0_f64;
            let mut hi = f64::INFINITY;
            for &(i, s) in active {
                let (l, h) = force_interval(model, s, band, layout.distance(i, p));
                lo = lo.max(l);
                hi = hi.min(h);
                if lo > hi {
                    return None;
                }
            }
            Some((lo, hi))
        })
        .collect();
    ColumnScan { intervals }
}

/// Signed feasibility margin at a position: `<= 0` iff some force is
/// consistent with every active reading there.
fn feasibility_gap(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    active: &[(usize, f64)],
    band: f64,
    p: [f64; 2],
) -> f64 {
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    for &(i, s) in active {
        let (l, h) = force_interval(model, s, band, layout.distance(i, p));
        lo = lo.max(l);
        hi = hi.min(h);
    }
    lo - hi
}

/// Set of (position, force) hypotheses whose predicted reading at every
/// active taxel lies within `sigma_s` of the observed one.
///
/// Position space is sampled on a grid of step `resolution`; the consistent
/// force range at each position is a single closed interval and is computed
/// exactly, so the force axis carries no discretization error. Since every
/// position cross-section is one interval, connected components are exactly
/// the position-connected runs of feasible cells. In 1D the run endpoints
/// are additionally refined by bisection, making the reported extents
/// resolution-independent; 2D extents are cell-quantized. Reported sigmas
/// are the half-extents of the bounding box over all components; a
/// component that reaches the search-domain edge makes the affected
/// position sigma infinite. The search domain pads the layout bounding box
/// by twice the nominal spacing.
pub fn feasible_region(
    model: &AttenuationModel,
    noise: &NoiseModel,
    layout: &TaxelLayout,
    readings: &[f64],
    resolution: f64,
) -> Result<FeasibleRegion> {
    if readings.len() != layout.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} readings for {} taxels",
            readings.len(),
            layout.len()
        )));
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let active: Vec<(usize, f64)> = readings
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > model.s_min)
        .map(|(i, &s)| (i, s))
        .collect();
    if active.is_empty() {
        return Err(Error::InvalidParameter(
            "no reading above the detection threshold".into(),
        ));
    }
    let band = noise.sigma_s.max(1e-9);
    let (lo_box, hi_box) = layout.bounding_box();
    let pad = 2.0 * layout.nominal_spacing().max(resolution * 10.0);

    if layout.dimensionality() == 1 {
        let x_lo = lo_box[0] - pad;
        let x_hi = hi_box[0] + pad;
        let ncols = ((x_hi - x_lo) / resolution).ceil().max(1.0) as usize;
        if ncols > 20_000_000 {
            return Err(Error::InvalidParameter(format!(
                "resolution {resolution} produces {ncols} cells"
            )));
        }
        let points: Vec<[f64; 2]> = (0..ncols)
            .map(|i| [x_lo + (i as f64 + 0.5) * resolution, 0.0])
            .collect();
        let scan = scan_columns(model, layout, &active, band, &points);

        // Components: maximal runs of feasible columns, endpoints refined by
        // bisecting the feasibility margin between the edge cell and its
        // infeasible neighbor.
        let gap_at = |x: f64| feasibility_gap(model, layout, &active, band, [x, 0.0]);
        let refine_edge = |feasible_x: f64, infeasible_x: f64| -> f64 {
            let mut a = feasible_x;
            let mut b = infeasible_x;
            for _ in 0..40 {
                let mid = 0.5 * (a + b);
                if gap_at(mid) <= 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        };

        let mut components: Vec<RegionComponent> = Vec::new();
        let mut cells: Vec<FeasibleCell> = Vec::new();
        let mut run: Option<(usize, usize, f64, f64)> = None; // (first, last, f_lo, f_hi)
        let mut flush = |r: &mut Option<(usize, usize, f64, f64)>,
                         components: &mut Vec<RegionComponent>| {
            if let Some((first, last, mut f_lo, mut f_hi)) = r.take() {
                let touches_left = first == 0;
                let touches_right = last == ncols - 1;
                let p_lo = if touches_left {
                    x_lo
                } else {
                    refine_edge(points[first][0], points[first - 1][0])
                };
                let p_hi = if touches_right {
                    x_hi
                } else {
                    refine_edge(points[last][0], points[last + 1][0])
                };
                // The force envelope peaks between cell centers; subsample
                // it over the refined run so sigma_f converges with the
                // position extents.
                let subs = ((last - first + 1) * 16).clamp(16, 4096);
                for t in 0..=subs {
                    let x = p_lo + (p_hi - p_lo) * t as f64 / subs as f64;
                    let mut lo = 0.0_f64;
                    let mut hi = f64::INFINITY;
                    for &(i, s) in &active {
                        let (l, h) = force_interval(model, s, band, layout.distance(i, [x, 0.0]));
                        lo = lo.max(l);
                        hi = hi.min(h);
                    }
                    if lo <= hi {
                        f_lo = f_lo.min(lo);
                        f_hi = f_hi.max(hi);
                    }
                }
                components.push(RegionComponent {
                    center: [0.5 * (p_lo + p_hi), 0.0],
                    force_center: 0.5 * (f_lo + f_hi),
                    half_extent: [0.5 * (p_hi - p_lo), 0.0],
                    force_half_extent: 0.5 * (f_hi - f_lo),
                    cells: last - first + 1,
                    touches: [touches_left || touches_right, false],
                });
            }
        };
        for (i, iv) in scan.intervals.iter().enumerate() {
            match iv {
                Some(cur) => {
                    cells.push(FeasibleCell {
                        x: points[i][0],
                        y: 0.0,
                        force_lo: cur.0,
                        force_hi: cur.1,
                    });
                    match &mut run {
                        Some(r) => {
                            r.1 = i;
                            r.2 = r.2.min(cur.0);
                            r.3 = r.3.max(cur.1);
                        }
                        None => run = Some((i, i, cur.0, cur.1)),
                    }
                }
                None => flush(&mut run, &mut components),
            }
        }
        flush(&mut run, &mut components);

        if components.is_empty() {
            return Err(Error::EmptyRegion(
                "readings are mutually inconsistent beyond the noise band".into(),
            ));
        }
        let estimate = summarize(&components, &active, layout, false);
        Ok(FeasibleRegion { estimate, components, cells, resolution })
    } else {
        let x_lo = lo_box[0] - pad;
        let x_hi = hi_box[0] + pad;
        let y_lo = lo_box[1] - pad;
        let y_hi = hi_box[1] + pad;
        let nx = ((x_hi - x_lo) / resolution).ceil().max(1.0) as usize;
        let ny = ((y_hi - y_lo) / resolution).ceil().max(1.0) as usize;
        if nx.saturating_mul(ny) > 40_000_000 {
            return Err(Error::InvalidParameter(format!(
                "resolution {resolution} produces {nx}x{ny} cells"
            )));
        }
        let points: Vec<[f64; 2]> = (0..nx * ny)
            .map(|k| {
                let ix = k % nx;
                let iy = k / nx;
                [
                    x_lo + (ix as f64 + 0.5) * resolution,
                    y_lo + (iy as f64 + 0.5) * resolution,
                ]
            })
            .collect();
        let scan = scan_columns(model, layout, &active, band, &points);

        // Connected components by 4-neighborhood; the force cross-section is
        // a single interval per cell, so position adjacency is enough.
        let mut label = vec![usize::MAX; nx * ny];
        let mut components: Vec<RegionComponent> = Vec::new();
        let mut cells: Vec<FeasibleCell> = Vec::new();
        for (k, iv) in scan.intervals.iter().enumerate() {
            if let Some(cur) = iv {
                cells.push(FeasibleCell {
                    x: points[k][0],
                    y: points[k][1],
                    force_lo: cur.0,
                    force_hi: cur.1,
                });
            }
            if iv.is_none() || label[k] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut stack = vec![k];
            label[k] = id;
            let mut min_ix = usize::MAX;
            let mut max_ix = 0usize;
            let mut min_iy = usize::MAX;
            let mut max_iy = 0usize;
            let mut f_lo = f64::INFINITY;
            let mut f_hi = f64::NEG_INFINITY;
            let mut count = 0usize;
            while let Some(c) = stack.pop() {
                let cur = scan.intervals[c].unwrap();
                let ix = c % nx;
                let iy = c / nx;
                min_ix = min_ix.min(ix);
                max_ix = max_ix.max(ix);
                min_iy = min_iy.min(iy);
                max_iy = max_iy.max(iy);
                f_lo = f_lo.min(cur.0);
                f_hi = f_hi.max(cur.1);
                count += 1;
                let mut push = |n: usize| {
                    if label[n] == usize::MAX && scan.intervals[n].is_some() {
                        label[n] = id;
                        stack.push(n);
                    }
                };
                if ix > 0 {
                    push(c - 1);
                }
                if ix + 1 < nx {
                    push(c + 1);
                }
                if iy > 0 {
                    push(c - nx);
                }
                if iy + 1 < ny {
                    push(c + nx);
                }
            }
            let p_x_lo = x_lo + min_ix as f64 * resolution;
            let p_x_hi = x_lo + (max_ix + 1) as f64 * resolution;
            let p_y_lo = y_lo + min_iy as f64 * resolution;
            let p_y_hi = y_lo + (max_iy + 1) as f64 * resolution;
            components.push(RegionComponent {
                center: [0.5 * (p_x_lo + p_x_hi), 0.5 * (p_y_lo + p_y_hi)],
                force_center: 0.5 * (f_lo + f_hi),
                half_extent: [0.5 * (p_x_hi - p_x_lo), 0.5 * (p_y_hi - p_y_lo)],
                force_half_extent: 0.5 * (f_hi - f_lo),
                cells: count,
                touches: [min_ix == 0 || max_ix == nx - 1, min_iy == 0 || max_iy == ny - 1],
            });
        }

        if components.is_empty() {
            return Err(Error::EmptyRegion(
                "readings are mutually inconsistent beyond the noise band".into(),
            ));
        }
        let estimate = summarize(&components, &active, layout, true);
        Ok(FeasibleRegion { estimate, components, cells, resolution })
    }
}

fn summarize(
    components: &[RegionComponent],
    active: &[(usize, f64)],
    layout: &TaxelLayout,
    two_d: bool,
) -> UncertaintyEstimate {
    let largest = components
        .iter()
        .max_by_key(|c| c.cells)
        .expect("non-empty components");

    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    let mut f_lo = f64::INFINITY;
    let mut f_hi = f64::NEG_INFINITY;
    let mut touch_x = false;
    let mut touch_y = false;
    for c in components {
        x_lo = x_lo.min(c.center[0] - c.half_extent[0]);
        x_hi = x_hi.max(c.center[0] + c.half_extent[0]);
        y_lo = y_lo.min(c.center[1] - c.half_extent[1]);
        y_hi = y_hi.max(c.center[1] + c.half_extent[1]);
        f_lo = f_lo.min(c.force_center - c.force_half_extent);
        f_hi = f_hi.max(c.force_center + c.force_half_extent);
        touch_x |= c.touches[0];
        touch_y |= c.touches[1];
    }
    let touches = touch_x || touch_y;

    let kind = if components.len() > 1 {
        IntersectionKind::Ambiguous
    } else if touches {
        IntersectionKind::Unbounded
    } else if active.len() >= 3 {
        IntersectionKind::MultiTaxel
    } else if active.len() == 2 {
        // Classify by projecting the region center onto the active pair axis.
        let a = layout.position(active[0].0);
        let b = layout.position(active[1].0);
        let ab = [b[0] - a[0], b[1] - a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let t = ((largest.center[0] - a[0]) * ab[0] + (largest.center[1] - a[1]) * ab[1]) / len2;
        if t > 0.0 && t < 1.0 {
            IntersectionKind::BetweenPair
        } else {
            IntersectionKind::OutsidePair
        }
    } else {
        IntersectionKind::Unbounded
    };

    let sigma_p = if touch_x { f64::INFINITY } else { 0.5 * (x_hi - x_lo) };
    let sigma_py = if two_d {
        Some(if touch_y { f64::INFINITY } else { 0.5 * (y_hi - y_lo) })
    } else {
        None
    };

    UncertaintyEstimate {
        position: largest.center,
        force: largest.force_center,
        sigma_p,
        sigma_py,
        sigma_f: 0.5 * (f_hi - f_lo),
        kind,
        region_count: components.len(),
    }
}

/// Sample locations for field evaluations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SampleGrid {
    Line { start: f64, stop: f64, count: usize },
    Rect { x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize },
    Points { points: Vec<[f64; 2]> },
}

impl SampleGrid {
    pub fn points(&self) -> Vec<[f64; 2]> {
        match self {
            SampleGrid::Line { start, stop, count } => {
                let n = (*count).max(2);
                (0..n)
                    .map(|i| [start + (stop - start) * i as f64 / (n - 1) as f64, 0.0])
                    .collect()
            }
            SampleGrid::Rect { x0, x1, y0, y1, nx, ny } => {
                let nx = (*nx).max(2);
                let ny = (*ny).max(2);
                let mut pts = Vec::with_capacity(nx * ny);
                for iy in 0..ny {
                    let y = y0 + (y1 - y0) * iy as f64 / (ny - 1) as f64;
                    for ix in 0..nx {
                        let x = x0 + (x1 - x0) * ix as f64 / (nx - 1) as f64;
                        pts.push([x, y]);
                    }
                }
                pts
            }
            SampleGrid::Points { points } => points.clone(),
        }
    }

    /// (nx, ny) for lattice grids, used by heat-map emitters.
    pub fn shape(&self) -> Option<(usize, usize)> {
        match self {
            SampleGrid::Rect { nx, ny, .. } => Some(((*nx).max(2), (*ny).max(2))),
            _ => None,
        }
    }
}

/// Minimal activating force over a sampled surface.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityField {
    pub points: Vec<[f64; 2]>,
    /// Minimal force at which `k_required` taxels respond (N).
    pub values: Vec<f64>,
    pub k_required: usize,
    pub dimensionality: usize,
}

/// Minimal force profile for localizability: at each sample point, the force
/// at which the `k`-th nearest taxel (by activation force) starts to
/// respond. Closed form; no search.
pub fn sensitivity_map(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    k_required: usize,
    grid: &SampleGrid,
) -> Result<SensitivityField> {
    if k_required < 1 || k_required > layout.len() {
        return Err(Error::InvalidParameter(format!(
            "k_required = {k_required} outside 1..={}",
            layout.len()
        )));
    }
    let points = grid.points();
    let values = points
        .par_iter()
        .map(|&p| {
            let mut forces: Vec<f64> = (0..layout.len())
                .map(|i| model.activation_force(layout.distance(i, p)))
                .collect();
            forces.sort_by(|a, b| a.partial_cmp(b).unwrap());
            forces[k_required - 1]
        })
        .collect();
    Ok(SensitivityField {
        points,
        values,
        k_required,
        dimensionality: layout.dimensionality(),
    })
}

/// Number of taxels activated by a contact (noiseless responses reaching the
/// detection threshold; the activation boundary counts as active).
pub fn overlap_count(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    contact: &ContactEvent,
) -> usize {
    (0..layout.len())
        .filter(|&i| model.activates(contact.force, layout.distance(i, contact.position)))
        .count()
}
