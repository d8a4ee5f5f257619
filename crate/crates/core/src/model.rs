//! Forward sensor model.
//!
//! A taxel embedded in an elastic medium responds to a contact of force `F`
//! at distance `d` with the mean value
//!
//! ```text
//! s(F, d) = max(0, (F - lambda * d^alpha) / c)
//! ```
//!
//! so the level set of a fixed reading `S` (the taxel value isoline, TVI) is
//! the force curve `I_S(d) = c*S + lambda * d^alpha`. Measured values carry
//! additive zero-mean Gaussian noise of standard deviation `sigma_s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parametric attenuation law defining the forward response and its isolines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationModel {
    /// Force per sensor count at zero distance (N per count).
    pub c: f64,
    /// Attenuation coefficient (N / mm^alpha).
    pub lambda: f64,
    /// Attenuation exponent (dimensionless, > 0).
    pub alpha: f64,
    /// Minimum detectable taxel value (sensor counts, >= 0).
    pub s_min: f64,
}

impl AttenuationModel {
    pub fn new(c: f64, lambda: f64, alpha: f64, s_min: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(s_min >= 0.0) || !s_min.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "s_min must be non-negative, got {s_min}"
            )));
        }
        Ok(Self { c, lambda, alpha, s_min })
    }

    /// Mean taxel value for a contact of `force` N at `distance` mm.
    ///
    /// Clamped at zero: a contact weaker than the attenuation at that
    /// distance does not elicit a reading.
    pub fn forward_response(&self, force: f64, distance: f64) -> Result<f64> {
        if !(force >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "force must be non-negative, got {force}"
            )));
        }
        if !(distance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "distance must be non-negative, got {distance}"
            )));
        }
        Ok(self.response_unclamped(force, distance).max(0.0))
    }

    /// Unclamped response `(F - lambda*d^alpha)/c`; may be negative.
    #[inline]
    pub(crate) fn response_unclamped(&self, force: f64, distance: f64) -> f64 {
        (force - self.lambda * distance.powf(self.alpha)) / self.c
    }

    /// Force on the isoline of `level` at `distance`: `c*level + lambda*d^alpha`.
    pub fn tvi_force(&self, level: f64, distance: f64) -> Result<f64> {
        if level < self.s_min {
            return Err(Error::InvalidParameter(format!(
                "isoline level {level} below detection threshold {}",
                self.s_min
            )));
        }
        if !(distance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "distance must be non-negative, got {distance}"
            )));
        }
        Ok(self.tvi_force_raw(self.c * level, distance))
    }

    /// Isoline force from a force intercept `g` (no level validation).
    #[inline]
    pub(crate) fn tvi_force_raw(&self, g: f64, distance: f64) -> f64 {
        g + self.lambda * distance.abs().powf(self.alpha)
    }

    /// Minimal force that brings the reading up to `s_min` (and above zero)
    /// at `distance`.
    #[inline]
    pub fn activation_force(&self, distance: f64) -> f64 {
        self.c * self.s_min + self.lambda * distance.abs().powf(self.alpha)
    }

    /// Whether a contact of `force` at `distance` activates the taxel.
    ///
    /// Active means the unclamped response reaches `s_min` and is strictly
    /// positive, so the activation boundary counts as active when
    /// `s_min > 0` while a zero reading never does.
    #[inline]
    pub fn activates(&self, force: f64, distance: f64) -> bool {
        let r = self.response_unclamped(force, distance);
        r >= self.s_min && r > 0.0
    }
}

/// Additive measurement noise; draws are reproducible from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-taxel reading noise std-dev (sensor counts).
    pub sigma_s: f64,
    /// Force-reference noise std-dev (N); enters the dual-noise Omega only.
    pub sigma_sf: f64,
    /// Reproducibility seed.
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma_s: f64, sigma_sf: f64, seed: u64) -> Result<Self> {
        if !(sigma_s >= 0.0) || !sigma_s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma_s must be non-negative, got {sigma_s}"
            )));
        }
        if !(sigma_sf >= 0.0) || !sigma_sf.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma_sf must be non-negative, got {sigma_sf}"
            )));
        }
        Ok(Self { sigma_s, sigma_sf, seed })
    }

    /// Noiseless variant with the same seed.
    pub fn noiseless() -> Self {
        Self { sigma_s: 0.0, sigma_sf: 0.0, seed: 0 }
    }
}

/// Positions of the sensor units on a line or a plane.
///
/// Internally every position is an `[x, y]` pair; 1D layouts keep `y = 0`
/// and are sorted ascending in `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutRepr", into = "LayoutRepr")]
pub struct TaxelLayout {
    dimensionality: usize,
    positions: Vec<[f64; 2]>,
}

/// Serialized form: 1D layouts store bare x coordinates, 2D layouts pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayoutRepr {
    dimensionality: usize,
    positions: serde_json::Value,
}

impl From<TaxelLayout> for LayoutRepr {
    fn from(l: TaxelLayout) -> Self {
        let positions = if l.dimensionality == 1 {
            serde_json::json!(l.positions.iter().map(|p| p[0]).collect::<Vec<_>>())
        } else {
            serde_json::json!(l.positions)
        };
        LayoutRepr { dimensionality: l.dimensionality, positions }
    }
}

impl TryFrom<LayoutRepr> for TaxelLayout {
    type Error = Error;

    fn try_from(r: LayoutRepr) -> Result<Self> {
        match r.dimensionality {
            1 => {
                let xs: Vec<f64> = serde_json::from_value(r.positions)?;
                TaxelLayout::line(xs)
            }
            2 => {
                let ps: Vec<[f64; 2]> = serde_json::from_value(r.positions)?;
                TaxelLayout::plane(ps)
            }
            d => Err(Error::InvalidParameter(format!("dimensionality must be 1 or 2, got {d}"))),
        }
    }
}

impl TaxelLayout {
    /// 1D layout from taxel x coordinates; sorts and rejects duplicates.
    pub fn line(mut xs: Vec<f64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::InvalidParameter("layout needs at least one taxel".into()));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("taxel positions must be finite".into()));
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if xs.windows(2).any(|w| w[1] - w[0] <= 0.0) {
            return Err(Error::InvalidParameter("duplicate taxel positions".into()));
        }
        Ok(Self {
            dimensionality: 1,
            positions: xs.into_iter().map(|x| [x, 0.0]).collect(),
        })
    }

    /// 2D layout from taxel centers; rejects duplicates.
    pub fn plane(ps: Vec<[f64; 2]>) -> Result<Self> {
        if ps.is_empty() {
            return Err(Error::InvalidParameter("layout needs at least one taxel".into()));
        }
        if ps.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidParameter("taxel positions must be finite".into()));
        }
        for i in 0..ps.len() {
            for j in (i + 1)..ps.len() {
                if ps[i] == ps[j] {
                    return Err(Error::InvalidParameter(format!(
                        "duplicate taxel position {:?}",
                        ps[i]
                    )));
                }
            }
        }
        Ok(Self { dimensionality: 2, positions: ps })
    }

    pub fn dimensionality(&self) -> usize {
        self.dimensionality
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    /// x coordinates (most useful for 1D layouts).
    pub fn xs(&self) -> Vec<f64> {
        self.positions.iter().map(|p| p[0]).collect()
    }

    pub fn position(&self, i: usize) -> [f64; 2] {
        self.positions[i]
    }

    /// Euclidean distance from taxel `i` to a point.
    pub fn distance(&self, i: usize, point: [f64; 2]) -> f64 {
        let p = self.positions[i];
        ((p[0] - point[0]).powi(2) + (p[1] - point[1]).powi(2)).sqrt()
    }

    /// Gaps between consecutive taxels of a 1D layout.
    pub fn adjacent_gaps(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[1][0] - w[0][0]).collect()
    }

    /// Characteristic spacing: smallest adjacent gap in 1D, smallest pairwise
    /// distance in 2D. Zero for a single-taxel layout.
    pub fn nominal_spacing(&self) -> f64 {
        if self.positions.len() < 2 {
            return 0.0;
        }
        if self.dimensionality == 1 {
            self.adjacent_gaps().into_iter().fold(f64::INFINITY, f64::min)
        } else {
            let mut best = f64::INFINITY;
            for i in 0..self.positions.len() {
                for j in (i + 1)..self.positions.len() {
                    let a = self.positions[i];
                    let b = self.positions[j];
                    let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                    best = best.min(d);
                }
            }
            best
        }
    }

    /// Axis-aligned bounding box of the taxel centers.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.positions {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Extent of the layout along x (distance between outermost taxels).
    pub fn span(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        hi[0] - lo[0]
    }
}

/// A single indentation: where, and how hard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    /// Contact center (mm); `[x, 0]` for 1D surfaces.
    pub position: [f64; 2],
    /// Normal force magnitude (N, > 0).
    pub force: f64,
    /// Indentation depth (mm), when the contact was specified by depth.
    pub depth: Option<f64>,
}

impl ContactEvent {
    pub fn at_1d(x: f64, force: f64) -> Result<Self> {
        Self::new([x, 0.0], force, None)
    }

    pub fn at_2d(x: f64, y: f64, force: f64) -> Result<Self> {
        Self::new([x, y], force, None)
    }

    pub fn new(position: [f64; 2], force: f64, depth: Option<f64>) -> Result<Self> {
        if !position[0].is_finite() || !position[1].is_finite() {
            return Err(Error::InvalidParameter("contact position must be finite".into()));
        }
        if !(force > 0.0) || !force.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "contact force must be positive, got {force}"
            )));
        }
        if let Some(d) = depth {
            if !(d >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "contact depth must be non-negative, got {d}"
                )));
            }
        }
        Ok(Self { position, force, depth })
    }
}

/// Deterministic per-stream generator; `(seed, stream)` fully determines the
/// draw sequence, so independent rows can be generated in parallel.
pub(crate) fn noise_rng(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mean readings for a set of contacts: per-contact responses add.
pub fn mean_readings(
    model: &AttenuationModel,
    layout: &TaxelLayout,
    contacts: &[ContactEvent],
) -> Result<Vec<f64>> {
    for c in contacts {
        if layout.dimensionality() == 1 && c.position[1] != 0.0 {
            return Err(Error::DimensionMismatch(
                "2D contact position on a 1D layout".into(),
            ));
        }
    }
    let mut out = vec![0.0; layout.len()];
    for (i, r) in out.iter_mut().enumerate() {
        for c in contacts {
            *r += model.forward_response(c.force, layout.distance(i, c.position))?;
        }
    }
    Ok(out)
}

/// Noisy readings on `noise.seed`, stream 0. Repeated calls with the same
/// inputs return identical vectors.
pub fn noisy_readings(
    model: &AttenuationModel,
    noise: &NoiseModel,
    layout: &TaxelLayout,
    contacts: &[ContactEvent],
) -> Result<Vec<f64>> {
    noisy_readings_stream(model, noise, layout, contacts, 0)
}

/// Noisy readings on an explicit noise stream (counter-based; used by scan
/// generation and Monte-Carlo trials to stay deterministic under
/// parallelism).
pub fn noisy_readings_stream(
    model: &AttenuationModel,
    noise: &NoiseModel,
    layout: &TaxelLayout,
    contacts: &[ContactEvent],
    stream: u64,
) -> Result<Vec<f64>> {
    use rand_distr::Distribution;
    let mut readings = mean_readings(model, layout, contacts)?;
    if noise.sigma_s > 0.0 {
        let mut rng = noise_rng(noise.seed, stream);
        let normal = rand_distr::Normal::new(0.0, noise.sigma_s)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for r in &mut readings {
            *r += normal.sample(&mut rng);
        }
    }
    Ok(readings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_model() -> AttenuationModel {
        AttenuationModel::new(1.0, 1.0, 2.0, 0.0).unwrap()
    }

    #[test]
    fn forward_response_examples() {
        let m = unit_model();
        assert_relative_eq!(m.forward_response(1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(m.forward_response(1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(m.forward_response(2.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn forward_response_rejects_negative_inputs() {
        let m = unit_model();
        assert!(m.forward_response(-1.0, 0.0).is_err());
        assert!(m.forward_response(1.0, -0.5).is_err());
    }

    #[test]
    fn tvi_force_examples() {
        let m = unit_model();
        assert_relative_eq!(m.tvi_force(1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(m.tvi_force(1.0, 2.0).unwrap(), 5.0);
        let m2 = AttenuationModel::new(2.0, 0.5, 1.0, 0.0).unwrap();
        assert_relative_eq!(m2.tvi_force(3.0, 4.0).unwrap(), 8.0);
    }

    #[test]
    fn tvi_force_rejects_level_below_threshold() {
        let m = AttenuationModel::new(1.0, 1.0, 2.0, 0.5).unwrap();
        assert!(m.tvi_force(0.4, 1.0).is_err());
        assert!(m.tvi_force(0.5, 1.0).is_ok());
    }

    #[test]
    fn model_constructor_validates() {
        assert!(AttenuationModel::new(0.0, 1.0, 2.0, 0.0).is_err());
        assert!(AttenuationModel::new(1.0, -1.0, 2.0, 0.0).is_err());
        assert!(AttenuationModel::new(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(AttenuationModel::new(1.0, 1.0, 2.0, -0.1).is_err());
    }

    #[test]
    fn noiseless_readings_superpose() {
        let m = unit_model();
        let layout = TaxelLayout::line(vec![0.0, 2.0, 4.0]).unwrap();
        let noise = NoiseModel::noiseless();

        let one = ContactEvent::at_1d(0.0, 1.0).unwrap();
        let r = noisy_readings(&m, &noise, &layout, &[one]).unwrap();
        assert_relative_eq!(r[0], 1.0);
        assert_relative_eq!(r[1], 0.0);

        // Two contacts each sitting exactly on the zero isoline of taxel 0.
        let a = ContactEvent::at_1d(1.0, 1.0).unwrap();
        let b = ContactEvent::at_1d(-1.0, 1.0).unwrap();
        let r = noisy_readings(&m, &noise, &layout, &[a, b]).unwrap();
        assert_relative_eq!(r[0], 0.0);

        // Superposition adds per-contact responses.
        let c1 = ContactEvent::at_1d(0.0, 5.0).unwrap();
        let c2 = ContactEvent::at_1d(2.0, 2.0).unwrap();
        let r = noisy_readings(&m, &noise, &layout, &[c1, c2]).unwrap();
        assert_relative_eq!(r[1], (5.0 - 4.0) + 2.0); // d=2 from first, d=0 from second
    }

    #[test]
    fn noisy_readings_deterministic_per_seed() {
        let m = unit_model();
        let layout = TaxelLayout::line(vec![0.0, 2.0]).unwrap();
        let noise = NoiseModel::new(0.1, 0.0, 42).unwrap();
        let c = ContactEvent::at_1d(1.0, 2.0).unwrap();
        let a = noisy_readings(&m, &noise, &layout, &[c]).unwrap();
        let b = noisy_readings(&m, &noise, &layout, &[c]).unwrap();
        assert_eq!(a, b);

        let other = NoiseModel::new(0.1, 0.0, 43).unwrap();
        let d = noisy_readings(&m, &other, &layout, &[c]).unwrap();
        assert_ne!(a, d);

        let s1 = noisy_readings_stream(&m, &noise, &layout, &[c], 1).unwrap();
        assert_ne!(a, s1);
    }

    #[test]
    fn layout_sorts_and_rejects_duplicates() {
        let l = TaxelLayout::line(vec![3.0, -1.0, 1.0]).unwrap();
        assert_eq!(l.xs(), vec![-1.0, 1.0, 3.0]);
        assert!(TaxelLayout::line(vec![0.0, 0.0]).is_err());
        assert!(TaxelLayout::plane(vec![[0.0, 0.0], [0.0, 0.0]]).is_err());
        assert_relative_eq!(l.nominal_spacing(), 2.0);
    }

    #[test]
    fn layout_json_round_trip() {
        let l = TaxelLayout::line(vec![-1.0, 0.5, 2.0]).unwrap();
        let s = serde_json::to_string(&l).unwrap();
        assert!(s.contains("\"dimensionality\":1"));
        let back: TaxelLayout = serde_json::from_str(&s).unwrap();
        assert_eq!(l, back);

        let p = TaxelLayout::plane(vec![[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: TaxelLayout = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn activation_set_grows_with_force() {
        let m = AttenuationModel::new(1.0, 1.0, 2.0, 0.1).unwrap();
        let layout = TaxelLayout::line(vec![0.0, 2.0, 4.0, 6.0]).unwrap();
        let mut prev = 0;
        for &f in &[0.05, 0.2, 1.0, 5.0, 20.0, 50.0] {
            let active = (0..layout.len())
                .filter(|&i| m.activates(f, layout.distance(i, [1.0, 0.0])))
                .count();
            assert!(active >= prev, "activation count dropped at F={f}");
            prev = active;
        }
        assert_eq!(prev, 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(256))]

            /// forward_response(tvi_force(S, d), d) == S
            #[test]
            fn tvi_round_trip(
                c in 0.1f64..10.0,
                lambda in 0.01f64..10.0,
                alpha in 0.2f64..5.0,
                level in 0.0f64..100.0,
                d in 0.0f64..20.0,
            ) {
                let m = AttenuationModel::new(c, lambda, alpha, 0.0).unwrap();
                let f = m.tvi_force(level, d).unwrap();
                let back = m.forward_response(f, d).unwrap();
                // Relative to the force scale: the subtraction cancels two
                // near-equal terms of magnitude F when the contact sits far
                // out on a steep isoline.
                let tol = 1e-12 * level.max(f / c).max(1.0);
                prop_assert!((back - level).abs() <= tol, "{back} vs {level}");
            }

            /// S1 < S2 implies the S1 isoline lies strictly below the S2 one.
            #[test]
            fn isoline_ordering(
                lambda in 0.01f64..10.0,
                alpha in 0.2f64..5.0,
                s1 in 0.0f64..50.0,
                gap in 0.001f64..50.0,
                d in 0.0f64..20.0,
            ) {
                let m = AttenuationModel::new(1.0, lambda, alpha, 0.0).unwrap();
                let f1 = m.tvi_force(s1, d).unwrap();
                let f2 = m.tvi_force(s1 + gap, d).unwrap();
                prop_assert!(f1 < f2);
            }

            /// Second finite difference of the isoline is non-negative for alpha >= 1.
            #[test]
            fn isoline_convex_for_alpha_ge_one(
                lambda in 0.01f64..10.0,
                alpha in 1.0f64..5.0,
                d in 0.05f64..20.0,
                h in 0.001f64..0.5,
            ) {
                let m = AttenuationModel::new(1.0, lambda, alpha, 0.0).unwrap();
                let f = |x: f64| m.tvi_force(1.0, x).unwrap();
                let second = f(d + h) - 2.0 * f(d) + f((d - h).max(0.0));
                prop_assert!(second >= -1e-9 * f(d).abs());
            }
        }
    }
}
