//! Synthetic indentation scans.
//!
//! Reproduces testbed-style data collection: an indenter visits a set of
//! surface positions, presses in by incremental depths, and the per-taxel
//! readings are recorded together with position, depth and force. Noise is
//! drawn from a counter-based stream keyed on (seed, row index), so datasets
//! regenerate bit-identically regardless of parallelism.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    noisy_readings_stream, AttenuationModel, ContactEvent, NoiseModel, TaxelLayout,
};

/// Depth to force mapping `F = k * depth^p` (Hertz-like for a spherical
/// indenter at p = 1.5).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndentationLaw {
    /// Stiffness k (N / mm^p).
    pub stiffness: f64,
    /// Exponent p.
    pub exponent: f64,
}

impl Default for IndentationLaw {
    fn default() -> Self {
        Self { stiffness: 0.12, exponent: 1.5 }
    }
}

impl IndentationLaw {
    pub fn new(stiffness: f64, exponent: f64) -> Result<Self> {
        if !(stiffness > 0.0) || !(exponent > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "indentation law needs positive stiffness and exponent, got ({stiffness}, {exponent})"
            )));
        }
        Ok(Self { stiffness, exponent })
    }

    pub fn force(&self, depth: f64) -> f64 {
        self.stiffness * depth.powf(self.exponent)
    }

    pub fn depth_for_force(&self, force: f64) -> f64 {
        (force / self.stiffness).powf(1.0 / self.exponent)
    }
}

/// Where the indenter goes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScanPattern {
    /// Evenly spaced positions along the sensor line, centered on 0.
    Line1d { span: f64, positions: usize },
    /// Lattice of positions over a centered rectangle (counts per axis).
    Grid2d { extent: [f64; 2], shape: [usize; 2] },
    /// Explicit list of surface points.
    Pattern { points: Vec<[f64; 2]> },
}

/// Indentation schedule applied at every scan position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanProtocol {
    #[serde(flatten)]
    pub pattern: ScanPattern,
    pub depth_steps: usize,
    /// Depth added per step (mm).
    pub depth_increment: f64,
    /// Settling pause placeholder; recorded but unused for synthetic data.
    #[serde(default)]
    pub dwell_s: f64,
}

impl ScanProtocol {
    pub fn new(pattern: ScanPattern, depth_steps: usize, depth_increment: f64) -> Result<Self> {
        let positions = match &pattern {
            ScanPattern::Line1d { positions, .. } => *positions,
            ScanPattern::Grid2d { shape, .. } => shape[0] * shape[1],
            ScanPattern::Pattern { points } => points.len(),
        };
        if positions < 2 {
            return Err(Error::InvalidParameter(format!(
                "protocol needs at least 2 positions, got {positions}"
            )));
        }
        if !(depth_increment > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "depth_increment must be positive, got {depth_increment}"
            )));
        }
        if depth_steps < 1 {
            return Err(Error::InvalidParameter("depth_steps must be >= 1".into()));
        }
        Ok(Self { pattern, depth_steps, depth_increment, dwell_s: 0.0 })
    }

    /// Standard 1D scan: 2501 positions over 50 mm, 40 depths of 0.1 mm.
    pub fn line_default() -> Self {
        Self::new(ScanPattern::Line1d { span: 50.0, positions: 2501 }, 40, 0.1).unwrap()
    }

    /// Standard 2D scan: 69 x 69 positions over 34 mm x 34 mm, 20 depths of
    /// 0.2 mm.
    pub fn grid_default() -> Self {
        Self::new(
            ScanPattern::Grid2d { extent: [34.0, 34.0], shape: [69, 69] },
            20,
            0.2,
        )
        .unwrap()
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        match &self.pattern {
            ScanPattern::Line1d { span, positions } => {
                let n = *positions;
                (0..n)
                    .map(|i| [-span / 2.0 + span * i as f64 / (n - 1) as f64, 0.0])
                    .collect()
            }
            ScanPattern::Grid2d { extent, shape } => {
                let [nx, ny] = *shape;
                let mut pts = Vec::with_capacity(nx * ny);
                for iy in 0..ny {
                    let y = -extent[1] / 2.0 + extent[1] * iy as f64 / (ny - 1) as f64;
                    for ix in 0..nx {
                        let x = -extent[0] / 2.0 + extent[0] * ix as f64 / (nx - 1) as f64;
                        pts.push([x, y]);
                    }
                }
                pts
            }
            ScanPattern::Pattern { points } => points.clone(),
        }
    }

    pub fn row_count(&self) -> usize {
        self.positions().len() * self.depth_steps
    }

    fn dimensionality(&self) -> usize {
        match self.pattern {
            ScanPattern::Line1d { .. } => 1,
            _ => 2,
        }
    }
}

/// Layout generators matching common sensor builds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayoutSpec {
    /// Collinear, equidistant, centered on 0.
    Line { spacing: f64, count: usize },
    /// Square lattice, centered.
    Grid { spacing: f64, shape: [usize; 2] },
    /// Triangular lattice (odd rows offset by spacing/2), centered.
    Hex { spacing: f64, shape: [usize; 2] },
    /// Caller-provided 1D positions.
    ExplicitLine { positions: Vec<f64> },
    /// Caller-provided 2D positions.
    Explicit { positions: Vec<[f64; 2]> },
}

pub fn make_layout(spec: &LayoutSpec) -> Result<TaxelLayout> {
    match spec {
        LayoutSpec::Line { spacing, count } => {
            if !(*spacing > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "spacing must be positive, got {spacing}"
                )));
            }
            let n = *count;
            TaxelLayout::line(
                (0..n)
                    .map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * spacing)
                    .collect(),
            )
        }
        LayoutSpec::Grid { spacing, shape } => {
            if !(*spacing > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "spacing must be positive, got {spacing}"
                )));
            }
            let [nx, ny] = *shape;
            let mut pts = Vec::with_capacity(nx * ny);
            for iy in 0..ny {
                for ix in 0..nx {
                    pts.push([
                        (ix as f64 - (nx as f64 - 1.0) / 2.0) * spacing,
                        (iy as f64 - (ny as f64 - 1.0) / 2.0) * spacing,
                    ]);
                }
            }
            TaxelLayout::plane(pts)
        }
        LayoutSpec::Hex { spacing, shape } => {
            if !(*spacing > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "spacing must be positive, got {spacing}"
                )));
            }
            let [nx, ny] = *shape;
            let row_pitch = spacing * (3.0_f64).sqrt() / 2.0;
            let mut pts = Vec::with_capacity(nx * ny);
            for iy in 0..ny {
                let offset = if iy % 2 == 1 { spacing / 2.0 } else { 0.0 };
                for ix in 0..nx {
                    pts.push([
                        (ix as f64 - (nx as f64 - 1.0) / 2.0) * spacing + offset,
                        (iy as f64 - (ny as f64 - 1.0) / 2.0) * row_pitch,
                    ]);
                }
            }
            // Re-center after the odd-row offset.
            let cx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
            for p in &mut pts {
                p[0] -= cx;
            }
            TaxelLayout::plane(pts)
        }
        LayoutSpec::ExplicitLine { positions } => TaxelLayout::line(positions.clone()),
        LayoutSpec::Explicit { positions } => TaxelLayout::plane(positions.clone()),
    }
}

/// Points on a circle contour, a stand-in for drawn validation patterns.
pub fn circle_pattern(diameter: f64, count: usize) -> Vec<[f64; 2]> {
    let r = diameter / 2.0;
    (0..count)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

/// One recorded indentation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub position: [f64; 2],
    pub depth: f64,
    pub force: f64,
    pub readings: Vec<f64>,
}

/// Everything needed to regenerate a dataset bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub model: AttenuationModel,
    pub noise: NoiseModel,
    pub layout: TaxelLayout,
    pub protocol: ScanProtocol,
    pub law: IndentationLaw,
    pub seed: u64,
}

/// Tabular scan record plus its generating configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanDataset {
    pub rows: Vec<ScanRow>,
    pub metadata: ScanMetadata,
}

/// Generates a scan dataset. The `seed` argument drives the noise stream
/// (it replaces `noise.seed` in the stored metadata so that metadata alone
/// regenerates the data).
pub fn generate_scan(
    model: &AttenuationModel,
    noise: &NoiseModel,
    layout: &TaxelLayout,
    protocol: &ScanProtocol,
    law: &IndentationLaw,
    seed: u64,
) -> Result<ScanDataset> {
    if protocol.dimensionality() != layout.dimensionality() {
        return Err(Error::DimensionMismatch(format!(
            "{}D protocol on a {}D layout",
            protocol.dimensionality(),
            layout.dimensionality()
        )));
    }
    let positions = protocol.positions();
    if let ScanPattern::Pattern { .. } = protocol.pattern {
        let (lo, hi) = layout.bounding_box();
        let pad = 2.0 * layout.nominal_spacing();
        for p in &positions {
            if p[0] < lo[0] - pad || p[0] > hi[0] + pad || p[1] < lo[1] - pad || p[1] > hi[1] + pad
            {
                return Err(Error::OutOfBounds(format!(
                    "pattern point ({}, {}) outside the sensing extent",
                    p[0], p[1]
                )));
            }
        }
    }
    let noise = NoiseModel { seed, ..*noise };
    let steps = protocol.depth_steps;
    let increment = protocol.depth_increment;

    let rows: Vec<ScanRow> = (0..positions.len() * steps)
        .into_par_iter()
        .map(|row_idx| {
            let p = positions[row_idx / steps];
            let depth = (row_idx % steps + 1) as f64 * increment;
            let force = law.force(depth);
            let contact = ContactEvent::new(p, force, Some(depth))?;
            let readings =
                noisy_readings_stream(model, &noise, layout, &[contact], row_idx as u64)?;
            Ok(ScanRow { position: p, depth, force, readings })
        })
        .collect::<Result<_>>()?;

    Ok(ScanDataset {
        rows,
        metadata: ScanMetadata {
            model: *model,
            noise,
            layout: layout.clone(),
            protocol: protocol.clone(),
            law: *law,
            seed,
        },
    })
}

/// Scan over an explicit point list (contour patterns, CSV imports).
#[allow(clippy::too_many_arguments)]
pub fn pattern_scan(
    model: &AttenuationModel,
    noise: &NoiseModel,
    layout: &TaxelLayout,
    points: Vec<[f64; 2]>,
    depth_steps: usize,
    depth_increment: f64,
    law: &IndentationLaw,
    seed: u64,
) -> Result<ScanDataset> {
    let protocol = ScanProtocol::new(ScanPattern::Pattern { points }, depth_steps, depth_increment)?;
    generate_scan(model, noise, layout, &protocol, law, seed)
}

impl ScanDataset {
    pub fn taxel_count(&self) -> usize {
        self.metadata.layout.len()
    }

    pub fn is_2d(&self) -> bool {
        self.metadata.layout.dimensionality() == 2
    }

    /// Regenerates the dataset from its own metadata.
    pub fn regenerate(meta: &ScanMetadata) -> Result<Self> {
        generate_scan(
            &meta.model,
            &meta.noise,
            &meta.layout,
            &meta.protocol,
            &meta.law,
            meta.seed,
        )
    }

    pub fn csv_header(&self) -> String {
        let mut h = String::new();
        if self.is_2d() {
            h.push_str("x_mm,y_mm,depth_mm,force_N");
        } else {
            h.push_str("x_mm,depth_mm,force_N");
        }
        for i in 1..=self.taxel_count() {
            h.push_str(&format!(",s_{i}"));
        }
        h
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(64 * self.rows.len());
        out.push_str(&self.csv_header());
        out.push('\n');
        let two_d = self.is_2d();
        for r in &self.rows {
            if two_d {
                out.push_str(&format!("{},{},{},{}", r.position[0], r.position[1], r.depth, r.force));
            } else {
                out.push_str(&format!("{},{},{}", r.position[0], r.depth, r.force));
            }
            for s in &r.readings {
                out.push_str(&format!(",{s}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    pub fn write_metadata(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &self.metadata)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    /// Reads a dataset back from its CSV and metadata sidecar.
    pub fn read(csv_path: &Path, metadata_path: &Path) -> Result<Self> {
        let metadata: ScanMetadata =
            serde_json::from_reader(std::fs::File::open(metadata_path)?)?;
        let two_d = metadata.layout.dimensionality() == 2;
        let n_taxels = metadata.layout.len();
        let base_cols = if two_d { 4 } else { 3 };

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(csv_path)?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != base_cols + n_taxels {
                return Err(Error::DimensionMismatch(format!(
                    "csv row has {} columns, expected {}",
                    record.len(),
                    base_cols + n_taxels
                )));
            }
            let num = |i: usize| -> Result<f64> {
                record[i]
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidParameter(format!("bad csv number: {e}")))
            };
            let position = if two_d {
                [num(0)?, num(1)?]
            } else {
                [num(0)?, 0.0]
            };
            let depth = num(base_cols - 2)?;
            let force = num(base_cols - 1)?;
            let mut readings = Vec::with_capacity(n_taxels);
            for i in 0..n_taxels {
                readings.push(num(base_cols + i)?);
            }
            rows.push(ScanRow { position, depth, force, readings });
        }
        Ok(Self { rows, metadata })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_model() -> AttenuationModel {
        AttenuationModel::new(1.0, 1.0, 2.0, 0.0).unwrap()
    }

    #[test]
    fn line_layout_matches_six_barometer_build() {
        let l = make_layout(&LayoutSpec::Line { spacing: 6.5, count: 6 }).unwrap();
        let expect = [-16.25, -9.75, -3.25, 3.25, 9.75, 16.25];
        for (a, b) in l.xs().iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_layout_5x5() {
        let l = make_layout(&LayoutSpec::Grid { spacing: 6.5, shape: [5, 5] }).unwrap();
        assert_eq!(l.len(), 25);
        let (lo, hi) = l.bounding_box();
        assert_relative_eq!(hi[0] - lo[0], 26.0);
        assert_relative_eq!(hi[1] - lo[1], 26.0);
    }

    #[test]
    fn hex_layout_row_offset() {
        let l = make_layout(&LayoutSpec::Hex { spacing: 2.0, shape: [3, 2] }).unwrap();
        assert_eq!(l.len(), 6);
        assert_relative_eq!(l.nominal_spacing(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn explicit_single_taxel_is_valid() {
        let l = make_layout(&LayoutSpec::ExplicitLine { positions: vec![1.5] }).unwrap();
        assert_eq!(l.len(), 1);
    }

    #[test]
    fn law_is_zero_at_zero_depth() {
        let law = IndentationLaw::default();
        assert_eq!(law.force(0.0), 0.0);
        let f = law.force(4.0);
        assert_relative_eq!(f, 0.12 * 8.0, max_relative = 1e-12);
        assert_relative_eq!(law.depth_for_force(f), 4.0, max_relative = 1e-12);
    }

    #[test]
    fn default_1d_protocol_row_count() {
        assert_eq!(ScanProtocol::line_default().row_count(), 100_040);
        assert_eq!(ScanProtocol::grid_default().row_count(), 95_220);
    }

    fn small_scan(sigma: f64, seed: u64) -> ScanDataset {
        let model = unit_model();
        let noise = NoiseModel::new(sigma, 0.0, 7).unwrap();
        let layout = make_layout(&LayoutSpec::Line { spacing: 2.0, count: 3 }).unwrap();
        let protocol =
            ScanProtocol::new(ScanPattern::Line1d { span: 6.0, positions: 13 }, 8, 0.3).unwrap();
        let law = IndentationLaw::new(1.0, 1.5).unwrap();
        generate_scan(&model, &noise, &layout, &protocol, &law, seed).unwrap()
    }

    #[test]
    fn scan_is_deterministic_and_regenerable() {
        let a = small_scan(0.1, 3);
        let b = small_scan(0.1, 3);
        assert_eq!(a.to_csv_string(), b.to_csv_string());

        let c = ScanDataset::regenerate(&a.metadata).unwrap();
        assert_eq!(a.to_csv_string(), c.to_csv_string());

        let d = small_scan(0.1, 4);
        assert_ne!(a.to_csv_string(), d.to_csv_string());
    }

    #[test]
    fn noiseless_scan_monotone_in_depth() {
        let ds = small_scan(0.0, 0);
        let steps = ds.metadata.protocol.depth_steps;
        for chunk in ds.rows.chunks(steps) {
            for w in chunk.windows(2) {
                for t in 0..ds.taxel_count() {
                    assert!(w[1].readings[t] >= w[0].readings[t]);
                }
            }
        }
    }

    #[test]
    fn noiseless_scan_mirror_symmetric() {
        let ds = small_scan(0.0, 0);
        let n = ds.rows.len();
        for i in 0..n {
            let j = n - 1 - (i / 8) * 8 - (7 - i % 8); // mirrored position, same depth
            let a = &ds.rows[i];
            let b = &ds.rows[j];
            assert_relative_eq!(a.position[0], -b.position[0], epsilon = 1e-12);
            assert_relative_eq!(a.depth, b.depth, epsilon = 1e-12);
            let mut rev = b.readings.clone();
            rev.reverse();
            for (x, y) in a.readings.iter().zip(rev) {
                assert_relative_eq!(*x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let ds = small_scan(0.05, 11);
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("scan.csv");
        let meta = dir.path().join("scan.meta.json");
        ds.write_csv(&csv).unwrap();
        ds.write_metadata(&meta).unwrap();
        let back = ScanDataset::read(&csv, &meta).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn pattern_scan_counts_and_bounds() {
        let model = unit_model();
        let noise = NoiseModel::noiseless();
        let layout = make_layout(&LayoutSpec::Grid { spacing: 6.5, shape: [5, 5] }).unwrap();
        let pts = circle_pattern(26.0, 100);
        let ds = pattern_scan(&model, &noise, &layout, pts, 10, 0.4, &IndentationLaw::default(), 0)
            .unwrap();
        assert_eq!(ds.rows.len(), 1000);

        let err = pattern_scan(
            &model,
            &noise,
            &layout,
            vec![[100.0, 0.0], [0.0, 0.0]],
            1,
            0.4,
            &IndentationLaw::default(),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::OutOfBounds(_)));
    }

    #[test]
    fn pattern_single_point_matches_generate_scan() {
        let model = unit_model();
        let noise = NoiseModel::noiseless();
        let layout = make_layout(&LayoutSpec::Grid { spacing: 2.0, shape: [3, 3] }).unwrap();
        let ds = pattern_scan(
            &model,
            &noise,
            &layout,
            vec![[0.5, 0.5], [0.0, 0.0]],
            1,
            1.0,
            &IndentationLaw::new(1.0, 1.5).unwrap(),
            0,
        )
        .unwrap();
        let row = &ds.rows[0];
        assert_relative_eq!(row.force, 1.0, max_relative = 1e-12);
        for (i, s) in row.readings.iter().enumerate() {
            let d = ds.metadata.layout.distance(i, [0.5, 0.5]);
            assert_relative_eq!(
                *s,
                model.forward_response(1.0, d).unwrap(),
                max_relative = 1e-12
            );
        }
    }
}
