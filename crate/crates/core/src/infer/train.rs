//! Regressor training and evaluation for the inverse problem.
//!
//! Separate networks predict contact position and force from a reading
//! vector. Rows are split 3:1:1 into train/validation/test by a
//! deterministic hash of (position, depth), so splits are reproducible
//! without storing indices. Inputs are standardized per taxel from training
//! statistics; targets are scaled to [-1, 1] over their training range and
//! unscaled on output.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::mlp::{Adam, Gradients, Mlp, Workspace};
use crate::error::{Error, Result};
use crate::geometry::approx_sigma_p;
use crate::superres::{omega_area_2d, OmegaMethod, OmegaReport};
use crate::synth::{ScanDataset, ScanRow};

/// Omega values reported when the measured error vanishes.
pub const OMEGA_CAP: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Position,
    Force,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Deterministic 3:1:1 split by FNV-1a hash of the row's (position, depth).
pub fn row_split(position: [f64; 2], depth: f64) -> Split {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in [position[0], position[1], depth] {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    match h % 5 {
        0 | 1 | 2 => Split::Train,
        3 => Split::Validation,
        _ => Split::Test,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub hidden_layers: usize,
    pub width: usize,
    pub target: TargetKind,
    pub learning_rate: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Optional x/y box `[x0, x1, y0, y1]` restricting training and
    /// validation rows (e.g. the span between the outermost taxels).
    pub train_extent: Option<[f64; 4]>,
}

impl RegressorSpec {
    /// Desk-scale defaults: 4 hidden layers of 64, Adam at 5e-4 with
    /// epsilon 1e-5, batches of 32.
    pub fn desk(target: TargetKind, iterations: usize, seed: u64) -> Self {
        Self {
            hidden_layers: 4,
            width: 64,
            target,
            learning_rate: 5e-4,
            adam_epsilon: 1e-5,
            batch_size: 32,
            iterations,
            seed,
            train_extent: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden_layers < 1 || self.width < 1 {
            return Err(Error::InvalidParameter(format!(
                "need at least one hidden layer of width 1, got {}x{}",
                self.hidden_layers, self.width
            )));
        }
        if self.batch_size < 1 || self.iterations < 1 {
            return Err(Error::InvalidParameter("batch_size and iterations must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.adam_epsilon > 0.0) {
            return Err(Error::InvalidParameter(
                "learning_rate and adam_epsilon must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub iteration: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// A trained regressor with its normalization constants. Serializes to a
/// JSON document carrying layer sizes, row-major weights and biases, and
/// the input/target scaling needed to reproduce predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regressor {
    pub spec: RegressorSpec,
    pub mlp: Mlp,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_offset: Vec<f64>,
    pub target_scale: Vec<f64>,
    /// Detection threshold of the generating model, for the
    /// low-confidence flag on all-inactive inputs.
    pub s_min: f64,
    pub loss_curve: Vec<LossPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub values: Vec<f64>,
    /// True when no reading exceeded the detection threshold; the output is
    /// then an extrapolation without an active taxel behind it.
    pub low_confidence: bool,
}

fn in_extent(extent: &Option<[f64; 4]>, p: [f64; 2]) -> bool {
    match extent {
        None => true,
        Some([x0, x1, y0, y1]) => p[0] >= *x0 && p[0] <= *x1 && p[1] >= *y0 && p[1] <= *y1,
    }
}

fn target_of(row: &ScanRow, target: TargetKind, two_d: bool) -> Vec<f64> {
    match target {
        TargetKind::Position => {
            if two_d {
                vec![row.position[0], row.position[1]]
            } else {
                vec![row.position[0]]
            }
        }
        TargetKind::Force => vec![row.force],
    }
}

/// Trains one regressor on the dataset's train split.
pub fn train_regressor(dataset: &ScanDataset, spec: &RegressorSpec) -> Result<Regressor> {
    spec.validate()?;
    let two_d = dataset.is_2d();
    let n_in = dataset.taxel_count();
    let out_dim = match spec.target {
        TargetKind::Position if two_d => 2,
        _ => 1,
    };

    let mut train_x: Vec<f64> = Vec::new();
    let mut train_y: Vec<f64> = Vec::new();
    let mut val_x: Vec<f64> = Vec::new();
    let mut val_y: Vec<f64> = Vec::new();
    for row in &dataset.rows {
        if !in_extent(&spec.train_extent, row.position) {
            continue;
        }
        let (xs, ys) = match row_split(row.position, row.depth) {
            Split::Train => (&mut train_x, &mut train_y),
            Split::Validation => (&mut val_x, &mut val_y),
            Split::Test => continue,
        };
        xs.extend_from_slice(&row.readings);
        ys.extend(target_of(row, spec.target, two_d));
    }
    let n_train = train_x.len() / n_in;
    let n_val = val_x.len() / n_in;
    if n_train < spec.batch_size.max(2) {
        return Err(Error::InvalidParameter(format!(
            "only {n_train} training rows for batch size {}",
            spec.batch_size
        )));
    }

    // Input standardization from training statistics.
    let mut mean = vec![0.0; n_in];
    let mut std = vec![0.0; n_in];
    for b in 0..n_train {
        for i in 0..n_in {
            mean[i] += train_x[b * n_in + i];
        }
    }
    for m in &mut mean {
        *m /= n_train as f64;
    }
    for b in 0..n_train {
        for i in 0..n_in {
            let d = train_x[b * n_in + i] - mean[i];
            std[i] += d * d;
        }
    }
    for s in &mut std {
        *s = (*s / n_train as f64).sqrt().max(1e-9);
    }

    // Target scaling to [-1, 1] over the training range.
    let mut t_lo = vec![f64::INFINITY; out_dim];
    let mut t_hi = vec![f64::NEG_INFINITY; out_dim];
    for b in 0..n_train {
        for o in 0..out_dim {
            let v = train_y[b * out_dim + o];
            t_lo[o] = t_lo[o].min(v);
            t_hi[o] = t_hi[o].max(v);
        }
    }
    let target_offset: Vec<f64> = t_lo.iter().zip(&t_hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let target_scale: Vec<f64> = t_lo
        .iter()
        .zip(&t_hi)
        .map(|(l, h)| (0.5 * (h - l)).max(1e-9))
        .collect();

    let normalize = |xs: &mut [f64]| {
        for b in 0..xs.len() / n_in {
            for i in 0..n_in {
                xs[b * n_in + i] = (xs[b * n_in + i] - mean[i]) / std[i];
            }
        }
    };
    normalize(&mut train_x);
    normalize(&mut val_x);
    let scale_targets = |ys: &mut [f64]| {
        for b in 0..ys.len() / out_dim {
            for o in 0..out_dim {
                ys[b * out_dim + o] = (ys[b * out_dim + o] - target_offset[o]) / target_scale[o];
            }
        }
    };
    scale_targets(&mut train_y);
    scale_targets(&mut val_y);

    let mut sizes = Vec::with_capacity(spec.hidden_layers + 2);
    sizes.push(n_in);
    sizes.extend(std::iter::repeat(spec.width).take(spec.hidden_layers));
    sizes.push(out_dim);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let mut mlp = Mlp::init(&sizes, &mut rng);
    let mut adam = Adam::new(&mlp, spec.learning_rate, spec.adam_epsilon);
    let mut grad = Gradients::like(&mlp);
    let mut ws = Workspace::new();

    let batch = spec.batch_size.min(n_train);
    let mut batch_x = vec![0.0; batch * n_in];
    let mut batch_y = vec![0.0; batch * out_dim];
    let record_every = (spec.iterations / 200).max(1);
    let mut loss_curve = Vec::new();

    for iter in 0..spec.iterations {
        for slot in 0..batch {
            let pick = rng.random_range(0..n_train);
            batch_x[slot * n_in..(slot + 1) * n_in]
                .copy_from_slice(&train_x[pick * n_in..(pick + 1) * n_in]);
            batch_y[slot * out_dim..(slot + 1) * out_dim]
                .copy_from_slice(&train_y[pick * out_dim..(pick + 1) * out_dim]);
        }
        let train_loss = mlp.loss_and_grad(&batch_x, &batch_y, batch, &mut grad, &mut ws);
        adam.apply(&mut mlp, &grad);

        if iter % record_every == 0 || iter + 1 == spec.iterations {
            let val_loss = if n_val > 0 {
                mlp.batch_loss(&val_x, &val_y, n_val)
            } else {
                train_loss
            };
            if !val_loss.is_finite() || !train_loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite loss at iteration {iter} (train {train_loss}, val {val_loss})"
                )));
            }
            loss_curve.push(LossPoint { iteration: iter, train_loss, val_loss });
        }
    }

    Ok(Regressor {
        spec: spec.clone(),
        mlp,
        input_mean: mean,
        input_std: std,
        target_offset,
        target_scale,
        s_min: dataset.metadata.model.s_min,
        loss_curve,
    })
}

/// Forward pass through a trained regressor; pure in weights and input.
pub fn predict(regressor: &Regressor, readings: &[f64]) -> Result<Prediction> {
    if readings.len() != regressor.input_mean.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} readings for a {}-input regressor",
            readings.len(),
            regressor.input_mean.len()
        )));
    }
    let x: Vec<f64> = readings
        .iter()
        .zip(regressor.input_mean.iter().zip(&regressor.input_std))
        .map(|(r, (m, s))| (r - m) / s)
        .collect();
    let raw = regressor.mlp.forward(&x);
    let values = raw
        .iter()
        .zip(regressor.target_offset.iter().zip(&regressor.target_scale))
        .map(|(v, (o, s))| v * s + o)
        .collect();
    let low_confidence = !readings.iter().any(|&r| r > regressor.s_min);
    Ok(Prediction { values, low_confidence })
}

/// Per-cell, per-band errors over the evaluated surface.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorMapEntry {
    pub x: f64,
    pub y: f64,
    pub band: usize,
    pub rmse_position: f64,
    pub rmse_force: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorMap {
    pub entries: Vec<ErrorMapEntry>,
    pub dimensionality: usize,
    pub cell_size: f64,
}

/// One force band of the evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandResult {
    pub force_lo: f64,
    pub force_hi: f64,
    pub rows: usize,
    /// Position RMSE (mm); per-axis in 2D with `rmse_py` set.
    pub rmse_p: f64,
    pub rmse_py: Option<f64>,
    pub rmse_f: f64,
    /// Standard deviation of the position error around its mean, the
    /// alternative spread measure reported alongside the RMSE.
    pub stddev_p: f64,
    pub omega_ml: f64,
    pub omega_theory: f64,
    pub capped: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub bands: Vec<BandResult>,
    /// Band indices with no test rows (reported, not fatal).
    pub empty_bands: Vec<usize>,
    pub error_map: ErrorMap,
    /// Range-averaged machine-learned Omega (RMSE-based).
    pub omega_ml: OmegaReport,
    /// Range-averaged Omega using the std-dev spread instead of RMSE.
    pub omega_ml_stddev: f64,
    /// Matching analytic prediction from the dataset's generating model.
    pub omega_theory: OmegaReport,
    pub rows_evaluated: usize,
}

/// Evaluates position and force regressors on the dataset's test split.
///
/// Test rows inside the layout span are binned by force band; per-band
/// position RMSE feeds the super-resolution factor, using the span between
/// the outermost taxels and the real taxel count in 1D, and the area form
/// in 2D. The theory column uses the mid-gap slope bound of the generating
/// model at the layout's nominal spacing, pushed through the same
/// convention, so the two columns are directly comparable.
pub fn evaluate(
    regressor_pos: &Regressor,
    regressor_force: &Regressor,
    dataset: &ScanDataset,
    force_bands: &[(f64, f64)],
) -> Result<Evaluation> {
    if force_bands.is_empty() {
        return Err(Error::InvalidParameter("no force bands given".into()));
    }
    let layout = &dataset.metadata.layout;
    let model = &dataset.metadata.model;
    let two_d = dataset.is_2d();
    let (lo_box, hi_box) = layout.bounding_box();
    let extent = Some([lo_box[0], hi_box[0], lo_box[1], hi_box[1]]);
    let spacing = layout.nominal_spacing();
    let cell = (spacing / 4.0).max(1e-6);

    struct Acc {
        se_x: f64,
        se_y: f64,
        sum_ex: f64,
        se_f: f64,
        n: usize,
    }
    impl Acc {
        fn new() -> Self {
            Acc { se_x: 0.0, se_y: 0.0, sum_ex: 0.0, se_f: 0.0, n: 0 }
        }
    }
    let mut band_acc: Vec<Acc> = (0..force_bands.len()).map(|_| Acc::new()).collect();
    let mut cell_acc: std::collections::BTreeMap<(i64, i64, usize), Acc> =
        std::collections::BTreeMap::new();
    let mut rows_evaluated = 0usize;
    let mut any_test = false;

    for row in &dataset.rows {
        if row_split(row.position, row.depth) != Split::Test {
            continue;
        }
        any_test = true;
        if !in_extent(&extent, row.position) {
            continue;
        }
        let Some(band) = force_bands
            .iter()
            .position(|&(lo, hi)| row.force >= lo && row.force < hi)
        else {
            continue;
        };
        let pos = predict(regressor_pos, &row.readings)?;
        let force = predict(regressor_force, &row.readings)?;
        let ex = pos.values[0] - row.position[0];
        let ey = if two_d { pos.values[1] - row.position[1] } else { 0.0 };
        let ef = force.values[0] - row.force;
        for acc in [
            &mut band_acc[band],
            cell_acc
                .entry((
                    (row.position[0] / cell).floor() as i64,
                    (row.position[1] / cell).floor() as i64,
                    band,
                ))
                .or_insert_with(Acc::new),
        ] {
            acc.se_x += ex * ex;
            acc.se_y += ey * ey;
            acc.sum_ex += ex;
            acc.se_f += ef * ef;
            acc.n += 1;
        }
        rows_evaluated += 1;
    }
    if !any_test {
        return Err(Error::EmptyTestSplit);
    }

    // Theory reference at the worst between-pair point.
    let sigma_theory = approx_sigma_p(
        model,
        spacing,
        spacing / 2.0,
        dataset.metadata.noise.sigma_s.max(1e-12),
    )?;
    let span = layout.span();
    let n_taxels = layout.len();
    let area = if two_d {
        (hi_box[0] - lo_box[0]) * (hi_box[1] - lo_box[1])
    } else {
        0.0
    };
    let omega_theory_value = if two_d {
        omega_area_2d(area, sigma_theory, sigma_theory, n_taxels)?
    } else {
        span / (n_taxels as f64 * 2.0 * sigma_theory)
    };

    let mut bands = Vec::new();
    let mut empty_bands = Vec::new();
    let mut curve = Vec::new();
    for (bi, acc) in band_acc.iter().enumerate() {
        let (lo, hi) = force_bands[bi];
        if acc.n == 0 {
            empty_bands.push(bi);
            continue;
        }
        let n = acc.n as f64;
        let rmse_x = (acc.se_x / n).sqrt();
        let rmse_y = (acc.se_y / n).sqrt();
        let rmse_f = (acc.se_f / n).sqrt();
        let var_p = (acc.se_x / n - (acc.sum_ex / n).powi(2)).max(0.0);
        let stddev_p = var_p.sqrt();
        let (omega_ml, capped) = if two_d {
            if rmse_x < 1e-12 || rmse_y < 1e-12 {
                (OMEGA_CAP, true)
            } else {
                (omega_area_2d(area, rmse_x, rmse_y, n_taxels)?, false)
            }
        } else if rmse_x < 1e-12 {
            (OMEGA_CAP, true)
        } else {
            (span / (n_taxels as f64 * 2.0 * rmse_x), false)
        };
        curve.push((0.5 * (lo + hi), omega_ml));
        bands.push(BandResult {
            force_lo: lo,
            force_hi: hi,
            rows: acc.n,
            rmse_p: rmse_x,
            rmse_py: two_d.then_some(rmse_y),
            rmse_f,
            stddev_p,
            omega_ml,
            omega_theory: omega_theory_value,
            capped,
        });
    }
    if bands.is_empty() {
        return Err(Error::EmptyTestSplit);
    }

    let omega_mean = bands.iter().map(|b| b.omega_ml).sum::<f64>() / bands.len() as f64;
    let omega_stddev_mean = {
        let usable: Vec<f64> = bands
            .iter()
            .filter(|b| b.stddev_p > 1e-12)
            .map(|b| {
                if two_d {
                    b.omega_ml // per-axis stddev not tracked in 2D; RMSE form
                } else {
                    span / (n_taxels as f64 * 2.0 * b.stddev_p)
                }
            })
            .collect();
        if usable.is_empty() {
            OMEGA_CAP
        } else {
            usable.iter().sum::<f64>() / usable.len() as f64
        }
    };
    let force_range = (force_bands[0].0, force_bands[force_bands.len() - 1].1);

    let entries = cell_acc
        .into_iter()
        .map(|((cx, cy, band), acc)| {
            let n = acc.n as f64;
            let rp = if two_d {
                ((acc.se_x + acc.se_y) / n).sqrt()
            } else {
                (acc.se_x / n).sqrt()
            };
            ErrorMapEntry {
                x: (cx as f64 + 0.5) * cell,
                y: (cy as f64 + 0.5) * cell,
                band,
                rmse_position: rp,
                rmse_force: (acc.se_f / n).sqrt(),
                count: acc.n,
            }
        })
        .collect();

    Ok(Evaluation {
        bands,
        empty_bands,
        error_map: ErrorMap {
            entries,
            dimensionality: layout.dimensionality(),
            cell_size: cell,
        },
        omega_ml: OmegaReport {
            omega: omega_mean,
            method: OmegaMethod::EmpiricalMl,
            force_range: Some(force_range),
            per_force_curve: Some(curve),
        },
        omega_ml_stddev: omega_stddev_mean,
        omega_theory: OmegaReport {
            omega: omega_theory_value,
            method: OmegaMethod::Analytic1d,
            force_range: Some(force_range),
            per_force_curve: None,
        },
        rows_evaluated,
    })
}
