//! The six-model surrogate bundle: chiller power, heat rejection and one
//! tower fan power model per fan stage, chained at prediction time
//! (chiller → rejection → tower).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{rejection_per_approach, Column, Dataset, SampleRecord};
use crate::gbt::{self, GbtModel, Hyperparams};
use crate::units::FAN_STAGES;
use crate::{Error, Result};

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

pub const CHILLER_FEATURES: [Column; 2] = [Column::TCws, Column::QLoad];
pub const REJECTION_FEATURES: [Column; 2] = [Column::QLoad, Column::TCws];
/// The tower models also see the approach the basin is held at: with
/// modulating fans, wet-bulb and rejected heat alone do not determine fan
/// power. Airflow tracks rejected heat per degree of approach, and giving
/// the trees that ratio directly lets axis-aligned splits follow the steep
/// rise in fan power near the tower's limit.
pub const TOWER_FEATURES: [Column; 4] = [
    Column::TWb,
    Column::QRej,
    Column::Approach,
    Column::RejectionPerApproach,
];

/// Tower model inputs in `TOWER_FEATURES` order.
pub fn tower_inputs(t_wb: f64, q_rej: f64, t_cws: f64) -> [f64; 4] {
    let approach = t_cws - t_wb;
    [t_wb, q_rej, approach, rejection_per_approach(q_rej, approach)]
}

/// Relative margin around the training bounding box inside which inputs
/// count as interpolation.
pub const ENVELOPE_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        values.fold(
            Range {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            },
            |r, v| Range {
                min: r.min.min(v),
                max: r.max.max(v),
            },
        )
    }

    pub fn contains_with_margin(&self, v: f64, margin: f64) -> bool {
        let pad = margin * (self.max - self.min);
        v >= self.min - pad && v <= self.max + pad
    }
}

/// Bounding box of the training inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub t_wb_f: Range,
    pub q_load_tons: Range,
    pub t_cws_f: Range,
}

impl Envelope {
    pub fn of(data: &Dataset) -> Self {
        Self {
            t_wb_f: Range::of(data.records.iter().map(|r| r.t_wb)),
            q_load_tons: Range::of(data.records.iter().map(|r| r.q_load)),
            t_cws_f: Range::of(data.records.iter().map(|r| r.t_cws)),
        }
    }

    /// Human-readable warnings for operating conditions outside the
    /// envelope; empty when inside.
    pub fn warnings(&self, t_wb: f64, q_load: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v, r) in [
            ("wet-bulb", t_wb, &self.t_wb_f),
            ("load", q_load, &self.q_load_tons),
        ] {
            if !r.contains_with_margin(v, ENVELOPE_MARGIN) {
                out.push(format!(
                    "{name} {v:.1} outside training range [{:.1}, {:.1}]; prediction is an extrapolation",
                    r.min, r.max
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p_chiller_kw: f64,
    pub q_rej_tons: f64,
    pub p_fan_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateBundle {
    pub schema_version: u32,
    pub created_at: NaiveDateTime,
    /// SHA-256 over the training rows, hex.
    pub training_data_fingerprint: String,
    pub hyperparams: Hyperparams,
    pub envelope: Envelope,
    pub chiller_power_model: GbtModel,
    pub heat_rejection_model: GbtModel,
    pub tower_power_models: BTreeMap<u8, GbtModel>,
}

impl SurrogateBundle {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "bundle schema_version {} is not supported (expected {BUNDLE_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let keys: Vec<u8> = self.tower_power_models.keys().copied().collect();
        if keys != FAN_STAGES {
            return Err(Error::Schema(format!(
                "tower models cover fan counts {keys:?}, expected {FAN_STAGES:?}"
            )));
        }
        for (name, model, features, target) in self.models() {
            model
                .validate()
                .map_err(|e| Error::Schema(format!("{name}: {e}")))?;
            let expected: Vec<&str> = features.iter().map(|c| c.name()).collect();
            if model.feature_names != expected || model.target_name != target.name() {
                return Err(Error::Schema(format!(
                    "{name}: expected features {expected:?} → {}",
                    target.name()
                )));
            }
        }
        Ok(())
    }

    /// Every model with its display name, feature columns and target.
    pub fn models(&self) -> Vec<(String, &GbtModel, &'static [Column], Column)> {
        let mut out = vec![
            (
                "chiller_power".to_string(),
                &self.chiller_power_model,
                &CHILLER_FEATURES[..],
                Column::PChiller,
            ),
            (
                "heat_rejection".to_string(),
                &self.heat_rejection_model,
                &REJECTION_FEATURES[..],
                Column::QRej,
            ),
        ];
        for (n, m) in &self.tower_power_models {
            out.push((format!("tower_power_{n}"), m, &TOWER_FEATURES[..], Column::PFan));
        }
        out
    }

    pub fn chiller_power(&self, t_cws: f64, q_load: f64) -> f64 {
        let m = &self.chiller_power_model;
        m.predict_trees(&[t_cws, q_load], m.trees.len())
    }

    pub fn heat_rejection(&self, q_load: f64, t_cws: f64) -> f64 {
        let m = &self.heat_rejection_model;
        m.predict_trees(&[q_load, t_cws], m.trees.len())
    }

    pub fn tower_model(&self, n_fans: u8) -> Result<&GbtModel> {
        self.tower_power_models
            .get(&n_fans)
            .ok_or_else(|| Error::Config(format!("no tower model for {n_fans} fans")))
    }

    pub fn fan_power(&self, n_fans: u8, t_wb: f64, q_rej: f64, t_cws: f64) -> Result<f64> {
        let m = self.tower_model(n_fans)?;
        Ok(m.predict_trees(&tower_inputs(t_wb, q_rej, t_cws), m.trees.len()))
    }

    /// Chained prediction at one operating point. Powers are floored at
    /// zero; boosted sums can dip below it when extrapolating.
    pub fn predict(&self, t_wb: f64, q_load: f64, t_cws: f64, n_fans: u8) -> Result<Prediction> {
        let p_chiller = self.chiller_power(t_cws, q_load);
        let q_rej = self.heat_rejection(q_load, t_cws);
        Ok(Prediction {
            p_chiller_kw: p_chiller.max(0.0),
            q_rej_tons: q_rej,
            p_fan_kw: self.fan_power(n_fans, t_wb, q_rej, t_cws)?.max(0.0),
        })
    }

    /// Upper bound on predicted chiller plus fan power over all inputs.
    pub fn max_power_bound(&self) -> f64 {
        let fan = self
            .tower_power_models
            .values()
            .map(GbtModel::upper_bound)
            .fold(f64::NEG_INFINITY, f64::max);
        self.chiller_power_model.upper_bound().max(0.0) + fan.max(0.0)
    }

    /// Share of an envelope grid where predicted rejection is at least the
    /// load. A physical sanity figure, reported rather than enforced.
    pub fn rejection_sanity(&self) -> f64 {
        let e = &self.envelope;
        let steps = 20;
        let (mut ok, mut total) = (0usize, 0usize);
        for i in 0..=steps {
            let q = lerp(e.q_load_tons, i, steps);
            for j in 0..=steps {
                let t = lerp(e.t_cws_f, j, steps);
                total += 1;
                if self.heat_rejection(q, t) >= q {
                    ok += 1;
                }
            }
        }
        ok as f64 / total as f64
    }
}

fn lerp(r: Range, i: usize, steps: usize) -> f64 {
    r.min + (r.max - r.min) * i as f64 / steps as f64
}

/// SHA-256 over every record field in order, hex encoded.
pub fn fingerprint(data: &Dataset) -> String {
    let mut h = Sha256::new();
    for r in &data.records {
        h.update(r.timestamp.and_utc().timestamp().to_le_bytes());
        for c in Column::ALL {
            h.update(r.get(c).to_le_bytes());
        }
        h.update([r.source as u8]);
    }
    let mut out = String::with_capacity(64);
    for b in h.finalize() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Trains the six models. `created_at` is stamped into the bundle as given.
pub fn train_bundle(data: &Dataset, hp: &Hyperparams, created_at: NaiveDateTime) -> Result<SurrogateBundle> {
    train_weighted(data, None, hp, created_at)
}

fn train_weighted(
    data: &Dataset,
    weights: Option<&[f64]>,
    hp: &Hyperparams,
    created_at: NaiveDateTime,
) -> Result<SurrogateBundle> {
    hp.validate()?;
    data.validate()?;
    let min_rows = 2 * hp.min_samples_leaf;
    for n in FAN_STAGES {
        if data.records.iter().filter(|r| r.n_fans == n).count() < min_rows {
            return Err(Error::MissingStratum(n));
        }
    }
    let chiller = gbt::fit_dataset(data, Column::PChiller, &CHILLER_FEATURES, weights, hp)?;
    let rejection = gbt::fit_dataset(data, Column::QRej, &REJECTION_FEATURES, weights, hp)?;
    let mut towers = BTreeMap::new();
    for n in FAN_STAGES {
        let keep: Vec<usize> = (0..data.len()).filter(|&i| data.records[i].n_fans == n).collect();
        let stratum = Dataset {
            schema_version: data.schema_version,
            provenance: data.provenance.clone(),
            records: keep.iter().map(|&i| data.records[i]).collect(),
        };
        let w: Option<Vec<f64>> = weights.map(|w| keep.iter().map(|&i| w[i]).collect());
        towers.insert(
            n,
            gbt::fit_dataset(&stratum, Column::PFan, &TOWER_FEATURES, w.as_deref(), hp)?,
        );
    }
    Ok(SurrogateBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        created_at,
        training_data_fingerprint: fingerprint(data),
        hyperparams: *hp,
        envelope: Envelope::of(data),
        chiller_power_model: chiller,
        heat_rejection_model: rejection,
        tower_power_models: towers,
    })
}

/// Scores one bundle model on the rows it applies to (its fan stratum for
/// tower models).
pub fn evaluate_model(bundle: &SurrogateBundle, name: &str, data: &Dataset) -> Result<gbt::Evaluation> {
    let (_, model, _, _) = bundle
        .models()
        .into_iter()
        .find(|(n, ..)| n == name)
        .ok_or_else(|| Error::Config(format!("no model named `{name}`")))?;
    match name.strip_prefix("tower_power_").and_then(|n| n.parse::<u8>().ok()) {
        Some(n) => gbt::evaluate(model, &data.filtered(|r| r.n_fans == n)),
        None => gbt::evaluate(model, data),
    }
}

/// Per-model evaluation of the whole bundle; models with no applicable rows
/// are reported as `None`.
pub fn evaluate_bundle(bundle: &SurrogateBundle, data: &Dataset) -> Vec<(String, Option<gbt::Evaluation>)> {
    bundle
        .models()
        .into_iter()
        .map(|(name, ..)| {
            let e = evaluate_model(bundle, &name, data).ok();
            (name, e)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRefinement {
    pub model: String,
    pub measured_rows: usize,
    pub mbe_percent_before: Option<f64>,
    pub mbe_percent_after: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub weight: f64,
    pub measured_rows: usize,
    /// Measured rows identical to a training row; these reweight it instead
    /// of adding a copy.
    pub duplicate_rows: usize,
    pub models: Vec<ModelRefinement>,
    /// True when no model improved and the original bundle was kept.
    pub rejected: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub bundle: SurrogateBundle,
    pub report: RefineReport,
}

type RowKey = (i64, [u64; 8], u8);

fn row_key(r: &SampleRecord) -> RowKey {
    let cols = [
        r.t_wb, r.q_load, r.t_cws, r.t_cwr, r.p_chiller, r.p_fan, r.p_pump, r.q_rej,
    ];
    (r.timestamp.and_utc().timestamp(), cols.map(f64::to_bits), r.n_fans)
}

/// Retrains on the synthetic training rows plus measured rows weighted by
/// `weight`. Each model is kept only if its |MBE%| on the measured rows does
/// not get worse; if none improves the original bundle is returned and the
/// report says so.
pub fn refine(
    bundle: &SurrogateBundle,
    synthetic: &Dataset,
    measured: &Dataset,
    weight: f64,
    created_at: NaiveDateTime,
) -> Result<Refinement> {
    if !(weight.is_finite() && weight >= 1.0) {
        return Err(Error::Config(format!("refinement weight {weight} must be ≥ 1")));
    }
    let mut report = RefineReport {
        weight,
        measured_rows: measured.len(),
        duplicate_rows: 0,
        models: Vec::new(),
        rejected: false,
        warnings: Vec::new(),
    };
    if measured.is_empty() {
        report.warnings.push("no measured rows; bundle unchanged".into());
        return Ok(Refinement {
            bundle: bundle.clone(),
            report,
        });
    }
    measured.validate()?;

    let mut combined = synthetic.clone();
    let mut weights = vec![1.0f64; synthetic.len()];
    let index: BTreeMap<RowKey, usize> = synthetic
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (row_key(r), i))
        .collect();
    for r in &measured.records {
        match index.get(&row_key(r)) {
            Some(&i) => {
                weights[i] = weights[i].max(weight);
                report.duplicate_rows += 1;
            }
            None => {
                combined.records.push(*r);
                weights.push(weight);
            }
        }
    }
    combined.provenance = format!("{} + {} measured rows (weight {weight})", synthetic.provenance, measured.len());
    let candidate = train_weighted(&combined, Some(&weights), &bundle.hyperparams, created_at)?;

    let mut out = bundle.clone();
    let mut any = false;
    let slots: Vec<(String, u8)> = bundle
        .models()
        .into_iter()
        .map(|(name, ..)| {
            let n = name
                .strip_prefix("tower_power_")
                .and_then(|n| n.parse().ok())
                .unwrap_or(0);
            (name, n)
        })
        .collect();
    for (name, n) in slots {
        let rows = if n == 0 {
            measured.len()
        } else {
            measured.records.iter().filter(|r| r.n_fans == n).count()
        };
        let before = evaluate_model(bundle, &name, measured).ok().map(|e| e.metrics.mbe_percent);
        let after = evaluate_model(&candidate, &name, measured).ok().map(|e| e.metrics.mbe_percent);
        let accepted = match (before, after) {
            (Some(b), Some(a)) => a.abs() <= b.abs(),
            _ => false,
        };
        if accepted {
            any = true;
            match n {
                0 if name == "chiller_power" => {
                    out.chiller_power_model = candidate.chiller_power_model.clone()
                }
                0 => out.heat_rejection_model = candidate.heat_rejection_model.clone(),
                n => {
                    out.tower_power_models
                        .insert(n, candidate.tower_power_models[&n].clone());
                }
            }
        }
        report.models.push(ModelRefinement {
            model: name,
            measured_rows: rows,
            mbe_percent_before: before,
            mbe_percent_after: after,
            accepted,
        });
    }
    if !any {
        report.rejected = true;
        report
            .warnings
            .push("refinement did not reduce |MBE| for any model; original bundle kept".into());
        return Ok(Refinement {
            bundle: bundle.clone(),
            report,
        });
    }
    out.created_at = created_at;
    out.training_data_fingerprint = candidate.training_data_fingerprint;
    out.envelope = candidate.envelope;
    Ok(Refinement { bundle: out, report })
}
