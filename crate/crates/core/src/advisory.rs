//! Operator-facing results: the offline look-up table, single-point
//! recommendations and the measured-versus-optimized savings comparison.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::objective::{LoopObjective, LoopPower, Mode};
use crate::plant::PlantConfig;
use crate::pso::{self, Optimum, Score, SwarmConfig};
use crate::surrogate::SurrogateBundle;
use crate::tariff::{compare_costs, IntervalPoint, IntervalSeries, SavingsReport, TariffSchedule, YearMonth};
use crate::{Error, Result};

/// Runs the optimizer on the power objective at one operating point.
pub fn optimize_point(
    bundle: &SurrogateBundle,
    plant: &PlantConfig,
    q_load: f64,
    t_wb: f64,
    swarm: &SwarmConfig,
    baseline: Option<(f64, u8)>,
) -> Result<Optimum> {
    let obj = LoopObjective::new(bundle, plant, q_load, t_wb, Mode::Power, &swarm.fan_strata)?;
    run_swarm(&obj, swarm, baseline)
}

/// The swarm revisits the same snapped setpoints many times, so scores are
/// cached per (setpoint, fan count).
fn run_swarm(obj: &LoopObjective<'_>, swarm: &SwarmConfig, baseline: Option<(f64, u8)>) -> Result<Optimum> {
    let mut seen: BTreeMap<(u64, u8), Score> = BTreeMap::new();
    pso::optimize(
        |t: f64, n| *seen.entry((t.to_bits(), n)).or_insert_with(|| obj.score(t, n)),
        swarm,
        baseline,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableGrids {
    pub q_load_tons: Vec<f64>,
    pub t_wb_f: Vec<f64>,
}

impl Default for TableGrids {
    /// Loads 200–2700 tons by 100, wet-bulb 60–80 °F by 1.
    fn default() -> Self {
        Self {
            q_load_tons: (2..=27).map(|k| f64::from(k) * 100.0).collect(),
            t_wb_f: (60..=80).map(f64::from).collect(),
        }
    }
}

impl TableGrids {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("load", &self.q_load_tons), ("wet-bulb", &self.t_wb_f)] {
            if g.is_empty() {
                return Err(Error::Config(format!("{name} grid is empty")));
            }
            if g.iter().any(|v| !v.is_finite()) || g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config(format!("{name} grid must be strictly increasing")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub q_load_tons: f64,
    pub t_wb_f: f64,
    pub t_cws_opt_f: f64,
    pub n_fans_opt: u8,
    pub predicted_power_kw: f64,
    /// False when no setting satisfies the approach floor; the settings are
    /// then the least-violating ones and the power is not meaningful.
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableContext {
    pub n_chillers: u32,
    pub chw_setpoint_f: f64,
    pub bundle_fingerprint: String,
    pub swarm: SwarmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupTable {
    pub q_load_grid: Vec<f64>,
    pub t_wb_grid: Vec<f64>,
    /// Row-major: `cells[i][j]` is load `i`, wet-bulb `j`.
    pub cells: Vec<Vec<TableCell>>,
    pub context: TableContext,
}

impl LookupTable {
    pub fn cell(&self, q_load: f64, t_wb: f64) -> Option<&TableCell> {
        let i = self.q_load_grid.iter().position(|q| *q == q_load)?;
        let j = self.t_wb_grid.iter().position(|t| *t == t_wb)?;
        Some(&self.cells[i][j])
    }

    pub fn iter(&self) -> impl Iterator<Item = &TableCell> {
        self.cells.iter().flatten()
    }
}

pub fn build_table(
    bundle: &SurrogateBundle,
    plant: &PlantConfig,
    grids: &TableGrids,
    swarm: &SwarmConfig,
) -> Result<LookupTable> {
    grids.validate()?;
    swarm.validate()?;
    let mut cells = Vec::with_capacity(grids.q_load_tons.len());
    for &q in &grids.q_load_tons {
        let mut row = Vec::with_capacity(grids.t_wb_f.len());
        for &t_wb in &grids.t_wb_f {
            let cell = table_cell(bundle, plant, q, t_wb, swarm).map_err(|e| Error::TableCell {
                q_load_tons: q,
                t_wb_f: t_wb,
                source: Box::new(e),
            })?;
            row.push(cell);
        }
        cells.push(row);
    }
    Ok(LookupTable {
        q_load_grid: grids.q_load_tons.clone(),
        t_wb_grid: grids.t_wb_f.clone(),
        cells,
        context: TableContext {
            n_chillers: plant.n_chillers,
            chw_setpoint_f: plant.chw_supply_temp_f,
            bundle_fingerprint: bundle.training_data_fingerprint.clone(),
            swarm: swarm.clone(),
        },
    })
}

fn table_cell(bundle: &SurrogateBundle, plant: &PlantConfig, q: f64, t_wb: f64, swarm: &SwarmConfig) -> Result<TableCell> {
    let obj = LoopObjective::new(bundle, plant, q, t_wb, Mode::Power, &swarm.fan_strata)?;
    let best = run_swarm(&obj, swarm, None)?.best;
    Ok(TableCell {
        q_load_tons: q,
        t_wb_f: t_wb,
        t_cws_opt_f: best.t_cws,
        n_fans_opt: best.n_fans,
        predicted_power_kw: obj.power(best.t_cws, best.n_fans)?.total_kw(),
        feasible: best.feasible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub t_cws_f: f64,
    pub n_fans: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineDelta {
    /// Recommended minus current; never positive.
    pub power_kw: f64,
    pub cost_rate_per_h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub q_load_tons: f64,
    pub t_wb_f: f64,
    pub timestamp: Option<NaiveDateTime>,
    pub t_cws_opt_f: f64,
    pub n_fans_opt: u8,
    pub feasible: bool,
    pub predicted: LoopPower,
    pub predicted_power_kw: f64,
    /// $/h at the tariff's energy rate, when a tariff was given.
    pub predicted_cost_rate_per_h: Option<f64>,
    pub current: Option<Settings>,
    pub baseline_delta: Option<BaselineDelta>,
    pub bundle_fingerprint: String,
    pub computed_at: NaiveDateTime,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct AdviseRequest<'a> {
    pub q_load_tons: f64,
    pub t_wb_f: f64,
    pub current: Option<Settings>,
    pub tariff: Option<(&'a TariffSchedule, NaiveDateTime)>,
}

/// Optimal settings at one operating point.
///
/// With current settings supplied they seed the swarm, and they are kept
/// unless the optimum is feasible and predicts strictly less power, so the
/// recommendation never predicts more power than the current settings.
pub fn advise(
    bundle: &SurrogateBundle,
    plant: &PlantConfig,
    req: &AdviseRequest<'_>,
    swarm: &SwarmConfig,
    computed_at: NaiveDateTime,
) -> Result<Recommendation> {
    let (q, t_wb) = (req.q_load_tons, req.t_wb_f);
    let obj = LoopObjective::new(bundle, plant, q, t_wb, Mode::Power, &swarm.fan_strata)?;
    let (lo, hi) = swarm.t_cws_bounds;
    let baseline = req.current.map(|c| (c.t_cws_f.clamp(lo, hi), c.n_fans));
    let best = run_swarm(&obj, swarm, baseline)?.best;
    let mut chosen = (best.t_cws, best.n_fans, best.feasible);
    let mut power = obj.power(best.t_cws, best.n_fans)?;
    let mut current_power = None;
    if let Some(c) = req.current {
        let p = obj.power(c.t_cws_f, c.n_fans)?;
        let current_feasible = c.t_cws_f >= p.t_cws_floor_f;
        if !(best.feasible && power.total_kw() < p.total_kw()) {
            chosen = (c.t_cws_f, c.n_fans, current_feasible);
            power = p;
        }
        current_power = Some(p.total_kw());
    }
    let rate = match req.tariff {
        Some((tariff, at)) => Some(tariff.energy_rate_at(at)?),
        None => None,
    };
    let total = power.total_kw();
    Ok(Recommendation {
        q_load_tons: q,
        t_wb_f: t_wb,
        timestamp: req.tariff.map(|(_, at)| at),
        t_cws_opt_f: chosen.0,
        n_fans_opt: chosen.1,
        feasible: chosen.2,
        predicted: power,
        predicted_power_kw: total,
        predicted_cost_rate_per_h: rate.map(|r| r * total),
        current: req.current,
        baseline_delta: current_power.map(|c| BaselineDelta {
            power_kw: total - c,
            cost_rate_per_h: rate.map(|r| r * (total - c)),
        }),
        bundle_fingerprint: bundle.training_data_fingerprint.clone(),
        computed_at,
        warnings: bundle.envelope.warnings(t_wb, q),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalDetail {
    pub timestamp: NaiveDateTime,
    pub q_load_tons: f64,
    pub t_wb_f: f64,
    pub measured: Settings,
    pub optimized: Settings,
    pub baseline_kw: f64,
    pub optimized_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsOutcome {
    pub reports: Vec<SavingsReport>,
    pub intervals: Vec<IntervalDetail>,
}

/// Prices the surrogate's power at the measured settings against its power
/// at the advised settings, interval by interval, and bills both series for
/// each month. Intervals with no load are billed at zero in both series.
pub fn savings_pipeline(
    bundle: &SurrogateBundle,
    plant: &PlantConfig,
    measured: &Dataset,
    tariff: &TariffSchedule,
    months: &[YearMonth],
    swarm: &SwarmConfig,
) -> Result<SavingsOutcome> {
    tariff.validate()?;
    measured.validate()?;
    let rows = &measured.records;
    if rows.len() < 2 {
        return Err(Error::Schema("measured data needs at least two intervals".into()));
    }
    let interval = (rows[1].timestamp - rows[0].timestamp).num_minutes();
    if interval <= 0 || interval > 1440 {
        return Err(Error::Schema(format!("measured rows are {interval} minutes apart")));
    }
    let mut details = Vec::with_capacity(rows.len());
    for r in rows {
        let measured_settings = Settings {
            t_cws_f: r.t_cws,
            n_fans: r.n_fans,
        };
        let detail = if r.q_load <= 0.0 {
            IntervalDetail {
                timestamp: r.timestamp,
                q_load_tons: r.q_load,
                t_wb_f: r.t_wb,
                measured: measured_settings,
                optimized: measured_settings,
                baseline_kw: 0.0,
                optimized_kw: 0.0,
            }
        } else {
            let req = AdviseRequest {
                q_load_tons: r.q_load,
                t_wb_f: r.t_wb,
                current: Some(measured_settings),
                tariff: None,
            };
            let rec = advise(bundle, plant, &req, swarm, r.timestamp)?;
            let delta = rec.baseline_delta.expect("current settings supplied");
            IntervalDetail {
                timestamp: r.timestamp,
                q_load_tons: r.q_load,
                t_wb_f: r.t_wb,
                measured: measured_settings,
                optimized: Settings {
                    t_cws_f: rec.t_cws_opt_f,
                    n_fans: rec.n_fans_opt,
                },
                baseline_kw: (rec.predicted_power_kw - delta.power_kw).max(0.0),
                optimized_kw: rec.predicted_power_kw.max(0.0),
            }
        };
        details.push(detail);
    }
    let to_series = |f: fn(&IntervalDetail) -> f64| {
        IntervalSeries::new(
            interval as u32,
            details
                .iter()
                .map(|d| IntervalPoint {
                    timestamp: d.timestamp,
                    power_kw: f(d),
                })
                .collect(),
        )
    };
    let baseline = to_series(|d| d.baseline_kw)?;
    let optimized = to_series(|d| d.optimized_kw)?;
    let reports = months
        .iter()
        .map(|m| compare_costs(tariff, &baseline, &optimized, *m))
        .collect::<Result<Vec<_>>>()?;
    Ok(SavingsOutcome {
        reports,
        intervals: details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{run_sweep, ConditionsSource, SampleRecord, Source, SweepSpec};
    use crate::gbt::Hyperparams;
    use crate::surrogate::train_bundle;
    use crate::units::FAN_STAGES;
    use crate::weather::synthetic_year;
    use chrono::{Duration, NaiveDate};

    fn t0() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2023, 2, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
    }

    fn bundle() -> SurrogateBundle {
        let conditions: Vec<_> = synthetic_year(2023, 4)
            .into_iter()
            .filter(|c| c.q_load_tons > 50.0)
            .step_by(19)
            .take(80)
            .collect();
        let spec = SweepSpec {
            t_cws_values: alloc::vec![65.0, 70.0, 75.0, 80.0, 85.0],
            n_fans_values: FAN_STAGES.to_vec(),
            months: (1..=12).collect(),
            source: ConditionsSource::Synthetic { year: 2023, seed: 4 },
            setpoint_jitter_f: 0.0,
            jitter_seed: 0,
        };
        let data = run_sweep(&PlantConfig::default(), &spec, &conditions).unwrap();
        let hp = Hyperparams {
            n_trees: 30,
            learning_rate: 0.25,
            ..Hyperparams::default()
        };
        train_bundle(&data, &hp, t0()).unwrap()
    }

    fn small_swarm() -> SwarmConfig {
        SwarmConfig {
            n_particles_per_stratum: 4,
            n_iterations: 10,
            stochastic: false,
            ..SwarmConfig::default()
        }
    }

    #[test]
    fn table_cells_match_direct_optimization() {
        let b = bundle();
        let plant = PlantConfig::default();
        let grids = TableGrids {
            q_load_tons: alloc::vec![800.0, 1600.0],
            t_wb_f: alloc::vec![62.0, 70.0],
        };
        let table = build_table(&b, &plant, &grids, &small_swarm()).unwrap();
        for cell in table.iter() {
            let direct = optimize_point(&b, &plant, cell.q_load_tons, cell.t_wb_f, &small_swarm(), None).unwrap();
            assert_eq!((cell.t_cws_opt_f, cell.n_fans_opt), (direct.best.t_cws, direct.best.n_fans));
            let req = AdviseRequest {
                q_load_tons: cell.q_load_tons,
                t_wb_f: cell.t_wb_f,
                current: None,
                tariff: None,
            };
            let rec = advise(&b, &plant, &req, &small_swarm(), t0()).unwrap();
            assert_eq!((rec.t_cws_opt_f, rec.n_fans_opt), (cell.t_cws_opt_f, cell.n_fans_opt));
            assert_eq!(rec.predicted_power_kw, cell.predicted_power_kw);
        }
        assert_eq!(table.context.n_chillers, 2);
        assert!(table.cell(1600.0, 70.0).is_some());
        let bad = TableGrids {
            q_load_tons: alloc::vec![800.0, 800.0],
            t_wb_f: alloc::vec![62.0],
        };
        assert!(build_table(&b, &plant, &bad, &small_swarm()).is_err());
    }

    #[test]
    fn optimal_current_settings_are_kept() {
        let b = bundle();
        let plant = PlantConfig::default();
        let mut req = AdviseRequest {
            q_load_tons: 1200.0,
            t_wb_f: 66.0,
            current: None,
            tariff: None,
        };
        let first = advise(&b, &plant, &req, &small_swarm(), t0()).unwrap();
        req.current = Some(Settings {
            t_cws_f: first.t_cws_opt_f,
            n_fans: first.n_fans_opt,
        });
        let again = advise(&b, &plant, &req, &small_swarm(), t0()).unwrap();
        assert_eq!((again.t_cws_opt_f, again.n_fans_opt), (first.t_cws_opt_f, first.n_fans_opt));
        assert_eq!(again.baseline_delta.unwrap().power_kw, 0.0);
        assert_eq!(again, advise(&b, &plant, &req, &small_swarm(), t0()).unwrap());
    }

    #[test]
    fn poor_current_settings_improve() {
        let b = bundle();
        let plant = PlantConfig::default();
        let tariff = TariffSchedule::flat(0.2, 0.0, 0.0);
        let req = AdviseRequest {
            q_load_tons: 1500.0,
            t_wb_f: 64.0,
            current: Some(Settings { t_cws_f: 88.0, n_fans: 2 }),
            tariff: Some((&tariff, t0())),
        };
        let rec = advise(&b, &plant, &req, &small_swarm(), t0()).unwrap();
        let d = rec.baseline_delta.unwrap();
        assert!(d.power_kw < 0.0);
        assert!((d.cost_rate_per_h.unwrap() - 0.2 * d.power_kw).abs() < 1e-12);
        assert!((rec.predicted_cost_rate_per_h.unwrap() - 0.2 * rec.predicted_power_kw).abs() < 1e-12);
        let far = AdviseRequest {
            t_wb_f: 120.0,
            ..req
        };
        assert!(!advise(&b, &plant, &far, &small_swarm(), t0()).unwrap().warnings.is_empty());
    }

    #[test]
    fn savings_never_negative() {
        let b = bundle();
        let plant = PlantConfig::default();
        let month = YearMonth::new(2023, 2).unwrap();
        let n = (month.hours() * 4.0) as usize;
        let rows: Vec<SampleRecord> = (0..n)
            .map(|k| {
                let q = if k % 96 < 20 { 0.0 } else { 600.0 + (k % 50) as f64 * 20.0 };
                SampleRecord {
                    timestamp: t0() + Duration::minutes(15 * k as i64),
                    t_wb: 60.0 + (k % 37) as f64 * 0.2,
                    q_load: q,
                    t_cws: 70.0 + (k % 7) as f64 * 2.0,
                    t_cwr: 80.0,
                    n_fans: FAN_STAGES[k % 4],
                    p_chiller: 0.0,
                    p_fan: 0.0,
                    p_pump: 0.0,
                    q_rej: 0.0,
                    source: Source::Measured,
                }
            })
            .collect();
        let swarm = SwarmConfig {
            n_particles_per_stratum: 2,
            n_iterations: 3,
            ..small_swarm()
        };
        let out = savings_pipeline(
            &b,
            &plant,
            &Dataset::new("fixture", rows),
            &TariffSchedule::synthetic_example(),
            &[month],
            &swarm,
        )
        .unwrap();
        let r = &out.reports[0];
        assert!(r.optimized.total <= r.baseline.total);
        assert!(out.intervals.iter().all(|d| d.optimized_kw <= d.baseline_kw));
        assert!(out.intervals.iter().filter(|d| d.q_load_tons == 0.0).all(|d| d.baseline_kw == 0.0));
    }
}
