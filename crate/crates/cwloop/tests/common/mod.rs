//! A small bundle trained on one simulated July, shared by the integration
//! tests.

#![allow(dead_code)]

use std::sync::OnceLock;

use chrono::{NaiveDate, NaiveDateTime};
use cwloop_core::dataset::{self, CleaningRules, ConditionsSource, Dataset, SampleRecord, Source, SweepSpec};
use cwloop_core::gbt::Hyperparams;
use cwloop_core::plant::{self, PlantConfig};
use cwloop_core::surrogate::{self, SurrogateBundle};
use cwloop_core::weather::{self, SyntheticClimate, SyntheticLoad};

pub fn at(y: i32, m: u32, d: u32, h: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, 0, 0).unwrap()
}

pub fn july_spec() -> SweepSpec {
    SweepSpec {
        t_cws_values: vec![62.5, 67.5, 72.5, 77.5, 82.5, 87.5],
        n_fans_values: vec![2, 4, 6, 8],
        months: vec![7],
        source: ConditionsSource::Synthetic { year: 2023, seed: 3 },
        setpoint_jitter_f: 5.0,
        jitter_seed: 3,
    }
}

pub fn hyper() -> Hyperparams {
    Hyperparams {
        n_trees: 40,
        ..Hyperparams::default()
    }
}

pub fn small_bundle() -> &'static SurrogateBundle {
    static B: OnceLock<SurrogateBundle> = OnceLock::new();
    B.get_or_init(|| {
        let plant = PlantConfig::default();
        let spec = july_spec();
        let cond = weather::synthetic_year(2023, 3);
        let sweep = dataset::run_sweep(&plant, &spec, &cond).unwrap();
        let (clean, _) = dataset::clean(&sweep, &CleaningRules::default());
        surrogate::train_bundle(&clean, &hyper(), at(2024, 1, 1, 0)).unwrap()
    })
}

/// Hourly operation under the default policy from `start`.
pub fn measured(start: NaiveDateTime, hours: usize, seed: u64) -> Dataset {
    let cond = weather::synthetic_conditions(start, hours, 60, &SyntheticClimate::default(), &SyntheticLoad::default(), seed);
    let (w, l) = weather::split_conditions(&cond);
    let states = plant::simulate_year(&PlantConfig::default(), &w, &l, &cwloop::config::default_policy()).unwrap();
    let records = cond
        .iter()
        .zip(&states)
        .map(|(c, s)| SampleRecord::from_state(c.timestamp, s, Source::Measured))
        .collect();
    Dataset::new("measured", records)
}
