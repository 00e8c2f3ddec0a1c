//! More load should not call for fewer fans: along each wet-bulb column of
//! the default table the optimal fan stage rises or holds in almost every
//! step.

use chrono::NaiveDate;
use cwloop_core::advisory::{build_table, TableGrids};
use cwloop_core::dataset::{self, CleaningRules, SweepSpec};
use cwloop_core::gbt::Hyperparams;
use cwloop_core::plant::PlantConfig;
use cwloop_core::pso::SwarmConfig;
use cwloop_core::surrogate::train_bundle;
use cwloop_core::weather::synthetic_year;

const MIN_MONOTONE_SHARE: f64 = 0.9;

#[test]
fn fan_stages_rise_with_load() {
    let plant = PlantConfig::default();
    let spec = SweepSpec {
        months: vec![7, 8],
        ..SweepSpec::standard(2024, 7)
    };
    let sweep = dataset::run_sweep(&plant, &spec, &synthetic_year(2024, 7)).unwrap();
    let (clean, _) = dataset::clean(&sweep, &CleaningRules::default());
    let at = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let bundle = train_bundle(&clean, &Hyperparams::default(), at).unwrap();
    let table = build_table(&bundle, &plant, &TableGrids::default(), &SwarmConfig::default()).unwrap();

    let (mut rising, mut pairs) = (0, 0);
    for j in 0..table.t_wb_grid.len() {
        for w in table.cells.windows(2) {
            pairs += 1;
            if w[1][j].n_fans_opt >= w[0][j].n_fans_opt {
                rising += 1;
            }
        }
    }
    let share = f64::from(rising) / f64::from(pairs);
    assert!(share >= MIN_MONOTONE_SHARE, "{rising}/{pairs} steps keep or add fans");
}
