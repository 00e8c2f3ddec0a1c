use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDateTime;
use clap::{Args, Parser, Subcommand};
use cwloop::ingest::{self, ColumnMapping};
use cwloop::service::{self, AppState, ServiceConfig};
use cwloop::{bundle, config, files, table};
use cwloop_core::advisory::{self, AdviseRequest, Settings, TableGrids};
use cwloop_core::dataset::{self, CleaningRules, Column, ConditionsSource, Dataset, SampleRecord, Source, SweepSpec};
use cwloop_core::gbt::Hyperparams;
use cwloop_core::objective::{LoopObjective, Mode};
use cwloop_core::plant::{self, PlantConfig};
use cwloop_core::pso::{self, SwarmConfig};
use cwloop_core::surrogate;
use cwloop_core::tariff::{self, TariffSchedule, YearMonth};
use cwloop_core::weather;

#[derive(Parser)]
#[command(name = "cwloop", version, about = "Condenser water loop simulation, surrogate training and setpoint optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the reference plant hour by hour under a settings policy.
    Simulate {
        /// Plant configuration (defaults when absent).
        #[arg(long)]
        config: Option<PathBuf>,
        /// `timestamp,t_wb_f,q_load_tons` CSV.
        #[arg(long, conflicts_with = "synthetic_year")]
        weather: Option<PathBuf>,
        /// Use the built-in synthetic climate for this year instead.
        #[arg(long)]
        synthetic_year: Option<i32>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Settings policy TOML; approach reset at 7 °F on 8 fans by default.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic hourly conditions file.
    SynthWeather {
        #[arg(long)]
        year: i32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the setpoint and fan-stage sweep that produces training data.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sweep spec TOML; the standard synthetic sweep when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Statistics over a dataset file
    Analyze {
        #[command(subcommand)]
        what: Analyze,
    },
    /// Train the surrogate bundle.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        hyper: Option<PathBuf>,
        /// Keep plant-off rows.
        #[arg(long)]
        no_clean: bool,
    },
    /// Score every bundle model against a dataset.
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Retrain with measured rows weighted in.
    Refine {
        #[arg(long)]
        bundle: PathBuf,
        /// The synthetic data the bundle was trained on.
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long)]
        measured: PathBuf,
        /// Column mapping for the measured file; dataset layout when absent.
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        weight: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimal setpoint and fan count at one operating point.
    Optimize {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        load: f64,
        #[arg(long)]
        twb: f64,
        #[command(flatten)]
        price: PriceArgs,
        /// Current settings as `t_cws,n_fans`.
        #[arg(long, value_parser = parse_settings)]
        baseline: Option<Settings>,
        #[arg(long)]
        seed: Option<u64>,
        /// Unit attraction multipliers instead of random draws.
        #[arg(long)]
        deterministic: bool,
    },
    /// Recommendation as JSON, as the service returns it.
    Advise {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        load: f64,
        #[arg(long)]
        twb: f64,
        #[arg(long, value_parser = parse_settings)]
        current: Option<Settings>,
        #[command(flatten)]
        price: PriceArgs,
    },
    /// Build the look-up table; `.json` output is the heatmap file, anything
    /// else CSV.
    Table {
        #[command(flatten)]
        model: ModelArgs,
        /// TOML with `q_load_tons` and `t_wb_f` arrays.
        #[arg(long)]
        grids: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the JSON heatmap file here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Monthly bill for an interval power series.
    Bill {
        #[arg(long)]
        tariff: PathBuf,
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        month: YearMonth,
    },
    /// Compare two series, or run the measured-versus-optimized pipeline.
    Savings {
        #[arg(long)]
        tariff: PathBuf,
        #[arg(long, required = true)]
        month: Vec<YearMonth>,
        #[arg(long, requires = "optimized", conflicts_with = "measured")]
        baseline: Option<PathBuf>,
        #[arg(long)]
        optimized: Option<PathBuf>,
        #[arg(long, requires = "bundle")]
        measured: Option<PathBuf>,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        plant: Option<PathBuf>,
        #[arg(long)]
        swarm: Option<PathBuf>,
        /// Per-interval baseline and optimized power.
        #[arg(long)]
        intervals: Option<PathBuf>,
    },
    /// Serve the /v1 JSON API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        plant: Option<PathBuf>,
        #[arg(long)]
        tariff: Option<PathBuf>,
        /// JSON table from `table --json`.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        swarm: Option<PathBuf>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, env = "CWLOOP_ADMIN_TOKEN", hide_env_values = true)]
        admin_token: Option<String>,
    },
    /// Write every configuration file with its defaults.
    InitConfig {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum Analyze {
    /// Pearson correlation matrix.
    Corr {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated column names; all numeric columns when absent.
        #[arg(long, value_delimiter = ',')]
        cols: Vec<Column>,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    plant: Option<PathBuf>,
    /// Swarm settings TOML.
    #[arg(long)]
    swarm: Option<PathBuf>,
}

#[derive(Args)]
struct PriceArgs {
    #[arg(long, requires = "at")]
    tariff: Option<PathBuf>,
    /// Local timestamp, e.g. 2023-07-12T14:00.
    #[arg(long, value_parser = parse_time)]
    at: Option<NaiveDateTime>,
}

fn parse_settings(s: &str) -> Result<Settings, String> {
    let (t, n) = s.split_once(',').ok_or("expected `t_cws,n_fans`")?;
    Ok(Settings {
        t_cws_f: t.trim().parse().map_err(|_| format!("bad setpoint `{t}`"))?,
        n_fans: n.trim().parse().map_err(|_| format!("bad fan count `{n}`"))?,
    })
}

fn parse_time(s: &str) -> Result<NaiveDateTime, String> {
    files::parse_timestamp(s).ok_or_else(|| format!("bad timestamp `{s}`"))
}

fn now() -> NaiveDateTime {
    chrono::Local::now().naive_local()
}

fn plant_or_default(p: Option<&Path>) -> Result<PlantConfig> {
    Ok(match p {
        Some(p) => config::load_plant(p)?,
        None => PlantConfig::default(),
    })
}

fn swarm_or_default(p: Option<&Path>) -> Result<SwarmConfig> {
    Ok(match p {
        Some(p) => config::load_swarm(p)?,
        None => SwarmConfig::default(),
    })
}

fn measured_data(path: &Path, mapping: Option<&Path>) -> Result<Dataset> {
    let mapping = match mapping {
        Some(m) => config::load_toml::<ColumnMapping>(m)?,
        None => ColumnMapping::identity(),
    };
    let (data, report) = ingest::ingest_measured(path, &mapping)?;
    if !report.rejected.is_empty() {
        eprintln!("{report}");
    }
    Ok(data)
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("finite values"));
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config: cfg,
            weather: wfile,
            synthetic_year,
            seed,
            policy,
            out,
        } => {
            let plant = plant_or_default(cfg.as_deref())?;
            let conditions = match (wfile, synthetic_year) {
                (Some(w), _) => files::read_conditions(&w)?,
                (None, Some(y)) => weather::synthetic_year(y, seed),
                (None, None) => bail!("give --weather or --synthetic-year"),
            };
            let policy = match policy {
                Some(p) => config::load_policy(&p)?,
                None => config::default_policy(),
            };
            let (w, l) = weather::split_conditions(&conditions);
            let states = plant::simulate_year(&plant, &w, &l, &policy)?;
            let records = conditions
                .iter()
                .zip(&states)
                .map(|(c, s)| SampleRecord::from_state(c.timestamp, s, Source::Synthetic))
                .collect();
            let data = Dataset::new("simulate", records);
            files::write_dataset(&out, &data)?;
            let kwh: f64 = data.records.iter().map(SampleRecord::total_power).sum();
            println!("{} hours simulated, {:.0} kWh loop energy -> {}", data.len(), kwh, out.display());
        }
        Command::SynthWeather { year, seed, out } => {
            let c = weather::synthetic_year(year, seed);
            files::write_conditions(&out, &c)?;
            println!("{} hours -> {}", c.len(), out.display());
        }
        Command::Sweep { config: cfg, spec, out } => {
            let plant = plant_or_default(cfg.as_deref())?;
            let spec = match spec {
                Some(p) => config::load_sweep(&p)?,
                None => SweepSpec::standard(2023, 1),
            };
            let conditions = match &spec.source {
                ConditionsSource::File { path } => files::read_conditions(Path::new(path))?,
                ConditionsSource::Synthetic { year, seed } => weather::synthetic_year(*year, *seed),
            };
            let data = dataset::run_sweep(&plant, &spec, &conditions)?;
            files::write_dataset(&out, &data)?;
            println!("{} rows -> {}", data.len(), out.display());
        }
        Command::Analyze {
            what: Analyze::Corr { data, cols },
        } => {
            let d = files::read_dataset(&data)?;
            let cols = if cols.is_empty() { Column::ALL.to_vec() } else { cols };
            let m = dataset::correlation_matrix(&d, &cols)?;
            print!("{:>14}", "");
            for n in &m.columns {
                print!(" {n:>14}");
            }
            println!();
            for (i, a) in m.columns.iter().enumerate() {
                print!("{a:>14}");
                for v in &m.values[i] {
                    print!(" {v:>14.4}");
                }
                println!();
            }
        }
        Command::Train {
            data,
            out,
            hyper,
            no_clean,
        } => {
            let hp = match hyper {
                Some(p) => config::load_hyperparams(&p)?,
                None => Hyperparams::default(),
            };
            let mut d = files::read_dataset(&data)?;
            if !no_clean {
                let (kept, report) = dataset::clean(&d, &CleaningRules::default());
                eprintln!("cleaning dropped {} of {} rows", report.dropped(), report.input_rows);
                d = kept;
            }
            let b = surrogate::train_bundle(&d, &hp, now())?;
            bundle::save_bundle(&b, &out)?;
            for (name, m, ..) in b.models() {
                match &m.training_metrics {
                    Some(t) => println!("{name:<16} train CV {:.2}%  MBE {:+.3}%", t.cv_rmse_percent, t.mbe_percent),
                    None => println!("{name:<16} train metrics undefined"),
                }
            }
            println!("bundle {} -> {}", b.training_data_fingerprint, out.display());
        }
        Command::Eval { bundle: bfile, data } => {
            let b = bundle::load_bundle(&bfile)?;
            let d = files::read_dataset(&data)?;
            let d = dataset::clean(&d, &CleaningRules::default()).0;
            println!("{:<16} {:>8} {:>10} {:>10} {:>10}", "model", "rows", "RMSE", "CV%", "MBE%");
            for (name, e) in surrogate::evaluate_bundle(&b, &d) {
                match e {
                    Some(e) => println!(
                        "{name:<16} {:>8} {:>10.3} {:>10.2} {:>+10.3}",
                        e.rows, e.metrics.rmse, e.metrics.cv_rmse_percent, e.metrics.mbe_percent
                    ),
                    None => println!("{name:<16} {:>8}", "no rows"),
                }
            }
        }
        Command::Refine {
            bundle: bfile,
            synthetic,
            measured,
            mapping,
            weight,
            out,
        } => {
            let b = bundle::load_bundle(&bfile)?;
            let syn = dataset::clean(&files::read_dataset(&synthetic)?, &CleaningRules::default()).0;
            let meas = measured_data(&measured, mapping.as_deref())?;
            let r = surrogate::refine(&b, &syn, &meas, weight, now())?;
            for m in &r.report.models {
                let f = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:+.3}%"));
                println!(
                    "{:<16} MBE {} -> {} {}",
                    m.model,
                    f(m.mbe_percent_before),
                    f(m.mbe_percent_after),
                    if m.accepted { "kept" } else { "reverted" }
                );
            }
            for w in &r.report.warnings {
                eprintln!("warning: {w}");
            }
            if r.report.rejected {
                println!("no model improved; original bundle written unchanged");
            }
            bundle::save_bundle(&r.bundle, &out)?;
            println!("bundle {} -> {}", r.bundle.training_data_fingerprint, out.display());
        }
        Command::Optimize {
            model,
            load,
            twb,
            price,
            baseline,
            seed,
            deterministic,
        } => {
            let b = bundle::load_bundle(&model.bundle)?;
            let plant = plant_or_default(model.plant.as_deref())?;
            let mut swarm = swarm_or_default(model.swarm.as_deref())?;
            if let Some(s) = seed {
                swarm.seed = s;
            }
            if deterministic {
                swarm.stochastic = false;
            }
            let mode = match (&price.tariff, price.at) {
                (Some(t), Some(at)) => Mode::cost_at(&config::load_tariff(t)?, at)?,
                _ => Mode::Power,
            };
            let obj = LoopObjective::new(&b, &plant, load, twb, mode, &swarm.fan_strata)?;
            let opt = pso::optimize(|t, n| obj.score(t, n), &swarm, baseline.map(|s| (s.t_cws_f, s.n_fans)))?;
            let best = opt.best;
            let p = obj.power(best.t_cws, best.n_fans)?;
            println!("t_cws        {:.1} F", best.t_cws);
            println!("n_fans       {}", best.n_fans);
            match mode {
                Mode::Power => println!("objective    {:.3} kW", best.objective_value),
                Mode::Cost { .. } => println!("objective    {:.4} $/h", best.objective_value),
            }
            println!("power        {:.3} kW (chiller {:.1}, fans {:.1}, pumps {:.1})", p.total_kw(), p.p_chiller_kw, p.p_fan_kw, p.p_pump_kw);
            println!("feasible     {}", best.feasible);
            println!("trace length {}", opt.trace.global_best.len());
            for w in b.envelope.warnings(twb, load) {
                eprintln!("warning: {w}");
            }
        }
        Command::Advise {
            model,
            load,
            twb,
            current,
            price,
        } => {
            let b = bundle::load_bundle(&model.bundle)?;
            let plant = plant_or_default(model.plant.as_deref())?;
            let swarm = swarm_or_default(model.swarm.as_deref())?;
            let tariff = price.tariff.as_deref().map(config::load_tariff).transpose()?;
            let req = AdviseRequest {
                q_load_tons: load,
                t_wb_f: twb,
                current,
                tariff: tariff.as_ref().zip(price.at),
            };
            print_json(&advisory::advise(&b, &plant, &req, &swarm, now())?);
        }
        Command::Table {
            model,
            grids,
            out,
            json,
        } => {
            let b = bundle::load_bundle(&model.bundle)?;
            let plant = plant_or_default(model.plant.as_deref())?;
            let swarm = swarm_or_default(model.swarm.as_deref())?;
            let grids: TableGrids = match grids {
                Some(p) => config::load_toml(&p)?,
                None => TableGrids::default(),
            };
            let t = advisory::build_table(&b, &plant, &grids, &swarm)?;
            table::save_table(&out, &t)?;
            if let Some(j) = json {
                table::save_table_json(&j, &t)?;
            }
            let infeasible = t.iter().filter(|c| !c.feasible).count();
            println!(
                "{}x{} table -> {} ({infeasible} infeasible cells)",
                t.q_load_grid.len(),
                t.t_wb_grid.len(),
                out.display()
            );
        }
        Command::Bill { tariff: tf, series, month } => {
            let t = config::load_tariff(&tf)?;
            let s = files::read_intervals(&series)?;
            let bill = tariff::compute_bill(&t, &s, month)?;
            println!("{} bill under {}", bill.month, t.name);
            for (p, kwh) in &bill.energy_kwh_per_period {
                println!("  {p:<12} {kwh:>12.1} kWh  {:>12}", bill.energy_charge_per_period[p]);
            }
            for (p, kw) in &bill.peak_kw_per_period {
                println!("  {p:<12} {kw:>12.1} kW   {:>12}", bill.demand_charge_per_period[p]);
            }
            println!("  fixed {:>36}", bill.fixed_charge);
            println!("  total {:>36}", bill.total);
        }
        Command::Savings {
            tariff: tf,
            month,
            baseline,
            optimized,
            measured,
            mapping,
            bundle: bfile,
            plant,
            swarm,
            intervals,
        } => {
            let t = config::load_tariff(&tf)?;
            let reports = match (baseline, optimized, measured) {
                (Some(b), Some(o), None) => {
                    let (b, o) = (files::read_intervals(&b)?, files::read_intervals(&o)?);
                    month
                        .iter()
                        .map(|m| tariff::compare_costs(&t, &b, &o, *m))
                        .collect::<Result<Vec<_>, _>>()?
                }
                (None, None, Some(m)) => {
                    let bfile = bfile.context("--measured needs --bundle")?;
                    let b = bundle::load_bundle(&bfile)?;
                    let plant = plant_or_default(plant.as_deref())?;
                    let swarm = swarm_or_default(swarm.as_deref())?;
                    let data = measured_data(&m, mapping.as_deref())?;
                    let outcome = advisory::savings_pipeline(&b, &plant, &data, &t, &month, &swarm)?;
                    if let Some(p) = intervals {
                        write_interval_detail(&p, &outcome.intervals)?;
                    }
                    outcome.reports
                }
                _ => bail!("give --baseline with --optimized, or --measured with --bundle"),
            };
            for r in &reports {
                println!("{r}\n");
            }
        }
        Command::Serve {
            port,
            host,
            bundle: bfile,
            plant,
            tariff: tf,
            table: tbl,
            swarm,
            data_dir,
            admin_token,
        } => {
            let cfg = ServiceConfig {
                bundle: bfile,
                plant,
                tariff: tf,
                table: tbl,
                swarm,
                data_dir,
                admin_token,
            };
            let state = AppState::from_config(cfg)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(state, SocketAddr::new(host, port)))?;
        }
        Command::InitConfig { dir } => {
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let write = |name: &str, text: String| -> Result<()> {
                let p = dir.join(name);
                if p.exists() {
                    bail!("{} exists; not overwriting", p.display());
                }
                std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
                println!("{}", p.display());
                Ok(())
            };
            write("plant.toml", config::to_toml(&PlantConfig::default()))?;
            write("sweep.toml", config::to_toml(&SweepSpec::standard(2023, 1)))?;
            write("hyper.toml", config::to_toml(&Hyperparams::default()))?;
            write("swarm.toml", config::to_toml(&SwarmConfig::default()))?;
            write("tariff.toml", config::to_toml(&TariffSchedule::synthetic_example()))?;
            write("policy.toml", config::to_toml(&config::default_policy()))?;
            write("grids.toml", config::to_toml(&TableGrids::default()))?;
            write("mapping.toml", config::to_toml(&ColumnMapping::identity()))?;
        }
    }
    Ok(())
}

fn write_interval_detail(path: &Path, rows: &[advisory::IntervalDetail]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "timestamp",
        "q_load_tons",
        "t_wb_f",
        "measured_t_cws_f",
        "measured_n_fans",
        "optimized_t_cws_f",
        "optimized_n_fans",
        "baseline_kw",
        "optimized_kw",
    ])?;
    for r in rows {
        w.write_record([
            files::format_timestamp(&r.timestamp),
            r.q_load_tons.to_string(),
            r.t_wb_f.to_string(),
            r.measured.t_cws_f.to_string(),
            r.measured.n_fans.to_string(),
            r.optimized.t_cws_f.to_string(),
            r.optimized.n_fans.to_string(),
            r.baseline_kw.to_string(),
            r.optimized_kw.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
