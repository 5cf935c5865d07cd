use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use leakloc::calibration::CalibrationTable;
use leakloc::fixture;
use leakloc::hydraulics::{self, FlowMeasurement, PipeSpec};
use leakloc::manifest::{self, RunOptions, SimulationPlan};
use leakloc::pipeline::{self, PipelineOptions};
use leakloc::reproduce::{self, TableReport};
use leakloc::run::{self, CalibrationSource, RunReport};
use leakloc::signal::{DeploymentGeometry, RecordingMeta};
use leakloc::xcorr::{self, Classification, DelayEstimate};
use leakloc::{Axis, Error, Result, Scenario, Side};

#[derive(Parser, Debug)]
#[command(name = "leakloc", version, about = "Pipe leak detection and localization from paired vibration sensors")]
struct Cli {
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    /// Directory for files written by xcorr, calibrate and simulate.
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Base RNG seed for simulate.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Leak/no-leak classification threshold on |lag|, seconds.
    #[arg(long, global = true, allow_negative_numbers = true, value_name = "S")]
    threshold: Option<f64>,
    /// Override t_buffer for every condition, seconds.
    #[arg(long, global = true, allow_negative_numbers = true, value_name = "S")]
    buffer: Option<f64>,
    /// Relative accuracy target for ideal-delay bounds.
    #[arg(long, global = true, allow_negative_numbers = true, value_name = "E")]
    epsilon: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Wave speed c = Q / A from flow and inner diameter.
    Speed {
        #[arg(long, allow_negative_numbers = true, value_name = "LPM")]
        flow: f64,
        #[arg(long, value_name = "M", default_value_t = hydraulics::ABS_PIPE_INNER_DIAMETER_M)]
        diameter: f64,
    },
    /// Cross-correlate two sensor CSV files.
    Xcorr {
        left: PathBuf,
        right: PathBuf,
        /// Single axis (x, y or z); all three when omitted.
        #[arg(long, value_parser = parse_axis)]
        axis: Option<Axis>,
    },
    /// Localize every pair of a run manifest or fixture.
    Localize { manifest: PathBuf },
    /// Fit t_noLeak and t_buffer from a run manifest; writes calibration.json.
    Calibrate { manifest: PathBuf },
    /// Generate fixtures from a key=value or JSON config.
    Simulate { config: PathBuf },
    /// Recompute a published table and diff it against the printed values.
    Reproduce {
        #[arg(long)]
        table: u8,
    },
}

fn parse_axis(s: &str) -> std::result::Result<Axis, String> {
    Axis::parse(s).ok_or_else(|| format!("unknown axis {s:?}, expected x, y or z"))
}

const CALIBRATION_FILE: &str = "calibration.json";

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn execute(cli: &Cli) -> Result<String> {
    let overrides = RunOptions {
        threshold_s: cli.threshold,
        t_buffer_s: cli.buffer,
        epsilon: cli.epsilon,
        ..RunOptions::default()
    };
    check_overrides(&overrides)?;
    let out_dir = cli.output.clone().unwrap_or_else(|| PathBuf::from("."));
    match &cli.command {
        Command::Speed { flow, diameter } => speed(cli.json, *flow, *diameter),
        Command::Xcorr { left, right, axis } => {
            xcorr_cmd(cli.json, left, right, *axis, &overrides, &out_dir)
        }
        Command::Localize { manifest } => {
            let run = manifest::load_run(manifest)?;
            let report = run::localize_run(&run, &overrides)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(if cli.json {
                to_json(&report)
            } else {
                localize_table(&report)
            })
        }
        Command::Calibrate { manifest } => {
            let run = manifest::load_run(manifest)?;
            let table = run::calibrate_run(&run, &overrides)?;
            let path = out_dir.join(CALIBRATION_FILE);
            write_file(&path, to_json(&table))?;
            Ok(if cli.json {
                to_json(&table)
            } else {
                calibration_table(&table, &path)
            })
        }
        Command::Simulate { config } => {
            let mut plan: SimulationPlan = manifest::load_config(config)?;
            if let Some(seed) = cli.seed {
                plan.rng_seed = seed;
            }
            let (_, fixtures) = manifest::write_plan(&plan, &out_dir)?;
            let run_path = out_dir.join(manifest::RUN_MANIFEST_FILE);
            Ok(if cli.json {
                to_json(&json!({ "run_manifest": run_path, "fixtures": fixtures }))
            } else {
                let leaks = fixtures.iter().filter(|f| f.scenario == Scenario::Leak).count();
                format!(
                    "wrote {} fixtures ({} leak, {} no_leak) and {}\n",
                    fixtures.len(),
                    leaks,
                    fixtures.len() - leaks,
                    run_path.display()
                )
            })
        }
        Command::Reproduce { table } => {
            let report = reproduce::reproduce(*table, overrides.epsilon())?;
            Ok(if cli.json {
                to_json(&report)
            } else {
                reproduce_table(&report)
            })
        }
    }
}

fn check_overrides(o: &RunOptions) -> Result<()> {
    if let Some(t) = o.threshold_s.filter(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::schema(format!("--threshold must be positive, got {t}")));
    }
    if let Some(b) = o.t_buffer_s.filter(|b| !b.is_finite()) {
        return Err(Error::schema(format!("--buffer must be finite, got {b}")));
    }
    if let Some(e) = o.epsilon.filter(|e| !(0.0..1.0).contains(e)) {
        return Err(Error::schema(format!("--epsilon must lie in [0, 1), got {e}")));
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn write_file(path: &Path, contents: String) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `digits` significant digits, trailing zeros kept.
fn significant(v: f64, digits: i32) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let decimals = (digits - 1 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

fn speed(as_json: bool, flow_lpm: f64, diameter_m: f64) -> Result<String> {
    let spec = PipeSpec::new(diameter_m).map_err(|e| Error::schema(e.to_string()))?;
    let flow = FlowMeasurement::new(flow_lpm, 0.0).map_err(|e| Error::schema(e.to_string()))?;
    let c = hydraulics::wave_speed(&flow, &spec);
    Ok(if as_json {
        to_json(&json!({
            "flow_lpm": flow_lpm,
            "diameter_m": diameter_m,
            "area_m2": hydraulics::pipe_area(&spec),
            "wave_speed_mps": c,
        }))
    } else {
        format!("{} m/s\n", significant(c, 4))
    })
}

fn csv_meta(side: Side) -> RecordingMeta {
    RecordingMeta {
        sensor_id: match side {
            Side::Left => "sensor2".into(),
            Side::Right => "sensor1".into(),
        },
        pressure_kgfcm2: 0.0,
        flow_lpm: 0.0,
        scenario: Scenario::NoLeak,
        side,
    }
}

fn class_str(est: &DelayEstimate) -> &'static str {
    est.classification.map_or("-", Classification::as_str)
}

fn xcorr_cmd(
    as_json: bool,
    left: &Path,
    right: &Path,
    axis: Option<Axis>,
    overrides: &RunOptions,
    out_dir: &Path,
) -> Result<String> {
    // Plain CSVs carry no geometry; any valid spacing works since nothing is localized.
    let geometry = DeploymentGeometry::equidistant(0.5)?;
    let pair = fixture::load_recording_pair(
        left,
        right,
        csv_meta(Side::Left),
        csv_meta(Side::Right),
        geometry,
    )?;
    let opts: PipelineOptions = overrides.pipeline_options();
    let (l, r) = pipeline::prepare_pair(&pair, &opts)?;
    let axes: Vec<Axis> = axis.map_or_else(|| Axis::ALL.to_vec(), |a| vec![a]);
    let mut rows = Vec::new();
    for a in axes {
        let (corr, est, _) = pipeline::correlate_axis(&l, &r, a, &opts)?;
        let path = out_dir.join(format!("xcorr_{a}.csv"));
        write_file(&path, xcorr::correlation_csv_string(&corr))?;
        rows.push((est, path));
    }
    if as_json {
        let items: Vec<_> = rows
            .iter()
            .map(|(est, path)| json!({ "estimate": est, "csv": path }))
            .collect();
        return Ok(to_json(&items));
    }
    let mut s = format!(
        "{:<5} {:>9} {:>8} {:>7}  {:<7} {}\n",
        "axis", "lag_s", "samples", "peak", "class", "csv"
    );
    for (est, path) in &rows {
        let _ = writeln!(
            s,
            "{:<5} {:>9.2} {:>8} {:>7.2}  {:<7} {}",
            est.axis.as_str(),
            est.peak_lag_s,
            est.peak_lag_samples,
            est.peak_value,
            class_str(est),
            path.display()
        );
    }
    Ok(s)
}

fn opt2(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.2}"))
}

fn localize_table(report: &RunReport) -> String {
    let source = match &report.calibration {
        CalibrationSource::File(p) => format!("file {p}"),
        CalibrationSource::InRun => "fitted from the run's no-leak pairs".into(),
        CalibrationSource::None => "none".into(),
    };
    let mut s = format!("calibration: {source}\n");
    let _ = write!(
        s,
        "{:<24} {:>5} {:>5} {:>7}  {:<20}",
        "pair", "p", "L", "ref", "class x/y/z"
    );
    for a in Axis::ALL {
        let _ = write!(s, " {:>8} {:>8}", format!("{a} d_l"), format!("{a} err%"));
    }
    s.push('\n');
    for p in &report.pairs {
        let _ = write!(
            s,
            "{:<24} {:>5.2} {:>5.2} {:>7}  ",
            p.label,
            p.pressure_kgfcm2,
            p.spacing_l_m,
            opt2(p.reference_distance_m)
        );
        match (&p.axes, &p.error) {
            (Some(axes), _) => {
                let class: Vec<_> = axes.iter().map(|a| class_str(&a.estimate)).collect();
                let _ = write!(s, "{:<20}", class.join("/"));
                for a in axes {
                    let flag = if a.localization.out_of_range { "*" } else { "" };
                    let _ = write!(
                        s,
                        " {:>8} {:>8}",
                        format!("{:.2}{flag}", a.localization.d_l_m),
                        opt2(a.localization.error_percent)
                    );
                }
            }
            (None, err) => {
                let _ = write!(s, "error: {}", err.as_deref().unwrap_or("unknown"));
            }
        }
        s.push('\n');
    }
    let _ = writeln!(
        s,
        "{} pairs, {} failed; * marks d_l outside [0, L]; distances from sensor 1 (right)",
        report.pairs.len(),
        report.failed()
    );
    s
}

fn calibration_table(table: &CalibrationTable, path: &Path) -> String {
    let mut s = format!(
        "{:>5} {:>5} {:<4} {:>10} {:>10} {:>9} {:>9}\n",
        "p", "L", "axis", "t_noLeak", "t_buffer", "baseline", "leak_fit"
    );
    for e in &table.entries {
        let _ = writeln!(
            s,
            "{:>5.2} {:>5.2} {:<4} {:>10.2} {:>10.2} {:>9} {:>9}",
            e.pressure_kgfcm2,
            e.spacing_l_m,
            e.axis.as_str(),
            e.t_no_leak_s,
            e.t_buffer_s,
            e.baseline_pairs,
            e.buffer_fit_pairs
        );
    }
    let _ = writeln!(s, "wrote {}", path.display());
    s
}

fn reproduce_table(report: &TableReport) -> String {
    let mut s = format!("Table {}: {}\n", report.table, report.title);
    let _ = writeln!(
        s,
        "{:<32} {:>10} {:>10} {:>8} {:>7}  status",
        "cell", "published", "recomputed", "|diff|", "tol"
    );
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{:<32} {:>10} {:>10.4} {:>8} {:>7.4}  {}",
            c.label,
            c.published.map_or_else(|| "-".into(), |v| format!("{v:.4}")),
            c.recomputed,
            c.abs_diff.map_or_else(|| "-".into(), |v| format!("{v:.4}")),
            c.tolerance,
            c.status
        );
    }
    let _ = writeln!(
        s,
        "{} cells: {} pass, {} fail, {} documented deviation, {} not printed",
        report.cells.len(),
        report.count(reproduce::CellStatus::Pass),
        report.count(reproduce::CellStatus::Fail),
        report.count(reproduce::CellStatus::DocumentedDeviation),
        report.count(reproduce::CellStatus::NotPrinted)
    );
    s
}
