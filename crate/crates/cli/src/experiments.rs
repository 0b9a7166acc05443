//! The four subcommands. Each takes a validated config and an output
//! directory, writes its CSVs plus `summary.toml`, and returns the summary.

use pulsecal_core::analysis::{phase_stability_check, sweep_second_order, SweepGrid};
use pulsecal_core::ilc::{deconvolution_baseline, error_contraction_check_with, run_calibration};
use pulsecal_core::signal::{accumulated_phase, overshoot, phase_deviation};
use pulsecal_core::{CalibrationResult, Error, TransferFunction};
use toml::{Table, Value};

use crate::config::{ExperimentConfig, SnapshotSpec};
use crate::error::{CliError, Result};
use crate::output::OutDir;

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub snapshots: Option<SnapshotSpec>,
    pub oversampling: Option<usize>,
}

impl Overrides {
    pub fn apply(
        &self,
        mut config: ExperimentConfig,
    ) -> std::result::Result<ExperimentConfig, String> {
        if let Some(s) = self.snapshots {
            config.experiment.snapshots = s;
        }
        if let Some(m) = self.oversampling {
            config.experiment.oversampling = m;
        }
        config.validate()?;
        Ok(config)
    }
}

fn write_summary(out: &OutDir, config: &ExperimentConfig, summary: Table) -> Result<Table> {
    let mut doc = config.to_toml_table();
    doc.insert("summary".into(), Value::Table(summary.clone()));
    let text = toml::to_string(&doc).expect("summary serializes");
    out.write_text("summary.toml", &text)?;
    Ok(summary)
}

fn float(v: f64) -> Value {
    Value::Float(v)
}

/// One calibration plus its one-shot baseline.
pub struct Calibration {
    pub result: CalibrationResult,
    pub baseline: std::result::Result<CalibrationResult, Error>,
}

/// Calibration plus baseline of the configured plant at sampling period `tau`.
pub fn calibrate_at(
    config: &ExperimentConfig,
    reference: &TransferFunction,
    tau: f64,
) -> Result<Calibration> {
    let horizon = config
        .horizon_for(tau)
        .map_err(|m| CliError::config("", m))?;
    let plant = config.true_plant();
    let desired = config.desired();
    let cal = config.calibration_config();
    let initial = config.initial_awg(tau, horizon)?;
    let result = run_calibration(&plant, reference, &desired, &cal, &initial)?;
    let baseline = deconvolution_baseline(
        &plant,
        reference,
        &desired,
        tau,
        horizon,
        cal.oversampling,
        cal.lifting,
        cal.sample_error_tolerance,
    );
    // a reference that cannot be inverted at all is a config problem; an
    // inverse that blows past the guard is a result worth reporting
    if let Err(e) = &baseline {
        if !matches!(e, Error::InverseOverflow { .. }) {
            return Err(CliError::Model(e.clone()));
        }
    }
    Ok(Calibration { result, baseline })
}

pub fn cmd_calibrate(config: &ExperimentConfig, out: &OutDir) -> Result<Table> {
    let reference = config.reference_model()?;
    let tau = config.experiment.tau;
    let run = calibrate_at(config, &reference, tau)?;
    let res = &run.result;
    let target = config.experiment.amplitude;

    out.history("history.csv", res)?;
    out.awg("final_awg.csv", &res.final_awg)?;
    out.trajectory("final_trajectory.csv", &res.final_trajectory)?;
    out.snapshots("snapshots.csv", res)?;

    let mut s = Table::new();
    s.insert("command".into(), Value::String("calibrate".into()));
    s.insert("status".into(), Value::String(res.status.as_str().into()));
    s.insert("iterations".into(), Value::Integer(res.iterations() as i64));
    s.insert(
        "final_sampled_error".into(),
        float(res.final_sampled_error()),
    );
    s.insert(
        "final_signed_sampled_error".into(),
        float(res.last().signed_sampled_error),
    );
    s.insert(
        "final_continuous_error".into(),
        float(res.final_continuous_error()),
    );
    s.insert(
        "overshoot".into(),
        float(overshoot(&res.final_trajectory, target)),
    );

    let linear = &config.true_plant().linear;
    let cal = config.calibration_config();
    let rho = error_contraction_check_with(
        linear,
        &reference,
        tau,
        config.horizon(),
        cal.learning_rate,
        cal.lifting,
    )?;
    s.insert("spectral_radius".into(), float(rho));
    let pc = phase_stability_check(linear, &reference, tau, config.horizon())?;
    s.insert(
        "max_phase_difference_deg".into(),
        float(pc.max_abs_difference),
    );
    s.insert(
        "phase_verdict".into(),
        Value::String(pc.verdict.as_str().into()),
    );

    match &run.baseline {
        Ok(b) => {
            out.awg("baseline_awg.csv", &b.final_awg)?;
            out.trajectory("baseline_trajectory.csv", &b.final_trajectory)?;
            s.insert(
                "baseline_status".into(),
                Value::String(b.status.as_str().into()),
            );
            s.insert(
                "baseline_sampled_error".into(),
                float(b.final_sampled_error()),
            );
            s.insert(
                "baseline_continuous_error".into(),
                float(b.final_continuous_error()),
            );
            s.insert(
                "baseline_overshoot".into(),
                float(overshoot(&b.final_trajectory, target)),
            );
        }
        Err(e) => {
            s.insert(
                "baseline_status".into(),
                Value::String("amplitude-capped".into()),
            );
            s.insert("baseline_error".into(), Value::String(e.to_string()));
        }
    }
    write_summary(out, config, s)
}

pub fn cmd_sweep(config: &ExperimentConfig, out: &OutDir) -> Result<Table> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("", "missing [sweep] section"))?;
    let grid = sweep_second_order(
        &sweep.t1,
        &sweep.t2,
        config.experiment.tau,
        config.horizon(),
        &config.calibration_config(),
    )?;
    out.grid("overshoot.csv", &grid, &grid.overshoot)?;
    out.grid("decay_time.csv", &grid, &grid.decay_time)?;

    let mut s = Table::new();
    s.insert("command".into(), Value::String("sweep".into()));
    s.insert(
        "failed_cells".into(),
        Value::Integer(grid.failed_cells as i64),
    );
    s.insert(
        "overshoot_decreasing_steps".into(),
        Value::Integer(SweepGrid::decreasing_steps(&grid.overshoot) as i64),
    );
    s.insert(
        "decay_time_decreasing_steps".into(),
        Value::Integer(SweepGrid::decreasing_steps(&grid.decay_time) as i64),
    );
    write_summary(out, config, s)
}

pub fn cmd_stability(config: &ExperimentConfig, out: &OutDir) -> Result<Table> {
    let tau = config.experiment.tau;
    let horizon = config.horizon();
    let linear = config.true_plant().linear;
    let run_loop = config.stability.as_ref().is_none_or(|s| s.calibrate);

    let mut rows = Vec::new();
    let mut models = Table::new();
    for (name, reference) in config.named_references()? {
        let pc = phase_stability_check(&linear, &reference, tau, horizon)?;
        out.phase(&format!("phase_{name}.csv"), &pc)?;

        let mut entry = Table::new();
        entry.insert(
            "max_phase_difference_deg".into(),
            float(pc.max_abs_difference),
        );
        entry.insert(
            "stable_prediction".into(),
            Value::Boolean(pc.stable_prediction),
        );
        entry.insert("verdict".into(), Value::String(pc.verdict.as_str().into()));
        let mut row = vec![
            name.clone(),
            crate::output::num(pc.max_abs_difference),
            pc.stable_prediction.to_string(),
            pc.verdict.as_str().to_string(),
        ];
        if run_loop {
            let res = run_calibration(
                &config.true_plant(),
                &reference,
                &config.desired(),
                &config.calibration_config(),
                &config.initial_awg(tau, horizon)?,
            )?;
            entry.insert("status".into(), Value::String(res.status.as_str().into()));
            entry.insert(
                "final_sampled_error".into(),
                float(res.final_sampled_error()),
            );
            row.push(res.status.as_str().to_string());
            row.push(crate::output::num(res.final_sampled_error()));
        }
        rows.push(row);
        models.insert(name, Value::Table(entry));
    }
    let mut header = vec![
        "model",
        "max_abs_difference",
        "stable_prediction",
        "verdict",
    ];
    if run_loop {
        header.extend(["status", "final_sampled_error"]);
    }
    out.write_rows("verdicts.csv", &header, rows)?;

    let mut s = Table::new();
    s.insert("command".into(), Value::String("stability".into()));
    s.insert("models".into(), Value::Table(models));
    write_summary(out, config, s)
}

pub fn cmd_ramsey(config: &ExperimentConfig, out: &OutDir) -> Result<Table> {
    let ramsey = config
        .ramsey
        .as_ref()
        .ok_or_else(|| CliError::config("", "missing [ramsey] section"))?;
    let reference = config.reference_model()?;
    let desired = config.desired();

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &tau in &ramsey.taus {
        let run = calibrate_at(config, &reference, tau)?;
        let label = format!("tau{tau}");
        let dev = phase_deviation(&accumulated_phase(&run.result.final_trajectory), &desired);
        out.series(
            &format!("delta_theta_iterative_{label}.csv"),
            &run.result.final_trajectory,
            &dev,
        )?;
        let terminal = *dev.last().expect("non-empty trajectory");

        let mut entry = Table::new();
        entry.insert("tau".into(), float(tau));
        entry.insert(
            "status".into(),
            Value::String(run.result.status.as_str().into()),
        );
        entry.insert("terminal_delta_theta".into(), float(terminal));
        let mut row = vec![
            crate::output::num(tau),
            run.result.status.as_str().to_string(),
            crate::output::num(terminal),
        ];
        match &run.baseline {
            Ok(b) => {
                let bdev = phase_deviation(&accumulated_phase(&b.final_trajectory), &desired);
                out.series(
                    &format!("delta_theta_baseline_{label}.csv"),
                    &b.final_trajectory,
                    &bdev,
                )?;
                let bt = *bdev.last().expect("non-empty trajectory");
                entry.insert("baseline_terminal_delta_theta".into(), float(bt));
                row.push(crate::output::num(bt));
            }
            Err(_) => row.push(crate::output::num(f64::NAN)),
        }
        rows.push(row);
        runs.push(Value::Table(entry));
    }
    out.write_rows(
        "ramsey.csv",
        &[
            "tau",
            "status",
            "terminal_delta_theta",
            "baseline_terminal_delta_theta",
        ],
        rows,
    )?;

    let mut s = Table::new();
    s.insert("command".into(), Value::String("ramsey".into()));
    s.insert("runs".into(), Value::Array(runs));
    write_summary(out, config, s)
}
