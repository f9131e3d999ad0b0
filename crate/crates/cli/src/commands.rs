//! One function per subcommand. Each reads its inputs from the data directory
//! and writes its artifacts into the run directory.

use std::fs;
use std::io::Write;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};
use specinfer::campaign::{
    build_posterior, generate_frade, generate_hifi, run_diagnostics, run_optimization, run_sampling, run_screening,
    Case, Optimization, PredictiveSet, Problem, RunConfig, Screening,
};
use specinfer::dram::Chain;
use specinfer::highfidelity::ensemble::MemberFailure;
use specinfer::observations::{write_matrix_csv, ObservationSet};
use specinfer::operator::{assemble_spectrum, SpectrumRecord};
use specinfer::report::{
    correlation_svg, write_correlation_csv, write_kl_csv, write_mode_summary_csv, write_param_summary_csv,
};
use specinfer::sensitivity::write_screening_csv;

use crate::artifacts::{create, load_observations, read_json, save_observations, write_json, Manifest};
use crate::error::{CliError, Stage, StageExt};

pub const OBSERVATIONS: &str = "observations";
pub const HELD_OUT: &str = "heldout";

/// Where a command reads from and writes to.
#[derive(Debug, Clone)]
pub struct Dirs {
    pub out: std::path::PathBuf,
    pub data: std::path::PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub n_members: usize,
    pub completed: usize,
    pub seeds: Vec<u64>,
    pub failures: Vec<MemberFailure>,
    pub t_obs: f64,
    pub t_extrapolate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub n_steps: usize,
    pub burn_in: usize,
    pub acceptance_rate: f64,
    pub first_stage_acceptance: f64,
    pub n_adaptations: usize,
    pub final_proposal_std: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveRecord {
    pub label: String,
    pub coverage_3sd: Option<f64>,
    pub mean_normalized_misfit: Option<f64>,
    pub min_envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub head: usize,
    pub n_samples: usize,
    pub kl_total: f64,
    pub mean_abs_correlation: f64,
    pub predictive: Vec<PredictiveRecord>,
}

fn problem(cfg: &RunConfig, dirs: &Dirs, stage: Stage) -> Result<Problem, CliError> {
    let obs = load_observations(&dirs.data, OBSERVATIONS).stage(stage)?;
    Problem::new(&cfg.model, obs).stage(stage)
}

fn held_out(dirs: &Dirs, stage: Stage) -> Result<Option<ObservationSet>, CliError> {
    if dirs.data.join(format!("{HELD_OUT}.json")).exists() {
        Ok(Some(load_observations(&dirs.data, HELD_OUT).stage(stage)?))
    } else {
        Ok(None)
    }
}

pub fn generate(cfg: &RunConfig, dirs: &Dirs) -> Result<(), CliError> {
    let st = Stage::Generate;
    let seeds = cfg.seeds();
    match cfg.case {
        Case::Frade => {
            let obs = generate_frade(cfg, seeds.noise).stage(st)?;
            save_observations(&dirs.out, OBSERVATIONS, &obs).stage(st)?;
            info!("wrote {} observations", obs.len());
        }
        Case::Hifi => {
            let h = generate_hifi(cfg, &seeds).stage(st)?;
            save_observations(&dirs.out, OBSERVATIONS, &h.calibration).stage(st)?;
            save_observations(&dirs.out, HELD_OUT, &h.extrapolation).stage(st)?;
            let stats = &h.run.stats[0];
            let mut w = create(&dirs.out.join("mean.csv")).stage(st)?;
            writeln!(w, "x,value").stage(st)?;
            for (x, v) in stats.x.iter().zip(&stats.mean) {
                writeln!(w, "{x:e},{v:e}").stage(st)?;
            }
            w.flush().stage(st)?;
            let mut w = create(&dirs.out.join("ensemble_covariance.csv")).stage(st)?;
            write_matrix_csv(&mut w, &stats.covariance, stats.mean.len()).stage(st)?;
            w.flush().stage(st)?;
            write_json(
                &dirs.out.join("ensemble.json"),
                &EnsembleRecord {
                    n_members: h.run.seeds.len(),
                    completed: stats.n_members,
                    seeds: h.run.seeds.clone(),
                    failures: h.run.failures.clone(),
                    t_obs: cfg.hifi.t_obs,
                    t_extrapolate: cfg.hifi.t_extrapolate,
                },
            )
            .stage(st)?;
            info!("ensemble of {} members, {} failed", h.run.seeds.len(), h.run.failures.len());
        }
    }
    Ok(())
}

pub fn sensitivity(cfg: &RunConfig, dirs: &Dirs) -> Result<Screening, CliError> {
    let st = Stage::Sensitivity;
    let p = problem(cfg, dirs, st)?;
    let s = run_screening(&p, cfg, cfg.seeds().screening).stage(st)?;
    let mut w = create(&dirs.out.join("screening.csv")).stage(st)?;
    write_screening_csv(&mut w, &s.result, s.selection.threshold).stage(st)?;
    w.flush().stage(st)?;
    write_json(&dirs.out.join("selection.json"), &s.selection).stage(st)?;
    write_json(&dirs.out.join("sensitivity.json"), &s.result).stage(st)?;
    Ok(s)
}

pub fn optimize(cfg: &RunConfig, dirs: &Dirs) -> Result<Optimization, CliError> {
    let st = Stage::Optimize;
    let p = problem(cfg, dirs, st)?;
    let selection: specinfer::sensitivity::Selection = read_json(&dirs.out.join("selection.json")).stage(st)?;
    let (o, posterior) = run_optimization(&p, cfg, selection.head).stage(st)?;
    write_json(&dirs.out.join("optimization.json"), &o).stage(st)?;
    let map = assemble_spectrum(&posterior.params(&o.map).stage(st)?);
    write_json(&dirs.out.join("map_spectrum.json"), &SpectrumRecord::from_spectrum(&map, p.u_mean)).stage(st)?;
    Ok(o)
}

pub fn sample(cfg: &RunConfig, dirs: &Dirs) -> Result<Chain, CliError> {
    let st = Stage::Sample;
    let p = problem(cfg, dirs, st)?;
    let o: Optimization = read_json(&dirs.out.join("optimization.json")).stage(st)?;
    let posterior = build_posterior(&p, cfg, o.head, &o.reference_mu().stage(st)?).stage(st)?;
    let chain = run_sampling(&posterior, &o.map, cfg, cfg.seeds().sampler).stage(st)?;
    let mut w = create(&dirs.out.join("chain.csv")).stage(st)?;
    chain.write_csv(&mut w).stage(st)?;
    w.flush().stage(st)?;
    write_json(
        &dirs.out.join("chain.json"),
        &ChainRecord {
            n_steps: chain.n_steps(),
            burn_in: chain.burn_in,
            acceptance_rate: chain.acceptance_rate(),
            first_stage_acceptance: chain.first_stage_acceptance(),
            n_adaptations: chain.adaptations.len(),
            final_proposal_std: chain.adaptations.last().map(|a| a.proposal_std.clone()),
        },
    )
    .stage(st)?;
    Ok(chain)
}

fn write_predictive(path: &Path, p: &PredictiveSet) -> specinfer::Result<()> {
    let mut wr = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["x", "t", "mean", "std", "min", "max", "total_std", "reference"];
    if p.data.is_some() {
        header.push("data");
    }
    wr.write_record(&header)?;
    let total = p.total_std();
    let q = &p.predictive;
    for (i, pt) in p.points.iter().enumerate() {
        let mut row = vec![pt.x, pt.t, q.mean[i], q.std[i], q.min[i], q.max[i], total[i], p.reference[i]];
        if let Some(d) = &p.data {
            row.push(d[i]);
        }
        wr.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn diagnose(cfg: &RunConfig, dirs: &Dirs) -> Result<DiagnosticsRecord, CliError> {
    let st = Stage::Diagnose;
    let p = problem(cfg, dirs, st)?;
    let o: Optimization = read_json(&dirs.out.join("optimization.json")).stage(st)?;
    let reference = o.reference_mu().stage(st)?;
    let posterior = build_posterior(&p, cfg, o.head, &reference).stage(st)?;
    let chain = Chain::read_csv(
        fs::File::open(dirs.out.join("chain.csv")).stage(st)?,
        cfg.sampler.burn_in,
    )
    .stage(st)?;
    let extra = held_out(dirs, st)?;
    let held: Vec<(&str, &ObservationSet)> = extra.iter().map(|o| ("extrapolation", o)).collect();
    let d = run_diagnostics(&p, &posterior, &reference, &chain, cfg, &held).stage(st)?;

    let out = &dirs.out;
    let csv_file = |name: &str| create(&out.join(name));
    let mut w = csv_file("kl.csv").stage(st)?;
    write_kl_csv(&mut w, &d.kl).stage(st)?;
    w.flush().stage(st)?;
    let mut w = csv_file("params.csv").stage(st)?;
    write_param_summary_csv(&mut w, &d.summary).stage(st)?;
    w.flush().stage(st)?;
    let mut w = csv_file("modes.csv").stage(st)?;
    write_mode_summary_csv(&mut w, &d.summary).stage(st)?;
    w.flush().stage(st)?;
    let mut w = csv_file("correlation.csv").stage(st)?;
    write_correlation_csv(&mut w, &d.correlation).stage(st)?;
    w.flush().stage(st)?;
    fs::write(out.join("correlation.svg"), correlation_svg(&d.correlation)).stage(st)?;
    for set in &d.predictive {
        write_predictive(&out.join(format!("predictive_{}.csv", set.label)), set).stage(st)?;
    }

    let record = DiagnosticsRecord {
        head: o.head,
        n_samples: d.kl.n_samples,
        kl_total: d.kl.entries.iter().map(|e| e.kl).sum(),
        mean_abs_correlation: d.correlation.mean_abs_off_diagonal(),
        predictive: d
            .predictive
            .iter()
            .map(|s| PredictiveRecord {
                label: s.label.clone(),
                coverage_3sd: s.coverage(3.0),
                mean_normalized_misfit: s.normalized_misfit().map(|z| z.iter().sum::<f64>() / z.len() as f64),
                min_envelope: s.predictive.min.iter().copied().fold(f64::INFINITY, f64::min),
            })
            .collect(),
    };
    write_json(&out.join("diagnostics.json"), &record).stage(st)?;
    Ok(record)
}

/// Runs `f` as `stage` and records the outcome in the directory's manifest,
/// whether or not it succeeded.
pub fn tracked<T>(
    cfg: &RunConfig,
    dir: &Path,
    stage: Stage,
    f: impl FnOnce() -> Result<T, CliError>,
) -> Result<T, CliError> {
    let mut manifest = Manifest::load_or_new(dir, cfg);
    let result = f();
    match &result {
        Ok(_) => manifest.record_stage(stage.name()),
        Err(e) => {
            manifest.failed_stage = Some(e.stage.name().into());
            manifest.error = Some(e.message.clone());
        }
    }
    write_json(&dir.join("config.json"), cfg).stage(Stage::Artifacts)?;
    manifest.save(dir).stage(Stage::Artifacts)?;
    result
}
