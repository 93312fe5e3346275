//! The three stages end to end: simulated traces, delay-and-sum,
//! per-antenna convexification, filtering into slant-range profiles and
//! image assembly, plus the Born baseline on the same scattered field.

use crate::born::{assemble_born, calibrate_beta, solve_born, BornSolution};
use crate::config::{Model, RunConfig};
use crate::convexify::{invert_one_antenna, invert_scaled, prepare_trace, AntennaInversion, InversionSetup, SlantWindow};
use crate::error::{Error, Result};
use crate::forward::{solve_lippmann_schwinger, solve_wave_1d_impulse, synthesize_traces, ScatteredField, TraceSet, VoxelGrid, Wave1dOptions};
use crate::metrics::{evaluate_target, BornRow, ModelRow, TargetReport, Truth};
use crate::postprocess::{
    assemble_image, dielectric_from_r, remove_shape_artifacts, remove_value_artifacts, FilterParams, Region, SlantRangeImage,
};
use crate::preprocess::{calibrate_cf, delay_and_sum, subtract_wall, CalibrationResult};
use crate::scene::{reference_profile_b, Phantom3D, Profile1D, ProfileLabel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Scattered field of one phantom and the raw traces synthesized from it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub phantom: Phantom3D,
    pub field: ScatteredField,
    /// Complex monostatic traces before delay-and-sum.
    pub raw: TraceSet,
}

/// Solves the 3-D forward problem for `phantom` and synthesizes the raw
/// traces, with the configured noise added.
pub fn simulate(cfg: &RunConfig, phantom: &Phantom3D) -> Result<Simulation> {
    let band = cfg.band()?;
    let field = solve_lippmann_schwinger(phantom, &cfg.geometry, &cfg.pulse, &band, &cfg.ls_options())?;
    let c0 = cfg.geometry.c0;
    let raw = synthesize_traces(
        &field.monostatic(),
        &cfg.geometry.positions(),
        &band,
        c0,
        cfg.forward.trace_step / c0,
        cfg.forward.trace_length / c0,
    )?;
    let raw = add_noise(&raw, cfg.run.noise, cfg.run.rng_seed);
    Ok(Simulation {
        phantom: phantom.clone(),
        field,
        raw,
    })
}

/// Adds white Gaussian noise of standard deviation `level · max|F|` to every
/// sample, deterministically in `seed`. `level = 0` returns the input.
pub fn add_noise(traces: &TraceSet, level: f64, seed: u64) -> TraceSet {
    if level <= 0.0 {
        return traces.clone();
    }
    let peak = traces.re.iter().flatten().chain(traces.im.iter().flatten().flatten()).fold(0.0f64, |a, v| a.max(v.abs()));
    let normal = Normal::new(0.0, level * peak).expect("finite deviation");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = traces.clone();
    for row in out.re.iter_mut().chain(out.im.iter_mut().flatten()) {
        for v in row.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    out
}

/// Stage 1: optional wall subtraction on the raw traces, delay-and-sum,
/// real part.
pub fn preprocess(raw: &TraceSet, wall_only: Option<&TraceSet>, cfg: &RunConfig) -> Result<TraceSet> {
    let data = match wall_only {
        Some(w) => subtract_wall(raw, w)?,
        None => raw.clone(),
    };
    Ok(delay_and_sum(&data, &cfg.delay_sum()?).real_part())
}

/// One antenna's inversion and its filtered dielectric profile.
#[derive(Debug, Clone)]
pub struct AntennaResult {
    pub index: usize,
    pub x: f64,
    pub inversion: AntennaInversion,
    /// `ε̃ᵣ(ρ)` from the Gauss filter.
    pub eps: Profile1D,
    /// Candidate ξ-gate used by the filter, when gating is on.
    pub gate: Option<(f64, f64)>,
}

/// Traces of every antenna on the scaled t-grid, before any calibration.
fn prepared(traces: &TraceSet, setup: &InversionSetup, c0: f64) -> Vec<Vec<f64>> {
    (0..traces.count())
        .map(|n| prepare_trace(&traces.re[n], traces.t0 * c0, traces.dt * c0, setup))
        .collect()
}

/// Filter settings of one antenna. With the onset gate on, candidates lie
/// between the first sample above `level` (halved: ξ is one-way) and one
/// pulse length later; a trace that never reaches `level` gets an empty gate.
fn antenna_filter(data: &[f64], level: f64, cfg: &RunConfig, setup: &InversionSetup) -> (FilterParams, Option<(f64, f64)>) {
    let base = cfg.filter();
    if !cfg.postprocess.onset_gate {
        return (base, None);
    }
    let width = cfg.pulse.tau * cfg.geometry.c0 / setup.window.length();
    let gate = match data.iter().position(|v| v.abs() > level) {
        Some(j) => {
            let on = j as f64 * setup.grid.d_t;
            (0.5 * on, 0.5 * (on + width))
        }
        None => (f64::INFINITY, f64::NEG_INFINITY),
    };
    (
        FilterParams {
            xi_min: gate.0,
            xi_max: gate.1,
            ..base
        },
        Some(gate),
    )
}

fn invert_prepared(n: usize, x: f64, data: Vec<f64>, cf: f64, level: f64, cfg: &RunConfig, setup: &InversionSetup) -> Result<AntennaResult> {
    let (fp, gate) = antenna_filter(&data, level, cfg, setup);
    let scaled: Vec<f64> = data.iter().map(|v| v * cf).collect();
    let wrap = |e: Error| Error::Antenna {
        index: n,
        source: Box::new(e),
    };
    let inversion = invert_scaled(scaled, setup).map_err(wrap)?;
    let eps = dielectric_from_r(&inversion.r, &fp, &setup.window).map_err(wrap)?;
    Ok(AntennaResult {
        index: n,
        x,
        inversion,
        eps,
        gate,
    })
}

fn onset_level(data: &[Vec<f64>], cfg: &RunConfig) -> f64 {
    cfg.postprocess.onset_level * data.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Stage 2 and the filter of stage 3: every antenna inverted independently
/// (in parallel) with the traces scaled by `cf`.
pub fn invert_traces(traces: &TraceSet, cf: f64, cfg: &RunConfig) -> Result<Vec<AntennaResult>> {
    let setup = cfg.inversion()?;
    let data = prepared(traces, &setup, cfg.geometry.c0);
    let level = onset_level(&data, cfg);
    data.into_par_iter()
        .enumerate()
        .map(|(n, d)| invert_prepared(n, traces.positions[n], d, cf, level, cfg, &setup))
        .collect()
}

/// Calibration factor from the reference traces (model A): the central
/// antenna's peak `ε̃` is driven to `calibration.target_eps`. A non-zero
/// `calibration.cf` is returned as is.
pub fn calibrate(reference: &TraceSet, cfg: &RunConfig) -> Result<CalibrationResult> {
    let c = &cfg.calibration;
    if c.cf > 0.0 {
        return Ok(CalibrationResult {
            cf: c.cf,
            achieved_eps: f64::NAN,
            target_eps: c.target_eps,
            tolerance: c.tol,
            evaluations: 0,
        });
    }
    let setup = cfg.inversion()?;
    let data = prepared(reference, &setup, cfg.geometry.c0);
    let level = onset_level(&data, cfg);
    let mid = reference.count() / 2;
    let d = data[mid].clone();
    let x = reference.positions[mid];
    calibrate_cf(
        |cf| {
            let r = invert_prepared(mid, x, d.clone(), cf, level, cfg, &setup)?;
            Ok(r.eps.values.iter().cloned().fold(1.0, f64::max))
        },
        c.target_eps,
        &cfg.calibration_options(),
    )
}

/// Stage 3 after filtering: value artifacts over the whole window, 4×
/// bilinear refinement, shape artifacts narrower than D/2.
pub fn build_image(results: &[AntennaResult], cfg: &RunConfig) -> Result<SlantRangeImage> {
    Ok(build_images(results, cfg)?.1)
}

/// The refined image before and after artifact removal.
pub fn build_images(results: &[AntennaResult], cfg: &RunConfig) -> Result<(SlantRangeImage, SlantRangeImage)> {
    // Each profile ends where its own ∫μ dξ does; put all on the window grid.
    let step = results.first().map_or(0.01, |r| r.eps.step);
    let n = ((cfg.convexify.rho_max - cfg.convexify.rho_min) / step).round() as usize + 1;
    let profiles: Vec<Profile1D> = results
        .iter()
        .map(|r| Profile1D::from_fn(cfg.convexify.rho_min, step, n, ProfileLabel::EpsTilde, |x| r.eps.sample(x, 1.0)))
        .collect();
    let xs: Vec<f64> = results.iter().map(|r| r.x).collect();
    let p = &cfg.postprocess;
    let region = Region {
        x_lo: f64::NEG_INFINITY,
        x_hi: f64::INFINITY,
        rho_lo: cfg.convexify.rho_min,
        rho_hi: cfg.convexify.rho_max,
    };
    let raw = assemble_image(&profiles, &xs, p.refine)?;
    let cleaned = match remove_value_artifacts(&profiles, &xs, &region, p.sigma, p.eps_floor) {
        Ok(c) => assemble_image(&c, &xs, p.refine)?,
        // Nothing above the floor: no values to reject.
        Err(Error::EmptyRegion(_)) => raw.clone(),
        Err(e) => return Err(e),
    };
    let cleaned = remove_shape_artifacts(&cleaned, cfg.geometry.cross_range_resolution(), p.eps_floor);
    Ok((raw, cleaned))
}

/// Born reconstruction of one scattered field with a given β.
#[derive(Debug, Clone)]
pub struct BornOutcome {
    pub beta: f64,
    pub grid: VoxelGrid,
    pub solution: BornSolution,
    pub eps_median: f64,
}

fn born_grid(phantom: &Phantom3D, cfg: &RunConfig) -> Result<VoxelGrid> {
    VoxelGrid::covering(phantom.domain_center, phantom.side, cfg.born.voxel_pitch)
}

/// β for the Born baseline: searched on `reference` (model A) so that its
/// largest ε̃ equals `born.target_max`, or the configured β.
pub fn born_beta(reference: &Simulation, cfg: &RunConfig) -> Result<f64> {
    if !cfg.born.calibrate {
        return Ok(cfg.born.beta);
    }
    let f = &cfg.forward;
    let sys = assemble_born(&reference.field, &cfg.geometry, &cfg.pulse, born_grid(&reference.phantom, cfg)?, f.radial, f.angular)?;
    Ok(calibrate_beta(&sys, cfg.born.target_max, cfg.born.beta, cfg.born.tol)?.beta)
}

/// Born baseline on `sim` with `beta`; the median is over the largest
/// connected voxel set above the floor.
pub fn born_baseline(sim: &Simulation, beta: f64, cfg: &RunConfig) -> Result<BornOutcome> {
    let grid = born_grid(&sim.phantom, cfg)?;
    let f = &cfg.forward;
    let sys = assemble_born(&sim.field, &cfg.geometry, &cfg.pulse, grid, f.radial, f.angular)?;
    let solution = solve_born(&sys, beta)?;
    let eps_median = solution.target_median(&grid, cfg.postprocess.eps_floor)?;
    Ok(BornOutcome {
        beta,
        grid,
        solution,
        eps_median,
    })
}

/// Everything a model run produces.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub model: Model,
    pub cf: f64,
    pub traces: TraceSet,
    pub antennas: Vec<AntennaResult>,
    /// Before artifact removal.
    pub raw_image: SlantRangeImage,
    pub image: SlantRangeImage,
    pub row: ModelRow,
}

impl ModelRun {
    pub fn report(&self) -> &TargetReport {
        &self.row.report
    }
}

/// Stages 1 to 3 and the metrics of one simulated model with a known CF.
/// `born` adds the Born columns.
pub fn run_model(sim: &Simulation, model: Model, cf: f64, cfg: &RunConfig, born: Option<&BornOutcome>) -> Result<ModelRun> {
    let traces = preprocess(&sim.raw, None, cfg)?;
    let antennas = invert_traces(&traces, cf, cfg)?;
    let (raw_image, image) = build_images(&antennas, cfg)?;
    let target = sim
        .phantom
        .targets
        .first()
        .ok_or_else(|| Error::param("scene.model", "the phantom has no target to evaluate"))?;
    let truth = Truth::of_body(target);
    let floor = cfg.postprocess.eps_floor;
    // Removal can reject every antenna when per-antenna values scatter;
    // the row then says so instead of dropping the model.
    let (report, cleaned) = match evaluate_target(&image, &truth, None, floor) {
        Ok(r) => (r, true),
        Err(Error::EmptyRegion(_)) => (evaluate_target(&raw_image, &truth, None, floor)?, false),
        Err(e) => return Err(e),
    };
    let born = born.map(|b| BornRow {
        eps_median: b.eps_median,
        rel_err_eps: crate::metrics::relative_error(b.eps_median, truth.eps),
    });
    Ok(ModelRun {
        model,
        cf,
        traces,
        antennas,
        raw_image,
        image,
        row: ModelRow {
            model: model_name(model, cfg),
            truth,
            report,
            born,
            cleaned,
        },
    })
}

pub fn model_name(model: Model, cfg: &RunConfig) -> String {
    let base = match model {
        Model::A => "A",
        Model::B => "B",
        Model::C => "C",
        Model::Wall => "wall",
        Model::None => "none",
    };
    if cfg.preprocess.subtract_wall {
        format!("{base}*")
    } else {
        base.to_string()
    }
}

/// Result of the 1-D pipeline on the reference two-bump profile.
#[derive(Debug, Clone)]
pub struct OneDRun {
    /// Impulse trace `f(t)` with `t` as two-way path length.
    pub trace: Vec<f64>,
    pub dt: f64,
    pub inversion: AntennaInversion,
    /// `b(ρ)` from the profile ODE.
    pub b: Profile1D,
    /// `ε̃ᵣ(ρ)` from the Gauss filter with two objects.
    pub eps: Profile1D,
}

/// Peak of a profile inside `[lo, hi]`: `(ρ, value)`.
pub type Peak = (f64, f64);

impl OneDRun {
    /// Peaks of `b` on either side of the midpoint between the two bumps.
    pub fn peaks(&self) -> (Peak, Peak) {
        let cut = 0.5 * (6.12 + 8.55);
        let w = self.b.end();
        (
            self.b.argmax_in(self.b.start, cut).unwrap_or((f64::NAN, f64::NAN)),
            self.b.argmax_in(cut, w).unwrap_or((f64::NAN, f64::NAN)),
        )
    }
}

/// The 1-D pipeline without stage 1: impulse trace of the reference
/// profile, inversion over the window `[5.47, 9.83]`, recovery of `b` and
/// the two-object filter. The 1-D free-space level 1/2 is removed first.
pub fn run_1d(cfg: &RunConfig) -> Result<OneDRun> {
    let b = reference_profile_b(0.0, 0.005, 2400);
    let tr = solve_wave_1d_impulse(&b, &Wave1dOptions::standard())?;
    let mut setup = cfg.inversion()?;
    setup.window = SlantWindow {
        rho_min: 5.47,
        rho_max: 9.83,
    };
    setup.baseline = 0.5;
    let (inversion, b_hat) = invert_one_antenna(&tr.f, 0.0, tr.dt, &setup)?;
    let fp = FilterParams {
        amplitude: crate::postprocess::Amplitude::Reconstructed,
        ..FilterParams::new(2, cfg.filter().delta_rho)
    };
    let eps = dielectric_from_r(&inversion.r, &fp, &setup.window)?;
    Ok(OneDRun {
        trace: tr.f,
        dt: tr.dt,
        inversion,
        b: Profile1D { label: ProfileLabel::B, ..b_hat },
        eps,
    })
}

/// Summary of a full run: calibration and the per-model rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub cf: f64,
    pub cf_achieved: f64,
    pub born_beta: Option<f64>,
    pub rows: Vec<ModelRow>,
}
