//! `convexsar` command-line driver.
//!
//! Every subcommand resolves one configuration (preset, optional TOML file,
//! then `--set section.key=value` overrides in order), writes it next to its
//! outputs as `run.toml`, and exits non-zero with a single
//! `error: <category>: <message>` line on failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use convexsar::config::{Model, RunConfig};
use convexsar::convexify::results_csv;
use convexsar::metrics::{evaluate_target, format_table, table_csv, ModelRow, Truth};
use convexsar::pipeline::{
    born_baseline, born_beta, build_images, calibrate, invert_traces, model_name, preprocess, run_1d, run_model, simulate,
    PipelineSummary,
};
use convexsar::postprocess::{Region, SlantRangeImage};
use convexsar::forward::{solve_wave_1d_impulse, TraceSet, Wave1dOptions};
use convexsar::scene::reference_profile_b;
use convexsar::{Error, Result};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "convexsar", version, about = "Slant-range dielectric imaging from simulated SAR traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// 21 antennas, wall-free 1 m domain around the target.
    Desk,
    /// Reference scale: 61 antennas, 3.2 m domain with wall.
    Full,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; missing keys take the preset's values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    /// Override one key, e.g. `--set convexify.lambda=1.0`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory (defaults to `run.out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Raw traces of the configured phantom, or the 1-D impulse trace.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write the wall-only traces for clutter subtraction.
        #[arg(long)]
        wall_only: bool,
        /// The 1-D impulse problem of the reference two-bump profile.
        #[arg(long)]
        one_d: bool,
    },
    /// Delay-and-sum (after optional wall subtraction) of stored raw traces.
    Preprocess {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        wall: Option<PathBuf>,
    },
    /// Per-antenna convexification of preprocessed traces and the image.
    Invert {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        traces: PathBuf,
        /// Calibration factor; defaults to `calibration.cf`.
        #[arg(long)]
        cf: Option<f64>,
    },
    /// Born baseline on the configured phantom, β calibrated on model A.
    Born {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluates a stored image against the true target.
    Metrics {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        eps: f64,
        /// True cross-range size (m).
        #[arg(long)]
        s_x: f64,
        /// True centre distance (m).
        #[arg(long)]
        rho_c: f64,
        /// Region `x_lo,x_hi,rho_lo,rho_hi`; default is the largest component.
        #[arg(long)]
        region: Option<String>,
        #[arg(long, default_value_t = convexsar::postprocess::EPS_FLOOR)]
        floor: f64,
    },
    /// All stages: simulate, calibrate on model A, invert, image, report.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Models to report (default: the configured one).
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Add the Born baseline columns.
        #[arg(long)]
        born: bool,
        /// The 1-D pipeline on the reference profile instead.
        #[arg(long)]
        one_d: bool,
    },
}

fn resolve(c: &Common) -> Result<(RunConfig, PathBuf)> {
    let base = match &c.config {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            let preset = match c.preset {
                Preset::Desk => RunConfig::desk(),
                Preset::Full => RunConfig::default(),
            };
            // Keys in the file replace the preset's.
            let file: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            let mut sets = Vec::new();
            for (section, v) in &file {
                let t = v
                    .as_table()
                    .ok_or_else(|| Error::Config(format!("top-level key `{section}` must be a section")))?;
                for (k, v) in t {
                    sets.push(format!("{section}.{k}={v}"));
                }
            }
            preset.with_overrides(&sets)?
        }
        None => match c.preset {
            Preset::Desk => RunConfig::desk(),
            Preset::Full => RunConfig::default(),
        },
    };
    let cfg = base.with_overrides(&c.sets)?;
    if cfg.run.threads > 0 {
        // Fails only if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.run.threads).build_global();
    }
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.run.out_dir));
    fs::create_dir_all(&out)?;
    fs::write(out.join("run.toml"), cfg.to_toml())?;
    Ok((cfg, out))
}

fn write_image(dir: &Path, stem: &str, image: &SlantRangeImage) -> Result<()> {
    fs::write(dir.join(format!("{stem}.csv")), image.to_csv())?;
    let (pgm, scale) = image.to_pgm();
    fs::write(dir.join(format!("{stem}.pgm")), pgm)?;
    fs::write(dir.join(format!("{stem}.pgm.txt")), scale)?;
    Ok(())
}

fn read_traces(p: &Path) -> Result<TraceSet> {
    if p.extension().is_some_and(|e| e == "bin") {
        TraceSet::from_binary(&fs::read(p)?)
    } else {
        TraceSet::from_csv(&fs::read_to_string(p)?)
    }
}

fn parse_model(s: &str) -> Result<Model> {
    match s.trim().to_ascii_lowercase().as_str() {
        "a" => Ok(Model::A),
        "b" => Ok(Model::B),
        "c" => Ok(Model::C),
        other => Err(Error::Config(format!("unknown model `{other}` (expected a, b or c)"))),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, wall_only, one_d } => {
            let (cfg, out) = resolve(&common)?;
            if one_d {
                let b = reference_profile_b(0.0, 0.005, 2400);
                let r = solve_wave_1d_impulse(&b, &Wave1dOptions::standard())?;
                let mut s = String::from("t,f\n");
                for (k, v) in r.f.iter().enumerate() {
                    s += &format!("{},{}\n", k as f64 * r.dt, v);
                }
                fs::write(out.join("impulse_1d.csv"), s)?;
                return Ok(());
            }
            let sim = simulate(&cfg, &cfg.phantom()?)?;
            fs::write(out.join("raw.csv"), sim.raw.to_csv())?;
            fs::write(out.join("raw.bin"), sim.raw.to_binary())?;
            if wall_only {
                let w = simulate(&cfg, &cfg.phantom_of(Model::Wall)?)?;
                fs::write(out.join("wall.csv"), w.raw.to_csv())?;
            }
            eprintln!("wrote {} traces of {} samples to {}", sim.raw.count(), sim.raw.samples(), out.display());
        }
        Command::Preprocess { common, traces, wall } => {
            let (cfg, out) = resolve(&common)?;
            let raw = read_traces(&traces)?;
            let w = wall.as_deref().map(read_traces).transpose()?;
            let f = preprocess(&raw, w.as_ref(), &cfg)?;
            fs::write(out.join("das.csv"), f.to_csv())?;
        }
        Command::Invert { common, traces, cf } => {
            let (cfg, out) = resolve(&common)?;
            let f = read_traces(&traces)?;
            let cf = cf.unwrap_or(if cfg.calibration.cf > 0.0 { cfg.calibration.cf } else { 1.0 });
            let res = invert_traces(&f, cf, &cfg)?;
            let rows: Vec<_> = res.iter().map(|r| (r.index, &r.inversion, Some(&r.eps))).collect();
            let (prof, diag) = results_csv(&rows);
            fs::write(out.join("profiles.csv"), prof)?;
            fs::write(out.join("diagnostics.csv"), diag)?;
            let (raw, image) = build_images(&res, &cfg)?;
            write_image(&out, "image_raw", &raw)?;
            write_image(&out, "image", &image)?;
        }
        Command::Born { common } => {
            let (cfg, out) = resolve(&common)?;
            let reference = simulate(&cfg, &cfg.phantom_of(Model::A)?)?;
            let beta = born_beta(&reference, &cfg)?;
            let sim = simulate(&cfg, &cfg.phantom()?)?;
            let b = born_baseline(&sim, beta, &cfg)?;
            fs::write(out.join("born.csv"), b.solution.to_csv(&sim_points(&b)))?;
            write_image(&out, "born_image", &b.solution.slant_image(&b.grid, &sim_points(&b)))?;
            println!("beta {:e} median {:.4} max {:.4}", beta, b.eps_median, b.solution.max_eps());
        }
        Command::Metrics {
            image,
            eps,
            s_x,
            rho_c,
            region,
            floor,
        } => {
            let img = SlantRangeImage::from_csv(&fs::read_to_string(&image)?)?;
            let region = region.map(|r| parse_region(&r)).transpose()?;
            let truth = Truth { eps, s_x, rho_c };
            let report = evaluate_target(&img, &truth, region.as_ref(), floor)?;
            let row = ModelRow {
                model: image.file_stem().map_or("image".into(), |s| s.to_string_lossy().into_owned()),
                truth,
                report,
                born: None,
                cleaned: true,
            };
            print!("{}", format_table(std::slice::from_ref(&row)));
        }
        Command::Pipeline {
            common,
            models,
            born,
            one_d,
        } => {
            let (cfg, out) = resolve(&common)?;
            if one_d {
                let r = run_1d(&cfg)?;
                let ((r1, v1), (r2, v2)) = r.peaks();
                fs::write(out.join("b_1d.csv"), profile_csv(&r.b))?;
                fs::write(out.join("eps_1d.csv"), profile_csv(&r.eps))?;
                println!("peaks rho {r1:.3} b {v1:.3} | rho {r2:.3} b {v2:.3}");
                return Ok(());
            }
            let models: Vec<Model> = if models.is_empty() {
                vec![cfg.scene.model]
            } else {
                models.iter().map(|m| parse_model(m)).collect::<Result<_>>()?
            };
            let wall = if cfg.preprocess.subtract_wall {
                Some(simulate(&cfg, &cfg.phantom_of(Model::Wall)?)?)
            } else {
                None
            };
            let reference = simulate(&cfg, &cfg.phantom_of(Model::A)?)?;
            let ref_traces = preprocess(&reference.raw, wall.as_ref().map(|w| &w.raw), &cfg)?;
            let cal = calibrate(&ref_traces, &cfg)?;
            let beta = if born { Some(born_beta(&reference, &cfg)?) } else { None };
            let mut rows = Vec::new();
            for m in models {
                let mut sim = if m == Model::A { reference.clone() } else { simulate(&cfg, &cfg.phantom_of(m)?)? };
                if let Some(w) = &wall {
                    sim.raw = sim.raw.subtract(&w.raw)?;
                    sim.field = sim.field.subtract(&w.field)?;
                }
                let b = beta.map(|beta| born_baseline(&sim, beta, &cfg)).transpose()?;
                let run = run_model(&sim, m, cal.cf, &cfg, b.as_ref())?;
                let name = model_name(m, &cfg);
                write_image(&out, &format!("image_{name}_raw"), &run.raw_image)?;
                write_image(&out, &format!("image_{name}"), &run.image)?;
                let res: Vec<_> = run.antennas.iter().map(|r| (r.index, &r.inversion, Some(&r.eps))).collect();
                let (prof, diag) = results_csv(&res);
                fs::write(out.join(format!("profiles_{name}.csv")), prof)?;
                fs::write(out.join(format!("diagnostics_{name}.csv")), diag)?;
                rows.push(run.row);
            }
            let table = format_table(&rows);
            fs::write(out.join("table.txt"), &table)?;
            fs::write(out.join("table.csv"), table_csv(&rows))?;
            let summary = PipelineSummary {
                cf: cal.cf,
                cf_achieved: cal.achieved_eps,
                born_beta: beta,
                rows,
            };
            fs::write(out.join("summary.toml"), toml::to_string(&summary).map_err(|e| Error::Config(e.to_string()))?)?;
            print!("{table}");
        }
    }
    Ok(())
}

fn sim_points(b: &convexsar::pipeline::BornOutcome) -> Vec<convexsar::scene::Point> {
    (0..b.grid.len()).map(|i| b.grid.center(b.grid.unravel(i))).collect()
}

fn profile_csv(p: &convexsar::scene::Profile1D) -> String {
    let mut s = String::from("rho,value\n");
    for k in 0..p.len() {
        s += &format!("{},{}\n", p.x(k), p.values[k]);
    }
    s
}

fn parse_region(s: &str) -> Result<Region> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("region `{s}`: {e}")))?;
    match v[..] {
        [x_lo, x_hi, rho_lo, rho_hi] => Ok(Region { x_lo, x_hi, rho_lo, rho_hi }),
        _ => Err(Error::Config(format!("region `{s}` needs four numbers"))),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.category(), e.to_string().replace('\n', " "));
            ExitCode::from(match e {
                Error::Config(_) | Error::InvalidParameter { .. } | Error::Parse { .. } => 2,
                Error::Io(_) => 3,
                _ => 1,
            })
        }
    }
}
