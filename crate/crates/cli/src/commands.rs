use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use palisade_core::archive::{read_field, read_series, write_field, write_series};
use palisade_core::config::{ConfigFile, InitialValue, RunConfig};
use palisade_core::control::{
    combine_controls, combine_params, neutralize, solve_forward_controlled, ControlMode, ControlSet,
};
use palisade_core::forward::{solve_forward, StateTrajectory};
use palisade_core::imaging::{export_pgm, import_raster, perturb, preprocess};
use palisade_core::optimizer::{eval_metrics, pgd_run, METRIC_EPS};
use palisade_core::{Component, Error, ParamSet, ScalarField, StopReason};

use crate::manifest::Manifest;
use crate::{Command, Common};

/// Bad command-line usage not caught by the argument parser.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Debug)]
struct Stalled;

impl fmt::Display for Stalled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("line search found no decrease; results written for the last accepted iterate")
    }
}

impl std::error::Error for Stalled {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Shape(_) | Error::Grid(_) | Error::Config(_) | Error::Filter(_) => 2,
                Error::Archive(_) | Error::Image(_) | Error::Io { .. } => 3,
                Error::Instability { .. } => 4,
            };
        }
        if cause.is::<Usage>() {
            return 2;
        }
        if cause.is::<Stalled>() {
            return 5;
        }
    }
    3
}

fn status_of(err: &anyhow::Error) -> &'static str {
    match exit_code(err) {
        2 => "config-error",
        4 => "instability",
        5 => "stalled",
        _ => "io-error",
    }
}

pub fn run(common: &Common, command: &Command) -> Result<()> {
    let (file, base) = match &common.config {
        Some(path) => (
            ConfigFile::load(path)?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (ConfigFile::default(), PathBuf::new()),
    };
    let seed = common.seed.unwrap_or(file.core.seed);
    let out = &common.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let name = match command {
        Command::Preprocess { .. } => "preprocess",
        Command::Estimate { .. } => "estimate",
        Command::Neutralize { .. } => "neutralize",
        Command::Synthesize { .. } => "synthesize",
        Command::Perturb { .. } => "perturb",
        Command::Forward { .. } => "forward",
    };
    let mut manifest = Manifest::new(name, file.clone(), seed, out);
    if let Some(path) = &common.config {
        manifest.input(path)?;
    }
    let ctx = Ctx { file: &file, base: &base, seed, out };
    let result = match command {
        Command::Preprocess { image } => cmd_preprocess(&ctx, &mut manifest, image),
        Command::Estimate { target } => cmd_estimate(&ctx, &mut manifest, target),
        Command::Neutralize { theta, target, mode } => {
            cmd_neutralize(&ctx, &mut manifest, theta, target.as_deref(), *mode)
        }
        Command::Synthesize {
            theta,
            weights,
            xi,
            mode,
        } => cmd_synthesize(&ctx, &mut manifest, theta, weights, xi, *mode),
        Command::Perturb {
            target,
            kernel,
            std,
            stride,
        } => cmd_perturb(&ctx, &mut manifest, target, *kernel, *std, *stride),
        Command::Forward { theta, target } => cmd_forward(&ctx, &mut manifest, theta.as_deref(), target.as_deref()),
    };
    if let Err(e) = &result {
        manifest.status = status_of(e).into();
        manifest.error = Some(format!("{e:#}"));
    }
    manifest.write()?;
    result
}

struct Ctx<'a> {
    file: &'a ConfigFile,
    base: &'a Path,
    seed: u64,
    out: &'a Path,
}

impl Ctx<'_> {
    fn run_config(&self, grid: palisade_core::Grid2D) -> Result<RunConfig> {
        let mut cfg = self.file.run_config(grid, self.base)?;
        cfg.seed = self.seed;
        Ok(cfg)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn read_input_field(m: &mut Manifest, path: &Path) -> Result<ScalarField> {
    let field = read_field(path).with_context(|| format!("reading {}", path.display()))?;
    m.input(path)?;
    Ok(field)
}

fn read_theta(m: &mut Manifest, dir: &Path, cfg: &ConfigFile) -> Result<ParamSet> {
    let mut fields = Vec::with_capacity(6);
    for c in Component::ALL {
        let path = dir.join(format!("{}.pfld", c.name()));
        fields.push(read_series(&path).with_context(|| format!("reading {}", path.display()))?);
        m.input(&path)?;
    }
    let fields: [_; 6] = fields.try_into().expect("six components");
    Ok(ParamSet::new(fields, cfg.optimizer.bounds)?)
}

fn write_theta(m: &mut Manifest, out: &Path, sub: &str, theta: &ParamSet) -> Result<()> {
    std::fs::create_dir_all(out.join(sub))?;
    for c in Component::ALL {
        let rel = format!("{sub}/{}.pfld", c.name());
        write_series(out.join(&rel), theta.get(c))?;
        m.output(rel)?;
    }
    Ok(())
}

fn read_control(m: &mut Manifest, dir: &Path, mode: ControlMode, lambda_xi: f64) -> Result<ControlSet> {
    let mut parts = Vec::new();
    for name in ["xi1", "xi2"] {
        let path = dir.join(format!("{name}.pfld"));
        parts.push(read_series(&path).with_context(|| format!("reading {}", path.display()))?);
        m.input(&path)?;
    }
    let xi2 = parts.pop().expect("two parts");
    let xi1 = parts.pop().expect("two parts");
    Ok(ControlSet::new(xi1, xi2, mode, lambda_xi)?)
}

fn write_field_output(m: &mut Manifest, out: &Path, name: &str, field: &ScalarField) -> Result<()> {
    write_field(out.join(format!("{name}.pfld")), field)?;
    m.output(format!("{name}.pfld"))?;
    export_pgm(field, out.join(format!("{name}.pgm")))?;
    m.output(format!("{name}.pgm"))
}

/// Final tumour and acid panels, plus the squared error map when a target is known.
fn write_panels(m: &mut Manifest, out: &Path, traj: &StateTrajectory, target: Option<&ScalarField>) -> Result<()> {
    write_field_output(m, out, "tumor-final", traj.final_u1())?;
    write_field_output(m, out, "acid-final", traj.final_u2())?;
    if let Some(target) = target {
        let err = traj.final_u1().zip_map(target, |a, b| (a - b).powi(2))?;
        write_field_output(m, out, "error-map", &err)?;
        let metrics = eval_metrics(traj.final_u1(), target, METRIC_EPS)?;
        m.metric("final", metrics);
    }
    Ok(())
}

/// Uses the coefficients' own grid and time axis.
fn config_for_theta(ctx: &Ctx, theta: &ParamSet) -> Result<RunConfig> {
    let mut cfg = ctx.run_config(*theta.grid())?;
    cfg.time = *theta.time();
    Ok(cfg)
}

fn cmd_preprocess(ctx: &Ctx, m: &mut Manifest, image: &Path) -> Result<()> {
    let img = import_raster(image).with_context(|| format!("reading {}", image.display()))?;
    m.input(image)?;
    let field = preprocess(&img, &ctx.file.imaging, (ctx.file.core.hx, ctx.file.core.hy))?;
    write_field_output(m, ctx.out, "density", &field)?;
    m.metric("digest", palisade_core::imaging::field_digest(&field));
    Ok(())
}

fn cmd_estimate(ctx: &Ctx, m: &mut Manifest, target_path: &Path) -> Result<()> {
    let target = read_input_field(m, target_path)?;
    let cfg = ctx.run_config(*target.grid())?;
    let res = pgd_run(&target, &cfg)?;
    write_theta(m, ctx.out, "theta", &res.theta)?;
    write_panels(m, ctx.out, &res.trajectory, Some(&target))?;
    m.summary = Some(serde_json::to_value(res.summary())?);
    m.history = res.history;
    if res.stop == StopReason::Stalled {
        m.status = "stalled".into();
        return Err(Stalled.into());
    }
    Ok(())
}

fn neutral_target(ctx: &Ctx, m: &mut Manifest, explicit: Option<&Path>, cfg: &RunConfig) -> Result<ScalarField> {
    let configured = ctx.file.control.neutral_target.as_ref().map(|p| ctx.base.join(p));
    match explicit.map(Path::to_path_buf).or(configured) {
        Some(path) => read_input_field(m, &path),
        None => Ok(match &cfg.u1_init {
            InitialValue::Uniform(v) => ScalarField::constant(cfg.grid, *v),
            InitialValue::Field(f) => f.clone(),
        }),
    }
}

fn cmd_neutralize(
    ctx: &Ctx,
    m: &mut Manifest,
    theta_dir: &Path,
    target: Option<&Path>,
    mode: ControlMode,
) -> Result<()> {
    let theta = read_theta(m, theta_dir, ctx.file)?;
    let cfg = config_for_theta(ctx, &theta)?;
    let target = neutral_target(ctx, m, target, &cfg)?;
    let baseline = solve_forward(&theta, &cfg)?;
    let res = neutralize(&theta, &target, &cfg, mode)?;
    std::fs::create_dir_all(ctx.path("xi"))?;
    for (name, series) in [("xi1", &res.xi.xi1), ("xi2", &res.xi.xi2)] {
        let rel = format!("xi/{name}.pfld");
        write_series(ctx.path(&rel), series)?;
        m.output(rel)?;
    }
    write_panels(m, ctx.out, &res.trajectory, Some(&target))?;
    let before = baseline.final_u1().sub(&target)?.norm_l2();
    let after = res.trajectory.final_u1().sub(&target)?.norm_l2();
    m.metric("mode", mode);
    m.metric("distance_uncontrolled", before);
    m.metric("distance_controlled", after);
    m.metric("reduction", if before > 0.0 { 1.0 - after / before } else { 0.0 });
    m.summary = Some(serde_json::to_value(res.summary())?);
    m.history = res.history;
    if res.stop == StopReason::Stalled {
        m.status = "stalled".into();
        return Err(Stalled.into());
    }
    Ok(())
}

fn cmd_synthesize(
    ctx: &Ctx,
    m: &mut Manifest,
    theta_dirs: &[PathBuf],
    weights: &[f64],
    xi_dirs: &[PathBuf],
    mode: ControlMode,
) -> Result<()> {
    let weights = if weights.is_empty() {
        vec![1.0 / theta_dirs.len() as f64; theta_dirs.len()]
    } else {
        weights.to_vec()
    };
    if weights.len() != theta_dirs.len() {
        return Err(Usage(format!("{} weights for {} coefficient sets", weights.len(), theta_dirs.len())).into());
    }
    if !xi_dirs.is_empty() && xi_dirs.len() != theta_dirs.len() {
        return Err(Usage(format!("{} control sets for {} coefficient sets", xi_dirs.len(), theta_dirs.len())).into());
    }
    let sets = theta_dirs
        .iter()
        .map(|d| read_theta(m, d, ctx.file))
        .collect::<Result<Vec<_>>>()?;
    let theta = combine_params(&sets, &weights)?;
    let cfg = config_for_theta(ctx, &theta)?;
    write_theta(m, ctx.out, "theta", &theta)?;
    let traj = if xi_dirs.is_empty() {
        solve_forward(&theta, &cfg)?
    } else {
        let controls = xi_dirs
            .iter()
            .map(|d| read_control(m, d, mode, cfg.control.lambda_xi))
            .collect::<Result<Vec<_>>>()?;
        let xi = combine_controls(&controls, &weights, &cfg.control)?;
        std::fs::create_dir_all(ctx.path("xi"))?;
        for (name, series) in [("xi1", &xi.xi1), ("xi2", &xi.xi2)] {
            let rel = format!("xi/{name}.pfld");
            write_series(ctx.path(&rel), series)?;
            m.output(rel)?;
        }
        solve_forward_controlled(&theta, &xi, &cfg)?
    };
    write_series(ctx.path("tumor.pfld"), &traj.u1)?;
    m.output("tumor.pfld")?;
    write_panels(m, ctx.out, &traj, None)?;
    m.metric("weights", &weights);
    let mut distances = Vec::with_capacity(sets.len());
    for parent in &sets {
        let own = solve_forward(parent, &cfg)?;
        distances.push(traj.final_u1().sub(own.final_u1())?.norm_l2());
    }
    m.metric("distance_to_parents", distances);
    Ok(())
}

fn cmd_perturb(ctx: &Ctx, m: &mut Manifest, target: &Path, k: usize, s: f64, n: usize) -> Result<()> {
    let field = read_input_field(m, target)?;
    let out = perturb(&field, k, s, n)?;
    write_field_output(m, ctx.out, "perturbed", &out)?;
    m.metric("kernel", k);
    m.metric("std", s);
    m.metric("stride", n);
    Ok(())
}

fn cmd_forward(ctx: &Ctx, m: &mut Manifest, theta_dir: Option<&Path>, target: Option<&Path>) -> Result<()> {
    let target = target.map(|p| read_input_field(m, p)).transpose()?;
    let (theta, cfg) = match theta_dir {
        Some(dir) => {
            let theta = read_theta(m, dir, ctx.file)?;
            let cfg = config_for_theta(ctx, &theta)?;
            (theta, cfg)
        }
        None => {
            let grid = ctx.file.grid(target.as_ref().map(|t| (t.grid().nx(), t.grid().ny())))?;
            let cfg = ctx.run_config(grid)?;
            let theta = ParamSet::uniform(cfg.grid, cfg.time, cfg.theta_init, cfg.bounds).projected();
            (theta, cfg)
        }
    };
    let traj = solve_forward(&theta, &cfg)?;
    write_series(ctx.path("tumor.pfld"), &traj.u1)?;
    m.output("tumor.pfld")?;
    write_series(ctx.path("acid.pfld"), &traj.u2)?;
    m.output("acid.pfld")?;
    write_panels(m, ctx.out, &traj, target.as_ref())?;
    m.metric("min", traj.min());
    m.metric("max", traj.max());
    Ok(())
}
