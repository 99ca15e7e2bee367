//! Command-line entry points.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{info, warn};

use crate::characteristics::{CharacteristicMap, DEFAULT_TOLERANCE};
use crate::diagnostics::{field_difference, verify_geometry};
use crate::error::{Error, Result};
use crate::io::config::{parse_config, RunConfig};
use crate::io::rundir::{self, Manifest};
use crate::io::snapshot::{format_number, write_snapshot, FieldKind};
use crate::solver;

pub const CHARACTERISTICS_FILE: &str = "characteristics.txt";
pub const TRAJECTORIES_FILE: &str = "trajectories.txt";

#[derive(Debug, Parser)]
#[command(name = "polsim", version, about = "Slow-light storage and retrieval in a moving EIT medium")]
pub struct Cli {
    /// Suppress progress output on standard error.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured solver and write snapshots and a manifest.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's [output] directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the characteristic solution at the configured snapshot times.
    Characteristics {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-time L2 and Linf differences between two run directories.
    Compare { a: PathBuf, b: PathBuf },
    /// Compare a run's stored and retrieved geometry with the predictions.
    Widths {
        dir: PathBuf,
        /// Atomic cloud thickness for the feasibility check; defaults to the grid's z extent.
        #[arg(long)]
        dz_atom: Option<f64>,
    },
}

/// Parses `args`, runs the command and returns the process exit status:
/// 0 on success, 1 on failure, 2 on usage errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Warn
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match execute(&cli.command) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs one command and returns its standard-output text.
pub fn execute(command: &Command) -> Result<String> {
    match command {
        Command::Run { config, out } => {
            let (text, cfg) = load(config)?;
            let dir = out_dir(&cfg, out);
            run(&text, &cfg, &dir)?;
            Ok(format!("wrote {}\n", dir.display()))
        }
        Command::Characteristics { config, out } => {
            let (text, cfg) = load(config)?;
            let dir = out_dir(&cfg, out);
            characteristics(&text, &cfg, &dir)?;
            Ok(format!("wrote {}\n", dir.display()))
        }
        Command::Compare { a, b } => compare(a, b),
        Command::Widths { dir, dz_atom } => widths(dir, *dz_atom),
    }
}

fn load(path: &Path) -> Result<(String, RunConfig)> {
    let text = fs::read_to_string(path).map_err(|e| Error::RunDir(path.to_path_buf(), format!("cannot read config: {e}")))?;
    let cfg = parse_config(&text)?;
    Ok((text, cfg))
}

fn out_dir(cfg: &RunConfig, out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory))
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(format_number).collect::<Vec<_>>().join(",")
}

fn base_manifest(kind: &str, cfg: &RunConfig) -> Result<Manifest> {
    let solver = cfg.solver();
    let geom = cfg.geometry()?;
    let mut m = Manifest::new(kind);
    m.push("mode", cfg.mode().as_str());
    m.push("nx", geom.nx);
    m.push("nz", geom.nz);
    m.push("t_end", format_number(solver.t_end));
    m.push("snapshot_every", format_number(solver.snapshot_every));
    let times = solver.snapshot_times();
    m.push("snapshot_count", times.len());
    m.push("snapshot_times", join(times));
    Ok(m)
}

/// Executes the solver run described by `cfg`, writing into `dir`.
pub fn run(config_text: &str, cfg: &RunConfig, dir: &Path) -> Result<solver::RunSummary> {
    let medium = cfg.medium()?;
    let probe = cfg.probe();
    let geom = cfg.geometry()?;
    let solver_cfg = cfg.solver();
    probe.check_against(&medium);
    rundir::prepare(dir, config_text)?;
    info!("{} run into {}", solver_cfg.mode.as_str(), dir.display());
    let mut index = 0;
    let summary = solver::run(&solver_cfg, &medium, &probe, geom, |state| {
        write_snapshot(dir, index, state)?;
        index += 1;
        Ok(())
    })?;
    let mut m = base_manifest("run", cfg)?;
    m.push("dt_max", format_number(summary.dt_max));
    m.push("limiting_bound", summary.limiting_bound);
    m.push("total_steps", summary.total_steps());
    m.push(
        "segment_steps",
        summary.segments.iter().map(|s| s.steps.to_string()).collect::<Vec<_>>().join(","),
    );
    m.push("segment_dt", join(summary.segments.iter().map(|s| s.dt)));
    rundir::write_manifest(dir, &m)?;
    Ok(summary)
}

/// Evaluates the characteristic solution on the configured grid and times,
/// plus storage plane, trajectories, extent and feasibility.
pub fn characteristics(config_text: &str, cfg: &RunConfig, dir: &Path) -> Result<()> {
    let medium = cfg.medium()?;
    let probe = cfg.probe();
    let geom = cfg.geometry()?;
    let times = cfg.solver().snapshot_times();
    probe.check_against(&medium);
    let map = CharacteristicMap::for_grid(&medium, &geom, DEFAULT_TOLERANCE)?;
    rundir::prepare(dir, config_text)?;
    for (k, &t) in times.iter().enumerate() {
        write_snapshot(dir, k, &map.state_at(t, geom, &probe)?)?;
        info!("characteristics t = {t}");
    }

    let mut summary = Manifest::default();
    let mut put = |key: &str, value: Result<String>| match value {
        Ok(v) => summary.push(key, v),
        Err(e) => {
            warn!("{key}: {e}");
            summary.push(key, "undefined");
        }
    };
    put("z_inf", map.find_z_infinity().map(format_number));
    let extent = map.spin_wave_extent(&probe);
    put("dx_s", extent.as_ref().map(|e| format_number(e.dx_s)).map_err(clone_err));
    put("dz_s", extent.as_ref().map(|e| format_number(e.dz_s)).map_err(clone_err));
    let feasibility = map.storage_feasibility(&probe, geom.z_max() - geom.z0);
    put("feasibility.class", Ok(feasibility.class.as_str().to_string()));
    put("feasibility.margin", Ok(format_number(feasibility.margin)));
    if medium.control2.is_some() {
        put("retrieved_width", map.retrieved_width(probe.x_hwhm).map(format_number));
    }
    fs::write(dir.join(CHARACTERISTICS_FILE), summary.to_text())?;

    let mut traj = String::from("# xi0 x z\n");
    let step = geom.dx.min((geom.x_max() - geom.x0) / 200.0);
    for j in -2..=2 {
        let xi0 = j as f64 * probe.x_hwhm;
        match map.trace_trajectory(xi0, step) {
            Ok(t) => {
                for (x, z) in t.points {
                    let _ = writeln!(traj, "{} {} {}", format_number(xi0), format_number(x), format_number(z));
                }
            }
            Err(e) => warn!("trajectory xi0 = {xi0}: {e}"),
        }
    }
    fs::write(dir.join(TRAJECTORIES_FILE), traj)?;

    let mut m = base_manifest("characteristics", cfg)?;
    m.push("tolerance", format_number(map.tolerance()));
    rundir::write_manifest(dir, &m)?;
    Ok(())
}

fn clone_err(e: &Error) -> Error {
    Error::Unsupported(e.to_string())
}

/// Per-time, per-field differences of `a` against reference `b`.
pub fn compare(a: &Path, b: &Path) -> Result<String> {
    let sa = rundir::read_all(a)?;
    let sb = rundir::read_all(b)?;
    if sa.len() != sb.len() {
        return Err(Error::RunDir(
            a.to_path_buf(),
            format!("{} snapshots versus {} in {}", sa.len(), sb.len(), b.display()),
        ));
    }
    let mut out = String::from("# t field l2 linf rel_l2\n");
    for (x, y) in sa.iter().zip(&sb) {
        if x.t != y.t {
            return Err(Error::RunDir(a.to_path_buf(), format!("snapshot time {} versus {}", x.t, y.t)));
        }
        let mut pairs = vec![
            (FieldKind::E, &x.e, &y.e),
            (FieldKind::PsiE, &x.psi_e, &y.psi_e),
            (FieldKind::PsiQ, &x.psi_q, &y.psi_q),
        ];
        if let (Some(p), Some(q)) = (&x.e_tilde, &y.e_tilde) {
            pairs.push((FieldKind::ETilde, p, q));
        }
        for (kind, p, q) in pairs {
            let d = field_difference(p, q)?;
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                format_number(x.t),
                kind.as_str(),
                format_number(d.l2),
                format_number(d.linf),
                format_number(d.relative_l2())
            );
        }
    }
    Ok(out)
}

/// Geometry report of the run in `dir`.
pub fn widths(dir: &Path, dz_atom: Option<f64>) -> Result<String> {
    let cfg = rundir::read_config(dir)?;
    let medium = cfg.medium()?;
    let probe = cfg.probe();
    let geom = cfg.geometry()?;
    let snapshots = rundir::read_all(dir)?;
    let map = CharacteristicMap::for_grid(&medium, &geom, DEFAULT_TOLERANCE)?;
    let dz_atom = dz_atom.unwrap_or(geom.z_max() - geom.z0);
    Ok(verify_geometry(&snapshots, &probe, &map, &medium, dz_atom)?.to_text())
}
