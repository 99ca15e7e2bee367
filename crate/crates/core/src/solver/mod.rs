//! Finite-difference engines and the snapshot-driven run loop.

mod advection;
mod maxwell_bloch;

use log::info;
use num_complex::Complex64;

pub use advection::AdvectionEngine;
pub use maxwell_bloch::MaxwellBlochEngine;

use crate::characteristics::{ProbeSpec, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::grid::Geometry;
use crate::medium::Medium;
use crate::state::{Mode, SolverState};

/// Relative fraction of the maximum below which nodes are masked out of the
/// adiabaticity residuals.
pub const RESIDUAL_MASK: f64 = 0.01;
/// Minimum `|a(x)|` for a node to enter the adiabaticity residuals.
pub const RESIDUAL_MIN_SHAPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub mode: Mode,
    pub t_end: f64,
    pub snapshot_every: f64,
    /// Requested step; when absent the step is `cfl_safety` times the
    /// tightest stability bound.
    pub dt: Option<f64>,
    pub cfl_safety: f64,
}

impl SolverConfig {
    /// Default safety factor: the full engine needs unit Courant number along z
    /// for an exact probe shift.
    pub fn default_safety(mode: Mode) -> f64 {
        match mode {
            Mode::Advection => 0.9,
            Mode::Full => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidGrid(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if !(self.snapshot_every > 0.0 && self.snapshot_every.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "snapshot_every must be positive, got {}",
                self.snapshot_every
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    /// Snapshot times `0, every, 2 every, ...` up to `t_end`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let n = (self.t_end / self.snapshot_every + 1e-9).floor() as usize;
        (0..=n).map(|k| k as f64 * self.snapshot_every).collect()
    }
}

/// Steps taken between two consecutive snapshots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dt_max: f64,
    pub limiting_bound: &'static str,
    pub segments: Vec<Segment>,
}

impl RunSummary {
    pub fn total_steps(&self) -> usize {
        self.segments.iter().map(|s| s.steps).sum()
    }
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Engine {
    Advection(AdvectionEngine),
    Full(MaxwellBlochEngine),
}

impl Engine {
    pub fn new(mode: Mode, medium: &Medium, probe: &ProbeSpec, geom: Geometry) -> Result<Self> {
        Ok(match mode {
            Mode::Advection => Engine::Advection(AdvectionEngine::new(medium, probe, geom, DEFAULT_TOLERANCE)?),
            Mode::Full => Engine::Full(MaxwellBlochEngine::new(medium, probe, geom)?),
        })
    }

    pub fn bounds(&self) -> Vec<(&'static str, f64)> {
        match self {
            Engine::Advection(e) => e.bounds().to_vec(),
            Engine::Full(e) => e.bounds(),
        }
    }

    pub fn step(&mut self, dt: f64) -> Result<()> {
        match self {
            Engine::Advection(e) => e.step(dt),
            Engine::Full(e) => e.step(dt),
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            Engine::Advection(e) => e.time(),
            Engine::Full(e) => e.time(),
        }
    }

    pub fn state(&self) -> SolverState {
        match self {
            Engine::Advection(e) => e.state(),
            Engine::Full(e) => e.state(),
        }
    }

    fn check_finite(&self) -> Result<()> {
        match self {
            Engine::Advection(_) => Ok(()),
            Engine::Full(e) => e.check_finite(),
        }
    }
}

/// Largest admissible step and the name of the bound that sets it.
pub fn step_limit(config: &SolverConfig, engine: &Engine) -> Result<(f64, &'static str)> {
    let (name, bound) = engine
        .bounds()
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("engines report at least one bound");
    let limit = config.cfl_safety * bound;
    match config.dt {
        None => Ok((limit, name)),
        Some(dt) => {
            for (n, b) in engine.bounds() {
                if dt > config.cfl_safety * b * (1.0 + 1e-12) {
                    return Err(Error::Cfl {
                        dt,
                        bound_name: n,
                        bound: config.cfl_safety * b,
                    });
                }
            }
            Ok((dt, "dt"))
        }
    }
}

/// Runs from `t = 0` to `t_end`, calling `on_snapshot` at every snapshot time
/// in order. Steps between snapshots are uniform and chosen so that snapshot
/// times are hit exactly.
pub fn run<F>(config: &SolverConfig, medium: &Medium, probe: &ProbeSpec, geom: Geometry, mut on_snapshot: F) -> Result<RunSummary>
where
    F: FnMut(&SolverState) -> Result<()>,
{
    config.validate()?;
    let mut engine = Engine::new(config.mode, medium, probe, geom)?;
    let (dt_max, limiting_bound) = step_limit(config, &engine)?;
    let times = config.snapshot_times();
    let mut segments = Vec::with_capacity(times.len().saturating_sub(1));

    let mut emit = |engine: &Engine, t: f64| -> Result<()> {
        let mut state = engine.state();
        state.t = t;
        on_snapshot(&state)
    };
    emit(&engine, times[0])?;
    for w in times.windows(2) {
        let len = w[1] - w[0];
        let steps = ((len / dt_max) - 1e-9).ceil().max(1.0) as usize;
        let dt = len / steps as f64;
        for _ in 0..steps {
            engine.step(dt)?;
        }
        engine.check_finite()?;
        info!("t = {:.6} ({} steps of {:.3e})", w[1], steps, dt);
        emit(&engine, w[1])?;
        segments.push(Segment {
            t_start: w[0],
            t_end: w[1],
            steps,
            dt,
        });
    }
    Ok(RunSummary {
        dt_max,
        limiting_bound,
        segments,
    })
}

/// [`run`] keeping every snapshot in memory.
pub fn run_collect(config: &SolverConfig, medium: &Medium, probe: &ProbeSpec, geom: Geometry) -> Result<(Vec<SolverState>, RunSummary)> {
    let mut out = Vec::new();
    let summary = run(config, medium, probe, geom, |s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok((out, summary))
}

/// Adiabaticity residuals `(r_q, r_e)` of a full-MB state.
///
/// With `E~ = E / Omega(x)`, `r_q = |psi_q + G E~| / |psi_q|` and
/// `r_e = |psi_e - psi_e_pred| / |psi_e|`, where
/// `psi_e_pred = -i (G / Omega) vg_ref(z) a(x) dE~/dz` follows from the
/// polariton equation. Norms run over nodes whose excitation density is at
/// least 1% of its maximum and where `|a| >= 0.01`.
pub fn adiabatic_residual(state: &SolverState, medium: &Medium) -> (f64, f64) {
    let g = *state.geometry();
    let dens = |i: usize, j: usize| state.e.get(i, j).norm_sqr() + state.psi_e.get(i, j).norm_sqr() + state.psi_q.get(i, j).norm_sqr();
    let mut max_dens = 0.0f64;
    for i in 0..g.nx {
        for j in 0..g.nz {
            max_dens = max_dens.max(dens(i, j));
        }
    }
    if max_dens == 0.0 {
        return (0.0, 0.0);
    }
    let (mut nq, mut dq, mut ne, mut de) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..g.nx {
        let x = g.x(i);
        let a = medium.shape_combined(x);
        let omega = medium.rabi_total(x);
        if a.abs() < RESIDUAL_MIN_SHAPE || omega <= 0.0 {
            continue;
        }
        let et = |j: usize| state.e.get(i, j) / omega;
        for j in 0..g.nz {
            if dens(i, j) < RESIDUAL_MASK * max_dens {
                continue;
            }
            let z = g.z(j);
            let coupling = medium.coupling(z);
            let pq = state.psi_q.get(i, j);
            nq += (pq + et(j) * coupling).norm_sqr();
            dq += pq.norm_sqr();

            let d = if j == 0 {
                (et(1) - et(0)) / g.dz
            } else if j + 1 == g.nz {
                (et(j) - et(j - 1)) / g.dz
            } else {
                (et(j + 1) - et(j - 1)) / (2.0 * g.dz)
            };
            let pred = Complex64::new(0.0, -1.0) * d * (coupling / omega * medium.vg_ref(z) * a);
            let pe = state.psi_e.get(i, j);
            ne += (pe - pred).norm_sqr();
            de += pe.norm_sqr();
        }
    }
    let ratio = |n: f64, d: f64| match (n == 0.0, d == 0.0) {
        (true, _) => 0.0,
        (false, true) => f64::INFINITY,
        (false, false) => (n / d).sqrt(),
    };
    (ratio(nq, dq), ratio(ne, de))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FieldGrid;
    use crate::medium::{ControlLaser, Direction, VgProfile};
    use crate::state::PhysicsConstants;

    fn medium() -> Medium {
        Medium::new(
            ControlLaser {
                center: 0.0,
                width: 1.0,
                amplitude: 1.0,
                direction: Direction::Forward,
            },
            None,
            VgProfile::constant(0.5),
            PhysicsConstants::default(),
            0.0,
        )
        .unwrap()
    }

    fn probe() -> ProbeSpec {
        ProbeSpec {
            x_center: 0.0,
            x_hwhm: 0.2,
            t_center: 1.0,
            t_hwhm: 0.3,
            amplitude: 1.0,
        }
    }

    #[test]
    fn snapshot_times_hit_multiples() {
        let cfg = SolverConfig {
            mode: Mode::Advection,
            t_end: 50.0,
            snapshot_every: 5.0,
            dt: None,
            cfl_safety: 0.9,
        };
        let t = cfg.snapshot_times();
        assert_eq!(t.len(), 11);
        assert_eq!(t[10], 50.0);
        let cfg = SolverConfig { t_end: 0.0, ..cfg };
        assert_eq!(cfg.snapshot_times(), vec![0.0]);
    }

    #[test]
    fn zero_duration_gives_initial_snapshot() {
        let cfg = SolverConfig {
            mode: Mode::Advection,
            t_end: 0.0,
            snapshot_every: 1.0,
            dt: None,
            cfl_safety: 0.9,
        };
        let geom = Geometry::spanning(-1.0, 1.0, 11, 0.0, 1.0, 11).unwrap();
        let (snaps, summary) = run_collect(&cfg, &medium(), &probe(), geom).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].t, 0.0);
        assert_eq!(summary.total_steps(), 0);
    }

    #[test]
    fn explicit_dt_checked_against_bounds() {
        let cfg = SolverConfig {
            mode: Mode::Advection,
            t_end: 1.0,
            snapshot_every: 1.0,
            dt: Some(1.0),
            cfl_safety: 0.9,
        };
        let geom = Geometry::spanning(-1.0, 1.0, 11, 0.0, 1.0, 11).unwrap();
        match run_collect(&cfg, &medium(), &probe(), geom) {
            Err(Error::Cfl { bound_name, .. }) => assert_eq!(bound_name, "dz/max|vg*a|"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn residual_of_zero_state_is_zero() {
        let geom = Geometry::spanning(-1.0, 1.0, 11, 0.0, 1.0, 11).unwrap();
        let s = SolverState::zeros(geom, Mode::Full);
        assert_eq!(adiabatic_residual(&s, &medium()), (0.0, 0.0));
    }

    #[test]
    fn residual_vanishes_on_dark_state() {
        let m = medium();
        let geom = Geometry::spanning(-0.5, 0.5, 21, 0.0, 1.0, 41).unwrap();
        let mut s = SolverState::zeros(geom, Mode::Full);
        s.e = FieldGrid::from_fn(geom, |x, z| Complex64::new((-(x * x) - (z - 0.5).powi(2) * 20.0).exp(), 0.0));
        s.psi_q = s.e.map(|x, z, v| -v * m.coupling(z) / m.rabi_total(x));
        let (rq, _) = adiabatic_residual(&s, &m);
        assert!(rq < 1e-14, "{rq}");
    }
}
