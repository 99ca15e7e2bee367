//! Physical constants and the engine state carried between time steps.

use crate::error::{Error, Result};
use crate::grid::{FieldGrid, Geometry};

/// Constants of the three-level model, in simulation units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsConstants {
    /// Radiation-matter coupling `g`.
    pub g: f64,
    /// Probe speed in vacuum.
    pub c: f64,
    /// Atomic flow speed along +x.
    pub v0: f64,
    /// Recoil velocity; only used when `recoil_enabled`.
    pub v_r: f64,
    pub recoil_enabled: bool,
    /// Two-photon detuning.
    pub delta: f64,
    /// One-photon detuning.
    pub detuning: f64,
    /// Excited-state decay rate.
    pub gamma: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self {
            g: 1.0,
            c: 100.0,
            v0: 0.1,
            v_r: 0.0,
            recoil_enabled: false,
            delta: 0.0,
            detuning: 0.0,
            gamma: 0.0,
        }
    }
}

impl PhysicsConstants {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.g, self.c, self.v0, self.v_r, self.delta, self.detuning, self.gamma]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidMedium("physics constants must be finite".into()));
        }
        if self.c <= 0.0 {
            return Err(Error::InvalidMedium(format!("c must be positive, got {}", self.c)));
        }
        if self.v0 < 0.0 {
            return Err(Error::InvalidMedium(format!("v0 must be >= 0, got {}", self.v0)));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidMedium(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.g < 0.0 {
            return Err(Error::InvalidMedium(format!("g must be >= 0, got {}", self.g)));
        }
        Ok(())
    }

    /// Recoil drift speed of the excited exciton, zero unless enabled.
    pub fn recoil_speed(&self) -> f64 {
        if self.recoil_enabled {
            self.v_r
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Adiabatic polariton advection of the auxiliary field.
    Advection,
    /// Coupled Maxwell-Bloch fields.
    Full,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Advection => "advection",
            Mode::Full => "full-MB",
        }
    }
}

/// Field triple at one instant.
///
/// `e` is always the physical probe amplitude. In advection mode the evolved
/// quantity is the auxiliary field, kept in `e_tilde`; `psi_q` is slaved to it
/// and `psi_e` is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub mode: Mode,
    pub e: FieldGrid,
    pub e_tilde: Option<FieldGrid>,
    pub psi_e: FieldGrid,
    pub psi_q: FieldGrid,
}

impl SolverState {
    pub fn zeros(geom: Geometry, mode: Mode) -> Self {
        Self {
            t: 0.0,
            mode,
            e: FieldGrid::zeros(geom),
            e_tilde: match mode {
                Mode::Advection => Some(FieldGrid::zeros(geom)),
                Mode::Full => None,
            },
            psi_e: FieldGrid::zeros(geom),
            psi_q: FieldGrid::zeros(geom),
        }
    }

    pub fn geometry(&self) -> &Geometry {
        self.e.geometry()
    }

    /// Checks that every carried grid shares one geometry.
    pub fn check_geometry(&self) -> Result<()> {
        let g = self.e.geometry();
        let same = self.psi_e.geometry() == g && self.psi_q.geometry() == g && self.e_tilde.as_ref().is_none_or(|f| f.geometry() == g);
        if same {
            Ok(())
        } else {
            Err(Error::InvalidGrid("state grids differ in geometry".into()))
        }
    }
}
