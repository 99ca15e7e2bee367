//! Upwind integrator for the adiabatic polariton equation
//! `(d/dt + vg_ref(z) a(x) d/dz + v0 d/dx) E~ = 0`.
//!
//! Transport along z is first-order upwind with the upwind side chosen per
//! column from the sign of `a(x)`. Transport along x is done by moving the
//! columns themselves: every column sits at `x_i + offset`, the offset grows
//! by `v0 dt`, and once it reaches `dx` the columns are relabelled one cell to
//! the right. This is the upwind scheme at unit Courant number, so the x-drift
//! of the stored spin wave carries no numerical diffusion. Snapshots are
//! interpolated back onto the lab grid.
//!
//! Initial data and the data entering through `z = z0` and `x = x0` are taken
//! from the characteristic solution. Under a Gaussian control beam that
//! solution reaches the entry plane at `x < x1` ahead of `E_in(x, t)`, so
//! starting from a dark medium would not solve the same problem.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::characteristics::{CharacteristicMap, ProbeSpec};
use crate::error::{Error, Result};
use crate::grid::{FieldGrid, Geometry};
use crate::medium::Medium;
use crate::state::{Mode, SolverState};

/// Shift count below this fraction of a cell is treated as round-off.
const SHIFT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct AdvectionEngine {
    geom: Geometry,
    medium: Medium,
    probe: ProbeSpec,
    map: CharacteristicMap,
    vg: Vec<f64>,
    /// Column-frame field, z-major like [`FieldGrid`].
    cols: Vec<Complex64>,
    shifts: usize,
    t: f64,
}

impl AdvectionEngine {
    pub fn new(medium: &Medium, probe: &ProbeSpec, geom: Geometry, tol: f64) -> Result<Self> {
        medium.validate()?;
        probe.validate()?;
        probe.check_against(medium);
        let z_lo = geom.z0.min(medium.z1);
        let map = CharacteristicMap::build(medium, (geom.x0 - geom.dx, geom.x_max() + geom.dx), (z_lo, geom.z_max()), tol)?;
        let vg = geom.zs().map(|z| medium.vg_ref(z)).collect();
        let mut engine = Self {
            geom,
            medium: medium.clone(),
            probe: *probe,
            map,
            vg,
            cols: vec![Complex64::new(0.0, 0.0); geom.len()],
            shifts: 0,
            t: 0.0,
        };
        engine.initialize()?;
        engine.apply_inflow()?;
        Ok(engine)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn map(&self) -> &CharacteristicMap {
        &self.map
    }

    /// Stability bounds `(dz / max|vg_ref a|, dx / v0)`; infinite when the
    /// corresponding speed vanishes.
    pub fn bounds(&self) -> [(&'static str, f64); 2] {
        let g = &self.geom;
        let vmax = self.vg.iter().cloned().fold(0.0, f64::max);
        let mut amax = self.medium.shape_combined(self.medium.control1.center).abs();
        if let Some(c2) = &self.medium.control2 {
            amax = amax.max(self.medium.shape_combined(c2.center).abs());
        }
        for x in g.xs() {
            amax = amax.max(self.medium.shape_combined(x).abs());
        }
        let v0 = self.medium.constants.v0;
        [
            ("dz/max|vg*a|", g.dz / (vmax * amax)),
            ("dx/v0", if v0 > 0.0 { g.dx / v0 } else { f64::INFINITY }),
        ]
    }

    fn offset(&self) -> f64 {
        self.medium.constants.v0 * self.t - self.shifts as f64 * self.geom.dx
    }

    fn column_x(&self, i: usize) -> f64 {
        self.geom.x(i) + self.offset()
    }

    /// Characteristic solution for the evolved field at the current time.
    fn exact(&self, x: f64, z: f64) -> Result<Complex64> {
        let m = &self.medium;
        let env = if m.constants.v0 > 0.0 {
            let xi = self.map.xi(x, z)?;
            let tau = self.map.tau(self.t, x, z)?;
            self.probe.envelope(m.x1() + xi, tau)
        } else if z == m.z1 {
            self.probe.envelope(x, self.t)
        } else {
            Complex64::new(0.0, 0.0)
        };
        Ok(env / m.reference_rabi())
    }

    fn inflow(&self, x: f64) -> Result<Complex64> {
        self.exact(x, self.geom.z0)
    }

    fn initialize(&mut self) -> Result<()> {
        if self.medium.constants.v0 == 0.0 {
            return Ok(());
        }
        for i in 0..self.geom.nx {
            self.fill_column(i)?;
        }
        Ok(())
    }

    fn fill_column(&mut self, i: usize) -> Result<()> {
        let g = self.geom;
        let x = self.column_x(i);
        for j in 0..g.nz {
            self.cols[i * g.nz + j] = self.exact(x, g.z(j))?;
        }
        Ok(())
    }

    fn apply_inflow(&mut self) -> Result<()> {
        let nz = self.geom.nz;
        for i in 0..self.geom.nx {
            let x = self.column_x(i);
            if self.medium.shape_combined(x) > 0.0 {
                self.cols[i * nz] = self.inflow(x)?;
            }
        }
        Ok(())
    }

    /// Advances by `dt`, which must respect [`bounds`](Self::bounds).
    pub fn step(&mut self, dt: f64) -> Result<()> {
        for (name, bound) in self.bounds() {
            if dt > bound * (1.0 + 1e-12) {
                return Err(Error::Cfl {
                    dt,
                    bound_name: name,
                    bound,
                });
            }
        }
        let g = self.geom;
        let nz = g.nz;
        let offset = self.offset();
        let medium = &self.medium;
        let vg = &self.vg;
        let scale = dt / g.dz;
        self.cols.par_chunks_mut(nz).enumerate().for_each(|(i, col)| {
            let a = medium.shape_combined(g.x(i) + offset);
            upwind_column(col, vg, a * scale);
        });

        self.t += dt;
        let v0 = self.medium.constants.v0;
        if v0 > 0.0 {
            let target = ((v0 * self.t) / g.dx + SHIFT_SLACK).floor() as usize;
            let shifted = self.shifts < target;
            while self.shifts < target {
                self.cols.rotate_right(nz);
                self.shifts += 1;
            }
            if shifted {
                self.fill_column(0)?;
            }
        }
        self.apply_inflow()?;
        Ok(())
    }

    /// Evolved field interpolated onto the lab grid.
    pub fn e_tilde(&self) -> FieldGrid {
        let g = self.geom;
        let nz = g.nz;
        let w = (self.offset() / g.dx).clamp(0.0, 1.0);
        let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
        out.par_chunks_mut(nz).enumerate().for_each(|(i, dst)| {
            let here = &self.cols[i * nz..(i + 1) * nz];
            if i == 0 || w == 0.0 {
                for (d, &h) in dst.iter_mut().zip(here) {
                    *d = h * (1.0 - w);
                }
            } else {
                let left = &self.cols[(i - 1) * nz..i * nz];
                for ((d, &h), &l) in dst.iter_mut().zip(here).zip(left) {
                    *d = l * w + h * (1.0 - w);
                }
            }
        });
        FieldGrid::from_values(g, out).expect("lab grid matches geometry")
    }

    pub fn state(&self) -> SolverState {
        let m = &self.medium;
        let e_tilde = self.e_tilde();
        let omega = m.reference_rabi();
        let e = e_tilde.map(|x, _, v| v * (omega * m.shape_combined(x).abs().sqrt()));
        let psi_q = e_tilde.map(|_, z, v| -v * m.coupling(z));
        SolverState {
            t: self.t,
            mode: Mode::Advection,
            e,
            psi_e: FieldGrid::zeros(self.geom),
            psi_q,
            e_tilde: Some(e_tilde),
        }
    }
}

/// One upwind step along a column; `k = a dt / dz`, so the local Courant
/// number is `vg[j] * k`.
fn upwind_column(col: &mut [Complex64], vg: &[f64], k: f64) {
    let n = col.len();
    if k > 0.0 {
        for j in (1..n).rev() {
            let c = vg[j] * k;
            col[j] = col[j] - (col[j] - col[j - 1]) * c;
        }
    } else if k < 0.0 {
        for j in 0..n {
            let c = -vg[j] * k;
            let up = if j + 1 < n { col[j + 1] } else { Complex64::new(0.0, 0.0) };
            col[j] = col[j] + (up - col[j]) * c;
        }
    }
}
