//! Explicit integrator for the coupled probe / exciton system
//!
//! ```text
//! (d/dt + c d/dz) E                      = i G psi_e
//! (d/dt + i Delta + gamma + v0 d/dx) psi_e = i Omega psi_q + i G E
//! (d/dt + i delta + v0 d/dx) psi_q         = i Omega psi_e
//! ```
//!
//! with `G(z) = g sqrt(n(z))` and `Omega(x)` the summed control amplitude.
//! Each step is a symmetric split: half a step of pointwise interaction,
//! transport, then the other half. With the default step `dt = dz / c` the
//! probe moves exactly one cell along z; the excitons follow the flow by
//! first-order upwind transport along x. The interaction is advanced with the
//! exact propagator `exp(-i H dt / 2)` of the local 3x3 system, which is
//! unitary when `gamma = 0`.

use log::debug;
use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::characteristics::ProbeSpec;
use crate::error::{Error, Result};
use crate::grid::{FieldGrid, Geometry};
use crate::medium::{Direction, Medium};
use crate::state::{Mode, SolverState};

/// Courant numbers this close to one are treated as an exact shift.
const UNIT_COURANT_SLACK: f64 = 1e-12;
/// Steps between finiteness checks.
const NAN_CHECK_EVERY: usize = 64;

type Propagator = [Complex64; 9];

#[derive(Debug, Clone)]
pub struct MaxwellBlochEngine {
    geom: Geometry,
    medium: Medium,
    probe: ProbeSpec,
    omega: Vec<f64>,
    coupling: Vec<f64>,
    e: Vec<Complex64>,
    psi_e: Vec<Complex64>,
    psi_q: Vec<Complex64>,
    propagators: Vec<Propagator>,
    propagator_dt: f64,
    steps: usize,
    t: f64,
}

impl MaxwellBlochEngine {
    pub fn new(medium: &Medium, probe: &ProbeSpec, geom: Geometry) -> Result<Self> {
        medium.validate()?;
        probe.validate()?;
        probe.check_against(medium);
        if medium.control2.as_ref().is_some_and(|c| c.direction == Direction::Backward) {
            return Err(Error::Unsupported(
                "full-MB mode does not model a counter-propagating second control laser; use advection mode".into(),
            ));
        }
        let omega = geom.xs().map(|x| medium.rabi_total(x)).collect();
        let coupling = geom.zs().map(|z| medium.coupling(z)).collect();
        let zero = Complex64::new(0.0, 0.0);
        let mut engine = Self {
            geom,
            medium: medium.clone(),
            probe: *probe,
            omega,
            coupling,
            e: vec![zero; geom.len()],
            psi_e: vec![zero; geom.len()],
            psi_q: vec![zero; geom.len()],
            propagators: Vec::new(),
            propagator_dt: f64::NAN,
            steps: 0,
            t: 0.0,
        };
        engine.apply_inflow();
        Ok(engine)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Stability bounds on `dt`, each with its name.
    pub fn bounds(&self) -> Vec<(&'static str, f64)> {
        let k = &self.medium.constants;
        let g = &self.geom;
        let inv = |r: f64| if r > 0.0 { 1.0 / r } else { f64::INFINITY };
        let omega_max = self.omega.iter().cloned().fold(0.0, f64::max);
        let coupling_max = self.coupling.iter().cloned().fold(0.0, f64::max);
        let mut out = vec![
            ("dz/c", g.dz / k.c),
            ("dx/v0", if k.v0 > 0.0 { g.dx / k.v0 } else { f64::INFINITY }),
            ("1/Omega_max", inv(omega_max)),
            ("1/(g*sqrt(n))_max", inv(coupling_max)),
            ("1/|Delta-i*gamma|", inv(Complex64::new(k.detuning, -k.gamma).norm())),
        ];
        let vr = k.recoil_speed();
        if vr != 0.0 {
            out.push(("dz/|v_r|", g.dz / vr.abs()));
        }
        out
    }

    fn apply_inflow(&mut self) {
        let nz = self.geom.nz;
        for i in 0..self.geom.nx {
            self.e[i * nz] = self.probe.envelope(self.geom.x(i), self.t);
        }
    }

    fn local_hamiltonian(&self, omega: f64, coupling: f64) -> Matrix3<Complex64> {
        let k = &self.medium.constants;
        let r = |v: f64| Complex64::new(v, 0.0);
        let z = r(0.0);
        Matrix3::new(
            z,
            r(-coupling),
            z,
            r(-coupling),
            Complex64::new(k.detuning, -k.gamma),
            r(-omega),
            z,
            r(-omega),
            r(k.delta),
        )
    }

    fn rebuild_propagators(&mut self, dt: f64) {
        let g = self.geom;
        let minus_i_dt = Complex64::new(0.0, -0.5 * dt);
        let mut out = Vec::with_capacity(g.len());
        for i in 0..g.nx {
            for j in 0..g.nz {
                let h = self.local_hamiltonian(self.omega[i], self.coupling[j]);
                let u = (h * minus_i_dt).exp();
                let mut p = [Complex64::new(0.0, 0.0); 9];
                for r in 0..3 {
                    for c in 0..3 {
                        p[3 * r + c] = u[(r, c)];
                    }
                }
                out.push(p);
            }
        }
        self.propagators = out;
        self.propagator_dt = dt;
        debug!("rebuilt {} interaction propagators for dt = {dt}", g.len());
    }

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
        if dt != self.propagator_dt {
            self.rebuild_propagators(dt);
        }
        self.interact();
        let g = self.geom;
        let nz = g.nz;
        let k = self.medium.constants;

        let courant = k.c * dt / g.dz;
        let exact = (courant - 1.0).abs() < UNIT_COURANT_SLACK;
        self.e
            .par_chunks_mut(nz)
            .for_each(|col| shift_up(col, if exact { 1.0 } else { courant }));

        let vr = k.recoil_speed();
        if vr != 0.0 {
            let cr = vr * dt / g.dz;
            self.psi_e
                .par_chunks_mut(nz)
                .for_each(|col| if cr > 0.0 { shift_up(col, cr) } else { shift_down(col, -cr) });
        }

        if k.v0 > 0.0 {
            let cx = k.v0 * dt / g.dx;
            for f in [&mut self.psi_e, &mut self.psi_q] {
                shift_columns(f, nz, cx);
            }
        }
        self.t += dt;
        self.steps += 1;
        self.apply_inflow();

        self.interact();

        if self.steps.is_multiple_of(NAN_CHECK_EVERY) {
            self.check_finite()?;
        }
        Ok(())
    }

    /// Half a step of the pointwise interaction.
    fn interact(&mut self) {
        let nz = self.geom.nz;
        let props = &self.propagators;
        self.e
            .par_chunks_mut(nz)
            .zip(self.psi_e.par_chunks_mut(nz))
            .zip(self.psi_q.par_chunks_mut(nz))
            .enumerate()
            .for_each(|(i, ((e, pe), pq))| {
                for j in 0..nz {
                    let u = &props[i * nz + j];
                    let (a, b, c) = (e[j], pe[j], pq[j]);
                    e[j] = u[0] * a + u[1] * b + u[2] * c;
                    pe[j] = u[3] * a + u[4] * b + u[5] * c;
                    pq[j] = u[6] * a + u[7] * b + u[8] * c;
                }
            });
    }

    pub fn check_finite(&self) -> Result<()> {
        let finite = |f: &[Complex64]| f.iter().all(|v| v.re.is_finite() && v.im.is_finite());
        if finite(&self.e) && finite(&self.psi_e) && finite(&self.psi_q) {
            Ok(())
        } else {
            Err(Error::NonFinite { step: self.steps })
        }
    }

    pub fn state(&self) -> SolverState {
        let grid = |v: &Vec<Complex64>| FieldGrid::from_values(self.geom, v.clone()).expect("engine grid matches geometry");
        SolverState {
            t: self.t,
            mode: Mode::Full,
            e: grid(&self.e),
            e_tilde: None,
            psi_e: grid(&self.psi_e),
            psi_q: grid(&self.psi_q),
        }
    }
}

/// Upwind transport toward +z with Courant number `c` in (0, 1]; the value
/// at `j = 0` is left for the caller to overwrite.
fn shift_up(col: &mut [Complex64], c: f64) {
    if c == 1.0 {
        col.copy_within(0..col.len() - 1, 1);
    } else {
        for j in (1..col.len()).rev() {
            col[j] = col[j] * (1.0 - c) + col[j - 1] * c;
        }
    }
}

/// Upwind transport toward +x of a column-major field with Courant number
/// `c` in (0, 1] and zero inflow at the first column.
fn shift_columns(f: &mut [Complex64], nz: usize, c: f64) {
    let n = f.len();
    for start in (nz..n).step_by(nz).rev() {
        let (left, right) = f.split_at_mut(start);
        let prev = &left[start - nz..];
        for (v, &p) in right[..nz].iter_mut().zip(prev) {
            *v = *v * (1.0 - c) + p * c;
        }
    }
    for v in &mut f[..nz] {
        *v *= 1.0 - c;
    }
}

/// Upwind transport toward -z with Courant number `c` in (0, 1] and zero inflow.
fn shift_down(col: &mut [Complex64], c: f64) {
    let n = col.len();
    for j in 0..n {
        let up = if j + 1 < n { col[j + 1] } else { Complex64::new(0.0, 0.0) };
        col[j] = col[j] * (1.0 - c) + up * c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{ControlLaser, VgProfile};
    use crate::state::PhysicsConstants;

    fn medium(constants: PhysicsConstants) -> Medium {
        Medium::new(
            ControlLaser {
                center: 0.0,
                width: 1.0,
                amplitude: 4.0,
                direction: Direction::Forward,
            },
            None,
            VgProfile::constant(0.5),
            constants,
            0.0,
        )
        .unwrap()
    }

    fn probe() -> ProbeSpec {
        ProbeSpec {
            x_center: 0.0,
            x_hwhm: 0.2,
            t_center: 0.05,
            t_hwhm: 0.01,
            amplitude: 1.0,
        }
    }

    #[test]
    fn uncoupled_probe_advects_at_c() {
        let m = medium(PhysicsConstants {
            g: 0.0,
            c: 10.0,
            ..PhysicsConstants::default()
        });
        let geom = Geometry::spanning(-0.5, 0.5, 11, 0.0, 2.0, 201).unwrap();
        let mut eng = MaxwellBlochEngine::new(&m, &probe(), geom).unwrap();
        let dt = geom.dz / 10.0;
        for _ in 0..100 {
            eng.step(dt).unwrap();
        }
        // the pulse peak entered at t = 0.05 and has since moved c * 0.05 = 0.5
        let s = eng.state();
        let col = s.e.column(5);
        let jmax = (0..col.len()).max_by(|&a, &b| col[a].norm().total_cmp(&col[b].norm())).unwrap();
        assert!((geom.z(jmax) - 0.5).abs() <= geom.dz + 1e-12, "{}", geom.z(jmax));
        assert!(s.psi_e.max_abs() == 0.0 && s.psi_q.max_abs() == 0.0);
    }

    #[test]
    fn interaction_is_unitary_without_decay() {
        let m = medium(PhysicsConstants {
            c: 10.0,
            detuning: 0.3,
            delta: 0.1,
            ..PhysicsConstants::default()
        });
        let geom = Geometry::spanning(-0.5, 0.5, 5, 0.0, 1.0, 5).unwrap();
        let eng = MaxwellBlochEngine::new(&m, &probe(), geom).unwrap();
        let h = eng.local_hamiltonian(2.0, 3.0);
        let u = (h * Complex64::new(0.0, -0.01)).exp();
        let err = (u.adjoint() * u - Matrix3::identity()).norm();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn decay_reduces_norm() {
        let m = medium(PhysicsConstants {
            c: 10.0,
            gamma: 1.0,
            ..PhysicsConstants::default()
        });
        let geom = Geometry::spanning(-0.5, 0.5, 5, 0.0, 1.0, 5).unwrap();
        let eng = MaxwellBlochEngine::new(&m, &probe(), geom).unwrap();
        let u = (eng.local_hamiltonian(2.0, 3.0) * Complex64::new(0.0, -0.01)).exp();
        let v = nalgebra::Vector3::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        assert!((u * v).norm() < 1.0);
    }

    #[test]
    fn rejects_counter_propagating_second_laser() {
        let mut m = medium(PhysicsConstants::default());
        m.control2 = Some(ControlLaser {
            center: 6.0,
            width: 1.0,
            amplitude: 4.0,
            direction: Direction::Backward,
        });
        let geom = Geometry::spanning(-1.0, 8.0, 10, 0.0, 1.0, 5).unwrap();
        assert!(matches!(MaxwellBlochEngine::new(&m, &probe(), geom), Err(Error::Unsupported(_))));
    }

    #[test]
    fn step_names_violated_bound() {
        let m = medium(PhysicsConstants::default());
        let geom = Geometry::spanning(-0.5, 0.5, 11, 0.0, 1.0, 11).unwrap();
        let mut eng = MaxwellBlochEngine::new(&m, &probe(), geom).unwrap();
        match eng.step(0.01) {
            Err(Error::Cfl { bound_name, .. }) => assert_eq!(bound_name, "dz/c"),
            other => panic!("{other:?}"),
        }
    }

    fn slow_light_run(gamma: f64) -> Vec<SolverState> {
        let m = Medium::new(
            ControlLaser {
                center: 0.0,
                width: 50.0,
                amplitude: 10.0,
                direction: Direction::Forward,
            },
            None,
            VgProfile::constant(1.0),
            PhysicsConstants {
                c: 100.0,
                v0: 0.01,
                gamma,
                ..PhysicsConstants::default()
            },
            0.0,
        )
        .unwrap();
        let p = ProbeSpec {
            x_center: 0.0,
            x_hwhm: 3.0,
            t_center: 3.0,
            t_hwhm: 1.0,
            amplitude: 1.0,
        };
        let geom = Geometry::spanning(-12.0, 12.0, 121, 0.0, 10.0, 51).unwrap();
        let mut eng = MaxwellBlochEngine::new(&m, &p, geom).unwrap();
        let dt = geom.dz / 100.0;
        let mut out = Vec::new();
        for k in 1..=4000 {
            eng.step(dt).unwrap();
            if k % 250 == 0 {
                out.push(eng.state());
            }
        }
        out
    }

    fn total(s: &SolverState) -> f64 {
        let (a, b, c) = crate::diagnostics::excitation_numbers(s);
        a + b + c
    }

    #[test]
    fn interior_excitation_is_conserved_without_decay() {
        let snaps = slow_light_run(0.0);
        let interior: Vec<&SolverState> = snaps.iter().filter(|s| crate::diagnostics::boundary_fraction(s) < 1e-6).collect();
        assert!(interior.len() >= 3, "{}", interior.len());
        let n0 = total(interior[0]);
        for s in &interior {
            let drift = (total(s) - n0).abs() / n0;
            assert!(drift < 1e-3, "t = {}: {drift}", s.t);
        }
    }

    #[test]
    fn decay_drains_excitation_monotonically() {
        let snaps = slow_light_run(0.5);
        let late: Vec<f64> = snaps.iter().filter(|s| s.t >= 6.0).map(total).collect();
        assert!(late.windows(2).all(|w| w[1] < w[0]), "{late:?}");
        let undamped = slow_light_run(0.0);
        assert!(total(snaps.last().unwrap()) < total(undamped.last().unwrap()));
    }
}
