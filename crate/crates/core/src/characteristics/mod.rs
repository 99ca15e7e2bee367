//! Semi-analytic propagation along characteristics.
//!
//! The adiabatic polariton equation
//! `(d/dt + vg_ref(z) a(x) d/dz + v0 d/dx) E~ = 0` is transported along the
//! level sets of
//!
//! ```text
//! xi(x, z)     = A(x) - v0 B(z),   A(x) = int_{x1}^{x} a,   B(z) = int_{z1}^{z} 1 / vg_ref
//! tau(t, x, z) = t + (xi(x, z) - (x - x1)) / v0
//! ```
//!
//! so every field is a function of the incoming probe envelope evaluated at
//! `(x1 + xi, tau)`. [`CharacteristicMap`] tabulates `A` and `B` once; all
//! queries after construction are pure.

mod quadrature;

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;

pub use quadrature::{adaptive_simpson, bisect, CumulativeTable};

use crate::error::{Error, Result};
use crate::grid::{FieldGrid, Geometry};
use crate::medium::Medium;
use crate::state::{Mode, SolverState};

/// Default absolute tolerance of the quadrature tables.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Probe envelope entering through the plane `z = z1`.
///
/// Widths are half-widths at half maximum of `|E|`; the envelope is Gaussian in
/// both the transverse coordinate and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSpec {
    pub x_center: f64,
    pub x_hwhm: f64,
    pub t_center: f64,
    pub t_hwhm: f64,
    pub amplitude: f64,
}

impl ProbeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_hwhm > 0.0 && self.x_hwhm.is_finite()) {
            return Err(Error::InvalidProbe(format!("x_hwhm must be positive, got {}", self.x_hwhm)));
        }
        if !(self.t_hwhm > 0.0 && self.t_hwhm.is_finite()) {
            return Err(Error::InvalidProbe(format!("t_hwhm must be positive, got {}", self.t_hwhm)));
        }
        if ![self.x_center, self.t_center, self.amplitude].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidProbe("probe parameters must be finite".into()));
        }
        Ok(())
    }

    /// Warns when the probe is not much narrower than the first control beam.
    pub fn check_against(&self, medium: &Medium) {
        let ratio = medium.control1.width / self.x_hwhm;
        if ratio < 3.0 {
            warn!("control beam only {ratio:.2}x wider than the probe; boundary data deviates from E_in(x, t)");
        }
    }

    /// Incoming field `E_in(x, t)`.
    pub fn envelope(&self, x: f64, t: f64) -> Complex64 {
        let ln2 = std::f64::consts::LN_2;
        let u = (x - self.x_center) / self.x_hwhm;
        let s = (t - self.t_center) / self.t_hwhm;
        Complex64::new(self.amplitude * (-ln2 * (u * u + s * s)).exp(), 0.0)
    }
}

/// Field values of the adiabatic polariton at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolaritonSample {
    /// Probe amplitude `sqrt|a(x)| E_in(xi, tau)`.
    pub e: Complex64,
    /// Auxiliary field `E_in(xi, tau) / Omega1(x1)`.
    pub e_tilde: Complex64,
    /// Spin exciton `-(g sqrt(n) / Omega1(x1)) E_in(xi, tau)`.
    pub psi_q: Complex64,
}

/// A level set `xi(x, z) = xi0` sampled column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub xi0: f64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinWaveExtent {
    pub z_inf: f64,
    /// `v0 * t_hwhm`.
    pub dx_s: f64,
    /// `x_hwhm * vg_ref(z_inf) / v0`.
    pub dz_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageClass {
    Stored,
    Marginal,
    Escapes,
}

impl StorageClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            StorageClass::Stored => "stored",
            StorageClass::Marginal => "marginal",
            StorageClass::Escapes => "escapes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub margin: f64,
    pub class: StorageClass,
}

impl Feasibility {
    pub fn from_margin(margin: f64) -> Self {
        let class = if margin >= 5.0 {
            StorageClass::Stored
        } else if margin >= 1.0 {
            StorageClass::Marginal
        } else {
            StorageClass::Escapes
        };
        Self { margin, class }
    }
}

#[derive(Debug, Clone)]
pub struct CharacteristicMap {
    medium: Medium,
    a_table: CumulativeTable,
    b_table: CumulativeTable,
    a1_total: f64,
    tol: f64,
}

impl CharacteristicMap {
    /// Tabulates `A` on `[x_lo, x_hi]` and `B` on `[z_lo, z_hi]`.
    pub fn build(medium: &Medium, x_range: (f64, f64), z_range: (f64, f64), tol: f64) -> Result<Self> {
        Self::build_with_refinement(medium, x_range, z_range, tol, 1)
    }

    /// Same as [`build`](Self::build) with every lattice spacing divided by `refine`.
    pub fn build_with_refinement(medium: &Medium, x_range: (f64, f64), z_range: (f64, f64), tol: f64, refine: usize) -> Result<Self> {
        medium.validate()?;
        let (x_lo, x_hi) = x_range;
        let (z_lo, z_hi) = z_range;
        if !(x_hi > x_lo) || !(z_hi > z_lo) {
            return Err(Error::InvalidGrid(format!(
                "characteristic window must be non-empty: x [{x_lo}, {x_hi}], z [{z_lo}, {z_hi}]"
            )));
        }
        let refine = refine.max(1);

        let min_width = medium.control2.iter().map(|c| c.width).fold(medium.control1.width, f64::min);
        let hx = min_width / 200.0 / refine as f64;
        let nx = ((x_hi - x_lo) / hx).ceil().max(2.0) as usize;
        let x_nodes = uniform(x_lo, x_hi, nx);
        let a = |x: f64| medium.shape_combined(x);
        let a_table = CumulativeTable::build(&a, x_nodes, medium.x1(), tol);

        let z_nodes = z_lattice(medium, z_lo, z_hi, refine);
        let inv_vg = |z: f64| 1.0 / medium.vg_ref(z);
        let b_table = CumulativeTable::build(&inv_vg, z_nodes, medium.z1, tol);

        let a1 = |x: f64| medium.shape_a1(x);
        let a1_total = adaptive_simpson(&a1, medium.x1(), medium.a1_tail_end(), tol * 0.1);

        Ok(Self {
            medium: medium.clone(),
            a_table,
            b_table,
            a1_total,
            tol,
        })
    }

    /// Map covering a simulation grid and the entry plane.
    pub fn for_grid(medium: &Medium, geom: &Geometry, tol: f64) -> Result<Self> {
        let z_lo = geom.z0.min(medium.z1);
        Self::build(medium, (geom.x0, geom.x_max()), (z_lo, geom.z_max()), tol)
    }

    pub fn medium(&self) -> &Medium {
        &self.medium
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn x_window(&self) -> (f64, f64) {
        (self.a_table.lo(), self.a_table.hi())
    }

    pub fn z_window(&self) -> (f64, f64) {
        (self.b_table.lo(), self.b_table.hi())
    }

    /// `A(x) = int_{x1}^{x} a(x') dx'`.
    pub fn shape_integral(&self, x: f64) -> Result<f64> {
        self.a_table.eval(x).ok_or_else(|| Error::OutsideTable(format!("x = {x}")))
    }

    /// `B(z) = int_{z1}^{z} dz' / vg_ref(z')`.
    pub fn delay_integral(&self, z: f64) -> Result<f64> {
        self.b_table.eval(z).ok_or_else(|| Error::OutsideTable(format!("z = {z}")))
    }

    /// Total first-laser integral `A(x -> inf)` of `a1` alone.
    pub fn a1_total(&self) -> f64 {
        self.a1_total
    }

    pub fn xi(&self, x: f64, z: f64) -> Result<f64> {
        Ok(self.shape_integral(x)? - self.medium.constants.v0 * self.delay_integral(z)?)
    }

    pub fn tau(&self, t: f64, x: f64, z: f64) -> Result<f64> {
        let v0 = self.medium.constants.v0;
        if v0 == 0.0 {
            return Err(Error::StaticMedium);
        }
        Ok(t + (self.xi(x, z)? - (x - self.medium.x1())) / v0)
    }

    /// Polariton fields at `(t, x, z)` from the incoming envelope.
    pub fn field_at(&self, t: f64, x: f64, z: f64, probe: &ProbeSpec) -> Result<PolaritonSample> {
        let xi = self.xi(x, z)?;
        let tau = self.tau(t, x, z)?;
        let env = probe.envelope(self.medium.x1() + xi, tau);
        Ok(self.sample_from_envelope(env, x, z))
    }

    /// Advection-mode state on `geom` at time `t`, every node from
    /// [`Self::field_at`].
    pub fn state_at(&self, t: f64, geom: Geometry, probe: &ProbeSpec) -> Result<SolverState> {
        let samples: Vec<PolaritonSample> = (0..geom.len())
            .into_par_iter()
            .map(|k| self.field_at(t, geom.x(k / geom.nz), geom.z(k % geom.nz), probe))
            .collect::<Result<_>>()?;
        let grid = |f: fn(&PolaritonSample) -> Complex64| FieldGrid::from_values(geom, samples.iter().map(f).collect());
        let mut state = SolverState::zeros(geom, Mode::Advection);
        state.t = t;
        state.e = grid(|s| s.e)?;
        state.e_tilde = Some(grid(|s| s.e_tilde)?);
        state.psi_q = grid(|s| s.psi_q)?;
        Ok(state)
    }

    fn sample_from_envelope(&self, env: Complex64, x: f64, z: f64) -> PolaritonSample {
        let m = &self.medium;
        let e_tilde = env / m.reference_rabi();
        PolaritonSample {
            e: env * m.shape_combined(x).abs().sqrt(),
            e_tilde,
            psi_q: -e_tilde * m.coupling(z),
        }
    }

    /// Envelope prescribed on the entry plane `z = z1`, i.e.
    /// `E_in(x1 + A(x), t + (A(x) - (x - x1)) / v0)`. This is the trace of the
    /// characteristic solution and reduces to `E_in(x, t)` where `a = 1`; a
    /// static medium uses `E_in(x, t)` directly.
    pub fn boundary_envelope(&self, t: f64, x: f64, probe: &ProbeSpec) -> Result<Complex64> {
        let m = &self.medium;
        let v0 = m.constants.v0;
        if v0 == 0.0 {
            return Ok(probe.envelope(x, t));
        }
        let big_a = self.shape_integral(x)?;
        let x1 = m.x1();
        Ok(probe.envelope(x1 + big_a, t + (big_a - (x - x1)) / v0))
    }

    /// Samples the level set `xi = xi0` on columns spaced by `step` across the
    /// tabulated x-window. Columns where the level set leaves the z-window are
    /// skipped; an empty result means the level set misses the window.
    pub fn trace_trajectory(&self, xi0: f64, step: f64) -> Result<Trajectory> {
        let v0 = self.medium.constants.v0;
        if v0 == 0.0 {
            return Err(Error::StaticMedium);
        }
        if !(step > 0.0) {
            return Err(Error::InvalidGrid(format!("trajectory step must be positive, got {step}")));
        }
        let (x_lo, x_hi) = self.x_window();
        let (z_lo, z_hi) = self.z_window();
        let b_lo = self.delay_integral(z_lo)?;
        let b_hi = self.delay_integral(z_hi)?;
        let n = ((x_hi - x_lo) / step).floor() as usize;
        let mut points = Vec::new();
        for k in 0..=n {
            let x = (x_lo + k as f64 * step).min(x_hi);
            let target = (self.shape_integral(x)? - xi0) / v0;
            if target < b_lo || target > b_hi {
                continue;
            }
            let z = bisect(
                |z| self.b_table.eval(z).unwrap_or(f64::NAN) - target,
                z_lo,
                z_hi,
                1e-13 * (z_hi - z_lo).max(1.0),
            )?;
            points.push((x, z));
        }
        if points.is_empty() {
            log::info!("level set xi = {xi0} does not cross the characteristic window");
        }
        Ok(Trajectory { xi0, points })
    }

    /// Storage plane: the `z_inf` solving `v0 B(z_inf) = A1(inf)`.
    pub fn find_z_infinity(&self) -> Result<f64> {
        let v0 = self.medium.constants.v0;
        if v0 == 0.0 {
            return Err(Error::StaticMedium);
        }
        let needed = self.a1_total / v0;
        let (z_lo, z_hi) = self.z_window();
        let reached = self.delay_integral(z_hi)?;
        if reached < needed {
            return Err(Error::PulseExits { needed, reached });
        }
        bisect(
            |z| self.b_table.eval(z).unwrap_or(f64::NAN) - needed,
            z_lo.max(self.medium.z1),
            z_hi,
            1e-10,
        )
    }

    /// Predicted stored spin-wave extent.
    pub fn spin_wave_extent(&self, probe: &ProbeSpec) -> Result<SpinWaveExtent> {
        let v0 = self.medium.constants.v0;
        if v0 > 0.2 * probe.x_hwhm / probe.t_hwhm {
            warn!(
                "v0 = {v0} is not small against x_hwhm / t_hwhm = {}; spin-wave extent estimate degrades",
                probe.x_hwhm / probe.t_hwhm
            );
        }
        let z_inf = self.find_z_infinity()?;
        Ok(SpinWaveExtent {
            z_inf,
            dx_s: v0 * probe.t_hwhm,
            dz_s: probe.x_hwhm * self.medium.vg_ref(z_inf) / v0,
        })
    }

    /// Margin by which `v0 / vg_ref(z_inf)` exceeds `x_hwhm / dz_atom`.
    pub fn storage_feasibility(&self, probe: &ProbeSpec, dz_atom: f64) -> Feasibility {
        match self.find_z_infinity() {
            Ok(z_inf) => {
                let ratio = self.medium.constants.v0 / self.medium.vg_ref(z_inf);
                Feasibility::from_margin(ratio * dz_atom / probe.x_hwhm)
            }
            Err(_) => Feasibility::from_margin(0.0),
        }
    }

    /// Width of the retrieved beam, `dx_p1 / |a2(x2)|`.
    pub fn retrieved_width(&self, dx_p1: f64) -> Result<f64> {
        retrieved_width(&self.medium, dx_p1)
    }
}

/// Width of the retrieved beam, `dx_p1 / |a2(x2)|`.
pub fn retrieved_width(medium: &Medium, dx_p1: f64) -> Result<f64> {
    let c2 = medium.control2.as_ref().ok_or(Error::NoSecondLaser)?;
    let a2 = medium.shape_a2(c2.center);
    if a2 <= 0.0 {
        return Err(Error::InvalidMedium("second control laser has zero amplitude".into()));
    }
    Ok(dx_p1 / a2)
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| if k == n { hi } else { lo + (hi - lo) * k as f64 / n as f64 })
        .collect()
}

/// Uniform z lattice, with cells split four ways wherever `1 / vg_ref` exceeds
/// four times its median over the window.
fn z_lattice(medium: &Medium, lo: f64, hi: f64, refine: usize) -> Vec<f64> {
    let n = 2000 * refine;
    let base = uniform(lo, hi, n);
    let mut inv: Vec<f64> = base.iter().map(|&z| 1.0 / medium.vg_ref(z)).collect();
    inv.sort_by(|a, b| a.total_cmp(b));
    let threshold = 4.0 * inv[inv.len() / 2];
    let mut nodes = Vec::with_capacity(base.len() * 2);
    for w in base.windows(2) {
        nodes.push(w[0]);
        let mid = 0.5 * (w[0] + w[1]);
        if 1.0 / medium.vg_ref(mid) > threshold {
            let h = (w[1] - w[0]) / 4.0;
            for s in 1..4 {
                nodes.push(w[0] + h * s as f64);
            }
        }
    }
    nodes.push(hi);
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{ControlLaser, Direction, VgProfile};
    use crate::state::PhysicsConstants;

    fn medium(width: f64, vg: VgProfile, v0: f64, control2: Option<ControlLaser>) -> Medium {
        Medium::new(
            ControlLaser {
                center: 0.0,
                width,
                amplitude: 1.0,
                direction: Direction::Forward,
            },
            control2,
            vg,
            PhysicsConstants {
                v0,
                ..PhysicsConstants::default()
            },
            0.0,
        )
        .unwrap()
    }

    fn fig2_vg() -> VgProfile {
        VgProfile::Dip {
            base: 1.0,
            depth: 0.95,
            center: 2.0,
            width: 1.0,
        }
    }

    fn probe() -> ProbeSpec {
        ProbeSpec {
            x_center: 0.0,
            x_hwhm: 0.3,
            t_center: 4.0,
            t_hwhm: 1.0,
            amplitude: 1.0,
        }
    }

    #[test]
    fn tau_is_additive_in_time() {
        let m = medium(1.0, fig2_vg(), 0.1, None);
        let map = CharacteristicMap::build(&m, (-3.0, 9.0), (0.0, 4.0), 1e-8).unwrap();
        for &(x, z) in &[(0.0, 0.0), (1.3, 2.2), (-0.4, 3.9)] {
            let a = map.tau(3.0, x, z).unwrap();
            let b = map.tau(3.0 + 1.75, x, z).unwrap();
            assert!((b - a - 1.75).abs() < 1e-12);
        }
    }

    #[test]
    fn static_medium_rejects_tau() {
        let m = medium(1.0, fig2_vg(), 0.0, None);
        let map = CharacteristicMap::build(&m, (-3.0, 9.0), (0.0, 4.0), 1e-8).unwrap();
        assert!(matches!(map.tau(0.0, 0.0, 0.0), Err(Error::StaticMedium)));
        assert!(matches!(map.find_z_infinity(), Err(Error::StaticMedium)));
    }

    #[test]
    fn queries_outside_window_fail() {
        let m = medium(1.0, fig2_vg(), 0.1, None);
        let map = CharacteristicMap::build(&m, (-3.0, 9.0), (0.0, 4.0), 1e-8).unwrap();
        assert!(matches!(map.xi(9.5, 1.0), Err(Error::OutsideTable(_))));
        assert!(matches!(map.xi(0.0, 4.5), Err(Error::OutsideTable(_))));
    }

    #[test]
    fn xi_at_entry_plane_is_shape_integral() {
        let m = medium(1.0, fig2_vg(), 0.1, None);
        let map = CharacteristicMap::build(&m, (-3.0, 9.0), (0.0, 4.0), 1e-8).unwrap();
        for x in [-1.0, 0.0, 0.05, 2.0] {
            assert_eq!(map.xi(x, 0.0).unwrap(), map.shape_integral(x).unwrap());
        }
        // near the beam center a ~ 1, so xi ~ x
        assert!((map.xi(0.05, 0.0).unwrap() - 0.05).abs() < 1e-4);
    }

    #[test]
    fn xi_monotone_in_z_and_x() {
        let m = medium(1.0, fig2_vg(), 0.1, None);
        let map = CharacteristicMap::build(&m, (-3.0, 9.0), (0.0, 4.0), 1e-8).unwrap();
        for x in [-1.0, 0.0, 0.7, 2.5] {
            let mut prev = f64::INFINITY;
            for k in 0..=80 {
                let v = map.xi(x, k as f64 * 0.05).unwrap();
                assert!(v < prev);
                prev = v;
            }
        }
        for z in [0.0, 1.9, 3.5] {
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=60 {
                let v = map.xi(-3.0 + k as f64 * 0.1, z).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn refinement_changes_xi_below_tolerance() {
        let m = medium(1.0, fig2_vg(), 0.1, None);
        let tol = 1e-8;
        let coarse = CharacteristicMap::build_with_refinement(&m, (-3.0, 9.0), (0.0, 4.0), tol, 1).unwrap();
        let fine = CharacteristicMap::build_with_refinement(&m, (-3.0, 9.0), (0.0, 4.0), tol, 2).unwrap();
        for i in 0..=120 {
            for j in 0..=40 {
                let (x, z) = (-3.0 + 0.1 * i as f64, 0.1 * j as f64);
                let d = (coarse.xi(x, z).unwrap() - fine.xi(x, z).unwrap()).abs();
                assert!(d < tol, "({x}, {z}): {d}");
            }
        }
    }

    #[test]
    fn z_infinity_for_constant_profile() {
        let v = 0.4;
        let m = medium(1.0, VgProfile::constant(v), 0.1, None);
        let map = CharacteristicMap::build(&m, (-3.0, 9.0), (0.0, 4.0), 1e-10).unwrap();
        let s = (std::f64::consts::PI / 8.0).sqrt();
        let z_inf = map.find_z_infinity().unwrap();
        assert!((z_inf - s * v / 0.1).abs() < 1e-9);
    }

    #[test]
    fn z_infinity_decreases_with_flow_speed() {
        let mut prev = f64::INFINITY;
        for v0 in [0.1, 0.12, 0.15, 0.2, 0.3] {
            let m = medium(1.0, fig2_vg(), v0, None);
            let map = CharacteristicMap::build(&m, (-3.0, 9.0), (0.0, 4.0), 1e-8).unwrap();
            let z = map.find_z_infinity().unwrap();
            assert!(z < prev);
            prev = z;
        }
    }

    #[test]
    fn optically_thin_medium_does_not_store() {
        let m = medium(1.0, VgProfile::constant(1.0), 0.1, None);
        let map = CharacteristicMap::build(&m, (-3.0, 9.0), (0.0, 4.0), 1e-8).unwrap();
        assert!(matches!(map.find_z_infinity(), Err(Error::PulseExits { .. })));
        let f = map.storage_feasibility(&probe(), 4.0);
        assert_eq!(f.class, StorageClass::Escapes);
    }

    #[test]
    fn feasibility_classes() {
        assert_eq!(Feasibility::from_margin(1.0).class, StorageClass::Marginal);
        assert_eq!(Feasibility::from_margin(5.0).class, StorageClass::Stored);
        assert_eq!(Feasibility::from_margin(0.999).class, StorageClass::Escapes);
        let m = medium(1.0, fig2_vg(), 0.1, None);
        let map = CharacteristicMap::build(&m, (-3.0, 9.0), (0.0, 4.0), 1e-8).unwrap();
        let z_inf = map.find_z_infinity().unwrap();
        let p = ProbeSpec { x_hwhm: 1.0, ..probe() };
        let f = map.storage_feasibility(&p, 4.0);
        assert!((f.margin - 4.0 * 0.1 / m.vg_ref(z_inf)).abs() < 1e-12);
        let inf = map.storage_feasibility(&p, f64::INFINITY);
        assert_eq!(inf.class, StorageClass::Stored);
        // margin is exactly one when the two ratios coincide
        let dz_atom = p.x_hwhm * m.vg_ref(z_inf) / 0.1;
        assert!((map.storage_feasibility(&p, dz_atom).margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spin_wave_extent_scaling() {
        let p = ProbeSpec {
            x_hwhm: 1.0,
            t_hwhm: 5.0,
            ..probe()
        };
        let m = medium(1.0, fig2_vg(), 0.1, None);
        let map = CharacteristicMap::build(&m, (-3.0, 9.0), (0.0, 4.0), 1e-8).unwrap();
        let ext = map.spin_wave_extent(&p).unwrap();
        assert!((ext.dx_s - 0.5).abs() < 1e-15);
        assert!((ext.dz_s - 10.0 * m.vg_ref(ext.z_inf)).abs() < 1e-12);

        // constant profile keeps z_inf-independent scaling visible
        let m1 = medium(1.0, VgProfile::constant(0.5), 0.1, None);
        let m2 = medium(1.0, VgProfile::constant(0.5), 0.2, None);
        let e1 = CharacteristicMap::build(&m1, (-3.0, 9.0), (0.0, 4.0), 1e-8)
            .unwrap()
            .spin_wave_extent(&p)
            .unwrap();
        let e2 = CharacteristicMap::build(&m2, (-3.0, 9.0), (0.0, 4.0), 1e-8)
            .unwrap()
            .spin_wave_extent(&p)
            .unwrap();
        assert!((e2.dx_s / e1.dx_s - 2.0).abs() < 1e-12);
        assert!((e2.dz_s / e1.dz_s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn retrieved_width_law() {
        let c2 = |amplitude: f64, direction| ControlLaser {
            center: 5.0,
            width: 1.0,
            amplitude,
            direction,
        };
        let m = medium(1.0, fig2_vg(), 0.1, Some(c2(1.0, Direction::Forward)));
        assert!((retrieved_width(&m, 0.3).unwrap() - 0.3).abs() < 1e-9);
        let m = medium(1.0, fig2_vg(), 0.1, Some(c2(0.5, Direction::Forward)));
        assert!((retrieved_width(&m, 0.3).unwrap() - 1.2).abs() < 1e-8);
        let m = medium(1.0, fig2_vg(), 0.1, Some(c2(0.5, Direction::Backward)));
        assert!((retrieved_width(&m, 0.3).unwrap() - 1.2).abs() < 1e-8);
        let m = medium(1.0, fig2_vg(), 0.1, None);
        assert!(matches!(retrieved_width(&m, 0.3), Err(Error::NoSecondLaser)));
    }

    #[test]
    fn field_at_entry_reproduces_input() {
        let m = medium(1.0, fig2_vg(), 0.1, None);
        let map = CharacteristicMap::build(&m, (-3.0, 9.0), (0.0, 4.0), 1e-8).unwrap();
        let p = ProbeSpec { x_hwhm: 0.02, ..probe() };
        for &(t, x) in &[(4.0, 0.0), (3.5, 0.01), (4.6, -0.015)] {
            let s = map.field_at(t, x, 0.0, &p).unwrap();
            let want = p.envelope(x, t);
            assert!((s.e - want).norm() < 1e-4, "{t} {x}");
        }
    }

    #[test]
    fn photon_to_spin_ratio_is_relative_group_velocity() {
        let m = medium(1.0, fig2_vg(), 0.1, None);
        let map = CharacteristicMap::build(&m, (-3.0, 9.0), (0.0, 4.0), 1e-8).unwrap();
        let p = probe();
        for &(t, x, z) in &[(5.0, 0.1, 0.3), (12.0, 0.6, 1.4), (20.0, 1.2, 1.8)] {
            let s = map.field_at(t, x, z, &p).unwrap();
            let ratio = s.e.norm_sqr() / s.psi_q.norm_sqr();
            let expect = m.group_velocity(x, z) / m.constants.c;
            assert!((ratio / expect - 1.0).abs() < 1e-12);
        }
        // far outside the control beams only the spin wave survives
        let s = map.field_at(40.0, 8.0, 1.9, &ProbeSpec { t_hwhm: 60.0, ..p }).unwrap();
        assert!(s.e.norm() < 1e-12 * s.psi_q.norm().max(1e-300) + 1e-300);
    }

    #[test]
    fn constant_coefficient_trajectory_is_straight() {
        let v = 0.5;
        let m = medium(1.0e6, VgProfile::constant(v), 0.1, None);
        let map = CharacteristicMap::build(&m, (-1.0, 1.0), (0.0, 6.0), 1e-12).unwrap();
        let tr = map.trace_trajectory(0.0, 0.05).unwrap();
        assert!(!tr.points.is_empty());
        for &(x, z) in &tr.points {
            assert!((z - (v / 0.1) * x).abs() < 1e-9, "({x}, {z})");
        }
    }

    #[test]
    fn trajectory_vertices_satisfy_level_set() {
        let m = medium(1.0, fig2_vg(), 0.1, None);
        let map = CharacteristicMap::build(&m, (-3.0, 9.0), (0.0, 4.0), 1e-8).unwrap();
        for xi0 in [-0.2, 0.0, 0.15] {
            let tr = map.trace_trajectory(xi0, 0.05).unwrap();
            let mut prev_x = f64::NEG_INFINITY;
            for &(x, z) in &tr.points {
                assert!(x > prev_x);
                prev_x = x;
                assert!((map.xi(x, z).unwrap() - xi0).abs() < 1e-10);
            }
        }
        let empty = map.trace_trajectory(50.0, 0.05).unwrap();
        assert!(empty.points.is_empty());
    }

    #[test]
    fn constant_coefficient_closed_forms() {
        let (v, v0) = (0.4, 0.1);
        let m = medium(1e8, VgProfile::constant(v), v0, None);
        let map = CharacteristicMap::build(&m, (-3.0, 3.0), (0.0, 4.0), 1e-12).unwrap();
        for &(t, x, z) in &[(0.0, 0.0, 0.0), (1.5, -2.0, 0.7), (7.0, 2.5, 3.9), (3.0, 1.0, 2.0)] {
            assert!((map.xi(x, z).unwrap() - (x - v0 * z / v)).abs() < 1e-10);
            assert!((map.tau(t, x, z).unwrap() - (t - z / v)).abs() < 1e-10);
        }
    }

    #[test]
    fn xi_matches_erf_closed_form() {
        let (w, v, v0) = (1.5, 0.4, 0.1);
        let m = medium(w, VgProfile::constant(v), v0, None);
        let map = CharacteristicMap::build(&m, (-5.0, 5.0), (0.0, 3.0), 1e-9).unwrap();
        let scale = w * (std::f64::consts::PI / 8.0).sqrt();
        for &x in &[-4.0, -1.2, -0.3, 0.0, 0.45, 1.0, 2.2, 4.9] {
            for &z in &[0.0, 1.1, 2.9] {
                let oracle = scale * statrs::function::erf::erf(2f64.sqrt() * x / w) - v0 * z / v;
                assert!((map.xi(x, z).unwrap() - oracle).abs() < 1e-8, "x = {x}, z = {z}");
            }
        }
    }

    #[test]
    fn fig2_storage_plane() {
        let map = CharacteristicMap::build(&medium(1.0, fig2_vg(), 0.1, None), (-3.0, 9.0), (0.0, 4.0), 1e-10).unwrap();
        assert!((map.find_z_infinity().unwrap() - 1.9288250114625562).abs() < 1e-8);
    }
}
