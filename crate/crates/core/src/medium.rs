//! Control-laser shapes, the group-velocity profile and derived quantities.
//!
//! A Gaussian control laser has Rabi amplitude `amplitude * exp(-((x - center) / width)^2)`.
//! Shapes are normalized by the peak intensity of the first laser, so the
//! combined shape is `a(x) = [Omega1(x)^2 +/- Omega2(x)^2] / Omega1(x1)^2`, the
//! sign following the second laser's propagation direction.

use log::warn;

use crate::error::{Error, Result};
use crate::state::PhysicsConstants;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Along +z, co-propagating with the first control laser.
    Forward,
    /// Along -z.
    Backward,
}

impl Direction {
    pub fn sign(&self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Forward => "+z",
            Direction::Backward => "-z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLaser {
    pub center: f64,
    pub width: f64,
    /// Peak Rabi frequency.
    pub amplitude: f64,
    pub direction: Direction,
}

impl ControlLaser {
    pub fn rabi(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.width;
        self.amplitude * (-u * u).exp()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidMedium(format!("{name}.width must be positive, got {}", self.width)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidMedium(format!(
                "{name}.amplitude must be >= 0, got {}",
                self.amplitude
            )));
        }
        if !self.center.is_finite() {
            return Err(Error::InvalidMedium(format!("{name}.center must be finite")));
        }
        Ok(())
    }
}

/// Reference group velocity along z.
#[derive(Debug, Clone, PartialEq)]
pub enum VgProfile {
    /// `base - depth * exp(-((z - center) / width)^2)`.
    Dip { base: f64, depth: f64, center: f64, width: f64 },
    /// Piecewise-linear samples, held constant beyond the end points.
    Tabulated { z: Vec<f64>, v: Vec<f64> },
}

impl VgProfile {
    pub fn constant(v: f64) -> Self {
        VgProfile::Dip {
            base: v,
            depth: 0.0,
            center: 0.0,
            width: 1.0,
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self {
            VgProfile::Dip {
                base,
                depth,
                center,
                width,
            } => {
                let u = (z - center) / width;
                base - depth * (-u * u).exp()
            }
            VgProfile::Tabulated { z: zs, v } => {
                if z <= zs[0] {
                    return v[0];
                }
                let n = zs.len();
                if z >= zs[n - 1] {
                    return v[n - 1];
                }
                let k = zs.partition_point(|&s| s <= z) - 1;
                let f = (z - zs[k]) / (zs[k + 1] - zs[k]);
                v[k] + f * (v[k + 1] - v[k])
            }
        }
    }

    /// Smallest value the profile can take anywhere.
    fn lower_bound(&self) -> f64 {
        match self {
            VgProfile::Dip { base, depth, .. } => base - depth.max(0.0),
            VgProfile::Tabulated { v, .. } => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            VgProfile::Dip {
                base,
                depth,
                center,
                width,
            } => {
                if ![base, depth, center, width].iter().all(|v| v.is_finite()) || *width <= 0.0 {
                    return Err(Error::InvalidMedium("vg dip parameters must be finite with width > 0".into()));
                }
            }
            VgProfile::Tabulated { z, v } => {
                if z.len() < 2 || z.len() != v.len() {
                    return Err(Error::InvalidMedium("tabulated vg needs >= 2 matching samples".into()));
                }
                if z.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidMedium("tabulated vg abscissae must increase".into()));
                }
            }
        }
        if self.lower_bound() <= 0.0 {
            return Err(Error::InvalidMedium(format!(
                "group velocity profile must stay positive (minimum {})",
                self.lower_bound()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Medium {
    pub control1: ControlLaser,
    pub control2: Option<ControlLaser>,
    pub vg: VgProfile,
    pub constants: PhysicsConstants,
    /// Probe entry plane.
    pub z1: f64,
}

impl Medium {
    pub fn new(
        control1: ControlLaser,
        control2: Option<ControlLaser>,
        vg: VgProfile,
        constants: PhysicsConstants,
        z1: f64,
    ) -> Result<Self> {
        let m = Self {
            control1,
            control2,
            vg,
            constants,
            z1,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.control1.validate("control1")?;
        if self.control1.direction != Direction::Forward {
            return Err(Error::InvalidMedium("control1 must propagate along +z".into()));
        }
        if self.control1.amplitude <= 0.0 {
            return Err(Error::InvalidMedium("control1.amplitude must be positive".into()));
        }
        if let Some(c2) = &self.control2 {
            c2.validate("control2")?;
            let sep = (c2.center - self.control1.center).abs();
            let min_sep = 3.0 * (c2.width + self.control1.width);
            if sep < min_sep {
                warn!("control lasers separated by {sep}, less than 3x the summed widths ({min_sep})");
            }
        }
        self.vg.validate()?;
        self.constants.validate()?;
        if !self.z1.is_finite() {
            return Err(Error::InvalidMedium("z1 must be finite".into()));
        }
        Ok(())
    }

    /// `Omega1(x1)`, the normalizing Rabi frequency.
    pub fn reference_rabi(&self) -> f64 {
        self.control1.amplitude
    }

    pub fn x1(&self) -> f64 {
        self.control1.center
    }

    pub fn vg_ref(&self, z: f64) -> f64 {
        self.vg.eval(z)
    }

    /// `[Omega1(x) / Omega1(x1)]^2`.
    pub fn shape_a1(&self, x: f64) -> f64 {
        let r = self.control1.rabi(x) / self.reference_rabi();
        r * r
    }

    /// Second-laser intensity normalized by `Omega1(x1)^2`, unsigned.
    pub fn shape_a2(&self, x: f64) -> f64 {
        match &self.control2 {
            Some(c2) => {
                let r = c2.rabi(x) / self.reference_rabi();
                r * r
            }
            None => 0.0,
        }
    }

    /// Signed combined shape `a1(x) +/- a2(x)`.
    pub fn shape_combined(&self, x: f64) -> f64 {
        let sign = self.control2.as_ref().map_or(1.0, |c2| c2.direction.sign());
        self.shape_a1(x) + sign * self.shape_a2(x)
    }

    /// Signed group velocity `vg_ref(z) * a(x)`.
    pub fn group_velocity(&self, x: f64, z: f64) -> f64 {
        self.vg_ref(z) * self.shape_combined(x)
    }

    /// Local control intensity `Omega1(x)^2 + Omega2(x)^2`.
    pub fn control_intensity(&self, x: f64) -> f64 {
        let o1 = self.control1.rabi(x);
        let o2 = self.control2.as_ref().map_or(0.0, |c| c.rabi(x));
        o1 * o1 + o2 * o2
    }

    /// Total Rabi amplitude of co-propagating controls.
    pub fn rabi_total(&self, x: f64) -> f64 {
        self.control1.rabi(x) + self.control2.as_ref().map_or(0.0, |c| c.rabi(x))
    }

    /// Atomic density consistent with the configured group velocity,
    /// `n(z) = c Omega1(x1)^2 / (g^2 vg_ref(z))`.
    pub fn density(&self, z: f64) -> Result<f64> {
        let k = &self.constants;
        if k.g == 0.0 {
            return Err(Error::InvalidMedium("density undefined for g = 0".into()));
        }
        let o = self.reference_rabi();
        Ok(k.c * o * o / (k.g * k.g * self.vg_ref(z)))
    }

    /// Collective coupling `g sqrt(n(z))`; zero for an uncoupled medium.
    pub fn coupling(&self, z: f64) -> f64 {
        if self.constants.g == 0.0 {
            0.0
        } else {
            self.reference_rabi() * (self.constants.c / self.vg_ref(z)).sqrt()
        }
    }

    /// `g^2 n / Omega(x)^2` for a given density.
    pub fn group_index_for_density(&self, x: f64, density: f64) -> Result<f64> {
        let omega_sq = self.control_intensity(x);
        if omega_sq <= f64::MIN_POSITIVE {
            return Err(Error::GroupIndexUndefined { x });
        }
        let g = self.constants.g;
        Ok(g * g * density / omega_sq)
    }

    /// Group index `g^2 n(z) / Omega(x)^2`.
    pub fn group_index(&self, x: f64, z: f64) -> Result<f64> {
        let omega_sq = self.control_intensity(x);
        if omega_sq <= f64::MIN_POSITIVE {
            return Err(Error::GroupIndexUndefined { x });
        }
        self.group_index_for_density(x, self.density(z)?)
    }

    /// Integral of `a1` from `x1` to where it drops below `1e-12`.
    pub fn a1_tail_end(&self) -> f64 {
        // a1 = exp(-2 u^2) < 1e-12 for u > sqrt(ln(1e12) / 2)
        let u = (1e12f64.ln() / 2.0).sqrt();
        self.control1.center + u * self.control1.width
    }
}
