//! Uniform (x, z) lattices carrying complex field samples.
//!
//! Nodes are stored z-major: z varies fastest, so column `i` (fixed x) is the
//! contiguous slice `values[i * nz..(i + 1) * nz]`. The z-advection sweeps in
//! the solver walk these slices.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Geometry of a uniform lattice. Node `(i, j)` sits at `(x0 + i dx, z0 + j dz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
    pub z0: f64,
    pub dz: f64,
    pub nz: usize,
}

impl Geometry {
    pub fn new(x0: f64, dx: f64, nx: usize, z0: f64, dz: f64, nz: usize) -> Result<Self> {
        let geom = Self { x0, dx, nx, z0, dz, nz };
        geom.validate()?;
        Ok(geom)
    }

    /// Lattice spanning `[x_min, x_max] x [z_min, z_max]` with both end points included.
    pub fn spanning(x_min: f64, x_max: f64, nx: usize, z_min: f64, z_max: f64, nz: usize) -> Result<Self> {
        if nx < 2 || nz < 2 {
            return Err(Error::InvalidGrid(format!("need nx >= 2 and nz >= 2, got {nx} x {nz}")));
        }
        Self::new(
            x_min,
            (x_max - x_min) / (nx - 1) as f64,
            nx,
            z_min,
            (z_max - z_min) / (nz - 1) as f64,
            nz,
        )
    }

    fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.dx.is_finite()) || !(self.dz > 0.0 && self.dz.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacings must be positive, got dx = {}, dz = {}",
                self.dx, self.dz
            )));
        }
        if self.nx < 2 || self.nz < 2 {
            return Err(Error::InvalidGrid(format!(
                "need nx >= 2 and nz >= 2, got {} x {}",
                self.nx, self.nz
            )));
        }
        if !self.x0.is_finite() || !self.z0.is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nz + j
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        self.z0 + j as f64 * self.dz
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn z_max(&self) -> f64 {
        self.z(self.nz - 1)
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nx).map(|i| self.x(i))
    }

    pub fn zs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nz).map(|j| self.z(j))
    }

    /// Index of the node row closest to `z`, clamped to the grid.
    pub fn nearest_row(&self, z: f64) -> usize {
        let j = ((z - self.z0) / self.dz).round();
        j.clamp(0.0, (self.nz - 1) as f64) as usize
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dz
    }
}

/// Complex field sampled on a [`Geometry`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    geom: Geometry,
    values: Vec<Complex64>,
}

impl FieldGrid {
    pub fn zeros(geom: Geometry) -> Self {
        Self {
            geom,
            values: vec![Complex64::new(0.0, 0.0); geom.len()],
        }
    }

    pub fn from_values(geom: Geometry, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != geom.len() {
            return Err(Error::InvalidGrid(format!(
                "value count {} does not match nx*nz = {}",
                values.len(),
                geom.len()
            )));
        }
        Ok(Self { geom, values })
    }

    pub fn from_fn(geom: Geometry, mut f: impl FnMut(f64, f64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(geom.len());
        for i in 0..geom.nx {
            let x = geom.x(i);
            for j in 0..geom.nz {
                values.push(f(x, geom.z(j)));
            }
        }
        Self { geom, values }
    }

    #[inline]
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.geom.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let k = self.geom.index(i, j);
        self.values[k] = v;
    }

    pub fn column(&self, i: usize) -> &[Complex64] {
        let nz = self.geom.nz;
        &self.values[i * nz..(i + 1) * nz]
    }

    /// Values along the row `j` (fixed z), ordered by x.
    pub fn row(&self, j: usize) -> Vec<Complex64> {
        (0..self.geom.nx).map(|i| self.get(i, j)).collect()
    }

    pub fn map(&self, mut f: impl FnMut(f64, f64, Complex64) -> Complex64) -> Self {
        let g = self.geom;
        let mut out = self.clone();
        for i in 0..g.nx {
            let x = g.x(i);
            for j in 0..g.nz {
                let k = g.index(i, j);
                out.values[k] = f(x, g.z(j), self.values[k]);
            }
        }
        out
    }

    /// Bilinear interpolation; exact at nodes and for affine fields.
    pub fn interpolate(&self, x: f64, z: f64) -> Result<Complex64> {
        let g = &self.geom;
        let (fi, i) = locate(x, g.x0, g.dx, g.nx).ok_or(Error::OutOfBounds {
            x,
            z,
            axis: "x",
            lo: g.x0,
            hi: g.x_max(),
        })?;
        let (fj, j) = locate(z, g.z0, g.dz, g.nz).ok_or(Error::OutOfBounds {
            x,
            z,
            axis: "z",
            lo: g.z0,
            hi: g.z_max(),
        })?;
        let v00 = self.get(i, j);
        let v10 = self.get(i + 1, j);
        let v01 = self.get(i, j + 1);
        let v11 = self.get(i + 1, j + 1);
        Ok(v00 * ((1.0 - fi) * (1.0 - fj)) + v10 * (fi * (1.0 - fj)) + v01 * ((1.0 - fi) * fj) + v11 * (fi * fj))
    }

    /// `sqrt(sum |v|^2 dx dz)`.
    pub fn l2_norm(&self) -> f64 {
        self.norm_sqr_integral().sqrt()
    }

    /// `sum |v|^2 dx dz`, accumulated in node order.
    pub fn norm_sqr_integral(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.geom.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Cell index and fractional offset of `s` on a 1-D lattice, `None` outside.
/// The upper end point maps to the last cell with fraction 1.
fn locate(s: f64, s0: f64, ds: f64, n: usize) -> Option<(f64, usize)> {
    let mut u = (s - s0) / ds;
    // snap round-off so that node queries return stored values exactly
    let r = u.round();
    if (u - r).abs() < 1e-9 {
        u = r;
    }
    let last = (n - 1) as f64;
    if !(u >= 0.0 && u <= last) {
        return None;
    }
    let i = (u.floor() as usize).min(n - 2);
    Some((u - i as f64, i))
}
