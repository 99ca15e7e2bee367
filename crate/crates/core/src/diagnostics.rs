//! Measurements on solver snapshots and comparisons against the
//! characteristics predictions.
//!
//! Widths are half-widths at half maximum of `|field|`. Profiles taken along a
//! grid line are measured in that convention directly; marginals integrate
//! `|field|^2` and are converted with the Gaussian factor `sqrt(2)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::characteristics::{CharacteristicMap, Feasibility, ProbeSpec, StorageClass};
use crate::error::{Error, Result};
use crate::grid::FieldGrid;
use crate::medium::Medium;
use crate::state::SolverState;

/// Relative threshold for masked node-wise diagnostics.
pub const MASK_FRACTION: f64 = 0.01;
/// Snapshots whose photon number is below this fraction of the run maximum
/// belong to the stored phase.
pub const STORED_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Z,
}

/// First moment and half-width at half maximum of a sampled non-negative
/// profile on uniform nodes `s0 + k ds`. The width is found by walking out
/// from the maximum and interpolating the crossings linearly.
pub fn profile_centroid_and_width(s0: f64, ds: f64, profile: &[f64]) -> Result<(f64, f64)> {
    let total: f64 = profile.iter().sum();
    if total <= 0.0 || profile.len() < 2 {
        return Err(Error::ZeroField);
    }
    let centroid = profile.iter().enumerate().map(|(k, p)| p * (s0 + k as f64 * ds)).sum::<f64>() / total;
    let peak = argmax(profile);
    Ok((centroid, hwhm_around(s0, ds, profile, peak)?))
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = k;
        }
    }
    best
}

/// Half-width at half of `profile[peak]`.
fn hwhm_around(s0: f64, ds: f64, profile: &[f64], peak: usize) -> Result<f64> {
    let half = 0.5 * profile[peak];
    if half <= 0.0 {
        return Err(Error::ZeroField);
    }
    let mut left = None;
    for k in (0..peak).rev() {
        if profile[k] < half {
            let f = (half - profile[k]) / (profile[k + 1] - profile[k]);
            left = Some(s0 + (k as f64 + f) * ds);
            break;
        }
    }
    let mut right = None;
    for k in peak + 1..profile.len() {
        if profile[k] < half {
            let f = (profile[k - 1] - half) / (profile[k - 1] - profile[k]);
            right = Some(s0 + (k as f64 - 1.0 + f) * ds);
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok(0.5 * (r - l)),
        _ => Err(Error::WidthUndefined),
    }
}

/// Marginal of `|value|^2` along `axis`, integrated over the other axis.
pub fn marginal(grid: &FieldGrid, axis: Axis) -> Vec<f64> {
    let g = grid.geometry();
    match axis {
        Axis::X => (0..g.nx)
            .map(|i| grid.column(i).iter().map(|v| v.norm_sqr()).sum::<f64>() * g.dz)
            .collect(),
        Axis::Z => {
            let mut out = vec![0.0; g.nz];
            for i in 0..g.nx {
                for (o, v) in out.iter_mut().zip(grid.column(i)) {
                    *o += v.norm_sqr() * g.dx;
                }
            }
            out
        }
    }
}

/// First moment of `|value|^2` along `axis`.
pub fn centroid(grid: &FieldGrid, axis: Axis) -> Result<f64> {
    let g = grid.geometry();
    let m = marginal(grid, axis);
    let (s0, ds) = match axis {
        Axis::X => (g.x0, g.dx),
        Axis::Z => (g.z0, g.dz),
    };
    let total: f64 = m.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(m.iter().enumerate().map(|(k, p)| p * (s0 + k as f64 * ds)).sum::<f64>() / total)
}

/// Centroid (first moment of `|value|^2`) and half-width at half maximum of
/// the `|value|^2` marginal along `axis`.
pub fn centroid_and_width(grid: &FieldGrid, axis: Axis) -> Result<(f64, f64)> {
    let g = grid.geometry();
    let m = marginal(grid, axis);
    match axis {
        Axis::X => profile_centroid_and_width(g.x0, g.dx, &m),
        Axis::Z => profile_centroid_and_width(g.z0, g.dz, &m),
    }
}

/// `(N_E, N_e, N_q)`, the integrals of `|E|^2`, `|psi_e|^2`, `|psi_q|^2`.
pub fn excitation_numbers(state: &SolverState) -> (f64, f64, f64) {
    (
        state.e.norm_sqr_integral(),
        state.psi_e.norm_sqr_integral(),
        state.psi_q.norm_sqr_integral(),
    )
}

/// Largest excitation density `|E|^2 + |psi_e|^2 + |psi_q|^2` on the grid
/// border relative to the largest anywhere; zero for an empty state.
pub fn boundary_fraction(state: &SolverState) -> f64 {
    let g = *state.geometry();
    let dens = |i: usize, j: usize| state.e.get(i, j).norm_sqr() + state.psi_e.get(i, j).norm_sqr() + state.psi_q.get(i, j).norm_sqr();
    let (mut edge, mut all) = (0.0f64, 0.0f64);
    for i in 0..g.nx {
        for j in 0..g.nz {
            let d = dens(i, j);
            all = all.max(d);
            if i == 0 || j == 0 || i + 1 == g.nx || j + 1 == g.nz {
                edge = edge.max(d);
            }
        }
    }
    if all == 0.0 {
        0.0
    } else {
        edge / all
    }
}

/// Worst relative deviation of `|E|^2 / |psi_q|^2` from `|v_g| / c` over nodes
/// where both `|E|^2` and `|psi_q|^2` reach 1% of their maxima.
pub fn polariton_ratio_check(state: &SolverState, medium: &Medium) -> f64 {
    let g = *state.geometry();
    let e_max = state.e.max_abs().powi(2);
    let q_max = state.psi_q.max_abs().powi(2);
    if e_max == 0.0 || q_max == 0.0 {
        return 0.0;
    }
    let c = medium.constants.c;
    let mut worst = 0.0f64;
    for i in 0..g.nx {
        for j in 0..g.nz {
            let e2 = state.e.get(i, j).norm_sqr();
            let q2 = state.psi_q.get(i, j).norm_sqr();
            if e2 < MASK_FRACTION * e_max || q2 < MASK_FRACTION * q_max {
                continue;
            }
            let vg = medium.group_velocity(g.x(i), g.z(j)).abs();
            if vg == 0.0 {
                continue;
            }
            worst = worst.max(((e2 / q2) / (vg / c) - 1.0).abs());
        }
    }
    worst
}

/// Adiabatic envelope `E~`: the evolved field in advection mode, `-psi_q / G`
/// in full mode (zero where the coupling vanishes).
pub fn envelope(state: &SolverState, medium: &Medium) -> FieldGrid {
    match &state.e_tilde {
        Some(e) => e.clone(),
        None => state.psi_q.map(|_, z, v| {
            let g = medium.coupling(z);
            if g > 0.0 {
                -v / g
            } else {
                Complex64::new(0.0, 0.0)
            }
        }),
    }
}

/// Per-snapshot differences between two runs on the same grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldDifference {
    pub l2: f64,
    pub linf: f64,
    pub reference_l2: f64,
}

impl FieldDifference {
    pub fn relative_l2(&self) -> f64 {
        if self.reference_l2 == 0.0 {
            if self.l2 == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.l2 / self.reference_l2
        }
    }
}

pub fn field_difference(a: &FieldGrid, reference: &FieldGrid) -> Result<FieldDifference> {
    if a.geometry() != reference.geometry() {
        return Err(Error::InvalidGrid("compared grids differ in geometry".into()));
    }
    let g = a.geometry();
    let (mut s, mut r, mut m) = (0.0, 0.0, 0.0f64);
    for (x, y) in a.values().iter().zip(reference.values()) {
        let d = (x - y).norm();
        s += d * d;
        m = m.max(d);
        r += y.norm_sqr();
    }
    let area = g.cell_area();
    Ok(FieldDifference {
        l2: (s * area).sqrt(),
        linf: m,
        reference_l2: (r * area).sqrt(),
    })
}

/// One row of the geometry report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportEntry {
    pub key: &'static str,
    pub measured: Option<f64>,
    pub predicted: Option<f64>,
    pub note: Option<String>,
}

impl ReportEntry {
    fn new(key: &'static str, measured: f64, predicted: f64) -> Self {
        Self {
            key,
            measured: Some(measured),
            predicted: Some(predicted),
            note: None,
        }
    }

    fn inapplicable(key: &'static str, note: impl Into<String>) -> Self {
        Self {
            key,
            measured: None,
            predicted: None,
            note: Some(note.into()),
        }
    }

    pub fn relative_deviation(&self) -> Option<f64> {
        match (self.measured, self.predicted) {
            (Some(m), Some(p)) if p != 0.0 => Some(((m - p) / p).abs()),
            _ => None,
        }
    }

    pub fn applicable(&self) -> bool {
        self.measured.is_some() && self.predicted.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub feasibility: Feasibility,
    /// Snapshot indices of the stored phase.
    pub stored: Vec<usize>,
    /// Snapshot index used for the retrieval measurement.
    pub retrieval: Option<usize>,
    pub entries: Vec<ReportEntry>,
}

impl GeometryReport {
    pub fn entry(&self, key: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// Human-readable lines followed by a `key=value` block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let f = &self.feasibility;
        let _ = writeln!(out, "storage: {} (margin {:.4})", f.class.as_str(), f.margin);
        let _ = writeln!(out, "stored snapshots: {:?}", self.stored);
        for e in &self.entries {
            match (e.measured, e.predicted) {
                (Some(m), Some(p)) => {
                    let _ = writeln!(
                        out,
                        "{:<16} measured {:>12.6} predicted {:>12.6} deviation {:>7.3}%",
                        e.key,
                        m,
                        p,
                        100.0 * e.relative_deviation().unwrap_or(f64::NAN)
                    );
                }
                _ => {
                    let _ = writeln!(out, "{:<16} {}", e.key, e.note.as_deref().unwrap_or("inapplicable"));
                }
            }
        }
        out.push_str("[report]\n");
        let _ = writeln!(out, "storage.class={}", f.class.as_str());
        let _ = writeln!(out, "storage.margin={}", f.margin);
        for e in &self.entries {
            match (e.measured, e.predicted) {
                (Some(m), Some(p)) => {
                    let _ = writeln!(out, "{}.measured={m}", e.key);
                    let _ = writeln!(out, "{}.predicted={p}", e.key);
                    if let Some(d) = e.relative_deviation() {
                        let _ = writeln!(out, "{}.rel_dev={d}", e.key);
                    }
                }
                _ => {
                    let _ = writeln!(out, "{}.status=inapplicable", e.key);
                }
            }
        }
        out
    }
}

/// Reads the `key=value` block of a report.
pub fn parse_report_block(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .skip_while(|l| l.trim() != "[report]")
        .skip(1)
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Indices of the first contiguous block of snapshots, after light has
/// entered, whose photon number stays below [`STORED_FRACTION`] of the run
/// maximum while a spin wave is present.
pub fn stored_phase(snapshots: &[SolverState]) -> Vec<usize> {
    let counts: Vec<(f64, f64)> = snapshots
        .iter()
        .map(|s| {
            let (ne, _, nq) = excitation_numbers(s);
            (ne, nq)
        })
        .collect();
    let ne_max = counts.iter().map(|c| c.0).fold(0.0, f64::max);
    let nq_max = counts.iter().map(|c| c.1).fold(0.0, f64::max);
    if ne_max == 0.0 {
        return Vec::new();
    }
    let Some(first_lit) = counts.iter().position(|c| c.0 >= STORED_FRACTION * ne_max) else {
        return Vec::new();
    };
    counts
        .iter()
        .enumerate()
        .skip(first_lit)
        .skip_while(|(_, c)| c.0 >= STORED_FRACTION * ne_max)
        .take_while(|(_, c)| c.0 < STORED_FRACTION * ne_max && c.1 >= STORED_FRACTION * nq_max)
        .map(|(k, _)| k)
        .collect()
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// `|v|` along row `j`.
fn row_abs(grid: &FieldGrid, j: usize) -> Vec<f64> {
    grid.row(j).iter().map(|v| v.norm()).collect()
}

/// Climbs from `start` to the nearest local maximum.
fn climb(profile: &[f64], mut k: usize) -> usize {
    loop {
        if k + 1 < profile.len() && profile[k + 1] > profile[k] {
            k += 1;
        } else if k > 0 && profile[k - 1] > profile[k] {
            k -= 1;
        } else {
            return k;
        }
    }
}

/// Compares the run against the characteristics predictions: stored-wave
/// z-centroid vs `z_inf`, x-drift slope vs `v0`, spin-wave extent and the
/// retrieved width. Measurements use only the snapshots; predictions use
/// only `map`.
pub fn verify_geometry(
    snapshots: &[SolverState],
    probe: &ProbeSpec,
    map: &CharacteristicMap,
    medium: &Medium,
    dz_atom: f64,
) -> Result<GeometryReport> {
    let feasibility = map.storage_feasibility(probe, dz_atom);
    let stored = stored_phase(snapshots);
    let mut entries = Vec::new();
    let envelopes: Vec<FieldGrid> = snapshots.iter().map(|s| envelope(s, medium)).collect();

    let z_inf = map.find_z_infinity().ok();
    let storage_ok = feasibility.class != StorageClass::Escapes && !stored.is_empty() && z_inf.is_some();
    if storage_ok {
        let z_inf = z_inf.expect("checked above");
        let mid = stored[stored.len() / 2];
        let env = &envelopes[mid];
        let g = *env.geometry();
        let (zc, hz) = centroid_and_width(env, Axis::Z)?;
        entries.push(ReportEntry::new("z_centroid", zc, z_inf));

        let mut drift = Vec::new();
        for &k in &stored {
            drift.push((snapshots[k].t, centroid(&envelopes[k], Axis::X)?));
        }
        match linear_slope(&drift) {
            Some(slope) => entries.push(ReportEntry::new("drift_slope", slope, medium.constants.v0)),
            None => entries.push(ReportEntry::inapplicable("drift_slope", "fewer than two stored snapshots")),
        }

        let extent = map.spin_wave_extent(probe)?;
        let row = row_abs(env, g.nearest_row(zc));
        let peak = argmax(&row);
        let dx_s = hwhm_around(g.x0, g.dx, &row, peak)?;
        entries.push(ReportEntry::new("dx_s", dx_s, extent.dx_s));
        entries.push(ReportEntry::new("dz_s", hz * std::f64::consts::SQRT_2, extent.dz_s));
    } else {
        for key in ["z_centroid", "drift_slope", "dx_s", "dz_s"] {
            entries.push(ReportEntry::inapplicable(key, "inapplicable: no stored phase"));
        }
    }

    let mut retrieval = None;
    if let Some(c2) = &medium.control2 {
        let split = 0.5 * (medium.control1.center + c2.center);
        let after = stored.last().map_or(0, |&k| k + 1);
        let lit: Vec<(usize, f64)> = snapshots
            .iter()
            .enumerate()
            .skip(after)
            .map(|(k, s)| {
                let g = s.geometry();
                let n = (0..g.nx)
                    .filter(|&i| g.x(i) > split)
                    .map(|i| s.e.column(i).iter().map(|v| v.norm_sqr()).sum::<f64>())
                    .sum();
                (k, n)
            })
            .collect();
        let n_max = lit.iter().fold(0.0f64, |m, c| m.max(c.1));
        // the local width law holds where the drifting pulse sits under the
        // beam centre, so take the lit snapshot whose peak is closest to it
        let mut best: Option<(usize, usize, usize, f64)> = None;
        for &(k, n) in &lit {
            if n_max == 0.0 || n < STORED_FRACTION * n_max {
                continue;
            }
            let s = &snapshots[k];
            let g = *s.geometry();
            let (mut bi, mut bj, mut bv) = (0, 0, -1.0);
            for i in (0..g.nx).filter(|&i| g.x(i) > split) {
                for j in 0..g.nz {
                    let v = s.e.get(i, j).norm_sqr();
                    if v > bv {
                        (bi, bj, bv) = (i, j, v);
                    }
                }
            }
            let peak = climb(&row_abs(&envelopes[k], bj), bi);
            let off = (g.x(peak) - c2.center).abs();
            if best.is_none_or(|b| off < b.3) {
                best = Some((k, bj, peak, off));
            }
        }
        match best {
            Some((k, j, peak, _)) => {
                retrieval = Some(k);
                let g = *snapshots[k].geometry();
                let w = hwhm_around(g.x0, g.dx, &row_abs(&envelopes[k], j), peak)?;
                entries.push(ReportEntry::new("retrieved_width", w, map.retrieved_width(probe.x_hwhm)?));
            }
            None => entries.push(ReportEntry::inapplicable("retrieved_width", "no light under the second beam")),
        }
    }

    Ok(GeometryReport {
        feasibility,
        stored,
        retrieval,
        entries,
    })
}
