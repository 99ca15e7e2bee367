//! Text snapshot format, version 1.
//!
//! One file per field and time:
//!
//! ```text
//! # polsim-snapshot v1
//! # t=<decimal>
//! # field=E|psi_e|psi_q|E_tilde
//! # nx=<int> dx=<decimal> x0=<decimal>
//! # nz=<int> dz=<decimal> z0=<decimal>
//! <re> <im>            nx * nz lines, z varying fastest
//! ```
//!
//! Numbers use the shortest decimal that parses back to the same `f64`;
//! zeros of either sign are written as `0`.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{FieldGrid, Geometry};
use crate::state::{Mode, SolverState};

const MAGIC: &str = "# polsim-snapshot";
const VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FieldKind {
    E,
    PsiE,
    PsiQ,
    ETilde,
}

impl FieldKind {
    pub const ALL: [FieldKind; 4] = [FieldKind::E, FieldKind::PsiE, FieldKind::PsiQ, FieldKind::ETilde];

    pub fn as_str(&self) -> &'static str {
        match self {
            FieldKind::E => "E",
            FieldKind::PsiE => "psi_e",
            FieldKind::PsiQ => "psi_q",
            FieldKind::ETilde => "E_tilde",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Shortest round-trip decimal, with both zeros written as `0`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        let s = format!("{v:?}");
        s.strip_suffix(".0").map_or(s.clone(), str::to_string)
    }
}

pub fn encode_field(t: f64, kind: FieldKind, grid: &FieldGrid) -> String {
    let g = grid.geometry();
    let mut out = String::with_capacity(32 * g.len() + 160);
    out.push_str(&format!("{MAGIC} {VERSION}\n"));
    out.push_str(&format!("# t={}\n", format_number(t)));
    out.push_str(&format!("# field={}\n", kind.as_str()));
    out.push_str(&format!("# nx={} dx={} x0={}\n", g.nx, format_number(g.dx), format_number(g.x0)));
    out.push_str(&format!("# nz={} dz={} z0={}\n", g.nz, format_number(g.dz), format_number(g.z0)));
    for v in grid.values() {
        out.push_str(&format_number(v.re));
        out.push(' ');
        out.push_str(&format_number(v.im));
        out.push('\n');
    }
    out
}

pub fn write_field(path: &Path, t: f64, kind: FieldKind, grid: &FieldGrid) -> Result<()> {
    fs::write(path, encode_field(t, kind, grid))?;
    Ok(())
}

/// A decoded snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub t: f64,
    pub kind: FieldKind,
    pub grid: FieldGrid,
}

pub fn decode_field(path: &Path, text: &str) -> Result<FieldSnapshot> {
    let header_err = |msg: String| Error::SnapshotHeader {
        path: path.to_path_buf(),
        msg,
    };
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("");
    let version = first
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| header_err(format!("expected \"{MAGIC} {VERSION}\", got {first:?}")))?;
    if version != VERSION {
        return Err(Error::SnapshotVersion {
            path: path.to_path_buf(),
            found: version.to_string(),
        });
    }
    let mut header = |expect: &[&str]| -> Result<Vec<String>> {
        let line = lines.next().ok_or_else(|| header_err("truncated header".into()))?;
        let body = line
            .strip_prefix("# ")
            .ok_or_else(|| header_err(format!("expected header line, got {line:?}")))?;
        let parts: Vec<&str> = body.split(' ').collect();
        if parts.len() != expect.len() {
            return Err(header_err(format!("expected {} entries in {line:?}", expect.len())));
        }
        parts
            .iter()
            .zip(expect)
            .map(|(p, key)| {
                p.strip_prefix(key)
                    .and_then(|r| r.strip_prefix('='))
                    .map(str::to_string)
                    .ok_or_else(|| header_err(format!("expected {key}=..., got {p:?}")))
            })
            .collect()
    };
    let num = |s: &str, key: &str| -> Result<f64> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| header_err(format!("{key}={s} is not a finite number")))
    };
    let count = |s: &str, key: &str| -> Result<usize> { s.parse::<usize>().map_err(|_| header_err(format!("{key}={s} is not a count"))) };

    let t = num(&header(&["t"])?[0], "t")?;
    let field = header(&["field"])?;
    let kind = FieldKind::parse(&field[0]).ok_or_else(|| header_err(format!("unknown field {:?}", field[0])))?;
    let xs = header(&["nx", "dx", "x0"])?;
    let zs = header(&["nz", "dz", "z0"])?;
    let geom = Geometry::new(
        num(&xs[2], "x0")?,
        num(&xs[1], "dx")?,
        count(&xs[0], "nx")?,
        num(&zs[2], "z0")?,
        num(&zs[1], "dz")?,
        count(&zs[0], "nz")?,
    )
    .map_err(|e| header_err(e.to_string()))?;

    let data: Vec<&str> = lines.collect();
    if data.len() != geom.len() {
        return Err(Error::PayloadCount {
            path: path.to_path_buf(),
            expected: geom.len(),
            found: data.len(),
        });
    }
    let mut values = Vec::with_capacity(geom.len());
    for (k, line) in data.iter().enumerate() {
        let bad = |msg: String| Error::SnapshotData {
            path: path.to_path_buf(),
            line: k + 6,
            msg,
        };
        let mut it = line.split(' ');
        let (Some(re), Some(im), None) = (it.next(), it.next(), it.next()) else {
            return Err(bad(format!("expected \"re im\", got {line:?}")));
        };
        let parse = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("not a number: {s:?}")));
        values.push(Complex64::new(parse(re)?, parse(im)?));
    }
    let grid = FieldGrid::from_values(geom, values)?;
    Ok(FieldSnapshot { t, kind, grid })
}

pub fn read_field(path: &Path) -> Result<FieldSnapshot> {
    let text = fs::read_to_string(path)?;
    decode_field(path, &text)
}

pub fn snapshot_path(dir: &Path, index: usize, kind: FieldKind) -> PathBuf {
    dir.join(format!("snap_{index:04}_{}.dat", kind.as_str()))
}

/// Writes every field of `state` as snapshot `index`.
pub fn write_snapshot(dir: &Path, index: usize, state: &SolverState) -> Result<()> {
    let mut fields = vec![
        (FieldKind::E, &state.e),
        (FieldKind::PsiE, &state.psi_e),
        (FieldKind::PsiQ, &state.psi_q),
    ];
    if let Some(et) = &state.e_tilde {
        fields.push((FieldKind::ETilde, et));
    }
    for (kind, grid) in fields {
        write_field(&snapshot_path(dir, index, kind), state.t, kind, grid)?;
    }
    Ok(())
}

/// Reads snapshot `index`; the presence of an `E_tilde` file marks an
/// advection-mode state.
pub fn read_snapshot(dir: &Path, index: usize) -> Result<SolverState> {
    let get = |kind| read_field(&snapshot_path(dir, index, kind));
    let e = get(FieldKind::E)?;
    let psi_e = get(FieldKind::PsiE)?;
    let psi_q = get(FieldKind::PsiQ)?;
    let tilde_path = snapshot_path(dir, index, FieldKind::ETilde);
    let e_tilde = if tilde_path.exists() {
        Some(read_field(&tilde_path)?)
    } else {
        None
    };
    for other in [Some(&psi_e), Some(&psi_q), e_tilde.as_ref()].into_iter().flatten() {
        if other.t != e.t || other.grid.geometry() != e.grid.geometry() {
            return Err(Error::RunDir(
                dir.to_path_buf(),
                format!("snapshot {index} fields disagree in time or grid"),
            ));
        }
    }
    Ok(SolverState {
        t: e.t,
        mode: if e_tilde.is_some() { Mode::Advection } else { Mode::Full },
        e: e.grid,
        e_tilde: e_tilde.map(|s| s.grid),
        psi_e: psi_e.grid,
        psi_q: psi_q.grid,
    })
}

/// Snapshot indices present in `dir`, ascending.
pub fn list_snapshots(dir: &Path) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(rest) = name.strip_prefix("snap_").and_then(|r| r.strip_suffix("_E.dat")) {
            if let Ok(k) = rest.parse::<usize>() {
                out.push(k);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> FieldGrid {
        let g = Geometry::new(-1.5, 0.1, 4, 0.0, 1.0 / 3.0, 3).unwrap();
        FieldGrid::from_fn(g, |x, z| Complex64::new((x * 1.7).sin() / 3.0, -z * 1e-300))
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.dat");
        let g = grid();
        write_field(&p, 12.345, FieldKind::PsiQ, &g).unwrap();
        let back = read_field(&p).unwrap();
        assert_eq!(back.t, 12.345);
        assert_eq!(back.kind, FieldKind::PsiQ);
        assert_eq!(back.grid, g);
        let q = dir.path().join("b.dat");
        write_field(&q, back.t, back.kind, &back.grid).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap());
    }

    #[test]
    fn zero_field_lines_are_canonical() {
        let g = Geometry::new(0.0, 1.0, 2, 0.0, 1.0, 3).unwrap();
        let mut f = FieldGrid::zeros(g);
        f.set(1, 2, Complex64::new(-0.0, -0.0));
        let text = encode_field(0.0, FieldKind::E, &f);
        let data: Vec<&str> = text.lines().skip(5).collect();
        assert_eq!(data, vec!["0 0"; 6]);
        assert!(text.starts_with("# polsim-snapshot v1\n# t=0\n# field=E\n# nx=2 dx=1 x0=0\n# nz=3 dz=1 z0=0\n"));
    }

    #[test]
    fn distinct_errors() {
        let p = Path::new("x.dat");
        let text = encode_field(1.0, FieldKind::E, &grid());
        let v2 = text.replacen("v1", "v2", 1);
        assert!(matches!(decode_field(p, &v2), Err(Error::SnapshotVersion { found, .. }) if found == "v2"));
        let short: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            decode_field(p, &short),
            Err(Error::PayloadCount {
                expected: 12,
                found: 3,
                ..
            })
        ));
        let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(decode_field(p, &cut), Err(Error::SnapshotHeader { .. })));
        let mut bad: Vec<&str> = text.lines().collect();
        bad[7] = "abc 0";
        let bad = bad.join("\n");
        assert!(matches!(decode_field(p, &bad), Err(Error::SnapshotData { .. })));
    }

    #[test]
    fn snapshot_set_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid();
        let state = SolverState {
            t: 2.5,
            mode: Mode::Advection,
            e: g.clone(),
            e_tilde: Some(g.map(|_, _, v| v * 2.0)),
            psi_e: FieldGrid::zeros(*g.geometry()),
            psi_q: g.map(|_, _, v| -v),
        };
        write_snapshot(dir.path(), 7, &state).unwrap();
        assert_eq!(list_snapshots(dir.path()).unwrap(), vec![7]);
        assert!(dir.path().join("snap_0007_E_tilde.dat").exists());
        let back = read_snapshot(dir.path(), 7).unwrap();
        assert_eq!(back, state);
    }

    proptest! {
        #[test]
        fn numbers_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back: f64 = format_number(v).parse().unwrap();
            prop_assert!(back == v);
        }
    }
}
