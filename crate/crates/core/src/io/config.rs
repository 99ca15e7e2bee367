//! Run configuration: sectioned `key = value` text in TOML syntax.
//!
//! ```text
//! [grid]      x_min x_max z_min z_max nx nz
//! [medium]    vg_base vg_dip_depth vg_dip_center vg_dip_width v0 g=1 c=100 z1=z_min
//! [control1]  center width amplitude direction="+z"
//! [control2]  optional, same keys
//! [probe]     x_center x_hwhm t_center t_hwhm amplitude=1
//! [physics]   delta=0 Delta=0 gamma=0 v_r=0 v_r_enabled=false
//! [solver]    mode="advection"|"full-MB" t_end snapshot_every dt cfl_safety
//! [output]    directory="out" format=1
//! ```
//!
//! Keys shown with `=` are optional with that default. When neither `dt`
//! nor `cfl_safety` is given the safety factor defaults per mode. Unknown keys
//! and sections are rejected.

use serde::{Deserialize, Serialize};

use crate::characteristics::ProbeSpec;
use crate::error::{Error, Result};
use crate::grid::Geometry;
use crate::medium::{ControlLaser, Direction, Medium, VgProfile};
use crate::solver::SolverConfig;
use crate::state::{Mode, PhysicsConstants};

/// Snapshot format version written by this build.
pub const FORMAT_VERSION: u32 = 1;

const SECTIONS: [&str; 8] = ["grid", "medium", "control1", "control2", "probe", "physics", "solver", "output"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub medium: MediumSection,
    pub control1: ControlSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control2: Option<ControlSection>,
    pub probe: ProbeSection,
    pub physics: PhysicsSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nx: usize,
    pub nz: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    pub vg_base: f64,
    pub vg_dip_depth: f64,
    pub vg_dip_center: f64,
    pub vg_dip_width: f64,
    pub v0: f64,
    #[serde(default = "one")]
    pub g: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    #[serde(default = "forward")]
    pub direction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub x_center: f64,
    pub x_hwhm: f64,
    pub t_center: f64,
    pub t_hwhm: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    #[serde(default)]
    pub delta: f64,
    #[serde(default, rename = "Delta")]
    pub detuning: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub v_r: f64,
    #[serde(default)]
    pub v_r_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub mode: String,
    pub t_end: f64,
    pub snapshot_every: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl_safety: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_format")]
    pub format: u32,
}

fn one() -> f64 {
    1.0
}

fn default_c() -> f64 {
    100.0
}

fn forward() -> String {
    Direction::Forward.as_str().to_string()
}

fn default_directory() -> String {
    "out".to_string()
}

fn default_format() -> u32 {
    FORMAT_VERSION
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| syntax_error(text, &e))?;
    cfg.validate_in(Some(text))?;
    Ok(cfg)
}

impl RunConfig {
    /// Canonical text form; parsing it yields an identical configuration.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_in(None)
    }

    fn validate_in(&self, text: Option<&str>) -> Result<()> {
        let fail = |section: &str, key: &str, msg: String| Error::Config {
            line: text.and_then(|t| key_line(t, section, key)).unwrap_or(0),
            section: section.to_string(),
            key: key.to_string(),
            msg,
        };
        let finite = |section: &str, pairs: &[(&str, f64)]| -> Result<()> {
            for &(key, v) in pairs {
                if !v.is_finite() {
                    return Err(fail(section, key, format!("must be finite, got {v}")));
                }
            }
            Ok(())
        };
        let require = |ok: bool, section: &str, key: &str, msg: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(fail(section, key, msg.to_string()))
            }
        };

        let g = &self.grid;
        finite(
            "grid",
            &[("x_min", g.x_min), ("x_max", g.x_max), ("z_min", g.z_min), ("z_max", g.z_max)],
        )?;
        require(g.x_max > g.x_min, "grid", "x_max", "must exceed x_min")?;
        require(g.z_max > g.z_min, "grid", "z_max", "must exceed z_min")?;
        require(g.nx >= 2, "grid", "nx", "must be at least 2")?;
        require(g.nz >= 2, "grid", "nz", "must be at least 2")?;

        let m = &self.medium;
        finite(
            "medium",
            &[
                ("vg_base", m.vg_base),
                ("vg_dip_depth", m.vg_dip_depth),
                ("vg_dip_center", m.vg_dip_center),
                ("vg_dip_width", m.vg_dip_width),
                ("v0", m.v0),
                ("g", m.g),
                ("c", m.c),
                ("z1", m.z1.unwrap_or(g.z_min)),
            ],
        )?;
        require(m.vg_base > 0.0, "medium", "vg_base", "must be positive")?;
        require(
            m.vg_dip_depth >= 0.0 && m.vg_dip_depth < m.vg_base,
            "medium",
            "vg_dip_depth",
            "must lie in [0, vg_base)",
        )?;
        require(m.vg_dip_width > 0.0, "medium", "vg_dip_width", "must be positive")?;
        require(m.v0 >= 0.0, "medium", "v0", "must be >= 0")?;
        require(m.g >= 0.0, "medium", "g", "must be >= 0")?;
        require(m.c > 0.0, "medium", "c", "must be positive")?;
        if let Some(z1) = m.z1 {
            require(z1 == g.z_min, "medium", "z1", "must equal grid.z_min (the inflow plane)")?;
        }

        for (name, c) in [("control1", Some(&self.control1)), ("control2", self.control2.as_ref())] {
            let Some(c) = c else { continue };
            finite(name, &[("center", c.center), ("width", c.width), ("amplitude", c.amplitude)])?;
            require(c.width > 0.0, name, "width", "must be positive")?;
            require(c.amplitude >= 0.0, name, "amplitude", "must be >= 0")?;
            let dir = parse_direction(&c.direction)
                .ok_or_else(|| fail(name, "direction", format!("expected \"+z\" or \"-z\", got {:?}", c.direction)))?;
            if name == "control1" {
                require(c.amplitude > 0.0, name, "amplitude", "must be positive")?;
                require(
                    dir == Direction::Forward,
                    name,
                    "direction",
                    "the first control laser propagates along +z",
                )?;
            }
        }

        let p = &self.probe;
        finite(
            "probe",
            &[
                ("x_center", p.x_center),
                ("x_hwhm", p.x_hwhm),
                ("t_center", p.t_center),
                ("t_hwhm", p.t_hwhm),
                ("amplitude", p.amplitude),
            ],
        )?;
        require(p.x_hwhm > 0.0, "probe", "x_hwhm", "must be positive")?;
        require(p.t_hwhm > 0.0, "probe", "t_hwhm", "must be positive")?;

        let ph = &self.physics;
        finite(
            "physics",
            &[("delta", ph.delta), ("Delta", ph.detuning), ("gamma", ph.gamma), ("v_r", ph.v_r)],
        )?;
        require(ph.gamma >= 0.0, "physics", "gamma", "must be >= 0")?;

        let s = &self.solver;
        let mode = parse_mode(&s.mode)
            .ok_or_else(|| fail("solver", "mode", format!("expected \"advection\" or \"full-MB\", got {:?}", s.mode)))?;
        finite("solver", &[("t_end", s.t_end), ("snapshot_every", s.snapshot_every)])?;
        require(s.t_end >= 0.0, "solver", "t_end", "must be >= 0")?;
        require(s.snapshot_every > 0.0, "solver", "snapshot_every", "must be positive")?;
        if let Some(dt) = s.dt {
            require(dt.is_finite() && dt > 0.0, "solver", "dt", "must be positive")?;
        }
        if let Some(k) = s.cfl_safety {
            require(k > 0.0 && k <= 1.0, "solver", "cfl_safety", "must lie in (0, 1]")?;
        }
        if mode == Mode::Full {
            if let Some(c2) = &self.control2 {
                require(
                    parse_direction(&c2.direction) == Some(Direction::Forward),
                    "control2",
                    "direction",
                    "full-MB mode supports only a co-propagating second laser",
                )?;
            }
        }

        require(
            self.output.format == FORMAT_VERSION,
            "output",
            "format",
            "unsupported snapshot format version",
        )?;
        self.medium().map(|_| ()).map_err(|e| fail("medium", "vg_base", e.to_string()))
    }

    pub fn mode(&self) -> Mode {
        parse_mode(&self.solver.mode).unwrap_or(Mode::Advection)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let g = &self.grid;
        Geometry::spanning(g.x_min, g.x_max, g.nx, g.z_min, g.z_max, g.nz)
    }

    pub fn medium(&self) -> Result<Medium> {
        let m = &self.medium;
        let control = |c: &ControlSection| ControlLaser {
            center: c.center,
            width: c.width,
            amplitude: c.amplitude,
            direction: parse_direction(&c.direction).unwrap_or(Direction::Forward),
        };
        let ph = &self.physics;
        Medium::new(
            control(&self.control1),
            self.control2.as_ref().map(control),
            VgProfile::Dip {
                base: m.vg_base,
                depth: m.vg_dip_depth,
                center: m.vg_dip_center,
                width: m.vg_dip_width,
            },
            PhysicsConstants {
                g: m.g,
                c: m.c,
                v0: m.v0,
                v_r: ph.v_r,
                recoil_enabled: ph.v_r_enabled,
                delta: ph.delta,
                detuning: ph.detuning,
                gamma: ph.gamma,
            },
            m.z1.unwrap_or(self.grid.z_min),
        )
    }

    pub fn probe(&self) -> ProbeSpec {
        let p = &self.probe;
        ProbeSpec {
            x_center: p.x_center,
            x_hwhm: p.x_hwhm,
            t_center: p.t_center,
            t_hwhm: p.t_hwhm,
            amplitude: p.amplitude,
        }
    }

    pub fn solver(&self) -> SolverConfig {
        let s = &self.solver;
        let mode = self.mode();
        SolverConfig {
            mode,
            t_end: s.t_end,
            snapshot_every: s.snapshot_every,
            dt: s.dt,
            cfl_safety: s.cfl_safety.unwrap_or_else(|| SolverConfig::default_safety(mode)),
        }
    }
}

pub fn parse_direction(s: &str) -> Option<Direction> {
    [Direction::Forward, Direction::Backward].into_iter().find(|d| d.as_str() == s)
}

pub fn parse_mode(s: &str) -> Option<Mode> {
    [Mode::Advection, Mode::Full].into_iter().find(|m| m.as_str() == s)
}

/// Maps a deserialization failure onto the section, key and line it concerns.
fn syntax_error(text: &str, e: &toml::de::Error) -> Error {
    let msg = e.message().trim().to_string();
    let quoted = msg.split('`').nth(1).map(str::to_string);
    let line = e.span().map(|s| line_of(text, s.start));
    if msg.starts_with("missing field") {
        if let Some(name) = &quoted {
            if SECTIONS.contains(&name.as_str()) && section_line(text, name).is_none() {
                return Error::MissingSection(name.clone());
            }
        }
    }
    let section = line.and_then(|l| section_at(text, l)).unwrap_or_default();
    let key = if msg.starts_with("unknown field") || msg.starts_with("missing field") {
        quoted.unwrap_or_default()
    } else {
        line.and_then(|l| text.lines().nth(l - 1))
            .and_then(|l| l.split('=').next())
            .map(|k| k.trim().to_string())
            .unwrap_or_default()
    };
    Error::Config {
        line: line.unwrap_or(0),
        section,
        key,
        msg,
    }
}

/// 1-based line containing byte `offset`.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn header(line: &str) -> Option<&str> {
    let t = line.trim();
    t.strip_prefix('[')?.strip_suffix(']').map(str::trim)
}

fn section_line(text: &str, section: &str) -> Option<usize> {
    text.lines().position(|l| header(l) == Some(section)).map(|k| k + 1)
}

/// Section whose body contains 1-based `line`.
fn section_at(text: &str, line: usize) -> Option<String> {
    text.lines().take(line).filter_map(header).last().map(str::to_string)
}

/// 1-based line defining `key` inside `[section]`.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let start = section_line(text, section)?;
    for (k, l) in text.lines().enumerate().skip(start) {
        if header(l).is_some() {
            return None;
        }
        if l.split('=').next().map(str::trim) == Some(key) {
            return Some(k + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = include_str!("../../../../presets/fig2.cfg");

    #[test]
    fn preset_round_trips() {
        let cfg = parse_config(FIG2).unwrap();
        let again = parse_config(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_text(), again.to_text());
    }

    #[test]
    fn negative_width_names_key_and_line() {
        let text = FIG2.replacen("\nwidth = 1.0", "\nwidth = -1.0", 1);
        match parse_config(&text) {
            Err(e @ Error::Config { .. }) => {
                let s = e.to_string();
                assert!(s.contains("control1.width"), "{s}");
                let Error::Config { line, .. } = e else { unreachable!() };
                assert!(text.lines().nth(line - 1).unwrap().contains("-1.0"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = FIG2.replacen("[probe]\n", "[probe]\nwaist = 2.0\n", 1);
        match parse_config(&text) {
            Err(Error::Config { section, key, line, .. }) => {
                assert_eq!((section.as_str(), key.as_str()), ("probe", "waist"));
                assert_eq!(text.lines().nth(line - 1).unwrap().trim(), "waist = 2.0");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_section_and_optional_second_laser() {
        let cut = |text: &str, name: &str| {
            let start = text.find(&format!("[{name}]")).unwrap();
            let end = text[start + 1..].find("\n[").map_or(text.len(), |k| start + 2 + k);
            format!("{}{}", &text[..start], &text[end..])
        };
        assert!(matches!(parse_config(&cut(FIG2, "probe")), Err(Error::MissingSection(s)) if s == "probe"));
        let single = parse_config(&cut(FIG2, "control2")).unwrap();
        assert!(single.control2.is_none());
        assert!(single.medium().unwrap().control2.is_none());
    }

    #[test]
    fn non_finite_and_bad_enums() {
        let text = FIG2.replacen("v0 = 0.1", "v0 = nan", 1);
        assert!(matches!(parse_config(&text), Err(Error::Config { key, .. }) if key == "v0"));
        let text = FIG2.replacen("mode = \"advection\"", "mode = \"spectral\"", 1);
        assert!(matches!(parse_config(&text), Err(Error::Config { key, .. }) if key == "mode"));
        let text = FIG2.replacen("nx = 400", "nx = \"many\"", 1);
        assert!(matches!(parse_config(&text), Err(Error::Config { section, .. }) if section == "grid"));
    }

    #[test]
    fn builds_engine_inputs() {
        let cfg = parse_config(FIG2).unwrap();
        let m = cfg.medium().unwrap();
        assert_eq!(m.control2.unwrap().center, 5.0);
        assert!((m.vg_ref(2.0) - 0.05).abs() < 1e-15);
        assert_eq!(cfg.solver().snapshot_times().len(), 11);
        assert_eq!(cfg.geometry().unwrap().nx, 400);
    }
}
