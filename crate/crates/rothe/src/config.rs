//! Flat `key = value` configuration files.
//!
//! Grammar, one item per line:
//!
//! ```text
//! file    = { line "\n" }
//! line    = blank | comment | entry
//! comment = { " " | "\t" } "#" { any }
//! entry   = { ws } key { ws } "=" { ws } value { ws }
//! key     = section "." name          (e.g. "model.p")
//! value   = any text without "#" and without leading or trailing blanks
//! ```
//!
//! Keys are case sensitive and may appear at most once; an unknown key is
//! an error. `experiment.kind` is required, every other key falls back to
//! the defaults of that experiment. Numbers use Rust's `f64`/`usize`
//! syntax, booleans are `true`/`false`, and enumerations use the lower
//! case names listed in [`KEYS`].
//!
//! [`to_string`] writes every key in the fixed order of [`KEYS`], floats in
//! their shortest round-trip form, so parsing its output and writing again
//! reproduces the same bytes.

use std::collections::HashMap;
use std::fmt::Write;
use std::path::Path;

use rothe_core::analysis::ErrorVariant;
use rothe_core::elements::ElementFamily;
use rothe_core::experiments::{ExperimentConfig, ExperimentKind};
use rothe_core::timestepping::InitialData;

use crate::error::{HarnessError, Result};

/// Every recognised key, in output order, with a short description.
pub const KEYS: [(&str, &str); 24] = [
    ("experiment.kind", "vortex | singular | manufactured"),
    ("experiment.family", "mini | taylor_hood | crouzeix_raviart"),
    ("model.p", "power-law exponent, > 1"),
    ("model.delta", "shift, >= 0"),
    ("mesh.x0", "domain lower-left x"),
    ("mesh.y0", "domain lower-left y"),
    ("mesh.x1", "domain upper-right x"),
    ("mesh.y1", "domain upper-right y"),
    ("mesh.nx", "base cells in x"),
    ("mesh.ny", "base cells in y"),
    ("mesh.level", "refinement level n >= 1 (n - 1 regular refinements)"),
    ("time.t_end", "final time T"),
    ("time.steps", "number of steps K"),
    ("time.quad_points", "Gauss points per interval for the data means"),
    ("scheme.convection", "true | false"),
    ("scheme.initial", "projection | interpolation"),
    ("newton.abs_tol", "absolute residual tolerance"),
    ("newton.rel_tol", "relative residual tolerance"),
    ("newton.max_iter", "iteration limit"),
    ("newton.damping", "backtracking factor in (0, 1)"),
    ("newton.max_halvings", "backtracking limit"),
    ("analysis.error_variant", "squared | as_written"),
    ("output.dir", "run directory"),
    ("output.snapshots", "number of VTK snapshots besides the first and last level"),
];

/// Harness options that are not part of the core experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub snapshots: usize,
}

impl RunConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        RunConfig { experiment: ExperimentConfig::defaults(kind), snapshots: 10 }
    }
}

fn initial_str(i: InitialData) -> &'static str {
    match i {
        InitialData::Projection => "projection",
        InitialData::Interpolation => "interpolation",
    }
}

pub fn to_string(cfg: &RunConfig) -> String {
    let e = &cfg.experiment;
    let n = &e.newton;
    let [x0, y0, x1, y1] = e.domain;
    let values: [String; 24] = [
        e.experiment.as_str().into(),
        e.family.as_str().into(),
        format!("{:?}", e.p),
        format!("{:?}", e.delta),
        format!("{x0:?}"),
        format!("{y0:?}"),
        format!("{x1:?}"),
        format!("{y1:?}"),
        e.nx.to_string(),
        e.ny.to_string(),
        e.level.to_string(),
        format!("{:?}", e.t_end),
        e.steps.to_string(),
        e.time_quad.to_string(),
        e.convection.to_string(),
        initial_str(e.initial).into(),
        format!("{:?}", n.abs_tol),
        format!("{:?}", n.rel_tol),
        n.max_iter.to_string(),
        format!("{:?}", n.damping),
        n.max_halvings.to_string(),
        e.error_variant.as_str().into(),
        e.output.clone(),
        cfg.snapshots.to_string(),
    ];
    let mut s = String::from("# rothe experiment configuration\n");
    for ((key, _), v) in KEYS.iter().zip(&values) {
        let _ = writeln!(s, "{key} = {v}");
    }
    s
}

struct Entry<'a> {
    line: usize,
    value: &'a str,
}

pub fn parse(text: &str) -> Result<RunConfig> {
    let mut entries: HashMap<&str, Entry> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(HarnessError::Config { line, msg: format!("expected `key = value`, got `{body}`") });
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(HarnessError::Config { line, msg: format!("unknown key `{key}`") });
        }
        if value.is_empty() {
            return Err(HarnessError::Config { line, msg: format!("`{key}` has no value") });
        }
        if let Some(prev) = entries.insert(key, Entry { line, value }) {
            return Err(HarnessError::Config { line, msg: format!("`{key}` already set on line {}", prev.line) });
        }
    }

    let Some(kind) = entries.get("experiment.kind") else {
        return Err(HarnessError::Config { line: 0, msg: "missing required key `experiment.kind`".into() });
    };
    let kind = ExperimentKind::parse(kind.value)
        .ok_or_else(|| HarnessError::Config { line: kind.line, msg: format!("unknown experiment `{}`", kind.value) })?;
    let mut cfg = RunConfig::defaults(kind);

    let mut keys: Vec<_> = entries.iter().collect();
    keys.sort_by_key(|(_, e)| e.line);
    for (&key, entry) in keys {
        apply(&mut cfg, key, entry.value).map_err(|msg| HarnessError::Config { line: entry.line, msg: format!("`{key}`: {msg}") })?;
    }
    Ok(cfg)
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn apply(cfg: &mut RunConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    let e = &mut cfg.experiment;
    match key {
        "experiment.kind" => {}
        "experiment.family" => e.family = ElementFamily::parse(v).ok_or(format!("unknown family `{v}`"))?,
        "model.p" => e.p = num(v)?,
        "model.delta" => e.delta = num(v)?,
        "mesh.x0" => e.domain[0] = num(v)?,
        "mesh.y0" => e.domain[1] = num(v)?,
        "mesh.x1" => e.domain[2] = num(v)?,
        "mesh.y1" => e.domain[3] = num(v)?,
        "mesh.nx" => e.nx = num(v)?,
        "mesh.ny" => e.ny = num(v)?,
        "mesh.level" => e.level = num(v)?,
        "time.t_end" => e.t_end = num(v)?,
        "time.steps" => e.steps = num(v)?,
        "time.quad_points" => e.time_quad = num(v)?,
        "scheme.convection" => e.convection = num(v)?,
        "scheme.initial" => {
            e.initial = match v {
                "projection" => InitialData::Projection,
                "interpolation" => InitialData::Interpolation,
                _ => return Err(format!("unknown initial data `{v}`")),
            }
        }
        "newton.abs_tol" => e.newton.abs_tol = num(v)?,
        "newton.rel_tol" => e.newton.rel_tol = num(v)?,
        "newton.max_iter" => e.newton.max_iter = num(v)?,
        "newton.damping" => e.newton.damping = num(v)?,
        "newton.max_halvings" => e.newton.max_halvings = num(v)?,
        "analysis.error_variant" => e.error_variant = ErrorVariant::parse(v).ok_or(format!("unknown variant `{v}`"))?,
        "output.dir" => e.output = v.to_string(),
        "output.snapshots" => cfg.snapshots = num(v)?,
        _ => unreachable!("key list checked by the caller"),
    }
    Ok(())
}

/// Parses and validates a config file.
pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let cfg = parse(&text)?;
    cfg.experiment.validate().map_err(HarnessError::Invalid)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_byte_identical() {
        for kind in [ExperimentKind::Vortex, ExperimentKind::Singular, ExperimentKind::Manufactured] {
            let text = to_string(&RunConfig::defaults(kind));
            let back = parse(&text).unwrap();
            assert_eq!(back, RunConfig::defaults(kind));
            assert_eq!(to_string(&back), text);
        }
    }

    #[test]
    fn awkward_floats_round_trip() {
        let mut cfg = RunConfig::defaults(ExperimentKind::Singular);
        cfg.experiment.p = 11.0 / 5.0;
        cfg.experiment.delta = 1.0 / 3.0 * 1e-7;
        cfg.experiment.domain = [-0.1, 1e-300, 7.0, 1e300];
        let text = to_string(&cfg);
        assert_eq!(parse(&text).unwrap(), cfg);
        assert_eq!(to_string(&parse(&text).unwrap()), text);
    }

    #[test]
    fn partial_file_uses_kind_defaults() {
        let cfg = parse("experiment.kind = singular\n  model.p=2.5   # comment\n\n").unwrap();
        let mut want = RunConfig::defaults(ExperimentKind::Singular);
        want.experiment.p = 2.5;
        assert_eq!(cfg, want);
    }

    #[test]
    fn rejects_bad_input() {
        let line = |t: &str| match parse(t) {
            Err(HarnessError::Config { line, .. }) => line,
            other => panic!("{t:?}: {other:?}"),
        };
        assert_eq!(line("model.p = 2\n"), 0);
        assert_eq!(line("experiment.kind = vortex\nmodel.q = 2\n"), 2);
        assert_eq!(line("experiment.kind = vortex\nmodel.p = 2\nmodel.p = 3\n"), 3);
        assert_eq!(line("experiment.kind = vortex\nmodel.p = two\n"), 2);
        assert_eq!(line("experiment.kind = vortex\njust text\n"), 2);
        assert_eq!(line("experiment.kind = cavity\n"), 1);
        assert_eq!(line("experiment.kind = vortex\nscheme.convection = yes\n"), 2);
    }
}
