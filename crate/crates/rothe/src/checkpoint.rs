//! Per-level coefficient dumps.
//!
//! ```text
//! rothe checkpoint
//! k t n_u n_p
//! <n_u velocity coefficients, one per line>
//! <n_p pressure coefficients>
//! <mean-pressure multiplier>
//! ```
//!
//! Values are written in shortest round-trip form, so reading a checkpoint
//! restores the state bit for bit.

use std::fmt::Write;
use std::path::Path;

use rothe_core::forms::DiscreteState;

use crate::error::{HarnessError, Result};

const HEADER: &str = "rothe checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub k: usize,
    pub state: DiscreteState,
}

pub fn to_string(k: usize, state: &DiscreteState) -> String {
    let mut s = String::with_capacity(24 * (state.u.len() + state.pr.len() + 4));
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "{k} {:?} {} {}", state.t, state.u.len(), state.pr.len());
    for v in state.u.iter().chain(&state.pr) {
        let _ = writeln!(s, "{v:?}");
    }
    let _ = writeln!(s, "{:?}", state.multiplier);
    s
}

pub fn parse(text: &str) -> Result<Checkpoint> {
    let err = |m: String| HarnessError::format("checkpoint", m);
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(err(format!("missing `{HEADER}` header")));
    }
    let head: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    let [k, t, nu, np] = head.as_slice() else {
        return Err(err("expected `k t n_u n_p`".into()));
    };
    let k: usize = k.parse().map_err(|_| err(format!("bad level `{k}`")))?;
    let t: f64 = t.parse().map_err(|_| err(format!("bad time `{t}`")))?;
    let nu: usize = nu.parse().map_err(|_| err(format!("bad n_u `{nu}`")))?;
    let np: usize = np.parse().map_err(|_| err(format!("bad n_p `{np}`")))?;
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|_| err(format!("bad value `{l}`"))))
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != nu + np + 1 {
        return Err(err(format!("expected {} values, found {}", nu + np + 1, values.len())));
    }
    let state = DiscreteState { u: values[..nu].to_vec(), pr: values[nu..nu + np].to_vec(), t, multiplier: values[nu + np] };
    Ok(Checkpoint { k, state })
}

pub fn write(path: &Path, k: usize, state: &DiscreteState) -> Result<()> {
    std::fs::write(path, to_string(k, state)).map_err(|e| HarnessError::io(path, e))
}

pub fn read(path: &Path) -> Result<Checkpoint> {
    parse(&std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let state = DiscreteState { u: vec![0.1, -1.0 / 3.0, 1e-310, 2.5e300], pr: vec![f64::MIN_POSITIVE, -0.0], t: 0.004 * 7.0, multiplier: 1.0 / 7.0 };
        let cp = parse(&to_string(7, &state)).unwrap();
        assert_eq!(cp.k, 7);
        assert_eq!(cp.state.u, state.u);
        assert_eq!(cp.state.pr, state.pr);
        assert_eq!(cp.state.t.to_bits(), state.t.to_bits());
        assert_eq!(cp.state.multiplier, state.multiplier);
    }

    #[test]
    fn rejects_truncated_files() {
        let state = DiscreteState { u: vec![1.0, 2.0], pr: vec![3.0], t: 1.0, multiplier: 0.0 };
        let text = to_string(1, &state);
        let cut = &text[..text.trim_end().rfind('\n').unwrap()];
        assert!(parse(cut).is_err());
        assert!(parse("nonsense").is_err());
    }
}
