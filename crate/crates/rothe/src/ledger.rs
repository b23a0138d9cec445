//! CSV ledgers and matrix dumps.

use std::fmt::Write;
use std::path::Path;

use rothe_core::nonlinear::CsrMatrix;
use rothe_core::timestepping::{StabilityEntry, Trajectory};

use crate::error::{HarnessError, Result};

/// `k,t,kinetic,stress_work,load_work,identity_residual,newton_iterations`;
/// row 0 is the initial state.
pub fn energy_csv(traj: &Trajectory) -> String {
    let mut s = String::from("k,t,kinetic,stress_work,load_work,identity_residual,newton_iterations\n");
    for e in &traj.energy {
        let its = if e.k == 0 { 0 } else { traj.stats[e.k - 1].iterations };
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e},{:e},{}",
            e.k,
            traj.grid.time(e.k),
            e.kinetic,
            e.stress_work,
            e.load_work,
            e.identity_residual,
            its
        );
    }
    s
}

/// `l,lhs,rhs,holds` of the cumulative energy balance.
pub fn stability_csv(entries: &[StabilityEntry]) -> String {
    let mut s = String::from("l,lhs,rhs,holds\n");
    for e in entries {
        let _ = writeln!(s, "{},{:e},{:e},{}", e.l, e.lhs, e.rhs, e.holds);
    }
    s
}

/// `i j value` triplets, 0-based, one stored entry per line.
pub fn matrix_triplets(m: &CsrMatrix) -> String {
    let mut s = String::new();
    m.write_coordinate(&mut s).expect("writing to a String cannot fail");
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_are_zero_based() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.5), (1, 0, -2.0)]).unwrap();
        assert_eq!(matrix_triplets(&m), "0 2 1.5e0\n1 0 -2e0\n");
    }

    #[test]
    fn stability_rows() {
        let rows = [StabilityEntry { l: 0, lhs: 0.5, rhs: 0.5, holds: true }, StabilityEntry { l: 1, lhs: 0.75, rhs: 0.5, holds: false }];
        assert_eq!(stability_csv(&rows), "l,lhs,rhs,holds\n0,5e-1,5e-1,true\n1,7.5e-1,5e-1,false\n");
    }
}
