//! Minimum-degree fill-reducing ordering on the symmetrised pattern.
//!
//! This is the plain elimination-graph variant: eliminating a node turns its
//! neighbourhood into a clique. Ties go to the smaller index so the ordering
//! is a pure function of the pattern.
//!
//! A node whose diagonal is structurally zero (the pressure block of a
//! saddle-point system) only becomes eligible once every neighbour it is
//! coupled to both ways by nonzero values has been eliminated. A single
//! eliminated neighbour is not enough: the pressures of a cell share few
//! velocity dofs, so their Schur block can be rank deficient and the last
//! of them would meet an exact zero pivot. Stored couplings like `∫ψ ∂φ`
//! can vanish up to round-off, so the values matter here; in the saddle
//! systems these blocks do not depend on the state. Without this the
//! factorization would pivot off the diagonal and the fill predicted here
//! would be lost. Nodes without such neighbours (the gauge multiplier)
//! become eligible after any neighbour is eliminated.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::sparse::CsrMatrix;

pub fn minimum_degree(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    // Rows holding only their diagonal (Dirichlet rows) update nothing when
    // eliminated, so they go first and are left out of the graph.
    let trivial: Vec<bool> = (0..n).map(|i| a.row(i).0 == [i]).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut eligible = vec![false; n];
    for i in 0..n {
        if trivial[i] {
            continue;
        }
        for &j in a.row(i).0 {
            if i == j {
                eligible[i] = true;
            } else if !trivial[j] {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    // zero-diagonal nodes waiting on each node, and how many each waits on
    let mut waiting: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pending = vec![0usize; n];
    for z in (0..n).filter(|&z| !eligible[z] && !trivial[z]) {
        let (cols, vals) = a.row(z);
        let small = 1e-10 * vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (&u, &v) in cols.iter().zip(vals) {
            if v.abs() > small && eligible[u] && a.get(u, z).abs() > small {
                waiting[u].push(z);
                pending[z] += 1;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).filter(|&i| trivial[i]).collect();
    let mut done = trivial;
    let mut queue: BTreeSet<(usize, usize)> = (0..n).filter(|&i| eligible[i] && !done[i]).map(|i| (adj[i].len(), i)).collect();
    let mut scratch = Vec::new();
    loop {
        let v = match queue.pop_first() {
            Some((_, v)) => v,
            // only structurally singular leftovers remain
            None => match (0..n).find(|&i| !done[i]) {
                Some(v) => v,
                None => break,
            },
        };
        done[v] = true;
        order.push(v);
        for &z in &waiting[v] {
            pending[z] -= 1;
        }
        let nbrs = core::mem::take(&mut adj[v]);
        for &u in &nbrs {
            if eligible[u] {
                queue.remove(&(adj[u].len(), u));
            }
            scratch.clear();
            merge_excluding(&adj[u], &nbrs, v, u, &mut scratch);
            core::mem::swap(&mut adj[u], &mut scratch);
            if pending[u] == 0 {
                eligible[u] = true;
                queue.insert((adj[u].len(), u));
            }
        }
        for &z in &waiting[v] {
            if pending[z] == 0 && !eligible[z] && !done[z] {
                eligible[z] = true;
                queue.insert((adj[z].len(), z));
            }
        }
    }
    order
}

/// Sorted union of `a` and `b` without `skip_a` and `skip_b`.
fn merge_excluding(a: &[usize], b: &[usize], skip_a: usize, skip_b: usize, out: &mut Vec<usize>) {
    let (mut i, mut j) = (0, 0);
    let push = |x: usize, out: &mut Vec<usize>| {
        if x != skip_a && x != skip_b {
            out.push(x);
        }
    };
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => {
                push(a[i], out);
                i += 1;
            }
            core::cmp::Ordering::Greater => {
                push(b[j], out);
                j += 1;
            }
            core::cmp::Ordering::Equal => {
                push(a[i], out);
                i += 1;
                j += 1;
            }
        }
    }
    for &x in &a[i..] {
        push(x, out);
    }
    for &x in &b[j..] {
        push(x, out);
    }
}
