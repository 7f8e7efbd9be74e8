//! Brute-force reference optimum for small transportation instances.

use super::{Rate, TransportInstance};
use crate::money::Money;

/// Minimum objective over every basic feasible solution, by enumerating all
/// spanning trees of `m + n - 1` cells. Exponential; intended for `m + n ≤ 8`.
///
/// Uses the same big-M pricing of forbidden cells as the solver.
pub fn vertex_minimum(inst: &TransportInstance) -> Option<Rate> {
    let (m, n) = (inst.rows(), inst.cols());
    if m == 0 || n == 0 {
        return Some(Rate::from_integer(0));
    }
    let cost = inst.effective_costs();
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut best: Option<Rate> = None;
    let mut pick = Vec::with_capacity(k);
    combinations(cells.len(), k, 0, &mut pick, &mut |subset| {
        let chosen: Vec<(usize, usize)> = subset.iter().map(|&c| cells[c]).collect();
        if let Some(amounts) = tree_solution(inst, &chosen) {
            let z: Rate =
                chosen.iter().zip(&amounts).map(|(&(i, j), a)| cost[i][j] * Rate::from_integer(a.0 as i128)).sum();
            if best.is_none_or(|b| z < b) {
                best = Some(z);
            }
        }
    });
    best
}

fn combinations(total: usize, k: usize, start: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    let need = k - pick.len();
    for c in start..=total.saturating_sub(need) {
        pick.push(c);
        combinations(total, k, c + 1, pick, f);
        pick.pop();
    }
}

/// Unique flows on a spanning tree of cells, if the cells form one and all
/// flows are non-negative.
fn tree_solution(inst: &TransportInstance, cells: &[(usize, usize)]) -> Option<Vec<Money>> {
    let (m, n) = (inst.rows(), inst.cols());
    let mut parent: Vec<usize> = (0..m + n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &(i, j) in cells {
        let (a, b) = (find(&mut parent, i), find(&mut parent, m + j));
        if a == b {
            return None;
        }
        parent[a] = b;
    }

    let mut rest: Vec<Money> = inst.supplies.iter().map(|s| s.1).chain(inst.demands.iter().map(|d| d.1)).collect();
    let mut degree = vec![0usize; m + n];
    for &(i, j) in cells {
        degree[i] += 1;
        degree[m + j] += 1;
    }
    let mut amount: Vec<Option<Money>> = vec![None; cells.len()];
    for _ in 0..cells.len() {
        let (idx, leaf) = cells.iter().enumerate().filter(|(e, _)| amount[*e].is_none()).find_map(|(e, &(i, j))| {
            if degree[i] == 1 {
                Some((e, i))
            } else if degree[m + j] == 1 {
                Some((e, m + j))
            } else {
                None
            }
        })?;
        let (i, j) = cells[idx];
        let other = if leaf == i { m + j } else { i };
        let a = rest[leaf];
        if a < Money::ZERO {
            return None;
        }
        amount[idx] = Some(a);
        rest[leaf] = Money::ZERO;
        rest[other] -= a;
        degree[i] -= 1;
        degree[m + j] -= 1;
    }
    if rest.iter().any(|r| !r.is_zero()) {
        return None;
    }
    amount.into_iter().collect()
}
