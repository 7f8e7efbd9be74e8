//! Transportation simplex: Vogel start, MODI pricing, Bland pivoting.

use std::collections::VecDeque;

use super::{FlowMatrix, Rate, TransportInstance};
use crate::error::{Error, Result};
use crate::money::Money;

/// A basic solution: exactly `m + n - 1` cells forming a spanning tree.
struct Basis {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    amount: Vec<Vec<Money>>,
    basic: Vec<Vec<bool>>,
}

/// Exact optimal vertex of a balanced instance.
pub fn solve_transport(inst: &TransportInstance) -> Result<FlowMatrix> {
    inst.check()?;
    let (m, n) = (inst.rows(), inst.cols());
    if m == 0 || n == 0 {
        return Ok(FlowMatrix::default());
    }
    let cost = inst.effective_costs();
    let mut basis = vogel(inst, &cost);
    // Bland's rule terminates; the cap only guards against a logic error.
    let max_pivots = 50 * (m * n + 1) * (m + n);
    let mut pivots = 0;
    while let Some((ei, ej)) = entering(&basis, &cost) {
        pivot(&mut basis, ei, ej)?;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Transport("pivot limit exceeded".into()));
        }
    }
    let amounts = basis.cells.iter().map(|&(i, j)| (i, j, basis.amount[i][j]));
    let flows = FlowMatrix::from_amounts(inst, amounts);
    if !flows.matches_marginals(inst) {
        return Err(Error::Transport("solution violates marginals".into()));
    }
    Ok(flows)
}

fn vogel(inst: &TransportInstance, cost: &[Vec<Rate>]) -> Basis {
    let (m, n) = (inst.rows(), inst.cols());
    let mut supply: Vec<Money> = inst.supplies.iter().map(|s| s.1).collect();
    let mut demand: Vec<Money> = inst.demands.iter().map(|d| d.1).collect();
    let mut row_alive = vec![true; m];
    let mut col_alive = vec![true; n];
    let (mut rows_left, mut cols_left) = (m, n);
    let mut basis = Basis {
        m,
        n,
        cells: Vec::with_capacity(m + n - 1),
        amount: vec![vec![Money::ZERO; n]; m],
        basic: vec![vec![false; n]; m],
    };

    // Penalty of a line: gap between its two cheapest live cells.
    let penalty = |line: &mut dyn Iterator<Item = Rate>| -> Option<Rate> {
        let (mut a, mut b): (Option<Rate>, Option<Rate>) = (None, None);
        for c in line {
            if a.is_none_or(|x| c < x) {
                b = a;
                a = Some(c);
            } else if b.is_none_or(|x| c < x) {
                b = Some(c);
            }
        }
        a.map(|x| b.map_or(x, |y| y - x))
    };

    while rows_left > 0 && cols_left > 0 {
        // Line with the largest penalty; rows before columns, lower index first.
        let mut best: Option<(Rate, bool, usize)> = None;
        for i in (0..m).filter(|&i| row_alive[i]) {
            let p = penalty(&mut (0..n).filter(|&j| col_alive[j]).map(|j| cost[i][j])).unwrap();
            if best.is_none_or(|(bp, _, _)| p > bp) {
                best = Some((p, true, i));
            }
        }
        for j in (0..n).filter(|&j| col_alive[j]) {
            let p = penalty(&mut (0..m).filter(|&i| row_alive[i]).map(|i| cost[i][j])).unwrap();
            if best.is_none_or(|(bp, _, _)| p > bp) {
                best = Some((p, false, j));
            }
        }
        let (_, is_row, k) = best.expect("a live line exists");
        let (i, j) = if is_row {
            let j = (0..n).filter(|&j| col_alive[j]).min_by_key(|&j| (cost[k][j], j)).unwrap();
            (k, j)
        } else {
            let i = (0..m).filter(|&i| row_alive[i]).min_by_key(|&i| (cost[i][k], i)).unwrap();
            (i, k)
        };
        let q = supply[i].min(demand[j]);
        basis.amount[i][j] = q;
        basis.basic[i][j] = true;
        basis.cells.push((i, j));
        supply[i] -= q;
        demand[j] -= q;
        // Cross out exactly one line per allocation, except the very last,
        // so the basis ends with m + n - 1 cells.
        if rows_left == 1 && cols_left == 1 {
            row_alive[i] = false;
            col_alive[j] = false;
            rows_left = 0;
            cols_left = 0;
        } else if supply[i].is_zero() && rows_left > 1 {
            row_alive[i] = false;
            rows_left -= 1;
        } else {
            col_alive[j] = false;
            cols_left -= 1;
        }
    }
    debug_assert_eq!(basis.cells.len(), m + n - 1);
    basis
}

/// Row and column potentials with `u_i + v_j = c_ij` on basic cells, `u_0 = 0`.
fn potentials(b: &Basis, cost: &[Vec<Rate>]) -> (Vec<Rate>, Vec<Rate>) {
    let (m, n) = (b.m, b.n);
    let mut u: Vec<Option<Rate>> = vec![None; m];
    let mut v: Vec<Option<Rate>> = vec![None; n];
    u[0] = Some(Rate::from_integer(0));
    let mut queue = VecDeque::from([(true, 0usize)]);
    while let Some((is_row, k)) = queue.pop_front() {
        if is_row {
            let ui = u[k].unwrap();
            for j in 0..n {
                if b.basic[k][j] && v[j].is_none() {
                    v[j] = Some(cost[k][j] - ui);
                    queue.push_back((false, j));
                }
            }
        } else {
            let vj = v[k].unwrap();
            for i in 0..m {
                if b.basic[i][k] && u[i].is_none() {
                    u[i] = Some(cost[i][k] - vj);
                    queue.push_back((true, i));
                }
            }
        }
    }
    (
        u.into_iter().map(|x| x.expect("basis spans all rows")).collect(),
        v.into_iter().map(|x| x.expect("basis spans all columns")).collect(),
    )
}

/// Smallest-index non-basic cell with negative reduced cost.
fn entering(b: &Basis, cost: &[Vec<Rate>]) -> Option<(usize, usize)> {
    let (u, v) = potentials(b, cost);
    for i in 0..b.m {
        for j in 0..b.n {
            if !b.basic[i][j] && cost[i][j] - u[i] - v[j] < Rate::from_integer(0) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Tree path of basic cells from column `ej` back to row `ei`.
fn tree_path(b: &Basis, ei: usize, ej: usize) -> Result<Vec<(usize, usize)>> {
    let (m, n) = (b.m, b.n);
    // Nodes 0..m are rows, m..m+n columns.
    let mut parent: Vec<Option<usize>> = vec![None; m + n];
    let mut seen = vec![false; m + n];
    let mut queue = VecDeque::from([ei]);
    seen[ei] = true;
    while let Some(node) = queue.pop_front() {
        if node == m + ej {
            break;
        }
        let nbrs: Vec<usize> = if node < m {
            (0..n).filter(|&j| b.basic[node][j]).map(|j| m + j).collect()
        } else {
            (0..m).filter(|&i| b.basic[i][node - m]).collect()
        };
        for nb in nbrs {
            if !seen[nb] {
                seen[nb] = true;
                parent[nb] = Some(node);
                queue.push_back(nb);
            }
        }
    }
    if !seen[m + ej] {
        return Err(Error::Transport("basis is not a spanning tree".into()));
    }
    let mut path = Vec::new();
    let mut node = m + ej;
    while let Some(p) = parent[node] {
        let cell = if node < m { (node, p - m) } else { (p, node - m) };
        path.push(cell);
        node = p;
    }
    Ok(path)
}

fn pivot(b: &mut Basis, ei: usize, ej: usize) -> Result<()> {
    // Cycle: entering (+), then the tree path from its column back to its row,
    // alternating signs starting with (-).
    let path = tree_path(b, ei, ej)?;
    let minus: Vec<(usize, usize)> = path.iter().copied().step_by(2).collect();
    let plus: Vec<(usize, usize)> = path.iter().copied().skip(1).step_by(2).collect();
    let theta = minus.iter().map(|&(i, j)| b.amount[i][j]).min().expect("cycle has a minus cell");
    let leaving = *minus.iter().filter(|&&(i, j)| b.amount[i][j] == theta).min_by_key(|&&(i, j)| i * b.n + j).unwrap();
    for &(i, j) in &minus {
        b.amount[i][j] -= theta;
    }
    for &(i, j) in &plus {
        b.amount[i][j] += theta;
    }
    b.amount[ei][ej] = theta;
    b.basic[ei][ej] = true;
    b.basic[leaving.0][leaving.1] = false;
    let pos = b.cells.iter().position(|&c| c == leaving).unwrap();
    b.cells[pos] = (ei, ej);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{CellMode, Endpoint};

    fn inst(s: &[i64], d: &[i64], c: &[&[i64]]) -> TransportInstance {
        TransportInstance::new(
            s.iter().map(|&x| (Endpoint::Cash, Money(x))).collect(),
            d.iter().map(|&x| (Endpoint::Cash, Money(x))).collect(),
            c.iter().map(|r| r.iter().map(|&x| Rate::from_integer(x as i128)).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn textbook_three_by_four() {
        // Classic example with optimum 743.
        let i = inst(&[7, 9, 18], &[5, 8, 7, 14], &[&[19, 30, 50, 10], &[70, 30, 40, 60], &[40, 8, 70, 20]]);
        let f = solve_transport(&i).unwrap();
        assert_eq!(i.objective(&f), Rate::from_integer(743));
        assert!(f.matches_marginals(&i));
        assert!(f.cells.len() <= 6);
    }

    #[test]
    fn one_by_one() {
        let i = inst(&[42], &[42], &[&[3]]);
        let f = solve_transport(&i).unwrap();
        assert_eq!(f.cells.len(), 1);
        assert_eq!(f.cells[0].amount, Money(42));
    }

    #[test]
    fn degenerate_equal_marginals() {
        let i = inst(&[5, 5], &[5, 5], &[&[1, 2], &[2, 1]]);
        let f = solve_transport(&i).unwrap();
        assert_eq!(i.objective(&f), Rate::from_integer(10));
        assert_eq!(f.cells.len(), 2);
    }

    #[test]
    fn forbidden_cell_is_avoided() {
        let mut i = inst(&[5, 5], &[5, 5], &[&[0, 9], &[9, 9]]);
        i.forbid(0, 0);
        let f = solve_transport(&i).unwrap();
        assert_eq!(f.amount(0, 0), Money::ZERO);
        assert!(f.cells.iter().all(|c| c.mode != CellMode::Forbidden));
    }

    #[test]
    fn zero_rows_are_fine() {
        let i = inst(&[0, 4], &[4, 0], &[&[1, 1], &[1, 1]]);
        let f = solve_transport(&i).unwrap();
        assert!(f.matches_marginals(&i));
    }
}
