use std::collections::HashMap;

use super::{FirstSolution, Key, Outcome, SearchSpace};
use crate::money::Money;

struct Frame<S, A> {
    g: Key,
    children: Vec<(A, Money, S)>,
    next: usize,
}

/// Depth-first branch and bound with an anytime incumbent.
///
/// Nodes are pruned when `(g + h_fee, len + h_count)` cannot beat the incumbent
/// or when the length bound exceeds `depth_limit`. A transposition table keeps,
/// per state, the Pareto front of `(cost, len)` pairs already explored, and any
/// revisit dominated by one of them is cut. The result is optimal among plans
/// of at most `depth_limit` actions when the search finishes within budget.
pub fn dfbnb_search<P: SearchSpace>(space: &P, max_generated: u64, depth_limit: usize) -> Outcome<P::Action> {
    let mut out = Outcome {
        actions: None,
        cost: Money::ZERO,
        optimal: false,
        generated_nodes: 0,
        expanded_nodes: 0,
        reopened_nodes: 0,
        first_solution: None,
        incumbents: Vec::new(),
    };
    let mut incumbent: Option<Key> = None;
    let mut table: HashMap<P::State, Vec<Key>> = HashMap::new();
    let mut path: Vec<P::Action> = Vec::new();
    let mut stack: Vec<Frame<P::State, P::Action>> = Vec::new();

    let root = space.initial();
    let mut pending: Option<(P::State, Key)> = Some((root, (Money::ZERO, 0)));

    loop {
        if let Some((state, g)) = pending.take() {
            if let Some(frame) = visit(space, state, g, depth_limit, &mut incumbent, &mut table, &path, &mut out) {
                stack.push(frame);
            } else if !stack.is_empty() {
                path.pop();
            }
        }
        if out.generated_nodes >= max_generated {
            // Budget spent: report the incumbent without an optimality claim.
            return out;
        }
        let Some(top) = stack.last_mut() else { break };
        if top.next < top.children.len() {
            let i = top.next;
            top.next += 1;
            let (action, cost, state) = top.children[i].clone();
            let g = (top.g.0 + cost, top.g.1 + 1);
            path.push(action);
            pending = Some((state, g));
        } else {
            stack.pop();
            if !stack.is_empty() {
                path.pop();
            }
        }
    }
    out.optimal = true;
    out
}

/// Handles a newly entered node. Returns a frame when it must be expanded.
#[allow(clippy::too_many_arguments)]
fn visit<P: SearchSpace>(
    space: &P,
    state: P::State,
    g: Key,
    depth_limit: usize,
    incumbent: &mut Option<Key>,
    table: &mut HashMap<P::State, Vec<Key>>,
    path: &[P::Action],
    out: &mut Outcome<P::Action>,
) -> Option<Frame<P::State, P::Action>> {
    if space.is_goal(&state) {
        if incumbent.is_none_or(|inc| g < inc) {
            *incumbent = Some(g);
            out.actions = Some(path.to_vec());
            out.cost = g.0;
            out.incumbents.push(g);
            if out.first_solution.is_none() {
                out.first_solution =
                    Some(FirstSolution { cost: g.0, length: g.1, generated_nodes: out.generated_nodes });
            }
        }
        return None;
    }
    let hc = space.h_count(&state);
    if g.1 + hc > depth_limit {
        return None;
    }
    let f = (g.0 + space.h_fee(&state), g.1 + hc);
    if incumbent.is_some_and(|inc| f >= inc) {
        return None;
    }
    let front = table.entry(state.clone()).or_default();
    if front.iter().any(|&(c, l)| c <= g.0 && l <= g.1) {
        return None;
    }
    front.retain(|&(c, l)| !(g.0 <= c && g.1 <= l));
    front.push(g);

    let mut children = Vec::new();
    space.expand(&state, &mut |a, c, s| children.push((a, c, s)));
    out.generated_nodes += children.len() as u64;
    out.expanded_nodes += 1;
    space.order_for_dive(&mut children);
    Some(Frame { g, children, next: 0 })
}
