use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};

use super::{Key, Outcome, SearchLimits, SearchSpace};
use crate::money::Money;

struct Node<S, A> {
    state: S,
    parent: Option<usize>,
    action: Option<A>,
    g: Key,
}

/// Frontier entry: `(f_fee, f_len, h_fee, seq)` reversed for a min-heap.
type FrontierKey = Reverse<(Money, usize, Money, u64, usize)>;

/// Best-first search on `(g + h_fee, len + h_count)`.
///
/// A state reached again by a lexicographically cheaper path is re-queued and,
/// if it was already expanded, counted as reopened. Stale heap entries are
/// skipped. The search gives up, without a plan, once the successor budget is
/// spent.
pub fn astar<P: SearchSpace>(space: &P, limits: SearchLimits) -> Outcome<P::Action> {
    let mut nodes: Vec<Node<P::State, P::Action>> = Vec::new();
    // Best known g and the node carrying it, per state.
    let mut best: HashMap<P::State, (Key, usize)> = HashMap::new();
    let mut closed: HashMap<P::State, Key> = HashMap::new();
    let mut heap: BinaryHeap<FrontierKey> = BinaryHeap::new();
    let mut seq = 0u64;
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

    let root = space.initial();
    let h0 = space.h_fee(&root);
    heap.push(Reverse((h0, space.h_count(&root), h0, seq, 0)));
    best.insert(root.clone(), ((Money::ZERO, 0), 0));
    nodes.push(Node { state: root, parent: None, action: None, g: (Money::ZERO, 0) });

    while let Some(Reverse((_, _, _, _, id))) = heap.pop() {
        let g = nodes[id].g;
        if best.get(&nodes[id].state).map(|&(_, n)| n) != Some(id) {
            continue;
        }
        if space.is_goal(&nodes[id].state) {
            let actions = reconstruct(&nodes, id);
            out.cost = g.0;
            out.first_solution =
                Some(super::FirstSolution { cost: g.0, length: g.1, generated_nodes: out.generated_nodes });
            out.incumbents.push(g);
            out.actions = Some(actions);
            out.optimal = true;
            return out;
        }
        if out.generated_nodes >= limits.max_generated_nodes {
            return out;
        }
        match closed.entry(nodes[id].state.clone()) {
            Entry::Occupied(mut e) => {
                out.reopened_nodes += 1;
                e.insert(g);
            }
            Entry::Vacant(e) => {
                e.insert(g);
            }
        }
        out.expanded_nodes += 1;
        if limits.max_depth.is_some_and(|d| g.1 >= d) {
            continue;
        }

        let mut children = Vec::new();
        space.expand(&nodes[id].state, &mut |a, c, s| children.push((a, c, s)));
        for (action, cost, state) in children {
            out.generated_nodes += 1;
            let g2 = (g.0 + cost, g.1 + 1);
            if let Some(&(known, _)) = best.get(&state) {
                if known <= g2 {
                    continue;
                }
            }
            let hf = space.h_fee(&state);
            let hc = space.h_count(&state);
            if limits.max_depth.is_some_and(|d| g2.1 + hc > d) {
                continue;
            }
            let child = nodes.len();
            best.insert(state.clone(), (g2, child));
            nodes.push(Node { state, parent: Some(id), action: Some(action), g: g2 });
            seq += 1;
            heap.push(Reverse((g2.0 + hf, g2.1 + hc, hf, seq, child)));
        }
    }
    // Frontier exhausted without reaching the goal: provably no plan.
    out.optimal = out.generated_nodes < limits.max_generated_nodes;
    out
}

fn reconstruct<S, A: Clone>(nodes: &[Node<S, A>], mut id: usize) -> Vec<A> {
    let mut actions = Vec::new();
    while let Some(p) = nodes[id].parent {
        actions.push(nodes[id].action.clone().expect("non-root node has an action"));
        id = p;
    }
    actions.reverse();
    actions
}
