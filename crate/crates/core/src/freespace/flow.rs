//! Successive-shortest-path min-cost flow on the complete directed graph of a
//! small node set, with uncapacitated forward arcs and exact rational data.

use num_traits::{Signed, Zero};

use crate::rational::Q;

#[derive(Debug, Clone)]
pub(crate) struct FlowSolution {
    pub cost: Q,
    /// `(from, to, amount)` with positive amounts, indices into the node list.
    pub flows: Vec<(usize, usize, Q)>,
    /// Node potentials `phi` with `phi(i) - phi(j) <= cost(i, j)` for all
    /// pairs and equality on every arc carrying flow.
    pub potential: Vec<Q>,
}

/// Minimum-cost transshipment for the given node excesses (summing to zero)
/// and a symmetric nonnegative cost matrix.
pub(crate) fn min_cost_transshipment(cost: &[Vec<Q>], excess: &[Q]) -> FlowSolution {
    let n = excess.len();
    debug_assert!(excess.iter().fold(Q::zero(), |a, b| a + b).is_zero());
    let mut excess = excess.to_vec();
    let mut flow = vec![vec![Q::zero(); n]; n];

    loop {
        let sources: Vec<usize> = (0..n).filter(|&i| excess[i].is_positive()).collect();
        if sources.is_empty() {
            break;
        }
        let (dist, pred) = shortest_paths(cost, &flow, &sources);
        let sink = (0..n)
            .filter(|&i| excess[i].is_negative())
            .filter_map(|i| dist[i].as_ref().map(|d| (d.clone(), i)))
            .min()
            .map(|(_, i)| i)
            .expect("forward arcs are uncapacitated, every deficit is reachable");

        let mut path = vec![sink];
        let mut v = sink;
        while let Some(u) = pred[v] {
            path.push(u);
            v = u;
        }
        path.reverse();
        let source = path[0];

        let mut amount = excess[source].clone().min(-excess[sink].clone());
        for w in path.windows(2) {
            let (u, v) = (w[0], w[1]);
            // A backward arc is used whenever it cancels existing flow.
            if flow[v][u].is_positive() {
                amount = amount.min(flow[v][u].clone());
            }
        }
        for w in path.windows(2) {
            let (u, v) = (w[0], w[1]);
            if flow[v][u].is_positive() {
                flow[v][u] -= &amount;
            } else {
                flow[u][v] += &amount;
            }
        }
        excess[source] -= &amount;
        excess[sink] += &amount;
    }

    let mut total = Q::zero();
    let mut flows = Vec::new();
    for (i, row) in flow.iter().enumerate() {
        for (j, f) in row.iter().enumerate() {
            if f.is_positive() {
                total += f * &cost[i][j];
                flows.push((i, j, f.clone()));
            }
        }
    }
    let all: Vec<usize> = (0..n).collect();
    let (dist, _) = shortest_paths(cost, &flow, &all);
    let potential = dist.into_iter().map(|d| -d.expect("all nodes are sources")).collect();
    FlowSolution {
        cost: total,
        flows,
        potential,
    }
}

// Residual arc u->v is the reverse of flow on v->u (cost -c) when that
// flow exists, since it is never worse than the forward arc (cost c).
fn arc_cost(cost: &[Vec<Q>], flow: &[Vec<Q>], u: usize, v: usize) -> Q {
    if flow[v][u].is_positive() {
        -cost[v][u].clone()
    } else {
        cost[u][v].clone()
    }
}

/// Bellman-Ford from a set of zero-distance sources over the residual graph.
fn shortest_paths(cost: &[Vec<Q>], flow: &[Vec<Q>], sources: &[usize]) -> (Vec<Option<Q>>, Vec<Option<usize>>) {
    let n = cost.len();
    let mut dist: Vec<Option<Q>> = vec![None; n];
    let mut pred = vec![None; n];
    for &s in sources {
        dist[s] = Some(Q::zero());
    }
    for _ in 0..n {
        let mut changed = false;
        for u in 0..n {
            let Some(du) = dist[u].clone() else { continue };
            for v in 0..n {
                if u == v {
                    continue;
                }
                let cand = &du + arc_cost(cost, flow, u, v);
                if dist[v].as_ref().is_none_or(|dv| cand < *dv) {
                    dist[v] = Some(cand);
                    pred[v] = Some(u);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (dist, pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;

    #[test]
    fn two_node_transport() {
        let cost = vec![vec![qi(0), qi(3)], vec![qi(3), qi(0)]];
        let sol = min_cost_transshipment(&cost, &[qi(2), qi(-2)]);
        assert_eq!(sol.cost, qi(6));
        assert_eq!(&sol.potential[0] - &sol.potential[1], qi(3));
    }

    #[test]
    fn prefers_cheaper_assignment() {
        // supplies at positions 0 and 3, demands at 1 and 4 on a line
        let pos = [0i64, 3, 1, 4];
        let cost: Vec<Vec<Q>> = pos
            .iter()
            .map(|a| pos.iter().map(|b| qi((a - b).abs())).collect())
            .collect();
        let sol = min_cost_transshipment(&cost, &[qi(1), qi(1), qi(-1), qi(-1)]);
        assert_eq!(sol.cost, qi(2));
    }
}
