use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{undirected_pairs, Partition};
use crate::error::{Error, Result};
use crate::graph::{ConceptGraph, NodeId};

const MIN_GAIN: f64 = 1e-12;

/// Weighted undirected graph for one aggregation level.
struct Level {
    adj: Vec<BTreeMap<usize, f64>>,
    self_loops: Vec<f64>,
    degree: Vec<f64>,
}

impl Level {
    fn new(adj: Vec<BTreeMap<usize, f64>>, self_loops: Vec<f64>) -> Self {
        let degree = adj
            .iter()
            .zip(&self_loops)
            .map(|(nbrs, s)| nbrs.values().sum::<f64>() + 2.0 * s)
            .collect();
        Self {
            adj,
            self_loops,
            degree,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Moves single nodes between communities until no move gains modularity.
    /// Returns whether anything moved.
    fn local_moves(&self, community: &mut [usize], m: f64, resolution: f64, rng: &mut ChaCha8Rng) -> bool {
        let n = self.len();
        let mut totals = vec![0.0; n];
        for i in 0..n {
            totals[community[i]] += self.degree[i];
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut moved_any = false;
        loop {
            let mut moved = false;
            for &i in &order {
                let ki = self.degree[i];
                let current = community[i];
                totals[current] -= ki;
                let mut links: BTreeMap<usize, f64> = BTreeMap::new();
                for (&j, &w) in &self.adj[i] {
                    *links.entry(community[j]).or_default() += w;
                }
                let gain = |c: usize, w: f64| w - resolution * totals[c] * ki / (2.0 * m);
                let mut best = current;
                let mut best_gain = gain(current, links.get(&current).copied().unwrap_or(0.0));
                for (&c, &w) in &links {
                    let g = gain(c, w);
                    if g > best_gain + MIN_GAIN {
                        best = c;
                        best_gain = g;
                    }
                }
                totals[best] += ki;
                if best != current {
                    community[i] = best;
                    moved = true;
                    moved_any = true;
                }
            }
            if !moved {
                return moved_any;
            }
        }
    }

    fn aggregate(&self, community: &[usize]) -> (Level, Vec<usize>) {
        let mut dense: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in community {
            let next = dense.len();
            dense.entry(c).or_insert(next);
        }
        let k = dense.len();
        let map: Vec<usize> = community.iter().map(|c| dense[c]).collect();
        let mut adj = vec![BTreeMap::new(); k];
        let mut self_loops = vec![0.0; k];
        for i in 0..self.len() {
            self_loops[map[i]] += self.self_loops[i];
            for (&j, &w) in &self.adj[i] {
                if map[i] == map[j] {
                    // Each internal pair is seen from both ends.
                    self_loops[map[i]] += w / 2.0;
                } else {
                    *adj[map[i]].entry(map[j]).or_insert(0.0) += w;
                }
            }
        }
        (Level::new(adj, self_loops), map)
    }
}

/// Sweep-order restarts; the best-modularity result wins.
const RESTARTS: usize = 32;

/// Louvain community detection on the undirected symmetrization.
///
/// Each restart shuffles the sweep order at every level from a generator
/// seeded by `seed`. Once aggregation stops improving, the partition is
/// polished on the original graph by single-node moves and greedy community
/// merges until neither raises modularity, so the result is a local optimum
/// under single-node moves.
pub fn louvain(graph: &ConceptGraph, resolution: f64, seed: u64) -> Result<Partition> {
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if resolution.is_nan() || resolution <= 0.0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let ids: Vec<NodeId> = graph.node_ids().collect();
    let index: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let pairs = undirected_pairs(graph);
    if pairs.is_empty() {
        return Ok(Partition::singletons(graph));
    }
    let m = pairs.len() as f64;
    let mut adj = vec![BTreeMap::new(); ids.len()];
    for (a, b) in pairs {
        adj[index[&a]].insert(index[&b], 1.0);
        adj[index[&b]].insert(index[&a], 1.0);
    }
    let base = Level::new(adj, vec![0.0; ids.len()]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..RESTARTS {
        let membership = run_once(&base, m, resolution, &mut rng);
        let q = base.modularity(&membership, m, resolution);
        if best.as_ref().is_none_or(|(bq, _)| q > bq + MIN_GAIN) {
            best = Some((q, membership));
        }
    }
    let (_, membership) = best.expect("at least one restart");
    Ok(Partition::from_labels(
        ids.iter().copied().zip(membership.iter().copied()),
    ))
}

fn run_once(base: &Level, m: f64, resolution: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    // membership[i] = community of original node i at the current level.
    let mut membership: Vec<usize> = (0..base.len()).collect();
    let mut level = Level::new(base.adj.clone(), base.self_loops.clone());
    loop {
        let mut community: Vec<usize> = (0..level.len()).collect();
        if !level.local_moves(&mut community, m, resolution, rng) {
            break;
        }
        let (next, map) = level.aggregate(&community);
        for c in membership.iter_mut() {
            *c = map[*c];
        }
        if next.len() == level.len() {
            break;
        }
        level = next;
    }
    loop {
        let moved = base.local_moves(&mut membership, m, resolution, rng);
        let merged = base.merge_communities(&mut membership, m, resolution);
        if moved || merged {
            continue;
        }
        if !base.isolate_and_resettle(&mut membership, m, resolution, rng) {
            return membership;
        }
    }
}

impl Level {
    fn modularity(&self, community: &[usize], m: f64, resolution: f64) -> f64 {
        let n = self.len();
        let mut internal = vec![0.0; n];
        let mut totals = vec![0.0; n];
        for i in 0..n {
            totals[community[i]] += self.degree[i];
            internal[community[i]] += self.self_loops[i];
            for (&j, &w) in &self.adj[i] {
                if community[j] == community[i] {
                    internal[community[i]] += w / 2.0;
                }
            }
        }
        (0..n)
            .map(|c| internal[c] / m - resolution * (totals[c] / (2.0 * m)).powi(2))
            .sum()
    }

    /// Perturbation step: moves a single node, or an adjacent pair, into an
    /// empty community, lets everything resettle, and keeps the first attempt
    /// that strictly raises modularity.
    fn isolate_and_resettle(&self, community: &mut Vec<usize>, m: f64, resolution: f64, rng: &mut ChaCha8Rng) -> bool {
        let current = self.modularity(community, m, resolution);
        let groups = (0..self.len())
            .map(|v| vec![v])
            .chain((0..self.len()).flat_map(|v| {
                self.adj[v].keys().filter(move |&&w| w > v).map(move |&w| vec![v, w])
            }));
        for group in groups {
            let used: std::collections::BTreeSet<usize> = community.iter().copied().collect();
            let Some(free) = (0..self.len()).find(|c| !used.contains(c)) else {
                return false;
            };
            let mut trial = community.clone();
            for &v in &group {
                trial[v] = free;
            }
            self.local_moves(&mut trial, m, resolution, rng);
            self.merge_communities(&mut trial, m, resolution);
            if self.modularity(&trial, m, resolution) > current + MIN_GAIN {
                *community = trial;
                return true;
            }
        }
        false
    }

    /// Repeatedly merges the pair of communities with the largest positive
    /// modularity gain. Returns whether anything merged.
    fn merge_communities(&self, community: &mut [usize], m: f64, resolution: f64) -> bool {
        let mut merged_any = false;
        loop {
            let mut totals: BTreeMap<usize, f64> = BTreeMap::new();
            let mut between: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for i in 0..self.len() {
                *totals.entry(community[i]).or_default() += self.degree[i];
                for (&j, &w) in &self.adj[i] {
                    let (a, b) = (community[i], community[j]);
                    if a < b {
                        *between.entry((a, b)).or_default() += w;
                    }
                }
            }
            let mut best: Option<((usize, usize), f64)> = None;
            for (&(a, b), &w) in &between {
                let gain = w / m - resolution * totals[&a] * totals[&b] / (2.0 * m * m);
                if gain > MIN_GAIN && best.is_none_or(|(_, g)| gain > g + MIN_GAIN) {
                    best = Some(((a, b), gain));
                }
            }
            let Some(((a, b), _)) = best else {
                return merged_any;
            };
            for c in community.iter_mut() {
                if *c == b {
                    *c = a;
                }
            }
            merged_any = true;
        }
    }
}
