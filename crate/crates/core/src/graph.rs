//! Contention graphs and their feasible transmission states.
//!
//! Links are indexed from 0 internally. Anything that crosses the library
//! boundary (edge lists, error messages, serialized sets) uses 1-based labels.

use std::collections::VecDeque;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest number of links a graph may hold (one bit per link).
pub const MAX_LINKS: usize = 64;

/// Default ceiling on the number of enumerated independent sets.
pub const DEFAULT_STATE_CAP: usize = 4_194_304;

/// A set of links stored as a 64-bit mask, bit `i` for link index `i`.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkSet(u64);

/// A system state: the set of links transmitting at one instant.
pub type LinkState = LinkSet;

impl LinkSet {
    pub const EMPTY: LinkSet = LinkSet(0);

    pub fn from_bits(bits: u64) -> Self {
        LinkSet(bits)
    }

    /// All links `0..n`.
    pub fn full(n: usize) -> Self {
        match n {
            0 => LinkSet(0),
            MAX_LINKS => LinkSet(u64::MAX),
            _ => LinkSet((1u64 << n) - 1),
        }
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, link: usize) -> bool {
        link < MAX_LINKS && self.0 & (1u64 << link) != 0
    }

    pub fn insert(&mut self, link: usize) {
        self.0 |= 1u64 << link;
    }

    pub fn remove(&mut self, link: usize) {
        self.0 &= !(1u64 << link);
    }

    pub fn with(self, link: usize) -> Self {
        LinkSet(self.0 | (1u64 << link))
    }

    pub fn toggled(self, link: usize) -> Self {
        LinkSet(self.0 ^ (1u64 << link))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: LinkSet) -> Self {
        LinkSet(self.0 | other.0)
    }

    pub fn difference(self, other: LinkSet) -> Self {
        LinkSet(self.0 & !other.0)
    }

    pub fn intersects(self, other: LinkSet) -> bool {
        self.0 & other.0 != 0
    }

    /// Member link indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    /// Member labels, 1-based.
    pub fn labels(self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }
}

impl FromIterator<usize> for LinkSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut set = LinkSet::EMPTY;
        for i in iter {
            set.insert(i);
        }
        set
    }
}

impl fmt::Debug for LinkSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LinkSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, label) in self.labels().into_iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{label}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for LinkSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.labels())
    }
}

/// Links as vertices, carrier-sensing pairs as edges.
#[derive(Clone, PartialEq, Eq)]
pub struct ContentionGraph {
    adjacency: Vec<LinkSet>,
}

impl ContentionGraph {
    /// Builds a graph from 1-based edge pairs. Duplicate edges collapse.
    pub fn new(num_links: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if num_links == 0 {
            return Err(Error::NoLinks);
        }
        if num_links > MAX_LINKS {
            return Err(Error::TooManyLinks(num_links));
        }
        let mut adjacency = vec![LinkSet::EMPTY; num_links];
        for &(u, v) in edges {
            for index in [u, v] {
                if index == 0 || index > num_links {
                    return Err(Error::IndexOutOfRange { index, num_links });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            adjacency[u - 1].insert(v - 1);
            adjacency[v - 1].insert(u - 1);
        }
        Ok(ContentionGraph { adjacency })
    }

    /// Graph with no links at all; only reachable through link removal.
    pub fn empty() -> Self {
        ContentionGraph { adjacency: Vec::new() }
    }

    pub fn num_links(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, link: usize) -> LinkSet {
        self.adjacency[link]
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].contains(b)
    }

    pub fn degree(&self, link: usize) -> usize {
        self.adjacency[link].len()
    }

    /// Edges as 0-based pairs `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            out.extend(nbrs.iter().filter(|&v| v > u).map(|v| (u, v)));
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    /// True when no two members of `set` are adjacent.
    pub fn is_independent(&self, set: LinkSet) -> bool {
        set.iter().all(|i| !self.adjacency[i].intersects(set))
    }

    /// Subgraph induced by `keep` (0-based, increasing), relabelled densely.
    fn induced(&self, keep: &[usize]) -> ContentionGraph {
        let mut position = vec![usize::MAX; self.num_links()];
        for (new, &old) in keep.iter().enumerate() {
            position[old] = new;
        }
        let adjacency = keep
            .iter()
            .map(|&old| {
                self.adjacency[old]
                    .iter()
                    .filter(|&n| position[n] != usize::MAX)
                    .map(|n| position[n])
                    .collect()
            })
            .collect();
        ContentionGraph { adjacency }
    }
}

impl fmt::Debug for ContentionGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let edges: Vec<_> = self.edges().into_iter().map(|(u, v)| (u + 1, v + 1)).collect();
        f.debug_struct("ContentionGraph")
            .field("num_links", &self.num_links())
            .field("edges", &edges)
            .finish()
    }
}

/// A graph with its zero-load links removed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedGraph {
    pub graph: ContentionGraph,
    /// `kept[r]` is the original index of reduced link `r`.
    pub kept: Vec<usize>,
    /// Original indices of removed links; their throughput is 0.
    pub removed: Vec<usize>,
}

impl ReducedGraph {
    /// Reduced index of an original link, if it survived.
    pub fn reduced_index(&self, original: usize) -> Option<usize> {
        self.kept.binary_search(&original).ok()
    }

    pub fn is_identity(&self) -> bool {
        self.removed.is_empty()
    }

    /// Scatters per-reduced-link values back to original positions.
    pub fn expand<T: Copy>(&self, values: &[T], fill: T, num_original: usize) -> Vec<T> {
        let mut out = vec![fill; num_original];
        for (r, &o) in self.kept.iter().enumerate() {
            out[o] = values[r];
        }
        out
    }

    /// Restricts per-original-link values to surviving links.
    pub fn restrict<T: Copy>(&self, values: &[T]) -> Vec<T> {
        self.kept.iter().map(|&o| values[o]).collect()
    }

    /// Maps a reduced link set back to original indices.
    pub fn expand_set(&self, set: LinkSet) -> LinkSet {
        set.iter().map(|r| self.kept[r]).collect()
    }
}

/// Removes links whose load is exactly zero together with their edges.
pub fn remove_zero_load_links<T: PartialEq + num_traits::Zero>(
    graph: &ContentionGraph,
    loads: &[T],
) -> Result<ReducedGraph> {
    if loads.len() != graph.num_links() {
        return Err(Error::LengthMismatch { expected: graph.num_links(), actual: loads.len() });
    }
    let (kept, removed): (Vec<usize>, Vec<usize>) =
        (0..graph.num_links()).partition(|&i| !loads[i].is_zero());
    Ok(ReducedGraph { graph: graph.induced(&kept), kept, removed })
}

/// All independent sets of a contention graph, sorted by mask value.
#[derive(Clone, Debug)]
pub struct StateSpace {
    graph: ContentionGraph,
    states: Vec<LinkState>,
    membership: Vec<Vec<u32>>,
}

impl StateSpace {
    pub fn graph(&self) -> &ContentionGraph {
        &self.graph
    }

    pub fn num_links(&self) -> usize {
        self.graph.num_links()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    /// Never true: the all-idle state always exists.
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[LinkState] {
        &self.states
    }

    pub fn state(&self, index: usize) -> LinkState {
        self.states[index]
    }

    /// Number of transmitting links in a state.
    pub fn transmitters(&self, index: usize) -> usize {
        self.states[index].len()
    }

    /// Indices of the states in which `link` transmits.
    pub fn states_with(&self, link: usize) -> &[u32] {
        &self.membership[link]
    }

    pub fn index_of(&self, state: LinkState) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index < self.states.len() {
            Ok(())
        } else {
            Err(Error::StateOutOfRange { index, len: self.states.len() })
        }
    }
}

pub fn enumerate_independent_sets(graph: &ContentionGraph) -> Result<StateSpace> {
    enumerate_independent_sets_capped(graph, DEFAULT_STATE_CAP)
}

/// Depth-first extension over links in index order, pruning any link
/// adjacent to the partial set.
pub fn enumerate_independent_sets_capped(graph: &ContentionGraph, cap: usize) -> Result<StateSpace> {
    let n = graph.num_links();
    let mut states = vec![LinkSet::EMPTY];
    // (next candidate, current set, links blocked by current set)
    let mut stack = vec![(0usize, LinkSet::EMPTY, LinkSet::EMPTY)];
    while let Some((start, set, blocked)) = stack.pop() {
        for link in (start..n).rev() {
            if blocked.contains(link) {
                continue;
            }
            let next = set.with(link);
            states.push(next);
            if states.len() > cap {
                return Err(Error::StateSpaceTooLarge { cap });
            }
            stack.push((link + 1, next, blocked.union(graph.neighbors(link))));
        }
    }
    states.sort_unstable();

    let mut membership = vec![Vec::new(); n];
    for (index, state) in states.iter().enumerate() {
        for link in state.iter() {
            membership[link].push(index as u32);
        }
    }
    Ok(StateSpace { graph: graph.clone(), states, membership })
}

/// Feasible states one link flip away from `state_index`.
pub fn state_transition_neighbors(space: &StateSpace, state_index: usize) -> Result<Vec<usize>> {
    space.check_index(state_index)?;
    Ok(flip_neighbors(space, state_index).collect())
}

fn flip_neighbors(space: &StateSpace, index: usize) -> impl Iterator<Item = usize> + '_ {
    let state = space.states[index];
    let graph = &space.graph;
    (0..graph.num_links()).filter_map(move |link| {
        if !state.contains(link) && graph.neighbors(link).intersects(state) {
            return None;
        }
        space.index_of(state.toggled(link))
    })
}

/// Outcome of the state-communication check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Communication {
    pub connected: bool,
    /// States not reachable from the all-idle state.
    pub unreachable: Vec<usize>,
}

/// Checks that every state reaches every other through single-link flips.
///
/// Flips are reversible, so reachability of all states from state 0 is
/// equivalent to all ordered pairs communicating.
pub fn is_strongly_communicating(space: &StateSpace) -> Communication {
    let distances = bfs(space, 0);
    let unreachable: Vec<usize> =
        (0..space.len()).filter(|&s| distances[s].is_none()).collect();
    Communication { connected: unreachable.is_empty(), unreachable }
}

/// A shortest flip path between two states, endpoints included.
pub fn shortest_path(space: &StateSpace, from: usize, to: usize) -> Result<Option<Vec<usize>>> {
    space.check_index(from)?;
    space.check_index(to)?;
    let mut parent = vec![usize::MAX; space.len()];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(s) = queue.pop_front() {
        if s == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = parent[cur];
                path.push(cur);
            }
            path.reverse();
            return Ok(Some(path));
        }
        for t in flip_neighbors(space, s) {
            if parent[t] == usize::MAX {
                parent[t] = s;
                queue.push_back(t);
            }
        }
    }
    Ok(None)
}

fn bfs(space: &StateSpace, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; space.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(s) = queue.pop_front() {
        let d = dist[s].unwrap_or(0);
        for t in flip_neighbors(space, s) {
            if dist[t].is_none() {
                dist[t] = Some(d + 1);
                queue.push_back(t);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> ContentionGraph {
        ContentionGraph::new(4, &[(1, 3), (1, 4), (2, 3), (2, 4)]).unwrap()
    }

    fn set(labels: &[usize]) -> LinkSet {
        labels.iter().map(|l| l - 1).collect()
    }

    fn brute_force(graph: &ContentionGraph) -> Vec<LinkSet> {
        let n = graph.num_links();
        (0u64..(1u64 << n))
            .map(LinkSet::from_bits)
            .filter(|&s| graph.edges().iter().all(|&(u, v)| !(s.contains(u) && s.contains(v))))
            .collect()
    }

    #[test]
    fn builds_square() {
        let g = square();
        assert_eq!(g.num_links(), 4);
        assert_eq!(g.num_edges(), 4);
        assert_eq!(g.neighbors(0), set(&[3, 4]));
        assert_eq!(g.neighbors(2), set(&[1, 2]));
    }

    #[test]
    fn build_rejects_bad_input() {
        assert_eq!(ContentionGraph::new(3, &[(1, 2), (2, 2)]), Err(Error::SelfLoop(2)));
        assert_eq!(
            ContentionGraph::new(3, &[(1, 4)]),
            Err(Error::IndexOutOfRange { index: 4, num_links: 3 })
        );
        assert_eq!(
            ContentionGraph::new(3, &[(0, 1)]),
            Err(Error::IndexOutOfRange { index: 0, num_links: 3 })
        );
        assert_eq!(ContentionGraph::new(0, &[]), Err(Error::NoLinks));
        assert_eq!(ContentionGraph::new(65, &[]), Err(Error::TooManyLinks(65)));
        assert!(ContentionGraph::new(64, &[(1, 64)]).is_ok());
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = ContentionGraph::new(2, &[(1, 2), (2, 1), (1, 2)]).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.edges(), vec![(0, 1)]);
    }

    #[test]
    fn single_link() {
        let g = ContentionGraph::new(1, &[]).unwrap();
        let space = enumerate_independent_sets(&g).unwrap();
        assert_eq!(space.states(), &[LinkSet::EMPTY, set(&[1])]);
        assert_eq!(state_transition_neighbors(&space, 1).unwrap(), vec![0]);
        assert!(is_strongly_communicating(&space).connected);
    }

    #[test]
    fn square_states() {
        let space = enumerate_independent_sets(&square()).unwrap();
        let mut expected = vec![
            LinkSet::EMPTY,
            set(&[1]),
            set(&[2]),
            set(&[3]),
            set(&[4]),
            set(&[1, 2]),
            set(&[3, 4]),
        ];
        expected.sort();
        assert_eq!(space.states(), expected.as_slice());
        assert_eq!(space.state(0), LinkSet::EMPTY);
        assert_eq!(space.states_with(0).len(), 2);
    }

    #[test]
    fn complete_and_path_graphs() {
        let k3 = ContentionGraph::new(3, &[(1, 2), (1, 3), (2, 3)]).unwrap();
        assert_eq!(enumerate_independent_sets(&k3).unwrap().len(), 4);

        let path = ContentionGraph::new(3, &[(1, 2), (2, 3)]).unwrap();
        let space = enumerate_independent_sets(&path).unwrap();
        assert_eq!(space.states(), brute_force(&path).as_slice());
        assert_eq!(space.len(), 5);
        assert!(space.index_of(set(&[1, 3])).is_some());
    }

    #[test]
    fn neighbors_of_square_states() {
        let space = enumerate_independent_sets(&square()).unwrap();
        let from_empty: Vec<LinkSet> = state_transition_neighbors(&space, 0)
            .unwrap()
            .into_iter()
            .map(|i| space.state(i))
            .collect();
        assert_eq!(from_empty, vec![set(&[1]), set(&[2]), set(&[3]), set(&[4])]);

        let both = space.index_of(set(&[1, 2])).unwrap();
        let mut got: Vec<LinkSet> = state_transition_neighbors(&space, both)
            .unwrap()
            .into_iter()
            .map(|i| space.state(i))
            .collect();
        got.sort();
        assert_eq!(got, vec![set(&[1]), set(&[2])]);

        assert_eq!(
            state_transition_neighbors(&space, 7),
            Err(Error::StateOutOfRange { index: 7, len: 7 })
        );
    }

    #[test]
    fn state_cap_is_enforced() {
        let g = ContentionGraph::new(5, &[]).unwrap();
        assert_eq!(
            enumerate_independent_sets_capped(&g, 31).unwrap_err(),
            Error::StateSpaceTooLarge { cap: 31 }
        );
        assert_eq!(enumerate_independent_sets_capped(&g, 32).unwrap().len(), 32);
    }

    #[test]
    fn communicating_with_paths() {
        let space = enumerate_independent_sets(&square()).unwrap();
        assert!(is_strongly_communicating(&space).connected);
        let a = space.index_of(set(&[1, 2])).unwrap();
        let b = space.index_of(set(&[3, 4])).unwrap();
        let path = shortest_path(&space, a, b).unwrap().unwrap();
        // {1,2} -> {1} or {2} -> {} -> {3} or {4} -> {3,4}
        assert_eq!(path.len(), 5);
        assert_eq!(space.state(path[2]), LinkSet::EMPTY);
    }

    #[test]
    fn zero_load_removal() {
        let g = square();
        let reduced = remove_zero_load_links(&g, &[0.0, 0.4, 0.4, 0.4]).unwrap();
        assert_eq!(reduced.kept, vec![1, 2, 3]);
        assert_eq!(reduced.removed, vec![0]);
        // original (2,3),(2,4) become reduced (0,1),(0,2)
        assert_eq!(reduced.graph.edges(), vec![(0, 1), (0, 2)]);
        assert_eq!(reduced.expand(&[1.0, 2.0, 3.0], 0.0, 4), vec![0.0, 1.0, 2.0, 3.0]);

        let all = remove_zero_load_links(&g, &[0.1, 0.4, 0.4, 0.4]).unwrap();
        assert!(all.is_identity());
        assert_eq!(all.graph, g);

        let single = ContentionGraph::new(1, &[]).unwrap();
        let none = remove_zero_load_links(&single, &[0.0]).unwrap();
        assert_eq!(none.graph.num_links(), 0);
        assert_eq!(enumerate_independent_sets(&none.graph).unwrap().len(), 1);

        assert!(remove_zero_load_links(&g, &[0.1]).is_err());
    }

    #[test]
    fn link_set_display_and_serialize() {
        let s = set(&[2, 5]);
        assert_eq!(s.to_string(), "{2,5}");
        assert_eq!(s.labels(), vec![2, 5]);
        assert_eq!(LinkSet::full(64).len(), 64);
        assert_eq!(LinkSet::full(3), set(&[1, 2, 3]));
    }
}
