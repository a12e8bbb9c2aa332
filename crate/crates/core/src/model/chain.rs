use std::collections::{BTreeMap, HashMap, VecDeque};

use num_traits::Zero;

use super::strategy::{Dist, StochasticUpdateStrategy};
use super::Mdp;
use crate::numerics::rational::Rat;

/// A location of the product of an MDP and a strategy memory: the current
/// state, the current memory element and the action about to be played.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location {
    pub state: usize,
    pub memory: usize,
    pub action: usize,
}

/// The Markov chain induced by a finite-memory strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovChain {
    pub locations: Vec<Location>,
    pub initial: Dist,
    /// Outgoing edges per location, merged and sorted by target.
    pub edges: Vec<Vec<(usize, Rat)>>,
    pub rewards: Vec<Rat>,
}

impl MarkovChain {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn successors(&self, l: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges[l].iter().map(|(t, _)| *t)
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.edges.iter().map(|e| e.iter().map(|(t, _)| *t).collect()).collect()
    }

    pub fn location_index(&self, loc: &Location) -> Option<usize> {
        self.locations.iter().position(|l| l == loc)
    }
}

/// Builds the chain of `strategy` from `start`, keeping only reachable locations.
///
/// Initial weight of `(s0, m, a)` is `α(m)·σn(s0, m)(a)`; the edge from
/// `(s, m, a)` to `(t, m', a')` has weight `δ(a)(t)·σu(a, t, m)(m')·σn(t, m')(a')`.
pub fn induce_chain(mdp: &Mdp, strategy: &StochasticUpdateStrategy, start: usize) -> MarkovChain {
    let initial_states: Vec<(usize, Dist)> = vec![(start, strategy.initial_memory.clone())];
    build(mdp, strategy, &initial_states)
}

/// Like [`induce_chain`] but seeds the chain from every listed state with the
/// initial memory distribution. The initial distribution is uniform over the
/// seeds; callers interested in per-state quantities use location indices.
pub fn induce_chain_from_states(mdp: &Mdp, strategy: &StochasticUpdateStrategy, starts: &[usize]) -> MarkovChain {
    let seeds: Vec<(usize, Dist)> = starts.iter().map(|&s| (s, strategy.initial_memory.clone())).collect();
    build(mdp, strategy, &seeds)
}

fn build(mdp: &Mdp, strategy: &StochasticUpdateStrategy, seeds: &[(usize, Dist)]) -> MarkovChain {
    let mut index: HashMap<Location, usize> = HashMap::new();
    let mut locations = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern = |loc: Location, locations: &mut Vec<Location>, queue: &mut VecDeque<usize>| -> usize {
        *index.entry(loc).or_insert_with(|| {
            locations.push(loc);
            queue.push_back(locations.len() - 1);
            locations.len() - 1
        })
    };

    let seed_weight = Rat::new(1.into(), (seeds.len().max(1) as i64).into());
    let mut initial: BTreeMap<usize, Rat> = BTreeMap::new();
    for (s, mem_dist) in seeds {
        for (m, pm) in mem_dist {
            for (a, pa) in strategy.next_move(*s, *m) {
                let l = intern(Location { state: *s, memory: *m, action: *a }, &mut locations, &mut queue);
                *initial.entry(l).or_insert_with(Rat::zero) += pm * pa * &seed_weight;
            }
        }
    }

    let mut edges: Vec<Vec<(usize, Rat)>> = Vec::new();
    while let Some(l) = queue.pop_front() {
        let Location { memory: m, action: a, .. } = locations[l];
        let mut out: BTreeMap<usize, Rat> = BTreeMap::new();
        for (t, pt) in &mdp.action(a).transitions {
            let update = strategy.update(a, *t, m);
            for (m2, pm) in update.iter() {
                for (a2, pa) in strategy.next_move(*t, *m2) {
                    let target = intern(Location { state: *t, memory: *m2, action: *a2 }, &mut locations, &mut queue);
                    *out.entry(target).or_insert_with(Rat::zero) += pt * pm * pa;
                }
            }
        }
        if edges.len() <= l {
            edges.resize(l + 1, Vec::new());
        }
        edges[l] = out.into_iter().collect();
    }
    edges.resize(locations.len(), Vec::new());
    let rewards = locations.iter().map(|loc| mdp.reward(loc.action).clone()).collect();
    MarkovChain { locations, initial: initial.into_iter().collect(), edges, rewards }
}
