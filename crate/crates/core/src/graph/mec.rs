use std::collections::BTreeSet;

use serde::Serialize;

use super::scc::tarjan_scc;
use crate::model::Mdp;

/// A maximal end component `(T, B)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Mec {
    pub states: BTreeSet<usize>,
    pub actions: BTreeSet<usize>,
}

impl Mec {
    pub fn contains_state(&self, s: usize) -> bool {
        self.states.contains(&s)
    }

    pub fn contains_action(&self, a: usize) -> bool {
        self.actions.contains(&a)
    }

    pub fn describe(&self, mdp: &Mdp) -> String {
        let states: Vec<&str> = self.states.iter().map(|&s| mdp.state_name(s)).collect();
        let actions: Vec<&str> = self.actions.iter().map(|&a| mdp.action(a).id.as_str()).collect();
        format!("({{{}}}, {{{}}})", states.join(","), actions.join(","))
    }
}

/// MEC decomposition, sorted by smallest state index.
pub fn mec_decomposition(mdp: &Mdp) -> Vec<Mec> {
    mec_decomposition_masked(mdp, &vec![true; mdp.num_actions()])
}

/// MEC decomposition of the sub-MDP that only keeps actions with
/// `allowed[a] == true`. States left without allowed actions belong to no MEC.
///
/// Iterated SCC refinement: drop every action that can leave the SCC of its
/// source, drop states without remaining actions, repeat until stable.
pub fn mec_decomposition_masked(mdp: &Mdp, allowed: &[bool]) -> Vec<Mec> {
    let n = mdp.num_states();
    let mut action_alive = allowed.to_vec();
    let mut state_alive = vec![true; n];

    loop {
        let mut changed = false;
        for s in 0..n {
            if state_alive[s] && !mdp.enabled(s).iter().any(|&a| action_alive[a]) {
                state_alive[s] = false;
                changed = true;
            }
        }
        for (a, alive) in action_alive.iter_mut().enumerate() {
            if *alive {
                let act = mdp.action(a);
                if !state_alive[act.source] || act.successors().any(|t| !state_alive[t]) {
                    *alive = false;
                    changed = true;
                }
            }
        }

        let adjacency: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                if !state_alive[s] {
                    return Vec::new();
                }
                mdp.enabled(s)
                    .iter()
                    .filter(|&&a| action_alive[a])
                    .flat_map(|&a| mdp.action(a).successors())
                    .collect()
            })
            .collect();
        let mut component = vec![usize::MAX; n];
        for (i, c) in tarjan_scc(&adjacency).iter().enumerate() {
            for &s in c {
                component[s] = i;
            }
        }
        for (a, alive) in action_alive.iter_mut().enumerate() {
            if *alive {
                let act = mdp.action(a);
                let home = component[act.source];
                if act.successors().any(|t| component[t] != home) {
                    *alive = false;
                    changed = true;
                }
            }
        }

        if !changed {
            let mut mecs: Vec<Mec> = Vec::new();
            let mut by_component: std::collections::BTreeMap<usize, Mec> = Default::default();
            for s in 0..n {
                if state_alive[s] {
                    let entry = by_component
                        .entry(component[s])
                        .or_insert_with(|| Mec { states: BTreeSet::new(), actions: BTreeSet::new() });
                    entry.states.insert(s);
                    entry.actions.extend(mdp.enabled(s).iter().copied().filter(|&a| action_alive[a]));
                }
            }
            mecs.extend(by_component.into_values());
            mecs.sort_by_key(|m| *m.states.iter().next().expect("nonempty MEC"));
            return mecs;
        }
    }
}

/// Index of the MEC containing each state, if any.
pub fn mec_membership(mdp: &Mdp, mecs: &[Mec]) -> Vec<Option<usize>> {
    let mut owner = vec![None; mdp.num_states()];
    for (i, mec) in mecs.iter().enumerate() {
        for &s in &mec.states {
            owner[s] = Some(i);
        }
    }
    owner
}

/// Index of the MEC containing each action, if any.
pub fn mec_action_membership(mdp: &Mdp, mecs: &[Mec]) -> Vec<Option<usize>> {
    let mut owner = vec![None; mdp.num_actions()];
    for (i, mec) in mecs.iter().enumerate() {
        for &a in &mec.actions {
            owner[a] = Some(i);
        }
    }
    owner
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{m_glob, m_uni};

    fn names(mdp: &Mdp, mec: &Mec) -> (Vec<String>, Vec<String>) {
        (
            mec.states.iter().map(|&s| mdp.state_name(s).to_string()).collect(),
            mec.actions.iter().map(|&a| mdp.action(a).id.clone()).collect(),
        )
    }

    #[test]
    fn m_glob_has_three_point_mecs() {
        let mdp = m_glob();
        let mecs = mec_decomposition(&mdp);
        let got: Vec<_> = mecs.iter().map(|m| names(&mdp, m)).collect();
        let expect = vec![
            (vec!["s2".to_string()], vec!["b".to_string()]),
            (vec!["s3".to_string()], vec!["c".to_string()]),
            (vec!["s4".to_string()], vec!["e".to_string()]),
        ];
        assert_eq!(got, expect);
    }

    #[test]
    fn unichain_is_one_mec() {
        let mdp = m_uni();
        let mecs = mec_decomposition(&mdp);
        assert_eq!(mecs.len(), 1);
        assert_eq!(mecs[0].states.len(), 2);
        assert_eq!(mecs[0].actions.len(), 3);
    }

    #[test]
    fn leaky_cycle_only_keeps_sink() {
        // s0 <-> s1 cycle, but s1's action leaks to the sink with prob 1/2
        let mdp = Mdp::from_json_str(
            r#"{"states":["s0","s1","sink"],"initial":"s0","actions":[
                {"id":"go","source":"s0","reward":"1","transitions":{"s1":"1"}},
                {"id":"back","source":"s1","reward":"1","transitions":{"s0":"1/2","sink":"1/2"}},
                {"id":"stay","source":"sink","reward":"0","transitions":{"sink":"1"}}]}"#,
        )
        .unwrap();
        let mecs = mec_decomposition(&mdp);
        assert_eq!(mecs.len(), 1);
        assert_eq!(names(&mdp, &mecs[0]), (vec!["sink".to_string()], vec!["stay".to_string()]));
    }
}
