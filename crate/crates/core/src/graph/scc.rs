/// Strongly connected components of a directed graph given as adjacency
/// lists. Iterative Tarjan; components come out in reverse topological order
/// (sinks first), each sorted ascending.
pub fn tarjan_scc(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adjacency.len();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next_index = 0;
    // (node, position in its adjacency list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < adjacency[v].len() {
                let w = adjacency[v][*pos];
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                component.sort_unstable();
                components.push(component);
            }
        }
    }
    components
}

/// Bottom SCCs: components with no edge leaving them.
pub fn bottom_sccs(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let components = tarjan_scc(adjacency);
    let mut comp_of = vec![0; adjacency.len()];
    for (i, c) in components.iter().enumerate() {
        for &v in c {
            comp_of[v] = i;
        }
    }
    let mut bottoms: Vec<Vec<usize>> = components
        .iter()
        .enumerate()
        .filter(|(i, c)| c.iter().all(|&v| adjacency[v].iter().all(|&w| comp_of[w] == *i)))
        .map(|(_, c)| c.clone())
        .collect();
    bottoms.sort();
    bottoms
}

/// Nodes from which some node in `targets` is reachable (including targets).
pub fn backward_reachable(adjacency: &[Vec<usize>], targets: &[bool]) -> Vec<bool> {
    let n = adjacency.len();
    let mut reverse = vec![Vec::new(); n];
    for (v, succ) in adjacency.iter().enumerate() {
        for &w in succ {
            reverse[w].push(v);
        }
    }
    let mut seen = targets.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&v| targets[v]).collect();
    while let Some(w) = stack.pop() {
        for &v in &reverse[w] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}
