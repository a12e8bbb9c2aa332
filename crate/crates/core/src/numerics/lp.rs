use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

use super::rational::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// A sparse row `Σ coeffs · x  rel  rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, Rat)>,
    pub relation: Relation,
    pub rhs: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Objective {
    pub direction: Direction,
    pub coeffs: Vec<(usize, Rat)>,
}

/// A linear program over named variables. Variables listed in `nonneg` are
/// constrained to be `≥ 0`; every other variable is free.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinearProgram {
    pub variables: Vec<String>,
    pub constraints: Vec<Constraint>,
    pub objective: Option<Objective>,
    pub nonneg: BTreeSet<usize>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, nonneg: bool) -> usize {
        let idx = self.variables.len();
        self.variables.push(name.into());
        if nonneg {
            self.nonneg.insert(idx);
        }
        idx
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, Rat)>, relation: Relation, rhs: Rat) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn set_objective(&mut self, direction: Direction, coeffs: Vec<(usize, Rat)>) {
        self.objective = Some(Objective { direction, coeffs });
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    /// Whether `assignment` satisfies every constraint and sign restriction exactly.
    pub fn is_satisfied_by(&self, assignment: &[Rat]) -> bool {
        if assignment.len() != self.variables.len() {
            return false;
        }
        if self.nonneg.iter().any(|&v| assignment[v].is_negative()) {
            return false;
        }
        self.constraints.iter().all(|c| {
            let lhs = dot(&c.coeffs, assignment);
            match c.relation {
                Relation::Le => lhs <= c.rhs,
                Relation::Eq => lhs == c.rhs,
                Relation::Ge => lhs >= c.rhs,
            }
        })
    }

    pub fn evaluate(&self, coeffs: &[(usize, Rat)], assignment: &[Rat]) -> Rat {
        dot(coeffs, assignment)
    }
}

pub fn dot(coeffs: &[(usize, Rat)], assignment: &[Rat]) -> Rat {
    coeffs.iter().fold(Rat::zero(), |acc, (v, c)| acc + c * &assignment[*v])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    /// An objective was given and attained.
    Optimal,
    /// No objective was given; the assignment is some feasible point.
    Feasible,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// One value per variable; empty when infeasible.
    pub assignment: Vec<Rat>,
    pub objective_value: Option<Rat>,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, LpStatus::Optimal | LpStatus::Feasible)
    }
}

/// Dense simplex tableau in canonical form: `basis[i]` has a unit column in row `i`.
struct Tableau {
    rows: Vec<Vec<Rat>>,
    rhs: Vec<Rat>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = Rat::one() / &self.rows[r][c];
        if !inv.is_one() {
            for x in self.rows[r].iter_mut() {
                if !x.is_zero() {
                    *x *= &inv;
                }
            }
            self.rhs[r] *= &inv;
        }
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        let nonzero: Vec<usize> = (0..self.ncols).filter(|&j| !pivot_row[j].is_zero()).collect();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let factor = self.rows[i][c].clone();
            for &j in &nonzero {
                let delta = &factor * &pivot_row[j];
                self.rows[i][j] -= delta;
            }
            let delta = &factor * &pivot_rhs;
            self.rhs[i] -= delta;
        }
        self.basis[r] = c;
    }

    fn reduced_cost(&self, cost: &[Rat], j: usize) -> Rat {
        let mut d = cost[j].clone();
        for (i, &b) in self.basis.iter().enumerate() {
            if !cost[b].is_zero() && !self.rows[i][j].is_zero() {
                d -= &cost[b] * &self.rows[i][j];
            }
        }
        d
    }

    /// Minimizes `cost · x` with Bland's rule over columns where `enterable` holds.
    /// Returns `false` when unbounded.
    fn minimize(&mut self, cost: &[Rat], enterable: &[bool]) -> bool {
        loop {
            let entering = (0..self.ncols)
                .find(|&j| enterable[j] && !self.basis.contains(&j) && self.reduced_cost(cost, j).is_negative());
            let Some(c) = entering else { return true };
            let mut leave: Option<(usize, Rat)> = None;
            for i in 0..self.rows.len() {
                if !self.rows[i][c].is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / &self.rows[i][c];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }

    fn value(&self, col: usize) -> Rat {
        self.basis.iter().position(|&b| b == col).map(|i| self.rhs[i].clone()).unwrap_or_else(Rat::zero)
    }
}

/// Exact two-phase simplex with Bland's anti-cycling rule.
pub fn solve_lp(lp: &LinearProgram) -> LpOutcome {
    let n = lp.variables.len();
    // column layout: one or two columns per variable (free ones are split), then
    // slack/surplus columns, then artificials
    let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(n);
    let mut ncols = 0;
    for v in 0..n {
        if lp.nonneg.contains(&v) {
            col_of.push((ncols, None));
            ncols += 1;
        } else {
            col_of.push((ncols, Some(ncols + 1)));
            ncols += 2;
        }
    }
    let structural = ncols;

    let m = lp.constraints.len();
    let mut dense: Vec<Vec<Rat>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut relations = Vec::with_capacity(m);
    for c in &lp.constraints {
        let mut row = vec![Rat::zero(); structural];
        for (v, coef) in &c.coeffs {
            let (pos, neg) = col_of[*v];
            row[pos] += coef;
            if let Some(neg) = neg {
                row[neg] -= coef;
            }
        }
        let mut relation = c.relation;
        let mut b = c.rhs.clone();
        if b.is_negative() {
            for x in row.iter_mut() {
                *x = -x.clone();
            }
            b = -b;
            relation = match relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        dense.push(row);
        rhs.push(b);
        relations.push(relation);
    }

    let slack_count = relations.iter().filter(|r| **r != Relation::Eq).count();
    let art_count = relations.iter().filter(|r| **r != Relation::Le).count();
    let total = structural + slack_count + art_count;
    let mut basis = vec![0; m];
    let mut is_artificial = vec![false; total];
    let mut next_slack = structural;
    let mut next_art = structural + slack_count;
    for (i, row) in dense.iter_mut().enumerate() {
        row.resize(total, Rat::zero());
        match relations[i] {
            Relation::Le => {
                row[next_slack] = Rat::one();
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = -Rat::one();
                next_slack += 1;
                row[next_art] = Rat::one();
                basis[i] = next_art;
                is_artificial[next_art] = true;
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = Rat::one();
                basis[i] = next_art;
                is_artificial[next_art] = true;
                next_art += 1;
            }
        }
    }

    let mut tab = Tableau { rows: dense, rhs, basis, ncols: total };

    if art_count > 0 {
        let cost: Vec<Rat> = (0..total).map(|j| if is_artificial[j] { Rat::one() } else { Rat::zero() }).collect();
        let all = vec![true; total];
        tab.minimize(&cost, &all);
        let infeasibility: Rat = (0..m).filter(|&i| is_artificial[tab.basis[i]]).map(|i| tab.rhs[i].clone()).sum();
        if infeasibility.is_positive() {
            return LpOutcome { status: LpStatus::Infeasible, assignment: Vec::new(), objective_value: None };
        }
        // drive zero-level artificials out of the basis, dropping redundant rows
        let mut i = 0;
        while i < tab.rows.len() {
            if is_artificial[tab.basis[i]] {
                match (0..total).find(|&j| !is_artificial[j] && !tab.rows[i][j].is_zero()) {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.rows.remove(i);
                        tab.rhs.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let enterable: Vec<bool> = (0..total).map(|j| !is_artificial[j]).collect();
    let mut status = LpStatus::Feasible;
    if let Some(obj) = &lp.objective {
        let sign = match obj.direction {
            Direction::Minimize => Rat::one(),
            Direction::Maximize => -Rat::one(),
        };
        let mut cost = vec![Rat::zero(); total];
        for (v, coef) in &obj.coeffs {
            let (pos, neg) = col_of[*v];
            cost[pos] += &sign * coef;
            if let Some(neg) = neg {
                cost[neg] -= &sign * coef;
            }
        }
        if !tab.minimize(&cost, &enterable) {
            return LpOutcome { status: LpStatus::Unbounded, assignment: Vec::new(), objective_value: None };
        }
        status = LpStatus::Optimal;
    }

    let assignment: Vec<Rat> = col_of
        .iter()
        .map(|&(pos, neg)| {
            let mut x = tab.value(pos);
            if let Some(neg) = neg {
                x -= tab.value(neg);
            }
            x
        })
        .collect();
    let objective_value = lp.objective.as_ref().map(|o| dot(&o.coeffs, &assignment));
    LpOutcome { status, assignment, objective_value }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rational::{int, ratio};

    #[test]
    fn maximize_single_bound() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", true);
        lp.add_constraint(vec![(x, int(1))], Relation::Le, int(3));
        lp.set_objective(Direction::Maximize, vec![(x, int(1))]);
        let out = solve_lp(&lp);
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.assignment, vec![int(3)]);
        assert_eq!(out.objective_value, Some(int(3)));
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", false);
        lp.add_constraint(vec![(x, int(1))], Relation::Ge, int(1));
        lp.add_constraint(vec![(x, int(1))], Relation::Le, int(0));
        assert_eq!(solve_lp(&lp).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", true);
        let y = lp.add_variable("y", false);
        lp.add_constraint(vec![(x, int(1)), (y, int(-1))], Relation::Eq, int(2));
        lp.set_objective(Direction::Maximize, vec![(x, int(1))]);
        assert_eq!(solve_lp(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_go_negative() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", false);
        lp.add_constraint(vec![(x, int(1))], Relation::Ge, int(-7));
        lp.set_objective(Direction::Minimize, vec![(x, int(2))]);
        let out = solve_lp(&lp);
        assert_eq!(out.assignment, vec![int(-7)]);
        assert_eq!(out.objective_value, Some(int(-14)));
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", true);
        let y = lp.add_variable("y", true);
        lp.add_constraint(vec![(x, int(1)), (y, int(1))], Relation::Eq, int(1));
        lp.add_constraint(vec![(x, int(2)), (y, int(2))], Relation::Eq, int(2));
        lp.set_objective(Direction::Maximize, vec![(y, int(3))]);
        let out = solve_lp(&lp);
        assert_eq!(out.assignment, vec![int(0), int(1)]);
        assert!(lp.is_satisfied_by(&out.assignment));
    }

    #[test]
    fn unichain_flow_maximum() {
        // x_a + x_b = x_c (flow at s1 and s2), x_a + x_b + x_c = 1
        let mut lp = LinearProgram::new();
        let a = lp.add_variable("x_a", true);
        let b = lp.add_variable("x_b", true);
        let c = lp.add_variable("x_c", true);
        lp.add_constraint(vec![(a, int(1)), (b, int(1)), (c, int(-1))], Relation::Eq, int(0));
        lp.add_constraint(vec![(a, int(1)), (b, int(1)), (c, int(1))], Relation::Eq, int(1));
        lp.set_objective(Direction::Maximize, vec![(b, int(2)), (c, int(2))]);
        let out = solve_lp(&lp);
        assert_eq!(out.objective_value, Some(int(2)));
        assert_eq!(out.assignment, vec![int(0), ratio(1, 2), ratio(1, 2)]);
    }

    #[test]
    fn feasibility_without_objective() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", true);
        let y = lp.add_variable("y", true);
        lp.add_constraint(vec![(x, int(1)), (y, int(1))], Relation::Ge, int(2));
        lp.add_constraint(vec![(x, int(1)), (y, int(-1))], Relation::Le, int(1));
        let out = solve_lp(&lp);
        assert_eq!(out.status, LpStatus::Feasible);
        assert!(lp.is_satisfied_by(&out.assignment));
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, which cycles under the textbook largest-coefficient rule
        let mut lp = LinearProgram::new();
        let v: Vec<usize> = (0..4).map(|i| lp.add_variable(format!("x{i}"), true)).collect();
        lp.add_constraint(
            vec![(v[0], ratio(1, 4)), (v[1], int(-60)), (v[2], ratio(-1, 25)), (v[3], int(9))],
            Relation::Le,
            int(0),
        );
        lp.add_constraint(
            vec![(v[0], ratio(1, 2)), (v[1], int(-90)), (v[2], ratio(-1, 50)), (v[3], int(3))],
            Relation::Le,
            int(0),
        );
        lp.add_constraint(vec![(v[2], int(1))], Relation::Le, int(1));
        lp.set_objective(
            Direction::Maximize,
            vec![(v[0], ratio(3, 4)), (v[1], int(-150)), (v[2], ratio(1, 50)), (v[3], int(-6))],
        );
        let out = solve_lp(&lp);
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.objective_value, Some(ratio(1, 20)));
    }
}
