use num_traits::{One, Zero};

use super::lp::{dot, solve_lp, Direction, LinearProgram, LpStatus, Relation};
use super::rational::Rat;

/// A point `(E, Q)` in the image of a polytope under two linear maps,
/// together with the preimage that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HullPoint<T> {
    pub e: Rat,
    pub q: Rat,
    pub payload: T,
}

/// What the oracle passed to [`lower_hull`] must minimize.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HullDirection {
    /// Minimal `E`, and among those minimal `Q`.
    LeftEnd,
    /// Maximal `E`, and among those minimal `Q`.
    RightEnd,
    /// Minimal `Q − s·E`.
    Slope(Rat),
}

/// Vertices of the lower convex hull of the 2-D image, sorted by `E`.
///
/// Starts from both ends and splits every segment by the point minimizing
/// `Q − s·E` for the segment's slope `s` until no point lies strictly below.
/// Returns an empty list when the oracle reports infeasibility.
pub fn lower_hull<T>(mut oracle: impl FnMut(&HullDirection) -> Option<HullPoint<T>>) -> Vec<HullPoint<T>> {
    let Some(left) = oracle(&HullDirection::LeftEnd) else { return Vec::new() };
    let right = oracle(&HullDirection::RightEnd).expect("feasible for one direction means feasible for all");
    if left.e == right.e {
        return vec![left];
    }
    let mut done: Vec<HullPoint<T>> = Vec::new();
    // stack of pending segments, processed left to right
    let mut stack: Vec<HullPoint<T>> = vec![right];
    let mut current = left;
    while let Some(next) = stack.pop() {
        let slope = (&next.q - &current.q) / (&next.e - &current.e);
        let level = &current.q - &slope * &current.e;
        let candidate = oracle(&HullDirection::Slope(slope.clone())).expect("feasible");
        let value = &candidate.q - &slope * &candidate.e;
        if value < level {
            stack.push(next);
            stack.push(candidate);
        } else {
            done.push(current);
            current = next;
        }
    }
    done.push(current);
    done
}

/// A point on the lower hull expressed as `λ·left + (1 − λ)·right`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HullChoice {
    pub left: usize,
    pub right: usize,
    pub lambda: Rat,
    pub e: Rat,
    pub q: Rat,
    pub value: Rat,
}

/// Minimizes `f(E, Q)` over the part of the hull region with `E ≤ u`, where
/// `f` is concave along segments and nondecreasing in `Q`.
///
/// Under these conditions the minimum sits at a lower-hull vertex with
/// `E ≤ u` or where the lower boundary crosses `E = u`. Ties keep the
/// leftmost candidate.
pub fn minimize_on_lower_hull<T>(
    hull: &[HullPoint<T>],
    u: &Rat,
    f: impl Fn(&Rat, &Rat) -> Rat,
) -> Option<HullChoice> {
    let mut best: Option<HullChoice> = None;
    let mut consider = |c: HullChoice| {
        if best.as_ref().is_none_or(|b| c.value < b.value) {
            best = Some(c);
        }
    };
    for (i, p) in hull.iter().enumerate() {
        if p.e > *u {
            if i > 0 && hull[i - 1].e < *u {
                let prev = &hull[i - 1];
                let lambda = (&p.e - u) / (&p.e - &prev.e);
                let q = &lambda * &prev.q + (Rat::one() - &lambda) * &p.q;
                let value = f(u, &q);
                consider(HullChoice { left: i - 1, right: i, lambda, e: u.clone(), q, value });
            }
            break;
        }
        let value = f(&p.e, &p.q);
        consider(HullChoice { left: i, right: i, lambda: Rat::one(), e: p.e.clone(), q: p.q.clone(), value });
    }
    best
}

/// `λ·a + (1 − λ)·b` componentwise.
pub fn mix(a: &[Rat], b: &[Rat], lambda: &Rat) -> Vec<Rat> {
    if lambda.is_one() {
        return a.to_vec();
    }
    if lambda.is_zero() {
        return b.to_vec();
    }
    let rest = Rat::one() - lambda;
    a.iter().zip(b).map(|(x, y)| lambda * x + &rest * y).collect()
}

/// Lower hull of `(E, Q)` over the feasible set of `lp`, where `E` and `Q`
/// are the linear forms `e_row` and `q_row`. Payloads are LP assignments.
pub fn lower_hull_of_lp(lp: &LinearProgram, e_row: &[(usize, Rat)], q_row: &[(usize, Rat)]) -> Vec<HullPoint<Vec<Rat>>> {
    let point = |assignment: Vec<Rat>| HullPoint { e: dot(e_row, &assignment), q: dot(q_row, &assignment), payload: assignment };
    lower_hull(|dir| match dir {
        HullDirection::LeftEnd | HullDirection::RightEnd => {
            let direction = if *dir == HullDirection::LeftEnd { Direction::Minimize } else { Direction::Maximize };
            let mut first = lp.clone();
            first.set_objective(direction, e_row.to_vec());
            let out = solve_lp(&first);
            if out.status != LpStatus::Optimal {
                assert_ne!(out.status, LpStatus::Unbounded, "hull directions must be bounded");
                return None;
            }
            let mut second = lp.clone();
            second.add_constraint(e_row.to_vec(), Relation::Eq, out.objective_value.expect("optimal"));
            second.set_objective(Direction::Minimize, q_row.to_vec());
            let out = solve_lp(&second);
            assert_eq!(out.status, LpStatus::Optimal, "second stage of a bounded hull direction");
            Some(point(out.assignment))
        }
        HullDirection::Slope(s) => {
            let mut row: Vec<(usize, Rat)> = q_row.to_vec();
            row.extend(e_row.iter().map(|(v, c)| (*v, -(s * c))));
            let mut prog = lp.clone();
            prog.set_objective(Direction::Minimize, row);
            let out = solve_lp(&prog);
            assert_eq!(out.status, LpStatus::Optimal, "slope direction of a bounded hull");
            Some(point(out.assignment))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rational::{int, ratio};

    /// Oracle over a finite point set (the polytope is its convex hull).
    fn oracle(points: &[(i64, i64)]) -> impl FnMut(&HullDirection) -> Option<HullPoint<usize>> + '_ {
        move |dir| {
            let pts = points.iter().enumerate().map(|(i, &(e, q))| (i, int(e), int(q)));
            let key = |(_, e, q): &(usize, Rat, Rat)| -> (Rat, Rat) {
                match dir {
                    HullDirection::LeftEnd => (e.clone(), q.clone()),
                    HullDirection::RightEnd => (-e.clone(), q.clone()),
                    HullDirection::Slope(s) => (q - s * e, Rat::zero()),
                }
            };
            pts.min_by_key(key).map(|(i, e, q)| HullPoint { e, q, payload: i })
        }
    }

    #[test]
    fn finds_lower_hull_of_point_cloud() {
        let pts = [(0, 4), (1, 1), (2, 2), (3, 0), (4, 3), (2, 5), (1, 3)];
        let hull = lower_hull(oracle(&pts));
        let got: Vec<(Rat, Rat)> = hull.iter().map(|p| (p.e.clone(), p.q.clone())).collect();
        assert_eq!(got, vec![(int(0), int(4)), (int(1), int(1)), (int(3), int(0)), (int(4), int(3))]);
    }

    #[test]
    fn single_point_and_vertical_segment() {
        let hull = lower_hull(oracle(&[(2, 7), (2, 3)]));
        assert_eq!(hull.len(), 1);
        assert_eq!(hull[0].q, int(3));
    }

    #[test]
    fn concave_query_uses_crossing_point() {
        // segment from (1, 2) to (2, 4): Q − E² = 2E − E² along it
        let hull = lower_hull(oracle(&[(1, 2), (2, 4)]));
        let f = |e: &Rat, q: &Rat| q - e * e;
        let c = minimize_on_lower_hull(&hull, &ratio(3, 2), f).unwrap();
        // at E=1: 2-1 = 1; at E=3/2: 3 - 9/4 = 3/4
        assert_eq!(c.value, ratio(3, 4));
        assert_eq!((c.left, c.right), (0, 1));
        assert_eq!(c.lambda, ratio(1, 2));
        assert!(minimize_on_lower_hull(&hull, &int(0), f).is_none());
    }

    #[test]
    fn hull_of_lp_triangle() {
        // triangle with vertices (0, 2), (2, 0), (2, 2) in (e, q) coordinates
        let mut lp = LinearProgram::new();
        let e = lp.add_variable("e", true);
        let q = lp.add_variable("q", true);
        lp.add_constraint(vec![(e, int(1)), (q, int(1))], Relation::Ge, int(2));
        lp.add_constraint(vec![(e, int(1))], Relation::Le, int(2));
        lp.add_constraint(vec![(q, int(1))], Relation::Le, int(2));
        let hull = lower_hull_of_lp(&lp, &[(e, int(1))], &[(q, int(1))]);
        let got: Vec<(Rat, Rat)> = hull.iter().map(|p| (p.e.clone(), p.q.clone())).collect();
        assert_eq!(got, vec![(int(0), int(2)), (int(2), int(0))]);
    }

    #[test]
    fn mixing_points() {
        assert_eq!(mix(&[int(2), int(0)], &[int(0), int(4)], &ratio(1, 4)), vec![ratio(1, 2), int(3)]);
    }
}
