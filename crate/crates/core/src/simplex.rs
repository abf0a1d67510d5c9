//! Phase-I dense simplex with Bland's rule.
//!
//! Solves the feasibility question "does `A w = b` admit `w >= 0`?" by
//! minimising the sum of artificial variables. Bland's pivoting rule
//! guarantees termination; all instances in this crate are small and dense.

/// Feasibility tolerance: the residual artificial mass below which the
/// system counts as solvable.
pub(crate) const FEAS_TOL: f64 = 1e-7;

const PIVOT_TOL: f64 = 1e-9;

pub(crate) enum Feasibility {
    /// A nonnegative solution; `weights[j]` multiplies column `j` of `A`.
    Feasible(Vec<f64>),
    /// Farkas certificate `y`: `y . b > 0` while `y . A_j <= 0` for every
    /// column `j` (up to tolerance).
    Infeasible(Vec<f64>),
}

/// Decides feasibility of `{ w >= 0 : A w = b }` for a dense row-major `A`.
pub(crate) fn feasible_nonnegative(a: &[Vec<f64>], b: &[f64]) -> Feasibility {
    let m = b.len();
    assert!(a.len() == m, "constraint matrix rows must match rhs length");
    let n = a.first().map(Vec::len).unwrap_or(0);

    // Normalise rows to b >= 0, remembering the flips for the certificate.
    let mut signs = vec![1.0; m];
    // Tableau columns: n structural, m artificial, then rhs.
    let width = n + m + 1;
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![0.0; width];
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        signs[i] = flip;
        for j in 0..n {
            row[j] = flip * a[i][j];
        }
        row[n + i] = 1.0;
        row[width - 1] = flip * b[i];
        t.push(row);
    }

    // Phase-I objective: minimise the sum of artificials. With the
    // artificial basis, reduced costs are c_j - sum of column j, which is
    // minus the column sum for structural columns and zero for artificials.
    let mut cost = vec![0.0; width];
    for row in &t {
        for (c, x) in cost.iter_mut().zip(row.iter()) {
            *c -= x;
        }
    }
    for j in n..n + m {
        cost[j] += 1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        // Bland: entering column is the smallest index with negative reduced cost.
        let entering = (0..n + m).find(|&j| cost[j] < -PIVOT_TOL);
        let Some(enter) = entering else { break };

        // Ratio test; ties broken by smallest basis variable (Bland).
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for (i, row) in t.iter().enumerate() {
            if row[enter] > PIVOT_TOL {
                let ratio = row[width - 1] / row[enter];
                let better = ratio < best - 1e-15
                    || ((ratio - best).abs() <= 1e-15
                        && leave.is_some_and(|l| basis[i] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            // Unbounded Phase-I cannot happen (objective bounded below by 0);
            // treat defensively as infeasible with a zero certificate.
            debug_assert!(false, "phase-I simplex unbounded");
            return Feasibility::Infeasible(vec![0.0; m]);
        };

        // Pivot on (leave, enter).
        let pivot = t[leave][enter];
        for x in t[leave].iter_mut() {
            *x /= pivot;
        }
        for i in 0..m {
            if i != leave {
                let factor = t[i][enter];
                if factor != 0.0 {
                    for j in 0..width {
                        t[i][j] -= factor * t[leave][j];
                    }
                }
            }
        }
        let factor = cost[enter];
        if factor != 0.0 {
            for j in 0..width {
                cost[j] -= factor * t[leave][j];
            }
        }
        basis[leave] = enter;
    }

    let objective: f64 = t
        .iter()
        .enumerate()
        .filter(|(i, _)| basis[*i] >= n)
        .map(|(_, row)| row[width - 1])
        .sum();

    if objective <= FEAS_TOL {
        let mut w = vec![0.0; n];
        for (i, &bv) in basis.iter().enumerate() {
            if bv < n {
                w[bv] = t[i][width - 1].max(0.0);
            }
        }
        Feasibility::Feasible(w)
    } else {
        // Simplex multipliers: reduced cost of artificial i is 1 - y_i in the
        // sign-normalised rows; undo the row flips for the caller.
        let y: Vec<f64> = (0..m).map(|i| signs[i] * (1.0 - cost[n + i])).collect();
        Feasibility::Infeasible(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_inside_segment_is_feasible() {
        // Is (0.25, 0.75) a convex combination of (0,1) and (1,0)?
        let a = vec![
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0], // normalisation row
        ];
        let b = vec![0.25, 0.75, 1.0];
        match feasible_nonnegative(&a, &b) {
            Feasibility::Feasible(w) => {
                assert!((w[0] - 0.75).abs() < 1e-9);
                assert!((w[1] - 0.25).abs() < 1e-9);
            }
            Feasibility::Infeasible(_) => panic!("should be feasible"),
        }
    }

    #[test]
    fn point_outside_hull_yields_certificate() {
        // (2, -1) is not a convex combination of (0,1) and (1,0).
        let a = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let b = vec![2.0, -1.0, 1.0];
        match feasible_nonnegative(&a, &b) {
            Feasibility::Feasible(_) => panic!("should be infeasible"),
            Feasibility::Infeasible(y) => {
                let yb: f64 = y.iter().zip(&b).map(|(u, v)| u * v).sum();
                assert!(yb > FEAS_TOL, "certificate must separate: y.b = {yb}");
                for j in 0..2 {
                    let ya: f64 = (0..3).map(|i| y[i] * a[i][j]).sum();
                    assert!(ya <= 1e-7, "certificate violated on column {j}: {ya}");
                }
            }
        }
    }

    #[test]
    fn degenerate_square_membership() {
        // Unit square corners; centre is inside, (1.5, 0.5) is not.
        let corners: [[f64; 2]; 4] = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let build = |p: [f64; 2]| {
            let a = vec![
                corners.iter().map(|c| c[0]).collect::<Vec<_>>(),
                corners.iter().map(|c| c[1]).collect::<Vec<_>>(),
                vec![1.0; 4],
            ];
            (a, vec![p[0], p[1], 1.0])
        };
        let (a, b) = build([0.5, 0.5]);
        assert!(matches!(feasible_nonnegative(&a, &b), Feasibility::Feasible(_)));
        let (a, b) = build([1.5, 0.5]);
        assert!(matches!(feasible_nonnegative(&a, &b), Feasibility::Infeasible(_)));
    }

    #[test]
    fn empty_generating_set_is_infeasible() {
        let a = vec![vec![], vec![]];
        let b = vec![0.5, 1.0];
        assert!(matches!(feasible_nonnegative(&a, &b), Feasibility::Infeasible(_)));
    }
}
