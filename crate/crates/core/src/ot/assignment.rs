//! Exact linear assignment for uniform, equal-size marginals.
//!
//! With uniform weights the Kantorovich LP has a permutation optimum, so an
//! `O(n³)` Hungarian solve is exact. Ties are broken toward the
//! lexicographically smallest permutation (row 0's column first, then row 1's,
//! ...) by searching perfect matchings of the tight-edge graph.

use nalgebra::{DMatrix, DVector};

use super::{CostMatrix, TransportPlan};
use crate::error::{Error, Result};

/// Optimal permutation `perm[i] = j` for a square cost and its total cost
/// `Σ_i c[i, perm[i]]` (not divided by `n`).
pub fn optimal_permutation(cost: &DMatrix<f64>) -> Result<(Vec<usize>, f64)> {
    let n = cost.nrows();
    if n != cost.ncols() {
        return Err(Error::NotAssignment(format!(
            "cost is {}x{}, expected square",
            n,
            cost.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::EmptyDistribution);
    }
    let (_, row_potential, col_potential) = hungarian(cost);
    let scale = 1.0 + cost.amax();
    let tight_tol = 1e-9 * scale;
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| cost[(i, j)] - row_potential[i] - col_potential[j] <= tight_tol)
                .collect()
        })
        .collect();
    let perm = lexicographic_matching(&tight, n)
        .ok_or_else(|| Error::NotAssignment("tight graph has no perfect matching".into()))?;
    let total = perm.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
    Ok((perm, total))
}

/// Exact optimal plan for uniform marginals of equal size.
pub fn solve_exact_assignment(
    cost: &CostMatrix,
    row_marginal: &DVector<f64>,
    col_marginal: &DVector<f64>,
) -> Result<TransportPlan> {
    let n = cost.nrows();
    if n != cost.ncols() || row_marginal.len() != n || col_marginal.len() != n {
        return Err(Error::NotAssignment(format!(
            "needs M = N, got {}x{}",
            cost.nrows(),
            cost.ncols()
        )));
    }
    let u = 1.0 / n as f64;
    let uniform = |h: &DVector<f64>| h.iter().all(|w| (w - u).abs() <= 1e-12);
    if !uniform(row_marginal) || !uniform(col_marginal) {
        return Err(Error::NotAssignment("marginals are not uniform".into()));
    }
    let (perm, _) = optimal_permutation(cost.entries())?;
    let mut mass = DMatrix::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        mass[(i, j)] = u;
    }
    Ok(TransportPlan::new(
        mass,
        cost,
        row_marginal.clone(),
        col_marginal.clone(),
        0.0,
    ))
}

/// Hungarian algorithm with row/column potentials (minimization).
/// Returns `(perm, u, v)` with `c_ij − u_i − v_j ≥ 0`, tight on `perm`.
fn hungarian(cost: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.nrows();
    // 1-based internal arrays; index 0 is the virtual column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    (perm, u[1..].to_vec(), v[1..].to_vec())
}

/// Lexicographically smallest perfect matching in a bipartite graph given by
/// adjacency lists (`adj[i]` sorted ascending).
fn lexicographic_matching(adj: &[Vec<usize>], n: usize) -> Option<Vec<usize>> {
    let mut fixed = vec![usize::MAX; n];
    let mut col_used = vec![false; n];
    for i in 0..n {
        let mut chosen = None;
        for &j in &adj[i] {
            if col_used[j] {
                continue;
            }
            col_used[j] = true;
            if has_perfect_matching(adj, i + 1, &col_used) {
                chosen = Some(j);
                break;
            }
            col_used[j] = false;
        }
        fixed[i] = chosen?;
    }
    Some(fixed)
}

/// Kuhn's augmenting-path check that rows `first..n` can be matched into the
/// unused columns.
fn has_perfect_matching(adj: &[Vec<usize>], first: usize, col_used: &[bool]) -> bool {
    let n = adj.len();
    let mut match_col = vec![usize::MAX; n];
    for i in first..n {
        let mut seen = vec![false; n];
        if !augment(i, adj, col_used, &mut match_col, &mut seen) {
            return false;
        }
    }
    true
}

fn augment(
    i: usize,
    adj: &[Vec<usize>],
    col_used: &[bool],
    match_col: &mut [usize],
    seen: &mut [bool],
) -> bool {
    for &j in &adj[i] {
        if col_used[j] || seen[j] {
            continue;
        }
        seen[j] = true;
        if match_col[j] == usize::MAX || augment(match_col[j], adj, col_used, match_col, seen) {
            match_col[j] = i;
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize) -> DVector<f64> {
        DVector::from_element(n, 1.0 / n as f64)
    }

    /// Brute-force oracle: minimum over all permutations, ties to the
    /// lexicographically smallest one, enumerating permutations in
    /// lexicographic order.
    fn brute_force(cost: &DMatrix<f64>) -> (Vec<usize>, f64) {
        fn rec(
            i: usize,
            cost: &DMatrix<f64>,
            used: &mut Vec<bool>,
            cur: &mut Vec<usize>,
            acc: f64,
            best: &mut (Vec<usize>, f64),
        ) {
            let n = cost.nrows();
            if i == n {
                if acc < best.1 - 1e-12 {
                    *best = (cur.clone(), acc);
                }
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    cur.push(j);
                    rec(i + 1, cost, used, cur, acc + cost[(i, j)], best);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
        let n = cost.nrows();
        let mut best = (Vec::new(), f64::INFINITY);
        rec(0, cost, &mut vec![false; n], &mut Vec::new(), 0.0, &mut best);
        best
    }

    #[test]
    fn tie_resolves_to_identity() {
        // Both permutations cost 5: 0 + 5 and 4 + 1.
        let c = CostMatrix::from_entries(DMatrix::from_row_slice(2, 2, &[0.0, 4.0, 1.0, 5.0]), 2.0).unwrap();
        let plan = solve_exact_assignment(&c, &uniform(2), &uniform(2)).unwrap();
        assert_eq!(plan.mass, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
        assert!((plan.transport_cost - 2.5).abs() < 1e-15);
        assert_eq!(brute_force(c.entries()).0, vec![0, 1]);
    }

    #[test]
    fn zero_diagonal() {
        let c = CostMatrix::from_entries(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), 2.0).unwrap();
        let plan = solve_exact_assignment(&c, &uniform(2), &uniform(2)).unwrap();
        assert_eq!(plan.transport_cost, 0.0);
        assert_eq!(plan.mass[(0, 0)], 0.5);
    }

    #[test]
    fn matches_brute_force_on_random_8x8() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let c = DMatrix::from_fn(8, 8, |_, _| rng.random::<f64>() * 10.0);
            let (perm, total) = optimal_permutation(&c).unwrap();
            let (bperm, btotal) = brute_force(&c);
            assert!((total - btotal).abs() < 1e-9, "{total} vs {btotal}");
            assert_eq!(perm, bperm);
        }
    }

    #[test]
    fn integer_costs_with_many_ties_match_lexicographic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let c = DMatrix::from_fn(6, 6, |_, _| rng.random_range(0..3) as f64);
            let (perm, total) = optimal_permutation(&c).unwrap();
            let (bperm, btotal) = brute_force(&c);
            assert_eq!(total, btotal);
            assert_eq!(perm, bperm);
        }
    }

    #[test]
    fn rejects_non_assignment_instances() {
        let c = CostMatrix::from_entries(DMatrix::zeros(2, 3), 2.0).unwrap();
        assert!(matches!(
            solve_exact_assignment(&c, &uniform(2), &uniform(3)),
            Err(Error::NotAssignment(_))
        ));
        let c = CostMatrix::from_entries(DMatrix::zeros(2, 2), 2.0).unwrap();
        let skew = DVector::from_vec(vec![0.3, 0.7]);
        assert!(matches!(
            solve_exact_assignment(&c, &skew, &uniform(2)),
            Err(Error::NotAssignment(_))
        ));
    }
}
