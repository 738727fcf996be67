//! Exact linear assignment (shortest augmenting paths with potentials).

use crate::error::{OtError, Result};

/// Largest problem accepted by the exact solver.
pub const MAX_ASSIGNMENT: usize = 2000;

/// Minimum-cost perfect matching on a square cost matrix given row-major.
/// Returns `perm` with row `i` assigned to column `perm[i]`, and the total cost.
pub fn solve_assignment(cost: &[f64], n: usize) -> Result<(Vec<usize>, f64)> {
    if n == 0 {
        return Err(OtError::OracleInfeasible("empty problem".into()));
    }
    if n > MAX_ASSIGNMENT {
        return Err(OtError::OracleInfeasible(format!("{n} points exceed the exact limit {MAX_ASSIGNMENT}")));
    }
    if cost.len() != n * n {
        return Err(OtError::OracleInfeasible(format!("cost matrix has {} entries, expected {}", cost.len(), n * n)));
    }
    if let Some(i) = cost.iter().position(|c| !c.is_finite()) {
        return Err(OtError::OracleInfeasible(format!("non-finite cost at entry {i}")));
    }
    // 1-based arrays; index 0 is the virtual root column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[owner[j] - 1] = j - 1;
    }
    let total = perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok((perm, total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(cost: &[f64], n: usize) -> f64 {
        fn rec(cost: &[f64], n: usize, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == n {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row * n + j] + rec(cost, n, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cost, n, 0, &mut vec![false; n])
    }

    #[test]
    fn matches_enumeration() {
        use rand::Rng;
        let mut rng = crate::rng::stream(5, 0);
        for n in 1..=7 {
            for _ in 0..20 {
                let cost: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() * 10.0 - 3.0).collect();
                let (perm, total) = solve_assignment(&cost, n).unwrap();
                let mut seen = perm.clone();
                seen.sort_unstable();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
                assert!((total - brute_force(&cost, n)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(solve_assignment(&[], 0), Err(OtError::OracleInfeasible(_))));
        assert!(matches!(solve_assignment(&[1.0, f64::NAN, 0.0, 0.0], 2), Err(OtError::OracleInfeasible(_))));
        assert!(matches!(solve_assignment(&[1.0; 3], 2), Err(OtError::OracleInfeasible(_))));
    }
}
