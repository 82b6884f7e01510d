//! Classical aggregators used for comparison: footrule-optimal aggregation via
//! minimum-cost assignment, and brute-force Kemeny consensus for small `N`.

use serde::Serialize;

use crate::error::{FraError, Result};
use crate::perm::{all_permutations, kendall_tau, Permutation};
use crate::scalar::Real;

/// Brute-force Kemeny search is refused above this size.
pub const KEMENY_LIMIT: usize = 8;

/// Square matrix of non-negative integer costs, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AssignmentProblem {
    n: usize,
    cost: Vec<u64>,
}

impl AssignmentProblem {
    pub fn new(rows: Vec<Vec<u64>>) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(FraError::InvalidParameter(format!(
                "cost matrix is not square: {n} rows but a row of length {}",
                r.len()
            )));
        }
        Ok(Self { n, cost: rows.into_iter().flatten().collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cost(&self, row: usize, col: usize) -> u64 {
        self.cost[row * self.n + col]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AssignmentSolution {
    /// `assignment[row]` is the column given to that row.
    pub assignment: Vec<usize>,
    pub total_cost: u64,
}

/// Minimum-cost perfect assignment. Among optimal assignments the
/// lexicographically smallest `assignment` vector is returned.
pub fn solve_assignment(problem: &AssignmentProblem) -> Result<AssignmentSolution> {
    let n = problem.n;
    if n == 0 {
        return Ok(AssignmentSolution { assignment: Vec::new(), total_cost: 0 });
    }
    let a = |i: usize, j: usize| -> i64 {
        i64::try_from(problem.cost(i, j)).expect("costs fit in i64")
    };

    // Shortest augmenting paths with potentials; rows and columns 1-based, 0 is a sentinel.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = i64::MAX;
            let mut col1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = col0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        col1 = j;
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
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    // Optimal assignments are exactly the perfect matchings on zero reduced-cost edges.
    let tight = |i: usize, j: usize| a(i, j) - u[i + 1] - v[j + 1] == 0;
    let mut col_of = vec![0usize; n];
    let mut row_of = vec![0usize; n];
    for j in 1..=n {
        col_of[owner[j] - 1] = j - 1;
        row_of[j - 1] = owner[j] - 1;
    }
    lexicographic_minimum(n, &tight, &mut col_of, &mut row_of);

    let total_cost = col_of.iter().enumerate().map(|(i, &j)| problem.cost(i, j)).sum();
    Ok(AssignmentSolution { assignment: col_of, total_cost })
}

/// Rewrites a perfect matching in the `tight` graph into the lexicographically
/// smallest one, fixing rows in order and rerouting along alternating paths.
fn lexicographic_minimum(
    n: usize,
    tight: &dyn Fn(usize, usize) -> bool,
    col_of: &mut [usize],
    row_of: &mut [usize],
) {
    let mut next = vec![usize::MAX; n];
    let mut reaches = vec![false; n];
    let mut queue = Vec::with_capacity(n);
    for row in 0..n {
        let freed = col_of[row];
        // Rows (unfixed, other than `row`) that can give up their column and
        // reach `freed` by an alternating path; `next[r]` is the column r moves to.
        reaches.iter_mut().for_each(|x| *x = false);
        queue.clear();
        queue.push(freed);
        let mut head = 0;
        while head < queue.len() {
            let col = queue[head];
            head += 1;
            for r in row + 1..n {
                if !reaches[r] && tight(r, col) {
                    reaches[r] = true;
                    next[r] = col;
                    queue.push(col_of[r]);
                }
            }
        }
        let best = (0..n)
            .filter(|&j| tight(row, j))
            .find(|&j| j == freed || (row_of[j] > row && reaches[row_of[j]]))
            .expect("current column is always available");
        if best == freed {
            continue;
        }
        let mut r = row_of[best];
        col_of[row] = best;
        row_of[best] = row;
        loop {
            let col = next[r];
            let displaced = row_of[col];
            col_of[r] = col;
            row_of[col] = r;
            if col == freed {
                break;
            }
            r = displaced;
        }
    }
}

/// `cost[i][j] = Σ_m |σ_m(i) − j|` over 1-based positions.
pub fn footrule_costs(rankings: &[Permutation]) -> Result<AssignmentProblem> {
    let first = rankings.first().ok_or(FraError::EmptyInput("rankings"))?;
    let n = first.len();
    let mut hist = vec![0u64; n * n];
    for r in rankings {
        if r.len() != n {
            return Err(FraError::LengthMismatch { expected: n, got: r.len() });
        }
        for (item, &pos) in r.positions().iter().enumerate() {
            hist[item * n + pos] += 1;
        }
    }
    let m = rankings.len() as u64;
    let mut cost = vec![0u64; n * n];
    for item in 0..n {
        let counts = &hist[item * n..(item + 1) * n];
        let total_pos: u64 = counts.iter().enumerate().map(|(p, &c)| c * p as u64).sum();
        let (mut below, mut below_pos) = (0u64, 0u64);
        for j in 0..n {
            let jj = j as u64;
            // Positions p ≤ j contribute j − p, the rest p − j.
            below += counts[j];
            below_pos += counts[j] * jj;
            let above = m - below;
            let above_pos = total_pos - below_pos;
            cost[item * n + j] = (below * jj - below_pos) + (above_pos - above * jj);
        }
    }
    Ok(AssignmentProblem { n, cost })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FootruleAggregate {
    pub estimate: Permutation,
    /// Total footrule distance from the estimate to the input rankings.
    pub cost: u64,
}

pub fn footrule_aggregate(rankings: &[Permutation]) -> Result<FootruleAggregate> {
    let problem = footrule_costs(rankings)?;
    let solution = solve_assignment(&problem)?;
    Ok(FootruleAggregate {
        estimate: Permutation::from_zero_based(solution.assignment)?,
        cost: solution.total_cost,
    })
}

/// `prefers[a][b]`: how many rankings put item `a` ahead of item `b`.
fn pairwise_counts(rankings: &[Permutation], n: usize) -> Result<Vec<u64>> {
    let mut prefers = vec![0u64; n * n];
    for r in rankings {
        if r.len() != n {
            return Err(FraError::LengthMismatch { expected: n, got: r.len() });
        }
        let pos = r.positions();
        for a in 0..n {
            for b in 0..n {
                if pos[a] < pos[b] {
                    prefers[a * n + b] += 1;
                }
            }
        }
    }
    Ok(prefers)
}

/// Exact Kemeny consensus by enumeration; ties go to the lexicographically
/// smallest optimum.
pub fn kemeny_bruteforce(rankings: &[Permutation]) -> Result<Permutation> {
    let first = rankings.first().ok_or(FraError::EmptyInput("rankings"))?;
    let n = first.len();
    if n > KEMENY_LIMIT {
        return Err(FraError::TooLarge { n, limit: KEMENY_LIMIT });
    }
    let prefers = pairwise_counts(rankings, n)?;
    let mut best: Option<(u64, Permutation)> = None;
    for candidate in all_permutations(n) {
        let pos = candidate.positions();
        let mut disagreements = 0u64;
        for a in 0..n {
            for b in 0..n {
                if pos[a] < pos[b] {
                    disagreements += prefers[b * n + a];
                }
            }
        }
        if best.as_ref().is_none_or(|(d, _)| disagreements < *d) {
            best = Some((disagreements, candidate));
        }
    }
    Ok(best.expect("S_N is non-empty").1)
}

/// Mean Kendall τ from `candidate` to the rankings, divided by `N`.
pub fn kemeny_objective<T: Real>(candidate: &Permutation, rankings: &[Permutation]) -> Result<T> {
    if rankings.is_empty() {
        return Err(FraError::EmptyInput("rankings"));
    }
    let mut total = 0u64;
    for r in rankings {
        total += kendall_tau(candidate, r)?;
    }
    let denom = (rankings.len() * candidate.len().max(1)) as f64;
    Ok(T::of_f64(total as f64 / denom))
}
