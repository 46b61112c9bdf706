//! Square linear sum assignment by shortest augmenting paths
//! (Jonker–Volgenant style, with the dual updates of Crouse's variant).

use crate::error::{Error, Result};

/// Minimum-cost perfect matching for a square cost matrix given row-major.
/// Returns `col_for_row` and the total cost.
pub fn solve_assignment(n: usize, cost: &[f64]) -> Result<(Vec<usize>, f64)> {
    if cost.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: cost.len() });
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("assignment costs must be finite".into()));
    }
    const NONE: usize = usize::MAX;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut col4row = vec![NONE; n];
    let mut row4col = vec![NONE; n];
    let mut shortest = vec![0.0; n];
    let mut path = vec![NONE; n];
    let mut remaining = vec![0usize; n];
    let mut in_sr = vec![false; n];
    let mut in_sc = vec![false; n];

    for cur_row in 0..n {
        shortest.fill(f64::INFINITY);
        path.fill(NONE);
        in_sr.fill(false);
        in_sc.fill(false);
        for (it, r) in remaining.iter_mut().enumerate() {
            *r = n - it - 1;
        }
        let mut num_remaining = n;
        let mut min_val = 0.0;
        let mut i = cur_row;
        let sink;
        loop {
            in_sr[i] = true;
            let mut lowest = f64::INFINITY;
            let mut index = NONE;
            for (it, &j) in remaining[..num_remaining].iter().enumerate() {
                let reduced = min_val + cost[i * n + j] - u[i] - v[j];
                if reduced < shortest[j] {
                    path[j] = i;
                    shortest[j] = reduced;
                }
                if shortest[j] < lowest || (shortest[j] == lowest && row4col[j] == NONE) {
                    lowest = shortest[j];
                    index = it;
                }
            }
            min_val = lowest;
            if index == NONE || !min_val.is_finite() {
                return Err(Error::InvalidParameter("assignment problem is infeasible".into()));
            }
            let j = remaining[index];
            in_sc[j] = true;
            num_remaining -= 1;
            remaining[index] = remaining[num_remaining];
            if row4col[j] == NONE {
                sink = j;
                break;
            }
            i = row4col[j];
        }

        u[cur_row] += min_val;
        for r in 0..n {
            if in_sr[r] && r != cur_row {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for c in 0..n {
            if in_sc[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            std::mem::swap(&mut col4row[r], &mut j);
            if r == cur_row {
                break;
            }
        }
    }

    let total = (0..n).map(|r| cost[r * n + col4row[r]]).sum();
    Ok((col4row, total))
}
