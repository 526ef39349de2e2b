//! Exact solvers for discrete transport with uniform weights.

use crate::error::{Error, Result};

/// Minimum-cost perfect matching on a square row-major cost matrix by
/// shortest augmenting paths with dual potentials. Returns the total cost
/// and `col_of[row]`.
pub fn linear_assignment(cost: &[f64], n: usize) -> Result<(f64, Vec<usize>)> {
    if cost.len() != n * n {
        return Err(Error::shape("linear_assignment", n * n, cost.len()));
    }
    if n == 0 {
        return Ok((0.0, Vec::new()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::numerical("assignment cost matrix has non-finite entries"));
    }
    // 1-based potentials; p[j] is the row matched to column j, 0 = free
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
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
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[p[j] - 1] = j - 1;
    }
    let total = col_of.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok((total, col_of))
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    i: usize,
    j: usize,
    flow: i64,
}

/// Exact transportation problem with integer supplies `a` (rows) and
/// demands `b` (columns) of equal total, by the transportation simplex
/// started from the north-west corner rule. Returns the total cost and the
/// nonzero flows.
pub fn transportation_simplex(a: &[i64], b: &[i64], cost: &[f64]) -> Result<(f64, Vec<(usize, usize, i64)>)> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::invalid("transportation problem needs non-empty supplies and demands"));
    }
    if cost.len() != n * m {
        return Err(Error::shape("transportation_simplex", n * m, cost.len()));
    }
    if a.iter().chain(b).any(|&v| v < 0) || a.iter().sum::<i64>() != b.iter().sum::<i64>() {
        return Err(Error::invalid("supplies and demands must be nonnegative with equal totals"));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::numerical("transport cost matrix has non-finite entries"));
    }

    // north-west corner: n + m - 1 basic cells forming a spanning tree
    let mut cells: Vec<Cell> = Vec::with_capacity(n + m - 1);
    {
        let (mut i, mut j) = (0, 0);
        let (mut ra, mut rb) = (a[0], b[0]);
        loop {
            let f = ra.min(rb);
            cells.push(Cell { i, j, flow: f });
            ra -= f;
            rb -= f;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if (ra == 0 && i < n - 1) || j == m - 1 {
                i += 1;
                ra = a[i];
            } else {
                j += 1;
                rb = b[j];
            }
        }
    }

    // tree nodes: rows 0..n, columns n..n+m
    let nodes = n + m;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (k, c) in cells.iter().enumerate() {
        adj[c.i].push(k);
        adj[n + c.j].push(k);
    }
    let scale = cost.iter().fold(0.0f64, |s, c| s.max(c.abs()));
    let tol = 1e-12 * (1.0 + scale);
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    let mut seen = vec![false; nodes];
    let mut parent = vec![usize::MAX; nodes];
    let mut queue = Vec::with_capacity(nodes);
    let max_iter = 100 * nodes * nodes.max(100);

    for _ in 0..max_iter {
        // potentials from the tree, u_0 = 0
        seen.iter_mut().for_each(|s| *s = false);
        queue.clear();
        queue.push(0);
        seen[0] = true;
        u[0] = 0.0;
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            for &k in &adj[node] {
                let c = cells[k];
                let other = if node < n { n + c.j } else { c.i };
                if !seen[other] {
                    seen[other] = true;
                    if node < n {
                        v[c.j] = cost[c.i * m + c.j] - u[c.i];
                    } else {
                        u[c.i] = cost[c.i * m + c.j] - v[c.j];
                    }
                    queue.push(other);
                }
            }
        }

        // most negative reduced cost
        let mut best = -tol;
        let mut enter = None;
        for i in 0..n {
            let row = &cost[i * m..(i + 1) * m];
            let ui = u[i];
            for j in 0..m {
                let r = row[j] - ui - v[j];
                if r < best {
                    best = r;
                    enter = Some((i, j));
                }
            }
        }
        let (ei, ej) = match enter {
            None => {
                let total = cells.iter().map(|c| c.flow as f64 * cost[c.i * m + c.j]).sum();
                let flows = cells.iter().filter(|c| c.flow > 0).map(|c| (c.i, c.j, c.flow)).collect();
                return Ok((total, flows));
            }
            Some(e) => e,
        };

        // tree path from column ej back to row ei
        seen.iter_mut().for_each(|s| *s = false);
        queue.clear();
        queue.push(n + ej);
        seen[n + ej] = true;
        let mut head = 0;
        while head < queue.len() && !seen[ei] {
            let node = queue[head];
            head += 1;
            for &k in &adj[node] {
                let c = cells[k];
                let other = if node < n { n + c.j } else { c.i };
                if !seen[other] {
                    seen[other] = true;
                    parent[other] = k;
                    queue.push(other);
                }
            }
        }
        // walking from ei to column ej the edge signs alternate -, +, -, ...
        // starting next to the entering cell's row
        let mut path = Vec::new();
        let mut node = ei;
        while node != n + ej {
            let k = parent[node];
            path.push(k);
            let c = cells[k];
            node = if node < n { n + c.j } else { c.i };
        }
        let mut theta = i64::MAX;
        let mut leave = usize::MAX;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 && cells[k].flow < theta {
                theta = cells[k].flow;
                leave = k;
            }
        }
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                cells[k].flow -= theta;
            } else {
                cells[k].flow += theta;
            }
        }
        // replace the leaving cell by the entering one
        let old = cells[leave];
        adj[old.i].retain(|&k| k != leave);
        adj[n + old.j].retain(|&k| k != leave);
        cells[leave] = Cell {
            i: ei,
            j: ej,
            flow: theta,
        };
        adj[ei].push(leave);
        adj[n + ej].push(leave);
    }
    Err(Error::NoConvergence(format!(
        "transportation simplex exceeded {} pivots",
        max_iter
    )))
}
