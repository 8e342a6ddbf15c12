use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::io::Network;

use super::center_columns;

/// Shortest-path lengths on the symmetrized network (a tie in either
/// direction counts as an edge). Unreachable pairs get the observed diameter
/// plus one, so every entry is finite.
pub fn geodesic_distances(net: &Network) -> Vec<Vec<f64>> {
    let n = net.n();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| net.tie(i, j) || net.tie(j, i)).collect())
        .collect();
    let mut hops = vec![vec![usize::MAX; n]; n];
    let mut queue = VecDeque::new();
    for (source, row) in hops.iter_mut().enumerate() {
        row[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &v in &neighbors[u] {
                if row[v] == usize::MAX {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    let diameter = hops
        .iter()
        .flatten()
        .filter(|&&h| h != usize::MAX)
        .max()
        .copied()
        .unwrap_or(0);
    let cap = (diameter + 1) as f64;
    hops.into_iter()
        .map(|row| {
            row.into_iter()
                .map(|h| if h == usize::MAX { cap } else { h as f64 })
                .collect()
        })
        .collect()
}

/// Classical MDS of the geodesic distances: double-center the squared
/// distances and scale the top `dim` eigenvectors by the square roots of their
/// eigenvalues. Non-positive eigenvalues give zero coordinates. Columns are
/// centered; each axis is signed so its largest-magnitude entry is positive.
pub fn initialize_positions(net: &Network, dim: usize) -> Vec<Vec<f64>> {
    let n = net.n();
    let geo = geodesic_distances(net);
    let sq = DMatrix::from_fn(n, n, |i, j| geo[i][j] * geo[i][j]);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let grand = sq.mean();
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand)
    });
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    let mut positions = vec![vec![0.0; dim]; n];
    for (k, &idx) in order.iter().take(dim).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda <= 1e-10 * scale {
            continue;
        }
        let v = eig.eigenvectors.column(idx);
        let pivot = (0..n)
            .max_by(|&a, &c| v[a].abs().total_cmp(&v[c].abs()).then(c.cmp(&a)))
            .unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        let root = lambda.sqrt();
        for (i, row) in positions.iter_mut().enumerate() {
            row[k] = sign * v[i] * root;
        }
    }
    center_columns(&mut positions);
    positions
}
