use nalgebra::DMatrix;

use super::{LsmError, LsmParams};

/// Subtracts each column's mean in place.
pub fn center_columns(positions: &mut [Vec<f64>]) {
    let Some(dim) = positions.first().map(Vec::len) else {
        return;
    };
    let n = positions.len() as f64;
    for k in 0..dim {
        let mean = positions.iter().map(|r| r[k]).sum::<f64>() / n;
        for row in positions.iter_mut() {
            row[k] -= mean;
        }
    }
}

fn to_matrix(positions: &[Vec<f64>]) -> DMatrix<f64> {
    let dim = positions.first().map_or(0, Vec::len);
    DMatrix::from_fn(positions.len(), dim, |i, k| positions[i][k])
}

/// Orthogonal `R` minimizing ‖X·R − reference‖.
fn procrustes_rotation(x: &DMatrix<f64>, reference: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = (x.transpose() * reference).svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => u * v_t,
        _ => DMatrix::identity(x.ncols(), x.ncols()),
    }
}

fn align_to(positions: &mut [Vec<f64>], reference: &[Vec<f64>]) {
    let dim = reference.first().map_or(0, Vec::len);
    center_columns(positions);
    if dim > 1 {
        let x = to_matrix(positions);
        let rotated = &x * procrustes_rotation(&x, &to_matrix(reference));
        for (i, row) in positions.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = rotated[(i, k)];
            }
        }
    }
    for k in 0..dim {
        let inner: f64 = positions
            .iter()
            .zip(reference)
            .map(|(a, b)| a[k] * b[k])
            .sum();
        if inner < 0.0 {
            for row in positions.iter_mut() {
                row[k] = -row[k];
            }
        }
    }
}

/// Centers every draw's positions, then reflects (and for `dim > 1`
/// rotates) each draw onto the first centered draw.
pub fn align_draws(mut draws: Vec<LsmParams>) -> Vec<LsmParams> {
    let Some(first) = draws.first_mut() else {
        return draws;
    };
    center_columns(&mut first.positions);
    let reference = first.positions.clone();
    for draw in draws.iter_mut().skip(1) {
        align_to(&mut draw.positions, &reference);
    }
    draws
}

/// Coordinate-wise posterior mean of aligned draws, positions re-centered.
pub fn point_estimates(draws: &[LsmParams]) -> Result<LsmParams, LsmError> {
    let first = draws.first().ok_or(LsmError::NoDraws)?;
    let m = draws.len() as f64;
    let mut mean = LsmParams {
        alpha: 0.0,
        beta: vec![0.0; first.beta.len()],
        positions: vec![vec![0.0; first.dim()]; first.positions.len()],
    };
    for draw in draws {
        mean.alpha += draw.alpha;
        for (acc, b) in mean.beta.iter_mut().zip(&draw.beta) {
            *acc += b;
        }
        for (acc, row) in mean.positions.iter_mut().zip(&draw.positions) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
    }
    mean.alpha /= m;
    mean.beta.iter_mut().for_each(|b| *b /= m);
    mean.positions.iter_mut().flatten().for_each(|v| *v /= m);
    center_columns(&mut mean.positions);
    Ok(mean)
}
