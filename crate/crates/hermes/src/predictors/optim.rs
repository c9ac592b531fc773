//! Deterministic smoothing-coefficient optimization (grid scan refined by
//! coordinate descent) and the AIC used for all model-selection ties.

/// Grid over [0.01, 0.99] step 0.02 refined by halving coordinate descent.
pub fn minimize_1d(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut best_x = 0.01;
    let mut best_v = f(best_x);
    let mut x = 0.01;
    while x <= 0.99 + 1e-12 {
        let v = f(x);
        if v < best_v {
            best_v = v;
            best_x = x;
        }
        x += 0.02;
    }
    let mut step = 0.01;
    while step > 1e-4 {
        let mut moved = true;
        while moved {
            moved = false;
            for cand in [best_x - step, best_x + step] {
                let cand = cand.clamp(1e-4, 1.0 - 1e-4);
                let v = f(cand);
                if v < best_v {
                    best_v = v;
                    best_x = cand;
                    moved = true;
                }
            }
        }
        step /= 2.0;
    }
    (best_x, best_v)
}

/// Same scheme over two coefficients.
pub fn minimize_2d(f: impl Fn(f64, f64) -> f64) -> ((f64, f64), f64) {
    let mut best = (0.01, 0.01);
    let mut best_v = f(best.0, best.1);
    let mut x = 0.01;
    while x <= 0.99 + 1e-12 {
        let mut y = 0.01;
        while y <= 0.99 + 1e-12 {
            let v = f(x, y);
            if v < best_v {
                best_v = v;
                best = (x, y);
            }
            y += 0.02;
        }
        x += 0.02;
    }
    let mut step = 0.01;
    while step > 1e-4 {
        let mut moved = true;
        while moved {
            moved = false;
            let candidates = [
                (best.0 - step, best.1),
                (best.0 + step, best.1),
                (best.0, best.1 - step),
                (best.0, best.1 + step),
            ];
            for (cx, cy) in candidates {
                let cand = (cx.clamp(1e-4, 1.0 - 1e-4), cy.clamp(1e-4, 1.0 - 1e-4));
                let v = f(cand.0, cand.1);
                if v < best_v {
                    best_v = v;
                    best = cand;
                    moved = true;
                }
            }
        }
        step /= 2.0;
    }
    (best, best_v)
}

/// AIC = n*ln(SSE/n) + 2k, with SSE/n floored so exact fits stay finite and
/// ties still break toward the simpler model.
pub fn aic(n: usize, sse: f64, k: usize) -> f64 {
    let n_f = n as f64;
    n_f * (sse / n_f).max(1e-12).ln() + 2.0 * k as f64
}

/// Solve a small symmetric linear system `A x = b` by Gaussian elimination
/// with partial pivoting. Returns None if singular.
pub fn solve_linear(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Ordinary least squares of `y` on the rows of `design` (n x p).
pub fn ols(design: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let p = design.first()?.len();
    let mut ata = vec![vec![0.0; p]; p];
    let mut atb = vec![0.0; p];
    for (row, target) in design.iter().zip(y) {
        for i in 0..p {
            for j in i..p {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * target;
        }
    }
    for i in 0..p {
        for j in 0..i {
            ata[i][j] = ata[j][i];
        }
    }
    solve_linear(&mut ata, &mut atb)
}
