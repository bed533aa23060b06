//! One-sided Jacobi SVD for small square matrices.

use super::{dot_slice, DenseMatrix};
use crate::error::{Error, Result};

/// A pair of columns counts as orthogonal once |aᵢ·aⱼ| ≤ tol·‖aᵢ‖‖aⱼ‖.
pub const SVD_ROTATION_TOL: f64 = 1e-12;
pub const SVD_MAX_SWEEPS: usize = 80;

/// `M = U diag(σ) Vᵀ` with σ descending and nonnegative.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Left singular vectors as columns, row-major.
    pub left_vectors: DenseMatrix,
    pub singular_values: Vec<f64>,
    /// Right singular vectors as columns, row-major.
    pub right_vectors: DenseMatrix,
}

impl SvdResult {
    pub fn dim(&self) -> usize {
        self.singular_values.len()
    }

    pub fn left(&self, k: usize) -> Vec<f64> {
        self.left_vectors.column(k)
    }

    pub fn right(&self, k: usize) -> Vec<f64> {
        self.right_vectors.column(k)
    }

    /// `U diag(values) Vᵀ` in this basis.
    pub fn compose(&self, values: &[f64]) -> DenseMatrix {
        let d = self.dim();
        let mut out = DenseMatrix::zeros(d);
        for (k, &s) in values.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for i in 0..d {
                let a = s * self.left_vectors.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + a * self.right_vectors.get(j, k));
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.compose(&self.singular_values)
    }
}

/// Column-major scratch copy so Jacobi rotations touch contiguous memory.
struct Columns {
    d: usize,
    data: Vec<f64>,
}

impl Columns {
    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.d..(j + 1) * self.d]
    }

    fn rotate(&mut self, i: usize, j: usize, c: f64, s: f64) {
        let d = self.d;
        let (lo, hi) = self.data.split_at_mut(j * d);
        let a = &mut lo[i * d..(i + 1) * d];
        let b = &mut hi[..d];
        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
            let xi = *x;
            let yi = *y;
            *x = c * xi - s * yi;
            *y = s * xi + c * yi;
        }
    }
}

/// Singular value decomposition by one-sided (Hestenes) Jacobi with a fixed
/// cyclic sweep order.
pub fn svd(m: &DenseMatrix) -> Result<SvdResult> {
    let d = m.dim();
    let mut a = Columns { d, data: m.transpose().as_slice().to_vec() };
    let mut v = Columns { d, data: DenseMatrix::identity(d).as_slice().to_vec() };

    // Columns below 1e-16‖A‖_F sit under the null cut; rotating them only
    // chases underflow.
    let negligible = 1e-32 * dot_slice(&a.data, &a.data);
    let mut converged = d == 1;
    let mut last_off = 0.0_f64;
    for _sweep in 0..SVD_MAX_SWEEPS {
        let mut rotated = false;
        last_off = 0.0;
        for i in 0..d.saturating_sub(1) {
            for j in (i + 1)..d {
                let alpha = dot_slice(a.col(i), a.col(i));
                let beta = dot_slice(a.col(j), a.col(j));
                let gamma = dot_slice(a.col(i), a.col(j));
                if gamma == 0.0 || alpha.min(beta) <= negligible {
                    continue;
                }
                let scale = alpha.sqrt() * beta.sqrt();
                let off = gamma.abs() / scale;
                if !(off > SVD_ROTATION_TOL) {
                    continue;
                }
                last_off = last_off.max(off);
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                a.rotate(i, j, c, s);
                v.rotate(i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure {
            routine: "svd",
            detail: format!(
                "one-sided Jacobi did not converge in {SVD_MAX_SWEEPS} sweeps (d={d}, last off-diagonal ratio {last_off:.3e})"
            ),
        });
    }

    let norms: Vec<f64> = (0..d).map(|j| dot_slice(a.col(j), a.col(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let sigma_max = norms[order[0]];
    let null_cut = sigma_max * 1e-14 * d as f64;

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut sigma = Vec::with_capacity(d);
    let mut pending = Vec::new();
    for &k in &order {
        let s = norms[k];
        sigma.push(s);
        v_cols.push(v.col(k).to_vec());
        if s > null_cut && s > 0.0 {
            u_cols.push(a.col(k).iter().map(|x| x / s).collect());
        } else {
            pending.push(u_cols.len());
            u_cols.push(Vec::new());
        }
    }
    for slot in pending {
        u_cols[slot] = complete_basis(&u_cols, d);
    }

    for (u, v) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        if let Some(&first) = u.iter().find(|x| x.abs() > 1e-12) {
            if first < 0.0 {
                u.iter_mut().for_each(|x| *x = -*x);
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }

    Ok(SvdResult {
        left_vectors: from_columns(&u_cols, d),
        singular_values: sigma,
        right_vectors: from_columns(&v_cols, d),
    })
}

fn from_columns(cols: &[Vec<f64>], d: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(d);
    for (j, c) in cols.iter().enumerate() {
        for (i, &x) in c.iter().enumerate() {
            m.set(i, j, x);
        }
    }
    m
}

/// A unit vector orthogonal to every non-empty column in `cols`, obtained by
/// Gram-Schmidt (two passes) on the standard basis vector with the largest
/// residual.
fn complete_basis(cols: &[Vec<f64>], d: usize) -> Vec<f64> {
    let project_out = |x: &mut Vec<f64>| {
        for _ in 0..2 {
            for c in cols.iter().filter(|c| !c.is_empty()) {
                let h = dot_slice(x, c);
                for (xi, ci) in x.iter_mut().zip(c) {
                    *xi -= h * ci;
                }
            }
        }
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        project_out(&mut e);
        let n = dot_slice(&e, &e).sqrt();
        if best.as_ref().map_or(true, |(bn, _)| n > *bn) {
            best = Some((n, e));
        }
        if n > 0.7 {
            break;
        }
    }
    let (n, mut e) = best.expect("d > 0");
    e.iter_mut().for_each(|x| *x /= n);
    e
}
