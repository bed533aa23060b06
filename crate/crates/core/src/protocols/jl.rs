use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};

use super::ledger::{CommLedger, MessageKind};
use super::smd::check_source_len;
use crate::datagen::ExampleSource;
use crate::error::{check_dim, invalid, Result};
use crate::losses::LinkFunction;
use crate::rng::SimRng;
use crate::sparsify::BitCost;
use crate::vecspace::DenseVector;

/// Seed plus the `k` and `d` descriptors.
pub const SEED_MESSAGE_BITS: u64 = 64 + 32 + 32;

/// `k × d` matrix with exactly `col_sparsity` entries `±1/√col_sparsity` per
/// column, regenerated from a seed. `identity` replaces it with `I_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignMatrix {
    k: usize,
    d: usize,
    col_sparsity: usize,
    /// Per column: (row, signed entry).
    columns: Vec<Vec<(u32, f64)>>,
    identity: bool,
}

impl SparseSignMatrix {
    pub fn new(k: usize, d: usize, col_sparsity: usize, seed: u64) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(invalid("sketch dimensions must be positive"));
        }
        if k > u32::MAX as usize {
            return Err(invalid(format!("sketch dimension {k} exceeds 32 bits")));
        }
        let sc = col_sparsity.clamp(1, k);
        let mut rng = SimRng::seed_from_u64(seed);
        let v = 1.0 / (sc as f64).sqrt();
        let columns = (0..d)
            .map(|_| {
                let mut rows: Vec<usize> = sample_indices(&mut rng, k, sc).into_vec();
                rows.sort_unstable();
                rows.into_iter()
                    .map(|r| (r as u32, if rng.gen::<bool>() { v } else { -v }))
                    .collect()
            })
            .collect();
        Ok(SparseSignMatrix { k, d, col_sparsity: sc, columns, identity: false })
    }

    /// `I_d`, for checking the sketch-free path.
    pub fn identity(d: usize) -> Self {
        SparseSignMatrix { k: d, d, col_sparsity: 1, columns: Vec::new(), identity: true }
    }

    pub fn rows(&self) -> usize {
        self.k
    }

    pub fn cols(&self) -> usize {
        self.d
    }

    pub fn col_sparsity(&self) -> usize {
        self.col_sparsity
    }

    /// `A x`.
    pub fn apply(&self, x: &DenseVector) -> Result<DenseVector> {
        check_dim(self.d, x.dim())?;
        if self.identity {
            return Ok(x.clone());
        }
        let mut out = vec![0.0; self.k];
        for (j, &xj) in x.as_slice().iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for &(r, a) in &self.columns[j] {
                out[r as usize] += a * xj;
            }
        }
        DenseVector::new(out)
    }

    /// `Aᵀ u`.
    pub fn apply_transpose(&self, u: &DenseVector) -> Result<DenseVector> {
        check_dim(self.k, u.dim())?;
        if self.identity {
            return Ok(u.clone());
        }
        let out = self
            .columns
            .iter()
            .map(|col| col.iter().map(|&(r, a)| a * u[r as usize]).sum())
            .collect();
        DenseVector::new(out)
    }
}

/// Sketch size `⌈N ln(dN)⌉`, capped at `d`.
pub fn default_sketch_dim(d: usize, n_total: usize) -> usize {
    let k = (n_total as f64 * ((d as f64) * (n_total as f64)).ln()).ceil() as usize;
    k.clamp(1, d)
}

/// Column sparsity `⌈ln N⌉`.
pub fn default_col_sparsity(n_total: usize) -> usize {
    ((n_total as f64).ln().ceil() as usize).max(1)
}

#[derive(Debug, Clone)]
pub struct JlConfig {
    pub d: usize,
    pub n_total: usize,
    pub machines: usize,
    pub k: usize,
    pub eta: f64,
    /// Skip the sketch: `A = I_d`.
    pub identity: bool,
}

#[derive(Debug, Clone)]
pub struct JlRun {
    pub w_hat: DenseVector,
    pub ledger: CommLedger,
    pub sketch_dim: usize,
}

fn validate(d: usize, n_total: usize, machines: usize, eta: f64) -> Result<()> {
    if d == 0 || machines == 0 || n_total == 0 || n_total % machines != 0 {
        return Err(invalid(format!("need d, m > 0 and m | N, got d={d}, N={n_total}, m={machines}")));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(invalid(format!("eta must be positive, got {eta}")));
    }
    Ok(())
}

/// Unconstrained OGD on sketched features `A x`. Machine 1 broadcasts the
/// seed; each machine forwards `(u_{n+1}, Σ u_t)`. The output is
/// `Aᵀ` of the average of `u_1, …, u_N`.
pub fn run_jl_ogd<S: ExampleSource + ?Sized>(
    data: &S,
    cfg: &JlConfig,
    link: LinkFunction,
    seed: u64,
) -> Result<JlRun> {
    validate(cfg.d, cfg.n_total, cfg.machines, cfg.eta)?;
    check_dim(cfg.d, data.dim())?;
    check_source_len(data.size(), cfg.n_total as u64)?;
    if cfg.k == 0 || cfg.k > 64 * cfg.d {
        return Err(invalid(format!("sketch dimension {} outside [1, 64d]", cfg.k)));
    }
    let a = if cfg.identity {
        SparseSignMatrix::identity(cfg.d)
    } else {
        SparseSignMatrix::new(cfg.k, cfg.d, default_col_sparsity(cfg.n_total), seed)?
    };
    let k = a.rows();
    let mut ledger = CommLedger::new(cfg.machines);
    if !cfg.identity {
        ledger.record(0, MessageKind::Seed, BitCost::new(SEED_MESSAGE_BITS, 0));
    }
    let n = (cfg.n_total / cfg.machines) as u64;
    let mut u = DenseVector::zeros(k);
    let mut sum = DenseVector::zeros(k);
    for i in 0..cfg.machines {
        for t in 0..n {
            sum.axpy(1.0, &u)?;
            let z = data.example(i as u64 * n + t);
            let xs = a.apply(&z.x)?;
            let g = link.derivative(u.dot_unchecked(&xs), z.y);
            u.axpy(-cfg.eta * g, &xs)?;
        }
        if i + 1 < cfg.machines {
            ledger.record(i, MessageKind::Sketch, BitCost::new(0, 2 * 64 * k as u64));
        }
    }
    let avg = sum.scaled(1.0 / cfg.n_total as f64);
    Ok(JlRun { w_hat: a.apply_transpose(&avg)?, ledger, sketch_dim: k })
}

/// Centralized unconstrained OGD returning the average of `w_1, …, w_N`.
pub fn run_centralized_ogd<S: ExampleSource + ?Sized>(
    data: &S,
    d: usize,
    n_total: usize,
    eta: f64,
    link: LinkFunction,
) -> Result<DenseVector> {
    validate(d, n_total, 1, eta)?;
    check_dim(d, data.dim())?;
    check_source_len(data.size(), n_total as u64)?;
    let mut w = DenseVector::zeros(d);
    let mut sum = DenseVector::zeros(d);
    for i in 0..n_total as u64 {
        sum.axpy(1.0, &w)?;
        let z = data.example(i);
        let g = link.derivative(w.dot_unchecked(&z.x), z.y);
        w.axpy(-eta * g, &z.x)?;
    }
    Ok(sum.scaled(1.0 / n_total as f64))
}
