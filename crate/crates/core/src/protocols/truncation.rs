use super::config::ProtocolConfig;
use super::ledger::{CommLedger, MessageKind};
use super::smd::{check_source_len, run_centralized_md, SmdOptions};
use crate::datagen::ExampleSource;
use crate::error::{check_dim, invalid, Result};
use crate::losses::{Example, LinkFunction};
use crate::sparsify::{list_code_width, BitCost};
use crate::vecspace::DenseVector;

/// `k = ⌈κ N^{q/2}⌉`, capped at `d`.
pub fn truncation_level(kappa: f64, n_total: usize, q: f64, d: usize) -> Result<usize> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(invalid(format!("kappa_trunc must be positive, got {kappa}")));
    }
    let k = (kappa * (n_total as f64).powf(q / 2.0)).ceil();
    Ok((k as usize).clamp(1, d))
}

/// Keeps the `k` largest-magnitude coordinates of every feature vector,
/// lower index first among ties.
pub struct TruncatedSource<'a, S: ExampleSource + ?Sized> {
    inner: &'a S,
    k: usize,
}

impl<'a, S: ExampleSource + ?Sized> TruncatedSource<'a, S> {
    pub fn new(inner: &'a S, k: usize) -> Self {
        TruncatedSource { inner, k }
    }
}

fn truncate(x: &DenseVector, k: usize) -> DenseVector {
    let d = x.dim();
    if k >= d {
        return x.clone();
    }
    let v = x.as_slice();
    let mut order: Vec<usize> = (0..d).filter(|&i| v[i] != 0.0).collect();
    if order.len() <= k {
        return x.clone();
    }
    order.select_nth_unstable_by(k - 1, |&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    let mut out = vec![0.0; d];
    for &i in &order[..k] {
        out[i] = v[i];
    }
    DenseVector::new(out).expect("finite input")
}

impl<S: ExampleSource + ?Sized> ExampleSource for TruncatedSource<'_, S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn example(&self, i: u64) -> Example {
        let z = self.inner.example(i);
        Example { x: truncate(&z.x, self.k), y: z.y }
    }

    fn size(&self) -> Option<u64> {
        self.inner.size()
    }
}

#[derive(Debug, Clone)]
pub struct TruncationRun {
    pub w_hat: DenseVector,
    pub ledger: CommLedger,
    pub k: usize,
}

/// Every machine ships its examples truncated to `k` coordinates, each as
/// an index and a double plus a 64-bit label, or densely once `k = d`; the
/// receiver runs centralized mirror descent on them.
pub fn run_truncation_baseline<S: ExampleSource + ?Sized>(
    data: &S,
    cfg: &ProtocolConfig,
    link: LinkFunction,
    kappa_trunc: f64,
    seed: u64,
) -> Result<TruncationRun> {
    cfg.validate()?;
    check_dim(cfg.d, data.dim())?;
    check_source_len(data.size(), cfg.n_total as u64)?;
    let k = truncation_level(kappa_trunc, cfg.n_total, cfg.q, cfg.d)?;
    let per_example = if k >= cfg.d {
        64 * cfg.d as u64
    } else {
        k as u64 * (u64::from(list_code_width(cfg.d)) - 1 + 64)
    };
    let mut ledger = CommLedger::new(cfg.machines);
    let n = cfg.n() as u64;
    for i in 0..cfg.n_total as u64 {
        ledger.record((i / n) as usize, MessageKind::Truncated, BitCost::new(64, per_example));
    }
    let source = TruncatedSource::new(data, k);
    let run = run_centralized_md(&source, cfg, link, seed, &SmdOptions::default())?;
    Ok(TruncationRun { w_hat: run.w_hat, ledger, k })
}
