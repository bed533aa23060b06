use rand::Rng;

use super::config::{OutputRule, ProtocolConfig};
use super::ledger::{CommLedger, MessageKind};
use super::smd::{check_source_len, MachineTrace};
use crate::datagen::MatrixExampleSource;
use crate::error::{check_dim, Error, Result};
use crate::losses::LinkFunction;
use crate::mirror::{L1Ball, MirrorMap};
use crate::rng::{stream, SimRng};
use crate::sparsify::{spectral_maurey, BitCost, SpectralMessage};
use crate::vecspace::{norm_slice, schatten_norm, svd, DenseMatrix, DenseVector, Exponent, SvdResult};

const OUTPUT_SELECT_STREAM: u64 = 0;
const OUTPUT_SPARSIFY_STREAM: u64 = 1;
const HANDOFF_STREAM_BASE: u64 = 2;

/// `R(W) = ½‖W‖_{S_p}²`, acting on singular values through the vector map
/// `½‖σ‖_p²`. Unitary invariance makes `∇R`, its inverse and the Bregman
/// projection onto `{‖W‖_{S₁} ≤ B}` share singular vectors with their input.
#[derive(Debug, Clone)]
pub struct SchattenMirror {
    spectral: MirrorMap,
}

impl SchattenMirror {
    pub fn from_dual_exponent(q: f64, d: usize) -> Result<Self> {
        Ok(SchattenMirror { spectral: MirrorMap::from_dual_exponent(q, DenseVector::zeros(d))? })
    }

    pub fn p(&self) -> f64 {
        self.spectral.p()
    }

    fn map_spectrum(dec: &SvdResult, f: impl Fn(&DenseVector) -> Result<DenseVector>) -> Result<DenseMatrix> {
        let sigma = DenseVector::new(dec.singular_values.clone())?;
        Ok(dec.compose(f(&sigma)?.as_slice()))
    }

    pub fn value(&self, w: &DenseMatrix) -> Result<f64> {
        let n = norm_slice(&svd(w)?.singular_values, Exponent::Finite(self.p()));
        Ok(0.5 * n * n)
    }

    pub fn grad_reg(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        Self::map_spectrum(&svd(w)?, |s| self.spectral.grad_reg(s))
    }

    pub fn bregman(&self, a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
        let diff = a.sub(b)?;
        let d = self.value(a)? - self.value(b)? - self.grad_reg(b)?.inner(&diff)?;
        Ok(d.max(0.0))
    }

    /// Primal point, its dual image and its trace norm for the dual point
    /// `y`, after Bregman projection onto the trace-norm ball.
    pub fn project(&self, ball: &L1Ball, y: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix, f64)> {
        let dec = svd(y)?;
        let dual = DenseVector::new(dec.singular_values.clone())?;
        let primal = self.spectral.bregman_project(ball, &dual)?;
        let back = self.spectral.grad_reg(&primal)?;
        Ok((dec.compose(primal.as_slice()), dec.compose(back.as_slice()), primal.l1()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SchattenOptions {
    pub comparator: Option<DenseMatrix>,
    pub record_iterates: bool,
}

#[derive(Debug, Clone)]
pub struct SchattenRun {
    pub w_hat: DenseMatrix,
    pub ledger: CommLedger,
    pub traces: Vec<MachineTrace>,
    pub iterates: Vec<Vec<DenseMatrix>>,
}

fn transmit_matrix(
    w: &DenseMatrix,
    s: Option<u64>,
    rng: &mut SimRng,
    ledger: &mut CommLedger,
    machine: usize,
    kind: MessageKind,
) -> Result<DenseMatrix> {
    let d = w.dim();
    match s {
        None => {
            ledger.record(machine, MessageKind::Dense, BitCost::new(0, 64 * (d * d) as u64));
            Ok(w.clone())
        }
        Some(s) => {
            let msg = spectral_maurey(w, s, rng)?;
            let (bits, cost) = msg.encode(d)?;
            ledger.record(machine, kind, cost);
            SpectralMessage::decode_bits(&bits, d)?.decode(d)
        }
    }
}

/// Sparsified mirror descent over `d × d` matrices with the Schatten
/// regularizer and trace-norm constraint; handoffs use spectral sampling
/// with factors shipped at 64 bits per entry.
pub fn run_schatten_smd<S: MatrixExampleSource + ?Sized>(
    data: &S,
    cfg: &ProtocolConfig,
    link: LinkFunction,
    seed: u64,
    opts: &SchattenOptions,
) -> Result<SchattenRun> {
    cfg.validate()?;
    let d = cfg.d;
    check_dim(d, data.dim())?;
    check_source_len(data.size(), cfg.n_total as u64)?;
    if let Some(w) = &opts.comparator {
        check_dim(d, w.dim())?;
    }
    let mirror = SchattenMirror::from_dual_exponent(cfg.q, d)?;
    let ball = L1Ball::new(cfg.b1)?;
    let q_norm = Exponent::Finite(cfg.q);
    let n = cfg.n() as u64;
    let mut ledger = CommLedger::new(cfg.machines);
    let mut traces = Vec::new();
    let mut iterates = Vec::new();
    let mut select_rng = stream(seed, OUTPUT_SELECT_STREAM);
    let mut seen = 0u64;
    let mut sampled: Option<(usize, DenseMatrix)> = None;
    let mut averages = Vec::new();

    let mut w = DenseMatrix::zeros(d);
    let mut dual = DenseMatrix::zeros(d);
    for i in 0..cfg.machines {
        let w_first = w.clone();
        let (mut regret, mut grad_norm_sq) = (0.0, 0.0);
        let mut max_s1 = norm_slice(&svd(&w)?.singular_values, Exponent::one());
        let mut sum = DenseMatrix::zeros(d);
        let mut path = Vec::new();
        for t in 0..n {
            if opts.record_iterates {
                path.push(w.clone());
            }
            seen += 1;
            if select_rng.gen_range(0..seen) == 0 {
                sampled = Some((i, w.clone()));
            }
            if cfg.output == OutputRule::AveragedHighProbability {
                sum.axpy(1.0, &w)?;
            }
            let z = data.example(i as u64 * n + t);
            check_dim(d, z.x.dim())?;
            let g = link.derivative(w.inner(&z.x)?, z.y);
            let grad = z.x.scaled(g);
            if let Some(ws) = &opts.comparator {
                regret += grad.inner(&w.sub(ws)?)?;
                let gn = schatten_norm(&grad, q_norm)?;
                grad_norm_sq += gn * gn;
            }
            dual.axpy(-cfg.eta, &grad)?;
            let (next, next_dual, s1) = mirror.project(&ball, &dual)?;
            w = next;
            dual = next_dual;
            max_s1 = max_s1.max(s1);
        }
        if opts.record_iterates {
            path.push(w.clone());
            iterates.push(path);
        }
        if let Some(ws) = &opts.comparator {
            let bregman_start = mirror.bregman(ws, &w_first)?;
            let bregman_end = mirror.bregman(ws, &w)?;
            traces.push(MachineTrace {
                machine: i,
                examples: n,
                regret,
                grad_norm_sq,
                bregman_start,
                bregman_end,
                bound: cfg.eta * cfg.c_q() / 2.0 * grad_norm_sq + (bregman_start - bregman_end) / cfg.eta,
                max_l1: max_s1,
            });
        }
        if cfg.output == OutputRule::AveragedHighProbability {
            averages.push(sum.scaled(1.0 / n as f64));
        }
        if i + 1 < cfg.machines {
            let mut rng = stream(seed, HANDOFF_STREAM_BASE + i as u64);
            w = transmit_matrix(&w, cfg.s, &mut rng, &mut ledger, i, MessageKind::Spectral)?;
            dual = mirror.grad_reg(&w)?;
        }
    }

    let last = cfg.machines - 1;
    let mut out_rng = stream(seed, OUTPUT_SPARSIFY_STREAM);
    let w_hat = match cfg.output {
        OutputRule::RandomIterate => {
            let (i, wt) = sampled.ok_or_else(|| Error::InvalidConfig("protocol saw no examples".into()))?;
            if cfg.s0.is_none() && i == last {
                wt
            } else {
                transmit_matrix(&wt, cfg.s0, &mut out_rng, &mut ledger, i, MessageKind::Output)?
            }
        }
        OutputRule::AveragedHighProbability => {
            let mut w_hat = DenseMatrix::zeros(d);
            let weight = 1.0 / averages.len() as f64;
            for (i, avg) in averages.iter().enumerate() {
                let received = if i < last {
                    transmit_matrix(avg, cfg.s0, &mut out_rng, &mut ledger, i, MessageKind::Average)?
                } else {
                    avg.clone()
                };
                w_hat.axpy(weight, &received)?;
            }
            w_hat
        }
    };
    Ok(SchattenRun { w_hat, ledger, traces, iterates })
}

/// Centralized matrix mirror descent: one machine, no sparsification.
pub fn run_centralized_matrix_md<S: MatrixExampleSource + ?Sized>(
    data: &S,
    cfg: &ProtocolConfig,
    link: LinkFunction,
    seed: u64,
    opts: &SchattenOptions,
) -> Result<SchattenRun> {
    let central = ProtocolConfig { machines: 1, s: None, s0: None, ..cfg.clone() };
    run_schatten_smd(data, &central, link, seed, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_matrix_s1sq, MatrixExample};
    use crate::losses::Example;
    use crate::protocols::smd::{run_smd, SmdOptions};
    use crate::sparsify::WireMode;
    use rand::SeedableRng;

    fn cfg(d: usize, n_total: usize, machines: usize, q: f64) -> ProtocolConfig {
        ProtocolConfig {
            d,
            n_total,
            machines,
            q,
            b1: 1.0,
            r_q: 1.0,
            eta: 0.2,
            s: Some(16),
            s0: Some(32),
            output: OutputRule::RandomIterate,
            wire: WireMode::Rank,
        }
    }

    #[test]
    fn diagonal_data_matches_vector_smd() {
        let d = 6;
        let mut rng = SimRng::seed_from_u64(12);
        let target = [0.3, -0.2, 0.1, 0.0, 0.25, -0.05];
        let vecs: Vec<Example> = (0..120)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y = x.iter().zip(&target).map(|(a, b)| a * b).sum::<f64>() + rng.gen_range(-0.1..0.1);
                Example { x: DenseVector::new(x).unwrap(), y }
            })
            .collect();
        let mats: Vec<MatrixExample> = vecs
            .iter()
            .map(|z| MatrixExample { x: DenseMatrix::from_diag(z.x.as_slice()), y: z.y })
            .collect();
        for q in [2.0, 3.0] {
            let c = ProtocolConfig { s: None, s0: None, ..cfg(d, 120, 1, q) };
            let v = run_smd(&vecs, &c, LinkFunction::Square, 5, &SmdOptions { record_iterates: true, ..Default::default() })
                .unwrap();
            let m = run_schatten_smd(&mats, &c, LinkFunction::Square, 5, &SchattenOptions { record_iterates: true, ..Default::default() })
                .unwrap();
            for (a, b) in v.iterates[0].iter().zip(&m.iterates[0]) {
                for (k, (x, y)) in a.as_slice().iter().zip(b.diagonal()).enumerate() {
                    assert!((x - y).abs() < 1e-6, "q={q} k={k}: {x} vs {y}");
                }
                assert!(b.is_diagonal());
            }
        }
    }

    #[test]
    fn zero_gradients_give_zero() {
        let d = 4;
        let data: Vec<MatrixExample> =
            (0..8).map(|i| MatrixExample { x: DenseMatrix::outer(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], (i + 1) as f64).unwrap(), y: 0.0 }).collect();
        let run = run_schatten_smd(&data, &cfg(d, 8, 2, 2.0), LinkFunction::Linear, 1, &SchattenOptions::default()).unwrap();
        assert_eq!(run.w_hat.frobenius(), 0.0);
    }

    #[test]
    fn regret_trace_and_ledger() {
        let inst = gen_matrix_s1sq(8, 2.0, 1.0, 1.0, 3, 4, 2, 0.1).unwrap();
        let o = SchattenOptions { comparator: Some(inst.w_star().clone()), ..Default::default() };
        let c = cfg(8, 64, 2, 2.0);
        let run = run_schatten_smd(&inst, &c, LinkFunction::Square, 2, &o).unwrap();
        for tr in &run.traces {
            assert!(tr.margin() >= -1e-8, "{}", tr.margin());
            assert!(tr.max_l1 <= 1.0 + 1e-9);
        }
        // One spectral handoff of 16 factor pairs and one 32-pair output.
        let per_pair = 2 * 8 * 64;
        assert_eq!(run.ledger.total_bits(), 96 + 16 * per_pair + 96 + 32 * per_pair);
    }
}
