use rand::Rng;

use super::config::{OutputRule, ProtocolConfig};
use super::ledger::{dense_cost, CommLedger, MessageKind};
use crate::datagen::ExampleSource;
use crate::error::{check_dim, Error, Result};
use crate::losses::LinkFunction;
use crate::mirror::{L1Ball, MirrorMap};
use crate::rng::{stream, SimRng};
use crate::sparsify::{decode_bits, encode, maurey, WireMode};
use crate::vecspace::{DenseVector, Exponent};

const OUTPUT_SELECT_STREAM: u64 = 0;
const OUTPUT_SPARSIFY_STREAM: u64 = 1;
const HANDOFF_STREAM_BASE: u64 = 2;

/// A contiguous run of examples processed by one machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub machine: usize,
    /// Global index of the first example.
    pub start: u64,
    pub len: u64,
}

/// `m` machines with `n` consecutive examples each, starting at `offset`.
pub fn equal_segments(machines: usize, n: u64, offset: u64) -> Vec<Segment> {
    (0..machines)
        .map(|i| Segment { machine: i, start: offset + i as u64 * n, len: n })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct SmdOptions {
    /// `w̄`; the regularizer is `½‖w − w̄‖_p²` and machine 1 starts here.
    pub center: Option<DenseVector>,
    /// Comparator for the per-machine regret trace.
    pub comparator: Option<DenseVector>,
    /// Keep every iterate `w_1, …, w_{n+1}` of every machine.
    pub record_iterates: bool,
}

/// One machine's pass, with both sides of the single-machine regret
/// inequality evaluated at the comparator.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineTrace {
    pub machine: usize,
    pub examples: u64,
    /// `Σ_t ⟨∇_t, w_t − w*⟩`.
    pub regret: f64,
    /// `Σ_t ‖∇_t‖_q²`.
    pub grad_norm_sq: f64,
    /// `D_R(w* ‖ w_1)`.
    pub bregman_start: f64,
    /// `D_R(w* ‖ w_{n+1})`.
    pub bregman_end: f64,
    /// `(η C_q/2) Σ‖∇_t‖_q² + (D_R(w*‖w_1) − D_R(w*‖w_{n+1}))/η`.
    pub bound: f64,
    /// Largest `‖w_t‖₁` over `t = 1..n+1`.
    pub max_l1: f64,
}

impl MachineTrace {
    /// `bound − regret`; nonnegative whenever the inequality holds.
    pub fn margin(&self) -> f64 {
        self.bound - self.regret
    }
}

#[derive(Debug, Clone)]
pub struct SmdRun {
    pub w_hat: DenseVector,
    pub ledger: CommLedger,
    /// One entry per segment; empty without a comparator.
    pub traces: Vec<MachineTrace>,
    /// Per segment, `w_1, …, w_{n+1}` when recorded.
    pub iterates: Vec<Vec<DenseVector>>,
    /// `(segment, t)` of the sampled iterate under [`OutputRule::RandomIterate`], `t` 0-based.
    pub sampled: Option<(usize, u64)>,
}

/// Sends `v` from `machine` through the metered channel and returns what the
/// receiver decodes. `s = None` ships all `d` coordinates as raw doubles.
pub(crate) fn transmit(
    v: &DenseVector,
    s: Option<u64>,
    wire: WireMode,
    rng: &mut SimRng,
    ledger: &mut CommLedger,
    machine: usize,
    kind: MessageKind,
) -> Result<DenseVector> {
    let d = v.dim();
    match s {
        None => {
            ledger.record(machine, MessageKind::Dense, dense_cost(d));
            Ok(v.clone())
        }
        Some(s) => {
            let msg = maurey(v, s, rng)?;
            let (bits, cost) = encode(&msg, d, wire)?;
            ledger.record(machine, kind, cost);
            decode_bits(&bits, d)?.decode(d)
        }
    }
}

pub(crate) fn gradient(link: LinkFunction, w: &DenseVector, x: &DenseVector, y: f64) -> (f64, DenseVector) {
    let a = w.dot_unchecked(x);
    let g = link.derivative(a, y);
    (g, x.scaled(g))
}

pub(crate) fn check_source_len(size: Option<u64>, needed: u64) -> Result<()> {
    match size {
        Some(have) if have < needed => Err(Error::InvalidConfig(format!(
            "protocol needs {needed} examples but the data holds {have}"
        ))),
        _ => Ok(()),
    }
}

/// Sparsified mirror descent with `m` machines of `n = N/m` examples each.
pub fn run_smd<S: ExampleSource + ?Sized>(
    data: &S,
    cfg: &ProtocolConfig,
    link: LinkFunction,
    seed: u64,
    opts: &SmdOptions,
) -> Result<SmdRun> {
    cfg.validate()?;
    check_dim(cfg.d, data.dim())?;
    check_source_len(data.size(), cfg.n_total as u64)?;
    let segments = equal_segments(cfg.machines, cfg.n() as u64, 0);
    run_segments(data, cfg, link, seed, opts, &segments, cfg.machines)
}

/// The centralized oracle: one machine, no sparsification anywhere.
pub fn run_centralized_md<S: ExampleSource + ?Sized>(
    data: &S,
    cfg: &ProtocolConfig,
    link: LinkFunction,
    seed: u64,
    opts: &SmdOptions,
) -> Result<SmdRun> {
    let central = ProtocolConfig { machines: 1, s: None, s0: None, ..cfg.clone() };
    run_smd(data, &central, link, seed, opts)
}

/// Runs the protocol over explicit segments. Handoffs go from each segment
/// to the next; `machines` sizes the ledger. `cfg.n_total` and
/// `cfg.machines` are ignored.
pub(crate) fn run_segments<S: ExampleSource + ?Sized>(
    data: &S,
    cfg: &ProtocolConfig,
    link: LinkFunction,
    seed: u64,
    opts: &SmdOptions,
    segments: &[Segment],
    machines: usize,
) -> Result<SmdRun> {
    let d = cfg.d;
    let center = match &opts.center {
        Some(c) => {
            check_dim(d, c.dim())?;
            c.clone()
        }
        None => DenseVector::zeros(d),
    };
    if let Some(w) = &opts.comparator {
        check_dim(d, w.dim())?;
    }
    let mirror = MirrorMap::from_dual_exponent(cfg.q, center.clone())?;
    let ball = L1Ball::new(cfg.b1)?;
    let c_q = cfg.c_q();
    let q_norm = Exponent::Finite(cfg.q);
    let mut ledger = CommLedger::new(machines);
    let mut traces = Vec::new();
    let mut iterates = Vec::new();

    let mut select_rng = stream(seed, OUTPUT_SELECT_STREAM);
    let mut seen = 0u64;
    let mut sampled: Option<(usize, u64, DenseVector)> = None;
    let mut averages: Vec<(DenseVector, u64)> = Vec::new();

    let mut w = center;
    for (j, seg) in segments.iter().enumerate() {
        let w_first = w.clone();
        let mut regret = 0.0;
        let mut grad_norm_sq = 0.0;
        let mut max_l1 = w.l1();
        let mut sum = DenseVector::zeros(d);
        let mut path = Vec::new();
        for t in 0..seg.len {
            if opts.record_iterates {
                path.push(w.clone());
            }
            seen += 1;
            if select_rng.gen_range(0..seen) == 0 {
                sampled = Some((j, t, w.clone()));
            }
            if cfg.output == OutputRule::AveragedHighProbability {
                sum.axpy(1.0, &w)?;
            }
            let z = data.example(seg.start + t);
            check_dim(d, z.x.dim())?;
            let (_, g) = gradient(link, &w, &z.x, z.y);
            if let Some(ws) = &opts.comparator {
                regret += g.dot_unchecked(&w) - g.dot_unchecked(ws);
                let gn = g.norm(q_norm);
                grad_norm_sq += gn * gn;
            }
            w = mirror.md_step(&ball, &w, &g, cfg.eta)?;
            max_l1 = max_l1.max(w.l1());
        }
        if opts.record_iterates {
            path.push(w.clone());
            iterates.push(path);
        }
        if let Some(ws) = &opts.comparator {
            let bregman_start = mirror.bregman(ws, &w_first)?;
            let bregman_end = mirror.bregman(ws, &w)?;
            traces.push(MachineTrace {
                machine: seg.machine,
                examples: seg.len,
                regret,
                grad_norm_sq,
                bregman_start,
                bregman_end,
                bound: cfg.eta * c_q / 2.0 * grad_norm_sq + (bregman_start - bregman_end) / cfg.eta,
                max_l1,
            });
        }
        if cfg.output == OutputRule::AveragedHighProbability && seg.len > 0 {
            averages.push((sum.scaled(1.0 / seg.len as f64), seg.len));
        }
        if j + 1 < segments.len() {
            let mut rng = stream(seed, HANDOFF_STREAM_BASE + j as u64);
            w = transmit(&w, cfg.s, cfg.wire, &mut rng, &mut ledger, seg.machine, MessageKind::Handoff)?;
        }
    }

    let last_machine = segments.last().map_or(0, |s| s.machine);
    let mut out_rng = stream(seed, OUTPUT_SPARSIFY_STREAM);
    let (w_hat, sampled) = match cfg.output {
        OutputRule::RandomIterate => {
            let (j, t, wt) = sampled.ok_or_else(|| Error::InvalidConfig("protocol saw no examples".into()))?;
            let sender = segments[j].machine;
            let w_hat = match cfg.s0 {
                Some(_) => transmit(&wt, cfg.s0, cfg.wire, &mut out_rng, &mut ledger, sender, MessageKind::Output)?,
                None if sender != last_machine => {
                    transmit(&wt, None, cfg.wire, &mut out_rng, &mut ledger, sender, MessageKind::Output)?
                }
                None => wt,
            };
            (w_hat, Some((j, t)))
        }
        OutputRule::AveragedHighProbability => {
            let total: u64 = averages.iter().map(|a| a.1).sum();
            if total == 0 {
                return Err(Error::InvalidConfig("protocol saw no examples".into()));
            }
            let mut w_hat = DenseVector::zeros(d);
            let count = averages.len();
            for (k, (avg, len)) in averages.iter().enumerate() {
                let sender = segments.iter().filter(|s| s.len > 0).nth(k).map_or(0, |s| s.machine);
                let received = if k + 1 < count {
                    transmit(avg, cfg.s0, cfg.wire, &mut out_rng, &mut ledger, sender, MessageKind::Average)?
                } else {
                    avg.clone()
                };
                w_hat.axpy(*len as f64 / total as f64, &received)?;
            }
            (w_hat, None)
        }
    };
    Ok(SmdRun { w_hat, ledger, traces, iterates, sampled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_l1lq, gen_l1lq_with, LinearOptions};
    use crate::losses::Example;
    use crate::mirror::euclidean_l1_projection;

    fn cfg(d: usize, n_total: usize, machines: usize, eta: f64) -> ProtocolConfig {
        ProtocolConfig {
            d,
            n_total,
            machines,
            q: 2.0,
            b1: 1.0,
            r_q: 1.0,
            eta,
            s: Some(32),
            s0: Some(64),
            output: OutputRule::RandomIterate,
            wire: WireMode::Rank,
        }
    }

    /// Projected OGD on the ℓ1 ball written against raw slices.
    fn projected_ogd(data: &[Example], eta: f64, radius: f64) -> Vec<Vec<f64>> {
        let d = data[0].x.dim();
        let mut w = vec![0.0; d];
        let mut out = vec![w.clone()];
        for z in data {
            let a: f64 = w.iter().zip(z.x.as_slice()).map(|(a, b)| a * b).sum();
            let g = 2.0 * (a - z.y);
            let y: Vec<f64> = w.iter().zip(z.x.as_slice()).map(|(wi, xi)| wi - eta * g * xi).collect();
            let l1: f64 = y.iter().map(|v| v.abs()).sum();
            w = if l1 <= radius { y } else { euclidean_l1_projection(&y, radius) };
            out.push(w.clone());
        }
        out
    }

    #[test]
    fn single_machine_matches_projected_ogd() {
        let inst = gen_l1lq(50, 2.0, 1.0, 1.0, 3).unwrap();
        let data: Vec<Example> = (0..200).map(|i| inst.example(i)).collect();
        let c = ProtocolConfig { s: None, s0: None, ..cfg(50, 200, 1, 0.3) };
        let run = run_smd(&data, &c, LinkFunction::Square, 1, &SmdOptions { record_iterates: true, ..Default::default() })
            .unwrap();
        let oracle = projected_ogd(&data, 0.3, 1.0);
        assert_eq!(run.iterates[0].len(), oracle.len());
        for (a, b) in run.iterates[0].iter().zip(&oracle) {
            for (x, y) in a.as_slice().iter().zip(b) {
                assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
            }
        }
        assert_eq!(run.ledger.total_bits(), 0);
    }

    #[test]
    fn zero_gradients_stay_at_center() {
        let d = 20;
        let data: Vec<Example> = (0..40)
            .map(|i| Example { x: DenseVector::basis(d, i % d, 1.0), y: 0.0 })
            .collect();
        let run = run_smd(&data, &cfg(d, 40, 4, 0.1), LinkFunction::Linear, 9, &SmdOptions::default()).unwrap();
        assert!(run.w_hat.is_zero());
        // Zero messages still carry a header.
        assert_eq!(run.ledger.entries().len(), 4);
    }

    #[test]
    fn regret_inequality_and_feasibility() {
        let opts = LinearOptions { link: LinkFunction::Absolute, noise: 0.5, active_dims: Some(8) };
        for (q, m) in [(2.0, 4), (3.0, 2), (4.0, 4)] {
            let inst = gen_l1lq_with(200, q, 1.0, 1.0, 5, opts).unwrap();
            let mut c = cfg(200, 400, m, 0.05);
            c.q = q;
            let o = SmdOptions { comparator: Some(inst.w_star().clone()), ..Default::default() };
            let run = run_smd(&inst, &c, LinkFunction::Absolute, 17, &o).unwrap();
            assert_eq!(run.traces.len(), m);
            for tr in &run.traces {
                assert!(tr.margin() >= -1e-8, "q={q}: margin {}", tr.margin());
                assert!(tr.max_l1 <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn ledger_complete_and_deterministic() {
        let inst = gen_l1lq(300, 2.0, 1.0, 1.0, 8).unwrap();
        for output in [OutputRule::RandomIterate, OutputRule::AveragedHighProbability] {
            let c = ProtocolConfig { output, ..cfg(300, 256, 8, 0.05) };
            let o = SmdOptions { record_iterates: true, ..Default::default() };
            let a = run_smd(&inst, &c, LinkFunction::Square, 4, &o).unwrap();
            let b = run_smd(&inst, &c, LinkFunction::Square, 4, &o).unwrap();
            assert_eq!(a.ledger, b.ledger);
            assert_eq!(a.iterates, b.iterates);
            assert_eq!(a.w_hat, b.w_hat);
            let logged: u64 = a.ledger.entries().iter().map(|e| e.cost.total_bits).sum();
            assert_eq!(logged, a.ledger.total_bits());
            let outputs = match output {
                OutputRule::RandomIterate => 1,
                OutputRule::AveragedHighProbability => 7,
            };
            assert_eq!(a.ledger.entries().len(), 7 + outputs);
        }
    }

    #[test]
    fn handoff_starts_next_machine_at_decoded_message() {
        let inst = gen_l1lq(64, 2.0, 1.0, 1.0, 2).unwrap();
        let o = SmdOptions { record_iterates: true, ..Default::default() };
        let run = run_smd(&inst, &cfg(64, 64, 2, 0.2), LinkFunction::Square, 6, &o).unwrap();
        let start = &run.iterates[1][0];
        // A decoded Q^s message has at most s nonzeros, each a multiple of scale/s.
        assert!(start.nnz() <= 32);
        let unit = start.l1() / 32.0;
        for &x in start.as_slice() {
            let k = x.abs() / unit;
            assert!((k - k.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_short_data_and_bad_shapes() {
        let inst = gen_l1lq(10, 2.0, 1.0, 1.0, 1).unwrap();
        let data: Vec<Example> = (0..10).map(|i| inst.example(i)).collect();
        assert!(run_smd(&data, &cfg(10, 20, 2, 0.1), LinkFunction::Square, 0, &SmdOptions::default()).is_err());
        assert!(run_smd(&data, &cfg(11, 10, 2, 0.1), LinkFunction::Square, 0, &SmdOptions::default()).is_err());
        assert!(run_smd(&data, &cfg(10, 10, 3, 0.1), LinkFunction::Square, 0, &SmdOptions::default()).is_err());
    }
}
