use super::config::{FastRateConfig, ProtocolConfig};
use super::ledger::CommLedger;
use super::smd::{check_source_len, run_segments, MachineTrace, Segment, SmdOptions};
use crate::datagen::ExampleSource;
use crate::error::{check_dim, Error, Result};
use crate::losses::LinkFunction;
use crate::rng::derive_seed;
use crate::vecspace::DenseVector;

/// Parameters one restart round ran with.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSummary {
    pub round: usize,
    /// Global index of the round's first example.
    pub start: u64,
    pub examples: u64,
    /// `B̄ = B_{k−1}`.
    pub radius: f64,
    pub eta: f64,
    pub s: Option<u64>,
    pub s0: Option<u64>,
    /// Machines whose examples the round touches.
    pub machines: usize,
}

#[derive(Debug, Clone)]
pub struct FastRun {
    pub w_hat: DenseVector,
    pub ledger: CommLedger,
    pub rounds: Vec<RoundSummary>,
    pub traces: Vec<MachineTrace>,
}

/// Pieces of `[start, start + len)` cut at machine boundaries of width `n`.
fn round_segments(start: u64, len: u64, n: u64) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut at = start;
    let end = start + len;
    while at < end {
        let machine = at / n;
        let stop = end.min((machine + 1) * n);
        out.push(Segment { machine: machine as usize, start: at, len: stop - at });
        at = stop;
    }
    out
}

/// Inner parameters of round `k` for `B̄ = B_{k−1}`:
/// `η = (B̄/R_q)√(1/(C_q N_k))`, `s = ⌈κ_s m_k^{2(q−1)}(B₁/B̄)^{4(q−1)}⌉`,
/// `s₀ = ⌈κ_{s₀}(N_k/C_q)^{q/2}(B₁/B̄)^q⌉`.
pub fn round_parameters(
    base: &ProtocolConfig,
    fcfg: &FastRateConfig,
    radius: f64,
    examples: u64,
    machines: usize,
) -> (f64, Option<u64>, Option<u64>) {
    let (q, c_q) = (base.q, base.c_q());
    let ratio = base.b1 / radius;
    let eta = radius / base.r_q * (1.0 / (c_q * examples as f64)).sqrt();
    let s = base.s.map(|_| {
        let v = fcfg.kappa.kappa_s * (machines as f64).powf(2.0 * (q - 1.0)) * ratio.powf(4.0 * (q - 1.0));
        (v.ceil() as u64).max(1)
    });
    let s0 = base.s0.map(|_| {
        let v = fcfg.kappa.kappa_s0 * (examples as f64 / c_q).powf(q / 2.0) * ratio.powf(q);
        (v.ceil() as u64).max(1)
    });
    (eta, s, s0)
}

/// Restarted sparsified mirror descent. Round `k` runs the base protocol on
/// the next `N_k` examples, centered at the previous round's output, whose
/// transfer is metered. The constraint set stays `{‖w‖₁ ≤ B₁}`.
///
/// `base.s`/`base.s0` only select sparsified versus dense transfer; their
/// values come from [`round_parameters`].
pub fn run_fast_smd<S: ExampleSource + ?Sized>(
    data: &S,
    base: &ProtocolConfig,
    fcfg: &FastRateConfig,
    link: LinkFunction,
    seed: u64,
    comparator: Option<&DenseVector>,
) -> Result<FastRun> {
    base.validate()?;
    check_dim(base.d, data.dim())?;
    check_source_len(data.size(), base.n_total as u64)?;
    let schedule = fcfg.schedule(base);
    if schedule.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "N = {} is below the first round size N_1 = {}",
            base.n_total,
            fcfg.round_size(1, base)
        )));
    }
    let n = base.n() as u64;
    let mut ledger = CommLedger::new(base.machines);
    let mut rounds = Vec::with_capacity(schedule.len());
    let mut traces = Vec::new();
    let mut center = DenseVector::zeros(base.d);
    let mut start = 0u64;
    for (idx, &nk) in schedule.iter().enumerate() {
        let k = idx + 1;
        let radius = fcfg.radius(base.b1, k as i64 - 1);
        let segments = round_segments(start, nk, n);
        let (eta, s, s0) = round_parameters(base, fcfg, radius, nk, segments.len());
        let cfg = ProtocolConfig { eta, s, s0, ..base.clone() };
        let opts = SmdOptions {
            center: Some(center),
            comparator: comparator.cloned(),
            record_iterates: false,
        };
        let run = run_segments(data, &cfg, link, derive_seed(seed, k as u64), &opts, &segments, base.machines)?;
        ledger.absorb(&run.ledger, 0);
        traces.extend(run.traces);
        rounds.push(RoundSummary {
            round: k,
            start,
            examples: nk,
            radius,
            eta,
            s,
            s0,
            machines: segments.len(),
        });
        center = run.w_hat;
        start += nk;
    }
    Ok(FastRun { w_hat: center, ledger, rounds, traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::gen_sparse_regression;
    use crate::protocols::config::OutputRule;
    use crate::protocols::smd::run_smd;
    use crate::sparsify::WireMode;

    fn base(d: usize, n_total: usize, machines: usize, r_q: f64) -> ProtocolConfig {
        ProtocolConfig {
            d,
            n_total,
            machines,
            q: 2.0,
            b1: 1.0,
            r_q,
            eta: 1.0,
            s: Some(1),
            s0: Some(1),
            output: OutputRule::RandomIterate,
            wire: WireMode::Rank,
        }
    }

    #[test]
    fn segments_split_at_machine_boundaries() {
        let segs = round_segments(5, 12, 4);
        let got: Vec<(usize, u64, u64)> = segs.iter().map(|s| (s.machine, s.start, s.len)).collect();
        assert_eq!(got, vec![(1, 5, 3), (2, 8, 4), (3, 12, 4), (4, 16, 1)]);
    }

    #[test]
    fn single_round_is_plain_smd() {
        let inst = gen_sparse_regression(64, 2, 1.0, 0.1, 4).unwrap();
        let fcfg = FastRateConfig::new(1.0, 1.0).unwrap();
        // N_1 = 8 and N_2 = 16 with R = 1, so N = 20 admits one round.
        let b = base(64, 20, 1, 1.0);
        assert_eq!(fcfg.schedule(&b), vec![8]);
        let fast = run_fast_smd(&inst, &b, &fcfg, LinkFunction::Square, 3, None).unwrap();
        let (eta, s, s0) = round_parameters(&b, &fcfg, 1.0, 8, 1);
        let plain = ProtocolConfig { n_total: 8, eta, s, s0, ..b.clone() };
        let run = run_smd(&inst, &plain, LinkFunction::Square, derive_seed(3, 1), &SmdOptions::default()).unwrap();
        assert_eq!(fast.w_hat, run.w_hat);
        assert_eq!(fast.ledger, run.ledger);
        assert!((eta - 1.0 / 8f64.sqrt()).abs() < 1e-15);
        assert_eq!((s, s0), (Some(1), Some(8)));
    }

    #[test]
    fn rounds_follow_schedule_and_trace_every_machine() {
        let inst = gen_sparse_regression(128, 2, 1.0, 0.1, 9).unwrap();
        let fcfg = FastRateConfig::new(1.0, 0.05).unwrap();
        let b = base(128, 4096, 4, inst.r_q);
        let run = run_fast_smd(&inst, &b, &fcfg, LinkFunction::Square, 1, Some(inst.w_star())).unwrap();
        let sizes: Vec<u64> = run.rounds.iter().map(|r| r.examples).collect();
        assert_eq!(sizes, fcfg.schedule(&b));
        assert!(sizes.iter().sum::<u64>() <= 4096);
        for w in run.rounds.windows(2) {
            assert!((w[1].radius / w[0].radius - 0.5f64.sqrt()).abs() < 1e-12);
            assert_eq!(w[1].start, w[0].start + w[0].examples);
        }
        for tr in &run.traces {
            assert!(tr.margin() >= -1e-8);
            assert!(tr.max_l1 <= 1.0 + 1e-9);
        }
        assert_eq!(run.ledger.total_bits(), run.ledger.entries().iter().map(|e| e.cost.total_bits).sum::<u64>());
    }

    #[test]
    fn too_few_examples_is_invalid_config() {
        let inst = gen_sparse_regression(16, 2, 1.0, 0.1, 1).unwrap();
        let fcfg = FastRateConfig::new(1.0, 1.0).unwrap();
        let err = run_fast_smd(&inst, &base(16, 4, 1, 1.0), &fcfg, LinkFunction::Square, 0, None).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }
}
