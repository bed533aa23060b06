//! Trial execution, sweeps and the CSV record format.

use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use sublinear::datagen::{
    gen_hide_and_seek, gen_l1lq_with, gen_l2l2_with, gen_matrix_s1sq, gen_sparse_regression, Labels,
    LinearOptions, MatrixInstance, ProblemInstance,
};
use sublinear::losses::{beta_q, LinkFunction};
use sublinear::protocols::{
    default_params_lipschitz, default_params_smooth, default_sketch_dim, run_centralized_md, run_fast_smd,
    run_jl_ogd, run_schatten_smd, run_smd, run_truncation_baseline, sparse_regression_gamma_q, CommLedger,
    FastRateConfig, JlConfig, MachineTrace, OutputRule, ProtocolConfig, SchattenOptions, SmdOptions,
    SparsityConstants,
};
use sublinear::rng::derive_seed;
use sublinear::sparsify::WireMode;

use crate::config::{Algorithm, InstanceKind, InstanceSection, OutputChoice, ScenarioConfig, WireChoice};
use crate::HarnessError;

/// Environment variable holding the worker count for parallel trials.
pub const WORKERS_ENV: &str = "SUBLIN_WORKERS";

/// CSV columns, in order.
pub const CSV_HEADER: [&str; 10] =
    ["trial", "N", "m", "q", "s", "s0", "excess_risk", "total_bits", "max_machine_bits", "min_regret_margin"];

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub n: usize,
    pub m: usize,
    pub q: f64,
    /// `None` when iterates travel dense or the algorithm has no `s`.
    pub s: Option<u64>,
    pub s0: Option<u64>,
    pub excess_risk: f64,
    pub total_bits: u64,
    pub max_machine_bits: u64,
    /// Smallest slack of the per-machine regret inequality; `None` for
    /// algorithms without mirror-descent traces.
    pub min_regret_margin: Option<f64>,
    /// Not written to CSV, which stays a function of (config, seed).
    pub wall_time: Duration,
}

pub enum Instance {
    Vector(ProblemInstance),
    Matrix(MatrixInstance),
}

/// Seed of trial `t`'s instance (`stream = 0`) or algorithm (`stream = 1`);
/// independent of the grid point, so sweeps share instances across `N`.
pub fn trial_seed(seed: u64, trial: u64, stream: u64) -> u64 {
    derive_seed(derive_seed(seed, trial), stream)
}

pub fn build_instance(spec: &InstanceSection, seed: u64) -> Result<Instance, HarnessError> {
    let q = spec.q.unwrap_or(2.0);
    let b1 = spec.b1.unwrap_or(1.0);
    let r_q = spec.r_q.unwrap_or(1.0);
    let link = spec.link.as_deref().map(str::parse).transpose()?;
    let linear = |default_link: LinkFunction| LinearOptions {
        link: link.unwrap_or(default_link),
        noise: spec.noise.unwrap_or(LinearOptions::default().noise),
        active_dims: spec.active_dims,
    };
    Ok(match spec.kind {
        InstanceKind::L1lq => Instance::Vector(gen_l1lq_with(spec.d, q, b1, r_q, seed, linear(LinkFunction::Square))?),
        InstanceKind::L2l2 => Instance::Vector(gen_l2l2_with(spec.d, b1, r_q, seed, linear(LinkFunction::Square))?),
        InstanceKind::SparseRegression => Instance::Vector(gen_sparse_regression(
            spec.d,
            spec.sparsity.unwrap_or(1),
            spec.gamma.unwrap_or(1.0),
            spec.noise.unwrap_or(0.1),
            seed,
        )?),
        InstanceKind::HideAndSeek => Instance::Vector(gen_hide_and_seek(
            spec.d,
            spec.rho.unwrap_or(0.4),
            spec.planted.unwrap_or(0),
            seed,
        )?),
        InstanceKind::Matrix => Instance::Matrix(gen_matrix_s1sq(
            spec.d,
            q,
            b1,
            r_q,
            seed,
            spec.block.unwrap_or(spec.d),
            spec.rank.unwrap_or(1),
            spec.noise.unwrap_or(0.1),
        )?),
    })
}

/// Bound on `‖x‖_q` from the instance's bound in its own exponent.
pub fn feature_bound(inst: &ProblemInstance, q: f64) -> f64 {
    let gap = (1.0 / q - 1.0 / inst.q).max(0.0);
    inst.r_q * (inst.dim() as f64).powf(gap)
}

/// `|y|` bound implied by the label model.
pub fn label_bound(inst: &ProblemInstance) -> f64 {
    match inst.labels() {
        Labels::LinearModel { noise } => inst.w_star().l1() * inst.r_inf + noise,
        Labels::Constant => 1.0,
    }
}

/// Protocol parameters for one grid point: defaults from the gradient bound,
/// then the small-loss rule, then explicit overrides.
pub fn protocol_config(
    cfg: &ScenarioConfig,
    d: usize,
    b1: f64,
    feature: f64,
    link: LinkFunction,
    a_bound: f64,
    y_bound: f64,
) -> Result<ProtocolConfig, HarnessError> {
    let p = &cfg.protocol;
    let q = p.q.or(cfg.instance.q).unwrap_or(2.0);
    let grad = p.grad_bound.unwrap_or_else(|| link.lipschitz(a_bound, y_bound) * feature);
    let kappa = SparsityConstants { kappa_s: p.kappa_s, kappa_s0: p.kappa_s0 };
    let mut pc = default_params_lipschitz(d, b1, grad, q, p.n, p.machines, kappa, p.linear_model)?;
    if let Some(l_star) = p.l_star {
        let (eta, s0) = default_params_smooth(b1, beta_q(link, feature)?, q, p.n, l_star)?;
        pc.eta = eta;
        pc.s0 = Some(s0);
    }
    if let Some(eta) = p.eta {
        pc.eta = eta;
    }
    if p.s.is_some() {
        pc.s = p.s;
    }
    if p.s0.is_some() {
        pc.s0 = p.s0;
    }
    if p.dense {
        pc.s = None;
        pc.s0 = None;
    }
    pc.output = match p.output {
        Some(OutputChoice::Averaged) => OutputRule::AveragedHighProbability,
        _ => OutputRule::RandomIterate,
    };
    pc.wire = match p.wire {
        Some(WireChoice::List) => WireMode::List,
        _ => WireMode::Rank,
    };
    pc.validate()?;
    Ok(pc)
}

fn min_margin(traces: &[MachineTrace]) -> Option<f64> {
    traces.iter().map(MachineTrace::margin).reduce(f64::min)
}

struct Outcome {
    excess: f64,
    ledger: CommLedger,
    q: f64,
    s: Option<u64>,
    s0: Option<u64>,
    margin: Option<f64>,
}

fn run_vector(cfg: &ScenarioConfig, inst: &ProblemInstance, seed: u64) -> Result<Outcome, HarnessError> {
    let link = inst.link();
    let q = cfg.protocol.q.or(cfg.instance.q).unwrap_or(2.0);
    let feature = feature_bound(inst, q);
    let pc = protocol_config(cfg, inst.dim(), inst.b1, feature, link, inst.b1 * inst.r_inf, label_bound(inst))?;
    let with_star = SmdOptions { comparator: Some(inst.w_star().clone()), ..Default::default() };
    let (w, ledger, s, s0, margin) = match cfg.scenario.algorithm {
        Algorithm::Smd => {
            let r = run_smd(inst, &pc, link, seed, &with_star)?;
            (r.w_hat, r.ledger, pc.s, pc.s0, min_margin(&r.traces))
        }
        Algorithm::Centralized => {
            let r = run_centralized_md(inst, &pc, link, seed, &with_star)?;
            (r.w_hat, r.ledger, None, None, min_margin(&r.traces))
        }
        Algorithm::FastSmd => {
            let fast = cfg.fast.clone().unwrap_or(crate::config::FastSection { c: 1.0, gamma_q: None });
            let gamma_q = match (fast.gamma_q, inst.gamma, inst.sparsity) {
                (Some(g), _, _) => g,
                (None, Some(g), Some(k)) => sparse_regression_gamma_q(g, k),
                _ => {
                    return Err(HarnessError::Config(crate::config::ConfigError {
                        line: None,
                        field: Some("fast.gamma_q".into()),
                        message: "required unless the instance is a sparse regression".into(),
                    }))
                }
            };
            let fcfg = FastRateConfig {
                gamma_q,
                c: fast.c,
                kappa: SparsityConstants { kappa_s: cfg.protocol.kappa_s, kappa_s0: cfg.protocol.kappa_s0 },
            };
            let r = run_fast_smd(inst, &pc, &fcfg, link, seed, Some(inst.w_star()))?;
            let last = r.rounds.last().expect("at least one round");
            (r.w_hat, r.ledger, last.s, last.s0, min_margin(&r.traces))
        }
        Algorithm::JlOgd => {
            let jl = cfg.jl.clone().unwrap_or(crate::config::JlSection { k: None, identity: false });
            let jc = JlConfig {
                d: pc.d,
                n_total: pc.n_total,
                machines: pc.machines,
                k: jl.k.unwrap_or_else(|| default_sketch_dim(pc.d, pc.n_total)),
                eta: pc.eta,
                identity: jl.identity,
            };
            let r = run_jl_ogd(inst, &jc, link, seed)?;
            (r.w_hat, r.ledger, None, None, None)
        }
        Algorithm::Truncation => {
            let kappa = cfg.truncation.as_ref().map_or(1.0, |t| t.kappa);
            let r = run_truncation_baseline(inst, &pc, link, kappa, seed)?;
            (r.w_hat, r.ledger, None, None, None)
        }
        Algorithm::SchattenSmd => unreachable!("rejected at config validation"),
    };
    Ok(Outcome { excess: inst.excess_risk(&w), ledger, q, s, s0, margin })
}

fn run_matrix(cfg: &ScenarioConfig, inst: &MatrixInstance, seed: u64) -> Result<Outcome, HarnessError> {
    let q = cfg.protocol.q.or(cfg.instance.q).unwrap_or(2.0);
    // Features are single entries ±R, so every Schatten norm of X is R.
    let a_bound = inst.b1 * inst.r_q;
    let y_bound = inst.b1 / 2.0 * inst.r_q + inst.noise();
    let pc = protocol_config(cfg, inst.dim(), inst.b1, inst.r_q, LinkFunction::Square, a_bound, y_bound)?;
    let opts = SchattenOptions { comparator: Some(inst.w_star().clone()), ..Default::default() };
    let r = run_schatten_smd(inst, &pc, LinkFunction::Square, seed, &opts)?;
    Ok(Outcome {
        excess: inst.excess_risk(&r.w_hat),
        ledger: r.ledger,
        q,
        s: pc.s,
        s0: pc.s0,
        margin: r.traces.iter().map(|t| t.margin()).reduce(f64::min),
    })
}

pub fn run_trial(cfg: &ScenarioConfig, trial: u64) -> Result<TrialRecord, HarnessError> {
    let start = Instant::now();
    let inst = build_instance(&cfg.instance, trial_seed(cfg.scenario.seed, trial, 0))?;
    let alg_seed = trial_seed(cfg.scenario.seed, trial, 1);
    let out = match &inst {
        Instance::Vector(v) => run_vector(cfg, v, alg_seed)?,
        Instance::Matrix(m) => run_matrix(cfg, m, alg_seed)?,
    };
    Ok(TrialRecord {
        trial,
        n: cfg.protocol.n,
        m: cfg.protocol.machines,
        q: out.q,
        s: out.s,
        s0: out.s0,
        excess_risk: out.excess,
        total_bits: out.ledger.total_bits(),
        max_machine_bits: out.ledger.max_machine_bits(),
        min_regret_margin: out.margin,
        wall_time: start.elapsed(),
    })
}

/// Worker count from [`WORKERS_ENV`], else the available cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f(0..count)` on the worker pool, results in index order.
pub fn par_map<T: Send>(
    count: u64,
    f: impl Fn(u64) -> Result<T, HarnessError> + Sync + Send,
) -> Result<Vec<T>, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}

/// All trials of one configuration, ordered by trial id.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<TrialRecord>, HarnessError> {
    par_map(cfg.scenario.trials, |t| run_trial(cfg, t))
}

/// Cartesian product of the sweep axes; absent axes keep the protocol value.
pub fn sweep_points(cfg: &ScenarioConfig) -> Vec<ScenarioConfig> {
    let sw = cfg.sweep.clone().unwrap_or_default();
    let p = &cfg.protocol;
    let or = |v: Vec<Option<u64>>, base: Option<u64>| if v.is_empty() { vec![base] } else { v };
    let ns = if sw.n.is_empty() { vec![p.n] } else { sw.n };
    let ms = if sw.machines.is_empty() { vec![p.machines] } else { sw.machines };
    let qs: Vec<Option<f64>> = if sw.q.is_empty() { vec![p.q] } else { sw.q.into_iter().map(Some).collect() };
    let ss = or(sw.s.into_iter().map(Some).collect(), p.s);
    let s0s = or(sw.s0.into_iter().map(Some).collect(), p.s0);
    let mut out = Vec::new();
    for &n in &ns {
        for &m in &ms {
            for &q in &qs {
                for &s in &ss {
                    for &s0 in &s0s {
                        let mut c = cfg.clone();
                        c.protocol.n = n;
                        c.protocol.machines = m;
                        c.protocol.q = q;
                        c.protocol.s = s;
                        c.protocol.s0 = s0;
                        c.sweep = None;
                        out.push(c);
                    }
                }
            }
        }
    }
    out
}

/// Every grid point in order, each with all its trials.
pub fn sweep(cfg: &ScenarioConfig) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut out = Vec::new();
    for point in sweep_points(cfg) {
        out.extend(run_scenario(&point)?);
    }
    Ok(out)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            fmt_f64(r.q),
            fmt_opt(r.s),
            fmt_opt(r.s0),
            fmt_f64(r.excess_risk),
            r.total_bits.to_string(),
            r.max_machine_bits.to_string(),
            r.min_regret_margin.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
