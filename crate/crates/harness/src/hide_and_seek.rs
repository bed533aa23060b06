//! Detection of the planted coordinate under a per-machine bit budget.

use std::io::Write;

use rand::Rng;
use sublinear::datagen::{gen_hide_and_seek, ExampleSource};
use sublinear::losses::LinkFunction;
use sublinear::protocols::{default_params_lipschitz, run_smd, SmdOptions, SparsityConstants};
use sublinear::rng::{stream, SimRng};
use sublinear::sparsify::{payload_bits, WireMode, HEADER_BITS};
use sublinear::vecspace::DenseVector;

use crate::config::{ScenarioConfig, WireChoice};
use crate::scenario::{fmt_f64, par_map, trial_seed};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct HideAndSeekSpec {
    pub d: usize,
    pub n_total: usize,
    pub machines: usize,
    pub rhos: Vec<f64>,
    /// Per-machine budgets in bits; `None` is unlimited.
    pub budgets: Vec<Option<u64>>,
    pub trials: u64,
    pub seed: u64,
    pub wire: WireMode,
}

impl HideAndSeekSpec {
    /// Reads `[instance] d`, `[protocol] n, machines, wire` and the
    /// `[hide_and_seek]` grid.
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, HarnessError> {
        let grid = cfg
            .hide_and_seek
            .as_ref()
            .ok_or_else(|| HarnessError::Runtime("config has no [hide_and_seek] section".into()))?;
        Ok(HideAndSeekSpec {
            d: cfg.instance.d,
            n_total: cfg.protocol.n,
            machines: cfg.protocol.machines,
            rhos: grid.rho.clone(),
            budgets: grid.budgets.iter().map(|&b| (b > 0).then_some(b)).collect(),
            trials: cfg.scenario.trials,
            seed: cfg.scenario.seed,
            wire: match cfg.protocol.wire {
                Some(WireChoice::List) => WireMode::List,
                _ => WireMode::Rank,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCell {
    pub rho: f64,
    pub budget: Option<u64>,
    /// Sample count used for both handoffs and the output.
    pub s: Option<u64>,
    pub trials: u64,
    /// Fraction of trials with `argmax ŵ = j*`.
    pub rate: f64,
    /// Same for the centralized sample-mean argmax.
    pub oracle_rate: f64,
    pub max_machine_bits: u64,
}

/// Ceiling on budget-derived sample counts. Sampling costs O(s) while the
/// rank payload grows like `d log s`, so small `d` with a large budget would
/// otherwise ask for billions of samples.
pub const MAX_BUDGET_SAMPLES: u64 = 1 << 16;

/// Largest `s ≤ MAX_BUDGET_SAMPLES` whose message fits in half the budget,
/// since a machine sends at most a handoff and the output.
pub fn sample_count_for_budget(d: usize, budget: u64, wire: WireMode) -> Option<u64> {
    let fits = |s: u64| s <= MAX_BUDGET_SAMPLES && HEADER_BITS + payload_bits(wire, d, s) <= budget / 2;
    if !fits(1) {
        return None;
    }
    let mut hi = 2;
    while fits(hi) {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Index of the largest entry, ties broken uniformly.
pub fn argmax_random_ties(v: &[f64], rng: &mut SimRng) -> usize {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..v.len()).filter(|&i| v[i] == top).collect();
    ties[rng.gen_range(0..ties.len())]
}

pub fn run_hide_and_seek(spec: &HideAndSeekSpec) -> Result<Vec<DetectionCell>, HarnessError> {
    let mut plans = Vec::new();
    for &budget in &spec.budgets {
        let s = match budget {
            None => None,
            Some(b) => Some(sample_count_for_budget(spec.d, b, spec.wire).ok_or_else(|| {
                HarnessError::Runtime(format!("budget {b} bits cannot hold a one-sample message at d = {}", spec.d))
            })?),
        };
        plans.push((budget, s));
    }
    let mut cells = Vec::new();
    for &rho in &spec.rhos {
        for &(budget, s) in &plans {
            let outcomes = par_map(spec.trials, |t| {
                let mut rng = stream(trial_seed(spec.seed, t, 0), 0);
                let planted = rng.gen_range(0..spec.d);
                let inst = gen_hide_and_seek(spec.d, rho, planted, trial_seed(spec.seed, t, 1))?;
                let r_q = (spec.d as f64).sqrt();
                let mut cfg = default_params_lipschitz(
                    spec.d,
                    1.0,
                    r_q,
                    2.0,
                    spec.n_total,
                    spec.machines,
                    SparsityConstants::default(),
                    true,
                )?;
                cfg.s = s;
                cfg.s0 = s;
                cfg.wire = spec.wire;
                let run = run_smd(&inst, &cfg, LinkFunction::Linear, trial_seed(spec.seed, t, 2), &SmdOptions::default())?;
                let hit = argmax_random_ties(run.w_hat.as_slice(), &mut rng) == planted;
                let mut mean = DenseVector::zeros(spec.d);
                for i in 0..spec.n_total as u64 {
                    mean.axpy(1.0, &inst.example(i).x)?;
                }
                let oracle = argmax_random_ties(mean.as_slice(), &mut rng) == planted;
                Ok((hit, oracle, run.ledger.max_machine_bits()))
            })?;
            let tf = spec.trials as f64;
            cells.push(DetectionCell {
                rho,
                budget,
                s,
                trials: spec.trials,
                rate: outcomes.iter().filter(|o| o.0).count() as f64 / tf,
                oracle_rate: outcomes.iter().filter(|o| o.1).count() as f64 / tf,
                max_machine_bits: outcomes.iter().map(|o| o.2).max().unwrap_or(0),
            });
        }
    }
    Ok(cells)
}

pub fn write_detection_csv<W: Write>(cells: &[DetectionCell], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rho", "budget", "s", "trials", "detection_rate", "oracle_rate", "max_machine_bits"])?;
    for c in cells {
        w.write_record([
            fmt_f64(c.rho),
            c.budget.map_or_else(|| "unlimited".to_string(), |b| b.to_string()),
            c.s.map(|s| s.to_string()).unwrap_or_default(),
            c.trials.to_string(),
            fmt_f64(c.rate),
            fmt_f64(c.oracle_rate),
            c.max_machine_bits.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
