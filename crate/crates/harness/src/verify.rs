//! Property suites run by `sublin verify`. Each check reports its worst
//! slack (`bound − observed`, negative on a violation) over all cases.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use sublinear::datagen::{
    gen_l1lq_with, gen_l2l2_with, gen_sparse_regression, ExampleSource, LinearOptions, ProblemInstance,
};
use sublinear::losses::{beta_q, smoothness_selfbound_check, subgradient, loss, Example, LinkFunction};
use sublinear::mirror::{signed_pow, MirrorMap};
use sublinear::protocols::{
    default_params_lipschitz, run_smd, FastRateConfig, OutputRule, SmdOptions, SparsityConstants,
    run_fast_smd, sparse_regression_gamma_q,
};
use sublinear::rng::SimRng;
use sublinear::sparsify::{
    decode_bits, encode, maurey, payload_bits, spectral_maurey_with_basis, Atom, MaureyMessage, WireMode,
};
use sublinear::vecspace::{schatten_norm, DenseMatrix, DenseVector, Exponent};

use crate::HarnessError;

pub const SUITES: [&str; 6] = ["mirror", "maurey", "wire", "losses", "datagen", "protocols"];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub suite: &'static str,
    pub name: &'static str,
    pub cases: u64,
    pub violations: u64,
    /// Smallest `bound − observed`.
    pub min_margin: f64,
    /// Largest `observed / bound` where the bound is a rate.
    pub max_ratio: Option<f64>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} cases={} violations={} min_margin={:.3e}",
            self.suite, self.name, self.cases, self.violations, self.min_margin
        )?;
        if let Some(r) = self.max_ratio {
            write!(f, " max_ratio={r:.4}")?;
        }
        f.write_str(if self.passed() { " PASS" } else { " FAIL" })
    }
}

/// Accumulates margins for one check.
struct Tally {
    suite: &'static str,
    name: &'static str,
    cases: u64,
    violations: u64,
    min_margin: f64,
    max_ratio: Option<f64>,
}

impl Tally {
    fn new(suite: &'static str, name: &'static str) -> Self {
        Tally { suite, name, cases: 0, violations: 0, min_margin: f64::INFINITY, max_ratio: None }
    }

    fn margin(&mut self, m: f64) {
        self.cases += 1;
        if !(m >= 0.0) {
            self.violations += 1;
        }
        self.min_margin = self.min_margin.min(if m.is_nan() { f64::NEG_INFINITY } else { m });
    }

    /// `observed ≤ bound`, tracking the ratio.
    fn ratio(&mut self, observed: f64, bound: f64) {
        self.margin(bound - observed);
        let r = observed / bound;
        self.max_ratio = Some(self.max_ratio.map_or(r, |m: f64| m.max(r)));
    }

    fn done(self) -> CheckReport {
        CheckReport {
            suite: self.suite,
            name: self.name,
            cases: self.cases,
            violations: self.violations,
            min_margin: self.min_margin,
            max_ratio: self.max_ratio,
        }
    }
}

pub fn run_suite(name: &str) -> Result<Vec<CheckReport>, HarnessError> {
    match name {
        "mirror" | "geometry" => Ok(mirror_suite()),
        "maurey" => Ok(maurey_suite()),
        "wire" => Ok(wire_suite()),
        "losses" => Ok(losses_suite()),
        "datagen" => Ok(datagen_suite()),
        "protocols" => protocols_suite(),
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s)?);
            }
            Ok(out)
        }
        other => Err(HarnessError::UnknownSuite(other.to_string())),
    }
}

fn vec_of(v: Vec<f64>) -> DenseVector {
    DenseVector::new(v).expect("finite entries")
}

/// Random vector with about a third of its entries zero.
fn random_vector(d: usize, scale: f64, rng: &mut SimRng) -> DenseVector {
    vec_of(
        (0..d)
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(-scale..scale) })
            .collect(),
    )
}

/// Random point of the ℓ1 ball of radius `b`.
fn in_l1_ball(d: usize, b: f64, rng: &mut SimRng) -> DenseVector {
    let v = random_vector(d, 1.0, rng);
    let n = v.l1();
    if n == 0.0 {
        return v;
    }
    v.scaled(b * rng.gen_range(0.0..=1.0) / n)
}

/// Either an independent point or a perturbation of `a` at a random scale,
/// so near-coincident pairs are exercised.
fn partner(a: &DenseVector, b: f64, rng: &mut SimRng) -> DenseVector {
    let d = a.dim();
    if rng.gen_bool(0.5) {
        return in_l1_ball(d, b, rng);
    }
    let eps = 10f64.powf(-rng.gen_range(1.0..8.0));
    let mut v = a.add(&random_vector(d, eps, rng)).expect("same dimension");
    let n = v.l1();
    if n > b {
        v = v.scaled(b / n);
    }
    v
}

fn random_p(rng: &mut SimRng) -> f64 {
    if rng.gen_bool(0.1) {
        2.0
    } else {
        rng.gen_range(1.05..2.0)
    }
}

const MIRROR_CASES: usize = 1000;

fn mirror_suite() -> Vec<CheckReport> {
    let mut rng = SimRng::seed_from_u64(0x4d49_5252);
    let s = "mirror";
    let mut duality = Tally::new(s, "dual_norm_identity");
    let mut roundtrip = Tally::new(s, "inverse_roundtrip");
    let mut strong = Tally::new(s, "strong_convexity");
    let mut strong_c = Tally::new(s, "strong_convexity_centered");
    let mut upper = Tally::new(s, "bregman_norm_bound");
    let mut holder = Tally::new(s, "bregman_holder");
    let mut holder_c = Tally::new(s, "bregman_holder_centered");
    let mut grad_inf = Tally::new(s, "gradient_holder_inf");
    let mut grad_q = Tally::new(s, "gradient_holder_q");
    let mut scalar = Tally::new(s, "scalar_holder");
    for _ in 0..MIRROR_CASES {
        let d = rng.gen_range(1..40);
        let p = random_p(&mut rng);
        let q = p / (p - 1.0);
        let big = rng.gen_range(0.1..4.0);
        let ep = Exponent::Finite(p);
        let center = in_l1_ball(d, big, &mut rng);
        let origin = MirrorMap::centered_at_origin(p, d).expect("valid exponent");
        let centered = MirrorMap::new(p, center.clone()).expect("valid exponent");

        let w = random_vector(d, big, &mut rng);
        let theta = w.sub(&center).unwrap();
        let g = centered.grad_reg(&w).unwrap();
        duality.margin(1e-10 * (1.0 + w.norm(ep)) - (g.norm(Exponent::Finite(q)) - theta.norm(ep)).abs());
        let back = centered.inv_grad_reg(&g).unwrap();
        roundtrip.margin(1e-8 * (1.0 + w.linf()) - back.sub(&w).unwrap().linf());

        let a = in_l1_ball(d, big, &mut rng);
        let b = partner(&a, big, &mut rng);
        let c = in_l1_ball(d, big, &mut rng);
        let diff = a.sub(&b).unwrap();
        let (dp, dinf) = (diff.norm(ep), diff.linf());
        let sc = (p - 1.0) / 2.0 * dp * dp;
        strong.margin(origin.bregman(&a, &b).unwrap() - sc + 1e-12);
        strong_c.margin(centered.bregman(&a, &b).unwrap() - sc + 1e-12);

        let bp = a.norm(ep).max(b.norm(ep));
        let dab = origin.bregman(&a, &b).unwrap();
        upper.margin(3.0 * bp * dp - dab + 1e-12);

        let bl1 = a.l1().max(b.l1()).max(c.l1()).max(1e-300);
        let lhs = origin.bregman(&c, &a).unwrap() - origin.bregman(&c, &b).unwrap();
        holder.margin(5.0 * bl1 * dp + 4.0 * bl1.powf(3.0 - p) * dinf.powf(p - 1.0) - lhs + 1e-12);
        let bc = bl1.max(center.l1());
        let lhs_c = centered.bregman(&c, &a).unwrap() - centered.bregman(&c, &b).unwrap();
        holder_c.margin(10.0 * bc * dp + 16.0 * bc.powf(3.0 - p) * dinf.powf(p - 1.0) - lhs_c + 1e-12);

        let gd = origin.grad_reg(&a).unwrap().sub(&origin.grad_reg(&b).unwrap()).unwrap();
        let b2p = bp.powf(2.0 - p);
        grad_inf.margin(2.0 * b2p * dinf.powf(p - 1.0) + dp - gd.linf() + 1e-12);
        grad_q.margin(2.0 * b2p * dp.powf(p - 1.0) + dp - gd.norm(Exponent::Finite(q)) + 1e-12);

        let x: f64 = rng.gen_range(-3.0..3.0);
        let y = if rng.gen_bool(0.5) { -x * rng.gen_range(0.0..1.0) } else { x + rng.gen_range(-1e-3..1e-3) };
        let e = p - 1.0;
        scalar.margin(2.0 * (x - y).abs().powf(e) - (signed_pow(x, e) - signed_pow(y, e)).abs() + 1e-15);
    }
    [duality, roundtrip, strong, strong_c, upper, holder, holder_c, grad_inf, grad_q, scalar]
        .into_iter()
        .map(Tally::done)
        .collect()
}

const MAUREY_TRIALS: usize = 10_000;

fn maurey_suite() -> Vec<CheckReport> {
    let mut rng = SimRng::seed_from_u64(0x4d41_5552);
    let s = "maurey";

    // ⟨Q^s(w) − w, u⟩ has mean zero for any fixed u.
    let mut unbiased = Tally::new(s, "unbiased_3se");
    for case in 0..6 {
        let d = 8 + 8 * case;
        let w = random_vector(d, 1.0, &mut rng);
        let u = vec_of((0..d).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect());
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..MAUREY_TRIALS {
            let z = maurey(&w, 16, &mut rng).unwrap().decode(d).unwrap().sub(&w).unwrap().dot(&u).unwrap();
            sum += z;
            sq += z * z;
        }
        let n = MAUREY_TRIALS as f64;
        let mean = sum / n;
        let se = ((sq / n - mean * mean).max(0.0) / n).sqrt();
        unbiased.margin(3.0 * se - mean.abs());
    }

    let mut lp = Tally::new(s, "lp_error_bound");
    let d = 256;
    let w = random_vector(d, 1.0, &mut rng);
    for p in [1.25, 1.5, 2.0] {
        for samples in [16u64, 64, 256] {
            let mut total = 0.0;
            for _ in 0..MAUREY_TRIALS {
                let q = maurey(&w, samples, &mut rng).unwrap().decode(d).unwrap();
                total += q.sub(&w).unwrap().norm(Exponent::Finite(p));
            }
            let bound = 4.0 * w.l1() * (samples as f64).powf(-(1.0 - 1.0 / p));
            lp.ratio(total / MAUREY_TRIALS as f64, bound);
        }
    }

    // Square loss on an isotropic sparse-regression instance: the excess of
    // Q^s(w) over w is ‖Q^s(w) − w‖₂², against β R_∞² ‖w‖₁² / s with β = 2.
    let mut smooth = Tally::new(s, "risk_preservation_3se");
    let inst = gen_sparse_regression(64, 4, 1.0, 0.1, 7).unwrap();
    for samples in [16u64, 64, 256] {
        let w = in_l1_ball(64, inst.b1, &mut rng);
        let base = inst.risk(&w);
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..MAUREY_TRIALS {
            let z = inst.risk(&maurey(&w, samples, &mut rng).unwrap().decode(64).unwrap()) - base;
            sum += z;
            sq += z * z;
        }
        let n = MAUREY_TRIALS as f64;
        let mean = sum / n;
        let se = ((sq / n - mean * mean).max(0.0) / n).sqrt();
        let bound = 2.0 * inst.r_inf * inst.r_inf * w.l1().powi(2) / samples as f64;
        smooth.ratio(mean - 3.0 * se, bound);
    }

    // ‖W − Q^s(W)‖_{S_p} equals the ℓp distance of the spectra.
    let mut spectral = Tally::new(s, "spectral_identity");
    for _ in 0..50 {
        let d = rng.gen_range(2..12);
        let m = DenseMatrix::new(d, (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let p = random_p(&mut rng);
        let sample = spectral_maurey_with_basis(&m, rng.gen_range(1..40), &mut rng).unwrap();
        let q = sample.message.decode(d).unwrap();
        let lhs = schatten_norm(&m.sub(&q).unwrap(), Exponent::Finite(p)).unwrap();
        let sigma = &sample.svd.singular_values;
        let hat = sample.sampled_spectrum();
        let rhs = vec_of(sigma.iter().zip(&hat).map(|(a, b)| a - b).collect()).norm(Exponent::Finite(p));
        spectral.margin(1e-8 - (lhs - rhs).abs());
    }
    vec![unbiased.done(), lp.done(), smooth.done(), spectral.done()]
}

fn primes_up_to(n: u64) -> Vec<u64> {
    let mut composite = vec![false; n as usize + 1];
    let mut out = Vec::new();
    for i in 2..=n as usize {
        if !composite[i] {
            out.push(i as u64);
            for j in (i * i..=n as usize).step_by(i) {
                composite[j] = true;
            }
        }
    }
    out
}

/// `C(n, k)` through Legendre's formula for prime exponents of factorials.
fn binomial_by_primes(n: u64, k: u64, primes: &[u64]) -> BigUint {
    let legendre = |mut m: u64, p: u64| {
        let mut e = 0;
        while m > 0 {
            m /= p;
            e += m;
        }
        e
    };
    let mut acc = BigUint::one();
    for &p in primes.iter().take_while(|&&p| p <= n) {
        let e = legendre(n, p) - legendre(k, p) - legendre(n - k, p);
        if e > 0 {
            acc *= BigUint::from(p).pow(e as u32);
        }
    }
    acc
}

/// `⌈log₂ x⌉` for `x ≥ 1`.
fn ceil_log2(x: &BigUint) -> u64 {
    if x.is_zero() || x.is_one() {
        0
    } else {
        (x - BigUint::one()).bits()
    }
}

fn random_message(d: usize, s: u64, rng: &mut SimRng) -> MaureyMessage {
    if rng.gen_bool(0.02) {
        return MaureyMessage::from_parts(0.0, s, Vec::new()).unwrap();
    }
    let mut atoms = Vec::new();
    let mut left = s;
    while left > 0 {
        let c = rng.gen_range(1..=left);
        atoms.push((Atom { index: rng.gen_range(0..d), negative: rng.gen_bool(0.5) }, c));
        left -= c;
    }
    MaureyMessage::from_parts(rng.gen_range(1e-3..1e3), s, atoms).unwrap()
}

fn wire_suite() -> Vec<CheckReport> {
    let mut rng = SimRng::seed_from_u64(0x5749_5245);
    let s = "wire";
    let mut roundtrip = Tally::new(s, "encode_decode_roundtrip");
    for i in 0..10_000 {
        let d = rng.gen_range(1..2000);
        let samples = rng.gen_range(1..300);
        let mode = if i % 2 == 0 { WireMode::Rank } else { WireMode::List };
        let msg = random_message(d, samples, &mut rng);
        let (bits, cost) = encode(&msg, d, mode).unwrap();
        let ok = decode_bits(&bits, d).ok() == Some(msg) && cost.total_bits == bits.len();
        roundtrip.margin(if ok { 0.0 } else { -1.0 });
    }
    let mut rank = Tally::new(s, "rank_payload_vs_binomial");
    let primes = primes_up_to(2 * 10_000 + 512);
    let mut cases: Vec<(usize, u64)> = vec![(1, 1), (1, 512), (10_000, 1), (10_000, 512), (2, 3)];
    cases.extend((0..200).map(|_| (rng.gen_range(1..=10_000), rng.gen_range(1..=512))));
    for (d, samples) in cases {
        let n = 2 * d as u64 + samples - 1;
        let want = ceil_log2(&binomial_by_primes(n, samples, &primes));
        let got = payload_bits(WireMode::Rank, d, samples);
        rank.margin(if got == want { 0.0 } else { -((got as f64) - (want as f64)).abs() });
    }
    vec![roundtrip.done(), rank.done()]
}

fn losses_suite() -> Vec<CheckReport> {
    let mut rng = SimRng::seed_from_u64(0x4c4f_5353);
    let s = "losses";
    let mut selfbound = Tally::new(s, "smooth_self_bounding");
    let mut fd = Tally::new(s, "gradient_finite_difference");
    for i in 0..1000 {
        let link = if i % 2 == 0 { LinkFunction::Square } else { LinkFunction::Logistic };
        let d = rng.gen_range(1..20);
        let q = rng.gen_range(2.0..6.0);
        let x = random_vector(d, 1.0, &mut rng);
        let r_q = x.norm(Exponent::Finite(q)).max(1e-3);
        let y = if link == LinkFunction::Logistic {
            if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
        } else {
            rng.gen_range(-1.0..1.0)
        };
        let z = Example { x, y };
        let w = random_vector(d, 1.0, &mut rng);
        let ok = smoothness_selfbound_check(link, &w, &z, q, r_q).unwrap();
        selfbound.margin(if ok { 0.0 } else { -1.0 });
        let g = subgradient(link, &w, &z).unwrap();
        let j = rng.gen_range(0..d);
        let h = 1e-6;
        let mut plus = w.clone().into_vec();
        plus[j] += h;
        let mut minus = w.clone().into_vec();
        minus[j] -= h;
        let numeric = (loss(link, &vec_of(plus), &z).unwrap() - loss(link, &vec_of(minus), &z).unwrap()) / (2.0 * h);
        let _ = beta_q(link, r_q).unwrap();
        fd.margin(1e-6 * (1.0 + numeric.abs()) - (numeric - g[j]).abs());
    }
    vec![selfbound.done(), fd.done()]
}

fn holdout_agreement(t: &mut Tally, inst: &ProblemInstance, rng: &mut SimRng) {
    for _ in 0..2 {
        let w = inst.w_star().add(&random_vector(inst.dim(), 0.2, rng)).unwrap();
        let closed = inst.excess_risk(&w);
        let (mc, se) = inst.holdout_excess(&w, 1_000_000);
        t.margin(3.0 * se - (closed - mc).abs());
    }
}

fn datagen_suite() -> Vec<CheckReport> {
    let mut rng = SimRng::seed_from_u64(0x4441_5441);
    let s = "datagen";
    let mut norms = Tally::new(s, "feature_norm_bound");
    let mut agree = Tally::new(s, "closed_form_vs_holdout_3se");
    let mut optimal = Tally::new(s, "optimum_beats_probes");
    let block = LinearOptions { active_dims: Some(6), ..Default::default() };
    let insts = vec![
        gen_l1lq_with(12, 2.0, 1.0, 1.0, 2, block).unwrap(),
        gen_l1lq_with(12, 3.0, 1.0, 1.0, 3, block).unwrap(),
        gen_l1lq_with(12, 2.0, 1.0, 1.0, 4, LinearOptions { link: LinkFunction::Absolute, noise: 0.5, ..block })
            .unwrap(),
        gen_l2l2_with(12, 1.0, 1.0, 5, block).unwrap(),
        gen_sparse_regression(12, 3, 1.0, 0.1, 6).unwrap(),
    ];
    for inst in &insts {
        for i in 0..200 {
            let x = inst.example(i).x;
            norms.margin(inst.r_q * (1.0 + 1e-12) - x.norm(Exponent::Finite(inst.q)));
        }
        holdout_agreement(&mut agree, inst, &mut rng);
        let at_star = inst.risk(inst.w_star());
        for _ in 0..100 {
            let w = inst.w_star().add(&random_vector(inst.dim(), 0.3, &mut rng)).unwrap();
            optimal.margin(inst.risk(&w) - at_star + 1e-12);
        }
    }
    vec![norms.done(), agree.done(), optimal.done()]
}

fn protocols_suite() -> Result<Vec<CheckReport>, HarnessError> {
    let mut rng = SimRng::seed_from_u64(0x5052_4f54);
    let s = "protocols";
    let mut regret = Tally::new(s, "per_machine_regret");
    let mut feasible = Tally::new(s, "iterate_feasibility");
    let mut ledger = Tally::new(s, "ledger_complete_and_deterministic");
    let mut cone = Tally::new(s, "l1_cone");
    for case in 0..12u64 {
        let q = [2.0, 3.0, 4.0][case as usize % 3];
        let inst = gen_l1lq_with(60, q, 1.0, 1.0, case, LinearOptions { active_dims: Some(10), ..Default::default() })?;
        let mut cfg = default_params_lipschitz(60, 1.0, 2.0 * 2.5, q, 128, 4, SparsityConstants::default(), false)?;
        if case % 2 == 1 {
            cfg.output = OutputRule::AveragedHighProbability;
        }
        let opts = SmdOptions { comparator: Some(inst.w_star().clone()), ..Default::default() };
        let a = run_smd(&inst, &cfg, LinkFunction::Square, case, &opts)?;
        let b = run_smd(&inst, &cfg, LinkFunction::Square, case, &opts)?;
        for t in &a.traces {
            regret.margin(t.margin() + 1e-8);
            feasible.margin(1.0 + 1e-9 - t.max_l1);
        }
        let summed: u64 = a.ledger.entries().iter().map(|e| e.cost.total_bits).sum();
        let same = a.ledger == b.ledger && a.w_hat == b.w_hat && summed == a.ledger.total_bits();
        ledger.margin(if same { 0.0 } else { -1.0 });
    }
    let inst = gen_sparse_regression(256, 4, 1.0, 0.1, 11)?;
    let base = default_params_lipschitz(256, inst.b1, 3.8 * inst.r_q, 2.0, 4096, 4, SparsityConstants::default(), false)?;
    let fcfg = FastRateConfig::new(sparse_regression_gamma_q(1.0, 4), 0.004)?;
    let run = run_fast_smd(&inst, &base, &fcfg, LinkFunction::Square, 5, Some(inst.w_star()))?;
    for t in &run.traces {
        regret.margin(t.margin() + 1e-8);
        feasible.margin(inst.b1 * (1.0 + 1e-9) - t.max_l1);
    }
    // Feasible points of {‖w‖₁ ≤ ‖w*‖₁} keep their error mostly on the support.
    let support: Vec<usize> = (0..256).filter(|&i| inst.w_star()[i] != 0.0).collect();
    for _ in 0..1000 {
        let mut w = in_l1_ball(256, inst.b1, &mut rng);
        if rng.gen_bool(0.5) {
            w = inst.w_star().add(&random_vector(256, 0.01, &mut rng)).unwrap();
            let n = w.l1();
            if n > inst.b1 {
                w = w.scaled(inst.b1 / n);
            }
        }
        let err = w.sub(inst.w_star()).unwrap();
        let on: f64 = support.iter().map(|&i| err[i].abs()).sum();
        let off = err.l1() - on;
        cone.margin(on - off + 1e-9);
    }
    Ok(vec![regret.done(), feasible.done(), ledger.done(), cone.done()])
}
