//! Seeded comparisons of each distributed protocol against its
//! single-machine counterpart.

use sublinear::datagen::{gen_l1lq_with, gen_l2l2_with, gen_matrix_s1sq, LinearOptions};
use sublinear::losses::LinkFunction;
use sublinear::protocols::{
    default_params_lipschitz, default_sketch_dim, run_centralized_matrix_md, run_centralized_md,
    run_centralized_ogd, run_jl_ogd, run_schatten_smd, run_smd, run_truncation_baseline, JlConfig,
    SchattenOptions, SmdOptions, SparsityConstants,
};

const TRIALS: u64 = 12;

fn square_opts() -> LinearOptions {
    LinearOptions { link: LinkFunction::Square, noise: 0.25, active_dims: Some(16) }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn smd_within_twice_centralized() {
    let (d, n, m) = (1024, 256, 4);
    let pairs: Vec<(f64, f64)> = (0..TRIALS)
        .map(|t| {
            let inst = gen_l1lq_with(d, 2.0, 1.0, 1.0, 100 + t, square_opts()).unwrap();
            let cfg = default_params_lipschitz(d, 1.0, 4.5, 2.0, n, m, SparsityConstants::default(), false).unwrap();
            let a = run_smd(&inst, &cfg, LinkFunction::Square, t, &SmdOptions::default()).unwrap();
            let c = run_centralized_md(&inst, &cfg, LinkFunction::Square, t, &SmdOptions::default()).unwrap();
            (inst.excess_risk(&a.w_hat), inst.excess_risk(&c.w_hat))
        })
        .collect();
    let ours = mean(pairs.iter().map(|p| p.0));
    let central = mean(pairs.iter().map(|p| p.1));
    assert!(ours <= 2.0 * central, "smd {ours} vs centralized {central}");
}

#[test]
fn total_bits_follow_the_communication_formula() {
    // κ such that bits ≤ κ (N^{q/2} log₂(d/N) + m^{2q−1} log₂(d/m) + 64 m).
    const KAPPA: f64 = 8.0;
    let d = 4096;
    for (q, n, m) in [(2.0, 256usize, 4usize), (2.0, 1024, 8), (3.0, 256, 4)] {
        let inst = gen_l1lq_with(d, q, 1.0, 1.0, 9, square_opts()).unwrap();
        let cfg = default_params_lipschitz(d, 1.0, 4.5, q, n, m, SparsityConstants::default(), false).unwrap();
        let r = run_smd(&inst, &cfg, LinkFunction::Square, 3, &SmdOptions::default()).unwrap();
        let (nf, df, mf) = (n as f64, d as f64, m as f64);
        let formula = nf.powf(q / 2.0) * (df / nf).log2() + mf.powf(2.0 * q - 1.0) * (df / mf).log2() + 64.0 * mf;
        let bits = r.ledger.total_bits() as f64;
        assert!(bits <= KAPPA * formula, "q={q} N={n} m={m}: {bits} bits vs formula {formula}");
    }
}

#[test]
fn truncation_baseline_within_twice_smd() {
    let (d, n, m) = (1024, 64, 4);
    let pairs: Vec<(f64, f64)> = (0..TRIALS)
        .map(|t| {
            let inst = gen_l1lq_with(d, 2.0, 1.0, 1.0, 200 + t, square_opts()).unwrap();
            let cfg = default_params_lipschitz(d, 1.0, 4.5, 2.0, n, m, SparsityConstants::default(), false).unwrap();
            let tr = run_truncation_baseline(&inst, &cfg, LinkFunction::Square, 1.0, t).unwrap();
            let s = run_smd(&inst, &cfg, LinkFunction::Square, t, &SmdOptions::default()).unwrap();
            (inst.excess_risk(&tr.w_hat), inst.excess_risk(&s.w_hat))
        })
        .collect();
    let trunc = mean(pairs.iter().map(|p| p.0));
    let smd = mean(pairs.iter().map(|p| p.1));
    assert!(trunc <= 2.0 * smd, "truncation {trunc} vs smd {smd}");
}

#[test]
fn jl_ogd_within_twice_centralized_ogd() {
    let (d, n, m) = (2000, 128, 4);
    let eta = 1.0 / (n as f64).sqrt();
    let k = default_sketch_dim(d, n);
    let pairs: Vec<(f64, f64)> = (0..TRIALS)
        .map(|t| {
            let inst = gen_l2l2_with(d, 1.0, 1.0, 300 + t, LinearOptions { active_dims: Some(16), ..Default::default() })
                .unwrap();
            let cfg = JlConfig { d, n_total: n, machines: m, k, eta, identity: false };
            let r = run_jl_ogd(&inst, &cfg, LinkFunction::Square, t).unwrap();
            let c = run_centralized_ogd(&inst, d, n, eta, LinkFunction::Square).unwrap();
            (inst.excess_risk(&r.w_hat), inst.excess_risk(&c))
        })
        .collect();
    let jl = mean(pairs.iter().map(|p| p.0));
    let central = mean(pairs.iter().map(|p| p.1));
    assert!(jl <= 2.0 * central, "jl {jl} vs centralized {central}");
}

#[test]
fn schatten_within_twice_centralized_matrix_md() {
    let (d, n, m) = (16, 128, 2);
    let pairs: Vec<(f64, f64)> = (0..6)
        .map(|t| {
            let inst = gen_matrix_s1sq(d, 2.0, 1.0, 1.0, 400 + t, 4, 2, 0.1).unwrap();
            let cfg = default_params_lipschitz(d, 1.0, 4.2, 2.0, n, m, SparsityConstants::default(), false).unwrap();
            let a = run_schatten_smd(&inst, &cfg, LinkFunction::Square, t, &SchattenOptions::default()).unwrap();
            let c = run_centralized_matrix_md(&inst, &cfg, LinkFunction::Square, t, &SchattenOptions::default())
                .unwrap();
            (inst.excess_risk(&a.w_hat), inst.excess_risk(&c.w_hat))
        })
        .collect();
    let ours = mean(pairs.iter().map(|p| p.0));
    let central = mean(pairs.iter().map(|p| p.1));
    assert!(ours <= 2.0 * central, "schatten {ours} vs centralized {central}");
}
