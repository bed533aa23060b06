use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sublinear::datagen::{
    gen_hide_and_seek, gen_l1lq_with, gen_l2l2_with, gen_matrix_s1sq, gen_sparse_regression, ExampleSource,
    LinearOptions, MatrixExampleSource, ProblemInstance,
};
use sublinear::losses::LinkFunction;
use sublinear::vecspace::{schatten_norm, DenseMatrix, DenseVector, Exponent};

fn probes(inst: &ProblemInstance, count: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<DenseVector> {
    (0..count)
        .map(|_| {
            let mut w = inst.w_star().clone().into_vec();
            for v in w.iter_mut() {
                *v += rng.gen_range(-scale..scale);
            }
            DenseVector::new(w).unwrap()
        })
        .collect()
}

fn assert_closed_form_matches_holdout(inst: &ProblemInstance, rng: &mut ChaCha8Rng) {
    for w in probes(inst, 3, 0.3, rng) {
        let closed = inst.excess_risk(&w);
        let (mc, se) = inst.holdout_excess(&w, 1_000_000);
        assert!((closed - mc).abs() <= 3.0 * se, "closed {closed} vs holdout {mc} ± {se}");
        assert!(closed >= 0.0);
    }
}

#[test]
fn square_and_absolute_closed_forms_match_holdout() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let block = LinearOptions { active_dims: Some(6), ..Default::default() };
    let cases = vec![
        gen_l1lq_with(12, 2.0, 1.0, 1.0, 2, block).unwrap(),
        gen_l1lq_with(12, 3.0, 1.0, 1.0, 3, block).unwrap(),
        gen_l1lq_with(12, 2.0, 1.0, 1.0, 4, LinearOptions { link: LinkFunction::Absolute, noise: 0.5, ..block })
            .unwrap(),
        gen_l2l2_with(12, 1.0, 1.0, 5, LinearOptions { link: LinkFunction::Absolute, noise: 0.2, ..block })
            .unwrap(),
        gen_sparse_regression(12, 3, 1.0, 0.1, 6).unwrap(),
    ];
    for inst in &cases {
        assert!(inst.risk_closed_form(inst.w_star()).is_some());
        assert_closed_form_matches_holdout(inst, &mut rng);
    }
}

#[test]
fn first_coordinate_perturbation_equals_sigma11_delta_squared() {
    let inst = gen_l1lq_with(10, 2.0, 1.0, 1.0, 7, LinearOptions { active_dims: Some(5), ..Default::default() })
        .unwrap();
    let delta = 0.4;
    let mut w = inst.w_star().clone().into_vec();
    w[0] += delta;
    let w = DenseVector::new(w).unwrap();
    let closed = inst.excess_risk(&w);
    assert!((closed - delta * delta / 5.0).abs() < 1e-15);
    let (mc, se) = inst.holdout_excess(&w, 1_000_000);
    assert!((closed - mc).abs() <= 3.0 * se);
}

#[test]
fn optimum_beats_probes() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let inst = gen_l1lq_with(30, 2.0, 1.0, 1.0, 9, LinearOptions { active_dims: Some(10), ..Default::default() })
        .unwrap();
    let base = inst.risk(inst.w_star());
    for w in probes(&inst, 100, 0.5, &mut rng) {
        assert!(base <= inst.risk(&w));
    }
}

#[test]
fn declared_bounds_hold_on_samples() {
    let insts = vec![
        gen_l1lq_with(40, 4.0, 1.0, 1.5, 1, LinearOptions { active_dims: Some(16), ..Default::default() }).unwrap(),
        gen_sparse_regression(40, 4, 2.0, 0.1, 2).unwrap(),
        gen_hide_and_seek(40, 0.3, 5, 3).unwrap(),
    ];
    for inst in &insts {
        let q = Exponent::Finite(inst.q);
        for i in 0..100_000 {
            let z = inst.example(i);
            assert!(z.x.norm(q) <= inst.r_q * (1.0 + 1e-12));
            assert!(z.x.linf() <= inst.r_inf * (1.0 + 1e-12));
            assert!(z.y.abs() <= 1.0 + 1e-12);
        }
    }
    let m = gen_matrix_s1sq(16, 3.0, 1.0, 2.0, 4, 8, 2, 0.1).unwrap();
    for i in 0..2_000 {
        let z = m.example(i);
        let n = schatten_norm(&z.x, Exponent::Finite(3.0)).unwrap();
        assert!((n - 2.0).abs() < 1e-12);
    }
    assert!((schatten_norm(m.w_star(), Exponent::one()).unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn hide_and_seek_coordinate_means() {
    let rho = 0.2;
    let inst = gen_hide_and_seek(8, rho, 2, 10).unwrap();
    let n = 100_000;
    let mut sums = [0.0; 8];
    for i in 0..n {
        let z = inst.example(i);
        for j in 0..8 {
            sums[j] += z.x[j];
        }
    }
    for j in 0..8 {
        let mean = sums[j] / n as f64;
        let target = if j == 2 { 2.0 * rho } else { 0.0 };
        let se = ((1.0 - target * target) / n as f64).sqrt();
        assert!((mean - target).abs() <= 3.0 * se, "coord {j}: {mean}");
    }
}

#[test]
fn matrix_closed_form_matches_holdout() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = gen_matrix_s1sq(6, 2.0, 1.0, 1.0, 12, 4, 2, 0.3).unwrap();
    for _ in 0..3 {
        let data: Vec<f64> = m.w_star().as_slice().iter().map(|v| v + rng.gen_range(-0.2..0.2)).collect();
        let w = DenseMatrix::new(6, data).unwrap();
        let closed = m.excess_risk(&w);
        let (mc, se) = m.holdout_excess(&w, 1_000_000);
        assert!((closed - mc).abs() <= 3.0 * se, "{closed} vs {mc} ± {se}");
    }
}
