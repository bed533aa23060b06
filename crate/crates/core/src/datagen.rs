//! Seeded synthetic problem instances with known optima.
//!
//! Examples are counter-based: example `i` is a pure function of
//! `(stream seed, i)`, so two algorithms fed the same instance see the same
//! data without anything being materialized.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{invalid, Result};
use crate::losses::{Example, LinkFunction};
use crate::rng::{derive_seed, SimRng};
use crate::vecspace::{DenseMatrix, DenseVector, Exponent};

/// Holdout size used when no closed form exists.
pub const HOLDOUT_SAMPLES: usize = 1_000_000;

const STREAM_TAG: u64 = 0x5354_5245_414d;
const HOLDOUT_TAG: u64 = 0x484f_4c44_4f55_54;

/// Anything that yields the `i`-th example of a stream.
pub trait ExampleSource: Sync {
    fn dim(&self) -> usize;
    fn example(&self, i: u64) -> Example;
    /// Number of examples, or `None` for an unbounded stream.
    fn size(&self) -> Option<u64> {
        None
    }
}

impl ExampleSource for [Example] {
    fn dim(&self) -> usize {
        self.first().map_or(0, |z| z.x.dim())
    }

    fn example(&self, i: u64) -> Example {
        self[i as usize].clone()
    }

    fn size(&self) -> Option<u64> {
        Some(self.len() as u64)
    }
}

impl ExampleSource for Vec<Example> {
    fn dim(&self) -> usize {
        self.as_slice().dim()
    }

    fn example(&self, i: u64) -> Example {
        self[i as usize].clone()
    }

    fn size(&self) -> Option<u64> {
        Some(self.len() as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureLaw {
    /// Uniform on the ℓq sphere of radius `radius` inside coordinates
    /// `[0, block)`, zero elsewhere.
    LqSphere { q: f64, radius: f64, block: usize },
    /// I.i.d. `±scale` coordinates.
    Rademacher { scale: f64 },
    /// I.i.d. `±1` coordinates; coordinate `planted` has mean `2ρ`.
    HideAndSeek { rho: f64, planted: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Labels {
    /// `y = ⟨w*, x⟩ + ε`, `ε ~ U[−noise, noise]`.
    LinearModel { noise: f64 },
    /// `y = 1`.
    Constant,
}

/// Options shared by the ℓ1/ℓq and ℓ2/ℓ2 generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOptions {
    pub link: LinkFunction,
    pub noise: f64,
    /// Size of the coordinate block carrying features and `w*`; `None`
    /// means all `d` coordinates.
    pub active_dims: Option<usize>,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions { link: LinkFunction::Square, noise: 0.25, active_dims: None }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    d: usize,
    link: LinkFunction,
    w_star: DenseVector,
    law: FeatureLaw,
    labels: Labels,
    /// Radius of the constraint ball `{‖w‖₁ ≤ b1}` (or `‖w‖₂` for ℓ2 instances).
    pub b1: f64,
    /// Feature norm exponent and bound: `‖x‖_q ≤ r_q`.
    pub q: f64,
    pub r_q: f64,
    /// `‖x‖_∞ ≤ r_inf`.
    pub r_inf: f64,
    pub gamma: Option<f64>,
    pub sparsity: Option<usize>,
    stream_seed: u64,
}

impl ProblemInstance {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn link(&self) -> LinkFunction {
        self.link
    }

    pub fn w_star(&self) -> &DenseVector {
        &self.w_star
    }

    pub fn law(&self) -> &FeatureLaw {
        &self.law
    }

    pub fn labels(&self) -> Labels {
        self.labels
    }

    pub fn stream_seed(&self) -> u64 {
        self.stream_seed
    }

    /// Same distribution, independent example stream.
    pub fn with_stream(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.stream_seed = derive_seed(seed, STREAM_TAG);
        out
    }

    fn draw(&self, seed: u64, i: u64) -> Example {
        let mut rng = SimRng::seed_from_u64(derive_seed(seed, i));
        let x = self.draw_features(&mut rng);
        let y = match self.labels {
            Labels::Constant => 1.0,
            Labels::LinearModel { noise } => {
                let eps = if noise > 0.0 { rng.gen_range(-noise..=noise) } else { 0.0 };
                self.w_star.dot_unchecked(&x) + eps
            }
        };
        Example { x, y }
    }

    fn draw_features(&self, rng: &mut SimRng) -> DenseVector {
        let mut x = vec![0.0; self.d];
        match self.law {
            FeatureLaw::LqSphere { q, radius, block } => {
                let g = &mut x[..block];
                if q == 2.0 {
                    g.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                } else {
                    let gamma = Gamma::new(1.0 / q, 1.0).expect("valid shape");
                    for v in g.iter_mut() {
                        let mag: f64 = gamma.sample(rng).powf(1.0 / q);
                        *v = if rng.gen::<bool>() { mag } else { -mag };
                    }
                }
                let n = crate::vecspace::norm_slice(g, Exponent::Finite(q));
                g.iter_mut().for_each(|v| *v *= radius / n);
            }
            FeatureLaw::Rademacher { scale } => {
                x.iter_mut().for_each(|v| *v = if rng.gen::<bool>() { scale } else { -scale });
            }
            FeatureLaw::HideAndSeek { rho, planted } => {
                for (i, v) in x.iter_mut().enumerate() {
                    let p = if i == planted { 0.5 + rho } else { 0.5 };
                    *v = if rng.gen::<f64>() < p { 1.0 } else { -1.0 };
                }
            }
        }
        DenseVector::from_vec_unchecked(x)
    }

    /// Per-coordinate second moment `E[x_i²]` inside the support block.
    fn coordinate_variance(&self) -> f64 {
        match self.law {
            FeatureLaw::LqSphere { q, radius, block } => {
                if q == 2.0 {
                    return radius * radius / block as f64;
                }
                // The direction g/‖g‖_q of a generalized Gaussian is independent
                // of ‖g‖_q, and ‖g‖_q^q ~ Gamma(k/q).
                let k = block as f64;
                let lg = libm::lgamma;
                let log_ratio = lg(3.0 / q) - lg(1.0 / q) + lg(k / q) - lg((k + 2.0) / q);
                radius * radius * log_ratio.exp()
            }
            FeatureLaw::Rademacher { scale } => scale * scale,
            FeatureLaw::HideAndSeek { .. } => 1.0,
        }
    }

    /// Population risk `L(w)` in closed form where one exists.
    pub fn risk_closed_form(&self, w: &DenseVector) -> Option<f64> {
        let delta = w.sub(&self.w_star).ok()?;
        match (self.link, self.labels, &self.law) {
            (LinkFunction::Linear, Labels::Constant, FeatureLaw::HideAndSeek { rho, planted }) => {
                Some(-2.0 * rho * w[*planted])
            }
            (LinkFunction::Square, Labels::LinearModel { noise }, FeatureLaw::LqSphere { block, .. }) => {
                let s: f64 = delta.as_slice()[..*block].iter().map(|x| x * x).sum();
                Some(self.coordinate_variance() * s + noise * noise / 3.0)
            }
            (LinkFunction::Square, Labels::LinearModel { noise }, FeatureLaw::Rademacher { .. }) => {
                let s: f64 = delta.as_slice().iter().map(|x| x * x).sum();
                Some(self.coordinate_variance() * s + noise * noise / 3.0)
            }
            (
                LinkFunction::Absolute,
                Labels::LinearModel { noise },
                FeatureLaw::LqSphere { q, radius, block },
            ) if *q == 2.0 => {
                let a = radius * delta.as_slice()[..*block].iter().map(|x| x * x).sum::<f64>().sqrt();
                Some(absolute_risk_on_sphere(a, noise, *block))
            }
            _ => None,
        }
    }

    /// `(mean, standard error)` of the loss of `w` over `n` holdout samples.
    pub fn holdout_risk(&self, w: &DenseVector, n: usize) -> (f64, f64) {
        self.holdout_mean(n, |z| self.link.value(w.dot_unchecked(&z.x), z.y))
    }

    /// `(mean, standard error)` of `ℓ(w, z) − ℓ(w*, z)` over `n` holdout
    /// samples.
    pub fn holdout_excess(&self, w: &DenseVector, n: usize) -> (f64, f64) {
        self.holdout_mean(n, |z| {
            self.link.value(w.dot_unchecked(&z.x), z.y) - self.link.value(self.w_star.dot_unchecked(&z.x), z.y)
        })
    }

    fn holdout_mean(&self, n: usize, f: impl Fn(&Example) -> f64) -> (f64, f64) {
        let seed = derive_seed(self.stream_seed, HOLDOUT_TAG);
        let (mut sum, mut sq) = (0.0, 0.0);
        for i in 0..n as u64 {
            let v = f(&self.draw(seed, i));
            sum += v;
            sq += v * v;
        }
        let mean = sum / n as f64;
        let var = (sq / n as f64 - mean * mean).max(0.0);
        (mean, (var / n as f64).sqrt())
    }

    /// `L(w)`: closed form if available, else a holdout estimate.
    pub fn risk(&self, w: &DenseVector) -> f64 {
        self.risk_closed_form(w).unwrap_or_else(|| self.holdout_risk(w, HOLDOUT_SAMPLES).0)
    }

    /// `L(w) − L(w*)`.
    pub fn excess_risk(&self, w: &DenseVector) -> f64 {
        match (self.risk_closed_form(w), self.risk_closed_form(&self.w_star)) {
            (Some(a), Some(b)) => a - b,
            _ => self.holdout_excess(w, HOLDOUT_SAMPLES).0,
        }
    }

    /// `L* = L(w*)`.
    pub fn optimal_risk(&self) -> f64 {
        self.risk(&self.w_star)
    }

    /// Second-moment matrix `E[xxᵀ]` is `variance · I` on this block.
    pub fn covariance_block(&self) -> Option<(usize, f64)> {
        match self.law {
            FeatureLaw::LqSphere { block, .. } => Some((block, self.coordinate_variance())),
            FeatureLaw::Rademacher { .. } => Some((self.d, self.coordinate_variance())),
            FeatureLaw::HideAndSeek { .. } => None,
        }
    }
}

impl ExampleSource for ProblemInstance {
    fn dim(&self) -> usize {
        self.d
    }

    fn example(&self, i: u64) -> Example {
        self.draw(self.stream_seed, i)
    }
}

/// `E_φ h(a cos φ)` under the density `∝ sin^{k−2} φ` on `[0, π]`, where
/// `h(c) = E_ε|c − ε| = (c² + σ²)/(2σ)` for `|c| ≤ σ` and `|c|` otherwise.
/// `h` is even, so the integral folds onto `[0, π/2]`, split at the kink.
fn absolute_risk_on_sphere(a: f64, sigma: f64, k: usize) -> f64 {
    let h = |c: f64| {
        let c = c.abs();
        if sigma > 0.0 && c <= sigma {
            (c * c + sigma * sigma) / (2.0 * sigma)
        } else {
            c
        }
    };
    if k == 1 {
        return h(a);
    }
    let weight = |phi: f64| if k == 2 { 1.0 } else { phi.sin().powi(k as i32 - 2) };
    let half = std::f64::consts::FRAC_PI_2;
    let mut cuts = vec![0.0];
    if a > sigma && sigma > 0.0 {
        cuts.push((sigma / a).acos());
    }
    cuts.push(half);
    let (mut num, mut den) = (0.0, 0.0);
    for w in cuts.windows(2) {
        num += simpson(|phi| h(a * phi.cos()) * weight(phi), w[0], w[1], 4096);
        den += simpson(weight, w[0], w[1], 4096);
    }
    num / den
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels * 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

fn check_common(d: usize, q: f64, b: f64, r: f64) -> Result<()> {
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if !(q >= 2.0) || !q.is_finite() {
        return Err(invalid(format!("feature exponent q must lie in [2, inf), got {q}")));
    }
    if !(b > 0.0) || !(r > 0.0) {
        return Err(invalid("radii must be positive"));
    }
    Ok(())
}

/// A vector supported on `[0, block)` with seeded magnitudes and signs,
/// rescaled to `‖·‖_p = norm`.
fn seeded_block_vector(d: usize, block: usize, p: f64, norm: f64, rng: &mut SimRng) -> DenseVector {
    let mut w = vec![0.0; d];
    for v in w[..block].iter_mut() {
        let mag = rng.gen_range(0.25..1.0);
        *v = if rng.gen::<bool>() { mag } else { -mag };
    }
    let n = crate::vecspace::norm_slice(&w, Exponent::Finite(p));
    w.iter_mut().for_each(|v| *v *= norm / n);
    DenseVector::from_vec_unchecked(w)
}

fn linear_instance(
    d: usize,
    q: f64,
    b: f64,
    r: f64,
    seed: u64,
    opts: LinearOptions,
    weight_norm: f64,
) -> Result<ProblemInstance> {
    check_common(d, q, b, r)?;
    let block = opts.active_dims.unwrap_or(d);
    if block == 0 || block > d {
        return Err(invalid(format!("active block {block} must lie in [1, {d}]")));
    }
    if !(opts.noise >= 0.0) {
        return Err(invalid("noise level must be nonnegative"));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let w_star = seeded_block_vector(d, block, weight_norm, b / 2.0, &mut rng);
    Ok(ProblemInstance {
        d,
        link: opts.link,
        w_star,
        law: FeatureLaw::LqSphere { q, radius: r, block },
        labels: Labels::LinearModel { noise: opts.noise },
        b1: b,
        q,
        r_q: r,
        r_inf: r,
        gamma: None,
        sparsity: Some(block),
        stream_seed: derive_seed(seed, STREAM_TAG),
    })
}

/// ℓ1/ℓq linear model: `‖w*‖₁ = B₁/2`, features uniform on the ℓq sphere of
/// radius `R_q`, square link, noise 0.25.
pub fn gen_l1lq(d: usize, q: f64, b1: f64, r_q: f64, seed: u64) -> Result<ProblemInstance> {
    gen_l1lq_with(d, q, b1, r_q, seed, LinearOptions::default())
}

pub fn gen_l1lq_with(
    d: usize,
    q: f64,
    b1: f64,
    r_q: f64,
    seed: u64,
    opts: LinearOptions,
) -> Result<ProblemInstance> {
    linear_instance(d, q, b1, r_q, seed, opts, 1.0)
}

/// ℓ2/ℓ2 linear model: `‖w*‖₂ = B₂/2`, features uniform on the ℓ2 sphere of
/// radius `R₂`. The `b1` field holds the ℓ2 radius `B₂`.
pub fn gen_l2l2(d: usize, b2: f64, r2: f64, seed: u64) -> Result<ProblemInstance> {
    gen_l2l2_with(d, b2, r2, seed, LinearOptions::default())
}

pub fn gen_l2l2_with(d: usize, b2: f64, r2: f64, seed: u64, opts: LinearOptions) -> Result<ProblemInstance> {
    linear_instance(d, 2.0, b2, r2, seed, opts, 2.0)
}

/// Sparse regression with `x = √γ·(±1)^d`, so `Σ = γI`, a `k`-sparse `w*`
/// with `‖w*‖₁ = (1 − noise)/√γ` (hence `|y| ≤ 1`) and constraint radius
/// `B₁ = ‖w*‖₁`. Features are measured in ℓ2: `R₂ = √(γd)`.
pub fn gen_sparse_regression(d: usize, k: usize, gamma: f64, noise: f64, seed: u64) -> Result<ProblemInstance> {
    if k == 0 || k > d {
        return Err(invalid(format!("sparsity {k} must lie in [1, {d}]")));
    }
    if !(gamma > 0.0) || !(0.0..1.0).contains(&noise) {
        return Err(invalid("need gamma > 0 and noise in [0, 1)"));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let support = sample_indices(&mut rng, d, k).into_vec();
    let b1 = (1.0 - noise) / gamma.sqrt();
    let mut w = vec![0.0; d];
    let mags: Vec<f64> = (0..k).map(|_| rng.gen_range(0.5..1.0)).collect();
    let total: f64 = mags.iter().sum();
    for (&i, &m) in support.iter().zip(&mags) {
        w[i] = if rng.gen::<bool>() { m } else { -m } * b1 / total;
    }
    let scale = gamma.sqrt();
    Ok(ProblemInstance {
        d,
        link: LinkFunction::Square,
        w_star: DenseVector::from_vec_unchecked(w),
        law: FeatureLaw::Rademacher { scale },
        labels: Labels::LinearModel { noise },
        b1,
        q: 2.0,
        r_q: scale * (d as f64).sqrt(),
        r_inf: scale,
        gamma: Some(gamma),
        sparsity: Some(k),
        stream_seed: derive_seed(seed, STREAM_TAG),
    })
}

/// `±1` features with `E[x_{j*}] = 2ρ`, label 1 and the linear loss, so
/// `L(w) = −2ρ w_{j*}` and `w* = e_{j*}` over the unit ℓ1 ball. `ρ = 0` gives
/// the unplanted null distribution.
pub fn gen_hide_and_seek(d: usize, rho: f64, planted: usize, seed: u64) -> Result<ProblemInstance> {
    if !(0.0..=0.5).contains(&rho) {
        return Err(invalid(format!("rho must lie in [0, 1/2], got {rho}")));
    }
    if planted >= d {
        return Err(invalid(format!("planted coordinate {planted} out of range for d = {d}")));
    }
    Ok(ProblemInstance {
        d,
        link: LinkFunction::Linear,
        w_star: DenseVector::basis(d, planted, 1.0),
        law: FeatureLaw::HideAndSeek { rho, planted },
        labels: Labels::Constant,
        b1: 1.0,
        q: 2.0,
        r_q: (d as f64).sqrt(),
        r_inf: 1.0,
        gamma: None,
        sparsity: Some(1),
        stream_seed: derive_seed(seed, STREAM_TAG),
    })
}

/// `X = R·σ·e_i e_jᵀ` with `i, j` uniform in the active block, so
/// `‖X‖_{S_q} = R` for every `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixExample {
    pub x: DenseMatrix,
    pub y: f64,
}

pub trait MatrixExampleSource: Sync {
    fn dim(&self) -> usize;
    fn example(&self, i: u64) -> MatrixExample;
    fn size(&self) -> Option<u64> {
        None
    }
}

impl MatrixExampleSource for Vec<MatrixExample> {
    fn dim(&self) -> usize {
        self.first().map_or(0, |z| z.x.dim())
    }

    fn example(&self, i: u64) -> MatrixExample {
        self[i as usize].clone()
    }

    fn size(&self) -> Option<u64> {
        Some(self.len() as u64)
    }
}

/// Trace-norm-bounded matrix regression with a rank-`rank` optimum inside a
/// `block × block` corner and square link.
#[derive(Debug, Clone)]
pub struct MatrixInstance {
    d: usize,
    block: usize,
    w_star: DenseMatrix,
    noise: f64,
    pub b1: f64,
    pub q: f64,
    pub r_q: f64,
    stream_seed: u64,
}

impl MatrixInstance {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn w_star(&self) -> &DenseMatrix {
        &self.w_star
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn with_stream(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.stream_seed = derive_seed(seed, STREAM_TAG);
        out
    }

    fn draw(&self, seed: u64, idx: u64) -> MatrixExample {
        let mut rng = SimRng::seed_from_u64(derive_seed(seed, idx));
        let i = rng.gen_range(0..self.block);
        let j = rng.gen_range(0..self.block);
        let v = if rng.gen::<bool>() { self.r_q } else { -self.r_q };
        let mut x = DenseMatrix::zeros(self.d);
        x.set(i, j, v);
        let eps = if self.noise > 0.0 { rng.gen_range(-self.noise..=self.noise) } else { 0.0 };
        MatrixExample { y: v * self.w_star.get(i, j) + eps, x }
    }

    /// `E(⟨W, X⟩ − y)² = R²‖Δ_block‖_F²/k² + σ²/3`.
    pub fn risk(&self, w: &DenseMatrix) -> f64 {
        let k = self.block;
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                let t = w.get(i, j) - self.w_star.get(i, j);
                s += t * t;
            }
        }
        self.r_q * self.r_q * s / (k * k) as f64 + self.noise * self.noise / 3.0
    }

    pub fn excess_risk(&self, w: &DenseMatrix) -> f64 {
        self.risk(w) - self.risk(&self.w_star)
    }

    /// `(mean, standard error)` of `ℓ(W, z) − ℓ(W*, z)` over `n` holdout samples.
    pub fn holdout_excess(&self, w: &DenseMatrix, n: usize) -> (f64, f64) {
        let seed = derive_seed(self.stream_seed, HOLDOUT_TAG);
        let (mut sum, mut sq) = (0.0, 0.0);
        for i in 0..n as u64 {
            let z = self.draw(seed, i);
            let a = w.inner(&z.x).expect("same dimension") - z.y;
            let b = self.w_star.inner(&z.x).expect("same dimension") - z.y;
            let v = a * a - b * b;
            sum += v;
            sq += v * v;
        }
        let mean = sum / n as f64;
        (mean, ((sq / n as f64 - mean * mean).max(0.0) / n as f64).sqrt())
    }
}

impl MatrixExampleSource for MatrixInstance {
    fn dim(&self) -> usize {
        self.d
    }

    fn example(&self, i: u64) -> MatrixExample {
        self.draw(self.stream_seed, i)
    }
}

/// `W* = Σ_{r < rank} c_r u_r v_rᵀ` in the leading `block × block` corner
/// with `‖W*‖_{S₁} = B₁/2`; features per [`MatrixExample`].
pub fn gen_matrix_s1sq(
    d: usize,
    q: f64,
    b1: f64,
    r_q: f64,
    seed: u64,
    block: usize,
    rank: usize,
    noise: f64,
) -> Result<MatrixInstance> {
    check_common(d, q, b1, r_q)?;
    if block == 0 || block > d || rank == 0 || rank > block {
        return Err(invalid(format!("need 1 <= rank <= block <= d, got rank {rank}, block {block}")));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    // Orthonormal factors by Gram-Schmidt on seeded Gaussian vectors.
    let orthonormal = |rng: &mut SimRng| -> Vec<Vec<f64>> {
        let mut cols: Vec<Vec<f64>> = Vec::new();
        while cols.len() < rank {
            let mut v: Vec<f64> = (0..block).map(|_| rng.sample(StandardNormal)).collect();
            for _ in 0..2 {
                for c in &cols {
                    let h: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(c).for_each(|(a, b)| *a -= h * b);
                }
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 {
                cols.push(v.into_iter().map(|x| x / n).collect());
            }
        }
        cols
    };
    let us = orthonormal(&mut rng);
    let vs = orthonormal(&mut rng);
    let weights: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.5..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut w = DenseMatrix::zeros(d);
    for r in 0..rank {
        let c = weights[r] / total * b1 / 2.0;
        for i in 0..block {
            for j in 0..block {
                let cur = w.get(i, j);
                w.set(i, j, cur + c * us[r][i] * vs[r][j]);
            }
        }
    }
    Ok(MatrixInstance {
        d,
        block,
        w_star: w,
        noise,
        b1,
        q,
        r_q,
        stream_seed: derive_seed(seed, STREAM_TAG),
    })
}
