//! The centered ℓp mirror map `R(w) = ½‖w − w̄‖_p²` for `p ∈ (1, 2]`, its
//! gradient pair, Bregman divergence and Bregman projection onto an ℓ1 ball
//! centered at the origin.

use crate::error::{check_dim, invalid, Error, Result};
use crate::vecspace::{max_abs, norm_slice, DenseVector, Exponent};

/// Iteration cap for every bisection in the projection.
pub const PROJECTION_MAX_ITERS: usize = 200;
/// Relative tolerance on `‖w‖₁ = B₁` for a projection that lands on the sphere.
pub const PROJECTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorMap {
    p: f64,
    q: f64,
    center: DenseVector,
}

/// `{w : ‖w‖₁ ≤ radius}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Ball {
    radius: f64,
}

impl L1Ball {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid(format!("l1 ball radius must be positive and finite, got {radius}")));
        }
        Ok(L1Ball { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, w: &DenseVector) -> bool {
        w.l1() <= self.radius * (1.0 + PROJECTION_TOL)
    }
}

/// `|x|^e · sgn(x)` with `sgn(0) = 0`.
#[inline]
pub fn signed_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(e).copysign(x)
    }
}

/// `n · (|x|/n)^e · sgn(x)`, i.e. `n^{1−e}|x|^e sgn(x)` without overflow.
#[inline]
fn scaled_signed_pow(x: f64, n: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (n * (x.abs() / n).powf(e)).copysign(x)
    }
}

impl MirrorMap {
    /// `p ∈ (1, 2]`; the dual exponent is `q = p/(p − 1) ≥ 2`.
    pub fn new(p: f64, center: DenseVector) -> Result<Self> {
        if !(p > 1.0 && p <= 2.0) {
            return Err(invalid(format!("mirror map exponent must lie in (1, 2], got {p}")));
        }
        let q = if p == 2.0 { 2.0 } else { p / (p - 1.0) };
        Ok(MirrorMap { p, q, center })
    }

    pub fn centered_at_origin(p: f64, d: usize) -> Result<Self> {
        Self::new(p, DenseVector::zeros(d))
    }

    /// Built from the gradient exponent `q ∈ [2, ∞)`.
    pub fn from_dual_exponent(q: f64, center: DenseVector) -> Result<Self> {
        if !(q >= 2.0) || !q.is_finite() {
            return Err(invalid(format!("dual exponent must lie in [2, inf), got {q}")));
        }
        let p = if q == 2.0 { 2.0 } else { q / (q - 1.0) };
        let mut map = Self::new(p, center)?;
        map.q = q;
        Ok(map)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn center(&self) -> &DenseVector {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Same exponent, new center.
    pub fn recentered(&self, center: DenseVector) -> Self {
        MirrorMap { p: self.p, q: self.q, center }
    }

    fn is_euclidean(&self) -> bool {
        self.p == 2.0
    }

    /// `R(w) = ½‖w − w̄‖_p²`.
    pub fn value(&self, w: &DenseVector) -> Result<f64> {
        check_dim(self.dim(), w.dim())?;
        let theta = w.sub(&self.center)?;
        let n = theta.norm(Exponent::Finite(self.p));
        Ok(0.5 * n * n)
    }

    /// `∇R(w)_i = ‖θ‖_p^{2−p} |θ_i|^{p−1} sgn(θ_i)` with `θ = w − w̄`.
    pub fn grad_reg(&self, w: &DenseVector) -> Result<DenseVector> {
        check_dim(self.dim(), w.dim())?;
        let theta = w.sub(&self.center)?;
        if self.is_euclidean() {
            return Ok(theta);
        }
        Ok(self.grad_uncentered(&theta))
    }

    fn grad_uncentered(&self, theta: &DenseVector) -> DenseVector {
        let n = theta.norm(Exponent::Finite(self.p));
        if n == 0.0 {
            return DenseVector::zeros(theta.dim());
        }
        let e = self.p - 1.0;
        DenseVector::from_vec_unchecked(
            theta.as_slice().iter().map(|&x| scaled_signed_pow(x, n, e)).collect(),
        )
    }

    /// Inverse of [`grad_reg`](Self::grad_reg):
    /// `w̄ + ‖y‖_q^{2−q} (|y_i|^{q−1} sgn(y_i))_i`.
    pub fn inv_grad_reg(&self, y: &DenseVector) -> Result<DenseVector> {
        check_dim(self.dim(), y.dim())?;
        if self.is_euclidean() {
            return y.add(&self.center);
        }
        let mut out = inv_uncentered(y.as_slice(), self.q);
        for (o, c) in out.iter_mut().zip(self.center.as_slice()) {
            *o += c;
        }
        Ok(DenseVector::from_vec_unchecked(out))
    }

    /// `D_R(a‖b) = R(a) − R(b) − ⟨∇R(b), a − b⟩`, clamped at zero against
    /// rounding.
    pub fn bregman(&self, a: &DenseVector, b: &DenseVector) -> Result<f64> {
        check_dim(self.dim(), a.dim())?;
        check_dim(self.dim(), b.dim())?;
        let diff = a.sub(b)?;
        if self.is_euclidean() {
            let n = diff.l2();
            return Ok(0.5 * n * n);
        }
        let gb = self.grad_reg(b)?;
        let d = self.value(a)? - self.value(b)? - gb.dot_unchecked(&diff);
        Ok(d.max(0.0))
    }

    /// `argmin_{‖w‖₁ ≤ B₁} D_R(w ‖ ∇R⁻¹(y))` for a dual point `y`.
    pub fn bregman_project(&self, ball: &L1Ball, y: &DenseVector) -> Result<DenseVector> {
        check_dim(self.dim(), y.dim())?;
        let free = self.inv_grad_reg(y)?;
        if free.l1() <= ball.radius {
            return Ok(free);
        }
        let w = if self.is_euclidean() {
            euclidean_l1_projection(free.as_slice(), ball.radius)
        } else if self.center.is_zero() {
            project_origin_centered(y.as_slice(), self.q, ball.radius)?
        } else {
            self.project_shifted(y.as_slice(), ball.radius)?
        };
        let l1: f64 = w.iter().map(|x| x.abs()).sum();
        if (l1 - ball.radius).abs() > PROJECTION_TOL * ball.radius {
            return Err(Error::NumericalFailure {
                routine: "bregman_project",
                detail: format!(
                    "l1 norm {l1:.17e} misses radius {:.17e} after {PROJECTION_MAX_ITERS} bisection steps",
                    ball.radius
                ),
            });
        }
        Ok(DenseVector::from_vec_unchecked(w))
    }

    /// `project(∇R(w) − η g)`.
    pub fn md_step(
        &self,
        ball: &L1Ball,
        w: &DenseVector,
        g: &DenseVector,
        eta: f64,
    ) -> Result<DenseVector> {
        if !(eta > 0.0) {
            return Err(invalid(format!("step size must be positive, got {eta}")));
        }
        check_dim(self.dim(), g.dim())?;
        let mut y = self.grad_reg(w)?;
        y.axpy(-eta, g)?;
        self.bregman_project(ball, &y)
    }

    /// Projection when `w̄ ≠ 0` and `p < 2`. For a multiplier `λ` the optimal
    /// dual point is `u_i = clamp(−c^{2−p}|w̄_i|^{p−1}sgn(w̄_i), y_i − λ, y_i + λ)`
    /// where `c = ‖u‖_q` is a fixed point; the inner bisection solves for `c`,
    /// the outer one for `λ`.
    fn project_shifted(&self, y: &[f64], radius: f64) -> Result<Vec<f64>> {
        let center = self.center.as_slice();
        let (p, q) = (self.p, self.q);
        let zero_dual = self.grad_reg(&DenseVector::zeros(self.dim()))?;
        let lam_hi = y
            .iter()
            .zip(zero_dual.as_slice())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));

        let dual_at = |lam: f64| -> Vec<f64> {
            let u_of = |c: f64| -> Vec<f64> {
                let cp = c.powf(2.0 - p);
                y.iter()
                    .zip(center)
                    .map(|(&yi, &wi)| (-cp * signed_pow(wi, p - 1.0)).clamp(yi - lam, yi + lam))
                    .collect()
            };
            let bound: Vec<f64> = y.iter().map(|yi| yi.abs() + lam).collect();
            let (mut lo, mut hi) = (0.0, norm_slice(&bound, Exponent::Finite(q)));
            for _ in 0..PROJECTION_MAX_ITERS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if norm_slice(&u_of(mid), Exponent::Finite(q)) > mid {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            u_of(0.5 * (lo + hi))
        };
        let primal = |u: &[f64]| -> Vec<f64> {
            let mut w = inv_uncentered(u, q);
            for (o, c) in w.iter_mut().zip(center) {
                *o += c;
            }
            w
        };
        let l1 = |w: &[f64]| w.iter().map(|x| x.abs()).sum::<f64>();

        let (mut lo, mut hi) = (0.0, lam_hi);
        for _ in 0..PROJECTION_MAX_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if l1(&primal(&dual_at(mid))) > radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(pick_closer(primal(&dual_at(lo)), primal(&dual_at(hi)), radius))
    }
}

/// `‖y‖_q^{2−q}(|y_i|^{q−1}sgn(y_i))_i`, the uncentered inverse gradient.
fn inv_uncentered(y: &[f64], q: f64) -> Vec<f64> {
    let c = norm_slice(y, Exponent::Finite(q));
    if c == 0.0 {
        return vec![0.0; y.len()];
    }
    let e = q - 1.0;
    y.iter().map(|&x| scaled_signed_pow(x, c, e)).collect()
}

fn pick_closer(a: Vec<f64>, b: Vec<f64>, radius: f64) -> Vec<f64> {
    let ea = (a.iter().map(|x| x.abs()).sum::<f64>() - radius).abs();
    let eb = (b.iter().map(|x| x.abs()).sum::<f64>() - radius).abs();
    if ea <= eb {
        a
    } else {
        b
    }
}

/// Euclidean projection of `v` onto `{‖w‖₁ ≤ radius}` for `‖v‖₁ > radius`,
/// by Michelot's active-set iteration: the threshold only grows, so the
/// active set only shrinks and the loop ends after at most `d` passes.
pub fn euclidean_l1_projection(v: &[f64], radius: f64) -> Vec<f64> {
    let mut active: Vec<f64> = v.iter().map(|x| x.abs()).filter(|&a| a > 0.0).collect();
    let mut tau = 0.0;
    loop {
        let sum: f64 = active.iter().sum();
        tau = ((sum - radius) / active.len() as f64).max(tau);
        let before = active.len();
        active.retain(|&a| a > tau);
        if active.len() == before {
            break;
        }
    }
    v.iter().map(|&x| (x.abs() - tau).max(0.0).copysign(x)).collect()
}

/// Origin-centered projection for `p < 2`: `w = ∇R⁻¹(soft(y, λ))` where
/// `‖w‖₁ = c^{2−q} Σ (|y_i| − λ)_+^{q−1}` and `c = ‖(|y| − λ)_+‖_q` only
/// depend on the magnitudes above `λ`.
fn project_origin_centered(y: &[f64], q: f64, radius: f64) -> Result<Vec<f64>> {
    let mut mags: Vec<f64> = y.iter().map(|x| x.abs()).filter(|&a| a > 0.0).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let l1_at = |lam: f64| -> f64 {
        let top = mags.iter().take_while(|&&a| a > lam).map(|a| a - lam);
        let excess: Vec<f64> = top.collect();
        let c = norm_slice(&excess, Exponent::Finite(q));
        if c == 0.0 {
            return 0.0;
        }
        excess.iter().map(|&e| c * (e / c).powf(q - 1.0)).sum()
    };
    let (mut lo, mut hi) = (0.0, max_abs(y));
    for _ in 0..PROJECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if l1_at(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let at = |lam: f64| -> Vec<f64> {
        let soft: Vec<f64> = y.iter().map(|&x| (x.abs() - lam).max(0.0).copysign(x)).collect();
        inv_uncentered(&soft, q)
    };
    Ok(pick_closer(at(lo), at(hi), radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::new(x.to_vec()).unwrap()
    }

    fn random_vec(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> DenseVector {
        v(&(0..d).map(|_| rng.gen_range(-scale..scale)).collect::<Vec<_>>())
    }

    /// Sort-based ℓ1-ball projection: largest ρ with
    /// `u_ρ > (Σ_{j≤ρ} u_j − B)/ρ` over sorted magnitudes.
    fn sort_projection_oracle(v: &[f64], b: f64) -> Vec<f64> {
        if v.iter().map(|x| x.abs()).sum::<f64>() <= b {
            return v.to_vec();
        }
        let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        u.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut cum = 0.0;
        let mut theta = 0.0;
        for (j, &uj) in u.iter().enumerate() {
            cum += uj;
            let t = (cum - b) / (j + 1) as f64;
            if uj > t {
                theta = t;
            }
        }
        v.iter().map(|&x| (x.abs() - theta).max(0.0) * x.signum()).collect()
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(MirrorMap::centered_at_origin(1.0, 3).is_err());
        assert!(MirrorMap::centered_at_origin(2.5, 3).is_err());
        assert!(MirrorMap::from_dual_exponent(1.5, DenseVector::zeros(2)).is_err());
        assert!(MirrorMap::from_dual_exponent(f64::INFINITY, DenseVector::zeros(2)).is_err());
        let m = MirrorMap::from_dual_exponent(3.0, DenseVector::zeros(2)).unwrap();
        assert!((m.p() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn euclidean_gradient_is_identity() {
        let m = MirrorMap::centered_at_origin(2.0, 3).unwrap();
        let w = v(&[0.3, -1.0, 2.0]);
        assert_eq!(m.grad_reg(&w).unwrap(), w);
        assert_eq!(m.inv_grad_reg(&w).unwrap(), w);
    }

    #[test]
    fn unit_offset_maps_to_unit_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [1.1, 1.5, 2.0] {
            let c = random_vec(4, 1.0, &mut rng);
            let m = MirrorMap::new(p, c.clone()).unwrap();
            let e1 = DenseVector::basis(4, 0, 1.0);
            let g = m.grad_reg(&c.add(&e1).unwrap()).unwrap();
            assert!(g.sub(&e1).unwrap().linf() < 1e-15);
            let back = m.inv_grad_reg(&e1).unwrap();
            assert!(back.sub(&c.add(&e1).unwrap()).unwrap().linf() < 1e-15);
            assert!(m.grad_reg(&c).unwrap().is_zero());
            assert_eq!(m.inv_grad_reg(&DenseVector::zeros(4)).unwrap(), c);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = MirrorMap::centered_at_origin(1.5, 2).unwrap();
        let w = v(&[1.0, -2.0]);
        let g = m.grad_reg(&w).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut plus = w.clone().into_vec();
            let mut minus = w.clone().into_vec();
            plus[i] += h;
            minus[i] -= h;
            let fd = (m.value(&v(&plus)).unwrap() - m.value(&v(&minus)).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-4, "coord {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = MirrorMap::centered_at_origin(1.5, 20).unwrap();
        assert!((m.q() - 3.0).abs() < 1e-15);
        for _ in 0..100 {
            let y = random_vec(20, 3.0, &mut rng);
            let back = m.grad_reg(&m.inv_grad_reg(&y).unwrap()).unwrap();
            let err = back.sub(&y).unwrap().linf();
            assert!(err <= 1e-8 * y.linf());
        }
    }

    #[test]
    fn bregman_basic_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = MirrorMap::centered_at_origin(2.0, 5).unwrap();
        let l = MirrorMap::centered_at_origin(1.5, 5).unwrap();
        for _ in 0..50 {
            let a = random_vec(5, 2.0, &mut rng);
            let b = random_vec(5, 2.0, &mut rng);
            let half_sq = 0.5 * a.sub(&b).unwrap().l2().powi(2);
            assert!((e.bregman(&a, &b).unwrap() - half_sq).abs() < 1e-12);
            assert_eq!(l.bregman(&a, &a).unwrap(), 0.0);
            let lower = 0.25 * a.sub(&b).unwrap().norm(Exponent::Finite(1.5)).powi(2);
            assert!(l.bregman(&a, &b).unwrap() >= lower - 1e-12);
        }
    }

    #[test]
    fn inside_ball_is_unchanged() {
        let m = MirrorMap::centered_at_origin(1.5, 3).unwrap();
        let ball = L1Ball::new(10.0).unwrap();
        let y = v(&[0.1, -0.2, 0.3]);
        assert_eq!(m.bregman_project(&ball, &y).unwrap(), m.inv_grad_reg(&y).unwrap());
    }

    #[test]
    fn euclidean_projection_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..200 {
            let d = 1 + trial % 40;
            let y = random_vec(d, 3.0, &mut rng);
            let b = rng.gen_range(0.1..2.0);
            let m = MirrorMap::centered_at_origin(2.0, d).unwrap();
            let got = m.bregman_project(&L1Ball::new(b).unwrap(), &y).unwrap();
            let want = sort_projection_oracle(y.as_slice(), b);
            for (g, w) in got.as_slice().iter().zip(&want) {
                assert!((g - w).abs() < 1e-8);
            }
        }
    }

    /// Minimum of `D_R(·‖θ)` over a fine grid on the 2-dimensional faces of
    /// the unit ℓ1 sphere in ℝ³ (10⁶ points in total).
    fn grid_minimum(m: &MirrorMap, target: &DenseVector) -> f64 {
        let per_face = 1_000_000 / 8;
        let k = ((2 * per_face) as f64).sqrt() as usize;
        let mut best = f64::INFINITY;
        for signs in 0..8u32 {
            let s: Vec<f64> = (0..3).map(|i| if signs >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
            for a in 0..=k {
                for b in 0..=(k - a) {
                    let (x, y) = (a as f64 / k as f64, b as f64 / k as f64);
                    let w = v(&[s[0] * x, s[1] * y, s[2] * (1.0 - x - y)]);
                    best = best.min(m.bregman(&w, target).unwrap());
                }
            }
        }
        best
    }

    #[test]
    fn non_euclidean_projection_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ball = L1Ball::new(1.0).unwrap();
        for center_scale in [0.0, 0.3] {
            for _ in 0..2 {
                let center = if center_scale == 0.0 {
                    DenseVector::zeros(3)
                } else {
                    random_vec(3, center_scale, &mut rng)
                };
                let m = MirrorMap::new(1.5, center).unwrap();
                let y = random_vec(3, 3.0, &mut rng);
                let target = m.inv_grad_reg(&y).unwrap();
                if target.l1() <= 1.0 {
                    continue;
                }
                let w = m.bregman_project(&ball, &y).unwrap();
                assert!((w.l1() - 1.0).abs() <= 1e-9);
                let got = m.bregman(&w, &target).unwrap();
                let grid = grid_minimum(&m, &target);
                assert!(got <= grid + 1e-3, "{got} vs grid {grid}");
                assert!(got >= grid - 1e-3, "{got} vs grid {grid}");
            }
        }
    }

    #[test]
    fn md_step_basics() {
        let m = MirrorMap::centered_at_origin(2.0, 3).unwrap();
        let ball = L1Ball::new(5.0).unwrap();
        let w = v(&[0.5, -0.5, 1.0]);
        assert_eq!(m.md_step(&ball, &w, &DenseVector::zeros(3), 0.1).unwrap(), w);
        let g = v(&[1.0, 2.0, -1.0]);
        let got = m.md_step(&ball, &w, &g, 0.1).unwrap();
        assert!(got.sub(&v(&[0.4, -0.7, 1.1])).unwrap().linf() < 1e-15);
        assert!(m.md_step(&ball, &w, &g, 0.0).is_err());
    }

    #[test]
    fn md_step_decreases_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = MirrorMap::centered_at_origin(1.5, 8).unwrap();
        let ball = L1Ball::new(1.0).unwrap();
        let target = random_vec(8, 1.0, &mut rng);
        let loss = |w: &DenseVector| 0.5 * w.sub(&target).unwrap().l2().powi(2);
        let w = random_vec(8, 0.05, &mut rng);
        let g = w.sub(&target).unwrap();
        let next = m.md_step(&ball, &w, &g, 1e-3).unwrap();
        assert!(loss(&next) < loss(&w));
    }
}
