use crate::error::{invalid, Error, Result};
use crate::sparsify::WireMode;

/// How the final machine turns iterates into `ŵ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputRule {
    /// `Q^{s₀}(w_t^i)` for `(i, t)` drawn uniformly.
    RandomIterate,
    /// Every machine sparsifies the average of its iterates; the final
    /// machine averages them.
    AveragedHighProbability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub d: usize,
    /// Total sample count `N = m·n`.
    pub n_total: usize,
    pub machines: usize,
    /// Gradient norm exponent, `q ≥ 2`.
    pub q: f64,
    pub b1: f64,
    /// Bound on `‖∇ℓ‖_q`.
    pub r_q: f64,
    pub eta: f64,
    /// Handoff sparsity; `None` ships iterates densely.
    pub s: Option<u64>,
    /// Output sparsity; `None` returns the iterate itself.
    pub s0: Option<u64>,
    pub output: OutputRule,
    pub wire: WireMode,
}

impl ProtocolConfig {
    /// Examples per machine.
    pub fn n(&self) -> usize {
        self.n_total / self.machines.max(1)
    }

    /// Primal exponent `p = q/(q − 1)`.
    pub fn p(&self) -> f64 {
        if self.q == 2.0 {
            2.0
        } else {
            self.q / (self.q - 1.0)
        }
    }

    /// Strong-convexity constant `C_q = q − 1`.
    pub fn c_q(&self) -> f64 {
        self.q - 1.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if self.machines == 0 {
            return bad("m must be positive".into());
        }
        if self.machines > self.n_total {
            return bad(format!("m = {} exceeds N = {}, leaving machines without examples", self.machines, self.n_total));
        }
        if self.n_total % self.machines != 0 {
            return bad(format!("N = {} is not a multiple of m = {}", self.n_total, self.machines));
        }
        if !(self.q >= 2.0) || !self.q.is_finite() {
            return bad(format!("q must lie in [2, inf), got {}", self.q));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.b1 > 0.0) || !(self.r_q > 0.0) {
            return bad("B1 and R_q must be positive".into());
        }
        if self.s == Some(0) || self.s0 == Some(0) {
            return bad("sparsity levels must be at least 1".into());
        }
        Ok(())
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn ceil_count(x: f64) -> u64 {
    (x.ceil() as u64).max(1)
}

/// Constants hidden by the Ω(·) in the sparsity levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityConstants {
    pub kappa_s: f64,
    pub kappa_s0: f64,
}

impl Default for SparsityConstants {
    fn default() -> Self {
        SparsityConstants { kappa_s: 1.0, kappa_s0: 1.0 }
    }
}

/// Lipschitz-loss parameters: `η = (B₁/R_q)√(1/(C_q N))`,
/// `s = ⌈κ_s m^{2(q−1)}⌉`, `s₀ = ⌈κ_{s₀} N^{q/2}⌉`, or `⌈κ_{s₀} N⌉` for
/// linear models with a 1-Lipschitz link.
pub fn default_params_lipschitz(
    d: usize,
    b1: f64,
    r_q: f64,
    q: f64,
    n_total: usize,
    machines: usize,
    kappa: SparsityConstants,
    linear_model: bool,
) -> Result<ProtocolConfig> {
    if !(q >= 2.0) || !q.is_finite() {
        return Err(invalid(format!("q must lie in [2, inf), got {q}")));
    }
    check_positive("B1", b1)?;
    check_positive("R_q", r_q)?;
    check_positive("kappa_s", kappa.kappa_s)?;
    check_positive("kappa_s0", kappa.kappa_s0)?;
    let c_q = q - 1.0;
    let n = n_total as f64;
    let s0 = if linear_model { kappa.kappa_s0 * n } else { kappa.kappa_s0 * n.powf(q / 2.0) };
    let cfg = ProtocolConfig {
        d,
        n_total,
        machines,
        q,
        b1,
        r_q,
        eta: b1 / r_q * (1.0 / (c_q * n)).sqrt(),
        s: Some(ceil_count(kappa.kappa_s * (machines as f64).powf(2.0 * (q - 1.0)))),
        s0: Some(ceil_count(s0)),
        output: OutputRule::RandomIterate,
        wire: WireMode::Rank,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Smooth-loss step size and output sparsity:
/// `η = √(B₁²/(C_q β_q L* N)) ∧ 1/(4 C_q β_q)` and
/// `s₀ = ⌈√(β_q B₁² N/(C_q L*))⌉ ∧ ⌈N/C_q⌉`; `L* = 0` selects the second
/// branch of each.
pub fn default_params_smooth(b1: f64, beta_q: f64, q: f64, n_total: usize, l_star: f64) -> Result<(f64, u64)> {
    if !(q >= 2.0) || !q.is_finite() {
        return Err(invalid(format!("q must lie in [2, inf), got {q}")));
    }
    check_positive("B1", b1)?;
    check_positive("beta_q", beta_q)?;
    if !(l_star >= 0.0) {
        return Err(invalid(format!("L* must be nonnegative, got {l_star}")));
    }
    let c_q = q - 1.0;
    let n = n_total as f64;
    let eta_cap = 1.0 / (4.0 * c_q * beta_q);
    let s0_cap = ceil_count(n / c_q);
    if l_star == 0.0 {
        return Ok((eta_cap, s0_cap));
    }
    let eta = (b1 * b1 / (c_q * beta_q * l_star * n)).sqrt().min(eta_cap);
    let s0 = ceil_count((beta_q * b1 * b1 * n / (c_q * l_star)).sqrt()).min(s0_cap);
    Ok((eta, s0))
}

/// Restart schedule: `B_j = 2^{−j/2} B₁` and
/// `N_k = ⌈C_q (4cR_q/(γ_q B_{k−2}))²⌉`, with as many rounds as fit in `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FastRateConfig {
    pub gamma_q: f64,
    pub c: f64,
    pub kappa: SparsityConstants,
}

impl FastRateConfig {
    pub fn new(gamma_q: f64, c: f64) -> Result<Self> {
        check_positive("gamma_q", gamma_q)?;
        check_positive("c", c)?;
        Ok(FastRateConfig { gamma_q, c, kappa: SparsityConstants::default() })
    }

    /// `B_j = 2^{−j/2} B₁` for any integer `j`.
    pub fn radius(&self, b1: f64, j: i64) -> f64 {
        b1 * 2f64.powf(-(j as f64) / 2.0)
    }

    /// `N_k` for round `k ≥ 1`.
    pub fn round_size(&self, k: usize, base: &ProtocolConfig) -> u64 {
        let b = self.radius(base.b1, k as i64 - 2);
        let v = base.c_q() * (4.0 * self.c * base.r_q / (self.gamma_q * b)).powi(2);
        ceil_count(v)
    }

    /// `[N_1, …, N_T]` with `T` maximal subject to `Σ N_k ≤ N`.
    pub fn schedule(&self, base: &ProtocolConfig) -> Vec<u64> {
        let mut out = Vec::new();
        let mut used = 0u64;
        for k in 1.. {
            let nk = self.round_size(k, base);
            if used + nk > base.n_total as u64 {
                break;
            }
            used += nk;
            out.push(nk);
        }
        out
    }
}

/// RSC constant for sparse regression: `γ_q = γ/(4k)`.
pub fn sparse_regression_gamma_q(gamma: f64, k: usize) -> f64 {
    gamma / (4.0 * k as f64)
}
