use rand::Rng;

use super::wire::{BitCost, BitReader, BitString, BitWriter};
use crate::error::{invalid, Error, Result};
use crate::vecspace::{svd, DenseMatrix, SvdResult};

/// `Q^s(W) = (scale/s) Σ_τ u_τ v_τᵀ` with unit factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMessage {
    scale: f64,
    s: u64,
    factors: Vec<(Vec<f64>, Vec<f64>)>,
}

/// A spectral sample together with the decomposition it was drawn from.
/// `counts[k]` is how often component `k` was drawn.
#[derive(Debug, Clone)]
pub struct SpectralSample {
    pub message: SpectralMessage,
    pub svd: SvdResult,
    pub counts: Vec<u64>,
}

impl SpectralSample {
    /// Singular values of the decoded matrix in the basis of `W`:
    /// `σ̂_k = scale · counts[k] / s`.
    pub fn sampled_spectrum(&self) -> Vec<f64> {
        let unit = self.message.scale / self.message.s as f64;
        self.counts.iter().map(|&c| unit * c as f64).collect()
    }
}

impl SpectralMessage {
    pub fn from_parts(scale: f64, s: u64, factors: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(invalid(format!("message scale must be finite and nonnegative, got {scale}")));
        }
        if s == 0 {
            return Err(invalid("sample count must be positive"));
        }
        if scale > 0.0 && factors.len() as u64 != s {
            return Err(invalid(format!("expected {s} factor pairs, got {}", factors.len())));
        }
        if scale == 0.0 && !factors.is_empty() {
            return Err(invalid("zero-scale message must not carry factors"));
        }
        for (u, v) in &factors {
            let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (nu - 1.0).abs() > 1e-8 || (nv - 1.0).abs() > 1e-8 || u.len() != v.len() {
                return Err(invalid("factor vectors must be unit length and equal dimension"));
            }
        }
        Ok(SpectralMessage { scale, s, factors })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn s(&self) -> u64 {
        self.s
    }

    pub fn factors(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.factors
    }

    pub fn decode(&self, d: usize) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(d);
        let unit = self.scale / self.s as f64;
        for (u, v) in &self.factors {
            if u.len() != d {
                return Err(Error::MalformedMessage(format!("factor of length {} for d = {d}", u.len())));
            }
            out.axpy(unit, &DenseMatrix::outer(u, v, 1.0)?)?;
        }
        Ok(out)
    }

    /// `[32-bit s][64-bit scale][s × (u, v) at 64 bits per entry]`.
    pub fn encode(&self, d: usize) -> Result<(BitString, BitCost)> {
        if self.s > u32::MAX as u64 {
            return Err(Error::Unsupported(format!("sample count {} exceeds 32 bits", self.s)));
        }
        let mut w = BitWriter::new();
        w.push_bits(self.s, 32);
        w.push_bits(self.scale.to_bits(), 64);
        for (u, v) in &self.factors {
            if u.len() != d {
                return Err(Error::MalformedMessage(format!("factor of length {} for d = {d}", u.len())));
            }
            for x in u.iter().chain(v) {
                w.push_bits(x.to_bits(), 64);
            }
        }
        let payload = self.factors.len() as u64 * 2 * d as u64 * 64;
        Ok((w.finish(), BitCost::new(96, payload)))
    }

    pub fn decode_bits(bits: &BitString, d: usize) -> Result<Self> {
        let mut r = BitReader::new(bits);
        let s = r.read_bits(32)?;
        let scale = f64::from_bits(r.read_bits(64)?);
        let count = if scale == 0.0 { 0 } else { s };
        let mut factors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let mut read = || -> Result<Vec<f64>> {
                (0..d).map(|_| r.read_bits(64).map(f64::from_bits)).collect()
            };
            let u = read()?;
            let v = read()?;
            factors.push((u, v));
        }
        if r.remaining() != 0 {
            return Err(Error::MalformedMessage(format!("{} trailing bits", r.remaining())));
        }
        Self::from_parts(scale, s, factors).map_err(|e| Error::MalformedMessage(e.to_string()))
    }
}

/// Samples `s` singular triplets with probability `σ_k/‖W‖_{S₁}`.
pub fn spectral_maurey<R: Rng + ?Sized>(w: &DenseMatrix, s: u64, rng: &mut R) -> Result<SpectralMessage> {
    Ok(spectral_maurey_with_basis(w, s, rng)?.message)
}

pub fn spectral_maurey_with_basis<R: Rng + ?Sized>(
    w: &DenseMatrix,
    s: u64,
    rng: &mut R,
) -> Result<SpectralSample> {
    let dec = svd(w)?;
    spectral_maurey_from_svd(dec, s, rng)
}

/// As [`spectral_maurey_with_basis`] for a matrix already decomposed.
pub fn spectral_maurey_from_svd<R: Rng + ?Sized>(
    dec: SvdResult,
    s: u64,
    rng: &mut R,
) -> Result<SpectralSample> {
    if s == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let sigma = &dec.singular_values;
    let total: f64 = sigma.iter().sum();
    let mut counts = vec![0u64; sigma.len()];
    if total == 0.0 {
        let message = SpectralMessage::from_parts(0.0, s, Vec::new())?;
        return Ok(SpectralSample { message, svd: dec, counts });
    }
    let mut cumulative = Vec::with_capacity(sigma.len());
    let mut acc = 0.0;
    for &x in sigma {
        acc += x;
        cumulative.push(acc);
    }
    let last_positive = sigma.iter().rposition(|&x| x > 0.0).expect("positive total");
    for _ in 0..s {
        let u = rng.gen::<f64>() * total;
        let k = cumulative.partition_point(|&c| c <= u).min(last_positive);
        counts[k] += 1;
    }
    let mut factors = Vec::with_capacity(s as usize);
    for (k, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            factors.push((dec.left(k), dec.right(k)));
        }
    }
    let message = SpectralMessage::from_parts(total, s, factors)?;
    Ok(SpectralSample { message, svd: dec, counts })
}
