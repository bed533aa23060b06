use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::vecspace::DenseVector;

/// A signed coordinate atom `±e_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub index: usize,
    pub negative: bool,
}

impl Atom {
    /// Position in the signed alphabet: `2·index` for `+`, `2·index + 1` for `−`.
    pub fn code(self) -> u64 {
        2 * self.index as u64 + self.negative as u64
    }

    pub fn from_code(code: u64) -> Self {
        Atom { index: (code / 2) as usize, negative: code % 2 == 1 }
    }

    pub fn sign(self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }
}

/// `Q^s(w) = (scale/s) Σ_τ sign_τ e_{index_τ}` as a scale and a multiset of
/// `s` atoms, stored as runs sorted by [`Atom::code`].
///
/// A zero scale carries no atoms and decodes to the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MaureyMessage {
    scale: f64,
    s: u64,
    atoms: Vec<(Atom, u64)>,
}

impl MaureyMessage {
    /// Validates and canonicalizes: runs are merged and sorted, counts must
    /// sum to `s` unless `scale == 0`.
    pub fn from_parts(scale: f64, s: u64, atoms: Vec<(Atom, u64)>) -> Result<Self> {
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(invalid(format!("message scale must be finite and nonnegative, got {scale}")));
        }
        if s == 0 {
            return Err(invalid("sample count must be positive"));
        }
        if scale == 0.0 {
            if atoms.iter().any(|&(_, c)| c > 0) {
                return Err(invalid("zero-scale message must not carry atoms"));
            }
            return Ok(MaureyMessage { scale, s, atoms: Vec::new() });
        }
        let mut atoms: Vec<(Atom, u64)> = atoms.into_iter().filter(|&(_, c)| c > 0).collect();
        atoms.sort_by_key(|&(a, _)| a.code());
        let mut merged: Vec<(Atom, u64)> = Vec::with_capacity(atoms.len());
        for (a, c) in atoms {
            match merged.last_mut() {
                Some((b, n)) if *b == a => *n += c,
                _ => merged.push((a, c)),
            }
        }
        let total: u64 = merged.iter().map(|&(_, c)| c).sum();
        if total != s {
            return Err(invalid(format!("atom multiplicities sum to {total}, expected s = {s}")));
        }
        Ok(MaureyMessage { scale, s, atoms: merged })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn s(&self) -> u64 {
        self.s
    }

    /// Runs `(atom, multiplicity)` in code order.
    pub fn atoms(&self) -> &[(Atom, u64)] {
        &self.atoms
    }

    /// Atoms with repetition, in code order.
    pub fn atoms_expanded(&self) -> impl Iterator<Item = Atom> + '_ {
        self.atoms.iter().flat_map(|&(a, c)| std::iter::repeat(a).take(c as usize))
    }

    /// Number of distinct atoms.
    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.atoms.iter().map(|(a, _)| a.index).max()
    }

    /// `(scale/s) Σ sign·e_index` in ℝ^d.
    pub fn decode(&self, d: usize) -> Result<DenseVector> {
        if let Some(i) = self.max_index() {
            if i >= d {
                return Err(Error::MalformedMessage(format!("atom index {i} out of range for d = {d}")));
            }
        }
        let mut out = vec![0.0; d];
        let unit = self.scale / self.s as f64;
        for &(a, c) in &self.atoms {
            out[a.index] += a.sign() * unit * c as f64;
        }
        DenseVector::new(out)
    }
}

/// Draws `s` i.i.d. atoms with `P(i) = |w_i|/‖w‖₁` and sign `sgn(w_i)`, by
/// inverse-CDF lookup in the cumulative `|w|` profile.
pub fn maurey<R: Rng + ?Sized>(w: &DenseVector, s: u64, rng: &mut R) -> Result<MaureyMessage> {
    if s == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let support: Vec<usize> = (0..w.dim()).filter(|&i| w[i] != 0.0).collect();
    if support.is_empty() {
        return MaureyMessage::from_parts(0.0, s, Vec::new());
    }
    let mut cumulative = Vec::with_capacity(support.len());
    let mut acc = 0.0;
    for &i in &support {
        acc += w[i].abs();
        cumulative.push(acc);
    }
    let total = acc;
    let mut counts = vec![0u64; support.len()];
    if support.len() == 1 {
        counts[0] = s;
    } else {
        for _ in 0..s {
            let u = rng.gen::<f64>() * total;
            let k = cumulative.partition_point(|&c| c <= u).min(support.len() - 1);
            counts[k] += 1;
        }
    }
    let atoms = support
        .iter()
        .zip(counts)
        .filter(|&(_, c)| c > 0)
        .map(|(&i, c)| (Atom { index: i, negative: w[i] < 0.0 }, c))
        .collect();
    MaureyMessage::from_parts(w.l1(), s, atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_sparse_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = DenseVector::basis(6, 3, 5.0);
        for s in [1, 7, 100] {
            let m = maurey(&w, s, &mut rng).unwrap();
            assert_eq!(m.atoms(), &[(Atom { index: 3, negative: false }, s)]);
            assert_eq!(m.decode(6).unwrap(), w);
        }
    }

    #[test]
    fn zero_vector_decodes_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = maurey(&DenseVector::zeros(4), 10, &mut rng).unwrap();
        assert_eq!(m.scale(), 0.0);
        assert_eq!(m.support_size(), 0);
        assert!(m.decode(4).unwrap().is_zero());
    }

    #[test]
    fn decode_small_cases() {
        let plus0 = Atom { index: 0, negative: false };
        let m = MaureyMessage::from_parts(1.0, 2, vec![(plus0, 1), (plus0, 1)]).unwrap();
        assert_eq!(m.decode(3).unwrap(), DenseVector::basis(3, 0, 1.0));
        let far = MaureyMessage::from_parts(1.0, 1, vec![(Atom { index: 5, negative: true }, 1)]).unwrap();
        assert!(matches!(far.decode(5), Err(Error::MalformedMessage(_))));
        assert!(MaureyMessage::from_parts(1.0, 3, vec![(plus0, 2)]).is_err());
    }

    #[test]
    fn sign_consistent_messages_preserve_l1() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = DenseVector::new(vec![0.3, -1.2, 0.0, 2.0, -0.1]).unwrap();
        for s in [1, 5, 64] {
            let m = maurey(&w, s, &mut rng).unwrap();
            let q = m.decode(5).unwrap();
            assert!((q.l1() - w.l1()).abs() < 1e-12);
            assert!(q.nnz() as u64 <= s);
            for i in 0..5 {
                assert!(q[i] * w[i] >= 0.0);
            }
        }
    }
}
