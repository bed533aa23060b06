//! Combinatorial number system for multisets.
//!
//! A multiset `c₁ ≤ c₂ ≤ … ≤ c_s` over the alphabet `[0, n)` is mapped to the
//! strictly increasing sequence `e_j = c_j + j − 1` in `[0, n + s − 1)` and
//! ranked as `Σ_j C(e_j, j)`. Ranks fill `[0, C(n + s − 1, s))` exactly.
//! Consecutive binomials are reached by one small multiply and one small
//! divide each, so ranking and unranking cost `O(s + n)` bignum steps.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// `C(n, k)` by the multiplicative formula; each partial product is itself
/// a binomial, so every division is exact.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 1..=k {
        acc *= n - k + i;
        acc /= i;
    }
    acc
}

/// Number of size-`s` multisets over `n` symbols: `C(n + s − 1, s)`.
pub fn multiset_count(n: u64, s: u64) -> BigUint {
    if n == 0 {
        return if s == 0 { BigUint::one() } else { BigUint::zero() };
    }
    binomial(n + s - 1, s)
}

/// `⌈log₂ C(n + s − 1, s)⌉`, the bit width of a rank.
pub fn rank_width(n: u64, s: u64) -> u64 {
    let count = multiset_count(n, s);
    if count.is_zero() {
        return 0;
    }
    (count - 1u32).bits()
}

/// Rank of a sorted multiset given as `(symbol, multiplicity)` runs with
/// strictly increasing symbols.
pub fn rank_multiset(runs: &[(u64, u64)]) -> BigUint {
    let mut rank = BigUint::zero();
    // `term = C(e, j)` for the current position once the first nonzero
    // symbol is reached.
    let mut state: Option<(u64, u64, BigUint)> = None;
    let mut j = 0u64;
    for &(symbol, count) in runs {
        for _ in 0..count {
            j += 1;
            let e = symbol + j - 1;
            if e < j {
                continue;
            }
            let term = match state.take() {
                None => binomial(e, j),
                Some((pe, pj, mut t)) => {
                    // C(pe, pj) → C(pe + 1, pj + 1) → C(e, j).
                    debug_assert_eq!(pj + 1, j);
                    t *= pe + 1;
                    t /= j;
                    for x in (pe + 1)..e {
                        t *= x + 1;
                        t /= x + 1 - j;
                    }
                    t
                }
            };
            rank += &term;
            state = Some((e, j, term));
        }
    }
    rank
}

/// Inverse of [`rank_multiset`] for `s` symbols drawn from `[0, n)`.
/// Returns the `(symbol, multiplicity)` runs.
pub fn unrank_multiset(rank: &BigUint, n: u64, s: u64) -> Result<Vec<(u64, u64)>> {
    if s == 0 {
        return if rank.is_zero() {
            Ok(Vec::new())
        } else {
            Err(Error::MalformedMessage("nonzero rank for an empty multiset".into()))
        };
    }
    if n == 0 {
        return Err(Error::MalformedMessage("empty alphabet".into()));
    }
    let total = multiset_count(n, s);
    if rank >= &total {
        return Err(Error::MalformedMessage(format!(
            "rank exceeds the number of multisets (width {} bits)",
            total.bits()
        )));
    }
    let mut r = rank.clone();
    let mut es = vec![0u64; s as usize];
    let top = n + s - 1;
    // term = C(e, j) with e = top − 1 and j = s, i.e. total·(top − s)/top.
    let mut e = top - 1;
    let mut term = total * (top - s) / top;
    let mut j = s;
    loop {
        if r.is_zero() {
            for jj in 1..=j {
                es[(jj - 1) as usize] = jj - 1;
            }
            break;
        }
        while term > r {
            // C(e, j) → C(e − 1, j); r ≥ 1 = C(j, j) keeps e ≥ j.
            term *= e - j;
            term /= e;
            e -= 1;
        }
        es[(j - 1) as usize] = e;
        r -= &term;
        if j == 1 {
            break;
        }
        // C(e, j) → C(e − 1, j − 1).
        term *= j;
        term /= e;
        e -= 1;
        j -= 1;
    }
    let mut runs: Vec<(u64, u64)> = Vec::new();
    for (idx, &ej) in es.iter().enumerate() {
        let symbol = ej - idx as u64;
        match runs.last_mut() {
            Some((sym, cnt)) if *sym == symbol => *cnt += 1,
            _ => runs.push((symbol, 1)),
        }
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// All size-`s` multisets over `[0, n)` in lexicographic order of their
    /// sorted sequences.
    fn all_multisets(n: u64, s: u64) -> Vec<Vec<u64>> {
        if s == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for rest in all_multisets(n, s - 1) {
            let lo = rest.last().copied().unwrap_or(0);
            for c in lo..n {
                let mut v = rest.clone();
                v.push(c);
                out.push(v);
            }
        }
        out
    }

    fn runs_of(seq: &[u64]) -> Vec<(u64, u64)> {
        let mut runs: Vec<(u64, u64)> = Vec::new();
        for &c in seq {
            match runs.last_mut() {
                Some((sym, cnt)) if *sym == c => *cnt += 1,
                _ => runs.push((c, 1)),
            }
        }
        runs
    }

    #[test]
    fn small_binomials() {
        assert_eq!(binomial(4, 1), BigUint::from(4u32));
        assert_eq!(binomial(9, 2), BigUint::from(36u32));
        assert_eq!(binomial(3, 5), BigUint::zero());
        assert_eq!(rank_width(4, 1), 2);
        assert_eq!(rank_width(8, 2), 6);
    }

    #[test]
    fn ranks_are_a_bijection_on_small_alphabets() {
        for n in 1..6u64 {
            for s in 1..5u64 {
                let all = all_multisets(n, s);
                assert_eq!(BigUint::from(all.len()), multiset_count(n, s));
                let mut seen = vec![false; all.len()];
                for m in &all {
                    let r = rank_multiset(&runs_of(m));
                    let idx: usize = r.clone().try_into().unwrap();
                    assert!(!seen[idx]);
                    seen[idx] = true;
                    assert_eq!(unrank_multiset(&r, n, s).unwrap(), runs_of(m));
                }
            }
        }
    }

    #[test]
    fn out_of_range_rank_rejected() {
        let total = multiset_count(8, 3);
        assert!(matches!(unrank_multiset(&total, 8, 3), Err(Error::MalformedMessage(_))));
    }

    proptest! {
        #[test]
        fn roundtrip_large(n in 2u64..20_000, seq in proptest::collection::vec(any::<u64>(), 1..300)) {
            let mut seq: Vec<u64> = seq.into_iter().map(|c| c % n).collect();
            seq.sort_unstable();
            let runs = runs_of(&seq);
            let r = rank_multiset(&runs);
            prop_assert!(r < multiset_count(n, seq.len() as u64));
            prop_assert_eq!(unrank_multiset(&r, n, seq.len() as u64).unwrap(), runs);
        }
    }
}
