//! Bit-exact serialization, MSB first:
//! `[1 mode bit][32-bit s][64-bit IEEE-754 scale][payload]`.

use num_bigint::BigUint;

use super::maurey::{Atom, MaureyMessage};
use super::rank::{rank_multiset, rank_width, unrank_multiset};
use crate::error::{Error, Result};

/// Mode bit, `s` and scale.
pub const HEADER_BITS: u64 = 1 + 32 + 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WireMode {
    /// Each atom as a fixed-width code of `⌈log₂ 2d⌉` bits.
    List,
    /// One rank among all `C(2d + s − 1, s)` multisets.
    Rank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BitCost {
    pub header_bits: u64,
    pub payload_bits: u64,
    pub total_bits: u64,
}

impl BitCost {
    pub fn new(header_bits: u64, payload_bits: u64) -> Self {
        BitCost { header_bits, payload_bits, total_bits: header_bits + payload_bits }
    }
}

/// A bit sequence; bits past `len` in the last byte are zero.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitString {
    bytes: Vec<u8>,
    len: u64,
}

impl BitString {
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// The first `len` bits of `self`.
    pub fn truncated(&self, len: u64) -> BitString {
        let mut w = BitWriter::new();
        let mut r = BitReader::new(self);
        for _ in 0..len.min(self.len) {
            w.push_bit(r.read_bit().expect("within length"));
        }
        w.finish()
    }
}

#[derive(Debug, Default)]
pub struct BitWriter {
    out: BitString,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_bit(&mut self, bit: bool) {
        let pos = self.out.len;
        if pos % 8 == 0 {
            self.out.bytes.push(0);
        }
        if bit {
            *self.out.bytes.last_mut().expect("byte pushed") |= 0x80 >> (pos % 8);
        }
        self.out.len += 1;
    }

    /// Low `width` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        for k in (0..width).rev() {
            self.push_bit((value >> k) & 1 == 1);
        }
    }

    /// `value` as exactly `width` bits; `value` must fit.
    pub fn push_biguint(&mut self, value: &BigUint, width: u64) {
        debug_assert!(value.bits() <= width);
        for k in (0..width).rev() {
            self.push_bit(value.bit(k));
        }
    }

    pub fn finish(self) -> BitString {
        self.out
    }
}

pub struct BitReader<'a> {
    src: &'a BitString,
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(src: &'a BitString) -> Self {
        BitReader { src, pos: 0 }
    }

    pub fn remaining(&self) -> u64 {
        self.src.len - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.src.len {
            return Err(Error::MalformedMessage(format!("truncated stream at bit {}", self.pos)));
        }
        let byte = self.src.bytes[(self.pos / 8) as usize];
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        if self.remaining() < width as u64 {
            return Err(Error::MalformedMessage(format!(
                "truncated stream: need {width} bits at bit {}, have {}",
                self.pos,
                self.remaining()
            )));
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_biguint(&mut self, width: u64) -> Result<BigUint> {
        if self.remaining() < width {
            return Err(Error::MalformedMessage(format!(
                "truncated stream: need {width} bits at bit {}, have {}",
                self.pos,
                self.remaining()
            )));
        }
        let mut bytes = Vec::with_capacity((width as usize + 7) / 8);
        let lead = (width % 8) as u32;
        if lead > 0 {
            bytes.push(self.read_bits(lead)? as u8);
        }
        for _ in 0..width / 8 {
            bytes.push(self.read_bits(8)? as u8);
        }
        Ok(BigUint::from_bytes_be(&bytes))
    }
}

/// `⌈log₂ 2d⌉`, the width of one LIST code.
pub fn list_code_width(d: usize) -> u32 {
    let n = 2 * d as u64;
    64 - (n - 1).leading_zeros()
}

/// Payload size for a message with `s` atoms over dimension `d`.
pub fn payload_bits(mode: WireMode, d: usize, s: u64) -> u64 {
    match mode {
        WireMode::List => s * list_code_width(d) as u64,
        WireMode::Rank => rank_width(2 * d as u64, s),
    }
}

pub fn encode(msg: &MaureyMessage, d: usize, mode: WireMode) -> Result<(BitString, BitCost)> {
    if msg.s() > u32::MAX as u64 {
        return Err(Error::Unsupported(format!("sample count {} exceeds 32 bits", msg.s())));
    }
    if let Some(i) = msg.max_index() {
        if i >= d {
            return Err(Error::MalformedMessage(format!("atom index {i} out of range for d = {d}")));
        }
    }
    let mut w = BitWriter::new();
    w.push_bit(mode == WireMode::Rank);
    w.push_bits(msg.s(), 32);
    w.push_bits(msg.scale().to_bits(), 64);
    let mut payload = 0;
    if msg.scale() > 0.0 {
        payload = payload_bits(mode, d, msg.s());
        match mode {
            WireMode::List => {
                let width = list_code_width(d);
                for a in msg.atoms_expanded() {
                    w.push_bits(a.code(), width);
                }
            }
            WireMode::Rank => {
                let runs: Vec<(u64, u64)> = msg.atoms().iter().map(|&(a, c)| (a.code(), c)).collect();
                w.push_biguint(&rank_multiset(&runs), payload);
            }
        }
    }
    let bits = w.finish();
    debug_assert_eq!(bits.len(), HEADER_BITS + payload);
    Ok((bits, BitCost::new(HEADER_BITS, payload)))
}

/// Exact inverse of [`encode`]; trailing bits are rejected.
pub fn decode_bits(bits: &BitString, d: usize) -> Result<MaureyMessage> {
    let mut r = BitReader::new(bits);
    let mode = if r.read_bit()? { WireMode::Rank } else { WireMode::List };
    let s = r.read_bits(32)?;
    let scale = f64::from_bits(r.read_bits(64)?);
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::MalformedMessage(format!("invalid scale {scale}")));
    }
    if s == 0 {
        return Err(Error::MalformedMessage("zero sample count".into()));
    }
    let atoms = if scale == 0.0 {
        Vec::new()
    } else {
        match mode {
            WireMode::List => {
                let width = list_code_width(d);
                let mut atoms = Vec::with_capacity(s as usize);
                for _ in 0..s {
                    let code = r.read_bits(width)?;
                    if code >= 2 * d as u64 {
                        return Err(Error::MalformedMessage(format!("atom code {code} out of range for d = {d}")));
                    }
                    atoms.push((Atom::from_code(code), 1));
                }
                atoms
            }
            WireMode::Rank => {
                let rank = r.read_biguint(payload_bits(WireMode::Rank, d, s))?;
                unrank_multiset(&rank, 2 * d as u64, s)?
                    .into_iter()
                    .map(|(code, c)| (Atom::from_code(code), c))
                    .collect()
            }
        }
    };
    if r.remaining() != 0 {
        return Err(Error::MalformedMessage(format!("{} trailing bits", r.remaining())));
    }
    MaureyMessage::from_parts(scale, s, atoms).map_err(|e| Error::MalformedMessage(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecspace::DenseVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_payload_sizes() {
        assert_eq!(payload_bits(WireMode::Rank, 2, 1), 2);
        assert_eq!(payload_bits(WireMode::Rank, 4, 2), 6);
        assert_eq!(payload_bits(WireMode::List, 4, 2), 6);
        assert_eq!(list_code_width(1), 1);
        assert_eq!(list_code_width(5), 4);
    }

    #[test]
    fn roundtrip_both_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..200 {
            let d = 1 + trial % 50;
            let w = DenseVector::new((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let s = rng.gen_range(1..40);
            let msg = super::super::maurey(&w, s, &mut rng).unwrap();
            for mode in [WireMode::List, WireMode::Rank] {
                let (bits, cost) = encode(&msg, d, mode).unwrap();
                assert_eq!(bits.len(), cost.total_bits);
                assert_eq!(cost.header_bits, HEADER_BITS);
                assert_eq!(cost.payload_bits, payload_bits(mode, d, s));
                assert_eq!(decode_bits(&bits, d).unwrap(), msg);
            }
        }
    }

    #[test]
    fn zero_scale_has_empty_payload() {
        let msg = MaureyMessage::from_parts(0.0, 12, Vec::new()).unwrap();
        let (bits, cost) = encode(&msg, 100, WireMode::Rank).unwrap();
        assert_eq!(cost.payload_bits, 0);
        assert_eq!(decode_bits(&bits, 100).unwrap(), msg);
    }

    #[test]
    fn truncation_and_garbage_rejected() {
        let a = Atom { index: 2, negative: true };
        let msg = MaureyMessage::from_parts(1.5, 3, vec![(a, 3)]).unwrap();
        for mode in [WireMode::List, WireMode::Rank] {
            let (bits, _) = encode(&msg, 8, mode).unwrap();
            for cut in [0, 1, 40, bits.len() - 1] {
                assert!(matches!(decode_bits(&bits.truncated(cut), 8), Err(Error::MalformedMessage(_))));
            }
        }
        // A LIST code pointing past d.
        let (bits, _) = encode(&msg, 8, WireMode::List).unwrap();
        assert!(matches!(decode_bits(&bits, 2), Err(Error::MalformedMessage(_))));
        assert!(matches!(encode(&msg, 2, WireMode::List), Err(Error::MalformedMessage(_))));
    }

    #[test]
    fn oversized_sample_count_unsupported() {
        let a = Atom { index: 0, negative: false };
        let msg = MaureyMessage::from_parts(1.0, 1 << 33, vec![(a, 1 << 33)]).unwrap();
        assert!(matches!(encode(&msg, 4, WireMode::Rank), Err(Error::Unsupported(_))));
    }
}
