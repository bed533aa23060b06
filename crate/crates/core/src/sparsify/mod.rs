//! Maurey sparsification of vectors and matrices, and the bit-exact channel
//! format every inter-machine message goes through.

mod maurey;
pub mod rank;
mod spectral;
mod wire;

pub use maurey::{maurey, Atom, MaureyMessage};
pub use spectral::{
    spectral_maurey, spectral_maurey_from_svd, spectral_maurey_with_basis, SpectralMessage, SpectralSample,
};
pub use wire::{
    decode_bits, encode, list_code_width, payload_bits, BitCost, BitReader, BitString, BitWriter, WireMode,
    HEADER_BITS,
};
