//! Bit-exact wire format for compressed gradients.
//!
//! All fields are packed MSB-first with no padding between them:
//!
//! * sparse (top-T or stochastic): `T` records of
//!   `index: ⌈log₂ d⌉ bits` followed by `value: FPP bits` (IEEE-754);
//! * sparsified-quantized: `magnitude: FPP bits`, then `T` indices of
//!   `⌈log₂ d⌉` bits, then `T` sign bits (`1` = negative).
//!
//! An empty compressed gradient encodes to zero bits for every scheme.
//! Byte alignment is left to the transport frame.

use serde::{Deserialize, Serialize};

use super::bits::{BitReader, BitWriter};
use super::{Compressed, Fpp, Sign, SparseGradient, SparseKind, SqGradient};
use crate::error::{Error, Result};

/// Compressor identity, as carried on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    TopT,
    Stochastic,
    SparseQuantized,
}

impl Scheme {
    pub fn code(self) -> u8 {
        match self {
            Scheme::TopT => 0,
            Scheme::Stochastic => 1,
            Scheme::SparseQuantized => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Scheme::TopT),
            1 => Some(Scheme::Stochastic),
            2 => Some(Scheme::SparseQuantized),
            _ => None,
        }
    }

    pub fn is_quantized(self) -> bool {
        self == Scheme::SparseQuantized
    }
}

/// A packed bit string. `bytes` holds at least `bit_length` bits; any
/// trailing bits in the last byte are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPayload {
    pub bytes: Vec<u8>,
    pub bit_length: usize,
}

/// `⌈log₂ d⌉`, with one bit for the degenerate `d = 1`.
pub fn index_bits(dim: usize) -> u32 {
    if dim <= 2 {
        1
    } else {
        usize::BITS - (dim - 1).leading_zeros()
    }
}

/// Number of bits [`encode`] emits for `t` entries, sign bits included.
pub fn wire_bits(scheme: Scheme, dim: usize, t: usize, fpp: Fpp) -> usize {
    if t == 0 {
        return 0;
    }
    let idx = index_bits(dim) as usize;
    let fpp = fpp.bits() as usize;
    match scheme {
        Scheme::TopT | Scheme::Stochastic => t * (idx + fpp),
        Scheme::SparseQuantized => fpp + t * idx + t,
    }
}

fn value_bits(value: f64, fpp: Fpp) -> u64 {
    match fpp {
        Fpp::F32 => u64::from((value as f32).to_bits()),
        Fpp::F64 => value.to_bits(),
    }
}

fn bits_value(bits: u64, fpp: Fpp) -> f64 {
    match fpp {
        Fpp::F32 => f64::from(f32::from_bits(bits as u32)),
        Fpp::F64 => f64::from_bits(bits),
    }
}

fn write_index(w: &mut BitWriter, index: usize, width: u32) -> Result<()> {
    if width < usize::BITS && index >> width != 0 {
        return Err(Error::EncodingInvariant(format!(
            "index {index} does not fit in {width} bits"
        )));
    }
    w.write(index as u64, width);
    Ok(())
}

/// Packs `c` into its wire representation. Values are rounded to `fpp`.
pub fn encode(c: &Compressed, fpp: Fpp) -> Result<BitPayload> {
    let dim = c.dim();
    let width = index_bits(dim);
    let expected = wire_bits(c.scheme(), dim, c.len(), fpp);
    let mut w = BitWriter::with_capacity_bits(expected);
    match c {
        Compressed::Sparse(s) => {
            for &(i, v) in s.entries() {
                write_index(&mut w, i, width)?;
                let r = fpp.round(v);
                if r == 0.0 || !r.is_finite() {
                    return Err(Error::EncodingInvariant(format!(
                        "value {v} at index {i} is not representable in {} bits",
                        fpp.bits()
                    )));
                }
                w.write(value_bits(v, fpp), fpp.bits());
            }
        }
        Compressed::Quantized(q) if !q.is_empty() => {
            w.write(value_bits(q.magnitude(), fpp), fpp.bits());
            for &(i, _) in q.entries() {
                write_index(&mut w, i, width)?;
            }
            for &(_, s) in q.entries() {
                w.write_bit(s == Sign::Minus);
            }
        }
        Compressed::Quantized(_) => {}
    }
    if w.bit_len() != expected {
        return Err(Error::EncodingInvariant(format!(
            "emitted {} bits, expected {expected}",
            w.bit_len()
        )));
    }
    let (bytes, bit_length) = w.finish();
    Ok(BitPayload { bytes, bit_length })
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptPayload(msg.into())
}

/// Inverse of [`encode`] for a payload produced with the same
/// `(dim, scheme, fpp)`.
pub fn decode(payload: &BitPayload, dim: usize, scheme: Scheme, fpp: Fpp) -> Result<Compressed> {
    if payload.bytes.len() * 8 < payload.bit_length {
        return Err(corrupt(format!(
            "{} bytes cannot hold {} bits",
            payload.bytes.len(),
            payload.bit_length
        )));
    }
    let width = index_bits(dim);
    let fbits = fpp.bits();
    let mut r = BitReader::new(&payload.bytes, payload.bit_length);
    let truncated = || corrupt("truncated payload");
    let read_index = |r: &mut BitReader<'_>| -> Result<usize> {
        let i = r.read(width).ok_or_else(truncated)? as usize;
        if i >= dim {
            return Err(corrupt(format!("index {i} out of range for dimension {dim}")));
        }
        Ok(i)
    };
    let bits = payload.bit_length;

    match scheme {
        Scheme::TopT | Scheme::Stochastic => {
            let record = (width + fbits) as usize;
            if !bits.is_multiple_of(record) {
                return Err(corrupt(format!("{bits} bits is not a whole number of {record}-bit records")));
            }
            let mut entries = Vec::with_capacity(bits / record);
            for _ in 0..bits / record {
                let i = read_index(&mut r)?;
                let v = bits_value(r.read(fbits).ok_or_else(truncated)?, fpp);
                entries.push((i, v));
            }
            let kind = if scheme == Scheme::TopT { SparseKind::TopT } else { SparseKind::Stochastic };
            SparseGradient::new(dim, entries, kind)
                .map(Compressed::Sparse)
                .map_err(|e| corrupt(e.to_string()))
        }
        Scheme::SparseQuantized => {
            if bits == 0 {
                return Ok(Compressed::Quantized(SqGradient::new(dim, 0.0, Vec::new())?));
            }
            let per_entry = (width + 1) as usize;
            if bits < fbits as usize || !(bits - fbits as usize).is_multiple_of(per_entry) {
                return Err(corrupt(format!("{bits} bits does not match the quantized layout")));
            }
            let t = (bits - fbits as usize) / per_entry;
            let magnitude = bits_value(r.read(fbits).ok_or_else(truncated)?, fpp);
            let mut indices = Vec::with_capacity(t);
            for _ in 0..t {
                indices.push(read_index(&mut r)?);
            }
            let mut entries = Vec::with_capacity(t);
            for i in indices {
                let neg = r.read_bit().ok_or_else(truncated)?;
                entries.push((i, if neg { Sign::Minus } else { Sign::Plus }));
            }
            SqGradient::new(dim, magnitude, entries)
                .map(Compressed::Quantized)
                .map_err(|e| corrupt(e.to_string()))
        }
    }
}
