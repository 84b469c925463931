//! Master/worker framing and an in-process simulated network.
//!
//! Frame layout (big-endian):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "CAT" + version byte 0x01
//!      4     4  iteration
//!      8     2  worker id
//!     10     1  scheme code (0 top-T, 1 stochastic, 2 S+Q)
//!     11     4  T (entries in the payload)
//!     15     1  FPP (32 or 64)
//!     16     *  payload bits, zero-padded to a byte boundary
//! ```

use crate::compressors::codec::{decode, encode, wire_bits, BitPayload, Scheme};
use crate::compressors::{Compressed, Fpp};
use crate::costmodel::CostModel;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CAT\x01";
pub const HEADER_LEN: usize = 16;

/// One worker message for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub iter: u32,
    pub worker_id: u16,
    pub fpp: Fpp,
    pub message: Compressed,
}

impl Frame {
    pub fn t(&self) -> usize {
        self.message.len()
    }
}

pub fn frame_encode(frame: &Frame) -> Result<Vec<u8>> {
    let t = u32::try_from(frame.t()).map_err(|_| Error::EncodingInvariant("T does not fit in 32 bits".into()))?;
    let payload = encode(&frame.message, frame.fpp)?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.bytes.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&frame.iter.to_be_bytes());
    out.extend_from_slice(&frame.worker_id.to_be_bytes());
    out.push(frame.message.scheme().code());
    out.extend_from_slice(&t.to_be_bytes());
    out.push(frame.fpp.bits() as u8);
    out.extend_from_slice(&payload.bytes);
    Ok(out)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptFrame(msg.into())
}

pub fn frame_decode(bytes: &[u8], dim: usize) -> Result<Frame> {
    if bytes.len() < HEADER_LEN {
        return Err(corrupt(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let iter = u32::from_be_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let worker_id = u16::from_be_bytes(bytes[8..10].try_into().expect("2 bytes"));
    let scheme = Scheme::from_code(bytes[10]).ok_or_else(|| corrupt(format!("unknown scheme code {}", bytes[10])))?;
    let t = u32::from_be_bytes(bytes[11..15].try_into().expect("4 bytes")) as usize;
    let fpp = Fpp::from_bits(u32::from(bytes[15])).map_err(|_| corrupt(format!("unsupported FPP {}", bytes[15])))?;
    if t > dim {
        return Err(corrupt(format!("T = {t} exceeds d = {dim}")));
    }
    let bit_length = wire_bits(scheme, dim, t, fpp);
    let body = &bytes[HEADER_LEN..];
    if body.len() != bit_length.div_ceil(8) {
        return Err(corrupt(format!(
            "payload is {} bytes, expected {} for T = {t}",
            body.len(),
            bit_length.div_ceil(8)
        )));
    }
    if !bit_length.is_multiple_of(8) && body[body.len() - 1] & (0xff >> (bit_length % 8)) != 0 {
        return Err(corrupt("nonzero padding bits"));
    }
    let payload = BitPayload {
        bytes: body.to_vec(),
        bit_length,
    };
    let message = decode(&payload, dim, scheme, fpp).map_err(|e| match e {
        Error::CorruptPayload(m) => Error::CorruptFrame(m),
        other => other,
    })?;
    Ok(Frame {
        iter,
        worker_id,
        fpp,
        message,
    })
}

/// Master side of the simulated network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulatedMaster {
    pub iter: u32,
    pub workers: u16,
    pub dim: usize,
}

/// Result of one aggregation round.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    /// `(1/n) Σ_j Q_j` accumulated in worker-id order.
    pub aggregate: Vec<f64>,
    pub cost: f64,
    pub bits: u64,
    /// Entries received from each worker, indexed by worker id.
    pub worker_t: Vec<usize>,
}

/// Mean of the messages, summed in the order given.
pub fn aggregate<'a>(dim: usize, n: usize, messages: impl Iterator<Item = &'a Compressed>) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for m in messages {
        m.add_to(&mut acc);
    }
    let n = n as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Decodes every frame of a round, checks that each worker reported exactly
/// once for the current iteration, and averages in worker-id order.
pub fn simulate_round(master: &SimulatedMaster, frames: &[Vec<u8>], model: &CostModel) -> Result<Round> {
    let n = usize::from(master.workers);
    let mut slots: Vec<Option<Frame>> = vec![None; n];
    for bytes in frames {
        let f = frame_decode(bytes, master.dim)?;
        if f.iter != master.iter {
            return Err(Error::IncompleteRound {
                iter: master.iter,
                reason: format!("frame from worker {} belongs to iteration {}", f.worker_id, f.iter),
            });
        }
        let id = usize::from(f.worker_id);
        if id >= n {
            return Err(Error::IncompleteRound {
                iter: master.iter,
                reason: format!("unknown worker {id}"),
            });
        }
        if slots[id].is_some() {
            return Err(Error::IncompleteRound {
                iter: master.iter,
                reason: format!("duplicate frame from worker {id}"),
            });
        }
        slots[id] = Some(f);
    }
    let mut received = Vec::with_capacity(n);
    for (id, slot) in slots.into_iter().enumerate() {
        received.push(slot.ok_or_else(|| Error::IncompleteRound {
            iter: master.iter,
            reason: format!("missing frame from worker {id}"),
        })?);
    }
    let worker_t: Vec<usize> = received.iter().map(Frame::t).collect();
    Ok(Round {
        aggregate: aggregate(master.dim, n, received.iter().map(|f| &f.message)),
        cost: worker_t.iter().map(|&t| model.cost(t)).sum(),
        bits: worker_t.iter().map(|&t| model.payload_bits(t)).sum(),
        worker_t,
    })
}
