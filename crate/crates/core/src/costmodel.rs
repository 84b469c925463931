//! Communication cost of a sparsity budget.
//!
//! A [`CostModel`] maps the number of transmitted entries `T` to cost
//! units. Payload sizes follow the codec:
//!
//! * sparse: `P(T) = T·(⌈log₂ d⌉ + FPP)`
//! * sparsified-quantized: `P(T) = FPP + T·⌈log₂ d⌉`
//!
//! The quantized size omits the `T` sign bits that the wire format carries;
//! cost accounting uses the closed form above.
//!
//! Regimes:
//!
//! * payload: `C(T) = P(T)` bits
//! * affine: `C(T) = c1·P(T) + c0`
//! * packet: `C(T) = c1·packets(T) + c0`
//!
//! Packets carry whole entries: a sparse packet holds
//! `τ_max = ⌊P_max / (⌈log₂ d⌉ + FPP)⌋` records, so `packets(T) = ⌈T/τ_max⌉`,
//! which equals `⌈P(T)/P_max⌉` whenever `P_max` is a multiple of the record
//! size. For the quantized scheme the magnitude rides in the first packet
//! and `τ_max` counts indices per packet after that.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compressors::codec::index_bits;
use crate::compressors::Fpp;
use crate::error::{Error, Result};

/// Which payload formula applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PayloadScheme {
    Sparse,
    SparseQuantized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regime {
    Payload,
    Affine { c1: f64, c0: f64 },
    Packet { c1: f64, c0: f64, pmax_bits: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    regime: Regime,
    scheme: PayloadScheme,
    dim: usize,
    fpp: Fpp,
}

impl CostModel {
    pub fn new(regime: Regime, scheme: PayloadScheme, dim: usize, fpp: Fpp) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCostModel("dimension must be at least 1".into()));
        }
        let model = CostModel {
            regime,
            scheme,
            dim,
            fpp,
        };
        match regime {
            Regime::Payload => {}
            Regime::Affine { c1, c0 } => check_coefficients(c1, c0)?,
            Regime::Packet { c1, c0, pmax_bits } => {
                check_coefficients(c1, c0)?;
                let first = match scheme {
                    PayloadScheme::Sparse => u64::from(model.bits_per_entry()),
                    PayloadScheme::SparseQuantized => u64::from(model.bits_per_entry() + fpp.bits()),
                };
                if pmax_bits < first {
                    return Err(Error::InvalidCostModel(format!(
                        "packet payload of {pmax_bits} bits cannot hold the first {first}-bit entry"
                    )));
                }
            }
        }
        Ok(model)
    }

    pub fn payload(scheme: PayloadScheme, dim: usize, fpp: Fpp) -> Self {
        CostModel {
            regime: Regime::Payload,
            scheme,
            dim: dim.max(1),
            fpp,
        }
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn scheme(&self) -> PayloadScheme {
        self.scheme
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fpp(&self) -> Fpp {
        self.fpp
    }

    /// Same regime and precision, different payload formula.
    pub fn with_scheme(mut self, scheme: PayloadScheme) -> Result<Self> {
        self.scheme = scheme;
        CostModel::new(self.regime, scheme, self.dim, self.fpp)
    }

    /// Bits per transmitted entry: index plus value for sparse, index only
    /// for the quantized scheme.
    pub fn bits_per_entry(&self) -> u32 {
        match self.scheme {
            PayloadScheme::Sparse => index_bits(self.dim) + self.fpp.bits(),
            PayloadScheme::SparseQuantized => index_bits(self.dim),
        }
    }

    pub fn payload_bits(&self, t: usize) -> u64 {
        if t == 0 {
            return 0;
        }
        let idx = u64::from(index_bits(self.dim));
        let fpp = u64::from(self.fpp.bits());
        let t = t as u64;
        match self.scheme {
            PayloadScheme::Sparse => t * (idx + fpp),
            PayloadScheme::SparseQuantized => fpp + t * idx,
        }
    }

    /// Packets needed for `t` entries under whole-entry packing.
    fn packets(&self, t: usize, pmax_bits: u64) -> u64 {
        if t == 0 {
            return 0;
        }
        let t = t as u64;
        let per_entry = u64::from(self.bits_per_entry());
        let tau = pmax_bits / per_entry;
        match self.scheme {
            PayloadScheme::Sparse => t.div_ceil(tau),
            PayloadScheme::SparseQuantized => {
                let first = (pmax_bits - u64::from(self.fpp.bits())) / per_entry;
                if t <= first {
                    1
                } else {
                    1 + (t - first).div_ceil(tau)
                }
            }
        }
    }

    /// `C(T)`. `T = 0` is an empty message and costs only the overhead.
    pub fn cost(&self, t: usize) -> f64 {
        match self.regime {
            Regime::Payload => self.payload_bits(t) as f64,
            Regime::Affine { c1, c0 } => c1 * self.payload_bits(t) as f64 + c0,
            Regime::Packet { c1, c0, pmax_bits } => c1 * self.packets(t, pmax_bits) as f64 + c0,
        }
    }

    /// Payload of an uncompressed gradient: `d·FPP` bits.
    pub fn dense_bits(&self) -> u64 {
        self.dim as u64 * u64::from(self.fpp.bits())
    }

    /// Cost of sending the uncompressed gradient (`d` values, no indices).
    pub fn dense_cost(&self) -> f64 {
        let bits = self.dense_bits();
        match self.regime {
            Regime::Payload => bits as f64,
            Regime::Affine { c1, c0 } => c1 * bits as f64 + c0,
            Regime::Packet { c1, c0, pmax_bits } => {
                let per_packet = (pmax_bits / u64::from(self.fpp.bits())).max(1);
                c1 * (self.dim as u64).div_ceil(per_packet) as f64 + c0
            }
        }
    }

    /// Entries per packet. For the quantized scheme the magnitude is
    /// charged to the first packet and this counts index entries only.
    pub fn tau_max(&self) -> Result<usize> {
        match self.regime {
            Regime::Packet { pmax_bits, .. } => Ok((pmax_bits / u64::from(self.bits_per_entry())) as usize),
            _ => Err(Error::NotApplicable("tau_max")),
        }
    }
}

fn check_coefficients(c1: f64, c0: f64) -> Result<()> {
    if !(c1.is_finite() && c1 > 0.0) {
        return Err(Error::InvalidCostModel(format!("c1 must be positive, got {c1}")));
    }
    if !(c0.is_finite() && c0 >= 0.0) {
        return Err(Error::InvalidCostModel(format!("c0 must be nonnegative, got {c0}")));
    }
    Ok(())
}

/// Dimension-free description of a cost model, as written on the command
/// line:
///
/// ```text
/// payload | payload-sparse | payload-sq
/// affine:c1=1,c0=0
/// packet:c1=576B,c0=64B,pmax=512B,fpp=32
/// ```
///
/// A `B` suffix means bytes and multiplies the number by 8.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub regime: Regime,
    pub scheme: Option<PayloadScheme>,
    pub fpp: Option<Fpp>,
}

impl CostSpec {
    /// Instantiates the model for dimension `dim`. `scheme` is the payload
    /// formula of the compressor in use; `fpp` is used when the cost string
    /// does not set one.
    pub fn build(&self, dim: usize, scheme: PayloadScheme, fpp: Fpp) -> Result<CostModel> {
        CostModel::new(self.regime, scheme, dim, self.fpp.unwrap_or(fpp))
    }
}

fn parse_amount(key: &str, raw: &str) -> Result<f64> {
    let (num, scale) = match raw.strip_suffix(['B', 'b']) {
        Some(n) => (n, 8.0),
        None => (raw, 1.0),
    };
    num.trim()
        .parse::<f64>()
        .map(|v| v * scale)
        .map_err(|_| Error::Config(format!("cost model: cannot parse {key}={raw}")))
}

impl FromStr for CostSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut c1 = None;
        let mut c0 = None;
        let mut pmax = None;
        let mut fpp = None;
        for kv in rest.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("cost model: expected key=value, got {kv}")))?;
            match k.trim() {
                "c1" => c1 = Some(parse_amount(k, v)?),
                "c0" => c0 = Some(parse_amount(k, v)?),
                "pmax" => pmax = Some(parse_amount(k, v)?),
                "fpp" => {
                    let bits = v
                        .trim()
                        .parse::<u32>()
                        .map_err(|_| Error::Config(format!("cost model: bad fpp {v}")))?;
                    fpp = Some(Fpp::from_bits(bits)?);
                }
                other => return Err(Error::Config(format!("cost model: unknown key {other}"))),
            }
        }
        let need = |v: Option<f64>, k: &str| v.ok_or_else(|| Error::Config(format!("cost model {head}: missing {k}")));
        let (regime, scheme) = match head {
            "payload" => (Regime::Payload, None),
            "payload-sparse" => (Regime::Payload, Some(PayloadScheme::Sparse)),
            "payload-sq" => (Regime::Payload, Some(PayloadScheme::SparseQuantized)),
            "affine" => (
                Regime::Affine {
                    c1: need(c1, "c1")?,
                    c0: c0.unwrap_or(0.0),
                },
                None,
            ),
            "packet" => {
                let pmax = need(pmax, "pmax")?;
                if pmax.fract() != 0.0 || pmax < 1.0 {
                    return Err(Error::Config(format!("cost model: pmax must be a positive whole number of bits, got {pmax}")));
                }
                (
                    Regime::Packet {
                        c1: need(c1, "c1")?,
                        c0: c0.unwrap_or(0.0),
                        pmax_bits: pmax as u64,
                    },
                    None,
                )
            }
            other => return Err(Error::Config(format!("unknown cost model {other}"))),
        };
        Ok(CostSpec { regime, scheme, fpp })
    }
}

impl fmt::Display for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.regime {
            Regime::Payload => match self.scheme {
                Some(PayloadScheme::Sparse) => write!(f, "payload-sparse")?,
                Some(PayloadScheme::SparseQuantized) => write!(f, "payload-sq")?,
                None => write!(f, "payload")?,
            },
            Regime::Affine { c1, c0 } => write!(f, "affine:c1={c1},c0={c0}")?,
            Regime::Packet { c1, c0, pmax_bits } => write!(f, "packet:c1={c1},c0={c0},pmax={pmax_bits}")?,
        }
        if let Some(fpp) = self.fpp {
            let sep = if matches!(self.regime, Regime::Payload) { ':' } else { ',' };
            write!(f, "{sep}fpp={}", fpp.bits())?;
        }
        Ok(())
    }
}
