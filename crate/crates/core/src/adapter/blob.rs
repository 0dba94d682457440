//! Binary adapter blob.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "HYDRA1"
//! d: u32, k: u32, r: u32, N: u32, alpha: f64, gate mode: u32 (0 fixed, 1 learnable)
//! A        r*k f64, row-major
//! B_1..B_N N*d*r f64, row-major
//! logits   N f64
//! ```
//!
//! Plain LoRA adapters are stored as a single fixed-gate head.

use crate::adapter::gate::{GateMode, GateParams};
use crate::adapter::layers::HydraAdapter;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const BLOB_MAGIC: &[u8; 6] = b"HYDRA1";

pub fn encode_blob(adapter: &HydraAdapter) -> Vec<u8> {
    let (d, r) = adapter.heads[0].shape();
    let k = adapter.a.cols();
    let n = adapter.num_heads();
    let mut out = Vec::with_capacity(34 + 8 * (r * k + n * d * r + n));
    out.extend_from_slice(BLOB_MAGIC);
    for v in [d, k, r, n] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&adapter.alpha.to_le_bytes());
    out.extend_from_slice(&adapter.gate.mode.code().to_le_bytes());
    let tensors = std::iter::once(&adapter.a)
        .chain(&adapter.heads)
        .chain(std::iter::once(&adapter.gate.logits));
    for t in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("adapter blob truncated at byte {}", self.at)))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format("adapter blob dimensions overflow".into()))?;
        let data = (0..count).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Matrix::new(rows, cols, data)
    }
}

pub fn decode_blob(bytes: &[u8]) -> Result<HydraAdapter> {
    let mut rd = Reader { bytes, at: 0 };
    if rd.take(BLOB_MAGIC.len())? != BLOB_MAGIC {
        return Err(Error::Format("missing HYDRA1 magic".into()));
    }
    let d = rd.u32()? as usize;
    let k = rd.u32()? as usize;
    let r = rd.u32()? as usize;
    let n = rd.u32()? as usize;
    let alpha = rd.f64()?;
    let mode = GateMode::from_code(rd.u32()?)?;
    if n == 0 || r == 0 {
        return Err(Error::Format(format!("invalid blob header r={r} N={n}")));
    }
    let a = rd.matrix(r, k)?;
    let heads = (0..n).map(|_| rd.matrix(d, r)).collect::<Result<Vec<_>>>()?;
    let logits = rd.matrix(1, n)?;
    if rd.at != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after adapter blob",
            bytes.len() - rd.at
        )));
    }
    HydraAdapter::from_parts(a, heads, GateParams { mode, logits }, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{seeded_gaussian, RngState};
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut rng = RngState::new(0);
        let h = HydraAdapter::new(3, 2, 1, 2, 0.5, GateMode::Learnable, &mut rng).unwrap();
        let bytes = encode_blob(&h);
        assert_eq!(&bytes[..6], b"HYDRA1");
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[14..18].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[18..22].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[22..30].try_into().unwrap()), 0.5);
        assert_eq!(u32::from_le_bytes(bytes[30..34].try_into().unwrap()), 1);
        assert_eq!(bytes.len(), 34 + 8 * (2 + 2 * 3 + 2));
    }

    #[test]
    fn rejects_corruption() {
        let mut rng = RngState::new(0);
        let h = HydraAdapter::new(3, 2, 1, 2, 0.5, GateMode::Learnable, &mut rng).unwrap();
        let bytes = encode_blob(&h);
        assert!(decode_blob(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_blob(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(decode_blob(&bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn roundtrip_is_bitwise(seed in any::<u64>(), d in 1usize..6, k in 1usize..6, n in 1usize..5, learnable in any::<bool>()) {
            let mut rng = RngState::new(seed);
            let mode = if learnable { GateMode::Learnable } else { GateMode::FixedUniform };
            let r = 1 + (seed as usize) % d.min(k);
            let mut h = HydraAdapter::new(d, k, r, n, 7.25, mode, &mut rng).unwrap();
            for b in &mut h.heads {
                *b = seeded_gaussian(d, r, 0.0, 3.0, &mut rng).unwrap();
            }
            h.gate.logits = seeded_gaussian(1, n, 0.0, 1.0, &mut rng).unwrap();
            let bytes = encode_blob(&h);
            let back = decode_blob(&bytes).unwrap();
            prop_assert_eq!(encode_blob(&back), bytes);
            prop_assert_eq!(back, h);
        }
    }
}
