//! Small numeric and byte-level helpers shared across modules.

use crate::error::CheckpointError;

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// SplitMix64 finaliser; used to derive independent sub-seeds from one seed.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub(crate) fn new() -> Self {
        ByteWriter { buf: Vec::new() }
    }

    pub(crate) fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub(crate) fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }

    /// u32 byte length, then UTF-8 bytes.
    pub(crate) fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    /// Packs 0/1 values LSB-first into ceil(n/8) bytes.
    pub(crate) fn bits(&mut self, vs: &[u8]) {
        for chunk in vs.chunks(8) {
            let mut byte = 0u8;
            for (k, &v) in chunk.iter().enumerate() {
                if v != 0 {
                    byte |= 1 << k;
                }
            }
            self.buf.push(byte);
        }
    }

    pub(crate) fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(data: &'a [u8]) -> Self {
        ByteReader { data, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let available = self.data.len() - self.pos;
        if available < n {
            return Err(CheckpointError::Truncated {
                needed: n - available,
            });
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn magic(&mut self, expected: &[u8]) -> Result<(), CheckpointError> {
        let available = (self.data.len() - self.pos).min(expected.len());
        let found = &self.data[self.pos..self.pos + available];
        if found != expected {
            return Err(CheckpointError::BadMagic {
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        self.pos += expected.len();
        Ok(())
    }

    pub(crate) fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn string(&mut self) -> Result<String, CheckpointError> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| CheckpointError::InvalidText)
    }

    pub(crate) fn bits(&mut self, n: usize) -> Result<Vec<u8>, CheckpointError> {
        let raw = self.take(n.div_ceil(8))?;
        Ok((0..n).map(|k| (raw[k / 8] >> (k % 8)) & 1).collect())
    }

    pub(crate) fn finish(self) -> Result<(), CheckpointError> {
        let rest = self.data.len() - self.pos;
        if rest > 0 {
            return Err(CheckpointError::TrailingBytes(rest));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_symmetric_and_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        for &x in &[0.3, 2.0, 15.0, 700.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
        assert!(sigmoid(-800.0) >= 0.0);
    }

    #[test]
    fn bits_round_trip_across_byte_boundary() {
        let v: Vec<u8> = (0..13).map(|k| (k % 3 == 0) as u8).collect();
        let mut w = ByteWriter::new();
        w.bits(&v);
        let buf = w.finish();
        assert_eq!(buf.len(), 2);
        let mut r = ByteReader::new(&buf);
        assert_eq!(r.bits(13).unwrap(), v);
        r.finish().unwrap();
    }

    #[test]
    fn reader_reports_truncation() {
        let mut r = ByteReader::new(&[1, 2, 3]);
        match r.u32() {
            Err(CheckpointError::Truncated { needed }) => assert_eq!(needed, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
