//! `ENGT1` container for prepared instances.
//!
//! Layout (all integers u32 little-endian):
//!
//! ```text
//! "ENGT1" | users | topics | history_len | periods | instance count
//! per instance:
//!   user | target_period
//!   history bits   (topics x history_len, row-major, LSB-first, byte padded)
//!   exposure bits  (topics)
//!   engaged bits   (topics)
//!   frequency      (topics x f64 LE)
//! ```

use std::path::Path;

use super::ModelInputs;
use crate::error::{CheckpointError, Error, Result};
use crate::util::{ByteReader, ByteWriter};

const MAGIC: &[u8; 5] = b"ENGT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub num_users: usize,
    pub num_topics: usize,
    pub history_len: usize,
    pub num_periods: usize,
    pub instances: Vec<ModelInputs>,
}

impl Dataset {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        for v in [
            self.num_users,
            self.num_topics,
            self.history_len,
            self.num_periods,
            self.instances.len(),
        ] {
            w.u32(v as u32);
        }
        for inst in &self.instances {
            w.u32(inst.user as u32);
            w.u32(inst.target_period as u32);
            w.bits(&inst.history);
            w.bits(&inst.exposure);
            w.bits(&inst.engaged);
            w.f64s(&inst.frequency);
        }
        w.finish()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = ByteReader::new(data);
        r.magic(MAGIC)?;
        let num_users = r.u32()? as usize;
        let num_topics = r.u32()? as usize;
        let history_len = r.u32()? as usize;
        let num_periods = r.u32()? as usize;
        let count = r.u32()? as usize;
        let mut instances = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let user = r.u32()? as usize;
            let target_period = r.u32()? as usize;
            let history = r.bits(num_topics * history_len)?;
            let exposure = r.bits(num_topics)?;
            let engaged = r.bits(num_topics)?;
            let frequency = r.f64s(num_topics)?;
            instances.push(ModelInputs {
                user,
                target_period,
                history,
                frequency,
                exposure,
                engaged,
            });
        }
        r.finish()?;
        Ok(Dataset {
            num_users,
            num_topics,
            history_len,
            num_periods,
            instances,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let data = std::fs::read(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        Ok(Self::from_bytes(&data)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn instance() -> impl Strategy<Value = ModelInputs> {
        (0usize..100, 0usize..20, proptest::collection::vec(0u8..2, 5 * 3), proptest::collection::vec(0u8..2, 5))
            .prop_flat_map(|(user, t, history, exposure)| {
                let engaged = exposure.iter().map(|&x| x & (user as u8 & 1)).collect::<Vec<_>>();
                proptest::collection::vec(0.0f64..=1.0, 5).prop_map(move |frequency| ModelInputs {
                    user,
                    target_period: t,
                    history: history.clone(),
                    frequency,
                    exposure: exposure.clone(),
                    engaged: engaged.clone(),
                })
            })
    }

    proptest! {
        #[test]
        fn round_trip(instances in proptest::collection::vec(instance(), 0..20)) {
            let ds = Dataset { num_users: 100, num_topics: 5, history_len: 3, num_periods: 20, instances };
            let back = Dataset::from_bytes(&ds.to_bytes()).unwrap();
            prop_assert_eq!(back, ds);
        }
    }

    #[test]
    fn header_layout_and_errors() {
        let ds = Dataset { num_users: 1, num_topics: 2, history_len: 1, num_periods: 3, instances: vec![] };
        let bytes = ds.to_bytes();
        assert_eq!(&bytes[..5], b"ENGT1");
        assert_eq!(bytes.len(), 5 + 5 * 4);
        assert!(matches!(Dataset::from_bytes(&bytes[..10]), Err(CheckpointError::Truncated { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Dataset::from_bytes(&bad), Err(CheckpointError::BadMagic { .. })));
    }
}
