//! `CAEM1` checkpoint format, little-endian throughout:
//!
//! ```text
//! "CAEM1" | version u32 | J u32 | T u32 | H u32 | L u32
//! leaky_slope f64 | seed u64
//! weights: filters (H*T) | W_d (L*J) | W_inf (L*J) | W_H (L*J) | theta (5+2H)   as f64
//! adam:    step u64 | first moments (same order) | second moments (same order)
//! ```

use std::path::Path;

use super::{AdamState, ModelConfig, ModelParams, Weights};
use crate::error::{CheckpointError, Error, Result};
use crate::util::{ByteReader, ByteWriter};

const MAGIC: &[u8; 5] = b"CAEM1";
pub const CHECKPOINT_VERSION: u32 = 1;

fn write_weights(w: &mut ByteWriter, weights: &Weights) {
    for arr in weights.arrays() {
        w.f64s(arr);
    }
}

fn read_weights(r: &mut ByteReader<'_>, cfg: &ModelConfig) -> Result<Weights, CheckpointError> {
    let mut weights = Weights::zeros(cfg);
    for arr in weights.arrays_mut() {
        let values = r.f64s(arr.len())?;
        arr.copy_from_slice(&values);
    }
    Ok(weights)
}

pub fn checkpoint_bytes(params: &ModelParams) -> Vec<u8> {
    let c = &params.config;
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u32(CHECKPOINT_VERSION);
    for d in [c.num_topics, c.history_len, c.num_filters, c.bottleneck] {
        w.u32(d as u32);
    }
    w.f64(c.leaky_slope);
    w.u64(c.seed);
    write_weights(&mut w, &params.weights);
    w.u64(params.adam.step);
    write_weights(&mut w, &params.adam.m);
    write_weights(&mut w, &params.adam.v);
    w.finish()
}

/// Parses a checkpoint. When `expected` is given, its `(J, T, H, L)` must
/// match the file.
pub fn parse_checkpoint(data: &[u8], expected: Option<&ModelConfig>) -> Result<ModelParams, CheckpointError> {
    let mut r = ByteReader::new(data);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    if let Some(e) = expected {
        let names = ["num_topics", "history_len", "num_filters", "bottleneck"];
        let want = [e.num_topics, e.history_len, e.num_filters, e.bottleneck];
        for ((name, w), f) in names.into_iter().zip(want).zip(dims) {
            if w != f {
                return Err(CheckpointError::DimensionMismatch {
                    name,
                    expected: w,
                    found: f,
                });
            }
        }
    }
    let config = ModelConfig {
        num_topics: dims[0],
        history_len: dims[1],
        num_filters: dims[2],
        bottleneck: dims[3],
        leaky_slope: r.f64()?,
        seed: r.u64()?,
    };
    let weights = read_weights(&mut r, &config)?;
    let step = r.u64()?;
    let m = read_weights(&mut r, &config)?;
    let v = read_weights(&mut r, &config)?;
    r.finish()?;
    Ok(ModelParams {
        config,
        weights,
        adam: AdamState { m, v, step },
    })
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), checkpoint_bytes(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&ModelConfig>) -> Result<ModelParams> {
    let data = std::fs::read(path.as_ref()).map_err(|e| Error::io(&path, e))?;
    let params = parse_checkpoint(&data, expected)?;
    params.config.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::super::init_params;
    use super::*;

    fn cfg(j: usize) -> ModelConfig {
        ModelConfig {
            num_topics: j,
            history_len: 4,
            num_filters: 3,
            bottleneck: 2,
            leaky_slope: 0.02,
            seed: 77,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let mut p = init_params(&cfg(6)).unwrap();
        p.adam.step = 12;
        p.adam.m.theta[3] = -0.25;
        p.adam.v.w_d[1] = 1e-300;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.caem");
        save_checkpoint(&p, &path).unwrap();
        let back = load_checkpoint(&path, Some(&cfg(6))).unwrap();
        assert_eq!(back, p);
        let bits = |w: &Weights| w.to_flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.weights), bits(&p.weights));
    }

    #[test]
    fn layout_prefix() {
        let p = init_params(&cfg(6)).unwrap();
        let b = checkpoint_bytes(&p);
        assert_eq!(&b[..5], b"CAEM1");
        assert_eq!(u32::from_le_bytes(b[5..9].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[9..13].try_into().unwrap()), 6);
        let n = p.weights.len();
        assert_eq!(b.len(), 5 + 4 * 5 + 8 + 8 + 8 * n + 8 + 16 * n);
        let first_filter = f64::from_le_bytes(b[41..49].try_into().unwrap());
        assert_eq!(first_filter, p.weights.time_filters[0]);
    }

    #[test]
    fn corrupt_files_give_distinct_errors() {
        let p = init_params(&cfg(6)).unwrap();
        let good = checkpoint_bytes(&p);

        let mut bad_magic = good.clone();
        bad_magic[1] = b'Z';
        let e1 = parse_checkpoint(&bad_magic, None).unwrap_err();
        assert!(matches!(e1, CheckpointError::BadMagic { .. }));

        let mut bad_version = good.clone();
        bad_version[5] = 9;
        let e2 = parse_checkpoint(&bad_version, None).unwrap_err();
        assert!(matches!(e2, CheckpointError::UnsupportedVersion { found: 9, .. }));

        let e3 = parse_checkpoint(&good, Some(&cfg(8))).unwrap_err();
        assert!(matches!(e3, CheckpointError::DimensionMismatch { name: "num_topics", expected: 8, found: 6 }));

        let e4 = parse_checkpoint(&good[..good.len() - 3], None).unwrap_err();
        assert!(matches!(e4, CheckpointError::Truncated { .. }));

        let mut longer = good.clone();
        longer.push(0);
        let e5 = parse_checkpoint(&longer, None).unwrap_err();

        let codes = [e1.code(), e2.code(), e3.code(), e4.code(), e5.code()];
        let mut unique = codes.to_vec();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), codes.len());
    }
}
