//! Bit-exact model checkpoints and structured result files.
//!
//! Checkpoint layout (all integers little-endian):
//!
//! ```text
//! offset 0   magic            8 bytes  "CULCKPT1"
//! offset 8   version          u32
//! offset 12  encoder layers   u32
//! offset 16  decoder layers   u32
//! offset 20  layer dims       (rows u32, cols u32) per layer, encoder first
//! then       payload          f64 LE: per layer weights row-major, then bias
//! ```
//!
//! Result files are CSV with a fixed header or a JSON array of objects with
//! the same keys. CSV reals are rendered with 17 significant digits so a
//! parse round-trips to the identical f64 bits.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::unlearn::model::{ArchConfig, ToyModel};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CULCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Fixed CSV header for trajectory and front rows.
pub const RESULT_HEADER: &str = "phase,epsilon,iter,f1,f2,grad_f1_norm,g_norm,eta,psi,wall_ms";

/// Writes a model checkpoint; `load_checkpoint` reproduces it bitwise.
pub fn save_checkpoint(model: &ToyModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (n_enc, n_dec) = model.layer_count();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n_enc as u32).to_le_bytes());
    buf.extend_from_slice(&(n_dec as u32).to_le_bytes());
    for (rows, cols) in model.layer_dims() {
        buf.extend_from_slice(&rows.to_le_bytes());
        buf.extend_from_slice(&cols.to_le_bytes());
    }
    for v in model.flatten().iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, &buf).map_err(|e| CoreError::io(path.display().to_string(), e))
}

/// Reads a checkpoint, validating magic, version, and payload length.
/// Format errors carry the byte offset of the first inconsistency.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ToyModel> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    parse_checkpoint(&bytes)
}

fn parse_checkpoint(bytes: &[u8]) -> Result<ToyModel> {
    let take_u32 = |offset: usize| -> Result<u32> {
        bytes
            .get(offset..offset + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or(CoreError::Format {
                offset: offset as u64,
                what: "truncated header".into(),
            })
    };
    if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(CoreError::Format {
            offset: 0,
            what: "bad magic".into(),
        });
    }
    let version = take_u32(8)?;
    if version != CHECKPOINT_VERSION {
        return Err(CoreError::Format {
            offset: 8,
            what: format!("unsupported version {version}"),
        });
    }
    let n_enc = take_u32(12)? as usize;
    let n_dec = take_u32(16)? as usize;
    if n_enc == 0 || n_dec == 0 || n_enc + n_dec > 64 {
        return Err(CoreError::Format {
            offset: 12,
            what: format!("implausible layer counts {n_enc}/{n_dec}"),
        });
    }
    let mut offset = 20;
    let mut dims = Vec::with_capacity(n_enc + n_dec);
    for _ in 0..n_enc + n_dec {
        let rows = take_u32(offset)? as usize;
        let cols = take_u32(offset + 4)? as usize;
        if rows == 0 || cols == 0 {
            return Err(CoreError::Format {
                offset: offset as u64,
                what: "zero layer dimension".into(),
            });
        }
        dims.push((rows, cols));
        offset += 8;
    }
    let expected_floats: usize = dims.iter().map(|(r, c)| r * c + r).sum();
    let expected_len = offset + expected_floats * 8;
    if bytes.len() != expected_len {
        return Err(CoreError::Format {
            offset: bytes.len().min(expected_len) as u64,
            what: format!(
                "payload length mismatch: file has {} bytes, header declares {expected_len}",
                bytes.len()
            ),
        });
    }
    // rebuild a model skeleton matching the declared shapes, then fill it
    let arch = ArchConfig {
        input_dim: dims[0].1,
        hidden_dim: dims[0].0,
        latent_dim: dims[n_enc - 1].0,
    };
    let skeleton = ToyModel::init(arch, 0);
    let skeleton_dims: Vec<(usize, usize)> = skeleton
        .layer_dims()
        .iter()
        .map(|&(r, c)| (r as usize, c as usize))
        .collect();
    if skeleton_dims != dims {
        return Err(CoreError::Format {
            offset: 20,
            what: "layer shapes do not form a mirrored encoder-decoder stack".into(),
        });
    }
    let mut values = Vec::with_capacity(expected_floats);
    for i in 0..expected_floats {
        let start = offset + i * 8;
        let v = f64::from_le_bytes(bytes[start..start + 8].try_into().unwrap());
        if !v.is_finite() {
            return Err(CoreError::Format {
                offset: start as u64,
                what: "non-finite parameter".into(),
            });
        }
        values.push(v);
    }
    skeleton.with_flat(&crate::numerics::ParamVector::new(values)?)
}

/// One serialized trajectory or front row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub phase: String,
    pub epsilon: Option<f64>,
    pub iter: u64,
    pub f1: f64,
    pub f2: f64,
    pub grad_f1_norm: f64,
    pub g_norm: f64,
    pub eta: f64,
    pub psi: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Csv,
    Json,
}

impl ResultFormat {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "csv" => ResultFormat::Csv,
            "json" => ResultFormat::Json,
            other => {
                return Err(CoreError::invalid(format!(
                    "unknown result format '{other}' (expected csv|json)"
                )))
            }
        })
    }
}

/// Renders a real with 17 significant digits, enough for an exact f64
/// round-trip through decimal.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_line(row: &ResultRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        row.phase,
        row.epsilon.map(format_f64).unwrap_or_default(),
        row.iter,
        format_f64(row.f1),
        format_f64(row.f2),
        format_f64(row.grad_f1_norm),
        format_f64(row.g_norm),
        format_f64(row.eta),
        format_f64(row.psi),
        row.wall_ms
    )
}

/// Writes rows in the requested format.
pub fn write_results(rows: &[ResultRow], path: impl AsRef<Path>, format: ResultFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        ResultFormat::Csv => {
            let mut s = String::with_capacity(64 * (rows.len() + 1));
            s.push_str(RESULT_HEADER);
            s.push('\n');
            for row in rows {
                s.push_str(&csv_line(row));
                s.push('\n');
            }
            s.into_bytes()
        }
        ResultFormat::Json => {
            let mut s = serde_json::to_string_pretty(rows)?;
            s.push('\n');
            s.into_bytes()
        }
    };
    let mut f = std::fs::File::create(path)
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    f.write_all(&bytes)
        .map_err(|e| CoreError::io(path.display().to_string(), e))
}

/// Strict parser for the CSV produced by [`write_results`].
pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    parse_results_csv(&text)
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RESULT_HEADER => {}
        other => {
            return Err(CoreError::Format {
                offset: 0,
                what: format!("bad header: {other:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(CoreError::Format {
                offset: lineno as u64 + 2,
                what: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| CoreError::Format {
                offset: lineno as u64 + 2,
                what: format!("bad real '{s}'"),
            })
        };
        let int = |s: &str| -> Result<u64> {
            s.parse::<u64>().map_err(|_| CoreError::Format {
                offset: lineno as u64 + 2,
                what: format!("bad integer '{s}'"),
            })
        };
        rows.push(ResultRow {
            phase: fields[0].to_string(),
            epsilon: if fields[1].is_empty() {
                None
            } else {
                Some(num(fields[1])?)
            },
            iter: int(fields[2])?,
            f1: num(fields[3])?,
            f2: num(fields[4])?,
            grad_f1_norm: num(fields[5])?,
            g_norm: num(fields[6])?,
            eta: num(fields[7])?,
            psi: num(fields[8])?,
            wall_ms: int(fields[9])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unlearn::model::{ArchConfig, ToyModel};
    use proptest::prelude::*;

    fn sample_row() -> ResultRow {
        ResultRow {
            phase: "phase2".into(),
            epsilon: Some(0.25),
            iter: 3,
            f1: std::f64::consts::LN_2,
            f2: 1.0 / 3.0,
            grad_f1_norm: 2.5e-13,
            g_norm: 1e300,
            eta: 0.0,
            psi: -1.5,
            wall_ms: 12,
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let m = ToyModel::init(
            ArchConfig {
                input_dim: 36,
                hidden_dim: 12,
                latent_dim: 4,
            },
            1234,
        );
        let dir = std::env::temp_dir().join("cul_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("round_trip.ckpt");
        save_checkpoint(&m, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let a = m.flatten();
        let b = loaded.flatten();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn corrupt_magic_reports_offset_zero() {
        let m = ToyModel::init(
            ArchConfig {
                input_dim: 16,
                hidden_dim: 8,
                latent_dim: 2,
            },
            1,
        );
        let dir = std::env::temp_dir().join("cul_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("corrupt.ckpt");
        save_checkpoint(&m, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xFF;
        std::fs::write(&path, &bytes).unwrap();
        match load_checkpoint(&path) {
            Err(CoreError::Format { offset: 0, .. }) => {}
            other => panic!("expected format error at offset 0, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_reports_boundary() {
        let m = ToyModel::init(
            ArchConfig {
                input_dim: 16,
                hidden_dim: 8,
                latent_dim: 2,
            },
            1,
        );
        let dir = std::env::temp_dir().join("cul_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("truncated.ckpt");
        save_checkpoint(&m, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = bytes.len() - 8;
        std::fs::write(&path, &bytes[..cut]).unwrap();
        match load_checkpoint(&path) {
            Err(CoreError::Format { offset, .. }) => assert_eq!(offset, cut as u64),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let m = ToyModel::init(
            ArchConfig {
                input_dim: 16,
                hidden_dim: 8,
                latent_dim: 2,
            },
            1,
        );
        let dir = std::env::temp_dir().join("cul_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("version.ckpt");
        save_checkpoint(&m, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 99;
        std::fs::write(&path, &bytes).unwrap();
        match load_checkpoint(&path) {
            Err(CoreError::Format { offset: 8, .. }) => {}
            other => panic!("expected version error at offset 8, got {other:?}"),
        }
    }

    #[test]
    fn empty_rows_give_header_only_csv() {
        let dir = std::env::temp_dir().join("cul_results_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.csv");
        write_results(&[], &path, ResultFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{RESULT_HEADER}\n"));
        assert!(read_results_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trips_to_identical_values() {
        let dir = std::env::temp_dir().join("cul_results_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("one.csv");
        let row = sample_row();
        write_results(std::slice::from_ref(&row), &path, ResultFormat::Csv).unwrap();
        let back = read_results_csv(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].f1.to_bits(), row.f1.to_bits());
        assert_eq!(back[0].g_norm.to_bits(), row.g_norm.to_bits());
        assert_eq!(back[0], row);
    }

    #[test]
    fn json_field_matches_csv() {
        let dir = std::env::temp_dir().join("cul_results_test");
        std::fs::create_dir_all(&dir).unwrap();
        let rows: Vec<ResultRow> = (0..100)
            .map(|i| ResultRow {
                iter: i,
                f1: (i as f64).sqrt(),
                epsilon: i.is_multiple_of(2).then_some(i as f64 * 0.01),
                ..sample_row()
            })
            .collect();
        let csv_path = dir.join("traj.csv");
        let json_path = dir.join("traj.json");
        write_results(&rows, &csv_path, ResultFormat::Csv).unwrap();
        write_results(&rows, &json_path, ResultFormat::Json).unwrap();
        let from_csv = read_results_csv(&csv_path).unwrap();
        let from_json: Vec<ResultRow> =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(from_csv, from_json);
    }

    proptest! {
        #[test]
        fn float_rendering_round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let parsed: f64 = format_f64(x).parse().unwrap();
            prop_assert_eq!(parsed.to_bits(), x.to_bits());
        }
    }
}
