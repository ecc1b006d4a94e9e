//! Metric streams and parameter checkpoints.

use std::io::{Read, Write};

use crate::engine::RoundRecord;
use crate::error::{Error, Result};
use crate::numerics::ParamVec;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CFEL";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Writes records as CSV with a header row. An absent test accuracy is an
/// empty field.
pub fn write_records_csv<W: Write>(out: W, records: &[RoundRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<RoundRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// One JSON object per line.
pub fn write_records_jsonl<W: Write>(mut out: W, records: &[RoundRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records_jsonl(text: &str) -> Result<Vec<RoundRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Header `"CFEL"`, `u32` version, `u64` dimension, then the values; all
/// little-endian.
pub fn write_checkpoint<W: Write>(mut out: W, params: &ParamVec) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(params.dim() as u64).to_le_bytes())?;
    for v in params.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<ParamVec> {
    if bytes.len() < 16 {
        return Err(Error::Format(format!("checkpoint is {} bytes, header needs 16", bytes.len())));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format("checkpoint magic is not CFEL".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let d = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if body.len() != d * 8 {
        return Err(Error::Format(format!(
            "checkpoint declares {d} values but carries {} bytes",
            body.len()
        )));
    }
    Ok(ParamVec::from_vec(
        body.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<RoundRecord> {
        vec![
            RoundRecord {
                round: 1,
                t: 4,
                wall_sim_seconds: 1.5,
                global_loss: 0.25,
                test_accuracy: Some(0.5),
                grad_norm_sq: 1e-3,
                spread: 0.0,
            },
            RoundRecord {
                round: 2,
                t: 8,
                wall_sim_seconds: 3.0,
                global_loss: 0.125,
                test_accuracy: None,
                grad_norm_sq: 5e-4,
                spread: 0.1,
            },
        ]
    }

    #[test]
    fn csv_header_and_round_trip() {
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "round,t,wall_sim_seconds,global_loss,test_accuracy,grad_norm_sq,spread"
        );
        assert_eq!(text.lines().count(), 3);
        assert_eq!(read_records_csv(&buf[..]).unwrap(), sample());
    }

    #[test]
    fn jsonl_round_trip() {
        let mut buf = Vec::new();
        write_records_jsonl(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(read_records_jsonl(&text).unwrap(), sample());
    }

    #[test]
    fn checkpoint_layout() {
        let p = ParamVec::from_vec(vec![1.0, -2.5, f64::MIN_POSITIVE]);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        assert_eq!(buf.len(), 16 + 24);
        assert_eq!(&buf[..4], b"CFEL");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 3);
        assert_eq!(read_checkpoint(&buf).unwrap(), p);
    }

    #[test]
    fn checkpoint_rejects_bad_input() {
        assert!(read_checkpoint(b"CFE").is_err());
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ParamVec::zeros(2)).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&bad).is_err());
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
    }
}
