//! Wire formats for [`FimSequence`]: one JSON object per line, or a compact
//! little-endian binary record. Both are described in `docs/formats.md`.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::{FimSequence, QuantizationSpec, Sentinels, TokenError, FLAG_CONTEXT};
use crate::SCHEMA_VERSION;

pub const BINARY_MAGIC: &[u8; 4] = b"FIMS";
pub const BINARY_VERSION: u16 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Vocab {
    bins: u32,
    sentinels: Sentinels,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    v: u32,
    tokens: Vec<u32>,
    flags: Vec<u8>,
    ctx_pos: Vec<i64>,
    vocab: Vocab,
}

impl FimSequence {
    /// Single-line JSON record (no trailing newline).
    pub fn to_json_line(&self) -> String {
        let record = Record {
            v: SCHEMA_VERSION,
            tokens: self.tokens.clone(),
            flags: self.flags.clone(),
            ctx_pos: self.ctx_pos.iter().map(|p| p.map_or(-1, i64::from)).collect(),
            vocab: Vocab { bins: self.bins, sentinels: QuantizationSpec::with_bins(self.bins).sentinels() },
        };
        serde_json::to_string(&record).expect("record serializes")
    }

    pub fn from_json_line(line: &str) -> Result<FimSequence, TokenError> {
        let record: Record = serde_json::from_str(line)?;
        if record.v != SCHEMA_VERSION {
            return Err(TokenError::Malformed(format!("unsupported record version {}", record.v)));
        }
        let spec = QuantizationSpec::with_bins(record.vocab.bins);
        spec.validate()?;
        if record.vocab.sentinels != spec.sentinels() {
            return Err(TokenError::Malformed("sentinel ids do not match bins".into()));
        }
        let ctx_pos = record
            .ctx_pos
            .iter()
            .map(|&p| match p {
                -1 => Ok(None),
                p => u32::try_from(p).map(Some).map_err(|_| TokenError::Malformed(format!("bad ctx_pos {p}"))),
            })
            .collect::<Result<_, _>>()?;
        let seq = FimSequence { tokens: record.tokens, flags: record.flags, ctx_pos, bins: record.vocab.bins };
        seq.validate()?;
        Ok(seq)
    }

    /// `FIMS`, version u16, bins u16, length u32, tokens u16 x n, flags u8 x n.
    pub fn write_binary(&self, mut w: impl Write) -> Result<(), TokenError> {
        let bins = u16::try_from(self.bins).map_err(|_| TokenError::BadSpec("bins exceed u16".into()))?;
        let n = u32::try_from(self.tokens.len()).map_err(|_| TokenError::Malformed("sequence too long".into()))?;
        let mut buf = Vec::with_capacity(12 + 3 * self.tokens.len());
        buf.extend_from_slice(BINARY_MAGIC);
        buf.extend_from_slice(&BINARY_VERSION.to_le_bytes());
        buf.extend_from_slice(&bins.to_le_bytes());
        buf.extend_from_slice(&n.to_le_bytes());
        for &t in &self.tokens {
            let t = u16::try_from(t).map_err(|_| TokenError::Malformed(format!("token {t} exceeds u16")))?;
            buf.extend_from_slice(&t.to_le_bytes());
        }
        buf.extend_from_slice(&self.flags);
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<FimSequence, TokenError> {
        let mut header = [0u8; 12];
        r.read_exact(&mut header)?;
        if &header[..4] != BINARY_MAGIC {
            return Err(TokenError::Malformed("bad magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != BINARY_VERSION {
            return Err(TokenError::Malformed(format!("unsupported binary version {version}")));
        }
        let bins = u16::from_le_bytes([header[6], header[7]]) as u32;
        let n = u32::from_le_bytes([header[8], header[9], header[10], header[11]]) as usize;
        let mut body = vec![0u8; 3 * n];
        r.read_exact(&mut body)?;
        let tokens = body[..2 * n].chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as u32).collect();
        let flags: Vec<u8> = body[2 * n..].to_vec();
        let mut next = 0;
        let ctx_pos = flags
            .iter()
            .map(|&f| {
                (f & FLAG_CONTEXT != 0).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        let seq = FimSequence { tokens, flags, ctx_pos, bins };
        seq.spec().validate()?;
        seq.validate()?;
        Ok(seq)
    }
}

/// Writes one JSON record per line.
pub fn write_jsonl<'a>(mut w: impl Write, seqs: impl IntoIterator<Item = &'a FimSequence>) -> Result<(), TokenError> {
    for s in seqs {
        writeln!(w, "{}", s.to_json_line())?;
    }
    Ok(())
}

/// Reads every non-blank line as a record.
pub fn read_jsonl(r: impl BufRead) -> Result<Vec<FimSequence>, TokenError> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(FimSequence::from_json_line(&line)?);
        }
    }
    Ok(out)
}
