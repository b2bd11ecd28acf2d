//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "BTXM" | version u32 | mode u8 (0 release, 1 checkpoint)
//! config: d_e u32 | d_h u32 | d_f u32 | cell u8 (0 LSTM, 1 GRU)
//!         | src_vocab u32 | tgt_vocab u32 | dropout_in f64 | dropout_out f64
//! checkpoint only: epoch u64 | step u64
//! tensor count u32, then per tensor:
//!         name_len u32 | name | rank u32 | dims u64 × rank | f32 payload
//! trailer: CRC32 of every preceding byte
//! ```
//!
//! Checkpoints carry the Adam moments as extra tensors `<name>#m` and
//! `<name>#v` after each value tensor.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio;
use crate::model::{ModelConfig, ModelParams, Side};
use crate::nn::{CellKind, ParameterStore, Tensor};
use crate::text::Vocabulary;

pub const MAGIC: &[u8; 4] = b"BTXM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaveMode {
    /// Parameter values only.
    Release,
    /// Values, optimizer moments and the training position.
    Checkpoint { epoch: u64, step: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub params: ModelParams<f32>,
    /// `(epoch, step)` for checkpoints.
    pub position: Option<(u64, u64)>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn dim(&mut self, v: usize) -> Result<u32> {
        u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("dimension {v} exceeds u32")))
    }
    fn tensor(&mut self, name: &str, t: &Tensor<f32>) {
        self.u32(name.len() as u32);
        self.0.extend_from_slice(name.as_bytes());
        self.u32(t.shape().len() as u32);
        for &d in t.shape() {
            self.u64(d as u64);
        }
        for v in t.data() {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn encode_model(params: &ModelParams<f32>, mode: SaveMode) -> Result<Vec<u8>> {
    let c = &params.config;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u8(matches!(mode, SaveMode::Checkpoint { .. }) as u8);
    for d in [c.d_e, c.d_h, c.d_f] {
        let d = w.dim(d)?;
        w.u32(d);
    }
    w.u8(match c.cell {
        CellKind::Lstm => 0,
        CellKind::Gru => 1,
    });
    for d in [c.src_vocab, c.tgt_vocab] {
        let d = w.dim(d)?;
        w.u32(d);
    }
    w.u64(c.dropout_in.to_bits());
    w.u64(c.dropout_out.to_bits());
    if let SaveMode::Checkpoint { epoch, step } = mode {
        w.u64(epoch);
        w.u64(step);
    }
    let per = if matches!(mode, SaveMode::Checkpoint { .. }) { 3 } else { 1 };
    w.u32((params.store.len() * per) as u32);
    for p in params.store.iter() {
        w.tensor(&p.name, &p.value);
        if per == 3 {
            w.tensor(&format!("{}#m", p.name), &p.m);
            w.tensor(&format!("{}#v", p.name), &p.v);
        }
    }
    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    Ok(w.0)
}

/// Writes atomically through a temporary sibling file.
pub fn save_model(params: &ModelParams<f32>, path: &Path, mode: SaveMode) -> Result<()> {
    fsio::write_atomic(path, &encode_model(params, mode)?)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated(section.to_string()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self, section: &str) -> Result<u8> {
        Ok(self.take(1, section)?[0])
    }
    fn u32(&mut self, section: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }
    fn u64(&mut self, section: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, section)?.try_into().unwrap()))
    }
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn read_tensor(r: &mut Reader, k: usize) -> Result<(String, Tensor<f32>)> {
    let header = format!("tensor {k} header");
    let len = r.u32(&header)? as usize;
    let name = std::str::from_utf8(r.take(len, &header)?)
        .map_err(|_| Error::Corrupt(format!("tensor {k} name is not UTF-8")))?
        .to_string();
    let rank = r.u32(&format!("tensor `{name}` shape"))? as usize;
    if rank > 8 {
        return Err(Error::Corrupt(format!("tensor `{name}` has rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(r.u64(&format!("tensor `{name}` shape"))? as usize);
    }
    let count = shape
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Corrupt(format!("tensor `{name}` shape overflows")))?;
    let bytes = r.take(count, &format!("tensor `{name}` payload"))?;
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok((name, Tensor::from_vec(shape, data)?))
}

pub fn decode_model(buf: &[u8], path: &Path) -> Result<LoadedModel> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic").map_err(|_| Error::BadMagic(path.to_path_buf()))? != MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: VERSION,
        });
    }
    let checkpoint = match r.u8("mode")? {
        0 => false,
        1 => true,
        m => return Err(Error::Corrupt(format!("unknown mode byte {m}"))),
    };
    let sec = "config block";
    let (d_e, d_h, d_f) = (r.u32(sec)? as usize, r.u32(sec)? as usize, r.u32(sec)? as usize);
    let cell = match r.u8(sec)? {
        0 => CellKind::Lstm,
        1 => CellKind::Gru,
        c => return Err(Error::Corrupt(format!("unknown cell code {c}"))),
    };
    let (src_vocab, tgt_vocab) = (r.u32(sec)? as usize, r.u32(sec)? as usize);
    let dropout_in = f64::from_bits(r.u64(sec)?);
    let dropout_out = f64::from_bits(r.u64(sec)?);
    let config = ModelConfig {
        d_e,
        d_h,
        d_f,
        cell,
        src_vocab,
        tgt_vocab,
        dropout_in,
        dropout_out,
    };
    let position = if checkpoint {
        Some((r.u64("checkpoint position")?, r.u64("checkpoint position")?))
    } else {
        None
    };
    let count = r.u32("tensor count")? as usize;
    let per = if checkpoint { 3 } else { 1 };
    if !count.is_multiple_of(per) {
        return Err(Error::Corrupt(format!("{count} tensors in a mode-{per} file")));
    }
    let mut entries = Vec::with_capacity(count.min(1024));
    for k in 0..count {
        entries.push(read_tensor(&mut r, k)?);
    }
    let body_end = r.pos;
    let stored = r.u32("checksum trailer")?;
    if r.remaining() != 0 {
        return Err(Error::Corrupt(format!("{} trailing bytes", r.remaining())));
    }
    let computed = crc32fast::hash(&buf[..body_end]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut store = ParameterStore::new();
    for group in entries.chunks(per) {
        let (name, value) = &group[0];
        let id = store.add(name, value.clone())?;
        if checkpoint {
            for (suffix, (got, t)) in ["#m", "#v"].iter().zip(&group[1..]) {
                if *got != format!("{name}{suffix}") || t.shape() != value.shape() {
                    return Err(Error::Corrupt(format!("moment tensor `{got}` does not match `{name}`")));
                }
            }
            let p = store.get_mut(id);
            p.m = group[1].1.clone();
            p.v = group[2].1.clone();
        }
    }
    Ok(LoadedModel {
        params: ModelParams::from_store(config, store)?,
        position,
    })
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&buf, path)
}

/// Fails unless both vocabularies have exactly the sizes the model was built for.
pub fn check_vocabularies(params: &ModelParams<f32>, source: &Vocabulary, target: &Vocabulary) -> Result<()> {
    for (side, name, v) in [(Side::Source, "source", source), (Side::Target, "target", target)] {
        let want = params.vocab_size(side);
        if v.len() != want {
            return Err(Error::VocabMismatch {
                side: name,
                vocab: v.len(),
                model: want,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn model(cell: CellKind) -> ModelParams<f32> {
        let cfg = ModelConfig::new(11, 13).with_dims(4, 3, 2).with_cell(cell);
        let mut m = ModelParams::init(cfg, 9).unwrap();
        let mut r = rng::seeded(1);
        for p in m.store.iter_mut() {
            p.m.data_mut().iter_mut().for_each(|x| *x = r.gen());
            p.v.data_mut().iter_mut().for_each(|x| *x = r.gen());
        }
        m
    }

    fn bits(t: &Tensor<f32>) -> Vec<u32> {
        t.data().iter().map(|v| v.to_bits()).collect()
    }

    #[test]
    fn checkpoint_round_trip_is_bit_identical() {
        for cell in [CellKind::Lstm, CellKind::Gru] {
            let m = model(cell);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.btxm");
            save_model(&m, &path, SaveMode::Checkpoint { epoch: 3, step: 77 }).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(back.position, Some((3, 77)));
            assert_eq!(back.params.config, m.config);
            for (a, b) in m.store.iter().zip(back.params.store.iter()) {
                assert_eq!(a.name, b.name);
                assert_eq!(bits(&a.value), bits(&b.value));
                assert_eq!(bits(&a.m), bits(&b.m));
                assert_eq!(bits(&a.v), bits(&b.v));
            }
        }
    }

    #[test]
    fn release_mode_drops_moments() {
        let m = model(CellKind::Lstm);
        let back = decode_model(&encode_model(&m, SaveMode::Release).unwrap(), Path::new("x")).unwrap();
        assert_eq!(back.position, None);
        for (a, b) in m.store.iter().zip(back.params.store.iter()) {
            assert_eq!(bits(&a.value), bits(&b.value));
            assert!(b.m.data().iter().all(|&x| x == 0.0));
        }
        assert!(encode_model(&m, SaveMode::Release).unwrap().len() < encode_model(&m, SaveMode::Checkpoint { epoch: 0, step: 0 }).unwrap().len());
    }

    #[test]
    fn truncation_names_the_section() {
        let buf = encode_model(&model(CellKind::Gru), SaveMode::Release).unwrap();
        let p = Path::new("x");
        match decode_model(&buf[..10], p) {
            Err(Error::Truncated(s)) => assert_eq!(s, "config block"),
            other => panic!("{other:?}"),
        }
        match decode_model(&buf[..buf.len() - 2], p) {
            Err(Error::Truncated(s)) => assert_eq!(s, "checksum trailer"),
            other => panic!("{other:?}"),
        }
        match decode_model(&buf[..60], p) {
            Err(Error::Truncated(s)) => assert!(s.starts_with("tensor"), "{s}"),
            other => panic!("{other:?}"),
        }
        for cut in 0..buf.len() {
            assert!(decode_model(&buf[..cut], p).is_err());
        }
    }

    #[test]
    fn distinct_failure_kinds() {
        let buf = encode_model(&model(CellKind::Lstm), SaveMode::Release).unwrap();
        let p = Path::new("x");
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(decode_model(&bad, p), Err(Error::BadMagic(_))));
        let mut bad = buf.clone();
        bad[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            decode_model(&bad, p),
            Err(Error::UnsupportedVersion { found: 2, expected: 1 })
        ));
        let mut bad = buf.clone();
        let k = bad.len() - 6; // inside the last payload
        bad[k] ^= 0x40;
        assert!(matches!(decode_model(&bad, p), Err(Error::Checksum { .. })));
        // consistent checksum but a config that disagrees with the tensors
        let mut bad = buf.clone();
        bad[9] ^= 1;
        let n = bad.len() - 4;
        let crc = crc32fast::hash(&bad[..n]);
        bad[n..].copy_from_slice(&crc.to_le_bytes());
        let e = decode_model(&bad, p);
        assert!(matches!(e, Err(Error::Corrupt(_))), "{e:?}");
    }

    #[test]
    fn vocabulary_size_checked() {
        let m = model(CellKind::Lstm);
        let words = |n: usize| vec![(0..n).map(|k| format!("w{k}")).collect::<Vec<_>>()];
        let src = Vocabulary::build(words(9), None).unwrap();
        let tgt = Vocabulary::build(words(11), None).unwrap();
        check_vocabularies(&m, &src, &tgt).unwrap();
        let small = Vocabulary::build(words(8), None).unwrap();
        assert!(matches!(
            check_vocabularies(&m, &small, &tgt),
            Err(Error::VocabMismatch { side: "source", .. })
        ));
    }
}
