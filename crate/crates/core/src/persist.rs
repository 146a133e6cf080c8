//! Checksummed binary serialization of trained ensembles.
//!
//! The format is little-endian throughout, fully self-describing, and closed
//! by a SHA-256 digest of everything before it, so silent corruption and
//! truncation are both detected before any parameter is trusted. Weights are
//! stored as `f64`; saving an `f32` model widens losslessly and loads back as
//! the `f64` instantiation.
//!
//! Layout, in file order:
//!
//! | section      | bytes                 | contents                                            |
//! |--------------|-----------------------|-----------------------------------------------------|
//! | `magic`      | 8                     | `4D 41 43 48 4D 44 4C 00` (`"MACHMDL\0"`)           |
//! | `version`    | 4                     | format version, `u32`                               |
//! | `header`     | 82                    | shape, seed, hash kind, training hyperparameters    |
//! | `label map`  | 8 + 8K                | count then `K` original labels, `i64`               |
//! | `offsets`    | 8R                    | absolute byte offset of each member's weight block  |
//! | `hash specs` | 41R                   | per member: kind `u8`, then `a, b, p, B, K` as `u64`|
//! | `weights`    | 8R(Bd + B)            | per member: `B x d` weight rows, then `B` biases    |
//! | `checksum`   | 32                    | SHA-256 of every preceding byte                     |
//!
//! The header is `K, B, R, d, seed` as `u64`, the hash kind and the identity
//! flag as one `u8` each, then `epochs, batch` as `u64`, `lr, decay` as
//! `f64`, and `shuffle_seed` as `u64`.
//!
//! A complete file for a tiny ensemble (`K=2, B=2, R=1, d=1`, seed 7,
//! identity hashing, weights `[0.5, -0.5]`, biases `[0.25, -0.25]`) reads,
//! with offsets on the left:
//!
//! ```text
//! 0000  4d 41 43 48 4d 44 4c 00  magic "MACHMDL\0"
//! 0008  01 00 00 00              version 1
//! 000c  02 00 .. 00              header: K=2, B=2, R=1, d=1, seed=7 (u64 each)
//! 0034  00 01                    header: hash kind 0 (prime modulus), identity 1
//! 0036  0a 00 .. 00              header: epochs=10, batch=64 (u64 each)
//! 0046  9a 99 99 99 99 99 b9 3f  header: lr = 0.1 (f64)
//! 004e  cd cc cc cc cc cc ec 3f  header: decay = 0.9 (f64)
//! 0056  00 00 00 00 00 00 00 00  header: shuffle_seed = 0
//! 005e  02 00 00 00 00 00 00 00  label map: count = 2
//! 0066  00 00 .. / 01 00 ..      label map: originals 0, 1 (i64 each)
//! 0076  a7 00 00 00 00 00 00 00  offsets: member 0's block at 0xa7
//! 007e  00                       spec 0: kind 0 (prime modulus)
//! 007f  01 00 .. / 00 00 ..      spec 0: a=1, b=0
//! 008f  ff ff ff ff ff ff ff 1f  spec 0: p = 2^61 - 1
//! 0097  02 00 .. / 02 00 ..      spec 0: buckets=2, universe=2
//! 00a7  00 00 00 00 00 00 e0 3f  weights[0][0] = 0.5
//! 00af  00 00 00 00 00 00 e0 bf  weights[1][0] = -0.5
//! 00b7  00 00 00 00 00 00 d0 3f  bias[0] = 0.25
//! 00bf  00 00 00 00 00 00 d0 bf  bias[1] = -0.25
//! 00c7  97 e3 ca 35 ..           sha-256 of bytes 0000..00c7 (32 bytes)
//! ```
//!
//! Loading re-validates everything: magic, version, checksum, spec
//! constants (including primality), weight finiteness, and cross-component
//! shape agreement. A file that ends early is reported with the section it
//! ends inside.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::data::LabelMap;
use crate::error::{Error, Result};
use crate::hash::{HashKind, HashSpec};
use crate::model::{MachConfig, MachModel};
use crate::scalar::Scalar;
use crate::softmax::{SoftmaxModel, TrainConfig};

/// First eight bytes of every model file.
pub const MAGIC: [u8; 8] = *b"MACHMDL\0";

/// Format version this build writes and reads.
pub const FORMAT_VERSION: u32 = 1;

const MAGIC_LEN: u64 = 8;
const VERSION_LEN: u64 = 4;
const HEADER_LEN: u64 = 5 * 8 + 2 + 2 * 8 + 2 * 8 + 8;
const SPEC_LEN: u64 = 1 + 5 * 8;
const CHECKSUM_LEN: u64 = 32;

fn kind_code(kind: HashKind) -> u8 {
    match kind {
        HashKind::CarterWegman => 0,
        HashKind::OddMultiplier => 1,
    }
}

fn kind_from_code(code: u8) -> Result<HashKind> {
    match code {
        0 => Ok(HashKind::CarterWegman),
        1 => Ok(HashKind::OddMultiplier),
        other => Err(Error::MalformedModel(format!(
            "unknown hash kind code {other}"
        ))),
    }
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> HashingWriter<W> {
    fn new(inner: W) -> Self {
        HashingWriter {
            inner,
            hasher: Sha256::new(),
        }
    }

    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.hasher.update(bytes);
        self.inner.write_all(bytes)?;
        Ok(())
    }

    fn put_u8(&mut self, v: u8) -> Result<()> {
        self.put(&[v])
    }

    fn put_u32(&mut self, v: u32) -> Result<()> {
        self.put(&v.to_le_bytes())
    }

    fn put_u64(&mut self, v: u64) -> Result<()> {
        self.put(&v.to_le_bytes())
    }

    fn put_i64(&mut self, v: i64) -> Result<()> {
        self.put(&v.to_le_bytes())
    }

    fn put_f64(&mut self, v: f64) -> Result<()> {
        self.put(&v.to_le_bytes())
    }

    fn finish(mut self) -> Result<W> {
        let digest = self.hasher.finalize();
        self.inner.write_all(&digest)?;
        Ok(self.inner)
    }
}

/// Serializes a model to any writer. Weights are widened to `f64`.
pub fn write_model<F: Scalar>(model: &MachModel<F>, writer: impl Write) -> Result<()> {
    let cfg = model.config();
    let (k, b, r, d) = (
        cfg.num_classes as u64,
        cfg.buckets as u64,
        cfg.reps as u64,
        model.dim() as u64,
    );
    let mut w = HashingWriter::new(writer);
    w.put(&MAGIC)?;
    w.put_u32(FORMAT_VERSION)?;

    w.put_u64(k)?;
    w.put_u64(b)?;
    w.put_u64(r)?;
    w.put_u64(d)?;
    w.put_u64(cfg.seed)?;
    w.put_u8(kind_code(cfg.hash_kind))?;
    w.put_u8(cfg.identity_hash as u8)?;
    w.put_u64(cfg.train.epochs as u64)?;
    w.put_u64(cfg.train.batch_size as u64)?;
    w.put_f64(cfg.train.learning_rate)?;
    w.put_f64(cfg.train.lr_decay)?;
    w.put_u64(cfg.train.shuffle_seed)?;

    w.put_u64(k)?;
    for &label in model.label_map().originals() {
        w.put_i64(label)?;
    }

    let blocks_start = MAGIC_LEN + VERSION_LEN + HEADER_LEN + (8 + 8 * k) + 8 * r + SPEC_LEN * r;
    let block_len = 8 * (b * d + b);
    for j in 0..r {
        w.put_u64(blocks_start + j * block_len)?;
    }

    for spec in model.hash_specs() {
        w.put_u8(kind_code(spec.kind()))?;
        w.put_u64(spec.a())?;
        w.put_u64(spec.b())?;
        w.put_u64(spec.prime())?;
        w.put_u64(spec.buckets())?;
        w.put_u64(spec.universe())?;
    }

    for sub in model.sub_models() {
        for &v in sub.weights() {
            w.put_f64(v.as_f64())?;
        }
        for &v in sub.bias() {
            w.put_f64(v.as_f64())?;
        }
    }
    w.finish()?;
    Ok(())
}

/// Saves a model to a file, atomically: the bytes land in a temporary file
/// in the same directory which is renamed over the destination, so a crash
/// mid-save can never leave a half-written model at `path`.
pub fn save_model<F: Scalar>(model: &MachModel<F>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    let mut writer = BufWriter::new(tmp.as_file());
    write_model(model, &mut writer)?;
    writer.flush()?;
    drop(writer);
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(Error::Truncated { section })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self, section: &'static str) -> Result<u8> {
        Ok(self.take(1, section)?[0])
    }

    fn u32(&mut self, section: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }

    fn u64(&mut self, section: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, section)?.try_into().unwrap()))
    }

    fn i64(&mut self, section: &'static str) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8, section)?.try_into().unwrap()))
    }

    fn f64(&mut self, section: &'static str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, section)?.try_into().unwrap()))
    }
}

fn usize_of(v: u64, what: &'static str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Overflow(what))
}

/// Deserializes a model from raw bytes.
pub fn read_model_bytes(bytes: &[u8]) -> Result<MachModel<f64>> {
    let mut c = Cursor { bytes, pos: 0 };

    let magic = c.take(8, "magic")?;
    if magic != MAGIC {
        return Err(Error::MalformedModel("bad magic bytes".into()));
    }
    let version = c.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }

    let k = c.u64("header")?;
    let b = c.u64("header")?;
    let r = c.u64("header")?;
    let d = c.u64("header")?;
    let seed = c.u64("header")?;
    let hash_kind = kind_from_code(c.u8("header")?)?;
    let identity_flag = c.u8("header")?;
    if identity_flag > 1 {
        return Err(Error::MalformedModel(format!(
            "identity flag must be 0 or 1, found {identity_flag}"
        )));
    }
    let epochs = c.u64("header")?;
    let batch = c.u64("header")?;
    let lr = c.f64("header")?;
    let decay = c.f64("header")?;
    let shuffle_seed = c.u64("header")?;

    // The header fixes every later section's size; walk the boundaries once
    // so a short file is reported with the section it ends inside, before
    // any content is interpreted.
    let sizes = (|| {
        let labels = 8u64.checked_add(k.checked_mul(8)?)?;
        let offsets = r.checked_mul(8)?;
        let specs = r.checked_mul(SPEC_LEN)?;
        let block = b.checked_mul(d)?.checked_add(b)?.checked_mul(8)?;
        let blocks = r.checked_mul(block)?;
        let total = (MAGIC_LEN + VERSION_LEN + HEADER_LEN)
            .checked_add(labels)?
            .checked_add(offsets)?
            .checked_add(specs)?
            .checked_add(blocks)?
            .checked_add(CHECKSUM_LEN)?;
        Some((labels, offsets, specs, blocks, total))
    })()
    .ok_or(Error::MalformedModel(
        "header describes sizes beyond u64 range".into(),
    ))?;
    let (labels_len, offsets_len, specs_len, blocks_len, expected_total) = sizes;

    let actual = bytes.len() as u64;
    if actual != expected_total {
        if actual > expected_total {
            return Err(Error::MalformedModel(format!(
                "{} trailing bytes after the checksum",
                actual - expected_total
            )));
        }
        let mut boundary = MAGIC_LEN + VERSION_LEN + HEADER_LEN;
        for (section, len) in [
            ("label map", labels_len),
            ("offsets", offsets_len),
            ("hash specs", specs_len),
            ("weights", blocks_len),
            ("checksum", CHECKSUM_LEN),
        ] {
            boundary += len;
            if actual < boundary {
                return Err(Error::Truncated { section });
            }
        }
        unreachable!("actual < expected_total implies a section boundary is crossed");
    }

    let body_len = bytes.len() - CHECKSUM_LEN as usize;
    let digest = Sha256::digest(&bytes[..body_len]);
    if digest.as_slice() != &bytes[body_len..] {
        return Err(Error::ChecksumMismatch);
    }

    let label_count = c.u64("label map")?;
    if label_count != k {
        return Err(Error::MalformedModel(format!(
            "label map holds {label_count} labels for {k} classes"
        )));
    }
    let mut originals = Vec::with_capacity(usize_of(k, "label count")?);
    for _ in 0..k {
        originals.push(c.i64("label map")?);
    }
    let label_map = LabelMap::from_originals(originals.iter().copied());
    if label_map.originals() != originals.as_slice() {
        return Err(Error::MalformedModel(
            "label map is not sorted and distinct".into(),
        ));
    }

    let blocks_start =
        MAGIC_LEN + VERSION_LEN + HEADER_LEN + labels_len + offsets_len + specs_len;
    let block_len = blocks_len / r.max(1);
    for j in 0..r {
        let offset = c.u64("offsets")?;
        if offset != blocks_start + j * block_len {
            return Err(Error::MalformedModel(format!(
                "weight block {j} offset {offset} disagrees with the layout"
            )));
        }
    }

    let mut specs = Vec::with_capacity(usize_of(r, "member count")?);
    for _ in 0..r {
        let kind = kind_from_code(c.u8("hash specs")?)?;
        let a = c.u64("hash specs")?;
        let hb = c.u64("hash specs")?;
        let p = c.u64("hash specs")?;
        let buckets = c.u64("hash specs")?;
        let universe = c.u64("hash specs")?;
        let spec = match kind {
            HashKind::CarterWegman => HashSpec::carter_wegman(a, hb, p, buckets, universe)?,
            HashKind::OddMultiplier => {
                if hb != 0 || p != 0 {
                    return Err(Error::MalformedModel(
                        "odd-multiplier spec carries nonzero offset or modulus".into(),
                    ));
                }
                HashSpec::odd_multiplier(a, buckets, universe)?
            }
        };
        specs.push(spec);
    }

    let (bu, du) = (usize_of(b, "buckets")?, usize_of(d, "dimension")?);
    let mut models = Vec::with_capacity(usize_of(r, "member count")?);
    for _ in 0..r {
        let mut weights = Vec::with_capacity(bu * du);
        for _ in 0..bu * du {
            weights.push(c.f64("weights")?);
        }
        let mut bias = Vec::with_capacity(bu);
        for _ in 0..bu {
            bias.push(c.f64("weights")?);
        }
        models.push(SoftmaxModel::from_parts(weights, bias, bu, du)?);
    }

    let config = MachConfig {
        num_classes: usize_of(k, "classes")?,
        buckets: bu,
        reps: usize_of(r, "members")?,
        seed,
        hash_kind,
        identity_hash: identity_flag == 1,
        train: TrainConfig {
            epochs: usize_of(epochs, "epochs")?,
            batch_size: usize_of(batch, "batch size")?,
            learning_rate: lr,
            lr_decay: decay,
            shuffle_seed,
        },
    };
    MachModel::from_parts(config, specs, models, label_map)
}

/// Deserializes a model from any reader.
pub fn read_model(mut reader: impl Read) -> Result<MachModel<f64>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    read_model_bytes(&bytes)
}

/// Loads a model from a file.
pub fn load_model(path: impl AsRef<Path>) -> Result<MachModel<f64>> {
    let bytes = fs::read(path)?;
    read_model_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, SparseVector};
    use crate::model::EstimatorKind;

    fn trained_model() -> (MachModel<f64>, Dataset<f64>) {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for c in 0..6u32 {
            for s in 0..5 {
                let x = SparseVector::from_pairs([
                    (c, 4.0 + 0.1 * s as f64),
                    ((c + 1) % 6, 1.0),
                ])
                .unwrap();
                features.push(x);
                labels.push(c);
            }
        }
        let ds = Dataset::new(features, labels, LabelMap::identity(6), 6, 6).unwrap();
        let mut cfg = MachConfig::new(6, 3, 4);
        cfg.train.epochs = 3;
        let model = MachModel::train(&ds, cfg).unwrap();
        (model, ds)
    }

    fn to_bytes(model: &MachModel<f64>) -> Vec<u8> {
        let mut out = Vec::new();
        write_model(model, &mut out).unwrap();
        out
    }

    fn patch(bytes: &[u8], at: usize, with: &[u8]) -> Vec<u8> {
        let mut out = bytes.to_vec();
        out[at..at + with.len()].copy_from_slice(with);
        out
    }

    fn refresh_checksum(bytes: &mut [u8]) {
        let body = bytes.len() - 32;
        let digest = Sha256::digest(&bytes[..body]);
        let tail = bytes.len() - 32;
        bytes[tail..].copy_from_slice(&digest);
    }

    #[test]
    fn round_trip_preserves_everything_bit_for_bit() {
        let (model, ds) = trained_model();
        let bytes = to_bytes(&model);
        let loaded = read_model_bytes(&bytes).unwrap();
        assert_eq!(model, loaded);
        for i in 0..ds.len() {
            let a = model
                .predict_one(ds.feature(i), EstimatorKind::Unbiased)
                .unwrap();
            let b = loaded
                .predict_one(ds.feature(i), EstimatorKind::Unbiased)
                .unwrap();
            assert_eq!(a.label, b.label);
            assert_eq!(a.score.to_bits(), b.score.to_bits());
        }
    }

    #[test]
    fn file_round_trip_through_save_and_load() {
        let (model, _) = trained_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mach");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model, loaded);

        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model, "overwrite is clean");
    }

    #[test]
    fn writes_are_byte_deterministic() {
        let (model, _) = trained_model();
        assert_eq!(to_bytes(&model), to_bytes(&model));
    }

    #[test]
    fn truncation_names_the_interrupted_section() {
        let (model, _) = trained_model();
        let bytes = to_bytes(&model);
        let expectations = [
            (4usize, "magic"),
            (10, "version"),
            (40, "header"),
            (100, "label map"),
            (160, "offsets"),
            (200, "hash specs"),
            (400, "weights"),
            (bytes.len() - 10, "checksum"),
        ];
        for (len, section) in expectations {
            let err = read_model_bytes(&bytes[..len]).unwrap_err();
            match err {
                Error::Truncated { section: got } => {
                    assert_eq!(got, section, "cut at {len}");
                }
                other => panic!("cut at {len}: expected truncation, got {other}"),
            }
        }
    }

    #[test]
    fn corruption_anywhere_fails_the_checksum() {
        let (model, _) = trained_model();
        let bytes = to_bytes(&model);
        for at in [200usize, bytes.len() / 2, bytes.len() - 40] {
            let mut bad = bytes.clone();
            bad[at] ^= 0xff;
            assert!(
                matches!(read_model_bytes(&bad), Err(Error::ChecksumMismatch)),
                "flip at {at}"
            );
        }
    }

    #[test]
    fn foreign_magic_and_future_versions_are_rejected() {
        let (model, _) = trained_model();
        let bytes = to_bytes(&model);

        let bad_magic = patch(&bytes, 0, b"NOTMODEL");
        assert!(matches!(
            read_model_bytes(&bad_magic),
            Err(Error::MalformedModel(_))
        ));

        let mut future = patch(&bytes, 8, &2u32.to_le_bytes());
        refresh_checksum(&mut future);
        assert!(matches!(
            read_model_bytes(&future),
            Err(Error::UnsupportedVersion {
                found: 2,
                supported: FORMAT_VERSION
            })
        ));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let (model, _) = trained_model();
        let mut bytes = to_bytes(&model);
        bytes.extend_from_slice(&[0u8; 3]);
        assert!(matches!(
            read_model_bytes(&bytes),
            Err(Error::MalformedModel(_))
        ));
    }

    #[test]
    fn tampered_offsets_are_rejected_after_checksum_repair() {
        let (model, _) = trained_model();
        let bytes = to_bytes(&model);
        // The offsets table starts right after the label map.
        let offsets_at = (8 + 4 + 82 + 8 + 8 * 6) as usize;
        let mut bad = patch(&bytes, offsets_at, &999u64.to_le_bytes());
        refresh_checksum(&mut bad);
        match read_model_bytes(&bad) {
            Err(Error::MalformedModel(msg)) => assert!(msg.contains("offset"), "{msg}"),
            other => panic!("expected a malformed-model error, got {other:?}"),
        }
    }

    #[test]
    fn tampered_hash_constants_fail_spec_validation() {
        let (model, _) = trained_model();
        let bytes = to_bytes(&model);
        let specs_at = (8 + 4 + 82 + 8 + 8 * 6 + 8 * 4) as usize;
        // Zero the multiplier of the first spec: invalid for both kinds.
        let mut bad = patch(&bytes, specs_at + 1, &0u64.to_le_bytes());
        refresh_checksum(&mut bad);
        assert!(matches!(
            read_model_bytes(&bad),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn f32_models_widen_to_f64_on_the_way_through() {
        let features = vec![
            SparseVector::<f32>::from_pairs([(0u32, 5.0f32)]).unwrap(),
            SparseVector::<f32>::from_pairs([(1u32, 5.0f32)]).unwrap(),
        ];
        let ds = Dataset::new(features, vec![0, 1], LabelMap::identity(2), 2, 2).unwrap();
        let mut cfg = MachConfig::new(2, 2, 2);
        cfg.train.epochs = 2;
        let model = MachModel::<f32>::train(&ds, cfg).unwrap();
        let mut bytes = Vec::new();
        write_model(&model, &mut bytes).unwrap();
        let loaded = read_model_bytes(&bytes).unwrap();
        for (sub32, sub64) in model.sub_models().iter().zip(loaded.sub_models()) {
            for (&w32, &w64) in sub32.weights().iter().zip(sub64.weights()) {
                assert_eq!(w32 as f64, w64);
            }
        }
    }

    #[test]
    fn module_doc_hex_walkthrough_is_accurate() {
        let mut cfg = MachConfig::new(2, 2, 1);
        cfg.seed = 7;
        cfg.identity_hash = true;
        let spec = HashSpec::identity(2, 2).unwrap();
        let sub =
            SoftmaxModel::from_parts(vec![0.5f64, -0.5], vec![0.25, -0.25], 2, 1).unwrap();
        let model =
            MachModel::from_parts(cfg, vec![spec], vec![sub], LabelMap::identity(2)).unwrap();
        let mut bytes = Vec::new();
        write_model(&model, &mut bytes).unwrap();

        assert_eq!(bytes.len(), 0xc7 + 32);
        assert_eq!(&bytes[0..8], &MAGIC);
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[0x46..0x4e], &0.1f64.to_le_bytes(), "lr");
        assert_eq!(&bytes[0x4e..0x56], &0.9f64.to_le_bytes(), "decay");
        assert_eq!(&bytes[0x5e..0x66], &2u64.to_le_bytes(), "label count");
        assert_eq!(&bytes[0x76..0x7e], &0xa7u64.to_le_bytes(), "block offset");
        assert_eq!(bytes[0x7e], 0, "spec kind");
        assert_eq!(&bytes[0x8f..0x97], &((1u64 << 61) - 1).to_le_bytes(), "p");
        assert_eq!(&bytes[0xa7..0xaf], &0.5f64.to_le_bytes(), "weight 0");
        assert_eq!(&bytes[0xbf..0xc7], &(-0.25f64).to_le_bytes(), "bias 1");
        assert_eq!(&bytes[0xc7..0xcb], &[0x97, 0xe3, 0xca, 0x35], "digest head");
    }

    #[test]
    fn missing_parent_directory_is_an_io_error() {
        let (model, _) = trained_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("no").join("such").join("dir").join("m.mach");
        assert!(matches!(save_model(&model, &path), Err(Error::Io(_))));
    }
}
