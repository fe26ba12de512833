//! Codebook container: an H x D matrix of codewords shared across modalities.
//!
//! File format (`.tocb`): magic "TOCB", version u32 = 1, H u32, D u32,
//! flags u32 (bit 0: rows are L2-normalized), then H*D little-endian f32
//! values row-major. Loading yields exactly the stored f32 values, so
//! save -> load -> save round-trips byte-for-byte.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::binfile;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{l2_norm, Tensor2};

pub const CODEBOOK_MAGIC: &[u8; 4] = b"TOCB";
pub const CODEBOOK_VERSION: u32 = 1;
const FLAG_NORMALIZED: u32 = 1;
const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Codebook {
    codes: Tensor2,
    normalized: bool,
}

impl Codebook {
    pub fn new(codes: Tensor2, normalized: bool) -> Result<Self> {
        if codes.rows() < 2 {
            return Err(Error::InvalidArgument(format!(
                "codebook: H = {} must be >= 2",
                codes.rows()
            )));
        }
        if codes.cols() < 1 {
            return Err(Error::InvalidArgument("codebook: D must be >= 1".into()));
        }
        if !codes.all_finite() {
            return Err(Error::NonFinite("codebook entries".into()));
        }
        if normalized {
            for i in 0..codes.rows() {
                let norm = l2_norm(codes.row(i));
                if (norm - 1.0).abs() > UNIT_NORM_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "codebook: normalized flag set but row {i} has norm {norm}"
                    )));
                }
            }
        }
        Ok(Codebook { codes, normalized })
    }

    /// Rows drawn i.i.d. from Normal(0, 1/D).
    pub fn init_random(h: usize, d: usize, rng: &mut Rng) -> Result<Self> {
        let scale = 1.0 / (d as f64).sqrt();
        let mut codes = Tensor2::zeros(h, d);
        for v in codes.as_mut_slice() {
            *v = rng.normal() * scale;
        }
        Codebook::new(codes, false)
    }

    pub fn size(&self) -> usize {
        self.codes.rows()
    }

    pub fn dim(&self) -> usize {
        self.codes.cols()
    }

    pub fn codes(&self) -> &Tensor2 {
        &self.codes
    }

    pub fn codes_mut(&mut self) -> &mut Tensor2 {
        &mut self.codes
    }

    pub fn code(&self, i: usize) -> &[f64] {
        self.codes.row(i)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Returns a codebook whose rows are scaled to unit L2 norm; directions
    /// are preserved. Fails on a zero-norm row, naming its index.
    pub fn l2_normalized(&self) -> Result<Codebook> {
        let mut codes = self.codes.clone();
        for i in 0..codes.rows() {
            let norm = l2_norm(codes.row(i));
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::ZeroNorm {
                    row: i,
                    context: "codebook: cannot L2-normalize".into(),
                });
            }
            for v in codes.row_mut(i) {
                *v /= norm;
            }
        }
        Codebook::new(codes, true)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        binfile::write_magic(&mut w, CODEBOOK_MAGIC)?;
        binfile::write_u32(&mut w, CODEBOOK_VERSION)?;
        binfile::write_u32(&mut w, self.size() as u32)?;
        binfile::write_u32(&mut w, self.dim() as u32)?;
        binfile::write_u32(&mut w, if self.normalized { FLAG_NORMALIZED } else { 0 })?;
        binfile::write_f32_slice(&mut w, self.codes.as_slice())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Codebook> {
        let mut r = BufReader::new(File::open(path)?);
        binfile::expect_magic(&mut r, CODEBOOK_MAGIC, "codebook")?;
        let version = binfile::read_u32(&mut r, "codebook")?;
        if version != CODEBOOK_VERSION {
            return Err(Error::Format(format!(
                "codebook: unsupported version {version}"
            )));
        }
        let h = binfile::read_u32(&mut r, "codebook")? as usize;
        let d = binfile::read_u32(&mut r, "codebook")? as usize;
        let flags = binfile::read_u32(&mut r, "codebook")?;
        let codes = binfile::read_f32_tensor(&mut r, h, d, "codebook")?;
        Codebook::new(codes, flags & FLAG_NORMALIZED != 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "fcid-cb-test-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn normalize_three_four_five() {
        let cb = Codebook::new(
            Tensor2::from_rows(&[vec![3.0, 4.0], vec![1.0, 0.0]]).unwrap(),
            false,
        )
        .unwrap();
        let n = cb.l2_normalized().unwrap();
        assert!((n.code(0)[0] - 0.6).abs() < 1e-15);
        assert!((n.code(0)[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn normalize_is_idempotent() {
        let mut rng = Rng::new(8);
        let cb = Codebook::init_random(6, 4, &mut rng).unwrap();
        let once = cb.l2_normalized().unwrap();
        let twice = once.l2_normalized().unwrap();
        for i in 0..once.size() {
            for (a, b) in once.code(i).iter().zip(twice.code(i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_zero_row_errors_with_index() {
        let cb = Codebook::new(
            Tensor2::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap(),
            false,
        )
        .unwrap();
        match cb.l2_normalized() {
            Err(Error::ZeroNorm { row, .. }) => assert_eq!(row, 1),
            other => panic!("expected zero-norm error, got {other:?}"),
        }
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tmpdir();
        let path = dir.join("cb.tocb");
        let mut rng = Rng::new(3);
        let cb = Codebook::init_random(400, 256, &mut rng).unwrap();
        cb.save(&path).unwrap();
        let loaded = Codebook::load(&path).unwrap();
        // values round to f32 on save; a second save must reproduce the file
        let path2 = dir.join("cb2.tocb");
        loaded.save(&path2).unwrap();
        let a = std::fs::read(&path).unwrap();
        let b = std::fs::read(&path2).unwrap();
        assert_eq!(a, b);
        // and loaded values are exactly the f32 roundings of the originals
        for i in 0..cb.size() {
            for (orig, got) in cb.code(i).iter().zip(loaded.code(i)) {
                assert_eq!(*orig as f32, *got as f32);
                assert_eq!(*got, (*got as f32) as f64);
            }
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn corrupted_magic_is_a_format_error() {
        let dir = tmpdir();
        let path = dir.join("cb.tocb");
        let mut rng = Rng::new(3);
        Codebook::init_random(4, 3, &mut rng).unwrap().save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        match Codebook::load(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("magic")),
            other => panic!("expected format error, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn zero_h_header_is_rejected() {
        let dir = tmpdir();
        let path = dir.join("cb.tocb");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"TOCB");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes()); // H = 0
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            Codebook::load(&path),
            Err(Error::InvalidArgument(_))
        ));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn truncated_payload_is_a_format_error() {
        let dir = tmpdir();
        let path = dir.join("cb.tocb");
        let mut rng = Rng::new(4);
        Codebook::init_random(8, 8, &mut rng).unwrap().save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(Codebook::load(&path), Err(Error::Format(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
