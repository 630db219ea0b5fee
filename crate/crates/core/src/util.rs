//! Small shared helpers: seed derivation, line-delimited JSON I/O, hashing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives an independent task seed from a master seed and a list of tags.
///
/// Counter-based: the result depends only on `(master, tags)`, so adding or
/// removing other tasks never changes this task's stream.
pub fn derive_seed(master: u64, tags: &[&str]) -> u64 {
    let mut s = splitmix64(master);
    for tag in tags {
        s = splitmix64(s ^ fnv1a(tag.as_bytes()));
    }
    s
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn task_rng(master: u64, tags: &[&str]) -> Rng {
    rng_from_seed(derive_seed(master, tags))
}

/// Reads a JSONL file. Blank lines are skipped; line numbers in errors are 1-based.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T, I>(path: &Path, records: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(|e| Error::invalid(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Incremental SHA-256 over floats and strings, used to fingerprint fitted state.
#[derive(Default, Clone)]
pub struct StateHasher {
    inner: Sha256,
}

impl StateHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn floats(&mut self, xs: &[f64]) -> &mut Self {
        self.inner.update((xs.len() as u64).to_le_bytes());
        for x in xs {
            self.inner.update(x.to_bits().to_le_bytes());
        }
        self
    }

    pub fn indices(&mut self, xs: &[usize]) -> &mut Self {
        self.inner.update((xs.len() as u64).to_le_bytes());
        for &x in xs {
            self.inner.update((x as u64).to_le_bytes());
        }
        self
    }

    pub fn text(&mut self, s: &str) -> &mut Self {
        self.inner.update((s.len() as u64).to_le_bytes());
        self.inner.update(s.as_bytes());
        self
    }

    pub fn finish_hex(&self) -> String {
        let digest = self.inner.clone().finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_depend_on_tags_only() {
        let a = derive_seed(7, &["cnn", "word", "0"]);
        assert_eq!(a, derive_seed(7, &["cnn", "word", "0"]));
        assert_ne!(a, derive_seed(7, &["cnn", "word", "1"]));
        assert_ne!(a, derive_seed(8, &["cnn", "word", "0"]));
    }

    #[test]
    fn sample_sd_matches_hand_value() {
        // values 1..5: mean 3, ss 10, var 2.5
        let sd = sample_sd(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!((sd - 2.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(sample_sd(&[4.0]), 0.0);
    }
}
