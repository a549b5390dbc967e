//! On-disk cache of theta coefficient blocks.
//!
//! One JSON file per `(Gram matrix, bound)`. A load is trusted only after the
//! stored checksum matches and one randomly chosen coefficient is recomputed;
//! anything else is reported on stderr, recomputed and overwritten. Writers
//! take an exclusive lock file and publish by atomic rename.

use heegner_core::ternary_qf::{TernaryError, TernaryForm};
use heegner_core::Execution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

const LOCK_WAIT: Duration = Duration::from_secs(10);

#[derive(Debug, Serialize, Deserialize)]
struct Block {
    gram: [[i64; 3]; 3],
    bound: u64,
    coeffs: Vec<u64>,
    checksum: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn checksum(gram: &[[i64; 3]; 3], bound: u64, coeffs: &[u64]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&(gram, bound, coeffs)).expect("plain data"));
    hex(&h.finalize())
}

/// What a lookup found on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Hit,
    Miss,
    Recomputed,
}

pub struct ThetaCache {
    dir: PathBuf,
}

impl ThetaCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, form: &TernaryForm, bound: u64) -> PathBuf {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&(form.gram(), bound)).expect("plain data"));
        let key = hex(&h.finalize());
        self.dir.join(format!("theta-{}.json", &key[..32]))
    }

    /// Coefficients `r(Q, n)` for `0 <= n <= bound`, through the cache.
    pub fn theta(
        &self,
        form: &TernaryForm,
        bound: u64,
        exec: Execution,
    ) -> Result<(Vec<u64>, Outcome), CacheError> {
        let path = self.path_for(form, bound);
        let outcome = match fs::read(&path) {
            Err(e) if e.kind() == io::ErrorKind::NotFound => Outcome::Miss,
            Err(e) => return Err(CacheError::Io(path, e)),
            Ok(bytes) => match verify(&bytes, form, bound) {
                Ok(coeffs) => return Ok((coeffs, Outcome::Hit)),
                Err(reason) => {
                    eprintln!("warning: theta cache {} rejected ({reason}); recomputing", path.display());
                    Outcome::Recomputed
                }
            },
        };
        let coeffs = form.theta_coeffs_with(bound, exec)?;
        self.store(&path, form, bound, &coeffs)?;
        Ok((coeffs, outcome))
    }

    fn store(&self, path: &Path, form: &TernaryForm, bound: u64, coeffs: &[u64]) -> Result<(), CacheError> {
        fs::create_dir_all(&self.dir).map_err(|e| CacheError::Io(self.dir.clone(), e))?;
        let Some(_lock) = Lock::acquire(&path.with_extension("lock"))? else {
            eprintln!("warning: theta cache {} is locked; result not stored", path.display());
            return Ok(());
        };
        let block = Block {
            gram: *form.gram(),
            bound,
            coeffs: coeffs.to_vec(),
            checksum: checksum(form.gram(), bound, coeffs),
        };
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let write = || -> io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&serde_json::to_vec(&block).expect("plain data"))?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            CacheError::Io(path.to_path_buf(), e)
        })
    }
}

fn verify(bytes: &[u8], form: &TernaryForm, bound: u64) -> Result<Vec<u64>, String> {
    let block: Block = serde_json::from_slice(bytes).map_err(|e| format!("unreadable: {e}"))?;
    if block.gram != *form.gram() || block.bound != bound {
        return Err("key mismatch".into());
    }
    if block.coeffs.len() as u64 != bound + 1 {
        return Err("wrong length".into());
    }
    if checksum(&block.gram, block.bound, &block.coeffs) != block.checksum {
        return Err("checksum mismatch".into());
    }
    let n = rand::thread_rng().gen_range(0..=bound);
    let fresh = form.rep_count(n).map_err(|e| e.to_string())?;
    if fresh != block.coeffs[n as usize] {
        return Err(format!("coefficient {n} is {} but recomputes to {fresh}", block.coeffs[n as usize]));
    }
    Ok(block.coeffs)
}

/// Exclusive lock held while the file exists.
struct Lock(PathBuf);

impl Lock {
    fn acquire(path: &Path) -> Result<Option<Self>, CacheError> {
        let start = Instant::now();
        loop {
            match OpenOptions::new().write(true).create_new(true).open(path) {
                Ok(_) => return Ok(Some(Lock(path.to_path_buf()))),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                    if start.elapsed() > LOCK_WAIT {
                        return Ok(None);
                    }
                    thread::sleep(Duration::from_millis(50));
                }
                Err(e) => return Err(CacheError::Io(path.to_path_buf(), e)),
            }
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache path {0} is not writable: {1}")]
    Io(PathBuf, io::Error),
    #[error(transparent)]
    Form(#[from] TernaryError),
}
