//! Pipeline stages over a work directory.
//!
//! Each stage reads its inputs, writes outputs atomically (temporary file,
//! then rename) and records a manifest with the config hash and the SHA-256
//! digests of every input and output. A lock file keeps concurrent stages
//! out of the same work directory.

mod config;
mod stages;

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{parse_pairs, PipelineConfig, System};
pub use stages::{
    run_all, run_build, run_evaluate, run_extract, run_significance, run_synth, run_train,
    Significance, StageOutcome, WorkFiles,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("work directory is locked by another stage ({}); remove the file if no stage is running", .0.display())]
    Locked(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Stage(String),
}

impl PipelineError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::MissingInput(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
        move |source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn stage(e: impl std::fmt::Display) -> PipelineError {
        PipelineError::Stage(e.to_string())
    }
}

/// Fails with [`PipelineError::MissingInput`] unless every path exists.
pub fn require_inputs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<(), PipelineError> {
    for p in paths {
        if !p.exists() {
            return Err(PipelineError::MissingInput(p.to_path_buf()));
        }
    }
    Ok(())
}

/// Exclusive lock on a work directory, released on drop.
#[derive(Debug)]
pub struct WorkDirLock {
    path: PathBuf,
}

impl WorkDirLock {
    pub const FILE_NAME: &'static str = ".hypersparse.lock";

    pub fn acquire(dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(PipelineError::io(dir))?;
        let path = dir.join(Self::FILE_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WorkDirLock { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(path)),
            Err(e) => Err(PipelineError::io(&path)(e)),
        }
    }
}

impl Drop for WorkDirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<(), PipelineError>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let mut tmp_name = path.file_name().expect("output paths name a file").to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut out = BufWriter::new(File::create(&tmp)?);
        write(&mut out)?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(PipelineError::io(path))
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String, PipelineError> {
    let mut file = File::open(path).map_err(PipelineError::io(path))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(PipelineError::io(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Run record: stage name, config hash and file digests.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    pub inputs: Vec<(PathBuf, String)>,
    pub outputs: Vec<(PathBuf, String)>,
}

impl Manifest {
    pub fn build(
        stage: &str,
        config: &PipelineConfig,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
    ) -> Result<Self, PipelineError> {
        let digest_all = |paths: &[PathBuf]| -> Result<Vec<(PathBuf, String)>, PipelineError> {
            paths.iter().map(|p| Ok((p.clone(), file_digest(p)?))).collect()
        };
        Ok(Manifest {
            stage: stage.to_string(),
            config_hash: config.hash(),
            inputs: digest_all(inputs)?,
            outputs: digest_all(outputs)?,
        })
    }

    pub fn write_to(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "stage={}", self.stage)?;
        writeln!(out, "config_hash={}", self.config_hash)?;
        for (p, d) in &self.inputs {
            writeln!(out, "input={d}\t{}", p.display())?;
        }
        for (p, d) in &self.outputs {
            writeln!(out, "output={d}\t{}", p.display())?;
        }
        Ok(())
    }

    pub fn path_in(dir: &Path, stage: &str) -> PathBuf {
        dir.join(format!("manifest.{stage}.txt"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let lock = WorkDirLock::acquire(dir.path()).unwrap();
        assert!(matches!(WorkDirLock::acquire(dir.path()), Err(PipelineError::Locked(_))));
        drop(lock);
        WorkDirLock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, |w| w.write_all(b"hello")).unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"hello");
        assert!(write_atomic(&path, |_| Err(io::Error::other("boom"))).is_err());
        assert_eq!(fs::read(&path).unwrap(), b"hello");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert_eq!(
            file_digest(&path).unwrap(),
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
    }

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::MissingInput("x".into()).exit_code(), 2);
        assert_eq!(PipelineError::Config(vec![]).exit_code(), 1);
    }
}
