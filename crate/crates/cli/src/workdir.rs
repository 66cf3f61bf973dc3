//! Versioned working-directory layout.
//!
//! `prepare` stamps the directory with a layout tag; every later command
//! verifies the tag so stale artifacts are rejected rather than misread. A
//! lockfile gives each running command exclusive ownership.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

const LAYOUT_TAG: &str = "kgboost-workdir-v1";

pub struct Workdir {
    root: PathBuf,
}

impl Workdir {
    /// Creates (or re-stamps) the directory; used by `prepare`.
    pub fn create(root: &Path) -> Result<Workdir> {
        std::fs::create_dir_all(root)
            .with_context(|| format!("cannot create workdir {}", root.display()))?;
        let tag_path = root.join("LAYOUT");
        if tag_path.exists() {
            Self::check_tag(&tag_path)?;
        } else {
            std::fs::write(&tag_path, format!("{}\n", LAYOUT_TAG))
                .with_context(|| format!("cannot stamp {}", tag_path.display()))?;
        }
        std::fs::create_dir_all(root.join("store"))?;
        std::fs::create_dir_all(root.join("classifiers"))?;
        Ok(Workdir { root: root.to_owned() })
    }

    /// Opens an existing directory; rejects unstamped or mismatched layouts.
    pub fn open(root: &Path) -> Result<Workdir> {
        let tag_path = root.join("LAYOUT");
        if !tag_path.exists() {
            bail!(
                "{} is not a kgboost workdir (missing LAYOUT; run `prepare` first)",
                root.display()
            );
        }
        Self::check_tag(&tag_path)?;
        Ok(Workdir { root: root.to_owned() })
    }

    fn check_tag(tag_path: &Path) -> Result<()> {
        let tag = std::fs::read_to_string(tag_path)?;
        if tag.trim() != LAYOUT_TAG {
            bail!(
                "workdir layout {:?} does not match {:?}; refusing to reuse stale artifacts",
                tag.trim(),
                LAYOUT_TAG
            );
        }
        Ok(())
    }

    /// Takes the run lock; released when the guard drops.
    pub fn lock(&self) -> Result<LockGuard> {
        let path = self.root.join("lock");
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => bail!(
                "workdir {} is locked by another run (delete {} if that run is dead)",
                self.root.display(),
                path.display()
            ),
            Err(e) => Err(e).with_context(|| format!("cannot lock {}", path.display())),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn store_dir(&self) -> PathBuf {
        self.root.join("store")
    }

    pub fn pair_sets(&self) -> PathBuf {
        self.root.join("pair_sets.txt")
    }

    pub fn augmented(&self) -> PathBuf {
        self.root.join("augmented.txt")
    }

    pub fn subrelations(&self) -> PathBuf {
        self.root.join("subrelations.txt")
    }

    pub fn profiles(&self) -> PathBuf {
        self.root.join("profiles.txt")
    }

    pub fn embedding(&self) -> PathBuf {
        self.root.join("embedding.bin")
    }

    pub fn embedding_checkpoint(&self) -> PathBuf {
        self.root.join("embedding.ckpt")
    }

    pub fn embedding_checkpoint_step(&self) -> PathBuf {
        self.root.join("embedding.ckpt.step")
    }

    pub fn classifiers_dir(&self) -> PathBuf {
        self.root.join("classifiers")
    }

    pub fn classifier(&self, rel: u32) -> PathBuf {
        self.classifiers_dir().join(format!("rel_{}.model", rel))
    }

    pub fn fallback_marker(&self, rel: u32) -> PathBuf {
        self.classifiers_dir().join(format!("rel_{}.fallback", rel))
    }
}

pub struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
