//! Run manifest: resolved config, input hashes, and seed, written alongside
//! every report so a run can be reproduced exactly. Contains no timestamps;
//! identical runs produce identical manifests.

use std::io::Read;
use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path)
        .with_context(|| format!("cannot hash {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

pub fn write_manifest(
    path: &Path,
    config: &RunConfig,
    ablations: &[String],
    extra_inputs: &[(&str, &Path)],
) -> Result<()> {
    let mut out = String::new();
    out.push_str("kgboost run manifest v1\n");
    out.push_str(&format!("seed {}\n", config.seed));
    out.push_str(&format!("deterministic {}\n", config.deterministic));
    if ablations.is_empty() {
        out.push_str("ablations none\n");
    } else {
        out.push_str(&format!("ablations {}\n", ablations.join(",")));
    }
    for (key, value) in config.snapshot() {
        out.push_str(&format!("config {} = {}\n", key, value));
    }
    let mut inputs: Vec<(&str, &Path)> = vec![
        ("train", config.train_path.as_path()),
        ("valid", config.valid_path.as_path()),
        ("test", config.test_path.as_path()),
    ];
    inputs.extend_from_slice(extra_inputs);
    for (name, input) in inputs {
        out.push_str(&format!("sha256 {} {} {}\n", sha256_file(input)?, name, input.display()));
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
