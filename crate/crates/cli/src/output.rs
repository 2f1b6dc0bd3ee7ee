use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.txt";

/// Output directory owned by one config; every file written through it is
/// listed in the manifest with its content digest.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    hash: String,
    files: BTreeMap<String, String>,
}

#[derive(Debug)]
pub enum OutputError {
    Mixed {
        dir: PathBuf,
        found: String,
        ours: String,
    },
    Unmanaged(PathBuf),
    Io(io::Error),
}

impl std::fmt::Display for OutputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OutputError::Mixed { dir, found, ours } => write!(
                f,
                "refusing to mix outputs: {} holds results of config {found}, this config hashes to {ours}",
                dir.display()
            ),
            OutputError::Unmanaged(dir) => write!(
                f,
                "refusing to write into {}: it is not empty and has no {MANIFEST}",
                dir.display()
            ),
            OutputError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for OutputError {}

impl From<io::Error> for OutputError {
    fn from(e: io::Error) -> Self {
        OutputError::Io(e)
    }
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

/// Config hash recorded in an existing manifest.
pub fn manifest_hash(root: &Path) -> io::Result<Option<String>> {
    let path = root.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("config "))
        .map(str::to_string))
}

impl OutputDir {
    pub fn open(root: &Path, hash: &str) -> Result<Self, OutputError> {
        fs::create_dir_all(root)?;
        let mut files = BTreeMap::new();
        match manifest_hash(root)? {
            Some(found) if found != hash => {
                return Err(OutputError::Mixed {
                    dir: root.to_path_buf(),
                    found,
                    ours: hash.to_string(),
                })
            }
            Some(_) => {
                let text = fs::read_to_string(root.join(MANIFEST))?;
                for line in text.lines().skip(1) {
                    if let Some(rest) = line.strip_prefix("file ") {
                        if let Some((d, name)) = rest.split_once(' ') {
                            files.insert(name.to_string(), d.to_string());
                        }
                    }
                }
            }
            None => {
                if fs::read_dir(root)?.next().is_some() {
                    return Err(OutputError::Unmanaged(root.to_path_buf()));
                }
            }
        }
        let dir = OutputDir {
            root: root.to_path_buf(),
            hash: hash.to_string(),
            files,
        };
        dir.save_manifest()?;
        Ok(dir)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.insert(rel.to_string(), digest(bytes));
        self.save_manifest()?;
        Ok(path)
    }

    /// CSV text with the config hash as its first line.
    pub fn write_csv(&mut self, rel: &str, body: &str) -> io::Result<PathBuf> {
        let text = format!("{}\n{body}", krflow::io::hash_line(&self.hash));
        self.write(rel, text.as_bytes())
    }

    fn save_manifest(&self) -> io::Result<()> {
        let mut text = format!("config {}\n", self.hash);
        for (name, d) in &self.files {
            text.push_str(&format!("file {d} {name}\n"));
        }
        fs::write(self.root.join(MANIFEST), text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_is_enforced() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("out");
        let mut a = OutputDir::open(&root, "aaaa").unwrap();
        a.write_csv("x.csv", "a,b\n1,2\n").unwrap();
        let text = fs::read_to_string(root.join("x.csv")).unwrap();
        assert!(text.starts_with("# config aaaa\n"));
        let again = OutputDir::open(&root, "aaaa").unwrap();
        assert_eq!(again.files.len(), 1);
        assert!(matches!(
            OutputDir::open(&root, "bbbb"),
            Err(OutputError::Mixed { .. })
        ));
        let stray = tmp.path().join("stray");
        fs::create_dir_all(&stray).unwrap();
        fs::write(stray.join("notes.txt"), "hi").unwrap();
        assert!(matches!(
            OutputDir::open(&stray, "aaaa"),
            Err(OutputError::Unmanaged(_))
        ));
    }
}
