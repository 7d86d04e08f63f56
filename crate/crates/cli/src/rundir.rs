use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// An output directory that only appears under its final name once the
/// command has succeeded.
///
/// Files are written into a hidden `.NAME.partial` sibling; [`RunDir::commit`]
/// renames it. Dropping an uncommitted `RunDir` deletes the partial tree, so
/// a failed command leaves nothing behind.
#[derive(Debug)]
pub struct RunDir {
    partial: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl RunDir {
    /// Reserve `<out>/<command>-<timestamp>-seed<seed>`, adding a numeric
    /// suffix if a run with that name already exists.
    pub fn create(out: &Path, command: &str, seed: u64) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
        let base = format!("{command}-{stamp}-seed{seed}");
        let mut name = base.clone();
        let mut n = 1;
        loop {
            let target = out.join(&name);
            let partial = out.join(format!(".{name}.partial"));
            if !target.exists() && fs::create_dir(&partial).is_ok() {
                return Ok(Self { partial, target, committed: false });
            }
            n += 1;
            name = format!("{base}-{n}");
        }
    }

    /// Where files go while the command runs.
    pub fn path(&self) -> &Path {
        &self.partial
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.partial.join(name)
    }

    pub fn commit(mut self) -> Result<PathBuf> {
        fs::rename(&self.partial, &self.target)
            .with_context(|| format!("moving results to {}", self.target.display()))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.partial);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_and_abandon() {
        let tmp = tempfile::tempdir().unwrap();
        let a = RunDir::create(tmp.path(), "train", 4).unwrap();
        fs::write(a.file("x.csv"), "a\n").unwrap();
        let done = a.commit().unwrap();
        assert!(done.join("x.csv").exists());
        assert!(done.file_name().unwrap().to_str().unwrap().starts_with("train-"));

        let b = RunDir::create(tmp.path(), "train", 4).unwrap();
        fs::write(b.file("y.csv"), "b\n").unwrap();
        drop(b);
        let left: Vec<_> = fs::read_dir(tmp.path()).unwrap().collect();
        assert_eq!(left.len(), 1);
    }

    #[test]
    fn same_second_runs_get_distinct_names() {
        let tmp = tempfile::tempdir().unwrap();
        let a = RunDir::create(tmp.path(), "eval", 1).unwrap().commit().unwrap();
        let b = RunDir::create(tmp.path(), "eval", 1).unwrap().commit().unwrap();
        assert_ne!(a, b);
    }
}
