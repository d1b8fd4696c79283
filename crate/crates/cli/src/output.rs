use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

/// Files written as `<name>.partial` and renamed together on [`Staged::commit`].
#[derive(Debug)]
pub struct Staged {
    dir: PathBuf,
    pending: Vec<(PathBuf, PathBuf)>,
}

impl Staged {
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("{}: cannot create output directory", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            pending: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let target = self.dir.join(name);
        let partial = self.dir.join(format!("{name}.partial"));
        fs::write(&partial, bytes).with_context(|| format!("{}: write failed", partial.display()))?;
        self.pending.push((partial, target));
        Ok(())
    }

    pub fn commit(self) -> anyhow::Result<Vec<PathBuf>> {
        let mut done = Vec::with_capacity(self.pending.len());
        for (partial, target) in self.pending {
            fs::rename(&partial, &target).with_context(|| format!("{}: rename failed", target.display()))?;
            done.push(target);
        }
        Ok(done)
    }
}
