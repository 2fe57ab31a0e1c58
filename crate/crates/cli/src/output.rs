use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

/// Writes `<stem>.json` and `<stem>.csv` under the output directory.
pub struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Artifacts { dir: dir.to_path_buf() })
    }

    pub fn json<T: Serialize>(&self, stem: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(&format!("{stem}.json"), text.as_bytes())
    }

    pub fn csv(&self, stem: &str, text: &str) -> anyhow::Result<()> {
        self.write(&format!("{stem}.csv"), text.as_bytes())
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// A CSV line from already formatted fields.
pub fn csv_row<I: IntoIterator<Item = S>, S: AsRef<str>>(fields: I) -> String {
    let mut line = fields.into_iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}
