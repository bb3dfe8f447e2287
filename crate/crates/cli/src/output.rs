//! Output directory handling: atomic writes, stamped CSV/JSON, run log.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct OutputDir {
    pub root: PathBuf,
    pub config_hash: String,
}

/// Formats a float for CSV: scientific notation, 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

impl OutputDir {
    pub fn create(root: &Path, config_hash: String) -> anyhow::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            config_hash,
        })
    }

    /// Writes to a sibling temporary file, then renames over `name`.
    pub fn write_atomic(&self, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &target)?;
        Ok(target)
    }

    /// CSV with a `#` stamp line, then the header, then rows.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<PathBuf> {
        let mut buf = format!("# selfrepel {VERSION} config_hash={}\n", self.config_hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        self.write_atomic(name, &buf)
    }

    /// Pretty JSON wrapped with `version` and `config_hash`.
    pub fn write_json<T: Serialize>(&self, name: &str, body: &T) -> anyhow::Result<PathBuf> {
        #[derive(Serialize)]
        struct Stamped<'a, T> {
            version: &'a str,
            config_hash: &'a str,
            #[serde(flatten)]
            body: &'a T,
        }
        let mut text = serde_json::to_string_pretty(&Stamped {
            version: VERSION,
            config_hash: &self.config_hash,
            body,
        })?;
        text.push('\n');
        self.write_atomic(name, text.as_bytes())
    }

    /// Appends a timestamped line to `run.log`, the only file that carries time.
    pub fn log(&self, line: &str) -> anyhow::Result<()> {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut f = fs::OpenOptions::new().create(true).append(true).open(self.root.join("run.log"))?;
        writeln!(f, "{secs} config_hash={} {line}", self.config_hash)?;
        Ok(())
    }
}
