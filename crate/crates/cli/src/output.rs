//! Result files. Every file starts with a header block (tool, version,
//! command, seed, configuration, timestamp) followed by a data section that
//! depends only on the code version, configuration and seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

pub const TOOL: &str = "ust";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub timestamp: String,
}

impl Header {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Header {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            seed,
            config,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    /// Header as `# key: value` comment lines.
    pub fn comment_lines(&self) -> Vec<String> {
        vec![
            format!("tool: {}", self.tool),
            format!("version: {}", self.version),
            format!("command: {}", self.command),
            format!("seed: {}", self.seed),
            format!("config: {}", self.config),
            format!("timestamp: {}", self.timestamp),
        ]
    }
}

/// Writes the files of one command run into a directory.
pub struct OutputDir {
    dir: PathBuf,
    header: Header,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path, header: Header) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutputDir { dir: dir.to_path_buf(), header, written: Vec::new() })
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }

    fn finish(&mut self, name: &str, bytes: Vec<u8>) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        let mut f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        f.write_all(&bytes)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// JSON lines: the first line is `{"header": {...}}`, then one record per line.
    pub fn jsonl<T: Serialize>(&mut self, name: &str, records: &[T]) -> anyhow::Result<PathBuf> {
        let mut buf = Vec::new();
        serde_json::to_writer(&mut buf, &serde_json::json!({ "header": self.header }))?;
        buf.push(b'\n');
        for r in records {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        self.finish(name, buf)
    }

    /// CSV with the header block as leading `#` lines.
    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> anyhow::Result<PathBuf> {
        let mut buf = Vec::new();
        for line in self.header.comment_lines() {
            writeln!(buf, "# {line}")?;
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        self.finish(name, buf)
    }

    /// A file whose content already starts with its own header.
    pub fn raw(&mut self, name: &str, text: &str) -> anyhow::Result<PathBuf> {
        self.finish(name, text.as_bytes().to_vec())
    }

    /// Registers a file written by another routine (plots).
    pub fn register(&mut self, path: PathBuf) {
        self.written.push(path);
    }
}

/// The data section of an output file: everything after the header block.
pub fn data_section(text: &str) -> String {
    let mut lines = text.lines().peekable();
    if lines.peek().is_some_and(|l| l.starts_with("{\"header\"")) {
        lines.next();
    }
    lines
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: f64,
    }

    #[test]
    fn headers_precede_data_and_are_stripped() {
        let dir = tempfile::tempdir().unwrap();
        let header = Header::new("test", 7, serde_json::json!({"k": 1}));
        let mut out = OutputDir::create(dir.path(), header).unwrap();
        let rows = [Row { a: 1, b: 0.5 }, Row { a: 2, b: 1e-9 }];
        let j = fs::read_to_string(out.jsonl("x.jsonl", &rows).unwrap()).unwrap();
        let c = fs::read_to_string(out.csv("x.csv", &rows).unwrap()).unwrap();
        assert!(j.starts_with("{\"header\":{"));
        assert!(c.starts_with("# tool: ust\n# version: "));
        assert!(c.contains("# seed: 7\n"));
        assert_eq!(data_section(&j), "{\"a\":1,\"b\":0.5}\n{\"a\":2,\"b\":1e-9}\n");
        assert_eq!(data_section(&c), "a,b\n1,0.5\n2,1e-9\n");
        assert_eq!(out.written().len(), 2);
    }
}
