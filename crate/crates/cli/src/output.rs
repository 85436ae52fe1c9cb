//! Writing results: JSON documents and CSV tables, both tagged with the schema
//! version and a provenance block.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;

use crate::config::{Command, ExperimentConfig, Format};
use crate::error::CliResult;

/// Bumped whenever a column or field changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config_sha256: String,
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    schema_version: u32,
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

/// Where and how a command writes its results.
pub struct Sink {
    pub provenance: Provenance,
    pub format: Format,
    pub dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(cfg: &ExperimentConfig, cmd: Command) -> CliResult<Self> {
        Ok(Self {
            provenance: Provenance {
                tool: "majority",
                version: env!("CARGO_PKG_VERSION"),
                command: cmd.name(),
                seed: cfg.seed(),
                config_sha256: cfg.hash(cmd)?,
            },
            format: cfg.format,
            dir: cfg.out.clone(),
            written: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(name);
        let file = File::create(&path)?;
        self.written.push(path);
        Ok(BufWriter::new(file))
    }

    /// Writes `{name}.json` holding `body`'s fields next to the schema version
    /// and provenance.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> CliResult<()> {
        let mut w = self.create(&format!("{name}.json"))?;
        let doc = Document {
            schema_version: SCHEMA_VERSION,
            provenance: &self.provenance,
            body,
        };
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// Opens `{name}.csv`. The table is preceded by `#` comment lines carrying
    /// the schema version, the provenance block and any `notes`.
    pub fn csv(&mut self, name: &str, notes: &[(&str, String)]) -> CliResult<csv::Writer<BufWriter<File>>> {
        Ok(csv::Writer::from_writer(self.csv_raw(name, notes)?))
    }

    /// Like [`Sink::csv`] but hands back the file after the comment lines.
    pub fn csv_raw(&mut self, name: &str, notes: &[(&str, String)]) -> CliResult<BufWriter<File>> {
        let mut w = self.create(&format!("{name}.csv"))?;
        writeln!(w, "# schema_version: {SCHEMA_VERSION}")?;
        writeln!(w, "# provenance: {}", serde_json::to_string(&self.provenance)?)?;
        for (key, value) in notes {
            writeln!(w, "# {key}: {value}")?;
        }
        Ok(w)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Formats an optional number for a hand-assembled CSV record.
pub fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn finish<W: Write>(mut w: csv::Writer<W>) -> CliResult<()> {
    w.flush()?;
    Ok(())
}

pub fn display(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join("\n")
}
