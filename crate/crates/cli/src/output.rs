use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::CliError;

/// Writes data files into one output directory, stamping each with provenance.
pub(crate) struct Outputs {
    dir: PathBuf,
    format: OutputFormat,
    csv_header: String,
    provenance: Value,
    pub(crate) files: Vec<String>,
}

impl Outputs {
    pub(crate) fn new(dir: &Path, config: &ExperimentConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let hash = config.hash();
        let mut document = config.to_document();
        document.as_object_mut().expect("root").remove("output");
        document["ensemble"].as_object_mut().expect("section").remove("workers");
        let csv_header = format!(
            "# gschro {} experiment={} config_hash={} master_seed={}\n",
            env!("CARGO_PKG_VERSION"),
            config.experiment,
            hash,
            config.ensemble.master_seed
        );
        let provenance = json!({
            "tool": "gschro",
            "version": env!("CARGO_PKG_VERSION"),
            "experiment": config.experiment.as_str(),
            "config_hash": hash,
            "config": document,
        });
        Ok(Self { dir: dir.to_path_buf(), format: config.output.format, csv_header, provenance, files: Vec::new() })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// CSV body (header row first) prefixed by a provenance comment line.
    pub(crate) fn csv(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        if self.format.csv() {
            let text = format!("{}{body}", self.csv_header);
            self.write(name, &text)?;
        }
        Ok(())
    }

    /// JSON envelope `{provenance, result}`.
    pub(crate) fn json(&mut self, name: &str, result: Value) -> Result<(), CliError> {
        if self.format.json() {
            let doc = json!({ "provenance": self.provenance, "result": result });
            let text = serde_json::to_string_pretty(&doc).expect("serializable") + "\n";
            self.write(name, &text)?;
        }
        Ok(())
    }

    /// A file in its own format, written regardless of the output format.
    pub(crate) fn raw(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        self.write(name, body)
    }

    pub(crate) fn manifest(&mut self, manifest: &Value) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(manifest).expect("serializable") + "\n";
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Format rows of displayable cells as CSV lines.
pub(crate) fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
