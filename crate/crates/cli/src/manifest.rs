use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use forestseg::{Error, Result};

/// Record of one invocation, written as `key: value` lines to
/// `<first output>.manifest.txt` (or `<dir>/manifest.txt` for directories).
#[derive(Debug)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub parameters: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub duration: Duration,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, parameters: String) -> Self {
        RunManifest {
            subcommand,
            parameters,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            duration: Duration::ZERO,
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool: forestseg {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "subcommand: {}", self.subcommand);
        let argv: Vec<String> = std::env::args().collect();
        let _ = writeln!(s, "argv: {}", argv.join(" "));
        let _ = writeln!(s, "parameters: {}", self.parameters);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed: {seed}");
        }
        for p in &self.inputs {
            let _ = writeln!(s, "input: {}", p.display());
        }
        for p in &self.outputs {
            let _ = writeln!(s, "output: {}", p.display());
        }
        let _ = writeln!(s, "duration_s: {:.3}", self.duration.as_secs_f64());
        s
    }

    fn path(&self) -> Option<PathBuf> {
        let first = self.outputs.first()?;
        // Outputs inside a generated directory share one manifest.
        if matches!(self.subcommand, "synth" | "split") {
            return first.parent().map(|d| d.join("manifest.txt"));
        }
        let mut name = first.as_os_str().to_owned();
        name.push(".manifest.txt");
        Some(PathBuf::from(name))
    }

    pub fn write(&self) -> Result<()> {
        let Some(path) = self.path() else {
            return Ok(());
        };
        std::fs::write(&path, self.to_text()).map_err(|e| Error::Io { path, source: e })
    }
}
