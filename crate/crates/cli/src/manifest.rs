use std::fs;
use std::path::Path;

/// `key = value` record of a run, written next to its outputs so that any
/// published number can be regenerated by one command.
#[derive(Debug, Default)]
pub struct Manifest {
    command: String,
    entries: Vec<(String, String)>,
    outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            ..Default::default()
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn output(&mut self, file: &str) {
        self.outputs.push(file.to_string());
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "artifact = cosparse {}\ncommand = {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command
        );
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        if !self.outputs.is_empty() {
            out.push_str(&format!("outputs = {}\n", self.outputs.join(",")));
        }
        out
    }

    /// Writes `manifest-<command>.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::write(dir.join(format!("manifest-{}.txt", self.command)), self.render())
    }
}
