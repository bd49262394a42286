//! Experiment runner for `crowdmean`: seeded sweeps, the worked-example
//! reproduction, the Lipman demonstration and file-driven checks.
//!
//! Every entry point is a pure function of its inputs and seed, so reruns
//! produce byte-identical documents.

pub mod config;
pub mod example1;
pub mod reports;
pub mod sweep;

pub use config::{ExperimentConfig, StructureSource};
pub use example1::{run_example1, Example1Report};
pub use reports::{run_assumptions, run_lipman, run_recover, LipmanReport, RecoveryReport};
pub use sweep::{run_sweep, sweep, SweepResult, TrialSetup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    /// Comma-delimited table with a header row.
    #[default]
    Csv,
    /// `key = value` lines.
    Kv,
}

impl Format {
    pub fn from_name(name: &str) -> Option<Format> {
        match name {
            "csv" => Some(Format::Csv),
            "kv" => Some(Format::Kv),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Kv => "txt",
        }
    }
}

/// String table rendered through the `csv` writer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for record in std::iter::once(&self.header).chain(&self.rows) {
            w.write_record(record).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flushing to memory")).expect("fields are UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_fields_with_commas() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x,y".into(), "1".into()]);
        assert_eq!(t.to_csv(), "a,b\n\"x,y\",1\n");
    }
}
