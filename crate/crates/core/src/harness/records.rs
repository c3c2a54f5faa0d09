use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::TrialRecord;
use crate::error::Result;

pub const CSV_HEADER: [&str; 7] = [
    "algorithm",
    "n",
    "trial_index",
    "seed",
    "queries",
    "truncated",
    "wall_time_ms",
];

fn sort_rows(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| {
        (a.n, a.trial_index, a.algorithm.id()).cmp(&(b.n, b.trial_index, b.algorithm.id()))
    });
}

/// CSV writer that emits the header on creation and flushes after every batch.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl CsvSink<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(inner);
        writer.write_record(CSV_HEADER)?;
        writer.flush()?;
        Ok(Self { writer })
    }

    /// Writes `batch` sorted by `(n, trial_index)` and flushes.
    pub fn write_all(&mut self, batch: &[TrialRecord]) -> Result<()> {
        let mut rows = batch.to_vec();
        sort_rows(&mut rows);
        for r in &rows {
            self.writer.serialize(r)?;
        }
        self.writer.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.writer
            .into_inner()
            .map_err(|e| crate::error::Error::Io(e.to_string()))
    }
}

/// Writes all records, sorted by `(n, trial_index)`, to `path`.
pub fn emit_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut sink = CsvSink::create(path)?;
    sink.write_all(records)?;
    sink.into_inner()?.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(crate::error::Error::Io(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
