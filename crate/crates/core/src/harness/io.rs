use std::io::{Read, Write};
use std::path::Path;

use super::metrics::EpisodeRecord;
use super::Result;

pub const CSV_HEADER: [&str; 10] = [
    "seed",
    "condition",
    "model",
    "episode",
    "success",
    "steps",
    "habitual_steps",
    "planning_steps",
    "time_cost",
    "final_distance",
];

pub fn write_records_to<W: Write>(out: W, records: &[EpisodeRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_to_string(records: &[EpisodeRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_records_to(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn export_csv(records: &[EpisodeRecord], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write_records_to(std::fs::File::create(path)?, records)
}

pub fn read_records_from<R: Read>(input: R) -> Result<Vec<EpisodeRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(super::HarnessError::Config(format!(
            "unexpected csv header {header:?}"
        )));
    }
    r.deserialize().map(|row| Ok(row?)).collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<EpisodeRecord>> {
    read_records_from(std::fs::File::open(path)?)
}
