use serde::{Deserialize, Serialize};

use crate::fitness::FitnessReport;

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    /// 1-based evaluation index.
    pub index: usize,
    pub params: Vec<f64>,
    pub report: FitnessReport,
    /// Whether the candidate became the annealing chain's current point.
    /// Always false for uniform random search.
    pub accepted: bool,
}

/// Archive as CSV:
/// `eval,param_1..param_k,raw_fa,raw_fm,combined,falsified,accepted`.
pub fn archive_csv(archive: &[ArchiveEntry], dim: usize) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["eval".to_string()];
    header.extend((1..=dim).map(|i| format!("param_{i}")));
    header.extend(["raw_fa", "raw_fm", "combined", "falsified", "accepted"].map(String::from));
    writer.write_record(&header).expect("in-memory write");
    for e in archive {
        let mut record = Vec::with_capacity(dim + 6);
        record.push(e.index.to_string());
        record.extend(e.params.iter().map(f64::to_string));
        record.push(e.report.raw_automatic.to_string());
        record.push(e.report.raw_manual.to_string());
        record.push(e.report.combined.to_string());
        record.push(e.report.falsified.to_string());
        record.push(e.accepted.to_string());
        writer.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("ascii output")
}
