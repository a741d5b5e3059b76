//! Report emission: analysis reports as JSON documents with CSV companions
//! for the gap series, rows sorted by (condition, witness, n).

use std::io::Write;
use std::path::Path;

use crate::analysis::AnalysisReport;
use crate::series::GapSeries;

pub fn report_json(report: &AnalysisReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn write_report(report: &AnalysisReport, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, report_json(report))
}

fn push_series(rows: &mut Vec<(String, String, usize, f64)>, witness: &str, series: &GapSeries) {
    for (i, &g) in series.gaps.iter().enumerate() {
        rows.push((series.label.to_string(), witness.to_string(), i + 1, g));
    }
}

/// The gap series of a report as CSV with columns
/// `condition,witness_id,n,gap`. Family-level series (marginal and full TV,
/// combined countable-base) carry an empty witness id.
pub fn report_csv(report: &AnalysisReport) -> String {
    let mut rows: Vec<(String, String, usize, f64)> = Vec::new();
    for entry in &report.series {
        push_series(&mut rows, &entry.witness, &entry.series);
    }
    push_series(&mut rows, "", &report.marginal_tv);
    push_series(&mut rows, "", &report.full_tv);
    if let Some(a) = &report.asskern {
        push_series(&mut rows, "", a);
    }
    for entry in &report.asskern_sets {
        push_series(&mut rows, &entry.witness, &entry.series);
    }
    rows.sort_by(|a, b| (&a.0, &a.1, a.2).cmp(&(&b.0, &b.1, b.2)));

    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["condition", "witness_id", "n", "gap"])
            .expect("csv header");
        for (condition, witness, n, gap) in rows {
            w.write_record([condition, witness, n.to_string(), format!("{gap}")])
                .expect("csv row");
        }
        w.flush().expect("csv flush");
    }
    String::from_utf8(out).expect("csv is utf-8")
}

pub fn write_csv(report: &AnalysisReport, path: &Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(report_csv(report).as_bytes())
}
