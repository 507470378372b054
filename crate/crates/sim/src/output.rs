//! `series.csv` and `report.txt`.

use std::io::{self, Write};
use std::path::Path;

use dirac_core::EnergyReport;

/// Shortest digits that parse back to the same `f64`; scientific notation
/// for very small or very large magnitudes.
pub fn format_value(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Header `t,<names>`, one row per output time.
pub fn write_series<W: Write>(report: &EnergyReport, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![String::from("t")];
    header.extend(report.series.iter().map(|s| s.name.clone()));
    w.write_record(&header)?;
    for &t in &report.rows {
        let mut row = vec![format_value(t)];
        row.extend(
            report
                .series
                .iter()
                .map(|s| s.value_at(t).map(format_value).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn render_report(report: &EnergyReport) -> String {
    format!("diracsim report\n\n{report}")
}

pub fn write_outputs(report: &EnergyReport, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let file = std::fs::File::create(dir.join("series.csv"))?;
    write_series(report, io::BufWriter::new(file))?;
    std::fs::write(dir.join("report.txt"), render_report(report))
}
