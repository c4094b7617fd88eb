use std::fmt;
use std::str::FromStr;

use serde::Serialize;

pub const COLUMNS: [&str; 6] = ["#", "Plan Validity", "Scan", "Approach Accuracy (%)", "P&P", "Time Frame"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    /// 1-based.
    pub index: usize,
    pub plan_validity: bool,
    /// The target tag was observed at some point in the trial.
    pub scan: bool,
    /// In [0, 100].
    pub approach_accuracy: f64,
    pub pick_place: bool,
    /// Mean virtual seconds per executed plan step.
    pub time_frame: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub plan_validity_pct: f64,
    pub scan_pct: f64,
    pub mean_accuracy: f64,
    pub pick_place_pct: f64,
    pub mean_time_frame: f64,
}

impl Summary {
    pub fn of(rows: &[TrialRecord]) -> Self {
        let n = rows.len().max(1) as f64;
        let pct = |f: fn(&TrialRecord) -> bool| 100.0 * rows.iter().filter(|r| f(r)).count() as f64 / n;
        Self {
            plan_validity_pct: pct(|r| r.plan_validity),
            scan_pct: pct(|r| r.scan),
            mean_accuracy: rows.iter().map(|r| r.approach_accuracy).sum::<f64>() / n,
            pick_place_pct: pct(|r| r.pick_place),
            mean_time_frame: rows.iter().map(|r| r.time_frame).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsTable {
    pub rows: Vec<TrialRecord>,
    pub summary: Summary,
}

impl MetricsTable {
    pub fn new(rows: Vec<TrialRecord>) -> Self {
        let summary = Summary::of(&rows);
        Self { rows, summary }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Plain,
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "plain" | "text" => Ok(TableFormat::Plain),
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(format!("unknown table format {other:?} (plain, csv, markdown)")),
        }
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableFormat::Plain => "plain",
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "markdown",
        })
    }
}

fn yes_no(b: bool) -> String {
    if b { "Yes" } else { "No" }.to_string()
}

fn percent(p: f64) -> String {
    if (p - p.round()).abs() < 1e-9 {
        format!("{p:.0}%")
    } else {
        format!("{p:.1}%")
    }
}

fn cells(table: &MetricsTable) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                yes_no(r.plan_validity),
                yes_no(r.scan),
                format!("{:.1}", r.approach_accuracy),
                yes_no(r.pick_place),
                format!("{:.2}", r.time_frame),
            ]
        })
        .collect();
    let s = &table.summary;
    out.push(vec![
        "Summary".into(),
        percent(s.plan_validity_pct),
        percent(s.scan_pct),
        format!("{:.1}", s.mean_accuracy),
        percent(s.pick_place_pct),
        format!("{:.2}", s.mean_time_frame),
    ]);
    out
}

/// Renders trial rows followed by the summary row.
pub fn emit_table(table: &MetricsTable, format: TableFormat) -> String {
    let body = cells(table);
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COLUMNS).expect("in-memory write");
            for row in &body {
                w.write_record(row).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
        }
        TableFormat::Markdown => {
            let line = |cols: &[String]| format!("| {} |\n", cols.join(" | "));
            let header: Vec<String> = COLUMNS.iter().map(|c| c.to_string()).collect();
            let mut s = line(&header);
            s.push_str(&line(&vec!["---".to_string(); COLUMNS.len()]));
            for row in &body {
                s.push_str(&line(row));
            }
            s
        }
        TableFormat::Plain => {
            let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
            for row in &body {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.len());
                }
            }
            let line = |cols: &[&str]| {
                let padded: Vec<String> = cols.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                format!("{}\n", padded.join("  ").trim_end())
            };
            let mut s = line(&COLUMNS);
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            s.push_str(&line(&rule.iter().map(String::as_str).collect::<Vec<_>>()));
            for row in &body {
                s.push_str(&line(&row.iter().map(String::as_str).collect::<Vec<_>>()));
            }
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: usize, acc: f64, pp: bool) -> TrialRecord {
        TrialRecord {
            index: i,
            plan_validity: true,
            scan: true,
            approach_accuracy: acc,
            pick_place: pp,
            time_frame: 1.25,
        }
    }

    #[test]
    fn summary_means() {
        let t = MetricsTable::new(vec![row(1, 80.0, true), row(2, 90.0, false)]);
        assert_eq!(t.summary.mean_accuracy, 85.0);
        assert_eq!(t.summary.pick_place_pct, 50.0);
    }

    #[test]
    fn csv_has_header_rows_and_summary() {
        let t = MetricsTable::new(vec![row(1, 87.1, true)]);
        let out = emit_table(&t, TableFormat::Csv);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "#,Plan Validity,Scan,Approach Accuracy (%),P&P,Time Frame");
        assert_eq!(lines[1], "1,Yes,Yes,87.1,Yes,1.25");
        assert!(lines[2].starts_with("Summary,100%,100%,87.1,100%"));
    }

    #[test]
    fn markdown_has_six_columns() {
        let t = MetricsTable::new(vec![row(1, 50.0, false)]);
        for l in emit_table(&t, TableFormat::Markdown).lines() {
            assert_eq!(l.matches('|').count(), 7, "{l}");
        }
    }

    #[test]
    fn plain_lists_every_row() {
        let t = MetricsTable::new(vec![row(1, 50.0, false), row(2, 60.0, true)]);
        let out = emit_table(&t, TableFormat::Plain);
        assert_eq!(out.lines().count(), 5);
        assert!(out.starts_with("#"));
    }

    #[test]
    fn rates_round_to_one_decimal() {
        // Eight of ten rows succeed: the true rate is 80%.
        let rows: Vec<_> = (1..=10).map(|i| row(i, 87.0, i > 2)).collect();
        assert_eq!(percent(Summary::of(&rows).pick_place_pct), "80%");
        assert_eq!(percent(100.0 / 3.0), "33.3%");
    }
}
