//! Plain-text tables and CSV for evaluation reports.

use std::fmt::Write as _;

use crate::metrics::{AccuracyRow, RocPoint, SeparabilityReport, StratificationTable};

fn pad_table(rows: &[Vec<String>], right_align_from: usize) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let fill = widths[c] - cell.chars().count();
                if c >= right_align_from {
                    format!("{}{cell}", " ".repeat(fill))
                } else {
                    format!("{cell}{}", " ".repeat(fill))
                }
            })
            .collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("-+-"));
            out.push('\n');
        }
    }
    out
}

/// Range, item count and one accuracy column per model, then an overall row.
pub fn render_stratification(table: &StratificationTable) -> String {
    let mut rows = vec![{
        let mut h = vec!["Range".to_owned(), "#Items".to_owned()];
        h.extend(table.models.iter().cloned());
        h
    }];
    let fmt_row = |r: &AccuracyRow| {
        let mut cells = vec![r.range.clone(), r.n_items.to_string()];
        cells.extend(table.models.iter().map(|m| match r.accuracy_by_model.get(m) {
            Some(Some(a)) => format!("{a:.3}"),
            _ => "-".to_owned(),
        }));
        cells
    };
    rows.extend(table.bins.iter().map(fmt_row));
    rows.push(fmt_row(&table.overall));
    pad_table(&rows, 1)
}

/// One row per method: `(C_median, G_median)` and `AUC / Δ`.
pub fn render_separability(rows: &[(String, &SeparabilityReport)]) -> String {
    let mut table = vec![vec![
        "Method".to_owned(),
        "(C_median, G_median)".to_owned(),
        "AUC / Δ".to_owned(),
        "#C / #G".to_owned(),
    ]];
    for (name, r) in rows {
        table.push(vec![
            name.clone(),
            format!("({:.3}, {:.3})", r.c_median, r.g_median),
            format!("{:.3} / {:.3}", r.auc, r.delta),
            format!("{} / {}", r.n_positive, r.n_negative),
        ]);
    }
    pad_table(&table, 1)
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in points {
        let threshold = p.threshold.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", p.fpr, p.tpr, threshold);
    }
    out
}
