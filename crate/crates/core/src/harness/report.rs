use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Retrieval,
    Entailment,
}

/// One row of a results table. Metrics that do not apply are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub label: String,
    pub mrr: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub sim_tt: Option<f64>,
    pub sim_it: Option<f64>,
    pub bleu: Option<f64>,
    pub meteor: Option<f64>,
}

impl MetricRow {
    pub fn labelled(label: impl Into<String>) -> Self {
        MetricRow {
            label: label.into(),
            ..Default::default()
        }
    }

    fn values(&self) -> [Option<f64>; 9] {
        [
            self.mrr,
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.sim_tt,
            self.sim_it,
            self.bleu,
            self.meteor,
        ]
    }

    fn from_values(label: String, v: [Option<f64>; 9]) -> Self {
        MetricRow {
            label,
            mrr: v[0],
            accuracy: v[1],
            precision: v[2],
            recall: v[3],
            f1: v[4],
            sim_tt: v[5],
            sim_it: v[6],
            bleu: v[7],
            meteor: v[8],
        }
    }

    /// `self - base` wherever both are present.
    pub fn minus(&self, base: &MetricRow, label: impl Into<String>) -> MetricRow {
        let a = self.values();
        let b = base.values();
        let mut out = [None; 9];
        for i in 0..9 {
            if let (Some(x), Some(y)) = (a[i], b[i]) {
                out[i] = Some(x - y);
            }
        }
        MetricRow::from_values(label.into(), out)
    }
}

/// Published full-scale results for side-by-side display. These come from
/// models and datasets this crate does not ship, so they are not expected to
/// be reproduced by fixture runs.
pub fn published_reference(task: Task) -> Vec<MetricRow> {
    match task {
        Task::Retrieval => vec![
            MetricRow {
                mrr: Some(0.632),
                sim_tt: Some(1.000),
                sim_it: Some(0.294),
                bleu: Some(1.000),
                meteor: Some(1.000),
                ..MetricRow::labelled("published: original")
            },
            MetricRow {
                mrr: Some(0.536),
                sim_tt: Some(0.924),
                sim_it: Some(0.283),
                bleu: Some(0.623),
                meteor: Some(0.969),
                ..MetricRow::labelled("published: xmai")
            },
        ],
        Task::Entailment => vec![
            MetricRow {
                accuracy: Some(0.792),
                precision: Some(0.790),
                recall: Some(0.792),
                f1: Some(0.791),
                sim_tt: Some(1.000),
                sim_it: Some(0.246),
                bleu: Some(1.000),
                meteor: Some(0.998),
                ..MetricRow::labelled("published: original")
            },
            MetricRow {
                accuracy: Some(0.643),
                precision: Some(0.682),
                recall: Some(0.643),
                f1: Some(0.625),
                sim_tt: Some(0.873),
                sim_it: Some(0.235),
                bleu: Some(0.621),
                meteor: Some(0.963),
                ..MetricRow::labelled("published: xmai")
            },
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub method: String,
    pub examples: usize,
    pub original: MetricRow,
    pub augmented: MetricRow,
    pub delta: MetricRow,
    pub mean_insertions: Option<f64>,
    pub std_insertions: Option<f64>,
    /// Retrieval: share of queries ranked strictly worse after augmentation.
    /// Entailment: share of entailment-gold examples whose prediction turned
    /// into contradiction.
    pub axiom_violation_rate: f64,
    pub reference: Vec<MetricRow>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned plain-text table, one row per approach.
    pub fn render_table(&self) -> String {
        type Getter = fn(&MetricRow) -> Option<f64>;
        let columns: Vec<(&str, Getter)> = match self.task {
            Task::Retrieval => vec![
                ("MRR", |r| r.mrr),
                ("Sim_T-T'", |r| r.sim_tt),
                ("Sim_I-T'", |r| r.sim_it),
                ("BLEU", |r| r.bleu),
                ("METEOR", |r| r.meteor),
            ],
            Task::Entailment => vec![
                ("Acc.", |r| r.accuracy),
                ("Precision", |r| r.precision),
                ("Recall", |r| r.recall),
                ("F1", |r| r.f1),
                ("Sim_T-T'", |r| r.sim_tt),
                ("Sim_I-T'", |r| r.sim_it),
                ("BLEU", |r| r.bleu),
                ("METEOR", |r| r.meteor),
            ],
        };
        let mut rows: Vec<&MetricRow> = vec![&self.original, &self.augmented, &self.delta];
        rows.extend(self.reference.iter());

        let mut cells: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["Approach".to_string()];
        header.extend(columns.iter().map(|(name, _)| name.to_string()));
        cells.push(header);
        for row in rows {
            let mut line = vec![row.label.clone()];
            for (_, get) in &columns {
                line.push(get(row).map_or_else(|| "-".to_string(), |v| format!("{v:.3}")));
            }
            cells.push(line);
        }

        let widths: Vec<usize> = (0..cells[0].len())
            .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in cells.iter().enumerate() {
            let mut line = format!("{:<w$}", row[0], w = widths[0]);
            for (c, cell) in row.iter().enumerate().skip(1) {
                line.push_str(&format!("  {:>w$}", cell, w = widths[c]));
            }
            out.push_str(line.trim_end());
            out.push('\n');
            if i == 0 {
                out.push_str(&"-".repeat(line.trim_end().chars().count()));
                out.push('\n');
            }
        }
        if let (Some(m), Some(s)) = (self.mean_insertions, self.std_insertions) {
            out.push_str(&format!("insertions per text: {m:.3} (± {s:.3})\n"));
        }
        out.push_str(&format!("axiom violation rate: {:.3}\n", self.axiom_violation_rate));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_only_where_both_present() {
        let a = MetricRow {
            mrr: Some(0.5),
            bleu: Some(0.9),
            ..MetricRow::labelled("a")
        };
        let b = MetricRow {
            mrr: Some(0.75),
            ..MetricRow::labelled("b")
        };
        let d = a.minus(&b, "delta");
        assert_eq!(d.mrr, Some(-0.25));
        assert_eq!(d.bleu, None);
    }

    #[test]
    fn table_is_aligned() {
        let report = EvalReport {
            task: Task::Retrieval,
            method: "xmai".into(),
            examples: 1,
            original: MetricRow {
                mrr: Some(1.0),
                ..MetricRow::labelled("original")
            },
            augmented: MetricRow {
                mrr: Some(0.5),
                ..MetricRow::labelled("xmai")
            },
            delta: MetricRow::labelled("delta"),
            mean_insertions: Some(1.0),
            std_insertions: Some(0.0),
            axiom_violation_rate: 0.0,
            reference: published_reference(Task::Retrieval),
        };
        let table = report.render_table();
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[0].starts_with("Approach"));
        assert!(lines[2].contains("1.000"));
        assert!(table.contains("0.536"));
        let header_mrr = lines[0].find("MRR").unwrap() + 3;
        assert_eq!(&lines[2][header_mrr - 5..header_mrr], "1.000");
    }
}
