//! Aggregated experiment output and its CSV form.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// One aggregated measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// Label of the curve the row belongs to, e.g. `dist=UUU,K=4`.
    pub series: String,
    /// Sweep variable: model degree, quadrature degree, number of rotations
    /// or perturbation strength.
    pub x: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            config_hash,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub experiment: String,
    /// Name of the sweep variable written as the `x` column header.
    pub x_label: String,
    pub provenance: Provenance,
    rows: Vec<Row>,
}

/// Mean and sample standard deviation; the deviation is zero for a single
/// value. Non-finite inputs propagate.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl ResultTable {
    pub fn new(experiment: impl Into<String>, x_label: impl Into<String>, provenance: Provenance) -> Self {
        Self {
            experiment: experiment.into(),
            x_label: x_label.into(),
            provenance,
            rows: Vec::new(),
        }
    }

    /// Adds a row aggregating per-trial values.
    pub fn push(&mut self, series: impl Into<String>, x: f64, metric: impl Into<String>, values: &[f64]) {
        let (mean, std) = mean_std(values);
        self.rows.push(Row {
            series: series.into(),
            x,
            metric: metric.into(),
            mean,
            std,
            trials: values.len(),
        });
        self.sort();
    }

    fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.series
                .cmp(&b.series)
                .then(a.metric.cmp(&b.metric))
                .then(a.x.partial_cmp(&b.x).unwrap_or(Ordering::Equal))
        });
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows of one series and metric, in increasing `x`.
    pub fn select(&self, series: &str, metric: &str) -> Vec<&Row> {
        self.rows.iter().filter(|r| r.series == series && r.metric == metric).collect()
    }

    pub fn get(&self, series: &str, metric: &str, x: f64) -> Option<&Row> {
        self.rows.iter().find(|r| r.series == series && r.metric == metric && r.x == x)
    }

    /// Distinct `(series, metric)` pairs in table order.
    pub fn curves(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|(s, m)| *s == r.series && *m == r.metric) {
                out.push((r.series.clone(), r.metric.clone()));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let p = &self.provenance;
        writeln!(s, "# experiment={}", self.experiment).unwrap();
        writeln!(s, "# config_sha256={}", p.config_hash).unwrap();
        writeln!(s, "# seed={}", p.seed).unwrap();
        writeln!(s, "# version={}", p.version).unwrap();
        writeln!(s, "series,{},metric,mean,std,trials", self.x_label).unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{:.12e},{:.12e},{}",
                quote(&r.series),
                r.x,
                r.metric,
                r.mean,
                r.std,
                r.trials
            )
            .unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_csv())
    }

    /// Parses the output of [`ResultTable::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut experiment = String::new();
        let mut prov = Provenance::new(String::new(), 0);
        let mut x_label = None;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(meta) = line.strip_prefix("# ") {
                let (k, v) = meta.split_once('=').ok_or(format!("line {}: bad metadata", i + 1))?;
                match k {
                    "experiment" => experiment = v.to_string(),
                    "config_sha256" => prov.config_hash = v.to_string(),
                    "seed" => prov.seed = v.parse().map_err(|e| format!("line {}: {e}", i + 1))?,
                    "version" => prov.version = v.to_string(),
                    _ => {}
                }
                continue;
            }
            if x_label.is_none() {
                let cols: Vec<&str> = line.split(',').collect();
                x_label = Some(cols.get(1).ok_or(format!("line {}: bad header", i + 1))?.to_string());
                continue;
            }
            let fields = split_quoted(line);
            if fields.len() != 6 {
                return Err(format!("line {}: expected 6 fields", i + 1));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1));
            rows.push(Row {
                series: fields[0].clone(),
                x: num(&fields[1])?,
                metric: fields[2].clone(),
                mean: num(&fields[3])?,
                std: num(&fields[4])?,
                trials: fields[5].parse().map_err(|e| format!("line {}: {e}", i + 1))?,
            });
        }
        Ok(Self {
            experiment,
            x_label: x_label.ok_or("missing header")?,
            provenance: prov,
            rows,
        })
    }
}

fn quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn split_quoted(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_quotes = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if in_quotes && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => in_quotes = !in_quotes,
            ',' if !in_quotes => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ResultTable {
        let mut t = ResultTable::new("demo", "T", Provenance::new("abc".into(), 7));
        t.push("K=4,dist=UUU", 32.0, "eps_sym", &[1.0, 3.0]);
        t.push("K=4,dist=UUU", 16.0, "eps_sym", &[2.0]);
        t.push("K=2", 16.0, "eps_sym", &[f64::INFINITY]);
        t
    }

    #[test]
    fn single_trial_has_zero_std() {
        assert_eq!(mean_std(&[3.5]), (3.5, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rows_are_sorted_by_sweep_variable() {
        let t = table();
        let xs: Vec<f64> = t.select("K=4,dist=UUU", "eps_sym").iter().map(|r| r.x).collect();
        assert_eq!(xs, vec![16.0, 32.0]);
        assert_eq!(t.rows()[0].series, "K=2");
    }

    #[test]
    fn csv_round_trips() {
        let t = table();
        let csv = t.to_csv();
        assert!(csv.contains("series,T,metric,mean,std,trials"));
        assert!(csv.contains("\"K=4,dist=UUU\""));
        let back = ResultTable::from_csv(&csv).unwrap();
        assert_eq!(back.to_csv(), csv);
        assert_eq!(back.rows()[0].mean, f64::INFINITY);
    }
}
