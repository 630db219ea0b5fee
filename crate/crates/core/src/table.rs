//! Plain result tables rendered as CSV or aligned markdown.

use std::path::Path;

use crate::error::{Error, Result};
use crate::util::write_text;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: impl Into<String>, header: Vec<String>) -> Self {
        Self {
            title: title.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_markdown(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                std::iter::once(&self.header[c])
                    .chain(self.rows.iter().map(|r| &r[c]))
                    .map(|s| s.chars().count())
                    .max()
                    .unwrap_or(0)
                    .max(3)
            })
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(s, &w)| format!("{s:<w$}"))
                .collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = String::new();
        if !self.title.is_empty() {
            out.push_str(&format!("### {}\n\n", self.title));
        }
        out.push_str(&line(&self.header));
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.md` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        if stem.is_empty() {
            return Err(Error::invalid("empty table file stem"));
        }
        write_text(&dir.join(format!("{stem}.csv")), &self.to_csv())?;
        write_text(&dir.join(format!("{stem}.md")), &self.to_markdown())
    }
}

/// Two decimals; values that round to zero print without a sign.
pub fn fmt2(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), fmt2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markdown_columns_align() {
        let mut t = Table::new("", vec!["a".into(), "long header".into()]);
        t.push(vec!["1,2".into(), "x".into()]);
        let md = t.to_markdown();
        let lens: Vec<usize> = md.lines().map(|l| l.chars().count()).collect();
        assert!(lens.windows(2).all(|w| w[0] == w[1]), "{md}");
        assert_eq!(t.to_csv(), "a,long header\n\"1,2\",x\n");
    }

    #[test]
    fn tiny_negatives_print_unsigned() {
        assert_eq!(fmt2(-0.001), "0.00");
        assert_eq!(fmt2(-0.006), "-0.01");
        assert_eq!(fmt2(0.125), "0.12");
    }
}
