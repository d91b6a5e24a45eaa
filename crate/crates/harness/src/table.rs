//! Deterministic CSV tables.

use std::io::Write;

/// Scientific notation with 16 significant digits; `NaN`/`inf` pass through.
pub fn sci(v: f64) -> String {
    format!("{v:.15e}")
}

pub fn opt_sci(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

/// A CSV table with `# key: value` metadata lines above the header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            metadata: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Index of a header column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parsed numeric values of one column; empty cells become `None`.
    pub fn values(&self, name: &str) -> Vec<Option<f64>> {
        let Some(c) = self.column(name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r[c].parse().ok()).collect()
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_digits() {
        assert_eq!(sci(0.1), "1.000000000000000e-1");
        assert_eq!(sci(-1234.5), "-1.234500000000000e3");
        assert_eq!(sci(1.0 / 3.0).len(), "3.333333333333333e-1".len());
        assert_eq!(opt_sci(None), "");
    }

    #[test]
    fn layout() {
        let mut t = Table::new(&["a", "b"]);
        t.meta("tolerance", sci(1e-10));
        t.push(vec!["1".into(), String::new()]);
        assert_eq!(t.to_csv_string(), "# tolerance: 1.000000000000000e-10\na,b\n1,\n");
        assert_eq!(t.values("a"), vec![Some(1.0)]);
        assert_eq!(t.values("b"), vec![None]);
    }
}
