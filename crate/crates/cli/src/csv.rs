use std::fmt::Write as _;

/// CSV document: `#` metadata lines, a column header and numeric rows.
#[derive(Debug, Default)]
pub struct CsvDoc {
    text: String,
}

impl CsvDoc {
    pub fn new(subcommand: &str) -> Self {
        let mut d = CsvDoc::default();
        d.meta("generator", format!("hhmo {}", env!("CARGO_PKG_VERSION")));
        d.meta("subcommand", subcommand);
        d
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "# {key}={value}");
    }

    pub fn header(&mut self, cols: &[&str]) {
        let _ = writeln!(self.text, "{}", cols.join(","));
    }

    pub fn row(&mut self, vals: &[f64]) {
        let cells: Vec<String> = vals.iter().map(|v| fmt_num(*v)).collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    /// Appends raw text (an already formatted block).
    pub fn raw(&mut self, s: &str) {
        self.text.push_str(s);
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Shortest round-trip representation; NaN is written as an empty cell.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}
