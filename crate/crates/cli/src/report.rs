//! Tables for people, CSV for scripts. Both are rendered from one [`Report`].

use std::fmt::Write as _;
use std::io;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    /// No value (an analytic column that does not apply).
    Blank,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl Cell {
    fn table_text(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(x) => sig6(*x),
            Cell::Blank => "-".into(),
        }
    }

    fn csv_text(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            // shortest representation that parses back to the same f64
            Cell::Num(x) => x.to_string(),
            Cell::Blank => String::new(),
        }
    }
}

/// Six significant digits, trailing zeros dropped. Exponent form outside
/// `[1e-4, 1e6)`.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mant) = mant.strip_prefix('-').map_or(("", mant), |m| ("-", m));
    let digits: String = mant.chars().filter(|c| *c != '.').collect();
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(&format!("{}.{}", &digits[..1], &digits[1..]));
        return format!("{sign}{m}e{exp}");
    }
    let body = if exp >= 0 {
        let split = exp as usize + 1;
        format!("{}.{}", &digits[..split], &digits[split..])
    } else {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    };
    format!("{sign}{}", trim_zeros(&body))
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub title: String,
    pub columns: Vec<String>,
    /// The first cell of each row is its key in the CSV output.
    pub rows: Vec<Vec<Cell>>,
}

impl Section {
    pub fn new(title: &str, columns: &[&str]) -> Self {
        Section {
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> &mut Self {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
        self
    }

    fn render(&self, out: &mut String) {
        let text: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::table_text).collect())
            .collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|c| {
                text.iter()
                    .map(|r| r[c].chars().count())
                    .chain([self.columns[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let _ = writeln!(out, "{}", self.title);
        let line = |cells: &[String], numeric: &[bool]| {
            cells
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    if numeric[c] {
                        format!("{s:>w$}", w = widths[c])
                    } else {
                        format!("{s:<w$}", w = widths[c])
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let numeric: Vec<bool> = (0..self.columns.len())
            .map(|c| self.rows.iter().any(|r| matches!(r[c], Cell::Num(_))))
            .collect();
        let _ = writeln!(out, "  {}", line(&self.columns, &numeric));
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        let _ = writeln!(out, "  {}", rule.join("  "));
        for r in &text {
            let _ = writeln!(out, "  {}", line(r, &numeric));
        }
    }
}

/// Everything a command prints: the run manifest, headline lines, tables
/// and notes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub headline: Vec<String>,
    pub sections: Vec<Section>,
    pub notes: Vec<String>,
    /// Replaces the long-format CSV when set (header, records).
    pub csv_override: Option<(Vec<String>, Vec<Vec<String>>)>,
}

impl Report {
    pub fn render(&self, manifest: &Manifest) -> String {
        let mut out = manifest.comment_block();
        for h in &self.headline {
            let _ = writeln!(out, "{h}");
        }
        for s in &self.sections {
            out.push('\n');
            s.render(&mut out);
        }
        if !self.notes.is_empty() {
            out.push('\n');
            for n in &self.notes {
                let _ = writeln!(out, "note: {n}");
            }
        }
        out
    }

    /// Long format (`section,row,column,value`) unless the command supplies
    /// its own records. Manifest lines lead as `#` comments.
    pub fn write_csv<W: io::Write>(&self, manifest: &Manifest, mut w: W) -> io::Result<()> {
        w.write_all(manifest.comment_block().as_bytes())?;
        let mut csv = csv::Writer::from_writer(w);
        if let Some((header, records)) = &self.csv_override {
            csv.write_record(header)?;
            for r in records {
                csv.write_record(r)?;
            }
        } else {
            csv.write_record(["section", "row", "column", "value"])?;
            for s in &self.sections {
                for r in &s.rows {
                    let key = r[0].csv_text();
                    for (c, cell) in r.iter().enumerate().skip(1) {
                        csv.write_record([&s.title, &key, &s.columns[c], &cell.csv_text()])?;
                    }
                }
            }
        }
        csv.flush()
    }
}

/// Inputs that determine a run, echoed at the top of every output.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub input: String,
    pub options: Vec<(String, String)>,
    pub seed: Option<u64>,
}

impl Manifest {
    pub fn comment_block(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# statepoll {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# command: {}", self.command);
        let _ = writeln!(out, "# input: {}", self.input);
        for (k, v) in &self.options {
            let _ = writeln!(out, "# option: {k} = {v}");
        }
        match self.seed {
            Some(s) => {
                let _ = writeln!(out, "# seed: {s}");
            }
            None => {
                let _ = writeln!(out, "# seed: none");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(10.0 / 17.0), "0.588235");
        assert_eq!(sig6(0.9285714285714286), "0.928571");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(-2.5), "-2.5");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.00012345678), "0.000123457");
        assert_eq!(sig6(1.5e-9), "1.5e-9");
        assert_eq!(sig6(999999.6), "1e6");
        assert_eq!(sig6(0.0), "0");
    }

    #[test]
    fn table_value_is_csv_value_rounded() {
        for x in [0.1 + 0.2, 1.0 / 3.0, -7.123456789e-7, 42.0, 9.9999996] {
            let shown: f64 = sig6(x).parse().unwrap();
            let csv: f64 = Cell::Num(x).csv_text().parse().unwrap();
            assert_eq!(csv, x);
            assert_eq!(shown, format!("{x:.5e}").parse::<f64>().unwrap());
        }
    }

    #[test]
    fn long_csv_layout() {
        let mut s = Section::new("stations", &["station", "F"]);
        s.row(vec!["1".into(), 0.25.into()]);
        let r = Report {
            sections: vec![s],
            ..Report::default()
        };
        let m = Manifest {
            command: "solve".into(),
            input: "x.toml".into(),
            options: vec![],
            seed: None,
        };
        let mut buf = Vec::new();
        r.write_csv(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# statepoll"));
        assert!(text.ends_with("section,row,column,value\nstations,1,F,0.25\n"));
    }
}
