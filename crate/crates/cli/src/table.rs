//! CSV tables and their `.meta` sidecars.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Bool(bool),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    /// Values of one column, `None` where missing.
    pub fn column(&self, name: &str) -> Vec<Option<f64>> {
        let i = self.header.iter().position(|h| *h == name).expect("unknown column");
        self.rows
            .iter()
            .map(|r| match r[i] {
                Cell::Num(v) => Some(v),
                Cell::Bool(b) => Some(if b { 1.0 } else { 0.0 }),
                Cell::Missing => None,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(format_cell).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

fn format_cell(c: &Cell) -> String {
    match c {
        Cell::Num(v) => format_number(*v),
        Cell::Bool(b) => b.to_string(),
        Cell::Missing => String::new(),
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Twelve significant digits; scientific notation when |x| < 1e-3 or
/// |x| > 1e4.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if !(1e-3..=1e4).contains(&a) {
        let s = format!("{x:.11e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent");
        return format!("{}e{exp}", trim_fraction(mantissa));
    }
    let decimals = (11 - a.log10().floor() as i32).max(0) as usize;
    trim_fraction(&format!("{x:.decimals$}")).to_string()
}

/// Refuses to clobber files unless `overwrite` is set.
pub fn ensure_writable(paths: &[PathBuf], overwrite: bool) -> Result<(), CliError> {
    if overwrite {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(CliError::Exists(p.clone())),
        None => Ok(()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })?;
        }
    }
    fs::write(path, contents).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })
}

pub fn write_csv(table: &Table, path: &Path) -> Result<(), CliError> {
    write_file(path, &table.to_csv())
}

/// `<name>.csv` → `<name>.meta`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

/// Run record: `#` comment lines followed by `key = value` pairs that can be
/// fed back through `--config`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Meta {
    pub comments: Vec<String>,
    pub pairs: Vec<(String, String)>,
}

impl Meta {
    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.pairs.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        for (k, v) in &self.pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

pub fn write_meta(meta: &Meta, path: &Path) -> Result<(), CliError> {
    write_file(path, &meta.render())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn number_formats() {
        assert_eq!(format_number(0.25), "0.25");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-0.11), "-0.11");
        assert_eq!(format_number(1e-3), "0.001");
        assert_eq!(format_number(9.99e-4), "9.99e-4");
        assert_eq!(format_number(616850.2755), "6.168502755e5");
        assert_eq!(format_number(1e4), "10000");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(0.0), "0");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(&["a", "b"]);
        assert_eq!(t.to_csv(), "a,b\n");
    }

    #[test]
    fn missing_values_are_empty_fields() {
        let mut t = Table::new(&["g_over_kappa", "t_star", "converged"]);
        t.push(vec![0.5.into(), None.into(), false.into()]);
        assert_eq!(t.to_csv(), "g_over_kappa,t_star,converged\n0.5,,false\n");
    }

    #[test]
    fn refuses_to_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "").unwrap();
        assert!(matches!(ensure_writable(std::slice::from_ref(&p), false), Err(CliError::Exists(_))));
        assert!(ensure_writable(&[p], true).is_ok());
    }

    #[test]
    fn meta_renders_comments_then_pairs() {
        let mut m = Meta::default();
        m.comment("fig2");
        m.set("eps", 0.25);
        assert_eq!(m.render(), "# fig2\neps = 0.25\n");
        assert_eq!(meta_path(Path::new("out/fig2_eps0.25.csv")), PathBuf::from("out/fig2_eps0.25.meta"));
    }

    fn sig12(x: f64) -> f64 {
        format!("{x:.11e}").parse().unwrap()
    }

    proptest! {
        #[test]
        fn formatted_values_reparse_to_twelve_digits(
            mantissa in -10.0f64..10.0,
            exp in -12i32..12,
        ) {
            let x = mantissa * 10f64.powi(exp);
            let back: f64 = format_number(x).parse().unwrap();
            prop_assert_eq!(back, sig12(x));
        }
    }
}
