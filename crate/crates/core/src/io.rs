//! Plain-text field files.
//!
//! ```text
//! lielag-field 1
//! kind reduced-section
//! n 3
//! components 2
//! grid 6 6
//! count 36
//! vertex 0 0 <n·n·components floats>
//! ...
//! ```
//!
//! `kind` is `unreduced-field`, `reduced-section` or `multiplier`. Records are
//! `vertex i j ...` (faces use `face i j ...`) in row-major order; each
//! component is an `n × n` matrix written row by row. Absent unreduced
//! values are simply omitted, so `count` may be below `cols·rows`. Floats use
//! Rust's shortest round-trip notation, making files byte-deterministic.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::liegroup::{CoAlgebraElement, GroupElement, Matrix};
use crate::reduction::{ReducedSection, UnreducedField};
use crate::variational::Multiplier;

const MAGIC: &str = "lielag-field 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Unreduced,
    Reduced,
    Multiplier,
}

impl FieldKind {
    fn name(self) -> &'static str {
        match self {
            FieldKind::Unreduced => "unreduced-field",
            FieldKind::Reduced => "reduced-section",
            FieldKind::Multiplier => "multiplier",
        }
    }

    fn components(self) -> usize {
        if self == FieldKind::Reduced {
            2
        } else {
            1
        }
    }

    fn record(self) -> &'static str {
        if self == FieldKind::Multiplier {
            "face"
        } else {
            "vertex"
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [FieldKind::Unreduced, FieldKind::Reduced, FieldKind::Multiplier].into_iter().find(|k| k.name() == s)
    }
}

/// Header plus raw records of a field file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub kind: FieldKind,
    pub n: usize,
    pub cols: usize,
    pub rows: usize,
    /// `(i, j, matrices)` with one matrix per component.
    pub records: Vec<(usize, usize, Vec<Matrix>)>,
}

impl FieldFile {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let mut text = String::new();
        let kind = self.kind;
        writeln!(text, "{MAGIC}").ok();
        writeln!(text, "kind {}", kind.name()).ok();
        writeln!(text, "n {}", self.n).ok();
        writeln!(text, "components {}", kind.components()).ok();
        writeln!(text, "grid {} {}", self.cols, self.rows).ok();
        writeln!(text, "count {}", self.records.len()).ok();
        for (i, j, mats) in &self.records {
            write!(text, "{} {i} {j}", kind.record()).ok();
            for m in mats {
                for r in 0..self.n {
                    for c in 0..self.n {
                        write!(text, " {:e}", m[(r, c)]).ok();
                    }
                }
            }
            text.push('\n');
        }
        out.write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate().map(|(k, l)| (k + 1, l));
        let mut next = |what: &str| -> Result<(usize, String)> {
            loop {
                match lines.next() {
                    None => return Err(Error::Parse { line: 0, message: format!("unexpected end of file, expected {what}") }),
                    Some((k, line)) => {
                        let line = line?;
                        let trimmed = line.trim();
                        if !trimmed.is_empty() && !trimmed.starts_with('#') {
                            return Ok((k, trimmed.to_string()));
                        }
                    }
                }
            }
        };
        let (k, magic) = next("header")?;
        if magic != MAGIC {
            return Err(Error::Parse { line: k, message: format!("expected `{MAGIC}`") });
        }
        let (k, line) = next("kind")?;
        let kind = keyed(k, &line, "kind")?
            .first()
            .and_then(|s| FieldKind::parse(s))
            .ok_or_else(|| Error::Parse { line: k, message: "unknown field kind".into() })?;
        let (k, line) = next("n")?;
        let n = parse_usizes(k, &keyed(k, &line, "n")?, 1)?[0];
        if n < 2 {
            return Err(Error::Parse { line: k, message: "n must be at least 2".into() });
        }
        let (k, line) = next("components")?;
        let components = parse_usizes(k, &keyed(k, &line, "components")?, 1)?[0];
        if components != kind.components() {
            return Err(Error::Parse { line: k, message: format!("{} files have {} components", kind.name(), kind.components()) });
        }
        let (k, line) = next("grid")?;
        let grid = parse_usizes(k, &keyed(k, &line, "grid")?, 2)?;
        let (k, line) = next("count")?;
        let count = parse_usizes(k, &keyed(k, &line, "count")?, 1)?[0];
        let width = n * n * components;
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let (k, line) = next("record")?;
            let fields = keyed(k, &line, kind.record())?;
            if fields.len() != 2 + width {
                return Err(Error::Parse { line: k, message: format!("expected {} numbers, found {}", 2 + width, fields.len()) });
            }
            let ij = parse_usizes(k, &fields[..2], 2)?;
            if ij[0] >= grid[0] || ij[1] >= grid[1] {
                return Err(Error::Parse { line: k, message: format!("({}, {}) lies outside the grid", ij[0], ij[1]) });
            }
            let floats = fields[2..]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse { line: k, message: format!("`{s}`: {e}") }))
                .collect::<Result<Vec<f64>>>()?;
            let mats = floats.chunks(n * n).map(|c| Matrix::from_row_slice(n, n, c)).collect();
            records.push((ij[0], ij[1], mats));
        }
        if let Ok((k, _)) = next("end of file") {
            return Err(Error::Parse { line: k, message: "trailing records beyond count".into() });
        }
        Ok(Self { kind, n, cols: grid[0], rows: grid[1], records })
    }

    fn expect_kind(&self, kind: FieldKind) -> Result<()> {
        if self.kind != kind {
            return Err(invalid(format!("expected a {} file, found {}", kind.name(), self.kind.name())));
        }
        Ok(())
    }

    fn dense(&self) -> Result<Vec<Option<&Vec<Matrix>>>> {
        let mut slots = vec![None; self.cols * self.rows];
        for (i, j, mats) in &self.records {
            let slot = &mut slots[j * self.cols + i];
            if slot.is_some() {
                return Err(invalid(format!("duplicate record at ({i}, {j})")));
            }
            *slot = Some(mats);
        }
        Ok(slots)
    }
}

fn keyed<'a>(line_no: usize, line: &'a str, key: &str) -> Result<Vec<&'a str>> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::Parse { line: line_no, message: format!("expected `{key}`") });
    }
    Ok(parts.collect())
}

fn parse_usizes(line_no: usize, fields: &[&str], expected: usize) -> Result<Vec<usize>> {
    if fields.len() != expected {
        return Err(Error::Parse { line: line_no, message: format!("expected {expected} integers") });
    }
    fields
        .iter()
        .map(|s| s.parse::<usize>().map_err(|e| Error::Parse { line: line_no, message: format!("`{s}`: {e}") }))
        .collect()
}

fn group(m: &Matrix, i: usize, j: usize) -> Result<GroupElement> {
    GroupElement::new(m.clone()).map_err(|e| invalid(format!("value at ({i}, {j}): {e}")))
}

impl From<&UnreducedField> for FieldFile {
    fn from(g: &UnreducedField) -> Self {
        let records = (0..g.rows())
            .flat_map(|j| (0..g.cols()).map(move |i| (i, j)))
            .filter_map(|(i, j)| g.get(i, j).map(|v| (i, j, vec![v.matrix().clone()])))
            .collect();
        Self { kind: FieldKind::Unreduced, n: g.n().unwrap_or(0), cols: g.cols(), rows: g.rows(), records }
    }
}

impl From<&ReducedSection> for FieldFile {
    fn from(y: &ReducedSection) -> Self {
        let records = (0..y.rows())
            .flat_map(|j| (0..y.cols()).map(move |i| (i, j)))
            .map(|(i, j)| (i, j, vec![y.u(i, j).matrix().clone(), y.v(i, j).matrix().clone()]))
            .collect();
        Self { kind: FieldKind::Reduced, n: y.n(), cols: y.cols(), rows: y.rows(), records }
    }
}

impl FieldFile {
    /// Multiplier on the faces of a `cols × rows` face grid (ids `j·cols + i`).
    pub fn from_multiplier(lambda: &Multiplier, n: usize, cols: usize, rows: usize) -> Self {
        let records = lambda
            .values()
            .iter()
            .map(|(f, mu)| (f % cols, f / cols, vec![mu.matrix().clone()]))
            .collect();
        Self { kind: FieldKind::Multiplier, n, cols, rows, records }
    }

    pub fn to_unreduced(&self) -> Result<UnreducedField> {
        self.expect_kind(FieldKind::Unreduced)?;
        let mut values = Vec::with_capacity(self.cols * self.rows);
        for (k, slot) in self.dense()?.into_iter().enumerate() {
            let (i, j) = (k % self.cols, k / self.cols);
            values.push(slot.map(|m| group(&m[0], i, j)).transpose()?);
        }
        UnreducedField::new(self.cols, self.rows, values)
    }

    pub fn to_reduced(&self) -> Result<ReducedSection> {
        self.expect_kind(FieldKind::Reduced)?;
        let mut u = Vec::with_capacity(self.cols * self.rows);
        let mut v = Vec::with_capacity(self.cols * self.rows);
        for (k, slot) in self.dense()?.into_iter().enumerate() {
            let (i, j) = (k % self.cols, k / self.cols);
            let m = slot.ok_or_else(|| invalid(format!("reduced section misses ({i}, {j})")))?;
            u.push(group(&m[0], i, j)?);
            v.push(group(&m[1], i, j)?);
        }
        ReducedSection::new(self.cols, self.rows, u, v)
    }

    pub fn to_multiplier(&self) -> Result<Multiplier> {
        self.expect_kind(FieldKind::Multiplier)?;
        self.dense()?;
        let mut lambda = Multiplier::default();
        for (i, j, m) in &self.records {
            let mu = CoAlgebraElement::new(m[0].clone())?;
            if (mu.matrix() - &m[0]).norm() > 1e-12 * (1.0 + m[0].norm()) {
                return Err(invalid(format!("multiplier at ({i}, {j}) is not skew-symmetric")));
            }
            lambda.insert(j * self.cols + i, mu);
        }
        Ok(lambda)
    }
}
