//! Tab-separated essay corpora.
//!
//! The first line is a header. Required columns are the essay and the five
//! profile fields; an id column, an `origin_id` column and the nine label
//! columns are optional (labels become required with `expect_labels`).
//! Cell values escape `\` as `\\`, tab as `\t`, newline as `\n` and carriage
//! return as `\r`; any other backslash sequence is kept literally.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::prompt::{error_field, AuthorProfile};
use crate::scores::{LabelSet, NUM_LABELS};
use crate::{Error, Result, ScoreVector};

#[derive(Debug, Clone, PartialEq)]
pub struct EssayRecord {
    pub id: String,
    pub essay: String,
    pub profile: AuthorProfile,
    pub gold: Option<ScoreVector>,
    /// Id of the record this one was augmented from.
    pub origin: Option<String>,
}

/// Header names for the non-label columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnNames {
    pub id: String,
    pub essay: String,
    pub gender: String,
    pub education: String,
    pub race: String,
    pub age: String,
    pub income: String,
    pub origin: String,
}

impl Default for ColumnNames {
    fn default() -> Self {
        ColumnNames {
            id: "id".into(),
            essay: "essay".into(),
            gender: "gender".into(),
            education: "education".into(),
            race: "race".into(),
            age: "age".into(),
            income: "income".into(),
            origin: "origin_id".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusSchema {
    pub columns: ColumnNames,
    pub labels: LabelSet,
}

pub fn escape_cell(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_cell(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.peek() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            _ => {
                out.push('\\');
                continue;
            }
        }
        chars.next();
    }
    out
}

struct Layout {
    id: Option<usize>,
    essay: usize,
    gender: usize,
    education: usize,
    race: usize,
    age: usize,
    income: usize,
    origin: Option<usize>,
    labels: Option<[usize; NUM_LABELS]>,
    width: usize,
}

impl Layout {
    fn from_header(header: &[String], schema: &CorpusSchema, expect_labels: bool) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h == name);
        let need = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
        for (i, h) in header.iter().enumerate() {
            if header[..i].contains(h) {
                return Err(Error::Validation(format!("duplicate column `{h}` in header")));
            }
        }
        let c = &schema.columns;
        let label_cols: Vec<Option<usize>> = schema.labels.names.iter().map(|n| find(n)).collect();
        let labels = if expect_labels || label_cols.iter().any(Option::is_some) {
            let mut idx = [0; NUM_LABELS];
            for (slot, (col, name)) in idx.iter_mut().zip(label_cols.iter().zip(&schema.labels.names)) {
                *slot = col.ok_or_else(|| Error::MissingColumn(name.clone()))?;
            }
            Some(idx)
        } else {
            None
        };
        Ok(Layout {
            id: find(&c.id),
            essay: need(&c.essay)?,
            gender: need(&c.gender)?,
            education: need(&c.education)?,
            race: need(&c.race)?,
            age: need(&c.age)?,
            income: need(&c.income)?,
            origin: find(&c.origin),
            labels,
            width: header.len(),
        })
    }
}

fn parse_int(row: &str, field: &str, cell: &str) -> Result<i64> {
    cell.trim()
        .parse::<i64>()
        .map_err(|_| Error::row(row, field, format!("expected an integer, got {cell:?}")))
}

/// Reads a corpus, validating every row. Row ids default to the 1-based data
/// row number when the id column is absent.
pub fn parse_corpus<R: BufRead>(reader: R, schema: &CorpusSchema, expect_labels: bool) -> Result<Vec<EssayRecord>> {
    schema.labels.validate()?;
    let mut lines = reader.lines();
    let header_line = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::Validation("corpus is empty: missing header row".into())),
    };
    let header: Vec<String> = header_line
        .trim_end_matches('\r')
        .split('\t')
        .map(unescape_cell)
        .collect();
    let layout = Layout::from_header(&header, schema, expect_labels)?;

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split('\t').map(unescape_cell).collect();
        let row_no = (n + 1).to_string();
        if cells.len() != layout.width {
            return Err(Error::row(
                &row_no,
                "*",
                format!("expected {} cells, found {}", layout.width, cells.len()),
            ));
        }
        let id = match layout.id {
            Some(i) if cells[i].trim().is_empty() => return Err(Error::row(&row_no, "id", "empty id")),
            Some(i) => cells[i].clone(),
            None => row_no.clone(),
        };
        let essay = cells[layout.essay].clone();
        if essay.trim().is_empty() {
            return Err(Error::row(&id, "essay", "essay is empty"));
        }
        let profile = AuthorProfile::from_raw(
            cells[layout.gender].trim(),
            parse_int(&id, "education", &cells[layout.education])?,
            parse_int(&id, "race", &cells[layout.race])?,
            parse_int(&id, "age", &cells[layout.age])?,
            parse_int(&id, "income", &cells[layout.income])?,
        )
        .map_err(|e| {
            let field = error_field(&e).unwrap_or("profile").to_string();
            Error::row(&id, field, e.to_string())
        })?;
        let gold = match &layout.labels {
            None => None,
            Some(cols) => parse_labels(&id, &cells, cols, &schema.labels, expect_labels)?,
        };
        let origin = layout
            .origin
            .map(|i| cells[i].clone())
            .filter(|o| !o.is_empty() && *o != id);
        if !seen.insert(id.clone()) {
            return Err(Error::row(&id, "id", "duplicate id"));
        }
        records.push(EssayRecord {
            id,
            essay,
            profile,
            gold,
            origin,
        });
    }
    Ok(records)
}

fn parse_labels(
    id: &str,
    cells: &[String],
    cols: &[usize; NUM_LABELS],
    labels: &LabelSet,
    required: bool,
) -> Result<Option<ScoreVector>> {
    let blank = cols.iter().filter(|&&c| cells[c].trim().is_empty()).count();
    if blank == NUM_LABELS && !required {
        return Ok(None);
    }
    let mut gold = ScoreVector::zeros();
    for (j, &c) in cols.iter().enumerate() {
        let name = &labels.names[j];
        let cell = cells[c].trim();
        if cell.is_empty() {
            return Err(Error::row(id, name, "missing label value"));
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| Error::row(id, name, format!("expected a number, got {cell:?}")))?;
        if !v.is_finite() {
            return Err(Error::row(id, name, "label value is not finite"));
        }
        gold[j] = v;
    }
    Ok(Some(gold))
}

pub fn read_corpus(path: impl AsRef<Path>, schema: &CorpusSchema, expect_labels: bool) -> Result<Vec<EssayRecord>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
    parse_corpus(std::io::BufReader::new(f), schema, expect_labels)
}

/// Writes records in the layout [`parse_corpus`] reads back. Label columns are
/// written when any record has gold labels, `origin_id` when any record has an origin.
pub fn write_corpus_to<W: Write>(records: &[EssayRecord], schema: &CorpusSchema, mut w: W) -> Result<()> {
    let c = &schema.columns;
    let with_labels = records.iter().any(|r| r.gold.is_some());
    let with_origin = records.iter().any(|r| r.origin.is_some());
    let mut header: Vec<&str> = vec![&c.id];
    if with_origin {
        header.push(&c.origin);
    }
    header.extend([&c.essay, &c.gender, &c.education, &c.race, &c.age, &c.income].map(String::as_str));
    if with_labels {
        header.extend(schema.labels.names.iter().map(String::as_str));
    }
    let header: Vec<String> = header.into_iter().map(escape_cell).collect();
    writeln!(w, "{}", header.join("\t"))?;
    for r in records {
        let mut cells = vec![escape_cell(&r.id)];
        if with_origin {
            cells.push(escape_cell(r.origin.as_deref().unwrap_or("")));
        }
        cells.push(escape_cell(&r.essay));
        cells.push(escape_cell(&r.profile.gender));
        cells.push(r.profile.education.to_string());
        cells.push(r.profile.race.to_string());
        cells.push(r.profile.age.to_string());
        cells.push(r.profile.income.to_string());
        if with_labels {
            match &r.gold {
                Some(g) => cells.extend(g.iter().map(|v| v.to_string())),
                None => cells.extend(std::iter::repeat_n(String::new(), NUM_LABELS)),
            }
        }
        writeln!(w, "{}", cells.join("\t"))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_corpus(records: &[EssayRecord], schema: &CorpusSchema, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io_at(path, e))?;
    write_corpus_to(records, schema, std::io::BufWriter::new(f))
}
