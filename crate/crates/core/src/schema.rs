//! Tabular ingest and feature encoding.
//!
//! Every attribute ends up in `[0, 1]`: ordered categories become normalized
//! ranks, binary attributes become `0/1`, unordered categories are one-hot
//! encoded, and continuous attributes are discretized into bins whose
//! indices are then min-max normalized.

use std::collections::BTreeSet;
use std::io;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Continuous,
    OrderedCategorical,
    UnorderedCategorical,
    Binary,
}

impl AttributeKind {
    pub fn is_ordered(self) -> bool {
        !matches!(self, AttributeKind::UnorderedCategorical)
    }
}

/// Direction in which an attribute may change along a feasible transition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    #[serde(alias = "=")]
    Immutable,
    #[serde(alias = "up")]
    IncreaseOnly,
    #[serde(alias = "down")]
    DecreaseOnly,
    #[default]
    #[serde(alias = "-")]
    Free,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default)]
    pub constraint: Constraint,
    /// Category order. Required for ordered categoricals; optional for
    /// unordered ones (fixes one-hot column order) and binaries (first maps to 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_order: Option<Vec<String>>,
    /// Continuous only. Filled in by [`encode`] when left empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_count: Option<usize>,
    /// Continuous only. When false the raw values are min-max normalized
    /// without binning.
    #[serde(default = "default_true")]
    pub discretize: bool,
    /// Continuous, non-discretized only: fixed normalization domain
    /// replacing the observed min/max.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
    /// Encoded columns occupied by this attribute. Filled in by [`encode`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoded_span: Option<Range<usize>>,
}

impl AttributeSchema {
    pub fn new(name: impl Into<String>, kind: AttributeKind, constraint: Constraint) -> Self {
        AttributeSchema {
            name: name.into(),
            kind,
            constraint,
            category_order: None,
            bin_count: None,
            discretize: true,
            bounds: None,
            encoded_span: None,
        }
    }

    pub fn with_order<S: Into<String>>(mut self, order: impl IntoIterator<Item = S>) -> Self {
        self.category_order = Some(order.into_iter().map(Into::into).collect());
        self
    }

    /// Continuous attribute taken as-is, normalized against `bounds`.
    pub fn raw(mut self, bounds: Option<[f64; 2]>) -> Self {
        self.discretize = false;
        self.bounds = bounds;
        self
    }

    pub fn span(&self) -> Range<usize> {
        self.encoded_span
            .clone()
            .expect("attribute span is set once the schema has been encoded")
    }

    fn validate(&self) -> Result<()> {
        let name = &self.name;
        if name.is_empty() {
            return Err(Error::schema("attribute with empty name"));
        }
        if matches!(
            self.constraint,
            Constraint::IncreaseOnly | Constraint::DecreaseOnly
        ) && !self.kind.is_ordered()
        {
            return Err(Error::schema(format!(
                "attribute `{name}`: directional constraint requires an ordered kind"
            )));
        }
        match self.kind {
            AttributeKind::OrderedCategorical => {
                let order = self.category_order.as_ref().ok_or_else(|| {
                    Error::schema(format!("ordered attribute `{name}` needs category_order"))
                })?;
                check_unique(name, order)?;
            }
            AttributeKind::UnorderedCategorical => {
                if let Some(order) = &self.category_order {
                    check_unique(name, order)?;
                }
            }
            AttributeKind::Binary => {
                if let Some(order) = &self.category_order {
                    check_unique(name, order)?;
                    if order.len() != 2 {
                        return Err(Error::schema(format!(
                            "binary attribute `{name}` order must list exactly two values"
                        )));
                    }
                }
            }
            AttributeKind::Continuous => {
                if self.category_order.is_some() {
                    return Err(Error::schema(format!(
                        "continuous attribute `{name}` cannot have a category order"
                    )));
                }
            }
        }
        if self.kind != AttributeKind::Continuous
            && (self.bin_count.is_some() || self.bounds.is_some())
        {
            return Err(Error::schema(format!(
                "attribute `{name}`: bin_count and bounds apply to continuous attributes only"
            )));
        }
        if self.bin_count == Some(0) {
            return Err(Error::schema(format!(
                "attribute `{name}`: bin_count must be positive"
            )));
        }
        if let Some([lo, hi]) = self.bounds {
            if self.discretize {
                return Err(Error::schema(format!(
                    "attribute `{name}`: bounds require discretize = false"
                )));
            }
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::schema(format!("attribute `{name}`: invalid bounds")));
            }
        }
        Ok(())
    }
}

fn check_unique(name: &str, order: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for c in order {
        if !seen.insert(c.as_str()) {
            return Err(Error::schema(format!(
                "attribute `{name}`: category `{c}` listed twice"
            )));
        }
    }
    Ok(())
}

fn validate_schema(schema: &[AttributeSchema]) -> Result<()> {
    let mut names = BTreeSet::new();
    for attr in schema {
        attr.validate()?;
        if !names.insert(attr.name.as_str()) {
            return Err(Error::schema(format!(
                "attribute `{}` declared twice",
                attr.name
            )));
        }
    }
    Ok(())
}

/// Names of the non-feature columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnRoles {
    /// Predicted class, `0` or `1`.
    pub label: String,
    /// Protected attribute defining the audited groups.
    pub group: String,
    /// Ground-truth class, needed only to audit false negatives.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
}

impl ColumnRoles {
    pub fn new(label: impl Into<String>, group: impl Into<String>) -> Self {
        ColumnRoles {
            label: label.into(),
            group: group.into(),
            truth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Number(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// 0-based position of the data row in the source file.
    pub id: usize,
    /// One cell per schema attribute, in schema order.
    pub values: Vec<Cell>,
    pub label: u8,
    pub group: String,
    pub truth: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    pub schema: Vec<AttributeSchema>,
    pub roles: ColumnRoles,
    pub rows: Vec<Record>,
}

impl DatasetTable {
    /// Distinct group values in sorted order.
    pub fn group_values(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r.group.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }
}

pub fn load_csv(
    path: &Path,
    schema: Vec<AttributeSchema>,
    roles: &ColumnRoles,
) -> Result<DatasetTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, roles)
}

pub fn read_csv<R: io::Read>(
    reader: R,
    schema: Vec<AttributeSchema>,
    roles: &ColumnRoles,
) -> Result<DatasetTable> {
    validate_schema(&schema)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::schema(format!("missing column `{name}`")))
    };
    let attr_cols = schema
        .iter()
        .map(|a| position(&a.name))
        .collect::<Result<Vec<_>>>()?;
    let label_col = position(&roles.label)?;
    let group_col = position(&roles.group)?;
    let truth_col = roles.truth.as_deref().map(position).transpose()?;

    let mut rows = Vec::new();
    for (id, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |col: usize, name: &str| -> Result<&str> {
            record.get(col).ok_or_else(|| Error::Value {
                row: id,
                column: name.to_owned(),
                message: "missing cell".into(),
            })
        };
        let mut values = Vec::with_capacity(schema.len());
        for (attr, &col) in schema.iter().zip(&attr_cols) {
            let raw = cell(col, &attr.name)?;
            if raw.is_empty() {
                return Err(Error::Value {
                    row: id,
                    column: attr.name.clone(),
                    message: "empty cell".into(),
                });
            }
            let value = if attr.kind == AttributeKind::Continuous {
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Cell::Number(v),
                    _ => {
                        return Err(Error::Value {
                            row: id,
                            column: attr.name.clone(),
                            message: format!("cannot parse `{raw}` as a number"),
                        })
                    }
                }
            } else {
                Cell::Text(raw.to_owned())
            };
            values.push(value);
        }
        let label = parse_binary_label(cell(label_col, &roles.label)?, id, &roles.label)?;
        let truth = match (truth_col, &roles.truth) {
            (Some(col), Some(name)) => Some(parse_binary_label(cell(col, name)?, id, name)?),
            _ => None,
        };
        rows.push(Record {
            id,
            values,
            label,
            group: cell(group_col, &roles.group)?.to_owned(),
            truth,
        });
    }
    Ok(DatasetTable {
        schema,
        roles: roles.clone(),
        rows,
    })
}

fn parse_binary_label(raw: &str, row: usize, column: &str) -> Result<u8> {
    match raw.parse::<f64>() {
        Ok(0.0) => Ok(0),
        Ok(1.0) => Ok(1),
        _ => Err(Error::Value {
            row,
            column: column.to_owned(),
            message: format!("expected 0 or 1, found `{raw}`"),
        }),
    }
}

/// Number of bins for a continuous attribute with `distinct` unique values
/// spanning `range`: `max(2, round(log2(u) * (1 + log10(1 + r))))`.
pub fn bin_count(distinct: usize, range: f64) -> usize {
    if distinct == 0 {
        return 2;
    }
    let b = (distinct as f64).log2() * (1.0 + (1.0 + range).log10());
    (b.round() as usize).max(2)
}

/// Dataset rows mapped into the unit hypercube.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    values: Vec<f64>,
    dim: usize,
    pub row_ids: Vec<usize>,
    pub schema: Vec<AttributeSchema>,
    pub column_names: Vec<String>,
    pub labels: Vec<u8>,
    pub groups: Vec<String>,
    pub truths: Vec<Option<u8>>,
}

impl EncodedMatrix {
    /// Build from already-encoded rows. Spans are assigned from the schema in
    /// order; unordered attributes take one column per entry of their
    /// `category_order`, which must therefore be present.
    pub fn from_rows(
        mut schema: Vec<AttributeSchema>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        groups: Vec<String>,
    ) -> Result<Self> {
        validate_schema(&schema)?;
        let mut column_names = Vec::new();
        for attr in &mut schema {
            let start = column_names.len();
            match attr.kind {
                AttributeKind::UnorderedCategorical => {
                    let order = attr.category_order.as_ref().ok_or_else(|| {
                        Error::schema(format!("`{}` needs a category order", attr.name))
                    })?;
                    column_names.extend(order.iter().map(|c| format!("{}={c}", attr.name)));
                }
                _ => column_names.push(attr.name.clone()),
            }
            attr.encoded_span = Some(start..column_names.len());
        }
        let dim = column_names.len();
        if labels.len() != rows.len() || groups.len() != rows.len() {
            return Err(Error::usage("rows, labels and groups differ in length"));
        }
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::usage(format!(
                    "row {i} has {} values, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::usage(format!("row {i} has values outside [0, 1]")));
            }
            values.extend_from_slice(row);
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::usage("labels must be 0 or 1"));
        }
        let n = rows.len();
        Ok(EncodedMatrix {
            values,
            dim,
            row_ids: (0..n).collect(),
            schema,
            column_names,
            labels,
            groups,
            truths: vec![None; n],
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeSchema> {
        self.schema.iter().find(|a| a.name == name)
    }

    /// CSV with columns `row_id`, the encoded columns (`attr` or
    /// `attr=category`), then `label` and `group`.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["row_id".to_owned()];
        header.extend(self.column_names.iter().cloned());
        header.push("label".into());
        header.push("group".into());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.row_ids[i].to_string()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            rec.push(self.labels[i].to_string());
            rec.push(self.groups[i].clone());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<encoded csv>", e))?;
        Ok(())
    }
}

fn canonical_bits(v: f64) -> u64 {
    // -0.0 and 0.0 count as the same value.
    (v + 0.0).to_bits()
}

fn min_max_normalize(column: &mut [f64]) {
    let (lo, hi) = column
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    for v in column.iter_mut() {
        *v = if span > 0.0 {
            ((*v - lo) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
    }
}

fn encode_continuous(attr: &mut AttributeSchema, raw: &[f64], ids: &[usize]) -> Result<Vec<f64>> {
    if !attr.discretize {
        let (lo, hi) = match attr.bounds {
            Some([lo, hi]) => {
                if let Some(i) = raw.iter().position(|v| *v < lo || *v > hi) {
                    return Err(Error::Value {
                        row: ids[i],
                        column: attr.name.clone(),
                        message: format!("{} lies outside bounds [{lo}, {hi}]", raw[i]),
                    });
                }
                (lo, hi)
            }
            None => raw
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
        };
        let span = hi - lo;
        return Ok(raw
            .iter()
            .map(|&v| {
                if span > 0.0 {
                    ((v - lo) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect());
    }

    let distinct: BTreeSet<u64> = raw.iter().map(|&v| canonical_bits(v)).collect();
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = if raw.is_empty() { 0.0 } else { hi - lo };
    let bins = *attr
        .bin_count
        .get_or_insert_with(|| bin_count(distinct.len(), range));
    let mut col: Vec<f64> = raw
        .iter()
        .map(|&v| {
            if range > 0.0 {
                (((v - lo) / range * bins as f64).floor() as usize).min(bins - 1) as f64
            } else {
                0.0
            }
        })
        .collect();
    min_max_normalize(&mut col);
    Ok(col)
}

fn category_index(
    attr: &AttributeSchema,
    categories: &[String],
    value: &str,
    row: usize,
) -> Result<usize> {
    categories.iter().position(|c| c == value).ok_or_else(|| {
        Error::schema(format!(
            "attribute `{}`: category `{value}` at row {row} is not in the declared order",
            attr.name
        ))
    })
}

/// Encode every attribute into `[0, 1]`, assigning encoded spans and filling
/// continuous bin counts. Deterministic for a given table.
pub fn encode(table: &DatasetTable) -> Result<EncodedMatrix> {
    validate_schema(&table.schema)?;
    let n = table.rows.len();
    let ids: Vec<usize> = table.rows.iter().map(|r| r.id).collect();
    let mut schema = table.schema.clone();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut column_names = Vec::new();

    for (a, attr) in schema.iter_mut().enumerate() {
        let start = columns.len();
        let texts = || table.rows.iter().map(move |r| r.values[a].text());
        match attr.kind {
            AttributeKind::Continuous => {
                let raw: Vec<f64> = table
                    .rows
                    .iter()
                    .map(|r| match &r.values[a] {
                        Cell::Number(v) => Ok(*v),
                        Cell::Text(s) => s.parse::<f64>().map_err(|_| Error::Value {
                            row: r.id,
                            column: attr.name.clone(),
                            message: format!("cannot parse `{s}` as a number"),
                        }),
                    })
                    .collect::<Result<_>>()?;
                columns.push(encode_continuous(attr, &raw, &ids)?);
                column_names.push(attr.name.clone());
            }
            AttributeKind::OrderedCategorical => {
                let order = attr.category_order.clone().unwrap_or_default();
                let mut col = Vec::with_capacity(n);
                for (text, &row) in texts().zip(&ids) {
                    col.push(category_index(attr, &order, &text, row)? as f64);
                }
                min_max_normalize(&mut col);
                columns.push(col);
                column_names.push(attr.name.clone());
            }
            AttributeKind::Binary => {
                let values: Vec<String> = texts().collect();
                let order = match &attr.category_order {
                    Some(order) => order.clone(),
                    None => binary_levels(attr, &values)?,
                };
                let mut col = Vec::with_capacity(n);
                for (text, &row) in values.iter().zip(&ids) {
                    col.push(category_index(attr, &order, text, row)? as f64);
                }
                columns.push(col);
                column_names.push(attr.name.clone());
            }
            AttributeKind::UnorderedCategorical => {
                let values: Vec<String> = texts().collect();
                let categories = match &attr.category_order {
                    Some(order) => order.clone(),
                    None => values
                        .iter()
                        .cloned()
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect(),
                };
                let mut one_hot = vec![vec![0.0; n]; categories.len()];
                for (i, (text, &row)) in values.iter().zip(&ids).enumerate() {
                    one_hot[category_index(attr, &categories, text, row)?][i] = 1.0;
                }
                column_names.extend(categories.iter().map(|c| format!("{}={c}", attr.name)));
                columns.extend(one_hot);
                attr.category_order = Some(categories);
            }
        }
        attr.encoded_span = Some(start..columns.len());
    }

    let dim = columns.len();
    let mut values = Vec::with_capacity(n * dim);
    for i in 0..n {
        values.extend(columns.iter().map(|c| c[i]));
    }
    Ok(EncodedMatrix {
        values,
        dim,
        row_ids: ids,
        schema,
        column_names,
        labels: table.rows.iter().map(|r| r.label).collect(),
        groups: table.rows.iter().map(|r| r.group.clone()).collect(),
        truths: table.rows.iter().map(|r| r.truth).collect(),
    })
}

/// Levels of a binary attribute without a declared order: numeric `0/1`
/// keep their meaning, anything else is sorted lexicographically.
fn binary_levels(attr: &AttributeSchema, values: &[String]) -> Result<Vec<String>> {
    let distinct: BTreeSet<&str> = values.iter().map(String::as_str).collect();
    if distinct.len() > 2 {
        return Err(Error::schema(format!(
            "binary attribute `{}` has {} distinct values",
            attr.name,
            distinct.len()
        )));
    }
    let numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(nums) = numeric {
        if nums.iter().all(|&v| v == 0.0 || v == 1.0) {
            let mut levels = vec![String::new(), String::new()];
            for (s, v) in distinct.iter().zip(nums) {
                levels[v as usize] = (*s).to_owned();
            }
            // Placeholders for an unobserved level never match a real cell.
            for (i, l) in levels.iter_mut().enumerate() {
                if l.is_empty() {
                    *l = format!("\u{0}unobserved{i}");
                }
            }
            return Ok(levels);
        }
    }
    let mut levels: Vec<String> = distinct.into_iter().map(str::to_owned).collect();
    while levels.len() < 2 {
        levels.push("\u{0}unobserved".to_owned());
    }
    Ok(levels)
}

/// Whether moving from row `a` to row `b` respects every attribute constraint.
pub fn transition_feasible(a: &[f64], b: &[f64], schema: &[AttributeSchema]) -> bool {
    schema.iter().all(|attr| {
        let span = attr.span();
        match attr.constraint {
            Constraint::Free => true,
            Constraint::Immutable => a[span.clone()] == b[span],
            Constraint::IncreaseOnly => b[span.start] >= a[span.start],
            Constraint::DecreaseOnly => b[span.start] <= a[span.start],
        }
    })
}
