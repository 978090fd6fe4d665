//! Typed tabular data with fusion-role annotations.
//!
//! A [`DataTable`] is a rectangular dataset with metric and categorical
//! columns and explicit missing markers. A [`FusionSchema`] assigns each
//! variable a role (common / specific-recipient / specific-donor) and a
//! scale. [`stack`] builds the missing-by-design frame from a recipient
//! and a donor file; [`split_population`] draws disjoint recipient and
//! donor samples from a surrogate population.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recode::RecodeRule;

/// Measurement level of a variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleLevel {
    /// Categorical with an explicit, declared level set (codes).
    Categorical { levels: Vec<u32> },
    /// Finite real values.
    Metric,
}

impl ScaleLevel {
    pub fn is_metric(&self) -> bool {
        matches!(self, ScaleLevel::Metric)
    }

    pub fn levels(&self) -> Option<&[u32]> {
        match self {
            ScaleLevel::Categorical { levels } => Some(levels),
            ScaleLevel::Metric => None,
        }
    }
}

/// Which file(s) observe a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableRole {
    /// Observed in both files (the X variables).
    Common,
    /// Observed only in the recipient file (the Y variables).
    SpecificRecipient,
    /// Observed only in the donor file (the Z variables).
    SpecificDonor,
}

/// Per-variable schema entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub role: VariableRole,
    pub scale: ScaleLevel,
    /// Optional rule producing a categorised version of this variable
    /// (required for metric common variables under Random Hot Deck).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recode: Option<RecodeRule>,
}

fn default_missing_token() -> String {
    String::new()
}

/// Declarative description of the fusion setting: one entry per
/// variable plus the missing-value token used in CSV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FusionSchema {
    #[serde(default = "default_missing_token")]
    pub missing_token: String,
    pub variables: Vec<VariableSpec>,
}

impl FusionSchema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        let schema = FusionSchema {
            missing_token: default_missing_token(),
            variables,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for v in &self.variables {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable '{}'", v.name)));
            }
            if let ScaleLevel::Categorical { levels } = &v.scale {
                if levels.len() < 2 {
                    return Err(Error::Schema(format!(
                        "categorical variable '{}' needs at least 2 levels",
                        v.name
                    )));
                }
                let unique: HashSet<_> = levels.iter().collect();
                if unique.len() != levels.len() {
                    return Err(Error::Schema(format!(
                        "categorical variable '{}' has duplicate levels",
                        v.name
                    )));
                }
            }
        }
        if self.names_with_role(VariableRole::Common).is_empty() {
            return Err(Error::Schema("at least one common variable required".into()));
        }
        if self.names_with_role(VariableRole::SpecificDonor).is_empty() {
            return Err(Error::Schema(
                "at least one donor-specific variable required".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let schema: FusionSchema =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{path:?}: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn var(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&VariableSpec> {
        self.var(name)
            .ok_or_else(|| Error::Schema(format!("variable '{name}' not in schema")))
    }

    pub fn names_with_role(&self, role: VariableRole) -> Vec<&str> {
        self.variables
            .iter()
            .filter(|v| v.role == role)
            .map(|v| v.name.as_str())
            .collect()
    }

    pub fn common_names(&self) -> Vec<&str> {
        self.names_with_role(VariableRole::Common)
    }

    pub fn donor_specific_names(&self) -> Vec<&str> {
        self.names_with_role(VariableRole::SpecificDonor)
    }

    pub fn recipient_specific_names(&self) -> Vec<&str> {
        self.names_with_role(VariableRole::SpecificRecipient)
    }
}

/// One column of data. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Metric(Vec<Option<f64>>),
    Categorical(Vec<Option<u32>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Metric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Metric(v) => v[row].is_none(),
            Column::Categorical(v) => v[row].is_none(),
        }
    }

    pub fn all_missing_in(&self, rows: impl Iterator<Item = usize>) -> bool {
        let mut rows = rows.peekable();
        if rows.peek().is_none() {
            return false;
        }
        for r in rows {
            if !self.is_missing(r) {
                return false;
            }
        }
        true
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Metric(v) => Column::Metric(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical(v) => Column::Categorical(rows.iter().map(|&r| v[r]).collect()),
        }
    }

    fn missing(&self, n: usize) -> Column {
        match self {
            Column::Metric(_) => Column::Metric(vec![None; n]),
            Column::Categorical(_) => Column::Categorical(vec![None; n]),
        }
    }

    fn concat(&self, other: &Column) -> Result<Column> {
        match (self, other) {
            (Column::Metric(a), Column::Metric(b)) => {
                Ok(Column::Metric(a.iter().chain(b.iter()).copied().collect()))
            }
            (Column::Categorical(a), Column::Categorical(b)) => Ok(Column::Categorical(
                a.iter().chain(b.iter()).copied().collect(),
            )),
            _ => Err(Error::Data("column scale mismatch in concat".into())),
        }
    }

    pub fn format_cell(&self, row: usize, missing_token: &str) -> String {
        match self {
            Column::Metric(v) => match v[row] {
                Some(x) => format!("{x}"),
                None => missing_token.to_string(),
            },
            Column::Categorical(v) => match v[row] {
                Some(c) => format!("{c}"),
                None => missing_token.to_string(),
            },
        }
    }
}

/// Rectangular dataset. Rows carry a stable identity assigned at load
/// (or inherited from the parent table when subsetting).
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    names: Vec<String>,
    columns: Vec<Column>,
    row_ids: Vec<u64>,
}

impl DataTable {
    pub fn new(names: Vec<String>, columns: Vec<Column>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Data("names/columns length mismatch".into()));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Data(format!("duplicate column name '{n}'")));
            }
        }
        let n_rows = columns.first().map_or(0, Column::len);
        for (name, c) in names.iter().zip(&columns) {
            if c.len() != n_rows {
                return Err(Error::Data(format!("column '{name}' has ragged length")));
            }
        }
        Ok(DataTable {
            names,
            columns,
            row_ids: (0..n_rows as u64).collect(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::Data(format!("column '{name}' not found")))
    }

    /// Metric column as `Option<f64>` cells.
    pub fn metric(&self, name: &str) -> Result<&[Option<f64>]> {
        match self.column(name)? {
            Column::Metric(v) => Ok(v),
            Column::Categorical(_) => {
                Err(Error::Data(format!("column '{name}' is not metric")))
            }
        }
    }

    pub fn categorical(&self, name: &str) -> Result<&[Option<u32>]> {
        match self.column(name)? {
            Column::Categorical(v) => Ok(v),
            Column::Metric(_) => Err(Error::Data(format!("column '{name}' is not categorical"))),
        }
    }

    /// Metric values over a row subset, erroring on any missing cell.
    pub fn metric_dense(&self, name: &str, rows: &[usize]) -> Result<Vec<f64>> {
        let col = self.metric(name)?;
        rows.iter()
            .map(|&r| {
                col[r].ok_or_else(|| Error::Data(format!("column '{name}' missing at row {r}")))
            })
            .collect()
    }

    pub fn categorical_dense(&self, name: &str, rows: &[usize]) -> Result<Vec<u32>> {
        let col = self.categorical(name)?;
        rows.iter()
            .map(|&r| {
                col[r].ok_or_else(|| Error::Data(format!("column '{name}' missing at row {r}")))
            })
            .collect()
    }

    /// Replace an existing column or append a new one.
    pub fn set_column(&mut self, name: &str, column: Column) -> Result<()> {
        if column.len() != self.n_rows() && self.n_cols() > 0 {
            return Err(Error::Data(format!("column '{name}' has wrong length")));
        }
        match self.names.iter().position(|n| n == name) {
            Some(i) => self.columns[i] = column,
            None => {
                self.names.push(name.to_string());
                self.columns.push(column);
            }
        }
        Ok(())
    }

    pub fn drop_columns(&self, drop: &[&str]) -> DataTable {
        let keep: Vec<usize> = (0..self.names.len())
            .filter(|&i| !drop.contains(&self.names[i].as_str()))
            .collect();
        DataTable {
            names: keep.iter().map(|&i| self.names[i].clone()).collect(),
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Row subset, preserving row identity.
    pub fn select_rows(&self, rows: &[usize]) -> DataTable {
        DataTable {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
        }
    }

    /// Validate cell contents against the schema: declared levels for
    /// categoricals, finite values for metrics.
    pub fn validate_against(&self, schema: &FusionSchema) -> Result<()> {
        for name in &self.names {
            let spec = schema.require(name)?;
            match (self.column(name)?, &spec.scale) {
                (Column::Categorical(v), ScaleLevel::Categorical { levels }) => {
                    for (row, cell) in v.iter().enumerate() {
                        if let Some(code) = cell {
                            if !levels.contains(code) {
                                return Err(Error::Data(format!(
                                    "column '{name}' row {row}: code {code} outside declared levels"
                                )));
                            }
                        }
                    }
                }
                (Column::Metric(v), ScaleLevel::Metric) => {
                    for (row, cell) in v.iter().enumerate() {
                        if let Some(x) = cell {
                            if !x.is_finite() {
                                return Err(Error::Data(format!(
                                    "column '{name}' row {row}: non-finite value"
                                )));
                            }
                        }
                    }
                }
                _ => {
                    return Err(Error::Data(format!(
                        "column '{name}' scale does not match schema"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path, missing_token: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.names)?;
        for row in 0..self.n_rows() {
            let record: Vec<String> = self
                .columns
                .iter()
                .map(|c| c.format_cell(row, missing_token))
                .collect();
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Load a delimiter-separated file with a header row. Every header name
/// must be declared in the schema; all common variables must be present.
pub fn load_table(path: &Path, schema: &FusionSchema) -> Result<DataTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    if headers.is_empty() {
        return Err(Error::Data(format!("{path:?}: empty file")));
    }
    for h in &headers {
        schema.require(h)?;
    }
    for common in schema.common_names() {
        if !headers.iter().any(|h| h == common) {
            return Err(Error::Data(format!(
                "{path:?}: missing common column '{common}'"
            )));
        }
    }

    let mut columns: Vec<Column> = headers
        .iter()
        .map(|h| match &schema.var(h).unwrap().scale {
            ScaleLevel::Categorical { .. } => Column::Categorical(Vec::new()),
            ScaleLevel::Metric => Column::Metric(Vec::new()),
        })
        .collect();

    let token = schema.missing_token.as_str();
    let mut n_rows = 0usize;
    for record in reader.records() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Data(format!(
                "{path:?}: row {n_rows} has {} fields, expected {}",
                record.len(),
                headers.len()
            )));
        }
        for (i, field) in record.iter().enumerate() {
            let name = &headers[i];
            let spec = schema.var(name).unwrap();
            match &mut columns[i] {
                Column::Metric(v) => {
                    if field == token {
                        v.push(None);
                    } else {
                        let x: f64 = field.trim().parse().map_err(|_| {
                            Error::Data(format!(
                                "{path:?}: column '{name}' row {n_rows}: cannot parse '{field}' as metric"
                            ))
                        })?;
                        if !x.is_finite() {
                            return Err(Error::Data(format!(
                                "{path:?}: column '{name}' row {n_rows}: non-finite value"
                            )));
                        }
                        v.push(Some(x));
                    }
                }
                Column::Categorical(v) => {
                    if field == token {
                        v.push(None);
                    } else {
                        let code: u32 = field.trim().parse().map_err(|_| {
                            Error::Data(format!(
                                "{path:?}: column '{name}' row {n_rows}: cannot parse '{field}' as category code"
                            ))
                        })?;
                        let levels = spec.scale.levels().unwrap();
                        if !levels.contains(&code) {
                            return Err(Error::Data(format!(
                                "{path:?}: column '{name}' row {n_rows}: code {code} outside declared levels"
                            )));
                        }
                        v.push(Some(code));
                    }
                }
            }
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::Data(format!("{path:?}: no data rows")));
    }
    DataTable::new(headers, columns)
}

/// The stacked missing-by-design frame: recipient block first, donor
/// block second. Donor-specific columns are missing on the recipient
/// block and vice versa; common columns are fully observed in both.
#[derive(Debug, Clone)]
pub struct StackedFrame {
    pub table: DataTable,
    pub n_recipient: usize,
    pub n_donor: usize,
}

impl StackedFrame {
    pub fn recipient_rows(&self) -> Vec<usize> {
        (0..self.n_recipient).collect()
    }

    pub fn donor_rows(&self) -> Vec<usize> {
        (self.n_recipient..self.n_recipient + self.n_donor).collect()
    }

    /// Check the block missingness pattern by scanning each block.
    pub fn check_pattern(&self, schema: &FusionSchema) -> Result<()> {
        let rec: Vec<usize> = self.recipient_rows();
        let don: Vec<usize> = self.donor_rows();
        for v in &schema.variables {
            if !self.table.has_column(&v.name) {
                continue;
            }
            let col = self.table.column(&v.name)?;
            match v.role {
                VariableRole::Common => {
                    for &r in rec.iter().chain(don.iter()) {
                        if col.is_missing(r) {
                            return Err(Error::Data(format!(
                                "common column '{}' missing at row {r}",
                                v.name
                            )));
                        }
                    }
                }
                VariableRole::SpecificDonor => {
                    if !col.all_missing_in(rec.iter().copied()) {
                        return Err(Error::Data(format!(
                            "donor-specific column '{}' observed in recipient block",
                            v.name
                        )));
                    }
                    for &r in &don {
                        if col.is_missing(r) {
                            return Err(Error::Data(format!(
                                "donor-specific column '{}' missing at donor row {r}",
                                v.name
                            )));
                        }
                    }
                }
                VariableRole::SpecificRecipient => {
                    if !col.all_missing_in(don.iter().copied()) {
                        return Err(Error::Data(format!(
                            "recipient-specific column '{}' observed in donor block",
                            v.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Project the frame back onto its recipient block (schema columns
    /// observed there only).
    pub fn recipient_block(&self, schema: &FusionSchema) -> DataTable {
        let drop: Vec<&str> = schema.donor_specific_names();
        self.table.select_rows(&self.recipient_rows()).drop_columns(&drop)
    }

    pub fn donor_block(&self, schema: &FusionSchema) -> DataTable {
        let drop: Vec<&str> = schema.recipient_specific_names();
        self.table.select_rows(&self.donor_rows()).drop_columns(&drop)
    }
}

/// Stack a recipient and a donor file into the missing-by-design frame.
///
/// The output contains every schema variable in schema order; columns a
/// block does not observe are filled with missing markers.
pub fn stack(
    recipient: &DataTable,
    donor: &DataTable,
    schema: &FusionSchema,
) -> Result<StackedFrame> {
    if recipient.n_rows() == 0 {
        return Err(Error::Data("recipient table is empty".into()));
    }
    if donor.n_rows() == 0 {
        return Err(Error::Data("donor table is empty".into()));
    }
    recipient.validate_against(schema)?;
    donor.validate_against(schema)?;

    let n_rec = recipient.n_rows();
    let n_don = donor.n_rows();
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for v in &schema.variables {
        let blank = match &v.scale {
            ScaleLevel::Metric => Column::Metric(vec![None; 0]),
            ScaleLevel::Categorical { .. } => Column::Categorical(vec![None; 0]),
        };
        let rec_col = if recipient.has_column(&v.name) {
            recipient.column(&v.name)?.clone()
        } else {
            blank.missing(n_rec)
        };
        let don_col = if donor.has_column(&v.name) {
            donor.column(&v.name)?.clone()
        } else {
            blank.missing(n_don)
        };
        match v.role {
            VariableRole::Common => {
                for (side, col, n) in [("recipient", &rec_col, n_rec), ("donor", &don_col, n_don)] {
                    for r in 0..n {
                        if col.is_missing(r) {
                            return Err(Error::Data(format!(
                                "common column '{}' missing in {side} file at row {r}",
                                v.name
                            )));
                        }
                    }
                }
            }
            VariableRole::SpecificDonor => {
                if !rec_col.all_missing_in(0..n_rec) {
                    return Err(Error::Data(format!(
                        "donor-specific column '{}' present in recipient file",
                        v.name
                    )));
                }
            }
            VariableRole::SpecificRecipient => {
                if !don_col.all_missing_in(0..n_don) {
                    return Err(Error::Data(format!(
                        "recipient-specific column '{}' present in donor file",
                        v.name
                    )));
                }
            }
        }
        names.push(v.name.clone());
        columns.push(rec_col.concat(&don_col)?);
    }
    let mut table = DataTable::new(names, columns)?;
    // Row identity: recipient ids first, donor ids offset past them so
    // the two blocks never collide.
    let offset = recipient.row_ids().iter().copied().max().unwrap_or(0) + 1;
    table.row_ids = recipient
        .row_ids()
        .iter()
        .copied()
        .chain(donor.row_ids().iter().map(|&id| id + offset))
        .collect();
    let frame = StackedFrame {
        table,
        n_recipient: n_rec,
        n_donor: n_don,
    };
    frame.check_pattern(schema)?;
    Ok(frame)
}

/// Draw disjoint recipient and donor samples without replacement from a
/// fully observed population. The recipient copy drops donor-specific
/// columns; the donor copy drops recipient-specific columns.
pub fn split_population<R: Rng>(
    pop: &DataTable,
    schema: &FusionSchema,
    n_rec: usize,
    n_don: usize,
    rng: &mut R,
) -> Result<(DataTable, DataTable)> {
    let n = pop.n_rows();
    if n_rec + n_don > n {
        return Err(Error::Data(format!(
            "population has {n} rows, cannot draw {n_rec}+{n_don}"
        )));
    }
    let picked = sample(rng, n, n_rec + n_don).into_vec();
    let rec_rows = &picked[..n_rec];
    let don_rows = &picked[n_rec..];
    let drop_z: Vec<&str> = schema.donor_specific_names();
    let drop_y: Vec<&str> = schema.recipient_specific_names();
    let recipient = pop.select_rows(rec_rows).drop_columns(&drop_z);
    let donor = pop.select_rows(don_rows).drop_columns(&drop_y);
    Ok((recipient, donor))
}
