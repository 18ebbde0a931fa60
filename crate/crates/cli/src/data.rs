//! CSV ingestion: header row required, every used column numeric.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::CliError;

pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Clone)]
pub struct Dataset {
    pub names: Vec<String>,
    /// Column-major values of every column in the file.
    pub columns: Vec<Vec<f64>>,
    pub n: usize,
}

/// Response and design picked out of a dataset.
#[derive(Debug, Clone)]
pub struct Model {
    pub response: String,
    pub y: Vec<f64>,
    pub x: DMatrix<f64>,
    pub covariates: Vec<String>,
}

impl Dataset {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let rdr = builder()
            .from_path(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Self::from_reader(rdr)
    }

    #[cfg(test)]
    pub fn from_text(text: &str) -> Result<Self, CliError> {
        Self::from_reader(builder().from_reader(text.as_bytes()))
    }

    fn from_reader<R: std::io::Read>(mut rdr: csv::Reader<R>) -> Result<Self, CliError> {
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Data(format!("header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if names.is_empty() || names.iter().all(String::is_empty) {
            return Err(CliError::Data("missing header row".into()));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(CliError::Data(format!("duplicate column name '{a}'")));
            }
        }
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); names.len()];
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Data(format!("data row {}: {e}", i + 1)))?;
            for (j, field) in rec.iter().enumerate() {
                raw[j].push(field.to_string());
            }
        }
        let n = raw.first().map_or(0, Vec::len);
        // Non-numeric cells become NaN; they only matter if the column is used.
        let columns = raw
            .into_iter()
            .map(|col| col.iter().map(|s| parse_cell(s).unwrap_or(f64::NAN)).collect())
            .collect();
        Ok(Dataset { names, columns, n })
    }

    fn index(&self, name: &str) -> Result<usize, CliError> {
        self.names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::Data(format!("unknown column '{name}' (columns: {})", self.names.join(", "))))
    }

    /// Values of one column; every cell must be a finite number.
    pub fn numeric(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let j = self.index(name)?;
        let col = &self.columns[j];
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(CliError::Data(format!(
                "column '{name}', data row {}: missing or non-numeric value",
                i + 1
            )));
        }
        Ok(col.clone())
    }

    /// Response plus covariates (all other columns unless listed), with a
    /// leading intercept column unless disabled.
    pub fn model(&self, response: &str, covariates: Option<&[String]>, intercept: bool) -> Result<Model, CliError> {
        let y = self.numeric(response)?;
        let mut names: Vec<String> = match covariates {
            Some(list) => list.to_vec(),
            None => self.names.iter().filter(|c| *c != response).cloned().collect(),
        };
        if names.iter().any(|c| c == response) {
            return Err(CliError::Usage(format!("response '{response}' cannot also be a covariate")));
        }
        let mut cols = Vec::with_capacity(names.len() + 1);
        for c in &names {
            cols.push(self.numeric(c)?);
        }
        if intercept {
            if names.iter().any(|c| c == INTERCEPT) {
                return Err(CliError::Data(format!("column name '{INTERCEPT}' is reserved")));
            }
            names.insert(0, INTERCEPT.to_string());
            cols.insert(0, vec![1.0; self.n]);
        }
        if cols.is_empty() {
            return Err(CliError::Usage("model has no columns".into()));
        }
        if self.n <= cols.len() {
            return Err(CliError::Data(format!(
                "need more rows than model columns (n = {}, p = {})",
                self.n,
                cols.len()
            )));
        }
        let x = DMatrix::from_fn(self.n, cols.len(), |i, j| cols[j][i]);
        Ok(Model {
            response: response.to_string(),
            y,
            x,
            covariates: names,
        })
    }
}

impl Model {
    pub fn y_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y)
    }

    /// Column positions of the named covariates.
    pub fn positions(&self, names: &[String]) -> Result<Vec<usize>, CliError> {
        names
            .iter()
            .map(|n| {
                self.covariates.iter().position(|c| c == n).ok_or_else(|| {
                    CliError::Usage(format!(
                        "tested column '{n}' is not a covariate (covariates: {})",
                        self.covariates.join(", ")
                    ))
                })
            })
            .collect()
    }
}

fn builder() -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.has_headers(true).trim(csv::Trim::All);
    b
}

fn parse_cell(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}
