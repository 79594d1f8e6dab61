//! Merging domain-filtered SDOH panels onto patient records.
//!
//! One output row per patient: clinical columns first, then each panel's
//! filtered, forward-filled columns prefixed with the panel's dataset id.
//! The merge is row-local (key = patient tract and index year); cells still
//! missing after forward-fill pass through for downstream imputation.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::SdohDomain;
use crate::panel::{IntegrateError, SdohPanel, TractFips, TractYearKey};

/// Column-name prefix marking non-clinical sources in a design matrix.
fn prefixed(dataset_id: &str, feature: &str) -> String {
    format!("{dataset_id}.{feature}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub tract_fips: String,
    pub index_year: i32,
    pub clinical: Vec<Option<f64>>,
    /// 1 = readmitted within the outcome window, 0 = not.
    pub outcome: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientTable {
    pub clinical_columns: Vec<String>,
    pub patients: Vec<PatientRecord>,
}

/// Load patients from CSV: `patient_id`, `tract_fips`, `index_year`,
/// `outcome`, then one column per clinical feature (blank = missing).
pub fn load_patients(path: impl AsRef<Path>) -> Result<PatientTable, IntegrateError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let required = ["patient_id", "tract_fips", "index_year", "outcome"];
    let mut fixed_idx = [0usize; 4];
    for (slot, name) in fixed_idx.iter_mut().zip(required) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IntegrateError::MissingColumn(name.into()))?;
    }
    let clinical_idx: Vec<usize> = (0..headers.len())
        .filter(|i| !fixed_idx.contains(i))
        .collect();
    let clinical_columns: Vec<String> = clinical_idx.iter().map(|&i| headers[i].clone()).collect();

    let mut patients = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let data_row = i + 1;
        let cell = |idx: usize| row.get(idx).unwrap_or("").trim();
        let patient_id = cell(fixed_idx[0]).to_string();
        if !seen.insert(patient_id.clone()) {
            return Err(IntegrateError::DuplicatePatient(patient_id));
        }
        let index_year: i32 = cell(fixed_idx[2]).parse().map_err(|_| IntegrateError::BadYear {
            row: data_row,
            value: cell(fixed_idx[2]).to_string(),
        })?;
        let outcome = match cell(fixed_idx[3]) {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(IntegrateError::BadOutcome {
                    patient_id,
                    value: other.to_string(),
                })
            }
        };
        let mut clinical = Vec::with_capacity(clinical_idx.len());
        for (&idx, name) in clinical_idx.iter().zip(&clinical_columns) {
            let value = cell(idx);
            if value.is_empty() {
                clinical.push(None);
            } else {
                clinical.push(Some(value.parse().map_err(|_| IntegrateError::BadNumber {
                    row: data_row,
                    column: name.clone(),
                    value: value.to_string(),
                })?));
            }
        }
        patients.push(PatientRecord {
            patient_id,
            tract_fips: cell(fixed_idx[1]).to_string(),
            index_year,
            clinical,
            outcome,
        });
    }
    Ok(PatientTable {
        clinical_columns,
        patients,
    })
}

/// Where a design-matrix column came from and how far forward-fill reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProvenance {
    pub name: String,
    /// `"clinical"` or a panel dataset id.
    pub source: String,
    pub domain: Option<SdohDomain>,
    /// Largest observed gap, in years, between a query and the year that
    /// supplied its value. Zero when every value came from the query year.
    pub max_fill_years: i32,
    pub filled_cells: usize,
    pub missing_cells: usize,
}

/// Patient-level feature matrix with provenance. Missing cells are `None`
/// until imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub columns: Vec<String>,
    pub provenance: Vec<ColumnProvenance>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub outcomes: Vec<u8>,
    pub patient_ids: Vec<String>,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    /// New matrix restricted to the given column indices, order preserved.
    pub fn project(&self, keep: &[usize]) -> DesignMatrix {
        DesignMatrix {
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            provenance: keep.iter().map(|&i| self.provenance[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|row| keep.iter().map(|&i| row[i]).collect())
                .collect(),
            outcomes: self.outcomes.clone(),
            patient_ids: self.patient_ids.clone(),
        }
    }

    /// Column indices whose provenance source matches any of the given names.
    pub fn columns_from_sources(&self, sources: &[&str]) -> Vec<usize> {
        self.provenance
            .iter()
            .enumerate()
            .filter(|(_, p)| sources.contains(&p.source.as_str()))
            .map(|(i, _)| i)
            .collect()
    }

    /// Distinct non-clinical sources in column order.
    pub fn panel_sources(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for p in &self.provenance {
            if p.source != "clinical" && !seen.contains(&p.source) {
                seen.push(p.source.clone());
            }
        }
        seen
    }
}

/// Merge panels onto patients. Each panel is filtered to the requested
/// domains, then looked up per patient at (tract, index year) with
/// forward-fill. Panel feature names must be disjoint after prefixing.
pub fn merge(
    patients: &PatientTable,
    panels: &[SdohPanel],
    domains: &BTreeSet<SdohDomain>,
) -> Result<DesignMatrix, IntegrateError> {
    let filtered: Vec<SdohPanel> = panels.iter().map(|p| p.filter_by_domain(domains)).collect();

    let mut columns: Vec<String> = patients.clinical_columns.clone();
    let mut provenance: Vec<ColumnProvenance> = patients
        .clinical_columns
        .iter()
        .map(|name| ColumnProvenance {
            name: name.clone(),
            source: "clinical".to_string(),
            domain: None,
            max_fill_years: 0,
            filled_cells: 0,
            missing_cells: 0,
        })
        .collect();
    for panel in &filtered {
        for (feature, domain) in panel.features() {
            let name = prefixed(&panel.dataset_id, feature);
            if columns.contains(&name) {
                return Err(IntegrateError::FeatureCollision(name));
            }
            columns.push(name.clone());
            provenance.push(ColumnProvenance {
                name,
                source: panel.dataset_id.clone(),
                domain: Some(*domain),
                max_fill_years: 0,
                filled_cells: 0,
                missing_cells: 0,
            });
        }
    }

    let mut rows = Vec::with_capacity(patients.patients.len());
    let mut outcomes = Vec::with_capacity(patients.patients.len());
    let mut patient_ids = Vec::with_capacity(patients.patients.len());
    for patient in &patients.patients {
        let tract =
            TractFips::parse(&patient.tract_fips).ok_or_else(|| IntegrateError::BadFips {
                patient_id: patient.patient_id.clone(),
                value: patient.tract_fips.clone(),
            })?;
        let key = TractYearKey {
            tract,
            year: patient.index_year,
        };
        let mut row = patient.clinical.clone();
        let mut column = row.len();
        for panel in &filtered {
            for (value, source_year) in panel.forward_fill_with_years(&key) {
                row.push(value);
                let stats = &mut provenance[column];
                match (value, source_year) {
                    (Some(_), Some(year)) => {
                        stats.filled_cells += 1;
                        stats.max_fill_years = stats.max_fill_years.max(key.year - year);
                    }
                    _ => stats.missing_cells += 1,
                }
                column += 1;
            }
        }
        for (stats, cell) in provenance.iter_mut().zip(&row).take(patient.clinical.len()) {
            match cell {
                Some(_) => stats.filled_cells += 1,
                None => stats.missing_cells += 1,
            }
        }
        rows.push(row);
        outcomes.push(patient.outcome);
        patient_ids.push(patient.patient_id.clone());
    }

    Ok(DesignMatrix {
        columns,
        provenance,
        rows,
        outcomes,
        patient_ids,
    })
}

/// Write the design matrix as CSV (`patient_id`, `outcome`, then feature
/// columns; blank = missing).
pub fn write_design(matrix: &DesignMatrix, path: impl AsRef<Path>) -> Result<(), IntegrateError> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["patient_id".to_string(), "outcome".to_string()];
    header.extend(matrix.columns.iter().cloned());
    writer.write_record(&header)?;
    for ((row, outcome), patient_id) in matrix
        .rows
        .iter()
        .zip(&matrix.outcomes)
        .zip(&matrix.patient_ids)
    {
        let mut record = vec![patient_id.clone(), outcome.to_string()];
        record.extend(
            row.iter()
                .map(|cell| cell.map_or_else(String::new, |v| format!("{v}"))),
        );
        writer.write_record(&record)?;
    }
    writer.flush().map_err(IntegrateError::Io)
}

/// Write the provenance sidecar as JSON.
pub fn write_provenance(
    matrix: &DesignMatrix,
    path: impl AsRef<Path>,
) -> Result<(), IntegrateError> {
    let payload =
        serde_json::to_string_pretty(&matrix.provenance).expect("provenance serializes");
    std::fs::write(path.as_ref(), payload).map_err(IntegrateError::Io)
}

/// Load a design matrix CSV together with its provenance sidecar.
pub fn load_design(
    design_path: impl AsRef<Path>,
    provenance_path: impl AsRef<Path>,
) -> Result<DesignMatrix, IntegrateError> {
    let provenance: Vec<ColumnProvenance> =
        serde_json::from_str(&std::fs::read_to_string(provenance_path.as_ref())?).map_err(
            |err| {
                IntegrateError::Io(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("provenance sidecar: {err}"),
                ))
            },
        )?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(design_path.as_ref())?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.first().map(String::as_str) != Some("patient_id")
        || headers.get(1).map(String::as_str) != Some("outcome")
    {
        return Err(IntegrateError::MissingColumn("patient_id, outcome".into()));
    }
    let columns: Vec<String> = headers[2..].to_vec();

    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    let mut patient_ids = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let data_row = i + 1;
        let patient_id = record.get(0).unwrap_or("").trim().to_string();
        let outcome = match record.get(1).unwrap_or("").trim() {
            "0" => 0u8,
            "1" => 1,
            other => {
                return Err(IntegrateError::BadOutcome {
                    patient_id,
                    value: other.to_string(),
                })
            }
        };
        let mut row = Vec::with_capacity(columns.len());
        for (j, name) in columns.iter().enumerate() {
            let cell = record.get(j + 2).unwrap_or("").trim();
            if cell.is_empty() {
                row.push(None);
            } else {
                row.push(Some(cell.parse().map_err(|_| IntegrateError::BadNumber {
                    row: data_row,
                    column: name.clone(),
                    value: cell.to_string(),
                })?));
            }
        }
        rows.push(row);
        outcomes.push(outcome);
        patient_ids.push(patient_id);
    }
    Ok(DesignMatrix {
        columns,
        provenance,
        rows,
        outcomes,
        patient_ids,
    })
}
