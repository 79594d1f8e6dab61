//! Tract-level SDOH panels: (tract FIPS, year) keyed feature vectors with
//! domain tags, domain filtering, and most-recent-year forward-fill lookups.
//!
//! Panel values ship as a wide CSV (`TRACTFIPS`, `YEAR`, then one column per
//! feature; blank cells are missing). Feature-to-domain annotations come from
//! a sidecar dictionary CSV with `gold_domain` set, so an annotated
//! dictionary doubles as the sidecar.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::catalog::{SdohDomain, VariableCatalog};

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("tract FIPS {value:?} at data row {row} is not an 11-digit code")]
    BadTract { row: usize, value: String },
    #[error("patient {patient_id}: tract FIPS {value:?} is not an 11-digit code")]
    BadFips { patient_id: String, value: String },
    #[error("bad year {value:?} at data row {row}")]
    BadYear { row: usize, value: String },
    #[error("bad number {value:?} in column {column:?} at data row {row}")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("bad outcome {value:?} for patient {patient_id}: expected 0 or 1")]
    BadOutcome { patient_id: String, value: String },
    #[error("panel feature {0:?} has no domain annotation in the sidecar")]
    UnannotatedFeature(String),
    #[error("duplicate feature column {0:?}")]
    DuplicateFeature(String),
    #[error("duplicate patient id {0:?}")]
    DuplicatePatient(String),
    #[error("column name {0:?} collides across sources after prefixing")]
    FeatureCollision(String),
    #[error("duplicate panel cell for tract {tract} year {year}")]
    DuplicateCell { tract: String, year: i32 },
}

/// An 11-digit census tract code. Leading zeros are significant; shorter
/// all-digit strings are zero-padded on ingest (spreadsheet exports often
/// strip the leading zero).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TractFips(String);

impl TractFips {
    pub fn parse(raw: &str) -> Option<TractFips> {
        let raw = raw.trim();
        if raw.is_empty() || raw.len() > 11 || !raw.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if raw.len() < 11 {
            log::warn!("zero-padding {}-digit tract FIPS {raw:?} to 11 digits", raw.len());
            Some(TractFips(format!("{raw:0>11}")))
        } else {
            Some(TractFips(raw.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TractFips {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Merge key: tract and calendar year.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TractYearKey {
    pub tract: TractFips,
    pub year: i32,
}

/// A loaded panel: ordered, domain-tagged features and per-(tract, year)
/// value vectors. Immutable after load.
#[derive(Debug, Clone)]
pub struct SdohPanel {
    pub dataset_id: String,
    features: Vec<(String, SdohDomain)>,
    values: HashMap<(TractFips, i32), Vec<Option<f64>>>,
    years_present: BTreeSet<i32>,
}

impl SdohPanel {
    pub fn new(
        dataset_id: impl Into<String>,
        features: Vec<(String, SdohDomain)>,
        cells: Vec<(TractFips, i32, Vec<Option<f64>>)>,
    ) -> Result<SdohPanel, IntegrateError> {
        let mut seen = std::collections::HashSet::new();
        for (name, _) in &features {
            if !seen.insert(name.clone()) {
                return Err(IntegrateError::DuplicateFeature(name.clone()));
            }
        }
        let mut values = HashMap::with_capacity(cells.len());
        let mut years_present = BTreeSet::new();
        for (tract, year, row) in cells {
            debug_assert_eq!(row.len(), features.len());
            years_present.insert(year);
            if values.insert((tract.clone(), year), row).is_some() {
                return Err(IntegrateError::DuplicateCell {
                    tract: tract.to_string(),
                    year,
                });
            }
        }
        Ok(SdohPanel {
            dataset_id: dataset_id.into(),
            features,
            values,
            years_present,
        })
    }

    /// Load panel values plus the sidecar annotation dictionary. Every value
    /// column must be annotated with a gold domain in the sidecar.
    pub fn load(
        values_path: impl AsRef<Path>,
        annotations: &VariableCatalog,
        dataset_id: &str,
    ) -> Result<SdohPanel, IntegrateError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(values_path.as_ref())?;
        let headers: Vec<String> = reader
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let tract_idx = headers
            .iter()
            .position(|h| h == "TRACTFIPS")
            .ok_or_else(|| IntegrateError::MissingColumn("TRACTFIPS".into()))?;
        let year_idx = headers
            .iter()
            .position(|h| h == "YEAR")
            .ok_or_else(|| IntegrateError::MissingColumn("YEAR".into()))?;

        let mut features = Vec::new();
        let mut feature_idx = Vec::new();
        for (idx, name) in headers.iter().enumerate() {
            if idx == tract_idx || idx == year_idx {
                continue;
            }
            let domain = annotations
                .get_by_name(name)
                .and_then(|r| r.gold_domain)
                .ok_or_else(|| IntegrateError::UnannotatedFeature(name.clone()))?;
            features.push((name.clone(), domain));
            feature_idx.push(idx);
        }

        let mut cells = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            let data_row = i + 1;
            let raw_tract = row.get(tract_idx).unwrap_or("").trim();
            let tract = TractFips::parse(raw_tract).ok_or_else(|| IntegrateError::BadTract {
                row: data_row,
                value: raw_tract.to_string(),
            })?;
            let raw_year = row.get(year_idx).unwrap_or("").trim();
            let year: i32 = raw_year.parse().map_err(|_| IntegrateError::BadYear {
                row: data_row,
                value: raw_year.to_string(),
            })?;
            let mut vector = Vec::with_capacity(feature_idx.len());
            for (&idx, (name, _)) in feature_idx.iter().zip(&features) {
                let cell = row.get(idx).unwrap_or("").trim();
                if cell.is_empty() {
                    vector.push(None);
                } else {
                    let value: f64 = cell.parse().map_err(|_| IntegrateError::BadNumber {
                        row: data_row,
                        column: name.clone(),
                        value: cell.to_string(),
                    })?;
                    vector.push(Some(value));
                }
            }
            cells.push((tract, year, vector));
        }
        SdohPanel::new(dataset_id, features, cells)
    }

    pub fn features(&self) -> &[(String, SdohDomain)] {
        &self.features
    }

    pub fn years_present(&self) -> &BTreeSet<i32> {
        &self.years_present
    }

    pub fn cell(&self, tract: &TractFips, year: i32) -> Option<&Vec<Option<f64>>> {
        self.values.get(&(tract.clone(), year))
    }

    /// Keep only features tagged with one of the given domains, preserving
    /// order and projecting every value vector accordingly.
    pub fn filter_by_domain(&self, domains: &BTreeSet<SdohDomain>) -> SdohPanel {
        let keep: Vec<usize> = self
            .features
            .iter()
            .enumerate()
            .filter(|(_, (_, domain))| domains.contains(domain))
            .map(|(i, _)| i)
            .collect();
        let features = keep.iter().map(|&i| self.features[i].clone()).collect();
        let values = self
            .values
            .iter()
            .map(|(key, row)| (key.clone(), keep.iter().map(|&i| row[i]).collect()))
            .collect();
        SdohPanel {
            dataset_id: self.dataset_id.clone(),
            features,
            values,
            years_present: self.years_present.clone(),
        }
    }

    /// Per feature independently: the value at the greatest year' <= the
    /// query year for that tract with a non-missing cell, or missing if no
    /// such year exists. Never reads years after the query year.
    pub fn forward_fill_lookup(&self, key: &TractYearKey) -> Vec<Option<f64>> {
        self.forward_fill_with_years(key)
            .into_iter()
            .map(|(value, _)| value)
            .collect()
    }

    /// Forward-fill that also reports which year supplied each value.
    pub fn forward_fill_with_years(&self, key: &TractYearKey) -> Vec<(Option<f64>, Option<i32>)> {
        let mut out = vec![(None, None); self.features.len()];
        let mut unresolved = self.features.len();
        for &year in self.years_present.range(..=key.year).rev() {
            if unresolved == 0 {
                break;
            }
            if let Some(row) = self.values.get(&(key.tract.clone(), year)) {
                for (slot, value) in out.iter_mut().zip(row) {
                    if slot.0.is_none() && slot.1.is_none() {
                        if let Some(v) = value {
                            *slot = (Some(*v), Some(year));
                            unresolved -= 1;
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{VariableCatalog, VariableRecord};
    use std::io::Write as _;

    fn fips(raw: &str) -> TractFips {
        TractFips::parse(raw).unwrap()
    }

    fn key(tract: &str, year: i32) -> TractYearKey {
        TractYearKey {
            tract: fips(tract),
            year,
        }
    }

    fn two_feature_panel() -> SdohPanel {
        let features = vec![
            ("f1".to_string(), SdohDomain::SocialCommunity),
            ("f2".to_string(), SdohDomain::EducationAccess),
        ];
        let c = fips("13089021000");
        let cells = vec![
            (c.clone(), 2015, vec![Some(1.5), Some(10.0)]),
            (c.clone(), 2016, vec![None, Some(11.0)]),
            (c, 2018, vec![None, None]),
        ];
        SdohPanel::new("P", features, cells).unwrap()
    }

    #[test]
    fn fips_requires_eleven_digits_and_pads_short_codes() {
        assert_eq!(fips("13089021000").as_str(), "13089021000");
        assert_eq!(fips("1089021000").as_str(), "01089021000");
        assert!(TractFips::parse("1308902100x").is_none());
        assert!(TractFips::parse("130890210001").is_none());
        assert!(TractFips::parse("").is_none());
    }

    #[test]
    fn missing_year_filled_from_most_recent_earlier_year() {
        let panel = two_feature_panel();
        let filled = panel.forward_fill_lookup(&key("13089021000", 2016));
        // f1 missing in 2016 takes 2015's value; f2 present stays untouched.
        assert_eq!(filled, vec![Some(1.5), Some(11.0)]);

        let years: Vec<Option<i32>> = panel
            .forward_fill_with_years(&key("13089021000", 2016))
            .into_iter()
            .map(|(_, y)| y)
            .collect();
        assert_eq!(years, vec![Some(2015), Some(2016)]);
    }

    #[test]
    fn query_before_any_data_is_missing() {
        let panel = two_feature_panel();
        assert_eq!(
            panel.forward_fill_lookup(&key("13089021000", 2014)),
            vec![None, None]
        );
        // Unknown tract: nothing to fill from.
        assert_eq!(
            panel.forward_fill_lookup(&key("99999999999", 2016)),
            vec![None, None]
        );
    }

    #[test]
    fn fill_never_reads_future_years() {
        let panel = two_feature_panel();
        // 2018 is all-missing; 2017 has no row. Fill for 2018 reaches back to
        // 2016/2015, never sideways or forward.
        assert_eq!(
            panel.forward_fill_lookup(&key("13089021000", 2018)),
            vec![Some(1.5), Some(11.0)]
        );
        assert_eq!(
            panel.forward_fill_lookup(&key("13089021000", 2015)),
            vec![Some(1.5), Some(10.0)]
        );
    }

    #[test]
    fn domain_filter_projects_features_and_values() {
        let panel = two_feature_panel();
        let education: BTreeSet<SdohDomain> = [SdohDomain::EducationAccess].into();
        let filtered = panel.filter_by_domain(&education);
        assert_eq!(filtered.features().len(), 1);
        assert_eq!(filtered.features()[0].0, "f2");
        assert_eq!(
            filtered.forward_fill_lookup(&key("13089021000", 2016)),
            vec![Some(11.0)]
        );

        let all: BTreeSet<SdohDomain> = SdohDomain::ALL.into();
        assert_eq!(panel.filter_by_domain(&all).features().len(), 2);

        let none: BTreeSet<SdohDomain> = [SdohDomain::HealthcareAccess].into();
        assert!(panel.filter_by_domain(&none).features().is_empty());
    }

    #[test]
    fn load_reads_wide_csv_with_sidecar_annotations() {
        let mut values = tempfile::NamedTempFile::new().unwrap();
        write!(
            values,
            "TRACTFIPS,YEAR,pop_count,school_count\n\
             13089021000,2015,1200,4\n\
             13089021000,2016,,5\n"
        )
        .unwrap();
        values.flush().unwrap();

        let sidecar = VariableCatalog::new(vec![
            VariableRecord::new("P", "pop_count", "population", "census")
                .with_gold(SdohDomain::SocialCommunity),
            VariableRecord::new("P", "school_count", "schools", "nces")
                .with_gold(SdohDomain::EducationAccess),
        ])
        .unwrap();

        let panel = SdohPanel::load(values.path(), &sidecar, "P").unwrap();
        assert_eq!(panel.features().len(), 2);
        assert_eq!(
            panel.forward_fill_lookup(&key("13089021000", 2016)),
            vec![Some(1200.0), Some(5.0)]
        );
    }

    #[test]
    fn unannotated_feature_is_rejected() {
        let mut values = tempfile::NamedTempFile::new().unwrap();
        write!(values, "TRACTFIPS,YEAR,mystery\n13089021000,2015,1\n").unwrap();
        values.flush().unwrap();
        let sidecar = VariableCatalog::new(vec![]).unwrap();
        match SdohPanel::load(values.path(), &sidecar, "P") {
            Err(IntegrateError::UnannotatedFeature(name)) => assert_eq!(name, "mystery"),
            other => panic!("expected UnannotatedFeature, got {other:?}"),
        }
    }
}
