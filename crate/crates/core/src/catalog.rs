//! Data-dictionary catalogs of candidate SDOH variables.
//!
//! A catalog is loaded from a CSV export with one row per variable. Each row
//! carries the variable name, a free-text description, and a description of
//! the originating data source, plus optional gold-domain and per-annotator
//! label columns. Catalogs are immutable after load and safe to share across
//! threads.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// The five SDOH domains, keyed 1-5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SdohDomain {
    SocialCommunity,
    EconomicStability,
    EducationAccess,
    BuiltEnvironment,
    HealthcareAccess,
}

impl SdohDomain {
    pub const ALL: [SdohDomain; 5] = [
        SdohDomain::SocialCommunity,
        SdohDomain::EconomicStability,
        SdohDomain::EducationAccess,
        SdohDomain::BuiltEnvironment,
        SdohDomain::HealthcareAccess,
    ];

    pub fn code(self) -> u8 {
        match self {
            SdohDomain::SocialCommunity => 1,
            SdohDomain::EconomicStability => 2,
            SdohDomain::EducationAccess => 3,
            SdohDomain::BuiltEnvironment => 4,
            SdohDomain::HealthcareAccess => 5,
        }
    }

    pub fn canonical_name(self) -> &'static str {
        match self {
            SdohDomain::SocialCommunity => "Social and Community Context",
            SdohDomain::EconomicStability => "Economic Stability",
            SdohDomain::EducationAccess => "Education Access and Quality",
            SdohDomain::BuiltEnvironment => "Neighborhood and Built Environment",
            SdohDomain::HealthcareAccess => "Healthcare Access and Quality",
        }
    }

    pub fn from_code(code: u8) -> Option<SdohDomain> {
        SdohDomain::ALL.get(code.checked_sub(1)? as usize).copied()
    }
}

impl fmt::Display for SdohDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl Serialize for SdohDomain {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for SdohDomain {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let code = u8::deserialize(deserializer)?;
        SdohDomain::from_code(code)
            .ok_or_else(|| D::Error::custom(format!("domain code {code} outside 1-5")))
    }
}

/// Which metadata fields to include in a prompt. At least one flag is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldSubset {
    include_name: bool,
    include_description: bool,
    include_source: bool,
}

impl FieldSubset {
    pub const A: FieldSubset = FieldSubset::raw(true, false, false);
    pub const B: FieldSubset = FieldSubset::raw(false, true, false);
    pub const C: FieldSubset = FieldSubset::raw(false, false, true);
    pub const AB: FieldSubset = FieldSubset::raw(true, true, false);
    pub const AC: FieldSubset = FieldSubset::raw(true, false, true);
    pub const BC: FieldSubset = FieldSubset::raw(false, true, true);
    pub const ABC: FieldSubset = FieldSubset::raw(true, true, true);

    /// All seven subsets in canonical sweep order.
    pub const ALL: [FieldSubset; 7] = [
        FieldSubset::A,
        FieldSubset::B,
        FieldSubset::C,
        FieldSubset::AB,
        FieldSubset::AC,
        FieldSubset::BC,
        FieldSubset::ABC,
    ];

    const fn raw(name: bool, description: bool, source: bool) -> FieldSubset {
        FieldSubset {
            include_name: name,
            include_description: description,
            include_source: source,
        }
    }

    /// Returns `None` when no field is selected.
    pub fn new(name: bool, description: bool, source: bool) -> Option<FieldSubset> {
        if name || description || source {
            Some(FieldSubset::raw(name, description, source))
        } else {
            None
        }
    }

    pub fn include_name(self) -> bool {
        self.include_name
    }

    pub fn include_description(self) -> bool {
        self.include_description
    }

    pub fn include_source(self) -> bool {
        self.include_source
    }

    pub fn label(self) -> &'static str {
        match (self.include_name, self.include_description, self.include_source) {
            (true, false, false) => "A",
            (false, true, false) => "B",
            (false, false, true) => "C",
            (true, true, false) => "AB",
            (true, false, true) => "AC",
            (false, true, true) => "BC",
            (true, true, true) => "ABC",
            (false, false, false) => unreachable!("empty subset is unconstructible"),
        }
    }

    pub fn from_label(label: &str) -> Option<FieldSubset> {
        FieldSubset::ALL.iter().copied().find(|s| s.label() == label)
    }
}

impl fmt::Display for FieldSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for FieldSubset {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for FieldSubset {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let label = String::deserialize(deserializer)?;
        FieldSubset::from_label(&label)
            .ok_or_else(|| D::Error::custom(format!("unknown field subset {label:?}")))
    }
}

/// Tag identifying one of the three metadata fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldTag {
    Name,
    Description,
    Source,
}

impl FieldTag {
    pub fn letter(self) -> char {
        match self {
            FieldTag::Name => 'A',
            FieldTag::Description => 'B',
            FieldTag::Source => 'C',
        }
    }
}

/// One data-dictionary entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableRecord {
    pub dataset_id: String,
    pub variable_name: String,
    pub variable_description: String,
    pub data_source_description: String,
    pub gold_domain: Option<SdohDomain>,
    /// One label per annotator; empty when the dictionary has no annotator columns.
    pub annotator_labels: Vec<SdohDomain>,
}

impl VariableRecord {
    pub fn new(
        dataset_id: impl Into<String>,
        variable_name: impl Into<String>,
        variable_description: impl Into<String>,
        data_source_description: impl Into<String>,
    ) -> VariableRecord {
        VariableRecord {
            dataset_id: dataset_id.into(),
            variable_name: variable_name.into(),
            variable_description: variable_description.into(),
            data_source_description: data_source_description.into(),
            gold_domain: None,
            annotator_labels: Vec::new(),
        }
    }

    pub fn with_gold(mut self, domain: SdohDomain) -> VariableRecord {
        self.gold_domain = Some(domain);
        self
    }
}

/// Emit the selected fields in fixed A, B, C order. Omitted fields are absent,
/// not blank.
pub fn render_fields(record: &VariableRecord, subset: FieldSubset) -> Vec<(FieldTag, &str)> {
    let mut fields = Vec::with_capacity(3);
    if subset.include_name() {
        fields.push((FieldTag::Name, record.variable_name.as_str()));
    }
    if subset.include_description() {
        fields.push((FieldTag::Description, record.variable_description.as_str()));
    }
    if subset.include_source() {
        fields.push((FieldTag::Source, record.data_source_description.as_str()));
    }
    fields
}

/// An ordered, immutable collection of variable records. Iteration order
/// equals file order so downstream runs are deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableCatalog {
    records: Vec<VariableRecord>,
    annotator_count: usize,
}

impl VariableCatalog {
    /// Build a catalog from records, enforcing name uniqueness and uniform
    /// annotator-label length.
    pub fn new(records: Vec<VariableRecord>) -> Result<VariableCatalog, CatalogError> {
        let annotator_count = records.first().map_or(0, |r| r.annotator_labels.len());
        let mut seen = HashSet::new();
        for (i, record) in records.iter().enumerate() {
            if record.variable_name.is_empty() {
                return Err(CatalogError::EmptyName { row: i + 1 });
            }
            if !seen.insert((&record.dataset_id, &record.variable_name)) {
                return Err(CatalogError::DuplicateVariable {
                    row: i + 1,
                    name: record.variable_name.clone(),
                });
            }
            if record.annotator_labels.len() != annotator_count {
                return Err(CatalogError::RaggedAnnotators {
                    row: i + 1,
                    expected: annotator_count,
                    found: record.annotator_labels.len(),
                });
            }
        }
        Ok(VariableCatalog {
            records,
            annotator_count,
        })
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn annotator_count(&self) -> usize {
        self.annotator_count
    }

    pub fn records(&self) -> &[VariableRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, VariableRecord> {
        self.records.iter()
    }

    pub fn get_by_name(&self, variable_name: &str) -> Option<&VariableRecord> {
        self.records.iter().find(|r| r.variable_name == variable_name)
    }

    /// True when every record carries a gold label.
    pub fn fully_gold_labeled(&self) -> bool {
        self.records.iter().all(|r| r.gold_domain.is_some())
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("duplicate variable name {name:?} at data row {row}")]
    DuplicateVariable { row: usize, name: String },
    #[error("bad label {value:?} in column {column:?} at data row {row}: expected an integer 1-5")]
    BadLabel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("empty variable name at data row {row}")]
    EmptyName { row: usize },
    #[error("data row {row} has {found} annotator labels, expected {expected}")]
    RaggedAnnotators {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("no gold-labeled variable for domain {0}")]
    DomainUnrepresented(u8),
}

const COL_NAME: &str = "variable_name";
const COL_DESCRIPTION: &str = "variable_label";
const COL_SOURCE: &str = "data_source";
const COL_GOLD: &str = "gold_domain";
const ANNOTATOR_PREFIX: &str = "annotator_";

fn parse_domain_cell(
    cell: &str,
    row: usize,
    column: &str,
) -> Result<Option<SdohDomain>, CatalogError> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<u8>()
        .ok()
        .and_then(SdohDomain::from_code)
        .map(Some)
        .ok_or_else(|| CatalogError::BadLabel {
            row,
            column: column.to_string(),
            value: cell.to_string(),
        })
}

/// Load a dictionary CSV. Required columns: `variable_name`, `variable_label`,
/// `data_source`. Optional: `gold_domain` and contiguous `annotator_1..annotator_k`.
/// Cell whitespace is trimmed at the edges; interior whitespace is preserved.
pub fn load_dictionary(
    path: impl AsRef<Path>,
    dataset_id: &str,
) -> Result<VariableCatalog, CatalogError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;

    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let name_idx = col(COL_NAME).ok_or_else(|| CatalogError::MissingColumn(COL_NAME.into()))?;
    let desc_idx =
        col(COL_DESCRIPTION).ok_or_else(|| CatalogError::MissingColumn(COL_DESCRIPTION.into()))?;
    let source_idx =
        col(COL_SOURCE).ok_or_else(|| CatalogError::MissingColumn(COL_SOURCE.into()))?;
    let gold_idx = col(COL_GOLD);

    // Annotator columns must be contiguous starting at annotator_1.
    let annotator_count = headers
        .iter()
        .filter(|h| {
            h.strip_prefix(ANNOTATOR_PREFIX)
                .is_some_and(|i| i.parse::<usize>().is_ok())
        })
        .count();
    let mut annotator_idx = Vec::with_capacity(annotator_count);
    for k in 1..=annotator_count {
        let column = format!("{ANNOTATOR_PREFIX}{k}");
        annotator_idx.push(col(&column).ok_or(CatalogError::MissingColumn(column))?);
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let data_row = i + 1;
        let cell = |idx: usize| row.get(idx).unwrap_or("").trim();

        let variable_name = cell(name_idx).to_string();
        if variable_name.is_empty() {
            return Err(CatalogError::EmptyName { row: data_row });
        }
        let gold_domain = match gold_idx {
            Some(idx) => parse_domain_cell(cell(idx), data_row, COL_GOLD)?,
            None => None,
        };
        let mut annotator_labels = Vec::with_capacity(annotator_idx.len());
        for (k, &idx) in annotator_idx.iter().enumerate() {
            let column = format!("{ANNOTATOR_PREFIX}{}", k + 1);
            let label = parse_domain_cell(cell(idx), data_row, &column)?.ok_or_else(|| {
                CatalogError::BadLabel {
                    row: data_row,
                    column,
                    value: String::new(),
                }
            })?;
            annotator_labels.push(label);
        }

        records.push(VariableRecord {
            dataset_id: dataset_id.to_string(),
            variable_name,
            variable_description: cell(desc_idx).to_string(),
            data_source_description: cell(source_idx).to_string(),
            gold_domain,
            annotator_labels,
        });
    }

    VariableCatalog::new(records)
}

/// Write a catalog back out as a dictionary CSV. The gold column is emitted
/// only when at least one record carries a gold label.
pub fn write_dictionary(
    catalog: &VariableCatalog,
    path: impl AsRef<Path>,
) -> Result<(), CatalogError> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let has_gold = catalog.iter().any(|r| r.gold_domain.is_some());

    let mut header = vec![
        COL_NAME.to_string(),
        COL_DESCRIPTION.to_string(),
        COL_SOURCE.to_string(),
    ];
    if has_gold {
        header.push(COL_GOLD.to_string());
    }
    for k in 1..=catalog.annotator_count() {
        header.push(format!("{ANNOTATOR_PREFIX}{k}"));
    }
    writer.write_record(&header)?;

    for record in catalog.iter() {
        let mut row = vec![
            record.variable_name.clone(),
            record.variable_description.clone(),
            record.data_source_description.clone(),
        ];
        if has_gold {
            row.push(
                record
                    .gold_domain
                    .map_or_else(String::new, |d| d.code().to_string()),
            );
        }
        for label in &record.annotator_labels {
            row.push(label.code().to_string());
        }
        writer.write_record(&row)?;
    }
    writer.flush().map_err(CatalogError::Io)
}

/// Pick one gold-labeled exemplar per domain by seeded uniform sampling and
/// return it together with the catalog that remains after removing the five.
pub fn holdout_exemplars(
    catalog: &VariableCatalog,
    seed: u64,
) -> Result<(Vec<VariableRecord>, VariableCatalog), CatalogError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(5);
    for domain in SdohDomain::ALL {
        let candidates: Vec<usize> = catalog
            .iter()
            .enumerate()
            .filter(|(_, r)| r.gold_domain == Some(domain))
            .map(|(i, _)| i)
            .collect();
        if candidates.is_empty() {
            return Err(CatalogError::DomainUnrepresented(domain.code()));
        }
        chosen.push(candidates[rng.random_range(0..candidates.len())]);
    }

    let exemplars: Vec<VariableRecord> = chosen
        .iter()
        .map(|&i| catalog.records()[i].clone())
        .collect();
    let picked: HashSet<usize> = chosen.iter().copied().collect();
    let remaining: Vec<VariableRecord> = catalog
        .iter()
        .enumerate()
        .filter(|(i, _)| !picked.contains(i))
        .map(|(_, r)| r.clone())
        .collect();
    Ok((exemplars, VariableCatalog::new(remaining)?))
}
