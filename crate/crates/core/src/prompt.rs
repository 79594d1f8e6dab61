//! Prompt rendering for zero-shot and one-shot domain classification, sweep
//! enumeration across field subsets, and character-based token estimates.
//!
//! Prompt bytes are deterministic: the same record and spec always render the
//! same string, with `\n` newlines throughout, so responses can be cached by
//! content hash.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{
    render_fields, FieldSubset, FieldTag, SdohDomain, VariableCatalog, VariableRecord,
};

/// Fixed task preamble shown at the top of every prompt.
pub const TASK_PREAMBLE: &str = "You are a researcher tasked with annotating a variable describing social determinants of health (SDOH). This is a multi-class classification task. Respond with a number (1-5) or \"?\" if unsure. Give a one number response. The five domain options are:";

/// The numbered domain options block. The first four lines end with a comma
/// and a trailing space; the last ends with a period.
pub fn domain_options() -> String {
    let mut out = String::new();
    for domain in SdohDomain::ALL {
        if domain.code() < 5 {
            out.push_str(&format!("({}) {}, \n", domain.code(), domain.canonical_name()));
        } else {
            out.push_str(&format!("({}) {}.", domain.code(), domain.canonical_name()));
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("expected 5 exemplars, got {0}")]
    ExemplarCount(usize),
    #[error("exemplar {position} must cover domain {expected}, found {found:?}")]
    ExemplarDomain {
        position: usize,
        expected: u8,
        found: Option<u8>,
    },
}

/// Five solved examples, one per domain, ordered by domain code 1-5.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarSet {
    entries: Vec<(VariableRecord, SdohDomain)>,
}

impl ExemplarSet {
    pub fn new(entries: Vec<(VariableRecord, SdohDomain)>) -> Result<ExemplarSet, PromptError> {
        if entries.len() != 5 {
            return Err(PromptError::ExemplarCount(entries.len()));
        }
        for (i, (_, domain)) in entries.iter().enumerate() {
            let expected = (i + 1) as u8;
            if domain.code() != expected {
                return Err(PromptError::ExemplarDomain {
                    position: i + 1,
                    expected,
                    found: Some(domain.code()),
                });
            }
        }
        Ok(ExemplarSet { entries })
    }

    /// Build from records whose gold labels cover domains 1-5 in order.
    pub fn from_records(records: Vec<VariableRecord>) -> Result<ExemplarSet, PromptError> {
        if records.len() != 5 {
            return Err(PromptError::ExemplarCount(records.len()));
        }
        let mut entries = Vec::with_capacity(5);
        for (i, record) in records.into_iter().enumerate() {
            let expected = (i + 1) as u8;
            match record.gold_domain {
                Some(domain) if domain.code() == expected => entries.push((record, domain)),
                other => {
                    return Err(PromptError::ExemplarDomain {
                        position: i + 1,
                        expected,
                        found: other.map(|d| d.code()),
                    })
                }
            }
        }
        Ok(ExemplarSet { entries })
    }

    /// The default exemplar set: one well-known variable per domain.
    pub fn builtin() -> ExemplarSet {
        let make = |name: &str, description: &str, source: &str, domain: SdohDomain| {
            (
                VariableRecord::new("AHRQ", name, description, source).with_gold(domain),
                domain,
            )
        };
        ExemplarSet {
            entries: vec![
                make(
                    "ACS_PCT_OTHER_FEMALE",
                    "Percentage of population reporting some other race alone and female",
                    "American Community Survey (ACS)",
                    SdohDomain::SocialCommunity,
                ),
                make(
                    "OPP_INCAR_HSP_F_HH_50PT",
                    "Fraction incarcerated on April 1st 2010: Hispanic female child with parents from 50th household income percentile",
                    "The Opportunity Atlas (OPP)",
                    SdohDomain::EconomicStability,
                ),
                make(
                    "ACS_PCT_POSTHS_ED",
                    "Percentage of population with any postsecondary education (ages 25 and over)",
                    "American Community Survey (ACS)",
                    SdohDomain::EducationAccess,
                ),
                make(
                    "ACS_PCT_RENTER_HU_ABOVE65",
                    "Percentage of renter-occupied housing units occupied by householders aged 65 and above",
                    "American Community Survey (ACS)",
                    SdohDomain::BuiltEnvironment,
                ),
                make(
                    "CDCP_KIDNEY_DISEASE_ADULT_C_census_tractlevel",
                    "Crude prevalence of adults aged 18 years and older who report ever having been told by a doctor, nurse, or other health professional that they have kidney disease (",
                    "Centers for Disease Control and Prevention Population Level Analysis and Community Estimates: Local Data for Better Health (CDCP)",
                    SdohDomain::HealthcareAccess,
                ),
            ],
        }
    }

    pub fn entries(&self) -> &[(VariableRecord, SdohDomain)] {
        &self.entries
    }

    pub fn records(&self) -> impl Iterator<Item = &VariableRecord> {
        self.entries.iter().map(|(r, _)| r)
    }
}

/// Resolve the exemplar set for a one-shot run against a gold-labeled catalog.
///
/// If the catalog contains all five builtin exemplar variables with matching
/// gold labels, those are used; otherwise one exemplar per domain is sampled
/// with the given seed. Either way the chosen records are removed from the
/// returned evaluation catalog.
pub fn resolve_exemplars(
    catalog: &VariableCatalog,
    seed: u64,
) -> Result<(ExemplarSet, VariableCatalog), crate::catalog::CatalogError> {
    let builtin = ExemplarSet::builtin();
    let matches: Vec<&VariableRecord> = builtin
        .records()
        .filter_map(|b| catalog.get_by_name(&b.variable_name))
        .collect();
    if matches.len() == 5
        && matches
            .iter()
            .zip(builtin.entries())
            .all(|(found, (_, domain))| found.gold_domain == Some(*domain))
    {
        let picked: Vec<VariableRecord> = matches.into_iter().cloned().collect();
        let names: std::collections::HashSet<&str> =
            picked.iter().map(|r| r.variable_name.as_str()).collect();
        let remaining: Vec<VariableRecord> = catalog
            .iter()
            .filter(|r| !names.contains(r.variable_name.as_str()))
            .cloned()
            .collect();
        let set = ExemplarSet::from_records(picked).expect("builtin exemplars cover domains 1-5");
        return Ok((set, VariableCatalog::new(remaining)?));
    }
    let (records, remaining) = crate::catalog::holdout_exemplars(catalog, seed)?;
    let set = ExemplarSet::from_records(records).expect("holdout returns one record per domain");
    Ok((set, remaining))
}

/// How to render a classification prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    shots: u8,
    pub subset: FieldSubset,
    exemplars: Option<ExemplarSet>,
    pub instruction_wrapper: bool,
}

impl PromptSpec {
    pub fn zero_shot(subset: FieldSubset) -> PromptSpec {
        PromptSpec {
            shots: 0,
            subset,
            exemplars: None,
            instruction_wrapper: true,
        }
    }

    pub fn one_shot(subset: FieldSubset, exemplars: ExemplarSet) -> PromptSpec {
        PromptSpec {
            shots: 1,
            subset,
            exemplars: Some(exemplars),
            instruction_wrapper: true,
        }
    }

    pub fn without_instruction_wrapper(mut self) -> PromptSpec {
        self.instruction_wrapper = false;
        self
    }

    pub fn shots(&self) -> u8 {
        self.shots
    }

    pub fn exemplars(&self) -> Option<&ExemplarSet> {
        self.exemplars.as_ref()
    }
}

fn field_line(tag: FieldTag, text: &str) -> String {
    match tag {
        FieldTag::Name => format!("Variable name: \"{text}\"."),
        FieldTag::Description => format!("Variable description: \"{text}\"."),
        FieldTag::Source => format!("Data source: \"{text}\"."),
    }
}

/// Render the full prompt for one record.
///
/// Layout: preamble, blank line, the five numbered domain options, then for
/// one-shot prompts the five exemplar blocks (each ending `Domain: (k)`), a
/// blank line, and finally the query block which ends with `Domain:` and is
/// wrapped in `[INST] ... [/INST]` when the wrapper flag is set.
pub fn build_prompt(record: &VariableRecord, spec: &PromptSpec) -> String {
    let mut out = String::with_capacity(512);
    out.push_str(TASK_PREAMBLE);
    out.push_str("\n\n");
    out.push_str(&domain_options());
    out.push('\n');

    if let Some(exemplars) = &spec.exemplars {
        for (record, domain) in exemplars.entries() {
            for (tag, text) in render_fields(record, spec.subset) {
                out.push_str(&field_line(tag, text));
                out.push('\n');
            }
            out.push_str(&format!("Domain: ({})\n", domain.code()));
        }
    }
    out.push('\n');

    let query: Vec<String> = render_fields(record, spec.subset)
        .into_iter()
        .map(|(tag, text)| field_line(tag, text))
        .collect();
    if spec.instruction_wrapper {
        out.push_str("[INST] ");
        out.push_str(&query.join("\n"));
        out.push_str("\nDomain:[/INST]");
    } else {
        out.push_str(&query.join("\n"));
        out.push_str("\nDomain:");
    }
    out
}

/// Estimated token count at four characters per token, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    let chars = text.chars().count();
    chars.div_ceil(4)
}

/// Key identifying a record across runs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub dataset_id: String,
    pub variable_name: String,
}

impl RecordKey {
    pub fn of(record: &VariableRecord) -> RecordKey {
        RecordKey {
            dataset_id: record.dataset_id.clone(),
            variable_name: record.variable_name.clone(),
        }
    }
}

/// One prompt to dispatch: a record, the rendering settings, and the bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptJob {
    pub record_key: RecordKey,
    pub shots: u8,
    pub subset: FieldSubset,
    pub prompt_text: String,
    pub estimated_tokens: usize,
}

/// Enumerate jobs for the given subsets, subset-major with record order
/// preserved within each subset.
pub fn enumerate_subsets(
    catalog: &VariableCatalog,
    subsets: &[FieldSubset],
    shots: u8,
    exemplars: Option<&ExemplarSet>,
    instruction_wrapper: bool,
) -> Vec<PromptJob> {
    let mut jobs = Vec::with_capacity(catalog.n() * subsets.len());
    for &subset in subsets {
        let mut spec = match (shots, exemplars) {
            (0, _) => PromptSpec::zero_shot(subset),
            (_, Some(e)) => PromptSpec::one_shot(subset, e.clone()),
            (_, None) => panic!("one-shot sweep requires exemplars"),
        };
        if !instruction_wrapper {
            spec = spec.without_instruction_wrapper();
        }
        for record in catalog.iter() {
            let prompt_text = build_prompt(record, &spec);
            let estimated_tokens = estimate_tokens(&prompt_text);
            jobs.push(PromptJob {
                record_key: RecordKey::of(record),
                shots,
                subset,
                prompt_text,
                estimated_tokens,
            });
        }
    }
    jobs
}

/// Full ablation sweep: all seven field subsets.
pub fn enumerate_sweep(
    catalog: &VariableCatalog,
    shots: u8,
    exemplars: Option<&ExemplarSet>,
) -> Vec<PromptJob> {
    enumerate_subsets(catalog, &FieldSubset::ALL, shots, exemplars, true)
}
