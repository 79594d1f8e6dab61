//! Postprocessing of raw model replies into labels, refusals, or
//! non-responses.
//!
//! Matching runs a fixed rule cascade. If the reply contains `Domain:`, only
//! the text after its last occurrence is searched by the label and
//! question-mark rules, so labels echoed from a one-shot prompt cannot
//! contaminate the outcome. The word `unable` anywhere in the reply is a
//! refusal regardless of segmentation. The function is total: every input
//! string yields exactly one outcome.

use serde::{Deserialize, Serialize};

use crate::catalog::SdohDomain;
use crate::client::RawResponse;

const ENTAILMENT_MARKER: &str = "Domain:";

/// Final classification of one reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Label(SdohDomain),
    Refusal,
    NonResponse,
}

impl Outcome {
    pub fn label(self) -> Option<SdohDomain> {
        match self {
            Outcome::Label(domain) => Some(domain),
            _ => None,
        }
    }

    pub fn kind(self) -> &'static str {
        match self {
            Outcome::Label(_) => "label",
            Outcome::Refusal => "refusal",
            Outcome::NonResponse => "nonresponse",
        }
    }
}

/// Which rule in the cascade produced the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchedRule {
    /// A label found after segmenting on the last `Domain:`.
    EntailmentSegment,
    UnableRefusal,
    LonelyInteger,
    ParenInteger,
    DomainName,
    QuestionMarkRefusal,
    NonAdherence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub outcome: Outcome,
    pub matched_rule: MatchedRule,
    pub raw: String,
}

/// Case-insensitive whole-word search.
fn contains_word_ci(haystack: &str, word: &str) -> bool {
    let lowered = haystack.to_lowercase();
    let word = word.to_lowercase();
    for (pos, _) in lowered.match_indices(&word) {
        let before_ok = lowered[..pos]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_ascii_alphanumeric());
        let after_ok = lowered[pos + word.len()..]
            .chars()
            .next()
            .is_none_or(|c| !c.is_ascii_alphanumeric());
        if before_ok && after_ok {
            return true;
        }
    }
    false
}

/// First digit 1-5 that stands alone: not adjacent to another digit and not
/// immediately preceded by `(` (which defers it to the parenthesized rule).
fn first_lonely_integer(text: &str) -> Option<SdohDomain> {
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !('1'..='5').contains(&c) {
            continue;
        }
        let prev = if i > 0 { Some(chars[i - 1]) } else { None };
        let next = chars.get(i + 1).copied();
        if prev.is_some_and(|p| p.is_ascii_digit() || p == '(') {
            continue;
        }
        if next.is_some_and(|n| n.is_ascii_digit()) {
            continue;
        }
        return SdohDomain::from_code(c as u8 - b'0');
    }
    None
}

/// First `(k)` with k in 1-5.
fn first_paren_integer(text: &str) -> Option<SdohDomain> {
    let chars: Vec<char> = text.chars().collect();
    for window in chars.windows(3) {
        if window[0] == '(' && window[2] == ')' && ('1'..='5').contains(&window[1]) {
            return SdohDomain::from_code(window[1] as u8 - b'0');
        }
    }
    None
}

/// First canonical domain name, case-insensitive; earliest occurrence wins.
fn first_domain_name(text: &str) -> Option<SdohDomain> {
    let lowered = text.to_lowercase();
    SdohDomain::ALL
        .iter()
        .filter_map(|&domain| {
            lowered
                .find(&domain.canonical_name().to_lowercase())
                .map(|pos| (pos, domain))
        })
        .min_by_key(|&(pos, domain)| (pos, domain.code()))
        .map(|(_, domain)| domain)
}

/// Map one raw reply to exactly one outcome. Total; never fails.
pub fn parse_response(raw: &str) -> ParsedResponse {
    let (segment, segmented) = match raw.rfind(ENTAILMENT_MARKER) {
        Some(pos) => (&raw[pos + ENTAILMENT_MARKER.len()..], true),
        None => (raw, false),
    };

    let done = |outcome, matched_rule| ParsedResponse {
        outcome,
        matched_rule,
        raw: raw.to_string(),
    };

    if contains_word_ci(raw, "unable") {
        return done(Outcome::Refusal, MatchedRule::UnableRefusal);
    }
    if let Some(domain) = first_lonely_integer(segment) {
        let rule = if segmented {
            MatchedRule::EntailmentSegment
        } else {
            MatchedRule::LonelyInteger
        };
        return done(Outcome::Label(domain), rule);
    }
    if let Some(domain) = first_paren_integer(segment) {
        let rule = if segmented {
            MatchedRule::EntailmentSegment
        } else {
            MatchedRule::ParenInteger
        };
        return done(Outcome::Label(domain), rule);
    }
    if let Some(domain) = first_domain_name(segment) {
        let rule = if segmented {
            MatchedRule::EntailmentSegment
        } else {
            MatchedRule::DomainName
        };
        return done(Outcome::Label(domain), rule);
    }
    if segment.contains('?') {
        return done(Outcome::Refusal, MatchedRule::QuestionMarkRefusal);
    }
    done(Outcome::NonResponse, MatchedRule::NonAdherence)
}

/// Element-wise [`parse_response`] over a run, order preserved.
pub fn parse_run(responses: &[RawResponse]) -> Vec<ParsedResponse> {
    responses.iter().map(|r| parse_response(&r.text)).collect()
}

/// Serialized form of one parsed reply, as written to parsed-run JSONL files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParsedLine {
    pub record_key: crate::prompt::RecordKey,
    pub outcome: String,
    pub label: Option<u8>,
    pub matched_rule: MatchedRule,
    pub raw: String,
}

impl ParsedLine {
    pub fn new(record_key: crate::prompt::RecordKey, parsed: &ParsedResponse) -> ParsedLine {
        ParsedLine {
            record_key,
            outcome: parsed.outcome.kind().to_string(),
            label: parsed.outcome.label().map(|d| d.code()),
            matched_rule: parsed.matched_rule,
            raw: parsed.raw.clone(),
        }
    }
}
