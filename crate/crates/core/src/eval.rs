//! Scoring of annotation runs and inter-annotator agreement.
//!
//! Predictions live in the space of five domains plus an abstention, while
//! gold labels are always a domain, so micro F1 over complete single-label
//! predictions reduces to accuracy: refusals and non-responses always count
//! against the model. Agreement metrics treat labels as nominal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{SdohDomain, VariableCatalog};
use crate::parser::{Outcome, ParsedResponse};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("length mismatch: {left} predictions vs {right} gold labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {required} annotators, found {found}")]
    TooFewAnnotators { required: usize, found: usize },
}

/// Micro F1 against gold labels: the fraction of instances whose prediction
/// equals gold. Refusal and non-response never match.
pub fn micro_f1(parsed: &[ParsedResponse], gold: &[SdohDomain]) -> Result<f64, EvalError> {
    if parsed.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            left: parsed.len(),
            right: gold.len(),
        });
    }
    if parsed.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let correct = parsed
        .iter()
        .zip(gold)
        .filter(|(p, &g)| p.outcome == Outcome::Label(g))
        .count();
    Ok(correct as f64 / parsed.len() as f64)
}

/// Fractions of refusal and non-response outcomes.
pub fn rates(parsed: &[ParsedResponse]) -> Result<(f64, f64), EvalError> {
    if parsed.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = parsed.len() as f64;
    let refusals = parsed.iter().filter(|p| p.outcome == Outcome::Refusal).count();
    let nonresponses = parsed
        .iter()
        .filter(|p| p.outcome == Outcome::NonResponse)
        .count();
    Ok((refusals as f64 / n, nonresponses as f64 / n))
}

/// Confusion counts: rows are predicted domains 1-5 plus a pooled abstention
/// row (refusal and non-response together); columns are gold domains 1-5.
pub fn confusion_matrix(
    parsed: &[ParsedResponse],
    gold: &[SdohDomain],
) -> Result<[[usize; 5]; 6], EvalError> {
    if parsed.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            left: parsed.len(),
            right: gold.len(),
        });
    }
    let mut matrix = [[0usize; 5]; 6];
    for (p, &g) in parsed.iter().zip(gold) {
        let row = match p.outcome {
            Outcome::Label(domain) => domain.code() as usize - 1,
            Outcome::Refusal | Outcome::NonResponse => 5,
        };
        matrix[row][g.code() as usize - 1] += 1;
    }
    Ok(matrix)
}

/// Quality summary for one scored run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_f1: f64,
    pub refusal_rate: f64,
    pub nonresponse_rate: f64,
    pub confusion: [[usize; 5]; 6],
    pub n: usize,
}

impl EvalReport {
    pub fn from_run(parsed: &[ParsedResponse], gold: &[SdohDomain]) -> Result<EvalReport, EvalError> {
        let micro_f1 = micro_f1(parsed, gold)?;
        let (refusal_rate, nonresponse_rate) = rates(parsed)?;
        let confusion = confusion_matrix(parsed, gold)?;
        Ok(EvalReport {
            micro_f1,
            refusal_rate,
            nonresponse_rate,
            confusion,
            n: parsed.len(),
        })
    }
}

/// Cohen's kappa between two raters: (p_o - p_e) / (1 - p_e) with chance
/// agreement from the product of per-rater marginals. Degenerate identical
/// constant raters score exactly 1.
pub fn cohen_kappa(a: &[SdohDomain], b: &[SdohDomain]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut expected = 0.0;
    for domain in SdohDomain::ALL {
        let pa = a.iter().filter(|&&x| x == domain).count() as f64 / n;
        let pb = b.iter().filter(|&&x| x == domain).count() as f64 / n;
        expected += pa * pb;
    }
    if (1.0 - expected).abs() < f64::EPSILON {
        // Both raters constant on the same label; observed agreement is total.
        return Ok(1.0);
    }
    Ok((observed - expected) / (1.0 - expected))
}

/// Krippendorff's alpha for complete nominal data via the coincidence-matrix
/// formulation. `rows` is annotators x items. When every cell is identical
/// the expected disagreement is zero; by convention the result is 1.
pub fn krippendorff_alpha(rows: &[Vec<SdohDomain>]) -> Result<f64, EvalError> {
    if rows.len() < 2 {
        return Err(EvalError::TooFewAnnotators {
            required: 2,
            found: rows.len(),
        });
    }
    let items = rows[0].len();
    if items == 0 {
        return Err(EvalError::EmptyInput);
    }
    for row in rows {
        if row.len() != items {
            return Err(EvalError::LengthMismatch {
                left: row.len(),
                right: items,
            });
        }
    }

    let raters = rows.len();
    let mut coincidence = [[0.0f64; 5]; 5];
    for item in 0..items {
        let weight = 1.0 / (raters as f64 - 1.0);
        for i in 0..raters {
            for j in 0..raters {
                if i == j {
                    continue;
                }
                let c = rows[i][item].code() as usize - 1;
                let k = rows[j][item].code() as usize - 1;
                coincidence[c][k] += weight;
            }
        }
    }

    let marginals: Vec<f64> = (0..5).map(|c| coincidence[c].iter().sum()).collect();
    let total: f64 = marginals.iter().sum();
    let observed_disagreement: f64 = (0..5)
        .flat_map(|c| (0..5).map(move |k| (c, k)))
        .filter(|&(c, k)| c != k)
        .map(|(c, k)| coincidence[c][k])
        .sum::<f64>()
        / total;
    let expected_disagreement: f64 = (0..5)
        .flat_map(|c| (0..5).map(move |k| (c, k)))
        .filter(|&(c, k)| c != k)
        .map(|(c, k)| marginals[c] * marginals[k])
        .sum::<f64>()
        / (total * (total - 1.0));

    if expected_disagreement == 0.0 {
        log::warn!("all annotation cells identical; expected disagreement is zero, returning alpha = 1");
        return Ok(1.0);
    }
    Ok(1.0 - observed_disagreement / expected_disagreement)
}

/// Per-item strict-majority labels. Items with no majority are returned as
/// tie indices for manual resolution.
pub fn majority_consensus(rows: &[Vec<SdohDomain>]) -> (Vec<Option<SdohDomain>>, Vec<usize>) {
    let items = rows.first().map_or(0, |r| r.len());
    let raters = rows.len();
    let needed = raters / 2 + 1;
    let mut consensus = Vec::with_capacity(items);
    let mut ties = Vec::new();
    for item in 0..items {
        let mut counts = [0usize; 5];
        for row in rows {
            counts[row[item].code() as usize - 1] += 1;
        }
        let winner = counts
            .iter()
            .enumerate()
            .find(|(_, &count)| count >= needed)
            .map(|(i, _)| SdohDomain::from_code(i as u8 + 1).unwrap());
        if winner.is_none() {
            ties.push(item);
        }
        consensus.push(winner);
    }
    (consensus, ties)
}

/// Full agreement summary over a catalog's annotator columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub pairwise_kappa: Vec<Vec<f64>>,
    pub mean_kappa: f64,
    pub alpha: f64,
    pub consensus: Vec<Option<SdohDomain>>,
    /// Variable names with no majority label.
    pub ties: Vec<String>,
}

/// Compute pairwise kappas (mean over unordered pairs), alpha, and
/// majority-vote consensus for a catalog with at least two annotator columns.
pub fn agreement_report(catalog: &VariableCatalog) -> Result<AgreementReport, EvalError> {
    let raters = catalog.annotator_count();
    if raters < 2 {
        return Err(EvalError::TooFewAnnotators {
            required: 2,
            found: raters,
        });
    }
    if catalog.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let rows: Vec<Vec<SdohDomain>> = (0..raters)
        .map(|r| catalog.iter().map(|rec| rec.annotator_labels[r]).collect())
        .collect();

    let mut pairwise = vec![vec![1.0; raters]; raters];
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..raters {
        for j in (i + 1)..raters {
            let kappa = cohen_kappa(&rows[i], &rows[j])?;
            pairwise[i][j] = kappa;
            pairwise[j][i] = kappa;
            sum += kappa;
            pairs += 1;
        }
    }
    let alpha = krippendorff_alpha(&rows)?;
    let (consensus, tie_indices) = majority_consensus(&rows);
    let ties = tie_indices
        .into_iter()
        .map(|i| catalog.records()[i].variable_name.clone())
        .collect();
    Ok(AgreementReport {
        pairwise_kappa: pairwise,
        mean_kappa: sum / pairs as f64,
        alpha,
        consensus,
        ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::VariableRecord;
    use crate::parser::parse_response;
    use approx::assert_abs_diff_eq;

    fn labels(codes: &[u8]) -> Vec<SdohDomain> {
        codes.iter().map(|&c| SdohDomain::from_code(c).unwrap()).collect()
    }

    fn parsed_from(texts: &[&str]) -> Vec<ParsedResponse> {
        texts.iter().map(|t| parse_response(t)).collect()
    }

    #[test]
    fn micro_f1_counts_exact_matches() {
        let gold = labels(&[1, 2, 3, 4, 5]);
        let preds = parsed_from(&["1", "2", "3", "4", "1"]);
        assert_abs_diff_eq!(micro_f1(&preds, &gold).unwrap(), 0.8);

        let perfect = parsed_from(&["(1)", "(2)", "(3)", "(4)", "(5)"]);
        assert_abs_diff_eq!(micro_f1(&perfect, &gold).unwrap(), 1.0);

        let refusals = parsed_from(&["?", "?", "?", "?", "?"]);
        assert_abs_diff_eq!(micro_f1(&refusals, &gold).unwrap(), 0.0);
    }

    #[test]
    fn micro_f1_rejects_bad_input() {
        let gold = labels(&[1]);
        assert_eq!(
            micro_f1(&parsed_from(&["1", "2"]), &gold),
            Err(EvalError::LengthMismatch { left: 2, right: 1 })
        );
        assert_eq!(micro_f1(&[], &[]), Err(EvalError::EmptyInput));
    }

    #[test]
    fn rates_count_refusals_and_nonresponses() {
        let parsed = parsed_from(&["?", "3", "", "1"]);
        assert_eq!(rates(&parsed).unwrap(), (0.25, 0.25));
        let all_labels = parsed_from(&["1", "2"]);
        assert_eq!(rates(&all_labels).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn report_rates_partition_unity() {
        let gold = labels(&[1, 2, 3, 4, 5, 1]);
        let parsed = parsed_from(&["1", "?", "", "4", "2", "junk"]);
        let report = EvalReport::from_run(&parsed, &gold).unwrap();
        let labeled = 1.0 - report.refusal_rate - report.nonresponse_rate;
        let mislabeled = labeled - report.micro_f1;
        assert_abs_diff_eq!(
            report.micro_f1 + report.refusal_rate + report.nonresponse_rate + mislabeled,
            1.0,
            epsilon = 1e-12
        );
        let total: usize = report.confusion.iter().flatten().sum();
        assert_eq!(total, report.n);
    }

    #[test]
    fn confusion_pools_abstentions() {
        let gold = labels(&[1, 2, 3]);
        let correct = parsed_from(&["1", "2", "3"]);
        let matrix = confusion_matrix(&correct, &gold).unwrap();
        assert_eq!(matrix[0][0] + matrix[1][1] + matrix[2][2], 3);

        let refused = parsed_from(&["?", "", "?"]);
        let matrix = confusion_matrix(&refused, &gold).unwrap();
        assert_eq!(matrix[5].iter().sum::<usize>(), 3);
    }

    #[test]
    fn kappa_hand_computed_case() {
        let a = labels(&[1, 1, 2, 2]);
        let b = labels(&[1, 2, 2, 2]);
        // p_o = 0.75, p_e = 0.5*0.25 + 0.5*0.75 = 0.5.
        assert_abs_diff_eq!(cohen_kappa(&a, &b).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            cohen_kappa(&a, &b).unwrap(),
            cohen_kappa(&b, &a).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn kappa_identical_lists_is_one() {
        let a = labels(&[1, 3, 5, 2, 4, 1]);
        assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
        // Constant identical raters hit the degenerate branch exactly.
        let constant = labels(&[2, 2, 2]);
        assert_eq!(cohen_kappa(&constant, &constant).unwrap(), 1.0);
    }

    #[test]
    fn alpha_pinned_three_annotator_fixture() {
        let rows = vec![
            labels(&[1, 1, 2, 2]),
            labels(&[1, 2, 2, 2]),
            labels(&[1, 1, 2, 1]),
        ];
        // Coincidence tally: o11=4, o22=4, o12=o21=2, so A_o=2/3 and
        // A_e=5/11, giving (2/3 - 5/11)/(1 - 5/11) = 7/18.
        assert_abs_diff_eq!(krippendorff_alpha(&rows).unwrap(), 7.0 / 18.0, epsilon = 1e-15);
    }

    #[test]
    fn alpha_perfect_agreement_is_one() {
        let rows = vec![labels(&[1, 2, 3]), labels(&[1, 2, 3]), labels(&[1, 2, 3])];
        assert_eq!(krippendorff_alpha(&rows).unwrap(), 1.0);
        // All cells one value: degenerate, returns 1 by convention.
        let degenerate = vec![labels(&[4, 4]), labels(&[4, 4])];
        assert_eq!(krippendorff_alpha(&degenerate).unwrap(), 1.0);
    }

    #[test]
    fn majority_needs_strict_majority() {
        let rows = vec![
            labels(&[4, 1, 1]),
            labels(&[4, 2, 1]),
            labels(&[1, 3, 2]),
        ];
        let (consensus, ties) = majority_consensus(&rows);
        assert_eq!(consensus[0], Some(SdohDomain::BuiltEnvironment));
        assert_eq!(consensus[1], None);
        assert_eq!(consensus[2], Some(SdohDomain::SocialCommunity));
        assert_eq!(ties, vec![1]);
    }

    #[test]
    fn two_agreeing_annotators_leave_no_ties() {
        let n = 223;
        let first: Vec<SdohDomain> = (0..n).map(|i| SdohDomain::ALL[i % 5]).collect();
        let second = first.clone();
        let third: Vec<SdohDomain> = (0..n).map(|i| SdohDomain::ALL[(i + 2) % 5]).collect();
        let (consensus, ties) = majority_consensus(&[first.clone(), second, third]);
        assert!(ties.is_empty());
        assert_eq!(consensus.iter().flatten().count(), n);
        assert_eq!(consensus[0], Some(first[0]));
    }

    #[test]
    fn agreement_report_over_catalog() {
        let records: Vec<VariableRecord> = (0..6)
            .map(|i| {
                let mut r = VariableRecord::new("D", format!("v{i}"), "d", "s");
                r.annotator_labels = labels(&[
                    [1, 2, 3, 4, 5, 1][i],
                    [1, 2, 3, 4, 5, 2][i],
                    [1, 2, 3, 4, 5, 3][i],
                ]);
                r
            })
            .collect();
        let catalog = VariableCatalog::new(records).unwrap();
        let report = agreement_report(&catalog).unwrap();
        assert_eq!(report.pairwise_kappa.len(), 3);
        for i in 0..3 {
            assert_eq!(report.pairwise_kappa[i][i], 1.0);
        }
        assert_eq!(report.ties, vec!["v5".to_string()]);
        assert_eq!(report.consensus.iter().flatten().count(), 5);
    }

    #[test]
    fn agreement_needs_two_annotators() {
        let catalog = VariableCatalog::new(vec![VariableRecord::new("D", "v", "d", "s")]).unwrap();
        assert_eq!(
            agreement_report(&catalog),
            Err(EvalError::TooFewAnnotators { required: 2, found: 0 })
        );
    }
}
