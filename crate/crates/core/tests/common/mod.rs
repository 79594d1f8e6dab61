//! Shared fixtures: the recorded example replies from nine models on the
//! post-office-density query (both zero-shot and one-shot), and synthetic
//! catalog builders whose descriptions embed the variable name so the
//! gold-echo mock can identify queries under every field subset.

use sdoh_core::catalog::{SdohDomain, VariableCatalog, VariableRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expected {
    Label(u8),
    Refusal,
    NonResponse,
}

pub struct CorpusEntry {
    pub model: &'static str,
    pub shots: u8,
    pub text: &'static str,
    pub expected: Expected,
}

/// The query variable both example prompts ask about.
pub fn aden_491() -> VariableRecord {
    VariableRecord::new(
        "NaNDA",
        "aden_491",
        "# post offices/postal service facilities per sq mile",
        "The 2017 North American Industry Classification System (NAICS",
    )
    .with_gold(SdohDomain::BuiltEnvironment)
}

/// Recorded replies, verbatim, with the outcome each must parse to.
pub fn appendix_corpus() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry {
            model: "llama-2-7b-chat",
            shots: 0,
            text: "Based on the information provided, I would annotate the variable \"aden_491\" as belonging to the domain of \"Neighborhood and Built Environment\". Therefore, I would respond with the number (4).",
            expected: Expected::Label(4),
        },
        CorpusEntry {
            model: "llama-2-13b-chat",
            shots: 0,
            text: "Based on the variable description and data source, I would annotate \"aden_491\" as belonging to the domain of (2) Economic Stability. The number of post offices or postal service facilities per square mile is likely an indicator of economic activity and stability, as it reflects the availability of essential services and infrastructure in a given area.",
            expected: Expected::Label(2),
        },
        CorpusEntry {
            model: "llama-2-70b-chat",
            shots: 0,
            text: "I'm unsure which domain the variable \"aden_491\" belongs to. The variable description mentions post offices/postal service facilities per sq mile, which could potentially fall under the \"Neighborhood and Built Environment\" domain, but it could also be argued that it belongs to the \"Economic Stability\" domain as it relates to the number of businesses/services available in a given area. Without further context or information, I would need more clarification to accurately assign it to a specific domain.",
            // Hedged between two named domains; the first named one wins.
            expected: Expected::Label(4),
        },
        CorpusEntry {
            model: "gemma-2b-it",
            shots: 0,
            text: "**Answer: (1) Social and Community Context**\n\nThe variable describes the number of post offices or postal service facilities per square mile, which is a measure of social and community context.",
            expected: Expected::Label(1),
        },
        CorpusEntry {
            model: "gemma-7b-it",
            shots: 0,
            text: "**Response:**\n\n4\n\nThe variable \"aden_491\" is most closely related to the domain of \"Neighborhood and Built Environment\".",
            expected: Expected::Label(4),
        },
        CorpusEntry {
            model: "mistral-7b-v0.1-instruct",
            shots: 0,
            text: "1. Social and Community Context.",
            expected: Expected::Label(1),
        },
        CorpusEntry {
            model: "mistral-7b-v0.2-instruct",
            shots: 0,
            text: " (4) Neighborhood and Built Environment.\n\nExplanation: The number of post offices or postal service facilities per square mile can be considered a measure of access to essential services and infrastructure within a neighborhood or built environment. This information can be used to assess the availability and distribution of postal services, which can impact the ability of individuals to receive mail, access healthcare and social services, and engage in economic activities. Therefore, it is most closely related to the Neighborhood and Built Environment domain of social determinants of health.",
            expected: Expected::Label(4),
        },
        CorpusEntry {
            model: "flan-t5-xl",
            shots: 0,
            text: "?",
            expected: Expected::Refusal,
        },
        CorpusEntry {
            model: "flan-t5-xxl",
            shots: 0,
            text: "4",
            expected: Expected::Label(4),
        },
        CorpusEntry {
            model: "llama-2-7b-chat",
            shots: 1,
            text: " (4) Neighborhood and Built Environment",
            expected: Expected::Label(4),
        },
        CorpusEntry {
            model: "llama-2-13b-chat",
            shots: 1,
            text: " Based on the variable description, I would classify \"aden_491\" as a variable related to the Neighborhood and Built Environment domain (Domain 4). The variable describes the number of post offices or postal service facilities per square mile, which is an indicator of access to essential services and infrastructure in a neighborhood.",
            expected: Expected::Label(4),
        },
        CorpusEntry {
            model: "llama-2-70b-chat",
            shots: 1,
            text: " (4) Neighborhood and Built Environment.\n\nThe variable \"aden_491\" measures the number of post offices/postal service facilities per square mile, which is a characteristic of the built environment and infrastructure of a neighborhood. This variable can impact the accessibility and availability of services, including healthcare, for residents in a particular area. Therefore, it belongs to the Neighborhood and Built Environment domain.",
            expected: Expected::Label(4),
        },
        CorpusEntry {
            model: "gemma-2b-it",
            shots: 1,
            text: "",
            expected: Expected::NonResponse,
        },
        CorpusEntry {
            model: "gemma-7b-it",
            shots: 1,
            text: " **Response:**\n\n1\n\nThe variable \"ACS_PCT_OTHER_FEMALE\" is in the domain of \"Social and Community Context\".",
            expected: Expected::Label(1),
        },
        CorpusEntry {
            model: "mistral-7b-v0.1-instruct",
            shots: 1,
            text: " 1",
            expected: Expected::Label(1),
        },
        CorpusEntry {
            model: "mistral-7b-v0.2-instruct",
            shots: 1,
            text: "(4) Neighborhood and Built Environment.",
            expected: Expected::Label(4),
        },
        CorpusEntry {
            model: "flan-t5-xl",
            shots: 1,
            text: "?",
            expected: Expected::Refusal,
        },
        CorpusEntry {
            model: "flan-t5-xxl",
            shots: 1,
            text: "4",
            expected: Expected::Label(4),
        },
    ]
}

/// Synthetic gold-labeled catalog. Every field embeds the zero-padded
/// variable name, so no name is a substring of another and the gold-echo
/// mock can identify the query under any field subset.
pub fn synthetic_catalog(n: usize) -> VariableCatalog {
    let records = (0..n)
        .map(|i| {
            let name = format!("VAR_{i:05}");
            VariableRecord::new(
                "SYN",
                name.clone(),
                format!("synthetic indicator {name} measured per tract"),
                format!("synthetic source registry for {name}"),
            )
            .with_gold(SdohDomain::ALL[i % 5])
        })
        .collect();
    VariableCatalog::new(records).expect("synthetic catalog is valid")
}
