//! Prompt templates: the 23 built-in fixtures plus generated ones.
//!
//! Fixture instructions ship as data files and are embedded byte-for-byte;
//! tests pin their checksums. Each template also carries the shape used to
//! lay one claim pair (with or without its answer) onto the prompt.

use serde::{Deserialize, Serialize};

/// Answer vocabulary a template asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerFormat {
    YesNo,
    MatchNotMatch,
}

impl AnswerFormat {
    pub fn answer_text(&self, label: crate::corpus::Label) -> &'static str {
        use crate::corpus::Label;
        match (self, label) {
            (AnswerFormat::YesNo, Label::Match) => "yes",
            (AnswerFormat::YesNo, Label::NoMatch) => "no",
            (AnswerFormat::MatchNotMatch, Label::Match) => "match",
            (AnswerFormat::MatchNotMatch, Label::NoMatch) => "not match",
        }
    }
}

/// Where a template came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateOrigin {
    HandCrafted,
    Generated { backend: String },
}

/// How one claim pair is laid out in the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairShape {
    /// A pattern containing `{claim_a}`, `{claim_b}` and `{answer}` exactly
    /// once each; used by the hand-crafted templates, whose instruction text
    /// is itself the per-pair shape.
    Inline(String),
    /// `Statement 1: ... / Statement 2: ... / Answer: ...`; used by generated
    /// templates, whose instruction is a standalone header.
    Statements,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub origin: TemplateOrigin,
    /// The template text as published or as generated, byte-exact.
    pub instruction: String,
    pub answer_format: AnswerFormat,
    pub shape: PairShape,
    /// Raw backend output this template was cut from, when generated here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
}

macro_rules! fixture {
    ($id:literal) => {
        include_str!(concat!("../../data/templates/", $id, ".txt"))
    };
}

struct FixtureSpec {
    id: &'static str,
    instruction: &'static str,
    origin: &'static str, // "" = hand-crafted, otherwise generator model name
    format: AnswerFormat,
}

// The three hand-crafted shapes keep each claim exactly once: PD-t carries
// the claims in its leading "A. B." slots and keeps the question literal.
const CM_T_SHAPE: &str = "{claim_a} Matches to {claim_b}. Correct? Answer: {answer}";
const PD_T_SHAPE: &str =
    "{claim_a}. {claim_b}. Question: Do A and B both refer to the same event? Yes or no? Answer: {answer}";
const NLI_T_SHAPE: &str =
    "Suppose {claim_a}. Can we infer that {claim_b}? Yes or no? Answer: {answer}";

const FIXTURES: &[FixtureSpec] = &[
    FixtureSpec {
        id: "CM-t",
        instruction: fixture!("CM-t"),
        origin: "",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "PD-t",
        instruction: fixture!("PD-t"),
        origin: "",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "NLI-t",
        instruction: fixture!("NLI-t"),
        origin: "",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "L1",
        instruction: fixture!("L1"),
        origin: "Llama",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "L2",
        instruction: fixture!("L2"),
        origin: "Llama",
        format: AnswerFormat::MatchNotMatch,
    },
    FixtureSpec {
        id: "L3",
        instruction: fixture!("L3"),
        origin: "Llama",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "L4",
        instruction: fixture!("L4"),
        origin: "Llama",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "L5",
        instruction: fixture!("L5"),
        origin: "Llama",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "M1",
        instruction: fixture!("M1"),
        origin: "Mistral",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "M2",
        instruction: fixture!("M2"),
        origin: "Mistral",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "M3",
        instruction: fixture!("M3"),
        origin: "Mistral",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "M4",
        instruction: fixture!("M4"),
        origin: "Mistral",
        format: AnswerFormat::MatchNotMatch,
    },
    FixtureSpec {
        id: "M5",
        instruction: fixture!("M5"),
        origin: "Mistral",
        format: AnswerFormat::MatchNotMatch,
    },
    FixtureSpec {
        id: "Lb1",
        instruction: fixture!("Lb1"),
        origin: "Llama-b",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "Lb2",
        instruction: fixture!("Lb2"),
        origin: "Llama-b",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "Lb3",
        instruction: fixture!("Lb3"),
        origin: "Llama-b",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "Lb4",
        instruction: fixture!("Lb4"),
        origin: "Llama-b",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "Lb5",
        instruction: fixture!("Lb5"),
        origin: "Llama-b",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "Mb1",
        instruction: fixture!("Mb1"),
        origin: "Mistral-b",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "Mb2",
        instruction: fixture!("Mb2"),
        origin: "Mistral-b",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "Mb3",
        instruction: fixture!("Mb3"),
        origin: "Mistral-b",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "Mb4",
        instruction: fixture!("Mb4"),
        origin: "Mistral-b",
        format: AnswerFormat::YesNo,
    },
    FixtureSpec {
        id: "Mb5",
        instruction: fixture!("Mb5"),
        origin: "Mistral-b",
        format: AnswerFormat::YesNo,
    },
];

fn materialize(spec: &FixtureSpec) -> PromptTemplate {
    let origin = if spec.origin.is_empty() {
        TemplateOrigin::HandCrafted
    } else {
        TemplateOrigin::Generated {
            backend: spec.origin.to_string(),
        }
    };
    let shape = match spec.id {
        "CM-t" => PairShape::Inline(CM_T_SHAPE.to_string()),
        "PD-t" => PairShape::Inline(PD_T_SHAPE.to_string()),
        "NLI-t" => PairShape::Inline(NLI_T_SHAPE.to_string()),
        _ => PairShape::Statements,
    };
    PromptTemplate {
        id: spec.id.to_string(),
        origin,
        instruction: spec.instruction.to_string(),
        answer_format: spec.format,
        shape,
        raw_response: None,
    }
}

/// All 23 built-in templates: CM-t, PD-t, NLI-t, L1-L5, M1-M5, Lb1-Lb5, Mb1-Mb5.
pub fn builtin_templates() -> Vec<PromptTemplate> {
    FIXTURES.iter().map(materialize).collect()
}

pub fn builtin_template(id: &str) -> Option<PromptTemplate> {
    FIXTURES.iter().find(|f| f.id == id).map(materialize)
}
