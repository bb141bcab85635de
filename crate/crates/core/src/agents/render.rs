//! Prompt rendering: few-shot example blocks, classification prompts, and
//! the prompt-generation request.
//!
//! Rendering is byte-deterministic. Chat-template wrapping (model-specific
//! special tokens) is the wire layer's business, never done here.

use super::templates::{AnswerFormat, PairShape, PromptTemplate, TemplateOrigin};
use super::wire::ChatMessage;
use super::AgentError;
use crate::corpus::ClaimPair;
use crate::selection::FewShotSet;

/// The verbatim system prompt handed to the prompt-generation agent.
pub const GENERATION_SYSTEM_PROMPT: &str =
    "You are a large language model. Create the best prompt for you for the described task.";

const GENERATION_USER_INTRO: &str =
    "The following examples contain statement pairs that match or do not match.";

const BLOCK_SEPARATOR: &str = "\n\n";

fn count_occurrences(haystack: &str, needle: &str) -> usize {
    haystack.matches(needle).count()
}

/// Lay out one claim pair in the template's shape. `answer` is `None` for
/// the query block, which leaves the answer slot empty.
pub fn render_pair_block(
    shape: &PairShape,
    claim_a: &str,
    claim_b: &str,
    answer: Option<&str>,
) -> Result<String, AgentError> {
    match shape {
        PairShape::Inline(pattern) => {
            for placeholder in ["{claim_a}", "{claim_b}", "{answer}"] {
                if count_occurrences(pattern, placeholder) != 1 {
                    return Err(AgentError::PlaceholderMismatch(format!(
                        "inline shape must contain {placeholder} exactly once"
                    )));
                }
            }
            let filled = pattern
                .replace("{claim_a}", claim_a)
                .replace("{claim_b}", claim_b);
            Ok(match answer {
                Some(a) => filled.replace("{answer}", a),
                None => filled.replace("{answer}", "").trim_end().to_string(),
            })
        }
        PairShape::Statements => Ok(match answer {
            Some(a) => format!("Statement 1: {claim_a}\nStatement 2: {claim_b}\nAnswer: {a}"),
            None => format!("Statement 1: {claim_a}\nStatement 2: {claim_b}\nAnswer:"),
        }),
    }
}

fn check_pair(pair: &ClaimPair) -> Result<(), AgentError> {
    if pair.claim_a.trim().is_empty() || pair.claim_b.trim().is_empty() {
        return Err(AgentError::EmptyClaim(pair.id.clone()));
    }
    Ok(())
}

/// Render the full classification prompt: instruction header (generated
/// templates only), the k answered example blocks, then the query pair with
/// an empty answer slot. Both query claims appear exactly once.
pub fn render_classification_prompt(
    template: &PromptTemplate,
    shots: &FewShotSet,
    query: &ClaimPair,
) -> Result<String, AgentError> {
    check_pair(query)?;
    let mut blocks = Vec::with_capacity(shots.k() + 2);
    if matches!(template.origin, TemplateOrigin::Generated { .. }) {
        blocks.push(template.instruction.clone());
    }
    for shot in shots.examples() {
        check_pair(&shot.pair)?;
        let answer = template.answer_format.answer_text(shot.label);
        blocks.push(render_pair_block(
            &template.shape,
            &shot.pair.claim_a,
            &shot.pair.claim_b,
            Some(answer),
        )?);
    }
    blocks.push(render_pair_block(
        &template.shape,
        &query.claim_a,
        &query.claim_b,
        None,
    )?);
    Ok(blocks.join(BLOCK_SEPARATOR))
}

/// Build the two-message request for the prompt-generation agent: the fixed
/// system prompt, and a user message that only says the examples match or
/// not, followed by the labeled examples.
pub fn build_generation_request(shots: &FewShotSet) -> Vec<ChatMessage> {
    let mut user = String::from(GENERATION_USER_INTRO);
    for shot in shots.examples() {
        user.push_str(BLOCK_SEPARATOR);
        let answer = AnswerFormat::MatchNotMatch.answer_text(shot.label);
        let block = render_pair_block(
            &PairShape::Statements,
            &shot.pair.claim_a,
            &shot.pair.claim_b,
            Some(answer),
        )
        .expect("statements shape has no placeholders to mismatch");
        user.push_str(&block);
    }
    vec![
        ChatMessage::system(GENERATION_SYSTEM_PROMPT),
        ChatMessage::user(user),
    ]
}
