use super::{PromptTemplate, QuestionPosition};
use crate::corpus::ClaimPair;

pub const INPUT_PREFIX: &str = "Statement 1: ";
pub const VERIFIED_PREFIX: &str = "Statement 2: ";

/// Fills the template slots with the pair's claims. The answer slot is left
/// empty (the pattern ends with `Answer:`).
pub fn render_single(template: &PromptTemplate, pair: &ClaimPair, position: QuestionPosition) -> String {
    let (prefix, mid, suffix) = split_pattern(template.pattern_for(position));
    let mut out = String::with_capacity(
        prefix.len() + mid.len() + suffix.len() + pair.input_claim.len() + pair.verified_claim.len() + 26,
    );
    out.push_str(prefix);
    out.push_str(INPUT_PREFIX);
    out.push_str(&pair.input_claim);
    out.push_str(mid);
    out.push_str(VERIFIED_PREFIX);
    out.push_str(&pair.verified_claim);
    out.push_str(suffix);
    out
}

/// Recovers (input claim, verified claim) from a single rendered prompt.
///
/// Returns `None` if the text does not have the template's shape. When the
/// input claim itself contains the text between the two slots, the split is
/// taken at its first occurrence.
pub fn extract_claims(
    template: &PromptTemplate,
    rendered: &str,
    position: QuestionPosition,
) -> Option<(String, String)> {
    let (prefix, mid, suffix) = split_pattern(template.pattern_for(position));
    let body = rendered
        .strip_prefix(prefix)?
        .strip_prefix(INPUT_PREFIX)?
        .strip_suffix(suffix)?;
    let separator = format!("{mid}{VERIFIED_PREFIX}");
    let (a, b) = body.split_once(&separator)?;
    Some((a.to_owned(), b.to_owned()))
}

/// `prefix {A} mid {B} suffix`; slot order is checked when the manifest loads.
fn split_pattern(pattern: &str) -> (&str, &str, &str) {
    let (prefix, rest) = pattern.split_once("{A}").expect("pattern has {A}");
    let (mid, suffix) = rest.split_once("{B}").expect("pattern has {B}");
    (prefix, mid, suffix)
}
