use super::PredictError;
use crate::model::Choice;

/// Extracts a choice from free model output.
///
/// Rules, first match wins:
/// 1. the trimmed text is `A` or `B` (any case);
/// 2. the first standalone upper-case token `A` or `B`;
/// 3. the text contains exactly one of the two proposal texts.
pub fn parse_model_output(
    text: &str,
    first_text: &str,
    second_text: &str,
) -> Result<Choice, PredictError> {
    let trimmed = text.trim();
    if trimmed.eq_ignore_ascii_case("a") {
        return Ok(Choice::A);
    }
    if trimmed.eq_ignore_ascii_case("b") {
        return Ok(Choice::B);
    }
    for token in trimmed.split(|c: char| !c.is_alphanumeric()) {
        match token {
            "A" => return Ok(Choice::A),
            "B" => return Ok(Choice::B),
            _ => {}
        }
    }
    let has_first = !first_text.is_empty() && trimmed.contains(first_text);
    let has_second = !second_text.is_empty() && trimmed.contains(second_text);
    match (has_first, has_second) {
        (true, false) => Ok(Choice::A),
        (false, true) => Ok(Choice::B),
        _ => Err(PredictError::UnparseableResponse(text.to_owned())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: &str = "actions to curb tax evasion";
    const Q: &str = "expand the privatization of state-owned companies";

    #[test]
    fn bare_letters() {
        assert_eq!(parse_model_output("B", P, Q), Ok(Choice::B));
        assert_eq!(parse_model_output("  a\n", P, Q), Ok(Choice::A));
    }

    #[test]
    fn token_scan() {
        assert_eq!(
            parse_model_output("Option A: actions to curb tax evasion", P, Q),
            Ok(Choice::A)
        );
        assert_eq!(parse_model_output("I pick (B).", P, Q), Ok(Choice::B));
    }

    #[test]
    fn proposal_text_containment() {
        assert_eq!(
            parse_model_output(
                "they would expand the privatization of state-owned companies",
                P,
                Q
            ),
            Ok(Choice::B)
        );
    }

    #[test]
    fn unparseable() {
        assert!(matches!(
            parse_model_output("both are good", P, Q),
            Err(PredictError::UnparseableResponse(_))
        ));
        let both = format!("{P} and {Q}");
        assert!(parse_model_output(&both, P, Q).is_err());
    }
}
