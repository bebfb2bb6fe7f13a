use super::bank::ValueBank;
use super::ExtractionError;
use crate::labeling::CommentPair;

pub const PLACEHOLDERS: [&str; 5] = [
    "SUBREDDIT",
    "SUBREDDIT_DESCRIPTION",
    "VALUE_BANK",
    "CONTEXT",
    "COMMENT",
];

const DEFAULT_TEMPLATE: &str = include_str!("default_template.txt");

/// Appended to every rendered prompt so that responses can be parsed mechanically.
pub const RESPONSE_FORMAT: &str = "Respond in strict JSON format with exactly two fields: \
\"thinking\" (a string with your step-by-step reasoning) and \"answer\" (either a JSON list \
of one to three keyword strings, or the string \"N/A\"). Example: \
{\"thinking\": \"...\", \"answer\": [\"keyword one\", \"keyword two\"]}";

const EMPTY_BANK: &str = "(empty)";
const NO_DESCRIPTION: &str = "(no description available)";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            text: DEFAULT_TEMPLATE.trim_end().to_string(),
        }
    }
}

impl PromptTemplate {
    /// Every placeholder must occur at least once.
    pub fn new(text: impl Into<String>) -> Result<Self, ExtractionError> {
        let text = text.into();
        for name in PLACEHOLDERS {
            if !text.contains(&format!("{{{name}}}")) {
                return Err(ExtractionError::Template(format!(
                    "placeholder {{{name}}} missing"
                )));
            }
        }
        Ok(Self { text })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Single-pass substitution: placeholder-like text inside substituted
    /// values is left untouched.
    pub fn render(&self, lookup: impl Fn(&str) -> Option<String>) -> String {
        let mut out = String::with_capacity(self.text.len() * 2);
        let mut rest = self.text.as_str();
        while let Some(start) = rest.find('{') {
            out.push_str(&rest[..start]);
            let after = &rest[start + 1..];
            let replaced = after.find('}').and_then(|end| {
                let name = &after[..end];
                lookup(name).map(|v| (v, end))
            });
            match replaced {
                Some((value, end)) => {
                    out.push_str(&value);
                    rest = &after[end + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out
    }
}

/// Renders the extraction prompt for one pair.
pub fn build_prompt(
    template: &PromptTemplate,
    community: &str,
    description: &str,
    bank: &ValueBank,
    bank_token_budget: Option<usize>,
    pair: &CommentPair,
) -> String {
    let bank_text = bank.render(bank_token_budget);
    let mut prompt = template.render(|name| {
        Some(match name {
            "SUBREDDIT" => community.to_string(),
            "SUBREDDIT_DESCRIPTION" if description.trim().is_empty() => NO_DESCRIPTION.into(),
            "SUBREDDIT_DESCRIPTION" => description.to_string(),
            "VALUE_BANK" if bank_text.is_empty() => EMPTY_BANK.into(),
            "VALUE_BANK" => bank_text.clone(),
            "CONTEXT" => pair.context.body.clone(),
            "COMMENT" => pair.target.body.clone(),
            _ => return None,
        })
    });
    prompt.push_str("\n\n");
    prompt.push_str(RESPONSE_FORMAT);
    prompt
}
