use super::cluster::ValueCluster;
use crate::extraction::{cache_key, Provider, ProviderConfig, ProviderError, ResponseCache};
use std::collections::HashMap;

const LABEL_PROMPT: &str = "The following keywords describe qualities of highly upvoted \
comments and were grouped together because they are similar:\n{KEYWORDS}\n\n\
Answer with a single lowercase word that best names this group of values. \
Respond with the word only.";

pub fn label_prompt(cluster: &ValueCluster) -> String {
    let list: Vec<&str> = cluster.members.iter().map(String::as_str).collect();
    LABEL_PROMPT.replace("{KEYWORDS}", &list.join(", "))
}

/// Lowercased single word, or `None` if the response is not one word.
pub fn sanitize_label(raw: &str) -> Option<String> {
    let t = raw
        .trim()
        .trim_matches(|c: char| matches!(c, '"' | '\'' | '`' | '.' | '!' | '*'))
        .trim()
        .to_lowercase();
    (!t.is_empty() && !t.contains(char::is_whitespace)).then_some(t)
}

/// Most frequent member keyword; ties go to the lexicographically smallest.
pub fn modal_member(cluster: &ValueCluster, frequencies: &HashMap<String, usize>) -> String {
    let mut best: Option<(&String, usize)> = None;
    for m in &cluster.members {
        let f = frequencies.get(m).copied().unwrap_or(0);
        if best.is_none_or(|(_, bf)| f > bf) {
            best = Some((m, f));
        }
    }
    best.map(|(m, _)| m.clone()).unwrap_or_default()
}

/// Names a cluster with one lowercase word.
///
/// A singleton whose keyword is already one word is its own label. Otherwise
/// the provider is asked; after a multi-word answer it is asked once more, and
/// then the modal member keyword is used.
pub fn label_cluster(
    provider: &dyn Provider,
    config: &ProviderConfig,
    cluster: &ValueCluster,
    frequencies: &HashMap<String, usize>,
    cache: &mut ResponseCache,
) -> Result<String, ProviderError> {
    if cluster.members.len() == 1 {
        if let Some(word) = cluster.members.iter().next().and_then(|m| sanitize_label(m)) {
            return Ok(word);
        }
    }
    let prompt = label_prompt(cluster);
    let key = cache_key(&config.model_id, &prompt);
    if let Some(word) = cache.get(&key).and_then(sanitize_label) {
        return Ok(word);
    }
    let mut answered = false;
    let mut last_error = None;
    for _ in 0..2 {
        match provider.complete(&config.request(&prompt)) {
            Ok(raw) => {
                answered = true;
                if let Some(word) = sanitize_label(&raw) {
                    cache
                        .put(key, raw)
                        .map_err(|e| ProviderError::Unavailable(format!("cache: {e}")))?;
                    return Ok(word);
                }
            }
            Err(e) => last_error = Some(e),
        }
    }
    if answered {
        Ok(modal_member(cluster, frequencies))
    } else {
        Err(last_error.unwrap_or_else(|| ProviderError::Unavailable("no response".into())))
    }
}
