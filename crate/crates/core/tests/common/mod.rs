// Synthetic corpus with planted values, shared by the integration suites.
#![allow(dead_code)]

use commval::extraction::{CompletionRequest, MockProvider, Provider, ProviderError, MOCK_MALFORMED};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const N_COMMUNITIES: usize = 80;
pub const THREADS: usize = 200;
pub const PAIRS: usize = 20;
pub const YEAR: &str = "2016";

/// One embedding cluster: its label, synonyms, and the communities it is planted in.
pub struct Group {
    pub label: &'static str,
    pub value: &'static str,
    pub synonyms: &'static [&'static str],
    pub communities: std::ops::Range<usize>,
}

pub const GROUPS: &[Group] = &[
    Group { label: "humor", value: "humor", synonyms: &["humor", "humour", "funny"], communities: 0..80 },
    Group { label: "empathy", value: "empathy", synonyms: &["empathy", "compassion"], communities: 0..65 },
    Group { label: "supportive", value: "supportive", synonyms: &["supportive", "encouraging"], communities: 0..60 },
    Group { label: "helpfulness", value: "helpfulness", synonyms: &["helpfulness", "helpful", "useful"], communities: 0..59 },
    Group { label: "expertise", value: "expertise", synonyms: &["expertise", "knowledgeable"], communities: 10..50 },
    Group { label: "nostalgia", value: "nostalgia", synonyms: &["nostalgia", "nostalgic"], communities: 30..60 },
    Group { label: "curiosity", value: "curiosity", synonyms: &["curiosity", "curious"], communities: 50..71 },
    Group { label: "relatable", value: "relatable", synonyms: &["relatable", "relatability"], communities: 60..80 },
    Group { label: "wordplay", value: "wordplay", synonyms: &["wordplay", "puns"], communities: 0..12 },
    Group { label: "gratitude", value: "gratitude", synonyms: &["gratitude", "grateful"], communities: 20..28 },
    Group { label: "thankfulness", value: "gratitude", synonyms: &["thankfulness", "thanks"], communities: 25..32 },
    Group { label: "honesty", value: "honesty", synonyms: &["honesty", "candor"], communities: 75..80 },
];

pub const OVERRIDES: &str = "# planted synonym merge\nmerge gratitude thankfulness -> gratitude\n";

pub fn community(c: usize) -> String {
    format!("comm{c:02}")
}

pub fn na_count(c: usize) -> usize {
    c % 3
}

/// Planted answer of every High reply: `None` is N/A.
pub fn planted_answers() -> BTreeMap<String, Option<Vec<&'static str>>> {
    let mut out = BTreeMap::new();
    for c in 0..N_COMMUNITIES {
        let targets: Vec<String> = (THREADS - PAIRS..THREADS).map(|j| reply_id(c, j)).collect();
        let answered = PAIRS - na_count(c);
        let mut kws: Vec<Vec<&'static str>> = vec![Vec::new(); answered];
        let present: Vec<&Group> = GROUPS.iter().filter(|g| g.communities.contains(&c)).collect();
        for (i, g) in present.iter().enumerate() {
            kws[i % answered].push(g.synonyms[(c + i) % g.synonyms.len()]);
        }
        for (i, k) in kws.iter_mut().enumerate() {
            if k.is_empty() {
                k.push(GROUPS[0].synonyms[(c + i) % GROUPS[0].synonyms.len()]);
            }
        }
        for (i, id) in targets.into_iter().enumerate() {
            out.insert(id, kws.get(i).cloned());
        }
    }
    out
}

pub fn parent_id(c: usize, j: usize) -> String {
    format!("c{c:02}p{j:03}")
}

pub fn reply_id(c: usize, j: usize) -> String {
    format!("c{c:02}r{j:03}")
}

pub fn keyword_value(keyword: &str) -> Option<&'static str> {
    GROUPS.iter().find(|g| g.synonyms.contains(&keyword)).map(|g| g.value)
}

/// Expected value -> community -> record count, skipping `excluded` targets.
pub fn expected_counts(excluded: &BTreeSet<String>) -> BTreeMap<String, BTreeMap<String, u64>> {
    let mut out: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for (id, answer) in planted_answers() {
        if excluded.contains(&id) {
            continue;
        }
        let Some(kws) = answer else { continue };
        let c: usize = id[1..3].parse().unwrap();
        let values: BTreeSet<&str> = kws.iter().filter_map(|k| keyword_value(k)).collect();
        for v in values {
            *out.entry(v.to_string()).or_default().entry(community(c)).or_default() += 1;
        }
    }
    out
}

fn dump(id: &str, parent: Option<&str>, community: &str, author: &str, body: &str, score: i64, t: i64) -> String {
    let parent = match parent {
        Some(p) => format!("t1_{p}"),
        None => "t3_link".to_string(),
    };
    json!({
        "id": id,
        "parent_id": parent,
        "link_id": "t3_link",
        "subreddit": community,
        "author": author,
        "body": body,
        "score": score,
        "created_utc": t,
    })
    .to_string()
}

pub fn corpus_lines() -> Vec<String> {
    let planted = planted_answers();
    let mut lines = Vec::new();
    let mut t = 1_451_606_400i64;
    for c in 0..N_COMMUNITIES {
        let name = community(c);
        for j in 0..THREADS {
            t += 1;
            let body = if j == 0 {
                "as u/somebody said earlier, this is a parent".to_string()
            } else {
                format!("parent {}", parent_id(c, j))
            };
            lines.push(dump(&parent_id(c, j), None, &name, &format!("user{j}"), &body, j as i64, t));
        }
        for j in 0..THREADS {
            t += 1;
            let id = reply_id(c, j);
            let body = match planted.get(&id) {
                Some(Some(kws)) => format!("reply planted-id={id} planted: {}", kws.join("|")),
                Some(None) => format!("reply planted-id={id} planted: N/A"),
                None => format!("reply {id}"),
            };
            let pid = parent_id(c, j);
            lines.push(dump(&id, Some(&pid), &name, &format!("replier{j}"), &body, (THREADS + j) as i64, t));
        }
        t += 1;
        let pid = parent_id(c, 0);
        lines.push(dump(&format!("c{c:02}bot"), Some(&pid), &name, "AutoModerator", "bot reply", 10_000, t));
        lines.push(dump(&format!("c{c:02}rm"), Some(&pid), &name, "someone", "[removed]", 10_000, t + 1));
    }
    for tiny in ["tiny0", "tiny1"] {
        for j in 0..3 {
            t += 1;
            lines.push(dump(&format!("{tiny}p{j}"), None, tiny, "u", "parent", j, t));
            lines.push(dump(&format!("{tiny}r{j}"), Some(&format!("{tiny}p{j}")), tiny, "v", "reply", 10 + j, t));
        }
    }
    lines
}

/// Group centers are one-hot; each keyword gets a small seeded offset.
pub fn vectors_text() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut out = String::new();
    let mut rows = BTreeMap::new();
    for (g, group) in GROUPS.iter().enumerate() {
        for kw in group.synonyms {
            let v: Vec<f64> = (0..GROUPS.len())
                .map(|d| f64::from(u8::from(d == g)) + rng.random_range(-0.05..0.05))
                .collect();
            rows.insert(kw.to_string(), v);
        }
    }
    for (k, v) in rows {
        let nums: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&format!("{k}\t{}\n", nums.join(" ")));
    }
    out
}

fn planted_marker(prompt: &str) -> Option<(&str, &str)> {
    let start = prompt.find("planted-id=")? + "planted-id=".len();
    let rest = &prompt[start..];
    let (id, rest) = rest.split_once(" planted: ")?;
    let marker = rest.split_whitespace().next()?;
    Some((id, marker))
}

fn label_answer(prompt: &str) -> Option<String> {
    if !prompt.starts_with("The following keywords") {
        return None;
    }
    let list = prompt.lines().nth(1)?;
    let first = list.split(", ").next()?.trim();
    GROUPS
        .iter()
        .find(|g| g.synonyms.contains(&first))
        .map(|g| g.label.to_string())
}

/// Answers extraction prompts from the planted marker and label prompts from the
/// group table. Target ids in `permanent` always get a malformed reply; ids in
/// `transient` only on their first attempt.
pub fn planted_responder(
    permanent: BTreeSet<String>,
    transient: BTreeSet<String>,
) -> impl Fn(&str, usize) -> Result<String, ProviderError> + Send + Sync + 'static {
    move |prompt, attempt| {
        if let Some(label) = label_answer(prompt) {
            return Ok(label);
        }
        let (id, marker) = planted_marker(prompt)
            .ok_or_else(|| ProviderError::Unavailable(format!("unplanted prompt: {prompt}")))?;
        if permanent.contains(id) || (attempt == 0 && transient.contains(id)) {
            return Ok(MOCK_MALFORMED.to_string());
        }
        let answer = if marker == "N/A" {
            json!("N/A")
        } else {
            json!(marker.split('|').collect::<Vec<_>>())
        };
        Ok(json!({"thinking": format!("planted for {id}"), "answer": answer}).to_string())
    }
}

/// Lets a test keep a handle on the mock after handing it to the pipeline.
pub struct Shared(pub Arc<MockProvider>);

impl Provider for Shared {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        self.0.complete(request)
    }
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    /// `input_extra` is appended to the `[input]` table, `extra_config` to the end.
    pub fn write(input_extra: &str, extra_config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::write(root.join("comments.jsonl"), corpus_lines().join("\n") + "\n").unwrap();
        std::fs::write(root.join("bots.txt"), "# known bots\nAutoModerator\n").unwrap();
        std::fs::write(root.join("vectors.tsv"), vectors_text()).unwrap();
        std::fs::write(root.join("overrides.txt"), OVERRIDES).unwrap();
        let config = format!(
            "year_tag = \"{YEAR}\"\nseed = 7\nout_dir = \"out\"\n\n\
             [input]\ncomments = \"comments.jsonl\"\nbots = \"bots.txt\"\noverrides = \"overrides.txt\"\n{input_extra}\n\
             [sampling]\npairs_per_community = {PAIRS}\nregression_per_class = 5\n\n\
             [canonicalize]\nk = {}\nembedder = \"file\"\nvectors = \"vectors.tsv\"\n{extra_config}",
            GROUPS.len()
        );
        std::fs::write(root.join("config.toml"), config).unwrap();
        Self { dir }
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn config_path(&self) -> PathBuf {
        self.root().join("config.toml")
    }

    pub fn out(&self) -> PathBuf {
        self.root().join("out")
    }
}

/// Seeded prosociality scores for every comment, rising with the comment score.
pub fn scores_csv() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out = String::from("comment_id,supportiveness,agreement,politeness\n");
    for c in 0..N_COMMUNITIES {
        for j in 0..THREADS {
            for (id, score) in [(parent_id(c, j), j), (reply_id(c, j), THREADS + j)] {
                let base = score as f64 / (2 * THREADS) as f64;
                let mut noisy = || (base + rng.random_range(-0.25..0.25)).clamp(0.0, 1.0);
                out.push_str(&format!("{id},{:.6},{:.6},{:.6}\n", noisy(), noisy(), noisy()));
            }
        }
    }
    for tiny in ["tiny0", "tiny1"] {
        for j in 0..3 {
            out.push_str(&format!("{tiny}p{j},0.2,0.3,0.4\n{tiny}r{j},0.5,0.6,0.7\n"));
        }
    }
    out
}

/// Relative path -> bytes of every file under `dir`, skipping `skip` subdirectories.
pub fn snapshot(dir: &Path, skip: &[&str]) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, skip: &[&str], out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let rel = path.strip_prefix(base).unwrap().to_string_lossy().replace('\\', "/");
            if skip.iter().any(|s| rel == *s) {
                continue;
            }
            if path.is_dir() {
                walk(base, &path, skip, out);
            } else {
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, skip, &mut out);
    out
}
