//! Comment dumps: loading, eligibility filtering, username masking and
//! parent-context resolution.
//!
//! Input is Pushshift-style newline-delimited JSON. `subreddit` maps onto
//! [`Comment::community`]; `body == "[removed]"` marks a moderator removal and
//! `body == "[deleted]"` or `author == "[deleted]"` marks an author deletion.

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;
use thiserror::Error;

/// Author name used by the platform for deleted accounts.
pub const DELETED_SENTINEL: &str = "[deleted]";
const REMOVED_BODY: &str = "[removed]";
/// Replacement text for username mentions.
pub const NAME_MASK: &str = "[NAME]";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable { path: String, source: io::Error },
    #[error("{failed} of {total} records failed to parse; is this a comment dump?")]
    SchemaError { failed: usize, total: usize },
    #[error("duplicate comment id `{0}`")]
    DuplicateId(String),
    #[error("comment has empty {0}")]
    EmptyField(&'static str),
    #[error("malformed store line {line}: {message}")]
    MalformedStore { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    /// Parent comment id; `None` for top-level comments (parent is the submission).
    pub parent_id: Option<String>,
    pub link_id: String,
    pub community: String,
    pub author: String,
    pub body: String,
    /// Net upvotes (upvotes - downvotes).
    pub score: i64,
    pub created_utc: i64,
    pub removed_by_moderator: bool,
    pub deleted_by_author: bool,
    pub year_tag: String,
}

impl Comment {
    pub fn is_top_level(&self) -> bool {
        self.parent_id.is_none()
    }
}

/// Immutable, indexed collection of comments.
///
/// Comments are kept ordered by `(community, created_utc, id)` so that every
/// per-community iteration is deterministic.
#[derive(Debug, Clone, Default)]
pub struct CommentStore {
    comments: Vec<Comment>,
    by_id: HashMap<String, usize>,
    by_community: BTreeMap<String, Vec<usize>>,
}

impl PartialEq for CommentStore {
    fn eq(&self, other: &Self) -> bool {
        self.comments == other.comments
    }
}

impl CommentStore {
    pub fn from_comments(mut comments: Vec<Comment>) -> Result<Self, CorpusError> {
        comments.sort_by(|a, b| {
            (&a.community, a.created_utc, &a.id).cmp(&(&b.community, b.created_utc, &b.id))
        });
        let mut by_id = HashMap::with_capacity(comments.len());
        let mut by_community: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, c) in comments.iter().enumerate() {
            if c.id.is_empty() {
                return Err(CorpusError::EmptyField("id"));
            }
            if c.community.is_empty() {
                return Err(CorpusError::EmptyField("community"));
            }
            if by_id.insert(c.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(c.id.clone()));
            }
            by_community.entry(c.community.clone()).or_default().push(i);
        }
        Ok(Self {
            comments,
            by_id,
            by_community,
        })
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Comment> {
        self.by_id.get(id).map(|&i| &self.comments[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Comment> {
        self.comments.iter()
    }

    pub fn communities(&self) -> impl Iterator<Item = &str> {
        self.by_community.keys().map(String::as_str)
    }

    /// Comments of one community in `(created_utc, id)` order.
    pub fn community(&self, name: &str) -> impl Iterator<Item = &Comment> {
        self.by_community
            .get(name)
            .into_iter()
            .flatten()
            .map(|&i| &self.comments[i])
    }

    pub fn into_comments(self) -> Vec<Comment> {
        self.comments
    }

    /// Writes the store as one JSON object per line.
    pub fn write_jsonl(&self, out: &mut impl Write) -> io::Result<()> {
        for c in &self.comments {
            serde_json::to_writer(&mut *out, c)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads a store previously written by [`CommentStore::write_jsonl`].
    pub fn read_jsonl(path: &Path) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|source| CorpusError::FileUnreadable {
            path: path.display().to_string(),
            source,
        })?;
        let mut comments = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| CorpusError::FileUnreadable {
                path: path.display().to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let c: Comment =
                serde_json::from_str(&line).map_err(|e| CorpusError::MalformedStore {
                    line: n + 1,
                    message: e.to_string(),
                })?;
            comments.push(c);
        }
        Self::from_comments(comments)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusLoad {
    pub store: CommentStore,
    /// Records skipped because a required field was missing or malformed.
    pub skipped: usize,
    /// Records skipped because their id had already been seen.
    pub duplicates: usize,
}

fn str_field<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> Option<&'a str> {
    obj.get(key).and_then(Value::as_str)
}

fn int_field(obj: &serde_json::Map<String, Value>, key: &str) -> Option<i64> {
    match obj.get(key)? {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64)),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn strip_kind_prefix(id: &str) -> &str {
    id.strip_prefix("t1_").unwrap_or(id)
}

/// Converts one dump record into a [`Comment`], or `None` when a required field is absent.
pub fn parse_dump_record(line: &str, year_tag: &str) -> Option<Comment> {
    let value: Value = serde_json::from_str(line).ok()?;
    let obj = value.as_object()?;
    let id = strip_kind_prefix(str_field(obj, "id")?).to_string();
    let community = str_field(obj, "subreddit")?.to_string();
    let author = str_field(obj, "author")?.to_string();
    let body = str_field(obj, "body")?.to_string();
    let score = int_field(obj, "score")?;
    let created_utc = int_field(obj, "created_utc")?;
    if id.is_empty() || community.is_empty() {
        return None;
    }
    let parent_id = str_field(obj, "parent_id")
        .filter(|p| !p.is_empty() && !p.starts_with("t3_"))
        .map(|p| strip_kind_prefix(p).to_string());
    let link_id = str_field(obj, "link_id").unwrap_or_default().to_string();
    let removed_by_moderator = body == REMOVED_BODY;
    let deleted_by_author = body == DELETED_SENTINEL || author == DELETED_SENTINEL;
    Some(Comment {
        id,
        parent_id,
        link_id,
        community,
        author,
        body,
        score,
        created_utc,
        removed_by_moderator,
        deleted_by_author,
        year_tag: year_tag.to_string(),
    })
}

/// Parses a newline-delimited dump. Unparseable records are skipped and counted;
/// if more than half of the non-blank lines fail, the file is rejected.
pub fn load_corpus(path: &Path, year_tag: &str) -> Result<CorpusLoad, CorpusError> {
    let unreadable = |source| CorpusError::FileUnreadable {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(unreadable)?;
    parse_corpus(BufReader::new(file), year_tag).map_err(|e| match e {
        ParseFailure::Io(source) => unreadable(source),
        ParseFailure::Corpus(e) => e,
    })
}

enum ParseFailure {
    Io(io::Error),
    Corpus(CorpusError),
}

fn parse_corpus(reader: impl BufRead, year_tag: &str) -> Result<CorpusLoad, ParseFailure> {
    let mut comments = Vec::new();
    let mut seen = HashSet::new();
    let (mut total, mut skipped, mut duplicates) = (0usize, 0usize, 0usize);
    for line in reader.lines() {
        let line = line.map_err(ParseFailure::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match parse_dump_record(&line, year_tag) {
            Some(c) if seen.contains(&c.id) => duplicates += 1,
            Some(c) => {
                seen.insert(c.id.clone());
                comments.push(c);
            }
            None => skipped += 1,
        }
    }
    if total > 0 && skipped * 2 > total {
        return Err(ParseFailure::Corpus(CorpusError::SchemaError {
            failed: skipped,
            total,
        }));
    }
    if skipped > 0 {
        tracing::warn!(skipped, total, "skipped records with missing fields");
    }
    let store = CommentStore::from_comments(comments).map_err(ParseFailure::Corpus)?;
    Ok(CorpusLoad {
        store,
        skipped,
        duplicates,
    })
}

/// Accounts whose comments are excluded: moderation bots everywhere and
/// moderators of the community they moderate. Names compare case-insensitively
/// after trimming.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExclusionLists {
    bot_accounts: HashSet<String>,
    /// Keyed by normalized community name; the `None` key applies everywhere.
    moderator_accounts: HashMap<Option<String>, HashSet<String>>,
}

fn normalize_name(name: &str) -> String {
    name.trim().to_lowercase()
}

impl ExclusionLists {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_bot(&mut self, name: &str) {
        let n = normalize_name(name);
        if !n.is_empty() {
            self.bot_accounts.insert(n);
        }
    }

    /// Adds a moderator. `community = None` excludes the account in every community.
    pub fn add_moderator(&mut self, community: Option<&str>, name: &str) {
        let n = normalize_name(name);
        if n.is_empty() {
            return;
        }
        self.moderator_accounts
            .entry(community.map(normalize_name))
            .or_default()
            .insert(n);
    }

    /// Bot list: one account per line; blank lines and `#` comments ignored.
    pub fn read_bots(&mut self, text: &str) {
        for line in content_lines(text) {
            self.add_bot(line);
        }
    }

    /// Moderator list: `community account` per line, or a bare `account` to
    /// exclude it from every community.
    pub fn read_moderators(&mut self, text: &str) {
        for line in content_lines(text) {
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some(community), Some(account)) => self.add_moderator(Some(community), account),
                (Some(account), None) => self.add_moderator(None, account),
                _ => {}
            }
        }
    }

    pub fn excludes(&self, community: &str, author: &str) -> bool {
        let author = normalize_name(author);
        if self.bot_accounts.contains(&author) {
            return true;
        }
        let global = self.moderator_accounts.get(&None);
        let local = self.moderator_accounts.get(&Some(normalize_name(community)));
        global.is_some_and(|s| s.contains(&author)) || local.is_some_and(|s| s.contains(&author))
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// The eligibility predicate shared by filtering and pair construction.
pub fn is_eligible(comment: &Comment, excl: &ExclusionLists) -> bool {
    !comment.removed_by_moderator
        && !comment.deleted_by_author
        && comment.author.trim() != DELETED_SENTINEL
        && !excl.excludes(&comment.community, &comment.author)
}

pub fn filter_eligible(store: &CommentStore, excl: &ExclusionLists) -> CommentStore {
    let kept: Vec<Comment> = store
        .iter()
        .filter(|c| is_eligible(c, excl))
        .cloned()
        .collect();
    CommentStore::from_comments(kept).expect("subset of a valid store is valid")
}

fn username_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"(?:/u/|\bu/)[A-Za-z0-9_-]+").expect("valid regex"))
}

/// Replaces `/u/name` and `u/name` mentions with `[NAME]`.
pub fn mask_usernames(body: &str) -> String {
    username_pattern().replace_all(body, NAME_MASK).into_owned()
}

pub fn has_username_mention(body: &str) -> bool {
    username_pattern().is_match(body)
}

/// Parent comment of `target`, if it is present in `store`.
pub fn resolve_context<'a>(store: &'a CommentStore, target: &Comment) -> Option<&'a Comment> {
    target.parent_id.as_deref().and_then(|p| store.get(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn comment(id: &str, parent: Option<&str>, author: &str, body: &str) -> Comment {
        Comment {
            id: id.into(),
            parent_id: parent.map(Into::into),
            link_id: "t3_post".into(),
            community: "aww".into(),
            author: author.into(),
            body: body.into(),
            score: 1,
            created_utc: 0,
            removed_by_moderator: body == "[removed]",
            deleted_by_author: body == "[deleted]" || author == "[deleted]",
            year_tag: "2022".into(),
        }
    }

    fn dump_line(id: &str, parent: &str, score: Option<i64>) -> String {
        let mut v = serde_json::json!({
            "id": id, "parent_id": parent, "link_id": "t3_abc", "subreddit": "aww",
            "author": "alice", "body": "cute", "created_utc": 1_500_000_000,
        });
        if let Some(s) = score {
            v["score"] = s.into();
        }
        v.to_string()
    }

    #[test]
    fn loads_valid_records() {
        let text = [
            dump_line("a", "t3_abc", Some(3)),
            dump_line("b", "t1_a", Some(5)),
            dump_line("c", "t1_b", Some(-1)),
        ]
        .join("\n");
        let load = parse_corpus(text.as_bytes(), "2016").ok().unwrap();
        assert_eq!(load.store.len(), 3);
        assert_eq!(load.skipped, 0);
        let b = load.store.get("b").unwrap();
        assert_eq!(b.parent_id.as_deref(), Some("a"));
        assert_eq!(b.year_tag, "2016");
        assert!(load.store.get("a").unwrap().is_top_level());
    }

    #[test]
    fn missing_score_is_skipped_and_counted() {
        let text = [
            dump_line("a", "t3_abc", Some(3)),
            dump_line("b", "t1_a", Some(5)),
            dump_line("c", "t1_b", None),
        ]
        .join("\n");
        let load = parse_corpus(text.as_bytes(), "2016").ok().unwrap();
        assert_eq!(load.store.len(), 2);
        assert_eq!(load.skipped, 1);
    }

    #[test]
    fn prose_file_is_a_schema_error() {
        let text = "Once upon a time\nthere was a file\nthat was not json\n";
        match parse_corpus(text.as_bytes(), "2016") {
            Err(ParseFailure::Corpus(CorpusError::SchemaError { failed: 3, total: 3 })) => {}
            _ => panic!("expected SchemaError"),
        }
    }

    #[test]
    fn unreadable_file() {
        let err = load_corpus(Path::new("/nonexistent/dump.jsonl"), "x").unwrap_err();
        assert!(matches!(err, CorpusError::FileUnreadable { .. }));
    }

    #[test]
    fn removed_and_deleted_flags_from_dump_conventions() {
        let removed = r#"{"id":"x","subreddit":"s","author":"a","body":"[removed]","score":1,"created_utc":1}"#;
        let deleted = r#"{"id":"y","subreddit":"s","author":"[deleted]","body":"hi","score":1,"created_utc":"2"}"#;
        let r = parse_dump_record(removed, "t").unwrap();
        let d = parse_dump_record(deleted, "t").unwrap();
        assert!(r.removed_by_moderator && !r.deleted_by_author);
        assert!(d.deleted_by_author && !d.removed_by_moderator);
        assert_eq!(d.created_utc, 2);
    }

    #[test]
    fn filter_applies_each_rule_once() {
        let store = CommentStore::from_comments(vec![
            comment("1", None, "alice", "normal"),
            comment("2", None, "bob", "[removed]"),
            comment("3", None, "AutoModerator", "beep"),
        ])
        .unwrap();
        let mut excl = ExclusionLists::new();
        excl.read_bots("  automoderator  \n# comment\n");
        let out = filter_eligible(&store, &excl);
        assert_eq!(out.iter().map(|c| c.id.as_str()).collect::<Vec<_>>(), ["1"]);
    }

    #[test]
    fn all_eligible_is_identity() {
        let store = CommentStore::from_comments(vec![
            comment("1", None, "alice", "a"),
            comment("2", Some("1"), "bob", "b"),
        ])
        .unwrap();
        assert_eq!(filter_eligible(&store, &ExclusionLists::new()), store);
    }

    #[test]
    fn deleted_account_is_excluded() {
        let mut c = comment("1", None, "[deleted]", "still here");
        c.deleted_by_author = false;
        let store = CommentStore::from_comments(vec![c, comment("2", None, "x", "y")]).unwrap();
        let out = filter_eligible(&store, &ExclusionLists::new());
        assert!(out.get("1").is_none());
        assert!(out.get("2").is_some());
    }

    #[test]
    fn moderators_are_scoped_to_their_community() {
        let mut excl = ExclusionLists::new();
        excl.read_moderators("aww modalice\nglobalmod\n");
        assert!(excl.excludes("AWW", "ModAlice"));
        assert!(!excl.excludes("funny", "modalice"));
        assert!(excl.excludes("funny", " GlobalMod "));
    }

    #[test]
    fn masking_examples() {
        assert_eq!(mask_usernames("thanks /u/alice!"), "thanks [NAME]!");
        assert_eq!(mask_usernames("no mentions here"), "no mentions here");
        assert_eq!(
            mask_usernames("/u/a and u/b_2 agree"),
            "[NAME] and [NAME] agree"
        );
        assert_eq!(mask_usernames("see menu/item"), "see menu/item");
        assert_eq!(mask_usernames("u/some-one."), "[NAME].");
    }

    #[test]
    fn context_resolution() {
        let mut excl = ExclusionLists::new();
        excl.add_bot("nobody");
        let store = CommentStore::from_comments(vec![
            comment("p", None, "alice", "parent"),
            comment("c", Some("p"), "bob", "child"),
            comment("gone", None, "carol", "[removed]"),
            comment("orphan", Some("gone"), "dave", "reply"),
        ])
        .unwrap();
        let child = store.get("c").unwrap();
        assert_eq!(resolve_context(&store, child).unwrap().id, "p");
        assert!(resolve_context(&store, store.get("p").unwrap()).is_none());

        let filtered = filter_eligible(&store, &excl);
        let orphan = filtered.get("orphan").unwrap();
        assert!(resolve_context(&filtered, orphan).is_none());
    }

    #[test]
    fn duplicate_ids_rejected_by_store() {
        let err = CommentStore::from_comments(vec![
            comment("1", None, "a", "x"),
            comment("1", None, "b", "y"),
        ])
        .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId(_)));
    }

    #[test]
    fn community_iteration_is_chronological() {
        let mut a = comment("b", None, "x", "1");
        a.created_utc = 5;
        let mut b = comment("a", None, "x", "2");
        b.created_utc = 5;
        let mut c = comment("c", None, "x", "3");
        c.created_utc = 1;
        let store = CommentStore::from_comments(vec![a, b, c]).unwrap();
        let ids: Vec<_> = store.community("aww").map(|c| c.id.clone()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }

    fn arb_comment() -> impl Strategy<Value = Comment> {
        (
            "[a-z]{1,6}",
            prop::option::of("[a-z]{1,6}"),
            prop_oneof!["alice", "bob", "[deleted]", "AutoModerator", "modx"],
            prop_oneof!["hello", "[removed]", "[deleted]"],
            prop_oneof!["aww", "funny"],
        )
            .prop_map(|(id, parent, author, body, community)| {
                let mut c = comment(&id, parent.as_deref(), &author, &body);
                c.community = community.to_string();
                c
            })
    }

    proptest! {
        #[test]
        fn filtering_is_idempotent(comments in prop::collection::vec(arb_comment(), 0..30)) {
            let mut uniq = HashMap::new();
            for c in comments { uniq.entry(c.id.clone()).or_insert(c); }
            let store = CommentStore::from_comments(uniq.into_values().collect()).unwrap();
            let mut excl = ExclusionLists::new();
            excl.add_bot("automoderator");
            excl.add_moderator(Some("aww"), "modx");
            let once = filter_eligible(&store, &excl);
            let twice = filter_eligible(&once, &excl);
            prop_assert_eq!(&once, &twice);
            for c in once.iter() {
                prop_assert!(is_eligible(c, &excl));
                if let Some(parent) = resolve_context(&once, c) {
                    prop_assert!(is_eligible(parent, &excl));
                }
            }
        }

        #[test]
        fn masking_is_idempotent(body in "[ a-zA-Z0-9_/.!-]{0,40}") {
            let once = mask_usernames(&body);
            prop_assert_eq!(mask_usernames(&once), once.clone());
            prop_assert!(!has_username_mention(&once));
        }
    }
}
