//! Tweet, annotation and label records; JSONL loading; label derivation and
//! dataset statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lingfeat::tokenize;
use crate::util::{read_jsonl, write_jsonl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Twitter,
    Tumblr,
}

impl Source {
    pub const ALL: [Source; 2] = [Source::Twitter, Source::Tumblr];

    pub fn name(self) -> &'static str {
        match self {
            Source::Twitter => "twitter",
            Source::Tumblr => "tumblr",
        }
    }
}

/// The three psychosocial codes, each detected as its own binary task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Code {
    Aggression,
    Loss,
    SubstanceUse,
}

impl Code {
    pub const ALL: [Code; 3] = [Code::Aggression, Code::Loss, Code::SubstanceUse];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Code::Aggression => "aggression",
            Code::Loss => "loss",
            Code::SubstanceUse => "substance_use",
        }
    }

    pub fn parse(s: &str) -> Option<Code> {
        Code::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Local visual concepts. The declaration order is the feature-vector layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concept {
    Handgun,
    LongGun,
    Joint,
    Marijuana,
    Person,
    Tattoo,
    HandGesture,
    Lean,
    Money,
}

pub const N_CONCEPTS: usize = 9;

impl Concept {
    pub const ALL: [Concept; N_CONCEPTS] = [
        Concept::Handgun,
        Concept::LongGun,
        Concept::Joint,
        Concept::Marijuana,
        Concept::Person,
        Concept::Tattoo,
        Concept::HandGesture,
        Concept::Lean,
        Concept::Money,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Concept::Handgun => "handgun",
            Concept::LongGun => "long_gun",
            Concept::Joint => "joint",
            Concept::Marijuana => "marijuana",
            Concept::Person => "person",
            Concept::Tattoo => "tattoo",
            Concept::HandGesture => "hand_gesture",
            Concept::Lean => "lean",
            Concept::Money => "money",
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub user_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_tags: Option<Vec<(String, String)>>,
    pub source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotatorRole {
    Student,
    Expert,
    Tiebreak,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeAnnotation {
    pub tweet_id: String,
    pub annotator_id: String,
    #[serde(rename = "role")]
    pub annotator_role: AnnotatorRole,
    pub aggression: bool,
    pub loss: bool,
    pub substance_use: bool,
}

impl CodeAnnotation {
    pub fn flag(&self, code: Code) -> bool {
        match code {
            Code::Aggression => self.aggression,
            Code::Loss => self.loss,
            Code::SubstanceUse => self.substance_use,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    AnyPositive,
    Majority,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeLabels {
    pub tweet_id: String,
    /// Indexed by [`Code::index`].
    pub labels: [bool; 3],
    pub rule: LabelRule,
}

impl CodeLabels {
    pub fn get(&self, code: Code) -> bool {
        self.labels[code.index()]
    }
}

/// Checks that `pos_tags`, when present, align token-for-token with the tokenizer.
pub fn validate_tweet(tweet: &TweetRecord) -> Result<()> {
    if let Some(tags) = &tweet.pos_tags {
        let tokens = tokenize(&tweet.text);
        let aligned = tokens.len() == tags.len()
            && tokens
                .iter()
                .zip(tags)
                .all(|(t, (tok, _))| t.surface == *tok);
        if !aligned {
            return Err(Error::invalid(format!(
                "tweet {}: pos_tags do not align with tokenized text",
                tweet.tweet_id
            )));
        }
    }
    Ok(())
}

/// Validates a tweet/annotation collection: unique keys, aligned POS tags and
/// referential integrity of annotations.
pub fn validate_corpus(tweets: &[TweetRecord], annotations: &[CodeAnnotation]) -> Result<()> {
    let mut ids = HashSet::with_capacity(tweets.len());
    for t in tweets {
        if !ids.insert(t.tweet_id.as_str()) {
            return Err(Error::Duplicate {
                what: "tweets",
                key: t.tweet_id.clone(),
            });
        }
        validate_tweet(t)?;
    }
    let mut pairs = HashSet::with_capacity(annotations.len());
    let mut dangling = BTreeSet::new();
    for a in annotations {
        if !ids.contains(a.tweet_id.as_str()) {
            dangling.insert(a.tweet_id.clone());
        }
        if !pairs.insert((a.tweet_id.as_str(), a.annotator_id.as_str())) {
            return Err(Error::Duplicate {
                what: "annotations",
                key: format!("({}, {})", a.tweet_id, a.annotator_id),
            });
        }
    }
    if !dangling.is_empty() {
        return Err(Error::DanglingTweetIds(dangling.into_iter().collect()));
    }
    Ok(())
}

pub fn load_tweets(path: &Path) -> Result<Vec<TweetRecord>> {
    read_jsonl(path)
}

pub fn load_corpus(
    tweets_path: &Path,
    annotations_path: &Path,
) -> Result<(Vec<TweetRecord>, Vec<CodeAnnotation>)> {
    let tweets: Vec<TweetRecord> = read_jsonl(tweets_path)?;
    let annotations: Vec<CodeAnnotation> = read_jsonl(annotations_path)?;
    validate_corpus(&tweets, &annotations)?;
    Ok((tweets, annotations))
}

pub fn save_corpus(
    tweets_path: &Path,
    annotations_path: &Path,
    tweets: &[TweetRecord],
    annotations: &[CodeAnnotation],
) -> Result<()> {
    write_jsonl(tweets_path, tweets)?;
    write_jsonl(annotations_path, annotations)
}

fn apply_rule(flags: usize, total: usize, rule: LabelRule) -> bool {
    match rule {
        LabelRule::AnyPositive => flags > 0,
        LabelRule::Majority => 2 * flags > total,
    }
}

/// Derives one binary label per code for every tweet that has annotations.
///
/// Tiebreak annotations count like any other vote. Output is sorted by tweet id.
pub fn derive_labels(annotations: &[CodeAnnotation], rule: LabelRule) -> Vec<CodeLabels> {
    let mut tally: BTreeMap<&str, (usize, [usize; 3])> = BTreeMap::new();
    for a in annotations {
        let entry = tally.entry(a.tweet_id.as_str()).or_default();
        entry.0 += 1;
        for code in Code::ALL {
            if a.flag(code) {
                entry.1[code.index()] += 1;
            }
        }
    }
    tally
        .into_iter()
        .map(|(id, (total, flags))| CodeLabels {
            tweet_id: id.to_string(),
            labels: flags.map(|f| apply_rule(f, total, rule)),
            rule,
        })
        .collect()
}

/// Like [`derive_labels`], but every listed tweet must carry at least one annotation.
/// Output follows the order of `tweet_ids`.
pub fn derive_labels_for(
    tweet_ids: &[&str],
    annotations: &[CodeAnnotation],
    rule: LabelRule,
) -> Result<Vec<CodeLabels>> {
    let derived: HashMap<String, CodeLabels> = derive_labels(annotations, rule)
        .into_iter()
        .map(|l| (l.tweet_id.clone(), l))
        .collect();
    let missing: Vec<String> = tweet_ids
        .iter()
        .filter(|id| !derived.contains_key(**id))
        .map(|id| id.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "tweets without annotations: {}",
            missing.join(", ")
        )));
    }
    Ok(tweet_ids.iter().map(|id| derived[*id].clone()).collect())
}

/// Dataset summary in the shape of the corpus statistics table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_tweets: usize,
    pub tweets_per_source: BTreeMap<Source, usize>,
    pub tweets_per_user: BTreeMap<String, usize>,
    /// Positive counts per code and source under the any-positive rule.
    pub any_positive: BTreeMap<Code, BTreeMap<Source, usize>>,
    /// Positive counts per code and source under the majority rule.
    pub majority: BTreeMap<Code, BTreeMap<Source, usize>>,
    /// Ground-truth concept instances per source, when boxes were supplied.
    pub concept_instances: BTreeMap<Concept, BTreeMap<Source, usize>>,
}

impl CorpusStats {
    pub fn positives(&self, code: Code, rule: LabelRule) -> usize {
        let table = match rule {
            LabelRule::AnyPositive => &self.any_positive,
            LabelRule::Majority => &self.majority,
        };
        table.get(&code).map(|m| m.values().sum()).unwrap_or(0)
    }

    /// Adds per-source instance counts from ground-truth concept boxes.
    pub fn with_concepts(
        mut self,
        tweets: &[TweetRecord],
        boxes: &[crate::imfeat::ConceptBox],
    ) -> Self {
        let image_source: HashMap<&str, Source> = tweets
            .iter()
            .filter_map(|t| t.image_id.as_deref().map(|i| (i, t.source)))
            .collect();
        for concept in Concept::ALL {
            let row = self.concept_instances.entry(concept).or_default();
            for s in Source::ALL {
                row.entry(s).or_insert(0);
            }
        }
        for b in boxes {
            if let Some(&src) = image_source.get(b.image_id.as_str()) {
                *self
                    .concept_instances
                    .entry(b.concept)
                    .or_default()
                    .entry(src)
                    .or_insert(0) += 1;
            }
        }
        self
    }

    /// Rows: concepts then codes; columns Twitter, Tumblr, Total.
    /// Code cells read `any (majority)`.
    pub fn table_rows(&self) -> Vec<Vec<String>> {
        let mut rows = vec![vec![
            "concept/code".to_string(),
            "twitter".to_string(),
            "tumblr".to_string(),
            "total".to_string(),
        ]];
        for (concept, per) in &self.concept_instances {
            let mut row = vec![concept.name().to_string()];
            let mut total = 0;
            for s in Source::ALL {
                let n = per.get(&s).copied().unwrap_or(0);
                total += n;
                row.push(n.to_string());
            }
            row.push(total.to_string());
            rows.push(row);
        }
        for code in Code::ALL {
            let mut row = vec![code.name().to_string()];
            let (mut ta, mut tm) = (0, 0);
            for s in Source::ALL {
                let a = self.any_positive[&code].get(&s).copied().unwrap_or(0);
                let m = self.majority[&code].get(&s).copied().unwrap_or(0);
                ta += a;
                tm += m;
                row.push(format!("{a} ({m})"));
            }
            row.push(format!("{ta} ({tm})"));
            rows.push(row);
        }
        rows
    }
}

/// Counts tweets per source and user and positives per code under both rules.
/// Tweets missing from a label collection count as negative.
pub fn corpus_stats(
    tweets: &[TweetRecord],
    any_positive: &[CodeLabels],
    majority: &[CodeLabels],
) -> CorpusStats {
    let mut stats = CorpusStats {
        n_tweets: tweets.len(),
        ..Default::default()
    };
    for s in Source::ALL {
        stats.tweets_per_source.insert(s, 0);
    }
    for code in Code::ALL {
        let zero: BTreeMap<Source, usize> = Source::ALL.iter().map(|&s| (s, 0)).collect();
        stats.any_positive.insert(code, zero.clone());
        stats.majority.insert(code, zero);
    }
    let any: HashMap<&str, &CodeLabels> = any_positive
        .iter()
        .map(|l| (l.tweet_id.as_str(), l))
        .collect();
    let maj: HashMap<&str, &CodeLabels> =
        majority.iter().map(|l| (l.tweet_id.as_str(), l)).collect();
    for t in tweets {
        *stats.tweets_per_source.entry(t.source).or_insert(0) += 1;
        *stats.tweets_per_user.entry(t.user_id.clone()).or_insert(0) += 1;
        for code in Code::ALL {
            if any.get(t.tweet_id.as_str()).is_some_and(|l| l.get(code)) {
                *stats
                    .any_positive
                    .get_mut(&code)
                    .unwrap()
                    .get_mut(&t.source)
                    .unwrap() += 1;
            }
            if maj.get(t.tweet_id.as_str()).is_some_and(|l| l.get(code)) {
                *stats
                    .majority
                    .get_mut(&code)
                    .unwrap()
                    .get_mut(&t.source)
                    .unwrap() += 1;
            }
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(tweet: &str, who: &str, flags: [bool; 3]) -> CodeAnnotation {
        CodeAnnotation {
            tweet_id: tweet.into(),
            annotator_id: who.into(),
            annotator_role: AnnotatorRole::Student,
            aggression: flags[0],
            loss: flags[1],
            substance_use: flags[2],
        }
    }

    fn tweet(id: &str) -> TweetRecord {
        TweetRecord {
            tweet_id: id.into(),
            user_id: "u".into(),
            text: "free my bro".into(),
            image_id: None,
            pos_tags: None,
            source: Source::Twitter,
        }
    }

    fn votes(flags: [bool; 4]) -> Vec<CodeAnnotation> {
        flags
            .iter()
            .enumerate()
            .map(|(i, &f)| ann("t", &format!("a{i}"), [f, false, false]))
            .collect()
    }

    #[test]
    fn any_positive_and_majority_rules() {
        let one = votes([true, false, false, false]);
        assert!(derive_labels(&one, LabelRule::AnyPositive)[0].get(Code::Aggression));
        assert!(!derive_labels(&one, LabelRule::Majority)[0].get(Code::Aggression));
        let three = votes([true, true, false, true]);
        assert!(derive_labels(&three, LabelRule::Majority)[0].get(Code::Aggression));
        // 2 of 4 is a tie, not a strict majority
        let two = votes([true, true, false, false]);
        assert!(!derive_labels(&two, LabelRule::Majority)[0].get(Code::Aggression));
    }

    #[test]
    fn tiebreak_counts_as_regular_vote() {
        let mut anns = votes([true, true, false, false]);
        let mut tb = ann("t", "tb", [true, false, false]);
        tb.annotator_role = AnnotatorRole::Tiebreak;
        anns.push(tb);
        assert!(derive_labels(&anns, LabelRule::Majority)[0].get(Code::Aggression));
    }

    #[test]
    fn unannotated_tweet_is_an_error() {
        let anns = votes([true, false, false, false]);
        let err = derive_labels_for(&["t", "other"], &anns, LabelRule::AnyPositive).unwrap_err();
        assert!(err.to_string().contains("other"));
    }

    #[test]
    fn dangling_annotation_is_reported_by_id() {
        let err = validate_corpus(&[tweet("t1")], &[ann("ghost", "a", [false; 3])]).unwrap_err();
        match err {
            Error::DanglingTweetIds(ids) => assert_eq!(ids, vec!["ghost".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        assert!(matches!(
            validate_corpus(&[tweet("t1"), tweet("t1")], &[]),
            Err(Error::Duplicate { .. })
        ));
        let a = ann("t1", "a", [false; 3]);
        assert!(matches!(
            validate_corpus(&[tweet("t1")], &[a.clone(), a]),
            Err(Error::Duplicate { .. })
        ));
    }

    #[test]
    fn misaligned_pos_tags_are_rejected() {
        let mut t = tweet("t1");
        t.pos_tags = Some(vec![("free".into(), "V".into())]);
        assert!(validate_tweet(&t).is_err());
        t.pos_tags = Some(vec![
            ("free".into(), "V".into()),
            ("my".into(), "D".into()),
            ("bro".into(), "N".into()),
        ]);
        assert!(validate_tweet(&t).is_ok());
    }

    #[test]
    fn empty_corpus_has_zero_counts() {
        let stats = corpus_stats(&[], &[], &[]);
        assert_eq!(stats.n_tweets, 0);
        for code in Code::ALL {
            assert_eq!(stats.positives(code, LabelRule::AnyPositive), 0);
            assert_eq!(stats.positives(code, LabelRule::Majority), 0);
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let tp = dir.path().join("tweets.jsonl");
        let ap = dir.path().join("annotations.jsonl");
        std::fs::write(
            &tp,
            "{\"tweet_id\":\"1\",\"user_id\":\"u\",\"text\":\"hi\",\"source\":\"twitter\"}\n{oops\n",
        )
        .unwrap();
        std::fs::write(&ap, "").unwrap();
        let err = load_corpus(&tp, &ap).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn one_tweet_and_empty_annotations_load() {
        let dir = tempfile::tempdir().unwrap();
        let tp = dir.path().join("tweets.jsonl");
        let ap = dir.path().join("annotations.jsonl");
        save_corpus(&tp, &ap, &[tweet("1")], &[]).unwrap();
        let (t, a) = load_corpus(&tp, &ap).unwrap();
        assert_eq!((t.len(), a.len()), (1, 0));
    }

    #[test]
    fn emoji_text_round_trips_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let tp = dir.path().join("tweets.jsonl");
        let ap = dir.path().join("annotations.jsonl");
        let mut t = tweet("1");
        t.text = "rip 🕊️ 👨‍👩‍👧".into();
        save_corpus(&tp, &ap, std::slice::from_ref(&t), &[]).unwrap();
        let (back, _) = load_corpus(&tp, &ap).unwrap();
        assert_eq!(back[0].text, t.text);
    }
}
