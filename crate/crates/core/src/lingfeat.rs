//! Sparse linguistic features: token and POS-tagged n-gram counts plus
//! affect-lexicon (DAL) min/max scores with phrasebook translation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::corpus::TweetRecord;
use crate::error::{Error, Result};
use crate::features::SparseVec;

pub const URL_TOKEN: &str = "<url>";
pub const MENTION_TOKEN: &str = "@mention";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Emoji,
    Mention,
    Url,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
}

impl Token {
    fn new(surface: impl Into<String>, kind: TokenKind) -> Self {
        Self {
            surface: surface.into(),
            kind,
        }
    }
}

fn is_emoji_char(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x2300..=0x23FF
        | 0x2B00..=0x2BFF
        | 0x3030 | 0x303D | 0x3297 | 0x3299
        | 0xFE0F | 0x20E3 | 0x200D)
}

fn is_emoji(grapheme: &str) -> bool {
    grapheme.chars().any(is_emoji_char)
}

fn is_word_grapheme(g: &str) -> bool {
    g.chars()
        .next()
        .is_some_and(|c| c.is_alphanumeric() || c == '_')
        && !is_emoji(g)
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_lowercase();
    lower == URL_TOKEN
        || lower.starts_with("http://")
        || lower.starts_with("https://")
        || lower.starts_with("www.")
}

/// Splits text into lowercased words, whole emoji (ZWJ sequences stay one
/// token), collapsed mentions and URLs, and single punctuation marks.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if is_url(chunk) {
            out.push(Token::new(URL_TOKEN, TokenKind::Url));
            continue;
        }
        let gs: Vec<&str> = chunk.graphemes(true).collect();
        let mut i = 0;
        while i < gs.len() {
            let g = gs[i];
            if is_emoji(g) {
                out.push(Token::new(g, TokenKind::Emoji));
                i += 1;
            } else if g == "@" && gs.get(i + 1).is_some_and(|n| is_word_grapheme(n)) {
                i += 1;
                while i < gs.len() && is_word_grapheme(gs[i]) {
                    i += 1;
                }
                out.push(Token::new(MENTION_TOKEN, TokenKind::Mention));
            } else if is_word_grapheme(g)
                || (g == "#" && gs.get(i + 1).is_some_and(|n| is_word_grapheme(n)))
            {
                let start = i;
                i += 1;
                while i < gs.len() {
                    if is_word_grapheme(gs[i]) {
                        i += 1;
                    } else if (gs[i] == "'" || gs[i] == "’")
                        && gs.get(i + 1).is_some_and(|n| is_word_grapheme(n))
                    {
                        i += 2;
                    } else {
                        break;
                    }
                }
                out.push(Token::new(
                    gs[start..i].concat().to_lowercase(),
                    TokenKind::Word,
                ));
            } else {
                out.push(Token::new(g, TokenKind::Punct));
                i += 1;
            }
        }
    }
    out
}

/// Joins token surfaces with single spaces.
pub fn detokenize(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| t.surface.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Token,
    Pos,
}

/// An n-gram key. POS-channel grams are `token/TAG` items.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NgramKey {
    pub channel: Channel,
    pub gram: Vec<String>,
}

fn ngrams_of(items: &[String], channel: Channel, mut visit: impl FnMut(NgramKey)) {
    for item in items {
        visit(NgramKey {
            channel,
            gram: vec![item.clone()],
        });
    }
    for pair in items.windows(2) {
        visit(NgramKey {
            channel,
            gram: pair.to_vec(),
        });
    }
}

fn pos_items(tags: &[(String, String)]) -> Vec<String> {
    tags.iter()
        .map(|(tok, tag)| format!("{tok}/{tag}"))
        .collect()
}

/// Visits every unigram and bigram of a tweet on both channels.
fn visit_tweet_ngrams(
    tokens: &[Token],
    pos_tags: Option<&[(String, String)]>,
    mut visit: impl FnMut(NgramKey),
) {
    let surfaces: Vec<String> = tokens.iter().map(|t| t.surface.clone()).collect();
    ngrams_of(&surfaces, Channel::Token, &mut visit);
    if let Some(tags) = pos_tags {
        ngrams_of(&pos_items(tags), Channel::Pos, &mut visit);
    }
}

/// Column layout for n-gram features; columns follow lexicographic key order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NgramVocab {
    columns: BTreeMap<NgramKey, usize>,
}

impl NgramVocab {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, key: &NgramKey) -> Option<usize> {
        self.columns.get(key).copied()
    }

    pub fn contains(&self, key: &NgramKey) -> bool {
        self.columns.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &NgramKey> {
        self.columns.keys()
    }

    /// Human-readable name of a column, e.g. `tok:free my`.
    pub fn column_name(&self, column: usize) -> Option<String> {
        self.columns
            .iter()
            .find(|(_, &c)| c == column)
            .map(|(k, _)| {
                let ch = match k.channel {
                    Channel::Token => "tok",
                    Channel::Pos => "pos",
                };
                format!("{ch}:{}", k.gram.join(" "))
            })
    }

    pub fn fingerprint(&self, h: &mut crate::util::StateHasher) {
        for (k, &c) in &self.columns {
            h.text(&format!("{:?}", k.channel))
                .text(&k.gram.join("\u{1f}"));
            h.indices(&[c]);
        }
    }
}

/// Builds the vocabulary over training tweets. An n-gram is kept when it occurs
/// in at least `min_df` tweets.
pub fn build_vocab(training: &[&TweetRecord], min_df: usize) -> NgramVocab {
    let mut df: BTreeMap<NgramKey, usize> = BTreeMap::new();
    for tweet in training {
        let tokens = tokenize(&tweet.text);
        let mut seen = BTreeSet::new();
        visit_tweet_ngrams(&tokens, tweet.pos_tags.as_deref(), |k| {
            seen.insert(k);
        });
        for k in seen {
            *df.entry(k).or_insert(0) += 1;
        }
    }
    let columns = df
        .into_iter()
        .filter(|(_, n)| *n >= min_df.max(1))
        .map(|(k, _)| k)
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    NgramVocab { columns }
}

/// Counts of known n-grams. Unknown n-grams are ignored; POS columns stay zero
/// without tags. With `binary`, counts are clipped to presence.
pub fn ngram_vector(
    tokens: &[Token],
    pos_tags: Option<&[(String, String)]>,
    vocab: &NgramVocab,
    binary: bool,
) -> SparseVec {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    visit_tweet_ngrams(tokens, pos_tags, |k| {
        if let Some(c) = vocab.column(&k) {
            let e = counts.entry(c).or_insert(0.0);
            *e = if binary { 1.0 } else { *e + 1.0 };
        }
    });
    SparseVec::from_map(vocab.len(), &counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DalEntry {
    pub pleasantness: f64,
    pub activation: f64,
    pub imagery: f64,
}

/// Dictionary of Affective Language: word → (pleasantness, activation, imagery).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dal {
    entries: HashMap<String, DalEntry>,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

impl Dal {
    pub fn from_entries(entries: impl IntoIterator<Item = (String, DalEntry)>) -> Result<Self> {
        let mut map = HashMap::new();
        for (w, e) in entries {
            if !(e.pleasantness.is_finite() && e.activation.is_finite() && e.imagery.is_finite()) {
                return Err(Error::NonFinite(format!("DAL entry {w}")));
            }
            if map.insert(w.to_lowercase(), e).is_some() {
                return Err(Error::Duplicate {
                    what: "DAL",
                    key: w,
                });
            }
        }
        Ok(Self { entries: map })
    }

    /// Reads `word,pleasantness,activation,imagery`; a leading header row is skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, rec) in csv_reader(path)?.records().enumerate() {
            let rec = rec.map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
            if i == 0 && rec.get(1).is_some_and(|s| s.parse::<f64>().is_err()) {
                continue;
            }
            let malformed = |msg: &str| Error::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: msg.to_string(),
            };
            if rec.len() != 4 {
                return Err(malformed("expected 4 fields"));
            }
            let num = |j: usize| {
                rec[j]
                    .parse::<f64>()
                    .map_err(|_| malformed("score is not a number"))
            };
            rows.push((
                rec[0].to_string(),
                DalEntry {
                    pleasantness: num(1)?,
                    activation: num(2)?,
                    imagery: num(3)?,
                },
            ));
        }
        Self::from_entries(rows)
    }

    pub fn get(&self, word: &str) -> Option<&DalEntry> {
        self.entries.get(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Vernacular token or emoji → Standard American English words.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Phrasebook {
    map: HashMap<String, Vec<String>>,
}

impl Phrasebook {
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let map = pairs
            .into_iter()
            .map(|(k, v)| {
                let words = v
                    .as_ref()
                    .split_whitespace()
                    .map(|w| w.to_lowercase())
                    .collect();
                (k.as_ref().to_string(), words)
            })
            .collect();
        Self { map }
    }

    /// Reads `token,translation`; a header row `token,translation` is skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, rec) in csv_reader(path)?.records().enumerate() {
            let rec = rec.map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
            if i == 0 && &rec[0] == "token" {
                continue;
            }
            if rec.len() != 2 {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: "expected 2 fields".into(),
                });
            }
            pairs.push((rec[0].to_string(), rec[1].to_string()));
        }
        Ok(Self::from_pairs(pairs))
    }

    pub fn translate(&self, token: &str) -> Option<&[String]> {
        self.map.get(token).map(Vec::as_slice)
    }

    /// Translation targets that do not resolve in `dal`, sorted.
    pub fn unresolved_targets(&self, dal: &Dal) -> Vec<String> {
        let set: BTreeSet<&String> = self
            .map
            .values()
            .flatten()
            .filter(|w| dal.get(w).is_none())
            .collect();
        set.into_iter().cloned().collect()
    }

    /// Logs a warning for every translation target missing from the DAL.
    pub fn warn_unresolved(&self, dal: &Dal) {
        let missing = self.unresolved_targets(dal);
        if !missing.is_empty() {
            log::warn!(
                "{} phrasebook targets are not in the DAL: {}",
                missing.len(),
                missing.join(", ")
            );
        }
    }
}

pub const DAL_DIM: usize = 6;

/// `(min, max)` of pleasantness, activation and imagery over every resolved word,
/// laid out as `[p_min, p_max, a_min, a_max, i_min, i_max]`. All zeros when
/// nothing resolves.
pub fn dal_vector(tokens: &[Token], dal: &Dal, phrasebook: &Phrasebook) -> [f64; DAL_DIM] {
    let mut resolved: Vec<&DalEntry> = Vec::new();
    for t in tokens {
        if let Some(e) = dal.get(&t.surface) {
            resolved.push(e);
        } else if let Some(words) = phrasebook.translate(&t.surface) {
            resolved.extend(words.iter().filter_map(|w| dal.get(w)));
        }
    }
    if resolved.is_empty() {
        return [0.0; DAL_DIM];
    }
    let mut out = [
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    ];
    for e in resolved {
        for (d, v) in [e.pleasantness, e.activation, e.imagery]
            .into_iter()
            .enumerate()
        {
            out[2 * d] = out[2 * d].min(v);
            out[2 * d + 1] = out[2 * d + 1].max(v);
        }
    }
    out
}

/// N-gram counts followed by the six DAL scores.
#[derive(Debug, Clone)]
pub struct LinguisticFeaturizer {
    pub vocab: NgramVocab,
    pub dal: Dal,
    pub phrasebook: Phrasebook,
    pub binary_ngrams: bool,
}

impl LinguisticFeaturizer {
    pub fn dim(&self) -> usize {
        self.vocab.len() + DAL_DIM
    }

    pub fn featurize(&self, tweet: &TweetRecord) -> SparseVec {
        let tokens = tokenize(&tweet.text);
        let ngrams = ngram_vector(
            &tokens,
            tweet.pos_tags.as_deref(),
            &self.vocab,
            self.binary_ngrams,
        );
        let dal = dal_vector(&tokens, &self.dal, &self.phrasebook);
        let base = self.vocab.len();
        let mut out = ngrams;
        out.dim = base + DAL_DIM;
        for (k, v) in dal.into_iter().enumerate() {
            if v != 0.0 {
                out.indices.push(base + k);
                out.values.push(v);
            }
        }
        out
    }
}

/// Toy 50-word DAL shipped with the crate (scores on the usual 1–3 scale).
pub fn toy_dal() -> Dal {
    let text = include_str!("../data/toy_dal.csv");
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        rows.push((
            f[0].to_string(),
            DalEntry {
                pleasantness: f[1].parse().expect("toy DAL"),
                activation: f[2].parse().expect("toy DAL"),
                imagery: f[3].parse().expect("toy DAL"),
            },
        ));
    }
    Dal::from_entries(rows).expect("toy DAL is well formed")
}

/// Toy vernacular/emoji phrasebook shipped with the crate.
pub fn toy_phrasebook() -> Phrasebook {
    let text = include_str!("../data/toy_phrasebook.csv");
    Phrasebook::from_pairs(text.lines().skip(1).filter_map(|l| l.split_once(',')))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    #[test]
    fn empty_text_has_no_tokens() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n").is_empty());
    }

    #[test]
    fn words_and_emoji() {
        let toks = tokenize("Free my bro 🙏");
        assert_eq!(words(&toks), ["free", "my", "bro", "🙏"]);
        assert_eq!(toks[3].kind, TokenKind::Emoji);
    }

    #[test]
    fn zwj_sequences_and_skin_tones_stay_whole() {
        let toks = tokenize("fam👨‍👩‍👧 🙏🏿!");
        assert_eq!(words(&toks), ["fam", "👨‍👩‍👧", "🙏🏿", "!"]);
        assert_eq!(toks[1].kind, TokenKind::Emoji);
        assert_eq!(toks[3].kind, TokenKind::Punct);
    }

    #[test]
    fn mentions_and_urls_collapse() {
        let toks = tokenize("@Big_Bro check https://t.co/xyz now, don't #RIP");
        assert_eq!(
            words(&toks),
            ["@mention", "check", "<url>", "now", ",", "don't", "#rip"]
        );
        assert_eq!(toks[0].kind, TokenKind::Mention);
        assert_eq!(toks[2].kind, TokenKind::Url);
    }

    fn tw(text: &str) -> TweetRecord {
        TweetRecord {
            tweet_id: text.into(),
            user_id: "u".into(),
            text: text.into(),
            image_id: None,
            pos_tags: None,
            source: crate::corpus::Source::Twitter,
        }
    }

    #[test]
    fn single_tweet_vocab_has_three_columns() {
        let t = tw("a b");
        let vocab = build_vocab(&[&t], 1);
        assert_eq!(vocab.len(), 3);
    }

    #[test]
    fn ngram_counts_hand_case() {
        let t = tw("a a b");
        let vocab = build_vocab(&[&t], 1);
        // columns sorted: [a], [a a], [a b], [b]
        assert_eq!(vocab.len(), 4);
        let v = ngram_vector(&tokenize("a a b"), None, &vocab, false).to_dense();
        assert_eq!(v, vec![2.0, 1.0, 1.0, 1.0]);
        let b = ngram_vector(&tokenize("a a b"), None, &vocab, true).to_dense();
        assert_eq!(b, vec![1.0, 1.0, 1.0, 1.0]);
        assert!(ngram_vector(&[], None, &vocab, false).indices.is_empty());
    }

    #[test]
    fn min_df_prunes_rare_ngrams() {
        let (a, b) = (tw("x y"), tw("x z"));
        let vocab = build_vocab(&[&a, &b], 2);
        assert_eq!(vocab.len(), 1);
    }

    #[test]
    fn pos_columns_zero_without_tags() {
        let mut t = tw("free bro");
        t.pos_tags = Some(vec![
            ("free".into(), "V".into()),
            ("bro".into(), "N".into()),
        ]);
        let vocab = build_vocab(&[&t], 1);
        assert_eq!(vocab.len(), 6);
        let untagged = ngram_vector(&tokenize("free bro"), None, &vocab, false);
        assert_eq!(untagged.values.iter().sum::<f64>(), 3.0);
        let tagged = ngram_vector(&tokenize("free bro"), t.pos_tags.as_deref(), &vocab, false);
        assert_eq!(tagged.values.iter().sum::<f64>(), 6.0);
    }

    fn toy5() -> Dal {
        let e = |p, a, i| DalEntry {
            pleasantness: p,
            activation: a,
            imagery: i,
        };
        Dal::from_entries([
            ("love".to_string(), e(2.0, 1.5, 1.2)),
            ("sad".to_string(), e(1.2, 1.8, 1.4)),
            ("pray".to_string(), e(1.9, 1.3, 2.6)),
            ("brother".to_string(), e(2.3, 1.6, 2.9)),
            ("money".to_string(), e(2.5, 2.1, 2.8)),
        ])
        .unwrap()
    }

    #[test]
    fn dal_defaults_to_zero_when_nothing_resolves() {
        let v = dal_vector(&tokenize("zzz qqq"), &toy5(), &Phrasebook::default());
        assert_eq!(v, [0.0; 6]);
    }

    #[test]
    fn dal_singleton_min_equals_max() {
        let v = dal_vector(&tokenize("love"), &toy5(), &Phrasebook::default());
        assert_eq!(v, [2.0, 2.0, 1.5, 1.5, 1.2, 1.2]);
    }

    #[test]
    fn dal_min_max_through_phrasebook() {
        let pb = Phrasebook::from_pairs([("🙏", "pray"), ("bro", "brother"), ("smh", "sad love")]);
        // love (p 2.0) + sad (p 1.2) via "smh"
        let v = dal_vector(&tokenize("smh"), &toy5(), &pb);
        assert_eq!(v, [1.2, 2.0, 1.5, 1.8, 1.2, 1.4]);
        let v = dal_vector(&tokenize("free my bro 🙏"), &toy5(), &pb);
        assert_eq!(v, [1.9, 2.3, 1.3, 1.6, 2.6, 2.9]);
    }

    #[test]
    fn unresolved_phrasebook_targets_are_listed() {
        let pb = Phrasebook::from_pairs([("opps", "enemies"), ("bro", "brother")]);
        assert_eq!(pb.unresolved_targets(&toy5()), vec!["enemies".to_string()]);
    }

    #[test]
    fn toy_lexicons_load() {
        let dal = toy_dal();
        assert_eq!(dal.len(), 50);
        assert!(toy_phrasebook().unresolved_targets(&dal).is_empty());
    }

    #[test]
    fn dal_csv_with_header_loads() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dal.csv");
        std::fs::write(
            &p,
            "word,pleasantness,activation,imagery\nlove,2.0,1.5,1.2\n",
        )
        .unwrap();
        let dal = Dal::load(&p).unwrap();
        assert_eq!(dal.get("love").unwrap().activation, 1.5);
        std::fs::write(&p, "love,2.0,x,1.2\n").unwrap();
        assert!(matches!(
            Dal::load(&p),
            Err(Error::Malformed { line: 1, .. })
        ));
    }
}
