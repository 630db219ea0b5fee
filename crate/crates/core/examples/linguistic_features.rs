//! Tokenize tweets, resolve vernacular through the phrasebook and build the
//! sparse n-gram + DAL feature vector.

use codefusion::corpus::{Source, TweetRecord};
use codefusion::lingfeat::{
    build_vocab, dal_vector, tokenize, toy_dal, toy_phrasebook, LinguisticFeaturizer,
};

fn tweet(id: &str, text: &str) -> TweetRecord {
    TweetRecord {
        tweet_id: id.into(),
        user_id: "u1".into(),
        text: text.into(),
        image_id: None,
        pos_tags: None,
        source: Source::Twitter,
    }
}

fn main() {
    let tweets = [
        tweet("t1", "rip bro 😢 miss u @homie"),
        tweet("t2", "smh they locked him up https://t.co/x"),
        tweet("t3", "good day wit the fam"),
    ];
    let train: Vec<&TweetRecord> = tweets.iter().collect();
    let featurizer = LinguisticFeaturizer {
        vocab: build_vocab(&train, 1),
        dal: toy_dal(),
        phrasebook: toy_phrasebook(),
        binary_ngrams: false,
    };
    println!(
        "vocabulary: {} n-grams, feature dim {}",
        featurizer.vocab.len(),
        featurizer.dim()
    );
    for t in &tweets {
        let tokens = tokenize(&t.text);
        let surfaces: Vec<&str> = tokens.iter().map(|k| k.surface.as_str()).collect();
        let dal = dal_vector(&tokens, &featurizer.dal, &featurizer.phrasebook);
        let v = featurizer.featurize(t);
        println!("{:?}", surfaces);
        println!(
            "  {} non-zero columns, DAL [p, a, i] min/max = {:.2?}",
            v.indices.len(),
            dal
        );
    }
}
