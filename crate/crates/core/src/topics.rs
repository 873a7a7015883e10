//! Story-level topic modeling with latent Dirichlet allocation, fitted by
//! collapsed Gibbs sampling.
//!
//! A document is one unique story: its lede (when present) concatenated with
//! every distinct headline tested for it. Preprocessing is deliberately
//! dependency-free: lowercase, punctuation stripping, stopword removal, and
//! a four-rule suffix stemmer (`ing`, `ed`, `ly`, `s`, minimum stem length
//! 3) standing in for full lemmatization.
//!
//! The sampler keeps the usual collapsed counts (document-topic,
//! topic-word, topic totals). Token-count conservation across sweeps is a
//! structural invariant and is checked after every sweep in debug builds.
//! Note the Dirichlet hyperparameters `alpha`/`beta` here are unrelated to
//! the Beta-posterior parameters in [`crate::bayes_ab`].

use std::collections::HashMap;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng::{self, PortableRng};
use crate::textfeat::{is_stopword, PackageRecord, TopicColumns};
use crate::Result;

pub const DEFAULT_BETA: f64 = 0.01;
pub const DEFAULT_ITERATIONS: usize = 500;
pub const DEFAULT_MIN_DOC_FREQ: usize = 2;
/// Sweeps of the fold-in pass used when inferring topic proportions for a
/// document against a fitted model.
pub const INFERENCE_SWEEPS: usize = 20;
/// Fixed stream for fold-in inference; makes `doc_topic_distribution` a
/// deterministic function of (model, document).
const INFERENCE_SEED: u64 = 0x1da_5eed;

/// Common default for the document-topic prior.
pub fn default_alpha(k_topics: usize) -> f64 {
    50.0 / k_topics as f64
}

const STEM_SUFFIXES: [&str; 4] = ["ing", "ed", "ly", "s"];
const MIN_STEM_LEN: usize = 3;

/// Strips the first matching suffix when at least `MIN_STEM_LEN` characters
/// remain. Applied once per token.
pub fn stem(token: &str) -> &str {
    for suffix in STEM_SUFFIXES {
        if let Some(stripped) = token.strip_suffix(suffix) {
            if stripped.chars().count() >= MIN_STEM_LEN {
                return stripped;
            }
        }
    }
    token
}

/// Lowercase, strip punctuation, drop stopwords, stem.
pub fn preprocess(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|raw| raw.chars().filter(|c| c.is_alphanumeric()).collect::<String>())
        .filter(|tok| !tok.is_empty() && !is_stopword(tok))
        .map(|tok| stem(&tok).to_string())
        .filter(|tok| !tok.is_empty())
        .collect()
}

/// Term <-> index map; index order is first appearance in the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_terms(terms: Vec<String>) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { terms, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Rebuilds the lookup map (needed after deserialization).
    pub fn rebuild_index(&mut self) {
        self.index = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }
}

/// One story as a bag of vocabulary indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub story_id: String,
    pub terms: Vec<usize>,
}

/// A story that produced no usable tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedStory {
    pub story_id: String,
    pub reason: String,
}

/// Output of [`build_documents`]: the corpus, its vocabulary, and the
/// stories that were dropped (reported, not fatal).
#[derive(Debug, Clone)]
pub struct DocumentSet {
    pub documents: Vec<Document>,
    pub vocab: Vocabulary,
    pub dropped: Vec<DroppedStory>,
}

/// Story id and combined text (unique lede + distinct headlines), in first
/// appearance order. Shared by document building and topic-column
/// inference so both see identical story texts.
fn story_texts(records: &[PackageRecord]) -> Vec<(String, String)> {
    let mut order: Vec<String> = Vec::new();
    let mut parts: HashMap<String, (Option<String>, Vec<String>)> = HashMap::new();
    for record in records {
        let entry = parts.entry(record.test_id.clone()).or_insert_with(|| {
            order.push(record.test_id.clone());
            (None, Vec::new())
        });
        if entry.0.is_none() {
            if let Some(lede) = &record.lede {
                if !lede.trim().is_empty() {
                    entry.0 = Some(lede.trim().to_string());
                }
            }
        }
        let headline = record.headline.trim().to_string();
        if !entry.1.contains(&headline) {
            entry.1.push(headline);
        }
    }
    order
        .into_iter()
        .map(|id| {
            let (lede, headlines) = parts.remove(&id).unwrap();
            let mut text = lede.unwrap_or_default();
            for h in headlines {
                if !text.is_empty() {
                    text.push(' ');
                }
                text.push_str(&h);
            }
            (id, text)
        })
        .collect()
}

/// Groups records into story documents, builds the pruned vocabulary
/// (terms must appear in at least `min_doc_freq` stories), and indexes the
/// corpus. Stories left empty by preprocessing or pruning are dropped and
/// reported.
pub fn build_documents(records: &[PackageRecord], min_doc_freq: usize) -> Result<DocumentSet> {
    if records.is_empty() {
        return Err(Error::invalid("no records to build documents from"));
    }
    let stories: Vec<(String, Vec<String>)> = story_texts(records)
        .into_iter()
        .map(|(id, text)| (id, preprocess(&text)))
        .collect();

    // document frequency over distinct terms per story
    let mut doc_freq: HashMap<&str, usize> = HashMap::new();
    for (_, tokens) in &stories {
        let mut seen: Vec<&str> = Vec::new();
        for tok in tokens {
            if !seen.contains(&tok.as_str()) {
                seen.push(tok);
                *doc_freq.entry(tok).or_insert(0) += 1;
            }
        }
    }

    let mut vocab_terms: Vec<String> = Vec::new();
    let mut in_vocab: HashMap<String, usize> = HashMap::new();
    for (_, tokens) in &stories {
        for tok in tokens {
            if doc_freq[tok.as_str()] >= min_doc_freq && !in_vocab.contains_key(tok.as_str()) {
                in_vocab.insert(tok.clone(), vocab_terms.len());
                vocab_terms.push(tok.clone());
            }
        }
    }

    let mut documents = Vec::new();
    let mut dropped = Vec::new();
    for (story_id, tokens) in &stories {
        if tokens.is_empty() {
            log::warn!("story {story_id}: empty after preprocessing, dropped");
            dropped.push(DroppedStory {
                story_id: story_id.clone(),
                reason: "empty after preprocessing".to_string(),
            });
            continue;
        }
        let terms: Vec<usize> = tokens
            .iter()
            .filter_map(|t| in_vocab.get(t.as_str()).copied())
            .collect();
        if terms.is_empty() {
            log::warn!("story {story_id}: no terms above min document frequency, dropped");
            dropped.push(DroppedStory {
                story_id: story_id.clone(),
                reason: "no terms above min document frequency".to_string(),
            });
            continue;
        }
        documents.push(Document { story_id: story_id.clone(), terms });
    }

    Ok(DocumentSet {
        documents,
        vocab: Vocabulary::from_terms(vocab_terms),
        dropped,
    })
}

/// Fitted topic model: frozen collapsed counts plus priors.
#[derive(Debug, Clone)]
pub struct LdaModel {
    pub k_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocab: Vocabulary,
    /// K x V term assignment counts.
    pub topic_word_counts: Array2<u64>,
    pub topic_totals: Vec<u64>,
}

impl LdaModel {
    pub fn total_tokens(&self) -> u64 {
        self.topic_totals.iter().sum()
    }

    /// Highest-count terms of one topic.
    pub fn top_terms(&self, topic: usize, n: usize) -> Vec<(String, u64)> {
        let mut ranked: Vec<(usize, u64)> = (0..self.vocab.len())
            .map(|v| (v, self.topic_word_counts[(topic, v)]))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
            .into_iter()
            .take(n)
            .map(|(v, c)| (self.vocab.term(v).to_string(), c))
            .collect()
    }

    pub fn check_invariants(&self) -> Result<()> {
        for k in 0..self.k_topics {
            let total: u64 = (0..self.vocab.len())
                .map(|v| self.topic_word_counts[(k, v)])
                .sum();
            if total != self.topic_totals[k] {
                return Err(Error::invalid(format!(
                    "topic {k}: totals mismatch ({total} vs {})",
                    self.topic_totals[k]
                )));
            }
        }
        Ok(())
    }
}

/// Collapsed Gibbs state. Exposed so callers (and tests) can drive sweeps
/// and watch the count invariants directly; [`fit_lda`] is the convenience
/// wrapper.
pub struct GibbsSampler {
    k_topics: usize,
    alpha: f64,
    beta: f64,
    vocab_size: usize,
    docs: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<u64>>,
    topic_word: Array2<u64>,
    topic_totals: Vec<u64>,
    total_tokens: u64,
    rng: PortableRng,
}

impl GibbsSampler {
    pub fn new(
        documents: &[Document],
        vocab_size: usize,
        k_topics: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
    ) -> Result<Self> {
        if k_topics == 0 {
            return Err(Error::invalid("k_topics must be >= 1"));
        }
        if documents.is_empty() {
            return Err(Error::invalid("empty corpus"));
        }
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::invalid("alpha and beta must be positive"));
        }
        for doc in documents {
            if doc.terms.is_empty() {
                return Err(Error::invalid(format!("document {} is empty", doc.story_id)));
            }
            if let Some(&bad) = doc.terms.iter().find(|&&t| t >= vocab_size) {
                return Err(Error::invalid(format!(
                    "document {}: term index {bad} outside vocabulary of {vocab_size}",
                    doc.story_id
                )));
            }
        }

        let mut rng = rng::seeded(seed);
        let docs: Vec<Vec<usize>> = documents.iter().map(|d| d.terms.clone()).collect();
        let mut doc_topic = vec![vec![0u64; k_topics]; docs.len()];
        let mut topic_word = Array2::zeros((k_topics, vocab_size));
        let mut topic_totals = vec![0u64; k_topics];
        let mut assignments = Vec::with_capacity(docs.len());
        let mut total_tokens = 0u64;
        for (d, doc) in docs.iter().enumerate() {
            let mut z = Vec::with_capacity(doc.len());
            for &w in doc {
                let topic = rng.gen_range(0..k_topics);
                z.push(topic);
                doc_topic[d][topic] += 1;
                topic_word[(topic, w)] += 1;
                topic_totals[topic] += 1;
                total_tokens += 1;
            }
            assignments.push(z);
        }
        Ok(GibbsSampler {
            k_topics,
            alpha,
            beta,
            vocab_size,
            docs,
            assignments,
            doc_topic,
            topic_word,
            topic_totals,
            total_tokens,
            rng,
        })
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Sum of all collapsed counts; equals `total_tokens` after every sweep.
    pub fn counted_tokens(&self) -> u64 {
        self.topic_totals.iter().sum()
    }

    /// One full pass resampling every token's topic from the collapsed
    /// conditional.
    pub fn sweep(&mut self) {
        let v_beta = self.vocab_size as f64 * self.beta;
        let mut weights = vec![0.0; self.k_topics];
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.assignments[d][i];
                self.doc_topic[d][old] -= 1;
                self.topic_word[(old, w)] -= 1;
                self.topic_totals[old] -= 1;

                let mut total = 0.0;
                for k in 0..self.k_topics {
                    let weight = (self.doc_topic[d][k] as f64 + self.alpha)
                        * (self.topic_word[(k, w)] as f64 + self.beta)
                        / (self.topic_totals[k] as f64 + v_beta);
                    total += weight;
                    weights[k] = total;
                }
                let draw = self.rng.gen::<f64>() * total;
                let new = weights
                    .iter()
                    .position(|&cum| draw < cum)
                    .unwrap_or(self.k_topics - 1);

                self.assignments[d][i] = new;
                self.doc_topic[d][new] += 1;
                self.topic_word[(new, w)] += 1;
                self.topic_totals[new] += 1;
            }
        }
        debug_assert_eq!(self.counted_tokens(), self.total_tokens);
    }

    pub fn into_model(self, vocab: Vocabulary) -> LdaModel {
        LdaModel {
            k_topics: self.k_topics,
            alpha: self.alpha,
            beta: self.beta,
            vocab,
            topic_word_counts: self.topic_word,
            topic_totals: self.topic_totals,
        }
    }
}

/// Fits a topic model by `iterations` full Gibbs sweeps. Deterministic
/// given (corpus, parameters, seed).
pub fn fit_lda(
    docs: &DocumentSet,
    k_topics: usize,
    alpha: f64,
    beta: f64,
    iterations: usize,
    seed: u64,
) -> Result<LdaModel> {
    if iterations == 0 {
        return Err(Error::invalid("iterations must be >= 1"));
    }
    let mut sampler =
        GibbsSampler::new(&docs.documents, docs.vocab.len(), k_topics, alpha, beta, seed)?;
    for _ in 0..iterations {
        sampler.sweep();
    }
    Ok(sampler.into_model(docs.vocab.clone()))
}

/// Topic proportions of one document under a fitted model: a short fold-in
/// Gibbs pass (model counts frozen) followed by the posterior mean
/// (n_k + alpha) / (n + K*alpha). Documents with no in-vocabulary terms get
/// the uniform prior 1/K.
pub fn doc_topic_distribution(model: &LdaModel, doc: &Document) -> Vec<f64> {
    let k_topics = model.k_topics;
    let uniform = vec![1.0 / k_topics as f64; k_topics];
    let terms: Vec<usize> = doc
        .terms
        .iter()
        .copied()
        .filter(|&t| t < model.vocab.len())
        .collect();
    if terms.is_empty() {
        return uniform;
    }
    if k_topics == 1 {
        return vec![1.0];
    }
    let v_beta = model.vocab.len() as f64 * model.beta;
    let mut rng = rng::seeded(INFERENCE_SEED);
    let mut counts = vec![0u64; k_topics];
    let mut z = Vec::with_capacity(terms.len());
    for _ in &terms {
        let topic = rng.gen_range(0..k_topics);
        z.push(topic);
        counts[topic] += 1;
    }
    let mut weights = vec![0.0; k_topics];
    for _ in 0..INFERENCE_SWEEPS {
        for (i, &w) in terms.iter().enumerate() {
            counts[z[i]] -= 1;
            let mut total = 0.0;
            for k in 0..k_topics {
                let weight = (counts[k] as f64 + model.alpha)
                    * (model.topic_word_counts[(k, w)] as f64 + model.beta)
                    / (model.topic_totals[k] as f64 + v_beta);
                total += weight;
                weights[k] = total;
            }
            let draw = rng.gen::<f64>() * total;
            let new = weights
                .iter()
                .position(|&cum| draw < cum)
                .unwrap_or(k_topics - 1);
            z[i] = new;
            counts[new] += 1;
        }
    }
    let denom = terms.len() as f64 + k_topics as f64 * model.alpha;
    counts
        .iter()
        .map(|&c| (c as f64 + model.alpha) / denom)
        .collect()
}

/// Topic-proportion feature columns aligned to package rows: every package
/// of a story receives that story's distribution; stories unseen by the
/// model (or empty after preprocessing) receive the uniform 1/K row.
pub fn topic_columns(model: &LdaModel, records: &[PackageRecord]) -> TopicColumns {
    let mut per_story: HashMap<String, Vec<f64>> = HashMap::new();
    for (story_id, text) in story_texts(records) {
        let terms: Vec<usize> = preprocess(&text)
            .iter()
            .filter_map(|t| model.vocab.index_of(t))
            .collect();
        let doc = Document { story_id: story_id.clone(), terms };
        per_story.insert(story_id, doc_topic_distribution(model, &doc));
    }
    let mut values = Array2::zeros((records.len(), model.k_topics));
    for (r, record) in records.iter().enumerate() {
        let dist = &per_story[&record.test_id];
        for k in 0..model.k_topics {
            values[(r, k)] = dist[k];
        }
    }
    TopicColumns { values }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(test_id: &str, headline: &str, lede: Option<&str>) -> PackageRecord {
        PackageRecord {
            test_id: test_id.to_string(),
            headline: headline.to_string(),
            lede: lede.map(String::from),
            impressions: 100,
            clicks: 10,
        }
    }

    /// Two stories per vocabulary word pattern so min_df=2 keeps terms.
    fn tiny_corpus() -> DocumentSet {
        let records = vec![
            rec("s1", "Cats chase lasers nightly", Some("cats lasers cats")),
            rec("s1", "Cats chase lasers", None),
            rec("s2", "Lasers amuse cats", Some("cats amuse lasers")),
            rec("s3", "Dogs fetch sticks", Some("dogs sticks fetch dogs")),
            rec("s4", "Dogs fetch sticks quickly", Some("sticks dogs")),
        ];
        build_documents(&records, 2).unwrap()
    }

    /// Disjoint-vocabulary corpus: `n_docs` documents per side, each a
    /// seeded bag over its own 12-term vocabulary.
    pub fn disjoint_corpus(n_docs: usize, seed: u64) -> DocumentSet {
        let vocab_a: Vec<String> = (0..12).map(|i| format!("aquatic{i}")).collect();
        let vocab_b: Vec<String> = (0..12).map(|i| format!("bovine{i}")).collect();
        let mut rng = rng::seeded(seed);
        let mut records = Vec::new();
        for d in 0..n_docs {
            let mut text_a = Vec::new();
            let mut text_b = Vec::new();
            for _ in 0..25 {
                text_a.push(vocab_a[rng.gen_range(0..12)].clone());
                text_b.push(vocab_b[rng.gen_range(0..12)].clone());
            }
            records.push(rec(&format!("a{d}"), &text_a.join(" "), None));
            records.push(rec(&format!("b{d}"), &text_b.join(" "), None));
        }
        build_documents(&records, 2).unwrap()
    }

    #[test]
    fn stemming_rules() {
        assert_eq!(stem("cats"), "cat");
        assert_eq!(stem("jumped"), "jump");
        assert_eq!(stem("quickly"), "quick");
        assert_eq!(stem("running"), "runn");
        assert_eq!(stem("ran"), "ran");
        // too short after stripping
        assert_eq!(stem("bed"), "bed");
        assert_eq!(stem("is"), "is");
    }

    #[test]
    fn preprocess_example() {
        assert_eq!(preprocess("The cats ran"), vec!["cat", "ran"]);
        assert_eq!(preprocess("The the a an"), Vec::<String>::new());
        assert_eq!(preprocess("Hello, WORLD!"), vec!["hello", "world"]);
    }

    #[test]
    fn grouping_and_dropping() {
        let records = vec![
            rec("s1", "Cats win big", None),
            rec("s1", "Cats win bigger", None),
            rec("s1", "Cats win big", None),
            rec("s2", "cats win", None),
            rec("s3", "the a an", None), // all stopwords
        ];
        let set = build_documents(&records, 1).unwrap();
        assert_eq!(set.documents.len(), 2);
        assert_eq!(set.documents[0].story_id, "s1");
        assert_eq!(set.dropped.len(), 1);
        assert_eq!(set.dropped[0].story_id, "s3");
        assert!(set.dropped[0].reason.contains("preprocessing"));
    }

    #[test]
    fn vocabulary_pruning_drops_rare_terms() {
        let records = vec![
            rec("s1", "zebra zebra unicorn", None),
            rec("s2", "zebra stampede", None),
        ];
        let set = build_documents(&records, 2).unwrap();
        // only "zebra" appears in 2 stories
        assert_eq!(set.vocab.terms(), ["zebra"]);
        assert_eq!(set.documents.len(), 2);
    }

    #[test]
    fn forced_single_topic() {
        let set = tiny_corpus();
        let model = fit_lda(&set, 1, default_alpha(1), DEFAULT_BETA, 10, 3).unwrap();
        assert_eq!(model.topic_totals.len(), 1);
        assert_eq!(model.total_tokens(), model.topic_totals[0]);
        for doc in &set.documents {
            assert_eq!(doc_topic_distribution(&model, doc), vec![1.0]);
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let set = tiny_corpus();
        let a = fit_lda(&set, 3, default_alpha(3), DEFAULT_BETA, 50, 42).unwrap();
        let b = fit_lda(&set, 3, default_alpha(3), DEFAULT_BETA, 50, 42).unwrap();
        assert_eq!(a.topic_word_counts, b.topic_word_counts);
        assert_eq!(a.topic_totals, b.topic_totals);
        let c = fit_lda(&set, 3, default_alpha(3), DEFAULT_BETA, 50, 43).unwrap();
        assert_ne!(a.topic_word_counts, c.topic_word_counts);
    }

    #[test]
    fn counts_conserved_across_sweeps() {
        let set = tiny_corpus();
        let mut sampler =
            GibbsSampler::new(&set.documents, set.vocab.len(), 4, 0.5, 0.01, 7).unwrap();
        let total = sampler.total_tokens();
        for _ in 0..25 {
            sampler.sweep();
            assert_eq!(sampler.counted_tokens(), total);
        }
        let model = sampler.into_model(set.vocab.clone());
        model.check_invariants().unwrap();
        assert_eq!(model.total_tokens(), total);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let set = tiny_corpus();
        assert!(fit_lda(&set, 0, 1.0, 0.01, 10, 1).is_err());
        assert!(fit_lda(&set, 2, 1.0, 0.01, 0, 1).is_err());
        let empty = DocumentSet {
            documents: vec![],
            vocab: Vocabulary::from_terms(vec![]),
            dropped: vec![],
        };
        assert!(fit_lda(&empty, 2, 1.0, 0.01, 10, 1).is_err());
    }

    #[test]
    fn inference_distributions_are_proper() {
        let set = tiny_corpus();
        let model = fit_lda(&set, 4, default_alpha(4), DEFAULT_BETA, 100, 11).unwrap();
        for doc in &set.documents {
            let dist = doc_topic_distribution(&model, doc);
            assert_eq!(dist.len(), 4);
            assert!(dist.iter().all(|&p| p >= 0.0));
            assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        // no vocabulary overlap falls back to the uniform prior
        let alien = Document { story_id: "x".into(), terms: vec![] };
        assert_eq!(doc_topic_distribution(&model, &alien), vec![0.25; 4]);
    }

    #[test]
    fn disjoint_vocabularies_separate() {
        let set = disjoint_corpus(10, 5);
        let model = fit_lda(&set, 2, default_alpha(2), DEFAULT_BETA, 200, 17).unwrap();
        for topic in 0..2 {
            let top = model.top_terms(topic, 10);
            let from_a = top.iter().filter(|(t, _)| t.starts_with("aquatic")).count();
            let purity = from_a.max(10 - from_a) as f64 / 10.0;
            assert!(purity >= 0.9, "topic {topic} purity {purity}");
        }
    }

    #[test]
    fn topic_columns_align_to_stories() {
        let set = tiny_corpus();
        let model = fit_lda(&set, 2, default_alpha(2), DEFAULT_BETA, 100, 9).unwrap();
        let records = vec![
            rec("s1", "Cats chase lasers nightly", Some("cats lasers cats")),
            rec("s1", "Cats chase lasers", None),
            rec("brand-new", "qqq zzz www", None), // unseen story
        ];
        let cols = topic_columns(&model, &records);
        assert_eq!(cols.values.dim(), (3, 2));
        // same story, identical columns
        assert_eq!(cols.values[(0, 0)], cols.values[(1, 0)]);
        assert_eq!(cols.values[(0, 1)], cols.values[(1, 1)]);
        // unseen story gets the uniform prior
        assert_eq!(cols.values[(2, 0)], 0.5);
        assert_eq!(cols.values[(2, 1)], 0.5);
    }

    #[test]
    fn concentrated_story_prefers_its_topic() {
        let set = disjoint_corpus(10, 6);
        let model = fit_lda(&set, 2, default_alpha(2), DEFAULT_BETA, 200, 23).unwrap();
        // which topic owns the "aquatic" vocabulary?
        let top = model.top_terms(0, 10);
        let owns_a = top.iter().filter(|(t, _)| t.starts_with("aquatic")).count() >= 5;
        let a_topic = if owns_a { 0 } else { 1 };
        let doc = &set.documents[0]; // an "aquatic" story
        let dist = doc_topic_distribution(&model, doc);
        assert!(
            dist[a_topic] > dist[1 - a_topic],
            "expected topic {a_topic} to dominate: {dist:?}"
        );
    }
}
