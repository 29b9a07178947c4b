//! Seeded synthetic social graphs with planted class signal.
//!
//! Generation is claim-centric: claims get labels first, every tweet picks
//! a claim to discuss and, when the graph signal is full, inherits that
//! claim's label. Each modality carries its own tunable signal:
//!
//! - metadata: misinformation posts draw larger engagement counts;
//! - graph: misinformation posts attract more retweet and mention edges,
//!   and links (discusses, quotes, replies, retweeting users) prefer nodes
//!   of the same class;
//! - text: embeddings are shifted along a seeded direction by class, and
//!   texts contain a class marker token.
//!
//! With every signal at zero, labels are independent of everything
//! observable.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::features::{EmbeddingTable, DEFAULT_EMBEDDING_DIM};
use crate::graph::{Label, Lang, MetadataCounts, NodeKind, PostNode, Relation, RelationKind};
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic corpus configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalStrength {
    pub metadata: f64,
    pub graph: f64,
    pub text: f64,
}

impl SignalStrength {
    pub fn uniform(s: f64) -> Self {
        SignalStrength {
            metadata: s,
            graph: s,
            text: s,
        }
    }
}

/// Expected number of edges of each kind per post.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeDensities {
    /// Probability that a post has an author.
    pub posted: f64,
    pub mentions: f64,
    pub retweeted: f64,
    pub quote_of: f64,
    /// Probability that a reply is linked to its parent.
    pub reply_to: f64,
    /// Probability that a tweet is linked to its claim.
    pub discusses: f64,
}

impl Default for EdgeDensities {
    fn default() -> Self {
        EdgeDensities {
            posted: 1.0,
            mentions: 0.3,
            retweeted: 1.0,
            quote_of: 0.2,
            reply_to: 1.0,
            discusses: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_tweets: usize,
    pub n_replies: usize,
    pub n_users: usize,
    pub n_claims: usize,
    /// Language shares; must sum to 1.
    pub langs: Vec<(Lang, f64)>,
    pub signal: SignalStrength,
    pub densities: EdgeDensities,
    pub misinformation_rate: f64,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_tweets: 2000,
            n_replies: 200,
            n_users: 300,
            n_claims: 40,
            langs: vec![(Lang::En, 0.5), (Lang::Es, 0.25), (Lang::Pt, 0.25)],
            signal: SignalStrength::uniform(1.0),
            densities: EdgeDensities::default(),
            misinformation_rate: 0.5,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.into()));
        if self.n_tweets == 0 || self.n_users == 0 || self.n_claims == 0 {
            return bad("n_tweets, n_users and n_claims must be positive");
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be positive");
        }
        if self.langs.is_empty() || self.langs.iter().any(|&(_, s)| !(s >= 0.0)) {
            return bad("language shares must be non-negative");
        }
        let total: f64 = self.langs.iter().map(|&(_, s)| s).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad("language shares must sum to 1");
        }
        let s = self.signal;
        if [s.metadata, s.graph, s.text].iter().any(|v| !(0.0..=1.0).contains(v)) {
            return bad("signal strengths must lie in [0,1]");
        }
        let d = self.densities;
        if [d.posted, d.mentions, d.retweeted, d.quote_of, d.reply_to, d.discusses]
            .iter()
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return bad("edge densities must be non-negative");
        }
        if [d.posted, d.reply_to, d.discusses].iter().any(|&v| v > 1.0) {
            return bad("posted, reply_to and discusses densities are probabilities");
        }
        if !(self.misinformation_rate > 0.0 && self.misinformation_rate < 1.0) {
            return bad("misinformation_rate must lie in (0,1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub nodes: Vec<PostNode>,
    pub edges: Vec<Relation>,
    pub embeddings: EmbeddingTable,
}

/// Token that marks misinformation texts.
pub const MIS_MARKER: &str = "#hoax";
/// Token that marks fact texts.
pub const FACT_MARKER: &str = "#verified";

const WORDS_EN: &[&str] = &[
    "the", "news", "today", "people", "government", "report", "city", "health", "vaccine", "water", "election",
    "video", "photo", "says", "new", "study", "shows", "police", "school", "price", "market", "climate", "storm",
    "doctor", "world", "president", "minister", "law", "money", "company", "virus", "covid", "mask", "data",
    "week", "year", "children", "food", "energy", "town",
];
const WORDS_ES: &[&str] = &[
    "el", "la", "noticia", "hoy", "gente", "gobierno", "informe", "ciudad", "salud", "vacuna", "agua", "elecciones",
    "video", "foto", "dice", "nuevo", "estudio", "muestra", "policía", "escuela", "precio", "mercado", "clima",
    "tormenta", "médico", "mundo", "presidente", "ministro", "ley", "dinero", "empresa", "virus", "mascarilla",
    "datos", "semana", "año", "niños", "comida", "energía", "pueblo",
];
const WORDS_PT: &[&str] = &[
    "o", "a", "notícia", "hoje", "pessoas", "governo", "relatório", "cidade", "saúde", "vacina", "água", "eleição",
    "vídeo", "foto", "diz", "novo", "estudo", "mostra", "polícia", "escola", "preço", "mercado", "clima",
    "tempestade", "médico", "mundo", "presidente", "ministro", "lei", "dinheiro", "empresa", "vírus", "máscara",
    "dados", "semana", "ano", "crianças", "comida", "energia", "vila",
];

fn words(lang: Lang) -> &'static [&'static str] {
    match lang {
        Lang::En => WORDS_EN,
        Lang::Es => WORDS_ES,
        Lang::Pt => WORDS_PT,
    }
}

/// Knuth's multiplication method; fine for the small means used here.
fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let limit = math::exp(-mean);
    let mut k = 0;
    let mut p: f64 = rng.random();
    while p > limit {
        k += 1;
        p *= rng.random::<f64>();
    }
    k
}

fn lognormal_count(rng: &mut ChaCha8Rng, mu: f64) -> u64 {
    let z: f64 = StandardNormal.sample(rng);
    let v = math::exp(mu + 0.75 * z) - 1.0;
    math::floor(v.max(0.0)) as u64
}

struct Gen<'c> {
    cfg: &'c SynthConfig,
    rng: ChaCha8Rng,
    direction: Vec<f64>,
}

impl Gen<'_> {
    fn lang(&mut self) -> Lang {
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for &(l, s) in &self.cfg.langs {
            acc += s;
            if u < acc {
                return l;
            }
        }
        self.cfg.langs[self.cfg.langs.len() - 1].0
    }

    /// Exactly `round(rate · n)` misinformation labels in shuffled order.
    fn labels(&mut self, n: usize) -> Vec<Label> {
        let n_mis = math::round(self.cfg.misinformation_rate * n as f64) as usize;
        let mut v: Vec<Label> = (0..n)
            .map(|i| if i < n_mis { Label::Misinformation } else { Label::Fact })
            .collect();
        v.shuffle(&mut self.rng);
        v
    }

    fn text(&mut self, lang: Lang, label: Label) -> String {
        let pool = words(lang);
        let len = self.rng.random_range(6..=14);
        let mut toks: Vec<&str> = (0..len).map(|_| pool[self.rng.random_range(0..pool.len())]).collect();
        if self.rng.random_bool(self.cfg.signal.text) {
            let marker = match label {
                Label::Misinformation => MIS_MARKER,
                Label::Fact => FACT_MARKER,
            };
            let at = self.rng.random_range(0..=toks.len());
            toks.insert(at, marker);
        }
        toks.join(" ")
    }

    fn metadata(&mut self, label: Label) -> MetadataCounts {
        let s = if label == Label::Misinformation { self.cfg.signal.metadata } else { 0.0 };
        MetadataCounts {
            n_retweets: lognormal_count(&mut self.rng, 2.0 + s),
            n_replies: lognormal_count(&mut self.rng, 1.5 + 0.8 * s),
            n_quotes: lognormal_count(&mut self.rng, 0.8 + 0.5 * s),
        }
    }

    fn embedding(&mut self, label: Label) -> Vec<f32> {
        let sign = if label == Label::Misinformation { 1.0 } else { -1.0 };
        let shift = 2.0 * self.cfg.signal.text * sign;
        (0..self.cfg.embedding_dim)
            .map(|k| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                (z + shift * self.direction[k]) as f32
            })
            .collect()
    }

    /// Picks from `same` with probability `s_graph`, otherwise uniformly
    /// from `all`, so a zero graph signal leaves links label-blind.
    fn homophilous(&mut self, same: &[usize], all: usize) -> usize {
        if !same.is_empty() && self.rng.random_bool(self.cfg.signal.graph) {
            same[self.rng.random_range(0..same.len())]
        } else {
            self.rng.random_range(0..all)
        }
    }

    /// Edge-rate multiplier for a post of class `label`.
    fn degree_factor(&self, label: Label) -> f64 {
        let s = self.cfg.signal.graph;
        match label {
            Label::Misinformation => 1.0 + s,
            Label::Fact => 1.0 - 0.5 * s,
        }
    }
}

fn split_by(labels: &[Label]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, l) in labels.iter().enumerate() {
        out[l.index()].push(i);
    }
    out
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut direction: Vec<f64> = (0..cfg.embedding_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = math::sqrt(direction.iter().map(|v| v * v).sum());
    direction.iter_mut().for_each(|v| *v /= norm.max(1e-300));
    let mut g = Gen { cfg, rng, direction };

    let claim_labels = g.labels(cfg.n_claims);
    let tweet_labels = g.labels(cfg.n_tweets);
    let reply_labels = g.labels(cfg.n_replies);
    let user_leaning = g.labels(cfg.n_users);
    let claims_by = split_by(&claim_labels);
    let tweets_by = split_by(&tweet_labels);
    let users_by = split_by(&user_leaning);

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut embeddings = EmbeddingTable::new(cfg.embedding_dim);
    let cid = |i: usize| alloc::format!("c{i}");
    let tid = |i: usize| alloc::format!("t{i}");
    let uid = |i: usize| alloc::format!("u{i}");

    for (i, &label) in claim_labels.iter().enumerate() {
        let lang = g.lang();
        let text = g.text(lang, label);
        let e = g.embedding(label);
        embeddings.insert(cid(i), Some(lang), e).map_err(|e| SynthError::InvalidConfig(alloc::format!("{e}")))?;
        nodes.push(PostNode {
            id: cid(i),
            kind: NodeKind::Claim,
            lang,
            text,
            metadata: MetadataCounts::default(),
            label: Some(label),
        });
    }
    for i in 0..cfg.n_users {
        let lang = g.lang();
        nodes.push(PostNode {
            id: uid(i),
            kind: NodeKind::User,
            lang,
            text: String::new(),
            metadata: MetadataCounts::default(),
            label: None,
        });
    }

    let d = cfg.densities;
    let posts = |g: &mut Gen<'_>, id: String, kind: NodeKind, label: Label, edges: &mut Vec<(String, String, RelationKind)>| {
        let lang = g.lang();
        let text = g.text(lang, label);
        let metadata = g.metadata(label);
        let e = g.embedding(label);
        let lean = &users_by[label.index()];
        if g.rng.random_bool(d.posted) {
            let u = g.homophilous(lean, cfg.n_users);
            edges.push((uid(u), id.clone(), RelationKind::Posted));
        }
        let f = g.degree_factor(label);
        for _ in 0..poisson(&mut g.rng, d.retweeted * f) {
            let u = g.homophilous(lean, cfg.n_users);
            edges.push((uid(u), id.clone(), RelationKind::Retweeted));
        }
        for _ in 0..poisson(&mut g.rng, d.mentions * f) {
            let u = g.rng.random_range(0..cfg.n_users);
            edges.push((id.clone(), uid(u), RelationKind::Mentions));
        }
        (
            PostNode {
                id,
                kind,
                lang,
                text,
                metadata,
                label: Some(label),
            },
            lang,
            e,
        )
    };

    let mut raw_edges: Vec<(String, String, RelationKind)> = Vec::new();
    for (i, &label) in tweet_labels.iter().enumerate() {
        let (node, lang, e) = posts(&mut g, tid(i), NodeKind::Tweet, label, &mut raw_edges);
        embeddings.insert(tid(i), Some(lang), e).map_err(|e| SynthError::InvalidConfig(alloc::format!("{e}")))?;
        nodes.push(node);
        if g.rng.random_bool(d.discusses) {
            let c = g.homophilous(&claims_by[label.index()], cfg.n_claims);
            raw_edges.push((tid(i), cid(c), RelationKind::Discusses));
        }
        for _ in 0..poisson(&mut g.rng, d.quote_of) {
            let q = g.homophilous(&tweets_by[label.index()], cfg.n_tweets);
            if q != i {
                raw_edges.push((tid(i), tid(q), RelationKind::QuoteOf));
            }
        }
    }
    for (i, &label) in reply_labels.iter().enumerate() {
        let id = alloc::format!("r{i}");
        let (node, lang, e) = posts(&mut g, id.clone(), NodeKind::Reply, label, &mut raw_edges);
        embeddings.insert(id.clone(), Some(lang), e).map_err(|e| SynthError::InvalidConfig(alloc::format!("{e}")))?;
        nodes.push(node);
        if g.rng.random_bool(d.reply_to) {
            let t = g.homophilous(&tweets_by[label.index()], cfg.n_tweets);
            raw_edges.push((id, tid(t), RelationKind::ReplyTo));
        }
    }
    raw_edges.sort();
    raw_edges.dedup();
    edges.extend(raw_edges.into_iter().map(|(s, t, k)| Relation::new(s, t, k)));
    nodes.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(SynthCorpus { nodes, edges, embeddings })
}
