//! Flat `key = value` run configuration.
//!
//! One setting per line; `#` starts a comment; blank lines are ignored.
//! Unknown keys and repeated keys are rejected. [`KEYS`] lists every key
//! with its default and is printed by `mu2x --help`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mu2x_core::eval::{RobustConfig, TrustConfig};
use mu2x_core::pipeline::TextMode;
use mu2x_core::synth::SynthConfig;
use mu2x_core::{Lang, Modality, PipelineConfig};

/// `line` is 0 for errors about the configuration as a whole.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}{}: {msg}", path.display(), match line { 0 => String::new(), l => format!(":{l}") })]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: usize,
    pub msg: String,
}

/// Every configuration key, its default and what it controls.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "base seed for synthesis, projection, split, training and protocols"),
    ("nodes", "", "nodes file (JSON Lines)"),
    ("edges", "", "edges file (JSON Lines)"),
    ("embeddings", "", "text-embedding file (JSON Lines or MU2XEMB1 binary)"),
    ("model", "", "model checkpoint"),
    ("out", "", "output path"),
    ("modality", "multimodal", "graph | text | multimodal"),
    ("text_mode", "embeddings", "embeddings (precomputed vectors) | tokens (toy token encoder)"),
    ("d_proj", "812", "width of the projected text block"),
    ("d_tok", "32", "token-table width of the toy encoder"),
    ("hidden_dim", "16", "GAT hidden width per head"),
    ("heads", "1", "layer-1 attention heads (averaged)"),
    ("lr", "0.005", "Adam learning rate"),
    ("epochs", "400", "full-batch training epochs"),
    ("leaky_slope", "0.2", "LeakyReLU slope in the attention scores"),
    ("adam_beta1", "0.9", "Adam first-moment decay"),
    ("adam_beta2", "0.999", "Adam second-moment decay"),
    ("adam_eps", "1e-8", "Adam epsilon"),
    ("self_loops", "true", "add a self-loop to every node"),
    ("k", "2", "explanation neighborhood radius in hops"),
    ("rho_scale", "0.01", "HSIC Lasso penalty as a fraction of the smallest all-zero penalty"),
    ("rho", "none", "absolute HSIC Lasso penalty; overrides rho_scale"),
    ("max_samples", "100", "largest explanation sample set"),
    ("hsic_tol", "1e-8", "coordinate-descent tolerance on the largest coefficient change"),
    ("max_sweeps", "10000", "coordinate-descent sweep limit"),
    ("ig_steps", "50", "integrated-gradients steps"),
    ("top_k", "5", "features shown per explanation"),
    ("bootstrap_b", "1000", "bootstrap resamples"),
    ("rounds", "25", "rounds of the trustworthiness and robustness protocols"),
    ("frac", "0.3", "fraction of untrustworthy features per round"),
    ("K_list", "1,2,3,5,10", "explanation lengths shown to the simulated user"),
    ("lambda", "0.001", "ridge penalty of the simulated user's surrogate"),
    ("trust_targets", "0", "test nodes evaluated for trust; 0 means all explainable ones"),
    ("p_list", "0.01,0.1,0.25,0.5,0.75,1.0", "noise proportions of the robustness sweep"),
    ("n_explain", "20", "explained test nodes per robustness round"),
    ("constant_noise", "false", "constant instead of Gaussian noise columns (debug)"),
    ("n_tweets", "2000", "synthetic tweets"),
    ("n_replies", "200", "synthetic replies"),
    ("n_users", "300", "synthetic users"),
    ("n_claims", "40", "synthetic claims"),
    ("langs", "en:0.5,es:0.25,pt:0.25", "synthetic language shares"),
    ("signal_metadata", "1", "planted metadata signal in [0,1]"),
    ("signal_graph", "1", "planted graph signal in [0,1]"),
    ("signal_text", "1", "planted text signal in [0,1]"),
    ("density_posted", "1", "probability that a post has an author edge"),
    ("density_mentions", "0.3", "mention edges per post"),
    ("density_retweeted", "1", "retweet edges per post"),
    ("density_quote_of", "0.2", "quote edges per tweet"),
    ("density_reply_to", "1", "probability that a reply links to its parent"),
    ("density_discusses", "1", "probability that a tweet links to its claim"),
    ("misinformation_rate", "0.5", "share of misinformation labels"),
    ("embedding_dim", "768", "synthetic embedding width"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// `seed` here is overwritten by [`RunConfig::seed`].
    pub pipeline: PipelineConfig,
    pub top_k: usize,
    pub bootstrap_b: usize,
    pub trust: TrustConfig,
    pub trust_targets: usize,
    pub robust: RobustConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            nodes: None,
            edges: None,
            embeddings: None,
            model: None,
            out: None,
            pipeline: PipelineConfig::default(),
            top_k: 5,
            bootstrap_b: 1000,
            trust: TrustConfig::default(),
            trust_targets: 0,
            robust: RobustConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

fn num<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("`{v}` is not a valid number"))
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String> {
    v.split(',').map(|s| num(s.trim())).collect()
}

fn path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn boolean(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{v}` is not true or false")),
    }
}

fn langs(v: &str) -> Result<Vec<(Lang, f64)>, String> {
    v.split(',')
        .map(|item| {
            let (l, s) = item.trim().split_once(':').ok_or_else(|| format!("`{item}` is not lang:share"))?;
            Ok((l.parse().map_err(|e| format!("{e}"))?, num(s)?))
        })
        .collect()
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let g = &mut self.pipeline.gat;
        let x = &mut self.pipeline.explain;
        let s = &mut self.synth;
        match key {
            "seed" => self.seed = num(v)?,
            "nodes" => self.nodes = path(v),
            "edges" => self.edges = path(v),
            "embeddings" => self.embeddings = path(v),
            "model" => self.model = path(v),
            "out" => self.out = path(v),
            "modality" => self.pipeline.modality = Modality::parse(v).ok_or_else(|| format!("unknown modality `{v}`"))?,
            "text_mode" => self.pipeline.text_mode = TextMode::parse(v).ok_or_else(|| format!("unknown text mode `{v}`"))?,
            "d_proj" => self.pipeline.d_proj = num(v)?,
            "d_tok" => self.pipeline.d_tok = num(v)?,
            "hidden_dim" => g.hidden_dim = num(v)?,
            "heads" => g.heads = num(v)?,
            "lr" => g.lr = num(v)?,
            "epochs" => g.epochs = num(v)?,
            "leaky_slope" => g.leaky_slope = num(v)?,
            "adam_beta1" => g.adam_betas.0 = num(v)?,
            "adam_beta2" => g.adam_betas.1 = num(v)?,
            "adam_eps" => g.adam_eps = num(v)?,
            "self_loops" => g.self_loops = boolean(v)?,
            "k" => x.k = num(v)?,
            "rho_scale" => x.rho_scale = num(v)?,
            "rho" => x.rho = if v == "none" { None } else { Some(num(v)?) },
            "max_samples" => x.max_samples = num(v)?,
            "hsic_tol" => x.tol = num(v)?,
            "max_sweeps" => x.max_sweeps = num(v)?,
            "ig_steps" => self.pipeline.ig_steps = num(v)?,
            "top_k" => self.top_k = num(v)?,
            "bootstrap_b" => self.bootstrap_b = num(v)?,
            "rounds" => {
                self.trust.rounds = num(v)?;
                self.robust.rounds = self.trust.rounds;
            }
            "frac" => self.trust.frac = num(v)?,
            "K_list" => self.trust.k_list = list(v)?,
            "lambda" => self.trust.lambda = num(v)?,
            "trust_targets" => self.trust_targets = num(v)?,
            "p_list" => self.robust.p_list = list(v)?,
            "n_explain" => self.robust.n_explain = num(v)?,
            "constant_noise" => self.robust.constant_noise = boolean(v)?,
            "n_tweets" => s.n_tweets = num(v)?,
            "n_replies" => s.n_replies = num(v)?,
            "n_users" => s.n_users = num(v)?,
            "n_claims" => s.n_claims = num(v)?,
            "langs" => s.langs = langs(v)?,
            "signal_metadata" => s.signal.metadata = num(v)?,
            "signal_graph" => s.signal.graph = num(v)?,
            "signal_text" => s.signal.text = num(v)?,
            "density_posted" => s.densities.posted = num(v)?,
            "density_mentions" => s.densities.mentions = num(v)?,
            "density_retweeted" => s.densities.retweeted = num(v)?,
            "density_quote_of" => s.densities.quote_of = num(v)?,
            "density_reply_to" => s.densities.reply_to = num(v)?,
            "density_discusses" => s.densities.discusses = num(v)?,
            "misinformation_rate" => s.misinformation_rate = num(v)?,
            "embedding_dim" => s.embedding_dim = num(v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Parses configuration text on top of the defaults.
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let err = |msg: String| ConfigError {
                path: path.into(),
                line: i + 1,
                msg,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.iter().any(|&(key, _, _)| key == k) {
                return Err(err(format!("unknown key `{k}`")));
            }
            if !seen.insert(k.to_string()) {
                return Err(err(format!("key `{k}` given twice")));
            }
            cfg.set(k, v).map_err(|m| err(format!("{k}: {m}")))?;
        }
        cfg.validate().map_err(|msg| ConfigError {
            path: path.into(),
            line: 0,
            msg,
        })?;
        Ok(cfg)
    }

    /// Rejects values the components would refuse later.
    pub fn validate(&self) -> Result<(), String> {
        self.pipeline.gat.validate().map_err(|e| e.to_string())?;
        self.trust.validate().map_err(|e| e.to_string())?;
        self.robust.validate().map_err(|e| e.to_string())?;
        self.synth.validate().map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, crate::Error> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::DataError::io(path, e))?;
        Ok(Self::parse(&text, path)?)
    }

    /// Pushes the base seed into every component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.pipeline.seed = seed;
        self.trust.seed = seed;
        self.robust.seed = seed;
        self.synth.seed = seed;
        self
    }

    /// The key table as help text.
    pub fn describe() -> String {
        let width = KEYS.iter().map(|(k, d, _)| k.len() + d.len()).max().unwrap_or(0) + 4;
        let mut out = String::new();
        for (k, d, doc) in KEYS {
            let kv = format!("{k} = {d}");
            let _ = writeln!(out, "  {kv:width$} {doc}");
        }
        out
    }
}
