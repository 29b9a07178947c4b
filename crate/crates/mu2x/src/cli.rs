//! The `mu2x` command line.
//!
//! Settings resolve as flag, then environment (`MU2X_SEED` only), then
//! `--config` file, then built-in default. JSON goes to `--out`; evaluation
//! commands also write plot data next to it with a `.csv` extension. A short
//! human-readable summary goes to standard output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mu2x_core::eval::modality_distribution;
use mu2x_core::eval::robust::pick_targets;
use mu2x_core::pipeline::TextMode;
use mu2x_core::text::AttributionMode;
use mu2x_core::{Dataset, Experiment, Modality, PipelineConfig, TrainedExperiment};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::embeddings::{save_embeddings, EmbeddingFormat};
use crate::report::{
    csv_path, label_name, save_csv, write_json, ExplainReport, F1Entry, F1Report, GraphSide, InterpretEntry,
    InterpretReport, PlotRow, PredictionRow, RankedFeature, RobustSummary, TrustEntry, TrustSummary,
};
use crate::{runner, Error};

#[derive(Parser, Debug)]
#[command(
    name = "mu2x",
    version,
    about = "Explainable multimodal misinformation detection on social graphs",
    after_help = after_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn after_help() -> String {
    format!(
        "Configuration file keys (--config; one `key = value` per line, `#` comments):\n{}\n\
         Precedence: command-line flag > MU2X_SEED (seed only) > --config > default.\n\
         Exit codes: 0 success, 2 usage or configuration error, 3 data error, 4 numerical failure.",
        RunConfig::describe()
    )
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration file [default: built-in defaults, see `mu2x --help`]
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base seed [default: `seed` from --config, else 0]
    #[arg(long, env = "MU2X_SEED")]
    seed: Option<u64>,
    /// Worker threads for protocol rounds [default: available parallelism]
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Nodes file, JSON Lines [default: `nodes` from --config]
    #[arg(long, value_name = "FILE")]
    nodes: Option<PathBuf>,
    /// Edges file, JSON Lines [default: `edges` from --config]
    #[arg(long, value_name = "FILE")]
    edges: Option<PathBuf>,
    /// Text embeddings, JSON Lines or MU2XEMB1 binary [default: `embeddings` from --config]
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ModalityArg {
    Graph,
    Text,
    Multimodal,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::Graph => Modality::Graph,
            ModalityArg::Text => Modality::Text,
            ModalityArg::Multimodal => Modality::Multimodal,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum FormatArg {
    Jsonl,
    Bin,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus: nodes.jsonl, edges.jsonl and embeddings.{jsonl,bin} in --out
    Synth {
        #[command(flatten)]
        common: Common,
        /// Output directory [default: `out` from --config]
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Embedding file format
        #[arg(long, value_enum, default_value = "jsonl")]
        embeddings_format: FormatArg,
    },
    /// Train a classifier and write its checkpoint to --out
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Input blocks [default: `modality` from --config, else multimodal]
        #[arg(long, value_enum)]
        modality: Option<ModalityArg>,
        /// Checkpoint path [default: `out` from --config]
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Classify every node (or --node-id) with a trained model
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Checkpoint [default: `model` from --config]
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Only this node
        #[arg(long)]
        node_id: Option<String>,
        /// Predictions JSON [default: `out` from --config, else stdout summary only]
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Explain one classification: graph features and word importance side by side
    Explain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Checkpoint [default: `model` from --config]
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Node to explain
        #[arg(long)]
        node_id: String,
        /// Graph features shown [default: `top_k` from --config, else 5]
        #[arg(long)]
        top_k: Option<usize>,
        /// Explanation JSON [default: `out` from --config, else stdout only]
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Bootstrap F1 per modality on the test split
    EvalF1(EvalArgs),
    /// Modality make-up of the graph explanations of the test split
    EvalInterpret(EvalArgs),
    /// Simulated-user trustworthiness protocol, per modality
    EvalTrust(EvalArgs),
    /// Noise-injection robustness protocol
    EvalRobust(EvalArgs),
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    /// Evaluate this checkpoint instead of training [default: `model` from --config]
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Modality to train [default: all three; eval-robust: `modality` from --config]
    #[arg(long, value_enum)]
    modality: Option<ModalityArg>,
    /// Report JSON; plot data goes to the same path with a .csv extension [default: `out` from --config]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("mu2x: error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            e.exit_code()
        }
    }
}

fn resolve(common: &Common) -> Result<RunConfig, Error> {
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = common.seed.unwrap_or(cfg.seed);
    Ok(cfg.with_seed(seed))
}

fn required(flag: Option<PathBuf>, key: &Option<PathBuf>, name: &str) -> Result<PathBuf, Error> {
    flag.or_else(|| key.clone())
        .ok_or_else(|| Error::Usage(format!("missing --{name} (or `{name}` in --config)")))
}

fn load(data: DataArgs, cfg: &RunConfig) -> Result<(Dataset, Option<PathBuf>), Error> {
    let nodes = required(data.nodes, &cfg.nodes, "nodes")?;
    let edges = required(data.edges, &cfg.edges, "edges")?;
    let emb = data.embeddings.or_else(|| cfg.embeddings.clone());
    Ok((crate::load_dataset(&nodes, &edges, emb.as_deref())?, emb))
}

fn check_text_source(pc: &PipelineConfig, ds: &Dataset) -> Result<(), Error> {
    if pc.modality.uses_text() && pc.text_mode == TextMode::Embeddings && ds.embeddings.is_none() {
        return Err(Error::Usage(format!(
            "modality {} with text_mode = embeddings needs --embeddings (or set text_mode = tokens)",
            pc.modality.as_str()
        )));
    }
    Ok(())
}

fn prepare<'d>(ds: &'d Dataset, pc: &PipelineConfig) -> Result<Experiment<'d>, Error> {
    check_text_source(pc, ds)?;
    Ok(Experiment::prepare(ds, pc)?)
}

fn dispatch(cmd: Command) -> Result<String, Error> {
    match cmd {
        Command::Synth {
            common,
            out,
            embeddings_format,
        } => synth(common, out, embeddings_format),
        Command::Train {
            common,
            data,
            modality,
            out,
        } => train(common, data, modality, out),
        Command::Predict {
            common,
            data,
            model,
            node_id,
            out,
        } => predict(common, data, model, node_id, out),
        Command::Explain {
            common,
            data,
            model,
            node_id,
            top_k,
            out,
        } => explain(common, data, model, node_id, top_k, out),
        Command::EvalF1(a) => eval_f1(a),
        Command::EvalInterpret(a) => eval_interpret(a),
        Command::EvalTrust(a) => eval_trust(a),
        Command::EvalRobust(a) => eval_robust(a),
    }
}

fn synth(common: Common, out: Option<PathBuf>, format: FormatArg) -> Result<String, Error> {
    let cfg = resolve(&common)?;
    let dir = required(out, &cfg.out, "out")?;
    let ds = crate::synthetic_dataset(&cfg.synth)?;
    std::fs::create_dir_all(&dir).map_err(|e| crate::DataError::io(&dir, e))?;
    let (nodes, edges) = (dir.join("nodes.jsonl"), dir.join("edges.jsonl"));
    crate::io::save_graph(&ds.graph, &nodes, &edges)?;
    let (name, fmt) = match format {
        FormatArg::Jsonl => ("embeddings.jsonl", EmbeddingFormat::Jsonl),
        FormatArg::Bin => ("embeddings.bin", EmbeddingFormat::Binary),
    };
    let emb = ds.embeddings.as_ref().expect("synthetic corpora carry embeddings");
    save_embeddings(emb, &dir.join(name), fmt)?;
    Ok(format!(
        "wrote {} nodes, {} edges and {} embeddings (dim {}) to {}\n",
        ds.graph.len(),
        ds.graph.edges().len(),
        emb.len(),
        emb.dim,
        dir.display()
    ))
}

fn test_f1(t: &TrainedExperiment<'_, '_>) -> (f64, usize) {
    let (p, g) = t.test_labels();
    (mu2x_core::eval::f1_score(&p, &g), p.len())
}

fn train(common: Common, data: DataArgs, modality: Option<ModalityArg>, out: Option<PathBuf>) -> Result<String, Error> {
    let cfg = resolve(&common)?;
    let out = required(out, &cfg.out, "out")?;
    let (ds, _) = load(data, &cfg)?;
    let mut pc = cfg.pipeline.clone();
    if let Some(m) = modality {
        pc.modality = m.into();
    }
    let e = prepare(&ds, &pc)?;
    let t = e.train()?;
    Checkpoint::new(&t).save(&out)?;
    let (f1, n) = test_f1(&t);
    let loss = t.report.loss_history.last().copied().unwrap_or(f64::NAN);
    Ok(format!(
        "trained {} model on {} nodes x {} features, {} epochs, final loss {loss:.6}\n\
         test F1 {f1:.4} on {n} nodes\ncheckpoint: {}\n",
        pc.modality.as_str(),
        t.features.rows,
        t.features.cols,
        pc.gat.epochs,
        out.display()
    ))
}

/// Dataset, checkpoint and the pipeline configuration to rebuild features
/// with; explanation settings come from --config when one is given.
fn restore_inputs(common: &Common, data: DataArgs, model: Option<PathBuf>) -> Result<(RunConfig, Dataset, PathBuf, Checkpoint, PipelineConfig), Error> {
    let cfg = resolve(common)?;
    let model = required(model, &cfg.model, "model")?;
    let ckpt = Checkpoint::load(&model)?;
    let (ds, _) = load(data, &cfg)?;
    let mut pc = ckpt.pipeline.clone();
    if common.config.is_some() {
        pc.explain = cfg.pipeline.explain.clone();
        pc.ig_steps = cfg.pipeline.ig_steps;
    }
    Ok((cfg, ds, model, ckpt, pc))
}

fn predict(common: Common, data: DataArgs, model: Option<PathBuf>, node_id: Option<String>, out: Option<PathBuf>) -> Result<String, Error> {
    let (cfg, ds, model, ckpt, pc) = restore_inputs(&common, data, model)?;
    let e = prepare(&ds, &pc)?;
    let t = ckpt.restore(&e, &model)?;
    let rows: Vec<usize> = match &node_id {
        Some(id) => vec![t.features.row_index(id).ok_or_else(|| unknown_node(&ds, id))?],
        None => (0..t.features.rows).collect(),
    };
    let preds: Vec<PredictionRow> = rows
        .iter()
        .map(|&r| PredictionRow {
            id: t.features.ids[r].clone(),
            label: label_name(t.predictions[r].label),
            p_misinformation: t.predictions[r].p_misinformation(),
            gold: e.labels[r].map(label_name),
        })
        .collect();
    if let Some(out) = out.or(cfg.out) {
        write_json(&out, &preds)?;
    }
    let mis = preds.iter().filter(|p| p.label == "misinformation").count();
    let mut s = format!("{} prediction(s): {mis} misinformation, {} fact\n", preds.len(), preds.len() - mis);
    if preds.len() <= 20 {
        for p in &preds {
            let _ = writeln!(s, "  {:<16} {:<15} P(misinformation) = {:.4}", p.id, p.label, p.p_misinformation);
        }
    }
    Ok(s)
}

fn unknown_node(ds: &Dataset, id: &str) -> Error {
    match ds.graph.index_of(id) {
        Ok(_) => Error::Core(mu2x_core::gat::GatError::UnknownNode(id.into()).into()),
        Err(e) => Error::Core(e.into()),
    }
}

fn explain(
    common: Common,
    data: DataArgs,
    model: Option<PathBuf>,
    node_id: String,
    top_k: Option<usize>,
    out: Option<PathBuf>,
) -> Result<String, Error> {
    let (cfg, ds, model, ckpt, pc) = restore_inputs(&common, data, model)?;
    let top_k = top_k.unwrap_or(cfg.top_k);
    let e = prepare(&ds, &pc)?;
    let t = ckpt.restore(&e, &model)?;
    let pred = t.prediction(&node_id)?;
    let ex = t.explain_graph(&node_id)?;
    let layout = &t.features.layout;
    let top = ex
        .selected
        .iter()
        .take(top_k)
        .enumerate()
        .map(|(i, s)| RankedFeature {
            rank: i + 1,
            dim: s.dim,
            name: layout.column_name(s.dim).unwrap_or_default(),
            modality: s.modality,
            beta: s.beta,
        })
        .collect();
    let (text, text_note) = if pc.modality.uses_text() {
        match t.explain_text(&node_id, pc.ig_steps) {
            Ok(a) => (Some(a), None),
            Err(mu2x_core::Error::Text(err)) => (None, Some(err.to_string())),
            Err(err) => return Err(err.into()),
        }
    } else {
        (None, Some("the model was trained without a text block".to_string()))
    };
    let gold = ds.graph.get(&node_id).and_then(|n| n.label).map(label_name);
    let report = ExplainReport {
        node: node_id,
        modality: pc.modality,
        label: label_name(pred.label),
        p_misinformation: pred.p_misinformation(),
        gold,
        graph: GraphSide {
            k: ex.k,
            rho: ex.rho,
            n_neighbors: ex.n_neighbors,
            n_selected: ex.selected.len(),
            top,
        },
        text,
        text_note,
    };
    if let Some(out) = out.or(cfg.out) {
        write_json(&out, &report)?;
    }
    Ok(render_explanation(&report, top_k))
}

/// Classification header, then graph features on the left and word
/// importance on the right.
fn render_explanation(r: &ExplainReport, top_k: usize) -> String {
    let mut s = format!(
        "node {} ({} model): {}  P(misinformation) = {:.4}{}\n\n",
        r.node,
        r.modality.as_str(),
        r.label,
        r.p_misinformation,
        r.gold.map(|g| format!("  gold: {g}")).unwrap_or_default()
    );
    let mut left = vec![format!(
        "graph features (k = {}, {} samples, {} selected)",
        r.graph.k, r.graph.n_neighbors, r.graph.n_selected
    )];
    left.extend(
        r.graph
            .top
            .iter()
            .map(|f| format!("{:>2}. {:<16} {:<8} {:.4}", f.rank, f.name, f.modality.as_str(), f.beta)),
    );
    if r.graph.top.is_empty() {
        left.push("    (no feature selected)".into());
    }
    let mut right = Vec::new();
    match &r.text {
        Some(a) => {
            let unit = match a.mode {
                AttributionMode::Tokens => "word importance",
                AttributionMode::EmbeddingDims => "embedding-dimension importance",
            };
            right.push(format!("{unit} ({} steps, delta {:.1e})", a.steps, a.convergence_delta));
            let mut idx: Vec<usize> = (0..a.tokens.len()).collect();
            if a.mode == AttributionMode::EmbeddingDims {
                idx.sort_by(|&i, &j| a.scores[j].abs().total_cmp(&a.scores[i].abs()).then(i.cmp(&j)));
                idx.truncate(top_k);
            }
            right.extend(idx.iter().map(|&i| format!("{:<14} {:+.3}", a.tokens[i], a.scores[i])));
        }
        None => {
            right.push("word importance".into());
            right.push(format!("({})", r.text_note.as_deref().unwrap_or("unavailable")));
        }
    }
    let width = left.iter().map(|l| l.chars().count()).max().unwrap_or(0) + 2;
    for i in 0..left.len().max(right.len()) {
        let l = left.get(i).map_or("", String::as_str);
        let r = right.get(i).map_or("", String::as_str);
        let pad = width - l.chars().count();
        let _ = writeln!(s, "{l}{}| {r}", " ".repeat(pad));
    }
    s
}

/// Trained (or restored) models for an evaluation command.
struct Subjects {
    cfg: RunConfig,
    ds: Dataset,
    out: PathBuf,
    model: Option<(PathBuf, Checkpoint)>,
    modalities: Vec<Modality>,
}

fn eval_inputs(a: EvalArgs, default_all: bool) -> Result<Subjects, Error> {
    let cfg = resolve(&a.common)?;
    let out = required(a.out, &cfg.out, "out")?;
    let model = match a.model.or_else(|| cfg.model.clone()) {
        Some(p) => {
            let c = Checkpoint::load(&p)?;
            if let Some(m) = a.modality {
                if Modality::from(m) != c.pipeline.modality {
                    return Err(Error::Usage(format!(
                        "--modality {} conflicts with the {} model in {}",
                        Modality::from(m).as_str(),
                        c.pipeline.modality.as_str(),
                        p.display()
                    )));
                }
            }
            Some((p, c))
        }
        None => None,
    };
    let modalities = match (&model, a.modality) {
        (Some((_, c)), _) => vec![c.pipeline.modality],
        (None, Some(m)) => vec![m.into()],
        (None, None) if default_all => Modality::ALL.to_vec(),
        (None, None) => vec![cfg.pipeline.modality],
    };
    let (ds, _) = load(a.data, &cfg)?;
    Ok(Subjects {
        cfg,
        ds,
        out,
        model,
        modalities,
    })
}

impl Subjects {
    fn pipeline(&self, m: Modality) -> PipelineConfig {
        match &self.model {
            Some((_, c)) => {
                let mut pc = c.pipeline.clone();
                pc.explain = self.cfg.pipeline.explain.clone();
                pc
            }
            None => PipelineConfig {
                modality: m,
                ..self.cfg.pipeline.clone()
            },
        }
    }

    fn trained<'e, 'd>(&self, e: &'e Experiment<'d>) -> Result<TrainedExperiment<'e, 'd>, Error> {
        match &self.model {
            Some((p, c)) => c.restore(e, p),
            None => Ok(e.train()?),
        }
    }
}

fn save_report<T: serde::Serialize>(out: &Path, report: &T, plot: &[PlotRow]) -> Result<(), Error> {
    write_json(out, report)?;
    save_csv(&csv_path(out), plot)?;
    Ok(())
}

fn eval_f1(a: EvalArgs) -> Result<String, Error> {
    let s = eval_inputs(a, true)?;
    let mut entries = Vec::new();
    let mut text = String::from("modality      F1 (point)  F1 (mean)  95% interval\n");
    for &m in &s.modalities {
        let e = prepare(&s.ds, &s.pipeline(m))?;
        let t = s.trained(&e)?;
        let bootstrap = t.bootstrap(s.cfg.bootstrap_b, s.cfg.seed)?;
        let _ = writeln!(
            text,
            "{:<13} {:<11.4} {:<10.4} [{:.4}, {:.4}]",
            m.as_str(),
            bootstrap.point_f1,
            bootstrap.mean_f1,
            bootstrap.ci_low,
            bootstrap.ci_high
        );
        entries.push(F1Entry {
            modality: m,
            n_test: t.test_labels().0.len(),
            bootstrap,
        });
    }
    let report = F1Report { seed: s.cfg.seed, entries };
    save_report(&s.out, &report, &report.plot())?;
    Ok(text)
}

fn eval_interpret(a: EvalArgs) -> Result<String, Error> {
    let jobs = a.common.jobs;
    let s = eval_inputs(a, true)?;
    let pool = runner::pool(jobs)?;
    let mut entries = Vec::new();
    let mut text = String::from("modality      bucket  n_expl  metadata  graph   text    noise\n");
    for &m in &s.modalities {
        let e = prepare(&s.ds, &s.pipeline(m))?;
        let t = s.trained(&e)?;
        let ex = runner::explain_rows(&pool, &t, &e.explainable_test)?;
        let distribution = modality_distribution(&ex, &t.features.layout)?;
        for (bucket, c) in distribution.buckets() {
            let f = |tag| c.frequency(tag);
            use mu2x_core::ModalityTag::*;
            let _ = writeln!(
                text,
                "{:<13} {:<7} {:<7} {:<9.3} {:<7.3} {:<7.3} {:.3}",
                m.as_str(),
                bucket,
                c.n_explanations,
                f(Metadata),
                f(Structural),
                f(Text),
                f(Noise)
            );
        }
        entries.push(InterpretEntry {
            modality: m,
            n_explained: ex.len(),
            distribution,
        });
    }
    let report = InterpretReport { seed: s.cfg.seed, entries };
    save_report(&s.out, &report, &report.plot())?;
    Ok(text)
}

fn eval_trust(a: EvalArgs) -> Result<String, Error> {
    let jobs = a.common.jobs;
    let s = eval_inputs(a, true)?;
    let pool = runner::pool(jobs)?;
    let mut entries = Vec::new();
    for &m in &s.modalities {
        let e = prepare(&s.ds, &s.pipeline(m))?;
        let t = s.trained(&e)?;
        let rows = match s.cfg.trust_targets {
            0 => e.explainable_test.clone(),
            n => pick_targets(&e.explainable_test, n, s.cfg.seed)?,
        };
        let subject = t.trust_subject(rows)?;
        let report = runner::trust(&pool, &subject, &s.cfg.trust)?;
        entries.push(TrustEntry { modality: m, report });
    }
    let mut text = String::from("K ");
    for e in &entries {
        let _ = write!(text, "  {:<18}", e.modality.as_str());
    }
    text.push('\n');
    for (i, &k) in s.cfg.trust.k_list.iter().enumerate() {
        let _ = write!(text, "{k:<2}");
        for e in &entries {
            let ks = &e.report.summary[i];
            let cell = match (ks.mean_f1, ks.std_f1) {
                (Some(m), Some(sd)) => format!("{m:.4} ± {sd:.4}"),
                _ => "n/a".to_string(),
            };
            let _ = write!(text, "  {cell:<18}");
        }
        text.push('\n');
    }
    for e in &entries {
        for ks in e.report.summary.iter().filter(|ks| !ks.undefined_rounds.is_empty()) {
            let _ = writeln!(
                text,
                "{} K={}: {} of {} rounds excluded, no target trustworthy to oracle or user",
                e.modality.as_str(),
                ks.k,
                ks.undefined_rounds.len(),
                e.report.rounds
            );
        }
    }
    let report = TrustSummary { seed: s.cfg.seed, entries };
    save_report(&s.out, &report, &report.plot())?;
    Ok(text)
}

fn eval_robust(a: EvalArgs) -> Result<String, Error> {
    let jobs = a.common.jobs;
    let s = eval_inputs(a, false)?;
    if s.model.is_some() {
        return Err(Error::Usage("eval-robust retrains with noise columns and takes no --model".into()));
    }
    let pool = runner::pool(jobs)?;
    let m = s.modalities[0];
    let e = prepare(&s.ds, &s.pipeline(m))?;
    let report = runner::robust(&pool, &e, &s.cfg.robust)?;
    let mut text = format!("{} model, {} rounds per p\np      noise  mean noise %  no-noise share\n", m.as_str(), report.rounds);
    for p in &report.per_p {
        let _ = writeln!(
            text,
            "{:<6} {:<6} {:<13.2} {:.3}",
            p.p, p.n_noise, p.mean_percentage, p.zero_noise_fraction
        );
    }
    let summary = RobustSummary { modality: m, report };
    save_report(&s.out, &summary, &summary.plot())?;
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_lists_config_keys_and_flags() {
        let help = Cli::command().render_help().to_string();
        for (k, _, _) in crate::config::KEYS {
            assert!(help.contains(&format!("{k} = ")), "{k}");
        }
        let mut sub = Cli::command();
        let explain = sub.find_subcommand_mut("explain").unwrap().render_long_help().to_string();
        for flag in ["--config", "--seed", "--jobs", "--nodes", "--edges", "--embeddings", "--model", "--node-id", "--top-k", "--out", "MU2X_SEED"] {
            assert!(explain.contains(flag), "{flag}");
        }
    }

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(run(["mu2x", "frobnicate"]), 2);
        assert_eq!(run(["mu2x", "train", "--modality", "audio"]), 2);
        assert_eq!(run(["mu2x", "train", "--out", "/nonexistent/x"]), 2);
    }
}
