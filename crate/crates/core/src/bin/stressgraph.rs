use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde::Serialize;

use stressgraph::cart::{self, DecisionTree, GridSpec};
use stressgraph::contrastive::{train_toy, LossKind, TrainConfig};
use stressgraph::io;
use stressgraph::metrics::evaluate;
use stressgraph::network::{load_network, FileFormat, RoadNetwork, SplitAssignment, SplitRole};
use stressgraph::pipeline::{run_autolts, train_fusion, FeatureInputs, FusionConfig, FusionModel, Scenario};
use stressgraph::smoothing::{adapt, estimate_transitions, CategoricalDistribution, TransitionMatrix};
use stressgraph::synthgen::{generate, GenConfig, Topology};
use stressgraph::{compute_lts, Feature, LtsLabel};

/// Cycling level-of-traffic-stress assessment over road networks.
#[derive(Debug, Parser, Serialize)]
#[command(name = "stressgraph", version)]
struct Cli {
    /// Seed for every random choice made by the subcommand.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Rule-based LTS for every segment; writes lts.csv.
    Lts(LtsArgs),
    /// Spatially smooth categorical predictions; writes smoothed.csv and transitions.csv.
    Smooth(SmoothArgs),
    /// Train a contrastive encoder; writes embeddings.csv, loss_history.csv and encoder.json.
    TrainOrdcon(TrainArgs),
    /// Grid-search and fit a decision tree; writes tree.json and cv.csv.
    FitCart(CartArgs),
    /// Two-step LTS prediction; writes predictions.csv and leaf_baseline.csv.
    Predict(PredictArgs),
    /// Score predictions; prints a table and writes eval.json.
    Eval(EvalArgs),
    /// Generate a synthetic data set.
    Gen(GenArgs),
}

#[derive(Debug, Args, Serialize)]
struct LtsArgs {
    #[arg(long)]
    network: PathBuf,
    /// Fail on the first segment whose rule path needs a missing feature,
    /// instead of leaving its label blank.
    #[arg(long)]
    strict_missing: bool,
}

#[derive(Debug, Args, Serialize)]
struct SmoothArgs {
    #[arg(long)]
    network: PathBuf,
    /// CSV of segment_id,p_1..p_K.
    #[arg(long)]
    predictions: PathBuf,
    /// Transition matrix CSV.
    #[arg(long, conflicts_with = "train_labels")]
    transitions: Option<PathBuf>,
    /// CSV of segment_id,label (1..K) used to estimate transitions.
    #[arg(long, required_unless_present = "transitions")]
    train_labels: Option<PathBuf>,
    /// Additive smoothing for transition counts.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    /// CSV of sample_id,x_1..x_p,y.
    #[arg(long)]
    data: PathBuf,
    /// Samples to embed after training (defaults to --data).
    #[arg(long)]
    embed: Option<PathBuf>,
    #[arg(long, default_value = "ordcon", value_parser = ["moco", "supcon", "ordcon"])]
    loss: String,
    /// Number of label granularities; must match the number of weights.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.95,0.05")]
    weights: Vec<f64>,
    #[arg(long, default_value_t = 0.07)]
    tau: f64,
    #[arg(long, default_value_t = 0.999)]
    momentum: f64,
    #[arg(long, default_value_t = 256)]
    queue: usize,
    /// Encoder output dimension.
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 8)]
    proj_dim: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0.1)]
    view_noise: f64,
    #[arg(long, default_value_t = 4)]
    classes: u8,
}

#[derive(Debug, Args, Serialize)]
struct CartArgs {
    /// Segment file with features and an lts column.
    #[arg(long)]
    data: PathBuf,
    /// Restrict fitting to the train role of this split.
    #[arg(long)]
    split: Option<PathBuf>,
    /// GridSpec JSON; defaults to the built-in grid.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    network: PathBuf,
    /// 1: no ground-truth features; 2: road type and infrastructure; 3: lanes and speed.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    scenario: u8,
    /// CSV of segment_id followed by embedding columns.
    #[arg(long)]
    embeddings: PathBuf,
    /// Directory of <feature>.csv prediction tables.
    #[arg(long)]
    feature_preds: Option<PathBuf>,
    #[arg(long)]
    tree: PathBuf,
    /// Fitted fusion head; when absent one is trained on the split's train role.
    #[arg(long)]
    fusion: Option<PathBuf>,
    /// Transition matrix per smoothed feature, as FEATURE=PATH. A bare PATH applies to speed.
    #[arg(long)]
    transitions: Vec<String>,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    fusion_epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    fusion_lr: f64,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    /// CSV of segment_id,lts.
    #[arg(long)]
    truth: PathBuf,
    /// CSV whose second column is the predicted LTS.
    #[arg(long)]
    pred: PathBuf,
    /// Evaluate only segments of --role in this split.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value = "test", value_parser = ["train", "validation", "test"])]
    role: String,
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[arg(long, default_value = "random", value_parser = ["chain", "grid", "random"])]
    topology: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Mean node degree of the random topology.
    #[arg(long, default_value_t = 3.0)]
    avg_degree: f64,
    /// Label transition matrix CSV.
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Probability of keeping the parent's label when no kernel file is given
    /// [default: 0.3, or 0.1 with the toronto-marginals preset].
    #[arg(long)]
    persistence: Option<f64>,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    /// Smear model outputs without flipping labels.
    #[arg(long)]
    no_flips: bool,
    #[arg(long, value_parser = ["toronto-marginals"])]
    preset: Option<String>,
    #[arg(long, default_value_t = 8)]
    embed_dim: usize,
    #[arg(long, default_value_t = 1.5)]
    embed_separation: f64,
    #[arg(long, default_value_t = 1.0)]
    embed_noise: f64,
    #[arg(long, default_value_t = 4)]
    regions: usize,
}

struct Ctx {
    seed: u64,
    quiet: bool,
    out_dir: PathBuf,
}

impl Ctx {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out_dir.join(name);
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn read_net(path: &Path) -> Result<RoadNetwork> {
    load_network(path, FileFormat::from_path(path)).with_context(|| format!("loading {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(ctx: &Ctx, name: &str, value: &T) -> Result<()> {
    let mut w = ctx.create(name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_split(path: &Path) -> Result<SplitAssignment> {
    SplitAssignment::read_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// Reorders per-id rows to network order; every segment must be present.
fn align<T: Clone>(net: &RoadNetwork, ids: &[String], rows: &[T], what: &str) -> Result<Vec<T>> {
    let mut slots: Vec<Option<T>> = vec![None; net.len()];
    for (id, row) in ids.iter().zip(rows) {
        let i = net
            .index_of(id)
            .ok_or_else(|| anyhow!("{what}: segment {id:?} is not in the network"))?;
        slots[i] = Some(row.clone());
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| anyhow!("{what}: no row for segment {:?}", net.segment(i).id)))
        .collect()
}

fn read_dists_aligned(net: &RoadNetwork, path: &Path) -> Result<Vec<CategoricalDistribution>> {
    let (ids, dists) = io::read_distributions(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    align(net, &ids, &dists, &path.display().to_string())
}

fn read_embeddings_aligned(net: &RoadNetwork, path: &Path) -> Result<Array2<f64>> {
    let (ids, m) = io::read_matrix(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
    let rows = align(net, &ids, &rows, &path.display().to_string())?;
    let flat: Vec<f64> = rows.concat();
    Ok(Array2::from_shape_vec((net.len(), m.ncols()), flat)?)
}

fn ids_of(net: &RoadNetwork) -> Vec<String> {
    net.ids().map(str::to_string).collect()
}

fn run_lts(ctx: &Ctx, a: &LtsArgs) -> Result<()> {
    let net = read_net(&a.network)?;
    let mut wtr = csv::Writer::from_writer(ctx.create("lts.csv")?);
    wtr.write_record(["segment_id", "lts"])?;
    let mut blank = 0;
    for seg in net.segments() {
        let cell = match compute_lts(&seg.features) {
            Ok(y) => y.value().to_string(),
            Err(e) if a.strict_missing => bail!("segment {:?}: {e}", seg.id),
            Err(_) => {
                blank += 1;
                String::new()
            }
        };
        wtr.write_record([seg.id.as_str(), &cell])?;
    }
    wtr.flush()?;
    if blank > 0 {
        log::warn!("{blank} segments lack a feature their rule path needs; left blank");
    }
    ctx.say(format!("labelled {} of {} segments", net.len() - blank, net.len()));
    Ok(())
}

fn run_smooth(ctx: &Ctx, a: &SmoothArgs) -> Result<()> {
    let net = read_net(&a.network)?;
    let models = read_dists_aligned(&net, &a.predictions)?;
    let k = models.first().map_or(0, CategoricalDistribution::len);
    let t = match (&a.transitions, &a.train_labels) {
        (Some(path), _) => TransitionMatrix::read_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?,
        (None, Some(path)) => {
            let mut labels = vec![None; net.len()];
            for (id, l) in io::read_labels(open(path)?)? {
                let i = net.require_index(&id)?;
                if l == 0 || l as usize > k {
                    bail!("{}: label {l} for {id:?} outside 1..={k}", path.display());
                }
                labels[i] = Some(l as usize - 1);
            }
            estimate_transitions(&net, &labels, k, a.alpha)?
        }
        (None, None) => bail!("either --transitions or --train-labels is required"),
    };
    let initial: Vec<usize> = models.iter().map(CategoricalDistribution::argmax).collect();
    let outcome = adapt(&net, &initial, &t, &models, a.max_iters)?;
    let mut wtr = csv::Writer::from_writer(ctx.create("smoothed.csv")?);
    wtr.write_record(["segment_id", "label", "changed"])?;
    let mut changed = 0;
    for (i, seg) in net.segments().iter().enumerate() {
        let c = outcome.labels[i] != initial[i];
        changed += usize::from(c);
        wtr.write_record([seg.id.as_str(), &(outcome.labels[i] + 1).to_string(), if c { "1" } else { "0" }])?;
    }
    wtr.flush()?;
    t.write_csv(ctx.create("transitions.csv")?)?;
    ctx.say(format!(
        "{} after {} sweeps; {changed} of {} labels changed",
        if outcome.converged { "converged" } else { "stopped" },
        outcome.iterations,
        net.len()
    ));
    Ok(())
}

fn run_train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    if let Some(levels) = a.levels {
        if levels != a.weights.len() {
            bail!("--levels {levels} does not match {} weights", a.weights.len());
        }
    }
    let (_, data) = io::read_samples(open(&a.data)?).with_context(|| format!("reading {}", a.data.display()))?;
    let config = TrainConfig {
        loss: a.loss.parse::<LossKind>()?,
        level_weights: a.weights.clone(),
        tau: a.tau,
        momentum: a.momentum,
        queue_capacity: a.queue,
        embed_dim: a.dim,
        proj_dim: a.proj_dim,
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        view_noise: a.view_noise,
        num_classes: a.classes,
        seed: ctx.seed,
    };
    let outcome = train_toy(&config, &data)?;
    let (ids, samples) = match &a.embed {
        Some(path) => io::read_samples(open(path)?).with_context(|| format!("reading {}", path.display()))?,
        None => io::read_samples(open(&a.data)?)?,
    };
    let mut emb = Array2::zeros((samples.len(), a.dim));
    for (i, s) in samples.iter().enumerate() {
        if s.x.len() != outcome.state.input_dim() {
            bail!("sample {:?} has {} inputs, encoder expects {}", ids[i], s.x.len(), outcome.state.input_dim());
        }
        emb.row_mut(i).assign(&outcome.state.embed(ndarray::ArrayView1::from(&s.x)));
    }
    io::write_matrix(ctx.create("embeddings.csv")?, "segment_id", "e_", &ids, &emb)?;
    let mut wtr = csv::Writer::from_writer(ctx.create("loss_history.csv")?);
    wtr.write_record(["epoch", "loss"])?;
    for (e, l) in outcome.history.iter().enumerate() {
        wtr.write_record([(e + 1).to_string(), l.to_string()])?;
    }
    wtr.flush()?;
    write_json(ctx, "encoder.json", &outcome.state)?;
    ctx.say(format!(
        "loss {:.4} -> {:.4} over {} epochs",
        outcome.history[0],
        outcome.history.last().expect("at least one epoch"),
        outcome.history.len()
    ));
    Ok(())
}

fn labelled_records(net: &RoadNetwork, split: Option<&SplitAssignment>) -> (Vec<usize>, Vec<stressgraph::FeatureRecord>, Vec<LtsLabel>) {
    let mut idx = Vec::new();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, seg) in net.segments().iter().enumerate() {
        let in_train = split.is_none_or(|s| s.role(&seg.id) == Some(SplitRole::Train));
        if let (true, Some(l)) = (in_train, seg.lts) {
            idx.push(i);
            x.push(seg.features);
            y.push(l);
        }
    }
    (idx, x, y)
}

fn run_fit_cart(ctx: &Ctx, a: &CartArgs) -> Result<()> {
    let net = read_net(&a.data)?;
    let split = a.split.as_deref().map(read_split).transpose()?;
    let (_, x, y) = labelled_records(&net, split.as_ref());
    if x.is_empty() {
        bail!("{} has no labelled training segments", a.data.display());
    }
    let mut grid: GridSpec = match &a.grid {
        Some(path) => read_json(path)?,
        None => GridSpec::default(),
    };
    if let Some(k) = a.folds {
        grid.folds = k;
    }
    let result = cart::grid_search(&x, &y, &grid, ctx.seed)?;
    let tree = cart::fit(&x, &y, &result.best)?;
    write_json(ctx, "tree.json", &tree)?;
    result.write_csv(ctx.create("cv.csv")?)?;
    ctx.say(format!(
        "best: {} depth {} min_samples_split {} (cv accuracy {:.4}); {} leaves",
        result.best.criterion,
        result.best.max_depth,
        result.best.min_samples_split.value(),
        result.best_accuracy,
        tree.n_leaves()
    ));
    Ok(())
}

fn parse_transition_arg(arg: &str) -> Result<(Feature, PathBuf)> {
    match arg.split_once('=') {
        Some((f, p)) => Ok((f.parse::<Feature>()?, PathBuf::from(p))),
        None => Ok((Feature::Speed, PathBuf::from(arg))),
    }
}

fn run_predict(ctx: &Ctx, a: &PredictArgs) -> Result<()> {
    let net = read_net(&a.network)?;
    let scenario = Scenario::new(a.scenario)?;
    let embeddings = read_embeddings_aligned(&net, &a.embeddings)?;
    let tree: DecisionTree = read_json(&a.tree)?;

    let mut inputs = FeatureInputs {
        max_iters: a.max_iters,
        ..FeatureInputs::default()
    };
    if let Some(dir) = &a.feature_preds {
        for feature in Feature::ALL {
            let path = dir.join(format!("{}.csv", feature.name()));
            if path.is_file() {
                inputs.predictions.insert(feature, read_dists_aligned(&net, &path)?);
            }
        }
    }
    for arg in &a.transitions {
        let (feature, path) = parse_transition_arg(arg)?;
        let t = TransitionMatrix::read_csv(open(&path)?).with_context(|| format!("reading {}", path.display()))?;
        inputs.transitions.insert(feature, t);
    }

    let fusion = match &a.fusion {
        Some(path) => read_json::<FusionModel>(path)?,
        None => {
            let Some(split_path) = &a.split else {
                bail!("--split is required to train a fusion head when --fusion is not given");
            };
            let split = read_split(split_path)?;
            let (idx, _, y) = labelled_records(&net, Some(&split));
            if idx.is_empty() {
                bail!("no labelled train segments to fit the fusion head");
            }
            // Leaves come from the same feature route used at inference time.
            let scaffold = run_autolts(&net, scenario, &inputs, embeddings.view(), &tree, &FusionModel::zeros(embeddings.ncols()))?;
            let leaves: Vec<_> = idx.iter().map(|&i| scaffold.leaves[i].clone()).collect();
            let emb = embeddings.select(ndarray::Axis(0), &idx);
            let config = FusionConfig {
                epochs: a.fusion_epochs,
                learning_rate: a.fusion_lr,
                seed: ctx.seed,
                ..FusionConfig::default()
            };
            let (model, history) = train_fusion(emb.view(), &leaves, &y, &config)?;
            log::info!("fusion loss {:.4} -> {:.4}", history[0], history.last().expect("non-empty"));
            write_json(ctx, "fusion.json", &model)?;
            model
        }
    };

    let out = run_autolts(&net, scenario, &inputs, embeddings.view(), &tree, &fusion)?;
    let ids = ids_of(&net);
    io::write_lts_predictions(ctx.create("predictions.csv")?, &ids, &out.labels, &out.probs)?;
    let leaf_labels: Vec<LtsLabel> = out
        .leaves
        .iter()
        .map(|l| LtsLabel::from_index(l.argmax()).expect("four classes"))
        .collect();
    io::write_lts_predictions(ctx.create("leaf_baseline.csv")?, &ids, &leaf_labels, &out.leaves)?;
    ctx.say(format!("predicted {} segments under scenario {}", net.len(), scenario.id()));
    Ok(())
}

fn run_eval(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let truth = io::read_labels(open(&a.truth)?).with_context(|| format!("reading {}", a.truth.display()))?;
    let pred: BTreeMap<String, u32> = io::read_labels(open(&a.pred)?)
        .with_context(|| format!("reading {}", a.pred.display()))?
        .into_iter()
        .collect();
    let split = a.split.as_deref().map(read_split).transpose()?;
    let role = match a.role.as_str() {
        "train" => SplitRole::Train,
        "validation" => SplitRole::Validation,
        _ => SplitRole::Test,
    };
    let (mut t, mut p) = (Vec::new(), Vec::new());
    for (id, y) in truth {
        if split.as_ref().is_some_and(|s| s.role(&id) != Some(role)) {
            continue;
        }
        let y_hat = *pred.get(&id).ok_or_else(|| anyhow!("no prediction for segment {id:?}"))?;
        t.push(LtsLabel::new(y as i64).with_context(|| format!("truth for {id:?}"))?);
        p.push(LtsLabel::new(y_hat as i64).with_context(|| format!("prediction for {id:?}"))?);
    }
    let report = evaluate(&t, &p)?;
    write_json(ctx, "eval.json", &report)?;
    ctx.say(report.to_string().trim_end());
    Ok(())
}

fn run_gen(ctx: &Ctx, a: &GenArgs) -> Result<()> {
    let topology = match a.topology.as_str() {
        "random" => Topology::Random { avg_degree: a.avg_degree },
        other => other.parse::<Topology>()?,
    };
    let kernel = a
        .kernel
        .as_deref()
        .map(|p| TransitionMatrix::read_csv(open(p)?).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let base = match a.preset {
        Some(_) => GenConfig::toronto(a.n, ctx.seed),
        None => GenConfig::default(),
    };
    let config = GenConfig {
        topology,
        n: a.n,
        kernel,
        kernel_persistence: a.persistence.unwrap_or(base.kernel_persistence),
        noise: a.noise,
        flips: !a.no_flips,
        embed_dim: a.embed_dim,
        embed_separation: a.embed_separation,
        embed_noise: a.embed_noise,
        regions: a.regions,
        seed: ctx.seed,
        ..base
    };
    let synth = generate(&config)?;
    synth.write_dir(&ctx.out_dir)?;
    let mut counts = vec![0usize; synth.kernel.k()];
    for &l in &synth.labels {
        counts[l] += 1;
    }
    let shares: Vec<String> = counts
        .iter()
        .map(|&c| format!("{:.2}", 100.0 * c as f64 / synth.labels.len() as f64))
        .collect();
    ctx.say(format!("generated {} segments; label shares % [{}]", synth.labels.len(), shares.join(", ")));
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Ok(v) = std::env::var("STRESSGRAPH_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow!("STRESSGRAPH_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring thread pool")?;
    }
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("cannot create {}", cli.out_dir.display()))?;
    let ctx = Ctx {
        seed: cli.seed,
        quiet: cli.quiet,
        out_dir: cli.out_dir.clone(),
    };
    let name = serde_json::to_value(&cli.command)?
        .as_object()
        .and_then(|o| o.keys().next().cloned())
        .unwrap_or_else(|| "run".into());
    write_json(&ctx, &format!("{name}.config.json"), cli)?;
    match &cli.command {
        Command::Lts(a) => run_lts(&ctx, a),
        Command::Smooth(a) => run_smooth(&ctx, a),
        Command::TrainOrdcon(a) => run_train(&ctx, a),
        Command::FitCart(a) => run_fit_cart(&ctx, a),
        Command::Predict(a) => run_predict(&ctx, a),
        Command::Eval(a) => run_eval(&ctx, a),
        Command::Gen(a) => run_gen(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet { "error" } else { "warn" }))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
