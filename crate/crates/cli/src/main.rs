mod settings;

use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use slotfill::eval::evaluate;
use slotfill::featurizer::featurize_words;
use slotfill::nn::{fit_with, load_model, save_model};
use slotfill::synth::{gen_synthetic, SynthConfig};
use slotfill::{
    bundle, parse_corpus, Corpus, FeatureRegistry, GazetteerBundle, LabelInventory, Model,
    NetConfig, Sentence, Token, Variant, Vocabulary,
};

use settings::Settings;

#[derive(Parser)]
#[command(
    name = "slotfill",
    version,
    about = "Slot filling with gazetteer feature vectors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tagger and write the model file
    Train(TrainArgs),
    /// Score a model on a labeled corpus
    Eval(EvalArgs),
    /// Label tokenized sentences
    Tag(TagArgs),
    /// Print feature vectors for words
    Featurize(FeaturizeArgs),
    /// Generate a synthetic corpus with gazetteers
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl FromStr for Switch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, false).map_err(|_| format!("expected on|off, found {s:?}"))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Flat key=value file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Directory with features.tsv and per-feature gazetteer files
    #[arg(long)]
    gazetteers: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    features: Option<Switch>,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    filter_width: Option<usize>,
    #[arg(long)]
    context_length: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Training words seen at most this often map to UNK
    #[arg(long)]
    unk_threshold: Option<usize>,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    report: ReportFormat,
}

#[derive(clap::Args)]
struct TagArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// One token per line, optional second column ignored; stdin if absent
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(clap::Args)]
struct FeaturizeArgs {
    #[arg(long, required_unless_present = "input")]
    word: Vec<String>,
    /// Words in the first column, one per line
    #[arg(long, conflicts_with = "word")]
    input: Option<PathBuf>,
    /// Gazetteer directory; the shipped ATIS-compatible bundle if absent
    #[arg(long, requires = "labels")]
    gazetteers: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Generator config (TOML); the shipped benchmark if absent
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: slotfill::NetError| e.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_labels(path: &Path) -> Result<LabelInventory> {
    read(path)?
        .parse()
        .with_context(|| format!("parsing labels {}", path.display()))
}

fn load_corpus(path: &Path, inventory: &LabelInventory) -> Result<Corpus> {
    parse_corpus(&read(path)?, inventory)
        .with_context(|| format!("parsing corpus {}", path.display()))
}

/// Keyword sets built at training time live next to the model.
fn registry_path(model: &Path) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(".features.tsv");
    PathBuf::from(name)
}

fn model_registry(
    model: &Model,
    model_path: &Path,
    inventory: &LabelInventory,
) -> Result<Option<FeatureRegistry>> {
    if model.config().num_labels != inventory.len() {
        bail!(
            "label inventory has {} labels but the model was trained with {}",
            inventory.len(),
            model.config().num_labels
        );
    }
    if !model.config().use_features {
        return Ok(None);
    }
    let path = registry_path(model_path);
    let registry = FeatureRegistry::from_tsv(&read(&path)?, inventory)
        .with_context(|| format!("parsing feature registry {}", path.display()))?;
    Ok(Some(registry))
}

fn train(args: TrainArgs) -> Result<()> {
    let settings = match &args.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let required = |flag: Option<PathBuf>, key: &str| -> Result<PathBuf> {
        settings
            .pick(flag, key)?
            .with_context(|| format!("--{key} is required"))
    };
    let corpus_path = required(args.corpus, "corpus")?;
    let labels_path = required(args.labels, "labels")?;
    let out = required(args.out, "out")?;
    let features = settings
        .pick(args.features, "features")?
        .unwrap_or(Switch::On)
        == Switch::On;

    let mut config = NetConfig::new(0).with_features(features);
    macro_rules! set {
        ($field:ident, $flag:expr, $key:literal) => {
            if let Some(v) = settings.pick($flag, $key)? {
                config.$field = v;
            }
        };
    }
    set!(variant, args.variant, "variant");
    set!(seed, args.seed, "seed");
    set!(embed_dim, args.embed_dim, "embed-dim");
    set!(num_filters, args.filters, "filters");
    set!(filter_width, args.filter_width, "filter-width");
    set!(context_length, args.context_length, "context-length");
    set!(epochs, args.epochs, "epochs");
    set!(learning_rate, args.lr, "lr");
    set!(batch_size, args.batch_size, "batch-size");
    let unk_threshold = settings
        .pick(args.unk_threshold, "unk-threshold")?
        .unwrap_or(1);

    let inventory = load_labels(&labels_path)?;
    config.num_labels = inventory.len();
    let corpus = load_corpus(&corpus_path, &inventory)?;
    let registry = if features {
        let dir = required(args.gazetteers, "gazetteers")
            .context("--features on needs a gazetteer directory")?;
        let bundle = GazetteerBundle::load(&dir, &inventory)
            .with_context(|| format!("loading gazetteers from {}", dir.display()))?;
        Some(bundle.build(Some(&corpus))?)
    } else {
        None
    };

    let stats = corpus.stats();
    let vocab = Vocabulary::build(&corpus, unk_threshold);
    let words = vocab.len();
    let model = Model::init(config, vocab)?;
    eprintln!(
        "training {} on {} sentences, {} tokens, vocabulary {} (+2 reserved), features {}",
        model.config().variant,
        stats.sentences,
        stats.tokens,
        words,
        if features { "on" } else { "off" }
    );
    let (model, _) = fit_with(model, &corpus, registry.as_ref(), |epoch, loss| {
        eprintln!("epoch {epoch} loss {loss:.6}");
    })?;

    save_model(&model, &out).with_context(|| format!("writing {}", out.display()))?;
    if let Some(registry) = &registry {
        let path = registry_path(&out);
        fs::write(&path, registry.to_tsv())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let model =
        load_model(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let inventory = load_labels(&args.labels)?;
    let registry = model_registry(&model, &args.model, &inventory)?;
    let corpus = load_corpus(&args.corpus, &inventory)?;
    let report = evaluate(&model, registry.as_ref(), &corpus, inventory.outside())?;
    let text = match args.report {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Json => report.to_json() + "\n",
    };
    io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

/// Blank-line separated blocks of `token [label]` lines.
fn parse_tag_input(text: &str, inventory: &LabelInventory) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => {
                if !current.is_empty() {
                    sentences.push(Sentence::new(std::mem::take(&mut current))?);
                }
            }
            [token] | [token, _] => current.push(Token::new(*token, inventory.outside())),
            _ => bail!(
                "line {}: expected `token` or `token label`, found {line:?}",
                i + 1
            ),
        }
    }
    if !current.is_empty() {
        sentences.push(Sentence::new(current)?);
    }
    Ok(sentences)
}

fn tag(args: TagArgs) -> Result<()> {
    let model =
        load_model(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let inventory = load_labels(&args.labels)?;
    let registry = model_registry(&model, &args.model, &inventory)?;
    let text = match &args.input {
        Some(path) => read(path)?,
        None => {
            let mut buf = String::new();
            io::stdin()
                .read_to_string(&mut buf)
                .context("reading standard input")?;
            buf
        }
    };
    let sentences = parse_tag_input(&text, &inventory)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for (n, sentence) in sentences.iter().enumerate() {
        if n > 0 {
            writeln!(out)?;
        }
        for (token, pred) in sentence
            .tokens()
            .iter()
            .zip(model.predict(sentence, registry.as_ref())?)
        {
            let label = inventory
                .name(pred.label)
                .expect("model labels fit the inventory");
            writeln!(out, "{}\t{label}", token.surface)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn featurize(args: FeaturizeArgs) -> Result<()> {
    let registry = match &args.gazetteers {
        Some(dir) => {
            let inventory = load_labels(args.labels.as_deref().expect("clap enforces --labels"))?;
            GazetteerBundle::load(dir, &inventory)
                .with_context(|| format!("loading gazetteers from {}", dir.display()))?
                .build(None)?
        }
        None => bundle::atis_registry(),
    };
    let words: Vec<String> = match &args.input {
        Some(path) => read(path)?
            .lines()
            .filter_map(|l| l.split_whitespace().next().map(str::to_string))
            .collect(),
        None => args.word,
    };
    let vectors = featurize_words(&registry, words.iter().map(|w| w.as_str()));
    let mut out = BufWriter::new(io::stdout().lock());
    for (word, v) in words.iter().zip(vectors) {
        writeln!(out, "{word}\t{}", v.to_csv())?;
    }
    out.flush()?;
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => SynthConfig::parse(&read(path)?)
            .with_context(|| format!("parsing generator config {}", path.display()))?,
        None => SynthConfig::default_benchmark(),
    };
    let inventory = bundle::atis_labels();
    let data = gen_synthetic(&config, args.seed, &inventory, &bundle::atis_feature_spec())?;
    data.write(&args.out, &inventory, bundle::ATIS_MANIFEST)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "wrote {} train and {} test sentences to {}",
        data.train.stats().sentences,
        data.test.stats().sentences,
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Tag(a) => tag(a),
        Command::Featurize(a) => featurize(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_input_blocks() {
        let inv = bundle::atis_labels();
        let s = parse_tag_input("\n\nfrom O\nboston\n\n\nto\n", &inv).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].len(), 2);
        assert!(parse_tag_input("", &inv).unwrap().is_empty());
        let e = parse_tag_input("a\nb c d\n", &inv).unwrap_err();
        assert!(e.to_string().starts_with("line 2:"), "{e}");
    }

    #[test]
    fn sidecar_sits_next_to_model() {
        assert_eq!(
            registry_path(Path::new("out/m.bin")),
            Path::new("out/m.bin.features.tsv")
        );
    }

    #[test]
    fn switch_values() {
        assert!("on".parse::<Switch>().unwrap() == Switch::On);
        assert!("maybe".parse::<Switch>().is_err());
    }
}
