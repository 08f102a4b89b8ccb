use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::Path;

use anyhow::{anyhow, Context as _};

use confusim::cn::{align_nbest_to_cn, parse_confusion_networks, parse_nbest, ConfusionNetwork};
use confusim::corpus::{corrupt_dataset, parse_dialogues, write_records, CorruptionPolicy};
use confusim::edit_model::{
    estimate_model, extract_confusion_pairs, load_model, save_model, Context, Glyph, RewriteModel,
};
use confusim::kb::{
    apply_overrides, default_stopwords, generate_pair_dataset, initial_clusters, merge_clusters_observed,
    parse_clusters, parse_kb, parse_overrides, propose_body_merges, write_clusters, write_pairs, Clustering,
    ConstantJudge, JaccardJudge, KnowledgeEntry, Label, MergeConfig, PairJudge, Stopwords,
};
use confusim::simulator::{corrupt_word, is_eligible, rng_from_seed};

use crate::files::{check_input, check_output, expand_inputs, read_text, write_atomic};
use crate::{
    BuildArgs, ClusterInitArgs, ClusterMergeArgs, ClusterPairsArgs, CorruptArgs, Failure, InputFormat, KbArgs,
    SimulateArgs, StatsArgs,
};

type CmdResult = Result<(), Failure>;

/// Sausage files open with one of their header keywords; anything else is
/// read as an N-best list.
fn detect_format(text: &str) -> InputFormat {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let keyword = first.split_whitespace().next().unwrap_or("");
    if matches!(keyword, "align" | "name" | "numaligns" | "posterior") {
        InputFormat::Sausage
    } else {
        InputFormat::Nbest
    }
}

fn networks_from(path: &Path, text: &str, format: InputFormat) -> anyhow::Result<Vec<ConfusionNetwork>> {
    let format = match format {
        InputFormat::Auto => detect_format(text),
        f => f,
    };
    let nets = match format {
        InputFormat::Sausage => parse_confusion_networks(text),
        _ => parse_nbest(text).map(|lists| lists.iter().map(align_nbest_to_cn).collect()),
    };
    nets.with_context(|| format!("parsing {}", path.display()))
}

pub fn build(args: &BuildArgs) -> CmdResult {
    let inputs = expand_inputs(&args.inputs)?;
    check_output(&args.output)?;
    if args.position_cap == 0 {
        return Err(Failure::Usage("--position-cap must be at least 1".into()));
    }
    let mut pairs = Vec::new();
    let mut networks = 0;
    for path in &inputs {
        let text = read_text(path)?;
        for cn in networks_from(path, &text, args.format)? {
            networks += 1;
            pairs.extend(extract_confusion_pairs(&cn));
        }
    }
    if pairs.is_empty() {
        return Err(anyhow!(
            "no confusion pairs in {} network(s); a pair needs a slot with two different \
             alphabetic words, so supply N-best lists with more than one distinct hypothesis \
             or confusion networks with competing words",
            networks
        )
        .into());
    }
    let model = estimate_model(&pairs, args.position_cap).map_err(anyhow::Error::from)?;
    write_atomic(&args.output, |w| Ok(save_model(&model, w)?))?;
    eprintln!(
        "{} file(s), {} network(s), {} confusion pairs; alphabet {}, {} replacement and {} insertion contexts",
        inputs.len(),
        networks,
        pairs.len(),
        model.alphabet().len(),
        model.replace_counts().len(),
        model.insert_counts().len()
    );
    Ok(())
}

fn read_model(path: &Path) -> Result<RewriteModel, Failure> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let model = load_model(BufReader::new(file)).with_context(|| format!("loading {}", path.display()))?;
    if model.is_empty() {
        return Err(anyhow!("{} holds an empty model", path.display()).into());
    }
    Ok(model)
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    check_input(&args.model)?;
    if !is_eligible(&args.word) {
        return Err(Failure::Usage(format!(
            "`{}` cannot be corrupted: words need at least two letters and nothing else",
            args.word
        )));
    }
    let model = read_model(&args.model)?;
    let mut rng = rng_from_seed(args.seed);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for _ in 0..args.n {
        let (noisy, trace) = corrupt_word(&args.word, &model, &mut rng).map_err(anyhow::Error::from)?;
        let line = if args.verbose {
            format!("{noisy}\t{trace}")
        } else {
            noisy
        };
        writeln!(out, "{line}").context("writing to stdout")?;
    }
    Ok(())
}

pub fn corrupt(args: &CorruptArgs) -> CmdResult {
    check_input(&args.model)?;
    check_input(&args.input)?;
    check_output(&args.output)?;
    if args.threads == Some(0) {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    let model = read_model(&args.model)?;
    let dialogues =
        parse_dialogues(&read_text(&args.input)?).with_context(|| format!("reading {}", args.input.display()))?;
    let policy = CorruptionPolicy {
        user_turns_only: !args.include_system_turns,
        last_user_turn_only: !args.all_user_turns,
        max_corrupted_words: args.max_words,
    };
    let records = corrupt_dataset(&dialogues, &model, args.seed, &policy, args.threads).map_err(anyhow::Error::from)?;
    write_atomic(&args.output, |w| Ok(write_records(&records, w)?))?;
    let corrupted: usize = records.iter().map(|r| r.corrections.len()).sum();
    eprintln!(
        "{} dialogues, {} records, {} corrupted tokens",
        dialogues.len(),
        records.len(),
        corrupted
    );
    Ok(())
}

fn read_stopwords(path: Option<&Path>) -> Result<Stopwords, Failure> {
    match path {
        None => Ok(default_stopwords()),
        Some(p) => Ok(read_text(p)?
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect()),
    }
}

fn check_kb_inputs(kb: &KbArgs) -> CmdResult {
    check_input(&kb.kb)?;
    if let Some(p) = &kb.stopwords {
        check_input(p)?;
    }
    Ok(())
}

fn read_kb(kb: &KbArgs) -> Result<(Vec<KnowledgeEntry>, Stopwords), Failure> {
    let entries = parse_kb(&read_text(&kb.kb)?).with_context(|| format!("reading {}", kb.kb.display()))?;
    Ok((entries, read_stopwords(kb.stopwords.as_deref())?))
}

fn clusters_for(path: Option<&Path>, entries: &[KnowledgeEntry], stopwords: &Stopwords) -> Result<Clustering, Failure> {
    let clustering = match path {
        Some(p) => parse_clusters(&read_text(p)?).with_context(|| format!("reading {}", p.display()))?,
        None => initial_clusters(entries, stopwords).map_err(anyhow::Error::from)?,
    };
    clustering
        .check_partition(entries)
        .context("clusters do not match the knowledge base")?;
    Ok(clustering)
}

pub fn cluster_init(args: &ClusterInitArgs) -> CmdResult {
    check_kb_inputs(&args.kb)?;
    check_output(&args.output)?;
    let (entries, stopwords) = read_kb(&args.kb)?;
    let clustering = initial_clusters(&entries, &stopwords).map_err(anyhow::Error::from)?;
    write_atomic(&args.output, |w| Ok(write_clusters(&clustering, w)?))?;
    eprintln!("{} entries, {} clusters", entries.len(), clustering.len());
    Ok(())
}

pub fn cluster_pairs(args: &ClusterPairsArgs) -> CmdResult {
    check_kb_inputs(&args.kb)?;
    if let Some(p) = &args.clusters {
        check_input(p)?;
    }
    check_output(&args.output)?;
    let (entries, stopwords) = read_kb(&args.kb)?;
    let clustering = clusters_for(args.clusters.as_deref(), &entries, &stopwords)?;
    let ds =
        generate_pair_dataset(&entries, &clustering, &mut rng_from_seed(args.seed)).map_err(anyhow::Error::from)?;
    write_atomic(&args.output, |w| Ok(write_pairs(&ds.examples, w)?))?;
    let negatives = ds.count(Label::Negative);
    eprintln!("{} positive, {} negative pairs", ds.count(Label::Positive), negatives);
    if negatives == 0 {
        eprintln!("warning: no negative pairs; every entity has a single distinct title");
    } else if !ds.without_negative.is_empty() {
        eprintln!("note: {} entries had no title to swap in", ds.without_negative.len());
    }
    Ok(())
}

fn parse_oracle(name: &str, stopwords: &Stopwords) -> Result<Box<dyn PairJudge>, Failure> {
    if name == "jaccard" {
        return Ok(Box::new(JaccardJudge::new(stopwords.clone())));
    }
    if let Some(v) = name.strip_prefix("constant:") {
        if let Ok(x) = v.parse::<f64>() {
            if (0.0..=1.0).contains(&x) {
                return Ok(Box::new(ConstantJudge(x)));
            }
        }
    }
    Err(Failure::Usage(format!(
        "unknown oracle `{name}`; use `jaccard` or `constant:<score in [0,1]>`"
    )))
}

pub fn cluster_merge(args: &ClusterMergeArgs) -> CmdResult {
    check_kb_inputs(&args.kb)?;
    for p in [&args.clusters, &args.overrides].into_iter().flatten() {
        check_input(p)?;
    }
    check_output(&args.output)?;
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(Failure::Usage("--threshold must lie in [0, 1]".into()));
    }
    if !(args.majority > 0.0 && args.majority <= 1.0) {
        return Err(Failure::Usage("--majority must lie in (0, 1]".into()));
    }
    if args.threads == Some(0) {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    let (entries, stopwords) = read_kb(&args.kb)?;
    let judge = parse_oracle(&args.oracle, &stopwords)?;
    let overrides = match &args.overrides {
        Some(p) => parse_overrides(&read_text(p)?).with_context(|| format!("reading {}", p.display()))?,
        None => Vec::new(),
    };
    let start = clusters_for(args.clusters.as_deref(), &entries, &stopwords)?;
    let config = MergeConfig {
        positive_threshold: args.threshold,
        majority_fraction: args.majority,
        proposals: if args.no_body_proposals {
            Default::default()
        } else {
            propose_body_merges(&start, &entries, &stopwords)
        },
        threads: args.threads,
    };
    eprintln!("start: {} clusters", start.len());
    let outcome = merge_clusters_observed(&start, &entries, judge.as_ref(), &config, |r, _| {
        eprintln!(
            "round {}: {} -> {} clusters ({} merges)",
            r.round,
            r.clusters_before,
            r.clusters_after,
            r.merges.len()
        );
    })
    .map_err(|f| anyhow!("{f}"))?;
    let clustering = if overrides.is_empty() {
        outcome.clustering
    } else {
        let c = apply_overrides(&outcome.clustering, &overrides).map_err(anyhow::Error::from)?;
        eprintln!("{} overrides applied: {} clusters", overrides.len(), c.len());
        c
    };
    write_atomic(&args.output, |w| Ok(write_clusters(&clustering, w)?))?;
    Ok(())
}

fn context_label(c: Context) -> String {
    match c {
        Context::Begin => "^".into(),
        Context::Letter(l) => l.to_string(),
    }
}

fn top<T: Copy>(row: &BTreeMap<T, u64>, keep: impl Fn(&T) -> bool, k: usize) -> (u64, Vec<(T, u64)>) {
    let mut items: Vec<(T, u64)> = row
        .iter()
        .filter(|(t, c)| keep(t) && **c > 0)
        .map(|(t, c)| (*t, *c))
        .collect();
    let total = items.iter().map(|(_, c)| c).sum();
    // stable sort keeps glyph order among equal counts
    items.sort_by_key(|(_, c)| std::cmp::Reverse(*c));
    items.truncate(k);
    (total, items)
}

pub fn stats(args: &StatsArgs) -> CmdResult {
    check_input(&args.model)?;
    let model = read_model(&args.model)?;
    let mut out = String::new();
    let alphabet: String = model.alphabet().iter().collect();
    let c = model.constants();
    out += &format!("alphabet ({}): {}\n", alphabet.chars().count(), alphabet);
    out += &format!("position cap: {}\n", model.position_cap());
    out += &format!(
        "edit counts {:?}, replacement {}, insertion {}\n",
        c.edit_counts, c.p_replacement, c.p_insertion
    );
    out += &format!(
        "contexts: {} replacement, {} insertion\n",
        model.replace_counts().len(),
        model.insert_counts().len()
    );

    let (mut rewrites, mut deletions) = (0u64, 0u64);
    out += "\nreplacements\n";
    for (&(s, bin), row) in model.replace_counts() {
        let (total, items) = top(row, |g| *g != Glyph::Letter(s), args.top);
        if total == 0 {
            continue;
        }
        rewrites += total;
        deletions += row.get(&Glyph::Star).copied().unwrap_or(0);
        let shown: Vec<String> = items
            .iter()
            .map(|(g, n)| format!("Pr({g}|{s},{bin})={:.4}", *n as f64 / total as f64))
            .collect();
        out += &format!("  {s},{bin} [{total}] {}\n", shown.join(" "));
    }
    out += "\ninsertions\n";
    for (&(ctx, bin), row) in model.insert_counts() {
        let (total, items) = top(row, |_| true, args.top);
        if total == 0 {
            continue;
        }
        let label = context_label(ctx);
        let shown: Vec<String> = items
            .iter()
            .map(|(l, n)| format!("Pr(+{l}|{label},{bin})={:.4}", *n as f64 / total as f64))
            .collect();
        out += &format!("  {label},{bin} [{total}] {}\n", shown.join(" "));
    }
    let mass = if rewrites == 0 {
        0.0
    } else {
        deletions as f64 / rewrites as f64
    };
    out += &format!("\nmass on *: {mass:.4} of {rewrites} observed replacements\n");
    io::stdout().write_all(out.as_bytes()).context("writing to stdout")?;
    Ok(())
}
