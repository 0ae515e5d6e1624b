//! `radapt`: experiment driver for zero-shot relation detection with a
//! representation adapter. Subcommands cover corpus generation, the
//! balanced re-split, training the model grid, evaluation, end-to-end QA,
//! the relation-count ablation, PCA export, and cross validation.

use clap::{Args, Parser, Subcommand};
use relation_adapter::checkpoint::{load_model, save_model};
use relation_adapter::config::RunConfig;
use relation_adapter::dataspace::{
    balanced_resplit, generate_synthetic_corpus, load_aliases, load_dataset, load_embeddings,
    load_kg, load_split, save_aliases, save_dataset, save_embeddings, save_kg, save_samples,
    DatasetSplit, KnowledgeGraph, RelationVocabulary,
};
use relation_adapter::error::{Error, Result};
use relation_adapter::evaluation::{
    cross_validate, evaluate_model, format_mean_std, pca_project, relation_count_ablation,
};
use relation_adapter::kbqa::{answer, kbqa_accuracy, Answer, TripleIndex};
use relation_adapter::training::{train_variant, ModelVariant, TrainedModel};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "radapt", about = "Zero-shot relation detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat KEY=VALUE config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to runs/<cmd>-s<seed>-<hash>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra KEY=VALUE overrides, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (KG, aliases, samples, embeddings).
    GenSynth(Common),
    /// Re-split a corpus into the five balanced sets.
    Resplit(Common),
    /// Train one model variant.
    Train {
        #[command(flatten)]
        common: Common,
        /// Model variant; overrides the config file.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Evaluate a checkpoint: micro/macro/seen-rate table.
    Eval(Common),
    /// End-to-end QA over the KG with exact-match linking.
    Kbqa(Common),
    /// Relation-count ablation of baseline vs final variant.
    Ablate(Common),
    /// Export 2-D PCA of relation representations.
    Pca(Common),
    /// Repeated-resplit cross validation.
    Crossval(Common),
}

fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(),
    };
    for pair in &common.set {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {:?}", pair)))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = common.seed {
        config.set("seed", &seed.to_string())?;
    }
    if let Some(out) = &common.out {
        config.set("out", &out.display().to_string())?;
    }
    Ok(config)
}

/// Resolve the output directory (content-addressed unless overridden),
/// create it, and echo the resolved config for provenance.
fn prepare_out_dir(cmd: &str, config: &RunConfig) -> Result<PathBuf> {
    let dir = match config.get("out") {
        Some(out) => PathBuf::from(out),
        None => PathBuf::from("runs").join(format!(
            "{}-s{}-{}",
            cmd,
            config.seed()?,
            config.content_hash()
        )),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let echo = dir.join("config.txt");
    std::fs::write(&echo, config.render()).map_err(|e| Error::io(&echo, e))?;
    Ok(dir)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn corpus_dir(config: &RunConfig) -> Result<PathBuf> {
    config.get_path("paths.corpus")
}

fn load_corpus_kg(dir: &Path) -> Result<KnowledgeGraph> {
    Ok(KnowledgeGraph {
        triples: load_kg(&dir.join("kg.tsv"))?,
        aliases: load_aliases(&dir.join("aliases.tsv"))?,
    })
}

fn variant_from(config: &RunConfig, flag: &Option<String>) -> Result<ModelVariant> {
    let name = flag
        .as_deref()
        .or_else(|| config.get("variant"))
        .unwrap_or("adversarial-adapter-recon");
    ModelVariant::parse(name)
}

fn cmd_gen_synth(config: &RunConfig) -> Result<()> {
    let out = prepare_out_dir("gen-synth", config)?;
    let corpus = generate_synthetic_corpus(&config.synth_config()?, config.seed()?)?;
    save_kg(&corpus.kg.triples, &out.join("kg.tsv"))?;
    save_aliases(&corpus.kg.aliases, &out.join("aliases.tsv"))?;
    save_samples(&corpus.samples, &out.join("samples.tsv"))?;
    save_embeddings(&corpus.embeddings, &out.join("embeddings.txt"))?;
    println!("wrote corpus to {}", out.display());
    Ok(())
}

fn split_report(split: &DatasetSplit) -> String {
    let vocab = RelationVocabulary::from_samples(split.parts().iter().flat_map(|(_, v)| v.iter()));
    let (seen, unseen) = vocab.seen_unseen(split);
    let mut report = String::new();
    let _ = writeln!(report, "set\tsamples\trelations");
    for (name, part) in split.parts() {
        let rels = RelationVocabulary::from_samples(part.iter()).len();
        let _ = writeln!(report, "{}\t{}\t{}", name, part.len(), rels);
    }
    let _ = writeln!(report, "total\t{}\t{}", split.total(), vocab.len());
    let _ = writeln!(report, "seen-relations\t{}", seen.len());
    let _ = writeln!(report, "unseen-relations\t{}", unseen.len());
    report
}

fn cmd_resplit(config: &RunConfig) -> Result<()> {
    let out = prepare_out_dir("resplit", config)?;
    let samples = load_dataset(&corpus_dir(config)?.join("samples.tsv"))?;
    let split = balanced_resplit(
        &samples,
        config.seed()?,
        &config.resplit_targets()?,
        config.resplit_tolerance()?,
    )?;
    split.verify_invariants()?;
    save_dataset(&split, &out)?;
    write_file(&out.join("report.txt"), &split_report(&split))?;
    println!("wrote split to {}", out.display());
    Ok(())
}

fn train_log_csv(model: &TrainedModel) -> String {
    let mut csv = String::from("epoch,loss,dev_seen_acc,dev_unseen_acc\n");
    for e in &model.log {
        let _ = writeln!(csv, "{},{},{},{}", e.epoch, e.loss, e.dev_seen_acc, e.dev_unseen_acc);
    }
    csv
}

fn cmd_train(config: &RunConfig, variant_flag: &Option<String>) -> Result<()> {
    let out = prepare_out_dir("train", config)?;
    let variant = variant_from(config, variant_flag)?;
    let corpus = corpus_dir(config)?;
    let split = load_split(&config.get_path("paths.split")?)?;
    let kg = load_corpus_kg(&corpus)?;
    let embeddings = load_embeddings(&corpus.join("embeddings.txt"))?;
    let baseline = match config.get("paths.baseline_checkpoint") {
        Some(path) => Some(load_model(Path::new(path))?),
        None => None,
    };
    let model = train_variant(
        &split,
        &kg,
        &embeddings,
        variant,
        &config.dims()?,
        &config.train_config()?,
        baseline,
    )?;
    save_model(&model, &out.join("model.json"))?;
    write_file(&out.join("train_log.csv"), &train_log_csv(&model))?;
    println!("trained {} → {}", variant.as_str(), out.display());
    Ok(())
}

fn metrics_csv(metrics: &BTreeMap<String, f64>, stds: Option<&BTreeMap<String, f64>>) -> String {
    let mut csv = String::from("split,metric,mean,std\n");
    for (key, value) in metrics {
        let (split, metric) = key.split_once('/').unwrap_or(("all", key));
        let std = stds.and_then(|s| s.get(key)).copied().unwrap_or(0.0);
        let _ = writeln!(csv, "{},{},{},{}", split, metric, value, std);
    }
    csv
}

fn cmd_eval(config: &RunConfig) -> Result<()> {
    let out = prepare_out_dir("eval", config)?;
    let model = load_model(&config.get_path("paths.checkpoint")?)?;
    let split = load_split(&config.get_path("paths.split")?)?;
    let kg = load_corpus_kg(&corpus_dir(config)?)?;
    let metrics = evaluate_model(&model, &split, &kg)?;
    write_file(&out.join("metrics.csv"), &metrics_csv(&metrics, None))?;
    println!("wrote metrics to {}", out.display());
    Ok(())
}

fn cmd_kbqa(config: &RunConfig) -> Result<()> {
    let out = prepare_out_dir("kbqa", config)?;
    let model = load_model(&config.get_path("paths.checkpoint")?)?;
    let split = load_split(&config.get_path("paths.split")?)?;
    let kg = load_corpus_kg(&corpus_dir(config)?)?;
    let index = TripleIndex::build(&kg, &model);
    let rel_vecs = model.relation_vecs()?;

    let questions: Vec<_> = split
        .test_seen
        .iter()
        .chain(split.test_unseen.iter())
        .collect();
    let mut answers_tsv = String::new();
    let mut predictions = Vec::with_capacity(questions.len());
    let mut golds = Vec::with_capacity(questions.len());
    for (i, s) in questions.iter().enumerate() {
        let a = answer(&model, &rel_vecs, &index, &s.question)?;
        match &a {
            Answer::Answered { subject, relation, object } => {
                let _ = writeln!(answers_tsv, "{}\t{}\t{}\t{}", i, subject, relation, object);
            }
            Answer::Unanswerable => {
                let _ = writeln!(answers_tsv, "{}\tUNANSWERABLE", i);
            }
        }
        predictions.push(a);
        golds.push((s.subject.clone(), s.relation.clone()));
    }
    let accuracy = kbqa_accuracy(&predictions, &golds)?;
    // reference point: relation detection with gold subjects
    let gold_subject_micro = evaluate_model(&model, &split, &kg)?["all/micro"];
    write_file(&out.join("answers.tsv"), &answers_tsv)?;
    write_file(
        &out.join("kbqa.csv"),
        &format!(
            "metric,value\nkbqa-accuracy,{}\ngold-subject-micro,{}\n",
            accuracy, gold_subject_micro
        ),
    )?;
    println!("kbqa accuracy {:.4} → {}", accuracy, out.display());
    Ok(())
}

fn cmd_ablate(config: &RunConfig) -> Result<()> {
    let out = prepare_out_dir("ablate", config)?;
    let corpus = corpus_dir(config)?;
    let split = load_split(&config.get_path("paths.split")?)?;
    let kg = load_corpus_kg(&corpus)?;
    let embeddings = load_embeddings(&corpus.join("embeddings.txt"))?;
    let counts = config.get_usize_list("ablate.counts")?;
    let rows = relation_count_ablation(
        &split,
        &kg,
        &embeddings,
        &counts,
        &config.dims()?,
        &config.train_config()?,
    )?;
    let mut csv = String::from("model,count,macro_unseen\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{}", r.model, r.relation_count, r.macro_unseen);
    }
    write_file(&out.join("ablation.csv"), &csv)?;
    println!("wrote ablation to {}", out.display());
    Ok(())
}

fn cmd_pca(config: &RunConfig) -> Result<()> {
    let out = prepare_out_dir("pca", config)?;
    let model = load_model(&config.get_path("paths.checkpoint")?)?;
    let source = config.get("pca.source").unwrap_or("adapted");
    let vectors: BTreeMap<usize, Vec<f64>> = match source {
        // the general KG-side embeddings e_g
        "general" => (0..model.relations.len())
            .map(|r| (r, model.general_embedding(r).to_vec()))
            .collect(),
        // the relation representations the detector actually scores
        "adapted" => model.relation_vecs()?.into_iter().enumerate().collect(),
        other => {
            return Err(Error::Config(format!(
                "pca.source must be general or adapted, got {:?}",
                other
            )))
        }
    };
    let pca = pca_project(&vectors)?;
    let mut csv = String::from("relation,seen,x,y\n");
    for (r, [x, y]) in &pca.projections {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            model.relations.name(*r),
            model.is_seen(*r) as u8,
            x,
            y
        );
    }
    write_file(&out.join("pca.csv"), &csv)?;
    write_file(
        &out.join("explained.csv"),
        &format!("component,share\n1,{}\n2,{}\n", pca.explained[0], pca.explained[1]),
    )?;
    println!("wrote pca to {}", out.display());
    Ok(())
}

fn cmd_crossval(config: &RunConfig) -> Result<()> {
    let out = prepare_out_dir("crossval", config)?;
    let corpus = corpus_dir(config)?;
    let samples = load_dataset(&corpus.join("samples.tsv"))?;
    let kg = load_corpus_kg(&corpus)?;
    let embeddings = load_embeddings(&corpus.join("embeddings.txt"))?;
    let variant = variant_from(config, &None)?;
    let report = cross_validate(
        &samples,
        &kg,
        &embeddings,
        config.get_usize("crossval.folds", 10)?,
        variant,
        &config.dims()?,
        &config.train_config()?,
        &config.resplit_targets()?,
        config.resplit_tolerance()?,
        config.seed()?,
    )?;
    write_file(&out.join("metrics.csv"), &metrics_csv(&report.mean, Some(&report.std)))?;
    let mut summary = String::from("split,metric,value\n");
    for (key, mean) in &report.mean {
        let (split, metric) = key.split_once('/').unwrap_or(("all", key));
        let _ = writeln!(
            summary,
            "{},{},{}",
            split,
            metric,
            format_mean_std(*mean, report.std[key])
        );
    }
    write_file(&out.join("summary.csv"), &summary)?;
    println!("wrote cross-validation to {}", out.display());
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::GenSynth(c) => cmd_gen_synth(&resolve_config(c)?),
        Command::Resplit(c) => cmd_resplit(&resolve_config(c)?),
        Command::Train { common, variant } => cmd_train(&resolve_config(common)?, variant),
        Command::Eval(c) => cmd_eval(&resolve_config(c)?),
        Command::Kbqa(c) => cmd_kbqa(&resolve_config(c)?),
        Command::Ablate(c) => cmd_ablate(&resolve_config(c)?),
        Command::Pca(c) => cmd_pca(&resolve_config(c)?),
        Command::Crossval(c) => cmd_crossval(&resolve_config(c)?),
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {}", e);
        std::process::exit(1);
    }
}
