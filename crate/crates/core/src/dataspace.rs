//! Data model, file formats, the balanced re-splitting procedure, and a
//! synthetic corpus generator for desk-scale experiments.
//!
//! File formats (all UTF-8, LF line endings):
//! - dataset TSV: `question \t subject \t relation \t object`, question
//!   tokens space-separated, no quoting;
//! - embedding text: header `count dim`, then `token v1 .. vd` per line;
//! - knowledge-graph TSV: `subject \t relation \t object`;
//! - alias TSV: `entity \t surface form`.

use crate::encoders::EmbeddingTable;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Dense relation inventory; ids index into `names`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RelationVocabulary {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl RelationVocabulary {
    pub fn new() -> RelationVocabulary {
        RelationVocabulary::default()
    }

    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a QASample>) -> RelationVocabulary {
        let mut v = RelationVocabulary::new();
        for s in samples {
            v.add(&s.relation);
        }
        v
    }

    pub fn add(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> {
        0..self.names.len()
    }

    /// Seen/unseen partition induced by a split: seen = relations occurring
    /// in Train.
    pub fn seen_unseen(&self, split: &DatasetSplit) -> (BTreeSet<usize>, BTreeSet<usize>) {
        let seen: BTreeSet<usize> = split
            .train
            .iter()
            .filter_map(|s| self.id(&s.relation))
            .collect();
        let unseen: BTreeSet<usize> = self.ids().filter(|id| !seen.contains(id)).collect();
        (seen, unseen)
    }
}

/// One annotated question with its gold triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QASample {
    pub question: Vec<String>,
    pub subject: String,
    pub relation: String,
    pub object: String,
}

/// The five-way Train / Dev-seen / Dev-unseen / Test-seen / Test-unseen
/// bundle.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<QASample>,
    pub dev_seen: Vec<QASample>,
    pub dev_unseen: Vec<QASample>,
    pub test_seen: Vec<QASample>,
    pub test_unseen: Vec<QASample>,
}

pub const SPLIT_FILES: [(&str, &str); 5] = [
    ("train", "train.tsv"),
    ("dev_seen", "dev_seen.tsv"),
    ("dev_unseen", "dev_unseen.tsv"),
    ("test_seen", "test_seen.tsv"),
    ("test_unseen", "test_unseen.tsv"),
];

fn relation_set(samples: &[QASample]) -> BTreeSet<&str> {
    samples.iter().map(|s| s.relation.as_str()).collect()
}

impl DatasetSplit {
    pub fn parts(&self) -> [(&'static str, &Vec<QASample>); 5] {
        [
            ("train", &self.train),
            ("dev_seen", &self.dev_seen),
            ("dev_unseen", &self.dev_unseen),
            ("test_seen", &self.test_seen),
            ("test_unseen", &self.test_unseen),
        ]
    }

    pub fn total(&self) -> usize {
        self.parts().iter().map(|(_, v)| v.len()).sum()
    }

    /// Check every DatasetSplit invariant; returns the first violation.
    pub fn verify_invariants(&self) -> Result<()> {
        let train_rels = relation_set(&self.train);
        for (name, part, must_be_disjoint) in [
            ("dev_unseen", &self.dev_unseen, true),
            ("test_unseen", &self.test_unseen, true),
            ("dev_seen", &self.dev_seen, false),
            ("test_seen", &self.test_seen, false),
        ] {
            let rels = relation_set(part);
            if must_be_disjoint {
                if let Some(r) = rels.intersection(&train_rels).next() {
                    return Err(Error::contract(format!(
                        "relation {:?} appears in both train and {}",
                        r, name
                    )));
                }
            } else if let Some(r) = rels.difference(&train_rels).next() {
                return Err(Error::contract(format!(
                    "relation {:?} in {} is missing from train",
                    r, name
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

fn read_to_string(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(content.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Parse a word2vec-style text embedding file: header `count dim`, then one
/// line per token.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty embedding file", path.display())))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected header 'count dim', got {:?}", header),
        });
    }
    let count: usize = parts[0].parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: format!("bad count {:?}", parts[0]),
    })?;
    let dim: usize = parts[1].parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: format!("bad dim {:?}", parts[1]),
    })?;
    let mut table = EmbeddingTable::new(dim);
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let mut fields = line.split_whitespace();
        let token = fields.next().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            msg: "missing token".into(),
        })?;
        let vec: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    msg: format!("bad number {:?}", f),
                })
            })
            .collect::<Result<_>>()?;
        if vec.len() != dim {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("expected {} values, got {}", dim, vec.len()),
            });
        }
        table.insert(token, vec)?;
    }
    if table.len() != count {
        return Err(Error::Format(format!(
            "{}: header says {} entries, file has {}",
            path.display(),
            count,
            table.len()
        )));
    }
    Ok(table)
}

pub fn save_embeddings(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let mut out = format!("{} {}\n", table.len(), table.dim);
    for (token, vec) in table.iter() {
        out.push_str(token);
        for v in vec {
            out.push(' ');
            out.push_str(&format!("{}", v));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Parse a dataset TSV: `question \t subject \t relation \t object`.
pub fn load_dataset(path: &Path) -> Result<Vec<QASample>> {
    let text = read_to_string(path)?;
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected 4 tab-separated columns, got {}", cols.len()),
            });
        }
        let question: Vec<String> = cols[0].split_whitespace().map(str::to_string).collect();
        if question.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: "empty question".into(),
            });
        }
        samples.push(QASample {
            question,
            subject: cols[1].to_string(),
            relation: cols[2].to_string(),
            object: cols[3].to_string(),
        });
    }
    Ok(samples)
}

pub fn save_samples(samples: &[QASample], path: &Path) -> Result<()> {
    let mut out = String::new();
    for s in samples {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            s.question.join(" "),
            s.subject,
            s.relation,
            s.object
        ));
    }
    write_file(path, &out)
}

/// Write the five split files into a directory.
pub fn save_dataset(split: &DatasetSplit, dir: &Path) -> Result<()> {
    for ((_, file), (_, samples)) in SPLIT_FILES.iter().zip(split.parts()) {
        save_samples(samples, &dir.join(file))?;
    }
    Ok(())
}

pub fn load_split(dir: &Path) -> Result<DatasetSplit> {
    let mut split = DatasetSplit::default();
    for (name, file) in SPLIT_FILES {
        let samples = load_dataset(&dir.join(file))?;
        match name {
            "train" => split.train = samples,
            "dev_seen" => split.dev_seen = samples,
            "dev_unseen" => split.dev_unseen = samples,
            "test_seen" => split.test_seen = samples,
            _ => split.test_unseen = samples,
        }
    }
    Ok(split)
}

/// Triples plus a subject alias table.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub triples: Vec<(String, String, String)>,
    /// entity id → surface-form token lists
    pub aliases: BTreeMap<String, Vec<Vec<String>>>,
}

impl KnowledgeGraph {
    /// Outgoing relations of a subject, sorted and de-duplicated.
    pub fn relations_of(&self, subject: &str) -> Vec<&str> {
        let set: BTreeSet<&str> = self
            .triples
            .iter()
            .filter(|(s, _, _)| s == subject)
            .map(|(_, r, _)| r.as_str())
            .collect();
        set.into_iter().collect()
    }
}

pub fn load_kg(path: &Path) -> Result<Vec<(String, String, String)>> {
    let text = read_to_string(path)?;
    let mut triples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected 3 tab-separated columns, got {}", cols.len()),
            });
        }
        triples.push((cols[0].to_string(), cols[1].to_string(), cols[2].to_string()));
    }
    Ok(triples)
}

pub fn save_kg(triples: &[(String, String, String)], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (s, r, o) in triples {
        out.push_str(&format!("{}\t{}\t{}\n", s, r, o));
    }
    write_file(path, &out)
}

pub fn load_aliases(path: &Path) -> Result<BTreeMap<String, Vec<Vec<String>>>> {
    let text = read_to_string(path)?;
    let mut aliases: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected 2 tab-separated columns, got {}", cols.len()),
            });
        }
        let tokens: Vec<String> = cols[1].split_whitespace().map(str::to_string).collect();
        aliases.entry(cols[0].to_string()).or_default().push(tokens);
    }
    Ok(aliases)
}

pub fn save_aliases(aliases: &BTreeMap<String, Vec<Vec<String>>>, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (entity, forms) in aliases {
        for form in forms {
            out.push_str(&format!("{}\t{}\n", entity, form.join(" ")));
        }
    }
    write_file(path, &out)
}

// ---------------------------------------------------------------------------
// Balanced re-splitting
// ---------------------------------------------------------------------------

/// Per-split size fractions plus the fraction of relations assigned to the
/// candidate-unseen group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResplitTargets {
    pub train: f64,
    pub dev_seen: f64,
    pub dev_unseen: f64,
    pub test_seen: f64,
    pub test_unseen: f64,
    pub unseen_relation_fraction: f64,
}

impl Default for ResplitTargets {
    fn default() -> Self {
        ResplitTargets {
            train: 0.45,
            dev_seen: 0.05,
            dev_unseen: 0.13,
            test_seen: 0.10,
            test_unseen: 0.27,
            unseen_relation_fraction: 0.4,
        }
    }
}

impl ResplitTargets {
    fn fractions(&self) -> [f64; 5] {
        [self.train, self.dev_seen, self.dev_unseen, self.test_seen, self.test_unseen]
    }
}

const RESPLIT_RETRIES: usize = 1000;

/// Randomly partition relations into seen/unseen groups, shuffle samples
/// into the five splits, and retry until every split size lands within
/// `tolerance` (a fraction of the corpus size) of its target.
pub fn balanced_resplit(
    samples: &[QASample],
    seed: u64,
    targets: &ResplitTargets,
    tolerance: f64,
) -> Result<DatasetSplit> {
    let relations: Vec<&str> = relation_set_owned(samples);
    if relations.len() < 2 {
        return Err(Error::contract(format!(
            "balanced_resplit needs at least 2 distinct relations, got {}",
            relations.len()
        )));
    }
    for f in targets.fractions() {
        if f <= 0.0 {
            return Err(Error::contract("split fractions must be positive"));
        }
    }
    if tolerance <= 0.0 {
        return Err(Error::contract("tolerance must be positive"));
    }
    let total = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_deviation = f64::INFINITY;

    for _attempt in 0..RESPLIT_RETRIES {
        let mut rels = relations.clone();
        rels.shuffle(&mut rng);
        let n_unseen = ((targets.unseen_relation_fraction * rels.len() as f64).round() as usize)
            .clamp(1, rels.len() - 1);
        let unseen_group: BTreeSet<&str> = rels[..n_unseen].iter().copied().collect();

        let mut seen_idx: Vec<usize> = Vec::new();
        let mut unseen_idx: Vec<usize> = Vec::new();
        for (i, s) in samples.iter().enumerate() {
            if unseen_group.contains(s.relation.as_str()) {
                unseen_idx.push(i);
            } else {
                seen_idx.push(i);
            }
        }
        if seen_idx.is_empty() || unseen_idx.is_empty() {
            continue;
        }
        seen_idx.shuffle(&mut rng);
        unseen_idx.shuffle(&mut rng);

        // cut the unseen samples into dev/test; keep both halves populated
        // whenever there are samples to go around
        let du = targets.dev_unseen / (targets.dev_unseen + targets.test_unseen);
        let mut n_du = ((unseen_idx.len() as f64 * du).round() as usize).min(unseen_idx.len());
        if unseen_idx.len() >= 2 {
            n_du = n_du.clamp(1, unseen_idx.len() - 1);
        }
        let dev_unseen: Vec<usize> = unseen_idx[..n_du].to_vec();
        let test_unseen: Vec<usize> = unseen_idx[n_du..].to_vec();

        // cut the seen samples into train/dev/test
        let seen_total = targets.train + targets.dev_seen + targets.test_seen;
        let mut n_tr = ((seen_idx.len() as f64 * targets.train / seen_total).round() as usize)
            .min(seen_idx.len());
        let mut n_ds = ((seen_idx.len() as f64 * targets.dev_seen / seen_total).round() as usize)
            .min(seen_idx.len() - n_tr);
        if seen_idx.len() >= 3 {
            n_tr = n_tr.clamp(1, seen_idx.len() - 2);
            n_ds = n_ds.clamp(1, seen_idx.len() - n_tr - 1);
        }
        let mut train: Vec<usize> = seen_idx[..n_tr].to_vec();
        let mut dev_seen: Vec<usize> = seen_idx[n_tr..n_tr + n_ds].to_vec();
        let mut test_seen: Vec<usize> = seen_idx[n_tr + n_ds..].to_vec();

        // every relation appearing in dev/test-seen must occur in train
        let mut train_rels: BTreeSet<&str> =
            train.iter().map(|&i| samples[i].relation.as_str()).collect();
        for part in [&mut dev_seen, &mut test_seen] {
            let mut keep = Vec::new();
            for &i in part.iter() {
                let rel = samples[i].relation.as_str();
                if train_rels.contains(rel) {
                    keep.push(i);
                } else {
                    train.push(i);
                    train_rels.insert(rel);
                }
            }
            *part = keep;
        }

        let sizes = [
            train.len(),
            dev_seen.len(),
            dev_unseen.len(),
            test_seen.len(),
            test_unseen.len(),
        ];
        let deviation = sizes
            .iter()
            .zip(targets.fractions())
            .map(|(&n, f)| ((n as f64) - f * total as f64).abs() / total as f64)
            .fold(0.0f64, f64::max);
        if deviation < best_deviation {
            best_deviation = deviation;
        }
        if deviation <= tolerance && sizes.iter().all(|&n| n > 0) {
            let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect();
            let split = DatasetSplit {
                train: pick(&train),
                dev_seen: pick(&dev_seen),
                dev_unseen: pick(&dev_unseen),
                test_seen: pick(&test_seen),
                test_unseen: pick(&test_unseen),
            };
            split.verify_invariants()?;
            return Ok(split);
        }
    }
    Err(Error::Infeasible {
        retries: RESPLIT_RETRIES,
        detail: format!(
            "best attempt deviated {:.4} of corpus size, tolerance {:.4}",
            best_deviation, tolerance
        ),
    })
}

fn relation_set_owned(samples: &[QASample]) -> Vec<&str> {
    let set: BTreeSet<&str> = samples.iter().map(|s| s.relation.as_str()).collect();
    set.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Synthetic corpus generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthConfig {
    pub relations: usize,
    pub seen_fraction: f64,
    pub entities: usize,
    pub samples: usize,
    pub dim: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            relations: 50,
            seen_fraction: 0.6,
            entities: 150,
            samples: 2000,
            dim: 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub kg: KnowledgeGraph,
    pub samples: Vec<QASample>,
    pub embeddings: EmbeddingTable,
}

impl SynthConfig {
    /// Resplit targets matched to this corpus: unseen relation fraction is
    /// 1 − seen_fraction, sample mass follows from the uniform per-relation
    /// sampling.
    pub fn resplit_targets(&self) -> ResplitTargets {
        let unseen = 1.0 - self.seen_fraction;
        ResplitTargets {
            train: self.seen_fraction * 0.75,
            dev_seen: self.seen_fraction * 0.0833,
            dev_unseen: unseen * 0.325,
            test_seen: self.seen_fraction * 0.1667,
            test_unseen: unseen * 0.675,
            unseen_relation_fraction: unseen,
        }
    }
}

const DOMAIN_WORDS: [&str; 8] = ["music", "people", "film", "location", "sport", "book", "food", "tv"];
const TYPE_WORDS: [&str; 12] = [
    "artist", "person", "movie", "place", "team", "author", "record", "city", "dish", "series",
    "company", "game",
];
const PROPERTY_WORDS: [&str; 60] = [
    "producer", "birthplace", "director", "captain", "publisher", "genre", "founder", "language",
    "color", "height", "parent", "award", "label", "spouse", "mayor", "coach", "editor", "creator",
    "owner", "origin", "capacity", "currency", "religion", "district", "composer", "anthem",
    "border", "budget", "chairman", "climate", "costume", "dialect", "elevation", "emblem",
    "flavor", "goalie", "habitat", "harvest", "illustrator", "jersey", "keeper", "lyricist",
    "motto", "narrator", "orchestra", "patron", "quarterback", "referee", "sculptor", "tenant",
    "umpire", "venue", "warden", "xylophone", "yield", "zipcode", "architect", "bassist",
    "curator", "drummer",
];
const FILLER_WORDS: [&str; 10] = ["what", "is", "the", "who", "which", "where", "when", "name", "of", "that"];
const FIRST_NAMES: [&str; 16] = [
    "mark", "anna", "john", "mei", "lars", "sara", "ivan", "noor", "kofi", "luca", "emma", "raj",
    "tomo", "zoe", "omar", "lena",
];
const LAST_NAMES: [&str; 16] = [
    "mifsud", "smith", "tanaka", "garcia", "okafor", "novak", "haddad", "kim", "rossi", "larsen",
    "petrov", "silva", "chen", "dubois", "moreau", "iqbal",
];

fn random_unit_word_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    // variance 1/3 per component so a three-word sum stays O(1)
    (0..dim).map(|_| rng.gen_range(-1.0..1.0) / 3f64.sqrt()).collect()
}

/// Random orthonormal matrix via Gram-Schmidt on uniform entries.
fn random_rotation(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for prev in &rows {
            let d: f64 = prev.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vi, pi) in v.iter_mut().zip(prev) {
                *vi -= d * pi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue; // degenerate draw; resample
        }
        for vi in &mut v {
            *vi /= norm;
        }
        rows.push(v);
    }
    rows
}

/// Build a desk-scale stand-in corpus: compositional relation names, a
/// small knowledge graph with aliased subjects, templated questions that
/// share lexical cues with relation name words, and an embedding table
/// where relations sharing name words are nearby.
pub fn generate_synthetic_corpus(config: &SynthConfig, seed: u64) -> Result<SynthCorpus> {
    if config.relations < 2 || config.entities == 0 || config.samples == 0 || config.dim == 0 {
        return Err(Error::contract("synthetic corpus counts must be positive (≥2 relations)"));
    }
    if config.seen_fraction <= 0.0 || config.seen_fraction >= 1.0 {
        return Err(Error::contract("seen fraction must lie in (0,1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // relation names: domain.type.propertyfact, unique. The property name
    // token is deliberately out of the pretrained vocabulary — the
    // property semantics reach the model only through e_g (and through
    // question cue words), which is the structure the adapter exploits
    let mut names = BTreeSet::new();
    let mut relations: Vec<[&str; 3]> = Vec::new();
    // properties are dealt from a shuffled deck so the question cue pins
    // the relation down (near-)uniquely; repeats only past pool size
    let mut prop_deck: Vec<&str> = Vec::new();
    let mut guard = 0;
    while relations.len() < config.relations {
        if prop_deck.is_empty() {
            prop_deck = PROPERTY_WORDS.to_vec();
            prop_deck.shuffle(&mut rng);
        }
        let d = DOMAIN_WORDS[rng.gen_range(0..DOMAIN_WORDS.len())];
        let t = TYPE_WORDS[rng.gen_range(0..TYPE_WORDS.len())];
        let p = *prop_deck.last().unwrap();
        let full = format!("{}.{}.{}fact", d, t, p);
        if names.insert(full) {
            relations.push([d, t, p]);
            prop_deck.pop();
        }
        guard += 1;
        if guard > 100_000 {
            return Err(Error::contract("relation name pool exhausted"));
        }
    }
    let rel_names: Vec<String> = relations
        .iter()
        .map(|[d, t, p]| format!("{}.{}.{}fact", d, t, p))
        .collect();

    // shared word vectors for every name word; fillers and alias words get
    // independent vectors
    let mut word_vecs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let all_words: Vec<&str> = DOMAIN_WORDS
        .iter()
        .chain(TYPE_WORDS.iter())
        .chain(PROPERTY_WORDS.iter())
        .chain(FILLER_WORDS.iter())
        .chain(FIRST_NAMES.iter())
        .chain(LAST_NAMES.iter())
        .copied()
        .collect();
    for w in all_words {
        let v = random_unit_word_vec(&mut rng, config.dim);
        word_vecs.insert(w.to_string(), v);
    }

    let mut embeddings = EmbeddingTable::new(config.dim);
    for (w, v) in &word_vecs {
        embeddings.insert(w, v.clone())?;
    }
    // e_g(relation) = R · (sum of its semantic word vectors) plus noise,
    // with one random rotation R shared by every relation. The rotation
    // models the graph-embedding space having its own geometry: relation
    // similarities are preserved (rotations keep cosines), but reading
    // e_g against word-space features requires learning the basis change
    let rotation = random_rotation(&mut rng, config.dim);
    for (words, name) in relations.iter().zip(&rel_names) {
        let mut v = vec![0.0; config.dim];
        for w in words {
            for (vi, &xi) in v.iter_mut().zip(&word_vecs[*w]) {
                *vi += xi;
            }
        }
        let mut rotated: Vec<f64> = rotation
            .iter()
            .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        for vi in &mut rotated {
            *vi += rng.gen_range(-0.05..0.05);
        }
        embeddings.insert(name, rotated)?;
    }

    // entities with unique two-token aliases
    let mut aliases: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    let mut entity_ids = Vec::new();
    let mut used_aliases = BTreeSet::new();
    for i in 0..config.entities {
        let id = format!("m.{:04}", i);
        let mut alias;
        let mut guard = 0;
        loop {
            let f = FIRST_NAMES[rng.gen_range(0..FIRST_NAMES.len())];
            let l = LAST_NAMES[rng.gen_range(0..LAST_NAMES.len())];
            alias = vec![f.to_string(), l.to_string()];
            if used_aliases.insert(alias.clone()) {
                break;
            }
            guard += 1;
            if guard > 10_000 {
                // pool exhausted; fall back to an indexed surname
                alias = vec![format!("entity{}", i)];
                let v = random_unit_word_vec(&mut rng, config.dim);
                embeddings.insert(&alias[0], v)?;
                used_aliases.insert(alias.clone());
                break;
            }
        }
        aliases.insert(id.clone(), vec![alias]);
        entity_ids.push(id);
    }

    // knowledge graph: each entity gets 4..=10 outgoing relations; wide
    // candidate sets keep relation detection about representation quality
    // rather than elimination among a couple of candidates
    let mut triples = Vec::new();
    let mut by_relation: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for id in &entity_ids {
        let k = rng.gen_range(4..=10usize).min(config.relations);
        let mut rel_ids: Vec<usize> = (0..config.relations).collect();
        rel_ids.shuffle(&mut rng);
        for &ri in rel_ids.iter().take(k) {
            let obj = &entity_ids[rng.gen_range(0..entity_ids.len())];
            by_relation.entry(ri).or_default().push(triples.len());
            triples.push((id.clone(), rel_names[ri].clone(), obj.clone()));
        }
    }
    // make sure every relation is attached to at least one subject
    for ri in 0..config.relations {
        if !by_relation.contains_key(&ri) {
            let subj = &entity_ids[rng.gen_range(0..entity_ids.len())];
            let obj = &entity_ids[rng.gen_range(0..entity_ids.len())];
            by_relation.entry(ri).or_default().push(triples.len());
            triples.push((subj.clone(), rel_names[ri].clone(), obj.clone()));
        }
    }

    // samples: relation drawn uniformly, then a uniform triple of that
    // relation; the question's only relation cue is the semantic property
    // word, so distinguishing a subject's candidate relations hinges on
    // the property component carried by e_g
    let mut samples = Vec::new();
    for _ in 0..config.samples {
        let ri = rng.gen_range(0..config.relations);
        let tlist = &by_relation[&ri];
        let (subj, _, obj) = &triples[tlist[rng.gen_range(0..tlist.len())]];
        let alias = &aliases[subj][0];
        let cue = relations[ri][2];
        let f1 = FILLER_WORDS[rng.gen_range(0..FILLER_WORDS.len())];
        let f2 = FILLER_WORDS[rng.gen_range(0..FILLER_WORDS.len())];
        let mut question: Vec<String> = Vec::new();
        match rng.gen_range(0..3) {
            0 => {
                question.push(f1.to_string());
                question.push(cue.to_string());
                question.push(f2.to_string());
                question.extend(alias.iter().cloned());
            }
            1 => {
                question.push(f1.to_string());
                question.push(cue.to_string());
                question.extend(alias.iter().cloned());
            }
            _ => {
                question.push(f1.to_string());
                question.extend(alias.iter().cloned());
                question.push(f2.to_string());
                question.push(cue.to_string());
            }
        }
        samples.push(QASample {
            question,
            subject: subj.clone(),
            relation: rel_names[ri].clone(),
            object: obj.clone(),
        });
    }

    Ok(SynthCorpus {
        kg: KnowledgeGraph { triples, aliases },
        samples,
        embeddings,
    })
}
