//! Dataset manifests, trial-pair construction and cosine scoring of speaker embeddings.
//!
//! Six pair categories are built from a manifest of target speakers,
//! impersonators and their impersonations:
//!
//! | category | label    | pairs                                                        |
//! |----------|----------|--------------------------------------------------------------|
//! | R        | positive | two real utterances of the same target speaker              |
//! | RI       | negative | real utterances of two different target speakers            |
//! | IAB      | positive | one impersonator's impersonations of two different targets  |
//! | TI       | negative | a target's real utterance and an impersonation of that target |
//! | IRAB     | negative | real utterances of two different impersonators              |
//! | IRT      | negative | an impersonator's real utterance and a target's real one    |

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{Label, ScoreSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    TargetReal,
    ImpersonatorReal,
    Impersonation,
    Bonafide,
    Spoof,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::TargetReal => "target-real",
            Role::ImpersonatorReal => "impersonator-real",
            Role::Impersonation => "impersonation",
            Role::Bonafide => "bonafide",
            Role::Spoof => "spoof",
        }
    }

    /// Countermeasure class: human speech in the speaker's own voice is bonafide.
    pub fn class(self) -> CmClass {
        match self {
            Role::TargetReal | Role::ImpersonatorReal | Role::Bonafide => CmClass::Bonafide,
            Role::Impersonation | Role::Spoof => CmClass::Spoof,
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Role::TargetReal,
            Role::ImpersonatorReal,
            Role::Impersonation,
            Role::Bonafide,
            Role::Spoof,
        ]
        .into_iter()
        .find(|r| r.name() == s)
        .ok_or_else(|| format!("unknown role {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmClass {
    Bonafide,
    Spoof,
}

impl CmClass {
    pub fn name(self) -> &'static str {
        match self {
            CmClass::Bonafide => "bonafide",
            CmClass::Spoof => "spoof",
        }
    }

    /// Output index in the countermeasure model.
    pub fn index(self) -> usize {
        match self {
            CmClass::Bonafide => 0,
            CmClass::Spoof => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub utt_id: String,
    pub speaker_id: String,
    pub role: Role,
    pub mimicked_target_id: Option<String>,
    pub attack_id: Option<String>,
    pub path: PathBuf,
}

/// Validated manifest: unique utterance ids, and a mimicked target on exactly the impersonation rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    rows: Vec<ManifestRow>,
}

pub const MANIFEST_COLUMNS: [&str; 6] = [
    "utt_id",
    "speaker_id",
    "role",
    "mimicked_target_id",
    "attack_id",
    "path",
];

impl Manifest {
    pub fn new(rows: Vec<ManifestRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, row) in rows.iter().enumerate() {
            if !seen.insert(row.utt_id.as_str()) {
                return Err(Error::DuplicateUttId(row.utt_id.clone()));
            }
            if (row.role == Role::Impersonation) != row.mimicked_target_id.is_some() {
                return Err(Error::MissingMimickedTarget {
                    line: i + 2,
                    utt_id: row.utt_id.clone(),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ManifestRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, utt_id: &str) -> Option<&ManifestRow> {
        self.rows.iter().find(|r| r.utt_id == utt_id)
    }

    /// Parse TSV text. Relative paths are resolved against `base_dir`.
    /// Empty optional fields may be written as `-`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
        let index_of = |name: &str| -> Result<usize> {
            columns
                .iter()
                .position(|c| *c == name)
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("header lacks column {name}"),
                })
        };
        let idx: Vec<usize> = MANIFEST_COLUMNS
            .iter()
            .map(|c| index_of(c))
            .collect::<Result<_>>()?;
        if let Some(extra) = columns.iter().find(|c| !MANIFEST_COLUMNS.contains(c)) {
            return Err(Error::Parse {
                line: 1,
                message: format!("unknown column {extra}"),
            });
        }

        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != columns.len() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} fields, found {}", columns.len(), fields.len()),
                });
            }
            let get = |k: usize| fields[idx[k]];
            let optional = |k: usize| {
                let v = get(k);
                (!v.is_empty() && v != "-").then(|| v.to_string())
            };
            let utt_id = get(0).to_string();
            if utt_id.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "empty utt_id".into(),
                });
            }
            if !seen.insert(utt_id.clone()) {
                return Err(Error::DuplicateUttId(utt_id));
            }
            let role: Role = get(2).parse().map_err(|message| Error::Parse {
                line: line_no,
                message,
            })?;
            let mimicked_target_id = optional(3);
            if (role == Role::Impersonation) != mimicked_target_id.is_some() {
                return Err(Error::MissingMimickedTarget {
                    line: line_no,
                    utt_id,
                });
            }
            let path = PathBuf::from(get(5));
            rows.push(ManifestRow {
                utt_id,
                speaker_id: get(1).to_string(),
                role,
                mimicked_target_id,
                attack_id: optional(4),
                path: if path.is_relative() {
                    base_dir.join(path)
                } else {
                    path
                },
            });
        }
        Self::new(rows)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = MANIFEST_COLUMNS.join("\t");
        out.push('\n');
        for r in &self.rows {
            let fields = [
                r.utt_id.as_str(),
                r.speaker_id.as_str(),
                r.role.name(),
                r.mimicked_target_id.as_deref().unwrap_or("-"),
                r.attack_id.as_deref().unwrap_or("-"),
                r.path.to_str().unwrap_or_default(),
            ];
            out.push_str(&fields.join("\t"));
            out.push('\n');
        }
        out
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Manifest::parse(&text, path.parent().unwrap_or(Path::new(".")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    R,
    Ri,
    Iab,
    Ti,
    Irab,
    Irt,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::R,
        Category::Ri,
        Category::Iab,
        Category::Ti,
        Category::Irab,
        Category::Irt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::R => "R",
            Category::Ri => "RI",
            Category::Iab => "IAB",
            Category::Ti => "TI",
            Category::Irab => "IRAB",
            Category::Irt => "IRT",
        }
    }

    pub fn label(self) -> PairLabel {
        match self {
            Category::R | Category::Iab => PairLabel::Positive,
            _ => PairLabel::Negative,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown pair category {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairLabel {
    Positive,
    Negative,
}

impl PairLabel {
    pub fn name(self) -> &'static str {
        match self {
            PairLabel::Positive => "positive",
            PairLabel::Negative => "negative",
        }
    }
}

/// An unordered pair stored with `utt_a < utt_b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    pub utt_a: String,
    pub utt_b: String,
    pub label: PairLabel,
    pub category: Category,
}

impl Pair {
    fn new(a: &str, b: &str, category: Category) -> Self {
        let (utt_a, utt_b) = if a <= b { (a, b) } else { (b, a) };
        Self {
            utt_a: utt_a.to_string(),
            utt_b: utt_b.to_string(),
            label: category.label(),
            category,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialSet {
    pub pairs: Vec<Pair>,
}

impl TrialSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `utt_a<TAB>utt_b<TAB>label<TAB>category` per pair.
    pub fn to_tsv(&self) -> String {
        self.pairs
            .iter()
            .map(|p| {
                format!(
                    "{}\t{}\t{}\t{}\n",
                    p.utt_a,
                    p.utt_b,
                    p.label.name(),
                    p.category
                )
            })
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", f.len())));
            }
            let category: Category = f[3].parse().map_err(|e: Error| err(e.to_string()))?;
            if f[2] != category.label().name() {
                return Err(err(format!(
                    "label {} does not match category {category}",
                    f[2]
                )));
            }
            pairs.push(Pair::new(f[0], f[1], category));
        }
        Ok(Self { pairs })
    }

    /// Keep `n` pairs chosen uniformly under `seed`, preserving order.
    pub fn sample(&self, n: usize, seed: u64) -> TrialSet {
        if n >= self.pairs.len() {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, self.pairs.len(), n).into_vec();
        idx.sort_unstable();
        TrialSet {
            pairs: idx.into_iter().map(|i| self.pairs[i].clone()).collect(),
        }
    }
}

/// All qualifying unordered pairs of `category`, sorted by `(utt_a, utt_b)`.
pub fn build_pairs(m: &Manifest, category: Category) -> Result<TrialSet> {
    let by_role =
        |role: Role| -> Vec<&ManifestRow> { m.rows().iter().filter(|r| r.role == role).collect() };
    let mut pairs = Vec::new();
    let mut within = |rows: &[&ManifestRow], keep: &dyn Fn(&ManifestRow, &ManifestRow) -> bool| {
        for (i, a) in rows.iter().enumerate() {
            for b in &rows[i + 1..] {
                if keep(a, b) {
                    pairs.push(Pair::new(&a.utt_id, &b.utt_id, category));
                }
            }
        }
    };
    match category {
        Category::R => within(&by_role(Role::TargetReal), &|a, b| {
            a.speaker_id == b.speaker_id
        }),
        Category::Ri => within(&by_role(Role::TargetReal), &|a, b| {
            a.speaker_id != b.speaker_id
        }),
        Category::Iab => within(&by_role(Role::Impersonation), &|a, b| {
            a.speaker_id == b.speaker_id && a.mimicked_target_id != b.mimicked_target_id
        }),
        Category::Irab => within(&by_role(Role::ImpersonatorReal), &|a, b| {
            a.speaker_id != b.speaker_id
        }),
        Category::Ti => {
            for t in by_role(Role::TargetReal) {
                for imp in by_role(Role::Impersonation) {
                    if imp.mimicked_target_id.as_deref() == Some(t.speaker_id.as_str()) {
                        pairs.push(Pair::new(&t.utt_id, &imp.utt_id, category));
                    }
                }
            }
        }
        Category::Irt => {
            for ir in by_role(Role::ImpersonatorReal) {
                for t in by_role(Role::TargetReal) {
                    pairs.push(Pair::new(&ir.utt_id, &t.utt_id, category));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyCategory(category));
    }
    pairs.sort();
    pairs.dedup();
    Ok(TrialSet { pairs })
}

pub fn cosine_score(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Speaker embeddings keyed by utterance id, all of one dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingFile {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingFile {
    /// Header `dim=<d>`, then `utt_id<TAB>v1 v2 ... vd` per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing dim header".into(),
        })?;
        let dim: usize = header
            .trim()
            .strip_prefix("dim=")
            .and_then(|d| d.parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("expected dim=<d>, found {header:?}"),
            })?;
        let mut vectors = BTreeMap::new();
        for (i, line) in lines {
            let err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            let (utt, rest) = line
                .split_once('\t')
                .ok_or_else(|| err("missing tab after utt_id".into()))?;
            let v: Vec<f64> = rest
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| err(format!("{t:?}: {e}"))))
                .collect::<Result<_>>()?;
            if v.len() != dim {
                return Err(err(format!("{} values, header says {dim}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(err("non-finite value".into()));
            }
            if vectors.insert(utt.to_string(), v).is_some() {
                return Err(Error::DuplicateUttId(utt.to_string()));
            }
        }
        Ok(Self { dim, vectors })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("dim={}\n", self.dim);
        for (utt, v) in &self.vectors {
            let vals: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("{utt}\t{}\n", vals.join(" ")));
        }
        out
    }
}

/// Cosine score per pair; positive pairs become targets, negative pairs non-targets.
pub fn score_trials(t: &TrialSet, emb: &EmbeddingFile) -> Result<ScoreSet> {
    let lookup = |u: &str| {
        emb.vectors
            .get(u)
            .ok_or_else(|| Error::MissingEmbedding(u.to_string()))
    };
    let mut scores = Vec::with_capacity(t.len());
    let mut labels = Vec::with_capacity(t.len());
    for p in &t.pairs {
        scores.push(cosine_score(lookup(&p.utt_a)?, lookup(&p.utt_b)?)?);
        labels.push(match p.label {
            PairLabel::Positive => Label::Positive,
            PairLabel::Negative => Label::Negative,
        });
    }
    ScoreSet::new(scores, labels)
}
