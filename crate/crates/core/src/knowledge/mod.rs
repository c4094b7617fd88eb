//! Curated manipulation knowledge, a deterministic embedding, and exact
//! cosine top-k retrieval with JSONL persistence.

mod embed;
mod index;

pub use embed::{normalize_tokens, Embedder, EmbeddingVector, HashedEmbedder, DEFAULT_DIM, DEFAULT_HASH_SEED};
pub use index::{cosine, cosine_sim, Hit, RetrievalResult, VectorIndex};

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_DOC_TOKENS: usize = 50;
pub const MAX_DOC_TOKENS: usize = 400;
pub const DEFAULT_TOP_K: usize = 4;
pub const FORMAT_NAME: &str = "ragarm-knowledge";
pub const FORMAT_VERSION: u32 = 1;

/// The seed corpus shipped with the crate.
pub const SEED_CORPUS: &str = include_str!("../../data/knowledge/seed_corpus.jsonl");

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("zero vector cannot be normalized")]
    ZeroVector,
    #[error("vector contains non-finite components")]
    NonFinite,
    #[error("stored vector is not unit norm (norm {0})")]
    NotUnit(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("k must be positive")]
    ZeroK,
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {id:?} has {tokens} tokens, outside [{MIN_DOC_TOKENS}, {MAX_DOC_TOKENS}]")]
    TokenBoundViolation { id: String, tokens: usize },
    #[error("i/o failure on {path}: {source}")]
    IoFailure { path: String, source: std::io::Error },
    #[error("unsupported knowledge file format {found:?}, expected {FORMAT_NAME} v{FORMAT_VERSION}")]
    FormatVersionMismatch { found: String },
    #[error("malformed knowledge file at line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    MovementPrimitive,
    TaskTemplate,
    SafetyHeuristic,
    AffordanceNote,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MovementPrimitive => "movement_primitive",
            Self::TaskTemplate => "task_template",
            Self::SafetyHeuristic => "safety_heuristic",
            Self::AffordanceNote => "affordance_note",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeDoc {
    pub id: String,
    pub category: Category,
    pub text: String,
}

impl KnowledgeDoc {
    pub fn new(id: impl Into<String>, category: Category, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            category,
            text: text.into(),
        }
    }

    /// Whitespace token count.
    pub fn token_count(&self) -> usize {
        self.text.split_whitespace().count()
    }

    pub fn param_hints(&self) -> Vec<(String, f64)> {
        param_hints(&self.text)
    }
}

/// Numeric `key=value` hints embedded in free text, in order of appearance.
pub fn param_hints(text: &str) -> Vec<(String, f64)> {
    text.split_whitespace()
        .filter_map(|w| {
            let w = w.trim_end_matches(['.', ',', ';', ')']);
            let (k, v) = w.split_once('=')?;
            Some((k.to_owned(), v.parse().ok()?))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    embedder: HashedEmbedder,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    category: Category,
    text: String,
    vector: EmbeddingVector,
}

/// Documents plus their index. Queries take `&self` and may run concurrently;
/// [`KnowledgeBase::ingest`] needs exclusive access, so sharing a base across
/// threads means building a new generation and swapping it in.
#[derive(Clone)]
pub struct KnowledgeBase<E: Embedder = HashedEmbedder> {
    embedder: E,
    docs: Vec<KnowledgeDoc>,
    index: VectorIndex,
    permissive: bool,
}

impl<E: Embedder> fmt::Debug for KnowledgeBase<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KnowledgeBase")
            .field("dim", &self.index.dim())
            .field("docs", &self.docs.len())
            .field("permissive", &self.permissive)
            .finish()
    }
}

impl<E: Embedder> KnowledgeBase<E> {
    pub fn with_embedder(embedder: E) -> Self {
        let dim = embedder.dim();
        Self {
            embedder,
            docs: Vec::new(),
            index: VectorIndex::new(dim),
            permissive: false,
        }
    }

    /// Disables the token-count bound at ingest.
    pub fn permissive(mut self, yes: bool) -> Self {
        self.permissive = yes;
        self
    }

    pub fn embedder(&self) -> &E {
        &self.embedder
    }

    pub fn docs(&self) -> &[KnowledgeDoc] {
        &self.docs
    }

    pub fn doc(&self, id: &str) -> Option<&KnowledgeDoc> {
        self.docs.iter().find(|d| d.id == id)
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn ingest(&mut self, doc: KnowledgeDoc) -> Result<(), KnowledgeError> {
        if self.index.contains(&doc.id) {
            return Err(KnowledgeError::DuplicateId(doc.id));
        }
        let tokens = doc.token_count();
        if !self.permissive && !(MIN_DOC_TOKENS..=MAX_DOC_TOKENS).contains(&tokens) {
            return Err(KnowledgeError::TokenBoundViolation { id: doc.id, tokens });
        }
        let v = self.embedder.embed(&doc.text)?;
        self.index.insert(doc.id.clone(), v)?;
        self.docs.push(doc);
        Ok(())
    }

    pub fn ingest_all(&mut self, docs: impl IntoIterator<Item = KnowledgeDoc>) -> Result<(), KnowledgeError> {
        docs.into_iter().try_for_each(|d| self.ingest(d))
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, KnowledgeError> {
        self.embedder.embed(text)
    }

    pub fn retrieve(&self, query: &str, k: usize) -> Result<RetrievalResult, KnowledgeError> {
        let q = self.embedder.embed(query)?;
        let mut r = self.index.top_k(&q, k)?;
        r.query = query.to_owned();
        Ok(r)
    }

    /// Retrieved documents in rank order.
    pub fn resolve<'a>(&'a self, r: &RetrievalResult) -> Vec<&'a KnowledgeDoc> {
        r.hits.iter().filter_map(|h| self.doc(&h.id)).collect()
    }
}

impl Default for KnowledgeBase<HashedEmbedder> {
    fn default() -> Self {
        Self::with_embedder(HashedEmbedder::default())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> KnowledgeError + '_ {
    move |source| KnowledgeError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

fn write_json_line<W: Write, T: Serialize>(w: &mut W, path: &Path, value: &T) -> Result<(), KnowledgeError> {
    let line = serde_json::to_string(value).expect("plain data serializes");
    writeln!(w, "{line}").map_err(io_err(path))
}

/// Parses a corpus file of `{id, category, text}` lines. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_corpus(text: &str) -> Result<Vec<KnowledgeDoc>, KnowledgeError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| KnowledgeError::Format {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

impl KnowledgeBase<HashedEmbedder> {
    /// A base over the shipped seed corpus with the default embedder.
    pub fn seed() -> Result<Self, KnowledgeError> {
        let mut kb = Self::default();
        kb.ingest_all(parse_corpus(SEED_CORPUS)?)?;
        Ok(kb)
    }

    pub fn save(&self, path: &Path) -> Result<(), KnowledgeError> {
        let file = std::fs::File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        let header = Header {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            embedder: self.embedder,
        };
        write_json_line(&mut w, path, &header)?;
        for doc in &self.docs {
            let vector = self.index.get(&doc.id).expect("every doc is indexed").clone();
            let rec = Record {
                id: doc.id.clone(),
                category: doc.category,
                text: doc.text.clone(),
                vector,
            };
            write_json_line(&mut w, path, &rec)?;
        }
        w.flush().map_err(io_err(path))
    }

    /// Loads a saved base. Stored vectors are used as is, not re-embedded.
    pub fn load(path: &Path) -> Result<Self, KnowledgeError> {
        let file = std::fs::File::open(path).map_err(io_err(path))?;
        let mut lines = BufReader::new(file).lines();
        let first = lines
            .next()
            .ok_or_else(|| KnowledgeError::FormatVersionMismatch {
                found: "<empty file>".into(),
            })?
            .map_err(io_err(path))?;
        let header: Header = serde_json::from_str(&first).map_err(|_| KnowledgeError::FormatVersionMismatch {
            found: first.chars().take(80).collect(),
        })?;
        if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
            return Err(KnowledgeError::FormatVersionMismatch {
                found: format!("{} v{}", header.format, header.version),
            });
        }
        let mut kb = Self::with_embedder(header.embedder).permissive(true);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| KnowledgeError::Format {
                line: i + 2,
                message: e.to_string(),
            })?;
            kb.index.insert(rec.id.clone(), rec.vector)?;
            kb.docs.push(KnowledgeDoc {
                id: rec.id,
                category: rec.category,
                text: rec.text,
            });
        }
        kb.permissive = false;
        Ok(kb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(n: usize, stem: &str) -> String {
        (0..n).map(|i| format!("{stem}{i}")).collect::<Vec<_>>().join(" ")
    }

    fn small_kb() -> KnowledgeBase {
        let mut kb = KnowledgeBase::default().permissive(true);
        kb.ingest(KnowledgeDoc::new("a", Category::MovementPrimitive, "hover above the bottle then descend"))
            .unwrap();
        kb.ingest(KnowledgeDoc::new("b", Category::SafetyHeuristic, "keep speed low near fragile objects"))
            .unwrap();
        kb.ingest(KnowledgeDoc::new(
            "c",
            Category::AffordanceNote,
            "grasp the screwdriver handle from the side",
        ))
        .unwrap();
        kb
    }

    #[test]
    fn embed_is_deterministic_and_unit() {
        let e = HashedEmbedder::default();
        let a = e.embed("grasp handle").unwrap();
        assert_eq!(a, e.embed("grasp handle").unwrap());
        assert_eq!(a, e.embed("  Grasp, HANDLE!").unwrap());
        let n: f64 = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn embed_empty_text_is_rejected() {
        let e = HashedEmbedder::default();
        assert!(matches!(e.embed(""), Err(KnowledgeError::EmptyText)));
        assert!(matches!(e.embed(" ?!, "), Err(KnowledgeError::EmptyText)));
    }

    #[test]
    fn disjoint_vocabularies_are_orthogonal_when_buckets_differ() {
        let e = HashedEmbedder::default();
        let (x, y) = ("alpha beta", "gamma delta");
        let bx: Vec<_> = normalize_tokens(x).iter().map(|t| e.bucket(t)).collect();
        let by: Vec<_> = normalize_tokens(y).iter().map(|t| e.bucket(t)).collect();
        assert!(bx.iter().all(|b| !by.contains(b)), "pick words with distinct buckets");
        assert_eq!(cosine_sim(&e.embed(x).unwrap(), &e.embed(y).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn cosine_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q = EmbeddingVector::from_raw(vec![1.0, 1.0, 0.0]).unwrap();
        let k = EmbeddingVector::from_raw(vec![1.0, 0.0, 0.0]).unwrap();
        assert!((cosine_sim(&q, &k).unwrap() - s).abs() < 1e-12);
        assert!((cosine_sim(&q, &q).unwrap() - 1.0).abs() < 1e-12);
        let o = EmbeddingVector::from_raw(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(cosine_sim(&k, &o).unwrap(), 0.0);
        let short = EmbeddingVector::from_raw(vec![1.0]).unwrap();
        assert!(matches!(cosine_sim(&q, &short), Err(KnowledgeError::DimensionMismatch { .. })));
        assert!(matches!(EmbeddingVector::from_raw(vec![0.0; 3]), Err(KnowledgeError::ZeroVector)));
    }

    #[test]
    fn cosine_is_generic_over_f32() {
        let c: f32 = cosine(&[1.0f32, 1.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert!((c - std::f32::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn top_k_examples() {
        let kb = small_kb();
        let all = kb.index().top_k(&kb.embed("bottle").unwrap(), 10).unwrap();
        assert_eq!(all.hits.len(), 3);
        assert!(all.hits.windows(2).all(|w| w[0].score >= w[1].score));

        let r = kb.retrieve("grasp the screwdriver handle from the side", 2).unwrap();
        assert_eq!(r.hits[0].id, "c");
        assert!((r.hits[0].score - 1.0).abs() < 1e-12);
        assert_eq!(r.query, "grasp the screwdriver handle from the side");

        let mut idx = VectorIndex::new(2);
        let v = EmbeddingVector::from_raw(vec![1.0, 2.0]).unwrap();
        idx.insert("z", v.clone()).unwrap();
        idx.insert("m", v.clone()).unwrap();
        idx.insert("a", v.clone()).unwrap();
        assert_eq!(idx.top_k(&v, 3).unwrap().ids(), vec!["a", "m", "z"]);
        assert!(matches!(VectorIndex::new(2).top_k(&v, 1), Err(KnowledgeError::EmptyIndex)));
        assert!(matches!(idx.top_k(&v, 0), Err(KnowledgeError::ZeroK)));
    }

    #[test]
    fn ingest_examples() {
        let mut kb = KnowledgeBase::default();
        kb.ingest(KnowledgeDoc::new("s", Category::SafetyHeuristic, words(60, "w"))).unwrap();
        let short = kb.ingest(KnowledgeDoc::new("t", Category::SafetyHeuristic, words(10, "w")));
        assert!(matches!(short, Err(KnowledgeError::TokenBoundViolation { tokens: 10, .. })));
        let long = kb.ingest(KnowledgeDoc::new("u", Category::SafetyHeuristic, words(401, "w")));
        assert!(matches!(long, Err(KnowledgeError::TokenBoundViolation { tokens: 401, .. })));
        let dup = kb.ingest(KnowledgeDoc::new("s", Category::TaskTemplate, words(60, "v")));
        assert!(matches!(dup, Err(KnowledgeError::DuplicateId(_))));
        assert_eq!(kb.len(), 1);
    }

    #[test]
    fn seed_corpus_loads_and_covers_categories() {
        let kb = KnowledgeBase::seed().unwrap();
        for c in [
            Category::MovementPrimitive,
            Category::TaskTemplate,
            Category::SafetyHeuristic,
            Category::AffordanceNote,
        ] {
            assert!(kb.docs().iter().any(|d| d.category == c), "{c}");
        }
        let r = kb.retrieve("pick up the screwdriver", DEFAULT_TOP_K).unwrap();
        assert_eq!(r.hits.len(), DEFAULT_TOP_K);
        assert!(r.ids().contains(&"an-screwdriver"));
    }

    #[test]
    fn param_hints_are_extracted() {
        let d = KnowledgeDoc::new("x", Category::AffordanceNote, "go hover_mm=40, then speed_mm_s=80. ok=no");
        assert_eq!(d.param_hints(), vec![("hover_mm".to_string(), 40.0), ("speed_mm_s".to_string(), 80.0)]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.jsonl");
        let kb = small_kb();
        kb.save(&path).unwrap();
        let back = KnowledgeBase::load(&path).unwrap();
        assert_eq!(back.docs(), kb.docs());
        assert_eq!(back.index(), kb.index());
        for q in ["bottle", "speed", "side handle", "nothing in common"] {
            assert_eq!(back.retrieve(q, 3).ok(), kb.retrieve(q, 3).ok());
        }
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = KnowledgeBase::load(&dir.path().join("nope.jsonl"));
        assert!(matches!(missing, Err(KnowledgeError::IoFailure { .. })));
        let path = dir.path().join("v9.jsonl");
        std::fs::write(
            &path,
            "{\"format\":\"ragarm-knowledge\",\"version\":9,\"embedder\":{\"dim\":4,\"seed\":1}}\n",
        )
        .unwrap();
        assert!(matches!(KnowledgeBase::load(&path), Err(KnowledgeError::FormatVersionMismatch { .. })));
        std::fs::write(&path, "not a header\n").unwrap();
        assert!(matches!(KnowledgeBase::load(&path), Err(KnowledgeError::FormatVersionMismatch { .. })));
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_bounded(a in prop::collection::vec(-10.0f64..10.0, 8), b in prop::collection::vec(-10.0f64..10.0, 8)) {
            let ab = cosine(&a, &b).unwrap();
            let ba = cosine(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn unit_self_similarity(a in prop::collection::vec(-10.0f64..10.0, 1..32)) {
            prop_assume!(a.iter().any(|x| x.abs() > 1e-3));
            let v = EmbeddingVector::from_raw(a).unwrap();
            prop_assert!((cosine_sim(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn ranking_is_scale_invariant(
            raws in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 1..12),
            scales in prop::collection::vec(0.01f64..100.0, 12),
            q in prop::collection::vec(-5.0f64..5.0, 6),
        ) {
            prop_assume!(q.iter().any(|x| x.abs() > 1e-3));
            prop_assume!(raws.iter().all(|r| r.iter().any(|x| x.abs() > 1e-3)));
            let q = EmbeddingVector::from_raw(q).unwrap();
            let mut plain = VectorIndex::new(6);
            let mut scaled = VectorIndex::new(6);
            for (i, r) in raws.iter().enumerate() {
                plain.insert(format!("d{i:02}"), EmbeddingVector::from_raw(r.clone()).unwrap()).unwrap();
                let s: Vec<f64> = r.iter().map(|x| x * scales[i]).collect();
                scaled.insert(format!("d{i:02}"), EmbeddingVector::from_raw(s).unwrap()).unwrap();
            }
            let a = plain.top_k(&q, raws.len()).unwrap();
            let b = scaled.top_k(&q, raws.len()).unwrap();
            for (x, y) in a.hits.iter().zip(&b.hits) {
                prop_assert!((x.score - y.score).abs() < 1e-9);
            }
            // Only near-ties may swap order under rescaling.
            for (x, y) in a.hits.iter().zip(&b.hits) {
                if x.id != y.id {
                    let sx = a.hits.iter().find(|h| h.id == y.id).unwrap().score;
                    prop_assert!((x.score - sx).abs() < 1e-9);
                }
            }
        }
    }
}
