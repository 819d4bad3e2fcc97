//! Lean declaration knowledge base: ingestion of declaration dumps,
//! namespace filtering, exact semantic and edit-distance retrieval.

mod embed;
mod levenshtein;
mod namespaces;
mod suggest;

use std::cmp::Ordering;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embed::{normalize, Embedder, HashEmbedder, HttpEmbedder};
pub use levenshtein::levenshtein;
pub use namespaces::{default_allowlist, filter_namespaces, namespace_allowed, NamespaceMatch, DEFAULT_ALLOWLIST};
pub use suggest::{render_suggestions, suggest, Suggestion};

use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeclKind {
    Definition,
    Theorem,
    Abbreviation,
    Structure,
    Instance,
    Other,
}

impl DeclKind {
    pub fn parse(s: &str) -> Self {
        match s {
            "definition" | "def" => DeclKind::Definition,
            "theorem" | "lemma" => DeclKind::Theorem,
            "abbreviation" | "abbrev" => DeclKind::Abbreviation,
            "structure" | "class" | "inductive" => DeclKind::Structure,
            "instance" => DeclKind::Instance,
            _ => DeclKind::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbEntry {
    pub full_name: String,
    pub namespace: String,
    pub kind: DeclKind,
    pub signature: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc: Option<String>,
}

impl KbEntry {
    pub fn new(full_name: impl Into<String>, kind: DeclKind, signature: impl Into<String>, doc: Option<String>) -> Self {
        let full_name = full_name.into();
        let namespace = full_name.rsplit_once('.').map(|(ns, _)| ns.to_string()).unwrap_or_default();
        Self {
            full_name,
            namespace,
            kind,
            signature: signature.into(),
            doc,
        }
    }

    /// Text that gets embedded for this entry.
    pub fn embed_text(&self) -> String {
        let mut s = format!("{} : {}", self.full_name, self.signature);
        if let Some(d) = &self.doc {
            s.push(' ');
            s.push_str(d);
        }
        s
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("index was built with embedder '{index}' but the active embedder is '{active}'")]
    StaleIndex { index: String, active: String },
    #[error("corrupt index file: {0}")]
    Corrupt(String),
    #[error("embedder: {0}")]
    Embedder(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> KbError + '_ {
    move |source| KbError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Deserialize)]
struct DumpLine {
    name: String,
    kind: String,
    #[serde(alias = "type")]
    signature: String,
    #[serde(default)]
    doc: Option<String>,
}

#[derive(Debug, Default)]
pub struct IngestReport {
    pub entries: Vec<KbEntry>,
    /// One message per skipped line (malformed or duplicate name).
    pub warnings: Vec<String>,
}

/// Parse a declaration dump: one JSON object per line with `name`, `kind`,
/// `signature` and optional `doc`.
pub fn ingest_reader(reader: impl BufRead) -> std::io::Result<IngestReport> {
    let mut report = IngestReport::default();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<DumpLine>(&line) {
            Ok(d) if d.name.trim().is_empty() => report.warnings.push(format!("line {}: empty name", i + 1)),
            Ok(d) if !seen.insert(d.name.clone()) => {
                report.warnings.push(format!("line {}: duplicate declaration {}", i + 1, d.name))
            }
            Ok(d) => report
                .entries
                .push(KbEntry::new(d.name, DeclKind::parse(&d.kind), d.signature, d.doc)),
            Err(e) => report.warnings.push(format!("line {}: {e}", i + 1)),
        }
    }
    for w in &report.warnings {
        log::warn!("skipped dump entry: {w}");
    }
    Ok(report)
}

pub fn ingest(path: &Path) -> Result<IngestReport, KbError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    ingest_reader(BufReader::new(file)).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scored<T> {
    pub entry: KbEntry,
    pub score: T,
}

/// Immutable embedding index over KB entries.
#[derive(Debug, Clone, PartialEq)]
pub struct KbIndex {
    entries: Vec<KbEntry>,
    /// Row-major, `entries.len() * dim`.
    vectors: Vec<f32>,
    dim: usize,
    embedder_id: String,
}

const MAGIC: &[u8] = b"ECPKB1\n";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dimension: usize,
    count: usize,
    embedder_id: String,
}

/// Cosine of two unit vectors, accumulated in f64 in index order.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum()
}

impl KbIndex {
    pub fn build(entries: Vec<KbEntry>, embedder: &dyn Embedder) -> Result<Self, KbError> {
        let dim = embedder.dim();
        let mut vectors = Vec::with_capacity(entries.len() * dim);
        for e in &entries {
            let v = embedder.embed(&e.embed_text())?;
            if v.len() != dim {
                return Err(KbError::Embedder(format!("dimension {} != {dim}", v.len())));
            }
            vectors.extend(v);
        }
        Ok(Self {
            entries,
            vectors,
            dim,
            embedder_id: embedder.id(),
        })
    }

    pub fn entries(&self) -> &[KbEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    fn top_k<T: Copy>(&self, scores: Vec<T>, k: usize, better: impl Fn(&T, &T) -> Ordering) -> Vec<Scored<T>> {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by(|&a, &b| {
            better(&scores[a], &scores[b]).then_with(|| self.entries[a].full_name.cmp(&self.entries[b].full_name))
        });
        order
            .into_iter()
            .take(k)
            .map(|i| Scored {
                entry: self.entries[i].clone(),
                score: scores[i],
            })
            .collect()
    }

    /// Exact cosine ranking, best first; ties by ascending name.
    pub fn query_semantic(&self, embedder: &dyn Embedder, text: &str, k: usize) -> Result<Vec<Scored<f64>>, KbError> {
        if embedder.id() != self.embedder_id {
            return Err(KbError::StaleIndex {
                index: self.embedder_id.clone(),
                active: embedder.id(),
            });
        }
        let q = embedder.embed(text)?;
        let rows: Vec<usize> = (0..self.entries.len()).collect();
        let scores = par::map(&rows, |&i| cosine(&q, self.vector(i)));
        Ok(self.top_k(scores, k, |a, b| b.total_cmp(a)))
    }

    /// Levenshtein ranking of full names against `symbol`, closest first;
    /// ties by ascending name.
    pub fn query_edit_distance(&self, symbol: &str, k: usize) -> Vec<Scored<usize>> {
        let distances = par::map(&self.entries, |e| levenshtein(symbol, &e.full_name));
        self.top_k(distances, k, |a, b| a.cmp(b))
    }

    /// Magic line, JSON header line, one JSON line per entry, then the
    /// little-endian f32 vector block.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        let header = Header {
            dimension: self.dim,
            count: self.entries.len(),
            embedder_id: self.embedder_id.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
        for e in &self.entries {
            writeln!(w, "{}", serde_json::to_string(e).expect("entry serializes"))?;
        }
        let mut block = Vec::with_capacity(self.vectors.len() * 4);
        for x in &self.vectors {
            block.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&block)
    }

    pub fn read_from(r: impl Read) -> Result<Self, KbError> {
        let mut r = BufReader::new(r);
        let mut magic = vec![0u8; MAGIC.len()];
        r.read_exact(&mut magic).map_err(|e| KbError::Corrupt(e.to_string()))?;
        if magic != MAGIC {
            return Err(KbError::Corrupt("bad magic".into()));
        }
        let mut line = String::new();
        r.read_line(&mut line).map_err(|e| KbError::Corrupt(e.to_string()))?;
        let header: Header = serde_json::from_str(&line).map_err(|e| KbError::Corrupt(format!("header: {e}")))?;
        let mut entries = Vec::with_capacity(header.count);
        for i in 0..header.count {
            line.clear();
            r.read_line(&mut line).map_err(|e| KbError::Corrupt(e.to_string()))?;
            entries.push(serde_json::from_str(&line).map_err(|e| KbError::Corrupt(format!("entry {i}: {e}")))?);
        }
        let mut block = vec![0u8; header.count * header.dimension * 4];
        r.read_exact(&mut block)
            .map_err(|e| KbError::Corrupt(format!("vector block: {e}")))?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(|e| KbError::Corrupt(e.to_string()))? != 0 {
            return Err(KbError::Corrupt("trailing bytes after vector block".into()));
        }
        let vectors = block
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self {
            entries,
            vectors,
            dim: header.dimension,
            embedder_id: header.embedder_id,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        let file = std::fs::File::create(path).map_err(io_err(path))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        let file = std::fs::File::open(path).map_err(io_err(path))?;
        Self::read_from(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries() -> Vec<KbEntry> {
        vec![
            KbEntry::new("Nat.gcd", DeclKind::Definition, "(m n : ℕ) : ℕ", Some("gcd".into())),
            KbEntry::new("Nat.lcm", DeclKind::Definition, "(m n : ℕ) : ℕ", None),
            KbEntry::new("Real.sqrt", DeclKind::Definition, "(x : ℝ) : ℝ", None),
        ]
    }

    #[test]
    fn ingest_counts_malformed() {
        let dump = "{\"name\":\"Nat.gcd\",\"kind\":\"def\",\"signature\":\"(m n : ℕ) : ℕ\"}\nnot json\n\n{\"name\":\"Nat.gcd\",\"kind\":\"def\",\"signature\":\"x\"}\n{\"name\":\"gcd_comm\",\"kind\":\"theorem\",\"signature\":\"a\"}\n";
        let r = ingest_reader(dump.as_bytes()).unwrap();
        assert_eq!(r.entries.len(), 2);
        assert_eq!(r.warnings.len(), 2);
        assert_eq!(r.entries[0].namespace, "Nat");
        assert_eq!(r.entries[1].namespace, "");
        assert_eq!(r.entries[1].kind, DeclKind::Theorem);
    }

    #[test]
    fn queries() {
        let emb = HashEmbedder::default();
        let idx = KbIndex::build(entries(), &emb).unwrap();
        let own = idx.entries()[2].embed_text();
        let top = idx.query_semantic(&emb, &own, 5).unwrap();
        assert_eq!(top.len(), 3);
        assert_eq!(top[0].entry.full_name, "Real.sqrt");
        assert!((top[0].score - 1.0).abs() < 1e-6);
        let ed = idx.query_edit_distance("Nat.gdc", 2);
        assert_eq!(ed[0].entry.full_name, "Nat.gcd");
        assert_eq!(ed[0].score, 2);
        let stale = HashEmbedder { seed: 9, ..emb };
        assert!(matches!(idx.query_semantic(&stale, "x", 1), Err(KbError::StaleIndex { .. })));
    }

    #[test]
    fn persistence_round_trip() {
        let idx = KbIndex::build(entries(), &HashEmbedder::default()).unwrap();
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        assert_eq!(KbIndex::read_from(buf.as_slice()).unwrap(), idx);
        buf.push(0);
        assert!(matches!(KbIndex::read_from(buf.as_slice()), Err(KbError::Corrupt(_))));
        assert!(KbIndex::read_from(&b"nope"[..]).is_err());
    }
}
