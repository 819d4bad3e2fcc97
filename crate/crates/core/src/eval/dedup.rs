use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{cosine, Embedder, KbError};
use crate::par;
use crate::problem::DatasetRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupConfig {
    pub similarity_threshold: f64,
    pub embedder_id: String,
}

impl DedupConfig {
    pub fn for_embedder(embedder: &dyn Embedder) -> Self {
        Self {
            similarity_threshold: 0.90,
            embedder_id: embedder.id(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DedupPass {
    Exact,
    Semantic,
}

/// Indices are positions in the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedGroup {
    pub kept: usize,
    pub removed: Vec<usize>,
    pub pass: DedupPass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupOutcome {
    pub survivors: Vec<usize>,
    pub groups: Vec<RemovedGroup>,
}

#[derive(Debug, Error)]
pub enum DedupError {
    #[error("dedup configured for embedder '{configured}' but given '{given}'")]
    EmbedderMismatch { configured: String, given: String },
    #[error(transparent)]
    Embed(#[from] KbError),
}

/// Case-folded, whitespace-collapsed form used by the exact pass.
pub fn normalize_text(s: &str) -> String {
    s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

fn group_for(groups: &mut Vec<RemovedGroup>, kept: usize, pass: DedupPass) -> &mut RemovedGroup {
    match groups.iter().position(|g| g.kept == kept && g.pass == pass) {
        Some(i) => &mut groups[i],
        None => {
            groups.push(RemovedGroup {
                kept,
                removed: Vec::new(),
                pass,
            });
            groups.last_mut().unwrap()
        }
    }
}

/// Exact pass on normalized text, then a greedy semantic pass in input
/// order: a text is dropped if it is within the threshold of any earlier
/// survivor, and attributed to the first such survivor.
pub fn dedup_texts(texts: &[&str], config: &DedupConfig, embedder: &dyn Embedder) -> Result<DedupOutcome, DedupError> {
    if embedder.id() != config.embedder_id {
        return Err(DedupError::EmbedderMismatch {
            configured: config.embedder_id.clone(),
            given: embedder.id(),
        });
    }
    let mut groups = Vec::new();
    let mut first_seen: std::collections::HashMap<String, usize> = Default::default();
    let mut pass1 = Vec::new();
    for (i, t) in texts.iter().enumerate() {
        match first_seen.entry(normalize_text(t)) {
            std::collections::hash_map::Entry::Occupied(e) => {
                group_for(&mut groups, *e.get(), DedupPass::Exact).removed.push(i)
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(i);
                pass1.push(i);
            }
        }
    }

    let vectors = par::map(&pass1, |&i| embedder.embed(texts[i]));
    let vectors = vectors.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut kept: Vec<usize> = Vec::new(); // positions into pass1
    for (p, v) in vectors.iter().enumerate() {
        let hit = par::position_first(&kept, |&q| cosine(v, &vectors[q]) >= config.similarity_threshold);
        match hit {
            Some(k) => group_for(&mut groups, pass1[kept[k]], DedupPass::Semantic).removed.push(pass1[p]),
            None => kept.push(p),
        }
    }
    Ok(DedupOutcome {
        survivors: kept.into_iter().map(|p| pass1[p]).collect(),
        groups,
    })
}

/// Deduplicate records by their informal statements.
pub fn dedup(
    records: &[DatasetRecord],
    config: &DedupConfig,
    embedder: &dyn Embedder,
) -> Result<(Vec<DatasetRecord>, DedupOutcome), DedupError> {
    let texts: Vec<&str> = records.iter().map(|r| r.task.informal_statement.as_str()).collect();
    let outcome = dedup_texts(&texts, config, embedder)?;
    let survivors = outcome.survivors.iter().map(|&i| records[i].clone()).collect();
    Ok((survivors, outcome))
}
