//! Dataset loading and indexed triple/pair structures.
//!
//! Benchmark splits (`train.txt`, `valid.txt`, `test.txt`) are UTF-8 text with
//! one `head<TAB>relation<TAB>tail` triple per line. Entities and relations
//! are assigned dense ids in first-appearance order over train, then valid,
//! then test, so loading is deterministic. Forward relations occupy
//! `[0, R)`, materialized inverses `[R, 2R)`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::{info, warn};

use crate::error::{Error, Result};

/// Dense index into the entity vocabulary.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct EntityId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense relation index; ids in `[R, 2R)` are materialized inverses.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct RelationId(pub u32);

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Maps a forward relation to its inverse and an inverse back to its
    /// forward form; an involution over `[0, 2R)`.
    #[inline]
    pub fn inverse(self, num_forward: u32) -> RelationId {
        if self.0 < num_forward {
            RelationId(self.0 + num_forward)
        } else {
            RelationId(self.0 - num_forward)
        }
    }

    #[inline]
    pub fn is_inverse(self, num_forward: u32) -> bool {
        self.0 >= num_forward
    }
}

/// A single `(head, relation, tail)` fact.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Triple {
    pub head: EntityId,
    pub rel: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, rel: RelationId, tail: EntityId) -> Self {
        Triple { head, rel, tail }
    }
}

/// Surface-string vocabulary with dense ids in first-appearance order.
#[derive(Debug, Default, Clone)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Indexed train/valid/test triples with O(1) membership across all splits.
#[derive(Debug, Clone)]
pub struct TripleStore {
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    entities: Vocab,
    relations: Vocab,
    membership: HashSet<Triple>,
    train_membership: HashSet<Triple>,
}

impl TripleStore {
    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    /// Number of forward relations R; inverse ids live in `[R, 2R)`.
    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0)
    }

    pub fn entity_id(&self, name: &str) -> Result<EntityId> {
        self.entities
            .get(name)
            .map(EntityId)
            .ok_or_else(|| Error::UnknownEntity(name.to_owned()))
    }

    /// Name of a relation; inverses render as `surface⁻¹`.
    pub fn relation_name(&self, rel: RelationId) -> String {
        let nf = self.relations.len() as u32;
        if rel.is_inverse(nf) {
            format!("{}⁻¹", self.relations.name(rel.0 - nf))
        } else {
            self.relations.name(rel.0).to_owned()
        }
    }

    pub fn relation_id(&self, name: &str) -> Result<RelationId> {
        self.relations
            .get(name)
            .map(RelationId)
            .ok_or_else(|| Error::UnknownRelation(name.to_owned()))
    }

    /// True iff the triple appears in any split. Relation ids in `[R, 2R)`
    /// are queried as the forward triple with head and tail swapped.
    pub fn contains(&self, head: EntityId, rel: RelationId, tail: EntityId) -> bool {
        let nf = self.relations.len() as u32;
        let triple = if rel.is_inverse(nf) {
            Triple::new(tail, rel.inverse(nf), head)
        } else {
            Triple::new(head, rel, tail)
        };
        self.membership.contains(&triple)
    }

    /// True iff the triple appears in the train split; the open-world check
    /// used at training time.
    pub fn contains_train(&self, head: EntityId, rel: RelationId, tail: EntityId) -> bool {
        let nf = self.relations.len() as u32;
        let triple = if rel.is_inverse(nf) {
            Triple::new(tail, rel.inverse(nf), head)
        } else {
            Triple::new(head, rel, tail)
        };
        self.train_membership.contains(&triple)
    }

    /// Writes vocabulary and split files into `dir`; reloading reproduces
    /// identical id assignments and split contents.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_vocab(&dir.join("entities.tsv"), &self.entities)?;
        write_vocab(&dir.join("relations.tsv"), &self.relations)?;
        write_split(&dir.join("train.ids.tsv"), &self.train)?;
        write_split(&dir.join("valid.ids.tsv"), &self.valid)?;
        write_split(&dir.join("test.ids.tsv"), &self.test)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<TripleStore> {
        let entities = read_vocab(&dir.join("entities.tsv"))?;
        let relations = read_vocab(&dir.join("relations.tsv"))?;
        let train = read_split(&dir.join("train.ids.tsv"))?;
        let valid = read_split(&dir.join("valid.ids.tsv"))?;
        let test = read_split(&dir.join("test.ids.tsv"))?;
        let mut membership = HashSet::with_capacity(train.len() + valid.len() + test.len());
        for t in train.iter().chain(&valid).chain(&test) {
            membership.insert(*t);
        }
        let train_membership = train.iter().copied().collect();
        Ok(TripleStore {
            train,
            valid,
            test,
            entities,
            relations,
            membership,
            train_membership,
        })
    }
}

fn write_vocab(path: &Path, vocab: &Vocab) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for id in 0..vocab.len() as u32 {
        writeln!(w, "{}\t{}", id, vocab.name(id)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_vocab(path: &Path) -> Result<Vocab> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut vocab = Vocab::default();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut parts = line.splitn(2, '\t');
        let id = parts.next().and_then(|s| s.parse::<u32>().ok());
        let name = parts.next();
        match (id, name) {
            (Some(id), Some(name)) if id as usize == idx => {
                vocab.intern(name);
            }
            _ => {
                return Err(Error::BadArtifact {
                    path: path.to_owned(),
                    reason: format!("vocabulary line {} is not `id<TAB>name` in order", idx + 1),
                })
            }
        }
    }
    Ok(vocab)
}

fn write_split(path: &Path, triples: &[Triple]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for t in triples {
        writeln!(w, "{}\t{}\t{}", t.head.0, t.rel.0, t.tail.0).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_split(path: &Path) -> Result<Vec<Triple>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut triples = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let ids: Vec<u32> = line.split('\t').filter_map(|s| s.parse().ok()).collect();
        if ids.len() != 3 {
            return Err(Error::BadArtifact {
                path: path.to_owned(),
                reason: format!("split line {} is not three ids", idx + 1),
            });
        }
        triples.push(Triple::new(EntityId(ids[0]), RelationId(ids[1]), EntityId(ids[2])));
    }
    Ok(triples)
}

/// Loads a benchmark dataset from its three split files.
///
/// Duplicate triples within a split are dropped (count logged); a triple
/// already present in an earlier split is dropped from the later one so the
/// splits stay pairwise disjoint. Entities and relations seen only in
/// valid/test still enter the vocabulary.
pub fn load_dataset(train_path: &Path, valid_path: &Path, test_path: &Path) -> Result<TripleStore> {
    let mut entities = Vocab::default();
    let mut relations = Vocab::default();
    let mut membership = HashSet::new();

    let train = read_raw_split(train_path, &mut entities, &mut relations, &mut membership)?;
    if train.is_empty() {
        return Err(Error::EmptyTrainSplit {
            path: train_path.to_owned(),
        });
    }
    let valid = read_raw_split(valid_path, &mut entities, &mut relations, &mut membership)?;
    let test = read_raw_split(test_path, &mut entities, &mut relations, &mut membership)?;

    info!(
        "loaded dataset: {} entities, {} relations, {}/{}/{} train/valid/test triples",
        entities.len(),
        relations.len(),
        train.len(),
        valid.len(),
        test.len()
    );

    let train_membership = train.iter().copied().collect();
    Ok(TripleStore {
        train,
        valid,
        test,
        entities,
        relations,
        membership,
        train_membership,
    })
}

fn read_raw_split(
    path: &Path,
    entities: &mut Vocab,
    relations: &mut Vocab,
    membership: &mut HashSet<Triple>,
) -> Result<Vec<Triple>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut triples = Vec::new();
    let mut duplicates = 0usize;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedLine {
                path: path.to_owned(),
                line: idx + 1,
                found: fields.len(),
            });
        }
        let head = EntityId(entities.intern(fields[0]));
        let rel = RelationId(relations.intern(fields[1]));
        let tail = EntityId(entities.intern(fields[2]));
        let triple = Triple::new(head, rel, tail);
        if membership.insert(triple) {
            triples.push(triple);
        } else {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        warn!("{}: dropped {} duplicate triples", path.display(), duplicates);
    }
    Ok(triples)
}

/// Per-relation set of (head, tail) pairs, the unit of classifier training
/// data.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    pairs: HashSet<(EntityId, EntityId)>,
}

impl PairSet {
    pub fn new() -> Self {
        PairSet::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (EntityId, EntityId)>) -> Self {
        PairSet {
            pairs: pairs.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, head: EntityId, tail: EntityId) -> bool {
        self.pairs.insert((head, tail))
    }

    pub fn contains(&self, head: EntityId, tail: EntityId) -> bool {
        self.pairs.contains(&(head, tail))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntityId, EntityId)> + '_ {
        self.pairs.iter().copied()
    }

    /// Pairs in (head, tail) order; use this wherever iteration order matters.
    pub fn sorted_pairs(&self) -> Vec<(EntityId, EntityId)> {
        let mut v: Vec<_> = self.pairs.iter().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn union_with(&mut self, other: &PairSet) {
        for p in &other.pairs {
            self.pairs.insert(*p);
        }
    }
}

/// Deterministically ordered map from relation id to its pair set.
pub type PairSetMap = BTreeMap<RelationId, PairSet>;

/// Groups the train split into per-relation pair sets over `[0, R)`;
/// relations with no train triples get an empty set.
pub fn build_pair_sets(store: &TripleStore) -> PairSetMap {
    let mut map = PairSetMap::new();
    for r in 0..store.num_relations() as u32 {
        map.insert(RelationId(r), PairSet::new());
    }
    for t in &store.train {
        map.get_mut(&t.rel).expect("relation in vocab").insert(t.head, t.tail);
    }
    map
}

/// Extends a forward pair-set map to `[0, 2R)` by mirroring every pair;
/// forward sets are unchanged.
pub fn add_inverse_relations(pair_sets: &PairSetMap) -> PairSetMap {
    let num_forward = pair_sets.len() as u32;
    let mut out = pair_sets.clone();
    for (rel, set) in pair_sets {
        let inv = rel.inverse(num_forward);
        let mut mirrored = PairSet::new();
        for (h, t) in set.iter() {
            mirrored.insert(t, h);
        }
        out.insert(inv, mirrored);
    }
    out
}
