//! Relation priors: subrelation inference, positive-sample augmentation,
//! ranges, tail co-occurrence, and the local-closed-world index.
//!
//! All analyses are pure functions over immutable pair sets. Ranges,
//! co-occurrence tables and lcw indices are computed from the original
//! (pre-augmentation) pair sets; augmented sets only enlarge classifier
//! positives and the sampler's exclusion test.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::kg::{EntityId, PairSet, PairSetMap, RelationId};

/// Fraction of `r2`'s pairs that also appear under `r1`:
/// `|G(r1) ∩ G(r2)| / |G(r2)|`. An empty `G(r2)` gives no evidence of a
/// subrelation, so it scores 0.
pub fn inference_index(r1: RelationId, r2: RelationId, pair_sets: &PairSetMap) -> f64 {
    let g2 = &pair_sets[&r2];
    if g2.is_empty() {
        warn!("inference index with empty pair set for relation {}", r2.0);
        return 0.0;
    }
    let g1 = &pair_sets[&r1];
    let common = g2.iter().filter(|&(h, t)| g1.contains(h, t)).count();
    common as f64 / g2.len() as f64
}

/// All ordered pairs `(r1, r2)` with `inference_index(r1, r2) > delta_sub`,
/// meaning `r2` is a subrelation of `r1`. Self-pairs are excluded; the list
/// is sorted for deterministic downstream use.
pub fn detect_subrelations(pair_sets: &PairSetMap, delta_sub: f64) -> Vec<(RelationId, RelationId)> {
    // Invert once: intersections accumulate per pair of relations sharing a
    // (head, tail), which is far cheaper than all-pairs set intersection.
    let mut by_pair: HashMap<(EntityId, EntityId), Vec<RelationId>> = HashMap::new();
    for (rel, set) in pair_sets {
        for pair in set.iter() {
            by_pair.entry(pair).or_default().push(*rel);
        }
    }
    let mut common: HashMap<(RelationId, RelationId), usize> = HashMap::new();
    for rels in by_pair.values() {
        for (i, &ra) in rels.iter().enumerate() {
            for &rb in &rels[i + 1..] {
                let key = if ra < rb { (ra, rb) } else { (rb, ra) };
                *common.entry(key).or_insert(0) += 1;
            }
        }
    }
    let mut links = Vec::new();
    for (&(ra, rb), &count) in &common {
        // infer(ra | rb) uses |G(rb)| as denominator and vice versa
        if count as f64 / pair_sets[&rb].len() as f64 > delta_sub {
            links.push((ra, rb));
        }
        if count as f64 / pair_sets[&ra].len() as f64 > delta_sub {
            links.push((rb, ra));
        }
    }
    links.sort_unstable();
    links
}

/// Applies subrelation links to positive sets: each link `(r1, r2)` grows
/// `r1`'s positives by `r2`'s original pairs. Mutual links make both
/// relations share the union. Right-hand sides always come from the
/// pre-augmentation sets, so links do not chain transitively.
pub fn augment_positives(
    pair_sets: &PairSetMap,
    links: &[(RelationId, RelationId)],
) -> PairSetMap {
    let mut out = pair_sets.clone();
    for (r1, r2) in links {
        let borrowed = &pair_sets[r2];
        out.get_mut(r1).expect("link relation exists").union_with(borrowed);
    }
    out
}

/// Tail entities observed under the relation, sorted ascending.
pub fn compute_range(pair_set: &PairSet) -> Vec<EntityId> {
    let mut range: Vec<EntityId> = pair_set.iter().map(|(_, t)| t).collect();
    range.sort_unstable();
    range.dedup();
    range
}

/// Number of heads linked to both `t` and `t_other` in the pair set.
pub fn co_occurrence(pair_set: &PairSet, t: EntityId, t_other: EntityId) -> usize {
    if t == t_other {
        return pair_set.iter().filter(|&(_, tail)| tail == t).count();
    }
    let mut heads_of_t: Vec<EntityId> = Vec::new();
    let mut heads_of_other: Vec<EntityId> = Vec::new();
    for (h, tail) in pair_set.iter() {
        if tail == t {
            heads_of_t.push(h);
        } else if tail == t_other {
            heads_of_other.push(h);
        }
    }
    heads_of_other.sort_unstable();
    heads_of_t
        .iter()
        .filter(|h| heads_of_other.binary_search(h).is_ok())
        .count()
}

/// Estimates how well the relation satisfies the local-closed-world
/// assumption: pairs are dealt round-robin into `k` folds after sorting by
/// (head, tail), and the returned index is the fraction of samples whose
/// tail also appears outside its own fold. Deterministic by construction.
pub fn lcw_index(pair_set: &PairSet, k: usize) -> f64 {
    let n = pair_set.len();
    if n == 0 {
        warn!("lcw index of an empty pair set; returning 0");
        return 0.0;
    }
    let k = if n < k {
        warn!("lcw index: {} pairs < {} folds, using leave-one-out", n, k);
        n
    } else {
        k.max(1)
    };
    let sorted = pair_set.sorted_pairs();
    let mut total: HashMap<EntityId, usize> = HashMap::new();
    let mut per_fold: HashMap<(EntityId, usize), usize> = HashMap::new();
    for (i, &(_, t)) in sorted.iter().enumerate() {
        *total.entry(t).or_insert(0) += 1;
        *per_fold.entry((t, i % k)).or_insert(0) += 1;
    }
    let mut missing = 0usize;
    for (i, &(_, t)) in sorted.iter().enumerate() {
        if total[&t] == per_fold[&(t, i % k)] {
            missing += 1;
        }
    }
    1.0 - missing as f64 / n as f64
}

/// Derived priors for one relation.
#[derive(Debug, Clone)]
pub struct RelationProfile {
    pub rel: RelationId,
    /// Observed tails, sorted ascending.
    pub range: Vec<EntityId>,
    /// Local-closed-world index in [0, 1].
    pub lcw: f64,
    /// Relations whose pair set is (approximately) contained in this one's.
    pub subrelations: Vec<RelationId>,
    /// Sparse symmetric co-occurrence counts, keyed by (min, max) tail pair.
    cooc: HashMap<(EntityId, EntityId), u32>,
}

impl RelationProfile {
    pub fn in_range(&self, t: EntityId) -> bool {
        self.range.binary_search(&t).is_ok()
    }

    /// Co-occurrence count for a tail pair; pairs absent from the sparse
    /// table count 0.
    pub fn cooc_count(&self, t: EntityId, t_other: EntityId) -> u32 {
        let key = if t <= t_other { (t, t_other) } else { (t_other, t) };
        self.cooc.get(&key).copied().unwrap_or(0)
    }

    fn sorted_cooc(&self) -> Vec<(EntityId, EntityId, u32)> {
        let mut entries: Vec<_> = self.cooc.iter().map(|(&(a, b), &c)| (a, b, c)).collect();
        entries.sort_unstable();
        entries
    }
}

/// Parameters for profile construction.
#[derive(Debug, Clone, Copy)]
pub struct ProfileParams {
    /// Strict threshold on the inference index for subrelation links.
    pub delta_sub: f64,
    /// Fold count for the lcw index.
    pub lcw_folds: usize,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams {
            delta_sub: 0.8,
            lcw_folds: 5,
        }
    }
}

/// Builds the profile of one relation from its (pre-augmentation) pair set.
pub fn build_profile(
    rel: RelationId,
    pair_set: &PairSet,
    subrelations: Vec<RelationId>,
    lcw_folds: usize,
) -> RelationProfile {
    let range = compute_range(pair_set);
    let lcw = lcw_index(pair_set, lcw_folds);

    // One pass per head: every unordered tail pair sharing that head
    // co-occurs once.
    let mut tails_by_head: HashMap<EntityId, Vec<EntityId>> = HashMap::new();
    for (h, t) in pair_set.iter() {
        tails_by_head.entry(h).or_default().push(t);
    }
    let mut cooc: HashMap<(EntityId, EntityId), u32> = HashMap::new();
    for tails in tails_by_head.values_mut() {
        tails.sort_unstable();
        for i in 0..tails.len() {
            for j in i + 1..tails.len() {
                *cooc.entry((tails[i], tails[j])).or_insert(0) += 1;
            }
        }
    }

    RelationProfile {
        rel,
        range,
        lcw,
        subrelations,
        cooc,
    }
}

/// Profiles for every relation in the map, with subrelation links detected
/// at `params.delta_sub`.
pub fn build_profiles(
    pair_sets: &PairSetMap,
    params: ProfileParams,
) -> BTreeMap<RelationId, RelationProfile> {
    let links = detect_subrelations(pair_sets, params.delta_sub);
    let mut subrels: BTreeMap<RelationId, Vec<RelationId>> = BTreeMap::new();
    for &(r1, r2) in &links {
        subrels.entry(r1).or_default().push(r2);
    }
    pair_sets
        .iter()
        .map(|(rel, set)| {
            let subs = subrels.remove(rel).unwrap_or_default();
            (*rel, build_profile(*rel, set, subs, params.lcw_folds))
        })
        .collect()
}

const PROFILE_HEADER: &str = "# kgboost relation profiles v1";

/// Persists profiles as structured text. Co-occurrence entries are written
/// only above `delta_rcwc`, the operative sampling threshold; entries at or
/// below it never exclude a candidate, so the reloaded profiles sample
/// identically.
pub fn save_profiles(
    path: &Path,
    profiles: &BTreeMap<RelationId, RelationProfile>,
    delta_rcwc: u32,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", PROFILE_HEADER).map_err(io)?;
    writeln!(w, "delta_rcwc {}", delta_rcwc).map_err(io)?;
    for profile in profiles.values() {
        writeln!(w, "profile {}", profile.rel.0).map_err(io)?;
        writeln!(w, "lcw {}", profile.lcw).map_err(io)?;
        write!(w, "range {}", profile.range.len()).map_err(io)?;
        for t in &profile.range {
            write!(w, " {}", t.0).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        write!(w, "subrel {}", profile.subrelations.len()).map_err(io)?;
        for r in &profile.subrelations {
            write!(w, " {}", r.0).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        let gated: Vec<_> = profile
            .sorted_cooc()
            .into_iter()
            .filter(|&(_, _, c)| c > delta_rcwc)
            .collect();
        writeln!(w, "cooc {}", gated.len()).map_err(io)?;
        for (a, b, c) in gated {
            writeln!(w, "{} {} {}", a.0, b.0, c).map_err(io)?;
        }
        writeln!(w, "end").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_profiles(path: &Path) -> Result<BTreeMap<RelationId, RelationProfile>> {
    let bad = |reason: String| Error::BadArtifact {
        path: path.to_owned(),
        reason,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let mut next = || -> Result<Option<String>> {
        match lines.next() {
            Some(Ok(l)) => Ok(Some(l)),
            Some(Err(e)) => Err(Error::io(path, e)),
            None => Ok(None),
        }
    };
    match next()? {
        Some(h) if h == PROFILE_HEADER => {}
        _ => return Err(bad("missing profile header".into())),
    }
    match next()? {
        Some(l) if l.starts_with("delta_rcwc ") => {}
        _ => return Err(bad("missing delta_rcwc line".into())),
    }
    let mut profiles = BTreeMap::new();
    loop {
        let line = match next()? {
            Some(l) => l,
            None => break,
        };
        let rel = line
            .strip_prefix("profile ")
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| bad(format!("expected `profile <id>`, got {:?}", line)))?;
        let lcw = next()?
            .and_then(|l| l.strip_prefix("lcw ").and_then(|s| s.parse::<f64>().ok()))
            .ok_or_else(|| bad("expected `lcw <value>`".into()))?;
        let range = parse_id_list(&next()?.unwrap_or_default(), "range")
            .map(|v| v.into_iter().map(EntityId).collect::<Vec<_>>())
            .ok_or_else(|| bad("expected `range <n> <ids...>`".into()))?;
        let subrelations = parse_id_list(&next()?.unwrap_or_default(), "subrel")
            .map(|v| v.into_iter().map(RelationId).collect::<Vec<_>>())
            .ok_or_else(|| bad("expected `subrel <n> <ids...>`".into()))?;
        let n_cooc = next()?
            .and_then(|l| l.strip_prefix("cooc ").and_then(|s| s.parse::<usize>().ok()))
            .ok_or_else(|| bad("expected `cooc <n>`".into()))?;
        let mut cooc = HashMap::with_capacity(n_cooc);
        for _ in 0..n_cooc {
            let line = next()?.ok_or_else(|| bad("truncated cooc block".into()))?;
            let nums: Vec<u32> = line.split(' ').filter_map(|s| s.parse().ok()).collect();
            if nums.len() != 3 {
                return Err(bad(format!("bad cooc entry {:?}", line)));
            }
            cooc.insert((EntityId(nums[0]), EntityId(nums[1])), nums[2]);
        }
        match next()? {
            Some(l) if l == "end" => {}
            _ => return Err(bad("missing `end`".into())),
        }
        profiles.insert(
            RelationId(rel),
            RelationProfile {
                rel: RelationId(rel),
                range,
                lcw,
                subrelations,
                cooc,
            },
        );
    }
    Ok(profiles)
}

fn parse_id_list(line: &str, prefix: &str) -> Option<Vec<u32>> {
    let rest = line.strip_prefix(prefix)?.trim_start();
    let mut parts = rest.split(' ').filter(|s| !s.is_empty());
    let n: usize = parts.next()?.parse().ok()?;
    let ids: Vec<u32> = parts.map(|s| s.parse().ok()).collect::<Option<_>>()?;
    if ids.len() != n {
        return None;
    }
    Some(ids)
}

/// Persists pair-set maps (original or augmented) as structured text.
pub fn save_pair_sets(path: &Path, pair_sets: &PairSetMap) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "# kgboost pair sets v1").map_err(io)?;
    for (rel, set) in pair_sets {
        writeln!(w, "relation {} {}", rel.0, set.len()).map_err(io)?;
        for (h, t) in set.sorted_pairs() {
            writeln!(w, "{} {}", h.0, t.0).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn load_pair_sets(path: &Path) -> Result<PairSetMap> {
    let bad = |reason: String| Error::BadArtifact {
        path: path.to_owned(),
        reason,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h == "# kgboost pair sets v1" => {}
        _ => return Err(bad("missing pair-set header".into())),
    }
    let mut map = PairSetMap::new();
    let mut current: Option<(RelationId, usize)> = None;
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(rest) = line.strip_prefix("relation ") {
            let nums: Vec<usize> = rest.split(' ').filter_map(|s| s.parse().ok()).collect();
            if nums.len() != 2 {
                return Err(bad(format!("bad relation line {:?}", line)));
            }
            let rel = RelationId(nums[0] as u32);
            map.insert(rel, PairSet::new());
            current = Some((rel, nums[1]));
        } else {
            let (rel, _) = current.ok_or_else(|| bad("pair before relation line".into()))?;
            let nums: Vec<u32> = line.split(' ').filter_map(|s| s.parse().ok()).collect();
            if nums.len() != 2 {
                return Err(bad(format!("bad pair line {:?}", line)));
            }
            map.get_mut(&rel)
                .unwrap()
                .insert(EntityId(nums[0]), EntityId(nums[1]));
        }
    }
    Ok(map)
}
