//! Image Intrusion and Topic Matching items, and their scoring.
//!
//! Items are built from each topic's pool of "strongly associated"
//! documents: the top `depth` documents ranked by gamma among those whose
//! dominant topic is that topic. An intrusion item shows five frames from
//! one pool and one intruder from another topic's pool; a matching item
//! shows four rows of four frames from four distinct pools and a probe
//! frame from one of those pools that is not displayed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lda::LdaModel;
use crate::rng::{self, streams};
use crate::topics::ranked_dominant_docs;

pub const INTRUSION_SIZE: usize = 6;
pub const MATCHING_ROWS: usize = 4;
pub const MATCHING_ROW_LEN: usize = 4;
/// Frames needed from one pool: five for intrusion, four plus the probe for
/// matching.
const MIN_POOL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ImageIntrusion,
    TopicMatching,
}

impl TaskKind {
    pub const ALL: [TaskKind; 2] = [TaskKind::ImageIntrusion, TaskKind::TopicMatching];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::ImageIntrusion => "image_intrusion",
            TaskKind::TopicMatching => "topic_matching",
        }
    }

    /// Number of valid answers: positions for intrusion, rows for matching.
    pub fn choices(self) -> usize {
        match self {
            TaskKind::ImageIntrusion => INTRUSION_SIZE,
            TaskKind::TopicMatching => MATCHING_ROWS,
        }
    }

    fn min_topics(self) -> usize {
        match self {
            TaskKind::ImageIntrusion => 5,
            TaskKind::TopicMatching => MATCHING_ROWS,
        }
    }

    fn stream(self) -> u64 {
        streams::VALIDATION * 16
            + match self {
                TaskKind::ImageIntrusion => 0,
                TaskKind::TopicMatching => 1,
            }
    }
}

impl core::str::FromStr for TaskKind {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "image_intrusion" => Ok(TaskKind::ImageIntrusion),
            "topic_matching" => Ok(TaskKind::TopicMatching),
            other => Err(ValidationError::UnknownKind(other.into())),
        }
    }
}

/// A generated item. `key` is the intruder's position (intrusion) or the
/// probe's row (matching) and must never be sent to a coder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationItem {
    pub item_id: u32,
    pub kind: TaskKind,
    /// Intrusion: the six frames in display order. Matching: empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<String>,
    /// Matching: four rows of four frames. Intrusion: empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<String>,
    pub key: usize,
    /// Intrusion: `[shared topic, intruder topic]`. Matching: row topics.
    pub topics: Vec<usize>,
}

impl ValidationItem {
    pub fn frames(&self) -> impl Iterator<Item = &String> {
        self.images
            .iter()
            .chain(self.rows.iter().flatten())
            .chain(self.probe.iter())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error(
        "{kind:?} needs {needed_topics} topics with at least {needed_docs} dominant documents; \
         eligible pool sizes per topic: {pool_sizes:?}"
    )]
    Insufficient {
        kind: TaskKind,
        needed_topics: usize,
        needed_docs: usize,
        pool_sizes: Vec<usize>,
    },
    #[error("{frames} frame labels given for a model of {n_docs} documents")]
    FrameMismatch { frames: usize, n_docs: usize },
    #[error("unknown task kind {0:?}")]
    UnknownKind(String),
    #[error("response from {coder:?} references unknown item {item_id}")]
    UnknownItem { coder: String, item_id: u32 },
    #[error("response from {coder:?} to item {item_id} has choice {choice} outside 0..{limit}")]
    ChoiceOutOfRange {
        coder: String,
        item_id: u32,
        choice: usize,
        limit: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemSpec {
    pub kind: TaskKind,
    pub n_items: usize,
    /// How many top documents per topic count as strongly associated.
    pub depth: usize,
    pub seed: u64,
    /// Added to every generated index to form `item_id`.
    pub first_id: u32,
}

impl ItemSpec {
    pub fn new(kind: TaskKind, seed: u64) -> Self {
        Self {
            kind,
            n_items: 105,
            depth: 10,
            seed,
            first_id: 1,
        }
    }
}

/// Generate `spec.n_items` items. `frames[d]` labels model document `d`.
pub fn generate_items(
    model: &LdaModel,
    frames: &[String],
    spec: &ItemSpec,
) -> Result<Vec<ValidationItem>, ValidationError> {
    if frames.len() != model.n_docs {
        return Err(ValidationError::FrameMismatch {
            frames: frames.len(),
            n_docs: model.n_docs,
        });
    }
    let pools = ranked_dominant_docs(model, spec.depth);
    let eligible: Vec<usize> = (0..model.k).filter(|&t| pools[t].len() >= MIN_POOL).collect();
    if eligible.len() < spec.kind.min_topics() {
        return Err(ValidationError::Insufficient {
            kind: spec.kind,
            needed_topics: spec.kind.min_topics(),
            needed_docs: MIN_POOL,
            pool_sizes: pools.iter().map(Vec::len).collect(),
        });
    }
    let mut rng = rng::stream(spec.seed, spec.kind.stream());
    let label = |d: &usize| frames[*d].clone();
    let mut items = Vec::with_capacity(spec.n_items);
    for i in 0..spec.n_items {
        let item_id = spec.first_id + i as u32;
        let item = match spec.kind {
            TaskKind::ImageIntrusion => {
                let shared = *eligible.choose(&mut rng).expect("eligible topics");
                let others: Vec<usize> = (0..model.k)
                    .filter(|&t| t != shared && !pools[t].is_empty())
                    .collect();
                let intruder_topic = *others.choose(&mut rng).expect("other topics");
                let mut shown: Vec<(usize, bool)> = pools[shared]
                    .choose_multiple(&mut rng, INTRUSION_SIZE - 1)
                    .map(|&d| (d, false))
                    .collect();
                let intruder = *pools[intruder_topic].choose(&mut rng).expect("non-empty");
                shown.push((intruder, true));
                shown.shuffle(&mut rng);
                ValidationItem {
                    item_id,
                    kind: spec.kind,
                    key: shown.iter().position(|&(_, x)| x).expect("intruder present"),
                    images: shown.iter().map(|(d, _)| label(d)).collect(),
                    rows: Vec::new(),
                    probe: None,
                    topics: alloc::vec![shared, intruder_topic],
                }
            }
            TaskKind::TopicMatching => {
                let mut topics: Vec<usize> = eligible
                    .choose_multiple(&mut rng, MATCHING_ROWS)
                    .copied()
                    .collect();
                topics.shuffle(&mut rng);
                let key = rng.random_range(0..MATCHING_ROWS);
                let mut probe = None;
                let rows = topics
                    .iter()
                    .enumerate()
                    .map(|(r, &t)| {
                        let take = MATCHING_ROW_LEN + usize::from(r == key);
                        let mut picked: Vec<usize> =
                            pools[t].choose_multiple(&mut rng, take).copied().collect();
                        if r == key {
                            probe = picked.pop();
                        }
                        picked.iter().map(label).collect()
                    })
                    .collect();
                ValidationItem {
                    item_id,
                    kind: spec.kind,
                    images: Vec::new(),
                    rows,
                    probe: probe.as_ref().map(label),
                    key,
                    topics,
                }
            }
        };
        items.push(item);
    }
    Ok(items)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub coder: String,
    pub item_id: u32,
    pub choice: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoderScore {
    pub coder: String,
    pub answered: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub coder_a: String,
    pub coder_b: String,
    /// Items both coders answered.
    pub n_common: usize,
    pub percent_agreement: Option<f64>,
    pub kappa: Option<f64>,
    /// Set when kappa is undefined or degenerate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub kind: TaskKind,
    pub n_items: usize,
    pub coders: Vec<CoderScore>,
    pub agreement: Vec<PairAgreement>,
    /// Coders with responses elsewhere but none for this task.
    pub excluded_coders: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub tasks: Vec<TaskScore>,
}

impl ScoreReport {
    pub fn task(&self, kind: TaskKind) -> Option<&TaskScore> {
        self.tasks.iter().find(|t| t.kind == kind)
    }
}

/// Accuracy per coder and task, plus pairwise percent agreement and Cohen's
/// kappa over each pair's commonly answered items. Only the first response
/// per `(coder, item)` counts.
pub fn score(items: &[ValidationItem], responses: &[Response]) -> Result<ScoreReport, ValidationError> {
    let by_id: BTreeMap<u32, &ValidationItem> = items.iter().map(|i| (i.item_id, i)).collect();
    // kind -> coder -> item -> choice
    let mut answers: BTreeMap<TaskKind, BTreeMap<&str, BTreeMap<u32, usize>>> = BTreeMap::new();
    let mut all_coders: BTreeSet<&str> = BTreeSet::new();
    for r in responses {
        let item = by_id.get(&r.item_id).ok_or_else(|| ValidationError::UnknownItem {
            coder: r.coder.clone(),
            item_id: r.item_id,
        })?;
        if r.choice >= item.kind.choices() {
            return Err(ValidationError::ChoiceOutOfRange {
                coder: r.coder.clone(),
                item_id: r.item_id,
                choice: r.choice,
                limit: item.kind.choices(),
            });
        }
        all_coders.insert(&r.coder);
        answers
            .entry(item.kind)
            .or_default()
            .entry(&r.coder)
            .or_default()
            .entry(r.item_id)
            .or_insert(r.choice);
    }

    let mut tasks = Vec::new();
    for kind in TaskKind::ALL {
        let n_items = items.iter().filter(|i| i.kind == kind).count();
        let empty = BTreeMap::new();
        let per_coder = answers.get(&kind).unwrap_or(&empty);
        if n_items == 0 && per_coder.is_empty() {
            continue;
        }
        let coders: Vec<CoderScore> = per_coder
            .iter()
            .map(|(coder, picks)| {
                let correct = picks.iter().filter(|(id, c)| by_id[id].key == **c).count();
                CoderScore {
                    coder: (*coder).into(),
                    answered: picks.len(),
                    correct,
                    accuracy: correct as f64 / picks.len() as f64,
                }
            })
            .collect();
        let names: Vec<&str> = per_coder.keys().copied().collect();
        let mut agreement = Vec::new();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                agreement.push(pair_agreement(a, b, &per_coder[a], &per_coder[b]));
            }
        }
        tasks.push(TaskScore {
            kind,
            n_items,
            coders,
            agreement,
            excluded_coders: all_coders
                .iter()
                .filter(|c| !per_coder.contains_key(*c))
                .map(|c| (*c).into())
                .collect(),
        });
    }
    Ok(ScoreReport { tasks })
}

fn pair_agreement(
    a: &str,
    b: &str,
    picks_a: &BTreeMap<u32, usize>,
    picks_b: &BTreeMap<u32, usize>,
) -> PairAgreement {
    let pairs: Vec<(usize, usize)> = picks_a
        .iter()
        .filter_map(|(id, &ca)| picks_b.get(id).map(|&cb| (ca, cb)))
        .collect();
    let n = pairs.len();
    let mut out = PairAgreement {
        coder_a: a.into(),
        coder_b: b.into(),
        n_common: n,
        percent_agreement: None,
        kappa: None,
        kappa_note: None,
    };
    if n == 0 {
        out.kappa_note = Some("no commonly answered items".into());
        return out;
    }
    let agree = pairs.iter().filter(|(x, y)| x == y).count();
    out.percent_agreement = Some(agree as f64 / n as f64);
    let (kappa, note) = cohen_kappa(&pairs);
    out.kappa = kappa;
    out.kappa_note = note;
    out
}

/// Cohen's kappa over paired categorical choices. When chance agreement is
/// 1 (both coders used a single identical category) the statistic is 0/0:
/// it is reported as 1.0 if observed agreement is perfect, otherwise left
/// undefined, and flagged either way.
pub fn cohen_kappa(pairs: &[(usize, usize)]) -> (Option<f64>, Option<String>) {
    let n = pairs.len();
    if n == 0 {
        return (None, Some("no paired choices".into()));
    }
    let mut marg_a: BTreeMap<usize, u64> = BTreeMap::new();
    let mut marg_b: BTreeMap<usize, u64> = BTreeMap::new();
    let mut agree = 0u64;
    for &(x, y) in pairs {
        *marg_a.entry(x).or_default() += 1;
        *marg_b.entry(y).or_default() += 1;
        agree += u64::from(x == y);
    }
    let n2 = (n as u64) * (n as u64);
    let chance: u64 = marg_a
        .iter()
        .map(|(c, &na)| na * marg_b.get(c).copied().unwrap_or(0))
        .sum();
    if chance == n2 {
        return if agree == n as u64 {
            (Some(1.0), Some("degenerate marginals; perfect agreement reported as 1.0".into()))
        } else {
            (None, Some("degenerate marginals; kappa undefined".into()))
        };
    }
    let p_o = agree as f64 / n as f64;
    let p_e = chance as f64 / n2 as f64;
    (Some((p_o - p_e) / (1.0 - p_e)), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    /// `k` topics, `per_topic` documents each, strongly peaked on their topic.
    fn synthetic(k: usize, per_topic: usize) -> (LdaModel, Vec<String>) {
        let mut gamma = Vec::new();
        let mut frames = Vec::new();
        for t in 0..k {
            for j in 0..per_topic {
                let peak = 0.9 - 0.01 * j as f64;
                let rest = (1.0 - peak) / (k - 1) as f64;
                gamma.extend((0..k).map(|s| if s == t { peak } else { rest }));
                frames.push(format!("v{t}/frame_{}.jpg", j + 1));
            }
        }
        let model = LdaModel {
            k,
            alpha: 0.1,
            eta: 0.01,
            seed: 0,
            iters: 1,
            vocab_size: 1,
            n_docs: k * per_topic,
            beta: vec![1.0; k],
            gamma,
            theta: vec![1.0 / k as f64; k],
        };
        (model, frames)
    }

    fn topic_of(frame: &str) -> usize {
        frame[1..frame.find('/').unwrap()].parse().unwrap()
    }

    #[test]
    fn intrusion_structure() {
        let (m, frames) = synthetic(6, 12);
        let items = generate_items(&m, &frames, &ItemSpec::new(TaskKind::ImageIntrusion, 3)).unwrap();
        assert_eq!(items.len(), 105);
        for (i, it) in items.iter().enumerate() {
            assert_eq!(it.item_id, i as u32 + 1);
            assert_eq!(it.images.len(), 6);
            let distinct: BTreeSet<_> = it.images.iter().collect();
            assert_eq!(distinct.len(), 6);
            let intruder = topic_of(&it.images[it.key]);
            assert_ne!(intruder, it.topics[0]);
            for (p, f) in it.images.iter().enumerate() {
                if p != it.key {
                    assert_eq!(topic_of(f), it.topics[0]);
                    // Within the top-10 pool of its topic.
                    let rank: usize = f[f.find("frame_").unwrap() + 6..f.len() - 4].parse().unwrap();
                    assert!(rank <= 10);
                }
            }
        }
    }

    #[test]
    fn matching_structure() {
        let (m, frames) = synthetic(5, 6);
        let items = generate_items(&m, &frames, &ItemSpec::new(TaskKind::TopicMatching, 9)).unwrap();
        for it in &items {
            assert_eq!(it.rows.len(), 4);
            let row_topics: Vec<usize> = it.rows.iter().map(|r| topic_of(&r[0])).collect();
            assert_eq!(row_topics, it.topics);
            let distinct_topics: BTreeSet<_> = row_topics.iter().collect();
            assert_eq!(distinct_topics.len(), 4);
            for row in &it.rows {
                assert_eq!(row.len(), 4);
                assert!(row.iter().all(|f| topic_of(f) == topic_of(&row[0])));
            }
            let all: BTreeSet<_> = it.frames().collect();
            assert_eq!(all.len(), 17);
            let probe = it.probe.as_ref().unwrap();
            assert_eq!(topic_of(probe), it.topics[it.key]);
        }
    }

    #[test]
    fn generation_is_seeded() {
        let (m, frames) = synthetic(6, 10);
        let spec = ItemSpec::new(TaskKind::ImageIntrusion, 42);
        assert_eq!(
            generate_items(&m, &frames, &spec).unwrap(),
            generate_items(&m, &frames, &spec).unwrap()
        );
        let other = ItemSpec { seed: 43, ..spec.clone() };
        assert_ne!(
            generate_items(&m, &frames, &spec).unwrap(),
            generate_items(&m, &frames, &other).unwrap()
        );
    }

    #[test]
    fn insufficient_topics_reports_pools() {
        let (m, frames) = synthetic(4, 8);
        let err = generate_items(&m, &frames, &ItemSpec::new(TaskKind::ImageIntrusion, 0)).unwrap_err();
        match err {
            ValidationError::Insufficient { pool_sizes, needed_topics, .. } => {
                assert_eq!(needed_topics, 5);
                assert_eq!(pool_sizes, vec![8, 8, 8, 8]);
            }
            e => panic!("{e:?}"),
        }
        let (m, frames) = synthetic(4, 4);
        assert!(generate_items(&m, &frames, &ItemSpec::new(TaskKind::TopicMatching, 0)).is_err());
        assert!(generate_items(&m, &frames[1..], &ItemSpec::new(TaskKind::TopicMatching, 0)).is_err());
    }

    fn resp(coder: &str, item_id: u32, choice: usize) -> Response {
        Response { coder: coder.into(), item_id, choice }
    }

    #[test]
    fn key_replay_scores_perfectly() {
        let (m, frames) = synthetic(6, 10);
        let items = generate_items(&m, &frames, &ItemSpec::new(TaskKind::ImageIntrusion, 1)).unwrap();
        let mut rs = Vec::new();
        for it in &items {
            rs.push(resp("c1", it.item_id, it.key));
            rs.push(resp("c2", it.item_id, it.key));
        }
        let report = score(&items, &rs).unwrap();
        let task = report.task(TaskKind::ImageIntrusion).unwrap();
        assert!(task.coders.iter().all(|c| c.accuracy == 1.0));
        assert_eq!(task.agreement[0].percent_agreement, Some(1.0));
        assert_eq!(task.agreement[0].kappa, Some(1.0));
    }

    #[test]
    fn accuracy_and_agreement_are_separate() {
        let (m, frames) = synthetic(6, 10);
        let items = generate_items(&m, &frames, &ItemSpec { n_items: 30, ..ItemSpec::new(TaskKind::ImageIntrusion, 5) }).unwrap();
        let mut rs = Vec::new();
        for it in &items {
            rs.push(resp("keys", it.item_id, it.key));
            // Always wrong, always the same pick.
            let wrong = if it.key == 0 { 1 } else { 0 };
            rs.push(resp("wrong_a", it.item_id, wrong));
            rs.push(resp("wrong_b", it.item_id, wrong));
        }
        let report = score(&items, &rs).unwrap();
        let task = report.task(TaskKind::ImageIntrusion).unwrap();
        let acc: BTreeMap<_, _> = task.coders.iter().map(|c| (c.coder.as_str(), c.accuracy)).collect();
        assert_eq!(acc["keys"], 1.0);
        assert_eq!(acc["wrong_a"], 0.0);
        let ab = task.agreement.iter().find(|p| p.coder_a == "wrong_a" && p.coder_b == "wrong_b").unwrap();
        assert_eq!(ab.percent_agreement, Some(1.0));
        let ka = task.agreement.iter().find(|p| p.coder_a == "keys" && p.coder_b == "wrong_a").unwrap();
        assert_eq!(ka.percent_agreement, Some(0.0));
    }

    #[test]
    fn kappa_cases() {
        // Textbook: 50 items, a/b marginals (25,25)/(30,20), 35 agreements.
        let mut pairs = Vec::new();
        pairs.extend(core::iter::repeat_n((0, 0), 20));
        pairs.extend(core::iter::repeat_n((0, 1), 5));
        pairs.extend(core::iter::repeat_n((1, 0), 10));
        pairs.extend(core::iter::repeat_n((1, 1), 15));
        let (k, note) = cohen_kappa(&pairs);
        // p_o = 0.7, p_e = 0.5*0.6 + 0.5*0.4 = 0.5
        assert!((k.unwrap() - 0.4).abs() < 1e-12);
        assert!(note.is_none());

        let (k, note) = cohen_kappa(&[(3, 3), (3, 3)]);
        assert_eq!(k, Some(1.0));
        assert!(note.is_some());
        assert_eq!(cohen_kappa(&[]).0, None);
    }

    #[test]
    fn scoring_errors_and_exclusions() {
        let (m, frames) = synthetic(6, 10);
        let mut items = generate_items(&m, &frames, &ItemSpec { n_items: 3, ..ItemSpec::new(TaskKind::ImageIntrusion, 5) }).unwrap();
        let matching = generate_items(&m, &frames, &ItemSpec { n_items: 3, first_id: 100, ..ItemSpec::new(TaskKind::TopicMatching, 5) }).unwrap();
        items.extend(matching);
        assert!(matches!(score(&items, &[resp("a", 999, 0)]), Err(ValidationError::UnknownItem { .. })));
        assert!(matches!(score(&items, &[resp("a", 100, 4)]), Err(ValidationError::ChoiceOutOfRange { .. })));

        let rs = vec![resp("a", 1, 0), resp("a", 1, 5), resp("b", 100, 1)];
        let report = score(&items, &rs).unwrap();
        let intr = report.task(TaskKind::ImageIntrusion).unwrap();
        assert_eq!(intr.coders.len(), 1);
        assert_eq!(intr.coders[0].answered, 1);
        assert_eq!(intr.excluded_coders, vec![String::from("b")]);
        let mat = report.task(TaskKind::TopicMatching).unwrap();
        assert_eq!(mat.excluded_coders, vec![String::from("a")]);
    }
}
