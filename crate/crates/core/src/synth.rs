//! Seeded synthetic corpora in the dump and question-set layouts.
//!
//! Entities have pseudo-word names and short introductory paragraphs. Each
//! paragraph mentions one other entity by name, so a "bridge" question can
//! describe entity A without naming the linked entity B, and a "comparison"
//! question names both. Useful for examples and tests when no real data is
//! around; nothing here imitates real recall numbers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus_io::DatasetQuestion;
use crate::eval::QuestionType;
use crate::index::Document;

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ren", "tas", "vo", "shi", "dra", "nel", "quo", "bar", "ti", "zen", "fu", "gol", "pri",
    "sa", "we", "ux", "hal", "mor", "ent", "ily", "cra", "dun", "ep", "ros", "vi", "yan", "ock",
];

const KINDS: &[(&str, &str, &str)] = &[
    ("novel", "written", "writer"),
    ("film", "directed", "director"),
    ("album", "recorded", "band"),
    ("bridge", "designed", "engineer"),
    ("company", "founded", "entrepreneur"),
    ("opera", "composed", "composer"),
];

const FILLER: &[&str] = &[
    "known", "for", "its", "early", "work", "across", "northern", "region", "widely", "praised", "during",
    "late", "century", "popular", "major", "award", "received", "several", "critics", "local", "history",
    "second", "largest", "original", "version", "published", "later", "became", "famous", "public",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub entities: usize,
    pub questions: usize,
    /// Fraction of questions that are comparisons, in percent.
    pub comparison_pct: u32,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            entities: 2_000,
            questions: 500,
            comparison_pct: 20,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    pub questions: Vec<DatasetQuestion>,
}

struct Entity {
    name: String,
    kind: usize,
    descriptor: Vec<String>,
    link: usize,
    year: u32,
}

fn word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(2..=3);
    (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect()
}

fn capitalized(rng: &mut ChaCha8Rng) -> String {
    let w = word(rng);
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => w,
    }
}

fn filler(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n)
        .map(|_| *FILLER.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn generate(opts: &SynthOptions) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let count = opts.entities.max(12);
    let mut names = std::collections::HashSet::new();
    let mut entities = Vec::with_capacity(count);
    while entities.len() < count {
        let name = format!("{} {}", capitalized(&mut rng), capitalized(&mut rng));
        if !names.insert(name.clone()) {
            continue;
        }
        let kind = rng.gen_range(0..KINDS.len());
        let descriptor = (0..3).map(|_| word(&mut rng)).collect();
        entities.push(Entity {
            name,
            kind,
            descriptor,
            link: 0,
            year: rng.gen_range(1850..2015),
        });
    }
    for i in 0..count {
        let mut j = rng.gen_range(0..count);
        while j == i {
            j = rng.gen_range(0..count);
        }
        entities[i].link = j;
    }

    let documents: Vec<Document> = entities
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (kind, verb, _) = KINDS[e.kind];
            let linked = &entities[e.link];
            let (_, _, linked_role) = KINDS[linked.kind];
            let sentences = vec![
                format!("{} is a {} {} {}.", e.name, kind, filler(&mut rng, 2), e.descriptor.join(" ")),
                format!(" It was {} by the {} {} in {}.", verb, linked_role, linked.name, e.year),
                format!(" {}.", filler(&mut rng, 6)),
            ];
            Document::new(i as u32, e.name.clone(), sentences)
        })
        .collect();

    let mut questions = Vec::with_capacity(opts.questions);
    for qi in 0..opts.questions {
        let a = rng.gen_range(0..count);
        let ea = &entities[a];
        let (q_type, b, question) = if rng.gen_range(0..100) < opts.comparison_pct {
            let b = (a + 1 + rng.gen_range(0..count - 1)) % count;
            let (kind, _, _) = KINDS[ea.kind];
            let q = format!("Are {} and {} both a {}?", ea.name, entities[b].name, kind);
            (QuestionType::Comparison, b, q)
        } else {
            let b = ea.link;
            let (kind, verb, _) = KINDS[ea.kind];
            let (_, _, role) = KINDS[entities[b].kind];
            let q = format!(
                "In which year was the {} {} {} by the {} who is {}?",
                ea.descriptor.join(" "),
                kind,
                verb,
                role,
                entities[b].descriptor[0]
            );
            (QuestionType::Bridge, b, q)
        };
        let mut context: Vec<(String, Vec<String>)> = vec![
            (documents[a].title.clone(), documents[a].sentences.clone()),
            (documents[b].title.clone(), documents[b].sentences.clone()),
        ];
        while context.len() < 10 {
            let d = &documents[rng.gen_range(0..count)];
            if context.iter().all(|(t, _)| *t != d.title) {
                context.push((d.title.clone(), d.sentences.clone()));
            }
        }
        context.shuffle(&mut rng);
        questions.push(DatasetQuestion {
            question_id: format!("synth-{qi:05}"),
            question,
            answer: Some(ea.year.to_string()),
            gold_titles: vec![documents[a].title.clone(), documents[b].title.clone()],
            supporting_facts: vec![
                (documents[a].title.clone(), 0),
                (documents[a].title.clone(), 1),
                (documents[b].title.clone(), 0),
            ],
            question_type: q_type,
            level: "synthetic".into(),
            context,
        });
    }
    SynthCorpus { documents, questions }
}
