//! Templated CQR tuples with a single relevant sentence per question.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::curation::{CurationTuple, FilterScores, SentenceRef};

const NAMES: &[&str] = &["Alice", "Bruno", "Chloe", "Dmitri", "Elena", "Farid", "Grace", "Hiro"];
const CITIES: &[&str] = &["Paris", "Lima", "Oslo", "Cairo", "Seoul", "Quito", "Dublin", "Perth"];
const DRINKS: &[&str] = &["tea", "coffee", "milk", "cider", "juice", "cocoa", "lemonade", "water"];
const JOBS: &[&str] = &["nurse", "pilot", "baker", "lawyer", "farmer", "painter", "chemist", "teacher"];

#[derive(Clone, Copy)]
enum Relation {
    City,
    Drink,
    Job,
}

const RELATIONS: [Relation; 3] = [Relation::City, Relation::Drink, Relation::Job];

fn fact(rel: Relation, name: &str, rng: &mut ChaCha8Rng) -> String {
    match rel {
        Relation::City => format!("{name} lives in {}.", CITIES.choose(rng).unwrap()),
        Relation::Drink => format!("{name} drinks {}.", DRINKS.choose(rng).unwrap()),
        Relation::Job => format!("{name} works as a {}.", JOBS.choose(rng).unwrap()),
    }
}

fn question(rel: Relation, name: &str) -> String {
    match rel {
        Relation::City => format!("Which city is {name} from?"),
        Relation::Drink => format!("What does {name} like to sip?"),
        Relation::Job => format!("What is the occupation of {name}?"),
    }
}

fn answer(positive: &str) -> String {
    positive
        .trim_end_matches('.')
        .rsplit(' ')
        .next()
        .unwrap_or_default()
        .to_string()
}

/// `n` tuples. Each context states three facts about each of two people in
/// shuffled order. The two negatives are the same person's fact of another
/// relation and the other person's fact of the asked relation.
pub fn synthetic_cqr(n: usize, seed: u64) -> Vec<CurationTuple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let people: Vec<&str> = NAMES.choose_multiple(&mut rng, 2).copied().collect();
            let mut facts: Vec<(usize, usize, String)> = Vec::new();
            for (p, name) in people.iter().enumerate() {
                for (r, &rel) in RELATIONS.iter().enumerate() {
                    facts.push((p, r, fact(rel, name, &mut rng)));
                }
            }
            facts.shuffle(&mut rng);
            let rel = k % RELATIONS.len();
            let other_rel = (rel + 1 + (k / 3) % 2) % RELATIONS.len();
            let find = |p: usize, r: usize| facts.iter().position(|f| f.0 == p && f.1 == r).unwrap();
            let pos = find(0, rel);
            let mut negatives = vec![find(0, other_rel), find(1, rel)];
            negatives.sort_unstable();
            let context = facts.iter().map(|f| f.2.as_str()).collect::<Vec<_>>().join(" ");
            CurationTuple {
                id: format!("synthetic-{k}"),
                context,
                question: question(RELATIONS[rel], people[0]),
                answer: answer(&facts[pos].2),
                positive: SentenceRef { start_sent: pos },
                negatives: negatives.into_iter().map(|j| SentenceRef { start_sent: j }).collect(),
                scores: FilterScores {
                    eta: 1.0,
                    neg_cos: vec![0.0; 2],
                    neg_kl: vec![0.0; 2],
                    kl_conditioned_on_question: true,
                },
            }
        })
        .collect()
}
