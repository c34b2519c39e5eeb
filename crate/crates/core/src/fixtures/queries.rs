//! Template-labeled synthetic queries.
//!
//! Each template has its own question frames (short lookups for minimal,
//! business summaries for executive, how-to explanations for standard,
//! engineering detail for technical, open-ended essays for verbose) filled
//! with subject-specific topics. The text is realistic enough for the local
//! hash embedder to separate the classes.

use rand::seq::IndexedRandom;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::LabeledQuery;
use crate::domain::{Query, TemplateId};

/// Per-template counts of the reference 1,000-query mix, canonical order.
pub const REFERENCE_COUNTS: [usize; 5] = [74, 104, 285, 19, 518];

const SUBJECTS: [(&str, [&str; 4]); 8] = [
    ("physics", ["magnetism", "entropy", "quantum tunneling", "special relativity"]),
    ("biology", ["photosynthesis", "gene expression", "the immune response", "cell division"]),
    ("history", ["the printing press", "the industrial revolution", "the fall of Rome", "the Silk Road"]),
    ("economics", ["inflation", "supply chains", "interest rates", "trade tariffs"]),
    ("computer_science", ["hash tables", "garbage collection", "TCP congestion control", "B-trees"]),
    ("chemistry", ["catalysis", "covalent bonding", "electrolysis", "polymer chains"]),
    ("mathematics", ["prime numbers", "eigenvalues", "the central limit theorem", "graph coloring"]),
    ("law", ["contract formation", "intellectual property", "due process", "liability"]),
];

const MINIMAL: [&str; 6] = [
    "What is {a} + {b}?",
    "What is {a} times {b}?",
    "Is {a} a prime number?",
    "What is the next number: {a}, {b}, {c}?",
    "Define {topic} in one word.",
    "True or false: {topic} is studied in {subject}?",
];

const EXECUTIVE: [&str; 5] = [
    "Summarize the business impact of {topic} for our leadership team.",
    "Should our company invest in {topic}? Give me the bottom line.",
    "Give a decision-maker overview of the risks {topic} poses to revenue.",
    "What should the board know about {topic} this quarter?",
    "Brief the executives on {topic}: key takeaways and recommendation.",
];

const STANDARD: [&str; 6] = [
    "How does {topic} work?",
    "Explain how to solve a problem involving {topic}.",
    "Walk me through the steps of {topic}.",
    "How would you calculate something using {topic}?",
    "Why does {topic} happen, step by step?",
    "What is the process behind {topic}?",
];

const TECHNICAL: [&str; 5] = [
    "Specify the algorithmic complexity and memory layout of {topic} implementations.",
    "Derive the formal model of {topic} with precise notation and edge cases.",
    "Detail the failure modes of {topic} under concurrent load, with terminology.",
    "Compare the asymptotic bounds and invariants of {topic} variants.",
    "Give the rigorous specification of {topic}, including parameters and units.",
];

const VERBOSE: [&str; 6] = [
    "Discuss the history and significance of {topic}, with examples and broader context.",
    "Why is {topic} important, and how has our understanding of it evolved over time?",
    "Give a comprehensive overview of {topic}, including its causes, consequences and debates.",
    "Compare the major perspectives on {topic} and explain what each one gets right.",
    "Tell me everything a curious student should know about {topic} in {subject}.",
    "Explore the implications of {topic} for society, with detailed examples.",
];

fn frames(t: &TemplateId) -> &'static [&'static str] {
    match t {
        TemplateId::Minimal => &MINIMAL,
        TemplateId::Executive => &EXECUTIVE,
        TemplateId::Standard => &STANDARD,
        TemplateId::Technical => &TECHNICAL,
        _ => &VERBOSE,
    }
}

/// Generator for a labeled query corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticQueries {
    /// Items per template in canonical order.
    pub counts: [usize; 5],
    pub seed: u64,
}

impl Default for SyntheticQueries {
    fn default() -> Self {
        Self {
            counts: REFERENCE_COUNTS,
            seed: 42,
        }
    }
}

impl SyntheticQueries {
    pub fn balanced(per_class: usize, seed: u64) -> Self {
        Self {
            counts: [per_class; 5],
            seed,
        }
    }

    /// Queries in shuffled order with ids `q0000`, `q0001`, ...
    pub fn generate(&self) -> Vec<LabeledQuery> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut labels: Vec<TemplateId> = TemplateId::CANONICAL
            .iter()
            .zip(self.counts)
            .flat_map(|(t, n)| std::iter::repeat_n(t.clone(), n))
            .collect();
        labels.shuffle(&mut rng);
        labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| {
                let (subject, topics) = SUBJECTS.choose(&mut rng).expect("non-empty");
                let topic = topics.choose(&mut rng).expect("non-empty");
                let frame = frames(&label).choose(&mut rng).expect("non-empty");
                let text = frame
                    .replace("{topic}", topic)
                    .replace("{subject}", &subject.replace('_', " "))
                    .replace("{a}", &rand::Rng::random_range(&mut rng, 2..100).to_string())
                    .replace("{b}", &rand::Rng::random_range(&mut rng, 2..100).to_string())
                    .replace("{c}", &rand::Rng::random_range(&mut rng, 2..100).to_string());
                LabeledQuery {
                    query: Query::new(format!("q{i:04}"), text).expect("non-empty text"),
                    label,
                    subject: Some(subject.to_string()),
                }
            })
            .collect()
    }
}
