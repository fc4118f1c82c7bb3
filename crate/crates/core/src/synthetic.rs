//! Deterministic planted-expert corpus.
//!
//! Each topic has one planted expert whose every document discusses all of
//! the topic's entities; distractor authors write a few short documents,
//! each touching a single entity of some topic. In the knowledge graph, a
//! set of hub pages links to every entity of one topic, so entities of the
//! same topic share in-links and are strongly related. Every query names
//! entities of one topic and its only relevant author is that topic's
//! planted expert.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::batch::{queries_to_text, Query};
use crate::corpus::{Author, Corpus, DocKind, Document};
use crate::error::{Error, Result};
use crate::evaluation::Qrels;
use crate::knowledge::KnowledgeGraph;
use crate::linking::LinkerDictionary;
use crate::text::escape_field;

const TOPICS: [[&str; 6]; 4] = [
    [
        "relational algebra",
        "query optimizer",
        "transaction log",
        "btree index",
        "join ordering",
        "buffer pool",
    ],
    [
        "gene expression",
        "dna sequencing",
        "protein folding",
        "rna splicing",
        "genome assembly",
        "cell division",
    ],
    [
        "black hole",
        "dark matter",
        "galaxy cluster",
        "neutron star",
        "cosmic microwave background",
        "exoplanet transit",
    ],
    [
        "supply chain",
        "market equilibrium",
        "monetary policy",
        "labor economics",
        "price elasticity",
        "game theory",
    ],
];

const GENERIC: [&str; 4] = [
    "research method",
    "data analysis",
    "case study",
    "literature review",
];

/// Linked, but below the default rho threshold.
const WEAK_SURFACE: (&str, &str, f64) = ("the results", "Result_(statistics)", 0.1);

const FILLER: [&str; 24] = [
    "we", "present", "a", "novel", "approach", "that", "improves", "on", "prior", "work",
    "our", "experiments", "show", "clear", "gains", "this", "paper", "describes", "findings",
    "in", "detail", "with", "careful", "discussion",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub n_authors: usize,
    pub n_topics: usize,
    pub queries_per_topic: usize,
    pub expert_docs: usize,
    pub distractor_docs: usize,
    pub hubs_per_topic: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            n_authors: 12,
            n_topics: 3,
            queries_per_topic: 3,
            expert_docs: 6,
            distractor_docs: 3,
            hubs_per_topic: 8,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub authors: Vec<Author>,
    pub documents: Vec<Document>,
    /// `(surface, entity_id, score)`.
    pub dictionary: Vec<(String, String, f64)>,
    pub entities: Vec<String>,
    pub links: Vec<(String, String)>,
    pub queries: Vec<Query>,
    pub qrels: Qrels,
    /// Planted expert per topic.
    pub experts: Vec<String>,
}

pub fn entity_id(surface: &str) -> String {
    let mut out = String::new();
    for (i, c) in surface.chars().enumerate() {
        match c {
            ' ' => out.push('_'),
            c if i == 0 => out.extend(c.to_uppercase()),
            c => out.push(c),
        }
    }
    out
}

fn filler(rng: &mut ChaCha8Rng, n: usize) -> Vec<&'static str> {
    (0..n).map(|_| *FILLER.choose(rng).expect("non-empty")).collect()
}

impl SyntheticCorpus {
    pub fn generate(params: &SyntheticParams) -> Result<Self> {
        if params.n_topics == 0 || params.n_topics > TOPICS.len() {
            return Err(Error::InvalidArgument(format!(
                "n_topics must be in 1..={}",
                TOPICS.len()
            )));
        }
        if params.n_authors <= params.n_topics {
            return Err(Error::InvalidArgument(
                "need more authors than topics (one expert per topic plus distractors)".into(),
            ));
        }
        if params.queries_per_topic == 0 || params.queries_per_topic > TOPICS[0].len() {
            return Err(Error::InvalidArgument("queries_per_topic must be in 1..=6".into()));
        }
        if params.distractor_docs > params.n_topics.max(TOPICS[0].len()) {
            return Err(Error::InvalidArgument("too many distractor documents".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let topics = &TOPICS[..params.n_topics];

        let authors: Vec<Author> = (0..params.n_authors)
            .map(|i| Author {
                author_id: format!("a{:02}", i + 1),
                display_name: format!("Author {:02}", i + 1),
            })
            .collect();
        let experts: Vec<String> = (0..params.n_topics)
            .map(|t| authors[t].author_id.clone())
            .collect();

        let mut dictionary = Vec::new();
        for topic in topics {
            for s in topic {
                let score = 0.6 + 0.35 * rng.gen::<f64>();
                dictionary.push((s.to_string(), entity_id(s), (score * 1e4).round() / 1e4));
            }
        }
        for s in GENERIC {
            dictionary.push((s.to_string(), entity_id(s), 0.5));
        }
        dictionary.push((
            WEAK_SURFACE.0.to_string(),
            WEAK_SURFACE.1.to_string(),
            WEAK_SURFACE.2,
        ));

        let mut documents = Vec::new();
        let mut next_doc = 1;
        let mut new_id = || {
            let id = format!("d{next_doc:03}");
            next_doc += 1;
            id
        };
        for (t, topic) in topics.iter().enumerate() {
            for j in 0..params.expert_docs {
                let mut words: Vec<String> = filler(&mut rng, 12).into_iter().map(String::from).collect();
                for s in topic.iter() {
                    words.push(s.to_string());
                }
                words.push(topic[j % topic.len()].to_string());
                words.push(GENERIC[(t + j) % GENERIC.len()].to_string());
                words.push(WEAK_SURFACE.0.to_string());
                words.shuffle(&mut rng);
                documents.push(Document {
                    doc_id: new_id(),
                    title: format!("On {} and {}", topic[j % 6], topic[(j + 1) % 6]),
                    body: words.join(" "),
                    author_ids: vec![experts[t].clone()],
                    doc_kind: if j == 0 { DocKind::Thesis } else { DocKind::Paper },
                });
            }
        }
        for (i, author) in authors.iter().enumerate().skip(params.n_topics) {
            let d = i - params.n_topics;
            for k in 0..params.distractor_docs {
                let t = (d + k) % params.n_topics;
                let s = topics[t][(2 * d + k) % topics[t].len()];
                let mut words: Vec<String> = filler(&mut rng, 16).into_iter().map(String::from).collect();
                words.push(s.to_string());
                words.push(GENERIC[d % GENERIC.len()].to_string());
                words.shuffle(&mut rng);
                documents.push(Document {
                    doc_id: new_id(),
                    title: format!("Notes {}", k + 1),
                    body: words.join(" "),
                    author_ids: vec![author.author_id.clone()],
                    doc_kind: if k == 0 { DocKind::ProfilePage } else { DocKind::Other },
                });
            }
        }
        let mut words: Vec<String> = filler(&mut rng, 8).into_iter().map(String::from).collect();
        words.extend(topics[0].iter().map(|s| s.to_string()));
        documents.push(Document {
            doc_id: new_id(),
            title: "Unattributed course page".into(),
            body: words.join(" "),
            author_ids: Vec::new(),
            doc_kind: DocKind::CoursePage,
        });

        let mut entities: Vec<String> = dictionary.iter().map(|(_, e, _)| e.clone()).collect();
        let mut links = Vec::new();
        for (t, topic) in topics.iter().enumerate() {
            for h in 0..params.hubs_per_topic {
                let hub = format!("Hub_{t}_{h}");
                entities.push(hub.clone());
                for s in topic {
                    links.push((hub.clone(), entity_id(s)));
                }
            }
            for w in topic.windows(2) {
                links.push((entity_id(w[0]), entity_id(w[1])));
            }
        }
        for (g, s) in GENERIC.iter().enumerate() {
            for t in 0..params.n_topics {
                links.push((format!("Hub_{t}_{}", g % params.hubs_per_topic), entity_id(s)));
            }
        }
        links.push((format!("Hub_0_{}", params.hubs_per_topic - 1), WEAK_SURFACE.1.to_string()));

        let mut queries = Vec::new();
        let mut qrels = Qrels::new();
        for (t, topic) in topics.iter().enumerate() {
            for j in 0..params.queries_per_topic {
                let qid = format!("q{:02}", queries.len() + 1);
                let a = topic[(2 * j) % topic.len()];
                let b = topic[(2 * j + 1) % topic.len()];
                queries.push(Query {
                    query_id: qid.clone(),
                    text: format!("{a} {b}"),
                });
                qrels.insert(&qid, &experts[t], 1);
                let other = &authors[params.n_topics + (t + j) % (params.n_authors - params.n_topics)];
                qrels.insert(&qid, &other.author_id, 0);
            }
        }

        Ok(SyntheticCorpus {
            authors,
            documents,
            dictionary,
            entities,
            links,
            queries,
            qrels,
            experts,
        })
    }

    pub fn corpus(&self) -> Result<Corpus> {
        Corpus::new(self.authors.clone(), self.documents.clone())
    }

    pub fn linker_dictionary(&self) -> Result<LinkerDictionary> {
        let mut d = LinkerDictionary::new();
        for (s, e, score) in &self.dictionary {
            d.insert(s, e, *score)?;
        }
        Ok(d)
    }

    pub fn graph(&self) -> Result<KnowledgeGraph> {
        KnowledgeGraph::new(self.entities.clone(), &self.links)
    }

    /// Writes the corpus, dictionary, snapshot, queries, qrels and an
    /// `engine.conf` pointing at them.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, content: String| {
            let p = dir.join(name);
            fs::write(&p, content).map_err(|e| Error::io(&p, e))
        };
        put(
            "documents.tsv",
            self.documents.iter().map(|d| d.to_record() + "\n").collect(),
        )?;
        put(
            "authors.tsv",
            self.authors.iter().map(|a| a.to_record() + "\n").collect(),
        )?;
        let mut dict = String::new();
        for (s, e, score) in &self.dictionary {
            let _ = writeln!(dict, "{}\t{e}\t{score}", escape_field(s));
        }
        put("dictionary.tsv", dict)?;
        put("snapshot.txt", self.graph()?.to_text())?;
        put("queries.tsv", queries_to_text(&self.queries))?;
        put("qrels.txt", self.qrels.to_text())?;
        put(
            "engine.conf",
            "documents = documents.tsv\nauthors = authors.tsv\ndictionary = dictionary.tsv\n\
             snapshot = snapshot.txt\nstore_dir = store\n"
                .to_string(),
        )
    }
}
