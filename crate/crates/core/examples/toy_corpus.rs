//! Writes the bundled toy corpus: 50 synthetic filings, their manifest, a
//! pipeline config, and sentence embeddings for the refined sentences.
//!
//! Embeddings are synthetic: each sentence gets the centroid of its keyword
//! domain (or a shared filler centroid) plus isotropic Gaussian noise.
//!
//! Usage: cargo run -p fintopic --example toy_corpus -- [OUT_DIR]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fintopic::config::PipelineConfig;
use fintopic::jsonl::read_jsonl;
use fintopic::keywords::{label_sentence, match_keywords, KeywordList};
use fintopic::pipeline::{artifacts, run_pipeline, EmbedInput, Stage};
use fintopic::textprep::clean_sentence;
use fintopic::vectors::{write_vectors, EmbeddingMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SEED: u64 = 20_240_611;
const FILINGS: usize = 50;
const DIM: usize = 32;
/// Centroids live in the first `SPAN` coordinates.
const SPAN: usize = 10;
const CENTROID_SD: f64 = 4.0;
const NOISE_SD: f64 = 0.25;

/// Three sentences per domain, each with at least two keywords of its own
/// domain and none of any other.
const DOMAIN_SENTENCES: [(&str, [&str; 3]); 14] = [
    ("Sales", [
        "Net sales and revenue grew in the consumer segment this year.",
        "Demand for our products strengthened as pricing improved across each market.",
        "Competition intensified and contract pricing pressure weighed on revenue growth.",
    ]),
    ("Cost", [
        "Operating expense rose as cost inflation persisted through the year.",
        "We recorded a goodwill impairment charge along with higher depreciation expense.",
        "Freight cost and warranty expense increased faster than planned.",
    ]),
    ("Profit/Loss", [
        "Gross margin and operating income improved compared with the prior year.",
        "Net earnings rose while the loss from discontinued units narrowed.",
        "Segment profit and overall performance exceeded our internal targets.",
    ]),
    ("Operations", [
        "Production volumes and supply quality improved at every manufacturing site.",
        "Logistics delays disrupted transport routes during the third quarter.",
        "The business streamlined each process to produce goods more efficiently.",
    ]),
    ("Liquidity", [
        "Cash on hand and available liquidity remained ample at year end.",
        "Interest coverage stayed comfortable as our capital position strengthened.",
        "Excess cash was held in deposits with strong balance protection.",
    ]),
    ("Investment", [
        "We continue to invest in new plants, and total expenditure rose.",
        "The divestiture of a minor asset group closed early in the year.",
        "Asset disposal proceeds offset new investments in automation.",
    ]),
    ("Financing", [
        "We issued new debt and paid a higher dividend to holders.",
        "The share repurchase program was funded by borrowing under our credit facility.",
        "Equity financing terms eased after the ratings upgrade.",
    ]),
    ("Litigation", [
        "A patent dispute with a competitor remains pending before the court.",
        "The lawsuit and related legal proceedings are ongoing.",
        "Arbitration of the complaint is expected to conclude soon.",
    ]),
    ("HR", [
        "Employee retention improved after we raised salary levels.",
        "Hiring and training of staff expanded across all regions.",
        "Wage increases for union labor were agreed in the spring.",
    ]),
    ("Regulation", [
        "New tax legislation changed our effective rate this year.",
        "Federal government agencies proposed stricter rules for the industry.",
        "Regulations from each regulator continued to tighten.",
    ]),
    ("Accounting", [
        "Our audit committee reviewed internal control findings.",
        "Each account adjustment was recorded before the annual filing.",
        "The report describes the account reconciliation methods in detail.",
    ]),
    ("Energy", [
        "Fuel and electric power bills rose sharply this winter.",
        "Our solar and wind farms delivered more energy than expected.",
        "Coal and oil shipments declined while water usage fell.",
    ]),
    ("ESG", [
        "We cut carbon emission levels through renewable sourcing.",
        "Plastic waste was reduced and more material was recycled.",
        "Our sustainability goals protect the environment for future generations.",
    ]),
    ("Covid-19", [
        "The pandemic and related covid restrictions slowed activity.",
        "Corona outbreaks caused disease related closures at several sites.",
        "Pandemic waves and covid absences eased late in the year.",
    ]),
];

/// Keyword-free sentences.
const FILLER: [&str; 6] = [
    "The weather in the northern region was mild throughout the spring.",
    "Our headquarters moved to a larger building downtown.",
    "The board welcomed two new directors during the year.",
    "Customers in several regions responded well to the new design.",
    "We opened a second office in the southern region.",
    "The company celebrated its fiftieth anniversary with a local event.",
];

fn check_sentences(keywords: &KeywordList) {
    let mut bad = Vec::new();
    for (name, sentences) in DOMAIN_SENTENCES {
        for s in sentences {
            let counts = match_keywords(&clean_sentence(s), keywords);
            if label_sentence(&counts).map(|id| keywords.name(id)) != Some(name) {
                bad.push(format!("{s:?} should label as {name}, counts {:?}", counts.as_slice()));
            }
        }
    }
    for s in FILLER {
        let counts = match_keywords(&clean_sentence(s), keywords);
        if !counts.is_zero() {
            bad.push(format!("{s:?} should be keyword-free, counts {:?}", counts.as_slice()));
        }
    }
    assert!(bad.is_empty(), "bad template sentences:\n{}", bad.join("\n"));
}

/// One paragraph per domain in random order, each with two or three of the
/// domain's sentences; `domains` limits how many domains appear.
fn mdna(rng: &mut ChaCha8Rng, domains: usize) -> String {
    let mut order: Vec<usize> = (0..DOMAIN_SENTENCES.len()).collect();
    order.shuffle(rng);
    let mut out = Vec::new();
    for &d in order.iter().take(domains) {
        let n = rng.gen_range(2..=3);
        let mut para: Vec<&str> = DOMAIN_SENTENCES[d].1.choose_multiple(rng, n).copied().collect();
        if rng.gen_bool(0.35) {
            para.insert(rng.gen_range(0..=para.len()), FILLER.choose(rng).expect("non-empty"));
        }
        out.push(para.join(" "));
    }
    out.join("\n\n")
}

const TOC: &str = "TABLE OF CONTENTS\n\
    Item 7. Management's Discussion and Analysis\n\
    Item 7A. Quantitative and Qualitative Disclosures About Market Risk\n\
    Item 8. Financial Statements and Supplementary Data\n\n";

/// A filing with a table of contents (when it has an Item 8 at all), the
/// Item 7 and 7A sections, and optionally Item 8.
fn filing(company: &str, year: i32, body: &str, with_item8: bool) -> String {
    let toc = if with_item8 { TOC } else { "" };
    let mut f = format!(
        "{company} ANNUAL REPORT FOR FISCAL YEAR {year}\n\n{toc}PART II\n\n\
         ITEM 7. MANAGEMENT'S DISCUSSION AND ANALYSIS OF FINANCIAL CONDITION AND RESULTS OF OPERATIONS\n\n\
         {body}\n\n\
         ITEM 7A. QUANTITATIVE AND QUALITATIVE DISCLOSURES ABOUT MARKET RISK\n\n\
         Interest rate and commodity price movements are monitored by the treasury group.\n"
    );
    if with_item8 {
        f.push_str("\nITEM 8. FINANCIAL STATEMENTS AND SUPPLEMENTARY DATA\n\nSee the consolidated statements.\n");
    }
    f
}

fn write(path: &Path, text: &str) {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).expect("create output directory");
    }
    std::fs::write(path, text).unwrap_or_else(|e| panic!("write {}: {e}", path.display()));
}

const CONFIG: &str = "\
# Toy pipeline config. Paths are relative to this file.
rng_seed = 7

[paths]
manifest = \"manifest.csv\"
vectors = \"vectors.ftsvec\"

[thresholds]
min_cluster_size = 30
min_samples = 5
";

fn main() {
    let out: PathBuf = std::env::args().nth(1).map_or_else(|| PathBuf::from("fixtures/toy"), PathBuf::from);
    let keywords = KeywordList::builtin();
    check_sentences(&keywords);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut manifest = String::from("id,fiscal_year,path\n");
    for i in 0..FILINGS {
        let id = format!("toy-{i:03}");
        let company = format!("COMPANY {i:03} INC");
        // a few filings exercise each document filter
        let (year, domains, item8) = match i {
            7 | 31 => (2014 + (i % 2) as i32 * 9, 14, true),
            12 | 40 => (2019, 2, true),
            25 => (2020, 14, false),
            _ => (2016 + (i % 7) as i32, 14, true),
        };
        let rel = format!("filings/{id}.txt");
        write(&out.join(&rel), &filing(&company, year, &mdna(&mut rng, domains), item8));
        manifest.push_str(&format!("{id},{year},{rel}\n"));
    }
    write(&out.join("manifest.csv"), &manifest);

    // embed exactly the sentences the pipeline will refine
    let scratch = tempfile::tempdir().expect("temp dir");
    let cfg = PipelineConfig::with_manifest(out.join("manifest.csv"));
    run_pipeline(&cfg, scratch.path(), &[Stage::Ingest, Stage::Prep]).expect("ingest and prep succeed");
    let inputs: Vec<EmbedInput> = read_jsonl(&scratch.path().join(artifacts::EMBED_INPUT)).expect("embed input");

    let centroid_dist = Normal::new(0.0, CENTROID_SD).expect("valid sd");
    let noise = Normal::new(0.0, NOISE_SD).expect("valid sd");
    let mut centroids: BTreeMap<Option<String>, Vec<f64>> = BTreeMap::new();
    for name in std::iter::once(None).chain(keywords.topics().iter().map(|t| Some(t.name.clone()))) {
        let c = (0..DIM).map(|j| if j < SPAN { centroid_dist.sample(&mut rng) } else { 0.0 }).collect();
        centroids.insert(name, c);
    }
    let rows: Vec<Vec<f32>> = inputs
        .iter()
        .map(|s| {
            let counts = match_keywords(&s.text, &keywords);
            let top = counts.iter().filter(|&(_, c)| c > 0).max_by_key(|&(id, c)| (c, std::cmp::Reverse(id.0)));
            let c = &centroids[&top.map(|(id, _)| keywords.name(id).to_string())];
            c.iter().map(|&x| (x + noise.sample(&mut rng)) as f32).collect()
        })
        .collect();
    let keys = inputs.into_iter().map(|s| s.key).collect();
    let m = EmbeddingMatrix::from_rows(keys, &rows).expect("finite rows");
    write_vectors(&m, &out.join("vectors.ftsvec")).expect("write vectors");
    write(&out.join("config.toml"), CONFIG);
    println!("wrote {} filings and {} x {} vectors to {}", FILINGS, m.rows(), m.dim(), out.display());
}
