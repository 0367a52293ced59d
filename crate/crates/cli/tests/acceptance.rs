//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. The process fails
//! when any criterion fails, except those listed in `KNOWN_FAIL`, which are reported but
//! do not break the build. See the README for why each known failure is expected.

use std::io::{Read as _, Write as _};
use std::net::TcpListener;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sca_core::attribution::{FixtureAttribution, MockAttribution};
use sca_core::gate::{bleu, word_edit_distance};
use sca_core::pause::{find_injection_points, inject_pauses, pause_count_for_chunk, strip_pauses, PauseConfig};
use sca_core::pipeline::PipelineReport;
use sca_core::selector::{select_optimal, SelectionReport, SelectorConfig};
use sca_core::text::{
    bin_score, concreteness, formality, readability_fres, tokenize, Analyzer, Aspect, Bin,
    ConcretenessLexicon, FrequencyBase, RuleTagger,
};
use sca_core::topic::{fit_lda, load_background, topic_similarity, LdaParams};

/// Criteria that cannot be met by a faithful implementation.
const KNOWN_FAIL: &[&str] = &["fres-quantum"];

const SUN: &str = "The sun rises in the east every morning.";
const QUANTUM: &str = "The intricacies of quantum mechanics, as expounded upon by renowned physicists, \
                       continue to baffle even the most astute scholars.";
const INFORMAL: &str = "The big thing in the corner dates from the 18th century.";
const FORMAL: &str = "In the right corner, next to the entrance, stands a 2 meter high wooden cupboard \
                      with gold inlays, that dates from the 18th century.";

type Outcome = Result<String, String>;

struct Suite {
    rows: Vec<(String, Outcome)>,
}

impl Suite {
    fn check(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let outcome = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(o) => o,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let (tag, detail) = match (&outcome, KNOWN_FAIL.contains(&name)) {
            (Ok(d), _) => ("PASS", d.as_str()),
            (Err(d), true) => ("FAIL (known)", d.as_str()),
            (Err(d), false) => ("FAIL", d.as_str()),
        };
        println!("{tag:<13} {name:<28} {detail}");
        self.rows.push((name.to_string(), outcome));
    }
}

fn ensure(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn core_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn fres(text: &str) -> f64 {
    readability_fres(&tokenize(text).unwrap()).unwrap()
}

fn readability(s: &mut Suite) {
    let start = Instant::now();
    let sun = fres(SUN);
    let quantum = fres(QUANTUM);
    let go = fres("Go.");
    let elapsed = start.elapsed();
    s.check("fres-sun", || ensure((sun - 75.5).abs() <= 5.0, format!("{sun:.2} vs 75.5 ± 5")));
    s.check("fres-quantum", || {
        ensure((quantum - 11.45).abs() <= 5.0, format!("{quantum:.2} vs 11.45 ± 5"))
    });
    s.check("fres-exact", || ensure((go - 121.22).abs() < 1e-9, format!("{go} vs 121.22")));
    s.check("fres-runtime", || ensure(elapsed < Duration::from_secs(1), format!("{elapsed:?}")));
}

fn formality_criteria(s: &mut Suite) {
    s.check("formality-gold-tags", || {
        let cases: [(&str, &[&str], f64); 3] = [
            ("Dogs bark", &["NNS", "VBP"], 50.0),
            // 3 nouns, 2 adjectives, 2 prepositions, 3 articles, 1 verb
            (INFORMAL, &["DT", "JJ", "NN", "IN", "DT", "NN", "VBZ", "IN", "DT", "JJ", "NN"], 54.5),
            // 7 nouns, 5 adjectives, 4 prepositions, 4 articles, 2 verbs
            (
                FORMAL,
                &[
                    "IN", "DT", "JJ", "NN", "JJ", "TO", "DT", "NN", "VBZ", "DT", "CD", "NN", "JJ", "JJ",
                    "NN", "IN", "NN", "NNS", "WDT", "VBZ", "IN", "DT", "JJ", "NN",
                ],
                59.0,
            ),
        ];
        let mut worst = 0.0f64;
        for (text, tags, want) in cases {
            let t = tokenize(text).unwrap().with_tags(tags.iter().copied()).unwrap();
            worst = worst.max((formality(&t, FrequencyBase::Count).unwrap() - want).abs());
        }
        ensure(worst < 1e-9, format!("max error {worst:e}"))
    });

    let lex = ConcretenessLexicon::paper_fixture();
    let analyzer = Analyzer::new(&lex, &RuleTagger);
    let informal = analyzer.profile(INFORMAL).unwrap().formality;
    let formal = analyzer.profile(FORMAL).unwrap().formality;
    s.check("formality-bundled-tagger", || {
        ensure(
            (informal - 54.5).abs() <= 8.0 && (formal - 62.0).abs() <= 8.0,
            format!("informal {informal} vs 54.5, formal {formal} vs 62, tolerance 8"),
        )
    });
    s.check("formality-order", || ensure(formal > informal, format!("{formal} > {informal}")));
}

fn concreteness_criteria(s: &mut Suite) {
    let lex = ConcretenessLexicon::paper_fixture();
    s.check("concreteness-concrete", || {
        let c = concreteness(&tokenize("Apple, Dog, Chair, Book, Water, Car").unwrap(), &lex);
        let v = c.score.ok_or("no score")?;
        ensure(v >= 4.5, format!("{v:.4} >= 4.5"))
    });
    s.check("concreteness-abstract", || {
        let c = concreteness(&tokenize("Justice, Love, Happiness, Courage, Wisdom").unwrap(), &lex);
        let v = c.score.ok_or("no score")?;
        ensure(v == 1.0, format!("{v} == 1.0"))
    });
}

fn binning(s: &mut Suite) {
    s.check("bins-boundaries", || {
        let mut probes = 0;
        for aspect in [Aspect::Readability, Aspect::Formality, Aspect::Concreteness] {
            let (floor, low, mid, ceil) = aspect.ranges();
            let d = 1e-9;
            let expected = [
                (floor, Bin::Low),
                (low, Bin::Low),
                (low + d, Bin::Mid),
                (mid, Bin::Mid),
                (mid + d, Bin::High),
                (ceil, Bin::High),
            ];
            for (v, want) in expected {
                let got = bin_score(aspect, v).unwrap();
                if got.bin != want || got.out_of_range {
                    return Err(format!("{aspect:?} {v}: {got:?}, wanted {want:?}"));
                }
                probes += 1;
            }
        }
        ensure(probes == 18, format!("{probes} probes"))
    });
}

/// Plain recursive edit distance, no memoisation.
fn med_oracle(a: &[u8], b: &[u8]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = med_oracle(ra, rb) + usize::from(x != y);
            sub.min(med_oracle(ra, b) + 1).min(med_oracle(a, rb) + 1)
        }
    }
}

fn all_sequences(max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for c in 0..3u8 {
                let mut t: Vec<u8> = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn med(s: &mut Suite) {
    let start = Instant::now();
    s.check("med-oracle-exhaustive", || {
        let seqs = all_sequences(5);
        let as_words = |s: &[u8]| -> Vec<&str> { s.iter().map(|&c| ["x", "y", "z"][c as usize]).collect() };
        let words: Vec<Vec<&str>> = seqs.iter().map(|s| as_words(s)).collect();
        let mut pairs = 0usize;
        for (a, wa) in seqs.iter().zip(&words) {
            for (b, wb) in seqs.iter().zip(&words) {
                let (got, want) = (word_edit_distance(wa, wb), med_oracle(a, b));
                if got != want {
                    return Err(format!("{a:?} {b:?}: {got} vs {want}"));
                }
                pairs += 1;
            }
        }
        Ok(format!("{pairs} pairs agree"))
    });
    s.check("med-triangle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let words = ["sky", "blue", "red", "sun", "why", "light"];
        let text = |rng: &mut ChaCha8Rng| -> Vec<&str> {
            let n = rng.random_range(0..9);
            (0..n).map(|_| words[rng.random_range(0..words.len())]).collect()
        };
        for i in 0..10_000 {
            let (a, b, c) = (text(&mut rng), text(&mut rng), text(&mut rng));
            let (ab, bc, ac) = (word_edit_distance(&a, &b), word_edit_distance(&b, &c), word_edit_distance(&a, &c));
            if ac > ab + bc {
                return Err(format!("triple {i}: {ac} > {ab} + {bc}"));
            }
        }
        Ok("10000 triples".into())
    });
    let elapsed = start.elapsed();
    s.check("med-runtime", || ensure(elapsed < Duration::from_secs(60), format!("{elapsed:?}")));
}

fn bleu_criteria(s: &mut Suite) {
    let w = |t: &'static str| -> Vec<&'static str> { t.split(' ').collect() };
    s.check("bleu-hand-fixtures", || {
        let cases = [
            // p1 = 1/2, p2 = 1/2
            ("the cat", "the dog", 0.5),
            ("a b", "c d", 0.0),
            // brevity exp(1 - 3/2)
            ("the cat", "the cat sat", (-0.5f64).exp()),
            // p = 5/6, 4/6, 3/5, 2/4
            ("the cat sat on the mat", "the cat sat on a mat", (1.0f64 / 6.0).powf(0.25)),
            // order 1 only, clipped 1/3
            ("a a a", "a", 1.0 / 3.0),
            // all precisions 1, brevity exp(1 - 5/3)
            ("a b c", "a b c d e", (-2.0f64 / 3.0).exp()),
        ];
        for (c, r, want) in cases {
            let got = bleu(&w(c), &w(r)).unwrap();
            if (got - want).abs() >= 1e-9 {
                return Err(format!("{c:?} vs {r:?}: {got} != {want}"));
            }
        }
        Ok(format!("{} fixtures", cases.len()))
    });
    s.check("bleu-self", || {
        for t in ["a", "the cat", "the cat sat on the mat", "x y x y x"] {
            let v = bleu(&w(t), &w(t)).unwrap();
            if (v - 1.0).abs() > 1e-12 {
                return Err(format!("{t:?}: {v}"));
            }
        }
        Ok("self-BLEU = 1".into())
    });
}

fn pause(s: &mut Suite) {
    let corpus_text = std::fs::read_to_string(core_fixtures().join("pause_corpus.txt")).unwrap();
    let corpus: Vec<&str> = corpus_text.lines().collect();
    let lex = ConcretenessLexicon::paper_fixture();
    let analyzer = Analyzer::new(&lex, &RuleTagger);
    let cfg = PauseConfig::default();
    let outputs: Vec<_> = corpus.iter().map(|t| inject_pauses(t, &cfg, &analyzer).unwrap()).collect();

    s.check("pause-strip-identity", || {
        for (text, out) in corpus.iter().zip(&outputs) {
            if strip_pauses(&out.rendered, &cfg.token) != *text {
                return Err(format!("{text:?}"));
            }
        }
        ensure(corpus.len() == 1000, format!("{} sentences", corpus.len()))
    });
    s.check("pause-counts", || {
        let mut groups = 0;
        for out in &outputs {
            for seg in &out.segments {
                if ![0, 2, 5, 10].contains(&seg.pause_count) {
                    return Err(format!("count {} in {:?}", seg.pause_count, out.original));
                }
            }
            let rendered_total = out.rendered.matches(cfg.token.as_str()).count();
            let declared: usize = out.segments.iter().map(|seg| seg.pause_count).sum();
            if rendered_total != declared || out.segments.last().unwrap().pause_count != 0 {
                return Err(format!("inconsistent output for {:?}", out.original));
            }
            groups += out.injection_groups();
        }
        ensure(groups > 0, format!("{groups} pause groups"))
    });
    s.check("pause-positions", || {
        for (text, out) in corpus.iter().zip(&outputs) {
            let tagged = analyzer.tokenize_tagged(text).unwrap();
            let tags = tagged.tags.as_ref().unwrap();
            let mut seen = 0;
            for seg in &out.segments[..out.segments.len() - 1] {
                seen += tokenize(&seg.text).map(|t| t.word_count()).unwrap_or(0);
                if tags[seen - 1] != "CC" {
                    return Err(format!("pause after {:?} ({}) in {text:?}", tagged.words[seen - 1].surface, tags[seen - 1]));
                }
            }
            if find_injection_points(&tagged, &cfg).len() != out.segments.len() - 1 {
                return Err(format!("missed a trigger in {text:?}"));
            }
        }
        Ok("every group follows a CC word".into())
    });
    s.check("pause-step-function", || {
        let (lo, hi) = (cfg.low_cut, cfg.high_cut);
        let below = |x: f64| x - 1e-9;
        let above = |x: f64| x + 1e-9;
        let got = [
            pause_count_for_chunk(below(lo), &cfg),
            pause_count_for_chunk(lo, &cfg),
            pause_count_for_chunk(above(lo), &cfg),
            pause_count_for_chunk(below(hi), &cfg),
            pause_count_for_chunk(hi, &cfg),
            pause_count_for_chunk(above(hi), &cfg),
        ];
        ensure(got == [10, 5, 5, 5, 5, 2], format!("{got:?} at cuts {lo:.4}, {hi:.4}"))
    });
}

#[derive(serde::Deserialize)]
struct GoldenPhi {
    vocab: Vec<String>,
    phi: Vec<Vec<f64>>,
}

fn lda(s: &mut Suite) {
    let background = load_background(&core_fixtures().join("pipeline/background.txt")).unwrap();
    let params = LdaParams { k: 3, seed: 7, iters: 200, ..LdaParams::default() };
    let model = fit_lda(&background, &params).unwrap();
    s.check("lda-golden-phi", || {
        let text = std::fs::read_to_string(core_fixtures().join("lda_golden_phi.json")).map_err(|e| e.to_string())?;
        let golden: GoldenPhi = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let again = fit_lda(&background, &params).unwrap();
        ensure(
            golden.vocab == model.vocab && golden.phi == model.phi && again.phi == model.phi,
            format!("{} x {} matrix", model.phi.len(), model.vocab.len()),
        )
    });
    s.check("lda-theta-normalized", || {
        let mut worst = 0.0f64;
        for doc in &background {
            worst = worst.max((model.infer_theta(doc).theta.iter().sum::<f64>() - 1.0).abs());
        }
        for row in &model.phi {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        ensure(worst <= 1e-9, format!("max deviation {worst:e}"))
    });
    s.check("lda-identical-documents", || {
        let doc = &background[0];
        let mut shuffled = doc.clone();
        shuffled.reverse();
        let sim = topic_similarity(&model.infer_theta(doc), &model.infer_theta(&shuffled)).unwrap();
        ensure((sim - 1.0).abs() <= 1e-12, format!("similarity {sim}"))
    });
    s.check("lda-disjoint-separation", || {
        let a: Vec<String> = "apple banana cherry grape melon ".repeat(10).split_whitespace().map(String::from).collect();
        let b: Vec<String> = "engine piston gear valve clutch ".repeat(10).split_whitespace().map(String::from).collect();
        let m = fit_lda(&[a.clone(), b.clone()], &LdaParams { k: 2, seed: 3, ..LdaParams::default() }).unwrap();
        let mut dominant = Vec::new();
        let mut masses = Vec::new();
        for doc in [&a, &b] {
            let theta = m.infer_theta(doc).theta;
            let k = if theta[0] >= theta[1] { 0 } else { 1 };
            let mass: f64 = doc[..5].iter().map(|w| m.phi[k][m.word_index(w).unwrap()]).sum();
            dominant.push(k);
            masses.push(mass);
        }
        ensure(
            dominant[0] != dominant[1] && masses.iter().all(|&x| x >= 0.9),
            format!("dominant topic mass {:.4}, {:.4}", masses[0], masses[1]),
        )
    });
}

fn sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Recomputes every comprehension score from the recorded descriptors and mixtures.
fn rescore(r: &SelectionReport) -> Vec<f64> {
    let ds: Vec<[f64; 5]> = r.records.iter().map(|x| x.descriptor.unwrap()).collect();
    let mut mean = [0.0; 5];
    for d in &ds {
        for (m, v) in mean.iter_mut().zip(d) {
            *m += v / ds.len() as f64;
        }
    }
    let theta0 = r.records[0].theta.clone().unwrap();
    r.records
        .iter()
        .zip(&ds)
        .map(|(rec, d)| {
            let t = cosine(rec.theta.as_ref().unwrap(), &theta0).clamp(0.0, 1.0);
            0.5 * cosine(d, &mean) + 0.5 * t
        })
        .collect()
}

const POOL_PROMPT: &str = "Why does the sky look blue during the day and red at sunset?";
const POOL: &[&str] = &[
    "Explain why the daytime sky is blue while sunsets turn red.",
    "What makes the sky blue at noon but red in the evening?",
    "During the day the sky looks blue; at sunset it looks red. Why?",
    "How does sunlight make the sky blue by day and red at dusk?",
    "For what reason is the sky blue in daylight and red when the sun sets?",
];

fn selection(s: &mut Suite) {
    let background = load_background(&core_fixtures().join("pipeline/background.txt")).unwrap();
    let cfg = SelectorConfig::default();

    s.check("select-fixture", || {
        let original = "blue sky light scatters";
        let c1 = "sunlight scattering makes colour";
        let c2 = "light scatters blue sky";
        let d2 = [0.4, 0.25, 0.2, 0.15];
        let o = [0.45, 0.24, 0.18, 0.13];
        // pick c1 so that the pool mean descriptor equals c2's
        let target = 2.0 * sd(&d2) - sd(&o);
        let (mut lo, mut hi) = (0.24, 0.31);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if sd(&[0.35, mid, 0.48 - mid, 0.17]) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let provider = FixtureAttribution::new()
            .with_word_scores(original, &o)
            .with_word_scores(c1, &[0.35, lo, 0.48 - lo, 0.17])
            .with_word_scores(c2, &d2);
        let r = select_optimal(original, &[c1, c2], &provider, &[], &cfg).map_err(|e| e.to_string())?;
        let rec = &r.records[2];
        ensure(
            r.chosen_text() == c2 && rec.topic_sim.unwrap() >= 1.0 - 1e-12 && rec.alignment.unwrap() >= 1.0 - 1e-9,
            format!(
                "chose {:?} (alignment {:.12}, topic {:.12})",
                r.chosen_text(),
                rec.alignment.unwrap(),
                rec.topic_sim.unwrap()
            ),
        )
    });

    let provider = MockAttribution::new(0);
    s.check("select-brute-force", || {
        let r = select_optimal(POOL_PROMPT, POOL, &provider, &background, &cfg).map_err(|e| e.to_string())?;
        let scores = rescore(&r);
        for (rec, want) in r.records.iter().zip(&scores) {
            if (rec.comprehension.unwrap() - want).abs() > 1e-9 {
                return Err(format!("record {}: {} vs {want}", rec.index, rec.comprehension.unwrap()));
            }
        }
        let best = (0..scores.len())
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)))
            .unwrap();
        ensure(best == r.chosen_index, format!("argmax {best}, reported {}", r.chosen_index))
    });
    s.check("select-permutation", || {
        let reference = select_optimal(POOL_PROMPT, POOL, &provider, &background, &cfg).map_err(|e| e.to_string())?;
        let chosen = reference.chosen_text().to_string();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..12 {
            let mut order: Vec<&str> = POOL.to_vec();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let r = select_optimal(POOL_PROMPT, &order, &provider, &background, &cfg).map_err(|e| e.to_string())?;
            if r.chosen_text() != chosen {
                return Err(format!("{:?} chose {:?}, expected {chosen:?}", order, r.chosen_text()));
            }
        }
        Ok(format!("12 orders agree on {chosen:?}"))
    });
    s.check("select-default-weights", || {
        let d = SelectorConfig::default();
        let parsed: SelectorConfig = serde_json::from_str("{}").map_err(|e| e.to_string())?;
        ensure(
            d.w1 == 0.5 && d.w2 == 0.5 && parsed.w1 == 0.5 && parsed.w2 == 0.5 && d.validate().is_ok(),
            format!("w1 = {}, w2 = {}", d.w1, d.w2),
        )
    });
}

/// Counts TCP connections on a local port standing in for every provider URL.
fn network_trap() -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            counter.fetch_add(1, Ordering::SeqCst);
            if let Ok(mut st) = stream {
                let mut buf = [0u8; 1024];
                let _ = st.read(&mut buf);
                let _ = st.write_all(b"HTTP/1.1 500 Trap\r\nContent-Length: 0\r\n\r\n");
            }
        }
    });
    (url, hits)
}

fn strip_timings(v: &mut serde_json::Value) {
    if let Some(stages) = v.get_mut("stages").and_then(|s| s.as_array_mut()) {
        for st in stages {
            st["elapsed_ms"] = serde_json::json!(0.0);
        }
    }
}

fn end_to_end(s: &mut Suite) {
    let fx = core_fixtures().join("pipeline");
    let dir = tempfile::tempdir().unwrap();
    let (trap, hits) = network_trap();
    let p = |name: &str| fx.join(name).display().to_string();
    let config = format!(
        "offline = true\nparaphrase_n = 20\n\
         text.lexicon_path = {:?}\n\
         lda.k = 3\nlda.seed = 7\nlda.iters = 200\nlda.background_path = {:?}\n\
         fixtures.candidates_path = {:?}\nfixtures.evidence_dir = {:?}\nfixtures.generation_path = {:?}\n\
         providers.attribution_url = {trap:?}\nproviders.nli_url = {trap:?}\nproviders.paraphrase_url = {trap:?}\n\
         providers.search_url = {trap:?}\nproviders.generation_url = {trap:?}\n",
        p("lexicon.tsv"),
        p("background.txt"),
        p("candidates.txt"),
        p("evidence"),
        p("generation.txt"),
    );
    let cfg_path = dir.path().join("config.toml");
    std::fs::write(&cfg_path, config).unwrap();

    let run = || {
        Command::new(env!("CARGO_BIN_EXE_sca"))
            .arg("--offline")
            .arg("--config")
            .arg(&cfg_path)
            .arg("--json")
            .args(["run", "--prompt-file"])
            .arg(fx.join("prompt.txt"))
            .output()
            .unwrap()
    };
    let start = Instant::now();
    let first = run();
    let second = run();
    let elapsed = start.elapsed();

    s.check("e2e-runtime", || {
        ensure(
            first.status.success() && elapsed < Duration::from_secs(30),
            format!("two runs in {elapsed:?}, exit {:?}", first.status.code()),
        )
    });
    s.check("e2e-schema-valid", || {
        let report: PipelineReport = serde_json::from_slice(&first.stdout).map_err(|e| e.to_string())?;
        ensure(
            report.hallucination.is_some() && report.selection.is_some() && report.error.is_none(),
            format!("{} stages, chosen {:?}", report.stages.len(), report.chosen_prompt.unwrap_or_default()),
        )
    });
    s.check("e2e-byte-identical", || {
        let mut a: serde_json::Value = serde_json::from_slice(&first.stdout).map_err(|e| e.to_string())?;
        let mut b: serde_json::Value = serde_json::from_slice(&second.stdout).map_err(|e| e.to_string())?;
        strip_timings(&mut a);
        strip_timings(&mut b);
        let (a, b) = (serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        ensure(a == b, format!("{} bytes", a.len()))
    });
    s.check("e2e-no-network", || {
        let n = hits.load(Ordering::SeqCst);
        ensure(n == 0, format!("{n} connections to configured provider URLs"))
    });
}

fn main() {
    let mut s = Suite { rows: Vec::new() };
    readability(&mut s);
    formality_criteria(&mut s);
    concreteness_criteria(&mut s);
    binning(&mut s);
    med(&mut s);
    bleu_criteria(&mut s);
    pause(&mut s);
    lda(&mut s);
    selection(&mut s);
    end_to_end(&mut s);
    println!(
        "{:<13} {:<28} headline hallucination rates need fine-tuned model pairs, live web evidence and human \
         annotation; not reproducible here, the property checks above stand in for them",
        "NOTE", "headline-results"
    );

    let unexpected: Vec<&str> = s
        .rows
        .iter()
        .filter(|(name, o)| o.is_err() && !KNOWN_FAIL.contains(&name.as_str()))
        .map(|(name, _)| name.as_str())
        .collect();
    let passed = s.rows.iter().filter(|(_, o)| o.is_ok()).count();
    println!("{passed}/{} criteria passed", s.rows.len());
    if !unexpected.is_empty() {
        println!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
