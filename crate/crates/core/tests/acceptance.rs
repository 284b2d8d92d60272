//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use xmai_core::augmenter::stopwords::{english_stopwords, ENGLISH_STOPWORDS};
use xmai_core::augmenter::{filter_candidates, normalize, plan_masks, select_insertion};
use xmai_core::harness::{augment_corpus, Method, ProviderPaths, ProviderSet, Source};
use xmai_core::io::{load_corpus, load_detections, to_jsonl, Detections};
use xmai_core::metrics::porter::stem;
use xmai_core::metrics::{
    bleu, classification_report, count_insertions, meteor_lite, mrr, word_tokens, RetrievalRun,
};
use xmai_core::model::{tokenize, SplitMix64};
use xmai_core::providers::{MaskFillCandidate, MaskFillQuery};
use xmai_core::{AugmentationConfig, AugmentationResult, Example, Label};

type Outcome = Result<String, String>;

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy")
}

fn fixture_paths() -> ProviderPaths {
    let d = fixture_dir();
    ProviderPaths {
        word_vectors: Some(d.join("word_vectors.txt")),
        image_vectors: Some(d.join("images.json")),
        mask_filler: Some(Source::Fixture(d.join("maskfill.json"))),
        pos_tagger: Some(Source::Fixture(d.join("pos.tsv"))),
        ..Default::default()
    }
}

struct Toy {
    corpus: Vec<Example>,
    detections: Detections,
    providers: ProviderSet,
}

fn toy() -> Toy {
    let d = fixture_dir();
    Toy {
        corpus: load_corpus(d.join("corpus.jsonl")).expect("corpus"),
        detections: load_detections(d.join("detections.json")).expect("detections"),
        providers: ProviderSet::load(&fixture_paths()).expect("providers"),
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

const VOCAB: &[&str] = &[
    "dog", "car", "driver", "woman", "child", "chair", "table", "ball", "horse", "bird", "puppy",
    "automobile", "lady", "pony", "kid", "vehicle", "stool", "grass", "sofa", "street", "book",
    "field", "park", "branch", "beach", "rider", "snow", "food", "light", "runs", "sits", "red",
    "old", "small", "a", "the", "on", "with", "and", "in", "is", "an", "of", "Dog", "Car", "A",
    "The", ",", ".", "!",
];

/// A random sentence over the fixture vocabulary paired with a random image.
fn random_example(rng: &mut SplitMix64, n: usize, images: &[String]) -> Example {
    let len = 1 + rng.below(12);
    let mut text = String::new();
    for i in 0..len {
        let w = VOCAB[rng.below(VOCAB.len())];
        if i > 0 && !matches!(w, "," | "." | "!") {
            text.push(' ');
        }
        text.push_str(w);
    }
    Example {
        id: format!("r{n:04}"),
        text,
        image_id: images[rng.below(images.len())].clone(),
        gold_label: None,
    }
}

fn random_config(rng: &mut SplitMix64) -> AugmentationConfig {
    let mut lambda = || -2.0 + 8.0 * rng.next_f64();
    AugmentationConfig {
        lambda1: lambda(),
        lambda2: lambda(),
        lambda3: lambda(),
        k: 1 + rng.below(10),
        threshold: 0.5 + 0.45 * rng.next_f64(),
        ..Default::default()
    }
}

fn augment_one(t: &Toy, ex: &Example, config: &AugmentationConfig) -> AugmentationResult {
    let run = augment_corpus(std::slice::from_ref(ex), &t.detections, &t.providers, &Method::Xmai, config, 1)
        .expect("augment");
    run.results.into_iter().next().expect("one result")
}

// ---------------------------------------------------------------- golden

fn golden_end_to_end() -> Outcome {
    let start = Instant::now();
    let t = toy();
    let expected = std::fs::read_to_string(fixture_dir().join("expected_augmented.jsonl")).map_err(|e| e.to_string())?;
    let mut first = None;
    for workers in [1, 2, 4, 1] {
        let run = augment_corpus(&t.corpus, &t.detections, &t.providers, &Method::Xmai, &AugmentationConfig::default(), workers)
            .map_err(|e| e.to_string())?;
        let out = to_jsonl(&run.results);
        ensure(out == expected, || format!("output with {workers} workers differs from the golden file"))?;
        if first.is_none() {
            first = Some(run);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let run = first.unwrap();
    let t01 = run.results.iter().find(|r| r.example_id == "t01").ok_or("t01 missing")?;
    ensure(t01.augmented_text == "a male driver posing with a red car", || {
        format!("t01 gave {:?}", t01.augmented_text)
    })?;
    ensure(elapsed < 1.0, || format!("took {elapsed:.3} s"))?;
    Ok(format!("4 runs byte-identical, \"{}\", {elapsed:.3} s", t01.augmented_text))
}

// ---------------------------------------------------------------- scoring

fn brute_scores(p: &[f64], s: &[f64], d: &[f64], l: [f64; 3]) -> Vec<f64> {
    let norm = |v: &[f64]| -> Vec<f64> {
        let total: f64 = v.iter().sum();
        if total == 0.0 {
            vec![1.0 / v.len() as f64; v.len()]
        } else {
            v.iter().map(|x| x / total).collect()
        }
    };
    let (p, s, d) = (norm(p), norm(s), norm(d));
    (0..p.len()).map(|i| l[0] * p[i] + l[1] * s[i] + l[2] * d[i]).collect()
}

fn scoring_rule() -> Outcome {
    // hand example, components already normalized
    let p = [0.5, 0.3, 0.2];
    let s = [0.1, 0.6, 0.3];
    let d = [0.4, 0.2, 0.4];
    let scores = brute_scores(&p, &s, &d, [1.0, 5.0, 5.0]);
    for (got, want) in scores.iter().zip([3.0, 4.3, 3.7]) {
        ensure((got - want).abs() < 1e-12, || format!("hand example score {got} != {want}"))?;
    }
    ensure(select_insertion(&p, &s, &d, [1.0, 5.0, 5.0]) == Some(1), || "hand example did not pick index 1".into())?;

    // randomized sets vs brute force
    let mut rng = SplitMix64::new(11);
    for case in 0..100 {
        let n = 1 + rng.below(8);
        let mut draw = |zero_prob: f64| -> Vec<f64> {
            (0..n).map(|_| if rng.chance(zero_prob) { 0.0 } else { rng.next_f64() }).collect()
        };
        let (p, s, d) = (draw(0.1), draw(0.2), draw(0.2));
        let l = [4.0 * rng.next_f64() - 1.0, 6.0 * rng.next_f64() - 1.0, 6.0 * rng.next_f64() - 1.0];
        let (np, ns, nd) = (normalize(&p).unwrap(), normalize(&s).unwrap(), normalize(&d).unwrap());
        let brute = brute_scores(&p, &s, &d, l);
        let best = brute.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let got = select_insertion(&np, &ns, &nd, l).ok_or("no selection")?;
        let first_best = brute.iter().position(|&v| (best - v).abs() <= 1e-9).unwrap();
        ensure(got == first_best, || format!("case {case}: picked {got}, brute force {first_best} ({brute:?})"))?;
    }

    // positive scaling of all weights leaves the augmented text unchanged
    let t = toy();
    let images: Vec<String> = t.detections.keys().cloned().collect();
    let mut rng = SplitMix64::new(12);
    let mut violations = 0;
    let mut changed = 0;
    for n in 0..100 {
        let ex = random_example(&mut rng, n, &images);
        let config = random_config(&mut rng);
        let base = augment_one(&t, &ex, &config);
        changed += usize::from(base.augmented_text != ex.text);
        for c in [0.5, 2.0, 10.0] {
            let scaled = AugmentationConfig {
                lambda1: c * config.lambda1,
                lambda2: c * config.lambda2,
                lambda3: c * config.lambda3,
                ..config
            };
            if augment_one(&t, &ex, &scaled).augmented_text != base.augmented_text {
                violations += 1;
            }
        }
    }
    ensure(violations == 0, || format!("{violations} scaling violations"))?;
    Ok(format!("hand example S=(3.0, 4.3, 3.7) -> 1; 100 random sets agree; 300 scaled runs, 0 violations ({changed}/100 texts changed)"))
}

// ---------------------------------------------------------------- filtering

fn filtering_rules() -> Outcome {
    let stop = english_stopwords();
    let words: Vec<&str> = VOCAB.iter().copied().filter(|w| w.chars().all(char::is_alphanumeric)).collect();
    let mut rng = SplitMix64::new(13);
    let mut rejected = [0usize; 3];
    for case in 0..500 {
        let len = 1 + rng.below(14);
        let text: Vec<&str> = (0..len).map(|_| words[rng.below(words.len())]).collect();
        let ts = tokenize(&text.join(" "));
        let mask = rng.below(ts.len() + 1);
        let mut raw = Vec::new();
        for i in 0..(1 + rng.below(10)) {
            let w = match rng.below(4) {
                0 => ENGLISH_STOPWORDS[rng.below(ENGLISH_STOPWORDS.len())].to_string(),
                1 => text[rng.below(len)].to_uppercase(),
                2 => "two words".to_string(),
                _ => words[rng.below(words.len())].to_string(),
            };
            raw.push(MaskFillCandidate::new(w, 1.0 / (i + 1) as f64));
        }
        let (kept, filtered) = filter_candidates(&raw, &ts, mask, stop);

        // oracle: the three words on either side of the mask
        let lower: Vec<String> = text.iter().map(|w| w.to_lowercase()).collect();
        let window: Vec<&String> = lower[mask.saturating_sub(3)..mask].iter().chain(lower[mask..(mask + 3).min(len)].iter()).collect();
        let mut want = Vec::new();
        for c in &raw {
            let l = c.word.to_lowercase();
            if c.word.contains(' ') {
                rejected[2] += 1;
            } else if ENGLISH_STOPWORDS.contains(&l.as_str()) {
                rejected[0] += 1;
            } else if window.contains(&&l) {
                rejected[1] += 1;
            } else {
                want.push(c.word.clone());
            }
        }
        let got: Vec<String> = kept.iter().map(|c| c.word.clone()).collect();
        ensure(got == want, || format!("case {case}: kept {got:?}, oracle {want:?} for {text:?} mask {mask}"))?;
        ensure(kept.len() + filtered.len() == raw.len(), || format!("case {case}: candidates lost"))?;
    }
    Ok(format!(
        "500 cases, 0 violations ({} stopword, {} window, {} multi-word rejections)",
        rejected[0], rejected[1], rejected[2]
    ))
}

// ---------------------------------------------------------------- normalization

fn normalization() -> Outcome {
    let t = toy();
    let mut decisions = 0;
    let mut check = |r: &AugmentationResult| -> Result<(), String> {
        for dec in &r.decisions {
            let scored = dec.scored();
            if scored.is_empty() {
                continue;
            }
            decisions += 1;
            for (name, sum) in [
                ("p", scored.iter().map(|c| c.p).sum::<f64>()),
                ("s", scored.iter().map(|c| c.s).sum::<f64>()),
                ("d", scored.iter().map(|c| c.d).sum::<f64>()),
            ] {
                ensure((sum - 1.0).abs() <= 1e-9, || format!("{}: {name} sums to {sum}", r.example_id))?;
            }
        }
        Ok(())
    };
    let run = augment_corpus(&t.corpus, &t.detections, &t.providers, &Method::Xmai, &AugmentationConfig::default(), 1)
        .map_err(|e| e.to_string())?;
    for r in &run.results {
        check(r)?;
    }
    let images: Vec<String> = t.detections.keys().cloned().collect();
    let mut rng = SplitMix64::new(14);
    for n in 0..200 {
        let ex = random_example(&mut rng, n, &images);
        check(&augment_one(&t, &ex, &random_config(&mut rng)))?;
    }
    for n in 1..=6 {
        let u = normalize(&vec![0.0; n]).unwrap();
        ensure(u.iter().all(|x| (x - 1.0 / n as f64).abs() < 1e-15), || format!("zeros of length {n} -> {u:?}"))?;
    }
    Ok(format!("{decisions} decision traces sum to 1 within 1e-9; all-zero inputs uniform"))
}

// ---------------------------------------------------------------- subsequence

fn is_subsequence(small: &[String], big: &[String]) -> bool {
    let mut it = big.iter();
    small.iter().all(|w| it.any(|b| b == w))
}

fn subsequence_invariant() -> Outcome {
    let t = toy();
    let images: Vec<String> = t.detections.keys().cloned().collect();
    let mut rng = SplitMix64::new(15);
    let mut inserted = 0;
    for n in 0..1000 {
        let ex = random_example(&mut rng, n, &images);
        let r = augment_one(&t, &ex, &random_config(&mut rng));
        let before = tokenize(&ex.text).surfaces();
        let after = tokenize(&r.augmented_text).surfaces();
        ensure(is_subsequence(&before, &after), || format!("{:?} is not inside {:?}", ex.text, r.augmented_text))?;
        let gaps = after.len() - before.len();
        let chosen = r.decisions.iter().filter(|d| d.chosen.is_some()).count();
        ensure(gaps == chosen, || format!("{:?}: {gaps} new tokens, {chosen} insertions recorded", ex.text))?;
        let counted = count_insertions(&word_tokens(&ex.text), &word_tokens(&r.augmented_text));
        ensure(counted == gaps, || format!("{:?}: count_insertions {counted}, true {gaps}", ex.text))?;
        inserted += gaps;
    }
    Ok(format!("1000 augmentations, 0 violations, {inserted} insertions counted exactly"))
}

// ---------------------------------------------------------------- metrics

fn bleu_oracle(reference: &[String], hyp: &[String]) -> f64 {
    let orders = 4.min(hyp.len());
    if orders == 0 {
        return 0.0;
    }
    let count = |seq: &[String], gram: &[String]| (0..=seq.len().saturating_sub(gram.len())).filter(|&i| i + gram.len() <= seq.len() && &seq[i..i + gram.len()] == gram).count();
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let mut seen: Vec<&[String]> = Vec::new();
        let mut matched = 0;
        for i in 0..=hyp.len() - n {
            let gram = &hyp[i..i + n];
            if seen.contains(&gram) {
                continue;
            }
            seen.push(gram);
            matched += count(hyp, gram).min(count(reference, gram));
        }
        let num = if matched == 0 { 1e-9 } else { matched as f64 };
        log_sum += (num / (hyp.len() - n + 1) as f64).ln();
    }
    let bp = if hyp.len() < reference.len() { (1.0 - reference.len() as f64 / hyp.len() as f64).exp() } else { 1.0 };
    bp * (log_sum / orders as f64).exp()
}

/// Best alignment for one stage by exhaustive search: maximum size, then
/// lexicographically smallest when read as one optional reference position
/// per hypothesis token (a position sorts before "unmatched").
fn exhaustive_stage(
    hyp: &[String],
    reference: &[String],
    fixed_h: &[Option<usize>],
    used_r: &[bool],
    same: &dyn Fn(&str, &str) -> bool,
) -> Vec<Option<usize>> {
    fn rec(
        h: usize,
        hyp: &[String],
        reference: &[String],
        fixed_h: &[Option<usize>],
        used: &mut Vec<bool>,
        cur: &mut Vec<Option<usize>>,
        best: &mut Option<(usize, Vec<Option<usize>>)>,
        same: &dyn Fn(&str, &str) -> bool,
    ) {
        if h == hyp.len() {
            let size = cur.iter().filter(|x| x.is_some()).count();
            let key = |v: &Vec<Option<usize>>| v.iter().map(|x| x.unwrap_or(usize::MAX)).collect::<Vec<_>>();
            let better = match best {
                None => true,
                Some((bs, bv)) => size > *bs || (size == *bs && key(cur) < key(bv)),
            };
            if better {
                *best = Some((size, cur.clone()));
            }
            return;
        }
        if fixed_h[h].is_none() {
            for r in 0..reference.len() {
                if !used[r] && same(&hyp[h], &reference[r]) {
                    used[r] = true;
                    cur.push(Some(r));
                    rec(h + 1, hyp, reference, fixed_h, used, cur, best, same);
                    cur.pop();
                    used[r] = false;
                }
            }
        }
        cur.push(None);
        rec(h + 1, hyp, reference, fixed_h, used, cur, best, same);
        cur.pop();
    }
    let mut best = None;
    rec(0, hyp, reference, fixed_h, &mut used_r.to_vec(), &mut Vec::new(), &mut best, same);
    best.unwrap().1
}

fn meteor_oracle(reference: &[String], hyp: &[String]) -> f64 {
    let exact = exhaustive_stage(hyp, reference, &vec![None; hyp.len()], &vec![false; reference.len()], &|a, b| a == b);
    let mut used = vec![false; reference.len()];
    for r in exact.iter().flatten() {
        used[*r] = true;
    }
    let stemmed = exhaustive_stage(hyp, reference, &exact, &used, &|a, b| stem(a) == stem(b));
    let pairs: Vec<(usize, usize)> = (0..hyp.len())
        .filter_map(|h| exact[h].or(stemmed[h]).map(|r| (h, r)))
        .collect();
    let m = pairs.len();
    if m == 0 {
        return 0.0;
    }
    let mut chunks = 1;
    for w in pairs.windows(2) {
        if !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1) {
            chunks += 1;
        }
    }
    let p = m as f64 / hyp.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f = 10.0 * p * r / (r + 9.0 * p);
    f * (1.0 - 0.5 * (chunks as f64 / m as f64).powi(3))
}

fn metric_oracles() -> Outcome {
    const WORDS: &[&str] = &["a", "the", "dog", "dogs", "run", "runs", "running", "red", "car", "cars", "is", "sit"];
    let mut rng = SplitMix64::new(16);
    let sentence = |rng: &mut SplitMix64| -> Vec<String> {
        let n = rng.below(9);
        (0..n).map(|_| WORDS[rng.below(WORDS.len())].to_string()).collect()
    };
    let mut worst = 0.0f64;
    for case in 0..200 {
        let reference = sentence(&mut rng);
        let hyp = if rng.chance(0.3) && !reference.is_empty() {
            let mut h = reference.clone();
            h.insert(rng.below(h.len() + 1), WORDS[rng.below(WORDS.len())].to_string());
            h
        } else {
            sentence(&mut rng)
        };
        let (b, bo) = (bleu(&reference, &hyp, 4), bleu_oracle(&reference, &hyp));
        let (m, mo) = (meteor_lite(&reference, &hyp), meteor_oracle(&reference, &hyp));
        worst = worst.max((b - bo).abs()).max((m - mo).abs());
        ensure((b - bo).abs() <= 1e-9, || format!("case {case}: BLEU {b} vs oracle {bo} for {reference:?} / {hyp:?}"))?;
        ensure((m - mo).abs() <= 1e-9, || format!("case {case}: METEOR {m} vs oracle {mo} for {reference:?} / {hyp:?}"))?;
    }
    let w = |s: &str| word_tokens(s);
    let golden = bleu(&w("a b c d"), &w("a b c d e"), 4);
    ensure((golden - 0.668740304976422).abs() < 1e-12, || format!("BLEU golden {golden}"))?;

    let ranks = [1, 3, 2, 10, 1, 7];
    let direct = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64;
    let got = mrr(&RetrievalRun::from_ranks(&ranks)).map_err(|e| e.to_string())?;
    ensure((got - direct).abs() < 1e-15, || format!("MRR {got} vs {direct}"))?;

    use Label::*;
    let r = classification_report(&[Entailment, Entailment, Contradiction], &[Entailment, Contradiction, Contradiction])
        .map_err(|e| e.to_string())?;
    let want = [2.0 / 3.0, 5.0 / 6.0, 2.0 / 3.0, 2.0 / 3.0];
    for (got, want) in [r.accuracy, r.precision, r.recall, r.f1].iter().zip(want) {
        ensure((got - want).abs() < 1e-12, || format!("classification {r:?}"))?;
    }
    let r = classification_report(&[Entailment, Neutral, Contradiction, Neutral], &[Neutral, Neutral, Neutral, Neutral])
        .map_err(|e| e.to_string())?;
    // neutral: P 2/4, R 1, F 2/3 with weight 1/2; other classes 0
    ensure((r.precision - 0.25).abs() < 1e-12 && (r.f1 - 1.0 / 3.0).abs() < 1e-12 && r.accuracy == 0.5, || format!("collapse case {r:?}"))?;
    Ok(format!("200 BLEU/METEOR pairs within {worst:.1e}; MRR direct; confusion matrices match"))
}

// ---------------------------------------------------------------- monotonicity

fn monotonicity() -> Outcome {
    let t = toy();
    let mut counts = Vec::new();
    for threshold in [0.5, 0.6, 0.7, 0.8, 0.9] {
        let config = AugmentationConfig { threshold, ..Default::default() };
        let run = augment_corpus(&t.corpus, &t.detections, &t.providers, &Method::Xmai, &config, 1).map_err(|e| e.to_string())?;
        counts.push(run.summary.fallback_sites);
    }
    ensure(counts.windows(2).all(|w| w[0] >= w[1]), || format!("fallback sites over t: {counts:?}"))?;

    let providers = t.providers.worker().map_err(|e| e.to_string())?;
    let none = Vec::new();
    let mut sites = 0;
    for ex in &t.corpus {
        let tokens = tokenize(&ex.text);
        let dets = t.detections.get(&ex.image_id).unwrap_or(&none);
        let plan = plan_masks(&tokens, dets, &providers, 0.5).map_err(|e| e.to_string())?;
        for site in &plan.sites {
            sites += 1;
            let fill = |k| providers.mask_filler.mask_fill(&MaskFillQuery::at(&tokens, site.insert_before_index, k));
            let lists: Vec<Vec<MaskFillCandidate>> = [3, 5, 10].into_iter().map(fill).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
            ensure(lists[1].starts_with(&lists[0]) && lists[2].starts_with(&lists[1]), || format!("{}: k lists not prefix-consistent", ex.id))?;
        }
    }
    Ok(format!("fallback sites over t=0.5..0.9: {counts:?}; {sites} sites prefix-consistent over k=3,5,10"))
}

// ---------------------------------------------------------------- throughput

fn throughput() -> Outcome {
    let t = toy();
    let mut corpus = Vec::new();
    for pass in 0..25 {
        for ex in &t.corpus {
            corpus.push(Example { id: format!("{}-{pass}", ex.id), ..ex.clone() });
        }
    }
    let start = Instant::now();
    let run = augment_corpus(&corpus, &t.detections, &t.providers, &Method::Xmai, &AugmentationConfig::default(), 1)
        .map_err(|e| e.to_string())?;
    let rate = run.results.len() as f64 / start.elapsed().as_secs_f64();
    ensure(rate >= 100.0, || format!("{rate:.0} examples/s"))?;
    Ok(format!("{rate:.0} examples/s on one worker ({} examples)", run.results.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("golden end-to-end", golden_end_to_end),
        ("scoring rule", scoring_rule),
        ("filtering rules", filtering_rules),
        ("normalization", normalization),
        ("subsequence invariant", subsequence_invariant),
        ("metric oracles", metric_oracles),
        ("monotonicity", monotonicity),
        ("throughput", throughput),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
