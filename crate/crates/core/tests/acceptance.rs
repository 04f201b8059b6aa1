//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Tolerances are pinned below.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mixforge::fixtures::{fixture_path, synthetic_domains, unimax_reference, REFERENCE_BUDGET_N, REFERENCE_EPOCH_CAP, REFERENCE_REGISTRY_CSV};
use mixforge::metrics::{chrf_stats, dchrf, delta, make_pseudo_docs, mean_relative_delta, overall_average, ChrfConfig, OrderStats};
use mixforge::mixture::{compile_recipe, reference_recipes, quota_languages, render_translation_prompt, Component, PromptKind};
use mixforge::packing::{pack, pack_parallel, write_shards, PackConfig, ShardMeta, TokenizedDoc};
use mixforge::registry::{parse_registry, LanguageCode, Registry, DEFAULT_SELECTION_THRESHOLD};
use mixforge::runplan::{lr_at, step_count, throughput_and_mfu, EfficiencyRecord, RunConfig, DEFAULT_GLOBAL_BATCH};
use mixforge::sampling::{select_from_registry, unimax_allocate, SamplerConfig, SamplingPlan};
use rand_core::Rng;
use rand_pcg::Pcg32;
use serde::Deserialize;
use sha2::{Digest, Sha256};

const UNIMAX_TOLERANCE_TOKENS: u64 = 2;
const UNIMAX_MAX_RUNTIME: Duration = Duration::from_secs(1);
const OVERALL_TOLERANCE: f64 = 0.01;
const DELTA_TOLERANCE: f64 = 0.1;
const CHRF_HAND_TOLERANCE: f64 = 1e-9;
const CHRF_ORACLE_TOLERANCE: f64 = 1e-12;
const DCHRF_TOLERANCE: f64 = 1e-9;
const LR_RELATIVE_TOLERANCE: f64 = 1e-12;
const TFLOPS_RELATIVE_TOLERANCE: f64 = 0.01;
const MFU_TOLERANCE_PP: f64 = 0.3;
const PEAK_TFLOPS: f64 = 989.0;
const PACKING_MIN_TOKENS: usize = 1_000_000;
/// Slack for binary representation error on top of a decimal tolerance.
const EPS: f64 = 1e-9;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn registry() -> Registry {
    parse_registry(REFERENCE_REGISTRY_CSV, DEFAULT_SELECTION_THRESHOLD).expect("bundled registry parses")
}

fn reference_plan() -> Result<SamplingPlan, String> {
    let config = SamplerConfig { epoch_cap: REFERENCE_EPOCH_CAP, ..SamplerConfig::new(REFERENCE_BUDGET_N) };
    unimax_allocate(&registry().included_raw_totals(), &config).map_err(|e| e.to_string())
}

fn read_rows<T: for<'de> Deserialize<'de>>(name: &str) -> Vec<T> {
    csv::Reader::from_path(fixture_path(name))
        .expect("fixture exists")
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .expect("fixture parses")
}

fn check_unimax() -> Outcome {
    let start = Instant::now();
    let plan = reference_plan()?;
    let elapsed = start.elapsed();
    let reference = unimax_reference();
    ensure(reference.len() == 24, || format!("reference has {} rows", reference.len()))?;
    let mut worst = 0;
    for (code, expected) in &reference {
        let got = plan.get(code).map(|e| e.allocated).ok_or_else(|| format!("{code} not allocated"))?;
        worst = worst.max(got.abs_diff(*expected));
        ensure(got.abs_diff(*expected) <= UNIMAX_TOLERANCE_TOKENS, || format!("{code}: {got} vs {expected}"))?;
    }
    for (code, expected) in [("sna_Latn", 1_050_640_992), ("xho_Latn", 1_070_793_848), ("tsn_Latn", 367_973_576)] {
        let got = plan.get(code).map(|e| e.allocated);
        ensure(got == Some(expected), || format!("{code}: {got:?} vs {expected}"))?;
    }
    ensure(plan.total_allocated() == REFERENCE_BUDGET_N, || format!("total {}", plan.total_allocated()))?;
    ensure(elapsed < UNIMAX_MAX_RUNTIME, || format!("took {elapsed:?}"))?;
    Ok(format!("24/24 within ±{UNIMAX_TOLERANCE_TOKENS} (max dev {worst}), {elapsed:.2?}"))
}

fn check_selection() -> Outcome {
    let selection = select_from_registry(&registry(), DEFAULT_SELECTION_THRESHOLD);
    ensure(selection.included.len() == 24, || format!("{} included", selection.included.len()))?;
    ensure(selection.excluded.len() == 37, || format!("{} excluded", selection.excluded.len()))?;
    let included: BTreeSet<String> = selection.included.iter().map(|(c, _)| c.to_string()).collect();
    let expected: BTreeSet<String> = unimax_reference().into_iter().map(|(c, _)| c).collect();
    ensure(included == expected, || format!("included set differs: {:?}", included.symmetric_difference(&expected).collect::<Vec<_>>()))?;
    ensure(selection.excluded.iter().all(|(_, raw)| *raw < DEFAULT_SELECTION_THRESHOLD), || "excluded language above threshold".into())?;
    Ok("24 included, 37 excluded at 90M".into())
}

fn check_recipes() -> Outcome {
    let plan = reference_plan()?;
    let recipes: BTreeMap<String, _> = reference_recipes().into_iter().map(|r| (r.name.clone(), r)).collect();
    let compile = |name: &str| compile_recipe(&plan, &recipes[name], 0).map_err(|e| e.to_string());
    // Exact sums of the budget N and the component budgets.
    let expected = [
        ("CMS", 22_803_696_252u64 + 967_399_767 + 1_067_549_046 + 323_969_686),
        ("CMSP", 22_803_696_252u64 + 967_399_767 + 1_067_549_046 + 323_969_686 + 456_102_720),
        ("CM", 22_803_696_252u64 + 967_399_767 + 1_067_549_046),
    ];
    ensure(expected[0].1 == 25_162_614_751 && expected[1].1 == 25_618_717_471, || "oracle sums".into())?;
    for (name, total) in expected {
        let manifest = compile(name)?;
        ensure(manifest.grand_total == total, || format!("{name}: {} vs {total}", manifest.grand_total))?;
    }
    let cms = compile("CMS")?;
    let synth = cms.component_budgets.get(&Component::Synth).copied();
    ensure(synth == Some(323_969_686), || format!("synth budget {synth:?}"))?;
    let by_domain: u64 = synthetic_domains().iter().map(|(_, t)| t).sum();
    let by_lang: u64 = quota_languages(&registry()).values().sum();
    ensure(by_domain == 323_969_686 && by_lang == 323_969_686, || format!("synth subtotals {by_domain} / {by_lang}"))?;
    ensure(cms.warnings.is_empty() && compile("CMSP")?.warnings.is_empty(), || "unexpected CMS/CMSP warning".into())?;
    let cm = compile("CM")?;
    ensure(cm.warnings.len() == 1 && cm.warnings[0].contains("24.9"), || format!("CM warnings {:?}", cm.warnings))?;
    Ok(format!(
        "CMS {} ({:.2}B), CMSP {} ({:.2}B), synth 323969686, CM {} flagged",
        cms.grand_total,
        cms.grand_total as f64 / 1e9,
        expected[1].1,
        expected[1].1 as f64 / 1e9,
        cm.grand_total
    ))
}

#[derive(Deserialize)]
struct TaskScore {
    model: String,
    score: f64,
}

#[derive(Deserialize)]
struct ReportedOverall {
    model: String,
    overall: f64,
    base_model: Option<String>,
    delta_abs: Option<f64>,
    delta_rel_pct: Option<f64>,
}

#[derive(Deserialize)]
struct HrlRow {
    model: String,
    lang: String,
    base: f64,
    adapted: f64,
    delta_rel_pct: f64,
}

/// Range of `100 (a - b) / b` over all values that round to `b` and `a` at
/// one decimal.
fn rel_delta_interval(base: f64, adapted: f64) -> (f64, f64) {
    let corners =
        [(base - 0.05, adapted - 0.05), (base - 0.05, adapted + 0.05), (base + 0.05, adapted - 0.05), (base + 0.05, adapted + 0.05)];
    let values: Vec<f64> = corners.iter().map(|(b, a)| 100.0 * (a - b) / b).collect();
    (values.iter().copied().fold(f64::INFINITY, f64::min), values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn check_tables() -> Outcome {
    let mut by_model: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in read_rows::<TaskScore>("task_results.csv") {
        by_model.entry(row.model).or_default().push(row.score);
    }
    let mut overall = BTreeMap::new();
    for (model, scores) in &by_model {
        let got = overall_average(scores).map_err(|e| e.to_string())?;
        // Independent check of the averaging itself.
        let plain = scores.iter().sum::<f64>() / scores.len() as f64;
        ensure((got - plain).abs() <= 0.005 + EPS, || format!("{model}: rounding {got} vs {plain}"))?;
        overall.insert(model.clone(), got);
    }
    let reported: Vec<ReportedOverall> = read_rows("task_results_reported.csv");
    let mut cells = 0;
    for row in &reported {
        let got = overall.get(&row.model).copied().ok_or_else(|| format!("no scores for {}", row.model))?;
        ensure((got - row.overall).abs() <= OVERALL_TOLERANCE + EPS, || format!("{}: overall {got} vs {}", row.model, row.overall))?;
        cells += 1;
        if let Some(base) = &row.base_model {
            let d = delta(overall[base], got).map_err(|e| e.to_string())?;
            let (abs, rel) = (row.delta_abs.unwrap_or(f64::NAN), row.delta_rel_pct.unwrap_or(f64::NAN));
            ensure((d.delta_abs - abs).abs() <= DELTA_TOLERANCE + EPS, || format!("{}: delta {} vs {abs}", row.model, d.delta_abs))?;
            ensure((d.delta_rel_pct - rel).abs() <= DELTA_TOLERANCE + EPS, || {
                format!("{}: delta% {} vs {rel}", row.model, d.delta_rel_pct)
            })?;
            cells += 2;
        }
    }

    let rows: Vec<HrlRow> = read_rows("hrl_drop.csv");
    let models: BTreeSet<&str> = rows.iter().map(|r| r.model.as_str()).collect();
    for model in &models {
        let langs: Vec<&HrlRow> = rows.iter().filter(|r| r.model == *model && r.lang != "avg").collect();
        let avg = rows.iter().find(|r| r.model == *model && r.lang == "avg").ok_or_else(|| format!("{model}: no avg"))?;
        let pairs: Vec<(f64, f64)> = langs.iter().map(|r| (r.base, r.adapted)).collect();
        let base = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
        let adapted = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
        let rel = mean_relative_delta(&pairs).map_err(|e| e.to_string())?;
        ensure((base - avg.base).abs() <= DELTA_TOLERANCE + EPS, || format!("{model}: avg base {base} vs {}", avg.base))?;
        ensure((adapted - avg.adapted).abs() <= DELTA_TOLERANCE + EPS, || format!("{model}: avg adapted {adapted} vs {}", avg.adapted))?;
        ensure((rel - avg.delta_rel_pct).abs() <= DELTA_TOLERANCE + EPS, || format!("{model}: avg delta% {rel} vs {}", avg.delta_rel_pct))?;
        cells += 3;
        for row in &langs {
            let (lo, hi) = rel_delta_interval(row.base, row.adapted);
            let reported = row.delta_rel_pct;
            ensure(reported >= lo - 0.05 - EPS && reported <= hi + 0.05 + EPS, || {
                format!("{model}/{}: delta% {reported} outside [{lo:.3}, {hi:.3}]", row.lang)
            })?;
            cells += 1;
        }
    }
    Ok(format!("{cells} cells reproduced (task results, HRL averages and per-language deltas)"))
}

/// Brute-force n-gram statistics: every window is materialized as an owned
/// string and counted in a map; clipping walks the hypothesis map.
fn oracle_order(hyp: &[String], reference: &[String], n: usize, joiner: &str) -> OrderStats {
    let grams = |items: &[String]| -> HashMap<String, u64> {
        let mut map = HashMap::new();
        if items.len() >= n {
            for start in 0..=items.len() - n {
                *map.entry(items[start..start + n].join(joiner)).or_insert(0) += 1;
            }
        }
        map
    };
    let (h, r) = (grams(hyp), grams(reference));
    let mut matches = 0;
    for (gram, count) in &h {
        if let Some(other) = r.get(gram) {
            matches += (*count).min(*other);
        }
    }
    OrderStats { hyp: h.values().sum(), reference: r.values().sum(), matches }
}

fn oracle_stats(hyp: &str, reference: &str, char_order: usize, word_order: usize) -> Vec<OrderStats> {
    let chars = |s: &str| -> Vec<String> { s.chars().filter(|c| !c.is_whitespace()).map(String::from).collect() };
    let words = |s: &str| -> Vec<String> { s.split_whitespace().map(String::from).collect() };
    let (hc, rc, hw, rw) = (chars(hyp), chars(reference), words(hyp), words(reference));
    let mut out: Vec<OrderStats> = (1..=char_order).map(|n| oracle_order(&hc, &rc, n, "\u{1}")).collect();
    out.extend((1..=word_order).map(|n| oracle_order(&hw, &rw, n, " ")));
    out
}

fn oracle_score(stats: &[OrderStats], beta: f64) -> f64 {
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for o in stats {
        if o.hyp + o.reference == 0 {
            continue;
        }
        precisions.push(if o.hyp == 0 { 0.0 } else { o.matches as f64 / o.hyp as f64 });
        recalls.push(if o.reference == 0 { 0.0 } else { o.matches as f64 / o.reference as f64 });
    }
    if precisions.is_empty() {
        return 100.0;
    }
    let p = precisions.iter().sum::<f64>() / precisions.len() as f64;
    let r = recalls.iter().sum::<f64>() / recalls.len() as f64;
    if p + r == 0.0 {
        return 0.0;
    }
    100.0 * (1.0 + beta * beta) * p * r / (beta * beta * p + r)
}

fn random_sentence(rng: &mut Pcg32, max_len: u32) -> String {
    const ALPHABET: [char; 9] = ['a', 'b', 'c', 'd', ' ', ' ', 'ọ', 'é', '\t'];
    let len = rng.next_u32() % (max_len + 1);
    (0..len).map(|_| ALPHABET[(rng.next_u32() % ALPHABET.len() as u32) as usize]).collect()
}

fn check_chrf() -> Outcome {
    let hand =
        mixforge::metrics::chrf("aab", "ab", &ChrfConfig { char_order: 1, word_order: 0, beta: 2.0, whitespace_in_char_ngrams: false })
            .map_err(|e| e.to_string())?;
    ensure((hand - 1000.0 / 11.0).abs() <= CHRF_HAND_TOLERANCE, || format!("chrf(aab, ab) = {hand}"))?;
    let mut rng = Pcg32::new(5, 17);
    let mut compared = 0;
    for _ in 0..1000 {
        let (hyp, reference) = (random_sentence(&mut rng, 40), random_sentence(&mut rng, 40));
        for char_order in 1..=6 {
            for word_order in [0, 2] {
                let config = ChrfConfig { char_order, word_order, beta: 2.0, whitespace_in_char_ngrams: false };
                let ours = chrf_stats(&hyp, &reference, &config);
                let oracle = oracle_stats(&hyp, &reference, char_order, word_order);
                ensure(ours.orders == oracle, || format!("stats differ for {hyp:?} / {reference:?}"))?;
                let (a, b) = (ours.score(2.0), oracle_score(&oracle, 2.0));
                ensure((a - b).abs() <= CHRF_ORACLE_TOLERANCE, || format!("score {a} vs oracle {b} for {hyp:?} / {reference:?}"))?;
                compared += 1;
            }
        }
    }
    Ok(format!(
        "{compared} configurations on 1000 pairs: stats equal the oracle, scores within {CHRF_ORACLE_TOLERANCE:e}; chrf(aab,ab)=1000/11"
    ))
}

fn check_dchrf() -> Outcome {
    let sentences: Vec<String> = (0..23).map(|i| format!("sentence {i}")).collect();
    let docs = make_pseudo_docs(&sentences, 10).map_err(|e| e.to_string())?;
    let sizes: Vec<usize> = docs.iter().map(|d| d.matches("sentence").count()).collect();
    ensure(sizes == [10, 10, 3], || format!("group sizes {sizes:?}"))?;
    let mut rng = Pcg32::new(6, 29);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let hyp: Vec<String> = (0..30).map(|_| random_sentence(&mut rng, 25)).collect();
        let reference: Vec<String> = (0..30).map(|_| random_sentence(&mut rng, 25)).collect();
        let k = 1 + trial % 12;
        let word_order = if trial % 2 == 0 { 2 } else { 0 };
        let config = ChrfConfig { char_order: 6, word_order, beta: 2.0, whitespace_in_char_ngrams: false };
        let ours = dchrf(&hyp, &reference, k, &config, 1 + trial % 4).map_err(|e| e.to_string())?;
        let mut totals = vec![OrderStats::default(); 6 + word_order];
        let mut start = 0;
        while start < hyp.len() {
            let end = (start + k).min(hyp.len());
            let (mut h, mut r) = (String::new(), String::new());
            for i in start..end {
                if i > start {
                    h.push(' ');
                    r.push(' ');
                }
                h.push_str(&hyp[i]);
                r.push_str(&reference[i]);
            }
            for (t, o) in totals.iter_mut().zip(oracle_stats(&h, &r, 6, word_order)) {
                t.hyp += o.hyp;
                t.reference += o.reference;
                t.matches += o.matches;
            }
            start = end;
        }
        let oracle = oracle_score(&totals, 2.0);
        worst = worst.max((ours - oracle).abs());
        ensure((ours - oracle).abs() <= DCHRF_TOLERANCE, || format!("trial {trial}: {ours} vs {oracle}"))?;
    }
    Ok(format!("groups [10,10,3]; 50 random corpora within {DCHRF_TOLERANCE:e} (max {worst:.1e})"))
}

fn check_schedule() -> Outcome {
    let config = RunConfig { total_steps: 6008, ..RunConfig::default() };
    let w = config.warmup_steps();
    let s = config.total_steps;
    ensure(w == 6, || format!("warmup steps {w}"))?;
    let lr = |t| lr_at(t, &config).map_err(|e| e.to_string());
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let checks = [(w, 5e-5), (s, 5e-7), (w + (s - w) / 2, 2.525e-5)];
    for (t, expected) in checks {
        let got = lr(t)?;
        ensure(rel(got, expected) <= LR_RELATIVE_TOLERANCE, || format!("lr({t}) = {got:e}, expected {expected:e}"))?;
    }
    let before = lr(w - 1)?;
    let at = lr(w)?;
    let after = lr(w + 1)?;
    let step_up = config.peak_lr / w as f64;
    ensure(lr(0)? == 0.0, || "lr(0) != 0".into())?;
    ensure(rel(at - before, step_up) <= 1e-9, || format!("warmup slope {} vs {step_up}", at - before))?;
    ensure(after < at && at - after < step_up, || format!("jump at the joint: {before:e} {at:e} {after:e}"))?;
    Ok(format!("lr({w})=5e-5, lr({s})=5e-7, lr({})=2.525e-5; continuous at the joint", w + (s - w) / 2))
}

#[derive(Deserialize)]
struct EfficiencyRow {
    model: String,
    gpus: u32,
    steps: u64,
    zflops: f64,
    hours: f64,
    tflops: f64,
    mfu_percent: f64,
}

fn check_accounting() -> Outcome {
    let tokens = 6008 * DEFAULT_GLOBAL_BATCH;
    ensure(tokens == 25_199_378_432, || format!("6008 x batch = {tokens}"))?;
    ensure(((tokens as f64 / 1e9) * 100.0).round() / 100.0 == 25.20, || "does not round to 25.20B".into())?;
    ensure(step_count(tokens, DEFAULT_GLOBAL_BATCH) == 6008, || "step count".into())?;
    let rows: Vec<EfficiencyRow> = read_rows("efficiency.csv");
    let mut checked = Vec::new();
    let mut excluded = String::new();
    for row in &rows {
        let rec = EfficiencyRecord {
            flops_total: row.zflops * 1e21,
            wall_hours: row.hours,
            num_gpus: row.gpus,
            peak_tflops_per_gpu: PEAK_TFLOPS,
        };
        let t = throughput_and_mfu(&rec).map_err(|e| e.to_string())?;
        if row.model == "AfriqueGemma 4B" {
            ensure(row.steps == 6008, || "4B row steps".into())?;
            excluded = format!("4B excluded (recomputed MFU {:.1}% vs reported {}%)", t.mfu_percent, row.mfu_percent);
            continue;
        }
        let tf = (t.tflops_total - row.tflops).abs() / row.tflops;
        let mfu = (t.mfu_percent - row.mfu_percent).abs();
        ensure(tf <= TFLOPS_RELATIVE_TOLERANCE, || format!("{}: TFLOPS {:.0} vs {}", row.model, t.tflops_total, row.tflops))?;
        ensure(mfu <= MFU_TOLERANCE_PP, || format!("{}: MFU {:.2} vs {}", row.model, t.mfu_percent, row.mfu_percent))?;
        checked.push(row.model.clone());
    }
    ensure(checked.len() == 4, || format!("checked {checked:?}"))?;
    Ok(format!("6008 x 4194304 = {tokens}; {} rows within ±1% / ±0.3pp; {excluded}", checked.len()))
}

fn random_docs(rng: &mut Pcg32, min_tokens: usize) -> Vec<TokenizedDoc> {
    let langs = ["yor_Latn", "hau_Latn", "swh_Latn"];
    let mut docs = Vec::new();
    let mut total = 0;
    while total < min_tokens {
        let len = (rng.next_u32() % 3000) as usize;
        let tokens: Vec<u32> = (0..len).map(|_| rng.next_u32() % 256).collect();
        total += len;
        docs.push(TokenizedDoc { doc_id: format!("doc-{}", docs.len()), lang: langs[docs.len() % langs.len()].to_owned(), tokens });
    }
    docs
}

fn dir_digests(dir: &Path) -> BTreeMap<String, String> {
    fs::read_dir(dir)
        .expect("output dir")
        .map(|e| e.expect("dir entry"))
        .map(|e| {
            let bytes = fs::read(e.path()).expect("read output");
            (e.file_name().to_string_lossy().into_owned(), hex::encode(Sha256::digest(&bytes)))
        })
        .collect()
}

fn check_packing() -> Outcome {
    let mut rng = Pcg32::new(9, 3);
    let docs = random_docs(&mut rng, PACKING_MIN_TOKENS);
    let input_tokens: usize = docs.iter().map(|d| d.tokens.len()).sum();
    let config = PackConfig { context_len: 4096, eos_id: 256, pad_id: 257, shard_size: 32, seed: 9 };
    let reference = pack(&docs, &config).map_err(|e| e.to_string())?;
    let non_pad: usize = reference.iter().map(|s| s.tokens.iter().filter(|&&t| t != config.pad_id).count()).sum();
    ensure(non_pad == input_tokens + docs.len(), || format!("non-pad {non_pad} vs {} + {}", input_tokens, docs.len()))?;
    ensure(reference.iter().all(|s| s.tokens.len() == config.context_len), || "sequence length".into())?;
    let meta = ShardMeta {
        recipe: "acceptance".into(),
        documents: docs.len() as u64,
        input_tokens: input_tokens as u64,
        config: serde_json::json!({}),
    };
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut digests = Vec::new();
    for (run, workers) in [(0, 1), (1, 4), (2, 8), (3, 1)] {
        let seqs = pack_parallel(&docs, &config, workers).map_err(|e| e.to_string())?;
        ensure(seqs == reference, || format!("pack_parallel({workers}) differs"))?;
        let dir = tmp.path().join(format!("run{run}"));
        let manifest = write_shards(&seqs, &dir, &config, &meta, workers).map_err(|e| e.to_string())?;
        ensure(manifest.total_non_pad_tokens as usize == input_tokens + docs.len(), || "manifest conservation".into())?;
        digests.push(dir_digests(&dir));
    }
    // Rerun into an existing directory.
    write_shards(&reference, &tmp.path().join("run0"), &config, &meta, 2).map_err(|e| e.to_string())?;
    digests.push(dir_digests(&tmp.path().join("run0")));
    ensure(digests.windows(2).all(|w| w[0] == w[1]), || "shard or manifest digests differ".into())?;
    Ok(format!(
        "{input_tokens} tokens in {} docs -> {} sequences; {} files sha256-identical across 5 runs",
        docs.len(),
        reference.len(),
        digests[0].len()
    ))
}

const GENERAL_YORUBA: &str = "You are a professional translator. Translate the user text from English into Yoruba. \nPreserve meaning, tone, formatting, inline markup, numerals, and named entities exactly. \nFor long texts, ensure the translation is fluent, coherent and complete. Make sure to translate all parts of the text. Return only the translation without additional commentary.";

const MATH_HAUSA: &str = "You are a English-to-Hausa translator for mathematical content. Translate the provided math problem, reasoning, and answer while preserving:
- All numbers, formulas, and formatting
- Mathematical notation and markup
- Named entities and tone

Input structure:
<problem>[Original Problem]</problem>
<think>[Original Reasoning]</think>
[Final Answer]<eos>

Output structure:
<problem>[Translated problem]</problem>
<think>[Translated reasoning]</think>
[Translated Final Answer]<eos>

Ensure translations are fluent, coherent, and complete. Return only the translation without additional commentary.";

fn check_prompts() -> Outcome {
    let general = render_translation_prompt(PromptKind::General, "English", "Yoruba").map_err(|e| e.to_string())?;
    ensure(general.as_bytes() == GENERAL_YORUBA.as_bytes(), || format!("general prompt differs:\n{general}"))?;
    let math = render_translation_prompt(PromptKind::Math, "English", "Hausa").map_err(|e| e.to_string())?;
    ensure(math.as_bytes() == MATH_HAUSA.as_bytes(), || format!("math prompt differs:\n{math}"))?;
    let code = LanguageCode::new("yor_Latn").map_err(|e| e.to_string())?;
    ensure(mixforge::registry::display_name(code.as_str()) == "Yoruba", || "display name".into())?;
    Ok(format!("general ({} bytes) and math ({} bytes) byte-identical", general.len(), math.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1", "UniMax allocation", check_unimax),
        ("2", "selection gate", check_selection),
        ("3", "recipe totals", check_recipes),
        ("4", "result-table arithmetic", check_tables),
        ("5", "chrF oracle equivalence", check_chrf),
        ("6", "d-chrF grouping", check_dchrf),
        ("7", "learning-rate schedule", check_schedule),
        ("8", "run accounting", check_accounting),
        ("9", "packing conservation and determinism", check_packing),
        ("10", "prompt fidelity", check_prompts),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        match check() {
            Ok(detail) => println!("[{id:>2}] PASS  {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("[{id:>2}] FAIL  {name}: {reason}");
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
