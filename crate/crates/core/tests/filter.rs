use mixforge::ingest::{Tokenizer, TokenizerSpec};
use mixforge::mixture::{filter_parallel, filter_parallel_stream, ParallelPair, PrecomputedScorer};
use mixforge::registry::LanguageCode;
use proptest::prelude::*;

fn pairs_strategy() -> impl Strategy<Value = Vec<ParallelPair>> {
    prop::collection::vec(("[a-z ]{0,30}", "[a-z ]{0,30}", 0.0f64..=1.0), 0..60).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (src, tgt, score))| ParallelPair {
                id: format!("p{i}"),
                src_lang: LanguageCode::new("eng_Latn").unwrap(),
                tgt_lang: LanguageCode::new("yor_Latn").unwrap(),
                src_text: src,
                tgt_text: tgt,
                qe_score: Some(score),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn retention_is_monotone_in_tau(pairs in pairs_strategy(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let tokenizer = Tokenizer::new(TokenizerSpec::byte()).unwrap();
        let (kept_lo, stats_lo) = filter_parallel(&pairs, &PrecomputedScorer, lo, &tokenizer, 2).unwrap();
        let (kept_hi, stats_hi) = filter_parallel(&pairs, &PrecomputedScorer, hi, &tokenizer, 3).unwrap();
        prop_assert!(stats_hi.retained_pairs <= stats_lo.retained_pairs);
        prop_assert!(stats_hi.retained_tokens <= stats_lo.retained_tokens);
        prop_assert!(kept_hi.iter().all(|p| kept_lo.contains(p)));
        let expected: Vec<&ParallelPair> = pairs.iter().filter(|p| p.qe_score.unwrap() >= hi).collect();
        prop_assert_eq!(kept_hi.iter().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn stream_matches_batch(pairs in pairs_strategy(), tau in 0.0f64..=1.0, batch in 1usize..9) {
        let tokenizer = Tokenizer::new(TokenizerSpec::byte()).unwrap();
        let (kept, stats) = filter_parallel(&pairs, &PrecomputedScorer, tau, &tokenizer, 1).unwrap();
        let mut streamed = Vec::new();
        let stream_stats = filter_parallel_stream(pairs.iter().cloned().map(Ok), &PrecomputedScorer, tau, &tokenizer, 0, batch, |p| {
            streamed.push(p.clone())
        })
        .unwrap();
        prop_assert_eq!(stats, stream_stats);
        prop_assert_eq!(kept, streamed);
    }
}
