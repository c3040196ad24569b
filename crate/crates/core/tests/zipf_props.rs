use std::collections::HashMap;

use econodiag::series::{diff_returns, ReturnMode};
use econodiag::synth::{gen_brownian, gen_white};
use econodiag::zipf::*;
use proptest::prelude::*;

fn naive_counts(s: &[u8], m: usize) -> HashMap<Vec<u8>, u64> {
    let mut h = HashMap::new();
    for i in 0..=s.len() - m {
        *h.entry(s[i..i + m].to_vec()).or_insert(0) += 1;
    }
    h
}

fn coin(n: usize, seed: u64) -> SymbolSeq {
    let r = gen_white(n, seed, 1.0).unwrap();
    encode_signs(&r, Alphabet::Binary, 0.0).unwrap()
}

fn flip(s: &SymbolSeq) -> SymbolSeq {
    let t: String = s
        .as_str()
        .chars()
        .map(|c| if c == 'u' { 'd' } else { 'u' })
        .collect();
    SymbolSeq::parse(&t).unwrap()
}

#[test]
fn sharded_census_matches_hash_count() {
    // more start positions than one shard holds
    let seq = coin(200_003, 11);
    for m in [1, 3, 7] {
        let r = rank_words(&seq, m).unwrap();
        let naive = naive_counts(&seq.symbols, m);
        assert_eq!(r.ranking.len(), naive.len());
        for (w, c) in &r.ranking {
            assert_eq!(naive[w.as_bytes()], *c, "{w}");
        }
        assert_eq!(r.n_words, (seq.len() - m + 1) as u64);
    }
}

#[test]
fn fair_coin_has_flat_ranking() {
    let seq = coin(1_000_000, 2024);
    let r = zipf_exponent(&rank_words(&seq, 6).unwrap()).unwrap();
    assert_eq!(r.ranking.len(), 64);
    assert!(r.slope.unwrap().abs() < 0.05, "{:?}", r.slope);
}

#[test]
fn persistent_signs_steepen_the_ranking() {
    // signs of a random walk's levels change rarely: uuuu and dddd dominate
    let walk = gen_brownian(50_000, 3, 1.0).unwrap();
    let lv = walk
        .map_values(
            walk.values().to_vec(),
            econodiag::series::SeriesKind::Return,
        )
        .unwrap();
    let seq = encode_signs(&lv, Alphabet::Binary, 0.0).unwrap();
    let r = zipf_exponent(&rank_words(&seq, 4).unwrap()).unwrap();
    let fair = zipf_exponent(&rank_words(&coin(50_000, 3), 4).unwrap()).unwrap();
    assert!(
        r.slope.unwrap() < fair.slope.unwrap() - 1.0,
        "{:?} vs {:?}",
        r.slope,
        fair.slope
    );
    let top: Vec<&str> = r.ranking[..2].iter().map(|(w, _)| w.as_str()).collect();
    assert!(top.contains(&"uuuu") && top.contains(&"dddd"), "{top:?}");
}

#[test]
fn ternary_band_on_returns() {
    let prices = gen_brownian(5000, 8, 1.0).unwrap();
    let shifted = prices
        .map_values(
            prices.values().iter().map(|v| v + 1000.0).collect(),
            prices.kind(),
        )
        .unwrap();
    let r = diff_returns(&shifted, ReturnMode::Simple).unwrap();
    let wide = encode_signs(&r, Alphabet::Ternary, 1.0).unwrap();
    assert!(wide.symbols.iter().all(|s| *s == b'f'));
    let narrow = encode_signs(&r, Alphabet::Ternary, 0.0).unwrap();
    assert!(!narrow.symbols.contains(&b'f'));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn counts_are_conserved(text in "[ud]{1,300}", m in 1usize..8) {
        prop_assume!(m <= text.len());
        let seq = SymbolSeq::parse(&text).unwrap();
        let r = rank_words(&seq, m).unwrap();
        let total: u64 = r.ranking.iter().map(|(_, c)| c).sum();
        prop_assert_eq!(total, (text.len() - m + 1) as u64);
        prop_assert_eq!(total, r.n_words);
        let d = rank_words_with(&seq, m, WordWindows::Disjoint).unwrap();
        prop_assert_eq!(d.ranking.iter().map(|(_, c)| c).sum::<u64>(), (text.len() / m) as u64);
    }

    #[test]
    fn ranking_is_monotone(text in "[udf]{8,300}", m in 1usize..6) {
        let seq = SymbolSeq::parse(&text).unwrap();
        let r = rank_words(&seq, m).unwrap();
        for w in r.ranking.windows(2) {
            prop_assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
        }
        let csv = r.to_csv();
        prop_assert_eq!(csv.lines().count(), r.ranking.len() + 1);
    }

    #[test]
    fn up_down_symmetry(seed in 0u64..500, m in 1usize..6) {
        let seq = coin(2000, seed);
        let a = rank_words(&seq, m).unwrap();
        let b = rank_words(&flip(&seq), m).unwrap();
        let swapped: HashMap<String, u64> = b
            .ranking
            .iter()
            .map(|(w, c)| (w.chars().map(|ch| if ch == 'u' { 'd' } else { 'u' }).collect(), *c))
            .collect();
        for (w, c) in &a.ranking {
            prop_assert_eq!(swapped[w], *c);
        }
        let counts = |r: &ZipfResult| r.ranking.iter().map(|(_, c)| *c).collect::<Vec<_>>();
        prop_assert_eq!(counts(&a), counts(&b));
    }
}
