use proptest::prelude::*;

use vte_pipeline::embed::{hashed_vector, write_embeddings, Embedder, EmbeddingProviderSpec};
use vte_pipeline::tokenizer::{split_sentences, tokenize, word_tokens, TokenizerConfig, TruncateSide};

fn text_strategy() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            "[a-z]{1,8}",
            "[0-9]\\.[0-9]",
            Just(".".to_string()),
            Just(",".to_string()),
            Just("\n".to_string()),
        ],
        0..120,
    )
    .prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sequences_have_exactly_max_len_tokens(text in text_strategy(), max_len in 2usize..64, left in any::<bool>()) {
        let side = if left { TruncateSide::Left } else { TruncateSide::Right };
        let seq = tokenize(&text, &TokenizerConfig::new(max_len, side));
        prop_assert_eq!(seq.len(), max_len);
        prop_assert_eq!(&seq.tokens[0], "[CLS]");
        prop_assert!(seq.tokens[seq.valid_len()..].iter().all(|t| t == "[PAD]"));
    }

    #[test]
    fn truncation_keeps_a_prefix_or_suffix(text in text_strategy(), max_len in 2usize..64) {
        let full = word_tokens(&text, true);
        let right = tokenize(&text, &TokenizerConfig::new(max_len, TruncateSide::Right));
        let left = tokenize(&text, &TokenizerConfig::new(max_len, TruncateSide::Left));
        let kept_r = &right.valid_tokens()[1..];
        let kept_l = &left.valid_tokens()[1..];
        prop_assert_eq!(kept_r.len(), full.len().min(max_len - 1));
        prop_assert!(full.starts_with(kept_r));
        prop_assert!(full.ends_with(kept_l));
        prop_assert_eq!(right.original_length, full.len());
    }

    #[test]
    fn sentences_reassemble_the_input(text in text_strategy()) {
        let joined: String = split_sentences(&text).concat();
        let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        prop_assert_eq!(strip(&joined), strip(&text));
    }

    #[test]
    fn embedding_rows_follow_tokens(text in text_strategy(), max_len in 2usize..40, seed in any::<u64>()) {
        let seq = tokenize(&text, &TokenizerConfig::new(max_len, TruncateSide::Left));
        let m = Embedder::new(EmbeddingProviderSpec::hashed(16, seed)).unwrap().embed("r", &seq).unwrap();
        prop_assert_eq!(m.len(), seq.len());
        prop_assert_eq!(m.valid_rows(), seq.valid_len());
        prop_assert!(m.as_slice().iter().all(|v| v.is_finite()));
        for row in m.rows() {
            let norm = row.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn hashed_vectors_depend_only_on_token_and_seed(token in "[a-z]{1,10}", seed in any::<u64>()) {
        prop_assert_eq!(hashed_vector(&token, seed, 24), hashed_vector(&token, seed, 24));
    }
}

#[test]
fn tokenize_is_deterministic() {
    let text = "Filling defect in the right lower lobe. Impression: acute PE.";
    let config = TokenizerConfig::pe();
    assert_eq!(tokenize(text, &config), tokenize(text, &config));
}

#[test]
fn precomputed_round_trip_is_bit_exact() {
    let config = TokenizerConfig::new(12, TruncateSide::Right);
    let hashed = Embedder::new(EmbeddingProviderSpec::hashed(8, 3)).unwrap();
    let texts = [("a", "Small clot seen."), ("b", "No acute findings in the chest today at all.")];
    let seqs: Vec<_> = texts.iter().map(|(_, t)| tokenize(t, &config)).collect();
    let mats: Vec<_> = texts
        .iter()
        .zip(&seqs)
        .map(|((id, _), s)| hashed.embed(id, s).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.bin");
    write_embeddings(&path, texts.iter().map(|(id, _)| *id).zip(&mats)).unwrap();
    let loaded = Embedder::new(EmbeddingProviderSpec::precomputed(8, &path)).unwrap();
    for (((id, _), seq), m) in texts.iter().zip(&seqs).zip(&mats) {
        let back = loaded.embed(id, seq).unwrap();
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.as_slice()), bits(m.as_slice()));
        assert_eq!(back.pad_rows(), m.pad_rows());
    }
}

/// Independent unit vectors in 768 dimensions have |cos| far below 0.5.
#[test]
fn distinct_tokens_are_nearly_orthogonal() {
    let dim = 768;
    let vectors: Vec<Vec<f32>> = (0..10_000).map(|i| hashed_vector(&format!("tok{i}"), 13, dim)).collect();
    let close = vectors
        .windows(2)
        .filter(|w| {
            let dot: f64 = w[0].iter().zip(&w[1]).map(|(a, b)| (*a as f64) * (*b as f64)).sum();
            dot.abs() >= 0.5
        })
        .count();
    assert!((close as f64) / 9_999.0 <= 0.01, "{close} pairs with |cos| >= 0.5");
}
