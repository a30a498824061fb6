//! Compare the DVT (right truncation) and PE (left truncation) tokenizers on
//! an over-long report.

use vte_pipeline::tokenizer::{split_sentences, tokenize, TokenizerConfig};

fn main() {
    let text = "Indication: leg swelling. Technique: duplex ultrasound. \
                The common femoral vein is compressible. \
                Impression: occlusive thrombus in the left popliteal vein.";
    for s in split_sentences(text) {
        println!("sentence: {s}");
    }
    for (name, base) in [("dvt", TokenizerConfig::dvt()), ("pe", TokenizerConfig::pe())] {
        let config = TokenizerConfig { max_len: 12, ..base };
        let seq = tokenize(text, &config);
        println!("{name}: {} of {} tokens kept: {}", seq.valid_len() - 1, seq.original_length, seq.tokens.join(" "));
    }
}
