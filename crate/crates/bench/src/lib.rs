//! Input generators shared by the benchmarks and the `lcs-scaling` binary.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uprprc_core::Document;

/// `n` tokens drawn uniformly from an alphabet of `alphabet` symbols.
pub fn random_tokens(n: usize, alphabet: u32, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0..alphabet.max(1))).collect()
}

fn word(rng: &mut ChaCha8Rng, vocab: u32) -> String {
    format!("w{}", rng.gen_range(0..vocab))
}

/// A source/target document pair with `paragraphs` paragraphs each.
///
/// The target is the source with some words substituted, a few paragraphs
/// split in two, and a few adjacent ones merged, so the aligner sees 1-1,
/// 1-2 and 2-1 groups.
pub fn synthetic_pair(paragraphs: usize, words: usize, seed: u64) -> (Document, Document) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = 5_000;
    let src: Vec<Vec<String>> = (0..paragraphs)
        .map(|_| (0..words).map(|_| word(&mut rng, vocab)).collect())
        .collect();
    let mut tgt: Vec<String> = Vec::new();
    let mut i = 0;
    while i < src.len() {
        let mut para: Vec<String> = src[i]
            .iter()
            .map(|w| if rng.gen_bool(0.15) { word(&mut rng, vocab) } else { w.clone() })
            .collect();
        match rng.gen_range(0..10) {
            0 if i + 1 < src.len() => {
                para.extend(src[i + 1].iter().cloned());
                i += 1;
                tgt.push(para.join(" "));
            }
            1 => {
                let cut = para.len() / 2;
                tgt.push(para[..cut].join(" "));
                tgt.push(para[cut..].join(" "));
            }
            _ => tgt.push(para.join(" ")),
        }
        i += 1;
    }
    // A little reordering noise inside a couple of paragraphs.
    if let Some(p) = tgt.first_mut() {
        let mut ws: Vec<&str> = p.split(' ').collect();
        ws.shuffle(&mut rng);
        *p = ws.join(" ");
    }
    let src: Vec<String> = src.iter().map(|p| p.join(" ")).collect();
    (
        Document::from_paragraphs("BENCH", "xx", &src),
        Document::from_paragraphs("BENCH", "en", &tgt),
    )
}
