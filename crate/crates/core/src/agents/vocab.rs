use rand::seq::SliceRandom;

use crate::game::fold;
use crate::rng::{seeded, splitmix64};

const DESCRIPTOR_BANK: &[&str] = &[
    "sweet",
    "round",
    "crunchy",
    "juicy",
    "bright",
    "soft",
    "tropical",
    "morning",
    "warm",
    "cold",
    "golden",
    "fresh",
    "wild",
    "tiny",
    "huge",
    "smooth",
    "rough",
    "sticky",
    "loud",
    "quiet",
    "shiny",
    "seasonal",
    "daily",
    "rare",
    "common",
    "natural",
    "colorful",
    "fragrant",
    "heavy",
    "light",
    "hollow",
    "layered",
    "spiky",
    "curved",
    "flat",
    "tall",
    "busy",
    "calm",
    "noisy",
    "floating",
    "sharp",
    "gentle",
    "rising",
    "falling",
    "hidden",
    "open",
    "green",
    "yellow",
    "orange",
    "purple",
    "white",
    "dark",
    "striped",
    "spotted",
    "peeled",
    "sliced",
    "frozen",
    "toasted",
    "buzzing",
    "humming",
    "glowing",
    "fading",
    "outdoor",
    "indoor",
    "seaside",
    "garden",
    "forest",
    "kitchen",
    "market",
    "summer",
    "winter",
    "festival",
    "childhood",
    "classic",
    "modern",
    "handmade",
    "imported",
    "local",
    "popular",
    "healthy",
    "sour",
    "bitter",
    "salty",
    "creamy",
    "fizzy",
    "dusty",
    "silky",
    "woolly",
    "wooden",
    "metal",
    "plastic",
    "glass",
    "electric",
    "ancient",
    "northern",
    "southern",
    "eastern",
];

/// Size of the shared descriptor bank; an upper bound for any vocabulary.
pub fn bank_size() -> usize {
    DESCRIPTOR_BANK.len()
}

fn word_hash(word: &str) -> u64 {
    fold(word)
        .bytes()
        .fold(0xCBF2_9CE4_8422_2325, |h, b| splitmix64(h ^ b as u64))
}

/// The `size` descriptors a scripted agent holding `word` may use, in a
/// fixed word-specific order. Never contains `word` itself.
pub fn vocabulary(word: &str, size: usize) -> Vec<String> {
    let mut bank: Vec<&str> = DESCRIPTOR_BANK
        .iter()
        .copied()
        .filter(|d| fold(d) != fold(word))
        .collect();
    bank.shuffle(&mut seeded(word_hash(word)));
    bank.into_iter().take(size).map(str::to_string).collect()
}
