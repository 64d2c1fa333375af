use crate::game::WordPair;

const PAIRS: &[(&str, &str, &str)] = &[
    ("apple", "pineapple", "fruit"),
    ("tea", "coffee", "drink"),
    ("piano", "violin", "instrument"),
    ("lion", "tiger", "animal"),
    ("bus", "train", "transport"),
    ("pencil", "crayon", "stationery"),
    ("soccer", "basketball", "sport"),
    ("butterfly", "moth", "insect"),
    ("noodles", "spaghetti", "food"),
    ("sunflower", "daisy", "flower"),
    ("pillow", "cushion", "household"),
    ("river", "stream", "nature"),
    ("doctor", "nurse", "profession"),
    ("dumpling", "wonton", "food"),
    ("umbrella", "raincoat", "clothing"),
    ("library", "bookstore", "place"),
    ("moon", "sun", "sky"),
    ("milk", "yogurt", "drink"),
    ("chess", "checkers", "game"),
    ("hammer", "wrench", "tool"),
];

/// Built-in folk/spy word pairs, cycled by batch game index.
pub fn default_word_pairs() -> Vec<WordPair> {
    PAIRS
        .iter()
        .map(|(f, s, c)| WordPair::new(*f, *s).with_category(*c))
        .collect()
}
