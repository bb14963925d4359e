use std::sync::LazyLock;

use regex::Regex;

/// Emoji: presentation-default pictographs, text pictographs forced to emoji
/// presentation with VS16, skin-tone modifiers, and the glue of emoji
/// sequences (variation selectors, ZWJ, keycap, tag characters).
static EMOJI: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\p{Extended_Pictographic}\x{FE0F}|[\p{Emoji_Presentation}\p{Emoji_Modifier}\x{FE0E}\x{FE0F}\x{200D}\x{20E3}\x{E0020}-\x{E007F}]",
    )
    .expect("emoji pattern")
});

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.|pic\.twitter\.com/)\S*").expect("url pattern"));

/// A run of `@`/`#` that starts a mention or hashtag.
static MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(^|[^\w@#])[@#]+(\w)").expect("marker pattern"));

/// Normalises tweet-like text: drops URLs, standalone `RT` tokens and emoji,
/// strips `@`/`#` markers while keeping the word, and collapses whitespace.
///
/// The result is a fixpoint: `preprocess_text(preprocess_text(x)) ==
/// preprocess_text(x)`.
pub fn preprocess_text(raw: &str) -> String {
    let mut current = single_pass(raw);
    // Every pass only deletes characters, so this terminates.
    loop {
        let next = single_pass(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn single_pass(text: &str) -> String {
    let text = EMOJI.replace_all(text, "");
    let text = URL.replace_all(&text, " ");
    let text = MARKER.replace_all(&text, "$1$2");
    text.split_whitespace()
        .filter(|token| *token != "RT")
        .collect::<Vec<_>>()
        .join(" ")
}
