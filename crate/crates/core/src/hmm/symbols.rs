//! ASCII observation names and their typographic renderings.
//!
//! Model files use plain ASCII symbols; reports add a Unicode rendering.
//! `_` is the blank output, `bot`/`top` the threshold answers, `~3` a noisy
//! value (rendered with a combining tilde) and `sA`..`sD` the padding suits.

const TILDE: char = '\u{0303}';

const NAMED: [(&str, &str); 7] = [
    ("_", "⊘"),
    ("bot", "⊥"),
    ("top", "⊤"),
    ("sA", "♠"),
    ("sB", "♥"),
    ("sC", "♦"),
    ("sD", "♣"),
];

pub fn to_unicode(sym: &str) -> String {
    if let Some((_, u)) = NAMED.iter().find(|(a, _)| *a == sym) {
        return (*u).to_string();
    }
    if let Some(rest) = sym.strip_prefix('~') {
        if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
            let mut s = String::new();
            for c in rest.chars() {
                s.push(c);
                s.push(TILDE);
            }
            return s;
        }
    }
    sym.to_string()
}

/// Inverse of [`to_unicode`]; unknown text is returned unchanged.
pub fn from_unicode(sym: &str) -> String {
    if let Some((a, _)) = NAMED.iter().find(|(_, u)| *u == sym) {
        return (*a).to_string();
    }
    if sym.contains(TILDE) {
        let digits: String = sym.chars().filter(|c| *c != TILDE).collect();
        if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
            return format!("~{}", digits);
        }
    }
    sym.to_string()
}

pub fn render_sequence(seq: &[String]) -> String {
    seq.iter().map(|s| to_unicode(s)).collect::<Vec<_>>().join(", ")
}
