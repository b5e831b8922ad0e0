//! Whitespace tokenization with punctuation detachment, and its inverse.

use super::Sentence;

/// Characters split off the edges of a whitespace chunk as their own tokens.
pub const DETACHED_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '¡', '¿', '"', '\'', '—'];

/// Punctuation that attaches to the preceding token when detokenizing.
const CLOSING_PUNCT: &[&str] = &[".", ",", ";", ":", "!", "?"];

/// Punctuation that attaches to the following token when detokenizing.
const OPENING_PUNCT: &[&str] = &["¡", "¿"];

pub fn is_detached_punct(c: char) -> bool {
    DETACHED_PUNCT.contains(&c)
}

/// Splits `text` on whitespace and detaches leading and trailing punctuation
/// characters as single-character tokens. Interior punctuation is kept.
pub fn tokenize(text: &str) -> Sentence {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<(usize, char)> = chunk.char_indices().collect();
        let lead = chars.iter().take_while(|(_, c)| is_detached_punct(*c)).count();
        if lead == chars.len() {
            tokens.extend(chars.iter().map(|(_, c)| c.to_string()));
            continue;
        }
        let trail = chars.iter().rev().take_while(|(_, c)| is_detached_punct(*c)).count();
        tokens.extend(chars[..lead].iter().map(|(_, c)| c.to_string()));
        let core_start = chars[lead].0;
        let core_end = if trail == 0 {
            chunk.len()
        } else {
            chars[chars.len() - trail].0
        };
        tokens.push(chunk[core_start..core_end].to_string());
        tokens.extend(chars[chars.len() - trail..].iter().map(|(_, c)| c.to_string()));
    }
    Sentence::from_tokens_unchecked(tokens)
}

/// Joins tokens with single spaces, dropping the space before closing
/// punctuation and after opening punctuation.
pub fn detokenize(sentence: &Sentence) -> String {
    detokenize_tokens(sentence.tokens())
}

pub fn detokenize_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut glue_next = false;
    for (i, tok) in tokens.iter().enumerate() {
        let tok = tok.as_ref();
        if i > 0 && !glue_next && !CLOSING_PUNCT.contains(&tok) {
            out.push(' ');
        }
        out.push_str(tok);
        glue_next = OPENING_PUNCT.contains(&tok);
    }
    out
}
