use std::collections::HashMap;

use super::TextError;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const BOS: u32 = 2;
pub const EOS: u32 = 3;

const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Token to id mapping with four reserved ids at the front.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_of: HashMap<String, u32>,
    token_of: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let token_of: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let id_of = token_of
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { id_of, token_of }
    }
}

impl Vocabulary {
    /// Ids are assigned by descending frequency, ties lexicographic.
    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        let mut entries: Vec<(&str, usize)> = counts.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut vocab = Vocabulary::default();
        for (tok, _) in entries {
            vocab.insert(tok);
        }
        vocab
    }

    pub fn insert(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.id_of.get(token) {
            return id;
        }
        let id = self.token_of.len() as u32;
        self.token_of.push(token.to_string());
        self.id_of.insert(token.to_string(), id);
        id
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.id_of.get(token).copied()
    }

    /// Id of `token`, or [`UNK`].
    pub fn id(&self, token: &str) -> u32 {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.token_of.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.token_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= RESERVED.len()
    }

    pub fn is_reserved(id: u32) -> bool {
        (id as usize) < RESERVED.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.token_of
            .iter()
            .enumerate()
            .map(|(i, t)| (i as u32, t.as_str()))
    }

    /// One token per line after a `vocab v1 <n>` header.
    pub fn to_text(&self) -> String {
        let mut out = format!("vocab v1 {}\n", self.len());
        for t in &self.token_of {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    /// Parses the body produced by [`Vocabulary::to_text`] from a line iterator.
    pub fn read_lines<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<Self, TextError> {
        let err = |message: String| TextError::Format {
            what: "vocabulary",
            line: 1,
            message,
        };
        let header = lines.next().ok_or_else(|| err("missing header".into()))?;
        let n: usize = header
            .strip_prefix("vocab v1 ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| err(format!("bad header {header:?}")))?;
        let mut token_of = Vec::with_capacity(n);
        for i in 0..n {
            let t = lines
                .next()
                .ok_or_else(|| err(format!("expected {n} tokens, got {i}")))?;
            token_of.push(t.to_string());
        }
        if token_of.len() < RESERVED.len()
            || token_of[..RESERVED.len()].iter().zip(RESERVED).any(|(a, b)| a != b)
        {
            return Err(err("reserved tokens missing or out of place".into()));
        }
        let mut id_of = HashMap::with_capacity(n);
        for (i, t) in token_of.iter().enumerate() {
            if id_of.insert(t.clone(), i as u32).is_some() {
                return Err(err(format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocabulary { id_of, token_of })
    }

    pub fn from_text(text: &str) -> Result<Self, TextError> {
        Vocabulary::read_lines(&mut text.lines())
    }
}
