//! Synthetic historical-drift corpora: rewrite modern text with archaic
//! spelling rules to obtain (historical source, modern target) pairs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ParallelCorpus, Sentence, TextError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleScope {
    /// The pattern must equal a whole token.
    Word,
    /// Every non-overlapping occurrence inside a token is a candidate.
    Substring,
}

/// A rewrite from modern to historical form. Each candidate site is
/// rewritten independently with `probability`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftRule {
    pub pattern: String,
    pub replacement: String,
    pub scope: RuleScope,
    pub probability: f64,
}

impl DriftRule {
    pub fn word(pattern: &str, replacement: &str) -> Self {
        DriftRule {
            pattern: pattern.into(),
            replacement: replacement.into(),
            scope: RuleScope::Word,
            probability: 1.0,
        }
    }

    pub fn substring(pattern: &str, replacement: &str, probability: f64) -> Self {
        DriftRule {
            pattern: pattern.into(),
            replacement: replacement.into(),
            scope: RuleScope::Substring,
            probability,
        }
    }

    /// Parses a rule file: one `pattern<TAB>replacement` per line, with an
    /// optional third `<TAB>probability` column. A pattern written `=word`
    /// matches whole tokens only; otherwise it is a substring rule. Blank
    /// lines and lines starting with `#` are ignored.
    pub fn parse_rules(text: &str) -> Result<Vec<DriftRule>, TextError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| TextError::Format {
                what: "drift rule",
                line: i + 1,
                message: message.to_string(),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if !(2..=3).contains(&cols.len()) || cols[0].is_empty() {
                return Err(err("expected pattern<TAB>replacement[<TAB>probability]"));
            }
            let probability = match cols.get(2) {
                Some(p) => p
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|p| (0.0..=1.0).contains(p))
                    .ok_or_else(|| err("probability must be in [0, 1]"))?,
                None => 1.0,
            };
            let (scope, pattern) = match cols[0].strip_prefix('=') {
                Some(w) if !w.is_empty() => (RuleScope::Word, w),
                _ => (RuleScope::Substring, cols[0]),
            };
            rules.push(DriftRule {
                pattern: pattern.to_string(),
                replacement: cols[1].to_string(),
                scope,
                probability,
            });
        }
        Ok(rules)
    }

    pub fn to_line(&self) -> String {
        let prefix = if self.scope == RuleScope::Word { "=" } else { "" };
        format!("{prefix}{}\t{}\t{}", self.pattern, self.replacement, self.probability)
    }
}

/// Archaic Spanish spellings in the style of 17th-century printings.
pub fn builtin_rules() -> Vec<DriftRule> {
    let mut rules: Vec<DriftRule> = [
        ("ahora", "aora"),
        ("después", "despues"),
        ("ambos", "entrambos"),
        ("dijo", "dixo"),
        ("dijeron", "dixeron"),
        ("será", "sera"),
        ("mujer", "muger"),
        ("así", "assi"),
        ("hacer", "hazer"),
        ("era", "hera"),
        ("echar", "hechar"),
        ("cabeza", "cabeça"),
        ("corazón", "coraçon"),
        ("también", "tambien"),
        ("aquí", "aqui"),
        ("allí", "alli"),
        ("muy", "mui"),
        ("hay", "ay"),
        ("caballero", "cavallero"),
        ("iba", "yva"),
        ("dirá", "dira"),
    ]
    .iter()
    .map(|(a, b)| DriftRule::word(a, b))
    .collect();
    rules.extend([
        DriftRule::substring("v", "u", 0.5),
        DriftRule::substring("ce", "ze", 0.5),
        DriftRule::substring("ción", "cion", 1.0),
        DriftRule::substring("j", "x", 0.5),
        DriftRule::substring("é", "e", 0.5),
    ]);
    rules
}

fn apply_substring(token: &str, rule: &DriftRule, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::with_capacity(token.len());
    let mut rest = token;
    while let Some(pos) = rest.find(&rule.pattern) {
        out.push_str(&rest[..pos]);
        if rng.gen_bool(rule.probability) {
            out.push_str(&rule.replacement);
        } else {
            out.push_str(&rule.pattern);
        }
        rest = &rest[pos + rule.pattern.len()..];
    }
    out.push_str(rest);
    out
}

fn perturb(sentence: &Sentence, rules: &[DriftRule], rng: &mut ChaCha8Rng) -> Sentence {
    let mut tokens: Vec<String> = sentence.tokens().to_vec();
    for rule in rules {
        let mut next = Vec::with_capacity(tokens.len());
        for tok in tokens {
            match rule.scope {
                RuleScope::Word if tok == rule.pattern => {
                    if rng.gen_bool(rule.probability) {
                        next.extend(rule.replacement.split_whitespace().map(str::to_string));
                    } else {
                        next.push(tok);
                    }
                }
                RuleScope::Substring if !rule.pattern.is_empty() => {
                    next.extend(
                        apply_substring(&tok, rule, rng)
                            .split_whitespace()
                            .map(str::to_string),
                    );
                }
                _ => next.push(tok),
            }
        }
        tokens = next;
    }
    Sentence::from_tokens_unchecked(tokens)
}

/// Pairs each modern sentence (target) with a rule-perturbed historical
/// version (source). Deterministic in `seed`.
pub fn synth_drift(modern: &[Sentence], rules: &[DriftRule], seed: u64) -> ParallelCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(Sentence, Sentence)> = modern
        .iter()
        .map(|t| (perturb(t, rules, &mut rng), t.clone()))
        .collect();
    ParallelCorpus::from_pairs("synthetic-drift", pairs).0
}

const SUBJECTS: &[&str] = &[
    "el caballero", "la mujer", "su hijo", "el escudero", "el cura", "la sobrina",
    "el barbero", "Sancho", "don Quijote", "el ventero", "los pastores", "ambos",
];
const VERBS: &[&str] = &[
    "dijo", "era", "iba", "vio", "hizo", "quería", "tenía", "sabía", "pensaba",
    "miraba", "llevaba", "buscaba",
];
const OBJECTS: &[&str] = &[
    "la verdad", "el camino", "su caballo", "una venganza", "la cabeza", "el corazón",
    "la aventura", "su señora", "el castillo", "la razón", "la canción", "un buen vino",
];
const ADVERBS: &[&str] = &[
    "ahora", "después", "también", "aquí", "allí", "muy bien", "otra vez", "así",
    "de nuevo", "luego", "mucho", "pronto",
];
const CLOSERS: &[&str] = &[
    "y Dios dirá", "como era costumbre", "sin hacer ruido", "por la mañana",
    "cuando hay luna", "con gran cuidado", "y nada será igual", "en aquel lugar",
];

/// Seeded template sentences in modern Spanish, used as the target side
/// of synthetic corpora when no monolingual text is supplied.
pub fn sample_modern_text(n: usize, seed: u64) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |xs: &[&'static str], rng: &mut ChaCha8Rng| *xs.choose(rng).unwrap();
    (0..n)
        .map(|_| {
            let mut words: Vec<&str> = vec![pick(SUBJECTS, &mut rng), pick(VERBS, &mut rng)];
            if rng.gen_bool(0.8) {
                words.push(pick(OBJECTS, &mut rng));
            }
            if rng.gen_bool(0.6) {
                words.push(pick(ADVERBS, &mut rng));
            }
            if rng.gen_bool(0.4) {
                words.push(",");
                words.push(pick(CLOSERS, &mut rng));
            }
            words.push(if rng.gen_bool(0.85) { "." } else { "?" });
            let mut text = words.join(" ");
            if let Some(first) = text.chars().next() {
                let upper: String = first.to_uppercase().collect();
                text.replace_range(..first.len_utf8(), &upper);
            }
            Sentence::from_words(&text)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_rules_copy() {
        let modern = sample_modern_text(20, 1);
        let c = synth_drift(&modern, &[], 7);
        for p in c.pairs() {
            assert_eq!(p.source, p.target);
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let modern = sample_modern_text(50, 3);
        let rules = builtin_rules();
        assert_eq!(synth_drift(&modern, &rules, 9), synth_drift(&modern, &rules, 9));
        assert_eq!(sample_modern_text(50, 3), modern);
    }

    #[test]
    fn ahora_becomes_aora() {
        let rules = DriftRule::parse_rules("ahora\taora\n").unwrap();
        let c = synth_drift(&[Sentence::from_words("por ahora")], &rules, 0);
        assert_eq!(c.pairs()[0].source, Sentence::from_words("por aora"));
        let word = [DriftRule::word("ahora", "aora")];
        let c = synth_drift(&[Sentence::from_words("por ahora")], &word, 0);
        assert_eq!(c.pairs()[0].source, Sentence::from_words("por aora"));
    }

    #[test]
    fn parse_rule_file() {
        let rules = DriftRule::parse_rules("# archaic\n=ambos\tentrambos\nv\tu\t0.5\n\n").unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[0].scope, RuleScope::Word);
        assert_eq!(rules[1].probability, 0.5);
        assert_eq!(DriftRule::parse_rules(&rules[1].to_line()).unwrap()[0], rules[1]);
        assert!(DriftRule::parse_rules("a\tb\t2.0").is_err());
        assert!(DriftRule::parse_rules("nocolumns").is_err());
    }

    #[test]
    fn word_rule_can_delete_and_expand() {
        let rules = [DriftRule::word("de", ""), DriftRule::word("ambos", "los dos")];
        let c = synth_drift(&[Sentence::from_words("x de ambos")], &rules, 0);
        assert_eq!(c.pairs()[0].source, Sentence::from_words("x los dos"));
    }
}
