use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ImtError, SuffixGenerator};
use crate::text::{detokenize, Sentence};

/// What the user typed at a correction position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Correction {
    Word(String),
    /// The hypothesis is too long: everything from this position on is cut.
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Iteration {
    /// 1-based position of the corrected word.
    pub position: usize,
    pub correction: Correction,
    pub hypothesis: Sentence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Accepted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub word_strokes: usize,
    pub mouse_actions: usize,
    pub iterations: usize,
    pub final_hypothesis: Sentence,
}

/// One sentence being modernized interactively.
///
/// The hypothesis always starts with the validated prefix, the prefix grows
/// with every word correction, and nothing can change after acceptance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImtSession {
    id: u64,
    source: Sentence,
    initial: Sentence,
    hypothesis: Sentence,
    prefix: Sentence,
    log: Vec<Iteration>,
    word_strokes: usize,
    mouse_actions: usize,
    status: SessionStatus,
}

fn validate_word(word: &str) -> Result<(), ImtError> {
    if word.is_empty() || word.chars().any(char::is_whitespace) {
        return Err(ImtError::InvalidWord(word.to_string()));
    }
    Ok(())
}

impl ImtSession {
    /// Asks the generator for a suffix of the empty prefix.
    pub fn start(id: u64, generator: &dyn SuffixGenerator, source: Sentence) -> Result<Self, ImtError> {
        let hypothesis = generator
            .suffix(&source, &Sentence::default())
            .map_err(ImtError::Generator)?;
        Ok(ImtSession {
            id,
            source,
            initial: hypothesis.clone(),
            hypothesis,
            prefix: Sentence::default(),
            log: Vec::new(),
            word_strokes: 0,
            mouse_actions: 0,
            status: SessionStatus::Active,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn source(&self) -> &Sentence {
        &self.source
    }

    pub fn hypothesis(&self) -> &Sentence {
        &self.hypothesis
    }

    pub fn initial_hypothesis(&self) -> &Sentence {
        &self.initial
    }

    pub fn prefix(&self) -> &Sentence {
        &self.prefix
    }

    pub fn log(&self) -> &[Iteration] {
        &self.log
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn word_strokes(&self) -> usize {
        self.word_strokes
    }

    pub fn mouse_actions(&self) -> usize {
        self.mouse_actions
    }

    fn ensure_active(&self) -> Result<(), ImtError> {
        match self.status {
            SessionStatus::Active => Ok(()),
            SessionStatus::Accepted => Err(ImtError::AlreadyAccepted),
        }
    }

    fn check_position(&self, position: usize, max: usize) -> Result<(), ImtError> {
        if position == 0 || position > max {
            return Err(ImtError::PositionOutOfRange { position, max });
        }
        if position <= self.prefix.len() {
            return Err(ImtError::InsidePrefix {
                position,
                prefix_len: self.prefix.len(),
            });
        }
        Ok(())
    }

    /// Replaces the word at 1-based `position` (or appends when `position`
    /// is one past the end), validating everything before it, and asks the
    /// generator for a new suffix. Costs one word stroke and one mouse
    /// action. On error the session is left untouched.
    pub fn apply_correction(
        &mut self,
        generator: &dyn SuffixGenerator,
        position: usize,
        word: &str,
    ) -> Result<(), ImtError> {
        self.ensure_active()?;
        self.check_position(position, self.hypothesis.len() + 1)?;
        validate_word(word)?;
        let mut prefix = self.hypothesis.tokens()[..position - 1].to_vec();
        prefix.push(word.to_string());
        let prefix = Sentence::from_tokens_unchecked(prefix);
        let suffix = generator
            .suffix(&self.source, &prefix)
            .map_err(ImtError::Generator)?;
        self.hypothesis = prefix.concat(&suffix);
        self.prefix = prefix;
        self.word_strokes += 1;
        self.mouse_actions += 1;
        self.log.push(Iteration {
            position,
            correction: Correction::Word(word.to_string()),
            hypothesis: self.hypothesis.clone(),
        });
        Ok(())
    }

    /// Cuts the hypothesis before 1-based `position`, validating what is
    /// left. Costs one mouse action and no word strokes.
    pub fn truncate(&mut self, position: usize) -> Result<(), ImtError> {
        self.ensure_active()?;
        self.check_position(position, self.hypothesis.len())?;
        self.prefix = self.hypothesis.slice(0..position - 1);
        self.hypothesis = self.prefix.clone();
        self.mouse_actions += 1;
        self.log.push(Iteration {
            position,
            correction: Correction::End,
            hypothesis: self.hypothesis.clone(),
        });
        Ok(())
    }

    pub fn apply(
        &mut self,
        generator: &dyn SuffixGenerator,
        position: usize,
        correction: &Correction,
    ) -> Result<(), ImtError> {
        match correction {
            Correction::Word(w) => self.apply_correction(generator, position, w),
            Correction::End => self.truncate(position),
        }
    }

    /// Accepts the current hypothesis with one final mouse action.
    pub fn accept(&mut self) -> Result<SessionMetrics, ImtError> {
        self.ensure_active()?;
        self.mouse_actions += 1;
        self.status = SessionStatus::Accepted;
        Ok(self.metrics())
    }

    pub fn metrics(&self) -> SessionMetrics {
        SessionMetrics {
            word_strokes: self.word_strokes,
            mouse_actions: self.mouse_actions,
            iterations: self.log.len(),
            final_hypothesis: self.hypothesis.clone(),
        }
    }

    /// One tab-separated line per iteration:
    /// `IT-k<TAB>position<TAB>word<TAB>hypothesis`. The first line is the
    /// initial suggestion with position 0; a truncation shows `<END>`.
    pub fn trace(&self) -> String {
        let mut out = format!("IT-0\t0\t-\t{}\n", detokenize(&self.initial));
        for (k, it) in self.log.iter().enumerate() {
            let word = match &it.correction {
                Correction::Word(w) => w.as_str(),
                Correction::End => "<END>",
            };
            let _ = writeln!(
                out,
                "IT-{}\t{}\t{}\t{}",
                k + 1,
                it.position,
                word,
                detokenize(&it.hypothesis)
            );
        }
        out
    }
}
