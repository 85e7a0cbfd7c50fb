//! Word splitting, stop words and the suffix-rule lemmatizer.

use std::collections::HashSet;

use thiserror::Error;

const BUNDLED_STOPWORDS: &str = include_str!("../resources/stopwords.txt");
const BUNDLED_LEMMA_RULES: &str = include_str!("../resources/lemma_rules.txt");

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct RuleParseError {
    pub line: usize,
    pub message: String,
}

/// Maps an inflected lowercase word to its base form.
pub trait Lemmatizer: Send + Sync + std::fmt::Debug {
    fn lemmatize(&self, word: &str) -> String;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuffixRule {
    pub suffix: String,
    pub replacement: String,
    pub min_stem: usize,
    pub keep_endings: Vec<String>,
    pub needs_vowel: bool,
    pub undouble: bool,
    pub restore_e: bool,
}

impl SuffixRule {
    fn apply(&self, word: &str) -> Option<String> {
        let stem = word.strip_suffix(self.suffix.as_str())?;
        if stem.len() < self.min_stem || self.keep_endings.iter().any(|k| word.ends_with(k.as_str())) {
            return None;
        }
        if self.needs_vowel && !stem.bytes().any(is_vowel) {
            return None;
        }
        let mut out = stem.to_owned();
        if self.undouble && out.len() >= 4 {
            let b = out.as_bytes();
            let (x, y) = (b[b.len() - 1], b[b.len() - 2]);
            if x == y && !is_vowel(x) && !matches!(x, b'l' | b's' | b'z') {
                out.pop();
            }
        }
        if self.restore_e && (out.ends_with("at") || out.ends_with("bl") || out.ends_with("iz")) {
            out.push('e');
        }
        out.push_str(&self.replacement);
        Some(out)
    }
}

fn is_vowel(b: u8) -> bool {
    matches!(b, b'a' | b'e' | b'i' | b'o' | b'u' | b'y')
}

/// Ordered suffix rules applied until none fires. Running to a fixpoint makes
/// the lemmatizer idempotent.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleLemmatizer {
    rules: Vec<SuffixRule>,
}

impl RuleLemmatizer {
    pub fn new(rules: Vec<SuffixRule>) -> Self {
        RuleLemmatizer { rules }
    }

    pub fn rules(&self) -> &[SuffixRule] {
        &self.rules
    }

    /// Parses the plain-text rule format (see `resources/lemma_rules.txt`).
    pub fn parse(text: &str) -> Result<Self, RuleParseError> {
        let mut rules = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| RuleParseError {
                line: idx + 1,
                message: message.to_owned(),
            };
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() < 3 || cols.len() > 4 {
                return Err(err("expected `suffix replacement min_stem [flags]`"));
            }
            let suffix = cols[0].to_ascii_lowercase();
            if suffix.is_empty() || !suffix.bytes().all(|b| b.is_ascii_lowercase()) {
                return Err(err("suffix must be ASCII letters"));
            }
            let replacement = match cols[1] {
                "-" => String::new(),
                r => r.to_ascii_lowercase(),
            };
            if replacement.len() >= suffix.len() {
                // Rules must shorten the word so the fixpoint loop terminates.
                return Err(err("replacement must be shorter than the suffix"));
            }
            let min_stem = cols[2]
                .parse()
                .map_err(|_| err("min_stem must be a non-negative integer"))?;
            let mut rule = SuffixRule {
                suffix,
                replacement,
                min_stem,
                keep_endings: Vec::new(),
                needs_vowel: false,
                undouble: false,
                restore_e: false,
            };
            if let Some(flags) = cols.get(3) {
                for flag in flags.split(',') {
                    match flag {
                        "vowel" => rule.needs_vowel = true,
                        "undouble" => rule.undouble = true,
                        "restore-e" => rule.restore_e = true,
                        f if f.starts_with("keep=") => {
                            rule.keep_endings =
                                f["keep=".len()..].split('|').map(str::to_owned).collect();
                        }
                        _ => return Err(err(&format!("unknown flag `{flag}`"))),
                    }
                }
            }
            if rule.restore_e && rule.suffix.len() < 2 {
                return Err(err("restore-e needs a suffix of at least two letters"));
            }
            rules.push(rule);
        }
        Ok(RuleLemmatizer { rules })
    }
}

impl Default for RuleLemmatizer {
    fn default() -> Self {
        RuleLemmatizer::parse(BUNDLED_LEMMA_RULES).expect("bundled lemma rules are valid")
    }
}

impl Lemmatizer for RuleLemmatizer {
    fn lemmatize(&self, word: &str) -> String {
        let mut current = word.to_owned();
        // Each rule shortens the word, so this loop is bounded by its length.
        'outer: loop {
            for rule in &self.rules {
                if let Some(next) = rule.apply(&current) {
                    if next.len() < current.len() {
                        current = next;
                        continue 'outer;
                    }
                }
            }
            return current;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    /// One word per line, `#` comments allowed.
    pub fn parse(text: &str) -> Self {
        StopWords {
            words: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_ascii_lowercase)
                .collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for StopWords {
    fn default() -> Self {
        StopWords::parse(BUNDLED_STOPWORDS)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum CharClass {
    Lower,
    Upper,
    Digit,
}

fn class(c: char) -> CharClass {
    if c.is_ascii_uppercase() {
        CharClass::Upper
    } else if c.is_ascii_digit() {
        CharClass::Digit
    } else {
        CharClass::Lower
    }
}

/// Splits text into words on anything that is not an ASCII letter or digit, on
/// camelCase humps (`HTTPServer` -> `HTTP`, `Server`) and on letter/digit
/// boundaries. Case is preserved.
pub fn split_words(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for run in text.split(|c: char| !c.is_ascii_alphanumeric()) {
        if run.is_empty() {
            continue;
        }
        let chars: Vec<char> = run.chars().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            let (prev, cur) = (class(chars[i - 1]), class(chars[i]));
            let next = chars.get(i + 1).map(|&c| class(c));
            let boundary = match (prev, cur) {
                (CharClass::Lower, CharClass::Upper) => true,
                (CharClass::Upper, CharClass::Upper) => next == Some(CharClass::Lower),
                (CharClass::Digit, CharClass::Digit) => false,
                (CharClass::Digit, _) | (_, CharClass::Digit) => true,
                _ => false,
            };
            if boundary {
                // All characters are ASCII, so char indices are byte indices.
                out.push(&run[start..i]);
                start = i;
            }
        }
        out.push(&run[start..]);
    }
    out
}

/// Normalizes a variable name to a single tree-token segment: special
/// characters removed, lowercased, lemmatized. `songID` becomes `songid`.
pub fn normalize_identifier(name: &str, lemmatizer: &dyn Lemmatizer) -> String {
    let cleaned: String = name
        .chars()
        .filter(char::is_ascii_alphanumeric)
        .map(|c| c.to_ascii_lowercase())
        .collect();
    if cleaned.is_empty() {
        cleaned
    } else {
        lemmatizer.lemmatize(&cleaned)
    }
}
