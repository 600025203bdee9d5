//! Demographic prompt prefix.
//!
//! An [`AuthorProfile`] is rendered through a [`PromptTemplate`] into a short
//! sentence such as
//!
//! ```text
//! A female, with fourth grade education, third race, age is 22 and income is 100000.
//! ```
//!
//! and that sentence is prepended to the essay before featurization.
//! Education and race codes are spelled as English ordinal words; age and
//! income are plain base-10 integers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAX_AGE: u32 = 150;

/// Demographic fields of an essay author.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AuthorProfile {
    pub gender: String,
    pub education: u32,
    pub race: u32,
    pub age: u32,
    pub income: u64,
}

impl AuthorProfile {
    pub fn new(gender: impl Into<String>, education: u32, race: u32, age: u32, income: u64) -> Result<Self> {
        let profile = AuthorProfile {
            gender: gender.into(),
            education,
            race,
            age,
            income,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Builds a profile from signed values as they arrive from files and the
    /// wire, so that negative inputs get a field-level message instead of a
    /// parse failure.
    pub fn from_raw(gender: &str, education: i64, race: i64, age: i64, income: i64) -> Result<Self> {
        let positive = |field: &str, v: i64| -> Result<u32> {
            if v < 1 {
                return Err(field_error(field, format!("must be >= 1, got {v}")));
            }
            u32::try_from(v).map_err(|_| field_error(field, format!("{v} is too large")))
        };
        let education = positive("education", education)?;
        let race = positive("race", race)?;
        let age = positive("age", age)?;
        if income < 0 {
            return Err(field_error("income", format!("must be >= 0, got {income}")));
        }
        AuthorProfile::new(gender, education, race, age, income as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gender.trim().is_empty() {
            return Err(field_error("gender", "must be a non-empty token".into()));
        }
        if self.gender.contains(['{', '}']) {
            return Err(field_error("gender", "must not contain `{` or `}`".into()));
        }
        if self.education < 1 {
            return Err(field_error("education", "must be >= 1".into()));
        }
        if self.race < 1 {
            return Err(field_error("race", "must be >= 1".into()));
        }
        if !(1..=MAX_AGE).contains(&self.age) {
            return Err(field_error(
                "age",
                format!("must be in [1, {MAX_AGE}], got {}", self.age),
            ));
        }
        Ok(())
    }
}

/// Validation failure attributable to one profile field.
pub fn field_error(field: &str, message: String) -> Error {
    Error::Validation(format!("{field}: {message}"))
}

/// Pulls the field name back out of an error produced by [`field_error`].
pub fn error_field(err: &Error) -> Option<&str> {
    match err {
        Error::Validation(msg) => msg.split_once(':').map(|(f, _)| f),
        _ => None,
    }
}

const ONES: [&str; 20] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
];
const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];
const SCALES: [(u64, &str); 3] = [(1_000_000_000, "billion"), (1_000_000, "million"), (1_000, "thousand")];

fn cardinal_below_thousand(n: u64, out: &mut String) {
    debug_assert!(n > 0 && n < 1000);
    let hundreds = n / 100;
    let rest = n % 100;
    if hundreds > 0 {
        let _ = write!(out, "{} hundred", ONES[hundreds as usize]);
        if rest > 0 {
            out.push(' ');
        }
    }
    if rest >= 20 {
        out.push_str(TENS[(rest / 10) as usize]);
        if !rest.is_multiple_of(10) {
            out.push('-');
            out.push_str(ONES[(rest % 10) as usize]);
        }
    } else if rest > 0 {
        out.push_str(ONES[rest as usize]);
    }
}

fn cardinal_word(mut n: u64) -> String {
    let mut out = String::new();
    for (scale, name) in SCALES {
        if n >= scale {
            cardinal_below_thousand(n / scale, &mut out);
            let _ = write!(out, " {name}");
            n %= scale;
            if n > 0 {
                out.push(' ');
            }
        }
    }
    if n > 0 {
        cardinal_below_thousand(n, &mut out);
    }
    out
}

fn ordinalize(word: &str) -> String {
    match word {
        "one" => "first".into(),
        "two" => "second".into(),
        "three" => "third".into(),
        "five" => "fifth".into(),
        "eight" => "eighth".into(),
        "nine" => "ninth".into(),
        "twelve" => "twelfth".into(),
        w if w.ends_with('y') => format!("{}ieth", &w[..w.len() - 1]),
        w => format!("{w}th"),
    }
}

/// Lowercase English ordinal word for `n` ("first", "twenty-first", ...).
///
/// Compound numbers use hyphens between tens and units and no "and":
/// 101 is "one hundred first".
pub fn ordinal_word(n: i64) -> Result<String> {
    if n < 1 {
        return Err(Error::Domain(format!("ordinal words are defined for n >= 1, got {n}")));
    }
    let cardinal = cardinal_word(n as u64);
    // Only the final word (or final hyphenated component) takes the ordinal form.
    let split = cardinal.rfind([' ', '-']).map_or(0, |i| i + 1);
    let (head, last) = cardinal.split_at(split);
    Ok(format!("{head}{}", ordinalize(last)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Gender,
    Education,
    Race,
    Age,
    Income,
}

const FIELD_ORDER: [(Field, &str); 5] = [
    (Field::Gender, "gender"),
    (Field::Education, "education"),
    (Field::Race, "race"),
    (Field::Age, "age"),
    (Field::Income, "income"),
];

/// Pattern with the five placeholders `{gender} {education} {race} {age}
/// {income}`, in that order, plus the separator placed between the rendered
/// prompt and the essay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pattern: String,
    separator: String,
    // Literal text around the placeholders: always FIELD_ORDER.len() + 1 pieces.
    literals: Vec<String>,
}

impl PromptTemplate {
    /// Grammatical form matching the worked example sentence.
    pub const PROSE_PATTERN: &'static str =
        "A {gender}, with {education} grade education, {race} race, age is {age} and income is {income}.";
    /// Word-for-word form of the reference implementation's format string.
    pub const CODE_VERBATIM_PATTERN: &'static str =
        "A {gender}, with {education} grade education is, {race} race, age is {age}, and income is {income}.";
    pub const DEFAULT_SEPARATOR: &'static str = " ";

    pub fn new(pattern: &str, separator: &str) -> Result<Self> {
        let literals = parse_pattern(pattern)?;
        Ok(PromptTemplate {
            pattern: pattern.to_string(),
            separator: separator.to_string(),
            literals,
        })
    }

    pub fn prose() -> Self {
        Self::new(Self::PROSE_PATTERN, Self::DEFAULT_SEPARATOR).expect("built-in pattern is valid")
    }

    /// The verbatim pattern joined with no separator, which reproduces the
    /// reference code's `text_prompt + text` byte for byte.
    pub fn code_verbatim() -> Self {
        Self::new(Self::CODE_VERBATIM_PATTERN, "").expect("built-in pattern is valid")
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "prose" | "default" => Some(Self::prose()),
            "code" | "code-verbatim" | "code_verbatim" => Some(Self::code_verbatim()),
            _ => None,
        }
    }

    pub fn with_separator(mut self, separator: &str) -> Self {
        self.separator = separator.to_string();
        self
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn separator(&self) -> &str {
        &self.separator
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::prose()
    }
}

fn parse_pattern(pattern: &str) -> Result<Vec<String>> {
    let mut literals = Vec::with_capacity(FIELD_ORDER.len() + 1);
    let mut names = Vec::new();
    let mut rest = pattern;
    loop {
        let open = rest.find('{');
        let close = rest.find('}');
        match (open, close) {
            (None, None) => {
                literals.push(rest.to_string());
                break;
            }
            (Some(o), Some(c)) if o < c => {
                let name = &rest[o + 1..c];
                if name.contains('{') {
                    return Err(Error::Config(format!("nested `{{` in prompt pattern {pattern:?}")));
                }
                literals.push(rest[..o].to_string());
                names.push(name.to_string());
                rest = &rest[c + 1..];
            }
            _ => {
                return Err(Error::Config(format!(
                    "unbalanced braces in prompt pattern {pattern:?}"
                )))
            }
        }
    }
    if names.len() != FIELD_ORDER.len() {
        return Err(Error::Config(format!(
            "prompt pattern must contain exactly {} placeholders, found {}",
            FIELD_ORDER.len(),
            names.len()
        )));
    }
    for (found, (_, expected)) in names.iter().zip(FIELD_ORDER.iter()) {
        if found != expected {
            return Err(Error::Config(format!(
                "prompt placeholders must be {{gender}} {{education}} {{race}} {{age}} {{income}} in order; found {{{found}}} where {{{expected}}} belongs"
            )));
        }
    }
    Ok(literals)
}

/// Substitutes the profile into the template.
pub fn render_prompt(profile: &AuthorProfile, template: &PromptTemplate) -> Result<String> {
    profile.validate()?;
    let mut out = String::with_capacity(template.pattern.len() + profile.gender.len() + 32);
    for (i, (field, _)) in FIELD_ORDER.iter().enumerate() {
        out.push_str(&template.literals[i]);
        match field {
            Field::Gender => out.push_str(&profile.gender),
            Field::Education => out.push_str(&ordinal_word(profile.education.into())?),
            Field::Race => out.push_str(&ordinal_word(profile.race.into())?),
            Field::Age => {
                let _ = write!(out, "{}", profile.age);
            }
            Field::Income => {
                let _ = write!(out, "{}", profile.income);
            }
        }
    }
    out.push_str(&template.literals[FIELD_ORDER.len()]);
    Ok(out)
}

/// `prompt ++ separator ++ essay`; the prompt is always the prefix.
pub fn compose_input(prompt: &str, essay: &str, template: &PromptTemplate) -> String {
    let mut out = String::with_capacity(prompt.len() + template.separator.len() + essay.len());
    out.push_str(prompt);
    out.push_str(&template.separator);
    out.push_str(essay);
    out
}
