//! Generated labeled corpus with eight column types, dirty cells and values
//! shared between pairs of types, plus a matching word-vector table and
//! regex rules. Used by the end-to-end tests and the `synth` command.

use std::collections::{BTreeMap, HashSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{derive_seed, Column, Corpus};
use crate::error::Result;
use crate::features::words::{tokenize, WordVectorTable};
use crate::matching::RegexRuleSet;
use crate::pipeline::WORD_DIM;
use crate::types::SemanticType;

pub const SYNTHETIC_TYPES: [&str; 8] = ["year", "isbn", "name", "grades", "sales", "city", "status", "description"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub columns_per_type: usize,
    pub min_values: usize,
    pub max_values: usize,
    /// Probability that a cell is replaced by a missing marker, garbage or a typo.
    pub dirty_rate: f64,
    /// Probability that a cell is drawn from the pool shared with the paired type.
    pub overlap_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            columns_per_type: 600,
            min_values: 10,
            max_values: 60,
            dirty_rate: 0.1,
            overlap_rate: 0.2,
            seed: 0,
        }
    }
}

const FIRST_NAMES: &[&str] = &[
    "James", "Mary", "Robert", "Patricia", "John", "Jennifer", "Michael", "Linda", "David", "Elizabeth", "William",
    "Barbara", "Richard", "Susan", "Joseph", "Jessica", "Thomas", "Sarah", "Daniel", "Karen", "Matthew", "Nancy",
    "Anthony", "Lisa", "Mark", "Betty", "Steven", "Sandra", "Paul", "Ashley", "Andrew", "Emily", "Joshua", "Donna",
    "Kevin", "Michelle", "Brian", "Carol", "George", "Amanda", "Edward", "Melissa", "Ronald", "Deborah", "Timothy",
    "Stephanie", "Jason", "Rebecca", "Ryan", "Laura", "Gary", "Helen", "Nicholas", "Anna", "Eric", "Ruth",
];

const LAST_NAMES: &[&str] = &[
    "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller", "Davis", "Rodriguez", "Martinez",
    "Hernandez", "Lopez", "Gonzalez", "Wilson", "Anderson", "Thomas", "Taylor", "Moore", "Martin", "Lee", "Perez",
    "Thompson", "White", "Harris", "Sanchez", "Clark", "Ramirez", "Lewis", "Robinson", "Walker", "Young", "Allen",
    "King", "Wright", "Scott", "Torres", "Nguyen", "Hill", "Flores", "Green", "Adams", "Nelson", "Baker", "Hall",
    "Rivera", "Campbell", "Mitchell", "Carter", "Roberts", "Gomez", "Phillips", "Evans", "Turner", "Diaz",
];

const CITIES: &[&str] = &[
    "Chicago", "Phoenix", "Philadelphia", "San Antonio", "San Diego", "San Jose", "Columbus", "Indianapolis",
    "Seattle", "Denver", "Boston", "Nashville", "Detroit", "Portland", "Memphis", "Louisville", "Baltimore",
    "Milwaukee", "Albuquerque", "Tucson", "Fresno", "Sacramento", "Atlanta", "Omaha", "Raleigh", "Miami",
    "Oakland", "Minneapolis", "Tulsa", "Cleveland", "Wichita", "Arlington", "New Orleans", "Tampa", "Honolulu",
    "Anaheim", "Aurora", "Pittsburgh", "Cincinnati", "Toledo", "Newark", "Buffalo", "Lexington", "Stockton",
    "Los Angeles", "New York", "Las Vegas", "Salt Lake City", "Kansas City", "Oklahoma City", "El Paso", "Boise",
    "Spokane", "Richmond", "Des Moines", "Birmingham", "Rochester", "Tacoma", "Fontana", "Montgomery",
];

const STATE_CODES: &[&str] = &["CA", "TX", "NY", "FL", "IL", "OH", "WA", "GA", "AZ", "CO", "MI", "OR"];

const DESCRIPTION_WORDS: &[&str] = &[
    "the", "a", "of", "and", "to", "in", "with", "for", "on", "this", "that", "is", "was", "are", "from", "by",
    "product", "quality", "great", "small", "large", "new", "old", "item", "designed", "made", "features", "used",
    "easy", "simple", "durable", "light", "heavy", "comfortable", "perfect", "ideal", "home", "office", "outdoor",
    "travel", "daily", "use", "includes", "set", "pack", "premium", "classic", "modern", "style", "design",
    "material", "cotton", "steel", "wood", "plastic", "leather", "color", "black", "white", "blue", "red", "green",
    "size", "fits", "most", "standard", "available", "several", "options", "compact", "portable", "storage",
    "kitchen", "garden", "children", "adults", "gift", "season", "weather", "resistant", "water", "clean",
    "maintain", "long", "lasting", "performance", "reliable", "support", "warranty", "year", "service", "customer",
];

const STATUS_SETS: &[&[&str]] = &[
    &["active", "inactive"],
    &["yes", "no"],
    &["true", "false"],
    &["open", "closed", "pending"],
    &["enabled", "disabled"],
    &["approved", "rejected", "pending"],
];

const GRADES: &[&str] = &["A+", "A", "A-", "B+", "B", "B-", "C+", "C", "C-", "D+", "D", "D-", "F"];

/// Names that are also cities; shared by `name` and `city` columns.
const PROPER_NOUN_POOL: &[&str] = &[
    "Jackson", "Lincoln", "Austin", "Madison", "Charlotte", "Florence", "Eugene", "Chester", "Victoria", "Sydney",
    "Orlando", "Dallas", "Houston", "Tyler", "Jordan", "Marion",
];

/// Outcomes shared by `grades` and `status` columns.
const OUTCOME_POOL: &[&str] = &["Pass", "Fail", "Incomplete", "Withdrawn"];

/// Placeholder phrases shared by `isbn` and `description` columns.
const PLACEHOLDER_POOL: &[&str] = &["not available", "see notes", "unknown edition", "out of print", "pending review"];

const MISSING_TOKENS: &[&str] = &["", "N/A", "null", "-", "none", "NA"];

/// Per-column formatting choices, drawn once per column.
struct Style {
    variant: usize,
    low: i64,
    span: i64,
    choices: Vec<&'static str>,
    case: usize,
}

fn draw_style(ty: &str, rng: &mut ChaCha8Rng) -> Style {
    let mut style = Style {
        variant: rng.random_range(0..3),
        low: 0,
        span: 0,
        choices: Vec::new(),
        case: rng.random_range(0..3),
    };
    match ty {
        "year" => {
            style.low = rng.random_range(1900..2015);
            style.span = rng.random_range(5..=(2025 - style.low).max(5));
        }
        "sales" => {
            style.low = rng.random_range(0..4);
        }
        "status" => style.choices = STATUS_SETS.choose(rng).expect("non-empty").to_vec(),
        "grades" => {
            let k = rng.random_range(3..=GRADES.len());
            let start = rng.random_range(0..=GRADES.len() - k);
            style.choices = GRADES[start..start + k].to_vec();
        }
        _ => {}
    }
    style
}

fn isbn13(rng: &mut ChaCha8Rng, hyphens: bool) -> String {
    let prefix = if rng.random_bool(0.8) { "978" } else { "979" };
    let mut digits: Vec<u32> = prefix.chars().map(|c| c.to_digit(10).expect("digit")).collect();
    digits.extend((0..9).map(|_| rng.random_range(0..10)));
    let sum: u32 = digits.iter().enumerate().map(|(i, d)| if i % 2 == 0 { *d } else { 3 * d }).sum();
    digits.push((10 - sum % 10) % 10);
    let s: String = digits.iter().map(|d| char::from_digit(*d, 10).expect("digit")).collect();
    if hyphens {
        let publisher = rng.random_range(2..6);
        format!("{}-{}-{}-{}-{}", &s[0..3], &s[3..4], &s[4..4 + publisher], &s[4 + publisher..12], &s[12..])
    } else {
        s
    }
}

fn isbn10(rng: &mut ChaCha8Rng) -> String {
    let digits: Vec<u32> = (0..9).map(|_| rng.random_range(0..10)).collect();
    let sum: u32 = digits.iter().enumerate().map(|(i, d)| (i as u32 + 1) * d).sum();
    let check = sum % 11;
    let mut s: String = digits.iter().map(|d| char::from_digit(*d, 10).expect("digit")).collect();
    s.push(if check == 10 { 'X' } else { char::from_digit(check, 10).expect("digit") });
    s
}

fn with_case(s: String, case: usize) -> String {
    match case {
        1 => s.to_uppercase(),
        2 => {
            let mut c = s.chars();
            c.next().map_or(String::new(), |f| f.to_uppercase().chain(c).collect())
        }
        _ => s,
    }
}

fn group_thousands(n: i64) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn clean_value(ty: &str, style: &Style, rng: &mut ChaCha8Rng) -> String {
    match ty {
        "year" => (style.low + rng.random_range(0..=style.span)).to_string(),
        "isbn" => match style.variant {
            0 => isbn13(rng, true),
            1 => isbn13(rng, false),
            _ => isbn10(rng),
        },
        "name" => {
            let first = FIRST_NAMES.choose(rng).expect("non-empty");
            let last = LAST_NAMES.choose(rng).expect("non-empty");
            match style.variant {
                0 => format!("{first} {last}"),
                1 => format!("{last}, {first}"),
                _ => format!("{}. {last}", &first[..1]),
            }
        }
        "grades" => style.choices.choose(rng).expect("non-empty").to_string(),
        "sales" => {
            let magnitude = 10f64.powi(style.low as i32 + 1);
            let cents = rng.random_range(0..(magnitude * 100.0) as i64);
            let whole = group_thousands(cents / 100);
            let body = format!("{whole}.{:02}", cents % 100);
            match style.variant {
                0 => format!("${body}"),
                1 => body,
                _ => format!("{body} USD"),
            }
        }
        "city" => {
            let city = CITIES.choose(rng).expect("non-empty");
            match style.variant {
                0 => format!("{city}, {}", STATE_CODES.choose(rng).expect("non-empty")),
                _ => city.to_string(),
            }
        }
        "status" => with_case(style.choices.choose(rng).expect("non-empty").to_string(), style.case),
        "description" => {
            let n = rng.random_range(6..=20);
            let words: Vec<&str> = (0..n).map(|_| *DESCRIPTION_WORDS.choose(rng).expect("non-empty")).collect();
            with_case(words.join(" "), 2) + "."
        }
        other => unreachable!("no generator for {other}"),
    }
}

fn shared_pool_value(ty: &str, rng: &mut ChaCha8Rng) -> String {
    match ty {
        "name" | "city" => PROPER_NOUN_POOL.choose(rng).expect("non-empty").to_string(),
        "year" | "sales" => rng.random_range(1900..=2025).to_string(),
        "grades" | "status" => OUTCOME_POOL.choose(rng).expect("non-empty").to_string(),
        "isbn" | "description" => PLACEHOLDER_POOL.choose(rng).expect("non-empty").to_string(),
        other => unreachable!("no pool for {other}"),
    }
}

fn dirty(value: String, rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..10) {
        0..=3 => MISSING_TOKENS.choose(rng).expect("non-empty").to_string(),
        4..=6 => {
            let len = rng.random_range(1..8);
            (0..len).map(|_| rng.random_range(b'!'..=b'~') as char).collect()
        }
        _ => {
            let mut chars: Vec<char> = value.chars().collect();
            if chars.is_empty() {
                return "?".into();
            }
            let i = rng.random_range(0..chars.len());
            if rng.random_bool(0.5) {
                chars.remove(i);
            } else {
                chars.insert(i, chars[i]);
            }
            chars.into_iter().collect()
        }
    }
}

pub fn synthetic_types() -> Vec<SemanticType> {
    SYNTHETIC_TYPES
        .iter()
        .map(|n| SemanticType::from_name(n).expect("synthetic types are in the vocabulary"))
        .collect()
}

pub fn generate_column(ty: &str, config: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Vec<String> {
    let style = draw_style(ty, rng);
    let n = rng.random_range(config.min_values..=config.max_values);
    (0..n)
        .map(|_| {
            let value = if rng.random_bool(config.overlap_rate) {
                shared_pool_value(ty, rng)
            } else {
                clean_value(ty, &style, rng)
            };
            if rng.random_bool(config.dirty_rate) {
                dirty(value, rng)
            } else {
                value
            }
        })
        .collect()
}

/// Columns are interleaved by type so any prefix is roughly balanced.
pub fn generate_corpus(config: &SyntheticConfig) -> Corpus {
    let types = synthetic_types();
    let mut rngs: Vec<ChaCha8Rng> = (0..types.len())
        .map(|t| ChaCha8Rng::seed_from_u64(derive_seed(config.seed, t as u64)))
        .collect();
    let mut columns = Vec::with_capacity(config.columns_per_type * types.len());
    for _ in 0..config.columns_per_type {
        for (t, ty) in types.iter().enumerate() {
            let values = generate_column(ty.name(), config, &mut rngs[t]);
            let mut column = Column::new(values, Some(*ty));
            column.source_header = Some(ty.name().to_string());
            columns.push(column);
        }
    }
    Corpus { columns }
}

/// Word vectors for every token the generator can emit outside numbers and
/// codes. Tokens from the same word list share a cluster centre, so related
/// words lie close together.
pub fn synthetic_word_table(seed: u64) -> WordVectorTable {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x57AB));
    let groups: [Vec<&str>; 9] = [
        FIRST_NAMES.to_vec(),
        LAST_NAMES.to_vec(),
        CITIES.to_vec(),
        DESCRIPTION_WORDS.to_vec(),
        STATUS_SETS.iter().flat_map(|s| s.iter().copied()).collect(),
        GRADES.to_vec(),
        PROPER_NOUN_POOL.to_vec(),
        OUTCOME_POOL.to_vec(),
        PLACEHOLDER_POOL.to_vec(),
    ];
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for group in groups {
        let centre: Vec<f64> = (0..WORD_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        for phrase in group {
            for token in tokenize(phrase) {
                if seen.insert(token.clone()) {
                    let v = centre.iter().map(|c| c + rng.random_range(-0.35..0.35)).collect();
                    entries.push((token, v));
                }
            }
        }
    }
    WordVectorTable::from_entries(WORD_DIM, entries).expect("generated vectors have the table dimension")
}

/// Hand-written rules for the synthetic types, used by the regex baseline.
pub fn synthetic_regex_rules() -> Result<RegexRuleSet> {
    let rules: [(&str, &str); 8] = [
        ("year", r"(19|20)[0-9]{2}"),
        ("isbn", r"97[89]-?[0-9]{1,5}-?[0-9]+-?[0-9]+-?[0-9]|[0-9]{9}[0-9X]"),
        ("name", r"[A-Z][a-z]+ [A-Z][a-z]+|[A-Z][a-z]+, [A-Z][a-z]+|[A-Z]\. [A-Z][a-z]+"),
        ("grades", r"[A-DF][+-]?"),
        ("sales", r"\$?[0-9]{1,3}(,[0-9]{3})*\.[0-9]{2}( USD)?"),
        ("city", r"[A-Z][a-z]+( [A-Z][a-z]+)*(, [A-Z]{2})?"),
        ("status", r"(?i)active|inactive|yes|no|true|false|open|closed|pending|enabled|disabled|approved|rejected"),
        ("description", r"[A-Z][a-z]*( [a-z]+){5,}\."),
    ];
    let patterns: BTreeMap<SemanticType, String> = rules
        .iter()
        .map(|(name, p)| Ok((SemanticType::from_name(name)?, p.to_string())))
        .collect::<Result<_>>()?;
    RegexRuleSet::new(patterns)
}
