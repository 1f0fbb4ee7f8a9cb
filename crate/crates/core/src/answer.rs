//! Final-answer extraction, canonicalization and equivalence.
//!
//! Answers are parsed into one of three canonical forms: an exact rational
//! (arbitrary precision, lowest terms), a multiple-choice letter, or a
//! normalized symbolic string. Equivalence is exact; there is no numeric
//! tolerance and no algebraic simplification, so `\sqrt{8}` and `2\sqrt{2}`
//! are different answers.

use std::fmt;

use num::{BigInt, BigRational, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest decimal exponent accepted by the numeric parser. Anything larger
/// is kept symbolic instead of materializing a huge integer.
const MAX_EXPONENT: u32 = 4096;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("empty answer")]
    Empty,
}

/// A normalized answer value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CanonicalAnswer {
    Rational(BigRational),
    Symbolic(String),
    Choice(char),
}

impl CanonicalAnswer {
    pub fn rational(numer: i64, denom: i64) -> Self {
        CanonicalAnswer::Rational(BigRational::new(numer.into(), denom.into()))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            CanonicalAnswer::Rational(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for CanonicalAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CanonicalAnswer::Rational(r) => write!(f, "{r}"),
            CanonicalAnswer::Symbolic(s) => f.write_str(s),
            CanonicalAnswer::Choice(c) => write!(f, "{c}"),
        }
    }
}

impl std::str::FromStr for CanonicalAnswer {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_answer(s)
    }
}

impl Serialize for CanonicalAnswer {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CanonicalAnswer {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        parse_answer(&raw).map_err(serde::de::Error::custom)
    }
}

/// Grading outcome for a single response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectnessLabel {
    Correct,
    Incorrect,
    Unparseable,
}

impl CorrectnessLabel {
    pub fn is_correct(self) -> bool {
        self == CorrectnessLabel::Correct
    }
}

/// Contents of the last balanced `\boxed{...}` in `text`.
pub fn extract_boxed(text: &str) -> Option<String> {
    let mut found = None;
    let mut search_from = 0;
    while let Some(rel) = text[search_from..].find("\\boxed") {
        let start = search_from + rel;
        let after = start + "\\boxed".len();
        search_from = after;
        let rest = &text[after..];
        let trimmed = rest.trim_start();
        if !trimmed.starts_with('{') {
            continue;
        }
        let open = after + (rest.len() - trimmed.len());
        if let Some(close) = matching_brace(text, open) {
            found = Some(text[open + 1..close].to_string());
        }
    }
    found
}

/// Byte index of the `}` closing the `{` at `open`, skipping escaped braces.
fn matching_brace(text: &str, open: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut i = open;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 1,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

/// Parses a raw final answer into its canonical form.
///
/// Recognized forms, in priority order: choice letters `A`-`E` (optionally
/// parenthesized), numbers (integers, decimals, `aEb`, `a×10^{b}`,
/// `a*10^b`, `a/b`, `\frac{a}{b}`, `\dfrac{a}{b}`, thousands separators),
/// percentages, comma-separated tuples, and finally symbolic text.
pub fn parse_answer(raw: &str) -> Result<CanonicalAnswer, ParseError> {
    if raw.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let cleaned = preclean(raw);
    if cleaned.is_empty() {
        return Err(ParseError::Empty);
    }
    if let Some(letter) = parse_choice(&cleaned) {
        return Ok(CanonicalAnswer::Choice(letter));
    }
    if let Some(value) = parse_real(&cleaned) {
        return Ok(CanonicalAnswer::Rational(value));
    }
    if let Some(value) = parse_percent(&cleaned) {
        return Ok(CanonicalAnswer::Rational(value));
    }
    if let Some(tuple) = parse_tuple(&cleaned) {
        return Ok(CanonicalAnswer::Symbolic(tuple));
    }
    let symbol = normalize_symbolic(raw);
    if symbol.is_empty() {
        return Err(ParseError::Empty);
    }
    Ok(CanonicalAnswer::Symbolic(symbol))
}

/// Exact equivalence of canonical answers.
pub fn answers_equivalent(a: &CanonicalAnswer, b: &CanonicalAnswer) -> bool {
    use CanonicalAnswer::*;
    match (a, b) {
        (Rational(x), Rational(y)) => x == y,
        (Choice(x), Choice(y)) => x == y,
        (Symbolic(x), Symbolic(y)) => x == y,
        (Rational(r), Symbolic(s)) | (Symbolic(s), Rational(r)) => {
            matches!(parse_answer(s), Ok(Rational(ref v)) if v == r)
        }
        _ => false,
    }
}

/// Extracts, parses and compares the final answer of `response_text`.
pub fn grade_response(response_text: &str, reference: &CanonicalAnswer) -> CorrectnessLabel {
    let Some(raw) = extract_boxed(response_text) else {
        return CorrectnessLabel::Unparseable;
    };
    match parse_answer(&raw) {
        Ok(answer) if answers_equivalent(&answer, reference) => CorrectnessLabel::Correct,
        Ok(_) => CorrectnessLabel::Incorrect,
        Err(_) => CorrectnessLabel::Unparseable,
    }
}

const WRAPPERS: [&str; 5] = ["\\text", "\\textbf", "\\mathrm", "\\mathbf", "\\boxed"];

fn preclean(raw: &str) -> String {
    let mut s = raw.replace("\\left", "").replace("\\right", "");
    for spacing in ["\\,", "\\;", "\\:", "\\!", "\\ ", "~"] {
        s = s.replace(spacing, "");
    }
    s.retain(|c| c != '$' && !c.is_whitespace());
    s = s.replace("\\dfrac", "\\frac").replace("\\tfrac", "\\frac");
    loop {
        let before = s.len();
        s = strip_trailing_punct(&s).to_string();
        for w in WRAPPERS {
            if let Some(inner) = unwrap_command(&s, w) {
                s = inner.to_string();
            }
        }
        if s.len() == before {
            return s;
        }
    }
}

fn strip_trailing_punct(s: &str) -> &str {
    let stripped = s.trim_end_matches(['.', ',', ';', ':', '!', '?']);
    if stripped.is_empty() {
        s
    } else {
        stripped
    }
}

/// `\cmd{inner}` spanning the whole string yields `inner`.
fn unwrap_command<'a>(s: &'a str, cmd: &str) -> Option<&'a str> {
    let rest = s.strip_prefix(cmd)?;
    if !rest.starts_with('{') {
        return None;
    }
    let open = cmd.len();
    let close = matching_brace(s, open)?;
    (close == s.len() - 1).then(|| &s[open + 1..close])
}

fn parse_choice(s: &str) -> Option<char> {
    let inner = s
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .unwrap_or(s);
    let mut chars = inner.chars();
    match (chars.next(), chars.next()) {
        (Some(c @ 'A'..='E'), None) => Some(c),
        _ => None,
    }
}

fn parse_percent(s: &str) -> Option<BigRational> {
    let body = s.strip_suffix("\\%").or_else(|| s.strip_suffix('%'))?;
    let value = parse_real(body)?;
    Some(value / BigRational::from_integer(100.into()))
}

/// Signed real number in any supported notation.
fn parse_real(s: &str) -> Option<BigRational> {
    if let Some(rest) = s.strip_prefix('-') {
        return parse_unsigned(rest).map(|v| -v);
    }
    parse_unsigned(s.strip_prefix('+').unwrap_or(s))
}

fn parse_unsigned(s: &str) -> Option<BigRational> {
    if s.is_empty() || s.starts_with(['-', '+']) {
        return None;
    }
    if let Some(v) = parse_decimal(s) {
        return Some(v);
    }
    if let Some(v) = parse_thousands(s) {
        return Some(v);
    }
    if let Some(v) = parse_scientific(s) {
        return Some(v);
    }
    if let Some(v) = parse_latex_frac(s) {
        return Some(v);
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_decimal(num)?;
        let den = parse_decimal(den)?;
        if den.is_zero() {
            return None;
        }
        return Some(num / den);
    }
    None
}

/// `digits[.digits][e[+-]digits]`, at least one mantissa digit.
pub(crate) fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], Some(&s[pos + 1..])),
        None => (s, None),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = BigInt::parse_bytes(digits.as_bytes(), 10)?;
    let mut value = BigRational::new(numer, pow10(frac_part.len() as u32));
    if let Some(exp) = exponent {
        value = scale_by_pow10(value, parse_exponent(exp)?)?;
    }
    Some(value)
}

fn parse_thousands(s: &str) -> Option<BigRational> {
    let mut groups = s.split(',');
    let head = groups.next()?;
    if head.is_empty() || head.len() > 3 || !head.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut digits = head.to_string();
    let mut count = 0;
    for g in groups {
        let (g, frac) = g.split_once('.').unwrap_or((g, ""));
        if g.len() != 3 || !g.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.push_str(g);
        if !frac.is_empty() {
            digits.push('.');
            digits.push_str(frac);
        }
        count += 1;
    }
    if count == 0 {
        return None;
    }
    parse_decimal(&digits)
}

fn parse_scientific(s: &str) -> Option<BigRational> {
    for sep in ["\\times10^", "×10^", "*10^", "\\cdot10^", "·10^"] {
        if let Some((mantissa, exp)) = s.split_once(sep) {
            let base = parse_decimal(mantissa)?;
            return scale_by_pow10(base, parse_exponent(strip_braces(exp))?);
        }
    }
    let exp = s.strip_prefix("10^")?;
    scale_by_pow10(BigRational::from_integer(1.into()), parse_exponent(strip_braces(exp))?)
}

fn parse_latex_frac(s: &str) -> Option<BigRational> {
    let rest = s.strip_prefix("\\frac")?;
    let (num, den) = if rest.starts_with('{') {
        let num_close = matching_brace(rest, 0)?;
        let after = &rest[num_close + 1..];
        if !after.starts_with('{') {
            return None;
        }
        let den_close = matching_brace(after, 0)?;
        if den_close != after.len() - 1 {
            return None;
        }
        (&rest[1..num_close], &after[1..den_close])
    } else {
        // \frac12 shorthand: two single digits
        let b = rest.as_bytes();
        if b.len() != 2 || !b.iter().all(u8::is_ascii_digit) {
            return None;
        }
        (&rest[..1], &rest[1..])
    };
    let num = parse_real(num)?;
    let den = parse_real(den)?;
    if den.is_zero() {
        return None;
    }
    Some(num / den)
}

fn strip_braces(s: &str) -> &str {
    s.strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .unwrap_or(s)
}

fn parse_exponent(s: &str) -> Option<i64> {
    let (neg, digits) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let magnitude: u32 = digits.parse().ok()?;
    if magnitude > MAX_EXPONENT {
        return None;
    }
    Some(if neg { -i64::from(magnitude) } else { i64::from(magnitude) })
}

fn pow10(k: u32) -> BigInt {
    num::pow(BigInt::from(10), k as usize)
}

fn scale_by_pow10(value: BigRational, exp: i64) -> Option<BigRational> {
    let magnitude = u32::try_from(exp.unsigned_abs()).ok()?;
    if magnitude > MAX_EXPONENT {
        return None;
    }
    let factor = BigRational::from_integer(pow10(magnitude));
    Some(if exp.is_negative() { value / factor } else { value * factor })
}

/// Splits on commas outside any bracket pair.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut last = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[last..i]);
                last = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[last..]);
    parts
}

fn parse_tuple(s: &str) -> Option<String> {
    let (open, body, close) = match (s.chars().next(), s.chars().last()) {
        (Some(o @ ('(' | '[')), Some(c @ (')' | ']'))) if s.len() >= 2 => {
            (Some(o), &s[1..s.len() - 1], Some(c))
        }
        _ => (None, s, None),
    };
    let parts = split_top_level(body);
    if parts.len() < 2 || parts.iter().any(|p| p.is_empty()) {
        return None;
    }
    let mut rendered = Vec::with_capacity(parts.len());
    for part in parts {
        rendered.push(parse_answer(part).ok()?.to_string());
    }
    let mut out = String::new();
    out.extend(open);
    out.push_str(&rendered.join(","));
    out.extend(close);
    Some(out.to_lowercase())
}

/// Fallback normalization for answers with no numeric reading.
pub fn normalize_symbolic(raw: &str) -> String {
    let mut s = raw.to_lowercase().replace("\\left", "").replace("\\right", "");
    s = s.replace("\\dfrac", "\\frac").replace("\\tfrac", "\\frac");
    for spacing in ["\\,", "\\;", "\\:", "\\!", "\\ ", "~"] {
        s = s.replace(spacing, "");
    }
    s.retain(|c| c != '$' && !c.is_whitespace());
    strip_trailing_punct(&s).to_string()
}
