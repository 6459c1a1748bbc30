//! Rule-based recognizer for the seven quantity entity types.
//!
//! The grammar works on lowercased tokens. At each position every rule proposes
//! its longest match; the longest proposal wins and ties go to the type that
//! comes first in [`QuantityType::PRECEDENCE`]. Matching then resumes after the
//! span, so spans never overlap.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lexicon::{self, is_scale, number_word_value};
use crate::text::Token;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum QuantityType {
    Date,
    Time,
    Percent,
    Money,
    Quantity,
    Ordinal,
    Cardinal,
}

impl QuantityType {
    pub const ALL: [QuantityType; 7] = [
        QuantityType::Date,
        QuantityType::Time,
        QuantityType::Percent,
        QuantityType::Money,
        QuantityType::Quantity,
        QuantityType::Ordinal,
        QuantityType::Cardinal,
    ];

    /// Tie-break order between equally long matches, strongest first.
    pub const PRECEDENCE: [QuantityType; 7] = [
        QuantityType::Percent,
        QuantityType::Money,
        QuantityType::Time,
        QuantityType::Date,
        QuantityType::Quantity,
        QuantityType::Ordinal,
        QuantityType::Cardinal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuantityType::Date => "DATE",
            QuantityType::Time => "TIME",
            QuantityType::Percent => "PERCENT",
            QuantityType::Money => "MONEY",
            QuantityType::Quantity => "QUANTITY",
            QuantityType::Ordinal => "ORDINAL",
            QuantityType::Cardinal => "CARDINAL",
        }
    }

    fn rank(self) -> usize {
        Self::PRECEDENCE.iter().position(|&t| t == self).unwrap()
    }
}

impl fmt::Display for QuantityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A typed quantity entity over the token range `start..end`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantitySpan {
    pub qtype: QuantityType,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub normalized: String,
}

impl QuantitySpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Key used when comparing entities across texts.
    pub fn key(&self) -> (QuantityType, &str) {
        (self.qtype, self.normalized.as_str())
    }
}

/// Tag all quantity spans in a token sequence.
pub fn tag_quantities(tokens: &[Token]) -> Vec<QuantitySpan> {
    let words: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
    tag_words(&words)
}

/// Same as [`tag_quantities`] over bare lowercased words.
pub fn tag_words(words: &[&str]) -> Vec<QuantitySpan> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < words.len() {
        match best_match(words, i) {
            Some((qtype, len)) => {
                let span_words = &words[i..i + len];
                spans.push(QuantitySpan {
                    qtype,
                    start: i,
                    end: i + len,
                    surface: span_words.join(" "),
                    normalized: normalize_words(qtype, span_words),
                });
                i += len;
            }
            None => i += 1,
        }
    }
    spans
}

/// Canonical form of a span, used for equality between entities.
pub fn normalize(span: &QuantitySpan) -> String {
    let words: Vec<&str> = span.surface.split(' ').collect();
    normalize_words(span.qtype, &words)
}

fn better(a: Option<(QuantityType, usize)>, b: (QuantityType, usize)) -> Option<(QuantityType, usize)> {
    match a {
        Some(cur) if cur.1 > b.1 || (cur.1 == b.1 && cur.0.rank() <= b.0.rank()) => Some(cur),
        _ => Some(b),
    }
}

fn best_core(words: &[&str], i: usize) -> Option<(QuantityType, usize)> {
    let rules: [(QuantityType, fn(&[&str], usize) -> Option<usize>); 7] = [
        (QuantityType::Percent, match_percent),
        (QuantityType::Money, match_money),
        (QuantityType::Time, match_time),
        (QuantityType::Date, match_date),
        (QuantityType::Quantity, match_quantity),
        (QuantityType::Ordinal, match_ordinal),
        (QuantityType::Cardinal, match_cardinal),
    ];
    rules
        .iter()
        .filter_map(|&(t, rule)| rule(words, i).map(|len| (t, len)))
        .fold(None, better)
}

fn best_match(words: &[&str], i: usize) -> Option<(QuantityType, usize)> {
    let mut best = best_core(words, i);
    if let Some(k) = modifier_len(words, i) {
        if let Some((t, len)) = best_core(words, i + k) {
            if matches!(t, QuantityType::Cardinal | QuantityType::Money) {
                best = better(best, (t, k + len));
            }
        }
    }
    best
}

fn modifier_len(words: &[&str], i: usize) -> Option<usize> {
    lexicon::MODIFIERS
        .iter()
        .find(|m| words.len() >= i + m.len() && words[i..i + m.len()] == m[..])
        .map(|m| m.len())
}

/// A plain number: digits with optional comma grouping and decimals.
fn is_digit_numeral(w: &str) -> bool {
    let (int, frac) = match w.split_once('.') {
        Some((a, b)) => (a, Some(b)),
        None => (w, None),
    };
    if let Some(f) = frac {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return false;
        }
    }
    if int.is_empty() {
        return false;
    }
    let groups: Vec<&str> = int.split(',').collect();
    if groups.len() == 1 {
        return int.bytes().all(|b| b.is_ascii_digit());
    }
    groups[0].len() <= 3
        && !groups[0].is_empty()
        && groups.iter().all(|g| g.bytes().all(|b| b.is_ascii_digit()))
        && groups[1..].iter().all(|g| g.len() == 3)
}

/// Split a trailing alphabetic suffix off a numeric token ("5km" -> ("5", "km")).
fn split_numeric_suffix(w: &str) -> Option<(&str, &str)> {
    let idx = w.find(|c: char| !(c.is_ascii_digit() || c == '.' || c == ','))?;
    let (num, suffix) = w.split_at(idx);
    (is_digit_numeral(num) && !suffix.is_empty()).then_some((num, suffix))
}

fn is_scaled_digits(w: &str) -> bool {
    matches!(split_numeric_suffix(w), Some((_, "m" | "bn")))
}

fn is_numeral_atom(w: &str) -> bool {
    is_digit_numeral(w) || number_word_value(w).is_some() || is_scaled_digits(w)
}

/// Length of a numeral phrase at `i`: one atom followed by any scale words.
fn numeral_len(words: &[&str], i: usize) -> Option<usize> {
    let first = words.get(i)?;
    if !is_numeral_atom(first) {
        return None;
    }
    let mut len = 1;
    while words.get(i + len).is_some_and(|w| is_scale(w)) {
        len += 1;
    }
    Some(len)
}

fn is_numeral_compound(w: &str) -> bool {
    match w.split_once('-') {
        Some((head, rest)) => {
            !rest.is_empty()
                && (is_digit_numeral(head) || number_word_value(head).is_some())
                && number_word_value(w).is_none()
        }
        None => false,
    }
}

fn match_cardinal(words: &[&str], i: usize) -> Option<usize> {
    let w = words.get(i)?;
    if lexicon::QUANTIFIERS.contains(w) || is_numeral_compound(w) {
        return Some(1);
    }
    numeral_len(words, i)
}

fn is_ordinal_word(w: &str) -> bool {
    lexicon::ORDINAL_WORDS.iter().any(|(o, _)| *o == w)
}

fn is_digit_ordinal(w: &str) -> bool {
    matches!(split_numeric_suffix(w), Some((n, "st" | "nd" | "rd" | "th")) if n.bytes().all(|b| b.is_ascii_digit()))
}

fn match_ordinal(words: &[&str], i: usize) -> Option<usize> {
    let w = words.get(i)?;
    (is_ordinal_word(w) || is_digit_ordinal(w)).then_some(1)
}

fn match_percent(words: &[&str], i: usize) -> Option<usize> {
    let n = numeral_len(words, i)?;
    match words.get(i + n) {
        Some(&"%") | Some(&"percent") => Some(n + 1),
        Some(&"per") if words.get(i + n + 1) == Some(&"cent") => Some(n + 2),
        _ => None,
    }
}

fn currency_amount(w: &str) -> Option<(char, &str)> {
    let c = w.chars().next()?;
    if !lexicon::CURRENCY_SYMBOLS.contains(&c) {
        return None;
    }
    let rest = &w[c.len_utf8()..];
    (is_digit_numeral(rest) || is_scaled_digits(rest)).then_some((c, rest))
}

fn match_money(words: &[&str], i: usize) -> Option<usize> {
    let w = words.get(i)?;
    if currency_amount(w).is_some() {
        let mut len = 1;
        while words
            .get(i + len)
            .is_some_and(|w| is_scale(w) || matches!(*w, "m" | "bn"))
        {
            len += 1;
        }
        return Some(len);
    }
    let n = numeral_len(words, i)?;
    let next = words.get(i + n)?;
    lexicon::CURRENCY_WORDS
        .iter()
        .any(|(cw, _, _)| cw == next)
        .then_some(n + 1)
}

fn is_clock(w: &str) -> bool {
    let Some((h, m)) = w.split_once(':') else { return false };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    digits(h)
        && h.len() <= 2
        && m.len() == 2
        && digits(m)
        && h.parse::<u32>().is_ok_and(|v| v <= 23)
        && m.parse::<u32>().is_ok_and(|v| v <= 59)
}

fn is_meridiem_time(w: &str) -> bool {
    let Some(base) = w.strip_suffix("am").or_else(|| w.strip_suffix("pm")) else {
        return false;
    };
    let hour = base.split_once(':').map_or(base, |(h, _)| h);
    hour.parse::<u32>().is_ok_and(|h| (1..=12).contains(&h))
        && (base == hour || is_clock(base))
}

fn match_time(words: &[&str], i: usize) -> Option<usize> {
    let w = *words.get(i)?;
    if is_clock(w) || is_meridiem_time(w) || matches!(w, "midnight" | "noon") {
        return Some(1);
    }
    let hour_ok = w.parse::<u32>().is_ok_and(|h| (1..=12).contains(&h))
        || is_clock(w)
        || number_word_value(w).is_some_and(|h| (1..=12).contains(&h));
    (hour_ok && matches!(words.get(i + 1), Some(&"am") | Some(&"pm"))).then_some(2)
}

fn is_year(w: &str) -> bool {
    w.len() == 4 && w.parse::<u32>().is_ok_and(|y| (1900..=2099).contains(&y))
}

fn is_decade(w: &str) -> bool {
    match w.strip_suffix('s') {
        Some(d) if d.len() == 4 => is_year(d) && d.ends_with('0'),
        Some(d) if d.len() == 2 => d.bytes().all(|b| b.is_ascii_digit()) && d.ends_with('0'),
        _ => false,
    }
}

fn day_number(w: &str) -> Option<u32> {
    let digits = match split_numeric_suffix(w) {
        Some((n, "st" | "nd" | "rd" | "th")) => n,
        _ => w,
    };
    if digits.is_empty() || digits.len() > 2 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().filter(|d| (1..=31).contains(d))
}

fn is_month(w: &str) -> bool {
    lexicon::MONTHS.contains(&w)
}

fn match_date(words: &[&str], i: usize) -> Option<usize> {
    let w = *words.get(i)?;
    let at = |k: usize| words.get(k).copied().unwrap_or("");
    if lexicon::WEEKDAYS.contains(&w) || lexicon::RELATIVE_DAYS.contains(&w) {
        return Some(1);
    }
    if w == "the" && is_decade(at(i + 1)) {
        return Some(2);
    }
    if is_decade(w) || is_year(w) {
        return Some(1);
    }
    if day_number(w).is_some() && is_month(at(i + 1)) {
        return Some(if is_year(at(i + 2)) { 3 } else { 2 });
    }
    if is_month(w) {
        if day_number(at(i + 1)).is_some() {
            return Some(if is_year(at(i + 2)) { 3 } else { 2 });
        }
        if is_year(at(i + 1)) {
            return Some(2);
        }
        if !lexicon::AMBIGUOUS_MONTHS.contains(&w) {
            return Some(1);
        }
    }
    None
}

fn unit_suffix(w: &str) -> Option<(&str, &str)> {
    split_numeric_suffix(w).filter(|(_, u)| lexicon::MEASUREMENT_UNITS.contains(u))
}

fn match_quantity(words: &[&str], i: usize) -> Option<usize> {
    let w = words.get(i)?;
    if unit_suffix(w).is_some() {
        return Some(1);
    }
    let n = numeral_len(words, i)?;
    let next = words.get(i + n)?;
    lexicon::MEASUREMENT_UNITS.contains(next).then_some(n + 1)
}

// ---------------------------------------------------------------------------
// Normalization

fn strip_modifier<'a, 'b>(words: &'a [&'b str]) -> &'a [&'b str] {
    match modifier_len(words, 0) {
        Some(k) if k < words.len() => &words[k..],
        _ => words,
    }
}

/// Canonical digits of a numeral phrase: "five thousand" -> "5000", "5.7 million" -> "5.7m".
fn normalize_numeral(words: &[&str]) -> String {
    let Some((first, scales)) = words.split_first() else {
        return String::new();
    };
    let (mantissa, mut suffix) = if let Some(v) = number_word_value(first) {
        (v.to_string(), String::new())
    } else if let Some((n, s)) = split_numeric_suffix(first) {
        (n.replace(',', ""), s.to_string())
    } else {
        (first.replace(',', ""), String::new())
    };
    let mut value: Option<u128> = mantissa.parse().ok();
    let mut text = mantissa;
    for s in scales {
        let factor = match *s {
            "hundred" => Some(100),
            "thousand" => Some(1000),
            "dozen" => Some(12),
            _ => None,
        };
        match (factor, value) {
            (Some(f), Some(v)) if suffix.is_empty() => {
                let nv = v.saturating_mul(f);
                value = Some(nv);
                text = nv.to_string();
            }
            _ => {
                suffix.push_str(match *s {
                    "million" => "m",
                    "billion" => "bn",
                    other => other,
                });
                value = None;
            }
        }
    }
    text + &suffix
}

fn ordinal_suffix(n: u64) -> &'static str {
    match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    }
}

fn normalize_words(qtype: QuantityType, words: &[&str]) -> String {
    match qtype {
        QuantityType::Cardinal => {
            let core = strip_modifier(words);
            match core {
                [w] if lexicon::QUANTIFIERS.contains(w) => w.to_string(),
                [w] if is_numeral_compound(w) => {
                    let (head, rest) = w.split_once('-').unwrap();
                    format!("{}-{}", normalize_numeral(&[head]), rest)
                }
                _ => normalize_numeral(core),
            }
        }
        QuantityType::Ordinal => {
            let w = words[0];
            match lexicon::ORDINAL_WORDS.iter().find(|(o, _)| *o == w) {
                Some((_, n)) => format!("{n}{}", ordinal_suffix(*n)),
                None => w.to_string(),
            }
        }
        QuantityType::Percent => {
            let n = words
                .iter()
                .position(|w| matches!(*w, "%" | "percent" | "per"))
                .unwrap_or(words.len());
            format!("{}%", normalize_numeral(&words[..n]))
        }
        QuantityType::Money => normalize_money(strip_modifier(words)),
        QuantityType::Time => normalize_time(words),
        QuantityType::Date => normalize_date(words),
        QuantityType::Quantity => {
            if let [w] = words {
                if let Some((n, unit)) = unit_suffix(w) {
                    return format!("{} {unit}", normalize_numeral(&[n]));
                }
            }
            let (unit, num) = words.split_last().unwrap();
            format!("{} {unit}", normalize_numeral(num))
        }
    }
}

fn normalize_money(words: &[&str]) -> String {
    let first = words[0];
    if let Some((symbol, amount)) = currency_amount(first) {
        let mut num = vec![amount];
        num.extend(words[1..].iter().map(|w| match *w {
            "m" => "million",
            "bn" => "billion",
            other => other,
        }));
        return format!("{symbol}{}", normalize_numeral(&num));
    }
    let (word, num) = words.split_last().unwrap();
    let amount = normalize_numeral(num);
    match lexicon::CURRENCY_WORDS.iter().find(|(cw, _, _)| cw == word) {
        Some((_, marker, true)) => format!("{marker}{amount}"),
        Some((_, marker, false)) => format!("{amount}{marker}"),
        None => amount,
    }
}

fn normalize_time(words: &[&str]) -> String {
    let strip_hour = |w: &str| -> String {
        match w.split_once(':') {
            Some((h, m)) => format!("{}:{m}", h.parse::<u32>().map_or(h.to_string(), |v| v.to_string())),
            None => w.parse::<u32>().map_or(w.to_string(), |v| v.to_string()),
        }
    };
    match words {
        [w] => {
            if let Some(base) = w.strip_suffix("am") {
                format!("{}am", strip_hour(base))
            } else if let Some(base) = w.strip_suffix("pm") {
                format!("{}pm", strip_hour(base))
            } else {
                strip_hour(w)
            }
        }
        [h, mer] => {
            let hour = number_word_value(h).map_or_else(|| strip_hour(h), |v| v.to_string());
            format!("{hour}{mer}")
        }
        _ => words.join(" "),
    }
}

fn normalize_date(words: &[&str]) -> String {
    let words = match words {
        ["the", rest @ ..] if !rest.is_empty() => rest,
        _ => words,
    };
    let month = words.iter().find(|w| is_month(w));
    let Some(month) = month else {
        return words.join(" ");
    };
    let day = words.iter().find_map(|w| day_number(w));
    let year = words.iter().find(|w| is_year(w));
    let mut parts = Vec::new();
    if let Some(d) = day {
        parts.push(d.to_string());
    }
    parts.push(month.to_string());
    if let Some(y) = year {
        parts.push(y.to_string());
    }
    parts.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn tag(text: &str) -> Vec<(QuantityType, String)> {
        tag_quantities(&tokenize(text))
            .into_iter()
            .map(|s| (s.qtype, s.surface))
            .collect()
    }

    fn norm(text: &str) -> Vec<String> {
        tag_quantities(&tokenize(text)).into_iter().map(|s| s.normalized).collect()
    }

    use QuantityType::*;

    #[test]
    fn clock_time_and_weekday() {
        assert_eq!(
            tag("the collision happened at about 18:40 on sunday"),
            [(Time, "18:40".into()), (Date, "sunday".into())]
        );
    }

    #[test]
    fn quantifier_and_compound() {
        assert_eq!(
            tag("several people have been hurt in a three-van collision"),
            [(Cardinal, "several".into()), (Cardinal, "three-van".into())]
        );
    }

    #[test]
    fn money_symbol() {
        assert_eq!(tag("lost £5,000"), [(Money, "£5,000".into())]);
        assert_eq!(norm("lost £5,000"), ["£5000"]);
    }

    #[test]
    fn empty_tokens() {
        assert!(tag_quantities(&[]).is_empty());
    }

    #[test]
    fn modifiers_absorbed() {
        assert_eq!(tag("more than 480 were queueing"), [(Cardinal, "more than 480".into())]);
        assert_eq!(norm("more than 480 were queueing"), ["480"]);
        assert_eq!(tag("at least 11 people"), [(Cardinal, "at least 11".into())]);
        assert_eq!(tag("more than £100,000"), [(Money, "more than £100,000".into())]);
        // Modifiers do not attach to other types.
        assert_eq!(tag("more than 5 %"), [(Percent, "5 %".into())]);
    }

    #[test]
    fn ordinals() {
        assert_eq!(tag("a second day"), [(Ordinal, "second".into())]);
        assert_eq!(norm("the first time"), ["1st"]);
        assert_eq!(norm("the 22nd time"), ["22nd"]);
        assert_eq!(norm("the twelfth man"), ["12th"]);
    }

    #[test]
    fn percent_forms() {
        assert_eq!(tag("from 6% to 9.5%"), [(Percent, "6 %".into()), (Percent, "9.5 %".into())]);
        assert_eq!(norm("five per cent"), ["5%"]);
        assert_eq!(norm("5 percent"), ["5%"]);
    }

    #[test]
    fn money_forms() {
        assert_eq!(norm("a loss of £5.7m"), ["£5.7m"]);
        assert_eq!(norm("a loss of £5.7 million"), ["£5.7m"]);
        assert_eq!(norm("paid 50 pence"), ["50p"]);
        assert_eq!(norm("paid five pounds"), ["£5"]);
    }

    #[test]
    fn time_forms() {
        assert_eq!(norm("at 10am"), ["10am"]);
        assert_eq!(norm("at 10 pm"), ["10pm"]);
        assert_eq!(norm("at 07:30"), ["7:30"]);
        assert_eq!(tag("at midnight"), [(Time, "midnight".into())]);
        assert!(tag("a 25:70 ratio").iter().all(|(t, _)| *t != Time));
    }

    #[test]
    fn date_forms() {
        assert_eq!(tag("on 25 august"), [(Date, "25 august".into())]);
        assert_eq!(norm("on 25 august"), norm("on august 25th"));
        assert_eq!(tag("in june 2016"), [(Date, "june 2016".into())]);
        assert_eq!(tag("in 2014"), [(Date, "2014".into())]);
        assert_eq!(tag("in the 1980s"), [(Date, "the 1980s".into())]);
        assert_eq!(tag("you may go"), []);
        assert_eq!(tag("on 5 may"), [(Date, "5 may".into())]);
        assert_eq!(tag("until wednesday"), [(Date, "wednesday".into())]);
        assert_eq!(tag("yesterday"), [(Date, "yesterday".into())]);
    }

    #[test]
    fn measurements() {
        assert_eq!(tag("a queue of 5 miles"), [(Quantity, "5 miles".into())]);
        assert_eq!(norm("ran 10km today"), ["10 km", "today"]);
        assert_eq!(norm("over 20 acres"), ["20 acres"]);
    }

    #[test]
    fn cardinal_forms() {
        assert_eq!(norm("five thousand people"), ["5000"]);
        assert_eq!(norm("5,000 people"), ["5000"]);
        assert_eq!(norm("twenty-five people"), ["25"]);
        assert_eq!(norm("a three-year-old girl"), ["3-year-old"]);
        assert_eq!(norm("hundreds of cuts"), ["hundreds"]);
        assert_eq!(norm("1,440 cuts"), ["1440"]);
    }

    #[test]
    fn normalize_agrees_with_tagging() {
        for s in tag_quantities(&tokenize("more than £100,000 on 25 august at 10 pm, the first of 5 miles")) {
            assert_eq!(normalize(&s), s.normalized);
        }
    }

    mod props {
        use super::super::*;
        use crate::text::tokenize;
        use proptest::prelude::*;

        fn vocab() -> impl Strategy<Value = String> {
            prop::sample::select(vec![
                "more", "than", "at", "least", "5", "5,000", "18:40", "saturday", "£5", "%",
                "per", "cent", "three-van", "three", "hundred", "first", "25", "august", "2016",
                "miles", "people", "the", "1980s", "pm", "over", "several", "pounds", "may",
            ])
            .prop_map(str::to_string)
        }

        proptest! {
            #[test]
            fn spans_sorted_disjoint(words in prop::collection::vec(vocab(), 0..25)) {
                let text = words.join(" ");
                let tokens = tokenize(&text);
                let spans = tag_quantities(&tokens);
                let mut prev_end = 0;
                for s in &spans {
                    prop_assert!(s.start < s.end);
                    prop_assert!(s.start >= prev_end);
                    prev_end = s.end;
                    let joined: Vec<&str> = tokens[s.start..s.end].iter().map(|t| t.text.as_str()).collect();
                    prop_assert_eq!(&s.surface, &joined.join(" "));
                }
                prop_assert_eq!(spans, tag_quantities(&tokens));
            }

            #[test]
            fn sentence_locality(a in prop::collection::vec(vocab(), 0..12), b in prop::collection::vec(vocab(), 0..12)) {
                let ta = tokenize(&a.join(" "));
                let tb = tokenize(&b.join(" "));
                let joint = tokenize(&format!("{} . {}", a.join(" "), b.join(" ")));
                let offset = ta.len() + 1;
                let mut expected = tag_quantities(&ta);
                expected.extend(tag_quantities(&tb).into_iter().map(|mut s| {
                    s.start += offset;
                    s.end += offset;
                    s
                }));
                prop_assert_eq!(tag_quantities(&joint), expected);
            }
        }
    }
}
