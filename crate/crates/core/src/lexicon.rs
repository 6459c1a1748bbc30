//! Fixed word lists shared by the tokenizer and the quantity grammar.

pub(crate) const UNITS: &[(&str, u64)] = &[
    ("zero", 0),
    ("one", 1),
    ("two", 2),
    ("three", 3),
    ("four", 4),
    ("five", 5),
    ("six", 6),
    ("seven", 7),
    ("eight", 8),
    ("nine", 9),
    ("ten", 10),
    ("eleven", 11),
    ("twelve", 12),
    ("thirteen", 13),
    ("fourteen", 14),
    ("fifteen", 15),
    ("sixteen", 16),
    ("seventeen", 17),
    ("eighteen", 18),
    ("nineteen", 19),
];

pub(crate) const TENS: &[(&str, u64)] = &[
    ("twenty", 20),
    ("thirty", 30),
    ("forty", 40),
    ("fifty", 50),
    ("sixty", 60),
    ("seventy", 70),
    ("eighty", 80),
    ("ninety", 90),
];

/// Multiplicative scale words that may follow a numeral.
pub(crate) const SCALES: &[&str] = &["hundred", "thousand", "million", "billion", "dozen"];

pub(crate) const QUANTIFIERS: &[&str] = &["several", "hundreds", "thousands", "millions"];

pub(crate) const ORDINAL_WORDS: &[(&str, u64)] = &[
    ("first", 1),
    ("second", 2),
    ("third", 3),
    ("fourth", 4),
    ("fifth", 5),
    ("sixth", 6),
    ("seventh", 7),
    ("eighth", 8),
    ("ninth", 9),
    ("tenth", 10),
    ("eleventh", 11),
    ("twelfth", 12),
    ("thirteenth", 13),
    ("fourteenth", 14),
    ("fifteenth", 15),
    ("sixteenth", 16),
    ("seventeenth", 17),
    ("eighteenth", 18),
    ("nineteenth", 19),
    ("twentieth", 20),
];

/// Leading modifiers absorbed into CARDINAL and MONEY spans.
pub(crate) const MODIFIERS: &[&[&str]] = &[
    &["more", "than"],
    &["at", "least"],
    &["at", "most"],
    &["up", "to"],
    &["over"],
    &["about"],
    &["nearly"],
    &["almost"],
];

pub(crate) const WEEKDAYS: &[&str] = &[
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
];

pub(crate) const MONTHS: &[&str] = &[
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

/// Month names that are also common English words; only tagged next to a day or year.
pub(crate) const AMBIGUOUS_MONTHS: &[&str] = &["may", "march"];

pub(crate) const RELATIVE_DAYS: &[&str] = &["yesterday", "today", "tomorrow", "tonight"];

pub(crate) const CURRENCY_SYMBOLS: &[char] = &['£', '$', '€'];

/// Currency words and the symbol (or suffix) they normalize to.
pub(crate) const CURRENCY_WORDS: &[(&str, &str, bool)] = &[
    // (word, canonical marker, marker is a prefix)
    ("pounds", "£", true),
    ("pound", "£", true),
    ("dollars", "$", true),
    ("dollar", "$", true),
    ("euros", "€", true),
    ("euro", "€", true),
    ("pence", "p", false),
    ("cents", "c", false),
];

pub(crate) const MEASUREMENT_UNITS: &[&str] = &[
    "miles", "mile", "km", "kilometres", "kilometre", "kilometers", "kilometer", "kg", "kilograms",
    "kilogram", "kilos", "tonnes", "tonne", "tons", "ton", "metres", "metre", "meters", "meter",
    "cm", "mm", "feet", "foot", "ft", "inches", "inch", "litres", "litre", "liters", "liter",
    "gallons", "gallon", "mph", "km/h", "acres", "acre", "hectares", "hectare", "yards", "yard",
    "lb", "lbs", "grams", "gram", "g", "ml",
];

pub(crate) fn unit_value(word: &str) -> Option<u64> {
    UNITS
        .iter()
        .chain(TENS.iter())
        .find(|(w, _)| *w == word)
        .map(|(_, v)| *v)
}

/// Value of a spelled-out number below one hundred, including "twenty-five".
pub(crate) fn number_word_value(word: &str) -> Option<u64> {
    if let Some(v) = unit_value(word) {
        return Some(v);
    }
    let (tens, unit) = word.split_once('-')?;
    let t = TENS.iter().find(|(w, _)| *w == tens)?.1;
    let u = UNITS.iter().find(|(w, _)| *w == unit)?.1;
    (1..10).contains(&u).then_some(t + u)
}

pub(crate) fn is_number_word(word: &str) -> bool {
    number_word_value(word).is_some()
}

pub(crate) fn is_scale(word: &str) -> bool {
    SCALES.contains(&word)
}
