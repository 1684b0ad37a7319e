//! Bilingual lexicon: CSV ingestion, validation and frequency-derived
//! resting levels.
//!
//! Each row holds one translation pair in eight columns:
//! `O_a, f, P_a, f, O_b, f, P_b, f`. Phonological readings share the
//! frequency of their orthographic sibling; their frequency columns are
//! checked for well-formedness and otherwise ignored.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Parameters;

const COLUMNS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub ortho_a: String,
    pub freq_a: f64,
    pub phono_a: String,
    pub ortho_b: String,
    pub freq_b: f64,
    pub phono_b: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DuplicatePolicy {
    /// A language may not contain the same orthographic form twice.
    #[default]
    Reject,
    /// Repeated forms are kept as distinct nodes, named `SYMBOL#concept`.
    Allow,
}

#[derive(Debug, Clone)]
pub struct LexiconOptions {
    pub duplicates: DuplicatePolicy,
    /// Divide language-B frequencies by four at load time.
    pub scale_l2: bool,
    /// Fixed OPB normalizer (compatibility mode). `None` uses the lexicon max.
    pub max_opb: Option<f64>,
    pub language_a: String,
    pub language_b: String,
}

impl Default for LexiconOptions {
    fn default() -> Self {
        Self {
            duplicates: DuplicatePolicy::Reject,
            scale_l2: false,
            max_opb: None,
            language_a: "NL".into(),
            language_b: "EN".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    language_a: String,
    language_b: String,
    max_opb: f64,
    fixed_max_opb: bool,
    duplicates_allowed: bool,
}

/// Frequency transform feeding resting levels: `log10(1 + f)`.
pub fn opb(freq: f64) -> Result<f64> {
    if !freq.is_finite() || freq < 0.0 {
        return Err(Error::Domain(format!("frequency must be finite and >= 0, got {freq}")));
    }
    Ok((1.0 + freq).log10())
}

/// Resting activation for a word form of the given frequency, linear in OPB
/// between `MIN_REST` (zero frequency) and `MAX_REST` (at `max_opb`).
pub fn rest_activation(freq: f64, max_opb: f64, params: &Parameters) -> Result<f64> {
    let value = opb(freq)?;
    if value == 0.0 {
        return Ok(params.min_rest);
    }
    if max_opb.is_nan() || max_opb <= 0.0 {
        return Err(Error::Domain(format!("max_opb must be positive for non-zero frequency, got {max_opb}")));
    }
    let raw = params.min_rest + value * (params.min_rest.abs() / max_opb);
    Ok(raw.clamp(params.min_rest, params.max_rest))
}

impl Lexicon {
    pub fn parse(text: &str, options: &LexiconOptions) -> Result<Self> {
        Self::from_reader(text.as_bytes(), options)
    }

    pub fn from_reader<R: Read>(reader: R, options: &LexiconOptions) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .quoting(false)
            .comment(Some(b'#'))
            .from_reader(reader);

        let mut entries = Vec::new();
        let mut first = true;
        for record in csv.records() {
            let record = record?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.iter().all(str::is_empty) {
                continue;
            }
            if record.len() != COLUMNS {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {COLUMNS} columns, found {}", record.len()),
                });
            }
            let is_header = first && record[1].parse::<f64>().is_err();
            first = false;
            if is_header {
                continue;
            }
            let freq = |col: usize| -> Result<f64> {
                let raw = &record[col];
                let value: f64 = raw.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {}: {raw:?} is not a frequency", col + 1),
                })?;
                if !value.is_finite() || value < 0.0 {
                    return Err(Error::Parse {
                        line,
                        message: format!("column {}: frequency must be finite and >= 0", col + 1),
                    });
                }
                Ok(value)
            };
            let freq_a = freq(1)?;
            freq(3)?;
            let mut freq_b = freq(5)?;
            freq(7)?;
            if options.scale_l2 {
                freq_b /= 4.0;
            }
            entries.push(LexiconEntry {
                ortho_a: record[0].to_string(),
                freq_a,
                phono_a: record[2].to_string(),
                ortho_b: record[4].to_string(),
                freq_b,
                phono_b: record[6].to_string(),
            });
        }
        Self::from_entries(entries, options)
    }

    /// Validates and normalizes entries (graphemes are upper-cased).
    pub fn from_entries(mut entries: Vec<LexiconEntry>, options: &LexiconOptions) -> Result<Self> {
        if options.language_a == options.language_b {
            return Err(Error::Config("the two language tags must differ".into()));
        }
        let mut seen_a = HashSet::new();
        let mut seen_b = HashSet::new();
        let mut max_opb: f64 = 0.0;
        for (idx, e) in entries.iter_mut().enumerate() {
            e.ortho_a = e.ortho_a.to_uppercase();
            e.ortho_b = e.ortho_b.to_uppercase();
            for (what, s) in
                [("ortho_a", &e.ortho_a), ("phono_a", &e.phono_a), ("ortho_b", &e.ortho_b), ("phono_b", &e.phono_b)]
            {
                if s.is_empty() {
                    return Err(Error::Validation(format!("entry {idx}: {what} is empty")));
                }
            }
            for f in [e.freq_a, e.freq_b] {
                max_opb = max_opb.max(opb(f).map_err(|err| Error::Validation(format!("entry {idx}: {err}")))?);
            }
            if options.duplicates == DuplicatePolicy::Reject {
                if !seen_a.insert(e.ortho_a.clone()) {
                    return Err(Error::Validation(format!(
                        "entry {idx}: duplicate {} form {}",
                        options.language_a, e.ortho_a
                    )));
                }
                if !seen_b.insert(e.ortho_b.clone()) {
                    return Err(Error::Validation(format!(
                        "entry {idx}: duplicate {} form {}",
                        options.language_b, e.ortho_b
                    )));
                }
            }
        }
        let fixed = options.max_opb.is_some();
        if let Some(m) = options.max_opb {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Config(format!("MAX_OPB must be positive, got {m}")));
            }
            max_opb = m;
        }
        Ok(Self {
            entries,
            language_a: options.language_a.clone(),
            language_b: options.language_b.clone(),
            max_opb,
            fixed_max_opb: fixed,
            duplicates_allowed: options.duplicates == DuplicatePolicy::Allow,
        })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn language_a(&self) -> &str {
        &self.language_a
    }

    pub fn language_b(&self) -> &str {
        &self.language_b
    }

    pub fn max_opb(&self) -> f64 {
        self.max_opb
    }

    pub fn has_fixed_max_opb(&self) -> bool {
        self.fixed_max_opb
    }

    pub fn duplicates_allowed(&self) -> bool {
        self.duplicates_allowed
    }

    /// Resting level for `freq`. A `MAX_OPB` parameter, when set, takes
    /// precedence over the lexicon's own maximum.
    pub fn rest_for(&self, freq: f64, params: &Parameters) -> Result<f64> {
        rest_activation(freq, params.max_opb.unwrap_or(self.max_opb), params)
    }

    /// Writes the lexicon back in the eight-column format. Phonological
    /// frequency columns repeat the orthographic frequency.
    pub fn to_csv(&self) -> String {
        let mut out =
            format!("{a}:O,freq,{a}:P,freq,{b}:O,freq,{b}:P,freq\n", a = self.language_a, b = self.language_b);
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                e.ortho_a, e.freq_a, e.phono_a, e.freq_a, e.ortho_b, e.freq_b, e.phono_b, e.freq_b
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const BASE: &str = include_str!("../../../fixtures/base.csv");

    #[test]
    fn base_fixture_loads() {
        let lex = Lexicon::parse(BASE, &LexiconOptions::default()).unwrap();
        assert_eq!(lex.len(), 10);
        let aarde = &lex.entries()[8];
        assert_eq!(aarde.ortho_a, "AARDE");
        assert_eq!(aarde.freq_a, 100.07);
        assert_eq!(aarde.phono_b, "3T");
        assert_eq!(aarde.freq_b, 24.87);
        assert_eq!(lex.entries()[7].phono_b, "str$b@rI");
    }

    #[test]
    fn single_row_example() {
        let lex =
            Lexicon::parse("AARDE,100.07,ard@,100.07,EARTH,24.87,3T,24.87\n", &LexiconOptions::default()).unwrap();
        assert_eq!(lex.len(), 1);
        assert_eq!(lex.entries()[0].ortho_a, "AARDE");
        assert_eq!(lex.entries()[0].phono_b, "3T");
    }

    #[test]
    fn header_only_is_empty() {
        let lex = Lexicon::parse("Dutch:O,f,Dutch:P,f,English:O,f,English:P,f\n", &Default::default()).unwrap();
        assert!(lex.is_empty());
        assert_eq!(lex.max_opb(), 0.0);
    }

    #[test]
    fn seven_columns_names_the_line() {
        let text = "AAP,28.56,ap,28.56,MONKEY,8.38,mVNkI,8.38\nAARD,15.32,art,15.32,NATURE,11.29,n1J@R\n";
        match Lexicon::parse(text, &Default::default()).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains('7'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_and_non_numeric_frequencies_rejected() {
        for row in ["AAP,-1,ap,1,MONKEY,1,mVNkI,1", "AAP,1,ap,1,MONKEY,lots,mVNkI,1", "AAP,1,ap,x,MONKEY,1,mVNkI,1"] {
            let text = format!("AARD,1,art,1,NATURE,1,n1J@R,1\n{row}\n");
            assert!(matches!(Lexicon::parse(&text, &Default::default()), Err(Error::Parse { line: 2, .. })));
        }
    }

    #[test]
    fn duplicates_follow_policy() {
        let text = "ROOM,1,rom,1,CREAM,1,krim,1\nROOM,2,rom,2,FAME,1,fem,1\n";
        assert!(matches!(Lexicon::parse(text, &Default::default()), Err(Error::Validation(_))));
        let opts = LexiconOptions { duplicates: DuplicatePolicy::Allow, ..Default::default() };
        assert_eq!(Lexicon::parse(text, &opts).unwrap().len(), 2);
        // Cross-language homographs are always fine.
        let homographs = "ROOM,1,rom,1,CREAM,1,krim,1\nKAMER,1,kam@r,1,ROOM,1,rum,1\n";
        assert_eq!(Lexicon::parse(homographs, &Default::default()).unwrap().len(), 2);
    }

    #[test]
    fn graphemes_are_uppercased() {
        let lex = Lexicon::parse("aap,1,ap,1,monkey,1,mVNkI,1\n", &Default::default()).unwrap();
        assert_eq!(lex.entries()[0].ortho_a, "AAP");
        assert_eq!(lex.entries()[0].phono_b, "mVNkI");
    }

    #[test]
    fn l2_scaling_divides_language_b() {
        let opts = LexiconOptions { scale_l2: true, ..Default::default() };
        let lex = Lexicon::parse("AAP,28.56,ap,28.56,MONKEY,8.0,mVNkI,8.0\n", &opts).unwrap();
        assert_eq!(lex.entries()[0].freq_a, 28.56);
        assert_eq!(lex.entries()[0].freq_b, 2.0);
    }

    #[test]
    fn max_opb_is_lexicon_maximum_or_fixed() {
        let lex = Lexicon::parse(BASE, &Default::default()).unwrap();
        assert_eq!(lex.max_opb(), opb(191.95).unwrap());
        let opts = LexiconOptions { max_opb: Some(0.6402259325203161), ..Default::default() };
        let lex = Lexicon::parse(BASE, &opts).unwrap();
        assert_eq!(lex.max_opb(), 0.6402259325203161);
        assert!(lex.has_fixed_max_opb());
    }

    #[test]
    fn opb_values() {
        assert_eq!(opb(0.0).unwrap(), 0.0);
        // log10(101.07), evaluated independently.
        assert!((opb(100.07).unwrap() - 2.0046222657007826).abs() < 1e-15);
        assert!(matches!(opb(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rest_activation_endpoints() {
        let p = Parameters::default();
        let m = opb(50.0).unwrap();
        assert_eq!(rest_activation(0.0, m, &p).unwrap(), -0.2);
        assert_eq!(rest_activation(0.0, 0.0, &p).unwrap(), -0.2);
        assert!((rest_activation(50.0, m, &p).unwrap() - 0.0).abs() < 1e-15);
        // opb(f) = m / 2  <=>  1 + f = sqrt(51)
        let half = 51f64.sqrt() - 1.0;
        assert!((rest_activation(half, m, &p).unwrap() + 0.1).abs() < 1e-12);
        assert!(rest_activation(1.0, 0.0, &p).is_err());
    }

    proptest! {
        #[test]
        fn opb_is_monotone(a in 0.0f64..1e6, b in 0.0f64..1e6) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(opb(lo).unwrap() <= opb(hi).unwrap());
        }

        #[test]
        fn rest_is_in_range(f in 0.0f64..1e6, m in 1e-3f64..10.0) {
            let r = rest_activation(f, m, &Parameters::default()).unwrap();
            prop_assert!((-0.2..=0.0).contains(&r));
        }

        #[test]
        fn csv_round_trip(rows in prop::collection::vec(
            ("[A-Z]{1,8}", 0.0f64..1e4, "[a-z@$]{1,6}", "[A-Z]{1,8}", 0.0f64..1e4, "[a-z@$]{1,6}"),
            0..12,
        )) {
            let entries: Vec<_> = rows
                .into_iter()
                .enumerate()
                .map(|(i, (oa, fa, pa, ob, fb, pb))| LexiconEntry {
                    ortho_a: format!("{oa}{i}"),
                    freq_a: fa,
                    phono_a: pa,
                    ortho_b: format!("{ob}{i}"),
                    freq_b: fb,
                    phono_b: pb,
                })
                .collect();
            let lex = Lexicon::from_entries(entries, &Default::default()).unwrap();
            let back = Lexicon::parse(&lex.to_csv(), &Default::default()).unwrap();
            prop_assert_eq!(back, lex);
        }
    }
}
