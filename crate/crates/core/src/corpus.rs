//! Occupation taxonomy and annotated job advertisements.
//!
//! The taxonomy is a UTF-8 CSV with header
//! `esco_id,title,description,skills,synonyms`, where skills and synonyms
//! are `|`-separated lists. Advertisements are JSONL objects with keys
//! `ad_id`, `esco_id`, `title` and `body`.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ESCO_HEADER: [&str; 5] = ["esco_id", "title", "description", "skills", "synonyms"];
const AD_KEYS: [&str; 4] = ["ad_id", "esco_id", "title", "body"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed CSV row: {message}")]
    Csv { line: u64, message: String },
    #[error("invalid header: expected `{}`, found `{found}`", ESCO_HEADER.join(","))]
    Header { found: String },
    #[error("line {line}: empty {field}")]
    EmptyField { line: u64, field: &'static str },
    #[error("line {line}: duplicate esco_id `{id}`")]
    DuplicateOccupation { line: u64, id: String },
    #[error("line {line}: invalid JSON: {message}")]
    Json { line: u64, message: String },
    #[error("line {line}: missing key `{key}`")]
    MissingKey { line: u64, key: &'static str },
    #[error("line {line}: key `{key}` must be a string")]
    NotAString { line: u64, key: &'static str },
    #[error("line {line}: duplicate ad_id `{id}`")]
    DuplicateAd { line: u64, id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscoOccupation {
    pub esco_id: String,
    pub title: String,
    pub description: String,
    pub skills: Vec<String>,
    pub synonyms: Vec<String>,
}

impl EscoOccupation {
    /// Text used for the description embedding; occupations without a
    /// description fall back to their title.
    pub fn description_text(&self) -> &str {
        if self.description.is_empty() {
            &self.title
        } else {
            &self.description
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobAd {
    pub ad_id: String,
    pub esco_id: String,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Skill,
    Synonym,
    Description,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub anchor: String,
    pub positive: String,
    pub kind: PairKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub occupations: usize,
    pub ads: usize,
    /// Occupations with at least one ad.
    pub covered: usize,
    /// Ads whose esco_id is not in the taxonomy.
    pub unknown_refs: usize,
}

fn split_list(field: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    field
        .split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty() && seen.insert(*s))
        .map(str::to_owned)
        .collect()
}

pub fn parse_esco<R: Read>(reader: R) -> Result<Vec<EscoOccupation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(&e, 1))?.clone();
    if headers.iter().map(str::trim).ne(ESCO_HEADER) {
        return Err(CorpusError::Header {
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut out = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(&e, 0))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("").trim();
        let esco_id = field(0);
        if esco_id.is_empty() {
            return Err(CorpusError::EmptyField { line, field: "esco_id" });
        }
        if field(1).is_empty() {
            return Err(CorpusError::EmptyField { line, field: "title" });
        }
        if seen.insert(esco_id.to_owned(), line).is_some() {
            return Err(CorpusError::DuplicateOccupation {
                line,
                id: esco_id.to_owned(),
            });
        }
        out.push(EscoOccupation {
            esco_id: esco_id.to_owned(),
            title: field(1).to_owned(),
            description: field(2).to_owned(),
            skills: split_list(field(3)),
            synonyms: split_list(field(4)),
        });
    }
    Ok(out)
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> CorpusError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    CorpusError::Csv {
        line,
        message: e.to_string(),
    }
}

pub fn write_esco<W: Write>(occupations: &[EscoOccupation], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let map = |e: csv::Error| CorpusError::Io(std::io::Error::other(e));
    w.write_record(ESCO_HEADER).map_err(map)?;
    for o in occupations {
        w.write_record([
            o.esco_id.as_str(),
            &o.title,
            &o.description,
            &o.skills.join("|"),
            &o.synonyms.join("|"),
        ])
        .map_err(map)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_ads<R: BufRead>(reader: R) -> Result<Vec<JobAd>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| CorpusError::Json {
            line: line_no,
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| CorpusError::Json {
            line: line_no,
            message: "expected a JSON object".into(),
        })?;
        let mut fields = AD_KEYS.iter().map(|&key| match obj.get(key) {
            None => Err(CorpusError::MissingKey { line: line_no, key }),
            Some(v) => v
                .as_str()
                .map(str::to_owned)
                .ok_or(CorpusError::NotAString { line: line_no, key }),
        });
        let mut next = || fields.next().expect("four keys");
        let ad = JobAd {
            ad_id: next()?,
            esco_id: next()?,
            title: next()?,
            body: next()?,
        };
        for (field, value) in [("ad_id", &ad.ad_id), ("esco_id", &ad.esco_id)] {
            if value.trim().is_empty() {
                return Err(CorpusError::EmptyField { line: line_no, field });
            }
        }
        if ad.body.trim().is_empty() {
            return Err(CorpusError::EmptyField { line: line_no, field: "body" });
        }
        if !seen.insert(ad.ad_id.clone()) {
            return Err(CorpusError::DuplicateAd {
                line: line_no,
                id: ad.ad_id,
            });
        }
        out.push(ad);
    }
    Ok(out)
}

pub fn write_ads<W: Write>(ads: &[JobAd], mut writer: W) -> Result<()> {
    for ad in ads {
        serde_json::to_writer(&mut writer, ad).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Title-anchored sentence pairs in corpus order, skills before synonyms
/// before the description.
pub fn export_training_pairs(occupations: &[EscoOccupation]) -> Vec<TrainingPair> {
    let mut out = Vec::new();
    for o in occupations {
        let pair = |positive: &str, kind| TrainingPair {
            anchor: o.title.clone(),
            positive: positive.to_owned(),
            kind,
        };
        out.extend(o.skills.iter().map(|s| pair(s, PairKind::Skill)));
        out.extend(o.synonyms.iter().map(|s| pair(s, PairKind::Synonym)));
        if !o.description.is_empty() {
            out.push(pair(&o.description, PairKind::Description));
        }
    }
    out
}

pub fn write_training_pairs<W: Write>(pairs: &[TrainingPair], mut writer: W) -> Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut writer, p).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn corpus_stats(occupations: &[EscoOccupation], ads: &[JobAd]) -> CorpusStats {
    let known: HashSet<&str> = occupations.iter().map(|o| o.esco_id.as_str()).collect();
    let mut covered = HashSet::new();
    let mut unknown_refs = 0;
    for ad in ads {
        if known.contains(ad.esco_id.as_str()) {
            covered.insert(ad.esco_id.as_str());
        } else {
            unknown_refs += 1;
        }
    }
    CorpusStats {
        occupations: occupations.len(),
        ads: ads.len(),
        covered: covered.len(),
        unknown_refs,
    }
}
