use std::collections::BTreeMap;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use super::{DocFormat, ExperienceEntry, IngestError};

/// Exact column set of the career-record CSV interface.
pub const CAREER_CSV_HEADER: [&str; 7] = [
    "employer",
    "title",
    "start",
    "end",
    "category",
    "description",
    "skills",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CareerRecord {
    pub entry: ExperienceEntry,
    pub category: String,
    pub skills: Vec<String>,
}

fn build_record(
    row: usize,
    fields: &BTreeMap<String, String>,
) -> Result<CareerRecord, IngestError> {
    let get = |k: &str| {
        fields
            .get(k)
            .map(|v| v.trim().to_string())
            .unwrap_or_default()
    };
    let employer = get("employer");
    if employer.is_empty() {
        return Err(IngestError::RowError {
            row,
            message: "employer is empty".into(),
        });
    }
    let bullets: Vec<String> = get("description")
        .split("; ")
        .map(|b| b.trim().trim_end_matches(';').trim().to_string())
        .filter(|b| !b.is_empty())
        .collect();
    let (start, end) = (get("start"), get("end"));
    let date_range = match (start.is_empty(), end.is_empty()) {
        (false, false) => format!("{start}-{end}"),
        (false, true) => format!("{start}-present"),
        (true, false) => end,
        (true, true) => String::new(),
    };
    let skills = get("skills")
        .split([';', ',', '|'])
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    Ok(CareerRecord {
        entry: ExperienceEntry {
            employer,
            title: get("title"),
            date_range,
            bullets,
        },
        category: get("category"),
        skills,
    })
}

fn parse_csv(raw: &str) -> Result<Vec<CareerRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(raw.trim_start_matches('\u{feff}').as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| IngestError::RowError {
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    for col in CAREER_CSV_HEADER {
        if !header.iter().any(|h| h == col) {
            return Err(IngestError::SchemaMismatch(col.to_string()));
        }
    }
    if let Some(extra) = header
        .iter()
        .find(|h| !CAREER_CSV_HEADER.contains(&h.as_str()))
    {
        return Err(IngestError::SchemaMismatch(extra.clone()));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| IngestError::RowError {
            row,
            message: e.to_string(),
        })?;
        let fields = header
            .iter()
            .cloned()
            .zip(rec.iter().map(str::to_string))
            .collect();
        out.push(build_record(row, &fields)?);
    }
    Ok(out)
}

fn parse_xml(raw: &str) -> Result<Vec<CareerRecord>, IngestError> {
    let mut reader = Reader::from_str(raw);
    reader.config_mut().trim_text(true);
    let mut out = Vec::new();
    let mut current: Option<BTreeMap<String, String>> = None;
    let mut field: Option<String> = None;
    let mut row = 0usize;
    loop {
        let event = reader.read_event().map_err(|e| IngestError::RowError {
            row: row.max(1),
            message: e.to_string(),
        })?;
        match event {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if name == "record" {
                    row += 1;
                    current = Some(BTreeMap::new());
                } else if current.is_some() {
                    field = Some(name);
                }
            }
            Event::Empty(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if let Some(map) = current.as_mut() {
                    map.insert(name, String::new());
                }
            }
            Event::Text(t) => {
                if let (Some(map), Some(name)) = (current.as_mut(), field.as_ref()) {
                    let text = t.unescape().map_err(|e| IngestError::RowError {
                        row,
                        message: e.to_string(),
                    })?;
                    map.entry(name.clone()).or_default().push_str(&text);
                }
            }
            Event::CData(t) => {
                if let (Some(map), Some(name)) = (current.as_mut(), field.as_ref()) {
                    map.entry(name.clone())
                        .or_default()
                        .push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::End(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if name == "record" {
                    let map = current.take().unwrap_or_default();
                    for col in CAREER_CSV_HEADER {
                        if !map.contains_key(col) {
                            return Err(IngestError::SchemaMismatch(col.to_string()));
                        }
                    }
                    out.push(build_record(row, &map)?);
                } else if field.as_deref() == Some(name.as_str()) {
                    if let Some(map) = current.as_mut() {
                        map.entry(name).or_default();
                    }
                    field = None;
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if current.is_some() {
        return Err(IngestError::RowError {
            row,
            message: "unterminated <record>".into(),
        });
    }
    Ok(out)
}

/// Parses structured career records (CSV or XML) into experience entries.
pub fn parse_career_records(
    raw: &str,
    format: DocFormat,
) -> Result<Vec<CareerRecord>, IngestError> {
    if raw.trim().is_empty() {
        return Err(IngestError::EmptyDocument);
    }
    match format {
        DocFormat::Csv => parse_csv(raw),
        DocFormat::Xml => parse_xml(raw),
        other => Err(IngestError::UnsupportedFormat {
            format: other,
            what: "career records",
        }),
    }
}
