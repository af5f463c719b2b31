use std::io::{BufRead, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{EmbedError, Result, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vector,
}

/// Id-keyed vectors of one shared dimension, in insertion order.
///
/// Serialized as JSONL, one `{"id":…,"vector":[…]}` object per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    dim: Option<usize>,
    vectors: IndexMap<String, Vector>,
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = EmbeddingRecord>) -> Result<Self> {
        let mut store = Self::new();
        for r in records {
            store.insert(r.id, r.vector)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, id: String, vector: Vector) -> Result<()> {
        if id.is_empty() {
            return Err(EmbedError::EmptyId(self.len() + 1));
        }
        match self.dim {
            Some(d) => super::check_dims(d, vector.dim())?,
            None => self.dim = Some(vector.dim()),
        }
        if self.vectors.contains_key(&id) {
            return Err(EmbedError::DuplicateId(id));
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Vector> {
        self.vectors.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Vector)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut store = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingRecord =
                serde_json::from_str(&line).map_err(|e| EmbedError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if rec.id.is_empty() {
                return Err(EmbedError::EmptyId(line_no));
            }
            if let Some(d) = store.dim {
                if d != rec.vector.dim() {
                    return Err(EmbedError::RecordDim {
                        line: line_no,
                        expected: d,
                        actual: rec.vector.dim(),
                    });
                }
            }
            store.insert(rec.id, rec.vector)?;
        }
        Ok(store)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            id: &'a str,
            vector: &'a Vector,
        }
        for (id, vector) in &self.vectors {
            serde_json::to_writer(&mut writer, &Line { id, vector }).map_err(std::io::Error::from)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }
}
