use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetKind, Interaction, IMPLICIT_SCALE, MOVIELENS_SCALE};
use crate::error::{Error, Result};

/// Loads a MovieLens `u.data` file: `user<TAB>item<TAB>rating<TAB>timestamp`.
pub fn load_movielens(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut interactions = Vec::new();
    for (lineno, line) in numbered_lines(&text) {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_error(
                path,
                lineno,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let user_id = parse_u64(path, lineno, "user id", fields[0])?;
        let item_id = parse_u64(path, lineno, "item id", fields[1])?;
        let rating: i64 = fields[2]
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad rating {:?}", fields[2])))?;
        let timestamp: i64 = fields[3]
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad timestamp {:?}", fields[3])))?;
        interactions.push(Interaction {
            user_id,
            item_id,
            rating: rating as f64,
            timestamp: Some(timestamp),
        });
    }
    if interactions.is_empty() {
        return Err(Error::Empty);
    }
    Dataset::new(interactions, DatasetKind::Explicit, MOVIELENS_SCALE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    Comma,
    Tab,
    /// Tab if the first record contains one, comma otherwise.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AmazonFormat {
    #[serde(default)]
    pub delimiter: Delimiter,
    /// Accept non-numeric ids (e.g. `A2CX7LUOHB2NDG`), numbering users and
    /// items separately in order of first appearance.
    #[serde(default)]
    pub intern_ids: bool,
}

/// Loads review records `user,item[,rating,timestamp]` as implicit feedback.
/// Any rating column is ignored: a review is a positive interaction.
pub fn load_amazon(path: impl AsRef<Path>, format: AmazonFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let delim = match format.delimiter {
        Delimiter::Comma => ',',
        Delimiter::Tab => '\t',
        Delimiter::Auto => {
            let first = numbered_lines(&text).next().map_or("", |(_, l)| l);
            if first.contains('\t') {
                '\t'
            } else {
                ','
            }
        }
    };
    let mut users = Interner::default();
    let mut items = Interner::default();
    let mut interactions = Vec::new();
    for (lineno, line) in numbered_lines(&text) {
        let fields: Vec<&str> = line.split(delim).map(str::trim).collect();
        if !(fields.len() == 2 || fields.len() == 4 || fields.len() == 3) {
            return Err(parse_error(
                path,
                lineno,
                format!("expected user{delim}item[{delim}rating{delim}timestamp], found {} fields", fields.len()),
            ));
        }
        let (user_id, item_id) = if format.intern_ids {
            (users.id(fields[0]), items.id(fields[1]))
        } else {
            (
                parse_u64(path, lineno, "user id", fields[0])?,
                parse_u64(path, lineno, "item id", fields[1])?,
            )
        };
        let timestamp = match fields.get(3) {
            Some(t) if !t.is_empty() => Some(
                t.parse::<i64>()
                    .map_err(|_| parse_error(path, lineno, format!("bad timestamp {t:?}")))?,
            ),
            _ => None,
        };
        interactions.push(Interaction {
            user_id,
            item_id,
            rating: 1.0,
            timestamp,
        });
    }
    if interactions.is_empty() {
        return Err(Error::Empty);
    }
    Dataset::new(interactions, DatasetKind::Implicit, IMPLICIT_SCALE)
}

#[derive(Default)]
struct Interner {
    ids: HashMap<String, u64>,
}

impl Interner {
    fn id(&mut self, key: &str) -> u64 {
        let next = self.ids.len() as u64;
        *self.ids.entry(key.to_owned()).or_insert(next)
    }
}

/// Non-blank lines with 1-based line numbers.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_u64(path: &Path, line: usize, what: &str, field: &str) -> Result<u64> {
    field
        .parse()
        .map_err(|_| parse_error(path, line, format!("bad {what} {field:?}")))
}

fn parse_error(path: &Path, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}
