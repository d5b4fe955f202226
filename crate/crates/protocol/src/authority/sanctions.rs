//! Flat sanctions lists.

use std::collections::BTreeSet;

use super::ParseError;

pub fn normalize(address: &str) -> String {
    address.trim().to_ascii_lowercase()
}

fn valid(address: &str) -> bool {
    !address.is_empty()
        && address
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ':'))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SanctionsList {
    addresses: BTreeSet<String>,
    pub source: String,
}

impl SanctionsList {
    pub fn from_addresses<'a>(addresses: impl IntoIterator<Item = &'a str>, source: &str) -> Self {
        SanctionsList {
            addresses: addresses.into_iter().map(normalize).collect(),
            source: source.to_string(),
        }
    }

    /// One address per line, or `address=<addr>[,key=value...]` records.
    /// `#` starts a comment.
    pub fn parse(text: &str, source: &str) -> Result<Self, ParseError> {
        let mut addresses = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let address = if line.contains('=') {
                line.split(',')
                    .filter_map(|field| field.split_once('='))
                    .find(|(k, _)| k.trim() == "address")
                    .map(|(_, v)| v.trim())
                    .ok_or_else(|| ParseError {
                        line: i + 1,
                        message: "record has no address field".into(),
                    })?
            } else {
                line
            };
            if !valid(address) {
                return Err(ParseError {
                    line: i + 1,
                    message: format!("malformed address `{address}`"),
                });
            }
            addresses.insert(normalize(address));
        }
        Ok(SanctionsList {
            addresses,
            source: source.to_string(),
        })
    }

    pub fn contains(&self, address: &str) -> bool {
        self.addresses.contains(&normalize(address))
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.addresses.iter().map(String::as_str)
    }
}
