//! Attribute-value instances, the universal input to a concept tree.

use std::fmt;

/// A single attribute value: a nominal symbol or a continuous number.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    Nominal(String),
    Continuous(f64),
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Nominal(s) => write!(f, "{s}"),
            AttributeValue::Continuous(x) => write!(f, "{x}"),
        }
    }
}

/// An unordered collection of uniquely named attributes. Instances may
/// omit any attribute; prediction queries simply leave the target out.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Instance {
    // Sorted by name; uniqueness enforced on insert.
    attrs: Vec<(String, AttributeValue)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("duplicate attribute name: {0}")]
pub struct DuplicateAttribute(pub String);

impl Instance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: AttributeValue) -> Result<(), DuplicateAttribute> {
        match self.attrs.binary_search_by(|(n, _)| n.as_str().cmp(name)) {
            Ok(_) => Err(DuplicateAttribute(name.to_string())),
            Err(pos) => {
                self.attrs.insert(pos, (name.to_string(), value));
                Ok(())
            }
        }
    }

    /// Builder-style insert; panics on a duplicate name.
    pub fn with(mut self, name: &str, value: AttributeValue) -> Self {
        self.insert(name, value).expect("duplicate attribute name");
        self
    }

    pub fn with_nominal(self, name: &str, symbol: &str) -> Self {
        self.with(name, AttributeValue::Nominal(symbol.to_string()))
    }

    pub fn with_continuous(self, name: &str, x: f64) -> Self {
        self.with(name, AttributeValue::Continuous(x))
    }

    pub fn get(&self, name: &str) -> Option<&AttributeValue> {
        self.attrs
            .binary_search_by(|(n, _)| n.as_str().cmp(name))
            .ok()
            .map(|i| &self.attrs[i].1)
    }

    /// Copy of this instance with one attribute removed (no-op if absent).
    pub fn without(&self, name: &str) -> Instance {
        Instance {
            attrs: self
                .attrs
                .iter()
                .filter(|(n, _)| n != name)
                .cloned()
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }

    /// Attributes in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &AttributeValue)> {
        self.attrs.iter().map(|(n, v)| (n.as_str(), v))
    }
}
