use serde::{Deserialize, Serialize};

use crate::domain::TemplateId;

use super::ClassifierError;

/// Bijection between the labels a model was trained on and its output indices.
///
/// Labels are kept in canonical template order, so a codec built from the
/// same label set is always identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCodec {
    labels: Vec<TemplateId>,
}

impl LabelCodec {
    pub fn new(mut labels: Vec<TemplateId>) -> Result<Self, ClassifierError> {
        if let Some(bad) = labels.iter().find(|l| !l.is_known()) {
            return Err(ClassifierError::Training(format!(
                "label `{bad}` is not a known template"
            )));
        }
        labels.sort();
        labels.dedup();
        if labels.is_empty() {
            return Err(ClassifierError::Training("codec needs at least one label".into()));
        }
        Ok(Self { labels })
    }

    /// All five known templates.
    pub fn canonical() -> Self {
        Self {
            labels: TemplateId::CANONICAL.to_vec(),
        }
    }

    /// Distinct labels present in `labels`.
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a TemplateId>) -> Result<Self, ClassifierError> {
        Self::new(labels.into_iter().cloned().collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[TemplateId] {
        &self.labels
    }

    pub fn encode(&self, label: &TemplateId) -> Option<usize> {
        self.labels.binary_search(label).ok()
    }

    pub fn decode(&self, index: usize) -> Option<&TemplateId> {
        self.labels.get(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_canonical_order() {
        let codec = LabelCodec::new(vec![TemplateId::Verbose, TemplateId::Minimal, TemplateId::Verbose]).unwrap();
        assert_eq!(codec.labels(), &[TemplateId::Minimal, TemplateId::Verbose]);
        for (i, l) in codec.labels().iter().enumerate() {
            assert_eq!(codec.encode(l), Some(i));
            assert_eq!(codec.decode(i), Some(l));
        }
        assert_eq!(codec.encode(&TemplateId::Standard), None);
    }

    #[test]
    fn unknown_labels_rejected() {
        assert!(LabelCodec::new(vec![TemplateId::Unknown("x".into())]).is_err());
    }
}
