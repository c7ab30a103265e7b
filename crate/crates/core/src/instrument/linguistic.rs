use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Root-to-leaf path of a language in a genealogical classification tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageClassification {
    pub language_name: String,
    pub nodes: Vec<String>,
}

impl LanguageClassification {
    pub fn new(language_name: impl Into<String>, nodes: Vec<String>) -> Result<Self> {
        let c = LanguageClassification {
            language_name: language_name.into(),
            nodes,
        };
        c.validate()?;
        Ok(c)
    }

    /// Parses semicolon-delimited node labels, e.g. `Niger-Congo;Atlantic-Congo;...`.
    pub fn parse(language_name: impl Into<String>, nodes: &str) -> Result<Self> {
        let nodes = nodes
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        Self::new(language_name, nodes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Data(format!(
                "language `{}` has no classification nodes",
                self.language_name
            )));
        }
        if let Some(w) = self.nodes.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Data(format!(
                "language `{}` repeats node `{}` consecutively",
                self.language_name, w[0]
            )));
        }
        Ok(())
    }

    /// Length of the longest common prefix with `other`.
    pub fn shared_nodes(&self, other: &LanguageClassification) -> usize {
        self.nodes
            .iter()
            .zip(&other.nodes)
            .take_while(|(a, b)| a == b)
            .count()
    }

    /// Yoruba reference path (seven nodes).
    pub fn yoruba() -> Self {
        Self::parse(
            "Yoruba",
            "Niger-Congo;Atlantic-Congo;Volta-Congo;Benue-Congo;Defoid;Yoruboid;Edekiri",
        )
        .expect("static classification")
    }

    /// Baatonum path (six nodes, three shared with Yoruba).
    pub fn baatonum() -> Self {
        Self::parse(
            "Baatonum",
            "Niger-Congo;Atlantic-Congo;Volta-Congo;North;Gur;Baatonum",
        )
        .expect("static classification")
    }
}

/// `1 - (shared / mean_length)^lambda`.
pub fn linguistic_distance(
    l1: &LanguageClassification,
    l2: &LanguageClassification,
    lambda: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain {
            what: "lambda",
            value: lambda,
            expected: "[0, 1]",
        });
    }
    l1.validate()?;
    l2.validate()?;
    let shared = l1.shared_nodes(l2) as f64;
    let mean_len = 0.5 * (l1.nodes.len() + l2.nodes.len()) as f64;
    Ok((1.0 - (shared / mean_len).powf(lambda)).clamp(0.0, 1.0))
}
