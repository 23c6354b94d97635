use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Category, CategorySpace, IndicatorConstraint, ScenarioItem};
use crate::{Error, Result, FORMAT_TAG};

/// A category space with its constraints and collected items, as stored in a
/// catalog file.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub space: CategorySpace,
    pub constraints: Vec<IndicatorConstraint>,
    pub items: Vec<ScenarioItem>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    format: String,
    categories: Vec<Category>,
    #[serde(default)]
    constraints: Vec<ConstraintSpec>,
    #[serde(default)]
    items: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintSpec {
    terms: Vec<(String, String, i64)>,
    lower: i64,
    upper: i64,
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: CatalogFile =
            serde_json::from_str(text).map_err(|e| Error::MalformedInput(format!("catalog: {e}")))?;
        if file.format != FORMAT_TAG {
            return Err(Error::MalformedInput(format!(
                "catalog: unsupported format {:?}",
                file.format
            )));
        }
        let space = CategorySpace::new(file.categories)?;
        let constraints = file
            .constraints
            .iter()
            .map(|c| IndicatorConstraint::new(&space, &c.terms, c.lower, c.upper))
            .collect::<Result<Vec<_>>>()?;
        let items = file
            .items
            .iter()
            .map(|names| space.item(names))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            space,
            constraints,
            items,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let cats = self.space.categories();
        let file = CatalogFile {
            format: FORMAT_TAG.into(),
            categories: cats.to_vec(),
            constraints: self
                .constraints
                .iter()
                .map(|c| ConstraintSpec {
                    terms: c
                        .terms()
                        .iter()
                        .map(|t| {
                            let cat = &cats[t.category];
                            (cat.name.clone(), cat.values[t.value].clone(), t.coefficient)
                        })
                        .collect(),
                    lower: c.lower(),
                    upper: c.upper(),
                })
                .collect(),
            items: self
                .items
                .iter()
                .map(|i| self.space.value_names(i).into_iter().map(String::from).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"{"format":"depkit/1",
        "categories":[{"name":"weather","values":["cloudy","rainy","sunny"]},
                      {"name":"day","values":["day","night"]}],
        "constraints":[{"terms":[["weather","sunny",1],["day","night",1]],"lower":0,"upper":1}],
        "items":[["sunny","day"],["rainy","night"]]}"#;

    #[test]
    fn parses_and_round_trips() {
        let c = Catalog::from_json(TEXT).unwrap();
        assert_eq!(c.space.len(), 2);
        assert_eq!(c.items[1], ScenarioItem(vec![1, 1]));
        assert_eq!(c.constraints[0].terms().len(), 2);
        let again = Catalog::from_json(&c.to_json()).unwrap();
        assert_eq!(again.items, c.items);
        assert_eq!(again.constraints, c.constraints);
    }

    #[test]
    fn rejects_unknown_values() {
        let bad = TEXT.replace(r#"["rainy","night"]"#, r#"["foggy","night"]"#);
        assert!(matches!(Catalog::from_json(&bad), Err(Error::InvalidItem(_))));
        let bad = TEXT.replace("depkit/1", "depkit/0");
        assert!(matches!(Catalog::from_json(&bad), Err(Error::MalformedInput(_))));
    }
}
