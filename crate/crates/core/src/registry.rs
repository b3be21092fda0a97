//! Name-keyed registries of interchangeable strategies.
//!
//! Every family of algorithms in the crate (operator paths, energy densities,
//! test functions) sits behind a trait object. A [`Registry`] maps a stable
//! name to a factory that builds the trait object from JSON parameters, so the
//! CLI and config files can select strategies at runtime.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::Value;

use crate::error::{Error, Result};

/// Builds a boxed strategy from its JSON parameters and a construction context.
pub type Factory<T, C> = fn(&Value, &C) -> Result<Box<T>>;

pub struct Registry<T: ?Sized, C = ()> {
    kind: &'static str,
    factories: BTreeMap<&'static str, Factory<T, C>>,
}

impl<T: ?Sized, C> Registry<T, C> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            factories: BTreeMap::new(),
        }
    }

    /// Adds (or replaces) a factory under `name`.
    pub fn register(&mut self, name: &'static str, factory: Factory<T, C>) -> &mut Self {
        self.factories.insert(name, factory);
        self
    }

    pub fn with(mut self, name: &'static str, factory: Factory<T, C>) -> Self {
        self.register(name, factory);
        self
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, name: &str, params: &Value, ctx: &C) -> Result<Box<T>> {
        match self.factories.get(name) {
            Some(factory) => factory(params, ctx),
            None => Err(Error::Unknown {
                kind: self.kind,
                name: name.to_string(),
                known: self.names().join(", "),
            }),
        }
    }

    /// Creates a strategy from a JSON object whose `key` field holds the name;
    /// the whole object is passed on as parameters.
    pub fn create_from_spec(&self, key: &str, spec: &Value, ctx: &C) -> Result<Box<T>> {
        let name = spec
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| Error::param(format!("{} spec needs a string `{key}` field", self.kind)))?;
        self.create(name, spec, ctx)
    }
}

impl<T: ?Sized, C> fmt::Debug for Registry<T, C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.names())
            .finish()
    }
}

/// Deserializes strategy parameters, turning serde errors into parameter errors.
pub(crate) fn parse_params<P: serde::de::DeserializeOwned>(kind: &str, params: &Value) -> Result<P> {
    serde_json::from_value(params.clone()).map_err(|e| Error::param(format!("{kind}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter {
        fn greet(&self) -> String;
    }

    struct Plain(String);

    impl Greeter for Plain {
        fn greet(&self) -> String {
            self.0.clone()
        }
    }

    fn plain(params: &Value, _: &()) -> Result<Box<dyn Greeter>> {
        let word = params.get("word").and_then(Value::as_str).unwrap_or("hi");
        Ok(Box::new(Plain(word.to_string())))
    }

    #[test]
    fn creates_by_name_and_reports_unknown() {
        let reg: Registry<dyn Greeter> = Registry::new("greeter").with("plain", plain);
        let g = reg.create("plain", &serde_json::json!({"word": "hello"}), &()).unwrap();
        assert_eq!(g.greet(), "hello");
        let err = reg.create("fancy", &Value::Null, &()).err().unwrap();
        assert!(err.to_string().contains("registered: plain"));
    }

    #[test]
    fn spec_objects_carry_their_name() {
        let reg: Registry<dyn Greeter> = Registry::new("greeter").with("plain", plain);
        let spec = serde_json::json!({"name": "plain", "word": "yo"});
        assert_eq!(reg.create_from_spec("name", &spec, &()).unwrap().greet(), "yo");
        assert!(reg.create_from_spec("name", &serde_json::json!({}), &()).is_err());
    }
}
