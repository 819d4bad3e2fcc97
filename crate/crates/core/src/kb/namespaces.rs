use serde::{Deserialize, Serialize};

use super::KbEntry;

/// Default namespace allowlist for school-level formalization.
pub const DEFAULT_ALLOWLIST: [&str; 34] = [
    "Nat", "Int", "Rat", "Real", "Complex", "ENat", "NNReal", "EReal", "Monoid", "CommMonoid", "Group", "CommGroup",
    "Ring", "CommRing", "Field", "Algebra", "Module", "Set", "Finset", "Fintype", "Multiset", "List", "Fin",
    "BigOperators", "Filter", "Polynomial", "Order", "SimpleGraph", "Equiv", "Embedding", "Injective", "Surjective",
    "Bijective", "Topology",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamespaceMatch {
    /// The first component of the entry's namespace must be listed.
    #[default]
    FirstComponent,
    /// Some listed (possibly dotted) name must be a component-wise prefix of
    /// the namespace.
    AnyPrefix,
}

pub fn default_allowlist() -> Vec<String> {
    DEFAULT_ALLOWLIST.iter().map(|s| s.to_string()).collect()
}

pub fn namespace_allowed(namespace: &str, allowlist: &[String], mode: NamespaceMatch) -> bool {
    match mode {
        NamespaceMatch::FirstComponent => {
            let first = namespace.split('.').next().unwrap_or("");
            !first.is_empty() && allowlist.iter().any(|a| a == first)
        }
        NamespaceMatch::AnyPrefix => allowlist.iter().any(|a| {
            !a.is_empty() && (namespace == a || namespace.strip_prefix(a.as_str()).is_some_and(|r| r.starts_with('.')))
        }),
    }
}

/// Entries whose namespace passes the allowlist, in input order.
pub fn filter_namespaces(entries: &[KbEntry], allowlist: &[String], mode: NamespaceMatch) -> Vec<KbEntry> {
    entries
        .iter()
        .filter(|e| namespace_allowed(&e.namespace, allowlist, mode))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_component() {
        let allow = default_allowlist();
        let m = NamespaceMatch::FirstComponent;
        assert!(namespace_allowed("Nat", &allow, m));
        assert!(namespace_allowed("Finset.Nat", &allow, m));
        assert!(!namespace_allowed("CategoryTheory.Functor", &allow, m));
        assert!(!namespace_allowed("", &allow, m));
        assert!(!namespace_allowed("Natural", &allow, m));
    }

    #[test]
    fn dotted_prefixes() {
        let allow = vec!["MeasureTheory.Measure".to_string()];
        let m = NamespaceMatch::AnyPrefix;
        assert!(namespace_allowed("MeasureTheory.Measure.Lebesgue", &allow, m));
        assert!(!namespace_allowed("MeasureTheory.MeasureSpace", &allow, m));
        assert!(!namespace_allowed("MeasureTheory", &allow, m));
    }
}
