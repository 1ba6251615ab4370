//! Taxonomy of legal tax codes as an immutable prefix trie.
//!
//! The trie is loaded from a CSV of full (leaf) codes; internal nodes are
//! inferred from shared prefixes. It answers the candidate queries the
//! decoder needs: which segments may legally follow a given prefix, and
//! whether a complete code exists.

mod code;

pub use code::{CodeKind, Level, Segment, SegmentValue, TaxCode};

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("row {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("duplicate code {code} with conflicting descriptions")]
    DuplicateLeaf { code: String },
    #[error("taxonomy contains no codes")]
    EmptyTaxonomy,
    #[error("prefix {prefix:?} is not a path in the taxonomy")]
    UnknownPrefix { prefix: String },
    #[error("expected a {expected} code, got a {found} code")]
    KindMismatch { expected: CodeKind, found: CodeKind },
    #[error("invalid {kind} code {code:?}: {message}")]
    InvalidCode {
        kind: CodeKind,
        code: String,
        message: String,
    },
}

#[derive(Debug, Default)]
struct Node {
    description: Option<String>,
    children: BTreeMap<SegmentValue, Node>,
}

/// Immutable prefix tree whose root-to-leaf paths are exactly the legal codes.
///
/// Child maps are ordered by segment value, so every traversal and candidate
/// list is deterministic. The trie cannot be mutated after construction and
/// is safe to share across threads.
#[derive(Debug)]
pub struct TaxonomyTrie {
    kind: CodeKind,
    root: Node,
    leaf_count: usize,
}

impl TaxonomyTrie {
    /// Builds a trie from full-code digit strings, without descriptions.
    ///
    /// Duplicates are collapsed. Errors on any malformed code or an empty
    /// input.
    pub fn from_codes<I, S>(kind: CodeKind, codes: I) -> Result<Self, TaxonomyError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut trie = Self {
            kind,
            root: Node::default(),
            leaf_count: 0,
        };
        for digits in codes {
            let code = TaxCode::parse(kind, digits.as_ref())?;
            trie.insert(&code, None)?;
        }
        if trie.leaf_count == 0 {
            return Err(TaxonomyError::EmptyTaxonomy);
        }
        Ok(trie)
    }

    /// Loads a taxonomy from CSV with header `kind,code,description`.
    ///
    /// Every row must carry the requested kind and a full digit code;
    /// descriptions may be empty. Re-listing a code is only an error when the
    /// descriptions conflict.
    pub fn load_csv<R: Read>(reader: R, kind: CodeKind) -> Result<Self, TaxonomyError> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let headers = csv_reader
            .headers()
            .map_err(|e| malformed_csv(1, &e))?
            .clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(TaxonomyError::EmptyTaxonomy);
        }
        let expected = ["kind", "code", "description"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(TaxonomyError::MalformedRow {
                line: 1,
                message: format!(
                    "expected header \"kind,code,description\", got {:?}",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }

        let mut trie = Self {
            kind,
            root: Node::default(),
            leaf_count: 0,
        };
        for record in csv_reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or_default();
                malformed_csv(line, &e)
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or_default();
            if record.len() != 3 {
                return Err(TaxonomyError::MalformedRow {
                    line,
                    message: format!("expected 3 fields, got {}", record.len()),
                });
            }
            let row_kind =
                CodeKind::parse(&record[0]).ok_or_else(|| TaxonomyError::MalformedRow {
                    line,
                    message: format!("unknown kind {:?}", &record[0]),
                })?;
            if row_kind != kind {
                return Err(TaxonomyError::MalformedRow {
                    line,
                    message: format!("row kind {row_kind} does not match requested kind {kind}"),
                });
            }
            let code =
                TaxCode::parse(kind, &record[1]).map_err(|e| TaxonomyError::MalformedRow {
                    line,
                    message: e.to_string(),
                })?;
            let description = match &record[2] {
                "" => None,
                text => Some(text.to_string()),
            };
            trie.insert(&code, description)?;
        }
        if trie.leaf_count == 0 {
            return Err(TaxonomyError::EmptyTaxonomy);
        }
        Ok(trie)
    }

    fn insert(&mut self, code: &TaxCode, description: Option<String>) -> Result<(), TaxonomyError> {
        let already_present = {
            let mut node = Some(&self.root);
            for segment in code.segments() {
                node = node.and_then(|n| n.children.get(&segment.value));
            }
            node.is_some()
        };
        let mut node = &mut self.root;
        for segment in code.segments() {
            node = node.children.entry(segment.value).or_default();
        }
        match (&node.description, description) {
            (Some(existing), Some(incoming)) if *existing != incoming => {
                return Err(TaxonomyError::DuplicateLeaf {
                    code: code.digits(),
                });
            }
            (None, incoming @ Some(_)) => node.description = incoming,
            _ => {}
        }
        if !already_present {
            self.leaf_count += 1;
        }
        Ok(())
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    /// Number of distinct full codes in the taxonomy.
    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    /// Legal next segments after `prefix`, ascending by value.
    ///
    /// An empty prefix yields the chapters; a full-code prefix yields an
    /// empty list. Errors if `prefix` is not a path in the trie.
    pub fn valid_candidates(&self, prefix: &[Segment]) -> Result<Vec<Segment>, TaxonomyError> {
        let node = self.node_at(prefix)?;
        let next_level = self.kind.levels().get(prefix.len()).copied();
        Ok(match next_level {
            Some(level) => node
                .children
                .keys()
                .map(|&value| Segment::new(level, value))
                .collect(),
            None => Vec::new(),
        })
    }

    /// Whether `code` is a root-to-leaf path of this taxonomy.
    pub fn contains(&self, code: &TaxCode) -> Result<bool, TaxonomyError> {
        if code.kind() != self.kind {
            return Err(TaxonomyError::KindMismatch {
                expected: self.kind,
                found: code.kind(),
            });
        }
        let mut node = &self.root;
        for segment in code.segments() {
            match node.children.get(&segment.value) {
                Some(child) => node = child,
                None => return Ok(false),
            }
        }
        Ok(true)
    }

    /// Description attached to a full code, if any.
    pub fn description(&self, code: &TaxCode) -> Option<&str> {
        if code.kind() != self.kind {
            return None;
        }
        let mut node = &self.root;
        for segment in code.segments() {
            node = node.children.get(&segment.value)?;
        }
        node.description.as_deref()
    }

    /// All full codes, in ascending digit order.
    pub fn leaves(&self) -> Vec<TaxCode> {
        let mut out = Vec::with_capacity(self.leaf_count);
        let mut path = Vec::with_capacity(self.kind.depth());
        self.collect_leaves(&self.root, &mut path, &mut out);
        out
    }

    fn collect_leaves(&self, node: &Node, path: &mut Vec<SegmentValue>, out: &mut Vec<TaxCode>) {
        if node.children.is_empty() && !path.is_empty() {
            out.push(TaxCode::new(self.kind, path.clone()).expect("leaf depth matches kind"));
            return;
        }
        for (&value, child) in &node.children {
            path.push(value);
            self.collect_leaves(child, path, out);
            path.pop();
        }
    }

    /// Distinct segment values occurring at each level, indexed by level order.
    pub fn values_by_level(&self) -> Vec<BTreeSet<SegmentValue>> {
        let mut sets = vec![BTreeSet::new(); self.kind.depth()];
        fn walk(node: &Node, depth: usize, sets: &mut [BTreeSet<SegmentValue>]) {
            for (&value, child) in &node.children {
                sets[depth].insert(value);
                walk(child, depth + 1, sets);
            }
        }
        walk(&self.root, 0, &mut sets);
        sets
    }

    fn node_at(&self, prefix: &[Segment]) -> Result<&Node, TaxonomyError> {
        let unknown = || TaxonomyError::UnknownPrefix {
            prefix: prefix.iter().map(|s| s.value.to_string()).collect(),
        };
        if prefix.len() > self.kind.depth() {
            return Err(unknown());
        }
        let mut node = &self.root;
        for (segment, &level) in prefix.iter().zip(self.kind.levels()) {
            if segment.level != level {
                return Err(unknown());
            }
            node = node.children.get(&segment.value).ok_or_else(unknown)?;
        }
        Ok(node)
    }
}

fn malformed_csv(line: u64, err: &dyn std::fmt::Display) -> TaxonomyError {
    TaxonomyError::MalformedRow {
        line,
        message: err.to_string(),
    }
}
