//! The universal input: a dense matrix of features or logits with optional
//! ground-truth labels.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContainerKind {
    Features,
    Logits,
}

/// `n` rows of width `d` over `c` classes. A label of `None` marks an
/// unlabeled instance (written as `-1` on disk).
#[derive(Debug, Clone, PartialEq)]
pub struct DataContainer {
    kind: ContainerKind,
    n: usize,
    d: usize,
    c: usize,
    rows: Vec<f64>,
    labels: Vec<Option<usize>>,
    class_names: Option<Vec<String>>,
}

impl DataContainer {
    /// Builds a container, checking every invariant. An empty `labels`
    /// vector means the whole container is unlabeled.
    pub fn new(
        kind: ContainerKind,
        d: usize,
        c: usize,
        rows: Vec<f64>,
        labels: Vec<Option<usize>>,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if d == 0 || c == 0 {
            return Err(Error::shape("row width and class count must be positive"));
        }
        if !rows.len().is_multiple_of(d) {
            return Err(Error::shape(format!(
                "{} values do not divide into rows of width {d}",
                rows.len()
            )));
        }
        let n = rows.len() / d;
        if kind == ContainerKind::Logits && d != c {
            return Err(Error::shape(format!("logits container needs d == c, got d={d} c={c}")));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("container rows"));
        }
        let labels = if labels.is_empty() {
            alloc::vec![None; n]
        } else {
            labels
        };
        if labels.len() != n {
            return Err(Error::shape(format!("{} labels for {n} rows", labels.len())));
        }
        if let Some(&label) = labels.iter().flatten().find(|&&l| l >= c) {
            return Err(Error::LabelOutOfRange { label, classes: c });
        }
        if let Some(names) = &class_names {
            if names.len() != c {
                return Err(Error::shape(format!("{} class names for {c} classes", names.len())));
            }
        }
        Ok(Self {
            kind,
            n,
            d,
            c,
            rows,
            labels,
            class_names,
        })
    }

    pub fn kind(&self) -> ContainerKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn classes(&self) -> usize {
        self.c
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn has_labels(&self) -> bool {
        self.labels.iter().any(Option::is_some)
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.labels[i].is_some()).collect()
    }

    pub fn unlabeled_indices(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.labels[i].is_none()).collect()
    }

    /// Instance indices grouped by ground-truth class, ascending within a class.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = alloc::vec![Vec::new(); self.c];
        for (i, label) in self.labels.iter().enumerate() {
            if let Some(l) = label {
                groups[*l].push(i);
            }
        }
        groups
    }

    /// Copies the given rows (in the given order) into a new container.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut rows = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            rows.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            kind: self.kind,
            n: indices.len(),
            d: self.d,
            c: self.c,
            rows,
            labels,
            class_names: self.class_names.clone(),
        }
    }

    /// Same rows with every label replaced by the unlabeled sentinel.
    pub fn masked(&self) -> Self {
        let mut out = self.clone();
        out.labels.iter_mut().for_each(|l| *l = None);
        out
    }

    /// Replaces the label vector; validated like [`DataContainer::new`].
    pub fn with_labels(&self, labels: Vec<Option<usize>>) -> Result<Self> {
        Self::new(
            self.kind,
            self.d,
            self.c,
            self.rows.clone(),
            labels,
            self.class_names.clone(),
        )
    }
}
