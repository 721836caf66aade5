//! Exhaustive reference for simple tree matching on small trees.
//!
//! Enumerates every node mapping between two trees that is one-to-one,
//! label-compatible, top-down (a mapped non-root node has its parent
//! mapped to the parent of its image, and roots map only to roots) and
//! order-preserving (document order agrees on both sides), and returns
//! the size of the largest one. It shares nothing with the dynamic
//! program apart from the label predicate.

use crate::dom::DomNode;
use crate::error::{Error, Result};
use crate::label::{labels_match, MatchOptions};

/// Largest tree size the oracle accepts.
pub const ORACLE_LIMIT: usize = 16;

pub fn oracle_max_mapping(a: DomNode<'_>, b: DomNode<'_>, opts: &MatchOptions) -> Result<u64> {
    for n in [a.node_count(), b.node_count()] {
        if n > ORACLE_LIMIT {
            return Err(Error::OracleTooLarge {
                limit: ORACLE_LIMIT,
                got: n,
            });
        }
    }
    let xs: Vec<DomNode<'_>> = a.descendants().collect();
    let ys: Vec<DomNode<'_>> = b.descendants().collect();
    let parent_pos = |nodes: &[DomNode<'_>], i: usize| -> Option<usize> {
        let p = nodes[i].parent()?;
        nodes.iter().position(|&n| n == p)
    };
    let px: Vec<Option<usize>> = (0..xs.len()).map(|i| parent_pos(&xs, i)).collect();
    let py: Vec<Option<usize>> = (0..ys.len()).map(|j| parent_pos(&ys, j)).collect();
    // roots of the compared subtrees have no in-range parent
    let px: Vec<Option<usize>> = px.into_iter().enumerate().map(|(i, p)| if i == 0 { None } else { p }).collect();
    let py: Vec<Option<usize>> = py.into_iter().enumerate().map(|(j, p)| if j == 0 { None } else { p }).collect();
    let compatible: Vec<Vec<bool>> = xs
        .iter()
        .map(|x| ys.iter().map(|y| labels_match(x.label(), y.label(), opts)).collect())
        .collect();

    let search = Search {
        px: &px,
        py: &py,
        compatible: &compatible,
    };
    let mut assignment = vec![None; xs.len()];
    let mut best = 0;
    search.run(0, &mut assignment, 0, &mut best);
    Ok(best as u64)
}

struct Search<'s> {
    px: &'s [Option<usize>],
    py: &'s [Option<usize>],
    compatible: &'s [Vec<bool>],
}

impl Search<'_> {
    fn allowed(&self, k: usize, y: usize, assignment: &[Option<usize>]) -> bool {
        if !self.compatible[k][y] {
            return false;
        }
        let parent_ok = match (self.px[k], self.py[y]) {
            (None, None) => true,
            (Some(p), Some(q)) => assignment[p] == Some(q),
            _ => false,
        };
        if !parent_ok {
            return false;
        }
        // injective and order-preserving w.r.t. all earlier mapped nodes
        assignment[..k].iter().flatten().all(|&prev| prev < y)
    }

    fn run(&self, k: usize, assignment: &mut Vec<Option<usize>>, size: usize, best: &mut usize) {
        if k == assignment.len() {
            *best = (*best).max(size);
            return;
        }
        let remaining = assignment.len() - k;
        if size + remaining <= *best {
            return;
        }
        for y in 0..self.compatible[k].len() {
            if self.allowed(k, y, assignment) {
                assignment[k] = Some(y);
                self.run(k + 1, assignment, size + 1, best);
                assignment[k] = None;
            }
        }
        self.run(k + 1, assignment, size, best);
    }
}
