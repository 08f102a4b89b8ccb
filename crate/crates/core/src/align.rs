//! Unit-cost edit alignment with a deterministic traceback.
//!
//! Shared by word-level pivot alignment of N-best lists and letter-level
//! alignment of confusion pairs. The traceback walks from the bottom-right
//! cell towards the origin and, whenever several predecessors achieve the
//! optimum, prefers match, then substitution, then deletion of a source
//! element, then insertion of a target element.

/// One column of an alignment between a source and a target sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditOp {
    /// `source[i] == target[j]`
    Match { src: usize, tgt: usize },
    /// `source[i]` rewritten as `target[j]`
    Substitute { src: usize, tgt: usize },
    /// `source[i]` has no counterpart in the target
    Delete { src: usize },
    /// `target[j]` has no counterpart in the source
    Insert { tgt: usize },
}

impl EditOp {
    pub fn cost(&self) -> usize {
        match self {
            EditOp::Match { .. } => 0,
            _ => 1,
        }
    }
}

/// Tables up to this many cells live on the stack.
const STACK_CELLS: usize = 256;

/// Fills the row-major (n+1)×(m+1) table of prefix distances.
fn fill_table<T: PartialEq>(source: &[T], target: &[T], d: &mut [u32]) {
    let cols = target.len() + 1;
    for (j, cell) in d[..cols].iter_mut().enumerate() {
        *cell = j as u32;
    }
    for (i, s) in source.iter().enumerate() {
        let (prev, row) = d[i * cols..(i + 2) * cols].split_at_mut(cols);
        row[0] = i as u32 + 1;
        for (j, t) in target.iter().enumerate() {
            let diag = prev[j] + u32::from(s != t);
            let up = prev[j + 1] + 1;
            let left = row[j] + 1;
            row[j + 1] = diag.min(up).min(left);
        }
    }
}

fn with_table<T: PartialEq, R>(source: &[T], target: &[T], f: impl FnOnce(&[u32]) -> R) -> R {
    let cells = (source.len() + 1) * (target.len() + 1);
    if cells <= STACK_CELLS {
        let mut buf = [0u32; STACK_CELLS];
        fill_table(source, target, &mut buf[..cells]);
        f(&buf[..cells])
    } else {
        let mut buf = vec![0u32; cells];
        fill_table(source, target, &mut buf);
        f(&buf)
    }
}

/// Levenshtein distance with unit costs.
pub fn edit_distance<T: PartialEq>(source: &[T], target: &[T]) -> usize {
    with_table(source, target, |d| d[d.len() - 1] as usize)
}

/// Minimal-cost alignment of `source` against `target`, returned left to right.
pub fn edit_script<T: PartialEq>(source: &[T], target: &[T]) -> Vec<EditOp> {
    let mut ops = Vec::with_capacity(source.len().max(target.len()));
    edit_script_rev(source, target, |op| ops.push(op));
    ops.reverse();
    ops
}

/// Emits the alignment of [`edit_script`] right to left.
pub(crate) fn edit_script_rev<T: PartialEq>(source: &[T], target: &[T], mut emit: impl FnMut(EditOp)) {
    with_table(source, target, |d| {
        let cols = target.len() + 1;
        let at = |i: usize, j: usize| d[i * cols + j];
        let (mut i, mut j) = (source.len(), target.len());
        while i > 0 || j > 0 {
            let here = at(i, j);
            if i > 0 && j > 0 {
                let same = source[i - 1] == target[j - 1];
                if same && here == at(i - 1, j - 1) {
                    emit(EditOp::Match { src: i - 1, tgt: j - 1 });
                    i -= 1;
                    j -= 1;
                    continue;
                }
                if !same && here == at(i - 1, j - 1) + 1 {
                    emit(EditOp::Substitute { src: i - 1, tgt: j - 1 });
                    i -= 1;
                    j -= 1;
                    continue;
                }
            }
            if i > 0 && here == at(i - 1, j) + 1 {
                emit(EditOp::Delete { src: i - 1 });
                i -= 1;
            } else {
                debug_assert!(j > 0 && here == at(i, j - 1) + 1);
                emit(EditOp::Insert { tgt: j - 1 });
                j -= 1;
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn script_cost_matches_distance() {
        for (a, b) in [("kitten", "sitting"), ("", "abc"), ("abc", ""), ("flaw", "lawn")] {
            let (a, b) = (chars(a), chars(b));
            let cost: usize = edit_script(&a, &b).iter().map(EditOp::cost).sum();
            assert_eq!(cost, edit_distance(&a, &b));
        }
    }

    #[test]
    fn prefers_deletion_over_insertion_on_ties() {
        // "ab" -> "ba": several optimal scripts of cost 2 exist.
        let ops = edit_script(&chars("ab"), &chars("ba"));
        assert_eq!(
            ops,
            vec![
                EditOp::Substitute { src: 0, tgt: 0 },
                EditOp::Substitute { src: 1, tgt: 1 }
            ]
        );
        let ops = edit_script(&chars("ab"), &chars("b"));
        assert_eq!(ops, vec![EditOp::Delete { src: 0 }, EditOp::Match { src: 1, tgt: 0 }]);
    }

    #[test]
    fn large_tables_agree_with_small_ones() {
        let a: Vec<u8> = (0..40).map(|i| b"abc"[i % 3]).collect();
        let b: Vec<u8> = (0..37).map(|i| b"abcd"[i % 4]).collect();
        let cost: usize = edit_script(&a, &b).iter().map(EditOp::cost).sum();
        assert_eq!(cost, edit_distance(&a, &b));
    }

    #[test]
    fn empty_inputs() {
        assert!(edit_script::<char>(&[], &[]).is_empty());
        assert_eq!(edit_script(&[], &['x']), vec![EditOp::Insert { tgt: 0 }]);
    }
}
