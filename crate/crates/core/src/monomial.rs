//! Multilinear monomials over a fixed variable universe.

use std::fmt;

pub type VarId = u32;

/// A multilinear monomial: a strictly increasing set of variable ids.
///
/// Ordering is lexicographic on the id sequence, which restricts to a total
/// order on the monomials of any fixed degree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(Vec<VarId>);

impl Monomial {
    /// The empty monomial (degree 0); appears only as an intermediate value.
    pub fn empty() -> Self {
        Monomial(Vec::new())
    }

    pub fn single(v: VarId) -> Self {
        Monomial(vec![v])
    }

    /// Builds from a strictly increasing id sequence.
    pub fn from_sorted(vars: Vec<VarId>) -> Self {
        debug_assert!(vars.windows(2).all(|w| w[0] < w[1]), "monomial ids must be strictly increasing");
        Monomial(vars)
    }

    /// Builds from arbitrary ids; returns None if any id repeats.
    pub fn from_vars(mut vars: Vec<VarId>) -> Option<Self> {
        vars.sort_unstable();
        if vars.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        Some(Monomial(vars))
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn vars(&self) -> &[VarId] {
        &self.0
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    /// Disjoint union; returns None when the operands share a variable.
    pub fn union_disjoint(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => return None,
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Some(Monomial(out))
    }

    /// Restriction to the variables for which `keep` answers true.
    pub fn restrict(&self, keep: impl Fn(VarId) -> bool) -> Monomial {
        Monomial(self.0.iter().copied().filter(|&v| keep(v)).collect())
    }

    /// Removes the variables of `other`; `other` need not be a subset.
    pub fn minus(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().copied().filter(|v| !other.contains(*v)).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|v| format!("x{v}")).collect();
        write!(f, "{}", parts.join("*"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_detects_overlap() {
        let a = Monomial::from_sorted(vec![0, 2]);
        let b = Monomial::from_sorted(vec![1, 3]);
        let c = Monomial::from_sorted(vec![2, 5]);
        assert_eq!(a.union_disjoint(&b).unwrap().vars(), &[0, 1, 2, 3]);
        assert!(a.union_disjoint(&c).is_none());
    }

    #[test]
    fn lexicographic_order() {
        let a = Monomial::from_sorted(vec![0, 5]);
        let b = Monomial::from_sorted(vec![1, 2]);
        assert!(a < b);
    }

    #[test]
    fn restrict_and_minus() {
        let a = Monomial::from_sorted(vec![0, 1, 4, 7]);
        assert_eq!(a.restrict(|v| v >= 2).vars(), &[4, 7]);
        assert_eq!(a.minus(&Monomial::from_sorted(vec![1, 7])).vars(), &[0, 4]);
    }
}
