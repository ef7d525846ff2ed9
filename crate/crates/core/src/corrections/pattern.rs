//! Index-pair patterns `I_k = {(i_1, j_1), …, (i_k, j_k)}`.
//!
//! A pattern names `2k` indices. Later indices may be identified with earlier
//! ones of the same kind (`i2=i1`), and same-kind indices may be required to
//! take different values (`j2!=j1`). Compact text form:
//!
//! ```text
//! k=2; i2=i1; j2!=j1; s=1,1
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    I,
    J,
}

impl Side {
    fn letter(self) -> char {
        match self {
            Side::I => 'i',
            Side::J => 'j',
        }
    }
}

/// Constraint between two same-kind indices, pairs numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub side: Side,
    pub later: usize,
    pub earlier: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexPattern {
    k: usize,
    merges: Vec<Link>,
    exclusions: Vec<Link>,
    s: Vec<u32>,
    #[serde(skip)]
    classes: Classes,
}

/// Resolved index classes: every `i_l` / `j_l` mapped to a class id in
/// `0..count`. I-classes come first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Classes {
    pub i_class: Vec<usize>,
    pub j_class: Vec<usize>,
    pub count: usize,
}

impl IndexPattern {
    /// Validates and builds a pattern. Every rejection names the violated rule.
    pub fn new(k: usize, merges: Vec<Link>, exclusions: Vec<Link>, s: Vec<u32>) -> Result<Self> {
        let mut pattern = Self {
            k,
            merges,
            exclusions,
            s,
            classes: Classes::default(),
        };
        pattern.classes = pattern.validate()?;
        Ok(pattern)
    }

    /// Pattern without identifications or exclusions.
    pub fn free(s: Vec<u32>) -> Result<Self> {
        Self::new(s.len(), Vec::new(), Vec::new(), s)
    }

    fn reject(&self, rule: impl Into<String>) -> Error {
        Error::InvalidPattern {
            pattern: self.to_string(),
            rule: rule.into(),
        }
    }

    fn validate(&self) -> Result<Classes> {
        let k = self.k;
        if k == 0 {
            return Err(self.reject("k must be at least 1"));
        }
        if self.s.len() != k {
            return Err(self.reject(format!("s must list exactly k = {k} exponents")));
        }
        if let Some(bad) = self.s.iter().find(|&&s| s == 0 || s % 2 == 0) {
            return Err(self.reject(format!("exponent s = {bad} is not a positive odd integer")));
        }
        let total: u32 = self.s.iter().sum::<u32>() + k as u32;
        if !total.is_multiple_of(2) {
            return Err(self.reject("s_1 + … + s_k + k must be even"));
        }

        let mut i_parent: Vec<usize> = (0..k).collect();
        let mut j_parent: Vec<usize> = (0..k).collect();
        let mut merged_i = vec![false; k];
        let mut merged_j = vec![false; k];
        let mut merges = self.merges.clone();
        merges.sort_by_key(|m| m.later);
        for m in &merges {
            if m.later > k || m.earlier == 0 {
                return Err(self.reject(format!(
                    "index {}{} is out of range 1..={k}",
                    m.side.letter(),
                    m.later.max(m.earlier)
                )));
            }
            if m.earlier >= m.later {
                return Err(self.reject(format!(
                    "{}{}={}{}: an index may only be identified with an earlier one (l' < l)",
                    m.side.letter(),
                    m.later,
                    m.side.letter(),
                    m.earlier
                )));
            }
            let (parent, merged) = match m.side {
                Side::I => (&mut i_parent, &mut merged_i),
                Side::J => (&mut j_parent, &mut merged_j),
            };
            if merged[m.later - 1] {
                return Err(self.reject(format!(
                    "{}{} is identified more than once",
                    m.side.letter(),
                    m.later
                )));
            }
            merged[m.later - 1] = true;
            parent[m.later - 1] = parent[m.earlier - 1];
        }

        // Third index-set rule: two pairs never share both their i and j class.
        for l in 1..k {
            for r in 0..l {
                if i_parent[l] == i_parent[r] && j_parent[l] == j_parent[r] {
                    return Err(self.reject(format!(
                        "pair {} repeats pair {}: when i{} is identified with an earlier i, \
                         j{} must differ from every j sharing that i (and vice versa)",
                        l + 1,
                        r + 1,
                        l + 1,
                        l + 1
                    )));
                }
            }
        }

        for e in &self.exclusions {
            if e.later > k || e.earlier > k || e.later == 0 || e.earlier == 0 {
                return Err(self.reject("excluded index out of range"));
            }
            let parent = match e.side {
                Side::I => &i_parent,
                Side::J => &j_parent,
            };
            if parent[e.later - 1] == parent[e.earlier - 1] {
                return Err(self.reject(format!(
                    "{0}{1}!={0}{2} excludes two indices that are identified",
                    e.side.letter(),
                    e.later,
                    e.earlier
                )));
            }
        }

        let remap = |parent: &[usize], offset: usize| -> (Vec<usize>, usize) {
            let mut roots: Vec<usize> = parent.to_vec();
            roots.sort_unstable();
            roots.dedup();
            let ids = parent
                .iter()
                .map(|p| offset + roots.binary_search(p).unwrap())
                .collect();
            (ids, roots.len())
        };
        let (i_class, n_i) = remap(&i_parent, 0);
        let (j_class, n_j) = remap(&j_parent, n_i);
        Ok(Classes {
            i_class,
            j_class,
            count: n_i + n_j,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn s(&self) -> &[u32] {
        &self.s
    }

    pub fn merges(&self) -> &[Link] {
        &self.merges
    }

    pub fn exclusions(&self) -> &[Link] {
        &self.exclusions
    }

    pub fn classes(&self) -> &Classes {
        &self.classes
    }

    /// Order `n = (s_1 + … + s_k + k) / 2` of the term.
    pub fn order(&self) -> usize {
        (self.s.iter().sum::<u32>() as usize + self.k) / 2
    }

    /// Number of distinct index names.
    pub fn distinct_indices(&self) -> usize {
        self.classes.count
    }

    /// Number of pairs sharing no index with any earlier pair; the term is
    /// normalised by `N^θ`.
    pub fn theta(&self) -> usize {
        let c = &self.classes;
        (0..self.k)
            .filter(|&l| {
                (0..l).all(|r| c.i_class[l] != c.i_class[r] && c.j_class[l] != c.j_class[r])
            })
            .count()
    }
}

impl fmt::Display for IndexPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k={}", self.k)?;
        for m in &self.merges {
            let c = m.side.letter();
            write!(f, "; {c}{}={c}{}", m.later, m.earlier)?;
        }
        for e in &self.exclusions {
            let c = e.side.letter();
            write!(f, "; {c}{}!={c}{}", e.later, e.earlier)?;
        }
        let s: Vec<String> = self.s.iter().map(|s| s.to_string()).collect();
        write!(f, "; s={}", s.join(","))
    }
}

fn parse_index(token: &str) -> Option<(Side, usize)> {
    let token = token.trim();
    let mut chars = token.chars();
    let side = match chars.next()? {
        'i' => Side::I,
        'j' => Side::J,
        _ => return None,
    };
    let idx = chars.as_str().parse().ok()?;
    Some((side, idx))
}

impl FromStr for IndexPattern {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |rule: String| Error::InvalidPattern {
            pattern: text.to_string(),
            rule,
        };
        let mut k = None;
        let mut s = None;
        let mut merges = Vec::new();
        let mut exclusions = Vec::new();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (lhs, rhs, exclusion) = if let Some((a, b)) = part.split_once("!=") {
                (a.trim(), b.trim(), true)
            } else if let Some((a, b)) = part.split_once('=') {
                (a.trim(), b.trim(), false)
            } else {
                return Err(bad(format!("cannot parse `{part}`")));
            };
            match (lhs, exclusion) {
                ("k", false) => {
                    k = Some(rhs.parse::<usize>().map_err(|_| bad(format!("bad k `{rhs}`")))?)
                }
                ("s", false) => {
                    let parsed: std::result::Result<Vec<u32>, _> =
                        rhs.split(',').map(|x| x.trim().parse::<u32>()).collect();
                    s = Some(parsed.map_err(|_| bad(format!("bad exponent list `{rhs}`")))?);
                }
                _ => {
                    let (a_side, a) =
                        parse_index(lhs).ok_or_else(|| bad(format!("bad index `{lhs}`")))?;
                    let (b_side, b) =
                        parse_index(rhs).ok_or_else(|| bad(format!("bad index `{rhs}`")))?;
                    if a_side != b_side {
                        return Err(bad(format!(
                            "`{part}`: i-indices and j-indices are always distinct"
                        )));
                    }
                    let link = Link {
                        side: a_side,
                        later: a.max(b),
                        earlier: a.min(b),
                    };
                    if exclusion {
                        exclusions.push(link);
                    } else {
                        if a < b {
                            return Err(bad(format!(
                                "`{part}`: an index may only be identified with an earlier one (l' < l)"
                            )));
                        }
                        merges.push(link);
                    }
                }
            }
        }
        let k = k.ok_or_else(|| bad("missing `k=`".into()))?;
        let s = s.ok_or_else(|| bad("missing `s=`".into()))?;
        IndexPattern::new(k, merges, exclusions, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> IndexPattern {
        text.parse().unwrap()
    }

    #[test]
    fn derived_quantities() {
        let z1 = p("k=1; s=1");
        assert_eq!((z1.order(), z1.distinct_indices(), z1.theta()), (1, 2, 1));
        let row = p("k=2; i2=i1; j2!=j1; s=1,1");
        assert_eq!((row.order(), row.distinct_indices(), row.theta()), (2, 3, 1));
        let free = p("k=2; s=1,1");
        assert_eq!((free.order(), free.distinct_indices(), free.theta()), (2, 4, 2));
        let three = p("k=3; i2=i1; j3=j1; s=1,1,1");
        assert_eq!((three.order(), three.distinct_indices(), three.theta()), (3, 4, 1));
    }

    #[test]
    fn display_round_trips() {
        for text in ["k=1; s=3", "k=2; i2=i1; j2!=j1; s=1,1", "k=3; j2=j1; i3=i1; s=1,1,3"] {
            let pattern = p(text);
            assert_eq!(pattern.to_string().parse::<IndexPattern>().unwrap(), pattern);
        }
    }

    #[test]
    fn rejections_name_the_rule() {
        let cases = [
            ("k=2; i2=j1; s=1,1", "always distinct"),
            ("k=2; i1=i2; s=1,1", "earlier"),
            ("k=2; i2=i1; j2=j1; s=1,1", "repeats pair"),
            ("k=1; s=2", "positive odd"),
            ("k=2; s=1", "exactly k"),
            ("k=2; i2=i1; i2!=i1; s=1,1", "identified"),
            ("k=3; i3=i1; i3=i2; s=1,1,1", "more than once"),
            ("k=2; i3=i1; s=1,1", "out of range"),
        ];
        for (text, needle) in cases {
            match text.parse::<IndexPattern>() {
                Err(Error::InvalidPattern { rule, .. }) => {
                    assert!(rule.contains(needle), "{text}: {rule}")
                }
                other => panic!("{text}: expected rejection, got {other:?}"),
            }
        }
    }

    #[test]
    fn third_rule_allows_distinct_j_under_shared_i() {
        assert!("k=3; i2=i1; i3=i1; s=1,1,1".parse::<IndexPattern>().is_ok());
        assert!("k=3; i2=i1; i3=i1; j3=j2; s=1,1,1".parse::<IndexPattern>().is_err());
    }
}
