//! Line-oriented hierarchy format:
//!
//! ```text
//! hierarchy levels 3 lambda 1 strict false incomplete false
//! level 1 nodes 6 edges 7
//! 0 1
//! ...
//! level 2 nodes 2 edges 1
//! 0: 0 1 2
//! 1: 3 4 5
//! 0 1
//! ```
//!
//! Above the first level, `id: members` lines list the lower-level nodes of
//! each cluster, followed by the super-edge list.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Topology;

use super::{Hierarchy, Partition, SuperEdgeRule};

pub fn write_hierarchy(h: &Hierarchy) -> String {
    let mut out = String::new();
    let rule = h.rule();
    let _ = writeln!(
        out,
        "hierarchy levels {} lambda {} strict {} incomplete {}",
        h.num_levels(),
        rule.lambda,
        rule.strict,
        h.incomplete()
    );
    for (k, level) in h.levels().iter().enumerate() {
        let _ = writeln!(
            out,
            "level {} nodes {} edges {}",
            k + 1,
            level.num_nodes(),
            level.num_edges()
        );
        if k > 0 {
            for (c, members) in h.parent(k - 1).members().iter().enumerate() {
                let _ = write!(out, "{c}:");
                for m in members {
                    let _ = write!(out, " {m}");
                }
                out.push('\n');
            }
        }
        for &(u, v) in level.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
    }
    out
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    source: &'a Path,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        match self.iter.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.source.to_path_buf(),
            line: self.line,
            msg: msg.into(),
        }
    }

    /// Parses `key value key value ...` after an expected leading word.
    fn header(&mut self, lead: &str, keys: &[&str]) -> Result<Vec<&'a str>> {
        let line = self.next()?;
        let mut words = line.split_whitespace();
        if words.next() != Some(lead) {
            return Err(self.err(format!("expected `{lead}` header")));
        }
        let mut vals = Vec::new();
        if lead == "level" {
            vals.push(
                words
                    .next()
                    .ok_or_else(|| self.err("missing level number"))?,
            );
        }
        for &k in keys {
            if words.next() != Some(k) {
                return Err(self.err(format!("expected `{k}`")));
            }
            vals.push(
                words
                    .next()
                    .ok_or_else(|| self.err(format!("missing `{k}` value")))?,
            );
        }
        if words.next().is_some() {
            return Err(self.err("trailing fields"));
        }
        Ok(vals)
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("bad value {s:?}")))
    }
}

/// Inverse of [`write_hierarchy`]. `source` is only used in error messages.
pub fn parse_hierarchy(text: &str, source: &Path) -> Result<Hierarchy> {
    let mut lines = Lines {
        iter: text.lines().enumerate(),
        source,
        line: 0,
    };
    let head = lines.header("hierarchy", &["levels", "lambda", "strict", "incomplete"])?;
    let num_levels: usize = lines.num(head[0])?;
    let rule = SuperEdgeRule {
        lambda: lines.num(head[1])?,
        strict: lines.num(head[2])?,
    };
    let incomplete: bool = lines.num(head[3])?;
    if num_levels == 0 {
        return Err(lines.err("hierarchy needs at least one level"));
    }

    let mut levels: Vec<Topology> = Vec::with_capacity(num_levels);
    let mut parents = Vec::with_capacity(num_levels - 1);
    for k in 0..num_levels {
        let h = lines.header("level", &["nodes", "edges"])?;
        if lines.num::<usize>(h[0])? != k + 1 {
            return Err(lines.err(format!("expected level {}", k + 1)));
        }
        let nodes: usize = lines.num(h[1])?;
        let num_edges: usize = lines.num(h[2])?;
        if k > 0 {
            let lower = levels[k - 1].num_nodes();
            let mut assignment = vec![usize::MAX; lower];
            for c in 0..nodes {
                let line = lines.next()?;
                let (id, rest) = line
                    .split_once(':')
                    .ok_or_else(|| lines.err("expected `id: members`"))?;
                if lines.num::<usize>(id.trim())? != c {
                    return Err(lines.err(format!("expected cluster {c}")));
                }
                for m in rest.split_whitespace() {
                    let m: usize = lines.num(m)?;
                    if m >= lower || assignment[m] != usize::MAX {
                        return Err(lines.err(format!("member {m} out of range or repeated")));
                    }
                    assignment[m] = c;
                }
            }
            if assignment.contains(&usize::MAX) {
                return Err(lines.err(format!("level {} node without a cluster", k)));
            }
            parents.push(Partition::new(assignment, nodes)?);
        }
        let mut edges = Vec::with_capacity(num_edges);
        for _ in 0..num_edges {
            let line = lines.next()?;
            let (u, v) = line
                .split_once(' ')
                .ok_or_else(|| lines.err("expected `u v`"))?;
            edges.push((lines.num(u)?, lines.num(v.trim())?));
        }
        let t = Topology::new(nodes, edges)?;
        if t.num_edges() != num_edges {
            return Err(lines.err("duplicate edges"));
        }
        levels.push(t);
    }
    if lines.iter.any(|(_, l)| !l.trim().is_empty()) {
        return Err(lines.err("trailing content"));
    }
    Hierarchy::from_parts(levels, parents, rule, incomplete)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_grid;
    use crate::hierarchy::{build_hierarchy, HierarchyConfig};

    #[test]
    fn round_trip_grid() {
        let g = generate_grid(9, 9).unwrap();
        let h = build_hierarchy(&g, &HierarchyConfig::default(), 4).unwrap();
        let text = write_hierarchy(&h);
        let back = parse_hierarchy(&text, Path::new("mem")).unwrap();
        assert_eq!(back, h);
        assert_eq!(write_hierarchy(&back), text);
    }

    #[test]
    fn small_example_layout() {
        let t = Topology::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let h = Hierarchy::from_partitions(
            t,
            vec![Partition::new(vec![0, 0, 1, 1], 2).unwrap()],
            SuperEdgeRule::default(),
        )
        .unwrap();
        let expected = "hierarchy levels 2 lambda 1 strict false incomplete false\n\
                        level 1 nodes 4 edges 3\n0 1\n1 2\n2 3\n\
                        level 2 nodes 2 edges 1\n0: 0 1\n1: 2 3\n0 1\n";
        assert_eq!(write_hierarchy(&h), expected);
    }

    #[test]
    fn errors_report_line() {
        let bad = "hierarchy levels 2 lambda 1 strict false incomplete false\n\
                   level 1 nodes 2 edges 1\n0 1\nlevel 2 nodes 1 edges 0\n0: 0 5\n";
        let err = parse_hierarchy(bad, Path::new("h.txt")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
    }
}
