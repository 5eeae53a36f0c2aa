//! Plain-text graph and per-link value files.
//!
//! Graph files hold the link count on the first line and one 1-based edge
//! `u v` per following line. Value files hold one number per line in link
//! order. Blank lines and `#` comments are ignored in both.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::graph::ContentionGraph;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(k, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((k + 1, line))
    })
}

fn parse_usize(line: usize, token: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("expected a non-negative integer, found `{token}`") })
}

pub fn parse_graph(text: &str) -> Result<ContentionGraph> {
    let mut lines = content_lines(text);
    let (line, header) = lines.next().ok_or(Error::Parse { line: 1, message: "missing link count".into() })?;
    let mut tokens = header.split_whitespace();
    let n = parse_usize(line, tokens.next().unwrap_or(""))?;
    if tokens.next().is_some() {
        return Err(Error::Parse { line, message: "header must hold only the link count".into() });
    }
    let mut edges = Vec::new();
    for (line, body) in lines {
        let tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::Parse { line, message: format!("expected `u v`, found `{body}`") });
        }
        edges.push((parse_usize(line, tokens[0])?, parse_usize(line, tokens[1])?));
    }
    ContentionGraph::new(n, &edges)
}

/// Canonical rendering: header, then edges sorted with `u < v`.
pub fn write_graph(graph: &ContentionGraph) -> String {
    let mut out = format!("{}\n", graph.num_links());
    for (u, v) in graph.edges() {
        let _ = writeln!(out, "{} {}", u + 1, v + 1);
    }
    out
}

pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    content_lines(text)
        .map(|(line, body)| {
            body.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or(Error::Parse { line, message: format!("expected a number, found `{body}`") })
        })
        .collect()
}

pub fn write_values(values: &[f64]) -> String {
    values.iter().fold(String::new(), |mut out, v| {
        let _ = writeln!(out, "{v}");
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_with_comments() {
        let g = parse_graph("# square\n4\n1 3\n1 4 # cross\n\n2 3\n2 4\n").unwrap();
        assert_eq!(g, ContentionGraph::new(4, &[(1, 3), (1, 4), (2, 3), (2, 4)]).unwrap());
        assert_eq!(write_graph(&g), "4\n1 3\n1 4\n2 3\n2 4\n");
    }

    #[test]
    fn reports_bad_lines() {
        assert!(matches!(parse_graph(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_graph("3\n1 2 3\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_graph("x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_graph("3\n1 x\n"), Err(Error::Parse { line: 2, .. })));
        assert_eq!(parse_graph("3\n2 2\n"), Err(Error::SelfLoop(2)));
        assert!(matches!(parse_values("0.1\nabc\n"), Err(Error::Parse { line: 2, .. })));
        assert!(parse_values("inf\n").is_err());
    }

    #[test]
    fn values() {
        assert_eq!(parse_values("# loads\n0.2\n0.4 # two\n\n0.4266\n").unwrap(), vec![0.2, 0.4, 0.4266]);
        assert_eq!(parse_values(&write_values(&[0.1, 1e-9])).unwrap(), vec![0.1, 1e-9]);
    }

    proptest! {
        #[test]
        fn graph_round_trip(n in 1usize..=64, raw in proptest::collection::vec((1usize..=64, 1usize..=64), 0..80)) {
            let edges: Vec<_> = raw.into_iter().filter(|&(u, v)| u <= n && v <= n && u != v).collect();
            let g = ContentionGraph::new(n, &edges).unwrap();
            let text = write_graph(&g);
            let back = parse_graph(&text).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(write_graph(&back), text);
        }
    }
}
