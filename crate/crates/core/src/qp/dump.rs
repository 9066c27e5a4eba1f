//! Plain-text dump of a [`QpProblem`] for cross-checking with external solvers.
//!
//! ```text
//! qp <n> <m> <nnz_P> <nnz_A>
//! P
//! <row> <col> <value>        (nnz_P lines, 0-based, both triangles)
//! A
//! <row> <col> <value>        (nnz_A lines)
//! q
//! <value>                    (n lines)
//! l
//! <value>                    (m lines, "-inf" for unbounded)
//! u
//! <value>                    (m lines, "inf" for unbounded)
//! ```
//!
//! Values are written with `{:e}` so they round-trip exactly.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use super::{CscMatrix, QpProblem, QP_INFINITY};
use crate::error::{Error, Result};

fn fmt_value(v: f64) -> String {
    if v >= QP_INFINITY {
        "inf".into()
    } else if v <= -QP_INFINITY {
        "-inf".into()
    } else {
        format!("{v:e}")
    }
}

pub fn to_string(problem: &QpProblem) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "qp {} {} {} {}",
        problem.num_vars(),
        problem.num_constraints(),
        problem.p.nnz(),
        problem.a.nnz()
    );
    for (name, mat) in [("P", &problem.p), ("A", &problem.a)] {
        let _ = writeln!(s, "{name}");
        for (c, r, v) in mat.iter() {
            let _ = writeln!(s, "{r} {c} {}", fmt_value(v));
        }
    }
    for (name, vec) in [("q", &problem.q), ("l", &problem.l), ("u", &problem.u)] {
        let _ = writeln!(s, "{name}");
        for v in vec.iter() {
            let _ = writeln!(s, "{}", fmt_value(*v));
        }
    }
    s
}

pub fn write<W: Write>(problem: &QpProblem, mut out: W) -> io::Result<()> {
    out.write_all(to_string(problem).as_bytes())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::InvalidConfig(format!("qp dump line {line}: {}", msg.into()))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    match tok {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| parse_err(line, format!("bad number {tok:?}"))),
    }
}

pub fn read<R: BufRead>(input: R) -> Result<QpProblem> {
    let lines: Vec<String> = input.lines().collect::<io::Result<_>>()?;
    let mut it = lines.iter().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (ln, header) = it.next().ok_or_else(|| parse_err(0, "empty input"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 5 || h[0] != "qp" {
        return Err(parse_err(ln, "expected header `qp n m nnz_P nnz_A`"));
    }
    let dims: Vec<usize> = h[1..]
        .iter()
        .map(|t| t.parse().map_err(|_| parse_err(ln, "bad header count")))
        .collect::<Result<_>>()?;
    let (n, m, nnz_p, nnz_a) = (dims[0], dims[1], dims[2], dims[3]);

    let expect_tag = |tag: &str, it: &mut dyn Iterator<Item = (usize, &str)>| -> Result<()> {
        match it.next() {
            Some((_, t)) if t == tag => Ok(()),
            Some((l, t)) => Err(parse_err(l, format!("expected section {tag}, found {t:?}"))),
            None => Err(parse_err(0, format!("missing section {tag}"))),
        }
    };
    let triplets = |count: usize, rows: usize, it: &mut dyn Iterator<Item = (usize, &str)>| -> Result<CscMatrix> {
        let mut t = Vec::with_capacity(count);
        for _ in 0..count {
            let (l, line) = it.next().ok_or_else(|| parse_err(0, "truncated triplets"))?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != 3 {
                return Err(parse_err(l, "expected `row col value`"));
            }
            let r: usize = tok[0].parse().map_err(|_| parse_err(l, "bad row"))?;
            let c: usize = tok[1].parse().map_err(|_| parse_err(l, "bad col"))?;
            if r >= rows || c >= n {
                return Err(parse_err(l, "index out of range"));
            }
            t.push((r, c, parse_f64(tok[2], l)?));
        }
        Ok(CscMatrix::from_triplets(rows, n, &t))
    };
    let vector = |count: usize, it: &mut dyn Iterator<Item = (usize, &str)>| -> Result<Vec<f64>> {
        (0..count)
            .map(|_| {
                let (l, line) = it.next().ok_or_else(|| parse_err(0, "truncated vector"))?;
                parse_f64(line, l)
            })
            .collect()
    };

    expect_tag("P", &mut it)?;
    let p = triplets(nnz_p, n, &mut it)?;
    expect_tag("A", &mut it)?;
    let a = triplets(nnz_a, m, &mut it)?;
    expect_tag("q", &mut it)?;
    let q = vector(n, &mut it)?;
    expect_tag("l", &mut it)?;
    let l = vector(m, &mut it)?;
    expect_tag("u", &mut it)?;
    let u = vector(m, &mut it)?;
    QpProblem::new(p, q, a, l, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn round_trip_is_exact() {
        let p = CscMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0 / 3.0]));
        let a = CscMatrix::from_dense(&DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, -1.0]));
        let prob = QpProblem::new(
            p,
            vec![std::f64::consts::PI, -1e-17],
            a,
            vec![f64::NEG_INFINITY, 0.0, 0.25],
            vec![1.0, f64::INFINITY, 0.25],
        )
        .unwrap();
        let text = to_string(&prob);
        assert!(text.starts_with("qp 2 3 4 4\nP\n"));
        let back = read(text.as_bytes()).unwrap();
        assert_eq!(back, prob);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read("qp 1 0 1 0\nP\n0 0 x\nA\nq\n0\nl\nu\n".as_bytes()).is_err());
        assert!(read("nope\n".as_bytes()).is_err());
        assert!(read("qp 1 0 1 0\nP\n3 0 1\nA\nq\n0\nl\nu\n".as_bytes()).is_err());
    }
}
