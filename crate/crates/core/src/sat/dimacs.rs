use super::{Cnf, Lit};
use crate::error::{Error, Result};

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parses DIMACS CNF. Clauses may span lines; `c` lines are comments and a
/// lone `%` ends the body.
pub fn parse_dimacs(text: &str) -> Result<Cnf> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut clauses: Vec<Vec<Lit>> = Vec::new();
    let mut current: Vec<Lit> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line == "%" {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(err(line_no, "duplicate header"));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["p", "cnf", v, c] => {
                    let v = v.parse().map_err(|_| err(line_no, format!("bad variable count `{v}`")))?;
                    let c = c.parse().map_err(|_| err(line_no, format!("bad clause count `{c}`")))?;
                    header = Some((v, c, line_no));
                }
                _ => return Err(err(line_no, format!("malformed header `{line}`"))),
            }
            continue;
        }
        let Some((vars, _, _)) = header else {
            return Err(err(line_no, "clause before `p cnf` header"));
        };
        for tok in line.split_whitespace() {
            let x: i64 = tok
                .parse()
                .map_err(|_| err(line_no, format!("bad literal `{tok}`")))?;
            match Lit::from_dimacs(x) {
                None => {
                    if current.is_empty() {
                        return Err(err(line_no, "empty clause"));
                    }
                    clauses.push(std::mem::take(&mut current));
                }
                Some(l) if l.var > vars => {
                    return Err(err(
                        line_no,
                        format!("literal {x} out of range for {vars} variables"),
                    ));
                }
                Some(l) => current.push(l),
            }
        }
    }

    let Some((vars, count, header_line)) = header else {
        return Err(err(last_line.max(1), "missing `p cnf` header"));
    };
    if !current.is_empty() {
        return Err(err(last_line, "last clause is missing its terminating 0"));
    }
    if clauses.len() != count {
        return Err(err(
            header_line,
            format!("header declares {count} clauses, body has {}", clauses.len()),
        ));
    }
    Cnf::new(vars, clauses)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(e: Error) -> usize {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn single_unit_clause() {
        let cnf = parse_dimacs("p cnf 1 1\n1 0").unwrap();
        assert_eq!(cnf.vars(), 1);
        assert_eq!(cnf.to_signed(), vec![vec![1]]);
    }

    #[test]
    fn two_clauses_with_comments() {
        let cnf = parse_dimacs("c hello\np cnf 2 2\n1 -2 0\nc mid\n-1 2 0\n").unwrap();
        assert_eq!(cnf.to_signed(), vec![vec![1, -2], vec![-1, 2]]);
    }

    #[test]
    fn clause_spanning_lines_and_percent_terminator() {
        let cnf = parse_dimacs("p cnf 3 1\n1 2\n3 0\n%\n0\n").unwrap();
        assert_eq!(cnf.to_signed(), vec![vec![1, 2, 3]]);
    }

    #[test]
    fn count_mismatch() {
        let e = parse_dimacs("p cnf 3 3\n1 0\n2 0\n").unwrap_err();
        assert_eq!(line_of(e), 1);
    }

    #[test]
    fn out_of_range_literal() {
        let e = parse_dimacs("p cnf 2 1\n1 3 0\n").unwrap_err();
        assert_eq!(line_of(e), 2);
    }

    #[test]
    fn missing_terminator() {
        let e = parse_dimacs("p cnf 2 1\n1 2\n").unwrap_err();
        assert_eq!(line_of(e), 2);
    }

    #[test]
    fn malformed_headers() {
        assert_eq!(line_of(parse_dimacs("p dnf 2 1\n1 0").unwrap_err()), 1);
        assert_eq!(line_of(parse_dimacs("c x\n1 0\n").unwrap_err()), 2);
        assert!(parse_dimacs("p cnf 1 1\nx 0\n").is_err());
        assert!(parse_dimacs("p cnf 1 1\n0\n").is_err());
        assert!(parse_dimacs("").is_err());
    }

    #[test]
    fn dimacs_writer_reparses() {
        let cnf = parse_dimacs("p cnf 3 2\n1 -2 3 0\n-3 0\n").unwrap();
        assert_eq!(parse_dimacs(&cnf.to_dimacs_string()).unwrap(), cnf);
    }
}
