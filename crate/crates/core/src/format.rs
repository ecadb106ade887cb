//! Instance file formats.
//!
//! The canonical format is line oriented, LF terminated, single spaced:
//!
//! ```text
//! qkp 1
//! n 2
//! m 1
//! costs 2 3
//! singletons 3 0
//! e 0 1 10
//! budget 5
//! ```
//!
//! Arc lines use 0-based endpoints with `i < j` and a positive utility.
//! Any number of `budget` lines may follow the arcs.
//!
//! The soutif format is the layout of the published Standard-QKP files:
//!
//! ```text
//! <name>
//! <n>
//! <c_1> ... <c_n>            linear coefficients (singleton utilities)
//! <p_12> ... <p_1n>          upper triangle of the quadratic matrix,
//! ...                        row i holds p_i,i+1 .. p_i,n
//! <p_n-1,n>
//!                            blank line
//! 0                          constraint type, 0 means <=
//! <capacity>
//! <w_1> ... <w_n>            node costs
//! ```
//!
//! Tokens on a line may be separated by any run of whitespace and anything
//! after the cost line is ignored. The layout is positional, so node `k` of
//! the file (1-based) becomes node `k - 1`.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::{Budget, Error, QkpInstance, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceFile {
    pub instance: QkpInstance,
    pub budgets: Vec<Budget>,
}

pub fn write_canonical(inst: &QkpInstance, budgets: &[Budget]) -> String {
    let mut out = String::new();
    let join = |v: &[i64]| v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
    out.push_str("qkp 1\n");
    let _ = writeln!(out, "n {}", inst.n());
    let _ = writeln!(out, "m {}", inst.m());
    if inst.n() == 0 {
        out.push_str("costs\nsingletons\n");
    } else {
        let _ = writeln!(out, "costs {}", join(inst.costs()));
        let _ = writeln!(out, "singletons {}", join(inst.singletons()));
    }
    for a in inst.arcs() {
        let _ = writeln!(out, "e {} {} {}", a.tail, a.head, a.utility);
    }
    for b in budgets {
        let _ = writeln!(out, "budget {}", b.value);
    }
    out
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Strict decimal integer: optional minus sign, then digits.
fn int(line: usize, tok: &str) -> Result<i64> {
    let digits = tok.strip_prefix('-').unwrap_or(tok);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err(line, format!("expected an integer, found {tok:?}")));
    }
    tok.parse()
        .map_err(|_| err(line, format!("integer {tok:?} out of range")))
}

fn count(line: usize, tok: &str) -> Result<usize> {
    let v = int(line, tok)?;
    usize::try_from(v).map_err(|_| err(line, format!("count {v} is negative")))
}

struct Lines<'a> {
    lines: Vec<&'a str>,
    next: usize,
}

impl<'a> Lines<'a> {
    /// Line number of the line `section` would read next.
    fn number(&self) -> usize {
        self.next + 1
    }

    /// Next line split on single spaces, with `keyword` as its first token.
    fn section(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>)> {
        let line = self.number();
        let Some(text) = self.lines.get(self.next) else {
            return Err(err(line, format!("expected `{keyword}` section, found end of file")));
        };
        let toks: Vec<&str> = text.split(' ').collect();
        if toks[0] != keyword {
            return Err(err(line, format!("expected `{keyword}` section, found {:?}", toks[0])));
        }
        if toks.iter().skip(1).any(|t| t.is_empty()) {
            return Err(err(line, "tokens must be separated by single spaces"));
        }
        self.next += 1;
        Ok((line, toks[1..].to_vec()))
    }

    fn peek_keyword(&self) -> Option<&'a str> {
        self.lines.get(self.next).map(|t| t.split(' ').next().unwrap_or(""))
    }
}

pub fn read_canonical(text: &str) -> Result<InstanceFile> {
    if text.is_empty() {
        return Err(err(1, "empty file"));
    }
    let body = text
        .strip_suffix('\n')
        .ok_or_else(|| err(text.lines().count(), "missing final newline"))?;
    let lines: Vec<&str> = body.split('\n').collect();
    if let Some(i) = lines.iter().position(|l| l.ends_with('\r')) {
        return Err(err(i + 1, "CR line endings are not allowed"));
    }
    let mut src = Lines { lines, next: 0 };

    let (line, rest) = src.section("qkp")?;
    if rest != ["1"] {
        return Err(err(line, "unsupported format version, expected `qkp 1`"));
    }
    let scalar = |src: &mut Lines, key: &str| -> Result<usize> {
        let (line, rest) = src.section(key)?;
        match rest.as_slice() {
            [tok] => count(line, tok),
            _ => Err(err(line, format!("`{key}` takes exactly one value"))),
        }
    };
    let n = scalar(&mut src, "n")?;
    let m = scalar(&mut src, "m")?;
    let vector = |src: &mut Lines, key: &str| -> Result<(usize, Vec<i64>)> {
        let (line, rest) = src.section(key)?;
        if rest.len() != n {
            return Err(err(line, format!("`{key}` has {} values, expected {n}", rest.len())));
        }
        Ok((line, rest.iter().map(|t| int(line, t)).collect::<Result<_>>()?))
    };
    let (cost_line, costs) = vector(&mut src, "costs")?;
    if let Some(q) = costs.iter().find(|&&q| q < 0) {
        return Err(err(cost_line, format!("negative cost {q}")));
    }
    let (_, singletons) = vector(&mut src, "singletons")?;

    let mut pairs = Vec::with_capacity(m);
    let mut seen = HashSet::with_capacity(m);
    for k in 0..m {
        if src.peek_keyword() != Some("e") {
            let line = src.number();
            return Err(err(line, format!("expected {m} arc lines, found {k}")));
        }
        let (line, rest) = src.section("e")?;
        let [i, j, u] = rest.as_slice() else {
            return Err(err(line, "arc lines have the form `e i j u`"));
        };
        let (i, j, u) = (count(line, i)?, count(line, j)?, int(line, u)?);
        if i >= j {
            return Err(err(line, "arc endpoints not ascending"));
        }
        if j >= n {
            return Err(err(line, format!("arc endpoint {j} out of range for {n} nodes")));
        }
        if u <= 0 {
            return Err(err(line, format!("arc utility {u} must be positive")));
        }
        if !seen.insert((i, j)) {
            return Err(err(line, format!("duplicate arc {i} {j}")));
        }
        pairs.push((i, j, u));
    }

    let mut budgets = Vec::new();
    while src.next < src.lines.len() {
        if src.peek_keyword() == Some("e") {
            return Err(err(src.number(), format!("more than the declared {m} arc lines")));
        }
        let (line, rest) = src.section("budget")?;
        let [b] = rest.as_slice() else {
            return Err(err(line, "`budget` takes exactly one value"));
        };
        let b = int(line, b)?;
        budgets.push(Budget::new(b).map_err(|_| err(line, format!("negative budget {b}")))?);
    }

    let instance = QkpInstance::new("", costs, singletons, pairs).map_err(|e| err(cost_line, e.to_string()))?;
    Ok(InstanceFile { instance, budgets })
}

pub fn write_soutif(inst: &QkpInstance, budget: Budget) -> String {
    let n = inst.n();
    let mut matrix = vec![vec![0i64; n]; n];
    for a in inst.arcs() {
        matrix[a.tail][a.head] = a.utility;
    }
    let join = |v: &[i64]| v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    let name = if inst.name().is_empty() { "qkp" } else { inst.name() };
    let _ = writeln!(out, "{name}");
    let _ = writeln!(out, "{n}");
    let _ = writeln!(out, "{}", join(inst.singletons()));
    for (i, row) in matrix.iter().enumerate().take(n.saturating_sub(1)) {
        let _ = writeln!(out, "{}", join(&row[i + 1..]));
    }
    out.push('\n');
    out.push_str("0\n");
    let _ = writeln!(out, "{}", budget.value);
    let _ = writeln!(out, "{}", join(inst.costs()));
    out
}

pub fn read_soutif(text: &str) -> Result<InstanceFile> {
    let lines: Vec<&str> = text.lines().collect();
    let mut at = 0usize;
    let mut next_line = |what: &str, skip_blank: bool| -> Result<(usize, Vec<&str>)> {
        while skip_blank && at < lines.len() && lines[at].trim().is_empty() {
            at += 1;
        }
        let Some(l) = lines.get(at) else {
            return Err(err(at + 1, format!("expected {what}, found end of file")));
        };
        at += 1;
        Ok((at, l.split_whitespace().collect()))
    };
    let ints = |line: usize, toks: &[&str], len: usize, what: &str| -> Result<Vec<i64>> {
        if toks.len() != len {
            return Err(err(line, format!("{what} has {} values, expected {len}", toks.len())));
        }
        toks.iter().map(|t| int(line, t)).collect()
    };

    let (_, name) = next_line("instance name", false)?;
    let name = name.join(" ");
    let (line, toks) = next_line("node count", false)?;
    let n = match toks.as_slice() {
        [t] => count(line, t)?,
        _ => return Err(err(line, "node count line takes one value")),
    };
    let (line, toks) = next_line("linear coefficients", false)?;
    let singletons = ints(line, &toks, n, "linear coefficient line")?;
    let mut pairs = Vec::new();
    for i in 0..n.saturating_sub(1) {
        let (line, toks) = next_line("quadratic row", false)?;
        let row = ints(line, &toks, n - 1 - i, "quadratic row")?;
        for (k, &u) in row.iter().enumerate() {
            if u < 0 {
                return Err(err(line, format!("negative quadratic coefficient {u}")));
            }
            if u > 0 {
                pairs.push((i, i + 1 + k, u));
            }
        }
    }
    let (line, toks) = next_line("constraint type", true)?;
    if toks != ["0"] {
        return Err(err(line, "only the `0` (less-or-equal) constraint type is supported"));
    }
    let (line, toks) = next_line("capacity", false)?;
    let capacity = match toks.as_slice() {
        [t] => int(line, t)?,
        _ => return Err(err(line, "capacity line takes one value")),
    };
    let budget = Budget::new(capacity).map_err(|_| err(line, format!("negative capacity {capacity}")))?;
    let (cost_line, toks) = next_line("weights", false)?;
    let costs = ints(cost_line, &toks, n, "weight line")?;
    if let Some(q) = costs.iter().find(|&&q| q < 0) {
        return Err(err(cost_line, format!("negative cost {q}")));
    }
    let instance = QkpInstance::new(name, costs, singletons, pairs).map_err(|e| err(cost_line, e.to_string()))?;
    Ok(InstanceFile {
        instance,
        budgets: vec![budget],
    })
}
