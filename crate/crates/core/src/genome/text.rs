//! One primitive per line: `IF_EQ(port_num, const:0)`,
//! `ASSIGN(src_ip, const:10.0.0.10)`, `ENDIF()`. Blank lines and `#`
//! comments are ignored when parsing.

use super::{is_balanced, GenomeError, Primitive, Program};
use crate::registry::{RegIndex, RegisterFile};

pub fn format_genotype(p: &Program, rf: &RegisterFile) -> String {
    let label = |i: RegIndex| {
        rf.get(i)
            .map(|r| r.label())
            .unwrap_or_else(|| format!("r{i}"))
    };
    let mut out = String::new();
    for prim in &p.code {
        let line = match *prim {
            Primitive::Assign { dst, src } => format!("ASSIGN({}, {})", label(dst), label(src)),
            Primitive::IfEq { a, b } => format!("IF_EQ({}, {})", label(a), label(b)),
            Primitive::IfNeq { a, b } => format!("IF_NEQ({}, {})", label(a), label(b)),
            Primitive::EndIf => "ENDIF()".to_string(),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn parse_genotype(text: &str, rf: &RegisterFile) -> Result<Program, GenomeError> {
    let mut code = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| GenomeError::Parse {
            line: line_no,
            message,
        };
        let (name, rest) = line
            .split_once('(')
            .ok_or_else(|| err(format!("expected `NAME(...)`, found `{line}`")))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| err("missing closing `)`".into()))?;
        let args = split_args(args);
        let operand = |s: &str| {
            rf.find_label(s)
                .ok_or_else(|| err(format!("unknown register `{s}`")))
        };
        let prim = match (name.trim(), args.as_slice()) {
            ("ENDIF", []) => Primitive::EndIf,
            ("ASSIGN", [d, s]) => Primitive::Assign {
                dst: operand(d)?,
                src: operand(s)?,
            },
            ("IF_EQ", [a, b]) => Primitive::IfEq {
                a: operand(a)?,
                b: operand(b)?,
            },
            ("IF_NEQ", [a, b]) => Primitive::IfNeq {
                a: operand(a)?,
                b: operand(b)?,
            },
            (other, args) => {
                return Err(err(format!(
                    "`{other}` with {} argument(s) is not a primitive",
                    args.len()
                )))
            }
        };
        if !prim.is_type_valid(rf) {
            return Err(err(format!(
                "operands of `{line}` are not type compatible or target a read-only register"
            )));
        }
        code.push(prim);
    }
    if !is_balanced(&code) {
        return Err(GenomeError::Unbalanced(
            "IF_*/ENDIF counts do not pair up".into(),
        ));
    }
    Ok(Program::from(code))
}

// Commas inside quoted string constants do not separate arguments.
fn split_args(args: &str) -> Vec<String> {
    if args.trim().is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for c in args.chars() {
        match c {
            '"' => {
                quoted = !quoted;
                cur.push(c);
            }
            ',' if !quoted => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out.into_iter().map(|s| s.trim().to_string()).collect()
}
