//! Genotype to P4 source. Each primitive becomes one line of the ingress
//! `apply` block; the block sits inside a fixed v1model skeleton whose single
//! header carries one field per attribute register.

use std::fmt::Write as _;

use thiserror::Error;

use crate::genome::{is_balanced, GenomeError, Primitive, Program};
use crate::registry::{RegIndex, RegisterFile};
use crate::rule_lang::{Literal, TypeTag};

const INDENT: &str = "    ";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodegenError {
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedProgram {
    pub body: String,
    pub full_source: String,
}

fn operand(rf: &RegisterFile, i: RegIndex) -> String {
    let r = rf.get(i).expect("register index out of range");
    match &r.value {
        Some(v) => v.to_string(),
        None => r.name.clone(),
    }
}

/// The evolved logic alone, unindented at the top level.
pub fn emit_body(p: &Program, rf: &RegisterFile) -> Result<String, CodegenError> {
    if !is_balanced(&p.code) {
        return Err(GenomeError::Unbalanced("cannot emit an unbalanced program".into()).into());
    }
    let mut out = String::new();
    let mut depth = 0usize;
    for prim in &p.code {
        let line = match *prim {
            Primitive::Assign { dst, src } => {
                format!("{} = {};", operand(rf, dst), operand(rf, src))
            }
            Primitive::IfEq { a, b } => format!("if ({} == {}) {{", operand(rf, a), operand(rf, b)),
            Primitive::IfNeq { a, b } => {
                format!("if ({} != {}) {{", operand(rf, a), operand(rf, b))
            }
            Primitive::EndIf => {
                depth -= 1;
                "}".to_string()
            }
        };
        out.push_str(&INDENT.repeat(depth));
        out.push_str(&line);
        out.push('\n');
        if prim.is_if() {
            depth += 1;
        }
    }
    Ok(out)
}

/// P4 type for an attribute. Int fields default to 16 bits and widen when a
/// rule constant needs it.
fn field_type(rf: &RegisterFile, tag: TypeTag) -> String {
    match tag {
        TypeTag::IpAddr => "bit<32>".into(),
        TypeTag::Bool => "bool".into(),
        TypeTag::String => "bit<64>".into(),
        TypeTag::Int => {
            let max = rf
                .constants()
                .filter_map(|r| match r.value {
                    Some(Literal::Int(n)) => Some(n),
                    _ => None,
                })
                .max()
                .unwrap_or(0);
            let width = match max {
                0..=0xFFFF => 16,
                0x1_0000..=0xFFFF_FFFF => 32,
                _ => 64,
            };
            format!("bit<{width}>")
        }
    }
}

pub fn emit(p: &Program, rf: &RegisterFile) -> Result<EmittedProgram, CodegenError> {
    let body = emit_body(p, rf)?;
    let attrs: Vec<_> = rf
        .attributes()
        .map(|r| (r.name.as_str(), field_type(rf, r.type_tag)))
        .collect();

    let mut s = String::new();
    let w = &mut s;
    // Writing into a String cannot fail.
    let _ = writeln!(
        w,
        "// Generated by p4gen. The ingress apply block holds the evolved logic;"
    );
    let _ = writeln!(w, "// everything else is a fixed skeleton.");
    let _ = writeln!(w, "#include <core.p4>");
    let _ = writeln!(w, "#include <v1model.p4>");
    let _ = writeln!(w);
    let _ = writeln!(w, "// One field per packet attribute named in the rules.");
    let _ = writeln!(w, "header attrs_t {{");
    for (name, ty) in &attrs {
        let _ = writeln!(w, "{INDENT}{ty} {name};");
    }
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    let _ = writeln!(w, "struct headers_t {{");
    let _ = writeln!(w, "{INDENT}attrs_t attrs;");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    let _ = writeln!(w, "struct metadata_t {{ }}");
    let _ = writeln!(w);
    let _ = writeln!(
        w,
        "parser ParserImpl(packet_in packet, out headers_t hdr, inout metadata_t meta,"
    );
    let _ = writeln!(
        w,
        "                  inout standard_metadata_t standard_metadata) {{"
    );
    let _ = writeln!(w, "{INDENT}state start {{");
    let _ = writeln!(w, "{INDENT}{INDENT}packet.extract(hdr.attrs);");
    let _ = writeln!(w, "{INDENT}{INDENT}transition accept;");
    let _ = writeln!(w, "{INDENT}}}");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    let _ = writeln!(
        w,
        "control VerifyChecksumImpl(inout headers_t hdr, inout metadata_t meta) {{"
    );
    let _ = writeln!(w, "{INDENT}apply {{ }}");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    let _ = writeln!(
        w,
        "control IngressImpl(inout headers_t hdr, inout metadata_t meta,"
    );
    let _ = writeln!(
        w,
        "                    inout standard_metadata_t standard_metadata) {{"
    );
    let _ = writeln!(w, "{INDENT}apply {{");
    for (name, ty) in &attrs {
        let _ = writeln!(w, "{INDENT}{INDENT}{ty} {name} = hdr.attrs.{name};");
    }
    for line in body.lines() {
        let _ = writeln!(w, "{INDENT}{INDENT}{line}");
    }
    for (name, _) in &attrs {
        let _ = writeln!(w, "{INDENT}{INDENT}hdr.attrs.{name} = {name};");
    }
    let _ = writeln!(w, "{INDENT}}}");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    let _ = writeln!(
        w,
        "control EgressImpl(inout headers_t hdr, inout metadata_t meta,"
    );
    let _ = writeln!(
        w,
        "                   inout standard_metadata_t standard_metadata) {{"
    );
    let _ = writeln!(w, "{INDENT}apply {{ }}");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    let _ = writeln!(
        w,
        "control ComputeChecksumImpl(inout headers_t hdr, inout metadata_t meta) {{"
    );
    let _ = writeln!(w, "{INDENT}apply {{ }}");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    let _ = writeln!(
        w,
        "control DeparserImpl(packet_out packet, in headers_t hdr) {{"
    );
    let _ = writeln!(w, "{INDENT}apply {{");
    let _ = writeln!(w, "{INDENT}{INDENT}packet.emit(hdr.attrs);");
    let _ = writeln!(w, "{INDENT}}}");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    let _ = writeln!(
        w,
        "V1Switch(ParserImpl(), VerifyChecksumImpl(), IngressImpl(), EgressImpl(),"
    );
    let _ = writeln!(w, "         ComputeChecksumImpl(), DeparserImpl()) main;");

    Ok(EmittedProgram {
        body,
        full_source: s,
    })
}

/// Splits one operand off the front of `s`: a quoted string or a run of
/// non-space characters up to `delims`.
fn take_operand<'a>(s: &'a str, delims: &[char]) -> Option<(&'a str, &'a str)> {
    let s = s.trim_start();
    let end = if let Some(rest) = s.strip_prefix('"') {
        rest.find('"')? + 2
    } else {
        s.find(|c: char| c.is_whitespace() || delims.contains(&c))
            .unwrap_or(s.len())
    };
    (end > 0).then(|| (&s[..end], &s[end..]))
}

/// Parses a body produced by [`emit_body`] back into primitives. Attribute
/// names take precedence over literals.
pub fn parse_body(text: &str, rf: &RegisterFile) -> Result<Program, CodegenError> {
    let mut code = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| CodegenError::Parse {
            line: line_no,
            message,
        };
        let reg = |tok: &str| {
            rf.attr_index(tok)
                .or_else(|| {
                    let lit = Literal::parse(tok)?;
                    rf.constants()
                        .find(|r| r.value.as_ref() == Some(&lit))
                        .map(|r| r.index)
                })
                .ok_or_else(|| err(format!("unknown operand `{tok}`")))
        };
        let prim = if line == "}" {
            Primitive::EndIf
        } else if let Some(cond) = line
            .strip_prefix("if (")
            .and_then(|r| r.strip_suffix(") {"))
        {
            let (a, rest) = take_operand(cond, &[]).ok_or_else(|| err("missing operand".into()))?;
            let rest = rest.trim_start();
            let (eq, rest) = if let Some(r) = rest.strip_prefix("==") {
                (true, r)
            } else if let Some(r) = rest.strip_prefix("!=") {
                (false, r)
            } else {
                return Err(err(format!("expected `==` or `!=` in `{line}`")));
            };
            let (b, tail) = take_operand(rest, &[]).ok_or_else(|| err("missing operand".into()))?;
            if !tail.trim().is_empty() {
                return Err(err(format!("trailing text in `{line}`")));
            }
            let (a, b) = (reg(a)?, reg(b)?);
            if eq {
                Primitive::IfEq { a, b }
            } else {
                Primitive::IfNeq { a, b }
            }
        } else if let Some(stmt) = line.strip_suffix(';') {
            let (d, rest) =
                take_operand(stmt, &['=']).ok_or_else(|| err("missing target".into()))?;
            let rest = rest
                .trim_start()
                .strip_prefix('=')
                .ok_or_else(|| err(format!("expected `=` in `{line}`")))?;
            let (s, tail) = take_operand(rest, &[]).ok_or_else(|| err("missing source".into()))?;
            if !tail.trim().is_empty() {
                return Err(err(format!("trailing text in `{line}`")));
            }
            Primitive::Assign {
                dst: reg(d)?,
                src: reg(s)?,
            }
        } else {
            return Err(err(format!("unrecognised statement `{line}`")));
        };
        if !prim.is_type_valid(rf) {
            return Err(err(format!("`{line}` is not type valid")));
        }
        code.push(prim);
    }
    if !is_balanced(&code) {
        return Err(GenomeError::Unbalanced("body braces do not match".into()).into());
    }
    Ok(Program::from(code))
}
