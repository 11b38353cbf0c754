use std::collections::HashMap;

use super::lexer::{tokenize, Token, TokenKind};
use super::{
    AttributeRef, BoolExpr, CmpOp, Condition, Direction, Literal, Rule, RuleError, RuleSet, TypeTag,
};

const KEYWORDS: [&str; 6] = ["IF", "THEN", "AND", "OR", "EQ", "NEQ"];

/// Parses a rule file into a validated [`RuleSet`].
pub fn parse_rules(text: &str) -> Result<RuleSet, RuleError> {
    if text.trim().is_empty() {
        return Err(RuleError::EmptyInput);
    }
    let tokens = tokenize(text)?;
    if tokens.len() == 1 {
        // comments only
        return Err(RuleError::EmptyInput);
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        types: HashMap::new(),
        rule: String::new(),
    };
    let mut rules = Vec::new();
    loop {
        rules.push(parser.rule()?);
        if parser.peek().kind == TokenKind::Eof {
            break;
        }
    }
    RuleSet::from_rules(rules)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    types: HashMap<String, TypeTag>,
    rule: String,
}

#[derive(Clone, Copy, PartialEq)]
enum Connective {
    And,
    Or,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if tok.kind != TokenKind::Eof {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, tok: &Token, expected: &str) -> RuleError {
        RuleError::Syntax {
            line: tok.line,
            column: tok.column,
            expected: expected.to_string(),
            found: tok.kind.describe(),
        }
    }

    fn expect(&mut self, kind: TokenKind, expected: &str) -> Result<Token, RuleError> {
        let tok = self.next();
        if tok.kind == kind {
            Ok(tok)
        } else {
            Err(self.error(&tok, expected))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), RuleError> {
        self.expect(TokenKind::Word(kw.to_string()), &format!("`{kw}`"))
            .map(|_| ())
    }

    fn rule(&mut self) -> Result<Rule, RuleError> {
        let tok = self.next();
        let name = match &tok.kind {
            TokenKind::Word(w) if !KEYWORDS.contains(&w.as_str()) => w.clone(),
            _ => return Err(self.error(&tok, "rule name")),
        };
        self.rule = name.clone();
        self.expect(TokenKind::Colon, "`:`")?;
        self.keyword("IF")?;
        let if_expr = self.expr(Direction::In)?;
        self.keyword("THEN")?;
        let then_expr = self.expr(Direction::Out)?;
        Ok(Rule {
            name,
            if_expr,
            then_expr,
        })
    }

    /// `'(' term (('AND'|'OR') term)* ')'`, AND binding tighter than OR.
    fn expr(&mut self, dir: Direction) -> Result<BoolExpr, RuleError> {
        self.expect(TokenKind::LParen, "`(`")?;
        let first = self.term(dir)?;
        let mut rest = Vec::new();
        loop {
            let tok = self.next();
            let conn = match &tok.kind {
                TokenKind::RParen => break,
                TokenKind::Word(w) if w == "AND" => Connective::And,
                TokenKind::Word(w) if w == "OR" => Connective::Or,
                _ => return Err(self.error(&tok, "`AND`, `OR` or `)`")),
            };
            rest.push((conn, self.term(dir)?));
        }

        let mut disjuncts = Vec::new();
        let mut current = first;
        for (conn, term) in rest {
            match conn {
                Connective::And => current = BoolExpr::and(current, term),
                Connective::Or => disjuncts.push(std::mem::replace(&mut current, term)),
            }
        }
        disjuncts.push(current);
        let mut iter = disjuncts.into_iter();
        let head = iter.next().expect("at least one term");
        Ok(iter.fold(head, BoolExpr::or))
    }

    fn term(&mut self, dir: Direction) -> Result<BoolExpr, RuleError> {
        if self.peek().kind == TokenKind::LParen {
            return self.expr(dir);
        }
        let tok = self.next();
        let lhs = match tok.kind.clone() {
            TokenKind::Attr(d, name) => {
                if d != dir {
                    return Err(RuleError::Direction {
                        rule: self.rule.clone(),
                        attribute: format!("{}.{name}", d.prefix()),
                        part: if dir == Direction::In { "IF" } else { "THEN" },
                        line: tok.line,
                        column: tok.column,
                    });
                }
                AttributeRef { direction: d, name }
            }
            _ => return Err(self.error(&tok, "attribute reference or `(`")),
        };
        let op_tok = self.next();
        let op = match &op_tok.kind {
            TokenKind::Word(w) if w == "EQ" => CmpOp::Eq,
            TokenKind::Word(w) if w == "NEQ" => CmpOp::Neq,
            _ => return Err(self.error(&op_tok, "`EQ` or `NEQ`")),
        };
        let lit_tok = self.next();
        let rhs = match &lit_tok.kind {
            TokenKind::Literal(raw) => Literal::parse(raw)
                .ok_or_else(|| self.error(&lit_tok, "IPv4 address, integer or string literal"))?,
            TokenKind::Word(w) if w == "true" || w == "false" => Literal::Bool(w == "true"),
            _ => return Err(self.error(&lit_tok, "literal")),
        };
        let found = rhs.type_tag();
        match self.types.get(&lhs.name) {
            Some(&expected) if expected != found => {
                return Err(RuleError::Type {
                    attribute: lhs.name,
                    expected,
                    found,
                    line: lit_tok.line,
                    column: lit_tok.column,
                })
            }
            Some(_) => {}
            None => {
                self.types.insert(lhs.name.clone(), found);
            }
        }
        Ok(BoolExpr::Cond(Condition { lhs, op, rhs }))
    }
}
