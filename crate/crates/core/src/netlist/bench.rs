// SPDX-License-Identifier: Apache-2.0

//! ISCAS `.bench` reader.
//!
//! ```text
//! # comment
//! INPUT(a)
//! OUTPUT(y)
//! y = NAND(a, b)
//! ```

use super::{BooleanNetwork, Gate, GateKind, NetlistError};

struct Cursor<'a> {
    line: usize,
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: usize, text: &'a str) -> Self {
        Cursor { line, text, pos: 0 }
    }

    fn err(&self, message: impl Into<String>) -> NetlistError {
        NetlistError::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn expect(&mut self, want: char) -> Result<(), NetlistError> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(c) => Err(self.err(format!("expected `{want}`, found `{c}`"))),
            None => Err(self.err(format!("expected `{want}`, found end of line"))),
        }
    }

    fn ident(&mut self) -> Result<&'a str, NetlistError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.text[self.pos..].chars().next() {
            if c.is_whitespace() || matches!(c, '(' | ')' | ',' | '=') {
                break;
            }
            self.pos += c.len_utf8();
        }
        if self.pos == start {
            return Err(self.err("expected a net name"));
        }
        Ok(&self.text[start..self.pos])
    }

    fn finish(&mut self) -> Result<(), NetlistError> {
        match self.peek() {
            None => Ok(()),
            Some(c) => Err(self.err(format!("unexpected `{c}` after statement"))),
        }
    }
}

/// Parses `.bench` text into a validated [`BooleanNetwork`].
pub fn parse_bench(text: &str) -> Result<BooleanNetwork, NetlistError> {
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut gates = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let mut cur = Cursor::new(line, body);
        let head = cur.ident()?;
        match cur.peek() {
            Some('(') => {
                let is_input = head.eq_ignore_ascii_case("INPUT");
                if !is_input && !head.eq_ignore_ascii_case("OUTPUT") {
                    cur.pos = 0;
                    cur.skip_ws();
                    return Err(cur.err(format!("unknown declaration `{head}`")));
                }
                cur.expect('(')?;
                let name = cur.ident()?.to_string();
                cur.expect(')')?;
                cur.finish()?;
                if is_input {
                    inputs.push(name);
                } else {
                    outputs.push(name);
                }
            }
            Some('=') => {
                cur.expect('=')?;
                let kind_col = {
                    cur.skip_ws();
                    cur.pos
                };
                let keyword = cur.ident()?;
                let kind = match GateKind::from_keyword(keyword) {
                    Some(k) => k,
                    None if keyword.eq_ignore_ascii_case("DFF") => {
                        return Err(NetlistError::Sequential {
                            line,
                            kind: keyword.to_string(),
                        })
                    }
                    None => {
                        cur.pos = kind_col;
                        return Err(cur.err(format!("unknown gate type `{keyword}`")));
                    }
                };
                cur.expect('(')?;
                let mut args = Vec::new();
                if cur.peek() != Some(')') {
                    loop {
                        args.push(cur.ident()?.to_string());
                        match cur.peek() {
                            Some(',') => cur.expect(',')?,
                            _ => break,
                        }
                    }
                }
                cur.expect(')')?;
                cur.finish()?;
                gates.push(Gate {
                    output: head.to_string(),
                    kind,
                    inputs: args,
                });
            }
            Some(c) => return Err(cur.err(format!("unexpected `{c}`"))),
            None => return Err(cur.err("incomplete statement")),
        }
    }

    BooleanNetwork::new(inputs, outputs, gates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_and_comments() {
        let net = parse_bench(
            "  INPUT ( a )  # first\n\tINPUT(b)\nOUTPUT(y)\n\n y=AND( a ,b ) # and\n",
        )
        .unwrap();
        assert_eq!(net.inputs(), ["a", "b"]);
        assert_eq!(net.gates()[0].inputs, vec!["a", "b"]);
    }

    #[test]
    fn names_are_case_sensitive() {
        let err = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(A)\n").unwrap_err();
        assert!(matches!(err, NetlistError::UndefinedNet { ref net, .. } if net == "A"));
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a\n").unwrap_err();
        assert_eq!(
            err,
            NetlistError::Syntax {
                line: 3,
                column: 10,
                message: "expected `)`, found end of line".into()
            }
        );
        let err = parse_bench("INPUT(a)\ny = FOO(a)\n").unwrap_err();
        assert!(matches!(err, NetlistError::Syntax { line: 2, column: 5, .. }));
    }

    #[test]
    fn duplicate_definition() {
        let err = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\ny = BUFF(a)\n").unwrap_err();
        assert_eq!(err, NetlistError::DuplicateDefinition("y".into()));
    }

    #[test]
    fn flip_flops_rejected() {
        let err = parse_bench("INPUT(a)\nOUTPUT(q)\nq = DFF(a)\n").unwrap_err();
        assert!(matches!(err, NetlistError::Sequential { line: 3, .. }));
    }

    #[test]
    fn not_arity_checked() {
        let err = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NOT(a, b)\n").unwrap_err();
        assert!(matches!(err, NetlistError::Arity { arity: 2, .. }));
    }
}
