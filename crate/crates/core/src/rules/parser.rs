//! Recursive-descent parser for the rule language.

use super::{
    Aggregate, Comparator, Condition, Rule, RuleBody, RuleSet, Severity, TrendDirection,
};
use crate::events::VitalKind;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct RuleParseError {
    /// 1-based line of the offending token.
    pub line: usize,
    /// 1-based column of the offending token.
    pub column: usize,
    pub kind: RuleParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleParseErrorKind {
    /// Wrong token at this position; `expected` lists what would parse.
    Syntax {
        found: String,
        expected: Vec<&'static str>,
    },
    UnknownKind { token: String },
    UnknownSeverity { token: String },
    UnknownDirection { token: String },
    DuplicateRuleName { name: String },
    NonPositiveDuration,
    NonIntegralDuration,
    BadNumber { text: String },
}

impl fmt::Display for RuleParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: ", self.line, self.column)?;
        match &self.kind {
            RuleParseErrorKind::Syntax { found, expected } => {
                write!(f, "unexpected {found}, expected {}", expected.join(" | "))
            }
            RuleParseErrorKind::UnknownKind { token } => {
                write!(f, "unknown vital-sign kind {token:?}")
            }
            RuleParseErrorKind::UnknownSeverity { token } => {
                write!(f, "unknown severity {token:?}")
            }
            RuleParseErrorKind::UnknownDirection { token } => {
                write!(f, "unknown trend direction {token:?}")
            }
            RuleParseErrorKind::DuplicateRuleName { name } => {
                write!(f, "duplicate rule name {name:?}")
            }
            RuleParseErrorKind::NonPositiveDuration => write!(f, "duration must be positive"),
            RuleParseErrorKind::NonIntegralDuration => {
                write!(f, "duration must be a whole number of seconds")
            }
            RuleParseErrorKind::BadNumber { text } => write!(f, "malformed number {text:?}"),
        }
    }
}

impl std::error::Error for RuleParseError {}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Ident(String),
    Number(f64),
    Cmp(Comparator),
    LParen,
    RParen,
    Comma,
    Colon,
    Eof,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("`{s}`"),
            TokenKind::Number(n) => format!("number {}", crate::numfmt::format_decimal(*n)),
            TokenKind::Cmp(c) => format!("`{}`", c.token()),
            TokenKind::LParen => "`(`".to_string(),
            TokenKind::RParen => "`)`".to_string(),
            TokenKind::Comma => "`,`".to_string(),
            TokenKind::Colon => "`:`".to_string(),
            TokenKind::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, RuleParseError> {
    let mut tokens = Vec::new();
    let mut line = 1usize;
    let mut column = 1usize;
    let mut chars = text.chars().peekable();

    macro_rules! push {
        ($kind:expr, $line:expr, $col:expr) => {
            tokens.push(Token { kind: $kind, line: $line, column: $col })
        };
    }

    while let Some(&c) = chars.peek() {
        let (tok_line, tok_col) = (line, column);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
            }
            _ if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    column += 1;
                }
            }
            '(' => {
                chars.next();
                column += 1;
                push!(TokenKind::LParen, tok_line, tok_col);
            }
            ')' => {
                chars.next();
                column += 1;
                push!(TokenKind::RParen, tok_line, tok_col);
            }
            ',' => {
                chars.next();
                column += 1;
                push!(TokenKind::Comma, tok_line, tok_col);
            }
            ':' => {
                chars.next();
                column += 1;
                push!(TokenKind::Colon, tok_line, tok_col);
            }
            '<' | '>' => {
                chars.next();
                column += 1;
                let eq = chars.peek() == Some(&'=');
                if eq {
                    chars.next();
                    column += 1;
                }
                let cmp = match (c, eq) {
                    ('<', false) => Comparator::Lt,
                    ('<', true) => Comparator::Le,
                    ('>', false) => Comparator::Gt,
                    ('>', true) => Comparator::Ge,
                    _ => unreachable!(),
                };
                push!(TokenKind::Cmp(cmp), tok_line, tok_col);
            }
            _ if c.is_ascii_digit() || c == '-' || c == '.' => {
                let mut text = String::new();
                if c == '-' {
                    text.push(c);
                    chars.next();
                    column += 1;
                }
                let mut seen_dot = false;
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() || (d == '.' && !seen_dot) {
                        seen_dot |= d == '.';
                        text.push(d);
                        chars.next();
                        column += 1;
                    } else {
                        break;
                    }
                }
                let value: f64 = text.parse().map_err(|_| RuleParseError {
                    line: tok_line,
                    column: tok_col,
                    kind: RuleParseErrorKind::BadNumber { text: text.clone() },
                })?;
                if !value.is_finite() {
                    return Err(RuleParseError {
                        line: tok_line,
                        column: tok_col,
                        kind: RuleParseErrorKind::BadNumber { text },
                    });
                }
                push!(TokenKind::Number(value), tok_line, tok_col);
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        ident.push(d);
                        chars.next();
                        column += 1;
                    } else {
                        break;
                    }
                }
                push!(TokenKind::Ident(ident), tok_line, tok_col);
            }
            other => {
                return Err(RuleParseError {
                    line: tok_line,
                    column: tok_col,
                    kind: RuleParseErrorKind::Syntax {
                        found: format!("character {other:?}"),
                        expected: vec!["token"],
                    },
                })
            }
        }
    }
    push!(TokenKind::Eof, line, column);
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, token: &Token, kind: RuleParseErrorKind) -> RuleParseError {
        RuleParseError {
            line: token.line,
            column: token.column,
            kind,
        }
    }

    fn syntax_error(&self, token: &Token, expected: Vec<&'static str>) -> RuleParseError {
        self.error_at(
            token,
            RuleParseErrorKind::Syntax {
                found: token.kind.describe(),
                expected,
            },
        )
    }

    fn expect_keyword(&mut self, word: &'static str) -> Result<(), RuleParseError> {
        let t = self.advance();
        match &t.kind {
            TokenKind::Ident(s) if s == word => Ok(()),
            _ => Err(self.syntax_error(&t, vec![word])),
        }
    }

    fn expect_ident(&mut self, expected: &'static str) -> Result<(String, Token), RuleParseError> {
        let t = self.advance();
        match &t.kind {
            TokenKind::Ident(s) => Ok((s.clone(), t)),
            _ => Err(self.syntax_error(&t, vec![expected])),
        }
    }

    fn expect_token(
        &mut self,
        kind: &TokenKind,
        expected: &'static str,
    ) -> Result<(), RuleParseError> {
        let t = self.advance();
        if &t.kind == kind {
            Ok(())
        } else {
            Err(self.syntax_error(&t, vec![expected]))
        }
    }

    fn expect_number(&mut self) -> Result<f64, RuleParseError> {
        let t = self.advance();
        match t.kind {
            TokenKind::Number(n) => Ok(n),
            _ => Err(self.syntax_error(&t, vec!["number"])),
        }
    }

    fn expect_comparator(&mut self) -> Result<Comparator, RuleParseError> {
        let t = self.advance();
        match t.kind {
            TokenKind::Cmp(c) => Ok(c),
            _ => Err(self.syntax_error(&t, vec!["<", "<=", ">", ">="])),
        }
    }

    fn expect_kind(&mut self) -> Result<VitalKind, RuleParseError> {
        let (word, t) = self.expect_ident("vital-sign kind")?;
        VitalKind::from_token(&word)
            .ok_or_else(|| self.error_at(&t, RuleParseErrorKind::UnknownKind { token: word }))
    }

    /// `NUMBER ("s" | "m" | "h")`, normalized to whole positive seconds.
    fn expect_duration(&mut self) -> Result<u64, RuleParseError> {
        let num_token = self.peek().clone();
        let num = self.expect_number()?;
        let (unit, unit_token) = self.expect_ident("duration unit s | m | h")?;
        let factor = match unit.as_str() {
            "s" => 1.0,
            "m" => 60.0,
            "h" => 3600.0,
            _ => return Err(self.syntax_error(&unit_token, vec!["s", "m", "h"])),
        };
        let secs = num * factor;
        if secs <= 0.0 {
            return Err(self.error_at(&num_token, RuleParseErrorKind::NonPositiveDuration));
        }
        if secs.fract() != 0.0 {
            return Err(self.error_at(&num_token, RuleParseErrorKind::NonIntegralDuration));
        }
        Ok(secs as u64)
    }

    fn parse_threshold(&mut self) -> Result<Condition, RuleParseError> {
        let kind = self.expect_kind()?;
        let comparator = self.expect_comparator()?;
        let bound = self.expect_number()?;
        Ok(Condition::new(kind, comparator, bound))
    }

    fn parse_body(&mut self) -> Result<RuleBody, RuleParseError> {
        let t = self.peek().clone();
        let word = match &t.kind {
            TokenKind::Ident(s) => s.clone(),
            _ => {
                return Err(self.syntax_error(
                    &t,
                    vec!["vital-sign kind", "avg", "min", "max", "count", "trend"],
                ))
            }
        };

        if let Some(aggregate) = Aggregate::from_token(&word) {
            self.advance();
            self.expect_token(&TokenKind::LParen, "(")?;
            let kind = self.expect_kind()?;
            self.expect_token(&TokenKind::Comma, ",")?;
            let window_secs = self.expect_duration()?;
            self.expect_token(&TokenKind::RParen, ")")?;
            let comparator = self.expect_comparator()?;
            let bound = self.expect_number()?;
            return Ok(RuleBody::Window {
                aggregate,
                kind,
                window_secs,
                comparator,
                bound,
            });
        }

        if word == "trend" {
            self.advance();
            self.expect_token(&TokenKind::LParen, "(")?;
            let kind = self.expect_kind()?;
            self.expect_token(&TokenKind::Comma, ",")?;
            let window_secs = self.expect_duration()?;
            self.expect_token(&TokenKind::RParen, ")")?;
            let (dir_word, dir_token) = self.expect_ident("falls_below | rises_above")?;
            let direction = match dir_word.as_str() {
                "falls_below" => TrendDirection::FallsBelow,
                "rises_above" => TrendDirection::RisesAbove,
                _ => {
                    return Err(self.error_at(
                        &dir_token,
                        RuleParseErrorKind::UnknownDirection { token: dir_word },
                    ))
                }
            };
            let target = self.expect_number()?;
            self.expect_keyword("within")?;
            let horizon_secs = self.expect_duration()?;
            return Ok(RuleBody::Trend {
                kind,
                window_secs,
                direction,
                target,
                horizon_secs,
            });
        }

        if VitalKind::from_token(&word).is_none() {
            return Err(self.error_at(&t, RuleParseErrorKind::UnknownKind { token: word }));
        }
        let first = self.parse_threshold()?;
        if matches!(self.peek().kind, TokenKind::Ident(ref s) if s == "then") {
            self.advance();
            let then = self.parse_threshold()?;
            self.expect_keyword("within")?;
            let within_secs = self.expect_duration()?;
            return Ok(RuleBody::Sequence {
                first,
                then,
                within_secs,
            });
        }
        Ok(RuleBody::Threshold(first))
    }

    fn parse_rule(&mut self) -> Result<(Rule, Token), RuleParseError> {
        self.expect_keyword("rule")?;
        let (name, name_token) = self.expect_ident("rule name")?;
        self.expect_token(&TokenKind::Colon, ":")?;
        self.expect_keyword("when")?;
        let body = self.parse_body()?;
        self.expect_keyword("severity")?;
        let (sev_word, sev_token) = self.expect_ident("info | warning | high | critical")?;
        let severity = Severity::from_token(&sev_word).ok_or_else(|| {
            self.error_at(&sev_token, RuleParseErrorKind::UnknownSeverity { token: sev_word })
        })?;
        Ok((Rule { name, body, severity }, name_token))
    }
}

/// Parses a whole rule file into a [`RuleSet`], stopping at the first error.
pub fn parse_rules(text: &str) -> Result<RuleSet, RuleParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut rules: Vec<Rule> = Vec::new();
    while parser.peek().kind != TokenKind::Eof {
        let (rule, name_token) = parser.parse_rule()?;
        if rules.iter().any(|r| r.name == rule.name) {
            return Err(parser.error_at(
                &name_token,
                RuleParseErrorKind::DuplicateRuleName { name: rule.name },
            ));
        }
        rules.push(rule);
    }
    Ok(RuleSet::new(rules).expect("uniqueness checked during parse"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_threshold_rule() {
        let rs = parse_rules("rule hypo: when glucose < 70 severity high").unwrap();
        assert_eq!(rs.len(), 1);
        let rule = &rs.rules()[0];
        assert_eq!(rule.name, "hypo");
        assert_eq!(rule.severity, Severity::High);
        assert_eq!(
            rule.body,
            RuleBody::Threshold(Condition::new(VitalKind::Glucose, Comparator::Lt, 70.0))
        );
    }

    #[test]
    fn parses_trend_rule_with_unit_conversion() {
        let rs = parse_rules(
            "rule hypo_trend: when trend(glucose, 30m) falls_below 54 within 20m severity critical",
        )
        .unwrap();
        assert_eq!(
            rs.rules()[0].body,
            RuleBody::Trend {
                kind: VitalKind::Glucose,
                window_secs: 1800,
                direction: TrendDirection::FallsBelow,
                target: 54.0,
                horizon_secs: 1200,
            }
        );
        assert_eq!(rs.rules()[0].severity, Severity::Critical);
    }

    #[test]
    fn parses_window_and_sequence() {
        let text = "\
rule win: when avg(glucose, 10m) < 70 severity warning
rule fall: when fall_signal >= 1 then motion <= 0 within 10m severity critical
";
        let rs = parse_rules(text).unwrap();
        assert_eq!(rs.len(), 2);
        assert!(matches!(rs.rules()[0].body, RuleBody::Window { window_secs: 600, .. }));
        assert!(matches!(
            rs.rules()[1].body,
            RuleBody::Sequence { within_secs: 600, .. }
        ));
    }

    #[test]
    fn rejects_duplicate_names_with_position() {
        let text = "rule hypo: when glucose < 70 severity high\nrule hypo: when glucose < 54 severity critical\n";
        let err = parse_rules(text).unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.column, 6);
        assert!(matches!(err.kind, RuleParseErrorKind::DuplicateRuleName { .. }));
    }

    #[test]
    fn rejects_unknown_kind_with_position() {
        let err = parse_rules("rule r: when glucoze < 70 severity high").unwrap_err();
        assert_eq!((err.line, err.column), (1, 14));
        assert!(matches!(err.kind, RuleParseErrorKind::UnknownKind { ref token } if token == "glucoze"));
    }

    #[test]
    fn rejects_non_positive_duration() {
        let err = parse_rules("rule r: when avg(glucose, 0m) < 70 severity high").unwrap_err();
        assert!(matches!(err.kind, RuleParseErrorKind::NonPositiveDuration));
    }

    #[test]
    fn rejects_unknown_severity() {
        let err = parse_rules("rule r: when glucose < 70 severity urgent").unwrap_err();
        assert!(matches!(err.kind, RuleParseErrorKind::UnknownSeverity { .. }));
    }

    #[test]
    fn reports_expected_tokens_on_syntax_error() {
        let err = parse_rules("rule r when glucose < 70 severity high").unwrap_err();
        assert!(matches!(
            err.kind,
            RuleParseErrorKind::Syntax { ref expected, .. } if expected.contains(&":")
        ));
        assert_eq!((err.line, err.column), (1, 8));
    }

    #[test]
    fn comments_and_whitespace_are_ignored() {
        let text = "# preamble\nrule spaced :\n  when glucose\n  < 70 severity high # trailing\n";
        let rs = parse_rules(text).unwrap();
        assert_eq!(rs.rules()[0].name, "spaced");
    }

    #[test]
    fn fractional_minutes_resolve_to_whole_seconds() {
        let rs = parse_rules("rule r: when avg(glucose, 0.5m) < 70 severity info").unwrap();
        assert!(matches!(rs.rules()[0].body, RuleBody::Window { window_secs: 30, .. }));
        let err = parse_rules("rule r: when avg(glucose, 1.5s) < 70 severity info").unwrap_err();
        assert!(matches!(err.kind, RuleParseErrorKind::NonIntegralDuration));
    }
}
