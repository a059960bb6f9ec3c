//! Recursive-descent parser with one token of lookahead (two for the
//! optional `actuator =` prefix of a command).

use std::collections::BTreeSet;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::DslError;
use crate::model::{Command, CommandExpr};
use crate::time::Micros;

const RESERVED: &[&str] = &["and", "or", "not", "in", "rate", "task", "per", "period", "check", "ignore"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, DslError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        let i = (self.pos + 1).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(DslError::Syntax {
            line: t.span.line,
            col: t.span.col,
            expected: expected.to_string(),
            found: t.tok.describe(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            self.error(what)
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.at_keyword(kw) {
            Ok(self.bump().span)
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn name(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let t = self.bump();
                let Tok::Ident(s) = t.tok else { unreachable!() };
                Ok((s, t.span))
            }
            _ => self.error(what),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Number(text) => {
                let v: f64 = match text.parse() {
                    Ok(v) => v,
                    Err(_) => return self.error("a number"),
                };
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => self.error("a number"),
        }
    }

    fn integer(&mut self) -> PResult<i64> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Number(text) if !text.contains('.') => match text.parse::<i64>() {
                Ok(v) => {
                    self.bump();
                    Ok(if neg { -v } else { v })
                }
                Err(_) => self.error("an integer"),
            },
            _ => self.error("an integer"),
        }
    }

    fn skip_ends(&mut self) {
        while *self.peek() == Tok::End {
            self.bump();
        }
    }

    fn rule_set(&mut self) -> PResult<RuleSet> {
        let mut rules = Vec::new();
        let mut rate_pairs = BTreeSet::new();
        loop {
            self.skip_ends();
            if *self.peek() == Tok::Eof {
                break;
            }
            let rule = self.rule()?;
            if let Rule::Rate(r) = &rule {
                if !rate_pairs.insert((r.task.clone(), r.actuator.clone())) {
                    return Err(DslError::DuplicateRateRule {
                        line: r.span.line,
                        col: r.span.col,
                        task: r.task.clone(),
                        actuator: r.actuator.clone(),
                    });
                }
            }
            rules.push(rule);
            match self.peek() {
                Tok::End | Tok::Eof => {}
                _ => return self.error("end of statement"),
            }
        }
        Ok(RuleSet { rules })
    }

    fn rule(&mut self) -> PResult<Rule> {
        let span = self.span();
        let name = match self.peek() {
            Tok::Ident(_) => {
                let Tok::Ident(s) = self.bump().tok else { unreachable!() };
                s
            }
            _ => return self.error("a rule name"),
        };
        self.expect(Tok::DoubleColon, "`::`")?;
        if self.at_keyword("rate") && *self.peek2() == Tok::LParen {
            self.rate_rule(name, span).map(Rule::Rate)
        } else {
            self.state_rule(name, span).map(Rule::State)
        }
    }

    fn rate_rule(&mut self, name: String, span: Span) -> PResult<RateRule> {
        self.keyword("rate")?;
        self.expect(Tok::LParen, "`(`")?;
        self.keyword("task")?;
        let (task, task_span) = self.name("a task name")?;
        self.expect(Tok::Comma, "`,`")?;
        let (actuator, actuator_span) = self.name("an actuator name")?;
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Lt, "`<`")?;
        let at = self.span();
        let threshold = self.integer()?;
        if threshold < 1 || threshold > i64::from(u32::MAX) {
            return Err(DslError::Syntax {
                line: at.line,
                col: at.col,
                expected: "a threshold >= 1".into(),
                found: threshold.to_string(),
            });
        }
        self.keyword("per")?;
        let window = if self.at_keyword("period") {
            self.bump();
            RateWindow::Period
        } else {
            RateWindow::Sliding(self.duration()?)
        };
        self.expect(Tok::Arrow, "`->`")?;
        self.keyword("check")?;
        self.expect(Tok::Colon, "`:`")?;
        self.keyword("ignore")?;
        Ok(RateRule { name, span, task, task_span, actuator, actuator_span, threshold: threshold as u32, window })
    }

    fn duration(&mut self) -> PResult<Micros> {
        let at = self.span();
        let text = match self.peek().clone() {
            Tok::Number(t) => t,
            _ => return self.error("`period` or a duration such as `200ms`"),
        };
        self.bump();
        let unit = match self.peek().clone() {
            Tok::Ident(u) => u,
            _ => return self.error("a time unit (`us`, `ms`, `s`)"),
        };
        let bad = |e: String| DslError::Syntax { line: at.line, col: at.col, expected: "a duration".into(), found: e };
        let us = match unit.as_str() {
            "us" if !text.contains('.') => text.parse::<u64>().map(Micros).map_err(|e| bad(e.to_string()))?,
            "ms" => Micros::parse_ms(&text).map_err(|e| bad(e.to_string()))?,
            "s" => Micros::parse_ms(&text)
                .map(|m| m * 1000)
                .map_err(|e| bad(e.to_string()))?,
            _ => return self.error("a time unit (`us`, `ms`, `s`)"),
        };
        self.bump();
        if us.is_zero() {
            return Err(bad("a zero-length window".into()));
        }
        Ok(us)
    }

    fn state_rule(&mut self, name: String, span: Span) -> PResult<StateRule> {
        let condition = self.condition()?;
        self.expect(Tok::Arrow, "`->`")?;
        let (then_target, then_cmd, then_span) = self.command_expr()?;
        let actuator = match then_target {
            Some(a) => a,
            None => {
                return Err(DslError::Syntax {
                    line: then_span.line,
                    col: then_span.col,
                    expected: "an `actuator = command` target".into(),
                    found: then_cmd.to_string(),
                })
            }
        };
        let (else_cmd, else_span) = if *self.peek() == Tok::Colon {
            self.bump();
            let (target, cmd, sp) = self.command_expr()?;
            if let Some(t) = target {
                if t != actuator {
                    return Err(DslError::Syntax {
                        line: sp.line,
                        col: sp.col,
                        expected: format!("else branch for actuator `{actuator}`"),
                        found: format!("`{t}`"),
                    });
                }
            }
            (Some(cmd), sp)
        } else {
            (None, Span::default())
        };
        Ok(StateRule { name, span, actuator, condition, then_cmd, then_span, else_cmd, else_span })
    }

    fn condition(&mut self) -> PResult<Condition> {
        let mut lhs = self.and_expr()?;
        while self.at_keyword("or") {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Condition::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Condition> {
        let mut lhs = self.atom()?;
        while self.at_keyword("and") {
            self.bump();
            let rhs = self.atom()?;
            lhs = Condition::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> PResult<Condition> {
        if *self.peek() == Tok::LParen {
            self.bump();
            let c = self.condition()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(c);
        }
        if self.at_keyword("not") {
            self.bump();
            return Ok(Condition::Not(Box::new(self.atom()?)));
        }
        let (name, span) = self.name("a signal name, `not` or `(`")?;
        let signal = SignalRef { name, span };
        let op = match self.peek() {
            Tok::Lt => Some(CmpOp::Lt),
            Tok::Le => Some(CmpOp::Le),
            Tok::Gt => Some(CmpOp::Gt),
            Tok::Ge => Some(CmpOp::Ge),
            Tok::Eq => Some(CmpOp::Eq),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let value = self.number()?;
            return Ok(Condition::Compare { signal, op, value });
        }
        let negated = if self.at_keyword("not") {
            self.bump();
            true
        } else {
            false
        };
        if !self.at_keyword("in") {
            return self.error(if negated { "`in`" } else { "a comparison or `in`" });
        }
        self.bump();
        let open = self.expect(Tok::LBracket, "`[`")?;
        let lo = self.number()?;
        self.expect(Tok::Comma, "`,`")?;
        let hi = self.number()?;
        self.expect(Tok::RBracket, "`]`")?;
        if lo > hi {
            return Err(DslError::Syntax {
                line: open.line,
                col: open.col,
                expected: "an interval with lo <= hi".into(),
                found: format!("[{lo}, {hi}]"),
            });
        }
        Ok(Condition::InRange { signal, lo, hi, negated })
    }

    /// `[actuator "="] atom {"and" atom}`; only the first atom may carry the target.
    fn command_expr(&mut self) -> PResult<(Option<String>, CommandExpr, Span)> {
        let span = self.span();
        let target = if matches!(self.peek(), Tok::Ident(_)) && *self.peek2() == Tok::Eq {
            let (t, _) = self.name("an actuator name")?;
            self.bump();
            Some(t)
        } else {
            None
        };
        let mut atoms = vec![self.command_atom()?];
        while self.at_keyword("and") {
            self.bump();
            atoms.push(self.command_atom()?);
        }
        Ok((target, CommandExpr(atoms), span))
    }

    fn command_atom(&mut self) -> PResult<Command> {
        let (name, _) = self.name("a command")?;
        let mut arg = None;
        if *self.peek() == Tok::LParen {
            self.bump();
            if *self.peek() != Tok::RParen {
                arg = Some(self.integer()?);
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        Ok(Command { name, arg })
    }
}

pub fn parse_rules(source: &str) -> Result<RuleSet, DslError> {
    let toks = tokenize(source)?;
    Parser { toks, pos: 0 }.rule_set()
}

/// Parses a bare command expression such as `st_sp(200) and fwd()`.
pub fn parse_command_expr(source: &str) -> Result<CommandExpr, DslError> {
    let toks = tokenize(source)?;
    let mut p = Parser { toks, pos: 0 };
    let (target, cmd, span) = p.command_expr()?;
    if let Some(t) = target {
        return Err(DslError::Syntax {
            line: span.line,
            col: span.col,
            expected: "a command without actuator target".into(),
            found: format!("`{t} =`"),
        });
    }
    if *p.peek() != Tok::Eof {
        return p.error("end of input");
    }
    Ok(cmd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(src: &str) -> StateRule {
        match parse_rules(src).unwrap().rules.remove(0) {
            Rule::State(s) => s,
            r => panic!("not a state rule: {r:?}"),
        }
    }

    #[test]
    fn water_alarm_rule() {
        let r = state("INV_W :: (s_WL > 80) or (s_WT not in [10, 40]) -> buzzer = ON : buzzer = OFF");
        assert_eq!(r.name, "INV_W");
        assert_eq!(r.actuator, "buzzer");
        assert_eq!(
            r.condition,
            Condition::compare("s_WL", CmpOp::Gt, 80.0).or(Condition::not_in_range("s_WT", 10.0, 40.0))
        );
        assert_eq!(r.then_cmd, CommandExpr::single(Command::new("ON")));
        assert_eq!(r.else_cmd, Some(CommandExpr::single(Command::new("OFF"))));
    }

    #[test]
    fn rover_rule_without_else() {
        let r = state("INV_1 :: s_LF < -2500 -> motor = st_sp(120) and rht()");
        assert_eq!(r.condition, Condition::compare("s_LF", CmpOp::Lt, -2500.0));
        assert_eq!(r.then_cmd, CommandExpr(vec![Command::with_arg("st_sp", 120), Command::new("rht")]));
        assert!(r.else_cmd.is_none());
    }

    #[test]
    fn rate_rule_per_period() {
        let rs = parse_rules("RC_1 :: rate(task ctrl, motor) < 2 per period -> check : ignore").unwrap();
        let Rule::Rate(r) = &rs.rules[0] else { panic!() };
        assert_eq!((r.task.as_str(), r.actuator.as_str()), ("ctrl", "motor"));
        assert_eq!(r.threshold, 2);
        assert_eq!(r.window, RateWindow::Period);
    }

    #[test]
    fn rate_rule_sliding() {
        let rs = parse_rules("RC :: rate(task t, a) < 3 per 0.5ms -> check : ignore").unwrap();
        let Rule::Rate(r) = &rs.rules[0] else { panic!() };
        assert_eq!(r.window, RateWindow::Sliding(Micros(500)));
        let rs = parse_rules("RC :: rate(task t, a) < 3 per 2s -> check : ignore").unwrap();
        let Rule::Rate(r) = &rs.rules[0] else { panic!() };
        assert_eq!(r.window, RateWindow::Sliding(Micros(2_000_000)));
    }

    #[test]
    fn statements_split_by_semicolon_and_newline() {
        let rs = parse_rules("# rules\nA :: x > 1 -> m = fwd; B :: x < 1 -> m = lft\n\n").unwrap();
        assert_eq!(rs.rules.len(), 2);
    }

    #[test]
    fn unicode_notation_matches_ascii() {
        let a = parse_rules("R :: (a ≥ 1) ∨ ¬(b ∈ [0, 2]) → m = ON").unwrap();
        let b = parse_rules("R :: a >= 1 or not b in [0, 2] -> m = ON").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn precedence_and_binds_tighter() {
        let r = state("R :: a > 1 or b > 1 and c > 1 -> m = ON");
        assert_eq!(
            r.condition,
            Condition::compare("a", CmpOp::Gt, 1.0)
                .or(Condition::compare("b", CmpOp::Gt, 1.0).and(Condition::compare("c", CmpOp::Gt, 1.0)))
        );
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_rules("R :: a > -> m = ON") {
            Err(DslError::Syntax { line, col, expected, .. }) => {
                assert_eq!((line, col), (1, 10));
                assert_eq!(expected, "a number");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_rules("R :: a > 1 -> ON"), Err(DslError::Syntax { .. })));
        assert!(matches!(parse_rules("R :: a in [3, 1] -> m = ON"), Err(DslError::Syntax { .. })));
        assert!(matches!(
            parse_rules("R :: a > 1 -> m = ON : n = OFF"),
            Err(DslError::Syntax { .. })
        ));
        assert!(matches!(
            parse_rules("R :: rate(task t, a) < 0 per period -> check : ignore"),
            Err(DslError::Syntax { .. })
        ));
        assert!(matches!(parse_rules("R :: a > 1 -> m = ON extra"), Err(DslError::Syntax { .. })));
    }

    #[test]
    fn duplicate_rate_rule() {
        let src = "A :: rate(task t, m) < 2 per period -> check : ignore\nB :: rate(task t, m) < 3 per 10ms -> check : ignore";
        assert!(matches!(parse_rules(src), Err(DslError::DuplicateRateRule { line: 2, .. })));
    }

    #[test]
    fn spans_are_ignored_by_equality() {
        let a = parse_rules("R :: a > 1 -> m = ON").unwrap();
        let b = parse_rules("\n\n   R   ::   a>1->m=ON").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bare_command_expressions() {
        assert_eq!(
            parse_command_expr("st_sp(200) and fwd()").unwrap(),
            CommandExpr(vec![Command::with_arg("st_sp", 200), Command::new("fwd")])
        );
        assert_eq!(parse_command_expr("pulse(1000)").unwrap(), CommandExpr::single(Command::with_arg("pulse", 1000)));
        assert!(parse_command_expr("m = fwd").is_err());
    }
}
