use std::fmt::Write as _;

use super::ast::*;

/// Canonical text of a rule set: one rule per line, minimal parentheses.
pub fn pretty_print(rules: &RuleSet) -> String {
    let mut out = String::new();
    for r in &rules.rules {
        out.push_str(&print_rule(r));
        out.push('\n');
    }
    out
}

pub fn print_rule(rule: &Rule) -> String {
    match rule {
        Rule::State(s) => {
            let mut line = format!("{} :: {} -> {} = {}", s.name, print_condition(&s.condition), s.actuator, s.then_cmd);
            if let Some(e) = &s.else_cmd {
                let _ = write!(line, " : {} = {e}", s.actuator);
            }
            line
        }
        Rule::Rate(r) => {
            let window = match r.window {
                RateWindow::Period => "period".to_string(),
                RateWindow::Sliding(d) => format!("{d}ms"),
            };
            format!(
                "{} :: rate(task {}, {}) < {} per {window} -> check : ignore",
                r.name, r.task, r.actuator, r.threshold
            )
        }
    }
}

pub fn print_condition(c: &Condition) -> String {
    let mut s = String::new();
    write_or(c, &mut s);
    s
}

// Precedence levels: or < and < not/atom. A child is parenthesized when it
// binds looser than its slot allows; right operands of binary nodes also
// need parentheses at equal precedence because the parser folds left.
fn write_or(c: &Condition, out: &mut String) {
    match c {
        Condition::Or(l, r) => {
            write_or(l, out);
            out.push_str(" or ");
            if matches!(**r, Condition::Or(..)) {
                paren(r, out);
            } else {
                write_and(r, out);
            }
        }
        other => write_and(other, out),
    }
}

fn write_and(c: &Condition, out: &mut String) {
    match c {
        Condition::And(l, r) => {
            write_and(l, out);
            out.push_str(" and ");
            if matches!(**r, Condition::And(..) | Condition::Or(..)) {
                paren(r, out);
            } else {
                write_atom(r, out);
            }
        }
        Condition::Or(..) => paren(c, out),
        other => write_atom(other, out),
    }
}

fn write_atom(c: &Condition, out: &mut String) {
    match c {
        Condition::Compare { signal, op, value } => {
            let _ = write!(out, "{} {} {value}", signal.name, op.symbol());
        }
        Condition::InRange { signal, lo, hi, negated } => {
            let kw = if *negated { "not in" } else { "in" };
            let _ = write!(out, "{} {kw} [{lo}, {hi}]", signal.name);
        }
        Condition::Not(inner) => {
            out.push_str("not ");
            write_atom(inner, out);
        }
        Condition::And(..) | Condition::Or(..) => paren(c, out),
    }
}

fn paren(c: &Condition, out: &mut String) {
    out.push('(');
    write_or(c, out);
    out.push(')');
}

#[cfg(test)]
mod tests {
    use super::super::parse_rules;
    use super::*;

    #[test]
    fn empty_document() {
        assert_eq!(pretty_print(&RuleSet::default()), "");
    }

    #[test]
    fn rate_rule_is_one_line() {
        let rs = parse_rules("RC_1 :: rate(task ctrl, motor) < 2 per period -> check : ignore").unwrap();
        assert_eq!(pretty_print(&rs), "RC_1 :: rate(task ctrl, motor) < 2 per period -> check : ignore\n");
    }

    #[test]
    fn water_rule_canonical_text() {
        let rs = parse_rules("INV_W :: (s_WL > 80) or (s_WT not in [10, 40]) -> buzzer = ON : buzzer = OFF").unwrap();
        assert_eq!(
            pretty_print(&rs),
            "INV_W :: s_WL > 80 or s_WT not in [10, 40] -> buzzer = ON : buzzer = OFF\n"
        );
    }

    #[test]
    fn nesting_keeps_structure() {
        let c = Condition::compare("a", CmpOp::Lt, 1.0)
            .or(Condition::compare("b", CmpOp::Lt, 1.0))
            .and(Condition::compare("c", CmpOp::Eq, -0.5).negate())
            .and(Condition::in_range("d", 0.0, 1.0).and(Condition::compare("e", CmpOp::Ge, 2.0)));
        assert_eq!(print_condition(&c), "(a < 1 or b < 1) and not c = -0.5 and (d in [0, 1] and e >= 2)");
    }

    #[test]
    fn rover_rules_round_trip() {
        let src = "INV_1 :: s_LF < -2500 -> motor = st_sp(80) and rht()\n\
                   INV_2 :: s_LF > 2500 -> motor = st_sp(80) and lft()\n\
                   INV_3 :: s_LF in [-2500, 2500] -> motor = st_sp(120) and fwd()\n";
        let rs = parse_rules(src).unwrap();
        let printed = pretty_print(&rs);
        assert_eq!(printed, src);
        assert_eq!(parse_rules(&printed).unwrap(), rs);
    }
}
