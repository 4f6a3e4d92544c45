//! Infix printing that re-parses to the same canonical expression.

use std::fmt::{self, Write};

use super::{is_negated, Expr, Node, Number};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self);
        f.write_str(&s)
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e.kind() {
        Node::Add(ts) => {
            write_expr(out, &ts[0]);
            for t in &ts[1..] {
                if is_negated(t) {
                    out.push_str(" - ");
                    write_expr(out, &-t);
                } else {
                    out.push_str(" + ");
                    write_expr(out, t);
                }
            }
        }
        Node::Mul(fs) => write_product(out, fs),
        Node::Pow(_, _) => write_product(out, std::slice::from_ref(e)),
        _ => write_atom(out, e),
    }
}

/// Symbols, numbers and function calls.
fn write_atom(out: &mut String, e: &Expr) {
    match e.kind() {
        Node::Num(n) => {
            let _ = write!(out, "{n}");
        }
        Node::Sym(s) => out.push_str(s.name()),
        Node::Func(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_expr(out, a);
            out.push(')');
        }
        _ => {
            out.push('(');
            write_expr(out, e);
            out.push(')');
        }
    }
}

fn write_power(out: &mut String, base: &Expr, exp: &Number) {
    let needs_parens = match base.kind() {
        Node::Num(n) => n.is_negative() || !n.is_integer(),
        Node::Sym(_) | Node::Func(_, _) => false,
        _ => true,
    };
    if needs_parens {
        out.push('(');
        write_expr(out, base);
        out.push(')');
    } else {
        write_atom(out, base);
    }
    if exp.is_one() {
        return;
    }
    if exp.is_integer() && !exp.is_negative() {
        let _ = write!(out, "^{exp}");
    } else {
        let _ = write!(out, "^({exp})");
    }
}

fn write_product(out: &mut String, fs: &[Expr]) {
    let mut numer: Vec<String> = Vec::new();
    let mut denom: Vec<String> = Vec::new();
    let mut negative = false;
    for f in fs {
        match f.kind() {
            Node::Num(c) => {
                negative = c.is_negative();
                let (n, d) = c.numer_denom();
                let n = if negative { -n } else { n };
                if n != 1.into() {
                    numer.push(n.to_string());
                }
                if d != 1.into() {
                    denom.push(d.to_string());
                }
            }
            Node::Pow(b, e) => {
                let mut s = String::new();
                if e.is_negative() {
                    write_power(&mut s, b, &e.neg());
                    denom.push(s);
                } else {
                    write_power(&mut s, b, e);
                    numer.push(s);
                }
            }
            _ => {
                let mut s = String::new();
                write_atom(&mut s, f);
                numer.push(s);
            }
        }
    }
    if negative {
        out.push('-');
    }
    if numer.is_empty() {
        out.push('1');
    } else {
        out.push_str(&numer.join("*"));
    }
    match denom.len() {
        0 => {}
        1 => {
            out.push('/');
            out.push_str(&denom[0]);
        }
        _ => {
            out.push_str("/(");
            out.push_str(&denom.join("*"));
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Alphabet};

    fn round(src: &str) -> String {
        let a = Alphabet::new(["x1", "x2", "y1"]);
        let e = parse(src, &a).unwrap();
        let printed = e.to_string();
        assert_eq!(parse(&printed, &a).unwrap(), e, "round trip of {printed}");
        printed
    }

    #[test]
    fn readable_output() {
        assert_eq!(round("x1 - 2*y1"), "x1 - 2*y1");
        assert_eq!(round("1/(1 + x1^2)"), "1/(1 + x1^2)");
        assert_eq!(round("-3*x1/(2*y1^2)"), "-3*x1/(2*y1^2)");
        assert_eq!(round("y1^2/2"), "y1^2/2");
        assert_eq!(round("sqrt(x1)"), "x1^(1/2)");
        assert_eq!(round("1/2 + x1"), "1/2 + x1");
    }

    #[test]
    fn awkward_forms_round_trip() {
        round("3*sqrt(2)");
        round("(-2)^(1/3)");
        round("sqrt(2*x1)");
        round("sin(-x1 + y1)*cos(x2)^2");
        round("x1/sqrt(y1)");
        round("1/(x1 + 1)^(1/2) - 1/7");
        round("exp(x1)^(-2)");
    }
}
