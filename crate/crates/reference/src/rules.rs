//! Rule-set evaluation via shunting-yard.
//!
//! Predicates are converted to postfix form and evaluated with a stack of
//! booleans; points are plain `f64`.

#[derive(Debug, Clone, PartialEq)]
pub enum RefAction {
    Set(f64),
    Add(f64),
    Deduct(f64),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Has(String),
    Not,
    And,
    Or,
    Open,
    Close,
}

fn lex(src: &str) -> Vec<Tok> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' {
            out.push(Tok::Open);
            i += 1;
        } else if c == ')' {
            out.push(Tok::Close);
            i += 1;
        } else {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            match word.as_str() {
                "not" => out.push(Tok::Not),
                "and" => out.push(Tok::And),
                "or" => out.push(Tok::Or),
                "has" => {
                    // has ( ID )
                    while chars[i] != '(' {
                        i += 1;
                    }
                    i += 1;
                    let id_start = i;
                    while chars[i] != ')' {
                        i += 1;
                    }
                    let id: String = chars[id_start..i].iter().collect::<String>().trim().to_string();
                    i += 1;
                    out.push(Tok::Has(id));
                }
                _ => panic!("unexpected word {word:?} in {src:?}"),
            }
        }
    }
    out
}

fn precedence(t: &Tok) -> u8 {
    match t {
        Tok::Not => 3,
        Tok::And => 2,
        Tok::Or => 1,
        _ => 0,
    }
}

fn to_postfix(tokens: Vec<Tok>) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut ops: Vec<Tok> = Vec::new();
    for t in tokens {
        match t {
            Tok::Has(_) => out.push(t),
            Tok::Open => ops.push(t),
            Tok::Close => {
                while let Some(op) = ops.pop() {
                    if op == Tok::Open {
                        break;
                    }
                    out.push(op);
                }
            }
            Tok::Not => ops.push(t),
            Tok::And | Tok::Or => {
                // Left-associative binary operators; `not` is a prefix unary.
                while let Some(top) = ops.last() {
                    if *top != Tok::Open && precedence(top) >= precedence(&t) {
                        out.push(ops.pop().unwrap());
                    } else {
                        break;
                    }
                }
                ops.push(t);
            }
        }
    }
    while let Some(op) = ops.pop() {
        out.push(op);
    }
    out
}

pub fn eval_predicate(src: &str, set: &[&str]) -> bool {
    let mut stack: Vec<bool> = Vec::new();
    for t in to_postfix(lex(src)) {
        match t {
            Tok::Has(id) => stack.push(set.contains(&id.as_str())),
            Tok::Not => {
                let v = stack.pop().unwrap();
                stack.push(!v);
            }
            Tok::And => {
                let (b, a) = (stack.pop().unwrap(), stack.pop().unwrap());
                stack.push(a && b);
            }
            Tok::Or => {
                let (b, a) = (stack.pop().unwrap(), stack.pop().unwrap());
                stack.push(a || b);
            }
            Tok::Open | Tok::Close => unreachable!(),
        }
    }
    assert_eq!(stack.len(), 1, "malformed predicate {src:?}");
    stack[0]
}

/// Runs every matching rule in order and clamps to `[0, max]`.
pub fn score(base: f64, rules: &[(String, RefAction)], max: f64, set: &[&str]) -> f64 {
    let mut total = base;
    for (pred, action) in rules {
        if eval_predicate(pred, set) {
            match action {
                RefAction::Set(p) => total = *p,
                RefAction::Add(d) => total += d,
                RefAction::Deduct(d) => total -= d,
            }
        }
    }
    total.max(0.0).min(max)
}
