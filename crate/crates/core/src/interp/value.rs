//! Runtime values.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};

use crate::syntax::{float_repr, FunctionDef};

/// Arbitrary-precision integer with an inline fast path.
#[derive(Clone, Debug)]
pub enum Int {
    Small(i64),
    Big(BigInt),
}

impl Int {
    pub fn from_big(v: BigInt) -> Int {
        match v.to_i64() {
            Some(s) => Int::Small(s),
            None => Int::Big(v),
        }
    }

    pub fn to_big(&self) -> BigInt {
        match self {
            Int::Small(v) => BigInt::from(*v),
            Int::Big(v) => v.clone(),
        }
    }

    pub fn to_i64(&self) -> Option<i64> {
        match self {
            Int::Small(v) => Some(*v),
            Int::Big(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Int::Small(v) => *v as f64,
            Int::Big(v) => v.to_f64().unwrap_or(f64::INFINITY),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Int::Small(0))
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Int::Small(v) => *v < 0,
            Int::Big(v) => v.is_negative(),
        }
    }

    pub fn add(&self, other: &Int) -> Int {
        if let (Int::Small(a), Int::Small(b)) = (self, other) {
            if let Some(r) = a.checked_add(*b) {
                return Int::Small(r);
            }
        }
        Int::from_big(self.to_big() + other.to_big())
    }

    pub fn sub(&self, other: &Int) -> Int {
        if let (Int::Small(a), Int::Small(b)) = (self, other) {
            if let Some(r) = a.checked_sub(*b) {
                return Int::Small(r);
            }
        }
        Int::from_big(self.to_big() - other.to_big())
    }

    pub fn mul(&self, other: &Int) -> Int {
        if let (Int::Small(a), Int::Small(b)) = (self, other) {
            if let Some(r) = a.checked_mul(*b) {
                return Int::Small(r);
            }
        }
        Int::from_big(self.to_big() * other.to_big())
    }

    pub fn neg(&self) -> Int {
        match self {
            Int::Small(v) => match v.checked_neg() {
                Some(r) => Int::Small(r),
                None => Int::from_big(-BigInt::from(*v)),
            },
            Int::Big(v) => Int::from_big(-v),
        }
    }

    /// Floor division; `None` when dividing by zero.
    pub fn floor_div(&self, other: &Int) -> Option<Int> {
        if other.is_zero() {
            return None;
        }
        if let (Int::Small(a), Int::Small(b)) = (self, other) {
            if !(*a == i64::MIN && *b == -1) {
                return Some(Int::Small(a.div_floor(b)));
            }
        }
        Some(Int::from_big(self.to_big().div_floor(&other.to_big())))
    }

    /// Modulo with the sign of the divisor; `None` when dividing by zero.
    pub fn modulo(&self, other: &Int) -> Option<Int> {
        if other.is_zero() {
            return None;
        }
        if let (Int::Small(a), Int::Small(b)) = (self, other) {
            if !(*a == i64::MIN && *b == -1) {
                return Some(Int::Small(a.mod_floor(b)));
            }
        }
        Some(Int::from_big(self.to_big().mod_floor(&other.to_big())))
    }

    /// Non-negative integer power.
    pub fn pow(&self, exp: u32) -> Int {
        if let Int::Small(a) = self {
            if let Some(r) = a.checked_pow(exp) {
                return Int::Small(r);
            }
        }
        Int::from_big(num_traits::pow(self.to_big(), exp as usize))
    }
}

impl PartialEq for Int {
    fn eq(&self, other: &Int) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Int {}

impl PartialOrd for Int {
    fn partial_cmp(&self, other: &Int) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Int {
    fn cmp(&self, other: &Int) -> Ordering {
        match (self, other) {
            (Int::Small(a), Int::Small(b)) => a.cmp(b),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl fmt::Display for Int {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Int::Small(v) => write!(f, "{v}"),
            Int::Big(v) => write!(f, "{v}"),
        }
    }
}

impl From<i64> for Int {
    fn from(v: i64) -> Int {
        Int::Small(v)
    }
}

impl From<&BigInt> for Int {
    fn from(v: &BigInt) -> Int {
        Int::from_big(v.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModuleId(pub usize);

pub struct Function {
    pub name: String,
    /// `module.function` or `module.Class.method`
    pub qualname: String,
    pub def: Rc<FunctionDef>,
    pub module: ModuleId,
    /// Names declared `global` anywhere in the body.
    pub globals: HashSet<String>,
}

pub struct Class {
    pub name: String,
    pub qualname: String,
    pub module: ModuleId,
    pub methods: IndexMap<String, Rc<Function>>,
}

pub struct Object {
    pub class: Rc<Class>,
    pub attrs: RefCell<IndexMap<String, Value>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Print,
    Input,
    Len,
    Range,
    Str,
    Int,
    Float,
    MathSin,
    // runtime shim
    Invoke,
    Emit,
    Stdin,
    SetStdin,
    State,
    LoadState,
    Without,
    Restore,
    CallMethod,
    ReadLine,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Print => "print",
            Builtin::Input => "input",
            Builtin::Len => "len",
            Builtin::Range => "range",
            Builtin::Str => "str",
            Builtin::Int => "int",
            Builtin::Float => "float",
            Builtin::MathSin => "sin",
            Builtin::Invoke => "invoke",
            Builtin::Emit => "emit",
            Builtin::Stdin => "stdin",
            Builtin::SetStdin => "set_stdin",
            Builtin::State => "state",
            Builtin::LoadState => "load_state",
            Builtin::Without => "without",
            Builtin::Restore => "restore",
            Builtin::CallMethod => "call_method",
            Builtin::ReadLine => "read_line",
        }
    }

    pub fn global(name: &str) -> Option<Builtin> {
        Some(match name {
            "print" => Builtin::Print,
            "input" => Builtin::Input,
            "len" => Builtin::Len,
            "range" => Builtin::Range,
            "str" => Builtin::Str,
            "int" => Builtin::Int,
            "float" => Builtin::Float,
            _ => return None,
        })
    }
}

pub type List = Rc<RefCell<Vec<Value>>>;
pub type Map = Rc<RefCell<IndexMap<String, Value>>>;

#[derive(Clone)]
pub enum Value {
    None,
    Bool(bool),
    Int(Int),
    Float(f64),
    Str(Rc<str>),
    List(List),
    Tuple(Rc<[Value]>),
    Map(Map),
    Object(Rc<Object>),
    Function(Rc<Function>),
    Class(Rc<Class>),
    Module(ModuleId, Rc<str>),
    Builtin(Builtin),
}

impl Value {
    pub fn int(v: i64) -> Value {
        Value::Int(Int::Small(v))
    }

    pub fn str(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    pub fn list(items: Vec<Value>) -> Value {
        Value::List(Rc::new(RefCell::new(items)))
    }

    pub fn map(items: IndexMap<String, Value>) -> Value {
        Value::Map(Rc::new(RefCell::new(items)))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::None => "NoneType",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
            Value::Map(_) => "dict",
            Value::Object(_) => "object",
            Value::Function(_) => "function",
            Value::Class(_) => "type",
            Value::Module(..) => "module",
            Value::Builtin(_) => "builtin_function_or_method",
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(i) => !i.is_zero(),
            Value::Float(f) => *f != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::List(l) => !l.borrow().is_empty(),
            Value::Tuple(t) => !t.is_empty(),
            Value::Map(m) => !m.borrow().is_empty(),
            _ => true,
        }
    }

    /// Integer view of ints and bools.
    pub fn as_int(&self) -> Option<Int> {
        match self {
            Value::Int(i) => Some(i.clone()),
            Value::Bool(b) => Some(Int::Small(*b as i64)),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Float(f) => Some(*f),
            Value::Int(i) => Some(i.to_f64()),
            Value::Bool(b) => Some(*b as i64 as f64),
            _ => None,
        }
    }

    /// The text `print` and `str()` produce.
    pub fn to_str(&self) -> String {
        match self {
            Value::Str(s) => s.to_string(),
            other => other.repr(),
        }
    }

    pub fn repr(&self) -> String {
        let mut out = String::new();
        self.repr_into(&mut out);
        out
    }

    fn repr_into(&self, out: &mut String) {
        match self {
            Value::None => out.push_str("None"),
            Value::Bool(true) => out.push_str("True"),
            Value::Bool(false) => out.push_str("False"),
            Value::Int(i) => out.push_str(&i.to_string()),
            Value::Float(f) => out.push_str(&float_repr(*f)),
            Value::Str(s) => out.push_str(&str_repr(s)),
            Value::List(items) => {
                out.push('[');
                for (i, v) in items.borrow().iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    v.repr_into(out);
                }
                out.push(']');
            }
            Value::Tuple(items) => {
                out.push('(');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    v.repr_into(out);
                }
                if items.len() == 1 {
                    out.push(',');
                }
                out.push(')');
            }
            Value::Map(items) => {
                out.push('{');
                for (i, (k, v)) in items.borrow().iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(&str_repr(k));
                    out.push_str(": ");
                    v.repr_into(out);
                }
                out.push('}');
            }
            Value::Object(o) => {
                out.push_str(&format!("<{} object>", o.class.qualname));
            }
            Value::Function(f) => out.push_str(&format!("<function {}>", f.qualname)),
            Value::Class(c) => out.push_str(&format!("<class '{}'>", c.qualname)),
            Value::Module(_, name) => out.push_str(&format!("<module '{name}'>")),
            Value::Builtin(b) => out.push_str(&format!("<built-in function {}>", b.name())),
        }
    }

    /// Structural equality with numeric coercion (`1 == 1.0`, `True == 1`).
    pub fn py_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::None, Value::None) => true,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::List(a), Value::List(b)) => Rc::ptr_eq(a, b) || seq_eq(&a.borrow(), &b.borrow()),
            (Value::Tuple(a), Value::Tuple(b)) => seq_eq(a, b),
            (Value::Map(a), Value::Map(b)) => {
                if Rc::ptr_eq(a, b) {
                    return true;
                }
                let (a, b) = (a.borrow(), b.borrow());
                a.len() == b.len() && a.iter().all(|(k, v)| b.get(k).is_some_and(|w| v.py_eq(w)))
            }
            (Value::Object(a), Value::Object(b)) => Rc::ptr_eq(a, b),
            (Value::Function(a), Value::Function(b)) => Rc::ptr_eq(a, b),
            (Value::Class(a), Value::Class(b)) => Rc::ptr_eq(a, b),
            (Value::Module(a, _), Value::Module(b, _)) => a == b,
            (Value::Builtin(a), Value::Builtin(b)) => a == b,
            (a, b) => match (a.as_int(), b.as_int()) {
                (Some(x), Some(y)) => x == y,
                _ => match (a.as_f64(), b.as_f64()) {
                    (Some(x), Some(y)) => x == y,
                    _ => false,
                },
            },
        }
    }

    /// Ordering for `<`-style comparisons; `None` when the types are not
    /// comparable.
    pub fn py_cmp(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::List(a), Value::List(b)) => seq_cmp(&a.borrow(), &b.borrow()),
            (Value::Tuple(a), Value::Tuple(b)) => seq_cmp(a, b),
            (a, b) => match (a.as_int(), b.as_int()) {
                (Some(x), Some(y)) => Some(x.cmp(&y)),
                _ => match (a.as_f64(), b.as_f64()) {
                    (Some(x), Some(y)) => x.partial_cmp(&y),
                    _ => None,
                },
            },
        }
    }
}

fn seq_eq(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.py_eq(y))
}

fn seq_cmp(a: &[Value], b: &[Value]) -> Option<Ordering> {
    for (x, y) in a.iter().zip(b) {
        if !x.py_eq(y) {
            return x.py_cmp(y);
        }
    }
    Some(a.len().cmp(&b.len()))
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.repr())
    }
}

/// String literal the way the subject language's `repr` writes it.
pub fn str_repr(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') {
        '"'
    } else {
        '\''
    };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 || c as u32 == 0x7f => out.push_str(&format!("\\x{:02x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_overflow_promotes() {
        let big = Int::Small(i64::MAX).add(&Int::Small(1));
        assert!(matches!(big, Int::Big(_)));
        assert_eq!(big.to_string(), "9223372036854775808");
        assert_eq!(big.sub(&Int::Small(1)), Int::Small(i64::MAX));
        assert!(matches!(big.sub(&Int::Small(1)), Int::Small(_)));
    }

    #[test]
    fn floor_semantics() {
        assert_eq!(Int::Small(-7).floor_div(&Int::Small(2)), Some(Int::Small(-4)));
        assert_eq!(Int::Small(-7).modulo(&Int::Small(2)), Some(Int::Small(1)));
        assert_eq!(Int::Small(7).modulo(&Int::Small(-2)), Some(Int::Small(-1)));
        assert_eq!(Int::Small(1).floor_div(&Int::Small(0)), None);
    }

    #[test]
    fn reprs() {
        let v = Value::list(vec![
            Value::int(1),
            Value::str("a'b"),
            Value::Tuple(Rc::from(vec![Value::Float(2.0)])),
            Value::None,
        ]);
        assert_eq!(v.repr(), "[1, \"a'b\", (2.0,), None]");
        assert_eq!(Value::str("x").to_str(), "x");
        assert_eq!(Value::str("x").repr(), "'x'");
    }

    #[test]
    fn numeric_equality() {
        assert!(Value::int(1).py_eq(&Value::Float(1.0)));
        assert!(Value::Bool(true).py_eq(&Value::int(1)));
        assert!(!Value::int(1).py_eq(&Value::str("1")));
        let t = Value::Tuple(Rc::from(vec![Value::int(1)]));
        let l = Value::list(vec![Value::int(1)]);
        assert!(!t.py_eq(&l));
    }
}
