//! Sequential genetic programs over bit-vector terminals.
//!
//! Terminals are bit vectors (evolvable or frozen) and integers; operators
//! are `<`, `>`, `+`, `par`, `⊕`, `if` and `return`. A program is a list of
//! statements executed in order; the first `return` reached yields the
//! phenotype.
//!
//! Programs print in a line-oriented text form (see `docs/gp-dump.md`) that
//! [`GpProgram::parse`] reads back.

use std::collections::HashMap;
use std::fmt;

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::genome::Genome;
use crate::stream::SeededStream;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Operand {
    Var(String),
    Bits(BitVector),
    Int(u64),
}

impl Operand {
    pub fn var(name: &str) -> Self {
        Operand::Var(name.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    Less,
    Greater,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Statement {
    /// `name = value`, optionally part of the evolvable genome.
    Assign {
        name: String,
        value: BitVector,
        evolvable: bool,
    },
    /// `if lhs < rhs: return ret` (or `>`).
    IfCompareReturn {
        lhs: Operand,
        cmp: Comparison,
        rhs: Operand,
        ret: Operand,
    },
    /// `if par(cond): return ret`.
    IfParityReturn { cond: String, ret: Operand },
    /// `acc ⊕= operand`, optionally guarded by `if par(guard)`.
    XorAccumulate {
        guard: Option<String>,
        acc: String,
        operand: String,
    },
    /// `if t1 + t2 + ... > threshold: return then else: return otherwise`.
    /// Terms must be length-1 vectors and are summed as integers.
    IfSumGreaterReturnElse {
        terms: Vec<String>,
        threshold: u64,
        then: Operand,
        otherwise: Operand,
    },
    Return(Operand),
}

/// One evolvable terminal in the flattened genome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub statement: usize,
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Where each evolvable terminal lives in the flattened genome.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct GenomeLayout {
    pub slots: Vec<Slot>,
    pub total: usize,
}

impl GenomeLayout {
    pub fn slot(&self, name: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GpProgram {
    dim: usize,
    statements: Vec<Statement>,
    layout: GenomeLayout,
}

impl GpProgram {
    /// Validates name resolution and builds the evolvable layout.
    pub fn new(dim: usize, statements: Vec<Statement>) -> Result<Self> {
        let mut defined: HashMap<&str, usize> = HashMap::new();
        let mut slots = Vec::new();
        let mut total = 0;
        for (idx, st) in statements.iter().enumerate() {
            let need = |name: &str, defined: &HashMap<&str, usize>| -> Result<()> {
                if defined.contains_key(name) {
                    Ok(())
                } else {
                    Err(Error::UndefinedName(name.to_string()))
                }
            };
            let need_op = |op: &Operand, defined: &HashMap<&str, usize>| -> Result<()> {
                match op {
                    Operand::Var(n) => need(n, defined),
                    _ => Ok(()),
                }
            };
            let need_vec = |op: &Operand, defined: &HashMap<&str, usize>| -> Result<()> {
                if let Operand::Int(_) = op {
                    return Err(Error::InvalidProgram(format!(
                        "statement {idx}: an integer cannot be returned"
                    )));
                }
                need_op(op, defined)
            };
            match st {
                Statement::Assign {
                    name,
                    value,
                    evolvable,
                } => {
                    if !is_identifier(name) {
                        return Err(Error::InvalidProgram(format!("bad name `{name}`")));
                    }
                    if defined.insert(name, idx).is_some() {
                        return Err(Error::InvalidProgram(format!(
                            "`{name}` assigned twice"
                        )));
                    }
                    if *evolvable {
                        slots.push(Slot {
                            statement: idx,
                            name: name.clone(),
                            offset: total,
                            len: value.len(),
                        });
                        total += value.len();
                    }
                }
                Statement::IfCompareReturn { lhs, rhs, ret, .. } => {
                    need_op(lhs, &defined)?;
                    need_op(rhs, &defined)?;
                    need_vec(ret, &defined)?;
                }
                Statement::IfParityReturn { cond, ret } => {
                    need(cond, &defined)?;
                    need_vec(ret, &defined)?;
                }
                Statement::XorAccumulate {
                    guard,
                    acc,
                    operand,
                } => {
                    if let Some(g) = guard {
                        need(g, &defined)?;
                    }
                    need(acc, &defined)?;
                    need(operand, &defined)?;
                }
                Statement::IfSumGreaterReturnElse {
                    terms,
                    then,
                    otherwise,
                    ..
                } => {
                    if terms.is_empty() {
                        return Err(Error::InvalidProgram("empty sum".into()));
                    }
                    for t in terms {
                        need(t, &defined)?;
                    }
                    need_vec(then, &defined)?;
                    need_vec(otherwise, &defined)?;
                }
                Statement::Return(op) => need_vec(op, &defined)?,
            }
        }
        Ok(GpProgram {
            dim,
            statements,
            layout: GenomeLayout { slots, total },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn layout(&self) -> &GenomeLayout {
        &self.layout
    }

    /// Current value of an assigned terminal.
    pub fn terminal(&self, name: &str) -> Option<&BitVector> {
        self.statements.iter().find_map(|s| match s {
            Statement::Assign { name: n, value, .. } if n == name => Some(value),
            _ => None,
        })
    }

    /// Total number of bits plus integer literals in the program: the
    /// genome size in symbols, evolvable and frozen alike.
    pub fn symbol_size(&self) -> usize {
        let op = |o: &Operand| match o {
            Operand::Bits(b) => b.len(),
            Operand::Int(_) => 1,
            Operand::Var(_) => 0,
        };
        self.statements
            .iter()
            .map(|s| match s {
                Statement::Assign { value, .. } => value.len(),
                Statement::IfCompareReturn { lhs, rhs, ret, .. } => op(lhs) + op(rhs) + op(ret),
                Statement::IfParityReturn { ret, .. } => op(ret),
                Statement::XorAccumulate { .. } => 0,
                Statement::IfSumGreaterReturnElse {
                    then, otherwise, ..
                } => 1 + op(then) + op(otherwise),
                Statement::Return(o) => op(o),
            })
            .sum()
    }

    /// Runs the program and returns its phenotype.
    pub fn evaluate(&self) -> Result<BitVector> {
        let mut env: HashMap<&str, BitVector> = HashMap::new();
        for st in &self.statements {
            match st {
                Statement::Assign { name, value, .. } => {
                    env.insert(name, value.clone());
                }
                Statement::IfCompareReturn { lhs, cmp, rhs, ret } => {
                    let ord = compare(lhs, rhs, &env)?;
                    let hit = match cmp {
                        Comparison::Less => ord.is_lt(),
                        Comparison::Greater => ord.is_gt(),
                    };
                    if hit {
                        return self.finish(resolve(ret, &env)?);
                    }
                }
                Statement::IfParityReturn { cond, ret } => {
                    if lookup(cond, &env)?.parity()? {
                        return self.finish(resolve(ret, &env)?);
                    }
                }
                Statement::XorAccumulate {
                    guard,
                    acc,
                    operand,
                } => {
                    let active = match guard {
                        Some(g) => lookup(g, &env)?.parity()?,
                        None => true,
                    };
                    if active {
                        let next = lookup(acc, &env)?.xor_broadcast(lookup(operand, &env)?)?;
                        env.insert(acc, next);
                    }
                }
                Statement::IfSumGreaterReturnElse {
                    terms,
                    threshold,
                    then,
                    otherwise,
                } => {
                    let mut sum = 0u64;
                    for t in terms {
                        let v = lookup(t, &env)?;
                        if v.len() != 1 {
                            return Err(Error::InvalidProgram(format!(
                                "`+` needs length-1 operands, `{t}` has length {}",
                                v.len()
                            )));
                        }
                        sum += v.as_integer()?;
                    }
                    let chosen = if sum > *threshold { then } else { otherwise };
                    return self.finish(resolve(chosen, &env)?);
                }
                Statement::Return(op) => return self.finish(resolve(op, &env)?),
            }
        }
        Err(Error::FellThrough)
    }

    fn finish(&self, y: BitVector) -> Result<BitVector> {
        if y.len() != self.dim {
            return Err(Error::LengthMismatch(y.len(), self.dim));
        }
        Ok(y)
    }

    /// The evolvable bits in statement order, with their layout.
    pub fn flatten(&self) -> (BitVector, GenomeLayout) {
        let parts: Vec<&BitVector> = self
            .layout
            .slots
            .iter()
            .map(|s| match &self.statements[s.statement] {
                Statement::Assign { value, .. } => value,
                _ => unreachable!("slots point at assignments"),
            })
            .collect();
        (BitVector::concat(&parts), self.layout.clone())
    }

    /// Replaces the evolvable bits; inverse of [`GpProgram::flatten`].
    pub fn unflatten(&self, genome: &BitVector) -> Result<GpProgram> {
        if genome.len() != self.layout.total {
            return Err(Error::LengthMismatch(genome.len(), self.layout.total));
        }
        let mut statements = self.statements.clone();
        for slot in &self.layout.slots {
            if let Statement::Assign { value, .. } = &mut statements[slot.statement] {
                *value = genome.slice(slot.offset, slot.len);
            }
        }
        Ok(GpProgram {
            dim: self.dim,
            statements,
            layout: self.layout.clone(),
        })
    }

    /// True when the programs differ at most in evolvable values.
    pub fn same_structure(&self, other: &GpProgram) -> bool {
        if self.dim != other.dim || self.layout != other.layout {
            return false;
        }
        self.statements
            .iter()
            .zip(&other.statements)
            .all(|(a, b)| match (a, b) {
                (
                    Statement::Assign {
                        name: n1,
                        value: v1,
                        evolvable: true,
                    },
                    Statement::Assign {
                        name: n2,
                        value: v2,
                        evolvable: true,
                    },
                ) => n1 == n2 && v1.len() == v2.len(),
                _ => a == b,
            })
    }

    pub fn parse(text: &str) -> Result<GpProgram> {
        parse_program(text)
    }
}

/// Free-function form of [`GpProgram::evaluate`].
pub fn gp_evaluate(program: &GpProgram) -> Result<BitVector> {
    program.evaluate()
}

/// Free-function form of [`GpProgram::flatten`].
pub fn flatten_genome(program: &GpProgram) -> (BitVector, GenomeLayout) {
    program.flatten()
}

impl Genome for GpProgram {
    type Symbol = bool;

    fn symbols(&self) -> Vec<bool> {
        self.flatten().0.to_bits()
    }

    fn with_symbols(&self, symbols: &[bool]) -> Result<Self> {
        self.unflatten(&BitVector::from_bits(symbols))
    }

    fn compatible(&self, other: &Self) -> bool {
        self.same_structure(other)
    }

    fn symbol_count(&self) -> usize {
        self.layout.total
    }
}

fn lookup<'a>(name: &str, env: &'a HashMap<&str, BitVector>) -> Result<&'a BitVector> {
    env.get(name)
        .ok_or_else(|| Error::UndefinedName(name.to_string()))
}

fn resolve(op: &Operand, env: &HashMap<&str, BitVector>) -> Result<BitVector> {
    match op {
        Operand::Var(n) => lookup(n, env).cloned(),
        Operand::Bits(b) => Ok(b.clone()),
        Operand::Int(_) => Err(Error::InvalidProgram("integer used as a vector".into())),
    }
}

fn compare(
    lhs: &Operand,
    rhs: &Operand,
    env: &HashMap<&str, BitVector>,
) -> Result<std::cmp::Ordering> {
    match (lhs, rhs) {
        (Operand::Int(a), Operand::Int(b)) => Ok(a.cmp(b)),
        (Operand::Int(a), other) => {
            let v = resolve(other, env)?;
            Ok(BitVector::from_integer(*a, v.len())?.compare(&v)?)
        }
        (other, Operand::Int(b)) => {
            let v = resolve(other, env)?;
            Ok(v.compare(&BitVector::from_integer(*b, v.len())?)?)
        }
        (a, b) => {
            let (a, b) = (resolve(a, env)?, resolve(b, env)?);
            a.compare(&b)
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

fn assign(name: &str, value: BitVector, evolvable: bool) -> Statement {
    Statement::Assign {
        name: name.to_string(),
        value,
        evolvable,
    }
}

/// `if par(a): return b / return c`, with `a`, `b`, `c` evolvable.
pub fn switch_template(a: BitVector, b: BitVector, c: BitVector) -> Result<GpProgram> {
    if b.len() != c.len() {
        return Err(Error::Dimension(format!(
            "dim(b) = {} but dim(c) = {}",
            b.len(),
            c.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("control vector a must be non-empty".into()));
    }
    let n = b.len();
    GpProgram::new(
        n,
        vec![
            assign("a", a, true),
            assign("b", b, true),
            assign("c", c, true),
            Statement::IfParityReturn {
                cond: "a".into(),
                ret: Operand::var("b"),
            },
            Statement::Return(Operand::var("c")),
        ],
    )
}

/// Switch template with an `L`-bit control vector drawn from `rng`.
pub fn make_switch_template(
    control_len: usize,
    b: BitVector,
    c: BitVector,
    rng: &mut SeededStream,
) -> Result<GpProgram> {
    let a = BitVector::from_fn(control_len, |_| rng.coin());
    switch_template(a, b, c)
}

/// `y = 0; if par(a1): y ⊕= b; if par(a2): y ⊕= c; return y`.
pub fn make_xor_block_template(
    b: BitVector,
    c: BitVector,
    a1: bool,
    a2: bool,
) -> Result<GpProgram> {
    if b.len() != c.len() {
        return Err(Error::Dimension(format!(
            "dim(b) = {} but dim(c) = {}",
            b.len(),
            c.len()
        )));
    }
    let n = b.len();
    GpProgram::new(
        n,
        vec![
            assign("a1", BitVector::from_bits(&[a1]), true),
            assign("a2", BitVector::from_bits(&[a2]), true),
            assign("b", b, true),
            assign("c", c, true),
            assign("y", BitVector::zeros(n), false),
            Statement::XorAccumulate {
                guard: Some("a1".into()),
                acc: "y".into(),
                operand: "b".into(),
            },
            Statement::XorAccumulate {
                guard: Some("a2".into()),
                acc: "y".into(),
                operand: "c".into(),
            },
            Statement::Return(Operand::var("y")),
        ],
    )
}

/// The two parents `(a, b) = (0, 1)` and `(1, 0)` of
/// `if a + b > 1: return 1…1 else: return 0…0`.
pub fn make_miracle_gp_pair(n: usize) -> Result<(GpProgram, GpProgram)> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let parent = |a: bool, b: bool| {
        GpProgram::new(
            n,
            vec![
                assign("a", BitVector::from_bits(&[a]), true),
                assign("b", BitVector::from_bits(&[b]), true),
                Statement::IfSumGreaterReturnElse {
                    terms: vec!["a".into(), "b".into()],
                    threshold: 1,
                    then: Operand::Bits(BitVector::ones(n)),
                    otherwise: Operand::Bits(BitVector::zeros(n)),
                },
            ],
        )
    };
    Ok((parent(false, true)?, parent(true, false)?))
}

// ---------------------------------------------------------------------------
// Text form
// ---------------------------------------------------------------------------

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(n) => f.write_str(n),
            Operand::Bits(b) => write!(f, "[{b}]"),
            Operand::Int(i) => write!(f, "{i}"),
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Assign {
                name,
                value,
                evolvable,
            } => {
                if *evolvable {
                    f.write_str("evolve ")?;
                }
                write!(f, "{name} = [{value}]")
            }
            Statement::IfCompareReturn { lhs, cmp, rhs, ret } => {
                let op = match cmp {
                    Comparison::Less => "<",
                    Comparison::Greater => ">",
                };
                write!(f, "if {lhs} {op} {rhs}: return {ret}")
            }
            Statement::IfParityReturn { cond, ret } => write!(f, "if par({cond}): return {ret}"),
            Statement::XorAccumulate {
                guard,
                acc,
                operand,
            } => match guard {
                Some(g) => write!(f, "if par({g}): {acc} ^= {operand}"),
                None => write!(f, "{acc} ^= {operand}"),
            },
            Statement::IfSumGreaterReturnElse {
                terms,
                threshold,
                then,
                otherwise,
            } => write!(
                f,
                "if {} > {threshold}: return {then} else: return {otherwise}",
                terms.join(" + ")
            ),
            Statement::Return(op) => write!(f, "return {op}"),
        }
    }
}

impl fmt::Display for GpProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "program {}", self.dim)?;
        for st in &self.statements {
            writeln!(f, "{st}")?;
        }
        Ok(())
    }
}

fn parse_program(text: &str) -> Result<GpProgram> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        message: "missing `program <n>` header".into(),
    })?;
    let dim = header
        .strip_prefix("program ")
        .and_then(|d| d.trim().parse().ok())
        .ok_or(Error::Parse {
            line: hline,
            message: "expected `program <n>`".into(),
        })?;
    let mut statements = Vec::new();
    for (line, l) in lines {
        let st = parse_statement(l).map_err(|message| Error::Parse { line, message })?;
        statements.push(st);
    }
    GpProgram::new(dim, statements)
}

fn parse_operand(s: &str) -> std::result::Result<Operand, String> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        return inner
            .parse()
            .map(Operand::Bits)
            .map_err(|_| format!("bad bit literal `{s}`"));
    }
    if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
        return s
            .parse()
            .map(Operand::Int)
            .map_err(|_| format!("bad integer `{s}`"));
    }
    if is_identifier(s) {
        return Ok(Operand::Var(s.to_string()));
    }
    Err(format!("bad operand `{s}`"))
}

fn parse_name(s: &str) -> std::result::Result<String, String> {
    let s = s.trim();
    if is_identifier(s) {
        Ok(s.to_string())
    } else {
        Err(format!("bad name `{s}`"))
    }
}

fn parse_return(s: &str) -> std::result::Result<Operand, String> {
    let op = s
        .trim()
        .strip_prefix("return ")
        .ok_or_else(|| format!("expected `return`, found `{s}`"))?;
    parse_operand(op)
}

fn parse_xor(s: &str, guard: Option<String>) -> std::result::Result<Statement, String> {
    let (acc, operand) = s.split_once("^=").ok_or("expected `^=`")?;
    Ok(Statement::XorAccumulate {
        guard,
        acc: parse_name(acc)?,
        operand: parse_name(operand)?,
    })
}

fn parse_statement(l: &str) -> std::result::Result<Statement, String> {
    if l.starts_with("return ") {
        return Ok(Statement::Return(parse_return(l)?));
    }
    if let Some(rest) = l.strip_prefix("if ") {
        let (cond, body) = rest.split_once(':').ok_or("missing `:` after condition")?;
        let cond = cond.trim();
        let body = body.trim();
        if let Some(inner) = cond.strip_prefix("par(").and_then(|c| c.strip_suffix(')')) {
            let name = parse_name(inner)?;
            if body.contains("^=") {
                return parse_xor(body, Some(name));
            }
            return Ok(Statement::IfParityReturn {
                cond: name,
                ret: parse_return(body)?,
            });
        }
        if cond.contains('+') {
            let (sum, threshold) = cond.split_once('>').ok_or("sum needs `>`")?;
            let terms = sum
                .split('+')
                .map(parse_name)
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let threshold = threshold
                .trim()
                .parse()
                .map_err(|_| format!("bad threshold `{}`", threshold.trim()))?;
            let (then, otherwise) = body.split_once("else:").ok_or("sum needs `else:`")?;
            return Ok(Statement::IfSumGreaterReturnElse {
                terms,
                threshold,
                then: parse_return(then)?,
                otherwise: parse_return(otherwise)?,
            });
        }
        let (lhs, cmp, rhs) = if let Some((a, b)) = cond.split_once('<') {
            (a, Comparison::Less, b)
        } else if let Some((a, b)) = cond.split_once('>') {
            (a, Comparison::Greater, b)
        } else {
            return Err(format!("unknown condition `{cond}`"));
        };
        return Ok(Statement::IfCompareReturn {
            lhs: parse_operand(lhs)?,
            cmp,
            rhs: parse_operand(rhs)?,
            ret: parse_return(body)?,
        });
    }
    if l.contains("^=") {
        return parse_xor(l, None);
    }
    let (evolvable, rest) = match l.strip_prefix("evolve ") {
        Some(r) => (true, r),
        None => (false, l),
    };
    let (name, value) = rest.split_once('=').ok_or_else(|| format!("cannot parse `{l}`"))?;
    match parse_operand(value)? {
        Operand::Bits(value) => Ok(Statement::Assign {
            name: parse_name(name)?,
            value,
            evolvable,
        }),
        _ => Err("assignments take a bit literal".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bv;
    use proptest::prelude::*;

    #[test]
    fn miracle_parents_return_zeros() {
        for n in [4, 64, 1024] {
            let (p1, p2) = make_miracle_gp_pair(n).unwrap();
            assert_eq!(p1.evaluate().unwrap(), BitVector::zeros(n));
            assert_eq!(p2.evaluate().unwrap(), BitVector::zeros(n));
            assert_eq!(p1.layout().total, 2);
        }
    }

    #[test]
    fn miracle_child_returns_ones() {
        let (p1, _) = make_miracle_gp_pair(4).unwrap();
        let child = p1.with_symbols(&[true, true]).unwrap();
        assert_eq!(child.evaluate().unwrap(), bv("1111"));
    }

    #[test]
    fn switch_selects_branch_by_parity() {
        let p = switch_template(bv("10"), bv("11"), bv("00")).unwrap();
        assert_eq!(p.evaluate().unwrap(), bv("11"));
        let p = switch_template(bv("11"), bv("11"), bv("00")).unwrap();
        assert_eq!(p.evaluate().unwrap(), bv("00"));
        assert!(switch_template(bv("1"), bv("11"), bv("0")).is_err());
    }

    #[test]
    fn switch_layout_segments() {
        let mut rng = SeededStream::new(5);
        let p = make_switch_template(100, bv("1100"), bv("0011"), &mut rng).unwrap();
        let (genome, layout) = p.flatten();
        assert_eq!(layout.total, 100 + 8);
        assert_eq!(genome.len(), 108);
        let names: Vec<&str> = layout.slots.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
        assert_eq!(layout.slot("b").unwrap().offset, 100);
    }

    #[test]
    fn xor_block_cases() {
        let (b, c) = (bv("1100"), bv("0011"));
        let eval = |a1, a2| {
            make_xor_block_template(b.clone(), c.clone(), a1, a2)
                .unwrap()
                .evaluate()
                .unwrap()
        };
        assert_eq!(eval(true, false), b);
        assert_eq!(eval(false, false), bv("0000"));
        assert_eq!(eval(true, true), bv("1111"));
        assert_eq!(eval(false, true), c);
        let p = make_xor_block_template(b, c, false, false).unwrap();
        let names: Vec<&str> = p.layout().slots.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["a1", "a2", "b", "c"]);
        assert_eq!(p.layout().total, 2 + 8);
    }

    #[test]
    fn threshold_chain_with_integers() {
        let text = "program 2\nevolve a = [011]\nif a < 1: return [00]\nif a < [100]: return [01]\nreturn [11]\n";
        let p = GpProgram::parse(text).unwrap();
        assert_eq!(p.evaluate().unwrap(), bv("01"));
        let p0 = p.with_symbols(&[false, false, false]).unwrap();
        assert_eq!(p0.evaluate().unwrap(), bv("00"));
        let p7 = p.with_symbols(&[true, true, true]).unwrap();
        assert_eq!(p7.evaluate().unwrap(), bv("11"));
        assert_eq!(p.symbol_size(), 3 + 1 + 2 + 3 + 2 + 2);
    }

    #[test]
    fn errors() {
        let fell = GpProgram::new(1, vec![assign("a", bv("1"), true)]).unwrap();
        assert_eq!(fell.evaluate().unwrap_err(), Error::FellThrough);
        let undefined = GpProgram::new(1, vec![Statement::Return(Operand::var("zz"))]);
        assert_eq!(undefined.unwrap_err(), Error::UndefinedName("zz".into()));
        let wide_sum = GpProgram::new(
            2,
            vec![
                assign("a", bv("11"), true),
                Statement::IfSumGreaterReturnElse {
                    terms: vec!["a".into()],
                    threshold: 0,
                    then: Operand::Bits(bv("11")),
                    otherwise: Operand::Bits(bv("00")),
                },
            ],
        )
        .unwrap();
        assert!(matches!(wide_sum.evaluate(), Err(Error::InvalidProgram(_))));
        let bad_broadcast = GpProgram::new(
            3,
            vec![
                assign("y", bv("000"), false),
                assign("b", bv("11"), true),
                Statement::XorAccumulate {
                    guard: None,
                    acc: "y".into(),
                    operand: "b".into(),
                },
                Statement::Return(Operand::var("y")),
            ],
        )
        .unwrap();
        assert_eq!(bad_broadcast.evaluate().unwrap_err(), Error::Broadcast(3, 2));
        let wrong_len = GpProgram::new(3, vec![Statement::Return(Operand::Bits(bv("11")))]).unwrap();
        assert_eq!(wrong_len.evaluate().unwrap_err(), Error::LengthMismatch(2, 3));
    }

    #[test]
    fn dump_round_trip() {
        let (p, _) = make_miracle_gp_pair(4).unwrap();
        assert_eq!(
            p.to_string(),
            "program 4\nevolve a = [0]\nevolve b = [1]\nif a + b > 1: return [1111] else: return [0000]\n"
        );
        assert_eq!(GpProgram::parse(&p.to_string()).unwrap(), p);
        let x = make_xor_block_template(bv("10"), bv("01"), true, false).unwrap();
        assert_eq!(GpProgram::parse(&x.to_string()).unwrap(), x);
        let s = switch_template(bv("1"), bv("10"), bv("01")).unwrap();
        assert_eq!(GpProgram::parse(&s.to_string()).unwrap(), s);
    }

    fn random_template() -> impl Strategy<Value = GpProgram> {
        (1usize..40, 1usize..20, any::<u64>(), any::<bool>()).prop_map(|(l, n, seed, xor)| {
            let mut rng = SeededStream::new(seed);
            let mut v = |k: usize| BitVector::from_fn(k, |_| rng.coin());
            if xor {
                let (b, c) = (v(n), v(n));
                make_xor_block_template(b, c, seed & 1 == 1, seed & 2 == 2).unwrap()
            } else {
                let (a, b, c) = (v(l), v(n), v(n));
                switch_template(a, b, c).unwrap()
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn flatten_unflatten_identity(p in random_template()) {
            let (g, layout) = flatten_genome(&p);
            prop_assert_eq!(g.len(), layout.total);
            prop_assert_eq!(p.unflatten(&g).unwrap(), p.clone());
            prop_assert_eq!(p.evaluate().unwrap(), p.evaluate().unwrap());
        }

        #[test]
        fn switch_single_flip_in_a_preserves_or_swaps(l in 1usize..30, n in 1usize..12, seed in any::<u64>(), pos in any::<prop::sample::Index>()) {
            let mut rng = SeededStream::new(seed);
            let b = BitVector::from_fn(n, |_| rng.coin());
            let c = BitVector::from_fn(n, |_| rng.coin());
            let p = make_switch_template(l, b.clone(), c.clone(), &mut rng).unwrap();
            let y = p.evaluate().unwrap();
            prop_assert!(y == b || y == c);
            let mut g = p.flatten().0;
            g.flip(pos.index(l));
            let y2 = p.unflatten(&g).unwrap().evaluate().unwrap();
            let other = if y == b && p.terminal("a").unwrap().parity().unwrap() { &c } else { &b };
            prop_assert_eq!(&y2, other);
        }

        #[test]
        fn xor_block_a1_flip_shifts_by_b(n in 1usize..40, seed in any::<u64>()) {
            let mut rng = SeededStream::new(seed);
            let b = BitVector::from_fn(n, |_| rng.coin());
            let c = BitVector::from_fn(n, |_| rng.coin());
            let (a1, a2) = (rng.coin(), rng.coin());
            let p = make_xor_block_template(b.clone(), c.clone(), a1, a2).unwrap();
            let q = make_xor_block_template(b.clone(), c, !a1, a2).unwrap();
            let (y, z) = (p.evaluate().unwrap(), q.evaluate().unwrap());
            prop_assert_eq!(y.hamming(&z).unwrap(), b.count_ones());
            prop_assert_eq!(y.xor_broadcast(&b).unwrap(), z);
        }
    }

    #[test]
    fn flatten_round_trip_fuzz_10k() {
        let mut rng = SeededStream::new(2024);
        for _ in 0..10_000 {
            let l = 1 + rng.below(64);
            let n = 1 + rng.below(24);
            let b = BitVector::from_fn(n, |_| rng.coin());
            let c = BitVector::from_fn(n, |_| rng.coin());
            let p = if rng.coin() {
                make_switch_template(l, b, c, &mut rng).unwrap()
            } else {
                let (a1, a2) = (rng.coin(), rng.coin());
                make_xor_block_template(b, c, a1, a2).unwrap()
            };
            let (g, _) = p.flatten();
            assert_eq!(p.unflatten(&g).unwrap(), p);
            let mut other = g.clone();
            other.flip(rng.below(other.len()));
            let q = p.unflatten(&other).unwrap();
            assert!(q.same_structure(&p));
            assert_eq!(q.flatten().0, other);
        }
    }
}
