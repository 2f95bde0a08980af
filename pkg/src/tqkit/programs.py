"""Derivation formats: numerical-reasoning programs, math expressions, and
restricted SQL. Each has a parser, an evaluator/executor, and a canonical
printer; math expressions can be flattened into programs.

The three grammars are the wire format used in unified-record derivations:

    program  :=  step ("," step)*
    step     :=  op "(" arg "," arg ")"          op in {add, subtract,
                 multiply, divide, exp, greater}
    arg      :=  NUMBER | "#"INT | "const_"NUMBER

    mathexpr :=  +, -, *, / with standard precedence, parentheses, and
                 literals that may carry "$", "%", or thousands commas

    sql      :=  SELECT [AGG "("] col [")"] [FROM t]
                 [WHERE col OP literal ("AND" col OP literal)*]
                 AGG in {MAX, MIN, COUNT, SUM, AVG}, OP in {=, >, <}
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from .errors import TqkError
from .tables import AnswerFormat, UnifiedTable, header_paths


class ProgramError(TqkError):
    pass


class ProgramParseError(ProgramError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class ProgramEvalError(ProgramError):
    pass


class MathExprError(TqkError):
    pass


class MathExprParseError(MathExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class SqlError(TqkError):
    pass


class SqlParseError(SqlError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class DerivationError(TqkError):
    """No supported grammar parses the derivation text."""


# ---------------------------------------------------------------------------
# Numeric literals
# ---------------------------------------------------------------------------

# Optional sign and "$", digits with optional thousands grouping, optional
# fraction, optional trailing "%".
_NUMERIC_RE = re.compile(
    r"[+-]?\$?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d*)?%?"
    r"|[+-]?\$?\.\d+%?"
)


def parse_numeric_literal(text: str) -> float | None:
    """Parse "1,200", "$1,200.0", "50%" and plain numbers; None if the whole
    string is not numeric. "%" divides by 100."""
    t = text.strip()
    if not t or not _NUMERIC_RE.fullmatch(t):
        return None
    percent = t.endswith("%")
    t = t.rstrip("%").replace("$", "").replace(",", "")
    value = float(t)
    return value / 100.0 if percent else value


def format_number(value: float) -> str:
    """Canonical number rendering: integral values print without a decimal
    point, everything else as the shortest round-trip float."""
    if math.isfinite(value) and value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


# ---------------------------------------------------------------------------
# Numerical-reasoning programs
# ---------------------------------------------------------------------------

PROGRAM_OPS = ("add", "subtract", "multiply", "divide", "exp", "greater")


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Const:
    """A "const_x" argument; evaluates exactly like a plain number."""

    value: float


@dataclass(frozen=True)
class StepRef:
    index: int


Arg = Union[Number, Const, StepRef]


@dataclass(frozen=True)
class Step:
    op: str
    args: tuple[Arg, Arg]


@dataclass(frozen=True)
class Program:
    steps: tuple[Step, ...]


_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_PLAIN_NUMBER_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_INT_RE = re.compile(r"\d+")


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _expect(text: str, pos: int, token: str) -> int:
    pos = _skip_ws(text, pos)
    if not text.startswith(token, pos):
        raise ProgramParseError(f"expected '{token}'", pos)
    return pos + len(token)


_MAX_NESTING = 100


def _parse_arg(text: str, pos: int, steps: list[Step], depth: int) -> tuple[Arg, int]:
    pos = _skip_ws(text, pos)
    if pos < len(text) and text[pos] == "#":
        m = _INT_RE.match(text, pos + 1)
        if not m:
            raise ProgramParseError("expected step index after '#'", pos + 1)
        index = int(m.group())
        if index >= len(steps):
            # References resolve against steps already emitted in flat order.
            raise ProgramParseError(f"forward reference at step {len(steps)}", pos)
        return StepRef(index), m.end()
    if text.startswith("const_", pos):
        m = _PLAIN_NUMBER_RE.match(text, pos + len("const_"))
        if not m:
            raise ProgramParseError("expected number after 'const_'", pos)
        return Const(float(m.group())), m.end()
    m = _PLAIN_NUMBER_RE.match(text, pos)
    if m:
        return Number(float(m.group())), m.end()
    if _IDENT_RE.match(text, pos):
        # Nested call sugar: the inner step is emitted before the outer one
        # and the argument becomes a reference to it.
        pos = _parse_step(text, pos, steps, depth + 1)
        return StepRef(len(steps) - 1), pos
    raise ProgramParseError("expected argument", pos)


def _parse_step(text: str, pos: int, steps: list[Step], depth: int = 0) -> int:
    if depth > _MAX_NESTING:
        raise ProgramParseError("nesting too deep", pos)
    pos = _skip_ws(text, pos)
    m = _IDENT_RE.match(text, pos)
    if not m:
        raise ProgramParseError("expected operation name", pos)
    op = m.group()
    if op not in PROGRAM_OPS:
        raise ProgramParseError(f"unknown op '{op}'", pos)
    pos = _expect(text, m.end(), "(")
    first, pos = _parse_arg(text, pos, steps, depth)
    pos = _expect(text, pos, ",")
    second, pos = _parse_arg(text, pos, steps, depth)
    pos = _expect(text, pos, ")")
    steps.append(Step(op, (first, second)))
    return pos


def parse_program(text: str) -> Program:
    """Parse a comma-separated step list; whitespace-insensitive.

    Step arguments may reference earlier steps as #k (forward and self
    references are rejected) or be nested calls, which flatten into the
    step list in evaluation order.
    """
    steps: list[Step] = []
    pos = 0
    while True:
        pos = _parse_step(text, pos, steps)
        pos = _skip_ws(text, pos)
        if pos < len(text) and text[pos] == ",":
            pos += 1
            continue
        break
    if pos != len(text):
        raise ProgramParseError("trailing garbage", pos)
    return Program(tuple(steps))


def eval_program(program: Program) -> float | str:
    """Run steps in order; the program's value is the last step's value.

    greater yields "yes"/"no" and is only legal as the final step;
    division by zero is an error.
    """
    if not program.steps:
        raise ProgramEvalError("empty program")
    values: list[float | str] = []
    last = len(program.steps) - 1
    for i, step in enumerate(program.steps):
        operands = []
        for arg in step.args:
            if isinstance(arg, StepRef):
                ref = values[arg.index]
                if isinstance(ref, str):
                    raise ProgramEvalError("greater result used as numeric arg")
                operands.append(ref)
            else:
                operands.append(arg.value)
        a, b = operands
        if step.op == "greater":
            if i != last:
                raise ProgramEvalError("greater may only be the final step")
            values.append("yes" if a > b else "no")
            continue
        if step.op == "add":
            values.append(a + b)
        elif step.op == "subtract":
            values.append(a - b)
        elif step.op == "multiply":
            values.append(a * b)
        elif step.op == "divide":
            if b == 0:
                raise ProgramEvalError("division by zero")
            values.append(a / b)
        elif step.op == "exp":
            try:
                result = a ** b
            except (OverflowError, ValueError, ZeroDivisionError) as exc:
                raise ProgramEvalError(f"exp({a}, {b}) is undefined") from exc
            if isinstance(result, complex):
                raise ProgramEvalError(f"exp({a}, {b}) is not real")
            values.append(float(result))
        else:
            raise ProgramEvalError(f"unknown op '{step.op}'")
    return values[-1]


def _format_arg(arg: Arg) -> str:
    if isinstance(arg, StepRef):
        return f"#{arg.index}"
    return format_number(arg.value)


def print_program(program: Program) -> str:
    """Canonical form: "op(a, b), op(a, b)"; const_ args print as plain numbers."""
    return ", ".join(
        f"{s.op}({_format_arg(s.args[0])}, {_format_arg(s.args[1])})"
        for s in program.steps
    )


def programs_equal(a: Program, b: Program, tol: float = 1e-9) -> bool:
    """Structural equality: same ops and reference structure, numeric
    arguments within tol. Number and Const compare by value."""
    if len(a.steps) != len(b.steps):
        return False
    for sa, sb in zip(a.steps, b.steps):
        if sa.op != sb.op:
            return False
        for x, y in zip(sa.args, sb.args):
            if isinstance(x, StepRef) != isinstance(y, StepRef):
                return False
            if isinstance(x, StepRef):
                if x.index != y.index:
                    return False
            elif abs(x.value - y.value) > tol:
                return False
    return True


# ---------------------------------------------------------------------------
# Math expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "MathNode"
    right: "MathNode"


MathNode = Union[Num, BinOp]


@dataclass(frozen=True)
class MathExpr:
    root: MathNode


# Unsigned literal; unary minus is handled by the parser.
_EXPR_LITERAL_RE = re.compile(
    r"\$?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d*)?%?|\$?\.\d+%?"
)
_UNICODE_OPS = {"−": "-", "×": "*", "÷": "/"}


class _ExprParser:
    def __init__(self, text: str):
        self.text = "".join(_UNICODE_OPS.get(ch, ch) for ch in text)
        self.pos = 0
        self.depth = 0

    def _ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str:
        self._ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self) -> MathNode:
        node = self.expr()
        self._ws()
        if self.pos != len(self.text):
            raise MathExprParseError("unexpected trailing text", self.pos)
        return node

    def expr(self) -> MathNode:
        node = self.term()
        while self._peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> MathNode:
        node = self.factor()
        while self._peek() in ("*", "/"):
            op = self.text[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> MathNode:
        self.depth += 1
        if self.depth > _MAX_NESTING:
            raise MathExprParseError("nesting too deep", self.pos)
        try:
            return self._factor_inner()
        finally:
            self.depth -= 1

    def _factor_inner(self) -> MathNode:
        ch = self._peek()
        if ch == "(":
            self.pos += 1
            node = self.expr()
            if self._peek() != ")":
                raise MathExprParseError("expected ')'", self.pos)
            self.pos += 1
            return node
        if ch in ("+", "-"):
            # Unary sign: negate a literal in place, wrap anything else as 0 - x.
            sign = ch
            self.pos += 1
            node = self.factor()
            if sign == "+":
                return node
            if isinstance(node, Num):
                return Num(-node.value)
            return BinOp("-", Num(0.0), node)
        m = _EXPR_LITERAL_RE.match(self.text, self.pos)
        if not m:
            raise MathExprParseError("expected number or '('", self.pos)
        self.pos = m.end()
        value = parse_numeric_literal(m.group())
        if value is None:
            raise MathExprParseError("malformed number", m.start())
        return Num(value)


def _fold(node: MathNode) -> float:
    if isinstance(node, Num):
        return node.value
    left = _fold(node.left)
    right = _fold(node.right)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if right == 0:
        raise MathExprError("division by zero")
    return left / right


def parse_math_expr(text: str) -> MathExpr:
    """Parse with standard precedence and left associativity. Literals may
    carry "$", "%", and thousands commas. A division whose right side folds
    to zero is rejected here."""
    expr = MathExpr(_ExprParser(text).parse())
    _fold(expr.root)  # surfaces constant zero divisors at parse time
    return expr


def eval_math_expr(expr: MathExpr) -> float:
    return _fold(expr.root)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _print_node(node: MathNode, parent_prec: int, is_right: bool) -> str:
    if isinstance(node, Num):
        return format_number(node.value)
    prec = _PREC[node.op]
    text = "{} {} {}".format(
        _print_node(node.left, prec, False),
        node.op,
        _print_node(node.right, prec, True),
    )
    # Parenthesize whenever reparsing would rebind: lower precedence always,
    # equal precedence on the right of a left-associative operator.
    if prec < parent_prec or (prec == parent_prec and is_right):
        return f"({text})"
    return text


def print_math_expr(expr: MathExpr) -> str:
    """Canonical form with minimal structure-preserving parentheses."""
    return _print_node(expr.root, 0, False)


_EXPR_OP_TO_PROGRAM = {"+": "add", "-": "subtract", "*": "multiply", "/": "divide"}


def expr_to_program(expr: MathExpr) -> Program:
    """Flatten post-order: each operator node becomes one step and operands
    that are earlier nodes become step references.

    A bare-literal expression has nothing to convert and is rejected.
    """
    steps: list[Step] = []

    def walk(node: MathNode) -> Arg:
        if isinstance(node, Num):
            return Number(node.value)
        left = walk(node.left)
        right = walk(node.right)
        steps.append(Step(_EXPR_OP_TO_PROGRAM[node.op], (left, right)))
        return StepRef(len(steps) - 1)

    walk(expr.root)
    if not steps:
        raise ProgramError("expression has no operation to convert")
    return Program(tuple(steps))


# ---------------------------------------------------------------------------
# Restricted SQL (WikiSQL-shaped)
# ---------------------------------------------------------------------------

SQL_AGGS = ("MAX", "MIN", "COUNT", "SUM", "AVG")


@dataclass(frozen=True)
class SqlCondition:
    column: int
    op: str  # one of = > <
    literal: str


@dataclass(frozen=True)
class SqlQuery:
    select_col: int
    agg: str | None
    conditions: tuple[SqlCondition, ...]


@dataclass(frozen=True)
class SqlDraft:
    """Parsed query before column names are resolved against a table."""

    select_col: str
    agg: str | None
    conditions: tuple[tuple[str, str, str], ...]


_SQL_SPECIAL = "()=<>"


def _sql_tokens(text: str) -> list[tuple[str, str, int]]:
    """Tokens as (kind, value, offset); kind in {word, string, punct}."""
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "'\"":
            quote = ch
            j = i + 1
            value = []
            while True:
                if j >= n:
                    raise SqlParseError("unterminated string", i)
                if text[j] == quote:
                    if j + 1 < n and text[j + 1] == quote:  # doubled-quote escape
                        value.append(quote)
                        j += 2
                        continue
                    break
                value.append(text[j])
                j += 1
            tokens.append(("string", "".join(value), i))
            i = j + 1
            continue
        if ch in _SQL_SPECIAL:
            tokens.append(("punct", ch, i))
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in _SQL_SPECIAL \
                and text[j] not in "'\"":
            j += 1
        tokens.append(("word", text[i:j], i))
        i = j
    return tokens


def parse_sql_draft(text: str) -> SqlDraft:
    """Grammar check and clause split without a table schema.

    The FROM clause is optional on input; the canonical printer always
    emits "FROM t".
    """
    toks = _sql_tokens(text)
    i = 0

    def peek_word() -> str | None:
        if i < len(toks) and toks[i][0] == "word":
            return toks[i][1].lower()
        return None

    def offset() -> int:
        return toks[i][2] if i < len(toks) else len(text)

    if peek_word() != "select":
        raise SqlParseError("expected SELECT", offset())
    i += 1

    agg = None
    if (
        i + 1 < len(toks)
        and toks[i][0] == "word"
        and toks[i][1].upper() in SQL_AGGS
        and toks[i + 1][:2] == ("punct", "(")
    ):
        agg = toks[i][1].upper()
        i += 2

    def gather_name(stop_words: set[str], stop_punct: str) -> str:
        nonlocal i
        parts = []
        while i < len(toks):
            kind, value, _ = toks[i]
            if kind == "punct":
                if value in stop_punct:
                    break
                parts.append(value)
            elif kind == "word" and value.lower() in stop_words:
                break
            else:
                parts.append(value)
            i += 1
        return " ".join(parts)

    if agg is not None:
        col = gather_name(set(), ")")
        if not (i < len(toks) and toks[i][0] == "punct" and toks[i][1] == ")"):
            raise SqlParseError("expected ')'", offset())
        i += 1
    else:
        col = gather_name({"from", "where"}, "")
    if not col:
        raise SqlParseError("expected column name", offset())

    if peek_word() == "from":
        i += 1
        if i >= len(toks) or toks[i][0] != "word":
            raise SqlParseError("expected table name after FROM", offset())
        i += 1

    conditions: list[tuple[str, str, str]] = []
    if peek_word() == "where":
        i += 1
        while True:
            cond_col = gather_name(set(), "=<>")
            if not cond_col:
                raise SqlParseError("expected column name", offset())
            if i >= len(toks) or toks[i][0] != "punct" or toks[i][1] not in "=<>":
                raise SqlParseError("expected comparison operator", offset())
            op = toks[i][1]
            i += 1
            # Literal: a quoted string, or a single bare word (numbers and
            # one-word values); multi-word strings must be quoted.
            if i < len(toks) and toks[i][0] == "string":
                literal = toks[i][1]
                i += 1
            elif i < len(toks) and toks[i][0] == "word" \
                    and toks[i][1].lower() != "and":
                literal = toks[i][1]
                i += 1
            else:
                raise SqlParseError("expected literal", offset())
            conditions.append((cond_col, op, literal))
            if peek_word() == "and":
                i += 1
                continue
            break

    if i != len(toks):
        raise SqlParseError("trailing garbage", offset())
    return SqlDraft(col, agg, tuple(conditions))


def _normalize_name(name: str) -> str:
    return " ".join(name.split()).lower()


def parse_sql(text: str, table: UnifiedTable) -> SqlQuery:
    """Parse and resolve column names, matched case-insensitively against
    the table's joined header paths."""
    if table.header_rows < 1:
        raise SqlError("table has no header row")
    draft = parse_sql_draft(text)
    names = [_normalize_name(p) for p in header_paths(table)]

    def resolve(name: str) -> int:
        key = _normalize_name(name)
        try:
            return names.index(key)
        except ValueError:
            raise SqlError(f"unknown column '{name}'") from None

    return SqlQuery(
        select_col=resolve(draft.select_col),
        agg=draft.agg,
        conditions=tuple(
            SqlCondition(resolve(col), op, lit) for col, op, lit in draft.conditions
        ),
    )


def _print_literal(literal: str) -> str:
    if parse_numeric_literal(literal) is not None:
        return literal
    return "'" + literal.replace("'", "''") + "'"


def print_sql(query: SqlQuery, table: UnifiedTable) -> str:
    """Canonical form; string literals are single-quoted, numbers bare."""
    names = header_paths(table)
    sel = names[query.select_col]
    if query.agg:
        sel = f"{query.agg}({sel})"
    parts = [f"SELECT {sel} FROM t"]
    if query.conditions:
        rendered = " AND ".join(
            f"{names[c.column]} {c.op} {_print_literal(c.literal)}"
            for c in query.conditions
        )
        parts.append(f"WHERE {rendered}")
    return " ".join(parts)


def _condition_matches(cell_text: str, cond: SqlCondition) -> bool:
    cell_num = parse_numeric_literal(cell_text)
    lit_num = parse_numeric_literal(cond.literal)
    if cell_num is not None and lit_num is not None:
        if cond.op == "=":
            return cell_num == lit_num
        if cond.op == ">":
            return cell_num > lit_num
        return cell_num < lit_num
    if cond.op == "=":
        return cell_text == cond.literal
    return False


def exec_sql(query: SqlQuery, table: UnifiedTable) -> str:
    """Filter body rows by all conditions, project, then aggregate.

    Non-aggregate results join matching values with ", " in row order;
    COUNT of an empty set is "0"; other aggregates over an empty set are
    errors, as are non-numeric values under SUM/AVG/MAX/MIN.
    """
    if table.header_rows < 1:
        raise SqlError("table has no header row")
    width = table.n_cols
    if query.select_col >= width or any(c.column >= width for c in query.conditions):
        raise SqlError("column index out of range")

    matched = [
        row for row in table.body_rows()
        if all(_condition_matches(row[c.column].text, c) for c in query.conditions)
    ]
    values = [row[query.select_col].text for row in matched]

    if query.agg is None:
        return ", ".join(values)
    if query.agg == "COUNT":
        return str(len(values))
    if not values:
        raise SqlError(f"empty set under {query.agg}")
    numbers = []
    for v in values:
        num = parse_numeric_literal(v)
        if num is None:
            raise SqlError(f"non-numeric value '{v}' under {query.agg}")
        numbers.append(num)
    if query.agg == "SUM":
        total = 0.0
        for num in numbers:
            total += num
        return format_number(total)
    if query.agg == "AVG":
        total = 0.0
        for num in numbers:
            total += num
        return format_number(total / len(numbers))
    if query.agg == "MAX":
        return format_number(max(numbers))
    return format_number(min(numbers))


# ---------------------------------------------------------------------------
# Generic derivation execution
# ---------------------------------------------------------------------------


def execute_derivation(
    text: str, table: UnifiedTable | None = None
) -> tuple[str, AnswerFormat]:
    """Execute a derivation under whichever grammar parses it.

    Tried in order: program, math expression, SQL (SQL only when a table is
    supplied, since column names resolve against its header). Parse failures
    fall through; evaluation errors of a successfully parsed derivation
    propagate.
    """
    try:
        program = parse_program(text)
    except ProgramParseError:
        program = None
    if program is not None:
        value = eval_program(program)
        return (value if isinstance(value, str) else format_number(value),
                AnswerFormat.PROGRAM)

    try:
        expr = parse_math_expr(text)
    except MathExprError:
        expr = None
    if expr is not None:
        return format_number(eval_math_expr(expr)), AnswerFormat.MATH_EXPR

    if table is not None:
        try:
            query = parse_sql(text, table)
        except SqlError:
            query = None
        if query is not None:
            return exec_sql(query, table), AnswerFormat.SQL

    raise DerivationError("derivation parses under no supported grammar")
