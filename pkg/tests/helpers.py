"""Shared generators for the test suite: random grids, valid unified
examples, math expressions, and SQL (table, query) pairs."""

from __future__ import annotations

import random

from tqkit import (
    Answer,
    AnswerFormat,
    Category,
    Cell,
    ImageRef,
    Passage,
    QAExample,
    UnifiedTable,
    eval_math_expr,
    eval_program,
    exec_sql,
    format_number,
    parse_math_expr,
    parse_program,
)

WORDS = (
    "alpha bravo charlie delta echo foxtrot golf hotel india juliet kilo "
    "lima mike november oscar papa quebec romeo sierra tango uniform victor"
).split()

# Words that would collide with SQL keywords or operators stay out of
# generated column names.
_NAME_WORDS = [w for w in WORDS if w not in ("and", "from", "where", "select")]


def make_table(
    grid: list[list[str]],
    header_rows: int = 1,
    table_id: str = "t",
    merged: tuple = (),
    caption: str | None = None,
) -> UnifiedTable:
    return UnifiedTable(
        id=table_id,
        cells=tuple(tuple(Cell(text=text) for text in row) for row in grid),
        header_rows=header_rows,
        merged_regions=merged,
        caption=caption,
    )


def random_grid(rng: random.Random) -> list[list[str]]:
    """Grids matching the header-finder harness: 1-8 rows, 1-6 columns,
    cells empty with probability 0.3."""
    n_rows = rng.randint(1, 8)
    n_cols = rng.randint(1, 6)
    return [
        [
            "" if rng.random() < 0.3 else rng.choice(WORDS)
            for _ in range(n_cols)
        ]
        for _ in range(n_rows)
    ]


def first_body_row_reference(grid: list[list[str]]) -> int:
    """Independent re-statement of the header scan: walk rows until one is
    fully populated; that row closes the header region."""
    flags = [text != "" for text in grid[0]]
    n = 2
    while not all(flags):
        if n > len(grid):
            return len(grid) + 1
        flags = [text != "" for text in grid[n - 1]]
        n += 1
    return n


# ---------------------------------------------------------------------------
# Valid unified examples
# ---------------------------------------------------------------------------


def _random_program_text(rng: random.Random) -> str:
    ops = ("add", "subtract", "multiply", "divide")
    n_steps = rng.randint(1, 4)
    steps = []
    for i in range(n_steps):
        args = []
        for _ in range(2):
            if i > 0 and rng.random() < 0.4:
                args.append(f"#{rng.randrange(i)}")
            elif rng.random() < 0.15:
                args.append(f"const_{rng.randint(1, 9)}")
            else:
                args.append(str(rng.randint(1, 99)))
        op = rng.choice(ops)
        if op == "divide" and args[1].startswith("#"):
            op = "add"  # referenced value could be 0; keep programs runnable
        steps.append(f"{op}({args[0]}, {args[1]})")
    return ", ".join(steps)


def random_valid_example(rng: random.Random, i: int) -> QAExample:
    category = rng.choice(list(Category))
    n_cols = rng.randint(1, 4)
    n_body = rng.randint(1, 6)
    header = [rng.choice(_NAME_WORDS) for _ in range(n_cols)]
    body = [
        [
            rng.choice([str(rng.randint(0, 999)), rng.choice(WORDS), ""])
            for _ in range(n_cols)
        ]
        for _ in range(n_body)
    ]

    passages = []
    if rng.random() < 0.5:
        passages = [
            Passage(
                id=f"p{i}-{j}",
                title=rng.choice(["", rng.choice(WORDS)]),
                text=" ".join(rng.choice(WORDS) for _ in range(6)),
            )
            for j in range(rng.randint(1, 2))
        ]
    images = []
    if rng.random() < 0.3:
        images = [ImageRef(id=f"img{i}", uri=f"file:///img{i}.png", caption="")]

    cells = [[Cell(text=t) for t in row] for row in [header] + body]
    if passages and rng.random() < 0.6:
        r = rng.randrange(1, len(cells))
        c = rng.randrange(n_cols)
        cells[r][c] = Cell(text=cells[r][c].text, links=(passages[0].id,))
    if images and rng.random() < 0.6:
        r = rng.randrange(1, len(cells))
        c = rng.randrange(n_cols)
        cells[r][c] = Cell(text=cells[r][c].text, images=(images[0].id,))

    merged = ()
    if n_cols >= 2 and rng.random() < 0.2:
        merged = ((0, 0, 0, 1),)

    table = UnifiedTable(
        id=f"table-{i}",
        cells=tuple(tuple(row) for row in cells),
        header_rows=1,
        merged_regions=merged,
        caption=rng.choice([None, "small fixture table"]),
    )

    kind = rng.choice(["direct", "program", "mathexpr", "sql"])
    if kind == "program":
        derivation = _random_program_text(rng)
        value = eval_program(parse_program(derivation))
        answer = Answer(
            AnswerFormat.PROGRAM,
            value if isinstance(value, str) else format_number(value),
            derivation,
        )
    elif kind == "mathexpr":
        derivation = f"{rng.randint(1, 99)} + {rng.randint(1, 99)} * {rng.randint(1, 9)}"
        answer = Answer(
            AnswerFormat.MATH_EXPR,
            format_number(eval_math_expr(parse_math_expr(derivation))),
            derivation,
        )
    elif kind == "sql":
        col = header[0]
        derivation = f"SELECT {col} FROM t"
        value = ", ".join(row[0] for row in body)
        answer = Answer(AnswerFormat.SQL, value, derivation)
    else:
        answer = Answer(AnswerFormat.DIRECT, rng.choice(WORDS))

    return QAExample(
        id=f"ex-{i}",
        dataset=rng.choice(["wikisql", "finqa", "hybridqa", "wtq"]),
        category=category,
        question=" ".join(rng.choice(WORDS) for _ in range(5)) + "?",
        table=table,
        passages=tuple(passages),
        images=tuple(images),
        answer=answer,
    )


# ---------------------------------------------------------------------------
# Math expressions
# ---------------------------------------------------------------------------


def _literal(rng: random.Random) -> tuple[str, float]:
    value = rng.randint(1, 999)
    style = rng.random()
    if style < 0.12:
        return f"${value}", float(value)
    if style < 0.24:
        return f"{value}%", value / 100.0
    if style < 0.36:
        grouped = rng.randint(1, 999) * 1000 + rng.randint(0, 999)
        return f"{grouped:,}", float(grouped)
    if style < 0.5:
        frac = rng.randint(1, 99)
        return f"{value}.{frac}", float(f"{value}.{frac}")
    return str(value), float(value)


def random_math_expr(rng: random.Random, max_depth: int = 5) -> tuple[str, float]:
    """(expression text, folded value); zero divisors never appear."""

    def node(depth: int) -> tuple[str, float]:
        if depth >= max_depth or rng.random() < 0.3:
            return _literal(rng)
        op = rng.choice("+-*/")
        left_text, left_val = node(depth + 1)
        right_text, right_val = node(depth + 1)
        while op == "/" and right_val == 0:
            right_text, right_val = node(depth + 1)
        value = {
            "+": left_val + right_val,
            "-": left_val - right_val,
            "*": left_val * right_val,
            "/": left_val / right_val if right_val else 0.0,
        }[op]
        sp = rng.choice(["", " "])
        text = f"{left_text}{sp}{op}{sp}{right_text}"
        if rng.random() < 0.5:
            text = f"({text})"
        return text, value

    text, value = node(0)
    while not any(op in text for op in "+-*/"):
        text, value = random_math_expr(rng, max_depth)
    return text, value


# ---------------------------------------------------------------------------
# SQL (table, query) pairs
# ---------------------------------------------------------------------------


def random_sql_case(
    rng: random.Random,
) -> tuple[UnifiedTable, str, int, str | None, list[tuple[int, str, str]]]:
    """A table up to 20x6 plus a grammar-valid query over its columns.

    Returns (table, query text, selected column index, aggregate or None,
    [(column index, operator, literal text), ...]) so reference
    implementations need not parse the text themselves.
    """
    n_cols = rng.randint(1, 6)
    n_body = rng.randint(0, 19)
    names = rng.sample(_NAME_WORDS, n_cols)
    if rng.random() < 0.3:  # multi-word column names exercise name gathering
        j = rng.randrange(n_cols)
        names[j] = f"{names[j]} {rng.randint(1, 9)}"
    numeric_col = [rng.random() < 0.5 for _ in range(n_cols)]
    body = []
    for _ in range(n_body):
        row = []
        for c in range(n_cols):
            if numeric_col[c] and rng.random() < 0.85:
                if rng.random() < 0.2:
                    row.append(f"{rng.randint(1, 99)}.{rng.randint(0, 9)}")
                else:
                    row.append(str(rng.randint(-50, 999)))
            else:
                row.append(rng.choice(WORDS + ["", "n/a", "o'hare"]))
        body.append(row)
    table = make_table([names] + body, table_id="sql-case")

    def render(literal: str) -> str:
        bare_ok = literal.isdigit() or (
            literal.replace(".", "", 1).isdigit() and "." in literal
        )
        if bare_ok and rng.random() < 0.5:
            return literal
        return "'" + literal.replace("'", "''") + "'"

    sel = rng.randrange(n_cols)
    agg = rng.choice([None, None, "COUNT", "MAX", "MIN", "SUM", "AVG"])
    select = f"{agg}({names[sel]})" if agg else names[sel]
    parts = [f"SELECT {select}"]
    if rng.random() < 0.8:
        parts.append("FROM t")
    conds: list[tuple[int, str, str]] = []
    for _ in range(rng.randint(0, 2)):
        c = rng.randrange(n_cols)
        op = rng.choice("=><")
        if body and rng.random() < 0.6:
            literal = rng.choice(body)[c]
        elif rng.random() < 0.5:
            literal = str(rng.randint(-50, 999))
        else:
            literal = rng.choice(WORDS)
        conds.append((c, op, literal))
    if conds:
        parts.append(
            "WHERE " + " AND ".join(f"{names[c]} {op} {render(lit)}" for c, op, lit in conds)
        )
    return table, " ".join(parts), sel, agg, conds


def oracle_exec_sql(table: UnifiedTable, sel: int, agg: str | None,
                    conds: list[tuple[int, str, str]]) -> tuple[str, str]:
    """Brute-force reference: explicit row-list filter then fold.

    Returns ("ok", value) or ("error", reason); written against the stated
    rules, not the production code paths.
    """

    def as_number(text: str):
        t = text.strip()
        if not t:
            return None
        sign = 1.0
        if t[0] in "+-":
            sign = -1.0 if t[0] == "-" else 1.0
            t = t[1:]
        if t.startswith("$"):
            t = t[1:]
        percent = t.endswith("%")
        if percent:
            t = t[:-1]
        if "," in t:
            int_part, dot, frac = t.partition(".")
            head, *groups = int_part.split(",")
            if not head.isdigit() or len(head) > 3:
                return None
            if not groups or not all(len(g) == 3 and g.isdigit() for g in groups):
                return None
            if "," in frac:
                return None
            t = head + "".join(groups) + dot + frac
        if not t or not all(ch.isdigit() or ch == "." for ch in t):
            return None
        if t.count(".") > 1 or t == ".":
            return None
        number = sign * float(t)
        return number / 100.0 if percent else number

    rows = []
    for body_row in table.cells[table.header_rows:]:
        keep = True
        for col, op, literal in conds:
            cell = body_row[col].text
            a, b = as_number(cell), as_number(literal)
            if a is not None and b is not None:
                matched = (a == b) if op == "=" else (a > b if op == ">" else a < b)
            elif op == "=":
                matched = cell == literal
            else:
                matched = False
            if not matched:
                keep = False
                break
        if keep:
            rows.append([cell.text for cell in body_row])

    picked = [row[sel] for row in rows]
    if agg is None:
        return "ok", ", ".join(picked)
    if agg == "COUNT":
        return "ok", str(len(picked))
    if not picked:
        return "error", "empty set"
    numbers = []
    for text in picked:
        number = as_number(text)
        if number is None:
            return "error", "non-numeric"
        numbers.append(number)
    if agg == "SUM":
        folded = 0.0
        for number in numbers:
            folded += number
        result = folded
    elif agg == "AVG":
        folded = 0.0
        for number in numbers:
            folded += number
        result = folded / len(numbers)
    elif agg == "MAX":
        result = max(numbers)
    else:
        result = min(numbers)
    if result == int(result) and abs(result) < 1e16:
        return "ok", str(int(result))
    return "ok", repr(result)


def run_exec_sql(table: UnifiedTable, query) -> tuple[str, str]:
    from tqkit import TqkError, parse_sql

    try:
        if isinstance(query, str):
            query = parse_sql(query, table)
        return "ok", exec_sql(query, table)
    except TqkError as exc:
        return "error", str(exc)
