"""Extract referenced tables and columns from SQL text.

This is a clause-level scanner, not a full SQL grammar: it tokenizes the
statement, tracks CTE and derived-table aliases, binds table references
found after FROM / JOIN / UPDATE / INSERT INTO, and then resolves qualified
and unqualified column references against the catalog. Identifiers that
cannot be resolved are ignored rather than rejected, because enterprise SQL
carries dialect quirks a strict parser would choke on.

Attribution rules for unqualified columns are deliberately conservative:
a name is attributed only when exactly one in-scope table owns a column of
that name; ambiguous names are dropped from the column set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .catalog import ColumnId, SchemaCatalog, TableId, lookup_table


class SqlTokenError(ValueError):
    """Tokenizer failure (unterminated literal or comment); carries offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class SqlExtractError(ValueError):
    pass


# Reserved words that shape clause structure. Anything here is never treated
# as a table alias or a column reference.
KEYWORDS = frozenset(
    """
    select from where group by having order limit offset join inner left
    right full outer cross natural on using as and or not in exists between
    like ilike is null case when then else end union all except intersect
    with recursive insert into values update set delete distinct asc desc
    cast over partition window fetch first next rows only returning lateral
    """.split()
)

_TABLE_INTRO = {"FROM", "JOIN", "UPDATE", "INTO"}


@dataclass(frozen=True)
class SqlToken:
    kind: str  # keyword | identifier | number | string | punct
    value: str
    offset: int  # byte offset of the token start


@dataclass
class RelevantSet:
    """Tables and (table, column) pairs referenced by one SQL statement."""

    tables: set[TableId] = field(default_factory=set)
    columns: set[tuple[TableId, ColumnId]] = field(default_factory=set)

    def table_names(self, catalog: SchemaCatalog) -> set[str]:
        return {catalog.table(t).name for t in self.tables}

    def column_names(self, catalog: SchemaCatalog) -> set[str]:
        return {
            f"{catalog.table(t).name}.{catalog.column(c).name}"
            for t, c in self.columns
        }


def tokenize_sql(sql: str) -> list[SqlToken]:
    """Tokenize SQL into typed tokens with byte offsets; comments stripped.

    String literals use single quotes with ``''`` escaping; identifiers may
    be double-quoted, backtick-quoted, or bracket-quoted. Raises
    SqlTokenError for unterminated literals or block comments.
    """
    tokens: list[SqlToken] = []
    i = 0
    byte_pos = 0
    n = len(sql)

    def advance(count: int) -> None:
        nonlocal i, byte_pos
        byte_pos += len(sql[i : i + count].encode("utf-8"))
        i += count

    while i < n:
        ch = sql[i]
        if ch.isspace():
            advance(1)
            continue
        # Line comment.
        if ch == "-" and sql.startswith("--", i):
            end = sql.find("\n", i)
            advance((end - i) if end != -1 else (n - i))
            continue
        # Block comment.
        if ch == "/" and sql.startswith("/*", i):
            end = sql.find("*/", i + 2)
            if end == -1:
                raise SqlTokenError("unterminated block comment", byte_pos)
            advance(end + 2 - i)
            continue
        # String literal with '' escaping.
        if ch == "'":
            start_byte = byte_pos
            j = i + 1
            parts: list[str] = []
            while True:
                if j >= n:
                    raise SqlTokenError("unterminated string literal", start_byte)
                if sql[j] == "'":
                    if j + 1 < n and sql[j + 1] == "'":
                        parts.append("'")
                        j += 2
                        continue
                    break
                parts.append(sql[j])
                j += 1
            tokens.append(SqlToken("string", "".join(parts), start_byte))
            advance(j + 1 - i)
            continue
        # Quoted identifiers.
        if ch in '"`[':
            closer = {'"': '"', "`": "`", "[": "]"}[ch]
            start_byte = byte_pos
            j = i + 1
            parts = []
            while True:
                if j >= n:
                    raise SqlTokenError("unterminated quoted identifier", start_byte)
                if sql[j] == closer:
                    if closer != "]" and j + 1 < n and sql[j + 1] == closer:
                        parts.append(closer)
                        j += 2
                        continue
                    break
                parts.append(sql[j])
                j += 1
            tokens.append(SqlToken("identifier", "".join(parts), start_byte))
            advance(j + 1 - i)
            continue
        # Numbers.
        if ch.isdigit() or (ch == "." and i + 1 < n and sql[i + 1].isdigit()):
            start_byte = byte_pos
            j = i
            while j < n and (sql[j].isdigit() or sql[j] in ".eE+-"):
                if sql[j] in "+-" and sql[j - 1] not in "eE":
                    break
                j += 1
            tokens.append(SqlToken("number", sql[i:j], start_byte))
            advance(j - i)
            continue
        # Bare identifiers / keywords.
        if ch.isalpha() or ch == "_":
            start_byte = byte_pos
            j = i
            while j < n and (sql[j].isalnum() or sql[j] in "_$#"):
                j += 1
            word = sql[i:j]
            if word.lower() in KEYWORDS:
                tokens.append(SqlToken("keyword", word.upper(), start_byte))
            else:
                tokens.append(SqlToken("identifier", word, start_byte))
            advance(j - i)
            continue
        # Multi-char operators, then single-char punctuation. Unknown
        # characters become punctuation too; the extractor never rejects them.
        start_byte = byte_pos
        two = sql[i : i + 2]
        if two in ("<=", ">=", "<>", "!=", "||", "::"):
            tokens.append(SqlToken("punct", two, start_byte))
            advance(2)
        else:
            tokens.append(SqlToken("punct", ch, start_byte))
            advance(1)
    return tokens


def extract_relevant_set(sql: str, catalog: SchemaCatalog) -> RelevantSet:
    """Resolve the tables and columns one SQL statement references.

    Tables come from FROM/JOIN/UPDATE/INSERT clauses with aliases resolved
    and CTE names excluded; columns come from qualified ``alias.column`` /
    ``table.column`` references plus unambiguous unqualified names.
    """
    if not sql or not sql.strip():
        raise SqlExtractError("empty SQL input")
    tokens = tokenize_sql(sql)
    if not tokens:
        raise SqlExtractError("empty SQL input")

    cte_names = _collect_cte_names(tokens)
    derived_aliases = _collect_post_paren_aliases(tokens)

    result = RelevantSet()
    # alias or bare name (lowercase) -> TableId, or None for a known
    # non-catalog source (CTE, derived table, unknown table).
    alias_map: dict[str, TableId | None] = {}

    idx = 0
    while idx < len(tokens):
        tok = tokens[idx]
        if tok.kind == "keyword" and tok.value in _TABLE_INTRO:
            idx = _bind_table_refs(
                tokens, idx + 1, tok.value, catalog, cte_names, alias_map, result
            )
            continue
        idx += 1

    _collect_columns(tokens, catalog, alias_map, derived_aliases, cte_names, result)
    return result


def _collect_cte_names(tokens: list[SqlToken]) -> set[str]:
    """Names bound by WITH clauses: ``WITH a AS (...), b AS (...)``."""
    names: set[str] = set()
    i = 0
    while i < len(tokens):
        if tokens[i].kind == "keyword" and tokens[i].value == "WITH":
            j = i + 1
            if j < len(tokens) and tokens[j].kind == "keyword" and tokens[j].value == "RECURSIVE":
                j += 1
            while j < len(tokens) and tokens[j].kind == "identifier":
                names.add(tokens[j].value.lower())
                j += 1
                # Optional explicit column list before AS.
                if j < len(tokens) and tokens[j].value == "(":
                    j = _skip_parens(tokens, j)
                if j < len(tokens) and tokens[j].kind == "keyword" and tokens[j].value == "AS":
                    j += 1
                if j < len(tokens) and tokens[j].value == "(":
                    j = _skip_parens(tokens, j)
                if j < len(tokens) and tokens[j].value == ",":
                    j += 1
                    continue
                break
            i = j
            continue
        i += 1
    return names


def _skip_parens(tokens: list[SqlToken], open_idx: int) -> int:
    """Index just past the parenthesis group opening at ``open_idx``."""
    depth = 0
    i = open_idx
    while i < len(tokens):
        if tokens[i].value == "(" and tokens[i].kind == "punct":
            depth += 1
        elif tokens[i].value == ")" and tokens[i].kind == "punct":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return i


def _collect_post_paren_aliases(tokens: list[SqlToken]) -> set[str]:
    """Identifiers aliasing a parenthesized group: ``) [AS] name``.

    Covers derived tables and select-list expression aliases; both must be
    kept out of the column attribution pass.
    """
    aliases: set[str] = set()
    for i, tok in enumerate(tokens):
        if tok.kind != "punct" or tok.value != ")":
            continue
        j = i + 1
        if j < len(tokens) and tokens[j].kind == "keyword" and tokens[j].value == "AS":
            j += 1
        if j < len(tokens) and tokens[j].kind == "identifier":
            # Not an alias if the identifier starts a dotted chain's qualifier
            # position (cannot happen after ')') or opens a call.
            if j + 1 < len(tokens) and tokens[j + 1].value == "(":
                continue
            aliases.add(tokens[j].value.lower())
    return aliases


def _bind_table_refs(
    tokens: list[SqlToken],
    start: int,
    intro: str,
    catalog: SchemaCatalog,
    cte_names: set[str],
    alias_map: dict[str, TableId | None],
    result: RelevantSet,
) -> int:
    """Parse one table-reference list beginning after FROM/JOIN/UPDATE/INTO."""
    i = start
    while True:
        if i >= len(tokens):
            return i
        tok = tokens[i]
        if tok.kind == "punct" and tok.value == "(":
            # Derived table: step inside so the subquery's own FROM clause is
            # scanned by the main pass; its trailing alias lands in the
            # excluded set via _collect_post_paren_aliases. A comma continuing
            # the outer FROM list after the group is not chased.
            return i + 1
        elif tok.kind == "identifier":
            chain = [tok.value]
            i += 1
            while (
                i + 1 < len(tokens)
                and tokens[i].kind == "punct"
                and tokens[i].value == "."
                and tokens[i + 1].kind == "identifier"
            ):
                chain.append(tokens[i + 1].value)
                i += 2
            name = chain[-1]
            bound: TableId | None = None
            if name.lower() not in cte_names:
                tid = lookup_table(catalog, name)
                if tid is not None:
                    result.tables.add(tid)
                    bound = tid
            alias_map.setdefault(name.lower(), bound)
            i = _bind_alias(tokens, i, bound, alias_map)
        else:
            return i
        # FROM lists may continue with commas; JOIN/UPDATE/INTO do not.
        if intro == "FROM" and i < len(tokens) and tokens[i].value == ",":
            i += 1
            continue
        return i


def _bind_alias(
    tokens: list[SqlToken],
    i: int,
    bound: TableId | None,
    alias_map: dict[str, TableId | None],
) -> int:
    if i < len(tokens) and tokens[i].kind == "keyword" and tokens[i].value == "AS":
        i += 1
    if i < len(tokens) and tokens[i].kind == "identifier":
        alias_map[tokens[i].value.lower()] = bound
        i += 1
    return i


def _collect_columns(
    tokens: list[SqlToken],
    catalog: SchemaCatalog,
    alias_map: dict[str, TableId | None],
    derived_aliases: set[str],
    cte_names: set[str],
    result: RelevantSet,
) -> None:
    n = len(tokens)
    i = 0
    while i < n:
        tok = tokens[i]
        if tok.kind != "identifier":
            i += 1
            continue
        # Gather the dotted chain starting here.
        chain = [tok.value]
        j = i + 1
        while (
            j + 1 < n
            and tokens[j].kind == "punct"
            and tokens[j].value == "."
            and tokens[j + 1].kind == "identifier"
        ):
            chain.append(tokens[j + 1].value)
            j += 2
        follows_call = j < n and tokens[j].kind == "punct" and tokens[j].value == "("
        preceded_by_as = (
            i > 0 and tokens[i - 1].kind == "keyword" and tokens[i - 1].value == "AS"
        )
        preceded_by_intro = (
            i > 0
            and tokens[i - 1].kind == "keyword"
            and tokens[i - 1].value in _TABLE_INTRO
        )

        if follows_call or preceded_by_as or preceded_by_intro:
            i = j
            continue

        if len(chain) >= 2:
            qualifier, column = chain[-2].lower(), chain[-1]
            tid = alias_map.get(qualifier)
            if tid is None and qualifier not in alias_map:
                # Direct table-name qualification without an alias binding;
                # only accept tables already in the statement's table set.
                candidate = lookup_table(catalog, qualifier)
                if candidate is not None and candidate in result.tables:
                    tid = candidate
            if tid is not None:
                col = catalog.table(tid).column_by_name(column)
                if col is not None:
                    result.columns.add((tid, col.id))
        else:
            name = chain[0]
            lowered = name.lower()
            if (
                lowered not in alias_map
                and lowered not in derived_aliases
                and lowered not in cte_names
            ):
                owners = [
                    tid
                    for tid in sorted(result.tables)
                    if catalog.table(tid).column_by_name(name) is not None
                ]
                if len(owners) == 1:
                    col = catalog.table(owners[0]).column_by_name(name)
                    assert col is not None
                    result.columns.add((owners[0], col.id))
        i = j
