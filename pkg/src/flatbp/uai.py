"""UAI ``MARKOV`` model files.

Tables are linear-domain potentials in row-major order over the factor's
scope (last scope variable varies fastest). On import they are log
transformed; zero entries are dropped from the factor's valid configurations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from flatbp.graph import FactorGraph


class UaiParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class UnsupportedNetworkError(UaiParseError):
    pass


class InfeasibleFactorError(ValueError):
    pass


@dataclass
class UaiModel:
    cardinalities: list[int]
    scopes: list[tuple[int, ...]]
    tables: list[np.ndarray]
    network_type: str = "MARKOV"
    table_lines: list[int] = field(default_factory=list, repr=False)


class _Tokens:
    def __init__(self, text: str, source: str | None):
        self.items = [
            (tok, lineno)
            for lineno, line in enumerate(text.splitlines(), start=1)
            for tok in line.split()
        ]
        self.pos = 0
        self.source = source

    def error(self, message: str, line: int | None = None) -> UaiParseError:
        if line is None:
            line = self.items[min(self.pos, len(self.items) - 1)][1] if self.items else None
        return UaiParseError(message, line, self.source)

    @property
    def last_line(self) -> int | None:
        return self.items[self.pos - 1][1] if self.pos else None

    def next(self, what: str) -> tuple[str, int]:
        if self.pos >= len(self.items):
            last = self.items[-1][1] if self.items else None
            raise UaiParseError(f"unexpected end of input, expected {what}", last, self.source)
        item = self.items[self.pos]
        self.pos += 1
        return item

    def integer(self, what: str, minimum: int = 0) -> int:
        tok, line = self.next(what)
        try:
            value = int(tok)
        except ValueError:
            raise self.error(f"expected integer {what}, got {tok!r}", line) from None
        if value < minimum:
            raise self.error(f"{what} must be >= {minimum}, got {value}", line)
        return value

    def real(self, what: str) -> float:
        tok, line = self.next(what)
        try:
            value = float(tok)
        except ValueError:
            raise self.error(f"expected number {what}, got {tok!r}", line) from None
        if not math.isfinite(value):
            raise self.error(f"{what} must be finite, got {tok!r}", line)
        if value < 0:
            raise self.error(f"{what} must be non-negative, got {tok!r}", line)
        return value


def parse_uai(text: str, source: str | None = None) -> UaiModel:
    tokens = _Tokens(text, source)
    kind, line = tokens.next("network type")
    if kind.upper() == "BAYES":
        raise UnsupportedNetworkError("only MARKOV networks are supported", line, source)
    if kind.upper() != "MARKOV":
        raise UaiParseError(f"unknown network type {kind!r}", line, source)

    num_vars = tokens.integer("variable count")
    cards = [tokens.integer("cardinality", minimum=1) for _ in range(num_vars)]
    num_factors = tokens.integer("factor count")
    scopes = []
    for _ in range(num_factors):
        arity = tokens.integer("scope size", minimum=1)
        scope = []
        for _ in range(arity):
            v = tokens.integer("variable index")
            if v >= num_vars:
                raise tokens.error(f"variable index {v} out of range", tokens.last_line)
            scope.append(v)
        scopes.append(tuple(scope))

    tables = []
    table_lines = []
    for scope in scopes:
        expected = math.prod(cards[v] for v in scope)
        count = tokens.integer("table size")
        count_line = tokens.last_line
        if count != expected:
            raise tokens.error(
                f"table has {count} entries but scope {scope} needs {expected}", count_line
            )
        tables.append(np.array([tokens.real("table entry") for _ in range(count)]))
        table_lines.append(count_line)
    if tokens.pos != len(tokens.items):
        raise tokens.error("unexpected trailing content", tokens.items[tokens.pos][1])
    return UaiModel(cards, scopes, tables, "MARKOV", table_lines)


def read_uai(path) -> UaiModel:
    with open(path) as fh:
        return parse_uai(fh.read(), source=str(path))


def uai_to_graph(model: UaiModel) -> tuple[FactorGraph, np.ndarray]:
    """Convert to a factor graph plus evidence.

    Strictly positive unary tables are folded into the evidence. Every other
    table becomes an enumeration factor over its nonzero entries.
    """
    graph = FactorGraph()
    graph.add_variables(model.cardinalities)
    offsets = np.concatenate([[0], np.cumsum(model.cardinalities)]).astype(np.int64)
    evidence = np.zeros(int(offsets[-1]))
    for i, (scope, table) in enumerate(zip(model.scopes, model.tables)):
        table = np.asarray(table, dtype=np.float64)
        nonzero = np.flatnonzero(table > 0)
        if nonzero.size == 0:
            raise InfeasibleFactorError(f"factor {i} over {scope} has an all-zero table")
        if len(scope) == 1 and nonzero.size == table.size:
            v = scope[0]
            evidence[offsets[v]:offsets[v + 1]] += np.log(table)
            continue
        shape = [model.cardinalities[v] for v in scope]
        configs = np.stack(np.unravel_index(nonzero, shape), axis=1)
        graph.add_enumeration_factor(scope, configs, np.log(table[nonzero]))
    return graph, evidence


def graph_to_uai(graph: FactorGraph, evidence=None) -> UaiModel:
    cards = graph.cardinalities
    scopes, tables = [], []
    for factor in graph.factors:
        shape = [cards[v] for v in factor.scope]
        dense = np.zeros(math.prod(shape))
        dense[np.ravel_multi_index(tuple(factor.valid_configs.T), shape)] = np.exp(
            factor.log_potentials
        )
        scopes.append(factor.scope)
        tables.append(dense)
    if evidence is not None:
        evidence = np.asarray(evidence, dtype=np.float64)
        offset = 0
        for v, d in enumerate(cards):
            values = evidence[offset:offset + d]
            offset += d
            if np.any(values != 0):
                scopes.append((v,))
                tables.append(np.exp(values))
    return UaiModel(list(cards), scopes, tables)


def format_uai(model: UaiModel) -> str:
    lines = [model.network_type, str(len(model.cardinalities))]
    lines.append(" ".join(str(c) for c in model.cardinalities))
    lines.append(str(len(model.scopes)))
    for scope in model.scopes:
        lines.append(" ".join(str(x) for x in (len(scope), *scope)))
    for table in model.tables:
        lines.append("")
        lines.append(str(len(table)))
        lines.append(" ".join(f"{x:.17g}" for x in table))
    return "\n".join(lines) + "\n"


def write_uai(graph: FactorGraph, evidence=None) -> str:
    """Serialize a graph, with nonzero evidence emitted as unary tables.

    Log potentials below about -745 underflow to zero and would be read back
    as forbidden configurations.
    """
    return format_uai(graph_to_uai(graph, evidence))
