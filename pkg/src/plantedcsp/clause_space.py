"""Literals, clauses, assignments and dense index spaces for literal tuples.

Conventions used throughout the package:

* variables are 1-based in every user-facing surface (DIMACS style) and
  0-based in arrays;
* an assignment stores one sign per variable, ``-1`` meaning TRUE and
  ``+1`` meaning FALSE;
* the value of a literal under an assignment is the variable's sign, negated
  when the literal is negated.

A :class:`Formula` keeps clauses column-wise in two ``(m, k)`` arrays so that
millions of clauses can be sampled, indexed and multiplied without Python
loops.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

MAX_ARITY = 16
_INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True, order=True)
class Literal:
    variable: int
    negated: bool = False

    def __post_init__(self) -> None:
        if self.variable < 1:
            raise ValueError(f"variable ids are 1-based, got {self.variable}")

    def __neg__(self) -> Literal:
        return Literal(self.variable, not self.negated)

    def to_dimacs(self) -> int:
        return -self.variable if self.negated else self.variable

    @classmethod
    def from_dimacs(cls, code: int) -> Literal:
        if code == 0:
            raise ValueError("0 is not a literal")
        return cls(abs(code), code < 0)

    def __str__(self) -> str:
        return f"~x{self.variable}" if self.negated else f"x{self.variable}"


@dataclass(frozen=True)
class Clause:
    """Ordered tuple of literals on distinct variables."""

    literals: tuple[Literal, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "literals", tuple(self.literals))
        seen = set()
        for lit in self.literals:
            if lit.variable in seen:
                raise ValueError(f"variable {lit.variable} repeated in clause")
            seen.add(lit.variable)

    @property
    def k(self) -> int:
        return len(self.literals)

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(lit.variable for lit in self.literals)

    def __len__(self) -> int:
        return len(self.literals)

    def __iter__(self) -> Iterator[Literal]:
        return iter(self.literals)

    def __getitem__(self, i: int) -> Literal:
        return self.literals[i]

    @classmethod
    def from_dimacs(cls, codes: Iterable[int]) -> Clause:
        return cls(tuple(Literal.from_dimacs(c) for c in codes))

    def to_dimacs(self) -> list[int]:
        return [lit.to_dimacs() for lit in self.literals]


class Assignment:
    """Sign vector over n variables (-1 = TRUE, +1 = FALSE)."""

    __slots__ = ("values",)

    def __init__(self, values: Sequence[int] | np.ndarray):
        arr = np.array(values, dtype=np.int8).reshape(-1)
        if arr.size == 0:
            raise ValueError("assignment needs at least one variable")
        if not np.all((arr == 1) | (arr == -1)):
            raise ValueError("assignment entries must be -1 or +1")
        arr.setflags(write=False)
        self.values = arr

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> Assignment:
        return cls(rng.choice(np.array([-1, 1], dtype=np.int8), size=n))

    @classmethod
    def from_bits(cls, bits: Sequence[int] | np.ndarray) -> Assignment:
        """Build from GF(2) bits where 1 marks a TRUE variable."""
        return cls(1 - 2 * np.asarray(bits, dtype=np.int8))

    def to_bits(self) -> np.ndarray:
        return (self.values == -1).astype(np.uint8)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n

    def __neg__(self) -> Assignment:
        return Assignment(-self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Assignment):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    def agreement(self, other: Assignment) -> int:
        return int(np.count_nonzero(self.values == other.values))

    def __repr__(self) -> str:
        signs = "".join("-" if v < 0 else "+" for v in self.values[:40])
        more = "..." if self.n > 40 else ""
        return f"Assignment(n={self.n}, {signs}{more})"


def count_tuples(n: int, ell: int, signed: bool = True) -> int:
    """Number of ordered ``ell``-tuples of literals on distinct variables.

    With ``signed=False`` the count is over plain variable tuples.
    Raises ``OverflowError`` when the count does not fit a signed 64-bit
    integer, since every index space is addressed with int64 arrays.
    """
    if n < 0 or ell < 0:
        raise ValueError("n and ell must be nonnegative")
    if ell > n:
        raise ValueError(f"cannot choose {ell} distinct variables out of {n}")
    total = 2**ell if signed else 1
    for i in range(ell):
        total *= n - i
    if total > _INT64_MAX:
        raise OverflowError(f"tuple count for n={n}, ell={ell} exceeds int64")
    return total


def decode_distinct(digits: np.ndarray) -> np.ndarray:
    """Map mixed-radix digits to distinct variables.

    Column ``i`` of ``digits`` holds a digit in ``[0, n - i)`` naming the
    rank of the chosen variable among those not yet used in the row.
    """
    digits = np.asarray(digits, dtype=np.int64)
    out = digits.copy()
    for i in range(1, digits.shape[1]):
        v = digits[:, i].copy()
        # walk earlier choices in increasing order, shifting past each one
        prev = np.sort(out[:, :i], axis=1)
        for j in range(i):
            v += v >= prev[:, j]
        out[:, i] = v
    return out


def encode_distinct(variables: np.ndarray) -> np.ndarray:
    """Inverse of :func:`decode_distinct`."""
    variables = np.asarray(variables, dtype=np.int64)
    digits = variables.copy()
    for i in range(1, variables.shape[1]):
        smaller = (variables[:, :i] < variables[:, i : i + 1]).sum(axis=1)
        digits[:, i] = variables[:, i] - smaller
    return digits


class TupleIndexer:
    """Bijection between ordered distinct-variable tuples and ``[0, size)``.

    The index is a mixed-radix number: variable digits (radices n, n-1, ...)
    most significant, then one bit per position for negation, position 0
    most significant.
    """

    def __init__(self, n: int, ell: int, signed: bool = True):
        self.n = int(n)
        self.ell = int(ell)
        self.signed = signed
        self.size = count_tuples(self.n, self.ell, signed)
        self._radices = np.array([self.n - i for i in range(self.ell)], dtype=np.int64)
        # place value of each variable digit
        place = np.ones(self.ell, dtype=np.int64)
        for i in range(self.ell - 2, -1, -1):
            place[i] = place[i + 1] * self._radices[i + 1]
        self._place = place
        self._sign_span = 2**self.ell if signed else 1

    def __repr__(self) -> str:
        return f"TupleIndexer(n={self.n}, ell={self.ell}, signed={self.signed})"

    def index_arrays(self, variables: np.ndarray, negated: np.ndarray | None = None) -> np.ndarray:
        """Vectorised index of ``(m, ell)`` arrays of 0-based variables."""
        variables = np.asarray(variables, dtype=np.int64).reshape(-1, self.ell)
        if variables.size and (variables.min() < 0 or variables.max() >= self.n):
            raise ValueError("variable out of range")
        if self.ell > 1 and variables.size:
            ordered = np.sort(variables, axis=1)
            if np.any(ordered[:, 1:] == ordered[:, :-1]):
                raise ValueError("repeated variable in tuple")
        digits = encode_distinct(variables)
        idx = digits @ self._place if self.ell else np.zeros(len(variables), dtype=np.int64)
        if not self.signed:
            return idx
        if negated is None:
            raise ValueError("signed indexer needs negation flags")
        negated = np.asarray(negated, dtype=np.int64).reshape(-1, self.ell)
        bits = np.zeros(len(variables), dtype=np.int64)
        for i in range(self.ell):
            bits = (bits << 1) | negated[:, i]
        return idx * self._sign_span + bits

    def unindex_arrays(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= self.size):
            raise IndexError("tuple index out of range")
        if self.signed:
            bits = idx % self._sign_span
            idx = idx // self._sign_span
            negated = np.zeros((idx.size, self.ell), dtype=bool)
            for i in range(self.ell - 1, -1, -1):
                negated[:, i] = bits & 1
                bits = bits >> 1
        else:
            negated = np.zeros((idx.size, self.ell), dtype=bool)
        digits = np.zeros((idx.size, self.ell), dtype=np.int64)
        for i in range(self.ell):
            digits[:, i] = (idx // self._place[i]) % self._radices[i]
        return decode_distinct(digits), negated

    def index(self, literals: Sequence[Literal] | Clause) -> int:
        lits = tuple(literals)
        if len(lits) != self.ell:
            raise ValueError(f"expected a {self.ell}-tuple, got {len(lits)}")
        variables = np.array([[lit.variable - 1 for lit in lits]], dtype=np.int64)
        negated = np.array([[lit.negated for lit in lits]], dtype=bool)
        return int(self.index_arrays(variables, negated if self.signed else None)[0])

    def unindex(self, i: int) -> tuple[Literal, ...]:
        variables, negated = self.unindex_arrays(np.array([i]))
        return tuple(Literal(int(v) + 1, bool(s)) for v, s in zip(variables[0], negated[0]))


class Formula:
    """A multiset of k-clauses stored as ``(m, k)`` arrays.

    ``variables`` is 0-based.  Clause order is preserved.
    """

    __slots__ = ("n", "k", "variables", "negated")

    def __init__(self, n: int, k: int, variables: np.ndarray, negated: np.ndarray):
        self.n = int(n)
        self.k = int(k)
        self.variables = np.asarray(variables, dtype=np.int64).reshape(-1, self.k)
        self.negated = np.asarray(negated, dtype=bool).reshape(-1, self.k)
        if self.variables.shape != self.negated.shape:
            raise ValueError("variables and negations disagree in shape")

    @classmethod
    def empty(cls, n: int, k: int) -> Formula:
        return cls(n, k, np.zeros((0, k), dtype=np.int64), np.zeros((0, k), dtype=bool))

    @classmethod
    def from_clauses(cls, n: int, clauses: Sequence[Clause], k: int | None = None) -> Formula:
        if k is None:
            if not clauses:
                raise ValueError("arity needed for an empty clause list")
            k = clauses[0].k
        if any(c.k != k for c in clauses):
            raise ValueError("clauses of mixed arity")
        variables = np.array([[lit.variable - 1 for lit in c] for c in clauses], dtype=np.int64)
        negated = np.array([[lit.negated for lit in c] for c in clauses], dtype=bool)
        if variables.size and variables.max() >= n:
            raise ValueError("variable out of range")
        return cls(n, k, variables.reshape(-1, k), negated.reshape(-1, k))

    @staticmethod
    def concat(parts: Sequence[Formula]) -> Formula:
        if not parts:
            raise ValueError("nothing to concatenate")
        n, k = parts[0].n, parts[0].k
        return Formula(
            n,
            k,
            np.concatenate([p.variables for p in parts]),
            np.concatenate([p.negated for p in parts]),
        )

    def __len__(self) -> int:
        return int(self.variables.shape[0])

    def clause(self, i: int) -> Clause:
        return Clause(
            tuple(Literal(int(v) + 1, bool(s)) for v, s in zip(self.variables[i], self.negated[i]))
        )

    def __iter__(self) -> Iterator[Clause]:
        for i in range(len(self)):
            yield self.clause(i)

    def __getitem__(self, sl: slice) -> Formula:
        return Formula(self.n, self.k, self.variables[sl], self.negated[sl])

    def restrict(self, positions: Sequence[int]) -> Formula:
        pos = list(positions)
        return Formula(self.n, len(pos), self.variables[:, pos], self.negated[:, pos])

    def patterns(self, sigma: Assignment) -> np.ndarray:
        """``(m, k)`` int8 array of literal values under ``sigma``."""
        if sigma.n != self.n:
            raise ValueError("assignment length does not match formula")
        vals = sigma.values[self.variables]
        return np.where(self.negated, -vals, vals).astype(np.int8)

    def pattern_codes(self, sigma: Assignment) -> np.ndarray:
        """Integer code of each clause pattern; bit i set when literal i is TRUE."""
        return pattern_code(self.patterns(sigma))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Formula):
            return NotImplemented
        return (
            self.n == other.n
            and self.k == other.k
            and np.array_equal(self.variables, other.variables)
            and np.array_equal(self.negated, other.negated)
        )

    def __repr__(self) -> str:
        return f"Formula(n={self.n}, k={self.k}, m={len(self)})"


def pattern_code(patterns: np.ndarray) -> np.ndarray:
    """Encode ``(..., k)`` sign patterns as integers (bit i = position i TRUE)."""
    patterns = np.asarray(patterns)
    k = patterns.shape[-1]
    weights = (1 << np.arange(k, dtype=np.int64))
    return ((patterns == -1).astype(np.int64) * weights).sum(axis=-1)


def code_to_pattern(code: int, k: int) -> np.ndarray:
    return np.array([-1 if (code >> i) & 1 else 1 for i in range(k)], dtype=np.int8)


def evaluate_pattern(sigma: Assignment, clause: Clause) -> tuple[int, ...]:
    """Values of the clause's literals under ``sigma`` as a sign tuple."""
    out = []
    for lit in clause:
        if lit.variable > sigma.n:
            raise ValueError(f"variable {lit.variable} outside assignment of length {sigma.n}")
        v = int(sigma.values[lit.variable - 1])
        out.append(-v if lit.negated else v)
    return tuple(out)


def restrict_clause(clause: Clause, positions: Iterable[int]) -> Clause:
    """Sub-clause at the given 0-based positions, in increasing position order."""
    pos = sorted(set(positions))
    if not pos:
        raise ValueError("position set must be nonempty")
    if pos[0] < 0 or pos[-1] >= clause.k:
        raise ValueError(f"positions {pos} out of range for arity {clause.k}")
    return Clause(tuple(clause.literals[i] for i in pos))


def enumerate_clauses(n: int, k: int, limit: int = 10_000_000) -> Formula:
    """All of X_k in index order (guarded by ``limit``)."""
    indexer = TupleIndexer(n, k)
    if indexer.size > limit:
        raise ValueError(f"|X_{k}| = {indexer.size} exceeds enumeration limit {limit}")
    variables, negated = indexer.unindex_arrays(np.arange(indexer.size))
    return Formula(n, k, variables, negated)


def random_distinct_variables(n: int, k: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``(size, k)`` uniformly random ordered tuples of distinct 0-based variables."""
    if k > n:
        raise ValueError(f"cannot pick {k} distinct variables out of {n}")
    digits = np.empty((size, k), dtype=np.int64)
    for i in range(k):
        digits[:, i] = rng.integers(0, n - i, size=size)
    return decode_distinct(digits)
