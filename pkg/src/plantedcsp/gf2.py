"""Linear systems over GF(2) stored as packed 64-bit rows.

Each equation is a bitset over the ``n`` unknowns plus one extra bit (column
``n``) holding the right-hand side, so a row operation is a single XOR of
``ceil((n + 1) / 64)`` words.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

WORD = 64


class DecodeError(RuntimeError):
    """The equations do not single out a small set of assignments."""


class InconsistentSystemError(DecodeError):
    pass


class UnderdeterminedSystemError(DecodeError):
    pass


def _bit(col: int) -> tuple[int, np.uint64]:
    word, offset = divmod(col, WORD)
    return word, np.uint64(1) << np.uint64(offset)


def pack_rows(coeffs: np.ndarray) -> np.ndarray:
    """Pack a 0/1 matrix of shape (rows, cols) into uint64 words, column j at bit j."""
    coeffs = np.asarray(coeffs, dtype=bool)
    rows, cols = coeffs.shape
    words = (cols + WORD - 1) // WORD
    padded = np.zeros((rows, words * WORD), dtype=bool)
    padded[:, :cols] = coeffs
    # little-endian bit order inside each byte, little-endian bytes inside each word
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view("<u8").astype(np.uint64).reshape(rows, words)


@dataclass(frozen=True)
class EchelonForm:
    rows: np.ndarray  # reduced rows, one per pivot
    pivots: tuple[int, ...]
    n: int
    consistent: bool

    @property
    def rank(self) -> int:
        return len(self.pivots)

    @property
    def free(self) -> tuple[int, ...]:
        pivot_set = set(self.pivots)
        return tuple(c for c in range(self.n) if c not in pivot_set)

    def coefficient(self, row: int, col: int) -> int:
        word, mask = _bit(col)
        return int((self.rows[row, word] & mask) != 0)


class ParitySystem:
    """Equations ``XOR_{v in vars} s_v = b`` over ``n`` unknowns."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one unknown")
        self.n = n
        self.words = (n + 1 + WORD - 1) // WORD
        self._blocks: list[np.ndarray] = []

    def __len__(self) -> int:
        return sum(b.shape[0] for b in self._blocks)

    def add_equation(self, variables, rhs: int) -> None:
        self.add_equations([list(variables)], [rhs])

    def add_equations(self, variables, rhs) -> None:
        """Add equations given as 0-based variable lists (or an int array) and 0/1 constants.

        A variable listed twice cancels, as it does over GF(2).
        """
        rhs = np.asarray(rhs, dtype=np.int64).reshape(-1)
        dense = np.zeros((rhs.size, self.n + 1), dtype=np.uint8)
        if isinstance(variables, np.ndarray) and variables.ndim == 2:
            if variables.size and (variables.min() < 0 or variables.max() >= self.n):
                raise ValueError("variable out of range")
            for j in range(variables.shape[1]):
                np.bitwise_xor.at(dense, (np.arange(rhs.size), variables[:, j]), 1)
        else:
            if len(variables) != rhs.size:
                raise ValueError("one constant per equation")
            for i, vs in enumerate(variables):
                for v in vs:
                    if not 0 <= v < self.n:
                        raise ValueError(f"variable {v} out of range")
                    dense[i, v] ^= 1
        dense[:, self.n] = rhs & 1
        self._blocks.append(pack_rows(dense))

    def matrix(self) -> np.ndarray:
        if not self._blocks:
            return np.zeros((0, self.words), dtype=np.uint64)
        return np.vstack(self._blocks)

    def eliminate(self) -> EchelonForm:
        """Reduced row echelon form by Gauss-Jordan elimination on packed rows."""
        a = np.unique(self.matrix(), axis=0)
        pivots: list[int] = []
        top = 0
        for col in range(self.n):
            if top == a.shape[0]:
                break
            word, mask = _bit(col)
            hits = (a[top:, word] & mask) != 0
            if not hits.any():
                continue
            p = top + int(np.argmax(hits))
            if p != top:
                a[[top, p]] = a[[p, top]]
            sel = (a[:, word] & mask) != 0
            sel[top] = False
            a[sel] ^= a[top]
            pivots.append(col)
            top += 1
        rhs_word, rhs_mask = _bit(self.n)
        consistent = not bool(np.any((a[top:, rhs_word] & rhs_mask) != 0))
        return EchelonForm(rows=a[:top].copy(), pivots=tuple(pivots), n=self.n, consistent=consistent)

    def solutions(self, cap: int = 16) -> list[np.ndarray]:
        """Every solution as a 0/1 vector, if there are at most ``cap`` of them."""
        ech = self.eliminate()
        if not ech.consistent:
            raise InconsistentSystemError("parity equations are inconsistent")
        free = ech.free
        if 2 ** len(free) > cap:
            raise UnderdeterminedSystemError(
                f"{len(free)} free unknowns leave {2 ** len(free)} solutions (cap {cap})"
            )
        rhs = np.array([ech.coefficient(i, self.n) for i in range(ech.rank)], dtype=np.uint8)
        dep = np.array([[ech.coefficient(i, f) for f in free] for i in range(ech.rank)], dtype=np.uint8)
        dep = dep.reshape(ech.rank, len(free))
        out = []
        for choice in product((0, 1), repeat=len(free)):
            s = np.zeros(self.n, dtype=np.uint8)
            c = np.array(choice, dtype=np.uint8)
            s[list(free)] = c
            if ech.rank:
                s[list(ech.pivots)] = rhs ^ ((dep @ c) & 1 if free else 0)
            out.append(s)
        return out

    def is_satisfied_by(self, s: np.ndarray) -> np.ndarray:
        """Per-equation truth values for a 0/1 vector ``s``."""
        dense = np.unpackbits(self.matrix().astype("<u8").view(np.uint8), axis=1, bitorder="little")
        dense = dense[:, : self.n + 1]
        lhs = (dense[:, : self.n].astype(np.int64) @ np.asarray(s, dtype=np.int64)) & 1
        return lhs == dense[:, self.n]
