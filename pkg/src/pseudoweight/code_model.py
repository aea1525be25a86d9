"""Sparse parity-check matrices, alist I/O and GF(2) utilities.

A code is held as a :class:`ParityCheckMatrix`: the bipartite adjacency
between M check nodes and N bit nodes, with both directions of the
incidence stored as strictly increasing index tuples.  All structures are
immutable after construction and safe to share across worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class AlistFormatError(ValueError):
    """Malformed alist text; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class ParityCheckMatrix:
    """Binary M x N parity-check matrix in adjacency-list form.

    ``check_neighbors[a]`` lists the bit indices of check ``a`` and
    ``bit_neighbors[i]`` the check indices of bit ``i``; both are strictly
    increasing and describe the same edge set.  Every bit has degree >= 1
    and every check degree >= 2.
    """

    n_bits: int
    n_checks: int
    check_neighbors: tuple[tuple[int, ...], ...]
    bit_neighbors: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        if self.n_bits <= 0 or self.n_checks <= 0:
            raise ValueError("matrix dimensions must be positive")
        if len(self.check_neighbors) != self.n_checks:
            raise ValueError("check_neighbors length != n_checks")
        if not self.bit_neighbors:
            object.__setattr__(
                self, "bit_neighbors", _transpose_adjacency(self.check_neighbors, self.n_bits)
            )
        if len(self.bit_neighbors) != self.n_bits:
            raise ValueError("bit_neighbors length != n_bits")
        edges = set()
        for a, nbrs in enumerate(self.check_neighbors):
            if len(nbrs) < 2:
                raise ValueError(f"check {a} has degree {len(nbrs)} < 2")
            if any(n2 <= n1 for n1, n2 in zip(nbrs, nbrs[1:])):
                raise ValueError(f"check {a} neighbor list is not strictly increasing")
            for i in nbrs:
                if not 0 <= i < self.n_bits:
                    raise ValueError(f"check {a} references bit {i} out of range")
                edges.add((a, i))
        for i, nbrs in enumerate(self.bit_neighbors):
            if len(nbrs) < 1:
                raise ValueError(f"bit {i} has degree 0")
            if any(n2 <= n1 for n1, n2 in zip(nbrs, nbrs[1:])):
                raise ValueError(f"bit {i} neighbor list is not strictly increasing")
            for a in nbrs:
                if not 0 <= a < self.n_checks:
                    raise ValueError(f"bit {i} references check {a} out of range")
                if (a, i) not in edges:
                    raise ValueError(f"edge ({a},{i}) present in bit_neighbors only")
                edges.discard((a, i))
        if edges:
            a, i = next(iter(edges))
            raise ValueError(f"edge ({a},{i}) present in check_neighbors only")

    @property
    def n_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self.check_neighbors)

    @property
    def bit_degrees(self) -> tuple[int, ...]:
        return tuple(len(nbrs) for nbrs in self.bit_neighbors)

    @property
    def check_degrees(self) -> tuple[int, ...]:
        return tuple(len(nbrs) for nbrs in self.check_neighbors)

    @cached_property
    def dense(self) -> np.ndarray:
        """Dense uint8 copy of H, shape (n_checks, n_bits).  Read-only."""
        h = np.zeros((self.n_checks, self.n_bits), dtype=np.uint8)
        for a, nbrs in enumerate(self.check_neighbors):
            h[a, list(nbrs)] = 1
        h.setflags(write=False)
        return h

    @classmethod
    def from_dense(cls, h) -> "ParityCheckMatrix":
        h = np.asarray(h)
        checks = tuple(tuple(int(i) for i in np.flatnonzero(row)) for row in h)
        return cls(n_bits=h.shape[1], n_checks=h.shape[0], check_neighbors=checks)


def _transpose_adjacency(check_neighbors, n_bits):
    by_bit: list[list[int]] = [[] for _ in range(n_bits)]
    for a, nbrs in enumerate(check_neighbors):
        for i in nbrs:
            by_bit[i].append(a)
    return tuple(tuple(sorted(lst)) for lst in by_bit)


def as_binary_word(w, n_bits: int) -> np.ndarray:
    """Validate and return a length-``n_bits`` uint8 vector with entries in {0,1}."""
    word = np.asarray(w, dtype=np.uint8)
    if word.shape != (n_bits,):
        raise ValueError(f"word length {word.shape} does not match n_bits={n_bits}")
    if np.any(word > 1):
        raise ValueError("word entries must be 0 or 1")
    return word


def syndrome(h: ParityCheckMatrix, w) -> np.ndarray:
    """Per-check parity of ``w``: component a is sum of w over check a's bits, mod 2."""
    word = as_binary_word(w, h.n_bits)
    out = np.empty(h.n_checks, dtype=np.uint8)
    for a, nbrs in enumerate(h.check_neighbors):
        out[a] = word[list(nbrs)].sum() & 1
    return out


def is_codeword(h: ParityCheckMatrix, w) -> bool:
    return not syndrome(h, w).any()


def gf2_rank(h) -> int:
    """Rank over GF(2) of a ParityCheckMatrix or dense binary matrix."""
    m = h.dense if isinstance(h, ParityCheckMatrix) else np.asarray(h, dtype=np.uint8)
    return len(_gf2_eliminate(m.copy())[1])


def gf2_nullspace(h) -> np.ndarray:
    """Basis of the GF(2) right nullspace, one vector per row; shape (n - rank, n)."""
    m = h.dense if isinstance(h, ParityCheckMatrix) else np.asarray(h, dtype=np.uint8)
    reduced, pivots = _gf2_eliminate(m.copy(), reduce=True)
    n = m.shape[1]
    free_cols = [c for c in range(n) if c not in pivots]
    basis = np.zeros((len(free_cols), n), dtype=np.uint8)
    for k, c in enumerate(free_cols):
        basis[k, c] = 1
        for r, pc in enumerate(pivots):
            basis[k, pc] = reduced[r, c]
    return basis


def _gf2_eliminate(m: np.ndarray, reduce: bool = False):
    """Row-reduce in place with XOR row ops; returns (matrix, pivot column list)."""
    rows, cols = m.shape
    pivots: list[int] = []
    pr = 0
    for c in range(cols):
        if pr == rows:
            break
        hits = np.flatnonzero(m[pr:, c])
        if hits.size == 0:
            continue
        piv = pr + hits[0]
        if piv != pr:
            m[[pr, piv]] = m[[piv, pr]]
        below = pr + 1 + np.flatnonzero(m[pr + 1 :, c])
        if below.size:
            m[below] ^= m[pr]
        if reduce:
            above = np.flatnonzero(m[:pr, c])
            if above.size:
                m[above] ^= m[pr]
        pivots.append(c)
        pr += 1
    return m, pivots


def parse_alist(text: str) -> ParityCheckMatrix:
    """Parse alist text into a canonical :class:`ParityCheckMatrix`.

    Layout: "N M" / "max_bit_deg max_check_deg" / N bit degrees / M check
    degrees / N bit adjacency rows (1-based check indices) / M check
    adjacency rows (1-based bit indices).  Rows are zero-padded up to the
    declared maximum degree; a 0 is only valid as padding after the row's
    declared degree is exhausted.
    """
    lines = text.splitlines()

    def ints(lineno: int, expect_len: int | None = None) -> list[int]:
        if lineno >= len(lines):
            raise AlistFormatError(lineno + 1, "unexpected end of file")
        try:
            vals = [int(tok) for tok in lines[lineno].split()]
        except ValueError:
            raise AlistFormatError(lineno + 1, f"non-integer token in {lines[lineno]!r}") from None
        if expect_len is not None and len(vals) != expect_len:
            raise AlistFormatError(
                lineno + 1, f"expected {expect_len} integers, found {len(vals)}"
            )
        return vals

    header = ints(0)
    if len(header) != 2:
        raise AlistFormatError(1, "header must be 'N M'")
    n_bits, n_checks = header
    if n_bits <= 0 or n_checks <= 0:
        raise AlistFormatError(1, "N and M must be positive")
    max_degs = ints(1)
    if len(max_degs) != 2:
        raise AlistFormatError(2, "second line must be 'max_bit_degree max_check_degree'")
    max_bit_deg, max_check_deg = max_degs
    bit_degs = ints(2, n_bits)
    check_degs = ints(3, n_checks)
    if bit_degs and max(bit_degs) != max_bit_deg:
        raise AlistFormatError(3, f"declared max bit degree {max_bit_deg} != actual {max(bit_degs)}")
    if check_degs and max(check_degs) != max_check_deg:
        raise AlistFormatError(
            4, f"declared max check degree {max_check_deg} != actual {max(check_degs)}"
        )

    def adjacency_row(lineno: int, degree: int, n_max: int, what: str) -> tuple[int, ...]:
        vals = ints(lineno)
        if len(vals) < degree:
            raise AlistFormatError(lineno + 1, f"fewer entries than declared degree {degree}")
        entries = []
        for pos, v in enumerate(vals):
            if pos < degree:
                if v == 0:
                    raise AlistFormatError(
                        lineno + 1, f"padding 0 at position {pos + 1} before degree {degree} exhausted"
                    )
                if not 1 <= v <= n_max:
                    raise AlistFormatError(lineno + 1, f"{what} index {v} out of range [1..{n_max}]")
                entries.append(v - 1)
            elif v != 0:
                raise AlistFormatError(lineno + 1, f"nonzero entry {v} beyond declared degree {degree}")
        return tuple(sorted(entries))

    bit_rows = [
        adjacency_row(4 + i, bit_degs[i], n_checks, "check") for i in range(n_bits)
    ]
    check_rows = [
        adjacency_row(4 + n_bits + a, check_degs[a], n_bits, "bit") for a in range(n_checks)
    ]

    try:
        return ParityCheckMatrix(
            n_bits=n_bits,
            n_checks=n_checks,
            check_neighbors=tuple(check_rows),
            bit_neighbors=tuple(bit_rows),
        )
    except ValueError as exc:
        # adjacency halves disagree; point at the first check adjacency row
        raise AlistFormatError(4 + n_bits + 1, str(exc)) from None


def write_alist(h: ParityCheckMatrix) -> str:
    """Render canonical alist text; parses back to an identical matrix."""
    max_bit_deg = max(h.bit_degrees)
    max_check_deg = max(h.check_degrees)

    def row(nbrs: tuple[int, ...], width: int) -> str:
        padded = [n + 1 for n in nbrs] + [0] * (width - len(nbrs))
        return " ".join(str(v) for v in padded)

    out = [
        f"{h.n_bits} {h.n_checks}",
        f"{max_bit_deg} {max_check_deg}",
        " ".join(str(d) for d in h.bit_degrees),
        " ".join(str(d) for d in h.check_degrees),
    ]
    out.extend(row(nbrs, max_bit_deg) for nbrs in h.bit_neighbors)
    out.extend(row(nbrs, max_check_deg) for nbrs in h.check_neighbors)
    return "\n".join(out) + "\n"


def read_alist(path) -> ParityCheckMatrix:
    with open(path, "r", encoding="ascii") as fh:
        return parse_alist(fh.read())


# (3,5)-regular quasi-cyclic code on 31-element circulants: 5 has
# multiplicative order 3 mod 31 and 2 has order 5, so the 3x5 grid of
# shift exponents 5^i * 2^j enumerates the order-15 subgroup of Z_31*.
_TANNER_P = 31
_TANNER_A = 5
_TANNER_B = 2


def build_tanner_155() -> ParityCheckMatrix:
    """Construct the [155,64,20] quasi-cyclic code's 93x155 parity-check matrix.

    Blocks (i,j) of the 3x5 array are 31x31 identity matrices cyclically
    shifted by 5^i * 2^j mod 31.  The result is verified structurally
    (shape, regular degrees 3 and 5, GF(2) rank 91) and construction fails
    loudly rather than return an unverified matrix.
    """
    p = _TANNER_P
    check_rows: list[tuple[int, ...]] = []
    for i in range(3):
        shifts = [(pow(_TANNER_A, i, p) * pow(_TANNER_B, j, p)) % p for j in range(5)]
        for r in range(p):
            check_rows.append(tuple(j * p + (r + shifts[j]) % p for j in range(5)))
    h = ParityCheckMatrix(n_bits=5 * p, n_checks=3 * p, check_neighbors=tuple(check_rows))

    if h.n_bits != 155 or h.n_checks != 93:
        raise AssertionError("tanner155 construction produced wrong shape")
    if set(h.bit_degrees) != {3} or set(h.check_degrees) != {5}:
        raise AssertionError("tanner155 construction is not (3,5)-regular")
    rank = gf2_rank(h)
    if rank != 91:
        raise AssertionError(f"tanner155 construction has GF(2) rank {rank}, expected 91")
    return h
