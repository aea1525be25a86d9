"""Builds the LP decoding relaxation as a sparse equality-form problem.

Variables, in canonical order: one bit belief b_i(1) per bit (N of them),
then for each check in ascending order one variable per even-weight local
codeword of that check, local words in numeric order.  Equality rows: one
normalization row per check (its local-word beliefs sum to 1), then one
compatibility row per incidence edge (i, a), grouped by bit then by check
(b_i(1) minus the check-a beliefs of words with bit i set equals 0).
All variables are box-bounded to [0, 1].

The objective prices each local-word belief at the sum of member-bit costs
divided by bit degree, so the cost of a bit shared by k checks is counted
once overall; bit-belief variables carry zero objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .code_model import ParityCheckMatrix, as_binary_word, is_codeword

# 2^(d-1) local words per check; cap documents the exponential table.
MAX_CHECK_DEGREE = 31


def cost_from_noise(x) -> np.ndarray:
    """Per-bit decoding cost gamma_i = 1 - 2*x_i for channel output x."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("noise vector has non-finite entries")
    return 1.0 - 2.0 * x


@lru_cache(maxsize=None)
def local_codewords(degree: int) -> np.ndarray:
    """All even-weight binary tuples of the given length, in numeric order.

    Row t of the (2^(degree-1), degree) table is the t-th even-weight word
    read most-significant-bit first.  Read-only.
    """
    if degree < 2:
        raise ValueError(f"check degree {degree} < 2")
    if degree > MAX_CHECK_DEGREE:
        raise ValueError(f"check degree {degree} exceeds cap {MAX_CHECK_DEGREE}")
    values = np.arange(2**degree, dtype=np.int64)
    shifts = np.arange(degree - 1, -1, -1)
    bits = ((values[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
    table = bits[bits.sum(axis=1) % 2 == 0]
    table.setflags(write=False)
    return table


@dataclass(frozen=True, eq=False)
class LpProblem:
    """Sparse equality-form decoding LP: min c.x, A x = b, 0 <= x <= 1."""

    n_bits: int
    num_vars: int
    objective: np.ndarray
    a_eq: sp.csc_matrix
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    check_offsets: np.ndarray  # first variable index of each check's word block

    @property
    def n_rows(self) -> int:
        return self.a_eq.shape[0]


@lru_cache(maxsize=8)
def _lp_structure(h: ParityCheckMatrix):
    """Constraint matrix and layout for a code; shared by every cost vector."""
    n, m = h.n_bits, h.n_checks
    degrees = h.check_degrees
    if max(degrees) > MAX_CHECK_DEGREE:
        raise ValueError(f"check degree {max(degrees)} exceeds cap {MAX_CHECK_DEGREE}")

    offsets = np.empty(m, dtype=np.int64)
    pos = n
    for a in range(m):
        offsets[a] = pos
        pos += 2 ** (degrees[a] - 1)
    num_vars = pos

    rows: list[int] = []
    cols: list[int] = []
    vals: list[int] = []

    # normalization rows, one per check
    for a in range(m):
        block = 2 ** (degrees[a] - 1)
        rows.extend([a] * block)
        cols.extend(range(offsets[a], offsets[a] + block))
        vals.extend([1] * block)

    # compatibility rows, one per edge, bit-major
    row = m
    for i in range(n):
        for a in h.bit_neighbors[i]:
            table = local_codewords(degrees[a])
            pos_in_check = h.check_neighbors[a].index(i)
            hot = np.flatnonzero(table[:, pos_in_check])
            rows.append(row)
            cols.append(i)
            vals.append(1)
            rows.extend([row] * hot.size)
            cols.extend((offsets[a] + hot).tolist())
            vals.extend([-1] * hot.size)
            row += 1

    n_rows = m + h.n_edges
    a_eq = sp.csc_matrix(
        (np.asarray(vals, dtype=np.float64), (rows, cols)), shape=(n_rows, num_vars)
    )
    b_eq = np.zeros(n_rows)
    b_eq[:m] = 1.0
    b_eq.setflags(write=False)
    offsets.setflags(write=False)
    return num_vars, a_eq, b_eq, offsets


def build_lp(h: ParityCheckMatrix, gamma) -> LpProblem:
    """Assemble the decoding LP for cost vector ``gamma`` (length n_bits)."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != (h.n_bits,):
        raise ValueError(f"gamma length {gamma.shape} != n_bits {h.n_bits}")
    if not np.all(np.isfinite(gamma)):
        raise ValueError("gamma has non-finite entries")

    num_vars, a_eq, b_eq, offsets = _lp_structure(h)
    inv_degree = 1.0 / np.array([len(nbrs) for nbrs in h.bit_neighbors], dtype=np.float64)

    objective = np.zeros(num_vars)
    for a, nbrs in enumerate(h.check_neighbors):
        table = local_codewords(len(nbrs))
        weights = gamma[list(nbrs)] * inv_degree[list(nbrs)]
        block = table.astype(np.float64) @ weights
        objective[offsets[a] : offsets[a] + block.size] = block
    objective.setflags(write=False)

    lower = np.zeros(num_vars)
    upper = np.ones(num_vars)
    lower.setflags(write=False)
    upper.setflags(write=False)
    return LpProblem(
        n_bits=h.n_bits,
        num_vars=num_vars,
        objective=objective,
        a_eq=a_eq,
        b_eq=b_eq,
        lower=lower,
        upper=upper,
        check_offsets=offsets,
    )


@lru_cache(maxsize=8)
def _even_word_values(degree: int) -> np.ndarray:
    table = local_codewords(degree)
    weights = 1 << np.arange(degree - 1, -1, -1)
    values = table.astype(np.int64) @ weights
    values.setflags(write=False)
    return values


@lru_cache(maxsize=8)
def zero_codeword_start(h: ParityCheckMatrix):
    """Feasible starting basis at the zero-codeword vertex of the relaxation.

    Per check: the all-zero local word covers the normalization row, and one
    weight-2 word per incident edge covers the compatibility rows.  Pairing
    each neighbor position with the next one around an odd-length cycle
    (even degrees park the last position on position 0 instead) keeps the
    per-check blocks nonsingular.  Returns (basis, var_status) for the
    solver, or None for codes with degree-2 checks.
    """
    if min(h.check_degrees) < 3:
        return None
    num_vars, a_eq, _, offsets = _lp_structure(h)
    n_rows = a_eq.shape[0]
    basis = []
    for a, nbrs in enumerate(h.check_neighbors):
        d = len(nbrs)
        values = _even_word_values(d)
        basis.append(int(offsets[a]))  # all-zero word, numeric value 0
        cycle = d if d % 2 == 1 else d - 1
        for pos in range(d):
            partner = (pos + 1) % cycle if pos < cycle else 0
            v = (1 << (d - 1 - pos)) | (1 << (d - 1 - partner))
            t = int(np.searchsorted(values, v))
            basis.append(int(offsets[a]) + t)
    var_status = np.ones(num_vars + n_rows, dtype=np.int8)  # AT_LOWER
    var_status[basis] = 0  # BASIC
    return tuple(basis), var_status


def codeword_assignment(h: ParityCheckMatrix, p: LpProblem, w) -> np.ndarray:
    """Full variable vector of a codeword: bit beliefs 0/1, one-hot word beliefs."""
    word = as_binary_word(w, h.n_bits)
    x = np.zeros(p.num_vars)
    x[: h.n_bits] = word
    for a, nbrs in enumerate(h.check_neighbors):
        table = local_codewords(len(nbrs))
        local = word[list(nbrs)]
        t = np.flatnonzero((table == local).all(axis=1))
        if t.size != 1:
            raise ValueError(f"word restricted to check {a} has odd parity")
        x[p.check_offsets[a] + t[0]] = 1.0
    return x


def objective_of_codeword(h: ParityCheckMatrix, gamma, w) -> float:
    """Decoding cost sum(gamma_i * w_i) of a codeword; rejects non-codewords."""
    word = as_binary_word(w, h.n_bits)
    if not is_codeword(h, word):
        raise ValueError("word is not a codeword")
    gamma = np.asarray(gamma, dtype=np.float64)
    return float(gamma @ word)


def to_lp_text(p: LpProblem) -> str:
    """Debug export in the plain-text LP file convention (minimize / rows / bounds)."""
    terms = [
        f"{'+' if c >= 0 else '-'} {abs(c):.17g} v{j}"
        for j, c in enumerate(p.objective)
        if c != 0.0
    ]
    lines = ["Minimize", " obj: " + (" ".join(terms) if terms else "0")]
    lines.append("Subject To")
    a_csr = p.a_eq.tocsr()
    for r in range(p.n_rows):
        start, end = a_csr.indptr[r], a_csr.indptr[r + 1]
        row_terms = [
            f"{'+' if v >= 0 else '-'} {abs(v):.17g} v{j}"
            for j, v in zip(a_csr.indices[start:end], a_csr.data[start:end])
        ]
        lines.append(f" r{r}: " + " ".join(row_terms) + f" = {p.b_eq[r]:.17g}")
    lines.append("Bounds")
    lines.extend(f" 0 <= v{j} <= 1" for j in range(p.num_vars))
    lines.append("End")
    return "\n".join(lines) + "\n"
