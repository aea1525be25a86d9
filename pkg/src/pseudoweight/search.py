"""Iterative search for low effective-distance pseudo-codewords.

One trial alternates two moves: decode the current noise point to the
cheapest vertex of the decoding polytope, then jump to the weighted median
of that vertex and the zero codeword (the point of the connecting ray
equidistant from both in decoding cost).  Re-decoding from just past the
median keeps the trajectory inside the erroneous region while the
effective distance of the visited vertices never increases; the fixed
point is a vertex whose median noise lies on the error surface around the
zero codeword.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .code_model import ParityCheckMatrix, is_codeword
from .lp_problem import build_lp, cost_from_noise, zero_codeword_start
from .lp_solver import OPTIMAL, LpSolution, SolverConfig, solve


class SearchError(RuntimeError):
    pass


class DecodeFailedError(SearchError):
    """The LP solve behind a decode did not reach an optimal vertex."""


class MlCertificateError(SearchError):
    """An integral decode failed the parity re-check; indicates a solver bug."""


class ZeroDecodeError(SearchError):
    """Decoding collapsed to the zero pseudo-codeword despite perturbation."""


class DescentViolationError(SearchError):
    """Effective distance increased along a trace beyond tolerance."""


class StartRetryError(SearchError):
    """No nonzero decode found within the random-start retry budget."""


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for one search trial; defaults match the production tolerances."""

    eps_rel: float = 1e-4  # relative outward step past the median hyperplane
    eps_rel_max: float = 1e-1
    y_tol: float = 1e-8  # sup-norm fixed-point tolerance on the median point
    max_search_iters: int = 200
    int_tol: float = 1e-6
    descent_tol: float = 1e-7
    start_amplitude: float = 1.0
    start_mean: float = 1.0
    start_sd: float = 1.0
    start_growth: float = 1.5
    start_retries: int = 10
    warm_start: bool = True
    solver: SolverConfig = field(default_factory=SolverConfig)


@dataclass(frozen=True, eq=False)
class PseudoCodeword:
    """Bit-belief vector of an LP vertex, with integrality classification."""

    sigma: np.ndarray
    is_integral: bool
    source_objective: float
    solution: LpSolution | None = field(default=None, repr=False)

    def is_zero(self, tol: float = 1e-6) -> bool:
        return float(np.max(self.sigma)) <= tol

    def rounded_word(self) -> np.ndarray:
        return np.rint(self.sigma).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class SearchResult:
    pcw: PseudoCodeword
    instanton: np.ndarray
    distance: float
    iterations: int
    trace: tuple[tuple[int, float, float], ...]
    terminated: bool


def as_noise_vector(x, n_bits: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n_bits,):
        raise ValueError(f"noise length {x.shape} != n_bits {n_bits}")
    if not np.all(np.isfinite(x)):
        raise ValueError("noise vector has non-finite entries")
    return x


def lp_decode(
    h: ParityCheckMatrix,
    x,
    cfg: SearchConfig = SearchConfig(),
    start: tuple | None = None,
) -> PseudoCodeword:
    """Decode channel output ``x`` to the cheapest vertex of the relaxation.

    Integral vertices are re-checked against the parity checks (an integral
    LP optimum must be a codeword, and its rounding is the ML answer).
    ``start`` may carry the (basis, var_status) of a previous decode of the
    same code; such re-solves run primal from that still-feasible basis,
    while fresh decodes run from the zero-codeword basis.
    """
    x = as_noise_vector(x, h.n_bits)
    problem = build_lp(h, cost_from_noise(x))
    if start is not None:
        scfg = cfg.solver if cfg.solver.method == "primal" else replace(cfg.solver, method="primal")
        sol = solve(problem, scfg, start=start)
    else:
        sol = solve(problem, cfg.solver, start=zero_codeword_start(h))
    if sol.status != OPTIMAL:
        raise DecodeFailedError(f"LP solve ended with status {sol.status!r}")
    sigma = sol.values[: h.n_bits].copy()
    sigma.setflags(write=False)
    integral = bool(np.max(np.abs(sigma - np.rint(sigma))) <= cfg.int_tol)
    pcw = PseudoCodeword(
        sigma=sigma, is_integral=integral, source_objective=sol.objective, solution=sol
    )
    if integral and not is_codeword(h, pcw.rounded_word()):
        raise MlCertificateError("integral decode does not satisfy the parity checks")
    return pcw


def _sigma_of(p) -> np.ndarray:
    sigma = p.sigma if isinstance(p, PseudoCodeword) else np.asarray(p, dtype=np.float64)
    if not sigma.any():
        raise ValueError("all-zero pseudo-codeword")
    return sigma


def effective_distance(p) -> float:
    """(sum sigma)^2 / sum sigma^2; equals Hamming weight on integral inputs."""
    sigma = _sigma_of(p)
    s = float(np.sum(sigma))
    return s * s / float(sigma @ sigma)


def weighted_median(p) -> np.ndarray:
    """Noise point equidistant in decoding cost from the vertex and the zero word.

    y = (sigma / 2) * sum(sigma) / sum(sigma^2); lies on the ray from the
    origin through sigma, on the hyperplane where the vertex's cost equals
    the zero codeword's.
    """
    sigma = _sigma_of(p)
    s = float(np.sum(sigma))
    s2 = float(sigma @ sigma)
    y = sigma * (0.5 * s / s2)
    if abs(s - 2.0 * float(sigma @ y)) > 1e-9:
        raise FloatingPointError("equidistance identity violated")
    return y


def _step_decode(h, y_prev, cfg, hint):
    """Decode from just past the median point, escalating the step on collapse."""
    eps = cfg.eps_rel
    while True:
        x = (1.0 + eps) * y_prev
        p = lp_decode(h, x, cfg, start=hint)
        if not p.is_zero(cfg.int_tol):
            return x, p
        if eps >= cfg.eps_rel_max:
            raise ZeroDecodeError(
                f"decode collapsed to zero at relative step {eps:g}"
            )
        eps = min(eps * 10.0, cfg.eps_rel_max)


def _start_hint(p: PseudoCodeword, cfg: SearchConfig):
    if not cfg.warm_start or p.solution is None:
        return None
    return (p.solution.basis, p.solution.var_status)


def run_search(
    h: ParityCheckMatrix,
    x0,
    cfg: SearchConfig = SearchConfig(),
    _first: PseudoCodeword | None = None,
) -> SearchResult:
    """Run one search trial from noise ``x0``; x0 must decode to a nonzero vertex.

    Iterates decode / weighted-median moves until the median point is a
    fixed point within ``y_tol`` (sup norm) or the iteration cap is hit.
    The trace records (iteration, effective distance, decode objective) and
    a distance increase beyond ``descent_tol`` aborts the trial loudly.
    """
    x0 = as_noise_vector(x0, h.n_bits)
    p = _first if _first is not None else lp_decode(h, x0, cfg)
    if p.is_zero(cfg.int_tol):
        raise ZeroDecodeError("starting noise decodes to the zero pseudo-codeword")

    d = effective_distance(p)
    y = weighted_median(p)
    trace = [(0, d, p.source_objective)]
    terminated = False
    iterations = 0
    for k in range(1, cfg.max_search_iters + 1):
        _, p_next = _step_decode(h, y, cfg, _start_hint(p, cfg))
        d_next = effective_distance(p_next)
        y_next = weighted_median(p_next)
        trace.append((k, d_next, p_next.source_objective))
        if d_next > d + cfg.descent_tol:
            raise DescentViolationError(
                f"distance rose from {d:.9f} to {d_next:.9f} at iteration {k}"
            )
        gap = float(np.max(np.abs(y_next - y)))
        p, d, y, iterations = p_next, d_next, y_next, k
        if gap <= cfg.y_tol:
            terminated = True
            break

    return SearchResult(
        pcw=p,
        instanton=y,
        distance=d,
        iterations=iterations,
        trace=tuple(trace),
        terminated=terminated,
    )


def verify_on_error_surface(
    h: ParityCheckMatrix, r: SearchResult, delta: float, cfg: SearchConfig = SearchConfig()
) -> bool:
    """True iff shrinking the instanton decodes to zero and stretching does not."""
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if not r.terminated:
        raise ValueError("can only verify a terminated search result")
    inner = lp_decode(h, (1.0 - delta) * r.instanton, cfg)
    if not inner.is_zero(cfg.int_tol):
        return False
    outer = lp_decode(h, (1.0 + delta) * r.instanton, cfg)
    return not outer.is_zero(cfg.int_tol)


def random_start(h: ParityCheckMatrix, cfg: SearchConfig, rng_seed: int) -> np.ndarray:
    """Seeded noise start far enough from the origin to decode to a nonzero vertex."""
    return _random_start_with_decode(h, cfg, rng_seed)[0]


def _random_start_with_decode(h, cfg, rng_seed):
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    draw = rng.normal(cfg.start_mean, cfg.start_sd, h.n_bits)
    for attempt in range(cfg.start_retries):
        x0 = cfg.start_amplitude * cfg.start_growth**attempt * draw
        p = lp_decode(h, x0, cfg)
        if not p.is_zero(cfg.int_tol):
            return x0, p
    raise StartRetryError(
        f"no nonzero decode within {cfg.start_retries} amplitude escalations"
    )


# -- serialization -----------------------------------------------------------


def fingerprint_of(sigma) -> str:
    """Stable 64-bit hex fingerprint of a belief vector rounded to 6 decimals."""
    parts = []
    for v in np.asarray(sigma, dtype=np.float64):
        r = round(float(v), 6) + 0.0  # normalize -0.0
        parts.append(f"{r:.6f}")
    return hashlib.sha256("|".join(parts).encode("ascii")).hexdigest()[:16]


def result_to_json(r: SearchResult) -> str:
    payload = {
        "distance": r.distance,
        "iterations": r.iterations,
        "terminated": r.terminated,
        "integral": r.pcw.is_integral,
        "sigma": [float(f"{v:.12g}") for v in r.pcw.sigma],
        "instanton": [float(v) for v in r.instanton],
        "trace": [[k, d, obj] for k, d, obj in r.trace],
    }
    return json.dumps(payload, indent=2) + "\n"


def result_from_json(text: str) -> SearchResult:
    data = json.loads(text)
    trace = tuple((int(k), float(d), float(obj)) for k, d, obj in data["trace"])
    sigma = np.asarray(data["sigma"], dtype=np.float64)
    sigma.setflags(write=False)
    instanton = np.asarray(data["instanton"], dtype=np.float64)
    instanton.setflags(write=False)
    pcw = PseudoCodeword(
        sigma=sigma,
        is_integral=bool(data["integral"]),
        source_objective=trace[-1][2] if trace else math.nan,
    )
    return SearchResult(
        pcw=pcw,
        instanton=instanton,
        distance=float(data["distance"]),
        iterations=int(data["iterations"]),
        trace=trace,
        terminated=bool(data["terminated"]),
    )
