"""Deterministic vertex LP solver: revised simplex with bounded variables.

The decoding pipeline needs vertex optima (basic feasible solutions), so
this is a two-phase primal simplex over the equality form min c.x,
A x = b, l <= x <= u.  The basis is held as a sparse LU factorization
(SuperLU) plus a product-form eta file, refactorized periodically.
Pricing is Dantzig (most negative reduced cost) with an automatic switch
to Bland's rule after a run of degenerate pivots, which guarantees
termination; all tie-breaks are by lowest variable index, so the solve is
a pure function of (problem, config, start).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

BASIC, AT_LOWER, AT_UPPER = 0, 1, 2


class SolverError(RuntimeError):
    """Numerical failure inside the simplex (singular basis, lost feasibility)."""


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-9
    gap_tol: float = 1e-8
    pivot_tol: float = 1e-10
    max_iters: int | None = None  # None: 50 * num_vars
    method: str = "dual"  # "dual" or "primal"
    pricing: str = "devex"  # "devex", "dantzig" or "bland" ("devex" prices like
    #   "dantzig" in the dual method, which selects rows by violation instead)
    refactor_every: int = 100
    bland_after_degenerate: int = 50

    def __post_init__(self):
        if self.method not in ("dual", "primal"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.pricing not in ("devex", "dantzig", "bland"):
            raise ValueError(f"unknown pricing rule {self.pricing!r}")
        if min(self.feas_tol, self.gap_tol, self.pivot_tol) <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(eq=False)
class LpSolution:
    """Vertex solution; ``basis`` and ``var_status`` allow audits and warm starts.

    ``basis`` indexes the internal column space: structural variables first,
    then one artificial per constraint row.
    """

    values: np.ndarray
    objective: float
    status: str
    basis: tuple[int, ...]
    var_status: np.ndarray
    iterations: int = 0


@dataclass(frozen=True)
class CertificateReport:
    max_primal_residual: float
    max_bound_violation: float
    duality_gap: float
    feas_tol: float
    gap_tol: float

    @property
    def primal_ok(self) -> bool:
        return self.max_primal_residual <= self.feas_tol

    @property
    def bounds_ok(self) -> bool:
        return self.max_bound_violation <= self.feas_tol

    @property
    def gap_ok(self) -> bool:
        return abs(self.duality_gap) <= self.gap_tol

    @property
    def passed(self) -> bool:
        return self.primal_ok and self.bounds_ok and self.gap_ok


class _InternalForm:
    """Row-signed equality form with one artificial column per kept row.

    Rows are scaled so the artificial start values b - A l are nonnegative;
    empty rows are dropped (inconsistent empty rows mean an infeasible
    problem).  Column order: structural variables, then artificials.
    """

    def __init__(self, problem):
        a = problem.a_eq.tocsr()
        b = np.asarray(problem.b_eq, dtype=np.float64)
        self.n = int(problem.num_vars)
        self.lower_s = np.asarray(problem.lower, dtype=np.float64)
        self.upper_s = np.asarray(problem.upper, dtype=np.float64)
        self.c_s = np.asarray(problem.objective, dtype=np.float64)

        row_nnz = np.diff(a.indptr)
        keep = row_nnz > 0
        self.inconsistent_empty = bool(np.any(~keep & (np.abs(b) > 0)))
        self.kept_rows = np.flatnonzero(keep)
        a = a[self.kept_rows]
        b = b[self.kept_rows]

        resid0 = b - a @ self.lower_s
        self.row_sign = np.where(resid0 < 0, -1.0, 1.0)
        self.m = a.shape[0]
        a_signed = sp.diags(self.row_sign) @ a
        self.a_full = sp.hstack([a_signed, sp.identity(self.m, format="csc")], format="csc")
        self.a_full_t = self.a_full.T.tocsr()
        self.b = self.row_sign * b
        self.lower = np.concatenate([self.lower_s, np.zeros(self.m)])
        self.upper = np.concatenate([self.upper_s, np.full(self.m, np.inf)])

    def column(self, j: int) -> np.ndarray:
        start, end = self.a_full.indptr[j], self.a_full.indptr[j + 1]
        col = np.zeros(self.m)
        col[self.a_full.indices[start:end]] = self.a_full.data[start:end]
        return col


class _Basis:
    """LU factorization of the basis plus eta-file product updates."""

    def __init__(self, form: _InternalForm):
        self.form = form
        self.lu = None
        self.eta_rows: list[int] = []
        self.eta_cols: list[np.ndarray] = []

    def refactor(self, basis: np.ndarray):
        if basis.size == 0:
            self.lu = None
        else:
            mat = self.form.a_full[:, basis].tocsc()
            try:
                self.lu = spla.splu(mat)
            except RuntimeError as exc:
                raise SolverError(f"basis factorization failed: {exc}") from exc
        self.eta_rows.clear()
        self.eta_cols.clear()

    @property
    def n_etas(self) -> int:
        return len(self.eta_rows)

    def push_eta(self, r: int, w: np.ndarray, pivot: float):
        zeta = w / -pivot
        zeta[r] = 1.0 / pivot - 1.0
        self.eta_rows.append(r)
        self.eta_cols.append(zeta)

    def ftran(self, v: np.ndarray) -> np.ndarray:
        if self.lu is None:
            return v.copy()
        x = self.lu.solve(v)
        for r, zeta in zip(self.eta_rows, self.eta_cols):
            xr = x[r]
            if xr != 0.0:
                x = x + zeta * xr
        return x

    def btran(self, v: np.ndarray) -> np.ndarray:
        if self.lu is None:
            return v.copy()
        y = v.copy()
        for r, zeta in zip(reversed(self.eta_rows), reversed(self.eta_cols)):
            y[r] += zeta @ y
        return self.lu.solve(y, trans="T")


class _Simplex:
    def __init__(self, problem, cfg: SolverConfig):
        self.cfg = cfg
        self.form = _InternalForm(problem)
        self.max_iters = cfg.max_iters if cfg.max_iters is not None else 50 * self.form.n
        self.pivots = 0
        self.since_refactor = 0
        self.degenerate_run = 0
        self.force_refactor = False
        f = self.form
        self.x = np.zeros(f.n + f.m)
        self.vstat = np.empty(f.n + f.m, dtype=np.int8)
        self.basis = np.empty(f.m, dtype=np.int64)
        self.basis_rep = _Basis(f)

    # -- state setup ---------------------------------------------------

    def cold_start(self):
        f = self.form
        self.x[: f.n] = f.lower_s
        self.vstat[: f.n] = AT_LOWER
        self.basis[:] = f.n + np.arange(f.m)
        self.vstat[f.n :] = BASIC
        self.x[f.n :] = f.b - f.a_full[:, : f.n] @ f.lower_s
        self.basis_rep.refactor(self.basis)

    def warm_start(self, basis: tuple[int, ...], var_status: np.ndarray) -> bool:
        f = self.form
        if len(basis) != f.m or len(var_status) != f.n + f.m:
            return False
        self.basis[:] = np.asarray(basis, dtype=np.int64)
        self.vstat[:] = var_status
        # artificials outside the basis stay pinned to zero
        self.form.upper[f.n :] = 0.0
        nonbasic_upper = (self.vstat == AT_UPPER)
        self.x[:] = np.where(nonbasic_upper, f.upper, f.lower)
        try:
            self.basis_rep.refactor(self.basis)
        except SolverError:
            return False
        self._recompute_basics()
        lo_ok = np.all(self.x[self.basis] >= f.lower[self.basis] - self.cfg.feas_tol)
        hi_ok = np.all(self.x[self.basis] <= f.upper[self.basis] + self.cfg.feas_tol)
        return bool(lo_ok and hi_ok)

    def _recompute_basics(self):
        f = self.form
        z = self.x.copy()
        z[self.basis] = 0.0
        rhs = f.b - f.a_full @ z
        self.x[self.basis] = self.basis_rep.ftran(rhs)

    # -- simplex core ----------------------------------------------------

    def run_phase(self, c: np.ndarray) -> str:
        f, cfg = self.form, self.cfg
        # pricing below the ftran/btran noise floor just burns pivots
        dual_tol = max(cfg.feas_tol, 1e-7)
        self.devex_w = np.ones(f.n + f.m)
        room = f.upper - f.lower
        while True:
            if self.pivots >= self.max_iters:
                return ITERATION_LIMIT
            if self.since_refactor >= cfg.refactor_every or (
                self.force_refactor and self.since_refactor > 0
            ):
                self.basis_rep.refactor(self.basis)
                self._recompute_basics()
                self.since_refactor = 0
                self.force_refactor = False
                room = f.upper - f.lower

            d = c - f.a_full_t @ self.basis_rep.btran(c[self.basis])
            d[self.basis] = 0.0
            eligible = (room > 0) & (
                ((self.vstat == AT_LOWER) & (d < -dual_tol))
                | ((self.vstat == AT_UPPER) & (d > dual_tol))
            )
            candidates = np.flatnonzero(eligible)
            if candidates.size == 0:
                return OPTIMAL

            use_bland = (
                cfg.pricing == "bland" or self.degenerate_run >= cfg.bland_after_degenerate
            )
            if use_bland:
                q = int(candidates[0])
            elif cfg.pricing == "devex":
                dc = d[candidates]
                q = int(candidates[np.argmax(dc * dc / self.devex_w[candidates])])
            else:
                q = int(candidates[np.argmax(np.abs(d[candidates]))])

            step = self._pivot(q, use_bland)
            if step is None:
                return UNBOUNDED
            self.pivots += 1
            if step <= cfg.feas_tol:
                self.degenerate_run += 1
            else:
                self.degenerate_run = 0
            room = f.upper - f.lower  # artificial bounds shrink as they exit

    def _pivot(self, q: int, bland: bool) -> float | None:
        f, cfg = self.form, self.cfg
        delta = 1.0 if self.vstat[q] == AT_LOWER else -1.0
        a_q = f.column(q)
        w = self.basis_rep.ftran(a_q)
        if self.basis_rep.n_etas:
            # eta drift can corrupt the pivot column; recompute on a fresh
            # factorization before accepting a pivot based on bad data
            v = np.zeros(f.n + f.m)
            v[self.basis] = w
            if float(np.max(np.abs(a_q - f.a_full @ v))) > 1e-9:
                self.basis_rep.refactor(self.basis)
                self._recompute_basics()
                self.since_refactor = 0
                self.force_refactor = False
                w = self.basis_rep.ftran(a_q)
        dw = delta * w

        xb = self.x[self.basis]
        lo_b = f.lower[self.basis]
        up_b = f.upper[self.basis]
        ratios = np.full(f.m, np.inf)
        relaxed = np.full(f.m, np.inf)
        # entries below the working threshold are indistinguishable from
        # ftran noise and must not become pivot elements
        rt_tol = max(cfg.pivot_tol, 1e-7)
        dec = dw > rt_tol
        inc = dw < -rt_tol
        ratios[dec] = np.maximum(xb[dec] - lo_b[dec], 0.0) / dw[dec]
        ratios[inc] = np.maximum(up_b[inc] - xb[inc], 0.0) / -dw[inc]
        relaxed[dec] = (xb[dec] - lo_b[dec] + cfg.feas_tol) / dw[dec]
        relaxed[inc] = (up_b[inc] - xb[inc] + cfg.feas_tol) / -dw[inc]

        t_bound = f.upper[q] - f.lower[q]
        t_max = float(np.min(relaxed)) if relaxed.size else np.inf
        if not np.isfinite(min(t_max, t_bound)):
            return None

        if t_bound <= t_max:
            # bound flip: q jumps to its other bound, basis unchanged
            self.x[self.basis] = xb - t_bound * dw
            self.x[q] = f.upper[q] if delta > 0 else f.lower[q]
            self.vstat[q] = AT_UPPER if delta > 0 else AT_LOWER
            return t_bound

        if bland:
            t_basic = float(np.min(ratios))
            tied = np.flatnonzero(ratios <= t_basic)
            r = int(tied[np.argmin(self.basis[tied])])
        else:
            # Harris second pass: among blockers within the relaxed step,
            # take the numerically safest pivot element
            tied = np.flatnonzero(ratios <= t_max)
            best = np.abs(w[tied])
            top = tied[best >= best.max() - 1e-12]
            r = int(top[np.argmin(self.basis[top])])
        t = float(ratios[r])
        pivot = w[r]
        if abs(pivot) < rt_tol:
            raise SolverError(f"pivot element {pivot:.3e} below threshold")

        leaving = self.basis[r]
        self.x[self.basis] = xb - t * dw
        self.x[leaving] = f.lower[leaving] if dw[r] > 0 else f.upper[leaving]
        self.vstat[leaving] = AT_LOWER if dw[r] > 0 else AT_UPPER
        if leaving >= f.n:
            # artificial that left the basis can never return
            f.upper[leaving] = 0.0
        self.x[q] = (f.lower[q] if delta > 0 else f.upper[q]) + delta * t
        self.vstat[q] = BASIC

        if self.cfg.pricing == "devex":
            self._update_devex(q, r, leaving, pivot)
        self.basis[r] = q
        self.basis_rep.push_eta(r, w, pivot)
        self.since_refactor += 1
        if abs(pivot) < 1e-5:
            # small pivots make the eta update ill-conditioned
            self.force_refactor = True
        return t

    def _update_devex(self, q: int, r: int, leaving: int, pivot: float):
        """Reference-framework weight update from the pivot row (Forrest-Goldfarb)."""
        f = self.form
        e_r = np.zeros(f.m)
        e_r[r] = 1.0
        rho = f.a_full_t @ self.basis_rep.btran(e_r)
        w_q = self.devex_w[q]
        cand = (rho / pivot) ** 2 * w_q
        np.maximum(self.devex_w, cand, out=self.devex_w)
        self.devex_w[leaving] = max(w_q / (pivot * pivot), 1.0)
        if float(np.max(self.devex_w)) > 1e10:
            self.devex_w[:] = 1.0

    # -- dual simplex ------------------------------------------------------
    #
    # The decoding polytope is massively primal-degenerate (at a vertex most
    # basic beliefs sit exactly at a bound), which stalls primal pivoting.
    # The dual method never stalls on primal degeneracy, and box-bounded
    # problems always admit an immediate dual-feasible start: put every
    # nonbasic variable on the bound its cost prefers.

    def dual_cold_start(self, c: np.ndarray) -> bool:
        f = self.form
        if np.any((c[: f.n] < 0) & ~np.isfinite(f.upper_s)):
            return False
        f.upper[f.n :] = 0.0
        self.basis[:] = f.n + np.arange(f.m)
        self.vstat[f.n :] = BASIC
        self.vstat[: f.n] = np.where(c[: f.n] < 0, AT_UPPER, AT_LOWER)
        self.x[: f.n] = np.where(self.vstat[: f.n] == AT_UPPER, f.upper_s, f.lower_s)
        self.x[f.n :] = 0.0
        self.basis_rep.refactor(self.basis)
        self._recompute_basics()
        return True

    def dual_warm_start(self, c: np.ndarray, basis, var_status) -> bool:
        f = self.form
        if len(basis) != f.m or len(var_status) != f.n + f.m:
            return False
        self.basis[:] = np.asarray(basis, dtype=np.int64)
        self.vstat[:] = var_status
        f.upper[f.n :] = 0.0
        try:
            self.basis_rep.refactor(self.basis)
        except SolverError:
            return False
        d = c - f.a_full_t @ self.basis_rep.btran(c[self.basis])
        dtol = max(self.cfg.feas_tol, 1e-7)
        room = f.upper - f.lower
        flip_up = (self.vstat == AT_LOWER) & (d < -dtol) & (room > 0)
        if np.any(flip_up & ~np.isfinite(f.upper)):
            return False
        flip_dn = (self.vstat == AT_UPPER) & (d > dtol) & (room > 0)
        self.vstat[flip_up] = AT_UPPER
        self.vstat[flip_dn] = AT_LOWER
        at_upper = self.vstat == AT_UPPER
        self.x[:] = np.where(at_upper, f.upper, f.lower)
        self._recompute_basics()
        return True

    def run_dual(self, c: np.ndarray) -> str:
        f, cfg = self.form, self.cfg
        dtol = max(cfg.feas_tol, 1e-7)
        rt_tol = max(cfg.pivot_tol, 1e-7)
        if f.m == 0:
            return OPTIMAL
        while True:
            if self.pivots >= self.max_iters:
                return ITERATION_LIMIT
            if self.since_refactor >= cfg.refactor_every or (
                self.force_refactor and self.since_refactor > 0
            ):
                self.basis_rep.refactor(self.basis)
                self._recompute_basics()
                self.since_refactor = 0
                self.force_refactor = False

            xb = self.x[self.basis]
            lo_b = f.lower[self.basis]
            up_b = f.upper[self.basis]
            viol_low = lo_b - xb
            viol_up = xb - up_b
            viol = np.maximum(viol_low, viol_up)
            use_bland = (
                cfg.pricing == "bland" or self.degenerate_run >= cfg.bland_after_degenerate
            )
            if use_bland:
                bad = np.flatnonzero(viol > cfg.feas_tol)
                if bad.size == 0:
                    return OPTIMAL
                r = int(bad[np.argmin(self.basis[bad])])
            else:
                r = int(np.argmax(viol))
                if viol[r] <= cfg.feas_tol:
                    return OPTIMAL
            s = 1.0 if viol_up[r] >= viol_low[r] else -1.0
            bound_r = up_b[r] if s > 0 else lo_b[r]

            e_r = np.zeros(f.m)
            e_r[r] = 1.0
            rho = f.a_full_t @ self.basis_rep.btran(e_r)
            d = c - f.a_full_t @ self.basis_rep.btran(c[self.basis])
            d[self.basis] = 0.0
            beta = s * rho
            room = f.upper - f.lower
            eligible = (room > 0) & (
                ((self.vstat == AT_LOWER) & (beta > rt_tol))
                | ((self.vstat == AT_UPPER) & (beta < -rt_tol))
            )
            cand = np.flatnonzero(eligible)
            if cand.size == 0:
                return INFEASIBLE
            theta = np.maximum(d[cand] / beta[cand], 0.0)
            t_min = float(np.min(theta))
            if use_bland:
                tied = cand[theta <= t_min]
                q = int(np.min(tied))
            else:
                tied = cand[theta <= t_min + dtol]
                best = np.abs(beta[tied])
                top = tied[best >= best.max() - 1e-12]
                q = int(np.min(top))

            step = self._dual_pivot(q, r, s, bound_r, rt_tol)
            self.pivots += 1
            if t_min <= dtol:
                self.degenerate_run += 1
            else:
                self.degenerate_run = 0

    def _dual_pivot(self, q: int, r: int, s: float, bound_r: float, rt_tol: float) -> float:
        f = self.form
        a_q = f.column(q)
        w = self.basis_rep.ftran(a_q)
        if self.basis_rep.n_etas:
            v = np.zeros(f.n + f.m)
            v[self.basis] = w
            if float(np.max(np.abs(a_q - f.a_full @ v))) > 1e-9:
                self.basis_rep.refactor(self.basis)
                self._recompute_basics()
                self.since_refactor = 0
                self.force_refactor = False
                w = self.basis_rep.ftran(a_q)
        pivot = w[r]
        if abs(pivot) < rt_tol:
            raise SolverError(f"dual pivot element {pivot:.3e} below threshold")

        xb = self.x[self.basis]
        delta = (xb[r] - bound_r) / pivot
        leaving = self.basis[r]
        x_q_new = self.x[q] + delta
        self.x[self.basis] = xb - delta * w
        self.x[leaving] = bound_r
        self.vstat[leaving] = AT_UPPER if s > 0 else AT_LOWER
        self.x[q] = x_q_new
        self.vstat[q] = BASIC
        self.basis[r] = q
        self.basis_rep.push_eta(r, w, pivot)
        self.since_refactor += 1
        if abs(pivot) < 1e-5:
            self.force_refactor = True
        return abs(delta)

    # -- driver ----------------------------------------------------------

    def solve(self, start=None) -> LpSolution:
        f, cfg = self.form, self.cfg
        if self.form.inconsistent_empty:
            return self._finish(INFEASIBLE)
        c2 = np.concatenate([f.c_s, np.zeros(f.m)])

        if cfg.method == "dual":
            started = False
            if start is not None:
                started = self.dual_warm_start(c2, *start)
            if not started:
                started = self.dual_cold_start(c2)
            if started:
                self.degenerate_run = 0
                status = self.run_dual(c2)
                if status != OPTIMAL:
                    return self._finish(status)
                return self._polish(c2)
            # no dual-feasible start available; fall through to primal

        warm = False
        if start is not None:
            warm = self.warm_start(*start)
        if not warm:
            self.cold_start()
            c1 = np.zeros(f.n + f.m)
            c1[f.n :] = 1.0
            status = self.run_phase(c1)
            if status != OPTIMAL:
                return self._finish(status)
            if float(np.sum(self.x[f.n :][self.vstat[f.n :] == BASIC])) > 1e-7:
                return self._finish(INFEASIBLE)
            f.upper[f.n :] = 0.0
            self.basis_rep.refactor(self.basis)
            self._recompute_basics()
            self.since_refactor = 0

        self.degenerate_run = 0
        status = self.run_phase(c2)
        if status != OPTIMAL:
            return self._finish(status)
        return self._polish(c2)

    def _polish(self, c2: np.ndarray) -> LpSolution:
        """Re-verify both primal feasibility and optimality on fresh factorizations."""
        for _ in range(4):
            self.basis_rep.refactor(self.basis)
            self._recompute_basics()
            self.since_refactor = 0
            status = self.run_dual(c2)
            if status != OPTIMAL:
                return self._finish(status)
            status = self.run_phase(c2)
            if status != OPTIMAL:
                return self._finish(status)
            if self.since_refactor == 0:
                break
        if self.since_refactor != 0:
            self.basis_rep.refactor(self.basis)
            self._recompute_basics()
        return self._finish(OPTIMAL)

    def _finish(self, status: str) -> LpSolution:
        f = self.form
        values = self.x[: f.n].copy()
        return LpSolution(
            values=values,
            objective=float(f.c_s @ values),
            status=status,
            basis=tuple(sorted(int(j) for j in self.basis)) if status != INFEASIBLE else (),
            var_status=self.vstat.copy(),
            iterations=self.pivots,
        )


def solve(problem, cfg: SolverConfig = SolverConfig(), start=None) -> LpSolution:
    """Solve to a vertex optimum; deterministic for fixed (problem, cfg, start).

    ``start`` is an optional (basis, var_status) pair from a previous
    solution of a problem with the same constraints; an unusable start
    falls back to a cold two-phase solve.
    """
    return _Simplex(problem, cfg).solve(start=start)


def certify(problem, sol: LpSolution, cfg: SolverConfig = SolverConfig()) -> CertificateReport:
    """Residuals and duality gap implied by the final basis of an optimal solve."""
    if sol.status != OPTIMAL:
        raise ValueError(f"cannot certify a solution with status {sol.status!r}")
    x = sol.values
    a = problem.a_eq
    b = np.asarray(problem.b_eq, dtype=np.float64)
    lower = np.asarray(problem.lower, dtype=np.float64)
    upper = np.asarray(problem.upper, dtype=np.float64)
    c = np.asarray(problem.objective, dtype=np.float64)

    primal_residual = float(np.max(np.abs(a @ x - b))) if b.size else 0.0
    bound_violation = float(max(np.max(lower - x, initial=0.0), np.max(x - upper, initial=0.0)))

    form = _InternalForm(problem)
    basis = np.asarray(sol.basis, dtype=np.int64)
    c_full = np.concatenate([c, np.zeros(form.m)])
    try:
        lu = spla.splu(form.a_full[:, basis].tocsc())
    except RuntimeError as exc:
        raise SolverError(f"certify: basis factorization failed: {exc}") from exc
    y_signed = lu.solve(c_full[basis], trans="T")
    d = c - (form.a_full_t[: form.n] @ y_signed)

    y_orig = form.row_sign * y_signed
    b_kept = b[form.kept_rows]
    dual_obj = float(
        y_orig @ b_kept
        + np.maximum(d, 0.0) @ lower
        + np.minimum(d, 0.0) @ upper
    )
    gap = float(c @ x - dual_obj)
    return CertificateReport(
        max_primal_residual=primal_residual,
        max_bound_violation=bound_violation,
        duality_gap=gap,
        feas_tol=cfg.feas_tol,
        gap_tol=cfg.gap_tol,
    )
