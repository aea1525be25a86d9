"""Effective-distance frequency spectrum over many seeded search trials.

Each trial runs the pseudo-codeword search from an independently seeded
random start; terminal vertices are deduplicated by fingerprint and the
spectrum sorted by ascending effective distance.  Trial seeds are derived
from the master seed with a splitmix-style mixer, so the spectrum is a
pure function of (code, n_trials, master_seed, config) no matter how the
trials are scheduled or how many workers run them.
"""

from __future__ import annotations

import csv
import io
import json
import multiprocessing as mp
from dataclasses import dataclass, replace

from .code_model import ParityCheckMatrix
from .search import (
    PseudoCodeword,
    SearchConfig,
    SearchError,
    SearchResult,
    fingerprint_of,
    result_to_json,
    run_search,
    _random_start_with_decode,
)
from .lp_solver import SolverError

_MASK64 = (1 << 64) - 1


def derive_trial_seed(master_seed: int, trial: int) -> int:
    """splitmix64 of the trial counter; fixed for on-disk reproducibility."""
    z = (master_seed + (trial + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True, eq=False)
class SpectrumEntry:
    distance: float
    fingerprint: str
    count: int
    is_integral: bool
    representative: SearchResult
    first_trial: int


@dataclass(frozen=True, eq=False)
class Spectrum:
    entries: tuple[SpectrumEntry, ...]
    n_trials: int
    n_converged: int
    seed: int
    failures: tuple[tuple[int, str, float | None], ...]

    @property
    def min_distance(self) -> float | None:
        return self.entries[0].distance if self.entries else None


def _strip(r: SearchResult) -> SearchResult:
    """Drop the solver payload before results cross process boundaries."""
    pcw = PseudoCodeword(
        sigma=r.pcw.sigma,
        is_integral=r.pcw.is_integral,
        source_objective=r.pcw.source_objective,
    )
    return replace(r, pcw=pcw)


def _run_one(h, cfg, trial, seed):
    try:
        x0, p0 = _random_start_with_decode(h, cfg, seed)
        r = run_search(h, x0, cfg, _first=p0)
    except (SearchError, SolverError) as exc:
        return trial, "error", f"{type(exc).__name__}: {exc}", None
    if not r.terminated:
        return trial, "unconverged", None, _strip(r)
    return trial, "ok", None, _strip(r)


_WORKER_STATE: dict = {}


def _init_worker(h, cfg):
    _WORKER_STATE["h"] = h
    _WORKER_STATE["cfg"] = cfg


def _worker_task(args):
    trial, seed = args
    return _run_one(_WORKER_STATE["h"], _WORKER_STATE["cfg"], trial, seed)


def run_spectrum(
    h: ParityCheckMatrix,
    n_trials: int,
    master_seed: int,
    cfg: SearchConfig = SearchConfig(),
    workers: int = 1,
) -> Spectrum:
    """Run seeded trials and aggregate the deduplicated distance spectrum.

    Failed or unconverged trials are recorded under ``failures`` (with the
    best distance seen, when any) and excluded from the entries.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    tasks = [(t, derive_trial_seed(master_seed, t)) for t in range(n_trials)]
    if workers > 1:
        ctx = mp.get_context("fork")
        chunk = max(1, n_trials // (workers * 8))
        with ctx.Pool(workers, initializer=_init_worker, initargs=(h, cfg)) as pool:
            raw = list(pool.imap_unordered(_worker_task, tasks, chunksize=chunk))
    else:
        raw = [_run_one(h, cfg, t, seed) for t, seed in tasks]
    raw.sort(key=lambda item: item[0])

    groups: dict[str, list] = {}
    failures: list[tuple[int, str, float | None]] = []
    n_converged = 0
    for trial, status, message, result in raw:
        if status == "ok":
            n_converged += 1
            fp = fingerprint_of(result.pcw.sigma)
            if fp in groups:
                groups[fp][1] += 1
            else:
                groups[fp] = [result, 1, trial]
        elif status == "unconverged":
            failures.append((trial, "unconverged", result.distance))
        else:
            failures.append((trial, message, None))

    entries = [
        SpectrumEntry(
            distance=rep.distance,
            fingerprint=fp,
            count=count,
            is_integral=rep.pcw.is_integral,
            representative=rep,
            first_trial=first,
        )
        for fp, (rep, count, first) in groups.items()
    ]
    entries.sort(key=lambda e: (e.distance, e.fingerprint))
    return Spectrum(
        entries=tuple(entries),
        n_trials=n_trials,
        n_converged=n_converged,
        seed=master_seed,
        failures=tuple(failures),
    )


def pseudo_weight_spectrum_gap(s: Spectrum, d_min_code: float) -> float:
    """Smallest non-integral (non-codeword) distance minus the code's minimum distance."""
    fractional = [e.distance for e in s.entries if not e.is_integral]
    if not fractional:
        raise ValueError("spectrum has no non-integral entries")
    return min(fractional) - d_min_code


def export_spectrum(s: Spectrum, format: str = "csv") -> str:
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["distance", "count", "is_integral", "fingerprint"])
        for e in s.entries:
            writer.writerow([f"{e.distance:.12g}", e.count, int(e.is_integral), e.fingerprint])
        return buf.getvalue()
    if format == "json":
        payload = {
            "n_trials": s.n_trials,
            "n_converged": s.n_converged,
            "seed": s.seed,
            "entries": [
                {
                    "distance": e.distance,
                    "fingerprint": e.fingerprint,
                    "count": e.count,
                    "is_integral": e.is_integral,
                    "first_trial": e.first_trial,
                    "representative": json.loads(result_to_json(e.representative)),
                }
                for e in s.entries
            ],
            "failures": [
                {"trial": t, "reason": reason, "best_distance": best}
                for t, reason, best in s.failures
            ],
        }
        return json.dumps(payload, indent=2) + "\n"
    raise ValueError(f"unknown export format {format!r}")


def format_summary(s: Spectrum, d_min_code: float | None = None, wall_time: float | None = None) -> str:
    """One-line run summary: minimum distance, optional gap, counts, wall time."""
    parts = []
    if s.min_distance is not None:
        parts.append(f"min_distance={s.min_distance:.6f}")
    else:
        parts.append("min_distance=n/a")
    if d_min_code is not None:
        try:
            parts.append(f"gap={pseudo_weight_spectrum_gap(s, d_min_code):+.6f}")
        except ValueError:
            parts.append("gap=n/a")
    parts.append(f"converged={s.n_converged}/{s.n_trials}")
    parts.append(f"distinct={len(s.entries)}")
    if wall_time is not None:
        parts.append(f"wall_time={wall_time:.1f}s")
    return " ".join(parts)
