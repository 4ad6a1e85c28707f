"""Convergence sweeps: run a grid of (scheme, alpha, N) cells, tabulate MAE and
EOC, and write CSV files."""

from __future__ import annotations

import configparser
import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .dde import example1, solve_fdde
from .mesh import NBAR_MAX, choose_Nbar
from .nonlinear import nlex3, solve_nonlinear
from .pde import SchemeKind, SolutionGrid, max_abs_error, solve
from .problems import PROBLEM_IDS, fpde2, ml_homog

JOBS_ENV = "GRADEDCAPUTO_JOBS"
DEFAULT_BUDGET = 1e12
AUDIT_NBAR_CAP = 2048

BetaRule = Union[str, float]


class BudgetExceededError(RuntimeError):
    pass


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "").strip()
    if not raw:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise ValueError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    return max(1, jobs)


def resolve_sweep_beta(rule: BetaRule, scheme: SchemeKind, alpha: float) -> float:
    """``optimal`` picks the scheme's own optimum; ``optimal-HL1`` and
    ``optimal-L1`` force one of them; a number is used as is. Uniform schemes
    always get 1."""
    scheme = SchemeKind(scheme)
    if scheme.is_uniform:
        return 1.0
    if isinstance(rule, str):
        key = rule.strip().lower()
        if key == "optimal":
            return scheme.default_beta(alpha)
        if key == "optimal-hl1":
            return (3.0 - alpha) / alpha
        if key == "optimal-l1":
            return (2.0 - alpha) / alpha
        try:
            rule = float(key)
        except ValueError:
            raise ValueError(f"unknown beta rule {rule!r}") from None
    if not rule > 0:
        raise ValueError(f"beta must be positive, got {rule}")
    return float(rule)


def resolve_M(rule: Union[str, int], N: int) -> int:
    if isinstance(rule, str):
        key = rule.strip().upper()
        if key == "N":
            return N
        if key in ("N2", "N^2", "N**2"):
            return N * N
        rule = int(key)
    if rule < 2:
        raise ValueError(f"M must be at least 2, got {rule}")
    return int(rule)


@dataclass(frozen=True)
class SweepConfig:
    problem: str
    schemes: tuple = (SchemeKind.HL1_GRADED,)
    alphas: tuple = (0.4, 0.6, 0.8)
    beta: BetaRule = "optimal"
    Ns: tuple = (64, 128, 256)
    M: Union[str, int] = "N"
    out: Optional[str] = None
    jobs: int = 1
    deterministic: bool = True
    Nbar_rule: Optional[str] = None
    Nbar_max: int = NBAR_MAX
    beta_aux: Optional[float] = None
    budget: float = DEFAULT_BUDGET
    audit: bool = True

    def __post_init__(self) -> None:
        if self.problem not in PROBLEM_IDS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {PROBLEM_IDS}")
        object.__setattr__(self, "schemes", tuple(SchemeKind(s) for s in self.schemes))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "Ns", tuple(int(n) for n in self.Ns))
        if not self.schemes or not self.alphas or not self.Ns:
            raise ValueError("schemes, alphas and Ns must be non-empty")
        if any(b <= a for a, b in zip(self.Ns, self.Ns[1:])):
            raise ValueError(f"N list must be strictly ascending, got {self.Ns}")
        if any(n < 2 or n & (n - 1) for n in self.Ns):
            raise ValueError(f"N list must hold powers of two, got {self.Ns}")
        for s in self.schemes:
            for a in self.alphas:
                resolve_sweep_beta(self.beta, s, a)
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def cells(self) -> list[tuple[SchemeKind, float, int]]:
        return [(s, a, n) for s in self.schemes for a in self.alphas for n in self.Ns]


# {{{ config files

_LIST_KEYS = {"schemes", "alphas", "Ns"}


def _parse_list(key: str, raw: str) -> tuple:
    parts = [p.strip() for p in raw.replace(";", ",").split(",") if p.strip()]
    if key == "Ns" and len(parts) == 1 and ".." in parts[0]:
        # "2^6..2^9" or "64..512": every power of two in the range
        lo, hi = (_parse_int_power(p) for p in parts[0].split(".."))
        out, n = [], lo
        while n <= hi:
            out.append(n)
            n *= 2
        return tuple(out)
    if key == "Ns":
        return tuple(_parse_int_power(p) for p in parts)
    if key == "alphas":
        return tuple(float(p) for p in parts)
    return tuple(parts)


def _parse_int_power(text: str) -> int:
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^", 1)
        return int(base) ** int(exp)
    return int(text)


def _parse_bool(raw: str) -> bool:
    key = raw.strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def parse_config_text(text: str) -> dict:
    """Parse a flat ``key = value`` file (``#`` comments) into keyword
    arguments for :class:`SweepConfig`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    parser.read_string("[sweep]\n" + text)
    known = {f.name for f in fields(SweepConfig)}
    out: dict = {}
    for key, raw in parser["sweep"].items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        if key in _LIST_KEYS:
            out[key] = _parse_list(key, raw)
        elif key in ("jobs", "Nbar_max"):
            out[key] = int(float(raw))
        elif key == "budget":
            out[key] = float(raw)
        elif key == "beta_aux":
            out[key] = None if raw.strip().lower() in ("", "none", "beta") else float(raw)
        elif key in ("deterministic", "audit"):
            out[key] = _parse_bool(raw)
        elif key in ("Nbar_rule", "out"):
            out[key] = raw.strip() or None
        else:
            out[key] = raw.strip()
    return out


def load_config(path: Union[str, Path], **overrides) -> SweepConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config file {path}: {exc}") from exc
    kw = parse_config_text(text)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return SweepConfig(**kw)


# }}}


# {{{ cost guardrail


def estimate_cost(problem: str, scheme: SchemeKind, alpha: float, N: int, M: int,
                  beta: float = 1.0, *, Nbar: Optional[int] = None,
                  Nbar_rule: Optional[str] = None, Nbar_max: int = NBAR_MAX) -> float:
    """Rough count of history multiply-adds of one run.

    The L1 march costs ``N^2/2`` history terms per spatial node. HL1 pays
    ``Nbar^2/2`` for the start-up march and ``N * (N + Nbar)`` for the coarse
    march with its start-up sums.
    """
    scheme = SchemeKind(scheme)
    width = 1 if problem == "fdde1" else M
    if not scheme.is_hl1:
        return 0.5 * N * N * width
    if Nbar is None:
        # delay problems start up on the first segment only
        n_start = N // 2 if problem == "fdde1" else N
        rule = Nbar_rule or ("coarse" if scheme.is_uniform else "order")
        Nbar = choose_Nbar(n_start, alpha, n_start ** -float(beta), Nbar_max=Nbar_max, rule=rule)
    return (0.5 * Nbar * Nbar + N * (N + Nbar)) * width


def check_budget(cfg: SweepConfig, force: bool = False) -> float:
    total = 0.0
    for scheme, alpha, N in cfg.cells():
        beta = resolve_sweep_beta(cfg.beta, scheme, alpha)
        total += estimate_cost(cfg.problem, scheme, alpha, N, resolve_M(cfg.M, N), beta,
                               Nbar_rule=cfg.Nbar_rule, Nbar_max=cfg.Nbar_max)
    if total > cfg.budget and not force:
        raise BudgetExceededError(
            f"estimated cost {total:.3g} exceeds the budget {cfg.budget:.3g}; "
            "pass --force (or raise budget) to run anyway")
    return total


# }}}


# {{{ running cells


@dataclass(frozen=True)
class CellResult:
    scheme: SchemeKind
    alpha: float
    beta: float
    N: int
    M: Optional[int]
    error: float
    ok: bool
    message: str = ""
    Nbar: Optional[int] = None
    seconds: float = 0.0
    audit: Optional[float] = None


def run_single(problem: str, scheme: SchemeKind | str, alpha: float, N: int,
               M: Optional[int] = None, beta: Optional[float] = None, *,
               Nbar: Optional[int] = None, Nbar_rule: Optional[str] = None,
               Nbar_max: int = NBAR_MAX, beta_aux: Optional[float] = None):
    """One solver run; returns ``(error, solution)``.

    For ``fdde1`` ``N`` counts intervals over the whole time axis and is split
    evenly between the delay segments; ``M`` is ignored.
    """
    scheme = SchemeKind(scheme)
    kw = dict(Nbar=Nbar, beta_aux=beta_aux, Nbar_max=Nbar_max)
    if problem == "fdde1":
        prob = example1(alpha)
        n_seg = prob.segments
        if N % n_seg:
            raise ValueError(f"N={N} is not divisible by the {n_seg} delay segments")
        sol = solve_fdde(prob, N // n_seg, beta, scheme, Nbar_rule=Nbar_rule, **kw)
        return sol.max_abs_error(prob.exact), sol
    if M is None:
        M = N
    if problem == "nlex3":
        spec = nlex3(alpha)
        grid = solve_nonlinear(spec, N, M, beta, scheme, Nbar_rule=Nbar_rule, **kw)
        return max_abs_error(grid, spec.base.exact), grid
    spec = fpde2(alpha) if problem == "fpde2" else ml_homog(alpha)
    grid = solve(spec, N, M, scheme, beta, Nbar_rule=Nbar_rule, store_aux=False, **kw)
    return max_abs_error(grid, spec.exact), grid


def _run_cell(cfg: SweepConfig, scheme: SchemeKind, alpha: float, N: int) -> CellResult:
    beta = resolve_sweep_beta(cfg.beta, scheme, alpha)
    M = None if cfg.problem == "fdde1" else resolve_M(cfg.M, N)
    start = time.perf_counter()
    try:
        err, sol = run_single(cfg.problem, scheme, alpha, N, M, beta, Nbar_rule=cfg.Nbar_rule,
                              Nbar_max=cfg.Nbar_max, beta_aux=cfg.beta_aux)
    except Exception as exc:  # recorded, the sweep goes on
        return CellResult(scheme, alpha, beta, N, M, math.nan, False,
                          f"{type(exc).__name__}: {exc}", seconds=time.perf_counter() - start)
    audit = None
    if cfg.audit and scheme.is_hl1:
        # weight identities on this cell's meshes; the start-up check is
        # quadratic in Nbar, so it is capped
        from .stability import lemma1_audit

        n_coarse = N // 2 if cfg.problem == "fdde1" else N
        nbar = min(int(sol.info.get("Nbar") or n_coarse), AUDIT_NBAR_CAP)
        audit = lemma1_audit(n_coarse, beta, alpha, Nbar=nbar,
                             beta_aux=cfg.beta_aux).max_violation
    ok = math.isfinite(err)
    return CellResult(scheme, alpha, beta, N, M, float(err), ok,
                      "" if ok else "non-finite error", Nbar=sol.info.get("Nbar"),
                      seconds=time.perf_counter() - start, audit=audit)


def _run_cell_args(args) -> CellResult:
    return _run_cell(*args)


# }}}


# {{{ report


def compute_eoc(errors: Sequence[float], Ns: Sequence[int]) -> np.ndarray:
    """``eoc[i] = log2(errors[i-1] / errors[i])``; ``eoc[0]`` and cells with a
    non-positive or non-finite error are NaN."""
    e = np.asarray(errors, dtype=np.float64)
    n = np.asarray(Ns)
    if e.shape != n.shape:
        raise ValueError("errors and Ns must have the same length")
    if np.any(n[1:] != 2 * n[:-1]):
        raise ValueError(f"N values must be consecutive doublings, got {list(n)}")
    out = np.full(e.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        good = np.isfinite(e) & (e > 0)
        pair = good[1:] & good[:-1]
        out[1:][pair] = np.log2(e[:-1][pair] / e[1:][pair])
    return out


@dataclass(frozen=True)
class ReportRow:
    scheme: SchemeKind
    alpha: float
    beta: float
    N: int
    M: Optional[int]
    error: float
    eoc: float
    ok: bool = True
    message: str = ""
    Nbar: Optional[int] = None
    seconds: float = 0.0
    audit: Optional[float] = None


@dataclass
class ConvergenceReport:
    problem: str
    rows: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @classmethod
    def from_cells(cls, problem: str, cells: Iterable[CellResult], notes=None) -> ConvergenceReport:
        cells = list(cells)
        rows = []
        groups: dict = {}
        for c in cells:
            groups.setdefault((c.scheme, c.alpha), []).append(c)
        for key in sorted(groups, key=lambda k: (list(SchemeKind).index(k[0]), k[1])):
            group = sorted(groups[key], key=lambda c: c.N)
            eoc = compute_eoc([c.error for c in group], [c.N for c in group])
            for c, e in zip(group, eoc):
                rows.append(ReportRow(c.scheme, c.alpha, c.beta, c.N, c.M, c.error, float(e),
                                      c.ok, c.message, c.Nbar, c.seconds, c.audit))
        return cls(problem=problem, rows=rows, notes=dict(notes or {}))

    def select(self, scheme: SchemeKind | str, alpha: float) -> list[ReportRow]:
        scheme = SchemeKind(scheme)
        return [r for r in self.rows if r.scheme is scheme and math.isclose(r.alpha, alpha)]

    def errors(self, scheme, alpha) -> np.ndarray:
        return np.array([r.error for r in self.select(scheme, alpha)])

    def eocs(self, scheme, alpha) -> np.ndarray:
        return np.array([r.eoc for r in self.select(scheme, alpha)])

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def audits_passed(self, tol: float = 1e-12) -> bool:
        return all(r.audit is None or r.audit <= tol for r in self.rows)

    def to_csv(self, path: Union[str, Path], timings: bool = False) -> Path:
        path = Path(path)
        header = ["problem", "scheme", "alpha", "beta", "N", "M", "Nbar", "error", "eoc",
                  "status", "message"]
        if timings:
            header.append("seconds")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                for key, value in self.notes.items():
                    fh.write(f"# {key}: {value}\n")
                w.writerow(header)
                for r in self.rows:
                    row = [self.problem, r.scheme.value, fmt_float(r.alpha), fmt_float(r.beta),
                           r.N, "" if r.M is None else r.M, "" if r.Nbar is None else r.Nbar,
                           fmt_float(r.error), fmt_eoc(r.eoc), "ok" if r.ok else "failed",
                           r.message]
                    if timings:
                        row.append(f"{r.seconds:.3f}")
                    w.writerow(row)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        return path

    def format_table(self) -> str:
        lines = []
        for scheme in dict.fromkeys(r.scheme for r in self.rows):
            for alpha in dict.fromkeys(r.alpha for r in self.rows if r.scheme is scheme):
                rows = self.select(scheme, alpha)
                lines.append(f"{scheme.value}  alpha={alpha:g}  beta={rows[0].beta:.6g}")
                lines.append(f"{'N':>7} {'MAE':>12} {'EOC':>7}")
                for r in rows:
                    err = f"{r.error:12.3e}" if r.ok else f"{'failed':>12}"
                    lines.append(f"{r.N:>7} {err} {fmt_eoc(r.eoc):>7}"
                                 + ("" if r.ok else f"  {r.message}"))
                lines.append("")
        return "\n".join(lines)


def fmt_float(x: Optional[float]) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def fmt_eoc(x: float) -> str:
    return "" if not math.isfinite(x) else f"{x:.3f}"


# }}}


def run_sweep(cfg: SweepConfig, *, force: bool = False) -> ConvergenceReport:
    """Run every cell of ``cfg`` (in a process pool when ``cfg.jobs > 1``)."""
    check_budget(cfg, force=force)
    cells = cfg.cells()
    if cfg.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_cell_args, [(cfg, *c) for c in cells]))
    else:
        results = [_run_cell(cfg, *c) for c in cells]
    notes = {}
    if cfg.problem == "fdde1":
        notes["N"] = "intervals over the whole time axis, split evenly between delay segments"
    report = ConvergenceReport.from_cells(cfg.problem, results, notes)
    if cfg.out:
        report.to_csv(Path(cfg.out) / "convergence.csv", timings=not cfg.deterministic)
    return report


# {{{ presets

PRESETS = {
    "table1": dict(problem="fdde1", schemes=("hl1-uniform", "hl1-graded"), alphas=(0.5,),
                   beta=5.0, Ns=(64, 128, 256, 512)),
    "table2": dict(problem="fpde2", schemes=("hl1-uniform",), alphas=(0.4, 0.6, 0.8),
                   Ns=(32, 64, 128, 256, 512)),
    "table3": dict(problem="fpde2", schemes=("hl1-graded", "l1-graded"), alphas=(0.4, 0.6, 0.8),
                   Ns=(64, 128, 256)),
    "table4": dict(problem="nlex3", schemes=("hl1-graded",), alphas=(0.4, 0.6, 0.8),
                   Ns=(16, 32, 64, 128)),
}

FULL_EXTRA = {"table1": (1024,), "table2": (), "table3": (512, 1024), "table4": (256,)}


def preset(name: str, full: bool = False, **overrides) -> SweepConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    kw = dict(PRESETS[name])
    if full:
        kw["Ns"] = tuple(kw["Ns"]) + FULL_EXTRA[name]
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return SweepConfig(**kw)


# }}}


# {{{ CSV writers


def _open_csv(path: Union[str, Path]):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path, path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_error_grid(grid: SolutionGrid, exact, path: Union[str, Path]) -> Path:
    """``x,t,abs_err`` for every coarse node, time-major."""
    err = grid.abs_error(exact)
    path, fh = _open_csv(path)
    with fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "abs_err"])
        for j, t in enumerate(grid.times):
            for m, x in enumerate(grid.spatial.points):
                w.writerow([repr(float(x)), repr(float(t)), repr(float(err[j, m]))])
    return path


def write_solution_csv(grid: SolutionGrid, path: Union[str, Path], exact=None) -> Path:
    """``x,t,value`` (plus ``abs_err`` when ``exact`` is given)."""
    err = grid.abs_error(exact) if exact is not None else None
    path, fh = _open_csv(path)
    with fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "value"] + (["abs_err"] if err is not None else []))
        for j, t in enumerate(grid.times):
            for m, x in enumerate(grid.spatial.points):
                row = [repr(float(x)), repr(float(t)), repr(float(grid.values[j, m]))]
                if err is not None:
                    row.append(repr(float(err[j, m])))
                w.writerow(row)
    return path


def write_series_csv(times, values, path: Union[str, Path], exact=None) -> Path:
    """``t,y,abs_err`` for scalar time series (``abs_err`` blank without ``exact``)."""
    path, fh = _open_csv(path)
    with fh:
        w = csv.writer(fh)
        w.writerow(["t", "y", "abs_err"])
        for t, y in zip(times, values):
            e = "" if exact is None else repr(abs(float(y) - float(exact(float(t)))))
            w.writerow([repr(float(t)), repr(float(y)), e])
    return path


def write_ratio_csv(times, ratios, path: Union[str, Path]) -> Path:
    path, fh = _open_csv(path)
    with fh:
        w = csv.writer(fh)
        w.writerow(["j", "t_j", "ratio"])
        for j, (t, r) in enumerate(zip(times, ratios)):
            w.writerow([j, repr(float(t)), repr(float(r))])
    return path


def write_weights_csv(rows: Iterable[tuple[str, int, float]], path: Union[str, Path]) -> Path:
    path, fh = _open_csv(path)
    with fh:
        w = csv.writer(fh)
        w.writerow(["kind", "k", "value"])
        for kind, k, v in rows:
            w.writerow([kind, k, repr(float(v))])
    return path


# }}}


__all__ = [
    "BudgetExceededError",
    "CellResult",
    "ConvergenceReport",
    "JOBS_ENV",
    "PRESETS",
    "ReportRow",
    "SweepConfig",
    "check_budget",
    "compute_eoc",
    "default_jobs",
    "emit_error_grid",
    "estimate_cost",
    "load_config",
    "parse_config_text",
    "preset",
    "resolve_M",
    "resolve_sweep_beta",
    "run_single",
    "run_sweep",
    "write_ratio_csv",
    "write_series_csv",
    "write_solution_csv",
    "write_weights_csv",
]
