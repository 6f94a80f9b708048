"""Reading candidate/score/mixture files, writing results, and the bound diagnostic."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .candidates import CandidateSet
from .discrepancy import EmpiricalMeasure, GramOperator, candidate_scores, mmd_squared
from .exceptions import DataError
from .selectors import SelectionResult
from .solvers import solve_simplex_qp
from .target import GaussianMixture, double_integral, kernel_mean

__all__ = [
    "CandidateSet", "DiagnosticReport", "diagnose", "file_digest", "load_candidates",
    "load_matrix", "load_mixture", "read_result", "write_json", "write_result",
]


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_matrix(path):
    """Numeric CSV as an (n, d) array; a non-numeric first row is a header."""
    rows = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh)):
            row = [cell.strip() for cell in row]
            if not row or all(cell == "" for cell in row):
                continue
            if not rows and lineno == 0 and not all(_is_number(c) for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError as exc:
                raise DataError(f"{path}: row {lineno} is not numeric ({exc})") from exc
            if rows and len(values) != len(rows[0]):
                raise DataError(f"{path}: ragged row {lineno} has {len(values)} columns, expected {len(rows[0])}")
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}: non-finite value in row {lineno}")
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def load_candidates(path, format: str = "csv", score_path=None) -> CandidateSet:
    """Load candidate points (and optionally their scores); row order is kept."""
    if format != "csv":
        raise DataError(f"unsupported candidate format {format!r}")
    X = load_matrix(path)
    U = None
    if score_path is not None:
        U = load_matrix(score_path)
        if U.shape != X.shape:
            raise DataError(
                f"score file {score_path} has {U.shape[0]} rows x {U.shape[1]} columns but "
                f"candidate file {path} has {X.shape[0]} rows x {X.shape[1]} columns"
            )
    return CandidateSet(X, U, provenance=f"{path} rows 0..{X.shape[0] - 1}")


def load_mixture(path) -> GaussianMixture:
    try:
        return GaussianMixture.from_json(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read mixture {path}: {exc}") from exc


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(doc, path=None):
    """Key-sorted JSON to ``path`` (or return the text when ``path`` is None)."""
    text = json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"
    if path is None:
        return text
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
    return text


def result_document(result: SelectionResult):
    return {
        "pi": result.pi.tolist(),
        "trace": result.trace.tolist(),
        "timings_ms": result.timings_ms.tolist(),
        "config": result.config,
    }


def write_result(result: SelectionResult, path, format: str = "json"):
    """Write a selection result as JSON or as a per-iteration CSV trace."""
    if format == "json":
        return write_json(result_document(result), path)
    if format != "csv":
        raise DataError(f"unsupported result format {format!r}")
    cumulative = result.cumulative_ms
    s = result.pi.shape[1]
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "indices", "points_selected", "mmd_squared", "cumulative_ms"])
            for i, (row, val, ms) in enumerate(zip(result.pi, result.trace, cumulative)):
                w.writerow([i, ";".join(str(int(j)) for j in row), (i + 1) * s, repr(float(val)), repr(float(ms))])
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def read_result(path) -> SelectionResult:
    """Read a result written by :func:`write_result` in either format."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
            pi = np.asarray(doc["pi"], dtype=int)
            trace = np.asarray(doc["trace"], dtype=float)
            timings = np.asarray(doc.get("timings_ms", [0.0] * len(trace)), dtype=float)
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"malformed result file {path}: {exc}") from exc
        if pi.ndim != 2:
            raise DataError(f"malformed result file {path}: pi must be a matrix")
        return SelectionResult(pi=pi, trace=trace, timings_ms=timings, config=doc.get("config", {}))
    rows = list(csv.DictReader(text.splitlines()))
    try:
        pi = np.array([[int(j) for j in r["indices"].split(";")] for r in rows], dtype=int)
        trace = np.array([float(r["mmd_squared"]) for r in rows])
        cum = np.array([float(r["cumulative_ms"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise DataError(f"malformed result file {path}: {exc}") from exc
    return SelectionResult(pi=pi, trace=trace, timings_ms=np.diff(cum, prepend=0.0), config={})


@dataclass
class DiagnosticReport:
    """Computable side of the fixed-candidate error bound."""

    phi_squared: float
    fw_gap: float
    c_mu_k_squared: float
    c_n_k_squared: float
    iterations: int
    bound: float
    mmd_squared: float
    bound_satisfied: bool

    def to_dict(self):
        return asdict(self)

    def summary(self) -> str:
        flag = "yes" if self.bound_satisfied else "NO"
        return "\n".join([
            f"measured MMD^2          {self.mmd_squared:.6e}",
            f"best reweighted MMD^2   {self.phi_squared:.6e} (Frank-Wolfe gap {self.fw_gap:.1e})",
            f"C^2 target / candidates {self.c_mu_k_squared:.6e} / {self.c_n_k_squared:.6e}",
            f"bound at m={self.iterations:<4d}       {self.bound:.6e}",
            f"bound satisfied         {flag}",
        ])


def diagnose(candidates: CandidateSet, target, kernel, result: SelectionResult,
             fw_tol: float = 1e-8, fw_max_iter: int = 100_000) -> DiagnosticReport:
    """Check ``MMD^2 <= Phi^2 + gap + C^2 (1 + log m) / m`` for a selection.

    ``Phi^2`` is the smallest squared discrepancy over convex reweightings of
    the candidates, ``C = C_{mu,k} + max_i k(x_i, x_i)^{1/2}`` and ``m`` the
    number of iterations in ``result``.
    """
    pi = np.asarray(result.pi)
    if pi.size == 0:
        raise DataError("result has no selections")
    if pi.min() < 0 or pi.max() >= candidates.n:
        raise DataError(f"result index out of range for {candidates.n} candidates")
    gram = GramOperator(kernel, candidates.points, candidate_scores(candidates, target, kernel))
    K = gram.full()
    h = np.asarray(kernel_mean(target, kernel, candidates.points), dtype=float)
    c2 = double_integral(target, kernel)
    fw = solve_simplex_qp(K, h, c2, max_iter=fw_max_iter, tol=fw_tol)
    cn2 = float(np.max(gram.diag))
    m = pi.shape[0]
    C = math.sqrt(max(c2, 0.0)) + math.sqrt(max(cn2, 0.0))
    bound = fw.phi_squared + fw.duality_gap + C * C * (1.0 + math.log(m)) / m
    measured = mmd_squared(EmpiricalMeasure(pi.ravel()), candidates, target, kernel)
    return DiagnosticReport(
        phi_squared=fw.phi_squared, fw_gap=fw.duality_gap, c_mu_k_squared=c2, c_n_k_squared=cn2,
        iterations=m, bound=bound, mmd_squared=measured, bound_satisfied=bool(measured <= bound),
    )
