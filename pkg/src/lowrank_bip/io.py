"""Problem files, tolerance files and deterministic JSON/CSV serialization.

Problem file (JSON)::

    {
      "schema_version": "1.0",
      "n": 2, "d": 3,
      "G": [[...], [...]],                       # n x d, row-major
      "C_obs": [[...], ...] | {"diag": [...]},
      "C_pr": [[...], ...] | {"diag": [...]}
              | {"power_law": {"amplitude": a, "exponent": s}},
      "m_pr": [...]                              # optional, default 0
    }

``power_law`` expands to ``diag(a * k**-s)`` for ``k = 1..d``.

Tolerance file (TOML) with a ``[tolerances]`` table whose keys override
:data:`DEFAULT_TOLERANCES`.
"""

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .bip import LinearGaussianProblem
from .errors import LowRankBipError, ParseError, ValidationError
from .gaussian import GaussianMeasure
from .linalg import SpdOperator
from .problems import power_law_diagonal

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

PROBLEM_SCHEMA_VERSION = "1.0"
SUPPORTED_SCHEMA_VERSIONS = ("1.0",)
REPORT_SCHEMA_VERSION = "1.0"

DEFAULT_TOLERANCES = {
    "loss_rtol": 1e-8,
    "loss_atol": 1e-10,
    "risk_rtol": 1e-8,
    "risk_atol": 1e-10,
    "residual_atol": 1e-8,
    "mc_sigmas": 5.0,
    "brute_force_slack": 1e-6,
    "rank_cutoff": 1e-12,
}


def _matrix(doc, field, shape):
    value = doc.get(field)
    if value is None:
        raise ValidationError(field, "missing")
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(field, "must be a rectangular array of numbers") from None
    if M.ndim != 2 or M.shape != shape:
        raise ValidationError(field, f"expected shape {shape}, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValidationError(field, "contains non-finite values")
    return M


def _covariance(doc, field, dim):
    value = doc.get(field)
    if isinstance(value, dict):
        if "diag" in value:
            diag = np.array(value["diag"], dtype=float)
            if diag.shape != (dim,):
                raise ValidationError(field, f"diag must have length {dim}, got {diag.shape}")
            M = np.diag(diag)
        elif "power_law" in value:
            law = value["power_law"]
            try:
                M = np.diag(power_law_diagonal(dim, float(law["amplitude"]), float(law["exponent"])))
            except (KeyError, TypeError, ValueError):
                raise ValidationError(field, "power_law needs numeric 'amplitude' and 'exponent'") from None
        else:
            raise ValidationError(field, "object form must have a 'diag' or 'power_law' key")
    else:
        M = _matrix(doc, field, (dim, dim))
    try:
        C = SpdOperator(M, name=field)
    except LowRankBipError as exc:
        raise ValidationError(field, str(exc)) from None
    if not C.is_positive:
        raise ValidationError(field, "must be positive definite")
    return C


def parse_problem(doc):
    """Validate a problem document (already decoded from JSON)."""
    if not isinstance(doc, dict):
        raise ParseError("problem file must contain a JSON object")
    version = doc.get("schema_version")
    if version not in SUPPORTED_SCHEMA_VERSIONS:
        raise ValidationError("schema_version", f"unsupported version {version!r}")
    try:
        n, d = int(doc["n"]), int(doc["d"])
    except (KeyError, TypeError, ValueError):
        raise ValidationError("n/d", "integer fields 'n' and 'd' are required") from None
    if n < 1 or d < 1:
        raise ValidationError("n/d", f"must be positive, got n={n}, d={d}")
    G = _matrix(doc, "G", (n, d))
    C_obs = _covariance(doc, "C_obs", n)
    C_pr = _covariance(doc, "C_pr", d)
    m_pr = np.zeros(d)
    if doc.get("m_pr") is not None:
        m_pr = np.array(doc["m_pr"], dtype=float)
        if m_pr.shape != (d,):
            raise ValidationError("m_pr", f"expected length {d}, got shape {m_pr.shape}")
    return LinearGaussianProblem(G, C_obs, GaussianMeasure(m_pr, C_pr))


def load_problem(path):
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return parse_problem(doc)


def problem_to_dict(p):
    """Dense representation; ``load(save(p))`` reproduces the matrices bit for bit."""
    return {
        "schema_version": PROBLEM_SCHEMA_VERSION,
        "n": p.n,
        "d": p.d,
        "G": p.G.tolist(),
        "C_obs": p.C_obs.matrix.tolist(),
        "C_pr": p.C_pr.matrix.tolist(),
        "m_pr": p.m_pr.tolist(),
    }


def save_problem(p, path):
    Path(path).write_text(dumps(problem_to_dict(p)))


def file_digest(path):
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_tolerances(path=None):
    tol = dict(DEFAULT_TOLERANCES)
    if path is None:
        return tol
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    table = doc.get("tolerances", {})
    for key, value in table.items():
        if key not in DEFAULT_TOLERANCES:
            raise ValidationError(f"tolerances.{key}", "unknown tolerance")
        if not isinstance(value, (int, float)) or value < 0:
            raise ValidationError(f"tolerances.{key}", "must be a nonnegative number")
        tol[key] = float(value)
    return tol


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"cannot serialize non-finite value {x}")
        # repr gives the shortest round-trip decimal; -0.0 is normalized
        return x + 0.0
    return obj


def dumps(obj):
    """Deterministic JSON text (shortest round-trip floats, stable key order)."""
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n"


def report_rows(report):
    """Flatten the per-rank records of a sweep report into CSV rows."""
    rows = []
    for rec in report["records"]:
        row = {"r": rec["r"], "unique": rec["unique"]}
        for group in ("predicted_cov_loss", "achieved_cov_loss", "predicted_mean_loss",
                      "achieved_bayes_risk", "mc_bayes_risk", "mc_bayes_stderr",
                      "joint_loss", "achieved_joint_loss"):
            for key, value in rec.get(group, {}).items():
                row[f"{group}[{key}]"] = value
        rows.append(row)
    return rows


def dumps_csv(report):
    rows = report_rows(report)
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def parse_csv(text):
    """Read a CSV report back into typed rows (for round-trip comparisons)."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        typed = {}
        for key, value in row.items():
            if key == "r":
                typed[key] = int(value)
            elif key == "unique":
                typed[key] = value == "True"
            else:
                typed[key] = float(value)
        out.append(typed)
    return out
