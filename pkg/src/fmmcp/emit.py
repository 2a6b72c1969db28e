"""Solution documents (JSON) and readable algorithm listings.

Layout of a document::

    {
      "schema_version": 1,
      "dims": {"n": 2, "m": 2, "p": 2},
      "rank": 7,
      "field": [-1, 0, 1],
      "u": [[...], ...],        # (n*m) x R, row i is entry a_i of A (row-major, 1-based)
      "v": [[...], ...],        # (m*p) x R, row j is entry b_j of B
      "w": [[...], ...],        # (n*p) x R, row k is entry c_k of C
      "digest": "sha256 of the canonical payload above",
      "provenance": {...},      # config, seed, engine version, stats, timestamp
      "verified": "ok" | "verification failed",
      "violations": [[i, j, k, expected, got], ...]
    }

The digest covers only dims, rank, field and factors, so two runs that find
the same algorithm produce documents with the same digest.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from dataclasses import field as dataclass_field

import numpy as np

from .model import TERNARY
from .tensor import Dims
from .verify import FactorMatrices, Violation, verify_decomposition

SCHEMA_VERSION = 1
OK = "ok"
FAILED = "verification failed"


class DocumentError(ValueError):
    """Malformed solution document."""


@dataclass(frozen=True)
class SolutionDocument:
    factors: FactorMatrices
    field: tuple[int, ...] = TERNARY.values
    provenance: dict = dataclass_field(default_factory=dict)
    verified: str = OK
    violations: tuple[Violation, ...] = ()

    @classmethod
    def build(cls, factors: FactorMatrices, provenance: dict | None = None,
              field: tuple[int, ...] = TERNARY.values) -> "SolutionDocument":
        """Wrap factors, recording the outcome of a fresh verification."""
        bad = tuple(verify_decomposition(factors))
        return cls(factors, tuple(field), dict(provenance or {}), FAILED if bad else OK, bad)

    @property
    def dims(self) -> Dims:
        return self.factors.dims

    @property
    def rank(self) -> int:
        return self.factors.rank

    @property
    def ok(self) -> bool:
        return self.verified == OK

    def payload(self) -> dict:
        f = self.factors
        return {
            "schema_version": SCHEMA_VERSION,
            "dims": {"n": f.dims.n, "m": f.dims.m, "p": f.dims.p},
            "rank": f.rank,
            "field": [int(x) for x in self.field],
            "u": f.u.tolist(),
            "v": f.v.tolist(),
            "w": f.w.tolist(),
        }

    @property
    def digest(self) -> str:
        body = json.dumps(self.payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(body.encode()).hexdigest()


_INT_LIST = re.compile(r"\[\s*(-?\d+(?:\s*,\s*-?\d+)*)\s*\]")


def _inline_rows(text: str) -> str:
    return _INT_LIST.sub(lambda m: "[" + ", ".join(x.strip() for x in m.group(1).split(",")) + "]", text)


def to_json(doc: SolutionDocument) -> bytes:
    data = doc.payload()
    data["digest"] = doc.digest
    data["provenance"] = doc.provenance
    data["verified"] = doc.verified
    data["violations"] = [[v.i, v.j, v.k, v.expected, v.got] for v in doc.violations]
    return (_inline_rows(json.dumps(data, indent=2)) + "\n").encode()


def _need(data: dict, key: str, kind):
    if key not in data:
        raise DocumentError(f"missing key {key!r}")
    value = data[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise DocumentError(f"key {key!r} has type {type(value).__name__}")
    return value


def from_json(raw: bytes | str) -> SolutionDocument:
    """Parse a document and re-verify its factors; a failed check is recorded, not raised."""
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise DocumentError("a solution document is a JSON object")
    version = _need(data, "schema_version", int)
    if version != SCHEMA_VERSION:
        raise DocumentError(f"unsupported schema_version {version}")
    d = _need(data, "dims", dict)
    try:
        dims = Dims(int(d["n"]), int(d["m"]), int(d["p"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentError(f"bad dims {d!r}: {exc}") from exc
    rank = _need(data, "rank", int)
    fld = tuple(_need(data, "field", list))
    mats = {}
    for key in ("u", "v", "w"):
        rows = _need(data, key, list)
        if not all(isinstance(r, list) and all(isinstance(x, int) and not isinstance(x, bool) for x in r)
                   for r in rows):
            raise DocumentError(f"key {key!r} must be a list of integer rows")
        mats[key] = rows
    try:
        factors = FactorMatrices(dims, *(_as_matrix(mats[k], rank) for k in ("u", "v", "w")))
    except ValueError as exc:
        raise DocumentError(str(exc)) from exc
    if factors.rank != rank:
        raise DocumentError(f"rank {rank} does not match {factors.rank} factor columns")
    provenance = data.get("provenance", {})
    if not isinstance(provenance, dict):
        raise DocumentError("provenance must be an object")
    return SolutionDocument.build(factors, provenance, fld)


def _as_matrix(rows, rank):
    if not rows:
        return np.zeros((0, rank), dtype=np.int64)
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DocumentError(f"ragged matrix with row lengths {sorted(widths)}")
    return np.array(rows, dtype=np.int64).reshape(len(rows), widths.pop())


def _combo(coeffs, symbol: str) -> str:
    parts = []
    for idx, c in enumerate(coeffs, start=1):
        c = int(c)
        if c == 0:
            continue
        mag = "" if abs(c) == 1 else f"{abs(c)}"
        sign = "-" if c < 0 else "+"
        if not parts:
            parts.append(("-" if c < 0 else "") + f"{mag}{symbol}{idx}")
        else:
            parts.append(f"{sign} {mag}{symbol}{idx}")
    return " ".join(parts)


def to_readable(doc: SolutionDocument | FactorMatrices) -> str:
    """One line per product m_r, then one line per output entry c_k."""
    f = doc.factors if isinstance(doc, SolutionDocument) else doc
    lines = []
    for r in range(f.rank):
        left = _combo(f.u[:, r], "a")
        right = _combo(f.v[:, r], "b")
        lines.append(f"m{r + 1} = ({left})({right})" if left and right else f"m{r + 1} = 0")
    for k in range(f.w.shape[0]):
        lines.append(f"c{k + 1} = {_combo(f.w[k, :], 'm') or '0'}")
    return "\n".join(lines) + "\n"
