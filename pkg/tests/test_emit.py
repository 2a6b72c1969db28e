import json
import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fmmcp.emit import FAILED, OK, DocumentError, SolutionDocument, from_json, to_json, to_readable
from fmmcp.tensor import Dims
from fmmcp.verify import FactorMatrices, reconstruct
from solutions import STRASSEN, VARIANTS

TERM = re.compile(r"([+-]?)\s*(\d*)([abm])(\d+)")


def parse_combo(text: str, size: int) -> np.ndarray:
    coeffs = np.zeros(size, dtype=np.int64)
    text = text.strip()
    if text == "0":
        return coeffs
    for sign, mag, _, idx in TERM.findall(text):
        coeffs[int(idx) - 1] += (-1 if sign == "-" else 1) * (int(mag) if mag else 1)
    return coeffs


def parse_readable(text: str, dims: Dims, rank: int) -> FactorMatrices:
    """Rebuild (U, V, W) from the listing; a test-only inverse of to_readable."""
    u = np.zeros((dims.u_rows, rank), dtype=np.int64)
    v = np.zeros((dims.v_rows, rank), dtype=np.int64)
    w = np.zeros((dims.w_rows, rank), dtype=np.int64)
    for line in text.strip().splitlines():
        lhs, rhs = (s.strip() for s in line.split("="))
        idx = int(lhs[1:]) - 1
        if lhs[0] == "m":
            if rhs != "0":
                left, right = re.fullmatch(r"\((.*)\)\((.*)\)", rhs).groups()
                u[:, idx] = parse_combo(left, dims.u_rows)
                v[:, idx] = parse_combo(right, dims.v_rows)
        else:
            w[idx] = parse_combo(rhs, rank)
    return FactorMatrices(dims, u, v, w)


def doc(f=STRASSEN, **prov):
    return SolutionDocument.build(f, prov or {"seed": 3, "stats": {"branches": 10, "elapsed": 0.25}})


def test_round_trip_is_identity_and_bytes_are_stable():
    d = doc()
    raw = to_json(d)
    back = from_json(raw)
    assert back == d
    assert to_json(back) == raw
    assert to_json(doc()) == raw


def test_top_level_keys():
    data = json.loads(to_json(doc()))
    for key in ("schema_version", "dims", "rank", "field", "u", "v", "w", "provenance", "verified"):
        assert key in data
    assert data["schema_version"] == 1
    assert data["dims"] == {"n": 2, "m": 2, "p": 2}
    assert data["u"] == STRASSEN.u.tolist()


def test_digest_ignores_provenance():
    a, b = doc(seed=1), doc(seed=2, created="now")
    assert a.digest == b.digest
    assert to_json(a) != to_json(b)
    assert doc(VARIANTS[1]).digest != a.digest


def test_corrupted_entry_is_flagged_not_fatal():
    data = json.loads(to_json(doc()))
    data["w"][0][0] = 0
    loaded = from_json(json.dumps(data))
    assert loaded.verified == FAILED and not loaded.ok
    assert any((v.i, v.j, v.k) == (1, 1, 1) for v in loaded.violations)


def test_stored_verified_flag_is_not_trusted():
    data = json.loads(to_json(doc()))
    data["w"][0][0] = 0
    data["verified"] = OK
    data["violations"] = []
    assert from_json(json.dumps(data)).verified == FAILED


@pytest.mark.parametrize("raw,fragment", [
    (b'{"schema_version": 1,', "line 1"),
    (b"[1, 2]", "JSON object"),
    (b'{"schema_version": 2}', "schema_version"),
    (b'{"schema_version": 1, "dims": {"n": 1, "m": 1, "p": 1}, "rank": 1, "field": [-1, 0, 1]}', "'u'"),
])
def test_malformed_documents(raw, fragment):
    with pytest.raises(DocumentError, match=fragment):
        from_json(raw)


def test_shape_errors_are_document_errors():
    data = json.loads(to_json(doc()))
    data["u"] = data["u"][:3]
    with pytest.raises(DocumentError):
        from_json(json.dumps(data))
    data = json.loads(to_json(doc()))
    data["v"][1] = data["v"][1][:3]
    with pytest.raises(DocumentError):
        from_json(json.dumps(data))
    data = json.loads(to_json(doc()))
    data["rank"] = 6
    with pytest.raises(DocumentError):
        from_json(json.dumps(data))


def test_scalar_document():
    f = FactorMatrices(Dims(1, 1, 1), [[-1]], [[1]], [[-1]])
    data = json.loads(to_json(SolutionDocument.build(f)))
    assert (data["u"], data["v"], data["w"]) == ([[-1]], [[1]], [[-1]])
    assert to_readable(f) == "m1 = (-a1)(b1)\nc1 = -m1\n"


def test_strassen_listing():
    lines = to_readable(doc()).splitlines()
    assert lines[0] == "m1 = (a1 + a4)(b1 + b4)"
    assert lines[7] == "c1 = m1 + m4 - m5 + m7"
    assert len(lines) == 7 + 4


def test_zero_column_renders_as_zero():
    u = STRASSEN.u.copy()
    u[:, 2] = 0
    f = FactorMatrices(STRASSEN.dims, u, STRASSEN.v, STRASSEN.w)
    assert "m3 = 0" in to_readable(f).splitlines()


@pytest.mark.parametrize("f", (STRASSEN,) + VARIANTS)
def test_listing_parses_back(f):
    back = parse_readable(to_readable(f), f.dims, f.rank)
    assert np.array_equal(reconstruct(back), reconstruct(f))


@settings(max_examples=60, deadline=None)
@given(st.tuples(st.integers(1, 2), st.integers(1, 2), st.integers(1, 2), st.integers(1, 4),
                 st.integers(0, 2**31 - 1)))
def test_listing_reproduces_brent_sums_of_random_factors(args):
    n, m, p, rank, seed = args
    rng = np.random.default_rng(seed)
    d = Dims(n, m, p)
    f = FactorMatrices(d, *(rng.integers(-1, 2, size=(rows, rank)) for rows in (d.u_rows, d.v_rows, d.w_rows)))
    back = parse_readable(to_readable(f), d, rank)
    assert np.array_equal(reconstruct(back), reconstruct(f))
    assert from_json(to_json(SolutionDocument.build(f))).factors == f
