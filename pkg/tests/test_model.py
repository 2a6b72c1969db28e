from math import comb

import numpy as np
import pytest

from fmmcp.model import (
    ConfigError, Field, Kind, ModelConfig, build_model, cyclic_layout, plain_layout,
)
from fmmcp.tensor import Dims
from fmmcp.verify import FactorMatrices, canonicalize
from solutions import STRASSEN, VARIANTS

D222 = Dims(2, 2, 2)


def assignment(model, f: FactorMatrices) -> np.ndarray:
    x = np.zeros(model.n_vars, dtype=np.int64)
    lay = model.layout
    for ids, mat in ((lay.u, f.u), (lay.v, f.v), (lay.w, f.w)):
        x[ids] = mat
    return x


def violated_families(model, x) -> set[str]:
    return {c.family for c in model.constraints if not c.satisfied(x)}


def test_plain_layout_ids_are_a_partition():
    lay = plain_layout(Dims(2, 3, 1), 5)
    ids = np.concatenate([lay.u.ravel(), lay.v.ravel(), lay.w.ravel()])
    assert sorted(ids) == list(range(lay.n_vars))
    assert lay.n_vars == (6 + 3 + 2) * 5
    assert lay.names[int(lay.u[0, 0])] == "u[1,1]"


@pytest.mark.parametrize("dims,rank", [(D222, 7), (Dims(1, 2, 3), 6), (Dims(3, 1, 2), 4)])
def test_family_sizes(dims, rank):
    cfg = ModelConfig(use_symmetry=True, use_valid=True)
    sizes = build_model(dims, rank, cfg).family_sizes
    n, m, p = dims.n, dims.m, dims.p
    assert sizes["brent"] == n * m * m * p * n * p
    assert sizes["lex"] == rank - 1
    assert sizes["sign_u"] == rank and sizes["sign_w"] == rank
    assert sizes["w_col_nonzero"] == rank
    assert sizes["w_row_min"] == n * p
    assert sizes["w_row_diff"] == comb(n * p, 2)
    assert sizes["u_row_nonzero"] == n * m
    assert sizes["v_row_nonzero"] == m * p
    assert sizes["pair_cover"] == n * m * p


def test_base_model_has_only_brent():
    model = build_model(D222, 7)
    assert list(model.families) == ["brent"]
    assert model.exhaustive
    assert model.config.label == "B"


def test_labels():
    assert ModelConfig(use_symmetry=True, use_valid=True).label == "B+V+S"
    assert ModelConfig(sparsity=(6, 4)).label == "B+K"
    assert not ModelConfig(sparsity=(6, 4)).exhaustive
    assert not ModelConfig(cyclic=(4, 1)).exhaustive


def test_strassen_satisfies_brent_only_model():
    model = build_model(D222, 7)
    assert model.satisfied(assignment(model, STRASSEN))


def test_canonical_strassen_satisfies_every_exact_family():
    model = build_model(D222, 7, ModelConfig(use_symmetry=True, use_valid=True))
    x = assignment(model, canonicalize(STRASSEN))
    assert violated_families(model, x) == set()


def test_third_variant_meets_u_sign_rule_but_not_w():
    model = build_model(D222, 7, ModelConfig(use_symmetry=True))
    bad = violated_families(model, assignment(model, VARIANTS[2]))
    assert "sign_u" not in bad and "sign_w" in bad
    assert violated_families(model, assignment(model, canonicalize(VARIANTS[2]))) == set()


def test_single_entry_change_breaks_brent():
    model = build_model(D222, 7)
    x = assignment(model, STRASSEN)
    x[0] = 1 - x[0]
    assert "brent" in violated_families(model, x)


def test_valid_needs_rank_at_most_naive():
    with pytest.raises(ConfigError):
        build_model(Dims(1, 1, 1), 2, ModelConfig(use_valid=True))
    build_model(Dims(1, 1, 1), 2, ModelConfig(use_symmetry=True))


def test_negative_rank_and_bad_fields():
    with pytest.raises(ConfigError):
        build_model(D222, -1)
    with pytest.raises(ConfigError):
        Field((1, 2))
    with pytest.raises(ConfigError):
        Field((0, 1))
    with pytest.raises(ConfigError):
        build_model(D222, 3, ModelConfig(field=Field((-2, 0, 2))))


def test_sparsity_limits_are_clamped_with_notes():
    model = build_model(D222, 3, ModelConfig(sparsity=(50, 9)))
    assert any("k1" in note for note in model.notes)
    assert any("k2" in note for note in model.notes)
    assert model.family_sizes["sparsity_uv"] == 3
    assert model.family_sizes["sparsity_w"] == 4


def test_sparsity_constraint_semantics():
    model = build_model(D222, 7, ModelConfig(sparsity=(6, 4)))
    x = assignment(model, STRASSEN)
    # Strassen has at most 4 nonzeros per product and 4 per output row
    assert model.satisfied(x)
    tight = build_model(D222, 7, ModelConfig(sparsity=(3, 4)))
    assert "sparsity_uv" in violated_families(tight, assignment(tight, STRASSEN))


@pytest.mark.parametrize("n,s,t", [(2, 1, 2), (2, 4, 1), (3, 5, 6)])
def test_cyclic_layout_shares_variables(n, s, t):
    lay = cyclic_layout(Dims(n, n, n), s, t)
    assert lay.n_vars == n * n * (s + 3 * t)
    assert lay.u.shape == (n * n, s + 3 * t)
    # every block variable shows up once in each of U, V, W
    for mat in (lay.u, lay.v, lay.w):
        assert sorted(mat.ravel()) == list(range(lay.n_vars))


def test_cyclic_config_errors():
    with pytest.raises(ConfigError):
        build_model(Dims(1, 2, 2), 3, ModelConfig(cyclic=(1, 0)))
    with pytest.raises(ConfigError):
        build_model(D222, 7, ModelConfig(cyclic=(1, 1)))


def test_cyclic_drops_symmetry_families():
    model = build_model(D222, 7, ModelConfig(cyclic=(4, 1), use_symmetry=True))
    assert "lex" not in model.families and model.notes
    assert model.config.label == "B+C"


def test_constraint_checker_by_kind():
    model = build_model(Dims(1, 1, 2), 2, ModelConfig(use_symmetry=True))
    kinds = {c.kind for c in model.constraints}
    assert kinds == {Kind.BRENT, Kind.LEX, Kind.FIRST_NEG}
