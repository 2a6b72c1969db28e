import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fmmcp.model import CyclicBlocks
from fmmcp.tensor import Dims, build_target_tensor, cyclic_view, transpose_permutation
from fmmcp.verify import (
    FactorMatrices, canonicalize, check_cyclic, randomized_product_check, reconstruct, verify_decomposition,
)
from solutions import STRASSEN, VARIANTS

SIGNS = [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]


def transform(f: FactorMatrices, order, signs) -> FactorMatrices:
    """Apply a column permutation and per-column sign changes with product +1."""
    s = np.array([SIGNS[i] for i in signs]).T  # (3, R)
    return FactorMatrices(f.dims, (f.u * s[0])[:, order], (f.v * s[1])[:, order], (f.w * s[2])[:, order])


def mutate(f: FactorMatrices, mat: str, i: int, r: int, value: int) -> FactorMatrices:
    arrays = {"u": f.u.copy(), "v": f.v.copy(), "w": f.w.copy()}
    arrays[mat][i, r] = value
    return FactorMatrices(f.dims, arrays["u"], arrays["v"], arrays["w"])


def test_strassen_verifies():
    assert verify_decomposition(STRASSEN) == []
    assert randomized_product_check(STRASSEN, trials=200, bound=10) is None


def test_every_single_entry_change_is_caught():
    for mat in "uvw":
        arr = getattr(STRASSEN, mat)
        for i, r in itertools.product(range(arr.shape[0]), range(arr.shape[1])):
            for value in (-1, 0, 1):
                if value != arr[i, r]:
                    bad = mutate(STRASSEN, mat, i, r, value)
                    assert verify_decomposition(bad), (mat, i, r, value)
                    assert randomized_product_check(bad, trials=20) is not None


def test_violation_reports_entry():
    bad = mutate(STRASSEN, "w", 0, 0, 0)
    v = verify_decomposition(bad)
    assert v[0].i == 1 and v[0].j == 1 and v[0].k == 1 and v[0].expected == 1 and v[0].got == 0


def test_randomized_check_returns_witness():
    bad = mutate(STRASSEN, "u", 0, 0, 0)
    a, b = randomized_product_check(bad, trials=50, seed=3)
    terms = (bad.u.T @ a.ravel()) * (bad.v.T @ b.ravel())
    assert not np.array_equal(bad.w @ terms, (a @ b).ravel())


def test_dims_mismatch():
    with pytest.raises(ValueError):
        verify_decomposition(STRASSEN, build_target_tensor(Dims(1, 2, 2)))
    with pytest.raises(ValueError):
        FactorMatrices(Dims(2, 2, 2), np.zeros((4, 7)), np.zeros((4, 6)), np.zeros((4, 7)))
    with pytest.raises(ValueError):
        FactorMatrices(Dims(2, 2, 2), np.zeros((3, 7)), np.zeros((4, 7)), np.zeros((4, 7)))


def test_variants_share_canonical_form():
    target = canonicalize(STRASSEN)
    for f in VARIANTS:
        assert verify_decomposition(f) == []
        assert canonicalize(f) == target


def test_canonical_form_is_idempotent_and_valid():
    c = canonicalize(STRASSEN)
    assert canonicalize(c) == c
    assert verify_decomposition(c) == []


def test_hundred_random_symmetry_transforms():
    rng = np.random.default_rng(2024)
    target = canonicalize(STRASSEN)
    for _ in range(100):
        g = transform(STRASSEN, rng.permutation(7), rng.integers(0, 4, size=7))
        assert verify_decomposition(g) == []
        assert canonicalize(g) == target


@settings(max_examples=60, deadline=None)
@given(st.permutations(range(7)), st.lists(st.integers(0, 3), min_size=7, max_size=7))
def test_canonical_form_is_invariant(order, signs):
    g = transform(STRASSEN, order, signs)
    assert canonicalize(g) == canonicalize(STRASSEN)


def strassen_cyclic_form():
    """Reorder Strassen's columns into the A | B | C | D layout with S=1, T=2, if possible."""
    for rest in itertools.permutations(range(1, 7)):
        f = STRASSEN.columns((0,) + rest)
        if check_cyclic(f, 1, 2):
            return f
    return None


def test_strassen_has_a_cyclic_arrangement():
    f = strassen_cyclic_form()
    assert f is not None
    assert verify_decomposition(f) == []
    assert not check_cyclic(STRASSEN, 1, 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3).flatmap(lambda n: st.tuples(
    st.just(n), st.integers(0, 2), st.integers(0, 2), st.integers(0, 2**31 - 1))))
def test_cyclic_blocks_give_rotation_invariant_tensors(args):
    n, s, t, seed = args
    rng = np.random.default_rng(seed)
    blocks = CyclicBlocks(*(rng.integers(-1, 2, size=(n * n, w)) for w in (s, t, t, t)))
    u, v, w = blocks.assemble()
    f = FactorMatrices(Dims(n, n, n), u, v, w)
    assert check_cyclic(f, s, t)
    # index the output mode through C transposed, as the target tensor's cyclic view does
    tensor = reconstruct(f)[:, :, transpose_permutation(n)]
    assert np.array_equal(tensor, tensor.transpose(1, 2, 0))


def test_cyclic_checks_reject_bad_shapes():
    with pytest.raises(ValueError):
        check_cyclic(STRASSEN, 2, 2)
    f = FactorMatrices(Dims(1, 2, 2), np.zeros((2, 1)), np.zeros((4, 1)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        check_cyclic(f, 1, 0)


def test_target_cyclic_view_consistent_with_reconstruction():
    f = strassen_cyclic_form()
    assert np.array_equal(reconstruct(f)[:, :, transpose_permutation(2)], cyclic_view(build_target_tensor(Dims(2, 2, 2))))
