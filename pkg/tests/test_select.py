"""Row selection for the reduced cage fit.

The selection maximizes submatrix volume greedily; random-subset Monte
Carlo gives an independent lower-bound oracle on the achieved volume.
"""
import numpy as np
import pytest

from cageskel.model import ValidationError
from cageskel.select import maxvol_select, solve_reduced


def logdet(a):
    return np.linalg.slogdet(a)[1]


def test_square_matrix_selects_everything():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(6, 6))
    sel = maxvol_select(a)
    assert sorted(sel.indices.tolist()) == list(range(6))


def test_beats_random_subsets():
    rng = np.random.default_rng(97)
    a = rng.normal(size=(80, 7))
    sel = maxvol_select(a)
    ours = logdet(a[sel.indices])
    best = -np.inf
    for _ in range(2000):
        idx = rng.choice(80, size=7, replace=False)
        best = max(best, logdet(a[idx]))
    assert ours >= best - 1e-9


def test_dominance_bound_holds():
    # after convergence no row can exceed the selected ones by more than tau
    rng = np.random.default_rng(5)
    a = rng.normal(size=(120, 9))
    tau = 0.01
    sel = maxvol_select(a, tau=tau)
    b = np.linalg.solve(a[sel.indices].T, a.T).T
    assert np.abs(b).max() <= 1.0 + tau + 1e-9


def test_deterministic_reruns():
    rng = np.random.default_rng(12)
    a = rng.normal(size=(50, 5))
    s1 = maxvol_select(a)
    s2 = maxvol_select(a)
    np.testing.assert_array_equal(s1.indices, s2.indices)


def test_solve_reduced_recovers_exact_positions():
    rng = np.random.default_rng(23)
    phi = rng.normal(size=(40, 6))
    truth = rng.normal(size=(6, 3))
    positions = phi @ truth
    sel = maxvol_select(phi)
    recovered = solve_reduced(sel, positions[sel.indices])
    np.testing.assert_allclose(recovered, truth, atol=1e-10)


def test_rank_deficient_matrix_rejected():
    rng = np.random.default_rng(29)
    a = rng.normal(size=(30, 4))
    a[:, 3] = a[:, 0] + a[:, 1]  # exact rank 3
    with pytest.raises(ValidationError, match="rank"):
        maxvol_select(a)


def test_selection_on_builtin_cage_coordinates(bar_rig):
    from cageskel.coords import mvc_matrix

    phi = mvc_matrix(bar_rig.skin, bar_rig.cage)
    sel = maxvol_select(phi)
    assert sel.indices.shape == (bar_rig.cage.n_vertices,)
    assert np.unique(sel.indices).size == sel.indices.size
    cond = np.linalg.cond(sel.submatrix)
    assert np.isfinite(cond) and cond < 1e8


def test_solve_reduced_shape_checks(bar_rig):
    rng = np.random.default_rng(31)
    a = rng.normal(size=(20, 4))
    sel = maxvol_select(a)
    with pytest.raises(ValidationError):
        solve_reduced(sel, rng.normal(size=(19, 3)))
