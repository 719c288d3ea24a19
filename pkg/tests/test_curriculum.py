import itertools

import numpy as np
import pytest
from conftest import random_report
from hypothesis import given, settings
from hypothesis import strategies as st

from cassl import kernels
from cassl.curriculum import Curriculum, build_curriculum, energy, energy_table, oracle_curriculum
from cassl.sensitivity import SensitivityReport

# hand sums over the published rows, frozen before any code ran
E_HG = (0.788 - 0.124) + (0.0956 + 0.0385 + 0.236 + 0.0519 + 0.260)
E_THETA = (0.850 - 0.164) + (0.153 + 0.190 + 0.194 + 0.280 + 0.260)
PUBLISHED_ORDER = ["h_G", "theta", "f_G", "M_G", "alpha", "beta"]


def _report(s1, st_, s2=None):
    k = len(s1)
    return SensitivityReport(np.array(s1, float), np.array(st_, float),
                             np.zeros((k, k)) if s2 is None else s2, 1.0, 8)


def _check_invariants(cur, k):
    assert sorted(i for s in cur.stages for i in s) == list(range(k))
    assert sorted(cur.flat_order) == list(range(k))
    pos = {d: n for n, d in enumerate(cur.flat_order)}
    for a, b in zip(cur.stages, cur.stages[1:]):
        assert max(pos[i] for i in a) < min(pos[i] for i in b)


def test_hand_arithmetic():
    assert E_HG == pytest.approx(1.346, abs=1e-12)
    assert E_THETA == pytest.approx(1.763, abs=1e-12)


def test_energy_spot_values(grasp_indices):
    idx = grasp_indices.names.index
    everything = range(6)
    assert abs(energy([idx("h_G")], everything, grasp_indices) - 1.346) < 1e-9
    assert abs(energy([idx("theta")], everything, grasp_indices) - 1.763) < 1e-9


def test_energy_zero_without_higher_order_terms():
    r = _report([0.2, 0.3, 0.1], [0.2, 0.3, 0.1])
    for n in range(1, 4):
        for c in itertools.combinations(range(3), n):
            assert energy(c, range(3), r) == 0.0


def test_energy_argument_errors():
    r = _report([0.2, 0.3, 0.1], [0.4, 0.3, 0.1])
    with pytest.raises(ValueError):
        energy([], range(3), r)
    with pytest.raises(ValueError):
        energy([0], [1, 2], r)
    with pytest.raises(ValueError):
        energy([0], [0, 5], r)


def test_gap_term_is_signed():
    r = _report([0.5, 0.1], [0.3, 0.2])
    assert energy([0], [0, 1], r) == pytest.approx(-0.2)


def test_published_indices_against_oracle(grasp_indices):
    cur = build_curriculum(grasp_indices)
    assert cur == oracle_curriculum(grasp_indices)
    _check_invariants(cur, 6)
    assert cur.named_order()[0] == "h_G"
    # remaining-set interpretation gives a different tail than the published order; see decisions log
    assert cur.named_order() == ["h_G", "M_G", "theta", "alpha", "f_G", "beta"]
    assert all(len(s) == 1 for s in cur.stages)
    assert cur.named_order() != PUBLISHED_ORDER


def test_energy_table_rows(grasp_indices):
    cur = build_curriculum(grasp_indices)
    table = energy_table(grasp_indices, cur)
    assert [row["chosen"] for row in table] == cur.named_stages()
    first = table[0]
    assert first["singleton_energies"]["h_G"] == pytest.approx(1.346, abs=1e-9)
    assert first["chosen_energy"] == min(first["singleton_energies"].values())
    assert table[-1]["remaining"] == table[-1]["chosen"]


def test_single_dimension():
    cur = build_curriculum(_report([0.4], [0.9]))
    assert cur.stages == ((0,),) and cur.flat_order == (0,)


def test_additive_report_gives_ascending_gap():
    rng = np.random.default_rng(11)
    for _ in range(50):
        k = int(rng.integers(2, 9))
        s1 = rng.uniform(0, 0.5, k)
        gap = rng.permutation(np.linspace(0.01, 0.5, k))
        cur = build_curriculum(_report(s1, s1 + gap))
        assert all(len(s) == 1 for s in cur.stages)
        assert list(cur.flat_order) == list(np.argsort(gap))


def test_ties_prefer_small_then_sensitive_then_lexicographic():
    # every subset has energy zero: singletons win, highest s1 first, equal s1 by index
    cur = build_curriculum(_report([0.1, 0.3, 0.3, 0.2], [0.1, 0.3, 0.3, 0.2]))
    assert cur.flat_order == (1, 2, 3, 0)


def test_pair_stage_when_interaction_binds():
    s2 = np.zeros((3, 3))
    s2[0, 1] = s2[1, 0] = 0.5
    cur = build_curriculum(_report([0.1, 0.4, 0.2], [0.15, 0.45, 0.6], s2))
    # {0} or {1} alone costs 0.55; {0, 1} together costs 0.1 and beats {2} at 0.4
    assert cur.stages[0] == (0, 1)
    assert cur.flat_order == (1, 0, 2)


def test_dimension_limit():
    with pytest.raises(ValueError):
        build_curriculum(_report(np.zeros(21), np.zeros(21)))


def test_oracle_equivalence_on_random_reports():
    rng = np.random.default_rng(2024)
    for n in range(1000):
        k = int(rng.integers(2, 9))
        r = random_report(rng, k)
        if n % 4 == 0:
            # coarse grid values force exact energy ties
            r = SensitivityReport(np.round(r.s1, 1), np.round(r.st, 1), np.round(np.nan_to_num(r.s2), 1), 1.0, 8)
        cur = build_curriculum(r)
        _check_invariants(cur, k)
        assert cur == oracle_curriculum(r)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 7))
def test_each_stage_is_energy_minimal(seed, k):
    r = random_report(np.random.default_rng(seed), k)
    cur = build_curriculum(r)
    remaining = list(range(k))
    for stage in cur.stages:
        e = energy(stage, remaining, r)
        for n in range(1, len(remaining) + 1):
            for c in itertools.combinations(remaining, n):
                assert energy(c, remaining, r) >= e - 1e-12
        remaining = [i for i in remaining if i not in stage]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 7), st.floats(-0.5, 0.5))
def test_common_shift_leaves_curriculum_unchanged(seed, k, c):
    r = random_report(np.random.default_rng(seed), k)
    shifted = SensitivityReport(r.s1 + c, r.st + c, np.nan_to_num(r.s2), 1.0, 8, r.names)
    assert build_curriculum(shifted) == build_curriculum(r)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 8))
def test_first_order_only_report_is_valid(seed, k):
    r = random_report(np.random.default_rng(seed), k, second_order=False)
    cur = build_curriculum(r)
    _check_invariants(cur, k)
    assert cur == oracle_curriculum(r)


def test_curriculum_validation():
    with pytest.raises(ValueError):
        Curriculum(((0,), (0, 1)), (0, 1))
    with pytest.raises(ValueError):
        Curriculum(((0,), ()), (0,))
    with pytest.raises(ValueError):
        Curriculum(((0,), (1,)), (1, 0))


def test_curriculum_serialization(grasp_indices):
    cur = build_curriculum(grasp_indices)
    assert Curriculum.from_dict(cur.to_dict()) == cur
    assert cur.to_dict()["flat_order"] == cur.named_order()
    assert list(cur.stage_of()[list(cur.flat_order)]) == sorted(cur.stage_of())


def test_subset_energy_backends_agree(backend):
    rng = np.random.default_rng(5)
    gap = rng.normal(size=7)
    s2 = np.abs(rng.normal(size=(7, 7)))
    s2 = s2 + s2.T
    np.fill_diagonal(s2, 0)
    ref = kernels.subset_energies_np(gap, s2)
    assert np.allclose(backend.subset_energies(gap, s2), ref, rtol=1e-12, atol=1e-12)
    r = _report(np.zeros(7), gap, s2)
    for mask in (1, 5, 77, 127):
        psi = [i for i in range(7) if (mask >> i) & 1]
        assert ref[mask] == pytest.approx(energy(psi, range(7), r), abs=1e-12)
