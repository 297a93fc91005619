import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from hybridma import _backend
from hybridma.noma import solve_noma_pair
from hybridma.oma import solve_oma
from hybridma.oracle import exhaustive_matching, involutions
from hybridma.pairing import (Matching, PreferenceTable, _Proposals, build_preferences,
                              match_request, metric_change, pair_users,
                              preference_lists, total_metric)
from hybridma.state import UserState


def _table(metric):
    return PreferenceTable.from_tables(np.asarray(metric, dtype=float))


def _metric_strategy(max_n=8):
    return st.integers(1, max_n).flatmap(
        lambda n: arrays(float, (n, n), elements=st.floats(-10, 2, allow_nan=False)))


def test_empty_queues_give_empty_lists_and_identity(params):
    states = [UserState(g, 0.0, 0.0) for g in (10.0, 1e3, 1e5, 3e4)]
    prefs = build_preferences(states, params)
    assert all(not lst for lst in prefs.lists)
    assert pair_users(prefs) == Matching.identity(4)


def test_two_user_mutual_lists(params):
    # at a 1 Mb/s threshold both members of this pair serve each other profitably
    params = params.replace(rho_bps=1e6)
    far = UserState(gamma=3940.0, q_bits=12600.0, z=0.0, rho_bps=1e6)
    near = UserState(gamma=7270.0, q_bits=45500.0, z=0.0, rho_bps=1e6)
    d = solve_noma_pair(far, near, params)
    oma = sum(solve_oma(s.q_bits, s.z_tilde, s.gamma, params, rho=1e6).metric
              for s in (far, near))
    assert d.metric < oma
    prefs = build_preferences([far, near], params)
    assert 1 in prefs.lists[0] and 0 in prefs.lists[1]
    assert pair_users(prefs) == Matching((1, 0))


def test_pair_forms_from_one_sided_list(params):
    # at 7 Mb/s the far user's own term is positive (it is in outage), so only
    # the near user lists it; the near user's request still lowers the total
    far = UserState(gamma=3.6e3, q_bits=9.5e4, z=14.0)
    near = UserState(gamma=5.5e5, q_bits=3.1e4, z=2.4e3)
    prefs = build_preferences([far, near], params)
    assert prefs.metric[0, 1] > 0 and 0 in prefs.lists[1]
    assert prefs.metric[0, 1] + prefs.metric[1, 0] < prefs.metric[0, 0] + prefs.metric[1, 1]
    assert pair_users(prefs) == Matching((1, 0))


def test_lists_are_sorted_strictly_negative_with_index_ties():
    metric = np.array([[-1.0, -2.0, -2.0, 0.0],
                       [0.0, 0.0, 0.0, 0.0],
                       [-3.0, 1.0, -3.0, -0.5],
                       [0.0, 0.0, 0.0, -1e-300]])
    assert preference_lists(metric) == [[1, 2, 0], [], [0, 2, 3], [3]]


def test_lists_permute_with_relabeling(params, rng):
    states = [UserState(float(10 ** rng.uniform(1, 6)), float(rng.uniform(0, 1e5)),
                        float(rng.uniform(0, 1e7))) for _ in range(6)]
    perm = rng.permutation(6)
    a = build_preferences(states, params)
    b = build_preferences([states[k] for k in perm], params)
    np.testing.assert_array_equal(b.metric, a.metric[np.ix_(perm, perm)])
    inv = np.argsort(perm)
    for new, lst in enumerate(b.lists):
        # same entries, mapped back to old labels; order may differ only on ties
        assert sorted(perm[lst].tolist()) == sorted(a.lists[perm[new]])
        assert [a.metric[perm[new], perm[k]] for k in lst] == \
            [a.metric[perm[new], k] for k in a.lists[perm[new]]]
    assert len(inv) == 6


def test_n2_hand_trace():
    # identity total -2; swapping gives -3 + -4 = -7, so user 0's first request wins
    metric = [[-1.0, -3.0], [-4.0, -1.0]]
    prefs = _table(metric)
    assert prefs.lists == [[1, 0], [0, 1]]
    assert pair_users(prefs) == Matching((1, 0))


def test_n2_rejects_when_total_would_rise():
    metric = [[-5.0, -1.0], [-0.5, -5.0]]
    assert pair_users(_table(metric)) == Matching.identity(2)


def test_request_between_two_singles_touches_only_them():
    prefs = _table(-np.ones((5, 5)))
    out = match_request(1, 3, Matching.identity(5), set(), prefs)
    assert out == Matching((0, 3, 2, 1, 4))


def test_displaced_partner_whose_best_is_itself_goes_single():
    metric = np.zeros((4, 4))
    metric[0, 2] = metric[2, 0] = -1.0
    metric[1, 1] = -2.0          # user 1 prefers OMA over anyone left
    metric[1, 3] = -1.0
    prefs = _table(metric)
    current = Matching((1, 0, 2, 3))
    out = match_request(0, 2, current, set(), prefs)
    assert out == Matching((2, 1, 0, 3))


def test_chain_of_three_displacements_six_users():
    # start (0,1)(2,3)(4,5); 0 takes 2, so 1 and 3 are displaced; 1 takes 4,
    # displacing 5, who then picks up the single 3
    metric = np.zeros((6, 6))
    metric[0, 2] = metric[2, 0] = -5.0
    metric[1, 4] = -4.0
    metric[1, 3] = -1.0
    metric[5, 3] = -3.0
    metric[3, 5] = -3.0
    metric[4, 1] = -2.0
    prefs = _table(metric)
    current = Matching((1, 0, 3, 2, 5, 4))
    out = match_request(0, 2, current, set(), prefs)
    assert out == Matching((2, 4, 0, 5, 1, 3))
    assert out.is_valid()


def test_request_to_self_is_rejected():
    with pytest.raises(ValueError):
        match_request(2, 2, Matching.identity(3), set(), _table(-np.ones((3, 3))))


def test_recursion_guard_raises():
    work = _Proposals(_table(-np.ones((3, 3))), [0, 1, 2])
    with pytest.raises(RuntimeError):
        work.request(0, 1, set(), depth=4)


@given(_metric_strategy())
def test_pair_users_valid_and_never_worse_than_identity(metric):
    prefs = _table(metric)
    m = pair_users(prefs)
    assert m.is_valid()
    assert total_metric(m, prefs) <= total_metric(Matching.identity(len(m)), prefs) + 1e-12


@given(_metric_strategy(6))
def test_backends_match_identically(metric):
    a = _backend.match(metric, impl=_backend.get("python"))
    b = _backend.match(metric, impl=_backend.get("cython"))
    np.testing.assert_array_equal(a, b)


@given(_metric_strategy(6))
def test_exhaustive_is_a_lower_bound(metric):
    m = pair_users(_table(metric))
    _, best, _ = exhaustive_matching([None] * len(metric), None, metric=metric)
    assert best <= total_metric(m, metric) + 1e-12


def test_total_metric_additivity(rng):
    metric = rng.normal(size=(5, 5))
    assert total_metric(Matching.identity(5), metric) == pytest.approx(np.trace(metric))
    m = Matching((0, 2, 1, 3, 4))
    expect = metric[0, 0] + metric[3, 3] + metric[4, 4] + metric[1, 2] + metric[2, 1]
    assert total_metric(m, metric) == pytest.approx(expect)


def test_total_metric_matches_recomputation(params, rng):
    states = [UserState(float(10 ** rng.uniform(1, 6)), float(rng.uniform(0, 1e5)),
                        float(rng.uniform(0, 1e7))) for _ in range(6)]
    prefs = build_preferences(states, params)
    for partner in list(involutions(6))[::7]:
        expect = 0.0
        for i, p in enumerate(partner):
            if p == i:
                s = states[i]
                expect += solve_oma(s.q_bits, s.z_tilde, s.gamma, params).metric
            elif i < p:
                expect += solve_noma_pair(states[i], states[p], params).metric
        assert total_metric(Matching(partner), prefs) == pytest.approx(expect, rel=1e-12)


def test_metric_change_equals_total_difference(rng):
    metric = rng.normal(size=(6, 6))
    a, b = (1, 0, 2, 4, 3, 5), (0, 2, 1, 3, 5, 4)
    diff = total_metric(Matching(b), metric) - total_metric(Matching(a), metric)
    assert metric_change(a, b, metric) == pytest.approx(diff)
