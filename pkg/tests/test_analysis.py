import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from onionwsn.analysis import (PUBLISHED_MAX_T, PatternPool, adversary_view, breaking_probability,
                               budget_note, expected_known_nodes, figure3_sweep, frequency_leakage,
                               max_route_length, mc_breaking_probability, mc_known_nodes,
                               mc_topology, overlay_vs_basic, pattern_schedule, skewed_workload)
from onionwsn.errors import EmptyNetwork, NoRoom, PoolUnderflow, TooManyInfected
from onionwsn.onion import select_overlay_path


def eq2_exact(n, z, t):
    f = Fraction(z, n)
    return t * (f + f * Fraction(n - z, n))


def test_expected_known_nodes():
    assert expected_known_nodes(1000, 100, 20) == pytest.approx(3.8, abs=1e-12)
    assert expected_known_nodes(57, 0, 9) == 0
    assert expected_known_nodes(57, 57, 9) == 9
    with pytest.raises(EmptyNetwork) as exc:
        expected_known_nodes(0, 0, 3)
    assert exc.value.code == "empty-network"
    with pytest.raises(TooManyInfected):
        expected_known_nodes(10, 11, 3)


def test_breaking_probability():
    assert breaking_probability(1000, 100, 20) == pytest.approx(1 / 902)
    assert breaking_probability(1000, 100, 20) == pytest.approx(0.0011086, abs=1e-7)
    assert breaking_probability(100, 0, 20) == 1 / 100
    assert breaking_probability(100, 100, 20) == 1 / 20


@given(st.integers(1, 10_000), st.data(), st.integers(1, 60))
def test_closed_forms_match_exact_arithmetic(n, data, t):
    z = data.draw(st.integers(0, n))
    assert expected_known_nodes(n, z, t) == pytest.approx(float(eq2_exact(n, z, t)), rel=1e-12, abs=1e-12)
    exact = 1 / (Fraction(n - z) + Fraction(t * z, n))
    assert breaking_probability(n, z, t) == pytest.approx(float(exact), rel=1e-12)


@given(st.integers(1, 10_000), st.data(), st.integers(1, 60))
def test_consistency_identity(n, data, t):
    z = data.draw(st.integers(0, n))
    lhs = n - z + expected_known_nodes(n, z, t) - t * (z / n) * ((n - z) / n)
    assert abs(lhs - (n - z + t * z / n)) <= 1e-9 * max(1, n)


def test_figure3_sweep():
    rows = figure3_sweep((100, 1000, 10000), 20)
    for n in (100, 1000, 10000):
        curve = [r for r in rows if r["n"] == n]
        assert curve[0]["frac_infected"] == 0 and curve[0]["eq3_prob"] == 1 / n
        assert curve[-1]["frac_infected"] == 1 and curve[-1]["eq3_prob"] == 0.05
        probs = [r["eq3_prob"] for r in curve]
        assert probs == sorted(probs)
    mid = figure3_sweep((10000,), 20, [0.5])[0]
    assert mid["eq3_prob"] == pytest.approx(1 / 5010)
    with pytest.raises(ValueError):
        figure3_sweep((100,), 20, [1.5])


def brute_budget(lr, b, payload, mode):
    best = 0
    for t in range(1, 200):
        if mode == "paper-exact":
            bits = 160 + (lr + b) * t + t * (t - 1).bit_length()
        else:
            bits = 8 * (21 + 4 * (t + 2) + t * lr // 8)
        if bits <= payload:
            best = t
    return best


def test_budget():
    assert max_route_length(16, 16, 920, "paper-exact") == 20 == brute_budget(16, 16, 920, "paper-exact")
    assert max_route_length(16, 16, 920, "byte-aligned") == 14 == brute_budget(16, 16, 920, "byte-aligned")
    assert 160 + 32 * 22 + 22 * math.ceil(math.log2(22)) > 920
    note = budget_note(20)
    assert str(PUBLISHED_MAX_T) in note and "20" in note
    with pytest.raises(NoRoom) as exc:
        max_route_length(16, 16, 160, "paper-exact")
    assert exc.value.code == "no-room"
    with pytest.raises(NoRoom):
        max_route_length(16, 16, 160, "byte-aligned")


@pytest.mark.parametrize("payload", [300, 512, 920, 1024, 2000])
@pytest.mark.parametrize("lr", [8, 16, 32])
def test_budget_matches_scan(payload, lr):
    for mode in ("paper-exact", "byte-aligned"):
        expect = brute_budget(lr, 16, payload, mode)
        if expect == 0:
            with pytest.raises(NoRoom):
                max_route_length(lr, 16, payload, mode)
        else:
            assert max_route_length(lr, 16, payload, mode) == expect


def test_mc_known_nodes_endpoints(rgg100):
    assert mc_known_nodes(100, 0, 12, 500, seed=2, graph=rgg100).mean == 0
    assert mc_known_nodes(100, 100, 12, 500, seed=2, graph=rgg100).mean == 12


@pytest.mark.parametrize("n,z", [(100, 10), (1000, 100), (1000, 500)])
def test_mc_known_nodes_matches_closed_form(n, z):
    res = mc_known_nodes(n, z, 20, 10_000, seed=5)
    assert abs(res.mean - expected_known_nodes(n, z, 20)) / expected_known_nodes(n, z, 20) < 0.05


@pytest.mark.slow
@pytest.mark.parametrize("n,z", [(100, 10), (1000, 500)])
def test_mc_breaking_probability_matches_closed_form(n, z):
    res = mc_breaking_probability(n, z, 20, 100_000, seed=6)
    assert res.within_3sigma(breaking_probability(n, z, 20))


def test_serial_equals_parallel(rgg100):
    a = mc_known_nodes(100, 30, 8, 400, seed=9, graph=rgg100, jobs=1)
    b = mc_known_nodes(100, 30, 8, 400, seed=9, graph=rgg100, jobs=2)
    assert a == b
    g1 = mc_breaking_probability(100, 30, 8, 400, seed=9, graph=rgg100, jobs=1)
    g2 = mc_breaking_probability(100, 30, 8, 400, seed=9, graph=rgg100, jobs=3)
    assert g1 == g2


def test_mc_topology_deterministic():
    assert mc_topology(200, 3) == mc_topology(200, 3)


def test_overlay_vs_basic(rgg100):
    basic, overlay = overlay_vs_basic(rgg100, 20, 8, 2000, seed=1)
    assert overlay >= basic


def test_pattern_schedule(rgg100):
    targets = [5, 6, 5, 9]
    plain = pattern_schedule(PatternPool((), 0), rgg100, targets, 8, seed=3)
    assert len(plain) == 4
    for p, tgt in zip(plain, targets):
        assert p.target == tgt and len(set(p.path)) == 10
    again = pattern_schedule(PatternPool((), 0), rgg100, targets, 8, seed=3)
    assert plain == again
    pool = PatternPool((11, 12, 13), 3)
    for p in pattern_schedule(pool, rgg100, targets, 8, seed=3):
        assert set(pool.pool) <= set(p.path[1:-1])
    with pytest.raises(PoolUnderflow) as exc:
        pattern_schedule(PatternPool((1, 2), 3), rgg100, targets, 8)
    assert exc.value.code == "pool-underflow"
    with pytest.raises(PoolUnderflow):
        pattern_schedule(PatternPool(tuple(range(1, 20)), 8), rgg100, targets, 8)


def test_pattern_schedule_c0_is_overlay_selection(rgg100):
    import random
    from onionwsn._rng import derive_seed
    plans = pattern_schedule(PatternPool((1, 2, 3), 0), rgg100, [7, 8], 6, seed=4)
    for i, (p, tgt) in enumerate(zip(plans, [7, 8])):
        ref = select_overlay_path(rgg100, tgt, 6, random.Random(derive_seed(4, "pattern", i)))
        assert p == ref


def views_for(g, targets, t, infected, pool=None, seed=0):
    pool = pool or PatternPool((), 0)
    return [adversary_view(p, infected, g) for p in pattern_schedule(pool, g, targets, t, seed)]


def test_leakage_single_target_is_maximal(rgg100):
    infected = frozenset(rgg100.ids)
    views = views_for(rgg100, [17] * 300, 12, infected)
    assert frequency_leakage(views, {17: 1.0}, 100) > 0.9


def test_leakage_uniform_targets_is_small(rgg100):
    infected = frozenset(rgg100.ids)
    targets = skewed_workload(list(rgg100.ids), [1] * 100, 2000, seed=1)
    views = views_for(rgg100, targets, 12, infected)
    truth = {s: 1 / 100 for s in rgg100.ids}
    assert frequency_leakage(views, truth, 100) == 0.0


def test_leakage_single_query_is_zero(rgg100):
    views = views_for(rgg100, [17], 12, frozenset(rgg100.ids))
    assert frequency_leakage(views, {17: 1.0}, 100) == 0.0


def test_leakage_pool_helps(rgg100):
    infected = frozenset(rgg100.ids)
    targets = skewed_workload([10, 20], [0.8, 0.2], 500, seed=2)
    truth = {10: 0.8, 20: 0.2}
    base = frequency_leakage(views_for(rgg100, targets, 12, infected, seed=2), truth, 100)
    pool = PatternPool.random(rgg100, 10, 4, seed=2)
    pooled = frequency_leakage(views_for(rgg100, targets, 12, infected, pool, seed=2), truth, 100)
    assert 0 <= pooled < base <= 1


def test_skewed_workload_frequencies():
    w = skewed_workload([1, 2], [0.8, 0.2], 10_000, seed=0)
    share = w.count(1) / len(w)
    assert abs(share - 0.8) <= 3 * math.sqrt(0.8 * 0.2 / 10_000)
