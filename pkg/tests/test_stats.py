import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings, strategies as st

from leadrig.errors import InputError
from leadrig.stats import (
    average_ranks,
    bootstrap_ci,
    ecdf,
    holm_adjust,
    paired_rule_comparison,
    spearman_rho,
    wilcoxon_signed_rank,
)


def test_ecdf_steps():
    assert ecdf([1, 2, 2, 5]) == [(1.0, 0.25), (2.0, 0.75), (5.0, 1.0)]


def test_ecdf_single_and_constant():
    assert ecdf([3.5]) == [(3.5, 1.0)]
    assert ecdf([2, 2, 2]) == [(2.0, 1.0)]


def test_ecdf_empty_rejected():
    with pytest.raises(InputError):
        ecdf([])


def test_bootstrap_single_namespace_is_point():
    s = bootstrap_ci({"only": [1.0, 4.0, 9.0]}, np.median, resamples=500, seed=3)
    assert s.lower == s.upper == s.point == 4.0


def test_bootstrap_constant_statistic():
    s = bootstrap_ci({"a": [1.0], "b": [2.0]}, lambda x: 7.0, resamples=100)
    assert (s.lower, s.upper) == (7.0, 7.0)


def test_bootstrap_two_namespaces():
    s = bootstrap_ci({"a": [0.0], "b": [1.0]}, np.mean, resamples=10_000, seed=1)
    assert s.point == 0.5
    assert s.lower == 0.0 and s.upper == 1.0


def test_bootstrap_is_reproducible():
    groups = {"a": [1, 2], "b": [5], "c": [3, 3, 8]}
    one = bootstrap_ci(groups, np.median, resamples=300, seed=42)
    two = bootstrap_ci(groups, np.median, resamples=300, seed=42)
    assert one == two


def test_bootstrap_handles_infinite_statistic():
    s = bootstrap_ci({"a": [math.inf], "b": [math.inf]}, np.median, resamples=50)
    assert s.lower == s.upper == math.inf


def test_bootstrap_rejects_empty():
    with pytest.raises(InputError):
        bootstrap_ci({}, np.mean)


def test_wilcoxon_identical_samples():
    r = wilcoxon_signed_rank([1, 2, 3], [1, 2, 3])
    assert r.p_value == 1.0 and r.degenerate


def test_wilcoxon_all_positive():
    r = wilcoxon_signed_rank([1, 2, 3, 4, 5, 6])
    assert r.statistic == 21
    expected = math.erfc((21 - 10.5 - 0.5) / math.sqrt(22.75) / math.sqrt(2))
    assert r.p_value == pytest.approx(expected, abs=1e-12)
    assert abs(r.p_value - 0.036) <= 0.005


def test_wilcoxon_symmetric_pair():
    assert wilcoxon_signed_rank([1, -1]).p_value >= 0.99


def test_wilcoxon_matches_scipy():
    rng = np.random.default_rng(5)
    for _ in range(30):
        d = rng.integers(-5, 6, size=int(rng.integers(5, 40))).astype(float)
        if not np.any(d):
            continue
        ours = wilcoxon_signed_rank(d).p_value
        ref = scipy.stats.wilcoxon(d, zero_method="wilcox", correction=True,
                                   method="approx").pvalue
        assert ours == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_holm_example():
    assert holm_adjust([0.01, 0.04, 0.03]) == pytest.approx([0.03, 0.06, 0.06], abs=1e-12)


def test_holm_caps_at_one():
    assert holm_adjust([0.6, 0.9]) == [1.0, 1.0]


def test_holm_rejects_bad_values():
    with pytest.raises(InputError):
        holm_adjust([0.1, 1.5])


def test_holm_matches_reference_loop():
    rng = np.random.default_rng(6)
    p = rng.random(12)
    # reference step-down computed independently of the vectorized version
    order = np.argsort(p)
    expect = np.empty(12)
    running = 0.0
    for i, j in enumerate(order):
        running = max(running, min(1.0, (12 - i) * p[j]))
        expect[j] = running
    assert holm_adjust(p) == pytest.approx(expect.tolist(), abs=1e-15)


def test_spearman_example():
    assert spearman_rho([1, 2, 3], [2, 1, 3]) == pytest.approx(0.5, abs=1e-12)


def test_spearman_constant_side():
    assert spearman_rho([1, 1, 1], [1, 2, 3]) is None


def test_spearman_matches_scipy():
    rng = np.random.default_rng(7)
    x = rng.integers(0, 5, size=40)
    y = x + rng.integers(-2, 3, size=40)
    assert spearman_rho(x, y) == pytest.approx(scipy.stats.spearmanr(x, y).statistic, abs=1e-12)


def test_average_ranks_ties():
    assert average_ranks([10, 20, 20, 30]).tolist() == [1.0, 2.5, 2.5, 4.0]


def test_paired_comparison_drops_infeasible():
    res = paired_rule_comparison({"mean": [1, 2, None, 4], "median": [0, 1, 3, 1]}, m=10)
    (r,) = res
    assert (r.n_pairs, r.excluded) == (3, 1)
    assert r.median_difference == 1.0 and r.median_difference_pp == 10.0
    assert r.p_adjusted == r.p_value


def test_paired_comparison_holm_across_pairs():
    k = {"a": [1, 2, 3, 4, 5, 6, 7], "b": [0, 0, 0, 0, 0, 0, 0], "c": [1, 2, 3, 4, 5, 6, 8]}
    res = paired_rule_comparison(k, m=10)
    raw = [r.p_value for r in res]
    assert [r.p_adjusted for r in res] == pytest.approx(holm_adjust(raw))


def test_paired_comparison_too_few_pairs():
    (r,) = paired_rule_comparison({"a": [1, None], "b": [2, 3]}, m=4)
    assert r.degenerate and r.median_difference is None


pvals = st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=12)


@settings(max_examples=200, deadline=None)
@given(pvals)
def test_holm_is_monotone_and_dominates_raw(p):
    adj = holm_adjust(p)
    order = np.argsort(p, kind="stable")
    sorted_adj = [adj[i] for i in order]
    assert all(a <= b for a, b in zip(sorted_adj, sorted_adj[1:]))
    assert all(a >= r for a, r in zip(adj, p))
    assert all(0 <= a <= 1 for a in adj)


diffs = st.lists(st.integers(-6, 6), min_size=1, max_size=25)


@settings(max_examples=200, deadline=None)
@given(diffs)
def test_wilcoxon_sign_flip_symmetry(d):
    a = wilcoxon_signed_rank(d)
    b = wilcoxon_signed_rank([-x for x in d])
    assert a.p_value == pytest.approx(b.p_value, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 9), min_size=3, max_size=20), st.data())
def test_spearman_invariant_under_monotone_maps(x, data):
    y = data.draw(st.lists(st.integers(0, 9), min_size=len(x), max_size=len(x)))
    base = spearman_rho(x, y)
    moved = spearman_rho([v**3 + 1 for v in x], [math.exp(v) for v in y])
    if base is None:
        assert moved is None
    else:
        assert moved == pytest.approx(base, abs=1e-12)
