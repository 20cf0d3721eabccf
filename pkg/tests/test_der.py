import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import der_bruteforce
from privspeech.errors import ConfigError, UndefinedMetricError
from privspeech.metrics import SegmentAnnotation, der
from privspeech.metrics.der import collar_zones, merge_intervals


def ann(*segs):
    return SegmentAnnotation(list(segs))


def random_annotation(rng, labels, max_segments=8, grid=1 / 8, horizon=64):
    n = int(rng.integers(1, max_segments + 1))
    segs = []
    for _ in range(n):
        a = int(rng.integers(0, horizon - 1))
        b = int(rng.integers(a + 1, min(a + 24, horizon) + 1))
        segs.append((str(rng.choice(labels)), a * grid, b * grid))
    return segs


def test_identical_is_zero():
    ref = ann(("A", 0.0, 3.0), ("B", 3.5, 6.0), ("A", 6.0, 8.0))
    assert der(ref, ref).der == 0.0
    assert der(ref, ref.relabel({"A": "x", "B": "y"})).der == 0.0


def test_split_hypothesis_example():
    b = der(ann(("A", 0.0, 10.0)), ann(("X", 0.0, 5.0), ("Y", 5.0, 10.0)), collar_s=0.0)
    assert (b.fa_s, b.miss_s, b.error_s, b.total_s) == (0.0, 0.0, 5.0, 10.0)
    assert b.der == 0.5


def test_collar_absorbs_trailing_fa():
    b = der(ann(("A", 0.0, 10.0)), ann(("X", 0.0, 10.2)), collar_s=0.25)
    assert b.der == 0.0
    assert b.total_s == pytest.approx(9.5, abs=1e-12)


def test_miss_and_false_alarm():
    b = der(ann(("A", 0.0, 4.0)), ann(("X", 2.0, 6.0)), collar_s=0.0)
    assert (b.miss_s, b.fa_s, b.error_s) == (2.0, 2.0, 0.0)


def test_overlap_exclusion():
    ref = ann(("A", 0.0, 4.0), ("B", 2.0, 6.0))
    hyp = ann(("X", 0.0, 6.0))
    inc = der(ref, hyp, collar_s=0.0)
    exc = der(ref, hyp, collar_s=0.0, include_overlap=False)
    assert inc.total_s == 8.0 and inc.miss_s == 2.0
    assert exc.total_s == 4.0 and exc.miss_s == 0.0


def test_collar_zones_merge_and_clamp():
    zones = collar_zones(ann(("A", 0.1, 0.5), ("B", 0.6, 2.0)), 0.25)
    assert zones == [(0.0, 0.85), (1.75, 2.25)]
    assert merge_intervals([(3, 4), (0, 1), (1, 2)]) == [(0, 2), (3, 4)]


def test_errors():
    with pytest.raises(ConfigError):
        der(ann(("A", 0.0, 1.0)), ann(("A", 0.0, 1.0)), collar_s=-0.1)
    with pytest.raises(UndefinedMetricError):
        der(ann(("A", 0.0, 0.4)), ann(), collar_s=0.25)
    with pytest.raises(UndefinedMetricError):
        der(ann(), ann(("X", 0.0, 1.0)))


def test_breakdown_sum_pools_seconds():
    a = der(ann(("A", 0.0, 4.0)), ann(("X", 0.0, 2.0)), collar_s=0.0)
    b = der(ann(("A", 0.0, 4.0)), ann(("X", 0.0, 4.0)), collar_s=0.0)
    total = a + b
    assert total.total_s == 8.0 and total.der == 2.0 / 8.0


@pytest.mark.parametrize("collar", [0.0, 0.25])
@pytest.mark.parametrize("include_overlap", [True, False])
def test_matches_bruteforce_on_dyadic_grid(collar, include_overlap):
    # multiples of 1/8 keep every sum exact in binary floating point
    rng = np.random.default_rng(17)
    checked = 0
    for _ in range(150):
        ref = random_annotation(rng, ["A", "B", "C", "D"])
        hyp = random_annotation(rng, ["w", "x", "y", "z"])
        num, total = der_bruteforce(ref, hyp, collar, include_overlap)
        if total == 0:
            continue
        b = der(ann(*ref), ann(*hyp), collar, include_overlap)
        assert b.total_s == total
        assert b.fa_s + b.miss_s + b.error_s == num
        checked += 1
    assert checked > 100


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.permutations(["p", "q", "r", "s"]))
def test_relabel_invariance(seed, perm):
    rng = np.random.default_rng(seed)
    ref = ann(*random_annotation(rng, ["A", "B", "C"]))
    hyp = ann(*random_annotation(rng, ["w", "x", "y", "z"]))
    renamed = hyp.relabel(dict(zip(["w", "x", "y", "z"], perm)))
    b1, b2 = der(ref, hyp, 0.0), der(ref, renamed, 0.0)
    assert (b1.fa_s, b1.miss_s, b1.error_s) == (b2.fa_s, b2.miss_s, b2.error_s)


def scored_time(ref, hyp, collar):
    try:
        return der(ref, hyp, collar).total_s
    except UndefinedMetricError:
        return 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.125, 0.25, 0.5]), st.sampled_from([0.125, 0.25, 1.0]))
def test_wider_collar_scores_less_time(seed, c2, extra):
    rng = np.random.default_rng(seed)
    ref = ann(*random_annotation(rng, ["A", "B"]))
    hyp = ann(*random_annotation(rng, ["x", "y"]))
    assert scored_time(ref, hyp, c2 + extra) <= scored_time(ref, hyp, c2)
