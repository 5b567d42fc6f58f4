import math

import numpy as np
import pytest

from cosetcode.models import (
    BiAwgnChannel,
    DiscreteChannel,
    DistortionSpec,
    MemorylessSource,
    bac,
    bernoulli_source,
    bsc,
    hamming_distortion,
    parse_channel,
    parse_source,
    qsc,
    rate_quantities,
    reverse_model,
    uniform_source,
)
from cosetcode.stats import binary_entropy
from cosetcode.streams import stream


# ---------------------------------------------------------------------------
# sources
# ---------------------------------------------------------------------------

def test_log_prob_iid_uniform():
    src = uniform_source(4, 2)
    assert src.log_prob([0, 1, 1, 0]) == pytest.approx(-4.0)


def test_log_prob_point_mass():
    src = MemorylessSource(np.broadcast_to([1.0, 0.0], (5, 2)).copy())
    assert src.log_prob([0] * 5) == 0.0
    assert src.log_prob([0, 1, 0, 0, 0]) == float("-inf")
    assert np.array_equal(src.sample(stream(1, 0)), np.zeros(5, dtype=int))


def test_log_prob_nonstationary_product_rule():
    src = MemorylessSource([[0.9, 0.1], [0.1, 0.9]])
    assert src.log_prob([1, 1]) == pytest.approx(math.log2(0.09))


def test_source_validation():
    with pytest.raises(ValueError):
        MemorylessSource([[0.5, 0.6]])
    with pytest.raises(ValueError):
        MemorylessSource([[1.1, -0.1]])
    src = bernoulli_source(0.3, 3)
    with pytest.raises(ValueError):
        src.log_prob([0, 1])
    with pytest.raises(ValueError):
        src.log_prob([0, 1, 2])


def test_sampling_frequencies_match_pmf():
    src = bernoulli_source(0.3, 2000)
    xs = src.sample(stream(99, 0))
    # 4-sigma binomial bound on the empirical frequency of symbol 1
    sigma = math.sqrt(0.3 * 0.7 / 2000)
    assert abs(xs.mean() - 0.3) < 4 * sigma


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------

def test_bsc_zero_noiseless():
    ch = bsc(0.0, 6)
    x = np.array([0, 1, 1, 0, 1, 0])
    y = ch.sample(x, stream(2, 0))
    assert np.array_equal(y, x)


def test_bsc_log_lik_flip_count():
    p = 0.1
    ch = bsc(p, 8)
    x = np.zeros(8, dtype=int)
    y = np.array([0, 1, 0, 0, 1, 0, 0, 0])
    flips = int((x != y).sum())
    want = flips * math.log2(p) + (8 - flips) * math.log2(1 - p)
    assert ch.log_lik(y, x) == pytest.approx(want)


def test_biawgn_density_reference_point():
    ch = BiAwgnChannel(1.0, 1)
    d = ch.density(np.array([1.0]))
    assert d[0, 0] == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert d[0, 1] == pytest.approx(math.exp(-2.0) / math.sqrt(2 * math.pi))


def test_channel_sampling_frequencies():
    ch = bsc(0.2, 4000)
    x = np.zeros(4000, dtype=int)
    y = ch.sample(x, stream(5, 0))
    sigma = math.sqrt(0.2 * 0.8 / 4000)
    assert abs(y.mean() - 0.2) < 4 * sigma


# ---------------------------------------------------------------------------
# reverse model
# ---------------------------------------------------------------------------

def test_reverse_model_uniform_prior_bsc():
    n, p = 3, 0.1
    ch = bsc(p, n)
    rm = reverse_model(np.full((n, 2), 0.5), ch, [0, 0, 0])
    assert np.allclose(rm.posteriors, [[0.9, 0.1]] * 3)


def test_reverse_model_noiseless_point_mass():
    ch = bsc(0.0, 2)
    rm = reverse_model(np.full((2, 2), 0.5), ch, [1, 0])
    assert np.allclose(rm.posteriors, [[0.0, 1.0], [1.0, 0.0]])


def test_reverse_model_bayes_arithmetic():
    ch = bsc(0.1, 1)
    rm = reverse_model([[0.3, 0.7]], ch, [1])
    assert np.allclose(rm.posteriors, [[0.03 / 0.66, 0.63 / 0.66]])
    assert rm.posteriors[0, 0] == pytest.approx(1 / 22)


def test_reverse_model_zero_evidence_names_index():
    ch = DiscreteChannel(np.broadcast_to(np.eye(2), (2, 2, 2)).copy())
    with pytest.raises(ValueError, match="index 1"):
        reverse_model([[0.5, 0.5], [1.0, 0.0]], ch, [0, 1])


def test_reverse_model_bayes_consistency_randomized():
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(1, 6))
        prior = rng.dirichlet(np.ones(3), size=n)
        kern = rng.dirichlet(np.ones(4), size=(n, 3))
        ch = DiscreteChannel(kern)
        y = rng.integers(0, 4, size=n)
        rm = reverse_model(prior, ch, y)
        lik = ch.lik_rows(y)
        evid = (prior * lik).sum(axis=1)
        for i in range(n):
            for xv in range(3):
                lhs = prior[i, xv] * lik[i, xv]
                rhs = evid[i] * rm.posteriors[i, xv]
                assert abs(lhs - rhs) < 1e-9


# ---------------------------------------------------------------------------
# rate quantities
# ---------------------------------------------------------------------------

def test_rate_quantities_bsc_closed_form():
    n = 4
    ch = bsc(0.11, n)
    rq = rate_quantities(np.full((n, 2), 0.5), ch)
    assert rq.h_x == pytest.approx(1.0, abs=1e-12)
    assert rq.h_x_given_y == pytest.approx(binary_entropy(0.11), abs=1e-9)
    assert rq.i_xy == pytest.approx(1.0 - binary_entropy(0.11), abs=1e-9)


def test_rate_quantities_noiseless_and_independent():
    n = 3
    noiseless = bsc(0.0, n)
    rq = rate_quantities(np.broadcast_to([0.3, 0.7], (n, 2)).copy(), noiseless)
    assert rq.h_x_given_y == pytest.approx(0.0, abs=1e-12)
    assert rq.i_xy == pytest.approx(rq.h_x)
    indep = DiscreteChannel(np.broadcast_to([0.6, 0.4], (n, 2, 2)).copy())
    rq2 = rate_quantities(np.full((n, 2), 0.5), indep)
    assert rq2.i_xy == pytest.approx(0.0, abs=1e-12)


def test_rate_quantities_two_routes_agree():
    # H_X - H_X|Y against the direct KL/mutual-information sum
    rng = np.random.default_rng(23)
    n = 3
    prior = rng.dirichlet(np.ones(3), size=n)
    kern = rng.dirichlet(np.ones(3), size=(n, 3))
    ch = DiscreteChannel(kern)
    rq = rate_quantities(prior, ch)
    i_direct = 0.0
    for i in range(n):
        joint = prior[i][:, None] * kern[i]
        px = joint.sum(axis=1)
        py = joint.sum(axis=0)
        mask = joint > 0
        i_direct += (joint[mask] * np.log2(joint[mask] / np.outer(px, py)[mask])).sum()
    assert rq.i_xy == pytest.approx(i_direct / n, abs=1e-9)


def test_rate_quantities_biawgn_matches_fine_grid():
    n = 1
    sigma = 1.0
    ch = BiAwgnChannel(sigma, n)
    rq = rate_quantities(np.full((n, 2), 0.5), ch)
    # independent oracle: trapezoidal integration on a wide fine grid
    ys = np.linspace(-12, 12, 200001)
    d0 = np.exp(-0.5 * ((ys - 1) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    d1 = np.exp(-0.5 * ((ys + 1) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    py = 0.5 * d0 + 0.5 * d1
    post0 = np.divide(0.5 * d0, py, out=np.zeros_like(py), where=py > 0)
    hpost = np.zeros_like(py)
    for pv in (post0, 1 - post0):
        hpost -= np.where(pv > 0, pv * np.log2(pv), 0.0)
    want = np.trapezoid(py * hpost, ys)
    assert rq.h_x_given_y == pytest.approx(want, abs=1e-6)


# ---------------------------------------------------------------------------
# distortion
# ---------------------------------------------------------------------------

def test_hamming_distortion():
    d = hamming_distortion(2)
    assert d.total([0, 1, 1, 0], [0, 1, 1, 0]) == 0.0
    assert d.total([0, 1, 1, 0], [1, 1, 0, 0]) == 2.0


def test_weighted_distortion_table():
    d = DistortionSpec([[0.0, 2.0], [1.0, 0.0]])
    assert d.total([0], [1]) == 2.0
    with pytest.raises(ValueError):
        DistortionSpec([[np.inf, 0.0]])
    with pytest.raises(ValueError):
        DistortionSpec([[-1.0, 0.0]])


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def test_parse_presets(tmp_path):
    assert isinstance(parse_channel("bsc(0.1)", 4), DiscreteChannel)
    assert isinstance(parse_channel("bac(0.1, 0.2)", 4), DiscreteChannel)
    ch = parse_channel("qsc(3, 0.2)", 4)
    assert ch.q == 3
    assert np.allclose(ch.kernels[0, 0], [0.8, 0.1, 0.1])
    assert isinstance(parse_channel("biawgn(1.0)", 4), BiAwgnChannel)
    src = parse_source("bernoulli(0.3)", 5, 2)
    assert src.pmfs[0, 1] == pytest.approx(0.3)
    f = tmp_path / "pmfs.txt"
    f.write_text("0.5 0.5\n0.1 0.9\n")
    src2 = parse_source(f"nonstationary({f})", 2, 2)
    assert src2.pmfs[1, 1] == pytest.approx(0.9)
    with pytest.raises(ValueError):
        parse_channel("laplace(1)", 4)
    assert qsc(2, 0.1, 1).kernels[0, 0, 1] == pytest.approx(0.1)
    assert bac(0.1, 0.3, 1).kernels[0, 1, 0] == pytest.approx(0.3)
