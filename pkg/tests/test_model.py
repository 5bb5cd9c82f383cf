import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from beamest.model import (
    AmplitudeEnsemble,
    ModelParams,
    Observations,
    RandomSource,
    SelectionSet,
    conditional_log_density,
    marginal_log_density,
    measure,
    mix_seed,
    sample_amplitudes,
)

from _oracle import gauss_moment  # noqa: F401  (shared hermegauss import side)


def test_params_reject_negative_scale():
    with pytest.raises(ValueError):
        ModelParams(0.0, 0.0, -0.1)
    ModelParams(0.0, 0.0, 0.0)  # boundary fine


def test_selection_sorted_unique_one_based():
    s = SelectionSet((3, 1))
    assert s.indices == (1, 3)
    assert s.complement(4) == (2, 4)
    with pytest.raises(ValueError):
        SelectionSet((1, 1))
    with pytest.raises(ValueError):
        SelectionSet((0, 2))


def test_observations_partition_check():
    Observations(het=[(1, 0.1, 0.2)], counts=[(2, 3)])
    with pytest.raises(ValueError):
        Observations(het=[(1, 0.1, 0.2)], counts=[(3, 1)])  # hole at 2
    with pytest.raises(ValueError):
        Observations(het=[(1, 0.0, 0.0)], counts=[(2, -1)])


# ---------------------------------------------------------------------------
# seeding and streams


def test_mix_seed_is_deterministic_and_order_sensitive():
    assert mix_seed(1, 2, 3) == mix_seed(1, 2, 3)
    assert mix_seed(1, 2) != mix_seed(2, 1)
    assert mix_seed(0) != mix_seed(1)
    assert 0 <= mix_seed(12345, 678) < 1 << 64


@given(st.lists(st.integers(0, 2**64 - 1), min_size=1, max_size=4))
@settings(max_examples=60, deadline=None)
def test_mix_seed_stays_in_64_bits(parts):
    assert 0 <= mix_seed(*parts) < 1 << 64


def test_random_source_streams_repeat_and_differ():
    a = RandomSource(7, 3).generator.standard_normal(8)
    b = RandomSource(7, 3).generator.standard_normal(8)
    c = RandomSource(7, 4).generator.standard_normal(8)
    d = RandomSource(8, 3).generator.standard_normal(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_random_source_child_streams_are_disjoint():
    root = RandomSource(11, 0)
    k1 = root.child(0).generator.standard_normal(4)
    k2 = root.child(1).generator.standard_normal(4)
    again = RandomSource(11, 0).child(0).generator.standard_normal(4)
    assert not np.array_equal(k1, k2)
    assert np.array_equal(k1, again)


# ---------------------------------------------------------------------------
# sampling


def test_sample_amplitudes_matches_prior_moments():
    params = ModelParams(1.5, -0.5, 2.0)
    ens = sample_amplitudes(params, 200_000, RandomSource(42))
    assert ens.n == 200_000
    assert np.mean(ens.a) == pytest.approx(1.5, abs=0.02)
    assert np.mean(ens.b) == pytest.approx(-0.5, abs=0.02)
    assert np.var(ens.a) == pytest.approx(1.0, rel=0.03)  # nu/2
    assert np.var(ens.b) == pytest.approx(1.0, rel=0.03)


def test_sample_amplitudes_degenerate_prior():
    ens = sample_amplitudes(ModelParams(0.7, -0.2, 0.0), 50, RandomSource(0))
    assert np.all(ens.a == 0.7)
    assert np.all(ens.b == -0.2)


def test_measure_partitions_modes():
    ens = sample_amplitudes(ModelParams(1.0, 0.0, 1.0), 8, RandomSource(5))
    sel = SelectionSet((1, 4, 6))
    obs = measure(ens, sel, RandomSource(5, 1))
    assert [j for j, _, _ in obs.het] == [1, 4, 6]
    assert [k for k, _ in obs.counts] == [2, 3, 5, 7, 8]
    assert all(z >= 0 for _, z in obs.counts)
    obs2 = measure(ens, sel, RandomSource(5, 1))
    assert obs == obs2  # same stream, same record


def test_measure_all_counting_or_all_heterodyne():
    ens = sample_amplitudes(ModelParams(0.5, 0.5, 1.0), 4, RandomSource(1))
    all_counts = measure(ens, SelectionSet(()), RandomSource(2))
    assert all_counts.het == [] and len(all_counts.counts) == 4
    all_het = measure(ens, SelectionSet((1, 2, 3, 4)), RandomSource(2))
    assert all_het.counts == [] and len(all_het.het) == 4


def test_measure_rejects_out_of_range_selection():
    ens = sample_amplitudes(ModelParams(0.0, 0.0, 1.0), 2, RandomSource(0))
    with pytest.raises(ValueError):
        measure(ens, SelectionSet((3,)), RandomSource(0))


# ---------------------------------------------------------------------------
# densities


def test_conditional_log_density_hand_value():
    ens = AmplitudeEnsemble(np.array([1.0, 2.0]), np.array([0.0, 1.0]))
    obs = Observations(het=[(1, 1.0, 0.0)], counts=[(2, 3)])
    got = conditional_log_density(obs, ens, SelectionSet((1,)))
    lam = 2.0**2 + 1.0**2
    want = -math.log(math.pi) + (-lam - math.lgamma(4.0) + 3.0 * math.log(lam))
    assert got == pytest.approx(want, rel=1e-15)


def test_conditional_log_density_zero_mean_count():
    ens = AmplitudeEnsemble(np.array([1.0, 0.0]), np.array([0.0, 0.0]))
    sel = SelectionSet((1,))
    dead = Observations(het=[(1, 0.5, 0.5)], counts=[(2, 2)])
    assert conditional_log_density(dead, ens, sel) == float("-inf")
    quiet = Observations(het=[(1, 0.5, 0.5)], counts=[(2, 0)])
    assert math.isfinite(conditional_log_density(quiet, ens, sel))


def test_marginal_log_density_matches_scipy():
    params = ModelParams(0.8, -0.3, 1.6)
    obs = Observations(het=[(1, 1.1, -0.4)], counts=[(2, 0), (3, 5)])
    got = marginal_log_density(obs, params, SelectionSet((1,)))
    sd = math.sqrt((params.nu + 1.0) / 2.0)
    want = stats.norm.logpdf(1.1, 0.8, sd) + stats.norm.logpdf(-0.4, -0.3, sd)
    p = 1.0 / (params.nu + 1.0)
    want += stats.geom.logpmf(0 + 1, p) + stats.geom.logpmf(5 + 1, p)
    assert got == pytest.approx(want, rel=1e-12)


def test_marginal_log_density_point_prior_counts():
    # nu = 0: every count must be zero, anything else is impossible
    params = ModelParams(0.2, 0.2, 0.0)
    sel = SelectionSet(())
    hit = Observations(het=[], counts=[(1, 1)])
    assert marginal_log_density(hit, params, sel) == float("-inf")
    miss = Observations(het=[], counts=[(1, 0)])
    assert marginal_log_density(miss, params, sel) == pytest.approx(0.0, abs=1e-15)


def _hermegauss_pair(n=120):
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / math.sqrt(2.0 * math.pi)


@pytest.mark.parametrize(
    "obs,sel,params",
    [
        # heterodyne modes may sit at any location
        (
            Observations(het=[(1, 0.9, -0.2)], counts=[]),
            SelectionSet((1,)),
            ModelParams(0.6, -0.4, 1.3),
        ),
        # the geometric count marginal presumes centered counting modes
        (Observations(het=[], counts=[(1, 2)]), SelectionSet(()), ModelParams(0.0, 0.0, 1.3)),
        (Observations(het=[], counts=[(1, 0)]), SelectionSet(()), ModelParams(0.0, 0.0, 1.3)),
    ],
)
def test_marginal_density_integrates_the_conditional(obs, sel, params):
    # single mode: integrate the conditional density over the amplitude
    # prior with a 2-d Gauss-Hermite rule and compare with the closed form
    sd = math.sqrt(params.nu / 2.0)
    x, w = _hermegauss_pair()
    total = 0.0
    for xa, wa in zip(params.theta + sd * x, w):
        for xb, wb in zip(params.eta + sd * x, w):
            ens = AmplitudeEnsemble(np.array([xa]), np.array([xb]))
            total += wa * wb * math.exp(conditional_log_density(obs, ens, sel))
    want = marginal_log_density(obs, params, sel)
    assert math.log(total) == pytest.approx(want, abs=1e-9)


def test_marginal_count_distribution_is_geometric():
    # simulate one counting mode and compare the histogram with the
    # geometric pmf implied by the marginal density
    params = ModelParams(0.0, 0.0, 1.5)
    ens = sample_amplitudes(params, 200_000, RandomSource(9))
    obs_rng = RandomSource(9, 1)
    lam = ens.a**2 + ens.b**2
    z = obs_rng.generator.poisson(lam)
    sel = SelectionSet(())
    for k in range(5):
        want = math.exp(
            marginal_log_density(Observations(het=[], counts=[(1, k)]), params, sel)
        )
        got = np.mean(z == k)
        assert got == pytest.approx(want, abs=4.5 * math.sqrt(want / 200_000) + 1e-4)
