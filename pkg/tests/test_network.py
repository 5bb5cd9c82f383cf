"""Splitter algebra: orthogonality, concentration patterns, serialisation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from beamest.model import AmplitudeEnsemble, ModelParams, RandomSource, sample_amplitudes
from beamest.network import (
    BeamSplitterOp,
    Network,
    NoiseSpec,
    apply_network,
    apply_op,
    binary_tree_network,
    cascade_network,
    network_from_text,
    network_matrix,
    network_to_text,
    perturb,
    tree_stages,
)


def test_op_validation():
    with pytest.raises(ValueError):
        BeamSplitterOp(2, 2, 0.1)
    with pytest.raises(ValueError):
        BeamSplitterOp(0, 1, 0.1)
    op = BeamSplitterOp(1, 3, -0.4)
    assert (op.j, op.k, op.tau) == (1, 3, -0.4)


def test_network_concat_and_min_size():
    net = Network((BeamSplitterOp(1, 2, 0.3),)) + Network((BeamSplitterOp(2, 5, 0.1),))
    assert len(net.ops) == 2
    assert net.n_min == 5
    assert Network(()).n_min == 1


def test_noise_spec():
    assert NoiseSpec(0.0).angle_sd == 0.0
    assert NoiseSpec(1.0).angle_sd == pytest.approx(math.sqrt(math.log(2.0)))
    with pytest.raises(ValueError):
        NoiseSpec(-0.5)


def _random_network(draw_ops, n):
    ops = tuple(
        BeamSplitterOp(j, k, tau) if j < k else BeamSplitterOp(k, j, tau)
        for j, k, tau in draw_ops
    )
    return Network(ops)


net_strategy = st.integers(2, 6).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(
            st.tuples(
                st.integers(1, n), st.integers(1, n), st.floats(-3.0, 3.0)
            ).filter(lambda t: t[0] != t[1]),
            max_size=8,
        ),
    )
)


@given(net_strategy)
@settings(max_examples=120, deadline=None)
def test_compiled_matrix_is_orthogonal(case):
    n, raw = case
    net = _random_network(raw, n)
    r = network_matrix(net, n)
    assert_allclose(r.T @ r, np.eye(n), atol=1e-12)


@given(net_strategy, st.integers(0, 2**31))
@settings(max_examples=80, deadline=None)
def test_apply_preserves_energy_and_matches_matrix(case, seed):
    n, raw = case
    net = _random_network(raw, n)
    ens = sample_amplitudes(ModelParams(0.4, -1.0, 2.0), n, RandomSource(seed))
    out = apply_network(ens, net)
    r = network_matrix(net, n)
    assert_allclose(out.a, r @ ens.a, atol=1e-12)
    assert_allclose(out.b, r @ ens.b, atol=1e-12)
    before = np.sum(ens.a**2 + ens.b**2)
    after = np.sum(out.a**2 + out.b**2)
    assert after == pytest.approx(before, rel=1e-10)


def test_apply_op_leaves_input_untouched():
    ens = AmplitudeEnsemble(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    out = apply_op(ens, BeamSplitterOp(1, 2, math.pi / 4))
    assert ens.a[0] == 1.0 and ens.b[1] == 1.0
    assert out.a[0] == pytest.approx(math.sqrt(0.5))
    with pytest.raises(ValueError):
        apply_op(ens, BeamSplitterOp(1, 3, 0.0))


def test_cascade_concentrates_the_mean():
    for n in (2, 3, 5, 8):
        net = cascade_network(n)
        assert len(net.ops) == n - 1
        r = network_matrix(net, n)
        assert_allclose(r[0], np.full(n, 1.0 / math.sqrt(n)), atol=1e-12)
    with pytest.raises(ValueError):
        cascade_network(1)


def test_tree_stage_enumeration_m3():
    stages = tree_stages(3)
    assert stages == [
        [(1, 2), (3, 4), (5, 6), (7, 8)],
        [(1, 3), (5, 7)],
        [(1, 5)],
    ]
    assert tree_stages(3, 0) == []
    assert tree_stages(3, 2) == stages[:2]
    with pytest.raises(ValueError):
        tree_stages(3, 4)
    with pytest.raises(ValueError):
        tree_stages(-1)


def test_full_tree_concentrates_the_mean():
    for m in (1, 2, 4):
        n = 1 << m
        net = binary_tree_network(m)
        assert len(net.ops) == n - 1
        assert all(op.tau == math.pi / 4.0 for op in net.ops)
        r = network_matrix(net, n)
        assert_allclose(r[0], np.full(n, 1.0 / math.sqrt(n)), atol=1e-12)


def test_truncated_tree_concentrates_blockwise():
    m, m0 = 3, 2
    r = network_matrix(binary_tree_network(m, stages=m0), 1 << m)
    # leaders 1 and 5 hold the means of their 4-mode blocks
    assert_allclose(r[0, :4], np.full(4, 0.5), atol=1e-12)
    assert_allclose(r[0, 4:], np.zeros(4), atol=1e-12)
    assert_allclose(r[4, 4:], np.full(4, 0.5), atol=1e-12)
    assert_allclose(r[4, :4], np.zeros(4), atol=1e-12)


def test_truncation_zero_is_identity():
    r = network_matrix(binary_tree_network(3, stages=0), 8)
    assert_allclose(r, np.eye(8), atol=0.0)


def test_perturb_noiseless_is_identity_map():
    net = binary_tree_network(2)
    out = perturb(net, NoiseSpec(0.0), RandomSource(3))
    assert out == net


def test_perturb_statistics_and_determinism():
    net = binary_tree_network(2)  # 3 ops
    eps = 0.5
    draws = []
    for k in range(4000):
        p = perturb(net, NoiseSpec(eps), RandomSource(77, k))
        draws.extend(op.tau - math.pi / 4.0 for op in p.ops)
    draws = np.array(draws)
    assert np.mean(draws) == pytest.approx(0.0, abs=0.02)
    assert np.var(draws) == pytest.approx(eps * math.log(2.0), rel=0.05)
    again = perturb(net, NoiseSpec(eps), RandomSource(77, 0))
    assert again == perturb(net, NoiseSpec(eps), RandomSource(77, 0))


def test_network_text_round_trip():
    net = binary_tree_network(2) + Network((BeamSplitterOp(2, 4, -1.25),))
    text = network_to_text(net)
    assert network_from_text(text) == net
    assert network_from_text("") == Network(())
    assert network_from_text("\n 1,2,0.5 \n\n") == Network(
        (BeamSplitterOp(1, 2, 0.5),)
    )
    with pytest.raises(ValueError):
        network_from_text("1,2\n")


def test_matrix_rejects_small_n():
    with pytest.raises(ValueError):
        network_matrix(binary_tree_network(2), 3)
    with pytest.raises(ValueError):
        apply_network(
            sample_amplitudes(ModelParams(0, 0, 1), 2, RandomSource(0)),
            binary_tree_network(2),
        )
