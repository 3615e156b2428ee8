import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zlab.errors import DegenerateSampleError, DomainError
from zlab.maps import (
    MapParams,
    dilatation_sample,
    inverse_branch_G,
    inverse_branch_H,
    inverse_branch_Z,
    log_abs_G,
    log_abs_Z,
    log_abs_f,
    map_f,
    map_G,
    map_H,
    pyramid_h,
    shear_phi,
    zorich_Z,
    zorich_Z_logmag,
)

SQ3 = math.sqrt(3.0)


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.linalg.norm(a - b, axis=-1) / np.maximum(np.linalg.norm(b, axis=-1), 1.0)


class TestPyramid:
    def test_examples(self):
        assert pyramid_h(0, 0).tolist() == [0, 0, 1]
        assert pyramid_h(1, 0).tolist() == [1, 0, 0]
        assert pyramid_h(0.5, -0.25).tolist() == [0.5, -0.25, 0.5]

    def test_outside(self):
        with pytest.raises(DomainError):
            pyramid_h(1.5, 0)

    @given(st.floats(-1, 1), st.floats(-1, 1))
    def test_norm_band(self, a, b):
        n = np.linalg.norm(pyramid_h(a, b))
        assert 1 / math.sqrt(2) - 1e-12 <= n <= math.sqrt(2) + 1e-12


class TestZorich:
    def test_examples(self):
        assert np.allclose(zorich_Z(np.zeros(3)), [0, 0, 1])
        assert np.allclose(zorich_Z(np.array([0, 0, 10.0])), [0, 0, math.exp(10)])
        assert np.allclose(zorich_Z(np.array([2.0, 0, 0])), [0, 0, -1])

    def test_overflow_needs_logmag(self):
        with pytest.raises(DomainError):
            zorich_Z(np.array([0, 0, 800.0]))
        d, m = zorich_Z_logmag(np.array([0, 0, 800.0]))
        assert m == m.from_log(800.0) and np.allclose(d, [0, 0, 1])

    def test_boundary_third_coordinate_zero(self):
        rng = np.random.default_rng(1)
        for s in [(0, 0), (1, 0), (-2, 3)]:
            t = rng.uniform(-1, 1, 1000)
            x = np.column_stack([2 * s[0] + 1 + 0 * t, 2 * s[1] + t, rng.uniform(-5, 5, 1000)])
            assert np.all(np.abs(zorich_Z(x)[:, 2]) <= 1e-12 * np.exp(x[:, 2]))

    def test_modulus_band(self):
        x = np.random.default_rng(2).uniform(-20, 20, (1000, 3))
        lz = log_abs_Z(x)
        assert np.all(lz >= x[:, 2] - 0.5 * math.log(2) - 1e-12)
        assert np.all(lz <= x[:, 2] + 0.5 * math.log(2) + 1e-12)

    def test_even_beams_upper_half(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(-1, 1, (500, 3))
        x[:, 0] += 4
        x[:, 1] += 2  # s = (2, 1): odd parity
        assert np.all(zorich_Z(x)[:, 2] <= 0)
        x[:, 1] += 2  # s = (2, 2)
        assert np.all(zorich_Z(x)[:, 2] >= 0)


class TestShearAndH:
    def test_shear(self):
        assert shear_phi(np.array([1, 1, 3.0])).tolist() == [1, 1, 1]
        assert shear_phi(np.array([1, 1, 1.0]), "inverse").tolist() == [1, 1, 3]
        assert shear_phi(np.array([0, 0, 7.0])).tolist() == [0, 0, 7]

    def test_H_examples(self):
        assert np.allclose(map_H(np.array([0, 0, 10.0])), [0, 0, math.exp(10)])
        assert np.linalg.norm(map_H(np.array([5, 5, 0.0]))) == pytest.approx(math.sqrt(2) * math.exp(-10))
        assert np.allclose(map_H(np.array([1, 0, 5.0])), [math.exp(4), 0, 0])

    def test_H_bounded_off_omega(self):
        x = np.random.default_rng(0).uniform(-50, 50, (5000, 3))
        x = x[x[:, 2] <= np.abs(x[:, 0]) + np.abs(x[:, 1])]
        assert np.all(np.linalg.norm(map_H(x), axis=1) <= math.sqrt(2) + 1e-12)


class TestG:
    def test_identity_below(self, params):
        assert map_G(np.array([1, 2, -3.0]), params).tolist() == [1, 2, -3]

    def test_axis(self, params):
        R = 10.0
        assert np.allclose(map_G(np.array([0, 0, R]), params), [0, 0, R + math.exp(R)])

    def test_ramp(self, params):
        x = np.array([0.3, -0.2, params.L / 2])
        assert np.allclose(map_G(x, params), x + 0.5 * zorich_Z(x))

    def test_displacement_bound(self, params):
        x = np.random.default_rng(4).uniform(-30, params.L, (5000, 3))
        d = np.linalg.norm(map_G(x, params) - x, axis=1)
        assert np.all(d <= math.sqrt(2) * math.exp(params.L) * (1 + 1e-12))

    def test_injectivity_witness(self, params):
        rng = np.random.default_rng(6)
        x = np.column_stack([rng.uniform(-1, 1, (10_000, 2)), rng.uniform(params.L, 8, 10_000)])
        y = np.column_stack([rng.uniform(-1, 1, (10_000, 2)), rng.uniform(params.L, 8, 10_000)])
        dG = np.linalg.norm(map_G(x, params) - map_G(y, params), axis=1)
        dZ = np.linalg.norm(zorich_Z(x) - zorich_Z(y), axis=1)
        assert np.all(dG > 0)
        assert np.all(dG >= dZ - np.linalg.norm(x - y, axis=1) - 1e-9 * dZ)


class TestF:
    def test_singleton(self, net_single):
        x = np.array([4, 4, 2.0])
        assert np.allclose(map_f(x, net_single), map_H(x))

    def test_axis(self, net_single, params):
        x = np.array([0, 0, 5.0])
        assert np.allclose(map_f(x, net_single, params), map_G(np.array([0, 0, math.exp(5)]), params))
        # at x3 = 10 only the log-magnitude is representable
        y = np.array([[0, 0, 10.0]])
        assert log_abs_f(y, net_single, params)[0] == pytest.approx(log_abs_G(map_H(y), params)[0], rel=1e-12)

    def test_boundary(self, net_half, params):
        x = np.array([1, 0, 5.0])
        a = map_f(x, net_half, params)
        assert np.allclose(a, [math.exp(4), 0, 0])
        assert np.allclose(map_f(x + [1e-13, 0, 0], net_half, params), a)


class TestInverses:
    def test_Z_examples(self):
        assert np.allclose(inverse_branch_Z(np.array([0, 0, math.e]), (0, 0)), [0, 0, 1])
        assert np.allclose(inverse_branch_Z(np.array([math.exp(4), 0, 0]), (0, 0)), [1, 0, 4])

    def test_Z_errors(self):
        with pytest.raises(DomainError):
            inverse_branch_Z(np.zeros(3), (0, 0))
        with pytest.raises(DomainError):
            inverse_branch_Z(np.array([0, 0, 1.0]), (1, 0))

    def test_H_examples(self):
        assert np.allclose(inverse_branch_H(np.array([0, 0, math.exp(8)]), (0, 0)), [0, 0, 8])
        assert np.allclose(inverse_branch_H(np.array([0, 0, math.exp(4)]), (1, 1)), [2, 2, 8])

    def test_G_examples(self, params):
        R = 10.0
        assert np.allclose(inverse_branch_G(np.array([0, 0, R + math.exp(R)]), (0, 0), params), [0, 0, R])
        with pytest.raises(DomainError):
            inverse_branch_G(np.array([0, 0, 0.5]), (0, 0), params)

    @pytest.mark.parametrize("s", [(0, 0), (3, -1), (-2, 4)])
    def test_round_trips(self, s, params):
        rng = np.random.default_rng(7)
        x = np.column_stack([2 * s[0] + rng.uniform(-0.99, 0.99, 1000), 2 * s[1] + rng.uniform(-0.99, 0.99, 1000),
                             rng.uniform(-10, 10, 1000)])
        assert np.max(rel(inverse_branch_Z(zorich_Z(x), s), x)) < 1e-9
        xh = x.copy()
        xh[:, 2] += np.abs(xh[:, 0]) + np.abs(xh[:, 1])
        assert np.max(rel(inverse_branch_H(map_H(xh), s), xh)) < 1e-9
        xg = x.copy()
        xg[:, 2] = rng.uniform(params.L + 3, 30, 1000)
        if (s[0] + s[1]) % 2 == 0:
            for p in xg[:50]:
                y = map_G(p, params)
                assert rel(map_G(inverse_branch_G(y, s, params), params), y) < 1e-9


class TestDilatation:
    def test_phi_ratio(self):
        j = dilatation_sample("phi", np.array([0.3, -0.7, 2.0]))
        assert j.ratio == pytest.approx(2 + SQ3, rel=1e-6)
        assert j.ratio ** 2 == pytest.approx((2 + SQ3) / (2 - SQ3), rel=1e-6)

    def test_G_identity_region(self, params):
        j = dilatation_sample("G", np.array([0.2, 0.1, -3.0]), params=params)
        assert j.opnorm == pytest.approx(1) and j.minnorm == pytest.approx(1) and j.KO_est == pytest.approx(1)

    def test_Z_vertical_scaling(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            x = np.array([rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), rng.uniform(0, 5)])
            if abs(abs(x[0]) - abs(x[1])) < 1e-3:
                continue
            a = np.linalg.norm(zorich_Z(x)) / dilatation_sample("Z", x).opnorm
            y = x + [0, 0, 2.0]
            b = np.linalg.norm(zorich_Z(y)) / dilatation_sample("Z", y).opnorm
            assert a == pytest.approx(b, rel=1e-5)

    def test_crease_rejected(self):
        with pytest.raises(DomainError):
            dilatation_sample("Z", np.array([1.0, 0.2, 0.0]))

    def test_degenerate(self):
        with pytest.raises(DegenerateSampleError):
            dilatation_sample(lambda x: np.column_stack([x[:, 0], x[:, 0], x[:, 2]]), np.array([0.1, 0.2, 0.3]))

    def test_G_distortion_band(self, params):
        rng = np.random.default_rng(9)
        ks = []
        for _ in range(40):
            x = np.array([rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), rng.uniform(5, 50)])
            if abs(abs(x[0]) - abs(x[1])) < 1e-2:
                continue
            j = dilatation_sample("G", x, params=params)
            assert j.minnorm <= j.opnorm and j.KO_est >= 1 - 1e-6
            ks.append(j.KO_est)
        assert max(ks) < 100


MIXED = MapParams(L=3.0)


def test_params_parameterized_L():
    x = np.array([0.1, 0.1, 1.5])
    assert np.allclose(map_G(x, MIXED), x + 0.5 * zorich_Z(x))


def test_f_continuity_across_beam_boundaries(net_half, params):
    rng = np.random.default_rng(10)
    s = net_half.points[rng.integers(0, 200, 2000)]
    t = rng.uniform(-1, 1, 2000)
    x = np.column_stack([2 * s[:, 0] + 1.0, 2 * s[:, 1] + t, rng.uniform(-5, 8, 2000)])
    x[:, 2] += np.abs(x[:, 0]) + np.abs(x[:, 1])
    eps = np.array([1e-12, 0, 0])
    a, b = map_f(x - eps, net_half, params), map_f(x + eps, net_half, params)
    assert np.max(rel(a, b)) < 1e-9
