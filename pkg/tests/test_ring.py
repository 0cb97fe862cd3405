"""Closed-ring spectral analysis."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stringstab import (
    IdmParams,
    LinearCoeffs,
    homogeneous_ring_roots,
    hinf_second_order,
    linearize,
    ring_asymptotically_stable,
    ring_matrix,
    string_stability_coefficient,
)
from stringstab.errors import SystemSizeError
from stringstab.ring import MAX_DENSE_SIZE, RingSystem, dump_spectrum_csv


def match_multisets(x, y, tol=1e-8):
    """Greedy nearest-neighbour pairing of two complex multisets."""
    x, y = list(x), list(y)
    assert len(x) == len(y)
    for v in x:
        dists = [abs(v - w) for w in y]
        k = int(np.argmin(dists))
        if dists[k] > tol:
            return False
        y.pop(k)
    return True


def homogeneous_coeffs():
    return st.builds(
        lambda a, b, T, v: linearize(
            IdmParams(a=a, b=b, T=T, s0=2.0, v_max=33.0), v
        ),
        a=st.floats(0.3, 3.0),
        b=st.floats(0.3, 3.0),
        T=st.floats(0.3, 3.0),
        v=st.floats(1.0, 29.0),
    )


class TestAssembly:
    def test_block_layout(self, c2):
        sys = ring_matrix([c2] * 3)
        a = sys.a_c
        assert a.shape == (6, 6)
        # diagonal self blocks
        for n in range(3):
            assert np.array_equal(
                a[2 * n : 2 * n + 2, 2 * n : 2 * n + 2],
                [[0.0, -1.0], [c2.f2, c2.f1 - c2.f3]],
            )
        # vehicle 1 is coupled to vehicle m in the top-right corner
        assert np.array_equal(a[0:2, 4:6], [[0.0, 1.0], [0.0, c2.f3]])
        # subdiagonal leader couplings
        assert np.array_equal(a[2:4, 0:2], [[0.0, 1.0], [0.0, c2.f3]])

    def test_too_small_ring_rejected(self, c2):
        with pytest.raises(ValueError):
            ring_matrix([c2])

    def test_structural_zero_eigenvalue(self, c2, c3):
        sys = ring_matrix([c2, c3, c2])
        eigs = np.linalg.eigvals(sys.a_c)
        assert np.min(np.abs(eigs)) < 1e-10


class TestHomogeneousRoots:
    @given(c=homogeneous_coeffs(), m=st.integers(2, 8))
    @settings(max_examples=40, deadline=None)
    def test_roots_match_spectrum(self, c, m):
        sys = ring_matrix([c] * m)
        eigs = np.linalg.eigvals(sys.a_c)
        roots = homogeneous_ring_roots(c, m)
        scale = max(1.0, np.max(np.abs(eigs)))
        assert match_multisets(eigs, roots, tol=1e-8 * scale)

    def test_k0_factor_contains_translation_mode(self, c2):
        roots = homogeneous_ring_roots(c2, 5)
        assert min(abs(r) for r in roots) < 1e-12


class TestStability:
    def test_remark_witness(self):
        # string-unstable open chain whose closed ring is still stable
        c = LinearCoeffs(-0.075, 0.091, 0.55)
        assert hinf_second_order(c)[0] > 1.0
        assert ring_asymptotically_stable(ring_matrix([c] * 3))

    def test_unstable_ring_detected(self):
        # an anti-damped vehicle destabilises the closed loop
        c = LinearCoeffs(0.5, 0.1, 0.1)
        assert not ring_asymptotically_stable(ring_matrix([c] * 3))

    @given(c=homogeneous_coeffs())
    @settings(max_examples=25, deadline=None)
    def test_strict_stability_implies_large_ring_stability(self, c):
        if string_stability_coefficient(c) >= 0.0:
            assert ring_asymptotically_stable(ring_matrix([c] * 32))

    def test_large_homogeneous_ring_uses_closed_form(self, c3):
        m = MAX_DENSE_SIZE + 10
        sys = RingSystem([c3] * m, np.zeros((0, 0)))
        assert ring_asymptotically_stable(sys)

    def test_large_heterogeneous_ring_refused(self, c2, c3):
        m = MAX_DENSE_SIZE + 2
        sys = RingSystem([c2, c3] * (m // 2), np.zeros((0, 0)))
        with pytest.raises(SystemSizeError):
            ring_asymptotically_stable(sys)


def test_spectrum_csv(tmp_path, c2):
    sys = ring_matrix([c2] * 4)
    dump_spectrum_csv(sys, tmp_path / "spec.csv")
    rows = (tmp_path / "spec.csv").read_text().splitlines()
    assert rows[0] == "re,im"
    assert len(rows) == 1 + 8
