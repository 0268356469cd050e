import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stokespatch.errors import ConfigError, GridMismatchError, SymmetryError
from stokespatch.fields import (
    ScalarField,
    SpectralField,
    VectorField,
    forward_transform,
    gaussian_filter,
    heaviside_indicator,
    inverse_transform,
    make_grid,
    read_snapshot,
    require_same_grid,
    write_snapshot,
)

sizes = st.sampled_from([8, 16, 32, 64])


def test_grid_n8_spacing_and_corner():
    g = make_grid(8)
    assert g.h == 0.125
    x1, x2 = g.coords
    assert (x1[0, 0], x2[0, 0]) == (-0.5, -0.5)
    assert (x1[4, 4], x2[4, 4]) == (0.0, 0.0)


def test_grid_n1024_spacing():
    g = make_grid(1024)
    assert g.h == 0.0009765625
    assert g.h * g.n == 1.0


@pytest.mark.parametrize("bad", [12, 4, 0, -8, 2.0, True])
def test_grid_rejects_bad_sizes(bad):
    with pytest.raises(ConfigError):
        make_grid(bad)


def test_fields_validate_shape_and_are_read_only():
    g = make_grid(8)
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros((8, 4)))
    with pytest.raises(ValueError):
        VectorField(g, np.zeros((8, 8)))
    f = ScalarField(g, np.zeros((8, 8)))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_constant_transforms_to_unit_zero_mode():
    g = make_grid(16)
    F = forward_transform(ScalarField(g, np.ones((16, 16))))
    assert abs(F.coeff(0, 0) - 1) < 1e-12
    rest = F.coefficients.copy()
    rest[0, 0] = 0
    assert np.max(np.abs(rest)) < 1e-12


def test_cosine_has_half_coefficients():
    g = make_grid(32)
    x1, _ = g.coords
    F = forward_transform(ScalarField(g, np.cos(2 * np.pi * x1)))
    assert abs(F.coeff(1, 0) - 0.5) < 1e-12
    assert abs(F.coeff(-1, 0) - 0.5) < 1e-12
    rest = F.coefficients.copy()
    rest[1, 0] = rest[-1, 0] = 0
    assert np.max(np.abs(rest)) < 1e-12


def test_definition_matches_direct_sum(rng):
    g = make_grid(8)
    f = rng.standard_normal((8, 8))
    F = forward_transform(ScalarField(g, f))
    x1, x2 = g.coords
    for m in [(0, 0), (1, 2), (-3, 1), (-4, -4)]:
        k = 2 * np.pi * np.array(m)
        direct = g.h**2 * np.sum(f * np.exp(-1j * (k[0] * x1 + k[1] * x2)))
        assert abs(F.coeff(*m) - direct) < 1e-13


@given(sizes, st.integers(0, 2**32 - 1))
def test_round_trip_parseval_and_symmetry(n, seed):
    g = make_grid(n)
    f = np.random.default_rng(seed).standard_normal((n, n))
    F = forward_transform(ScalarField(g, f))
    assert F.symmetry_defect() < 1e-12
    back = inverse_transform(F).values
    assert np.max(np.abs(back - f)) < 1e-12
    lhs = g.h**2 * np.sum(f**2)
    assert abs(lhs - np.sum(np.abs(F.coefficients) ** 2)) <= 1e-10 * lhs


def test_round_trip_large_grid(rng):
    g = make_grid(1024)
    f = rng.standard_normal((1024, 1024))
    assert np.max(np.abs(inverse_transform(forward_transform(ScalarField(g, f))).values - f)) < 1e-12


def test_single_mode_inverse_is_cosine():
    g = make_grid(16)
    c = np.zeros((16, 16), complex)
    c[1, 0] = c[-1, 0] = 0.5
    x1, _ = g.coords
    assert np.max(np.abs(inverse_transform(SpectralField(g, c)).values - np.cos(2 * np.pi * x1))) < 1e-12


def test_broken_symmetry_raises():
    g = make_grid(16)
    c = np.zeros((16, 16), complex)
    c[1, 0] = 0.5
    with pytest.raises(SymmetryError):
        inverse_transform(SpectralField(g, c))
    # lenient mode keeps the real part
    x1, _ = g.coords
    lenient = inverse_transform(SpectralField(g, c), strict=False).values
    assert np.allclose(lenient, 0.5 * np.cos(2 * np.pi * x1))


def test_heaviside_tie_rule_and_values():
    g = make_grid(8)
    assert np.all(heaviside_indicator(ScalarField(g, -np.ones((8, 8)))).values == 0)
    v = np.linspace(-1, 1, 64).reshape(8, 8)
    v[3, 3] = 0.0
    theta = heaviside_indicator(ScalarField(g, v)).values
    assert theta[3, 3] == 0.5
    assert set(np.unique(theta)) <= {0.0, 0.5, 1.0}
    assert np.all(theta[v > 0] == 1) and np.all(theta[v < 0] == 0)


def _periodic_distance(g, c):
    x1, x2 = g.coords
    d1 = np.mod(x1 - c[0] + 0.5, 1.0) - 0.5
    d2 = np.mod(x2 - c[1] + 0.5, 1.0) - 0.5
    return np.hypot(d1, d2)


def test_heaviside_of_cosine_levelset_is_quarter_radius_disc():
    g = make_grid(64)
    r = _periodic_distance(g, (0.5, 0.5))
    theta = heaviside_indicator(ScalarField(g, np.cos(2 * np.pi * r))).values
    off = np.abs(r - 0.25) > 1e-12
    assert np.all(theta[off] == (r[off] < 0.25))


def test_gaussian_filter_identity_constant_and_value():
    g = make_grid(16)
    rng = np.random.default_rng(0)
    F = forward_transform(ScalarField(g, rng.standard_normal((16, 16))))
    assert gaussian_filter(F, 0.0) is F
    const = forward_transform(ScalarField(g, np.full((16, 16), 3.0)))
    assert np.allclose(gaussian_filter(const, 5.0).coefficients, const.coefficients)
    x1, _ = g.coords
    cosF = forward_transform(ScalarField(g, np.cos(2 * np.pi * x1)))
    factor = gaussian_filter(cosF, 1.0).coeff(1, 0) / cosF.coeff(1, 0)
    assert math.isclose(factor.real, math.exp(-2 * math.pi**2), rel_tol=1e-12)
    assert math.isclose(math.exp(-2 * math.pi**2), 2.675e-9, rel_tol=1e-3)
    with pytest.raises(ConfigError):
        gaussian_filter(F, -0.1)


def test_gaussian_filter_matches_real_space_convolution():
    # periodic images of a sampled Gaussian of width eps, convolved by FFT
    n, eps = 128, 0.03
    g = make_grid(n)
    rng = np.random.default_rng(1)
    f = rng.standard_normal((n, n))
    F = forward_transform(ScalarField(g, f))
    spectral = inverse_transform(gaussian_filter(F, eps)).values

    x1, x2 = g.coords
    kern = np.zeros((n, n))
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            kern += np.exp(-((x1 + a) ** 2 + (x2 + b) ** 2) / (2 * eps**2))
    kern *= g.h**2 / (2 * np.pi * eps**2)
    kern = np.roll(kern, (-n // 2, -n // 2), axis=(0, 1))  # centre at index 0
    direct = np.real(np.fft.ifft2(np.fft.fft2(f) * np.fft.fft2(kern)))
    assert np.max(np.abs(direct - spectral)) < 1e-8


@given(st.floats(0, 0.2), st.floats(0, 0.2))
def test_gaussian_filter_monotone_in_eps(a, b):
    g = make_grid(16)
    F = forward_transform(ScalarField(g, np.random.default_rng(3).standard_normal((16, 16))))
    lo, hi = sorted((a, b))
    m_lo = np.abs(gaussian_filter(F, lo).coefficients)
    m_hi = np.abs(gaussian_filter(F, hi).coefficients)
    assert np.all(m_hi <= m_lo + 1e-15)
    assert np.max(m_hi) <= np.max(np.abs(F.coefficients))


def test_grid_mismatch():
    with pytest.raises(GridMismatchError):
        require_same_grid(ScalarField(make_grid(8), np.zeros((8, 8))), ScalarField(make_grid(16), np.zeros((16, 16))))


def test_snapshot_round_trip_is_bit_exact(tmp_path, rng):
    g = make_grid(16)
    f = ScalarField(g, rng.standard_normal((16, 16)))
    path = tmp_path / "a.pstk"
    write_snapshot(path, f, 1.25)
    data = path.read_bytes()
    assert data[:8] == b"PSTK0001"
    assert len(data) == 8 + 4 + 8 + 8 * 256
    back, t = read_snapshot(path)
    assert t == 1.25
    assert back.values.tobytes() == f.values.tobytes()
    assert not list(tmp_path.glob("*.tmp"))


def test_snapshot_rejects_garbage(tmp_path):
    p = tmp_path / "bad.pstk"
    p.write_bytes(b"NOTASNAP" + bytes(20))
    with pytest.raises(ConfigError):
        read_snapshot(p)
    p.write_bytes(b"PSTK0001" + (8).to_bytes(4, "little") + bytes(8) + bytes(10))
    with pytest.raises(ConfigError):
        read_snapshot(p)
