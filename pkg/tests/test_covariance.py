import math

import numpy as np
import pytest
from scipy import integrate

from stochwave.covariance import (
    SpectralMeasure,
    admissibility_integral,
    ball_volume,
    spectral_density,
    sphere_surface_area,
)
from stochwave.lattice import Grid
from stochwave.stochint import Mollifier


def test_white_density_value():
    m = SpectralMeasure.white(1)
    assert spectral_density(m, 3.7) == pytest.approx(1.0 / (2 * np.pi), rel=1e-12)


def test_density_even():
    for m in (SpectralMeasure.white(2), SpectralMeasure.riesz(2, 1.0)):
        eta = np.array([0.7, -1.3])
        assert spectral_density(m, eta) == pytest.approx(spectral_density(m, -eta), rel=1e-14)


def test_riesz_construction_bounds():
    with pytest.raises(ValueError):
        SpectralMeasure.riesz(2, 2.0)  # alpha must be < d
    with pytest.raises(ValueError):
        SpectralMeasure.riesz(2, 0.0)
    with pytest.raises(ValueError):
        SpectralMeasure.riesz(1, 0.5, scale=-1.0)


def test_riesz_singular_at_origin():
    m = SpectralMeasure.riesz(2, 1.0)
    with pytest.raises(ValueError, match="singular"):
        spectral_density(m, np.zeros(2))


def test_riesz_normalization_against_closed_form():
    # independent oracle: F[|x|^-b] = 2^(d-b) pi^(d/2) G((d-b)/2)/G(b/2) |xi|^(b-d)
    for d, alpha in ((1, 0.5), (2, 1.0), (3, 1.4)):
        m = SpectralMeasure.riesz(d, alpha)
        closed = 2.0**(-alpha) * math.pi**(-d / 2) \
            * math.gamma((d - alpha) / 2) / math.gamma(alpha / 2)
        assert m.riesz_constant == pytest.approx(closed, rel=1e-9)
    # the d=2, alpha=1 case pins the density example at |eta| = 2
    m = SpectralMeasure.riesz(2, 1.0)
    assert spectral_density(m, np.array([2.0, 0.0])) == pytest.approx(m.riesz_constant / 2.0, rel=1e-12)


def _gauss_transform_sq(d, sigma):
    # |F[exp(-|x|^2/(2 s^2))]|^2 = (2 pi s^2)^d exp(-s^2 |eta|^2)
    return lambda r: (2 * np.pi * sigma**2) ** d * np.exp(-(sigma**2) * r**2)


@pytest.mark.parametrize("d,sigma", [(1, 0.7), (1, 1.0), (1, 1.6), (2, 1.0), (2, 0.8)])
def test_pairing_identity_white_gaussian(d, sigma):
    # E F(phi)^2 both ways: (phi * phi~)(0) vs spectral integral of |F phi|^2
    lhs = (math.pi * sigma**2) ** (d / 2)  # integral of phi^2
    surf = sphere_surface_area(d)
    dens = 1.0 / (2 * np.pi) ** d
    fsq = _gauss_transform_sq(d, sigma)
    rhs, _ = integrate.quad(lambda r: dens * fsq(r) * surf * r ** (d - 1), 0, np.inf)
    assert abs(lhs - rhs) < 1e-6 * lhs


@pytest.mark.parametrize("d,alpha,sigma", [(1, 0.5, 1.0), (2, 1.0, 1.0), (2, 1.5, 0.8)])
def test_pairing_identity_riesz_gaussian(d, alpha, sigma):
    # left: integral |x|^-alpha (phi * phi~)(x) dx with phi * phi~ a
    # Gaussian of width sigma*sqrt(2); right: spectral quadrature.
    m = SpectralMeasure.riesz(d, alpha)
    surf = sphere_surface_area(d)
    conv_amp = (math.pi * sigma**2) ** (d / 2)  # (phi * phi~)(x) = amp exp(-|x|^2/(4 s^2))
    lhs, _ = integrate.quad(
        lambda r: r ** (-alpha) * conv_amp * np.exp(-r * r / (4 * sigma**2)) * surf * r ** (d - 1),
        0, np.inf)
    fsq = _gauss_transform_sq(d, sigma)
    rhs, _ = integrate.quad(
        lambda r: m.riesz_constant * r ** (alpha - d) * fsq(r) * surf * r ** (d - 1),
        0, np.inf)
    assert abs(lhs - rhs) < 1e-6 * lhs


@pytest.mark.parametrize("kind", ["white", "riesz"])
def test_pairing_identity_smoothed_indicator(kind):
    # compactly supported test function: indicator [-1,1] mollified at
    # scale 4.  Both pairing sides computed by quadrature; the r^(-1/2)
    # factors are removed by the substitution r = s^2.
    moll = Mollifier(4, 1)
    xs = np.linspace(-2.0, 2.0, 2**13 + 1)
    dx = xs[1] - xs[0]
    psi = 4.0 * moll.bump(4.0 * xs)
    psi /= np.trapezoid(psi, xs)
    indicator = (np.abs(xs) <= 1.0).astype(float)
    phi = np.convolve(indicator, psi, mode="same") * dx
    conv_x = np.linspace(-4.0, 4.0, 2 * len(xs) - 1)
    conv = np.convolve(phi, phi[::-1]) * dx  # (phi * phi~) on conv_x

    nodes, wts = np.polynomial.legendre.leggauss(400)

    def fphi_at(eta_val):
        x = 0.65 * nodes + 0.65  # Gauss-Legendre on [0, 1.3] covers supp phi
        return 2.0 * 0.65 * np.sum(wts * np.interp(x, xs, phi) * np.cos(eta_val * x))

    if kind == "white":
        lhs = np.interp(0.0, conv_x, conv)
        rhs = (2.0 / (2 * np.pi)) * integrate.quad(lambda e: fphi_at(e) ** 2, 0, 80, limit=400)[0]
    else:
        m = SpectralMeasure.riesz(1, 0.5)
        # integral |x|^(-1/2) conv(x) dx, substitution x = s^2
        lhs = 2.0 * integrate.quad(
            lambda s: 2.0 * np.interp(s * s, conv_x, conv), 0, np.sqrt(3.0), limit=400)[0]
        rhs = 2.0 * m.riesz_constant * integrate.quad(
            lambda s: 2.0 * fphi_at(s * s) ** 2, 0, np.sqrt(80.0), limit=400)[0]
    assert abs(lhs - rhs) < 1e-6 * abs(lhs)


def test_admissibility_white_d1_k1_value():
    report = admissibility_integral(SpectralMeasure.white(1), 1)
    assert report.finite and report.verdict
    assert report.value == pytest.approx(0.5, rel=1e-10)


def test_admissibility_white_d2_k1_divergent():
    report = admissibility_integral(SpectralMeasure.white(2), 1)
    assert not report.finite and not report.verdict
    assert math.isinf(report.value)


def test_admissibility_monotone_in_k():
    m = SpectralMeasure.riesz(3, 1.0)
    values = [admissibility_integral(m, k).value for k in (1, 2, 3)]
    assert values[0] > values[1] > values[2]


@pytest.mark.parametrize("k", [1, 2])
def test_admissibility_riesz_threshold_sweep(k):
    d = 4
    for alpha in np.arange(0.5, 3.6, 0.5):
        report = admissibility_integral(SpectralMeasure.riesz(d, float(alpha)), k)
        assert report.finite == (alpha < 2 * k)


def test_radial_table_tail_required():
    m = SpectralMeasure.radial_table(1, [0.1, 1.0, 10.0], [1.0, 0.5, 0.1])
    with pytest.raises(ValueError, match="tail exponent required"):
        admissibility_integral(m, 1)


def test_radial_table_verdicts_and_interpolation():
    radii = np.array([0.1, 1.0, 10.0])
    dens = np.array([1.0, 0.5, 0.1])
    heavy = SpectralMeasure.radial_table(1, radii, dens, tail_exponent=1.5)
    light = SpectralMeasure.radial_table(1, radii, dens, tail_exponent=-3.0)
    assert not admissibility_integral(heavy, 1).finite
    assert admissibility_integral(light, 1).finite
    # log-radius interpolation hits the table nodes exactly
    assert light.radial_density(1.0) == pytest.approx(0.5)
    mid = light.radial_density(np.sqrt(0.1 * 1.0))  # halfway in log r
    assert mid == pytest.approx(0.75, rel=1e-12)
    # declared power tail beyond the last sample
    assert light.radial_density(20.0) == pytest.approx(0.1 * 2.0**-3, rel=1e-12)


def test_radial_table_validation():
    with pytest.raises(ValueError):
        SpectralMeasure.radial_table(1, [1.0, 0.5], [1.0, 1.0])  # not increasing
    with pytest.raises(ValueError):
        SpectralMeasure.radial_table(1, [0.5, 1.0], [1.0, -1.0])  # negative density


def test_lattice_weights_white_and_riesz_zero_cell():
    g = Grid(2, 16, 8.0)
    white = SpectralMeasure.white(2)
    w = white.lattice_weights(g)
    assert np.allclose(w, g.dual_cell_volume / (2 * np.pi) ** 2)

    m = SpectralMeasure.riesz(2, 1.0)
    weights = m.lattice_weights(g)
    # zero cell: average of the density over the ball of equal volume,
    # checked against direct radial quadrature
    rho = (2 * np.pi / g.box_length) / ball_volume(2) ** 0.5
    direct, _ = integrate.quad(
        lambda r: m.riesz_constant * r ** (1.0 - 2.0) * 2 * np.pi * r, 0, rho)
    expected = g.dual_cell_volume * direct / (ball_volume(2) * rho**2)
    assert weights.ravel()[0] == pytest.approx(expected, rel=1e-10)
    assert np.all(weights > 0)
