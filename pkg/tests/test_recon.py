"""Filters, rebinning, convolution backprojection, and the transformers."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gammact import (DiscSpec, FanGeometry, GridSpec, Phantom,
                     FBPReconstructor, FanToParallelRebinner, FilterSpec,
                     HAMMING_FILTERS, ParallelSinogram, fbp, filter_kernel,
                     get_filter, ideal_sinogram, paper_geometry, paper_phantom,
                     rebin_fan_to_parallel, reconstruct_all, sample_scan,
                     counts_to_projection)
from gammact.detector import DetectorModel

DISC = Phantom(DiscSpec(0.0, 0.0, 6.0, 0.096))


def _dense_fan(n_det=64, n_views=360):
    return FanGeometry(26.0, 52.0, 13.25, n_det,
                       tuple(np.arange(n_views) * (360.0 / n_views)))


def test_filter_table_constants():
    expect = {"h99": (0.99, 0.001), "h91": (0.91, 0.083), "h75": (0.75, 0.250),
              "h54": (0.54, 0.460), "h50": (0.50, 0.500)}
    assert set(HAMMING_FILTERS) == set(expect)
    for code, (alpha, w2) in expect.items():
        filt = get_filter(code)
        assert (filt.alpha, filt.w2_0) == (alpha, w2)
        assert filt.code == code


def test_get_filter_unknown_code_lists_valid_codes():
    with pytest.raises(ValueError) as err:
        get_filter("h42")
    for code in HAMMING_FILTERS:
        assert code in str(err.value)


def test_filter_spec_alpha_range():
    with pytest.raises(ValueError, match="alpha"):
        FilterSpec("bad", 0.3, 0.1)


def test_window_endpoints():
    for filt in HAMMING_FILTERS.values():
        assert filt.window(0.0) == pytest.approx(1.0, abs=1e-15)
        assert filt.window(1.0) == pytest.approx(2.0 * filt.alpha - 1.0, abs=1e-12)
    assert get_filter("h50").window(1.0) == pytest.approx(0.0, abs=1e-15)


def test_kernel_zero_frequency_null():
    # DC response of the ramp is zero, so the kernel sums to ~0
    for filt in HAMMING_FILTERS.values():
        k = filter_kernel(filt, 64, 0.2)
        assert abs(k.sum()) < 1e-10


def test_kernel_dft_matches_frequency_response():
    filt = get_filter("h75")
    n, width = 50, 0.15
    k = filter_kernel(filt, n, width)
    assert k.size == 128  # next power of two >= 2n
    q = np.fft.fftfreq(k.size) * 2.0
    expect = np.abs(q) * filt.window(q) / (2.0 * width)
    assert np.allclose(np.real(np.fft.fft(k)), expect, atol=1e-12)


def test_parallel_sinogram_validation():
    thetas = np.arange(4) * 45.0
    with pytest.raises(ValueError, match="uniform"):
        ParallelSinogram(thetas, np.array([-2.0, -0.5, 0.5, 2.0]),
                         np.zeros((4, 4)))
    with pytest.raises(ValueError, match="symmetric"):
        ParallelSinogram(thetas, np.array([0.0, 1.0, 2.0, 3.0]),
                         np.zeros((4, 4)))
    with pytest.raises(ValueError, match="shape"):
        ParallelSinogram(thetas, np.linspace(-1, 1, 5), np.zeros((4, 4)))


def test_rebin_central_ray_identity():
    # s = 0 maps to gamma = 0, theta = beta: values pass through unchanged
    geom = _dense_fan()
    fan = ideal_sinogram(DISC, geom)
    par = rebin_fan_to_parallel(fan, geom, np.arange(8) * 45.0,
                                np.linspace(-1.0, 1.0, 5))
    mid = par.values[:, 2]
    assert np.allclose(mid, 2.0 * 0.096 * 6.0, atol=1e-4)


def test_rebin_matches_analytic_disc_projection():
    geom = _dense_fan()
    fan = ideal_sinogram(DISC, geom)
    s = np.linspace(-2.9, 2.9, 41)
    par = rebin_fan_to_parallel(fan, geom, np.arange(36) * 10.0, s)
    expect = 2.0 * 0.096 * np.sqrt(36.0 - s**2)
    assert np.max(np.abs(par.values - expect[None, :])) <= 0.02 * expect.max()


def test_rebin_zero_fills_outside_fan_support():
    geom = _dense_fan()
    fan = ideal_sinogram(DISC, geom)
    s = np.linspace(-5.0, 5.0, 21)  # fan support is |s| <= 26*sin(6.625 deg)
    par = rebin_fan_to_parallel(fan, geom, np.arange(12) * 30.0, s)
    support = 26.0 * np.sin(np.radians(13.25 / 2.0))
    outside = np.abs(s) > support + 1e-9
    assert np.all(par.values[:, outside] == 0.0)
    assert not par.coverage[:, outside].any()
    assert par.coverage[:, ~outside].all()


def test_rebin_linearity_on_zero_input():
    geom = _dense_fan(n_det=8, n_views=24)
    from gammact.projector import Sinogram

    zero = Sinogram(np.zeros((24, 8)), "attenuation", geom=geom)
    par = rebin_fan_to_parallel(zero, geom, np.arange(6) * 60.0,
                                np.linspace(-2.0, 2.0, 9))
    assert np.all(par.values == 0.0)


def test_rebin_rejects_s_beyond_source():
    geom = _dense_fan(n_det=8, n_views=24)
    fan = ideal_sinogram(DISC, geom)
    with pytest.raises(ValueError, match="source_to_center"):
        rebin_fan_to_parallel(fan, geom, np.arange(6) * 60.0,
                              np.linspace(-30.0, 30.0, 9))


def test_fbp_zero_sinogram_zero_image():
    par = ParallelSinogram(np.arange(10) * 18.0, np.linspace(-6, 6, 32),
                           np.zeros((10, 32)))
    img = fbp(par, get_filter("h50"), GridSpec(32, 14.0))
    assert np.all(img.values == 0.0)
    assert img.filter.code == "h50"


def test_fbp_linearity():
    rng = np.random.default_rng(2)
    vals = rng.uniform(size=(18, 32))
    par1 = ParallelSinogram(np.arange(18) * 10.0, np.linspace(-6, 6, 32), vals)
    par3 = ParallelSinogram(np.arange(18) * 10.0, np.linspace(-6, 6, 32), 3.0 * vals)
    grid = GridSpec(24, 14.0)
    a = fbp(par1, get_filter("h91"), grid).values
    b = fbp(par3, get_filter("h91"), grid).values
    assert np.allclose(b, 3.0 * a, atol=1e-12)


def test_fbp_disc_interior_accuracy():
    thetas = np.arange(180) * 1.0
    s = np.linspace(-7.0, 7.0, 128)
    proj = 2.0 * 0.096 * np.sqrt(np.maximum(36.0 - s**2, 0.0))
    par = ParallelSinogram(thetas, s, np.tile(proj, (180, 1)))
    grid = GridSpec(128, 14.0)
    img = fbp(par, get_filter("h50"), grid)
    x, y = grid.centers()
    interior = x[None, :] ** 2 + y[:, None] ** 2 < 16.0
    mean = img.values[interior].mean()
    assert 0.91 * 0.096 <= mean <= 1.09 * 0.096


def test_nmax_positive_on_noisy_data():
    geom = paper_geometry()
    res = sample_scan(ideal_sinogram(paper_phantom(), geom), DetectorModel(), 50, 3)
    proj = counts_to_projection(res.counts, res.open_beam, duration=1.0)
    imgs = reconstruct_all(proj, geom, list(HAMMING_FILTERS.values()),
                           GridSpec(64, 14.0), np.arange(36) * 10.0,
                           np.linspace(-3.0, 3.0, 32))
    maxima = {im.filter.code: float(np.max(im.values)) for im in imgs}
    assert all(m > 0.0 for m in maxima.values())
    # sharper window passes more high-frequency noise
    assert maxima["h99"] >= maxima["h50"]


def test_reconstruct_all_matches_direct_pipeline():
    geom = _dense_fan(n_det=16, n_views=72)
    fan = ideal_sinogram(DISC, geom)
    thetas = np.arange(18) * 20.0
    s = np.linspace(-2.5, 2.5, 24)
    grid = GridSpec(32, 14.0)
    (img,) = reconstruct_all(fan, geom, [get_filter("h50")], grid, thetas, s)
    ref = fbp(rebin_fan_to_parallel(fan, geom, thetas, s), get_filter("h50"), grid)
    assert np.array_equal(img.values, ref.values)
    with pytest.raises(ValueError, match="filter"):
        reconstruct_all(fan, geom, [], grid, thetas, s)


def test_rebinner_transformer_matches_function():
    geom = _dense_fan(n_det=16, n_views=72)
    fan = ideal_sinogram(DISC, geom)
    reb = FanToParallelRebinner(n_thetas=18, n_sbins=24)
    par = reb.fit_transform(fan)
    support = 26.0 * np.sin(np.radians(13.25 / 2.0))
    ref = rebin_fan_to_parallel(fan, geom, np.arange(18) * 20.0,
                                np.linspace(-support, support, 24))
    assert np.array_equal(par.values, ref.values)
    assert clone(reb).get_params() == reb.get_params()


def test_transformers_require_fit():
    geom = _dense_fan(n_det=16, n_views=72)
    fan = ideal_sinogram(DISC, geom)
    with pytest.raises(NotFittedError):
        FanToParallelRebinner().transform(fan)
    par = FanToParallelRebinner(n_thetas=18, n_sbins=24).fit_transform(fan)
    with pytest.raises(NotFittedError):
        FBPReconstructor().transform(par)


def test_fbp_transformer_matches_function():
    geom = _dense_fan(n_det=16, n_views=72)
    fan = ideal_sinogram(DISC, geom)
    par = FanToParallelRebinner(n_thetas=18, n_sbins=24).fit_transform(fan)
    est = FBPReconstructor(filter_code="h54", n_pixels=32, fov=14.0)
    img = est.fit_transform(par)
    ref = fbp(par, get_filter("h54"), GridSpec(32, 14.0))
    assert np.array_equal(img.values, ref.values)
    assert est.get_params()["filter_code"] == "h54"
