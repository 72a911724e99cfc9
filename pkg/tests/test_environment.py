import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opsin_evo.environment import (
    AttenuationModel,
    BioluminescenceSpec,
    EnvPipeline,
    NoiseModel,
    add_noise,
    attenuate,
    bioluminesce,
    dim,
    noise_array,
    oceanic_kd,
)
from opsin_evo.exceptions import ConfigError, DimensionError, ParameterError
from opsin_evo.scenes import SceneConfig, SpectrumTemplate, synth_scene
from opsin_evo.spectral import ChannelMap, HsiCube, SpectralGrid


def flat_cube(grid, value=1.0, h=2, w=2):
    return HsiCube(np.full((h, w, grid.n_bands), value), np.zeros((h, w), int), grid, 2)


# --- attenuation ------------------------------------------------------------


def test_depth_zero_is_identity(two_class_cube):
    out = attenuate(two_class_cube, 0.0, AttenuationModel.oceanic())
    assert out.data.tobytes() == two_class_cube.data.tobytes()


def test_zero_kd_is_identity(two_class_cube):
    out = attenuate(two_class_cube, 37.0, AttenuationModel.constant(0.0))
    assert out.data.tobytes() == two_class_cube.data.tobytes()


def test_factor_e_minus_one(grid):
    out = attenuate(flat_cube(grid), 10.0, AttenuationModel.constant(0.1))
    np.testing.assert_allclose(out.data, math.exp(-1.0), rtol=1e-15)
    assert out.data[0, 0, 0] == pytest.approx(0.367879, abs=1e-6)


def test_negative_depth_rejected(two_class_cube):
    with pytest.raises(ParameterError):
        attenuate(two_class_cube, -1.0, AttenuationModel.oceanic())


def test_oceanic_profile_has_blue_window():
    wl = np.arange(400, 701, 1.0)
    kd = oceanic_kd(wl)
    assert wl[np.argmin(kd)] == 475.0
    assert kd.min() == pytest.approx(0.02)


def test_table_interpolates_linearly():
    m = AttenuationModel(np.array([400.0, 500.0]), np.array([0.1, 0.3]))
    assert m.at(np.array([450.0]))[0] == pytest.approx(0.2)
    with pytest.raises(ParameterError):
        m.at(np.array([399.0]))


def test_table_from_file(tmp_path):
    p = tmp_path / "kd.txt"
    p.write_text("# nm  1/m\n400 0.1\n500 0.05  # blue\n700 0.6\n")
    m = AttenuationModel.from_file(p)
    np.testing.assert_array_equal(m.wavelengths, [400, 500, 700])
    np.testing.assert_array_equal(m.kd, [0.1, 0.05, 0.6])


@pytest.mark.parametrize(
    "wl,kd", [([400, 400], [0, 0]), ([400, 500], [0.1, -0.1]), ([400], [0.1]), ([400, 500], [0.1])]
)
def test_table_validation(wl, kd):
    with pytest.raises((ParameterError, DimensionError)):
        AttenuationModel(np.array(wl, float), np.array(kd, float))


@given(d1=st.floats(0, 100), d2=st.floats(0, 100), seed=st.integers(0, 2**32 - 1))
def test_semigroup(d1, d2, seed):
    grid = SpectralGrid.regular()
    data = np.random.default_rng(seed).uniform(0.1, 2.0, (3, 3, grid.n_bands))
    cube = HsiCube(data, np.zeros((3, 3), int), grid, 1)
    m = AttenuationModel.oceanic()
    a = attenuate(attenuate(cube, d1, m), d2, m).data
    b = attenuate(cube, d1 + d2, m).data
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=0)


@given(d1=st.floats(0, 80), gap=st.floats(0.1, 50))
def test_monotone_in_depth(d1, gap):
    grid = SpectralGrid.regular()
    cube = flat_cube(grid)
    m = AttenuationModel.oceanic()
    t1 = attenuate(cube, d1, m).data.sum(axis=(0, 1))
    t2 = attenuate(cube, d1 + gap, m).data.sum(axis=(0, 1))
    assert np.all(t2 < t1)


def test_transmission_against_scalar_exponentials():
    rng = np.random.default_rng(7)
    m = AttenuationModel.oceanic()
    for _ in range(10):
        lam = float(rng.uniform(400, 700))
        d = float(rng.uniform(0, 100))
        g = SpectralGrid(np.array([lam, lam + 1.0]))
        kd = 0.02 + 0.3 * ((lam - 475.0) / 100.0) ** 2
        # table is sampled at 1 nm, so compare against its own interpolant
        kd_tab = np.interp(lam, m.wavelengths, m.kd)
        assert abs(kd_tab - kd) < 2e-5
        assert m.transmission(g, d)[0] == pytest.approx(math.exp(-kd_tab * d), rel=1e-14)


# --- dim --------------------------------------------------------------------


def test_dim(grid):
    cube = flat_cube(grid, 2.0)
    assert dim(cube, 1.0) is cube
    assert dim(cube, 0.05).data[0, 0, 0] == pytest.approx(0.1)
    np.testing.assert_allclose(dim(dim(cube, 0.1), 0.1).data, dim(cube, 0.01).data, rtol=1e-15)
    for bad in (0.0, -0.5, 1.5):
        with pytest.raises(ParameterError):
            dim(cube, bad)


# --- bioluminescence ---------------------------------------------------------


def stripe_scene():
    grid = SpectralGrid.regular()
    classes = [SpectrumTemplate("water", (), 1.0, 0.1), SpectrumTemplate("glow", ((480, 20, 2.0),), 0.5, 0.1)]
    return synth_scene(SceneConfig(8, 8, grid, classes, layout="stripes", seed=2))


def test_bioluminescence_two_branch_oracle():
    cube = stripe_scene()
    att = attenuate(cube, 50.0, AttenuationModel.oceanic())
    out = bioluminesce(cube, att, BioluminescenceSpec(1))
    for y in range(8):
        for x in range(8):
            src = cube if cube.labels[y, x] == 1 else att
            assert out.data[y, x].tobytes() == src.data[y, x].tobytes()


def test_bioluminescence_edge_cases():
    cube = stripe_scene()
    att = attenuate(cube, 50.0, AttenuationModel.oceanic())
    # label absent -> attenuated
    k3 = HsiCube(cube.data, cube.labels, cube.grid, 3)
    k3a = HsiCube(att.data, att.labels, att.grid, 3)
    assert bioluminesce(k3, k3a, BioluminescenceSpec(2)).data.tobytes() == att.data.tobytes()
    # every pixel glows -> original
    ones = np.ones_like(cube.labels)
    c1 = HsiCube(cube.data, ones, cube.grid, 2)
    a1 = HsiCube(att.data, ones, cube.grid, 2)
    assert bioluminesce(c1, a1, BioluminescenceSpec(1)).data.tobytes() == cube.data.tobytes()


def test_bioluminescence_mismatch():
    cube = stripe_scene()
    other = HsiCube(cube.data, np.zeros_like(cube.labels), cube.grid, 2)
    with pytest.raises(DimensionError):
        bioluminesce(cube, other, BioluminescenceSpec(1))
    with pytest.raises(ParameterError):
        bioluminesce(cube, cube, BioluminescenceSpec(5))


# --- noise ------------------------------------------------------------------


def test_tau_zero_identity():
    m = ChannelMap(np.random.default_rng(0).uniform(0, 1, (4, 4, 2)))
    assert add_noise(m, NoiseModel(0.0)).channels.tobytes() == m.channels.tobytes()


def test_noise_statistics():
    I = np.ones((100_000, 1, 1))
    out = add_noise(ChannelMap(I), NoiseModel(0.1, seed=11)).channels
    diff = out - I
    assert abs(out.mean() - 1.0) < 0.01
    assert abs(diff.mean()) < 0.01
    assert abs(diff.var() - 0.1) < 0.005


def test_noise_reproducible_and_streams_differ():
    m = ChannelMap(np.ones((8, 8, 3)))
    a = add_noise(m, NoiseModel(0.1, 5), stream=(1, 0)).channels
    b = add_noise(m, NoiseModel(0.1, 5), stream=(1, 0)).channels
    c = add_noise(m, NoiseModel(0.1, 5), stream=(2, 0)).channels
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


def test_noise_chunking_matches_whole():
    # element e depends only on (key, e): the first k draws of a longer
    # request equal a shorter request
    I = np.ones(50)
    full, _ = noise_array(I, 0.1, (3, 4))
    part, _ = noise_array(I[:20], 0.1, (3, 4))
    np.testing.assert_array_equal(full[:20], part)


def test_noise_clamps_and_reports_mask():
    I = np.full(10_000, 0.01)
    out, kept = noise_array(I, 1.0, (0,))
    assert out.min() == 0.0
    assert np.all(out[~kept] == 0.0) and np.all(out[kept] > 0)
    assert (~kept).any()


def test_noise_rejects_negative_and_bad_tau():
    with pytest.raises(ParameterError):
        noise_array(np.array([-1.0]), 0.1, (0,))
    with pytest.raises(ParameterError):
        NoiseModel(-0.1)


# --- pipeline ---------------------------------------------------------------


def test_pipeline_requires_depth_for_biolum():
    with pytest.raises(ConfigError):
        EnvPipeline(bio_label=1)
    with pytest.raises(ConfigError):
        EnvPipeline(depth_m=0.0, bio_label=1)
    with pytest.raises(ConfigError):
        EnvPipeline(dim_factor=0.0)


def test_pipeline_order():
    cube = stripe_scene()
    env = EnvPipeline(depth_m=30.0, dim_factor=0.5, bio_label=1)
    att = attenuate(cube, 30.0, AttenuationModel.oceanic())
    expected = dim(bioluminesce(cube, att, BioluminescenceSpec(1)), 0.5)
    assert env.apply(cube).data.tobytes() == expected.data.tobytes()
    assert EnvPipeline().apply(cube) is cube
