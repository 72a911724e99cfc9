import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opsin_evo.exceptions import (
    GenerationError,
    MalformedHeaderError,
    NegativeIntensityError,
    ParameterError,
    ParseError,
    PayloadMismatchError,
)
from opsin_evo.scenes import (
    SceneConfig,
    SpectrumTemplate,
    decode_scene,
    encode_scene,
    load_scene,
    save_scene,
    synth_scene,
    synth_scenes,
)
from opsin_evo.spectral import HsiCube, SpectralGrid


def cfg(grid, **kw):
    classes = kw.pop(
        "classes",
        [SpectrumTemplate("a", ((500, 30, 1.0),), 0.1), SpectrumTemplate("b", ((600, 30, 1.0),), 0.1)],
    )
    return SceneConfig(kw.pop("height", 16), kw.pop("width", 16), grid, classes, **kw)


def test_template_validation():
    with pytest.raises(ParameterError):
        SpectrumTemplate("x", ((500, 0, 1),))
    with pytest.raises(ParameterError):
        SpectrumTemplate("x", ((500, 10, -1),))
    with pytest.raises(ParameterError):
        SpectrumTemplate("x", baseline=-1)
    with pytest.raises(ParameterError):
        SpectrumTemplate("x", jitter=1.0)


def test_template_dict_roundtrip():
    t = SpectrumTemplate("fruit", ((650, 30, 1.0), (550, 40, 0.2)), 0.1, 0.05)
    assert SpectrumTemplate.from_dict(t.to_dict()) == t


@pytest.mark.parametrize(
    "kw",
    [
        {"classes": [SpectrumTemplate("only")]},
        {"height": 4},
        {"layout": "checkerboard"},
        {"fruit_density": 0.0},
        {"seed": -1},
        {"shading": 1.0},
    ],
)
def test_config_validation(grid, kw):
    with pytest.raises(ParameterError):
        cfg(grid, **kw)


def test_config_dict_roundtrip(grid):
    c = cfg(grid, layout="blobs", blob_count=5, seed=9, shading=0.1)
    assert SceneConfig.from_dict(c.to_dict()) == c


def test_stripes_without_jitter_are_pure_templates(grid):
    c = cfg(grid, layout="stripes")
    cube = synth_scene(c)
    for k, t in enumerate(c.classes):
        px = cube.data[cube.labels == k]
        assert len(px) > 0
        np.testing.assert_array_equal(px, np.broadcast_to(t.evaluate(grid), px.shape))


def test_same_seed_bit_identical(grid):
    c = cfg(grid, layout="blobs", seed=42)
    a, b = synth_scene(c), synth_scene(c)
    assert a.data.tobytes() == b.data.tobytes()
    np.testing.assert_array_equal(a.labels, b.labels)


def test_class_means_peak_near_template_centres(grid):
    classes = [
        SpectrumTemplate("leaf", ((550, 40, 0.8),), 0.0, 0.1),
        SpectrumTemplate("fruit", ((650, 30, 1.0),), 0.0, 0.1),
    ]
    cube = synth_scene(SceneConfig(32, 32, grid, classes, layout="scattered-fruit", seed=3))
    # scalar oracle: accumulate means with plain loops
    for k, centre in ((0, 550.0), (1, 650.0)):
        total = [0.0] * grid.n_bands
        count = 0
        for y in range(32):
            for x in range(32):
                if cube.labels[y, x] == k:
                    count += 1
                    for i in range(grid.n_bands):
                        total[i] += cube.data[y, x, i]
        means = [t / count for t in total]
        assert grid.wavelengths[int(np.argmax(means))] == centre


@given(
    layout=st.sampled_from(["blobs", "stripes", "scattered-fruit"]),
    seed=st.integers(0, 2**64 - 1),
    k=st.integers(2, 4),
)
def test_every_class_present_and_nonnegative(layout, seed, k):
    grid = SpectralGrid.regular()
    classes = [SpectrumTemplate(f"c{i}", ((450 + 60 * i, 30, 1.0),), 0.1, 0.3) for i in range(k)]
    try:
        cube = synth_scene(SceneConfig(16, 16, grid, classes, layout=layout, blob_count=12, seed=seed))
    except GenerationError as exc:
        # blobs with few cells may legitimately miss a class; the error names it
        assert "zero area" in str(exc)
        return
    assert set(np.unique(cube.labels)) == set(range(k))
    assert np.all(cube.data >= 0)


def test_degenerate_layout_names_class(grid):
    classes = [SpectrumTemplate(f"c{i}") for i in range(3)]
    with pytest.raises(GenerationError, match="c2"):
        synth_scene(SceneConfig(8, 8, grid, classes, layout="blobs", blob_count=2))


def test_jitter_free_spectrum_identifies_label(grid):
    cube = synth_scene(cfg(grid, layout="blobs", blob_count=10, seed=4))
    seen = {}
    for spec, lab in zip(cube.data.reshape(-1, grid.n_bands), cube.labels.ravel()):
        assert seen.setdefault(spec.tobytes(), lab) == lab


def test_synth_scenes_distinct_and_reproducible(grid):
    c = cfg(grid, layout="blobs", blob_count=10, seed=7)
    a = synth_scenes(c, 3)
    b = synth_scenes(c, 3)
    assert all(x == y for x, y in zip(a, b))
    assert not np.array_equal(a[0].labels, a[1].labels)


def test_shading_scales_pixels(grid):
    c = cfg(grid, layout="stripes", shading=0.2)
    cube = synth_scene(c)
    base = np.stack([t.evaluate(grid) for t in c.classes])[cube.labels]
    ratio = cube.data / base
    np.testing.assert_allclose(ratio, ratio[..., :1] * np.ones_like(ratio), rtol=1e-12)
    assert ratio.min() >= 0.8 and ratio.max() <= 1.2


# --- container --------------------------------------------------------------


def test_roundtrip(tmp_path, grid):
    cube = synth_scene(cfg(grid, layout="blobs", seed=1, classes=[
        SpectrumTemplate("a", ((500, 30, 1.0),), 0.1, 0.2), SpectrumTemplate("b", (), 0.5, 0.2)]))
    p = tmp_path / "c.hsi"
    save_scene(cube, p)
    assert load_scene(p) == cube


@given(seed=st.integers(0, 2**32 - 1), h=st.integers(1, 5), w=st.integers(1, 5), n=st.integers(2, 6))
def test_roundtrip_property(seed, h, w, n):
    rng = np.random.default_rng(seed)
    grid = SpectralGrid(np.sort(rng.choice(np.arange(300, 900), n, replace=False)).astype(float) + rng.random())
    cube = HsiCube(rng.exponential(1.0, (h, w, n)), rng.integers(0, 3, (h, w)), grid, 3)
    assert decode_scene(encode_scene(cube)) == cube


def test_header_and_size(tmp_path, grid):
    cube = HsiCube(np.ones((4, 4, 31)), np.zeros((4, 4), int), grid, 2)
    p = tmp_path / "c.hsi"
    save_scene(cube, p)
    raw = p.read_bytes()
    header, _, _ = raw.partition(b"\n\n")
    lines = header.decode().splitlines()
    assert lines[0] == "OPSINHSI1"
    assert {"height=4", "width=4", "bands=31", "classes=2"} <= set(lines)
    assert len(raw) == len(header) + 2 + 4 * 4 * 31 * 8 + 4 * 4


def test_hand_written_file(tmp_path):
    raw = b"OPSINHSI1\nheight=1\nwidth=1\nbands=2\nclasses=1\nwavelengths=500,510\n\n"
    raw += struct.pack("<dd", 3.0, 4.0) + b"\x00"
    p = tmp_path / "h.hsi"
    p.write_bytes(raw)
    cube = load_scene(p)
    assert cube.data.tolist() == [[[3.0, 4.0]]]
    assert cube.grid.wavelengths.tolist() == [500.0, 510.0]


def test_payload_order_rows_then_columns_then_bands():
    grid = SpectralGrid(np.array([500.0, 510.0]))
    data = np.arange(12, dtype=float).reshape(2, 3, 2)
    raw = encode_scene(HsiCube(data, np.zeros((2, 3), int), grid, 1))
    body = raw.partition(b"\n\n")[2]
    assert struct.unpack("<12d", body[:96]) == tuple(range(12))


def test_truncated_payload(grid):
    raw = encode_scene(HsiCube(np.ones((2, 2, 31)), np.zeros((2, 2), int), grid, 1))
    with pytest.raises(PayloadMismatchError):
        decode_scene(raw[:-5])


@pytest.mark.parametrize(
    "raw",
    [
        b"NOTHSI\n",
        b"OPSINHSI1\nheight=1\nwidth=1\n",
        b"OPSINHSI1\nheight=1\nwidth=1\nbands=2\nclasses=1\n\n",
        b"OPSINHSI1\nheight=x\nwidth=1\nbands=2\nclasses=1\nwavelengths=1,2\n\n",
        b"OPSINHSI1\nheight=1\nwidth=1\nbands=3\nclasses=1\nwavelengths=1,2\n\n",
        b"OPSINHSI1\nheight=1\nwidth=1\nbands=2\nclasses=1\nwavelengths=2,1\n\n" + b"\x00" * 17,
    ],
)
def test_malformed_header(raw):
    with pytest.raises(MalformedHeaderError):
        decode_scene(raw)


def test_negative_payload():
    raw = b"OPSINHSI1\nheight=1\nwidth=1\nbands=2\nclasses=1\nwavelengths=500,510\n\n"
    raw += struct.pack("<dd", -1.0, 4.0) + b"\x00"
    with pytest.raises(NegativeIntensityError):
        decode_scene(raw)


def test_parse_errors_are_distinct():
    kinds = {MalformedHeaderError, PayloadMismatchError, NegativeIntensityError}
    assert len(kinds) == 3 and all(issubclass(k, ParseError) for k in kinds)


def test_load_missing_file_mentions_path(tmp_path):
    p = tmp_path / "missing.hsi"
    with pytest.raises(OSError, match="missing.hsi"):
        load_scene(p)
