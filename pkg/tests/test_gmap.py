import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gmtraj.gmap import (
    GridSpec,
    dump_csv,
    extract_local,
    grid_for_scene,
    normalize_patch,
    rasterize,
    render_map,
    world_to_grid,
)
from gmtraj.ingest import TrajPoint
from gmtraj.recwin import RecordWindow

SPEC = GridSpec(TrajPoint(0.0, 0.0), 0.25, 40, 60)

dyadic = st.integers(0, 10 * 64).map(lambda k: k / 64)  # exact in binary floating point


def test_world_to_grid_examples():
    assert world_to_grid((1.0, 0.5), SPEC) == (4, 2, True)
    assert world_to_grid((0.0, 0.0), SPEC) == (0, 0, True)
    r, c, ok = world_to_grid((-0.1, 0.0), SPEC)
    assert (r, c, ok) == (-1, 0, False)
    assert world_to_grid((10.0, 0.0), SPEC)[2] is False  # row 40 == H


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(TrajPoint(0, 0), 0.0, 3, 3)
    with pytest.raises(ValueError):
        GridSpec(TrajPoint(0, 0), 0.25, 0, 3)


def test_rasterize_examples():
    assert rasterize(None, SPEC).counts.sum() == 0
    assert rasterize(np.zeros((0, 2)), SPEC).counts.sum() == 0
    g = rasterize(np.array([[1.0, 0.5], [1.1, 0.6]]), SPEC)
    assert g.counts[4, 2] == 2 and g.counts.sum() == 2
    w = RecordWindow((1,), np.array([[1.0, 0.5], [-3.0, 0.0]]))
    g = rasterize(w, SPEC)
    assert g.counts.sum() == 1 and g.dropped == 1


@given(st.lists(st.tuples(dyadic, dyadic), min_size=0, max_size=50), st.integers(0, 2**31 - 1))
def test_rasterize_conserves_and_ignores_order(points, seed):
    pts = np.array(points, dtype=np.float64).reshape(-1, 2)
    g = rasterize(pts, SPEC)
    inside = [world_to_grid(p, SPEC)[2] for p in pts]
    assert g.counts.sum() == sum(inside) and g.dropped == len(pts) - sum(inside)
    perm = np.random.default_rng(seed).permutation(len(pts))
    assert np.array_equal(rasterize(pts[perm], SPEC).counts, g.counts)


@given(st.lists(st.tuples(dyadic, dyadic), min_size=1, max_size=30), st.integers(-40, 40), st.integers(-40, 40))
def test_rasterize_translation_equivariant(points, dx, dy):
    pts = np.array(points, dtype=np.float64)
    shift = np.array([dx, dy]) * 0.25
    moved = GridSpec(TrajPoint(shift[0], shift[1]), 0.25, SPEC.height, SPEC.width)
    assert np.array_equal(rasterize(pts + shift, moved).counts, rasterize(pts, SPEC).counts)


def test_grid_for_scene_covers_bounds_with_margin(toy_scene):
    spec = grid_for_scene(toy_scene, 0.25, 4.0)
    lo, hi = toy_scene.bounds
    assert spec.origin == TrajPoint(lo.x - 4.0, lo.y - 4.0)
    for corner in [(lo.x - 3.99, lo.y - 3.99), (hi.x + 3.99, hi.y + 3.99)]:
        assert world_to_grid(corner, spec)[2]


# -- local crops -------------------------------------------------------------------


def test_local_patch_is_32_by_32_for_defaults():
    g = rasterize(np.array([[5.0, 7.0]]), SPEC)
    lm = extract_local(g, (5.0, 7.0), 4.0, agent_id=3)
    assert lm.patch.shape == (32, 32) and lm.agent_id == 3
    assert lm.center_cell == (20, 28)
    assert lm.patch[16, 16] == 1  # the agent's own cell sits at index side // 2


def test_corner_agent_patch_is_zero_padded_on_two_sides():
    uniform = rasterize(None, SPEC)
    uniform = type(uniform)(SPEC, np.full(SPEC.shape, 3, dtype=np.int64))
    lm = extract_local(uniform, (0.1, 0.1), 4.0)
    # rows/cols before the grid start are padding
    assert np.all(lm.patch[:16, :] == 0) and np.all(lm.patch[:, :16] == 0)
    assert np.all(lm.patch[16:, 16:] == 3)


def test_uniform_map_interior_patch_is_constant():
    g = rasterize(None, SPEC)
    g = type(g)(SPEC, np.full(SPEC.shape, 7, dtype=np.int64))
    lm = extract_local(g, (5.0, 7.0), 4.0)
    assert np.all(lm.patch == 7)


@given(st.floats(-3, 13), st.floats(-3, 18), st.integers(0, 2**31 - 1))
def test_crop_sum_equals_in_crop_cells_of_full_map(x, y, seed):
    counts = np.random.default_rng(seed).integers(0, 5, size=SPEC.shape)
    g = rasterize(None, SPEC)
    g = type(g)(SPEC, counts)
    lm = extract_local(g, (x, y), 4.0)
    r, c, _ = world_to_grid((x, y), SPEC)
    rows = [i for i in range(r - 16, r + 16) if 0 <= i < SPEC.height]
    cols = [j for j in range(c - 16, c + 16) if 0 <= j < SPEC.width]
    expected = counts[np.ix_(rows, cols)].sum() if rows and cols else 0
    assert lm.patch.sum() == expected


def test_extract_local_rejects_non_positive_l():
    with pytest.raises(ValueError):
        extract_local(rasterize(None, SPEC), (1, 1), 0.0)


def test_normalize_patch():
    p = np.zeros((4, 4))
    assert np.array_equal(normalize_patch(p), p)
    p[1, 2] = 4
    assert normalize_patch(p).max() == 1.0
    stack = np.stack([p, 2 * p, np.zeros((4, 4))])
    out = normalize_patch(stack)
    assert out.shape == (3, 4, 4) and list(out.max(axis=(1, 2))) == [1.0, 1.0, 0.0]
    assert normalize_patch(np.zeros((0, 4, 4))).shape == (0, 4, 4)


# -- rendering -------------------------------------------------------------------------


def _pixels(path):
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def test_render_zero_map_is_uniform(tmp_path):
    p = render_map(rasterize(None, SPEC), tmp_path / "z.png", cell_px=2)
    px = _pixels(p)
    assert px.shape == (80, 120, 3) and (px == px[0, 0]).all()


def test_render_single_cell_is_single_bright_block(tmp_path):
    g = rasterize(np.array([[1.0, 0.5]]), SPEC)
    px = _pixels(render_map(g, tmp_path / "one.png", cell_px=3))
    bright = np.argwhere(px.sum(axis=2) == px.sum(axis=2).max())
    assert bright.min(axis=0).tolist() == [12, 6] and bright.max(axis=0).tolist() == [14, 8]
    assert len(bright) == 9


def test_render_is_byte_identical_and_keeps_metadata(tmp_path):
    g = rasterize(np.random.default_rng(0).uniform(0, 9, size=(200, 2)), SPEC)
    a = render_map(g, tmp_path / "a.png", meta={"fingerprint": "abc"})
    b = render_map(g, tmp_path / "b.png", meta={"fingerprint": "abc"})
    assert a.read_bytes() == b.read_bytes()
    from PIL import Image

    with Image.open(a) as im:
        assert im.text["fingerprint"] == "abc"


def test_render_gray_and_signed_fields(tmp_path):
    field = np.array([[-1.0, 0.0], [0.5, 1.0]])
    px = _pixels(render_map(field, tmp_path / "f.png", cell_px=1, colormap="gray"))
    assert px[0, 0, 0] == 0 and px[1, 1, 0] == 255 and 0 < px[0, 1, 0] < px[1, 0, 0]
    with pytest.raises(ValueError):
        render_map(field, tmp_path / "g.png", colormap="rainbow")


def test_render_unwritable_path(tmp_path):
    with pytest.raises(OSError, match="cannot write"):
        render_map(np.ones((2, 2)), tmp_path / "missing" / "x.png")


def test_dump_csv(tmp_path):
    g = rasterize(np.array([[1.0, 0.5]]), SPEC)
    dump_csv(g, tmp_path / "g.csv")
    back = np.loadtxt(tmp_path / "g.csv", delimiter=",")
    assert np.array_equal(back, g.counts)
