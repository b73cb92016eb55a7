import warnings

import numpy as np
import pytest

from vderm.errors import ConfigError
from vderm.grid import GridSpec
from vderm.mesh import box_mesh, write_mesh
from vderm.presets import eight_region
from vderm.regions import (
    Ball,
    Box,
    EmptyRegion,
    MeshInterior,
    Region,
    RegionDensitySpec,
    eight_region_spec,
    rasterize_density,
    read_region_spec,
)

G32 = GridSpec((32, 32, 32))


def test_central_box_node_count():
    spec = RegionDensitySpec([Region(Box((12, 12, 12), (19, 19, 19)), 10.0)], background=1.0)
    rho = rasterize_density(spec, G32)
    assert np.count_nonzero(rho == 10) == 512 and np.count_nonzero(rho == 1) == 32**3 - 512


def test_eight_octant_spec_matches_preset():
    rho = rasterize_density(eight_region_spec(G32), G32)
    assert rho[0, 0, 0] == 1 and rho[31, 31, 31] == 15
    assert np.array_equal(rho, eight_region((32, 32, 32)))


def test_eight_octant_spec_odd_grid():
    g = GridSpec((9, 7, 5))
    assert np.array_equal(rasterize_density(eight_region_spec(g), g), eight_region(g.dims))


def test_background_only():
    rho = rasterize_density(RegionDensitySpec([], background=3.0), GridSpec((5, 5, 5)))
    assert np.all(rho == 3.0)


def test_later_region_overrides():
    g = GridSpec((10, 10, 10))
    spec = RegionDensitySpec([Region(Box((0, 0, 0), (9, 9, 4)), 2.0), Region(Box((0, 0, 4), (9, 9, 9)), 5.0)])
    rho = rasterize_density(spec, g)
    assert np.all(rho[:, :, 4] == 5.0) and np.all(rho[:, :, :4] == 2.0)


def test_non_overlapping_order_invariant():
    g = GridSpec((12, 12, 12))
    regions = [
        Region(Box((0, 0, 0), (3, 3, 3)), 2.0),
        Region(Ball((8, 8, 8), 2.5), 7.0),
        Region(Box((0, 8, 0), (2, 11, 2)), 4.0),
    ]
    a = rasterize_density(RegionDensitySpec(regions), g)
    b = rasterize_density(RegionDensitySpec(regions[::-1]), g)
    assert np.array_equal(a, b)


def test_ball_counts():
    g = GridSpec((11, 11, 11))
    rho = rasterize_density(RegionDensitySpec([Region(Ball((5, 5, 5), 1.0), 9.0)]), g)
    assert np.count_nonzero(rho == 9.0) == 7


def test_mesh_region_matches_box():
    g = GridSpec((12, 12, 12))
    m = box_mesh((2.5, 3.5, 4.5), (7.5, 8.5, 9.5))
    a = rasterize_density(RegionDensitySpec([Region(MeshInterior(m), 6.0)]), g)
    b = rasterize_density(RegionDensitySpec([Region(Box((3, 4, 5), (7, 8, 9)), 6.0)]), g)
    assert np.array_equal(a, b)


def test_normalize_divides_by_volume():
    g = GridSpec((10, 10, 10), 0.5)
    spec = RegionDensitySpec([Region(Box((0, 0, 0), (1.5, 1.5, 1.5)), 100.0)], background=1.0, normalize=True)
    rho = rasterize_density(spec, g)
    assert rho[0, 0, 0] == pytest.approx(100.0 / (64 * 0.125))


def test_background_mean_of_regions():
    g = GridSpec((8, 8, 8))
    spec = RegionDensitySpec(
        [Region(Box((0, 0, 0), (1, 7, 7)), 2.0), Region(Box((6, 0, 0), (7, 7, 7)), 6.0)], background=None
    )
    rho = rasterize_density(spec, g)
    assert rho[4, 4, 4] == pytest.approx(4.0)


def test_empty_region_warns_not_fatal():
    g = GridSpec((6, 6, 6))
    spec = RegionDensitySpec([Region(Box((10, 10, 10), (11, 11, 11)), 5.0, "outside")])
    with pytest.warns(EmptyRegion, match="outside"):
        rho = rasterize_density(spec, g)
    assert np.all(rho == 1.0)


@pytest.mark.parametrize("value", [0.0, -2.0])
def test_nonpositive_values_rejected(value):
    with pytest.raises(ConfigError):
        RegionDensitySpec([Region(Box((0, 0, 0), (1, 1, 1)), value)])
    with pytest.raises(ConfigError):
        RegionDensitySpec([], background=value)


def test_read_spec_file(tmp_path):
    write_mesh(box_mesh((2.5, 2.5, 2.5), (4.5, 4.5, 4.5)), tmp_path / "cube.obj")
    (tmp_path / "r.regions").write_text(
        "# demo\nbackground = 2\nnormalize = false\n"
        "box slab 0 0 0 9 9 1 = 3\nball core 7 7 7 1 = 8\nmesh cube cube.obj = 5\n"
    )
    spec = read_region_spec(tmp_path / "r.regions", placement=None)
    rho = rasterize_density(spec, GridSpec((10, 10, 10)))
    assert rho[5, 5, 5] == 2 and rho[3, 3, 3] == 5 and rho[7, 7, 7] == 8 and rho[0, 0, 0] == 3
    assert [r.name for r in spec.regions] == ["slab", "core", "cube"]


@pytest.mark.parametrize(
    "body, match",
    [("box a 1 2 3 = 4\n", "expected 6 numbers"), ("cone a 1 = 2\n", "unknown region kind"), ("box a 0 0 0 1 1 1\n", "expected")],
)
def test_read_spec_errors_name_line(tmp_path, body, match):
    p = tmp_path / "bad.regions"
    p.write_text(body)
    with pytest.raises(ConfigError, match=match) as exc:
        read_region_spec(p)
    assert "bad.regions:1" in str(exc.value)


@pytest.mark.parametrize("name", ["homunculus", "airline_ticket", "airline_revenue", "central_box"])
def test_shipped_spec_files(name):
    from pathlib import Path

    path = Path(__file__).parents[1] / "configs" / "regions" / f"{name}.regions"
    spec = read_region_spec(path)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rho = rasterize_density(spec, G32)
    assert np.all(rho > 0) and len(np.unique(rho)) >= 2
