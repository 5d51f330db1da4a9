import numpy as np

from fleetsim.render import COLD_LEVEL, WALL_LEVEL, heat_level, heat_raster, read_pgm, render_snapshot
from fleetsim.traffic import TrafficState
from fleetsim.worldmap import parse_map

from oracles import grid_text


def test_ramp_is_darker_when_hotter():
    levels = [heat_level(h) for h in (0.0, 0.25, 0.5, 1.0, 3.0)]
    assert levels == [COLD_LEVEL, 172, 115, 0, 0]
    assert heat_level(-1.0) == COLD_LEVEL


def test_raster_layout_and_round_trip(tmp_path):
    m = parse_map(grid_text(["..#", "..#"], ["01-", "01-"]))
    st = TrafficState(0, {0: 0.0, 1: 1.0}, {0: 0.0, 1: 0.0})
    img = heat_raster(m, st)
    assert img.tolist() == [[COLD_LEVEL, 0, WALL_LEVEL], [COLD_LEVEL, 0, WALL_LEVEL]]
    path = tmp_path / "h.pgm"
    render_snapshot(m, st, path, scale=2)
    back = read_pgm(path)
    assert back.shape == (4, 6)
    assert np.array_equal(back[::2, ::2], img)
    assert path.read_bytes().startswith(b"P5\n6 4\n255\n")
