import xml.etree.ElementTree as ET

import numpy as np

from synpriming import metrics as M, report


def test_heatmap_is_valid_deterministic_svg(rng):
    m = rng.normal(size=(7, 7))
    a = report.heatmap_svg(m, list("ABCDEFG"))
    assert a == report.heatmap_svg(m.copy(), list("ABCDEFG"))
    root = ET.fromstring(a)
    assert root.tag.endswith("svg")
    assert "synpriming-report v1" in a


def test_constant_matrix_gets_single_swatch_legend():
    svg = report.heatmap_svg(np.full((3, 3), 0.25), ["a", "b", "c"])
    ET.fromstring(svg)
    fills = {line.split('fill="')[1].split('"')[0] for line in svg.splitlines() if "<rect" in line}
    assert len(fills) == 1


def test_nan_cells_render_as_na():
    m = np.eye(3)
    m[0, 1] = np.nan
    assert ">NA<" in report.heatmap_svg(m, ["a", "b", "c"])


def test_dendrogram_lists_every_leaf(rng):
    m = rng.normal(size=(7, 7))
    svg = report.dendrogram_svg(M.build_hierarchy(m))
    ET.fromstring(svg)
    for label in ("UORC", "RORC", "UPRC", "RPRC", "ASRC", "CPSORC", "CASRC"):
        assert f">{label}<" in svg
