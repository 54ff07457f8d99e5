"""SVG writer: structure and byte determinism."""

import numpy as np

from robustdiff.svgplot import write_panels_svg


def test_panels_structure_and_determinism(tmp_path):
    t = np.linspace(0.0, 1.0, 50)
    panels = [
        ("errors", [(t, np.abs(np.sin(6 * t)), "a"), (t, 0.5 * t, "b")]),
        ("noise", [(t, np.cos(9 * t) * 0.08, "eta")]),
    ]
    p1 = tmp_path / "a.svg"
    p2 = tmp_path / "b.svg"
    write_panels_svg(p1, panels)
    write_panels_svg(p2, panels)
    body = p1.read_text()
    assert body.startswith("<svg")
    assert body.count("<polyline") == 3
    assert "errors" in body and "eta" in body
    assert p1.read_bytes() == p2.read_bytes()


def test_constant_series_does_not_degenerate(tmp_path):
    t = np.linspace(0.0, 2.0, 10)
    write_panels_svg(tmp_path / "c.svg", [("flat", [(t, np.zeros(10), "z")])])
    assert (tmp_path / "c.svg").read_text().count("<polyline") == 1
