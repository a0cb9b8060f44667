import json
import math
from pathlib import Path

import numpy as np
import pytest

from ucvoronoi.cells import build_cell, build_cells
from ucvoronoi.cli import main
from ucvoronoi.errors import NotTwoDimensional, SchemaError
from ucvoronoi.render import render_svg
from ucvoronoi.scene import json_ready, load_scene, parse_scene, scene_from_configuration
from ucvoronoi.sites import Configuration, Points
from ucvoronoi.space import NormedSpace
from ucvoronoi.world import Box

SCENES = Path(__file__).resolve().parents[1] / "scenes"

BASE = {
    "norm": {"kind": "lp", "p": 2},
    "world": {"kind": "box", "min": [-10, -10], "max": [10, 10]},
    "sites": [{"kind": "points", "coords": [[-1, 0]]}, {"kind": "points", "coords": [[1, 0]]}],
}


def doc(**changes):
    d = json.loads(json.dumps(BASE))
    d.update(changes)
    return json.dumps(d)


def schema_path(text):
    with pytest.raises(SchemaError) as info:
        parse_scene(text)
    return info.value.path


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_scene_round_trip():
    for f in sorted(SCENES.glob("*.json")):
        scene = load_scene(str(f))
        again = parse_scene(scene.to_json())
        assert again.to_dict() == scene.to_dict()
        assert len(scene.configuration().sites) >= 2


def test_scene_from_configuration_round_trip():
    scene = load_scene(str(SCENES / "fig3_mixed.json"))
    back = scene_from_configuration(scene.configuration())
    assert back.sites == scene.sites and back.norm == scene.norm and back.world == scene.world
    assert parse_scene(back.to_json()).to_dict() == back.to_dict()


def test_norm_normalisation():
    assert parse_scene(doc(norm={"kind": "euclidean"})).norm == {"kind": "lp", "p": 2.0}
    assert parse_scene(doc(norm={"kind": "lp", "p": 1})).norm == {"kind": "l1"}
    assert parse_scene(doc(norm={"kind": "lp", "p": "inf"})).norm == {"kind": "linf"}


@pytest.mark.parametrize("text, path", [
    ("{}", "/norm"),
    ("[1, 2]", ""),
    ("{not json", ""),
    (doc(norm={"kind": "lp", "p": 0.5}), "/norm/p"),
    (doc(norm={"kind": "hilbert"}), "/norm/kind"),
    (doc(world={"kind": "box", "min": [0, 0], "max": [0, 1]}), "/world"),
    (doc(world={"kind": "blob"}), "/world/kind"),
    (doc(sites=[]), "/sites"),
    (doc(sites=[{"kind": "points", "coords": [[0, 0]]}, {"kind": "points", "coords": [[1, "x"]]}]),
     "/sites/1/coords/0/1"),
    (doc(sites=[{"kind": "points", "coords": [[0, 0]]}, {"kind": "points", "coords": [[1, 0, 0]]}]),
     "/sites/1/coords/0"),
    (doc(sites=[{"kind": "points", "coords": [[0, 0]]}, {"kind": "points", "coords": [[50, 0]]}]), "/sites/1"),
    (doc(sites=[{"kind": "disc", "center": [0, 0], "radius": -1}, {"kind": "points", "coords": [[1, 0]]}]),
     "/sites/0/radius"),
    (doc(sites=[{"kind": "star"}, {"kind": "points", "coords": [[1, 0]]}]), "/sites/0/kind"),
    (doc(rho=-2), "/rho"),
    (doc(extra=1), "/extra"),
    (doc(render={"width": 0}), "/render/width"),
])
def test_schema_errors_carry_pointer(text, path):
    assert schema_path(text) == path


def test_render_is_deterministic(tmp_path):
    scene = load_scene(str(SCENES / "two_points.json"))
    cfg = scene.configuration()
    cells = build_cells(cfg, directions=64)
    a = render_svg(cfg, cells)
    b = render_svg(cfg, build_cells(cfg, directions=64), str(tmp_path / "x.svg"))
    assert a == b == (tmp_path / "x.svg").read_text()
    assert a.startswith("<svg") and a.count('<g class="cell"') == 2 and a.count('<g class="site"') == 2
    empty = render_svg(cfg, [])
    assert '<g class="cell"' not in empty and '<g class="site"' in empty


def test_render_needs_plane():
    cfg = Configuration(NormedSpace.euclidean(3), Box([-1] * 3, [1] * 3),
                        [Points([[0, 0, 0]]), Points([[0.5, 0, 0]])])
    with pytest.raises(NotTwoDimensional):
        render_svg(cfg, [])


def test_json_ready():
    obj = {"a": np.float64(math.inf), "b": np.arange(2), "c": np.bool_(True), "d": (np.int64(3), -math.inf)}
    assert json.dumps(json_ready(obj), sort_keys=True) == '{"a": "inf", "b": [0, 1], "c": true, "d": [3, "-inf"]}'


def test_cli_certify(capsys, tmp_path):
    code, out, _ = run(["certify", "--scene", str(SCENES / "two_points.json"), "--epsilon", "0.3"], capsys)
    assert code == 0
    cert = json.loads(out)
    assert cert["regime"] == "general" and cert["Delta"] > 0 and "lambda" in cert
    code, out, _ = run(["certify", "--scene", str(SCENES / "two_points.json"), "--epsilon", "0.3", "--interior"],
                       capsys)
    assert code == 0 and json.loads(out)["regime"] == "interior"


def test_cli_domain_error(capsys, tmp_path):
    f = tmp_path / "linf.json"
    f.write_text(doc(norm={"kind": "linf"}))
    code, out, err = run(["certify", "--scene", str(f), "--epsilon", "0.1"], capsys)
    assert code == 1 and out == ""
    assert json.loads(err)["error"] == "NotUniformlyConvex"
    code, _, err = run(["certify", "--scene", str(SCENES / "two_points.json"), "--epsilon", "5"], capsys)
    assert code == 1 and json.loads(err)["error"] == "EpsilonTooLarge"


def test_cli_schema_and_usage_errors(capsys, tmp_path):
    f = tmp_path / "empty.json"
    f.write_text("{}")
    code, _, err = run(["cells", "--scene", str(f)], capsys)
    assert code == 2 and json.loads(err) == {"error": "SchemaError", "message": "required object", "path": "/norm"}
    code, _, err = run(["frobnicate"], capsys)
    assert code == 2 and json.loads(err)["error"] == "UsageError"
    code, _, err = run(["certify", "--scene", str(f)], capsys)
    assert code == 2
    code, _, err = run(["cells", "--scene", str(tmp_path / "missing.json")], capsys)
    assert code == 1 and json.loads(err)["error"] == "IoError"


def test_cli_cells_and_render(capsys, tmp_path):
    out_json, svg = tmp_path / "cells.json", tmp_path / "cells.svg"
    code, out, _ = run(["cells", "--scene", str(SCENES / "two_points.json"), "--directions", "8",
                        "--out", str(out_json), "--svg", str(svg)], capsys)
    assert code == 0 and out == ""
    data = json.loads(out_json.read_text())
    assert data["directions"] == 8 and [c["k"] for c in data["cells"]] == [0, 1]
    assert len(data["cells"][0]["fans"][0]["rays"]) == 8
    assert svg.read_text().count('<g class="cell"') == 2
    svg2 = tmp_path / "plain.svg"
    code, out, _ = run(["render", "--scene", str(SCENES / "two_points.json"), "--svg", str(svg2), "--no-cells"],
                       capsys)
    assert code == 0 and out == "" and '<g class="cell"' not in svg2.read_text()


def test_cli_counterexample_and_witness(capsys, tmp_path):
    code, out, _ = run(["counterexample", "eta_zero"], capsys)
    assert code == 0 and json.loads(out)["unstable"] is True
    code, out, _ = run(["counterexample", "rho_unbounded"], capsys)
    assert code == 0 and json.loads(out)["cell_distance"] == "inf"
    code, out, _ = run(["tcontinuity", "zero_site_distance", "--n", "50"], capsys)
    assert code == 0 and json.loads(out)["discontinuous"] is True
    code, _, err = run(["counterexample", "nope"], capsys)
    assert code == 2


def test_cli_experiment(capsys):
    code, out, _ = run(["experiment", "--scene", str(SCENES / "two_points.json"), "--epsilon", "0.3",
                        "--trials", "2", "--directions", "1024"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["passed"] and len(rep["trials"]) == 2 and rep["directions"] == 1024
