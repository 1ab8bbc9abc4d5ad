import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from courtreg.cli import EXIT_DATA, EXIT_FALLBACK, EXIT_OK, EXIT_USAGE, main
from courtreg.court import build_layout
from courtreg.formats import save_homography, save_json, save_layout, save_tensor
from courtreg.heatmaps import ClassMap, one_hot, render_gt_class_map
from courtreg.homography import Homography
from test_synth import tree_equal

GOLDEN = Path(__file__).parent / "golden"
QUARTER = Homography(np.array([[0.25, 0, 100], [0, 0.25, 50], [0, 0, 1.0]]))


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "ds"
    assert main(["synth", "--n", "5", "--seed", "42", "--out", str(out)]) == EXIT_OK
    return out


def test_grid_defaults(tmp_path, capsys):
    assert main(["grid", "--out", str(tmp_path / "l.json")]) == EXIT_OK
    text = capsys.readouterr().out
    assert "175 205 235 265 295 325" in text
    assert "classes: 94" in text
    doc = json.loads((tmp_path / "l.json").read_text())
    assert len(doc["entries"]) == 94


def test_grid_two_rows(tmp_path, capsys):
    assert main(["grid", "--rows", "2", "--out", str(tmp_path / "l.json")]) == EXIT_USAGE
    assert "rows" in capsys.readouterr().err
    assert not (tmp_path / "l.json").exists()


def test_grid_uniform_notice(tmp_path, capsys):
    assert main(["grid", "--w0-cm", "250", "--out", str(tmp_path / "l.json")]) == EXIT_OK
    assert "uniform" in capsys.readouterr().out


def test_unknown_flag_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["grid", "--bogus", "--out", str(tmp_path / "l.json")])
    assert exc.value.code == EXIT_USAGE


def test_synth_twice_identical(tmp_path, dataset):
    assert main(["synth", "--n", "5", "--seed", "42", "--out", str(tmp_path / "again")]) == EXIT_OK
    assert tree_equal(dataset, tmp_path / "again")


def test_synth_zero(tmp_path):
    assert main(["synth", "--n", "0", "--out", str(tmp_path / "x")]) == EXIT_USAGE


def test_synth_bad_dropout(tmp_path):
    assert main(["synth", "--n", "1", "--dropout", "2", "--out", str(tmp_path / "x")]) == EXIT_USAGE


def estimate_args(ds, heatmaps, out):
    return ["estimate", "--heatmaps", str(heatmaps), "--layout", str(ds / "layout.json"),
            "--fallback", str(ds / "fallback.json"), "--out", str(out)]


def test_estimate_perfect_frame(tmp_path, dataset, capsys):
    out = tmp_path / "r.json"
    args = estimate_args(dataset, dataset / "heatmaps" / "frame_00000.kchm", out)
    assert main(args + ["--strict"]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["used_fallback"] is False and doc["inlier_count"] >= 4
    assert "fallback: False" in capsys.readouterr().out


def test_estimate_background_falls_back(tmp_path, dataset):
    bg = tmp_path / "bg.kchm"
    save_tensor(bg, ClassMap(np.full((135, 240), 93), 94))
    out = tmp_path / "r.json"
    assert main(estimate_args(dataset, bg, out)) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["used_fallback"] is True and doc["fallback_reason"]
    assert main(estimate_args(dataset, bg, out) + ["--strict"]) == EXIT_FALLBACK


def test_estimate_missing_file(tmp_path, dataset):
    assert main(estimate_args(dataset, tmp_path / "nope.kchm", tmp_path / "r.json")) == EXIT_DATA
    assert not (tmp_path / "r.json").exists()


def test_estimate_corrupt_tensor(tmp_path, dataset):
    bad = tmp_path / "bad.kchm"
    bad.write_bytes(b"KCHM" + bytes(30))
    assert main(estimate_args(dataset, bad, tmp_path / "r.json")) == EXIT_DATA


def eval_args(ds, manifest, out):
    return ["eval", "--manifest", str(manifest), "--layout", str(ds / "layout.json"),
            "--fallback", str(ds / "fallback.json"), "--out", str(out)]


def test_eval_report(tmp_path, dataset, capsys):
    out = tmp_path / "rep.json"
    assert main(eval_args(dataset, dataset / "manifest.json", out)) == EXIT_OK
    text = capsys.readouterr().out
    assert "mean error:" in text and "below 1 m: 100.0%" in text
    doc = json.loads(out.read_text())
    assert set(doc) >= {"per_frame_error_cm", "mean_error_cm", "pct_below_100cm", "fallback_count"}
    assert len(doc["per_frame_error_cm"]) == 5
    assert doc["pct_below_100cm"] == 100 and doc["fallback_count"] == 0
    assert doc["mean_error_cm"] == pytest.approx(np.mean(doc["per_frame_error_cm"]))


def test_eval_jobs_independent(tmp_path, dataset):
    main(eval_args(dataset, dataset / "manifest.json", tmp_path / "a.json"))
    main(eval_args(dataset, dataset / "manifest.json", tmp_path / "b.json") + ["--jobs", "3"])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_eval_empty_manifest(tmp_path, dataset):
    save_json(tmp_path / "m.json", {"frames": []})
    assert main(eval_args(dataset, tmp_path / "m.json", tmp_path / "rep.json")) == EXIT_DATA


def overlay(tmp_path, h, image=None, template=None):
    img = tmp_path / "in.png"
    (image or Image.new("RGB", (960, 540), (40, 90, 40))).save(img)
    hp = tmp_path / "h.json"
    if isinstance(h, str):
        hp.write_text(h)
    else:
        save_homography(hp, h)
    tp = tmp_path / "layout.json"
    save_layout(tp, build_layout())
    out = tmp_path / "out.png"
    code = main(["overlay", "--image", str(img), "--homography", str(hp), "--template", str(template or tp),
                 "--out", str(out)])
    return code, out


def test_overlay_golden(tmp_path):
    code, out = overlay(tmp_path, QUARTER)
    assert code == EXIT_OK
    got = np.asarray(Image.open(out).convert("RGB"))
    want = np.asarray(Image.open(GOLDEN / "overlay_quarter_scale.png").convert("RGB"))
    np.testing.assert_array_equal(got, want)
    # sidelines at y = 0 and y = 1500 cm land on rows 50 and 425
    magenta = (got == [255, 0, 255]).all(axis=2)
    full_rows = np.flatnonzero(magenta.sum(axis=1) > 300)
    assert full_rows.tolist() == [50, 51, 424, 425]


def test_overlay_out_of_frame(tmp_path):
    far = Homography(np.array([[0.25, 0, 5000], [0, 0.25, 5000], [0, 0, 1.0]]))
    src = Image.new("RGB", (960, 540), (40, 90, 40))
    code, out = overlay(tmp_path, far, src)
    assert code == EXIT_OK
    np.testing.assert_array_equal(np.asarray(Image.open(out).convert("RGB")), np.asarray(src))


def test_overlay_malformed_homography(tmp_path):
    code, out = overlay(tmp_path, '{"h": "nope"}')
    assert code == EXIT_DATA and not out.exists()


def test_overlay_template_only_json(tmp_path):
    tp = tmp_path / "t.json"
    save_json(tp, build_layout().template.to_dict())
    code, _ = overlay(tmp_path, QUARTER, template=tp)
    assert code == EXIT_OK
