import json
import subprocess
import sys

import numpy as np
import pytest

from radiomap import metrics, phantom, stability, stats
from radiomap.cli import compute_features, run
from radiomap.cr import CrParams
from radiomap.fuse import build_stack
from radiomap.glcm import GlcmParams
from radiomap.imgio import load_pgm, load_raster, save_nifti, save_pgm
from radiomap.preprocess import minmax_normalize


@pytest.fixture
def slice_pgm(tmp_path, rng):
    path = tmp_path / "slice.pgm"
    path.write_bytes(save_pgm(rng.integers(0, 1000, (24, 20)), maxval=65535))
    return path


def run_json(capsys, argv):
    code = run(argv)
    out = capsys.readouterr()
    assert code == 0, out.err
    return json.loads(out.out)


def error_of(capsys, argv):
    code = run(argv)
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == code
    return code, err


def test_features_matches_library(tmp_path, capsys, slice_pgm):
    out = run_json(capsys, ["features", "--in", str(slice_pgm), "--cr", "--re", "--out", str(tmp_path / "f")])
    assert out["channels"] == ["cr", "re"]
    assert (tmp_path / "f.bin").exists() and (tmp_path / "f.json").exists()
    expected = compute_features(load_pgm(slice_pgm.read_bytes()).values, CrParams(), GlcmParams())
    for (name, got), (ref_name, ref) in zip(load_raster(tmp_path / "f"), expected):
        assert name == ref_name
        assert got.tobytes() == ref.astype("<f4").tobytes()


def test_features_naive_flag_gives_same_cr(tmp_path, capsys, slice_pgm):
    run_json(capsys, ["features", "--in", str(slice_pgm), "--cr", "--out", str(tmp_path / "a")])
    run_json(capsys, ["features", "--in", str(slice_pgm), "--cr", "--naive", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_features_config_and_flag_precedence(tmp_path, capsys, slice_pgm):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"s": 1, "num": 4, "m": 2}))
    run_json(capsys, ["features", "--in", str(slice_pgm), "--cr", "--config", str(cfg), "--m", "1",
                      "--out", str(tmp_path / "c")])
    (_, got), = load_raster(tmp_path / "c")
    (_, ref), = compute_features(load_pgm(slice_pgm.read_bytes()).values, CrParams(1, 4, 1), None)
    assert np.array_equal(got, ref.astype(np.float32))


@pytest.mark.parametrize("config", [{"s": 2, "num": 30, "m": 0}, {"alpha": 1.0}, {"window": 3}])
def test_features_invalid_config(tmp_path, capsys, slice_pgm, config):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config))
    code, err = error_of(capsys, ["features", "--in", str(slice_pgm), "--config", str(cfg), "--out", str(tmp_path / "x")])
    assert code == 3 and err["error"] == "config"


def test_features_threads_are_invisible(tmp_path, capsys, slice_pgm, monkeypatch):
    run_json(capsys, ["features", "--in", str(slice_pgm), "--threads", "1", "--out", str(tmp_path / "t1")])
    run_json(capsys, ["features", "--in", str(slice_pgm), "--threads", "4", "--out", str(tmp_path / "t4")])
    monkeypatch.setenv("RADIOMAP_THREADS", "2")
    run_json(capsys, ["features", "--in", str(slice_pgm), "--threads", "8", "--out", str(tmp_path / "t8")])
    ref = (tmp_path / "t1.bin").read_bytes()
    assert (tmp_path / "t4.bin").read_bytes() == ref == (tmp_path / "t8.bin").read_bytes()


def test_features_from_nifti(tmp_path, capsys, rng):
    vol = rng.integers(0, 4000, (3, 16, 18)).astype(np.int16)
    (tmp_path / "v.nii").write_bytes(save_nifti(vol, datatype=4))
    out = run_json(capsys, ["features", "--in", str(tmp_path / "v.nii"), "--slice", "2", "--cr",
                            "--out", str(tmp_path / "n")])
    assert (out["width"], out["height"]) == (18, 16)
    (_, got), = load_raster(tmp_path / "n")
    (_, ref), = compute_features(vol[2].astype(float), CrParams(), None)
    assert np.array_equal(got, ref.astype(np.float32))


def test_fuse_matches_library(tmp_path, capsys, slice_pgm):
    run_json(capsys, ["features", "--in", str(slice_pgm), "--out", str(tmp_path / "f")])
    out = run_json(capsys, ["fuse", "--raw", str(slice_pgm), "--maps", str(tmp_path / "f"), "--out", str(tmp_path / "s")])
    assert out["channels"] == ["flair", "cr", "re"]
    raw = minmax_normalize(load_pgm(slice_pgm.read_bytes()).values)
    ref = build_stack(raw, load_raster(tmp_path / "f"))
    assert [n for n, _ in load_raster(tmp_path / "s")] == ref.names
    assert np.array_equal(np.stack([a for _, a in load_raster(tmp_path / "s")]), ref.array())


def test_eval_identity(tmp_path, capsys):
    mask = np.zeros((8, 8), dtype=np.uint8)
    mask[2:5, 3:6] = 1
    (tmp_path / "p.pgm").write_bytes(save_pgm(mask))
    out = run_json(capsys, ["eval", "--pred", str(tmp_path / "p.pgm"), "--gt", str(tmp_path / "p.pgm")])
    assert out["dice"]["mean"] == 1.0
    assert out["schema_version"] == 1


def test_eval_directories(tmp_path, capsys, rng):
    pred_dir, gt_dir = tmp_path / "pred", tmp_path / "gt"
    pred_dir.mkdir()
    gt_dir.mkdir()
    pairs = []
    for k in range(4):
        p, g = rng.integers(0, 2, (10, 12)), rng.integers(0, 2, (10, 12))
        (pred_dir / f"s{k}.pgm").write_bytes(save_pgm(p))
        (gt_dir / f"s{k}.pgm").write_bytes(save_pgm(g * 255))
        pairs.append((p, g))
    out = run_json(capsys, ["eval", "--pred", str(pred_dir), "--gt", str(gt_dir), "--csv", str(tmp_path / "m.csv"),
                            "--out", str(tmp_path / "agg.json")])
    dices = [metrics.dice(metrics.confusion(p, g)) for p, g in pairs]
    assert out["n"] == 4
    assert out["dice"] == {"mean": metrics.aggregate(dices)["mean"], "sd": metrics.aggregate(dices, True)["sd"]}
    assert json.loads((tmp_path / "agg.json").read_text()) == out
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0].startswith("name,dice,precision,sensitivity") and len(lines) == 5

    (gt_dir / "extra.pgm").write_bytes(save_pgm(np.zeros((10, 12))))
    code, err = error_of(capsys, ["eval", "--pred", str(pred_dir), "--gt", str(gt_dir)])
    assert code == 5 and "extra.pgm" in err["message"]


def test_curve(tmp_path, capsys):
    path = tmp_path / "c.csv"
    path.write_text("score\n0.0\n0.4\n0.2\n0.6\n")
    assert run(["curve", "--in", str(path)]) == 0
    assert capsys.readouterr().out.strip() == "0.282843"
    out = run_json(capsys, ["curve", "--in", str(path), "--json"])
    assert out["sdd"] == stability.sdd(stability.load_curve(path.read_text()))


def test_curve_parse_error(tmp_path, capsys):
    path = tmp_path / "c.csv"
    path.write_text("score\nabc\n")
    code, err = error_of(capsys, ["curve", "--in", str(path)])
    assert code == 5 and "line 2" in err["message"]


def test_stats_matches_library(tmp_path, capsys, rng):
    base, treat = rng.random(12), rng.random(12) + 0.1
    path = tmp_path / "p.csv"
    path.write_text("baseline,treatment\n" + "".join(f"{float(b)!r},{float(t)!r}\n" for b, t in zip(base, treat)))
    out = run_json(capsys, ["stats", "--in", str(path), "--comparisons", "3"])
    res = stats.wilcoxon_signed_rank(base, treat)
    assert (out["statistic"], out["pvalue"], out["n_pairs"]) == (res.statistic, res.pvalue, 12)
    assert out["pvalue_adjusted"] == stats.bonferroni([res.pvalue], 3)[0]


def test_phantom_reproducible(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(phantom.random_spec(4, width=48, height=40, n_lesions=2).to_json())
    for name in ("a", "b"):
        run_json(capsys, ["phantom", "--spec", str(spec), "--seed", "77", "--out", str(tmp_path / name)])
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    assert (tmp_path / "a_mask.pgm").read_bytes() == (tmp_path / "b_mask.pgm").read_bytes()
    ref = phantom.PhantomSpec.from_json(spec.read_text())
    ref.seed = 77
    image, mask = phantom.generate(ref)
    (_, got), = load_raster(tmp_path / "a")
    assert got.tobytes() == image.astype("<f4").tobytes()
    assert np.array_equal(load_pgm((tmp_path / "a_mask.pgm").read_bytes()).values, mask)


def test_usage_errors(capsys):
    code, err = error_of(capsys, ["segment"])
    assert code == 2 and err["error"] == "usage"
    code, _ = error_of(capsys, ["curve"])
    assert code == 2


def test_io_and_format_errors(tmp_path, capsys):
    code, err = error_of(capsys, ["features", "--in", str(tmp_path / "none.pgm"), "--out", str(tmp_path / "x")])
    assert (code, err["error"]) == (4, "io")
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P2 1 1 255\n1")
    code, err = error_of(capsys, ["features", "--in", str(bad), "--out", str(tmp_path / "x")])
    assert (code, err["error"]) == (5, "format")


def test_console_script(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("epoch,score\n1,0.0\n2,0.4\n3,0.2\n4,0.6\n")
    proc = subprocess.run([sys.executable, "-m", "radiomap.cli", "curve", "--in", str(path)],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.strip() == "0.282843"
