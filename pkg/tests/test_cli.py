from __future__ import annotations

import io
import json

import numpy as np
import pytest

from qfract.cli import EXIT_CHECK, EXIT_OK, EXIT_USAGE, main, parse_grid, parse_slice, parse_surface
from qfract.export import (
    graph_raster,
    log_normalize,
    read_csv,
    read_manifest,
    read_pgm,
    sha256_file,
    write_csv,
    write_manifest,
    write_pgm,
)
from qfract.ifs import IFSSystem, run
from qfract.polytopes import get_configuration, polytope4


def qfract(*argv):
    buf = io.StringIO()
    code = main([str(a) for a in argv], out=buf)
    return code, buf.getvalue()


# exporters


def test_empty_csv_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    write_csv(path, ["chain", "x1"], [np.empty(0, dtype=np.int64), np.empty(0)])
    assert path.read_bytes() == b"chain,x1\n"
    header, data = read_csv(path)
    assert header == ["chain", "x1"] and data.shape == (0, 2)


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    cols = [np.arange(50, dtype=np.int64), rng.normal(size=50) * 10.0 ** rng.integers(-300, 300, 50), rng.uniform(size=50)]
    path = tmp_path / "r.csv"
    write_csv(path, ["i", "a", "b"], cols)
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    _, data = read_csv(path)
    assert np.array_equal(data[:, 0], cols[0])
    assert np.array_equal(data[:, 1], cols[1]) and np.array_equal(data[:, 2], cols[2])


def test_constant_pgm(tmp_path):
    scaled, lo, hi = log_normalize(np.full(4, 3.0))
    assert lo == hi == pytest.approx(np.log10(4.0))
    path = tmp_path / "c.pgm"
    write_pgm(path, scaled.reshape(2, 2))
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n2 2\n65535\n")
    pix = read_pgm(path)
    assert pix.shape == (2, 2) and len(set(pix.ravel())) == 1


def test_pgm_is_big_endian_16_bit(tmp_path):
    path = tmp_path / "g.pgm"
    write_pgm(path, np.array([[0.0, 1.0], [0.5, 1 / 65535]]))
    raw = path.read_bytes()
    head = b"P5\n2 2\n65535\n"
    assert raw.startswith(head)
    body = raw[len(head) :]
    assert body == bytes([0, 0, 0xFF, 0xFF, 0x80, 0x00, 0x00, 0x01])
    with pytest.raises(ValueError):
        write_pgm(path, np.array([[1.5]]))


def test_log_normalize_and_graph():
    scaled, lo, hi = log_normalize([0.0, 9.0, 99.0])
    assert (lo, hi) == (0.0, 2.0)
    assert np.allclose(scaled, [0.0, 0.5, 1.0])
    g = graph_raster(np.array([0.0, 1.0]), height=4)
    assert g[:, 1].all() and list(g[:, 0]) == [0, 0, 0, 1]


def test_manifest_schema(tmp_path):
    out = tmp_path / "o.csv"
    write_csv(out, ["x1"], [np.ones(3)])
    m = write_manifest(tmp_path / "m.json", "sample", {"seed": 1}, {"points": out})
    assert m["schema"] == 1 and m["outputs"]["points"]["sha256"] == sha256_file(out)
    assert read_manifest(tmp_path / "m.json")["params"] == {"seed": 1}
    (tmp_path / "bad.json").write_text(json.dumps({"schema": 99}))
    with pytest.raises(ValueError):
        read_manifest(tmp_path / "bad.json")


# argument syntax


def test_flag_parsers():
    assert parse_grid("1024x512") == (1024, 512) and parse_grid("8192") == (8192,)
    assert parse_slice("4:0.5:0.51") == (3, 0.5, 0.51)
    assert parse_surface("slice:4:0.5") == ("slice", 3, 0.5)
    assert parse_surface("torus:ab") == ("torus", "ab")
    assert parse_surface("sphere") == ("sphere",)


# commands


def test_polytope_show_cell600():
    code, text = qfract("polytope", "show", "cell600")
    lines = text.strip().split("\n")
    assert code == EXIT_OK and lines[0] == "x1,x2,x3,x4" and len(lines) == 121
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert np.array_equal(rows, polytope4("cell600").vertices)


def test_polytope_list():
    code, text = qfract("polytope", "list")
    assert code == EXIT_OK
    assert "cell120,600,3" in text and "pentagon,5,1" in text


def test_polytope_show_to_file_writes_manifest(tmp_path):
    out = tmp_path / "v.csv"
    assert qfract("polytope", "show", "octahedron", "--out", out)[0] == EXIT_OK
    m = read_manifest(tmp_path / "v.manifest.json")
    assert m["command"] == "polytope" and m["outputs"]["vertices"]["sha256"] == sha256_file(out)
    assert qfract("verify", "--manifest", tmp_path / "v.manifest.json")[0] == EXIT_OK


def test_sample_csv_layout(tmp_path):
    out = tmp_path / "p.csv"
    code, _ = qfract("sample", "--polytope", "pentagon", "--alpha", 0.58, "--points", 500, "--seed", 4, "--out", out)
    assert code == EXIT_OK
    header, data = read_csv(out)
    assert header == ["chain", "step", "map_index", "x1", "x2"]
    ref = run(IFSSystem(get_configuration("pentagon"), 0.58), 500, seed=4)
    assert np.array_equal(data[:, 1], ref.steps) and np.array_equal(data[:, 2], ref.maps)
    assert np.array_equal(data[:, 3:], ref.points)


def test_sample_slice_is_one_based(tmp_path):
    full, cut = tmp_path / "f.csv", tmp_path / "s.csv"
    common = ["sample", "--polytope", "cell16", "--alpha", 0.5, "--points", 20000, "--seed", 2]
    qfract(*common, "--out", full)
    qfract(*common, "--slice", "4:0.3:0.6", "--out", cut)
    _, f = read_csv(full)
    header, s = read_csv(cut)
    assert header == ["chain", "step", "map_index", "x1", "x2", "x3"]
    keep = (f[:, 6] > 0.3) & (f[:, 6] < 0.6)
    assert np.array_equal(s, np.delete(f[keep], 6, axis=1))


def test_sample_is_bit_reproducible(tmp_path):
    args = ["sample", "--polytope", "octahedron", "--alpha", 0.5, "--points", 3000, "--seed", 8, "--chains", 3]
    qfract(*args, "--threads", 1, "--out", tmp_path / "a.csv")
    qfract(*args, "--threads", 1, "--out", tmp_path / "b.csv")
    qfract(*args, "--threads", 3, "--out", tmp_path / "c.csv")
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()
    _, data = read_csv(tmp_path / "a.csv")
    assert list(np.unique(data[:, 0])) == [0, 1, 2]
    assert np.all(np.diff(data[:, 0]) >= 0)


def test_density_outputs_and_replay(tmp_path):
    out, img = tmp_path / "d.csv", tmp_path / "d.pgm"
    code, text = qfract("density", "--polytope", "pentagon", "--alpha", 0.58, "--depth", 3, "--grid", 1024, "--out", out, "--image", img)
    assert code == EXIT_OK and "integral" in text
    header, data = read_csv(out)
    assert header == ["x1", "x2", "weight", "f"] and data.shape == (1024, 4)
    assert data[:, 2] @ data[:, 3] == pytest.approx(2 * np.pi, rel=1e-3)
    pix = read_pgm(img)
    assert pix.shape == (256, 1024) and pix.max() == 65535
    m = read_manifest(tmp_path / "d.manifest.json")
    f = data[:, 3]
    assert m["image"]["min"] == pytest.approx(np.log10(f.min() + 1)) and m["image"]["max"] == pytest.approx(np.log10(f.max() + 1))
    code, text = qfract("verify", "--manifest", tmp_path / "d.manifest.json")
    assert code == EXIT_OK and text.count("PASS") == 2


def test_density_slice_image(tmp_path):
    out, img = tmp_path / "s.csv", tmp_path / "s.pgm"
    code, _ = qfract("density", "--polytope", "cell16", "--alpha", 0.5, "--depth", 2, "--surface", "slice:4:0.5", "--grid", "32x16", "--out", out, "--image", img)
    assert code == EXIT_OK
    _, data = read_csv(out)
    assert np.allclose(data[:, 3], 0.5)
    assert read_pgm(img).shape == (16, 32)


def test_density_usage_errors(tmp_path):
    base = ["density", "--alpha", 0.5, "--depth", 1, "--out", tmp_path / "x.csv"]
    assert qfract(*base, "--polytope", "octahedron", "--surface", "slice:4:0.5")[0] == EXIT_USAGE
    assert qfract(*base, "--polytope", "cell16", "--grid", "8x8x8", "--image", tmp_path / "x.pgm")[0] == EXIT_USAGE
    assert qfract(*base, "--polytope", "cell600", "--depth", 5, "--method", "exact", "--grid", "8x8x8")[0] == EXIT_USAGE


def test_dim_command(tmp_path):
    pts = tmp_path / "p.csv"
    qfract("sample", "--polytope", "pentagon", "--alpha", 0.58, "--points", 20000, "--seed", 1, "--out", pts)
    code, text = qfract("dim", "--input", pts, "--subsample", 10000, "--out", tmp_path / "c.csv", "--json", tmp_path / "f.json")
    assert code == EXIT_OK and text.startswith("D = ")
    fit = json.loads((tmp_path / "f.json").read_text())
    assert fit["points"] == 10000 and 0.8 < fit["dimension"] < 1.0
    header, curve = read_csv(tmp_path / "c.csv")
    assert header == ["r", "C", "pairs"] and len(curve) == 30 and np.all(np.diff(curve[:, 1]) >= 0)
    assert qfract("verify", "--manifest", tmp_path / "c.manifest.json")[0] == EXIT_OK
    # a changed input makes the replay fail
    with open(pts, "a") as fh:
        fh.write("0,1,0,1,0\n")
    assert qfract("verify", "--manifest", tmp_path / "c.manifest.json")[0] == EXIT_CHECK


def test_replay_detects_hash_mismatch(tmp_path):
    out = tmp_path / "p.csv"
    qfract("sample", "--polytope", "pentagon", "--alpha", 0.5, "--points", 100, "--out", out)
    mpath = tmp_path / "p.manifest.json"
    m = json.loads(mpath.read_text())
    m["outputs"]["points"]["sha256"] = "0" * 64
    mpath.write_text(json.dumps(m))
    code, text = qfract("verify", "--manifest", mpath)
    assert code == EXIT_CHECK and "FAIL" in text


def test_verify_suite():
    code, text = qfract("verify", "--suite", "clifford", "--suite", "polytopes")
    assert code == EXIT_OK
    assert text.count("PASS") == 6 and "FAIL" not in text
    assert qfract("verify", "--suite", "nonsense")[0] == EXIT_USAGE


def test_usage_errors(tmp_path, capsys):
    assert qfract("sample", "--bogus")[0] == EXIT_USAGE
    assert qfract("frobnicate")[0] == EXIT_USAGE
    assert qfract()[0] == EXIT_USAGE
    assert qfract("sample", "--polytope", "pentagon", "--alpha", 1.5, "--points", 10, "--out", tmp_path / "x.csv")[0] == EXIT_USAGE
    assert qfract("sample", "--polytope", "pentagon", "--alpha", 0.5)[0] == EXIT_USAGE
    err = capsys.readouterr().err.strip().split("\n")
    assert all(line.startswith("qfract: error: ") for line in err)
    with pytest.raises(SystemExit) as exc:
        main(["sample", "--help"], out=io.StringIO())
    assert exc.value.code == 0


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"polytope": "octahedron", "alpha": 0.5, "points": 50, "seed": 9}))
    out = tmp_path / "c.csv"
    assert qfract("sample", "--config", cfg, "--points", 20, "--out", out)[0] == EXIT_OK
    params = read_manifest(tmp_path / "c.manifest.json")["params"]
    assert (params["polytope"], params["alpha"], params["points"], params["seed"]) == ("octahedron", 0.5, 20, 9)
    cfg.write_text(json.dumps({"colour": "red"}))
    assert qfract("sample", "--config", cfg, "--out", out)[0] == EXIT_USAGE


def test_threads_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("QFRACT_THREADS", "3")
    out = tmp_path / "t.csv"
    qfract("sample", "--polytope", "pentagon", "--alpha", 0.5, "--points", 10, "--out", out)
    assert read_manifest(tmp_path / "t.manifest.json")["params"]["threads"] == 3
    qfract("sample", "--polytope", "pentagon", "--alpha", 0.5, "--points", 10, "--threads", 2, "--out", out)
    assert read_manifest(tmp_path / "t.manifest.json")["params"]["threads"] == 2
