import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from swmnet.cli import EXIT_DIMENSION, EXIT_IO, EXIT_PARSE, EXIT_USAGE, EXIT_VERIFY, EXIT_VERSION, main
from swmnet.model_io import generate_random_model, load_model, save_model, write_vector


def tsv(text):
    return list(csv.DictReader(io.StringIO(text.strip().split("\n\n")[0]), delimiter="\t"))


@pytest.fixture(scope="module")
def canon_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("models") / "canon.json"
    assert main(["generate", "--seed", "11", "-o", str(path)]) == 0
    return path


def test_generate_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["generate", "--layers", "16x16:4,16x4", "--seed", "5", "-o", str(a)])
    main(["generate", "--layers", "16x16:4,16x4", "--seed", "5", "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_generate_prints_seed_when_absent(capsys):
    assert main(["generate", "--layers", "4x2"]) == 0
    err = capsys.readouterr().err
    assert "# seed:" in err


def test_verify_canonical_exits_zero(canon_path, capsys):
    assert main(["verify", "--model", str(canon_path), "--trials", "100", "--seed", "1"]) == 0
    rows = tsv(capsys.readouterr().out)
    assert rows and all(r["status"] == "pass" for r in rows)


def test_verify_detects_corruption(canon_path, tmp_path, capsys, monkeypatch):
    import swmnet.verify as verify

    real = verify.matvec_fft
    monkeypatch.setattr(verify, "matvec_fft", lambda M, x: real(M, x) * (1 + 1e-6))
    assert main(["verify", "--model", str(canon_path), "--trials", "3", "--seed", "1"]) == EXIT_VERIFY
    assert "FAIL" in capsys.readouterr().out


def test_infer_k1_matches_dense_conversion(tmp_path, capsys):
    swm = generate_random_model("32x16:1,16x4", seed=2)
    dense = generate_random_model("32x16,16x4", seed=2)
    dense.layers[0].weights = swm.layers[0].weights.vectors.reshape(16, 32).copy()
    dense.layers[0].bias = swm.layers[0].bias
    dense.layers[1] = swm.layers[1]
    save_model(swm, tmp_path / "swm.json")
    save_model(dense, tmp_path / "dense.json")
    write_vector(np.random.default_rng(0).uniform(-1, 1, 32), tmp_path / "x.txt")
    main(["infer", "--model", str(tmp_path / "swm.json"), "--input", str(tmp_path / "x.txt"), "--json"])
    a = json.loads(capsys.readouterr().out)
    main(["infer", "--model", str(tmp_path / "dense.json"), "--input", str(tmp_path / "x.txt"), "--json"])
    b = json.loads(capsys.readouterr().out)
    np.testing.assert_allclose(a["output"], b["output"], rtol=0, atol=1e-12)
    assert a["class_index"] == b["class_index"]


def test_infer_tables_and_fixed(canon_path, tmp_path, capsys):
    write_vector(np.random.default_rng(1).uniform(-1, 1, 512), tmp_path / "x.txt")
    assert main(["infer", "--model", str(canon_path), "--input", str(tmp_path / "x.txt"), "--fixed", "32x20"]) == 0
    out = capsys.readouterr().out
    rows = tsv(out)
    assert [r["stored_weights"] for r in rows] == ["4096", "4096", "512", "640", "9344"]
    dev = float(out.split("max_abs_deviation\t")[1].split()[0])
    assert dev < 1e-4


def test_bench_reports_ratio_64(capsys):
    assert main(["bench", "--sizes", "512", "--k", "64", "--counts-only"]) == 0
    row = tsv(capsys.readouterr().out)[0]
    assert (row["m"], row["n"], row["k"]) == ("512", "512", "64")
    assert float(row["stored_ratio"]) == 64
    assert row["swm_complex_mults"] == "7168"


def test_bench_with_timing(capsys):
    assert main(["bench", "--sizes", "64x128", "--k", "4,16", "--reps", "3", "--warmup", "1", "--seed", "0"]) == 0
    rows = tsv(capsys.readouterr().out)
    assert len(rows) == 2 and all(float(r["speedup"]) > 0 for r in rows)


def test_sweep_table(canon_path, capsys):
    assert main(["sweep", "--model", str(canon_path), "--formats", "12x8,16x12", "--seed", "3"]) == 0
    rows = tsv(capsys.readouterr().out)
    assert [r["storage_bits"] for r in rows] == [str(12 * 9344), str(16 * 9344)]


def test_convert_round(tmp_path, capsys):
    dense = generate_random_model("64x64,64x10", seed=1)
    save_model(dense, tmp_path / "d.json")
    assert main(["convert", "--input", str(tmp_path / "d.json"), "--k", "16", "-o", str(tmp_path / "s.json")]) == 0
    rows = tsv(capsys.readouterr().out)
    assert len(rows) == 1 and rows[0]["stored_weights"] == "256"
    assert load_model(tmp_path / "s.json").layers[0].structured


def test_exit_codes(canon_path, tmp_path, capsys):
    assert main(["verify", "--model", str(tmp_path / "missing.json")]) == EXIT_IO
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["verify", "--model", str(tmp_path / "bad.json")]) == EXIT_PARSE
    obj = json.loads(canon_path.read_text())
    obj["format_version"] = 2
    (tmp_path / "v2.json").write_text(json.dumps(obj))
    assert main(["verify", "--model", str(tmp_path / "v2.json")]) == EXIT_VERSION
    write_vector(np.zeros(3), tmp_path / "short.txt")
    assert main(["infer", "--model", str(canon_path), "--input", str(tmp_path / "short.txt")]) == EXIT_DIMENSION
    assert main(["infer", "--model", str(canon_path), "--input", str(tmp_path / "short.txt"), "--fixed", "abc"]) == EXIT_PARSE
    assert main(["bench", "--k", "3", "--counts-only"]) == EXIT_DIMENSION
    with pytest.raises(SystemExit) as exc:
        main(["infer", "--bogus"])
    assert exc.value.code == EXIT_USAGE
    codes = {EXIT_USAGE, EXIT_IO, EXIT_PARSE, EXIT_DIMENSION, EXIT_VERIFY, EXIT_VERSION}
    assert len(codes) == 6 and 0 not in codes


def test_console_entry_point(canon_path):
    proc = subprocess.run([sys.executable, "-m", "swmnet.cli", "verify", "--model", str(canon_path),
                           "--trials", "5", "--seed", "0"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
