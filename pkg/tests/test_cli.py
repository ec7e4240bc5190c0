import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quatcomplete import SolverConfig, write_png
from quatcomplete.cli import CSV_HEADER, RunManifest, UsageError, bench_cells, main, synthetic_problem

REPORT_KEYS = {"input", "variant", "mr", "seed", "psnr", "ssim", "observed_psnr", "observed_ssim",
               "iters", "final_rank", "rank_adjusted_at", "converged", "elapsed_seconds", "re_trace"}


@pytest.fixture
def png(tmp_path, small_image):
    path = tmp_path / "img.png"
    write_png(path, small_image)
    return str(path)


def test_help_and_usage_errors(capsys):
    assert main(["--help"]) == 0
    assert main([]) == 2
    assert main(["inpaint", "x.png", "--variant", "qxyz", "--out", "o"]) == 2
    assert main(["synth", "--mr", "1.5"]) == 2
    assert main(["synth", "--rank", "500"]) == 2


def test_missing_input_is_a_run_failure(tmp_path, capsys):
    assert main(["inpaint", str(tmp_path / "nope.png"), "--out", str(tmp_path / "o")]) == 1


def test_bad_solver_setting_is_a_usage_error(png, tmp_path, capsys):
    assert main(["inpaint", png, "--beta", "0.5", "--out", str(tmp_path / "o")]) == 2


def test_inpaint_artifacts(png, tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["inpaint", png, "--mr", "0.5", "--variant", "qfnn", "--seed", "3", "--out", str(out)])
    report = json.loads((out / "report.json").read_text())
    assert code == (0 if report["converged"] else 1)
    for name in ("observed.png", "completed.png", "mask.txt", "report.json", "manifest.ini"):
        assert (out / name).is_file()
    assert set(report) == REPORT_KEYS
    assert report["variant"] == "qfnn" and report["mr"] == 0.5 and report["seed"] == 3
    assert report["psnr"] > report["observed_psnr"]
    assert report["iters"] == len(report["re_trace"])
    mask_lines = (out / "mask.txt").read_text().splitlines()
    assert mask_lines[0] == "48 48"


def test_inpaint_with_explicit_mask(png, tmp_path, capsys):
    first = tmp_path / "a"
    main(["inpaint", png, "--mr", "0.3", "--seed", "5", "--out", str(first), "--max-iters", "20"])
    second = tmp_path / "b"
    main(["inpaint", png, "--mask", str(first / "mask.txt"), "--out", str(second), "--max-iters", "20"])
    assert (first / "mask.txt").read_text() == (second / "mask.txt").read_text()


def test_iteration_cap_exits_one(png, tmp_path, capsys):
    assert main(["inpaint", png, "--max-iters", "3", "--out", str(tmp_path / "o")]) == 1
    assert "did not reach tol" in capsys.readouterr().err


def test_synth_zero_rank_is_exact(capsys, tmp_path):
    out = tmp_path / "s.json"
    code = main(["synth", "--rows", "20", "--cols", "15", "--rank", "0", "--out", str(out)])
    report = json.loads(out.read_text())
    assert code == 0
    assert report["recovery_error"] == 0.0 and report["iters"] == 0
    assert json.loads(capsys.readouterr().out) == report


def test_synth_recovers_low_rank(capsys):
    assert main(["synth", "--rows", "40", "--cols", "30", "--rank", "3", "--d0", "10",
                 "--variant", "qdnn", "--seed", "2"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["recovery_error"] <= 1e-2
    assert report["estimated_rank"] == 3


def test_synthetic_problem_is_seeded():
    a, ma = synthetic_problem(12, 9, 2, 0.4, seed=4)
    b, mb = synthetic_problem(12, 9, 2, 0.4, seed=4)
    assert np.array_equal(a.data, b.data) and ma == mb
    with pytest.raises(UsageError):
        synthetic_problem(5, 5, 6, 0.5, 0)


def test_bench_grid(png, tmp_path, capsys):
    out = tmp_path / "bench"
    main(["bench", png, "--mrs", "0.3", "--variants", "qdfn", "qdnn", "qfnn", "--max-iters", "30",
          "--out", str(out)])
    with open(out / "bench.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 1 + 3
    assert [r[2] for r in rows[1:]] == ["qdfn", "qdnn", "qfnn"]


def test_bench_cell_order(tmp_path):
    m = RunManifest("bench", ("a.png",), ("qfnn", "qdfn", "qdnn"), (0.5, 0.7), out=str(tmp_path))
    cells = bench_cells(m)
    assert len(cells) == 6
    assert [(c[1], c[2]) for c in cells[:3]] == [(0.5, "qfnn"), (0.5, "qdfn"), (0.5, "qdnn")]
    assert all(c[1] == 0.7 for c in cells[3:])


def test_bench_parallel_matches_serial(png, tmp_path, capsys):
    args = ["bench", png, "--mrs", "0.3", "0.6", "--variants", "qdfn", "--max-iters", "15"]
    main(args + ["--out", str(tmp_path / "s")])
    main(args + ["--jobs", "2", "--out", str(tmp_path / "p")])

    def strip(path):
        with open(path, newline="") as fh:
            return [r[:-1] for r in csv.reader(fh)]
    assert strip(tmp_path / "s" / "bench.csv") == strip(tmp_path / "p" / "bench.csv")


def test_replay_reproduces_the_report(png, tmp_path, capsys):
    out = tmp_path / "run"
    main(["inpaint", png, "--mr", "0.5", "--seed", "1", "--max-iters", "40", "--out", str(out)])
    again = tmp_path / "again"
    main(["replay", str(out / "manifest.ini"), "--out", str(again)])
    a = json.loads((out / "report.json").read_text())
    b = json.loads((again / "report.json").read_text())
    a.pop("elapsed_seconds"), b.pop("elapsed_seconds")
    assert a == b
    assert (out / "completed.png").read_bytes() == (again / "completed.png").read_bytes()


def test_replay_rejects_broken_manifest(tmp_path, capsys):
    path = tmp_path / "m.ini"
    path.write_text("[run]\ncommand = inpaint\n")
    assert main(["replay", str(path)]) == 2


def test_manifest_validation():
    with pytest.raises(UsageError):
        RunManifest("inpaint", ("a.png", "b.png"), ("qfnn",), (0.5,))
    with pytest.raises(UsageError):
        RunManifest("bench", ("a.png",), ("qxyz",), (0.5,))
    with pytest.raises(UsageError):
        RunManifest("bench", ("a.png",), ("qfnn",), (1.5,))
    with pytest.raises(UsageError):
        RunManifest("plot", ("a.png",), ("qfnn",), (0.5,))


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.sampled_from(["qdfn", "qdnn", "qfnn"]), min_size=1, max_size=3),
    st.lists(st.floats(0, 1), min_size=1, max_size=3),
    st.integers(0, 2**31 - 1),
    st.one_of(st.none(), st.floats(1e-3, 10)),
    st.integers(1, 60),
    st.floats(1.001, 2.0),
)
def test_manifest_round_trip(variants, mrs, seed, lam, d0, beta):
    cfg = SolverConfig(lam=lam, d0=d0, beta=beta, seed=seed)
    m = RunManifest("bench", ("x.png", "dir/y.png"), tuple(variants), tuple(mrs), seed=seed,
                    config=cfg, out="o", jobs=2)
    assert RunManifest.from_ini(m.to_ini()) == m
