import hashlib
import json
import pathlib
import subprocess
import sys

import pytest

from vkpush.cli import main
from vkpush.oracle import tower_diagram

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

Z2 = str(FIXTURES / "z2.json")
HEIS = str(FIXTURES / "heisenberg.json")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    out = json.loads(captured.out) if captured.out.strip() else None
    err = json.loads(captured.err) if captured.err.strip() else None
    return code, out, err


@pytest.fixture(scope="module")
def tower_file(tmp_path_factory, z2_bundle):
    p, m, s = z2_bundle
    up = next(e for e in s.entries if e.t == 1)
    d = tower_diagram(up, (1, 2, -1, -2), 6, m.zero)
    path = tmp_path_factory.mktemp("cli") / "tower6.json"
    path.write_text(json.dumps(d.to_json_dict()))
    return str(path)


# -- certify -----------------------------------------------------------------


def test_certify_exact_rank_one_constants(capsys):
    code, out, err = run(capsys, "certify", Z2)
    assert code == 0 and err is None
    assert out["a"] == 1.0
    assert out["b"] == 2.0
    assert out["A"] == 5.0
    assert out["B"] == 4
    assert out["q_min"] == 4.0
    assert out["grid_spacing"] is None


def test_certify_rejects_nonpositive_grid(capsys):
    code, out, err = run(capsys, "certify", Z2, "--grid", "0")
    assert code == 64
    assert err["error"]["type"] == "UsageError"


def test_certify_uncovered_scheme_exits_three(capsys, tmp_path):
    obj = json.loads((FIXTURES / "z2.json").read_text())
    obj["scheme"]["entries"] = [e for e in obj["scheme"]["entries"] if e["t"] == "a"]
    path = tmp_path / "one_sided.json"
    path.write_text(json.dumps(obj))
    code, out, err = run(capsys, "certify", str(path))
    assert code == 3
    assert err["error"]["type"] == "CertificationError"


def test_certify_requires_a_scheme(capsys, tmp_path):
    obj = json.loads((FIXTURES / "z2.json").read_text())
    del obj["scheme"]
    path = tmp_path / "bare.json"
    path.write_text(json.dumps(obj))
    code, out, err = run(capsys, "certify", str(path))
    assert code == 2
    assert err["error"]["type"] == "ValidationError"


# -- validate ----------------------------------------------------------------


def test_validate_bundle_and_diagram(capsys, tower_file):
    code, out, err = run(capsys, "validate", Z2, tower_file)
    assert code == 0
    assert out["ok"] is True
    assert out["bundle"]["scheme_entries"] == 2
    assert out["diagrams"][0]["area"] == 13
    assert out["diagrams"][0]["boundary"] == "a b a^-1 b^-1"


def test_validate_rejects_corrupt_diagram(capsys, tower_file, tmp_path):
    obj = json.loads(open(tower_file).read())
    obj["darts"][0]["twin"] = obj["darts"][0]["id"]
    bad = tmp_path / "broken.json"
    bad.write_text(json.dumps(obj))
    code, out, err = run(capsys, "validate", Z2, str(bad))
    assert code == 2
    assert str(bad) in err["error"]["message"]


def test_missing_file_is_io_error(capsys):
    code, out, err = run(capsys, "certify", "/nonexistent/bundle.json")
    assert code == 1
    assert err["error"]["type"] == "InputError"


def test_unparseable_json_is_io_error(capsys, tmp_path):
    path = tmp_path / "mangled.json"
    path.write_text("{not json")
    code, out, err = run(capsys, "validate", str(path))
    assert code == 1
    assert "invalid JSON" in err["error"]["message"]


# -- push --------------------------------------------------------------------


def test_push_tower_reports_trace_and_checks(capsys, tower_file, tmp_path):
    render_dir = tmp_path / "pics"
    code, out, err = run(
        capsys, "push", Z2, tower_file, "--q", "4.5", "--render", str(render_dir)
    )
    assert code == 0
    assert out["boundary"] == "a b a^-1 b^-1"
    assert out["initial"]["norm"] == 7.0
    assert out["final"]["norm"] <= 4.5
    assert out["steps"] and out["sweeps"] <= out["bound_checks"]["sweep_cap"]
    checks = out["bound_checks"]
    assert all(v for v in checks.values() if isinstance(v, bool))
    for name in ("initial", "final"):
        assert (render_dir / f"{name}.dot").exists()
        svg = (render_dir / f"{name}.svg").read_text()
        assert svg.startswith("<svg") and "<circle" in svg


def test_push_radius_at_q_min_is_usage_error(capsys, tower_file):
    code, out, err = run(capsys, "push", Z2, tower_file, "--q", "4.0")
    assert code == 64
    assert "q_min" in err["error"]["message"]


def test_push_boundary_outside_corridor_is_invariant_error(capsys, z2_bundle, tmp_path):
    p, m, s = z2_bundle
    up = next(e for e in s.entries if e.t == 1)
    far = tower_diagram(up, (1, 2, -1, -2), 3, (8,))
    path = tmp_path / "far.json"
    path.write_text(json.dumps(far.to_json_dict()))
    code, out, err = run(capsys, "push", Z2, str(path), "--q", "4.5")
    assert code == 4
    assert err["error"]["type"] == "PushError"
    assert "boundary exceeds corridor" in err["error"]["message"]


# -- oracles -----------------------------------------------------------------


def test_area_oracle_with_certificate(capsys):
    code, out, err = run(
        capsys,
        "area-oracle",
        Z2,
        "--word",
        "a a b a^-1 a^-1 b^-1",
        "--max-area",
        "4",
        "--certificate",
    )
    assert code == 0
    assert out["area"] == 2
    assert len(out["certificate"]) == 2
    assert all(c["relator"] for c in out["certificate"])


def test_area_oracle_unknown_within_bounds(capsys):
    code, out, err = run(capsys, "area-oracle", Z2, "--word", "b", "--max-area", "3")
    assert code == 0
    assert out["area"] == "unknown"


def test_sample_is_deterministic(capsys):
    code1, out1, _ = run(capsys, "sample", Z2, "--q", "5", "--count", "4", "--seed", "9")
    code2, out2, _ = run(capsys, "sample", Z2, "--q", "5", "--count", "4", "--seed", "9")
    assert code1 == code2 == 0
    assert out1 == out2
    assert len(out1["words"]) == 4


def test_sample_budget_exhaustion(capsys):
    code, out, err = run(
        capsys, "sample", Z2, "--q", "5", "--count", "2", "--target-len", "2"
    )
    assert code == 2
    assert err["error"]["type"] == "SearchBudgetError"


# -- bench -------------------------------------------------------------------


def test_bench_report_shape_and_hashes(capsys):
    code, out, err = run(
        capsys,
        "bench",
        Z2,
        "--q",
        "5",
        "--count",
        "3",
        "--seed",
        "3",
        "--oracle-check",
        "--ar",
        "n*log(n),log(n)",
    )
    assert code == 0 and err is None
    digest = hashlib.sha256(open(Z2, "rb").read()).hexdigest()
    assert out["inputs"]["bundle"]["sha256"] == digest
    assert out["constants"]["q_min"] == 4.0
    assert out["audit_summary"]["words"] == 3
    assert out["audit_summary"]["all_passed"] is True
    assert out["audit_summary"]["steps"] > 0
    assert set(out["predicted_area_bounds"]["at_n"]) == {"10", "100", "1000"}
    for r in out["results"]:
        assert r["passed"] is True
        assert r["final_area"] >= r["initial_area"]
        ob = r["oracle"]
        if ob["brute_area"] != "unknown":
            assert ob["pushed_at_least_brute"] is True
    assert "seconds" in out["timing"]


def test_bench_deterministic_modulo_timing(capsys, monkeypatch):
    def grab():
        code, out, err = run(
            capsys, "bench", HEIS, "--q", "8.6", "--count", "5", "--seed", "17",
            "--grid", "0.01",
        )
        assert code == 0
        out.pop("timing")
        return json.dumps(out, sort_keys=True)

    serial = grab()
    monkeypatch.setenv("VKPUSH_THREADS", "4")
    threaded = grab()
    assert serial == threaded


def test_bench_rejects_malformed_ar(capsys):
    code, out, err = run(
        capsys, "bench", Z2, "--q", "5", "--count", "0", "--ar", "n**2"
    )
    assert code == 64
    code, out, err = run(
        capsys, "bench", Z2, "--q", "5", "--count", "0", "--ar", "__import__('os'),n"
    )
    assert code == 64


# -- render and wiring ---------------------------------------------------------


def test_render_writes_dot_and_svg(capsys, tower_file, tmp_path):
    code, out, err = run(
        capsys, "render", Z2, tower_file, "--out", str(tmp_path), "--name", "pic"
    )
    assert code == 0
    assert out["edges"] == 28
    dot = (tmp_path / "pic.dot").read_text()
    assert dot.startswith("graph") and '[label="a"]' in dot
    assert (tmp_path / "pic.svg").read_text().startswith("<svg")


def test_unknown_subcommand_is_usage(capsys):
    code, out, err = run(capsys, "frobnicate", Z2)
    assert code == 64


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "vkpush", "certify", Z2],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["q_min"] == 4.0
