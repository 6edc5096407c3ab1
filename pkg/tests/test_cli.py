import json
from pathlib import Path

import pytest

from symrd.cli import main

REPO = Path(__file__).resolve().parents[1]
BINARY = str(REPO / "pairs" / "binary_hamming.json")
TERNARY = str(REPO / "pairs" / "ternary_hamming.json")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_validate(capsys):
    code, out = run(capsys, "validate", "--pair", BINARY)
    assert code == 0
    payload = json.loads(out)
    assert payload["d_star"] == "1/2"
    assert payload["grid_denominator"] == 1


def test_rdcurve_csv_schema(capsys):
    code, out = run(capsys, "rdcurve", "--pair", TERNARY, "--points", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "D,R_nats,R_bits,lambda_star,slope"
    assert len(lines) == 4


def test_ballprob_json(capsys):
    code, out = run(capsys, "ballprob", "--pair", BINARY, "--n", "4", "--D", "1/4")
    assert code == 0
    payload = json.loads(out)
    assert payload["prob_rational"] == "5/16"
    assert payload["approx"] is False


def test_ballprob_log_mode(capsys):
    code, out = run(capsys, "ballprob", "--pair", BINARY, "--n", "32", "--D", "1/4", "--log")
    payload = json.loads(out)
    assert payload["approx"] is True
    assert payload["prob_rational"] is None


def test_ldbounds_json(capsys):
    code, out = run(capsys, "ldbounds", "--pair", BINARY, "--n", "512", "--D", "1/4")
    payload = json.loads(out)
    assert payload["n0"] == 418
    assert payload["log_lower_nats"] <= payload["exact_log_prob_nats"] <= payload["log_upper_nats"]


def test_encode_decode_files(tmp_path, capsys):
    raw = bytes([0, 1, 1, 0] * 16)  # two blocks of n=32
    src = tmp_path / "input.bin"
    src.write_bytes(raw)
    enc = tmp_path / "out.symrd"
    dec = tmp_path / "roundtrip.bin"
    code, _ = run(
        capsys,
        "encode", "--pair", BINARY, "--n", "32", "--D", "1/4",
        "--seed", "99", "--input", str(src), "--output", str(enc),
    )
    assert code == 0
    assert enc.read_bytes()[:6] == b"SYMRD1"
    code, _ = run(
        capsys, "decode", "--pair", BINARY, "--input", str(enc), "--output", str(dec)
    )
    assert code == 0
    out_syms = dec.read_bytes()
    assert len(out_syms) == len(raw)
    # d-semifaithful: each decoded block within D of its source block
    for b in range(2):
        x = raw[b * 32 : (b + 1) * 32]
        y = out_syms[b * 32 : (b + 1) * 32]
        assert sum(a != c for a, c in zip(x, y)) <= 8


def test_encode_rejects_bad_alphabet(tmp_path, capsys):
    src = tmp_path / "bad.bin"
    src.write_bytes(bytes([0, 1, 2, 0] * 8))
    code = main(
        [
            "encode", "--pair", BINARY, "--n", "32", "--D", "1/4",
            "--input", str(src), "--output", str(tmp_path / "x"),
        ]
    )
    assert code == 2


def test_redundancy_sweep_csv(capsys):
    code, out = run(
        capsys,
        "redundancy-sweep", "--pair", BINARY, "--D", "1/4",
        "--nmin", "8", "--nmax", "32", "--points", "3",
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("n,p,log_p_nats,")
    assert len(lines) == 4


def test_converse_bound_csv(capsys):
    code, out = run(
        capsys,
        "converse-bound", "--pair", BINARY, "--D", "1/4",
        "--nmin", "32", "--nmax", "128", "--points", "3",
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "n,lower_nats,achievable_nats,normalized_gap,trivial"
    assert len(lines) == 4


def test_verify_all_exit_code(capsys):
    code, out = run(capsys, "verify-all", "--pair", TERNARY)
    assert code == 0
    assert "checks passed" in out
    assert "FAIL" not in out


def test_error_paths_return_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"distortion": [[0, 1], [0, 1]]}))
    code = main(["validate", "--pair", str(bad)])
    assert code == 1
