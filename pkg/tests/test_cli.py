from __future__ import annotations

import pytest

from lutdecoder import clut, lut
from lutdecoder.cli import main


def test_report_sizes(capsys):
    assert main(["report-sizes", "--distance", "3", "--rounds", "2"]) == 0
    assert capsys.readouterr().out.strip() == "[d=3,m=2]  address 8  entry 13  LUT 416 B  total 832 B"
    assert main(["report-sizes"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 5


def test_usage_errors(capsys):
    assert main(["run", "--distance", "3", "--rounds", "2"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["run", "--distance", "3", "--rounds", "2", "--bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1
    assert main(["report-sizes", "--distance", "3"]) == 1


def test_build_error_exit_code(capsys):
    assert main(["run", "--distance", "4", "--rounds", "3", "--pphys", "0.01", "--trials", "10"]) == 2


def test_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code = main(
        ["run", "--distance", "3", "--rounds", "2", "--pphys", "0.01", "--pphys", "0.02",
         "--trials", "500", "--workers", "1", "--out", str(out)]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "p,d,m,cycles,trials,logical_errors,ler,stderr,decoder_failures"
    assert len(lines) == 3 and lines[1].startswith("0.01,3,2,5,500,")


def test_sweep(capsys):
    code = main(["sweep", "--distance", "3", "--rounds", "1", "--rounds", "2", "--pphys", "0.03",
                 "--trials", "2000", "--workers", "1"])
    assert code == 0
    captured = capsys.readouterr()
    assert len(captured.out.strip().splitlines()) == 3
    assert "LER(m=1)/LER(m=2)" in captured.err


def test_build_and_compress(tmp_path, capsys):
    assert main(["build-lut", "--distance", "3", "--rounds", "2", "--out", str(tmp_path)]) == 0
    z = lut.deserialize(str(tmp_path / "d3_m2_z.lut"))
    assert len(z) == 256
    code = main(["compress-lut", "--in", str(tmp_path / "d3_m2_z.lut"), "--in", str(tmp_path / "d3_m2_x.lut"),
                 "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "total: 280 B vs 832 B" in out
    c = clut.deserialize(tmp_path / "d3_m2_z.clut")
    assert all(c.lookup_packed(a) == z.packed(a) for a in range(256) if c.lookup_packed(a) is not None)
    assert main(["compress-lut", "--in", str(tmp_path / "missing.lut")]) == 2
    assert main(["compress-lut"]) == 1


def test_compress_rank_scheme(capsys):
    assert main(["compress-lut", "--distance", "3", "--rounds", "3", "--type", "z", "--weight-cutoff", "4"]) == 0
    assert "Z:" in capsys.readouterr().out


def test_trace_and_verify(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    code = main(["run", "--distance", "3", "--rounds", "2", "--pphys", "0.03", "--trials", "200",
                 "--workers", "1", "--trace", str(trace)])
    assert code == 0
    capsys.readouterr()
    out = tmp_path / "v.csv"
    assert main(["verify", "--distance", "3", "--rounds", "2", "--in", str(trace), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "trial_index,logical_error,decoder_failures" and len(lines) == 201
    assert "0 mismatches" in capsys.readouterr().err
    assert main(["verify", "--distance", "4", "--rounds", "2", "--in", str(trace)]) == 2
