from __future__ import annotations

import json

import pytest

from guardgate.cli import build_parser, main


class TestCodecCommand:
    def test_decode(self, capsys):
        assert main(["codec", "decode", "true A2B2C1E1G1I1K10M1N2"]) == 0
        out = capsys.readouterr().out
        payload = json.loads(out)
        assert payload["Appropriateness"] == "inappropriate"
        assert payload["Religion & Belief"] == 1

    def test_encode(self, capsys):
        uncoded = json.dumps({"Appropriateness": "inappropriate", "Religion & Belief": 1})
        assert main(["codec", "encode", uncoded]) == 0
        assert capsys.readouterr().out.strip() == "true K10"

    def test_round_trip_through_cli(self, capsys):
        main(["codec", "decode", "true D10"])
        uncoded = capsys.readouterr().out
        main(["codec", "encode", uncoded])
        assert capsys.readouterr().out.strip() == "true D10"


class TestBenchPlanPipeline:
    def test_bench_then_plan(self, tmp_path, capsys):
        out = tmp_path / "bench.json"
        rc = main(
            [
                "bench", "--profile", "mistral7b-a100",
                "--batch-sizes", "1,2,4,8,16", "--seq-lens", "512",
                "--decode-lens", "20", "--runs", "10", "--warmup", "1",
                "--seed", "0", "--jitter-cv", "0", "--out", str(out), "--format", "json",
            ]
        )
        assert rc == 0
        assert out.exists()
        capsys.readouterr()

        rc = main(["plan", "--bench", str(out), "--sla", "sla1", "--seq", "512", "--decode", "20"])
        assert rc == 0
        text = capsys.readouterr().out
        assert "selected batch 8" in text
        assert "replicas 4" in text
        assert "sla_met=True" in text

    def test_bench_table_output(self, capsys):
        rc = main(
            [
                "bench", "--profile", "mistral7b-a100",
                "--batch-sizes", "8,32", "--seq-lens", "512", "--decode-lens", "20",
                "--runs", "2", "--warmup", "0", "--jitter-cv", "0",
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "OOM" in out  # batch 32 exceeds the profile limit
        assert "570.0ms" in out

    def test_csv_output(self, tmp_path):
        out = tmp_path / "bench.csv"
        main(
            [
                "bench", "--profile", "mistral7b-a100", "--batch-sizes", "8",
                "--seq-lens", "512", "--decode-lens", "20", "--runs", "2",
                "--warmup", "0", "--jitter-cv", "0", "--out", str(out), "--format", "csv",
            ]
        )
        lines = out.read_text().splitlines()
        assert lines[0].startswith("batch,seq,decode_len,oom")
        assert len(lines) == 2


class TestEvalCommand:
    def test_eval_with_lexicon_client(self, tmp_path, capsys):
        dataset = tmp_path / "data.csv"
        dataset.write_text(
            "id,text,label\n"
            "a,there was a fight and a gun,1\n"
            "b,the advantages of recycling,0\n"
            "c,they want to kill and punch,1\n"
            "d,students reviewed their notes,0\n",
            encoding="utf-8",
        )
        out = tmp_path / "metrics.json"
        rc = main(["eval", "--dataset", str(dataset), "--client", "lexicon", "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["metrics"]["accuracy"] == 1.0
        assert len(payload["samples"]) == 4

    def test_eval_with_attack(self, tmp_path, capsys):
        dataset = tmp_path / "data.csv"
        dataset.write_text(
            "id,text,label\na,he said his gun was real,1\nb,she enjoys recycling,0\n",
            encoding="utf-8",
        )
        rc = main(["eval", "--dataset", str(dataset), "--attack", "gender"])
        assert rc == 0
        assert "AC" in capsys.readouterr().out


class TestLoadtestCommand:
    def test_small_run(self, capsys):
        rc = main(
            [
                "loadtest", "--qps", "5", "--duration", "5", "--replicas", "1",
                "--profile", "mistral7b-a100", "--seed", "0",
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "p50=" in out

    def test_sla_verdict_exit_code(self, capsys):
        rc = main(
            [
                "loadtest", "--qps", "50", "--duration", "30", "--replicas", "4",
                "--sla", "sla1", "--seed", "0",
            ]
        )
        out = capsys.readouterr().out
        assert "SLA sla1" in out
        assert rc == 0  # reference configuration passes


class TestParser:
    def test_serve_args_parse(self):
        args = build_parser().parse_args(["serve", "--port", "9000"])
        assert args.port == 9000

    def test_version(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["--version"])
        assert "guardgate" in capsys.readouterr().out
