"""End-to-end runs of the pcpolar subcommands."""

import json

import pandas as pd
import pytest

from audit import get_log, get_stats, manifest_path
from channels import ChannelKind
from config import DESIGN_SEED, GH_NODES, LLR_CLIP, MC_DESIGN_TRIALS
from harness import CSV_COLUMNS, SweepAxis
from main import main, parse_sweep


@pytest.fixture
def spec_file(tmp_path):
    out = tmp_path / "spec.json"
    code = main(["design", "--channel", "bec:0.3", "--channel", "bec:0.6", "--k", "4", "--n1", "8",
                 "--out", str(out)])
    assert code == 0
    return out


def _first_line(capsys) -> str:
    return capsys.readouterr().out.strip().splitlines()[0]


class TestDesign:

    def test_writes_spec_and_manifest(self, spec_file):
        doc = json.loads(spec_file.read_text(encoding="utf-8"))
        assert doc["schedule"]["lengths"] == [8, 8]
        assert doc["schedule"]["rates"] == ["1/2", "1/4"]
        manifest = json.loads(manifest_path(spec_file).read_text(encoding="utf-8"))
        assert manifest["subcommand"] == "design"
        assert manifest["artifacts"] == [str(spec_file)]
        assert manifest["numerics"] == {
            "PCP_LLR_CLIP": LLR_CLIP, "PCP_MC_DESIGN_TRIALS": MC_DESIGN_TRIALS,
            "PCP_GH_NODES": GH_NODES, "PCP_DESIGN_SEED": DESIGN_SEED,
        }
        assert get_log(1)[0]["event_type"] == "RUN"

    def test_table1_mode(self, tmp_path):
        out = tmp_path / "t1.json"
        assert main(["design", "--table1-mode", "--channel", "biawgn:0.55", "--out", str(out)]) == 0
        doc = json.loads(out.read_text(encoding="utf-8"))
        assert doc["schedule"]["lengths"] == [256, 128, 195]

    def test_pinned_lengths(self, tmp_path):
        out = tmp_path / "s.json"
        assert main(["design", "--channel", "bec:0.4", "--k", "6", "--lengths", "8,4,6", "--out", str(out)]) == 0
        assert json.loads(out.read_text(encoding="utf-8"))["schedule"]["rates"] == ["3/4", "1/2", "1/3"]

    @pytest.mark.parametrize("extra", [["--rates", "3/4,1/2,1/3"], ["--lengths", "256,128,192"], ["--n1", "256"]])
    def test_table1_mode_rejects_schedule_flags(self, tmp_path, extra):
        with pytest.raises(SystemExit) as e:
            main(["design", "--table1-mode", "--channel", "biawgn:0.55", *extra, "--out", str(tmp_path / "t.json")])
        assert e.value.code == 2
        assert not (tmp_path / "t.json").exists()

    def test_missing_k_is_usage_error(self):
        with pytest.raises(SystemExit) as e:
            main(["design", "--channel", "bec:0.3", "--n1", "8"])
        assert e.value.code == 2

    def test_infeasible_rates(self, tmp_path, capsys):
        code = main(["design", "--channel", "bec:0.3", "--k", "3", "--n1", "4", "--rates", "3/4,2/3",
                     "--out", str(tmp_path / "x.json")])
        assert code == 1
        assert "construction failed" in capsys.readouterr().out
        entry = get_log(1)[0]
        assert entry["event_type"] == "FAILURE"
        assert "lengths" in json.loads(entry["details_json"])["reason"]
        assert get_stats() == {"total_events": 1, "runs": 0, "failures": 1}
        assert not (tmp_path / "x.json").exists()

    def test_bad_channel(self, tmp_path):
        assert main(["design", "--channel", "awgn:1", "--k", "4", "--n1", "8",
                     "--out", str(tmp_path / "x.json")]) == 1


class TestEncodeDecode:

    def test_zero_message(self, spec_file, capsys):
        capsys.readouterr()
        assert main(["encode", "--spec", str(spec_file), "--level", "1", "--in", "0"]) == 0
        assert _first_line(capsys) == "00"

    def test_round_trip(self, spec_file, capsys):
        capsys.readouterr()
        chunks = []
        for level in ("1", "2"):
            assert main(["encode", "--spec", str(spec_file), "--level", level, "--in", "a"]) == 0
            chunks.append(_first_line(capsys))
        assert main(["decode", "--spec", str(spec_file), "--in", chunks[0], "--in", chunks[1]]) == 0
        assert _first_line(capsys) == "a"
        assert main(["decode", "--spec", str(spec_file), "--in", chunks[0], "--channel", "bsc:0.05"]) == 0
        assert _first_line(capsys) == "a"

    def test_chunk_length_mismatch(self, spec_file):
        assert main(["decode", "--spec", str(spec_file), "--in", "abc"]) == 1

    def test_too_many_chunks(self, spec_file):
        assert main(["decode", "--spec", str(spec_file), "--in", "00", "--in", "00", "--in", "00"]) == 1

    def test_bad_level(self, spec_file):
        assert main(["encode", "--spec", str(spec_file), "--level", "3", "--in", "a"]) == 1


class TestSimulate:

    def _simulate(self, spec_file, csv, *extra):
        return main(["simulate", "--spec", str(spec_file), "--sweep", "bec:0.2:0.4:0.2", "--trials", "200",
                     "--seed", "3", "--csv", str(csv), *extra])

    def test_repeatable_across_threads(self, spec_file, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert self._simulate(spec_file, a) == 0
        assert self._simulate(spec_file, b, "--threads", "3") == 0
        assert a.read_bytes() == b.read_bytes()
        frame = pd.read_csv(a)
        assert list(frame.columns) == CSV_COLUMNS
        assert list(frame["param"]) == [0.2, 0.2, 0.4, 0.4]
        assert manifest_path(a).exists()

    def test_noiseless_bsc(self, spec_file, tmp_path):
        csv = tmp_path / "bsc.csv"
        assert main(["simulate", "--spec", str(spec_file), "--sweep", "bsc:0", "--trials", "50",
                     "--csv", str(csv)]) == 0
        frame = pd.read_csv(csv)
        assert (frame["block_errors"] == 0).all()
        assert (frame["bit_errors"] == 0).all()

    def test_baseline(self, spec_file, tmp_path):
        csv = tmp_path / "pcp.csv"
        assert self._simulate(spec_file, csv, "--baseline", "random-puncturing",
                              "--baseline-nu", "16", "--baseline-k", "4") == 0
        baseline = pd.read_csv(tmp_path / "pcp_baseline.csv")
        assert len(baseline) == 4
        assert list(baseline["rate"]) == [0.5, 0.25, 0.5, 0.25]

    def test_ack_on_ebn0_rejected(self, spec_file, tmp_path):
        assert main(["simulate", "--spec", str(spec_file), "--sweep", "ebn0:1,2", "--stop", "ack",
                     "--csv", str(tmp_path / "x.csv")]) == 1

    def test_bad_trials(self, spec_file):
        with pytest.raises(SystemExit):
            main(["simulate", "--spec", str(spec_file), "--sweep", "bec:0.3", "--trials", "0"])


class TestReliabilityAndCheck:

    def test_reliability_matches_golden(self, tmp_path, data_dir):
        out = tmp_path / "r.json"
        assert main(["reliability", "--channel", "bec:0.5", "--n", "4", "--k", "1", "--out", str(out)]) == 0
        golden = json.loads((data_dir / "bec_0.5_n4.json").read_text(encoding="utf-8"))
        assert json.loads(out.read_text(encoding="utf-8")) == golden

    def test_check_exports_generator(self, spec_file, tmp_path):
        out = tmp_path / "G2.txt"
        assert main(["check", "--spec", str(spec_file), "--export-generator", str(out), "--level", "2"]) == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 4
        assert all(len(line) == 16 for line in lines)

    def test_check_rejects_corrupt_spec(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        assert main(["check", "--spec", str(bad)]) == 1

    def test_check_rejects_tampered_mapping(self, spec_file):
        doc = json.loads(spec_file.read_text(encoding="utf-8"))
        doc["levels"][1]["mapping"]["table"] = [4, 3]
        spec_file.write_text(json.dumps(doc), encoding="utf-8")
        assert main(["check", "--spec", str(spec_file)]) == 1

    def test_missing_spec(self, tmp_path):
        assert main(["check", "--spec", str(tmp_path / "nope.json")]) == 1


class TestSweepParsing:

    def test_range(self):
        axis, kind, values = parse_sweep("bec:0.1:0.5:0.2")
        assert (axis, kind) == (SweepAxis.PARAM, ChannelKind.BEC)
        assert values == [0.1, 0.3, 0.5]

    def test_ebn0_list(self):
        axis, kind, values = parse_sweep("ebn0:1,2")
        assert (axis, kind, values) == (SweepAxis.EBN0, ChannelKind.BIAWGN, [1.0, 2.0])

    @pytest.mark.parametrize("text", ["foo:1", "bec", "bec:0.5:0.1:0.1", "bec:1:2", "bec:0:1:0"])
    def test_invalid(self, text):
        with pytest.raises(ValueError):
            parse_sweep(text)
