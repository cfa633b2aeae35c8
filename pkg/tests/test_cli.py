import json

import numpy as np
import pytest

from roelab.cli import main, run
from roelab.report import report_diff, results_bytes


def run_json(argv, tmp_path, capsys=None):
    report, code = run(argv)
    return report, code


class TestExitCodes:
    def test_pass_is_zero(self):
        _, code = run(["randsub", "entropy", "--d", "50", "--delta", "0.2"])
        assert code == 0

    def test_usage_error_is_one(self, capsys):
        assert main(["space"]) == 1
        assert main(["nonsense"]) == 1
        assert main(["space", "kappa"]) == 1  # missing required --space

    def test_domain_error_is_one(self, capsys):
        # 5 points cannot host a 3-regular graph pairing (odd product)
        assert main(["space", "kappa", "--space", "regular:5:3:0"]) == 1
        assert main(["space", "kappa", "--space", "/no/such/file.json"]) == 1

    def test_bound_violation_is_two(self, tmp_path, capsys):
        # a reducible 2-dimensional representation of the trivial group:
        # the irreducibility certificate must fail and exit with code 2
        fixture = tmp_path / "reducible.json"
        fixture.write_text(
            json.dumps(
                {
                    "table": [[0]],
                    "matrices": [[[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]],
                }
            )
        )
        report, code = run(
            ["reps", "irr-check", "--group", f"file:{fixture}", "--trials", "5"]
        )
        assert code == 2
        assert report["results"]["verdict"] == "FAIL"
        assert not report["results"]["certificate"]["irreducible"]


class TestDeterminism:
    CASES = [
        ["space", "kappa", "--space", "regular:14:3:3", "--mode", "exact"],
        ["translations", "decompose", "--space", "regular:14:3:1", "-R", "2"],
        ["oper", "eps-prop", "--space", "interval:30", "--eps", "0.2", "-R", "2", "--seed", "4"],
        ["oper", "band-dist", "--space", "interval:25", "-R", "2", "--seed", "1", "--budget", "100"],
        ["reps", "irr-check", "--group", "heis:3", "--trials", "20"],
        ["reps", "gap-cert", "--group", "heis:5", "--space", "far:5", "-R", "2"],
        ["randsub", "mc", "--d", "15", "--n", "3", "--delta", "0.2", "--c0", "3", "--trials", "5"],
        ["randsub", "levy", "--d", "100", "--delta", "0.1", "--trials", "200"],
        ["propa", "sz", "--N", "60", "--eps", "0.01", "-R", "1"],
    ]

    @pytest.mark.parametrize("argv", CASES, ids=lambda a: ".".join(a[:2]))
    def test_rerun_byte_identical(self, argv):
        first, code1 = run(argv)
        second, code2 = run(argv)
        assert code1 == code2 == 0
        assert results_bytes(first["results"]) == results_bytes(second["results"])
        assert report_diff(first, second) == []


class TestCommands:
    def test_space_gen_regular(self):
        report, code = run(["space", "gen", "--regular", "12,3", "--seed", "1"])
        assert code == 0
        assert report["results"]["degrees_all_equal"]

    def test_space_roundtrip_through_file(self, tmp_path, capsys):
        out = tmp_path / "space_report.json"
        assert main(["space", "gen", "--regular", "10,3", "--seed", "2", "--out", str(out)]) == 0
        capsys.readouterr()
        space_file = tmp_path / "space.json"
        space_file.write_text(json.dumps(json.loads(out.read_text())["results"]["space"]))
        report, code = run(["space", "kappa", "--space", str(space_file), "--mode", "exact"])
        assert code == 0
        assert report["results"]["kappa"] >= 1.0

    def test_translations_within_cap(self):
        report, code = run(["translations", "decompose", "--space", "regular:16:4:0", "-R", "2"])
        assert code == 0
        assert report["results"]["part_count"] <= report["results"]["cap"]

    def test_gap_cert_fields(self):
        report, code = run(["reps", "gap-cert", "--group", "heis:5", "--space", "far:5", "-R", "2"])
        assert code == 0
        res = report["results"]
        assert res["verdict"] == "PASS"
        assert res["eps_achieved"] == 1.0

    def test_operator_file_input(self, tmp_path):
        from roelab.operators import SpaceOperator
        from roelab.propa import interval_space
        from roelab.spaces import save_space

        sp = interval_space(12)
        space_file = tmp_path / "space.json"
        save_space(sp, space_file)
        rng = np.random.default_rng(0)
        mat = np.where(sp.dist <= 1, rng.standard_normal((12, 12)), 0.0)
        op_file = tmp_path / "op.json"
        op_file.write_text(json.dumps(SpaceOperator(space=sp, mat=mat).to_json()))
        report, code = run(
            ["oper", "band-dist", "--space", str(space_file), "--op", str(op_file), "-R", "1"]
        )
        assert code == 0
        assert report["results"]["lower"] == 0.0

    def test_all_smoke(self):
        report, code = run(["all", "smoke", "--seed", "0"])
        assert code == 0
        assert all(section["ok"] for section in report["results"].values())


class TestConfigAndOutput:
    def test_config_file_supplies_required_args(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"d": 80, "delta": 0.1, "trials": 150, "seed": 3}))
        report, code = run(["randsub", "levy", "--config", str(cfg)])
        assert code == 0
        assert report["config"]["d"] == 80

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"d": 80, "delta": 0.1, "trials": 150, "seed": 3}))
        report, _ = run(["randsub", "levy", "--config", str(cfg), "--d", "90"])
        assert report["config"]["d"] == 90

    def test_out_and_csv(self, tmp_path, capsys):
        out = tmp_path / "report.csv"
        code = main(
            ["randsub", "entropy", "--d", "40", "--delta", "0.25", "--format", "csv", "--out", str(out)]
        )
        capsys.readouterr()
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "key,value"
        assert any(line.startswith("holds,") for line in lines)

    def test_json_output_is_valid(self, capsys):
        code = main(["randsub", "entropy", "--d", "40", "--delta", "0.25"])
        captured = capsys.readouterr()
        assert code == 0
        report = json.loads(captured.out)
        assert report["command"] == "randsub.entropy"
