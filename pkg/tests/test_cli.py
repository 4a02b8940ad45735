import csv
import json
import subprocess
import sys

import pytest

from builders import document, node, two_node_pipe_doc
from petroflow.cli import EXIT_INVALID, EXIT_IO, EXIT_NOT_OPTIMAL, EXIT_OK, main
from petroflow.seaway import data_dir
from petroflow.solver import LOG_HEADER

CASE = str(data_dir() / "seaway.json")
ALLOC = str(data_dir() / "seaway.f1_allocation.json")


def run_json(tmp_path, *argv, name="out.json"):
    out = tmp_path / name
    code = main(["solve", CASE, "-o", str(out), *argv])
    return code, json.loads(out.read_text()) if out.exists() else None


class TestExitCodes:
    def test_validate_ok(self, capsys):
        assert main(["validate", CASE]) == EXIT_OK

    def test_validate_broken(self, tmp_path, capsys):
        doc = two_node_pipe_doc()
        doc["pipes"][0]["flow_min"] = 9000.0
        doc["nodes"][0]["head_min"] = 800.0
        bad = tmp_path / "broken.json"
        bad.write_text(json.dumps(doc))
        assert main(["validate", str(bad)]) == EXIT_INVALID
        err = capsys.readouterr()
        text = err.out + err.err
        assert "L1" in text and "N1" in text

    def test_missing_file(self, tmp_path, capsys):
        assert main(["solve", str(tmp_path / "nope.json")]) == EXIT_IO
        assert main(["validate", str(tmp_path / "nope.json")]) == EXIT_IO

    def test_f1_needs_allocation(self, capsys):
        assert main(["solve", CASE, "-f", "f1"]) == EXIT_INVALID

    def test_non_optimal(self, tmp_path, capsys):
        code, doc = run_json(tmp_path, "--max-iter", "2")
        assert code == EXIT_NOT_OPTIMAL
        assert doc["status"] == "MaxIterations"
        assert all("sigma" not in n for n in doc["nodes"].values())

    def test_bad_option(self, capsys):
        assert main(["solve", CASE, "--tol", "-1"]) == EXIT_INVALID

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["solve", CASE, "-o", str(blocker / "x.json")]) == EXIT_IO


@pytest.fixture(scope="module")
def solution(tmp_path_factory):
    code, doc = run_json(tmp_path_factory.mktemp("cli"), "--deterministic")
    assert code == EXIT_OK
    return doc


class TestSolutionDocument:
    def test_objective_and_prices(self, solution):
        obj = solution["objective"]
        assert obj["J_P"] == pytest.approx(obj["J_E"] - obj["J_O"], rel=1e-12)
        assert solution["nodes"]["N15"]["sigma"] == pytest.approx(310.0, abs=1e-4)
        assert solution["prices_unique"] is True
        assert max(solution["kkt"][k] for k in ("stationarity", "feasibility", "complementarity")) <= 1e-7

    def test_every_element_once(self, solution):
        case = json.loads(open(CASE).read())
        for group in ("nodes", "pipes", "pumps"):
            ids = [item["id"] for item in case[group]]
            assert sorted(solution[group]) == sorted(ids)

    def test_deterministic_json_identical(self, tmp_path, capsys):
        _, a = run_json(tmp_path, "--deterministic", name="a.json")
        _, b = run_json(tmp_path, "--deterministic", name="b.json")
        a.pop("timestamp"), b.pop("timestamp")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
        assert "wall_time" not in a["solver"]

    def test_f1(self, tmp_path):
        code, doc = run_json(tmp_path, "-f", "f1", "--allocation", ALLOC)
        assert code == EXIT_OK
        assert doc["prices_unique"] is False
        assert doc["nodes"]["N15"]["demand"] == pytest.approx(1260.5)

    def test_multistart(self, tmp_path):
        code, doc = run_json(tmp_path, "--multistart", "2", "--seed", "1")
        assert code == EXIT_OK and doc["solver"]["multistart_runs"] == 2

    def test_iteration_log(self, tmp_path):
        log = tmp_path / "it.log"
        code, _ = run_json(tmp_path, "--log", str(log))
        assert code == EXIT_OK
        lines = log.read_text().splitlines()
        assert lines[0] == LOG_HEADER and len(lines) > 10

    def test_tolerance_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PETROFLOW_TOL", "1e-4")
        _, loose = run_json(tmp_path, name="loose.json")
        monkeypatch.delenv("PETROFLOW_TOL")
        _, tight = run_json(tmp_path, name="tight.json")
        assert loose["solver"]["iterations"] < tight["solver"]["iterations"]


class TestOtherCommands:
    def test_sweep_csv(self, tmp_path):
        out = tmp_path / "s.csv"
        code = main(["sweep", CASE, "--param", "producer:N9:price", "--from", "300", "--to", "304",
                     "--steps", "3", "-o", str(out)])
        assert code == EXIT_OK
        rows = list(csv.DictReader(out.open()))
        assert [float(r["value"]) for r in rows] == [300.0, 302.0, 304.0]
        assert {r["status"] for r in rows} == {"LocallyOptimal"}

    def test_sweep_values_and_errors(self, tmp_path, capsys):
        out = tmp_path / "v.csv"
        assert main(["sweep", CASE, "--param", "pump:P8:electricity_price", "--values", "0.08,0.2",
                     "-o", str(out)]) == EXIT_OK
        assert len(out.read_text().splitlines()) == 3
        assert main(["sweep", CASE, "--param", "producer:N9:colour", "--values", "1"]) == EXIT_INVALID
        assert main(["sweep", CASE, "--param", "producer:N9:price"]) == EXIT_INVALID

    def test_case_gen(self, tmp_path):
        assert main(["case-gen", "-o", str(tmp_path)]) == EXIT_OK
        for name in ("seaway.json", "seaway.provenance.json", "seaway.f1_allocation.json"):
            assert (tmp_path / name).read_bytes() == (data_dir() / name).read_bytes()

    def test_check_derivs(self, capsys):
        assert main(["check-derivs", CASE]) == EXIT_OK

    def test_module_entry_point(self, tmp_path):
        doc = document([node("N1", 10.0, producer=(300.0, 360.0, 5000.0))])
        path = tmp_path / "one.json"
        path.write_text(json.dumps(doc))
        proc = subprocess.run([sys.executable, "-m", "petroflow", "validate", str(path)],
                              capture_output=True, text=True)
        assert proc.returncode in (EXIT_OK, EXIT_INVALID)
        proc = subprocess.run([sys.executable, "-m", "petroflow", "--version"], capture_output=True, text=True)
        assert proc.returncode == 0 and "petroflow" in proc.stdout
