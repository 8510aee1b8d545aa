import json
import re
import subprocess
import sys

import pytest

from dwsched.bench_cli import CSV_HEADER, BenchConfig, bench_rows, csv_to_rows, main, report_text, rows_to_csv
from dwsched.errors import ParseError
from dwsched.instgen import dumps_instance
from dwsched.solver import SolveOptions

from conftest import chain


@pytest.fixture
def chain_file(tmp_path):
    path = tmp_path / "chain.json"
    path.write_text(dumps_instance(chain()))
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestGen:
    def test_one_file(self, tmp_path):
        assert run("gen", "--count", 1, "--seed", 5, "--out", tmp_path / "a") == 0
        files = list((tmp_path / "a").iterdir())
        assert len(files) == 1
        assert run("check", files[0], files[0]) == 2  # an instance is not a schedule

    def test_idempotent(self, tmp_path):
        run("gen", "--count", 3, "--seed", 9, "--out", tmp_path / "a")
        run("gen", "--count", 3, "--seed", 9, "--out", tmp_path / "b")
        for f in (tmp_path / "a").iterdir():
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_campaign_size(self, tmp_path):
        run("gen", "--count", 3000, "--tasks", 10, "--out", tmp_path / "c")
        files = sorted((tmp_path / "c").iterdir())
        assert len(files) == 3000
        assert len(json.loads(files[-1].read_text())["tasks"]) == 10


class TestSolveAndCheck:
    def test_exact_chain(self, chain_file, tmp_path, capsys):
        out = tmp_path / "s.json"
        assert run("solve", chain_file, "--scheme", "exact", "--out", out) == 0
        assert json.loads(out.read_text())["makespan"] == 6
        assert "makespan=6" in capsys.readouterr().out
        assert run("check", chain_file, out) == 0

    def test_random_deterministic(self, chain_file, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run("solve", chain_file, "--scheme", "random", "--seed", 3, "--out", a)
        run("solve", chain_file, "--scheme", "random", "--seed", 3, "--out", b)
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_scheme(self, chain_file):
        with pytest.raises(SystemExit) as info:
            run("solve", chain_file, "--scheme", "magic")
        assert info.value.code == 2

    def test_stdout_schedule(self, chain_file, capsys):
        assert run("solve", chain_file, "--scheme", "glist") == 0
        assert json.loads(capsys.readouterr().out)["makespan"] == 6

    def _cross_machine(self, tmp_path, start, channel):
        doc = {
            "version": 1, "makespan": 9,
            "tasks": [{"id": 0, "machine": 1, "start": 0}, {"id": 1, "machine": 2, "start": start}],
            "flows": [{"id": 0, "u": 0, "v": 1, "channel": channel, "start": 2}],
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        return path

    def test_tampered_start(self, chain_file, tmp_path, capsys):
        assert run("check", chain_file, self._cross_machine(tmp_path, 6, 1)) == 0
        capsys.readouterr()
        assert run("check", chain_file, self._cross_machine(tmp_path, 5, 1)) == 1
        assert re.search(r"^C8: ", capsys.readouterr().out, flags=re.M)

    def test_virtual_across_machines(self, chain_file, tmp_path, capsys):
        assert run("check", chain_file, self._cross_machine(tmp_path, 6, "virtual")) == 1
        assert re.search(r"^C5: ", capsys.readouterr().out, flags=re.M)

    def test_parse_error(self, chain_file, tmp_path, capsys):
        broken = tmp_path / "x.json"
        broken.write_text("{not json")
        assert run("check", chain_file, broken) == 2
        assert run("solve", broken) == 2
        assert "BAD_JSON" in capsys.readouterr().err


class TestExportLp:
    def test_single_task(self, tmp_path, capsys):
        inst = tmp_path / "one.json"
        inst.write_text('{"version": 1, "machines": 1, "channels": 1, "tasks": [{"id": 0, "p": 5}], "edges": []}')
        out = tmp_path / "one.lp"
        assert run("export-lp", inst, "--t-max", 5, "--out", out) == 0
        families = set(re.findall(r"\b([A-Z]+)_\d+", out.read_text()))
        assert families == {"X"}
        assert re.search(r"^total\s+2$", capsys.readouterr().out, flags=re.M)

    def test_chain_rows(self, chain_file, tmp_path, capsys):
        out = tmp_path / "chain.lp"
        assert run("export-lp", chain_file, "--out", out) == 0
        total = int(re.search(r"^total\s+(\d+)$", capsys.readouterr().out, flags=re.M).group(1))
        body = out.read_text().split("Subject To\n")[1].split("Bounds\n")[0]
        assert len(re.findall(r"^ \w+:", body, flags=re.M)) == total

    def test_horizon_too_small(self, chain_file, tmp_path, capsys):
        assert run("export-lp", chain_file, "--t-max", 5, "--out", tmp_path / "x.lp") == 2
        assert "HorizonTooSmall" in capsys.readouterr().err


class TestBench:
    def test_cardinality(self, tmp_path):
        out = tmp_path / "b.csv"
        assert run("bench", "--tasks", 6, "--count", 2, "--machines", "1,2", "--scheme", "glist,exact",
                   "--deterministic", "--out", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 1 + 8

    def test_row_properties(self):
        config = BenchConfig(tasks=(7,), count=4, machines=(1, 2, 3),
                             schemes=("random", "list", "glist", "partition", "exact"))
        rows = bench_rows(config)
        assert [(r.instance_id, r.scheme, r.machines) for r in rows] == \
            sorted((r.instance_id, r.scheme, r.machines) for r in rows)
        exact = {(r.instance_id, r.machines): r for r in rows if r.scheme == "exact"}
        for r in rows:
            e = exact[r.instance_id, r.machines]
            assert e.normalized_makespan <= r.normalized_makespan
            if r.machines == 1 and r.scheme == "exact":
                assert r.normalized_makespan == 1.0
            assert r.nodes_explored is None or r.scheme == "exact"

    def test_unsupported_scheme_rows(self):
        rows = bench_rows(BenchConfig(tasks=(4,), count=1, machines=(2,), schemes=("glist-master", "glist")))
        assert [r.status for r in rows] == ["feasible", "unsupported"]

    def test_byte_identical(self):
        config = BenchConfig(tasks=(6,), count=3, machines=(2, 3), schemes=("random", "exact", "exact-plain"),
                             options=SolveOptions(deterministic=True))
        assert rows_to_csv(bench_rows(config)) == rows_to_csv(bench_rows(config))

    def test_from_directory(self, tmp_path):
        run("gen", "--count", 2, "--tasks", 5, "--out", tmp_path / "inst")
        rows = bench_rows(BenchConfig(count=10, machines=(2,), schemes=("list",), instance_dir=tmp_path / "inst"))
        assert [r.instance_id for r in rows] == ["inst-000000", "inst-000001"]

    def test_bad_config(self):
        with pytest.raises(ValueError):
            BenchConfig(count=0)
        with pytest.raises(ValueError):
            BenchConfig(schemes=())


class TestReport:
    def test_single_row(self, tmp_path, capsys):
        path = tmp_path / "one.csv"
        path.write_text(",".join(CSV_HEADER) + "\nn05-00000,0,glist,2,1,40,0.800000,,feasible,0\n")
        assert run("report", path) == 0
        assert "glist,2,0.800000,1" in capsys.readouterr().out

    def test_campaign_aggregates(self, tmp_path):
        config = BenchConfig(tasks=(5, 6), count=3, machines=(1, 2), seed=4,
                             schemes=("random", "glist", "exact", "exact-plain"))
        text = rows_to_csv(bench_rows(config))
        rows = csv_to_rows(text)
        assert rows_to_csv(rows) == text
        report = report_text(rows)
        assert report == report_text(csv_to_rows(text))
        first, second = report.split("\n\n")
        means = {}
        for line in first.splitlines()[1:]:
            scheme, m, mean, _ = line.split(",")
            means[scheme, int(m)] = float(mean)
        for (scheme, m), value in means.items():
            assert means["exact", m] <= value
        nodes = {}
        for line in second.splitlines()[1:]:
            scheme, bucket, mean, _ = line.split(",")
            nodes[scheme, bucket] = float(mean)
        assert set(b for _, b in nodes) == {"5", "6"}
        for bucket in ("5", "6"):
            assert nodes["exact", bucket] <= nodes["exact-plain", bucket]

    def test_bad_header(self, tmp_path):
        with pytest.raises(ParseError):
            csv_to_rows("a,b\n")
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n")
        assert run("report", path) == 2


def test_module_entry_point(chain_file):
    proc = subprocess.run([sys.executable, "-m", "dwsched", "solve", str(chain_file), "--scheme", "partition"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["makespan"] == 6
