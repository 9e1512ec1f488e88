import json
import math
import subprocess
import sys

import pytest

from adiclab import __version__
from adiclab.cli import main, parse_depths
from adiclab.symbolic import data_path

RUNS = {
    "entropy": ["entropy", "--set", "cantor3.set"],
    "classify": ["classify", "--set", "golden_mean"],
    "cover": ["cover", "--set", "cantor3", "--depth", "3"],
    "diffset": ["diffset", "--set", "cantor3", "--resolution", "729"],
    "localdiff": ["localdiff", "--set", "countable3", "--point", "(0)", "--depth", "10"],
    "transform-law": ["transform-law", "--set", "cantor3", "--map", "affine_2x", "--point", "02(0)", "--depth", "10"],
    "full-circle": ["full-circle", "--set", "cantor3", "--b", "2", "--depths", "8..10:2"],
    "prop-dim": ["prop-dim", "--set", "cantor3", "--map", "square_shifted", "--depths", "10", "--resolution", "16384"],
    "affine-search": ["affine-search", "--set", "cantor3", "--depth", "5", "--max-q", "3", "--t-count", "27"],
    "measure-dim": ["measure-dim", "--set", "cantor3", "--depth", "5", "--samples", "20000", "--seed", "3"],
}


def run(argv, tmp_path, name="report.json"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out)])
    text = out.read_text() if out.exists() else None
    return code, text


@pytest.mark.parametrize("command", sorted(RUNS))
def test_every_command_end_to_end(command, tmp_path):
    code, text = run(RUNS[command], tmp_path)
    assert code == 0, text
    doc = json.loads(text)
    assert doc["command"] == command
    assert doc["version"] == __version__
    assert doc["status"] in {"complete", "pass"}
    assert isinstance(doc["results"], dict)
    # inputs are echoed, execution knobs are not
    assert "set_path" in doc["inputs"]
    assert not {"jobs", "out", "summary", "timing"} & set(doc["inputs"])
    assert "wall_time" not in doc


def test_entropy_report_values(tmp_path):
    _, text = run(RUNS["entropy"], tmp_path)
    doc = json.loads(text)
    assert doc["results"]["dimension"] == pytest.approx(math.log(2) / math.log(3), abs=1e-12)
    assert doc["inputs"]["set_path"] == "cantor3.set"


def test_shipped_file_paths_work(tmp_path):
    code, text = run(["entropy", "--set", str(data_path("golden_mean.set.json"))], tmp_path)
    assert code == 0


def test_full_circle_gap_table(tmp_path):
    _, text = run(RUNS["full-circle"], tmp_path)
    res = json.loads(text)["results"]
    assert [r["depth"] for r in res["rows"]] == [8, 10]
    assert res["monotone"] and res["mechanism_ok"]


def test_measure_report_echoes_seed(tmp_path):
    _, text = run(RUNS["measure-dim"], tmp_path)
    doc = json.loads(text)
    assert doc["inputs"]["seed"] == 3
    assert doc["results"]["provenance"]["samples"] == 20000
    assert doc["results"]["estimate"]["dimension"] == pytest.approx(math.log(2) / math.log(3), abs=0.03)


def test_empty_results_are_valid(tmp_path):
    code, text = run(["localdiff", "--set", "period2", "--point", "(01)", "--depth", "10"], tmp_path)
    assert code == 0
    res = json.loads(text)["results"]
    assert res["cells"] == [] and res["count"] == 0


def test_missing_set_exits_2(tmp_path, capsys):
    code, text = run(["entropy", "--set", "missing.set"], tmp_path)
    assert code == 2 and text is None
    assert "missing.set" in capsys.readouterr().err


def test_parse_error_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.set.json"
    bad.write_text('{"base": 3,\n "words": [1,}')
    assert main(["entropy", "--set", str(bad)]) == 2
    err = capsys.readouterr().err
    assert f"{bad}:2:" in err


def test_unwritable_out_exits_2(tmp_path):
    target = tmp_path / "no" / "such" / "dir" / "r.json"
    assert main(["entropy", "--set", "cantor3", "--out", str(target)]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["cover", "--set", "cantor3", "--depth", "21"],
        ["diffset", "--set", "cantor3", "--resolution", str(2**24 + 1)],
        ["measure-dim", "--set", "cantor3", "--samples", str(10**8 + 1)],
        ["full-circle", "--set", "cantor3", "--b", "2", "--depths", "8..25"],
        ["localdiff", "--set", "cantor3", "--point", "0(!)"],
        ["frobnicate"],
    ],
)
def test_caps_and_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_digit_outside_base_exits_2(tmp_path):
    code, _ = run(["localdiff", "--set", "cantor3", "--point", "x(0)"], tmp_path)
    assert code == 2


def test_precondition_failure_exits_2(tmp_path):
    code, _ = run(["full-circle", "--set", "cantor3", "--b", "9", "--depths", "8"], tmp_path)
    assert code == 2


def test_undersampled_measure_exits_2(tmp_path):
    code, _ = run(["measure-dim", "--set", "cantor3", "--depth", "10", "--samples", "1000"], tmp_path)
    assert code == 2


def test_verification_failure_exits_1(tmp_path):
    # a tolerance of zero cannot be met by a nontrivial slope
    argv = RUNS["transform-law"][:-2] + ["--depth", "10", "--tol", "0"]
    code, text = run(argv, tmp_path)
    doc = json.loads(text)
    assert doc["results"]["distance"] > 0
    assert code == 1 and doc["status"] == "fail"


@pytest.mark.parametrize("command", ["localdiff", "full-circle", "diffset", "measure-dim", "affine-search"])
def test_reports_identical_across_jobs(command, tmp_path):
    texts = [run(RUNS[command] + ["--jobs", str(j)], tmp_path, f"r{j}.json")[1] for j in (1, 2, 4)]
    assert texts[0] == texts[1] == texts[2]


def test_same_config_twice_is_identical(tmp_path):
    a = run(RUNS["prop-dim"], tmp_path, "a.json")[1]
    b = run(RUNS["prop-dim"], tmp_path, "b.json")[1]
    assert a == b


def test_timing_is_opt_in(tmp_path):
    _, text = run(RUNS["entropy"] + ["--timing"], tmp_path)
    assert json.loads(text)["wall_time"] >= 0


def test_summary_goes_to_stdout_with_out(tmp_path, capsys):
    run(RUNS["entropy"] + ["--summary"], tmp_path)
    out = capsys.readouterr().out
    assert out.startswith("entropy: complete") and "dimension" in out


def test_stdout_report(capsys):
    assert main(["classify", "--set", "fixed0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["results"] == {"finite": True, "perfect": False, "transitive": True}


def test_parse_depths():
    assert parse_depths("8..14:2") == [8, 10, 12, 14]
    assert parse_depths("8..10") == [8, 9, 10]
    assert parse_depths("4,6") == [4, 6]


def test_console_script():
    proc = subprocess.run(
        [sys.executable, "-m", "adiclab.cli", "entropy", "--set", "full2"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"]["dimension"] == pytest.approx(1)
