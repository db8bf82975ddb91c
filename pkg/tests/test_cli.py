import io
import json

import jsonschema
import pytest

from momentsum.cli import parse_element, parse_set, run, UsageError
from momentsum.field import make_field
from momentsum.regimes import CERTIFICATE_SCHEMA


def call(*argv):
    out = io.StringIO()
    code = run(list(argv), out)
    return code, out.getvalue()


def test_decide_text_output():
    code, text = call("decide", "--field", "7", "--set", "monomial:n=2", "--m", "1", "--b", "3",
                      "--k", "2")
    assert code == 0
    lines = text.splitlines()
    assert lines[0].startswith("# config ")
    assert "answer: YES" in lines and "witness: 1 2" in lines


def test_decide_json_schema_round_trip():
    code, text = call("decide", "--field", "7", "--set", "monomial:n=2", "--m", "1", "--b", "3",
                      "--k", "2", "--json")
    assert code == 0
    doc = json.loads(text)
    jsonschema.validate(doc["result"], CERTIFICATE_SCHEMA)
    assert doc["config"]["field"] == {"p": 7, "s": 1, "q": 7, "modulus": [0, 1]}
    assert doc["config"]["budget"] == 10**9


def test_config_echoes_default_modulus():
    _, text = call("valueset", "--field", "2^3", "--set", "monomial:n=3", "--format", "json")
    assert json.loads(text)["config"]["field"]["modulus"] == [1, 1, 0, 1]


def test_valueset_example():
    code, text = call("valueset", "--field", "5", "--set", "dickson:n=2,a=1", "--format", "json")
    result = json.loads(text)["result"]
    assert code == 0 and result["size"] == 3 and result["elements"] == [2, 3, 4]


def test_missing_k_is_usage_error(capsys):
    code, _ = call("decide", "--field", "7", "--set", "monomial:n=2", "--m", "2", "--b", "3")
    assert code == 1


@pytest.mark.parametrize("argv", [
    ("decide", "--field", "12", "--set", "monomial:n=2", "--m", "1", "--b", "3", "--k", "2"),
    ("decide", "--field", "7", "--set", "monomal:n=2", "--m", "1", "--b", "3", "--k", "2"),
    ("decide", "--field", "7", "--set", "monomial:n=2", "--m", "2", "--b", "3", "--k", "2"),
    ("decide", "--field", "7", "--set", "monomial:n=2", "--m", "1", "--b", "9", "--k", "2"),
    ("count", "--field", "7", "--set", "explicit:1,1", "--m", "1", "--b", "3", "--k", "2"),
])
def test_usage_errors(argv, capsys):
    code, _ = call(*argv)
    assert code == 1
    assert "momentsum: error:" in capsys.readouterr().err


def test_budget_exceeded_exit_code(monkeypatch):
    monkeypatch.setenv("MSS_BUDGET", "10")
    code, text = call("decide", "--field", "49", "--set", "dickson:n=2,a=1", "--m", "2", "--b",
                      "1,2", "--k", "10", "--json")
    assert code == 2
    assert json.loads(text)["result"]["error"] == "budget-exceeded"


def test_no_answer_exit_zero():
    code, text = call("decide", "--field", "4", "--set", "monomial:n=1", "--m", "2", "--b", "1,0",
                      "--k", "1")
    assert code == 0 and "answer: NO" in text and "regime: inconsistent-targets" in text


def test_repeated_runs_identical():
    argv = ("audit", "--field", "25", "--set", "dickson:n=3,a=1", "--m", "2", "--coverage",
            "sample", "--count", "30", "--seed", "5")
    first = call(*argv)
    assert call(*argv) == first
    assert call(*argv, "--threads", "3")[1].splitlines()[1:] == first[1].splitlines()[1:]
    argv = ("decide", "--field", "13", "--set", "dickson:n=2,a=3", "--m", "2", "--b", "1,4",
            "--k", "9", "--json")
    assert call(*argv) == call(*argv)


def test_audit_ldjson_records():
    code, text = call("audit", "--field", "7", "--set", "complete", "--m", "3")
    assert code == 0
    lines = [json.loads(line) for line in text.splitlines()]
    assert "config" in lines[0]
    records = lines[1:]
    assert len(records) == 7**3 - 1
    assert all(r["passed"] and r["family"] == "complete" for r in records)


def test_audit_text_and_worst():
    code, text = call("audit", "--field", "11", "--set", "monomial:n=2", "--m", "2", "--keep",
                      "worst", "--format", "text")
    assert code == 0
    body = text.splitlines()[1:]
    assert len(body) == 1 and body[0].startswith("monomial-image") and body[0].endswith("pass")


def test_count_engines_agree():
    base = ("count", "--field", "9", "--set", "dickson:n=2,a=1", "--m", "2", "--b", "1,1",
            "--k", "3", "--format", "json")
    dp = json.loads(call(*base, "--engine", "dp")[1])["result"]["N_k"]
    brute = json.loads(call(*base, "--engine", "brute")[1])["result"]["N_k"]
    reach = json.loads(call(*base, "--engine", "bool")[1])["result"]["reachable"]
    assert dp == brute and reach == (dp > 0)


def test_preimage_subcommand():
    code, text = call("preimage", "--field", "5", "--set", "dickson:n=2,a=1", "--x0", "2",
                      "--format", "json")
    result = json.loads(text)["result"]
    assert code == 0 and result["match"] and result["enumerated"] == 2
    code, _ = call("preimage", "--field", "5", "--set", "monomial:n=2", "--x0", "2")
    assert code == 1


def test_selftest_subcommand():
    code, text = call("selftest")
    assert code == 0
    assert all(line.startswith("PASS") for line in text.splitlines()[1:])


def test_poly_elements():
    ctx = make_field(2, 2)
    assert parse_element(ctx, "poly:0/1") == 2
    assert parse_element(ctx, "3") == 3
    code, text = call("count", "--field", "4", "--set", "explicit:1,2,3", "--m", "1", "--b",
                      "poly:1/1", "--k", "1", "--format", "json")
    assert code == 0 and json.loads(text)["result"]["N_k"] == 1


def test_positional_error_messages():
    ctx = make_field(7)
    with pytest.raises(UsageError) as info:
        parse_set(ctx, "dickson:n=2,a=x")
    msg = str(info.value)
    assert "position" in msg or "^" in msg
    with pytest.raises(UsageError):
        parse_element(ctx, "poly:1/9")
    assert parse_set(ctx, "complete", allow_complete=True) is None
