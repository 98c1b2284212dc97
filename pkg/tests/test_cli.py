import json
import subprocess
import sys

import pytest

from coqe.cli import main, resolve_modes, resolve_orders
from coqe.corpus import Corpus, CAMERA
from coqe.synth import corpus_with_counts, synth_corpus

from conftest import read_jsonl, write_corpus


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def corpus_path(tmp_path):
    return write_corpus(tmp_path / "corpus.jsonl", synth_corpus(40, seed=2))


def test_stats_empty_file(tmp_path, capsys):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert run("stats", "--corpus", path) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["sentence_count"] == 0 and doc["quintuple_count"] == 0


def test_stats_malformed_line_7(tmp_path, capsys):
    lines = [json.dumps({"id": f"s{i}", "text": "a b"}) for i in range(6)] + ['{"id": broken']
    path = tmp_path / "bad.jsonl"
    path.write_text("\n".join(lines) + "\n")
    assert run("stats", "--corpus", path) == 1
    assert "line 7" in capsys.readouterr().err


def test_stats_table(corpus_path, capsys):
    assert run("stats", "--corpus", corpus_path, "--format", "table") == 0
    assert "#Multi-com" in capsys.readouterr().out


def test_augment_count_and_determinism(tmp_path):
    path = write_corpus(tmp_path / "c.jsonl", corpus_with_counts(5, 2, 1, seed=4))
    out1, out2 = tmp_path / "a1.jsonl", tmp_path / "a2.jsonl"
    assert run("augment", "--corpus", path, "--orders", "5", "--out", out1) == 0
    assert len(read_jsonl(out1)) == 23
    assert run("augment", "--corpus", path, "--orders", "5", "--out", out2) == 0
    body1 = out1.read_bytes().split(b"\n", 1)[1]
    assert body1 == out2.read_bytes().split(b"\n", 1)[1]
    assert run("augment", "--corpus", path, "--orders", "5", "--out", out1) == 0
    assert out1.read_bytes() == (tmp_path / "a1.jsonl").read_bytes()
    header = json.loads(out1.read_text().splitlines()[0])["_header"]
    assert header["config"]["orders"] == "5"


def test_augment_single_order_no_tasks(tmp_path):
    path = write_corpus(tmp_path / "c.jsonl", corpus_with_counts(7, 3, 1, seed=4))
    out = tmp_path / "a.jsonl"
    assert run("augment", "--corpus", path, "--orders", "SOAP", "--no-single-tasks", "--out", out) == 0
    assert len(read_jsonl(out)) == 7


def test_augment_test_split_is_canonical(tmp_path):
    path = write_corpus(tmp_path / "c.jsonl", corpus_with_counts(6, 4, 1, seed=1))
    out = tmp_path / "a.jsonl"
    assert run("augment", "--corpus", path, "--split", "test", "--out", out) == 0
    rows = read_jsonl(out)
    assert len(rows) == 6 and {r["view"] for r in rows} == {"SOAP"}


def test_config_precedence(tmp_path, corpus_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"orders": "all", "single_tasks": False}))
    out = tmp_path / "a.jsonl"
    assert run("augment", "--corpus", corpus_path, "--config", cfg, "--out", out) == 0
    header = json.loads(out.read_text().splitlines()[0])["_header"]["config"]
    assert header["orders"] == "all" and header["single_tasks"] is False
    assert run("augment", "--corpus", corpus_path, "--config", cfg, "--orders", "2", "--out", out) == 0
    header = json.loads(out.read_text().splitlines()[0])["_header"]["config"]
    assert header["orders"] == "2" and header["style"] == "prefix"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nope": 1}))
    assert run("augment", "--corpus", corpus_path, "--config", bad) == 1


def test_render(tmp_path, corpus_path):
    out = tmp_path / "r.jsonl"
    assert run("render", "--corpus", corpus_path, "--orders", "PASO", "--style", "suffix", "--out", out) == 0
    rows = read_jsonl(out)
    assert len(rows) == 40 and rows[0]["input"].endswith("predicate aspect subject object label")


def test_oracle_decode_eval_errors(tmp_path, corpus_path, capsys):
    preds = tmp_path / "p.jsonl"
    assert run("decode", "--corpus", corpus_path, "--generator", "oracle", "--out", preds) == 0
    rows = read_jsonl(preds)
    assert [r["id"] for r in rows] == sorted(r["id"] for r in rows)
    assert all(not r["failed"] and r["output"] is not None for r in rows)
    assert run("eval", "--corpus", corpus_path, "--predictions", preds) == 0
    doc = json.loads(capsys.readouterr().out)
    assert all(v["f1"] == 1.0 for v in doc["tuples"].values())
    assert doc["cee"]["macro_f1"] == 1.0
    assert run("errors", "--predictions", preds) == 0
    doc = json.loads(capsys.readouterr().out)
    assert sum(doc["counts"].values()) == 0


def test_objects_stripped(tmp_path, corpus_path, capsys):
    preds = tmp_path / "p.jsonl"
    run("decode", "--corpus", corpus_path, "--out", preds)
    rows = read_jsonl(preds)
    for r in rows:
        for qq in r["quintuples"]:
            qq["object"] = None
            if not any(qq[k] for k in ("subject", "aspect", "predicate")):
                qq["predicate"] = [0]
    preds.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    assert run("eval", "--corpus", corpus_path, "--predictions", preds, "--modes", "E,P,B") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["cee"]["per_role"]["object"]["f1"] == 0.0
    t = doc["tuples"]
    assert set(t) == {"E-Q5", "E-Q4", "P-Q5", "P-Q4", "B-Q5", "B-Q4"}
    assert t["E-Q5"]["f1"] <= t["P-Q5"]["f1"] <= t["B-Q5"]["f1"]


def test_corrupt_seeded_reproducible(tmp_path, corpus_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    args = ["decode", "--corpus", corpus_path, "--generator", "corrupt", "--seed", 7,
            "--drop", 0.3, "--swap", 0.3, "--truncate", 0.2]
    assert run(*args, "--out", a) == 0
    assert run(*args, "--out", b) == 0
    assert read_jsonl(a) == read_jsonl(b)
    assert run("decode", "--corpus", corpus_path, "--generator", "corrupt", "--out", a) == 1


def test_swap_counts_equal_tuples(tmp_path, corpus_path, capsys):
    preds = tmp_path / "p.jsonl"
    run("decode", "--corpus", corpus_path, "--generator", "corrupt", "--seed", 1, "--swap", 1, "--out", preds)
    n_tuples = sum(r["gold_tuples"] for r in read_jsonl(preds))
    assert run("errors", "--predictions", preds) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["counts"]["wrong_marker_order"] == n_tuples


def test_errors_counts_match_diagnostics(tmp_path, corpus_path, capsys):
    preds = tmp_path / "p.jsonl"
    run("decode", "--corpus", corpus_path, "--generator", "corrupt", "--seed", 3,
        "--drop", .5, "--swap", .5, "--truncate", .5, "--out", preds)
    rows = read_jsonl(preds)
    assert run("errors", "--predictions", preds) == 0
    doc = json.loads(capsys.readouterr().out)
    from coqe.template import FORMAT_ERROR_KINDS
    assert sum(doc["counts"][k] for k in FORMAT_ERROR_KINDS) == sum(len(r["diagnostics"]) for r in rows)
    rows[0]["diagnostics"].append({"kind": "nonsense", "position": 0})
    preds.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    assert run("errors", "--predictions", preds) == 1


def test_unreachable_external(tmp_path, corpus_path):
    import socket
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    preds = tmp_path / "p.jsonl"
    code = run("decode", "--corpus", corpus_path, "--generator", "external",
               "--endpoint", f"tcp://127.0.0.1:{port}", "--timeout", 0.3, "--out", preds)
    assert code == 2
    rows = read_jsonl(preds)
    assert len(rows) == 40 and all(r["failed"] for r in rows)


def test_external_subprocess_end_to_end(tmp_path, corpus_path, capsys):
    preds = tmp_path / "p.jsonl"
    endpoint = f"{sys.executable} -m coqe.decoding.server --corpus {corpus_path}"
    assert run("decode", "--corpus", corpus_path, "--generator", "external", "--endpoint", endpoint,
               "--out", preds) == 0
    assert run("eval", "--corpus", corpus_path, "--predictions", preds, "--modes", "E-Q5") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["tuples"]["E-Q5"]["f1"] == 1.0


def test_input_errors(tmp_path, corpus_path):
    assert run("stats", "--corpus", tmp_path / "missing.jsonl") == 1
    assert run("augment", "--corpus", corpus_path, "--orders", "SOAX") == 1
    assert run("decode", "--corpus", corpus_path, "--drop", 3) == 1
    preds = tmp_path / "p.jsonl"
    preds.write_text(json.dumps({"id": "nope", "quintuples": []}) + "\n")
    assert run("eval", "--corpus", corpus_path, "--predictions", preds) == 1
    with pytest.raises(SystemExit) as ei:
        run("eval", "--corpus", corpus_path)
    assert ei.value.code == 1
    with pytest.raises(SystemExit) as ei:
        run("stats", "--scheme", "bogus", "--corpus", corpus_path)
    assert ei.value.code == 1


def test_resolvers():
    assert len(resolve_orders("all")) == 24
    assert len(resolve_orders("default")) == 5
    assert [o.tag for o in resolve_orders("SOAP,PASO")] == ["SOAP", "PASO"]
    assert [m.name for m in resolve_modes("E,B-Q4")] == ["E-Q5", "E-Q4", "B-Q4"]


def test_module_entry_point(corpus_path):
    res = subprocess.run([sys.executable, "-m", "coqe", "stats", "--corpus", corpus_path],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["sentence_count"] == 40


@pytest.mark.parametrize("n,com,multi", [(3304, 1705, 500), (9225, 1798, 319)])
def test_stats_at_published_scale(tmp_path, n, com, multi):
    path = write_corpus(tmp_path / "c.jsonl", corpus_with_counts(n, com, multi, seed=0))
    out = tmp_path / "s.json"
    assert run("stats", "--corpus", path, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert (doc["sentence_count"], doc["comparative_count"], doc["multi_comparative_count"]) == (n, com, multi)
    assert doc["com_over_total"] == com / n
    assert doc["multi_over_com"] == multi / com
