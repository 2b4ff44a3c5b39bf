"""Smoke tests for the python module and the avtag CLI.

Expects the build tree on PYTHONPATH and, for the CLI tests, AVTAG_CLI and
AVTAG_DATA in the environment (ctest sets all three).
"""

import json
import os
import shutil
import subprocess

import pytest

import avtag


# ---------------------------------------------------------------------------
# Native module surface.


def test_tokenize():
    tokens, fmt = avtag.tokenize("Exploit:Win32/MS08067.xyz")
    assert tokens == ["exploit", "win32", "ms08067", "xyz"]
    assert fmt == "TOK:TOK/TOK.TOK"


def test_edit_metrics():
    assert avtag.levenshtein("androm", "andromeda") == 3
    assert avtag.escore("androm", "andromeda") == 0.75
    assert avtag.escore("nspack", "nspack") == 1.0


def test_generic_suffix():
    assert avtag.is_generic_suffix("abc")
    assert avtag.is_generic_suffix("a1")
    assert not avtag.is_generic_suffix("downloader")


def test_vuln_spelling():
    assert avtag.canonical_vuln_spelling("cve20170144") == "cve_2017_0144"
    assert avtag.canonical_vuln_spelling("ms08067") == "ms08_067"
    assert avtag.canonical_vuln_spelling("eternalblue") == "eternalblue"


def test_trivial_alias():
    assert avtag.is_trivial_alias("backdoor", "backdoor0")
    assert avtag.is_trivial_alias("winlocker", "locker", ["win"])
    assert not avtag.is_trivial_alias("agent", "agent")


def test_token_stats_and_coocur():
    stats = avtag.TokenStats("beh")
    for _ in range(3):
        stats.add_report(["worm", "worms"])
    stats.add_report(["worm"])
    assert stats.token_count("worm") == 4
    assert stats.pair_count("worm", "worms") == 3
    assert avtag.coocur("worms", "worm", stats) == 1.0
    assert avtag.coocur("worm", "worms", stats) == 0.75
    assert avtag.is_parent_child("worms", "worm", stats)


def test_trivial_rewrite():
    rewrite = avtag.build_trivial_rewrite({"worm": 10, "worms": 3, "upx": 2})
    assert rewrite == {"worms": "worm"}


def test_resolve_aliases():
    resolved = avtag.resolve_aliases(["a", "b", "c"], {"a": ["b"], "b": ["c"]})
    assert resolved == {"b": "a", "c": "a"}


def test_family_consistency():
    families = {"fam1": {"m1", "m2", "m3", "m4"}, "fam2": {"m5", "m6"}}
    tagged = {"m1", "m2", "m3"}
    consistent = avtag.family_consistency_sets(tagged, families)
    assert consistent == {"m1", "m2", "m3", "m4"}
    assert avtag.family_consistency_metrics(tagged, consistent) == (1.0, 0.75)


def test_multilabel_metrics():
    report = avtag.multilabel_metrics(
        {"worm": {"a"}},
        {"worm": {"a", "b"}},
    )
    assert report["micro"]["precision"] == 1.0
    assert report["micro"]["recall"] == 0.5


def test_exceptions_are_value_errors():
    with pytest.raises(avtag.ValidationError):
        avtag.escore("", "x")
    with pytest.raises(avtag.ConfigError):
        avtag.TokenStats("nope")
    assert issubclass(avtag.ValidationError, ValueError)


# ---------------------------------------------------------------------------
# CLI end to end on the bundled sample data.

CLI = os.environ.get("AVTAG_CLI")
DATA = os.environ.get("AVTAG_DATA")

needs_cli = pytest.mark.skipif(
    not (CLI and os.path.exists(CLI) and DATA and os.path.isdir(DATA)),
    reason="AVTAG_CLI / AVTAG_DATA not set",
)


def run_cli(*args, cwd=None):
    return subprocess.run(
        [CLI, *map(str, args)], capture_output=True, text=True, cwd=cwd
    )


@pytest.fixture()
def workspace(tmp_path):
    data = tmp_path / "data"
    shutil.copytree(DATA, data)
    return tmp_path


@needs_cli
def test_cli_pipeline(workspace):
    config = workspace / "data" / "config.json"
    out = workspace / "out"

    pass1 = run_cli("pass1", "--config", config, "--output-dir", out)
    assert pass1.returncode == 0, pass1.stderr
    assert "reports\t12" in pass1.stdout
    assert (out / "vocabulary.tsv").exists()

    alias = run_cli("alias", "--config", config, "--output-dir", out)
    assert alias.returncode == 0, alias.stderr
    assert "aliases\tbeh" in alias.stdout

    tag = run_cli("tag", "--config", config, "--output-dir", out)
    assert tag.returncode == 0, tag.stderr
    tag_file = out / "tags.jsonl"
    assert tag_file.exists()

    records = [json.loads(line) for line in tag_file.read_text().splitlines()]
    assert len(records) == 12
    for record in records:
        assert len(record["sha256"]) == 64
        for key in ("beh", "plat", "vuln", "pack"):
            assert key in record
    # The emotet cluster must carry its behavior tags.
    first = records[0]
    beh_tags = {entry["tag"] for entry in first["beh"]}
    assert "downloader" in beh_tags or "banker" in beh_tags

    build = run_cli(
        "build", "--config", config, "--output-dir", out, "--category", "beh"
    )
    assert build.returncode == 0, build.stderr
    manifest = out / "manifest_beh.jsonl"
    assert manifest.exists()
    header = json.loads(manifest.read_text().splitlines()[0])
    assert header["record"] == "header"
    assert header["category"] == "beh"

    eval_run = run_cli(
        "eval",
        tag_file,
        "--families",
        workspace / "data" / "sample_families.tsv",
        "--category",
        "beh",
    )
    assert eval_run.returncode == 0, eval_run.stderr
    assert "micro" in eval_run.stdout and "weighted" in eval_run.stdout

    stats = run_cli(
        "stats", "--reports", workspace / "data" / "sample_reports.jsonl"
    )
    assert stats.returncode == 0, stats.stderr
    assert "reports\t12" in stats.stdout


@needs_cli
def test_cli_exit_codes(workspace):
    config_error = run_cli("pass1", "--config", workspace / "missing.json")
    assert config_error.returncode == 2

    bad_reports = workspace / "bad.jsonl"
    bad_reports.write_text("not json\n")
    ingest_error = run_cli(
        "pass1",
        "--reports",
        bad_reports,
        "--rules",
        workspace / "data" / "rules.tsv",
        "--output-dir",
        workspace / "out2",
        "--strict",
    )
    assert ingest_error.returncode == 3

    # Temporal build over tags that never carried a chunk.
    chunkless = workspace / "chunkless.jsonl"
    rows = []
    for i in (1, 2):
        sha = f"{i:064x}"
        rows.append(json.dumps({"sha256": sha, "beh": [{"tag": "worm", "score": 3}]}))
    chunkless.write_text("\n".join(rows) + "\n")
    validation_error = run_cli(
        "build",
        chunkless,
        "--config",
        workspace / "data" / "config.json",
        "--output-dir",
        workspace / "out3",
        "--category",
        "beh",
        "--mode",
        "temporal",
    )
    assert validation_error.returncode == 4
