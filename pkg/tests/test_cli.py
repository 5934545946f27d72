"""CLI surface tests with a scaled-down pipeline run."""

import json

import pytest
from click.testing import CliRunner

from shapeforge.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    result = runner.invoke(main, list(args), catch_exceptions=False)
    return result


class TestGrammarCheck:
    def test_fixture_clean(self, runner):
        result = invoke(runner, "grammar-check", "drone")
        assert result.exit_code == 0
        assert json.loads(result.output) == {"ok": True, "issues": []}

    def test_missing_file_usage_error(self, runner):
        result = runner.invoke(main, ["grammar-check", "nope.sg"])
        assert result.exit_code == 1

    def test_bad_grammar_validation_exit(self, runner, tmp_path):
        p = tmp_path / "bad.sg"
        p.write_text("product P\n")  # no shapetype/axiom
        result = runner.invoke(main, ["grammar-check", str(p)])
        assert result.exit_code == 2


class TestPipelineCommands:
    def test_walk_embed_train_sample_select_complete(self, runner, tmp_path):
        walks = tmp_path / "walks.jsonl"
        dataset = tmp_path / "seed.jsonl"
        gan_ckpt = tmp_path / "gan.json"
        gen = tmp_path / "gen.jsonl"
        kept = tmp_path / "kept.jsonl"
        completer_ckpt = tmp_path / "completer.json"

        r = invoke(runner, "walk", "--n", "24", "--seed", "3", "--out", str(walks))
        assert r.exit_code == 0 and json.loads(r.output)["written"] == 24

        r = invoke(runner, "embed", "--sequences", str(walks), "--out", str(dataset))
        assert r.exit_code == 0 and json.loads(r.output)["written"] == 24

        r = invoke(
            runner, "train-gan", "--dataset", str(dataset), "--epochs", "3",
            "--seed", "1", "--out", str(gan_ckpt),
        )
        assert r.exit_code == 0 and gan_ckpt.exists()

        r = invoke(
            runner, "sample", "--model", str(gan_ckpt), "--label", "4-motor Drone",
            "--n", "10", "--seed", "2", "--out", str(gen),
        )
        assert r.exit_code == 0 and json.loads(r.output)["written"] == 10

        r = invoke(
            runner, "select", "--dataset", str(gen), "--tau", "0.0", "--out", str(kept),
        )
        assert r.exit_code == 0
        doc = json.loads(r.output)
        assert doc["input"] == 10 and doc["kept"] + doc["snapFailures"] == 10

        r = invoke(
            runner, "train-completer", "--dataset", str(dataset), "--epochs", "1",
            "--seed", "4", "--out", str(completer_ckpt),
        )
        assert r.exit_code == 0 and completer_ckpt.exists()

        r = invoke(
            runner, "complete", "--model", str(completer_ckpt),
            "--prefix", "4-motor Drone:add_quad_arms+add_motor*4", "--k", "5",
        )
        assert r.exit_code == 0
        doc = json.loads(r.output)
        assert len(doc["completions"]) == 5
        assert all(c["valid"] for c in doc["completions"])

    def test_select_requires_exactly_one_policy(self, runner, tmp_path):
        p = tmp_path / "x.jsonl"
        p.write_text("")
        result = runner.invoke(main, ["select", "--dataset", str(p)])
        assert result.exit_code == 1

    def test_complete_rejects_illegal_prefix(self, runner, tmp_path):
        dataset = tmp_path / "seed.jsonl"
        ckpt = tmp_path / "c.json"
        invoke(runner, "walk", "--n", "6", "--seed", "3", "--out", str(tmp_path / "w.jsonl"))
        invoke(runner, "embed", "--sequences", str(tmp_path / "w.jsonl"), "--out", str(dataset))
        invoke(runner, "train-completer", "--dataset", str(dataset), "--epochs", "0",
               "--seed", "0", "--out", str(ckpt))
        result = runner.invoke(
            main,
            ["complete", "--model", str(ckpt), "--prefix", "4-motor Drone:add_motor"],
        )
        assert result.exit_code == 2


class TestDemo:
    def test_tiny_demo_byte_identical_across_runs(self, runner, tmp_path):
        args = [
            "demo", "--seed", "5", "--seed-corpus", "30", "--samples", "40",
            "--gan-epochs", "8", "--completer-epochs", "2",
        ]
        a = invoke(runner, *args)
        b = invoke(runner, *args)
        assert a.exit_code == 0
        assert a.output == b.output
        summary = json.loads(a.output)
        assert summary["seedCorpus"]["count"] == 30
        assert summary["seedCorpus"]["synthetic"] is True
        assert summary["expansion"]["requested"] == 40

    def test_demo_writes_artifacts(self, runner, tmp_path):
        out = tmp_path / "artifacts"
        r = invoke(
            runner, "demo", "--seed", "5", "--seed-corpus", "20", "--samples", "20",
            "--gan-epochs", "4", "--completer-epochs", "1", "--out", str(out),
        )
        assert r.exit_code == 0
        for name in ("seed_corpus.jsonl", "expanded.jsonl", "selected.jsonl",
                     "gan.json", "completer.json", "summary.json"):
            assert (out / name).exists(), name
        assert json.loads((out / "summary.json").read_text()) == json.loads(r.output)
