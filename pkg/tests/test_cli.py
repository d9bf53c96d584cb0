"""CLI behavior: dispatch, file outputs, determinism, and error-class mapping."""

import hashlib
import os

import pytest

from skillspace.cli import main
from skillspace.corpus import DeltaRecord, read_corpus, write_corpus

from _synthetic import cluster_corpus


def sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = cluster_corpus(n_deltas=500, n_devs=10, apis_per_cluster=12,
                            n_projects=6, seed=1)
    train_path = str(root / "train.gz")
    test_path = str(root / "test.gz")
    write_corpus(corpus.train, train_path)
    write_corpus(corpus.test, test_path)
    model_path = str(root / "model.sksp")
    code = main(["train", "--corpus", train_path, "--out", model_path,
                 "--dim", "16", "--epochs", "4", "--negative", "4",
                 "--min-count", "2", "--seed", "5"])
    assert code == 0
    return {"root": root, "corpus": corpus, "train": train_path,
            "test": test_path, "model": model_path}


class TestExtract:
    def test_table_output(self, tmp_path, capsys):
        src = tmp_path / "a.py"
        src.write_text("import numpy\nimport pandas\n")
        assert main(["extract", str(src)]) == 0
        out = capsys.readouterr().out
        assert "numpy,pandas" in out

    def test_writes_corpus(self, tmp_path):
        src = tmp_path / "a.c"
        src.write_text('#include <stdio.h>\n')
        out = tmp_path / "c.gz"
        code = main(["extract", str(src), "--project", "p1", "--developer", "d1",
                     "--timestamp", "42", "--out", str(out)])
        assert code == 0
        records = list(read_corpus(str(out)))
        assert records == [DeltaRecord("C", "p1", 42, "d1", ("stdio.h",))]

    def test_skips_unknown_and_malformed(self, tmp_path, capsys):
        unknown = tmp_path / "a.xyz"
        unknown.write_text("whatever")
        manifest = tmp_path / "package.json"
        manifest.write_text("{broken")
        assert main(["extract", str(unknown), str(manifest)]) == 0
        err = capsys.readouterr().err
        assert "skipped" in err or "config" in err.lower() or "#" in err


class TestCorpusCommands:
    def test_stats(self, world, capsys):
        assert main(["corpus", "stats", "--in", world["train"]]) == 0
        out = capsys.readouterr().out
        assert "PY" in out and "TOTAL" in out

    def test_split_and_filter(self, world, tmp_path):
        merged = str(tmp_path / "all.gz")
        records = list(read_corpus(world["train"])) + list(read_corpus(world["test"]))
        write_corpus(records, merged)
        tr, te = str(tmp_path / "tr.gz"), str(tmp_path / "te.gz")
        assert main(["corpus", "split", "--in", merged, "--cutoff",
                     str(world["corpus"].cutoff), "--train", tr, "--test", te]) == 0
        assert len(list(read_corpus(tr))) == len(list(read_corpus(world["train"])))
        filtered = str(tmp_path / "filtered.gz")
        report_prefix = str(tmp_path / "filter_report")
        assert main(["corpus", "filter", "--in", merged, "--out", filtered,
                     "--min-commits", "1", "--max-commits", "100000",
                     "--report", report_prefix]) == 0
        assert os.path.exists(filtered)
        assert "input_deltas" in open(report_prefix + ".csv").read()
        assert os.path.exists(report_prefix + ".txt")

    def test_build_applies_aliases(self, world, tmp_path):
        aliases = tmp_path / "dev.tsv"
        dev = world["corpus"].train[0].developer
        aliases.write_text(f"{dev}\tcanonical_dev\n")
        out = str(tmp_path / "aliased.gz")
        assert main(["corpus", "build", "--in", world["train"], "--out", out,
                     "--dev-aliases", str(aliases)]) == 0
        devs = {r.developer for r in read_corpus(out)}
        assert dev not in devs and "canonical_dev" in devs

    def test_bad_corpus_line_maps_to_exit_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("PY;p;notatime;d;a\n")
        out = str(tmp_path / "never.gz")
        assert main(["corpus", "build", "--in", str(bad), "--out", out]) == 1
        assert "BadTimestamp" in capsys.readouterr().err
        assert not os.path.exists(out)


class TestTrainAndQuery:
    def test_train_deterministic_outputs(self, world, tmp_path):
        again = str(tmp_path / "model2.sksp")
        code = main(["train", "--corpus", world["train"], "--out", again,
                     "--dim", "16", "--epochs", "4", "--negative", "4",
                     "--min-count", "2", "--seed", "5"])
        assert code == 0
        assert sha256(again) == sha256(world["model"])

    def test_train_report_files(self, world, tmp_path):
        out = str(tmp_path / "m.sksp")
        prefix = str(tmp_path / "trainrep")
        assert main(["train", "--corpus", world["train"], "--out", out,
                     "--dim", "8", "--epochs", "2", "--negative", "2",
                     "--min-count", "2", "--report", prefix]) == 0
        assert os.path.exists(prefix + ".csv")
        assert os.path.exists(prefix + ".txt")
        assert os.path.exists(prefix + ".png")

    def test_query_similar_table(self, world, capsys):
        token = "alib00"
        assert main(["query", "similar", "--model", world["model"],
                     "--api", token, "--top", "3"]) == 0
        out = capsys.readouterr().out
        assert len([line for line in out.splitlines() if line.startswith("api:")]) == 3

    def test_query_similar_unknown_entity(self, world, capsys):
        assert main(["query", "similar", "--model", world["model"],
                     "--api", "ghost"]) == 1
        assert "UnknownEntity" in capsys.readouterr().err

    def test_query_analogy_and_align(self, world, capsys):
        assert main(["query", "analogy", "--model", world["model"],
                     "--plus", "api:alib00", "--plus", "api:alib01",
                     "--minus", "api:blib00", "--top", "2"]) == 0
        capsys.readouterr()
        dev = world["corpus"].train[0].developer
        assert main(["query", "align", "--model", world["model"],
                     "--entity", f"dev:{dev}", "--apis", "alib00,alib01"]) == 0
        out = capsys.readouterr().out
        assert "n=2" in out

    def test_export(self, world, tmp_path):
        out = str(tmp_path / "vec.txt")
        assert main(["export", "--model", world["model"], "--out", out,
                     "--which", "all"]) == 0
        header = open(out).readline().split()
        assert len(header) == 2

    def test_usage_error_exit_2(self, world, capsys):
        assert main(["query", "similar", "--model", world["model"]]) == 2
        assert "UsageError" in capsys.readouterr().err


class TestEvalCommands:
    def test_h1_writes_reports(self, world, tmp_path):
        prefix = str(tmp_path / "h1")
        code = main(["eval", "h1", "--model", world["model"],
                     "--train", world["train"], "--test", world["test"],
                     "--seed", "7", "--out", prefix])
        assert code == 0
        assert os.path.exists(prefix + ".csv")
        assert os.path.exists(prefix + ".txt")
        assert os.path.exists(prefix + ".png")
        content = open(prefix + ".csv").read()
        assert "# seed=7" in content
        assert "mean_diff" in content

    def test_h1_deterministic_hash(self, world, tmp_path):
        a = str(tmp_path / "a")
        b = str(tmp_path / "b")
        for prefix in (a, b):
            assert main(["eval", "h1", "--model", world["model"],
                         "--train", world["train"], "--test", world["test"],
                         "--seed", "7", "--out", prefix, "--no-figure"]) == 0
        assert sha256(a + ".csv") == sha256(b + ".csv")
        assert sha256(a + ".txt") == sha256(b + ".txt")

    def test_h2_h3_csv_stdout(self, world, capsys):
        for which in ("h2", "h3"):
            assert main(["eval", which, "--model", world["model"],
                         "--train", world["train"], "--test", world["test"],
                         "--seed", "3", "--format", "csv"]) == 0
            out = capsys.readouterr().out
            assert "mean_diff" in out

    def test_h4_from_csv(self, world, tmp_path, capsys):
        import csv as csvmod

        from skillspace.evalharness import PR_CSV_COLUMNS
        from skillspace.model import load
        from _synthetic import synthetic_prs

        model = load(world["model"])
        prs = synthetic_prs(model, n_prs=400, seed=3)
        path = tmp_path / "prs.csv"
        with open(path, "w", newline="") as fh:
            writer = csvmod.writer(fh)
            writer.writerow(PR_CSV_COLUMNS)
            for pr in prs:
                writer.writerow([getattr(pr, c) for c in PR_CSV_COLUMNS])
        prefix = str(tmp_path / "h4")
        cutoff = str(world["corpus"].cutoff)
        assert main(["eval", "h4", "--model", world["model"], "--pr", str(path),
                     "--cutoff", cutoff, "--out", prefix]) == 0
        content = open(prefix + ".csv").read()
        assert "similarity" in content

    def test_h5_from_csv(self, world, tmp_path):
        from skillspace.model import load
        from _synthetic import synthetic_survey

        model = load(world["model"])
        surveys = synthetic_survey(model, ["alib00", "blib00"], n_respondents=60,
                                   seed=4)
        path = tmp_path / "survey.csv"
        with open(path, "w") as fh:
            fh.write("developer,api,score,commits\n")
            for s in surveys:
                fh.write(f"{s.developer},{s.api},{s.score},{s.commits}\n")
        prefix = str(tmp_path / "h5")
        cutoff = str(world["corpus"].cutoff)
        assert main(["eval", "h5", "--model", world["model"], "--survey", str(path),
                     "--cutoff", cutoff, "--out", prefix]) == 0
        content = open(prefix + ".csv").read()
        assert "A-alignment" in content and "B-score" in content

    def test_leakage_guard_maps_to_exit_1(self, world, capsys):
        assert main(["eval", "h1", "--model", world["model"],
                     "--train", world["train"], "--test", world["test"],
                     "--cutoff", "1", "--seed", "7"]) == 1
        assert "LeakageDetected" in capsys.readouterr().err


class TestHelp:
    @pytest.mark.parametrize("args", [
        [], ["--help"], ["train", "--help"], ["corpus", "--help"],
        ["corpus", "build", "--help"], ["query", "similar", "--help"],
        ["eval", "h1", "--help"], ["export", "--help"],
    ])
    def test_help_exits_zero(self, args, capsys):
        code = main(args if args else ["--help"])
        assert code == 0
        assert capsys.readouterr().out
