"""Command-line entry point.

Subcommands: extract, corpus build|stats|split|filter, train,
query similar|analogy|align, eval h1|h2|h3|h4|h5, export.

Every run prints its resolved configuration to stderr. Tabular results go to
stdout (aligned text, or CSV with --format csv); with --out PREFIX the same
table is written as PREFIX.csv and PREFIX.txt plus a rendered PREFIX.png
figure. Outputs are written atomically. Module errors exit 1 with the error
class on stderr; usage errors exit 2.
"""

from __future__ import annotations

import sys

import click

from . import corpus as corpus_mod
from . import evalharness as ev
from . import extract as extract_mod
from . import model as model_mod
from . import query as query_mod
from . import report as report_mod
from .embed import TrainConfig, train
from .errors import SkillSpaceError


def _echo_config(name: str, params: dict) -> None:
    rendered = " ".join(f"{k}={v}" for k, v in params.items() if v is not None)
    click.echo(f"# {name}: {rendered}", err=True)


def _emit(rows, meta, fmt: str, out: str | None, figure=None, no_figure: bool = False):
    """Print a table to stdout, or write csv+txt (+figure) under an out prefix."""
    if out:
        report_mod.write_csv(out + ".csv", rows, meta)
        report_mod.write_text(out + ".txt", rows, meta)
        if figure is not None and not no_figure:
            figure(out + ".png")
        click.echo(f"wrote {out}.csv {out}.txt"
                   + ("" if (figure is None or no_figure) else f" {out}.png"), err=True)
    elif fmt == "csv":
        click.echo(report_mod.render_csv(rows, meta), nl=False)
    else:
        click.echo(report_mod.format_table(rows, meta), nl=False)


@click.group()
def cli():
    """Skill Space: embed APIs, developers, projects, and languages from import data."""


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------

@cli.command("extract")
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--project", default="unknown", show_default=True)
@click.option("--developer", default="unknown", show_default=True)
@click.option("--timestamp", default=0, type=int, show_default=True)
@click.option("--rules", type=click.Path(exists=True), help="custom rule-table file")
@click.option("--out", type=click.Path(), help="write delta lines to this corpus file")
@click.option("--format", "fmt", type=click.Choice(["table", "csv"]), default="table")
def extract_cmd(files, project, developer, timestamp, rules, out, fmt):
    """Extract API tokens from source FILES (one delta per file)."""
    table = extract_mod.load_rule_file(rules) if rules else None
    _echo_config("extract", {"files": len(files), "project": project,
                             "developer": developer, "timestamp": timestamp,
                             "rules": rules or "builtin", "out": out})
    records = []
    rows = [("file", "language", "apis")]
    skipped = {"no_language": 0, "no_imports": 0, "malformed_manifest": 0}
    for path in files:
        lang = extract_mod.detect_language(path, table)
        if lang is None:
            skipped["no_language"] += 1
            continue
        with open(path, "rb") as fh:
            content = extract_mod.decode_blob(fh.read())
        try:
            tokens = extract_mod.extract_imports(lang, content)
        except extract_mod.MalformedManifest:
            skipped["malformed_manifest"] += 1
            continue
        if not tokens:
            skipped["no_imports"] += 1
            continue
        rows.append((path, lang.id, ",".join(tokens)))
        records.append(corpus_mod.DeltaRecord(lang.id, project, timestamp,
                                              developer, tuple(tokens)))
    meta = {f"skipped_{k}": v for k, v in skipped.items()}
    if out:
        n = corpus_mod.write_corpus(records, out)
        click.echo(f"wrote {n} deltas to {out}", err=True)
    else:
        _emit(rows, meta, fmt, None)


# ---------------------------------------------------------------------------
# corpus
# ---------------------------------------------------------------------------

@cli.group("corpus")
def corpus_group():
    """Build, summarize, filter, and split delta corpora."""


@corpus_group.command("build")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--dev-aliases", type=click.Path(exists=True))
@click.option("--proj-aliases", type=click.Path(exists=True))
def corpus_build(in_path, out, dev_aliases, proj_aliases):
    """Validate a corpus file, apply alias maps, and rewrite it."""
    _echo_config("corpus build", {"in": in_path, "out": out,
                                  "dev_aliases": dev_aliases, "proj_aliases": proj_aliases})
    dev_map = corpus_mod.load_alias_map(dev_aliases) if dev_aliases else {}
    proj_map = corpus_mod.load_alias_map(proj_aliases) if proj_aliases else {}
    records = corpus_mod.apply_aliases(corpus_mod.read_corpus(in_path), dev_map, proj_map)
    n = corpus_mod.write_corpus(records, out)
    click.echo(f"wrote {n} deltas to {out}", err=True)


@corpus_group.command("stats")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--api-cap", default=30, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["table", "csv"]), default="table")
@click.option("--out", type=click.Path())
def corpus_stats_cmd(in_path, api_cap, fmt, out):
    """Per-language delta/author/project/API counts."""
    _echo_config("corpus stats", {"in": in_path, "api_cap": api_cap})
    stats = corpus_mod.corpus_stats(corpus_mod.read_corpus(in_path), api_cap)
    _emit(stats.rows(), None, fmt, out)


@corpus_group.command("split")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--cutoff", required=True, type=int, help="Unix seconds; train is strictly before")
@click.option("--train", "train_path", required=True, type=click.Path())
@click.option("--test", "test_path", required=True, type=click.Path())
def corpus_split(in_path, cutoff, train_path, test_path):
    """Partition a corpus at a cutoff timestamp."""
    _echo_config("corpus split", {"in": in_path, "cutoff": cutoff,
                                  "train": train_path, "test": test_path})
    train_recs, test_recs = corpus_mod.time_split(corpus_mod.read_corpus(in_path), cutoff)
    corpus_mod.write_corpus(train_recs, train_path)
    corpus_mod.write_corpus(test_recs, test_path)
    click.echo(f"train={len(train_recs)} test={len(test_recs)}", err=True)


@corpus_group.command("filter")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--min-commits", default=100, show_default=True)
@click.option("--max-commits", default=25000, show_default=True)
@click.option("--max-apis", default=30, show_default=True)
@click.option("--truncate", is_flag=True, help="truncate oversize deltas instead of dropping")
@click.option("--report", "report_prefix", type=click.Path())
def corpus_filter(in_path, out, min_commits, max_commits, max_apis, truncate, report_prefix):
    """Drop developers outside the activity window and oversize deltas."""
    cfg = corpus_mod.FilterConfig(min_commits=min_commits, max_commits=max_commits,
                                  max_apis_per_delta=max_apis,
                                  drop_or_truncate="truncate" if truncate else "drop")
    _echo_config("corpus filter", {"in": in_path, "out": out, **cfg.__dict__})
    kept, rep = corpus_mod.filter_corpus(corpus_mod.read_corpus(in_path), cfg)
    corpus_mod.write_corpus(kept, out)
    rows = [("measure", "count")] + rep.rows()
    if report_prefix:
        report_mod.write_csv(report_prefix + ".csv", rows)
        report_mod.write_text(report_prefix + ".txt", rows)
    click.echo(report_mod.format_table(rows), nl=False, err=True)


# ---------------------------------------------------------------------------
# train / export
# ---------------------------------------------------------------------------

@cli.command("train")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--dim", default=200, show_default=True)
@click.option("--negative", default=20, show_default=True)
@click.option("--epochs", default=10, show_default=True)
@click.option("--alpha", default=0.025, show_default=True)
@click.option("--min-alpha", default=1e-4, show_default=True)
@click.option("--window", default=30, show_default=True)
@click.option("--min-count", default=5, show_default=True)
@click.option("--seed", default=1, type=int, show_default=True)
@click.option("--threads", default=1, show_default=True)
@click.option("--subsample", default=0.0, show_default=True)
@click.option("--report", "report_prefix", type=click.Path())
@click.option("--no-figure", is_flag=True)
def train_cmd(corpus_path, out, dim, negative, epochs, alpha, min_alpha, window,
              min_count, seed, threads, subsample, report_prefix, no_figure):
    """Train the co-embedding on a corpus file."""
    config = TrainConfig(dim=dim, negatives=negative, epochs=epochs,
                         alpha_start=alpha, alpha_min=min_alpha, window=window,
                         seed=seed, threads=threads, min_count=min_count,
                         subsample=subsample)
    _echo_config("train", {"corpus": corpus_path, "out": out, **config.__dict__})
    embedding, train_report = train(corpus_mod.read_corpus(corpus_path), config)
    model_mod.save(embedding, out)
    rows = train_report.rows()
    if report_prefix:
        report_mod.write_csv(report_prefix + ".csv", rows)
        report_mod.write_text(report_prefix + ".txt", rows)
        if not no_figure and train_report.epochs:
            report_mod.training_figure(rows, report_prefix + ".png")
    click.echo(f"V={len(embedding.vocab)} T={len(embedding.tags)} "
               f"updates={train_report.total_updates} -> {out}", err=True)


@cli.command("export")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--which", type=click.Choice(["api", "tags", "all"]), default="api",
              show_default=True)
def export_cmd(model_path, out, which):
    """Export input-side vectors as text (header + one entity per line)."""
    _echo_config("export", {"model": model_path, "out": out, "which": which})
    embedding = model_mod.load(model_path)
    n = model_mod.export_text(embedding, out, which)
    click.echo(f"wrote {n} vectors to {out}", err=True)


# ---------------------------------------------------------------------------
# query
# ---------------------------------------------------------------------------

def _load_attribution(corpus_path):
    if not corpus_path:
        return None
    return corpus_mod.language_attribution(corpus_mod.read_corpus(corpus_path)).api_languages


@cli.group("query")
def query_group():
    """Similarity, analogy, and alignment queries over a trained model."""


@query_group.command("similar")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--api", help="shorthand for --entity api:NAME")
@click.option("--entity", help="kind:id, e.g. dev:alice or lang:PY")
@click.option("--top", default=10, show_default=True)
@click.option("--kind", "kinds", multiple=True,
              type=click.Choice(["api", "developer", "project", "language"]))
@click.option("--lang", help="restrict API candidates to this corpus language")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True),
              help="corpus used to attribute APIs to languages (required with --lang)")
@click.option("--format", "fmt", type=click.Choice(["table", "csv"]), default="table")
@click.option("--out", type=click.Path())
def query_similar(model_path, api, entity, top, kinds, lang, corpus_path, fmt, out):
    """Nearest neighbors of an entity by cosine."""
    if bool(api) == bool(entity):
        raise click.UsageError("give exactly one of --api or --entity")
    seed = model_mod.parse_entity(entity) if entity else model_mod.EntityRef("api", api)
    _echo_config("query similar", {"model": model_path, "seed": str(seed), "top": top,
                                   "kinds": ",".join(kinds) or None, "lang": lang})
    if lang and not corpus_path:
        raise click.UsageError("--lang needs --corpus for language attribution")
    embedding = model_mod.load(model_path)
    neighbors = query_mod.most_similar(embedding, seed, top_n=top,
                                       kinds=kinds or None, language=lang,
                                       api_languages=_load_attribution(corpus_path))
    _emit(report_mod.neighbor_rows(neighbors), None, fmt, out)


@query_group.command("analogy")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--plus", multiple=True, help="kind:id added to the query vector")
@click.option("--minus", multiple=True, help="kind:id subtracted from the query vector")
@click.option("--top", default=10, show_default=True)
@click.option("--kind", "kinds", multiple=True,
              type=click.Choice(["api", "developer", "project", "language"]))
@click.option("--lang")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["table", "csv"]), default="table")
@click.option("--out", type=click.Path())
def query_analogy(model_path, plus, minus, top, kinds, lang, corpus_path, fmt, out):
    """Signed vector arithmetic, e.g. --minus lang:PY --plus lang:R --plus api:pandas."""
    if not plus and not minus:
        raise click.UsageError("give at least one --plus or --minus term")
    if lang and not corpus_path:
        raise click.UsageError("--lang needs --corpus for language attribution")
    terms = [(1.0, model_mod.parse_entity(t)) for t in plus]
    terms += [(-1.0, model_mod.parse_entity(t)) for t in minus]
    _echo_config("query analogy", {
        "model": model_path,
        "expression": " ".join(f"{'+' if s > 0 else '-'}{r}" for s, r in terms),
        "top": top, "lang": lang})
    embedding = model_mod.load(model_path)
    neighbors = query_mod.analogy(embedding, terms, top_n=top, kinds=kinds or None,
                                  language=lang,
                                  api_languages=_load_attribution(corpus_path))
    _emit(report_mod.neighbor_rows(neighbors), None, fmt, out)


@query_group.command("align")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--entity", required=True, help="kind:id of the subject (e.g. dev:alice)")
@click.option("--apis", help="comma-separated API tokens to align against")
@click.option("--to", "other", help="kind:id of a single counterpart entity")
@click.option("--aggregation", type=click.Choice(["mean", "centroid"]), default="mean",
              show_default=True)
def query_align(model_path, entity, apis, other, aggregation):
    """Alignment of one entity to an API set (--apis) or to another entity (--to)."""
    if bool(apis) == bool(other):
        raise click.UsageError("give exactly one of --apis or --to")
    base = model_mod.parse_entity(entity)
    _echo_config("query align", {"model": model_path, "entity": str(base),
                                 "apis": apis, "to": other, "aggregation": aggregation})
    embedding = model_mod.load(model_path)
    if other:
        value = query_mod.align_pair(embedding, base, model_mod.parse_entity(other))
        click.echo(f"{value:.6f}")
    else:
        tokens = [a.strip() for a in apis.split(",") if a.strip()]
        score = query_mod.align_to_apis(embedding, base, tokens, aggregation)
        click.echo(f"{score.value:.6f} n={score.n_items} skipped={score.skipped}")


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

@cli.group("eval")
def eval_group():
    """Run the held-out evaluations (h1..h5)."""


def _eval_config(cutoff, seed, n_random, per_language, aggregation):
    return ev.EvalConfig(cutoff=cutoff, seed=seed, n_random=n_random,
                         per_language=per_language, aggregation=aggregation)


def _split_options(fn):
    fn = click.option("--model", "model_path", required=True,
                      type=click.Path(exists=True))(fn)
    fn = click.option("--train", "train_path", required=True,
                      type=click.Path(exists=True))(fn)
    fn = click.option("--test", "test_path", required=True,
                      type=click.Path(exists=True))(fn)
    fn = click.option("--cutoff", type=int, default=None,
                      help="defaults to the earliest test timestamp")(fn)
    fn = click.option("--seed", default=1, type=int, show_default=True)(fn)
    fn = click.option("--n-random", default=10, show_default=True)(fn)
    fn = click.option("--per-language/--pooled", "per_language", default=None)(fn)
    fn = click.option("--aggregation", type=click.Choice(["mean", "centroid"]),
                      default="mean", show_default=True)(fn)
    fn = click.option("--format", "fmt", type=click.Choice(["table", "csv"]),
                      default="table")(fn)
    fn = click.option("--out", type=click.Path())(fn)
    fn = click.option("--no-figure", is_flag=True)(fn)
    return fn


def _run_split_eval(which, model_path, train_path, test_path, cutoff, seed, n_random,
                    per_language, aggregation, fmt, out, no_figure):
    embedding = model_mod.load(model_path)
    train_recs = list(corpus_mod.read_corpus(train_path))
    test_recs = list(corpus_mod.read_corpus(test_path))
    if cutoff is None:
        if not test_recs:
            raise click.UsageError("test corpus is empty and no --cutoff given")
        cutoff = min(r.timestamp for r in test_recs)
    cfg = _eval_config(cutoff, seed, n_random, per_language, aggregation)
    _echo_config(f"eval {which}", {"model": model_path, "train": train_path,
                                   "test": test_path, **cfg.__dict__})
    runner = {"h1": ev.eval_new_apis, "h2": ev.eval_new_projects,
              "h3": ev.eval_new_contributors}[which]
    table = runner(embedding, train_recs, test_recs, cfg)
    rows = report_mod.ttest_rows(table.entries)
    _emit(rows, table.meta, fmt, out,
          figure=lambda p: report_mod.ttest_figure(table.entries, p,
                                                   title=table.meta.get("test", which)),
          no_figure=no_figure)


for _which in ("h1", "h2", "h3"):
    def _make(which):
        @eval_group.command(which)
        @_split_options
        def _cmd(model_path, train_path, test_path, cutoff, seed, n_random,
                 per_language, aggregation, fmt, out, no_figure):
            _run_split_eval(which, model_path, train_path, test_path, cutoff, seed,
                            n_random, per_language, aggregation, fmt, out, no_figure)
        _cmd.__name__ = f"eval_{which}"
        help_text = {"h1": "New-API alignment (paired t per language).",
                     "h2": "New-project alignment (paired t, pooled).",
                     "h3": "New-contributor alignment (Welch t, pooled)."}[which]
        _cmd.help = help_text
        return _cmd
    _make(_which)


@eval_group.command("h4")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--pr", "pr_path", required=True, type=click.Path(exists=True))
@click.option("--cutoff", required=True, type=int)
@click.option("--seed", default=1, type=int, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["table", "csv"]), default="table")
@click.option("--out", type=click.Path())
@click.option("--no-figure", is_flag=True)
def eval_h4(model_path, pr_path, cutoff, seed, fmt, out, no_figure):
    """Pull-request acceptance regression with alignment as a predictor."""
    cfg = _eval_config(cutoff, seed, 10, None, "mean")
    _echo_config("eval h4", {"model": model_path, "pr": pr_path, **cfg.__dict__})
    embedding = model_mod.load(model_path)
    prs = ev.read_pr_csv(pr_path)
    result = ev.eval_pr_acceptance(embedding, prs, cfg)
    rows = report_mod.regression_rows(result)
    meta = report_mod.regression_meta(result)
    _emit(rows, meta, fmt, out,
          figure=lambda p: report_mod.regression_figure(result, p,
                                                        title="PR acceptance (logit)"),
          no_figure=no_figure)


@eval_group.command("h5")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--survey", "survey_path", required=True, type=click.Path(exists=True))
@click.option("--cutoff", required=True, type=int)
@click.option("--seed", default=1, type=int, show_default=True)
@click.option("--n-random", default=10, show_default=True)
@click.option("--aggregation", type=click.Choice(["mean", "centroid"]), default="mean",
              show_default=True)
@click.option("--format", "fmt", type=click.Choice(["table", "csv"]), default="table")
@click.option("--out", type=click.Path())
@click.option("--no-figure", is_flag=True)
def eval_h5(model_path, survey_path, cutoff, seed, n_random, aggregation, fmt, out,
            no_figure):
    """Self-reported skill models: alignment (A) and score (B)."""
    cfg = _eval_config(cutoff, seed, n_random, None, aggregation)
    _echo_config("eval h5", {"model": model_path, "survey": survey_path, **cfg.__dict__})
    embedding = model_mod.load(model_path)
    surveys = ev.read_survey_csv(survey_path)
    model_a, model_b = ev.eval_self_reported(embedding, surveys, cfg)
    rows = [("model", "predictor", "coefficient", "std_error", "p_value")]
    for tag, result in (("A-alignment", model_a), ("B-score", model_b)):
        for body_row in report_mod.regression_rows(result)[1:]:
            rows.append((tag,) + body_row[:4])
    meta = {"a_r_squared": model_a.r_squared, "b_r_squared": model_b.r_squared}
    meta.update(model_a.meta)

    def figure(path):
        report_mod.regression_figure(model_b, path, title="Self-reported score model")

    _emit(rows, meta, fmt, out, figure=figure, no_figure=no_figure)


def main(argv=None) -> int:
    try:
        cli(args=argv, prog_name="skillspace", standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"UsageError: {exc.format_message()}", err=True)
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except SkillSpaceError as exc:
        click.echo(f"{exc.__class__.__name__}: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
