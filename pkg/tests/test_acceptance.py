"""Acceptance suite: one test per criterion, each printing a PASS line with its
measured numbers (run with -s or -v to see them).

Budgets and tolerances are pinned here, not configurable:
  1 gradient correctness      1e-4 relative, 64-bit, 100 instances, < 10 s
  2 synthetic H1 recovery     p < 0.01, cluster cosine gap >= 0.3, < 60 s
  3 synthetic H4 recovery     |coef - 1| <= 2 SE, VIFs reported, < 30 s
  4 stats oracle equivalence  1e-6 absolute vs checked-in references
  5 determinism + persistence bit-identical runs, byte-identical files
  6 extraction fidelity       100% exact golden suite
  7 query semantics           exact match with the exhaustive-cosine oracle
  8 corpus contracts          1e4-record round-trip + filter/split properties
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from skillspace.corpus import (
    DeltaRecord,
    FilterConfig,
    filter_corpus,
    format_delta_line,
    parse_delta_line,
    time_split,
)
from skillspace.embed import TrainConfig, loss_and_grad, train
from skillspace.evalharness import EvalConfig, eval_new_apis, eval_pr_acceptance
from skillspace.extract import decode_blob, extract_imports, languages
from skillspace.model import EntityRef, load, save
from skillspace.query import align_to_apis, analogy, cosine, most_similar
from skillspace.stats import (
    betainc_reg,
    logistic_regression,
    ols,
    paired_t_test,
    read_design_csv,
    vif,
    welch_t_test,
)

from _synthetic import cluster_corpus, handmade_model, random_model, synthetic_prs
from test_embed import dense_output_grad, finite_difference_grads, relative_error
from test_query import TOY_VECTORS, oracle_neighbors

FIXTURES = Path(__file__).parent / "fixtures"


def report(criterion, detail):
    print(f"\nACCEPTANCE {criterion}: PASS — {detail}")


def test_criterion_1_gradient_correctness():
    started = time.perf_counter()
    rng = np.random.default_rng(20240601)
    dim, V, T, k = 12, 60, 8, 20
    worst = 0.0
    for _ in range(100):
        W = rng.normal(0, 0.5, (V, dim))
        D = rng.normal(0, 0.5, (T, dim))
        O = rng.normal(0, 0.5, (V, dim))
        api_ctx = rng.choice(V, size=int(rng.integers(1, 8)), replace=False)
        tag_ctx = rng.choice(T, size=int(rng.integers(0, 4)), replace=False)
        if len(api_ctx) + len(tag_ctx) == 0:
            api_ctx = np.array([0])
        target = int(rng.integers(V))
        negatives = np.array([i for i in rng.integers(0, V, 3 * k) if i != target][:k],
                             dtype=np.int64)
        assert len(negatives) == k
        _, grad_out, grad_ctx = loss_and_grad(W, D, O, api_ctx, tag_ctx, target,
                                              negatives)
        fd_out, fd_ctx = finite_difference_grads(W, D, O, api_ctx, tag_ctx, target,
                                                 negatives)
        dense = dense_output_grad(O.shape, target, negatives, grad_out)
        errs = [relative_error(dense, fd_out)]
        if len(api_ctx):
            errs.append(relative_error(grad_ctx, fd_ctx["api"]))
        if len(tag_ctx):
            errs.append(relative_error(grad_ctx, fd_ctx["tag"]))
        worst = max(worst, *errs)
        assert all(e < 1e-4 for e in errs)
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0
    report(1, f"100 instances, worst relative error {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_synthetic_h1_recovery():
    started = time.perf_counter()
    corpus = cluster_corpus(n_deltas=2000, n_devs=40, apis_per_cluster=20,
                            n_projects=10, seed=2024)
    config = TrainConfig(dim=32, epochs=20, negatives=20, min_count=5, seed=13)
    model, _ = train(corpus.train, config)

    intra, inter = [], []
    ids = {c: [model.vocab.lookup(t) for t in corpus.cluster_apis[c]]
           for c in (0, 1)}
    for c in (0, 1):
        rows = [i for i in ids[c] if i is not None]
        for i, a in enumerate(rows):
            for b in rows[i + 1:]:
                intra.append(cosine(model.W[a], model.W[b]))
    for a in ids[0]:
        for b in ids[1]:
            if a is not None and b is not None:
                inter.append(cosine(model.W[a], model.W[b]))
    gap = float(np.mean(intra) - np.mean(inter))
    assert gap >= 0.3

    table = eval_new_apis(model, corpus.train, corpus.test,
                          EvalConfig(cutoff=corpus.cutoff, seed=99))
    _, result = table.entries[0]
    assert result.mean_diff > 0
    assert result.p_value < 0.01
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0
    report(2, f"mean diff {result.mean_diff:.3f} (p={result.p_value:.2e}), "
              f"cosine gap {gap:.3f}, {elapsed:.1f}s")


def test_criterion_3_synthetic_h4_recovery():
    started = time.perf_counter()
    model = random_model(n_apis=30, n_devs=60, n_projects=25, dim=16, seed=31)
    prs = synthetic_prs(model, n_prs=5000, seed=41, beta_sim=1.0)
    result = eval_pr_acceptance(model, prs, EvalConfig(cutoff=1, seed=51))
    coef, se, _ = result.coefficient("similarity")
    assert abs(coef - 1.0) <= 2.0 * se
    assert result.vif is not None
    assert set(result.vif) == set(result.names[1:])
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0
    report(3, f"similarity coefficient {coef:.3f} ± {se:.3f} (target 1.0), "
              f"{len(result.vif)} VIFs, max {max(result.vif.values()):.2f}, "
              f"{elapsed:.1f}s")


def test_criterion_4_stats_oracle_equivalence():
    stats_dir = FIXTURES / "stats"

    beta_cases = json.loads((stats_dir / "beta_reference.json").read_text())
    assert len(beta_cases) == 20
    for case in beta_cases:
        assert betainc_reg(case["a"], case["b"], case["x"]) == \
            pytest.approx(case["value"], abs=1e-10)

    tref = json.loads((stats_dir / "ttest_reference.json").read_text())
    paired = paired_t_test(tref["x"], tref["y"])
    for field in ("mean_diff", "t_stat", "p_value", "ci_low", "ci_high"):
        assert getattr(paired, field) == pytest.approx(tref["paired"][field], abs=1e-6)
    welch = welch_t_test(tref["x"], tref["w"])
    for field in ("mean_diff", "t_stat", "df", "p_value", "ci_low", "ci_high"):
        assert getattr(welch, field) == pytest.approx(tref["welch"][field], abs=1e-6)

    names, X, y = read_design_csv(str(stats_dir / "ols_fixture.csv"), response="y")
    oref = json.loads((stats_dir / "ols_reference.json").read_text())
    fit = ols(X, y, names)
    np.testing.assert_allclose(fit.coefficients, oref["coefficients"], atol=1e-6)
    np.testing.assert_allclose(fit.std_errors, oref["std_errors"], atol=1e-6)
    np.testing.assert_allclose(fit.p_values, oref["p_values"], atol=1e-6)

    names, X, y = read_design_csv(str(stats_dir / "logit_fixture.csv"), response="y")
    lref = json.loads((stats_dir / "logit_reference.json").read_text())
    fit = logistic_regression(X, y, names)
    np.testing.assert_allclose(fit.coefficients, lref["coefficients"], atol=1e-6)
    np.testing.assert_allclose(fit.std_errors, lref["std_errors"], atol=1e-6)
    np.testing.assert_allclose(fit.p_values, lref["p_values"], atol=1e-6)

    vref = json.loads((stats_dir / "vif_reference.json").read_text())
    got = vif(X, names)
    for name, value in vref.items():
        assert got[name] == pytest.approx(value, abs=1e-6)
    report(4, "paired/Welch t, OLS, logistic, VIF all within 1e-6 of references")


def test_criterion_5_determinism_and_persistence(tmp_path):
    corpus = cluster_corpus(n_deltas=400, n_devs=10, apis_per_cluster=12,
                            n_projects=6, seed=3)
    config = TrainConfig(dim=16, epochs=3, negatives=5, min_count=2, seed=77,
                         threads=1)
    a, _ = train(corpus.train, config)
    b, _ = train(corpus.train, config)
    assert a.W.tobytes() == b.W.tobytes()
    assert a.D.tobytes() == b.D.tobytes()
    assert a.O.tobytes() == b.O.tobytes()

    p1, p2 = str(tmp_path / "m1.sksp"), str(tmp_path / "m2.sksp")
    save(a, p1)
    save(load(p1), p2)
    with open(p1, "rb") as f1, open(p2, "rb") as f2:
        bytes1, bytes2 = f1.read(), f2.read()
    assert bytes1 == bytes2
    report(5, f"two seeded runs bit-identical; save→load→save byte-identical "
              f"({len(bytes1)} bytes)")


def test_criterion_6_extraction_fidelity():
    table = languages()
    exact = 0
    total = 0
    per_lang = {}
    for lang_dir in sorted((FIXTURES / "extract").iterdir()):
        if not lang_dir.is_dir():
            continue
        lang = table[lang_dir.name]
        goldens = sorted(lang_dir.glob("*.golden"))
        per_lang[lang_dir.name] = len(goldens)
        for golden in goldens:
            source = golden.with_name(golden.name[:-len(".golden")])
            expected = golden.read_text(encoding="utf-8").splitlines()
            got = extract_imports(lang, decode_blob(source.read_bytes()))
            total += 1
            assert got == expected, f"{source} extracted {got}, expected {expected}"
            exact += 1
    assert set(per_lang) == {"C", "JAVA", "PY", "GO", "RB", "JS", "PL", "R"}
    assert all(n >= 5 for n in per_lang.values())
    assert exact == total
    report(6, f"{exact}/{total} fixtures exact across {len(per_lang)} rule sets")


def test_criterion_7_query_semantics():
    toy = handmade_model(dict(TOY_VECTORS))
    # most_similar equals the exhaustive oracle for every seed
    for token in TOY_VECTORS:
        got = most_similar(toy, EntityRef("api", token), top_n=4)
        want = oracle_neighbors(toy, toy.W[toy.vocab.lookup(token)],
                                exclude_tokens={token})[:4]
        assert [(n.entity.id, n.score) for n in got] == want

    # analogy cancellation: +a -a +b ranks exactly like most_similar(b)
    got = analogy(toy, [(1.0, EntityRef("api", "a")), (-1.0, EntityRef("api", "a")),
                        (1.0, EntityRef("api", "b"))], top_n=5)
    want = most_similar(toy, EntityRef("api", "b"), top_n=5,
                        exclude={EntityRef("api", "a")})
    assert [(n.entity.id, n.score) for n in got] == \
        [(n.entity.id, n.score) for n in want]

    # alignment operations against directly computed cosines
    dev_model = handmade_model(dict(TOY_VECTORS), dev_vectors={"d": [1.0, 0.0, 0.0]})
    score = align_to_apis(dev_model, EntityRef("developer", "d"), sorted(TOY_VECTORS))
    direct = float(np.mean([cosine([1.0, 0.0, 0.0],
                                   dev_model.W[dev_model.vocab.lookup(t)])
                            for t in sorted(TOY_VECTORS)]))
    assert score.value == pytest.approx(direct, abs=0.0)
    assert score.n_items == 5

    # scale invariance: rescaling any stored vector keeps every ranking
    for scaled_token in TOY_VECTORS:
        scaled = handmade_model(
            {t: (np.asarray(v) * (7.5 if t == scaled_token else 1.0)).tolist()
             for t, v in TOY_VECTORS.items()})
        for seed_token in TOY_VECTORS:
            before = [n.entity.id for n in
                      most_similar(toy, EntityRef("api", seed_token), top_n=4)]
            after = [n.entity.id for n in
                     most_similar(scaled, EntityRef("api", seed_token), top_n=4)]
            assert before == after
    report(7, "neighbor/analogy/alignment all exact vs oracle; rank scale-invariant")


def test_criterion_8_corpus_contracts():
    rng = np.random.default_rng(606)
    alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._:-/@"

    def rand_field():
        n = int(rng.integers(1, 12))
        return "".join(alphabet[int(i)] for i in rng.integers(0, len(alphabet), n))

    for _ in range(10_000):
        record = DeltaRecord(
            language=rand_field(), project=rand_field(),
            timestamp=int(rng.integers(0, 2**31)), developer=rand_field(),
            apis=tuple(rand_field() for _ in range(int(rng.integers(1, 6)))))
        assert parse_delta_line(format_delta_line(record)) == record

    records = [DeltaRecord("PY", f"p{i % 3}", int(rng.integers(0, 1000)),
                           f"d{i % 7}", tuple(f"a{j}" for j in range(1 + i % 40)))
               for i in range(500)]
    cfg = FilterConfig(min_commits=50, max_commits=80, max_apis_per_delta=30)
    kept, rep = filter_corpus(records, cfg)
    from collections import Counter
    original_counts = Counter(r.developer for r in records)
    for r in kept:
        assert cfg.min_commits <= original_counts[r.developer] <= cfg.max_commits
        assert len(r.apis) <= cfg.max_apis_per_delta
    assert rep.input_deltas == len(records)

    cutoff = 500
    train_recs, test_recs = time_split(records, cutoff)
    assert len(train_recs) + len(test_recs) == len(records)
    assert all(r.timestamp < cutoff for r in train_recs)
    assert all(r.timestamp >= cutoff for r in test_recs)
    report(8, "1e4 round-trips exact; filter and split post-conditions hold")
