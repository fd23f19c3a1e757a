"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s` to see every line.  All
tolerances are pinned here.  Desk-scale defaults: n=128, steps=32 (budget 4
per step), f=8, r=2, b=8, vocab 64, segment lengths 3..20, oracle
base=0.1 gain=0.8 window=2 discount=0.25 noise=0.05, seeds 0..99.
"""

import random

import pytest

from masksched.denoise import OracleParams, UniformSession
from masksched.harness import ExperimentSpec, gen_task, make_session, run_experiment
from masksched.metrics import accounting, annotate_mhco, mhco_step, verify_trace
from masksched.sched import ScheduleConfig, run_decode, step_budget
from masksched.seqcore import MASK, GenSequence, corrupt
from masksched.traceio import decision_fingerprint, read_trace, trace_to_bytes

STRATEGIES = ("standard", "block", "wavefront")
SEEDS = range(100)
DEFAULTS = dict(n=128, steps=32, f=8, r=2, b=8)
ORACLE = OracleParams(base=0.1, gain=0.8, window=2, noise_amp=0.05, segment_discount=0.25)


def _report(name, failures):
    line = f"PASS: {name}" if not failures else f"FAIL: {name} :: " + "; ".join(failures)
    print(line)
    assert not failures, line


@pytest.fixture(scope="module")
def default_runs():
    """One decode per (strategy, seed) at the defaults, with metrics."""
    runs = {s: [] for s in STRATEGIES}
    for seed in SEEDS:
        task = gen_task(128, 64, 3, 20, seed=seed)
        for strategy in STRATEGIES:
            cfg = ScheduleConfig(strategy=strategy, seed=seed, **DEFAULTS)
            session = make_session("oracle", seed, 64, task, ORACLE)
            trace = run_decode(cfg, session)
            trace.task = task.to_dict()
            annotate_mhco(trace)
            runs[strategy].append((trace, accounting(trace)))
    return runs


def test_budget_exactness():
    failures = []
    rng = random.Random(20240501)
    for _ in range(50):
        n = rng.randrange(1, 257)
        steps = rng.randrange(1, 65)
        f = rng.randrange(1, 17)
        r = rng.randrange(0, 9)
        b = rng.randrange(1, 17)
        budgets = [step_budget(t, n, steps) for t in range(1, steps + 1)]
        if sum(budgets) != n:
            failures.append(f"budgets sum {sum(budgets)} != n={n}")
            continue
        for strategy in STRATEGIES:
            cfg = ScheduleConfig(n, steps, f, r, b, strategy, rng.randrange(10**6))
            trace = run_decode(cfg, UniformSession(cfg.seed, 32))
            total = 0
            for rec in trace.steps:
                k = step_budget(rec.decision.step, n, steps)
                want = min(k, n - total)
                if len(rec.decision.selected) != want:
                    failures.append(
                        f"{strategy} n={n} T={steps} step {rec.decision.step}: "
                        f"|S|={len(rec.decision.selected)} != {want}"
                    )
                total += len(rec.decision.selected)
            if total != n:
                failures.append(f"{strategy} n={n} T={steps}: total {total} != n")
    _report("budget exactness (50 random configs, 3 strategies)", failures)


def test_compute_parity(default_runs):
    failures = []
    for idx, seed in enumerate(SEEDS):
        passes = {s: default_runs[s][idx][1].forward_passes for s in STRATEGIES}
        if len(set(passes.values())) != 1:
            failures.append(f"seed {seed}: forward passes differ {passes}")
        wave = default_runs["wavefront"][idx][1]
        if wave.token_updates > DEFAULTS["f"] * DEFAULTS["steps"]:
            failures.append(f"seed {seed}: wavefront updates {wave.token_updates} > f*T")
    _report("compute parity and frontier bound (100 seeds)", failures)


def test_reduction_equivalence():
    failures = []
    rng = random.Random(7)
    for seed in SEEDS:
        n = rng.randrange(1, 33)
        steps = rng.randrange(1, 17)
        task = gen_task(n, 32, 1, max(1, min(6, n)), seed)
        for kind in ("uniform", "oracle"):
            def session():
                if kind == "uniform":
                    return UniformSession(seed, 32)
                return make_session("oracle", seed, 32, task, ORACLE)

            std = run_decode(ScheduleConfig(n, steps, n, n, 8, "standard", seed), session())
            wav = run_decode(ScheduleConfig(n, steps, n, n, 8, "wavefront", seed), session())
            if decision_fingerprint(annotate_mhco(std)) != decision_fingerprint(
                annotate_mhco(wav)
            ):
                failures.append(f"seed {seed} n={n} T={steps} {kind}: traces differ")
    _report("reduction equivalence, unbounded frontier == global (100 seeds)", failures)


def test_block_ordering(default_runs):
    failures = []
    for idx, seed in enumerate(SEEDS):
        trace = default_runs["block"][idx][0]
        problems = verify_trace(trace)
        if problems:
            failures.append(f"seed {seed}: {problems[0]}")
        finalized = set()
        for rec in trace.steps:
            for p in rec.decision.selected:
                blk = p // DEFAULTS["b"]
                earlier = set(range(blk * DEFAULTS["b"]))
                if not earlier <= finalized:
                    failures.append(f"seed {seed}: {p} before block {blk} done")
                finalized.add(p)
    _report("block ordering by trace replay (100 runs)", failures)


def naive_mhco(selected, outside):
    violated = 0
    for i, si in selected.items():
        for j, sj in outside.items():
            if sj > si:
                violated += 1
                break
    return violated / len(selected)


def test_mhco_oracle_equivalence():
    failures = []
    rng = random.Random(11)
    lib_mean = ref_mean = 0.0
    for case in range(1000):
        ns, no = rng.randrange(1, 17), rng.randrange(0, 65)
        score = lambda: round(rng.random(), 2) if rng.random() < 0.5 else rng.random()
        selected = {i: score() for i in range(ns)}
        outside = {1000 + j: score() for j in range(no)}
        lib, ref = mhco_step(selected, outside), naive_mhco(selected, outside)
        if lib != ref:
            failures.append(f"case {case}: {lib} != naive {ref}")
        lib_mean += lib / 1000
        ref_mean += ref / 1000
    if abs(lib_mean - ref_mean) >= 1e-12:
        failures.append(f"means differ: {lib_mean} vs {ref_mean}")
    _report("priority-violation metric matches naive double loop (1000 cases)", failures)


def test_mhco_null_case(default_runs):
    failures = []
    for idx, seed in enumerate(SEEDS):
        mean = default_runs["standard"][idx][1].mean_mhco
        if mean != 0.0:
            failures.append(f"seed {seed}: standard mean {mean} != 0.0")
    _report("global top-k never out-scored (standard MHCO == 0, 100 seeds)", failures)


def test_directional_mhco_ordering(default_runs):
    failures = []
    wave = [m.mean_mhco for _, m in default_runs["wavefront"]]
    block = [m.mean_mhco for _, m in default_runs["block"]]
    mean_w, mean_b = sum(wave) / len(wave), sum(block) / len(block)
    if not mean_w < mean_b:
        failures.append(f"mean ordering broken: wavefront {mean_w:.4f} !< block {mean_b:.4f}")
    positive = sum(1 for w, b in zip(wave, block) if b - w > 0)
    if positive < 80:
        failures.append(f"difference positive in only {positive}/100 seeds (need >= 80)")
    _report(
        f"frontier beats block on priority violations "
        f"(means {mean_w:.4f} < {mean_b:.4f}, positive {positive}/100)",
        failures,
    )


def test_directional_accuracy_ordering(default_runs):
    failures = []
    means = {
        s: sum(m.exact_match for _, m in default_runs[s]) / len(default_runs[s])
        for s in STRATEGIES
    }
    if not means["wavefront"] >= means["block"]:
        failures.append(
            f"wavefront {means['wavefront']:.4f} < block {means['block']:.4f}"
        )
    if not means["block"] >= means["standard"]:
        failures.append(
            f"block {means['block']:.4f} < standard {means['standard']:.4f}"
        )
    _report(
        "aggregate accuracy ordering wavefront >= block >= standard "
        f"(got w={means['wavefront']:.4f} b={means['block']:.4f} s={means['standard']:.4f})",
        failures,
    )


def test_sweep_robustness(tmp_path):
    failures = []
    cell_means = {}
    for name, f_values, r_values in (
        ("f-sweep", [4, 8, 16], [2]),
        ("r-sweep", [8], [2, 4, 8]),
    ):
        spec = ExperimentSpec(
            strategies=["wavefront"],
            f_values=f_values,
            r_values=r_values,
            seeds=list(SEEDS),
            oracle=ORACLE,
        )
        out = tmp_path / name
        rows, aggs = run_experiment(spec, out_dir=str(out))
        for row in rows:
            if row.status != "completed" or row.violations:
                failures.append(f"{name} f={row.f} r={row.r} seed={row.seed}: {row.status}")
        for row in rows[:: len(SEEDS) // 10]:
            trace = read_trace(str(out / f"wavefront_f{row.f}_r{row.r}_seed{row.seed}.jsonl"))
            problems = verify_trace(trace)
            if problems:
                failures.append(f"{name} f={row.f} r={row.r} seed={row.seed}: {problems[0]}")
        for agg in aggs:
            cell_means[(agg["f"], agg["r"])] = agg["exact_match_mean"]
    spread = max(cell_means.values()) - min(cell_means.values())
    if spread >= 0.10:
        detail = ", ".join(f"f={f} r={r}: {v:.4f}" for (f, r), v in sorted(cell_means.items()))
        failures.append(f"accuracy spread {spread:.4f} >= 0.10 across grid ({detail})")
    _report(f"hyperparameter sweep robustness (spread {spread:.4f})", failures)


def test_determinism():
    failures = []
    for strategy in STRATEGIES:
        for seed in (0, 17, 99):
            cfg = ScheduleConfig(strategy=strategy, seed=seed, **DEFAULTS)
            task = gen_task(128, 64, 3, 20, seed=seed)

            def one():
                trace = run_decode(cfg, make_session("oracle", seed, 64, task, ORACLE))
                trace.task = task.to_dict()
                return trace_to_bytes(annotate_mhco(trace))

            if one() != one():
                failures.append(f"{strategy} seed {seed}: repeated run differs")
    _report("byte-identical traces on repeated runs", failures)


def test_corruption_statistics():
    failures = []
    rng = random.Random(0)
    x0 = GenSequence(slots=[rng.randrange(64) for _ in range(10_000)])
    for t in (0.1, 0.5, 0.9):
        out = corrupt(x0, t, seed=1)
        rate = sum(1 for s in out.slots if s is MASK) / len(out.slots)
        if abs(rate - t) > 0.02:
            failures.append(f"t={t}: empirical rate {rate:.4f} off by more than 0.02")
    _report("corruption statistics at t in {0.1, 0.5, 0.9}", failures)
