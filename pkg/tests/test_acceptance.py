"""Acceptance suite: the shipped heat scenario with its default experiment settings.

One session-scoped run of every experiment feeds criteria 1 to 12; criterion 13
replays that run and compares the reports byte for byte.  Each test records a
single PASS/FAIL line, listed in the terminal summary.
"""

import json
import os
import time
from pathlib import Path

import pytest

from stablespde.harness.cli import EXIT_OK, execute, replay
from stablespde.harness.config import load_config, shipped_scenario
from stablespde.harness.experiments import EXPERIMENTS
from stablespde.harness.store import read_csv
from stablespde.rng import make_generator
from stablespde.stable_noise import increment_characteristic_check

pytestmark = pytest.mark.acceptance

ALPHAS = [1.2, 1.5, 1.8]
DIMS = [2, 8]
OVERRIDES = {"noise_calibration": {"alphas": ALPHAS, "dims": DIMS, "lepage": False}}
RUN_BUDGET_S = 30 * 60
CONFIG_BUDGET_S = 2 * 60


def _quiet(*args, **kwargs):
    pass


@pytest.fixture(scope="session")
def run(tmp_path_factory):
    out = os.environ.get("STABLESPDE_ACCEPTANCE_OUT")
    out = Path(out) if out else tmp_path_factory.mktemp("acceptance") / "run"
    cfg = load_config(shipped_scenario("heat"))
    t0 = time.perf_counter()
    code, manifest = execute(cfg, list(EXPERIMENTS), out, settings_override=OVERRIDES,
                             log=_quiet)
    return {"out": out, "code": code, "manifest": manifest,
            "elapsed": time.perf_counter() - t0, "seed": cfg.seed}


def checks(run, experiment, name=None):
    rows = [{**r, "row": json.loads(r["row"])}
            for r in read_csv(run["out"] / experiment / "checks.csv")]
    if name is not None:
        rows = [r for r in rows if r["check"] == name]
        assert rows, f"{experiment} has no check named {name!r}"
    return rows


def settings(run, experiment):
    return run["manifest"]["experiments"][experiment]["settings"]


def verdict(log, n, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {title}" + (f" ({detail})" if detail else "")
    log[n] = line
    print(line)
    assert ok, line


def n_passed(rows):
    return sum(r["pass"] == "true" for r in rows), len(rows)


def test_criterion_01_noise_exactness(run, criterion_log):
    rows = checks(run, "noise_calibration", "ecf within 3 SE")
    ok_ecf = len(rows) == 10 * len(ALPHAS) * len(DIMS) and all(r["pass"] == "true" for r in rows)
    st = settings(run, "noise_calibration")
    assert st["n_samples"] == 1_000_000 and st["n_probes"] == 10
    # per-configuration wall time of the same check, timed in isolation
    times = {}
    for a in ALPHAS:
        for d in DIMS:
            t0 = time.perf_counter()
            increment_characteristic_check(a, d, make_generator(run["seed"], "timing", f"{a:g}", d))
            times[(a, d)] = time.perf_counter() - t0
    worst = max(times.values())
    p, n = n_passed(rows)
    verdict(criterion_log, 1, "empirical characteristic function of exact increments",
            ok_ecf and worst < CONFIG_BUDGET_S,
            f"{p}/{n} probes within 3 SE; slowest config {worst:.1f}s")


def test_criterion_02_tail_scaling(run, criterion_log):
    tail = checks(run, "noise_calibration", "tail ratio 2^-alpha in 99% CI")
    scaling = checks(run, "noise_calibration", "oracle r^-alpha scaling")
    st = settings(run, "noise_calibration")
    assert st["tail_paths"] == 10_000 and st["scaling_rtol"] == 1e-6
    worst = max(r["row"]["rel_err"] for r in scaling)
    pt, nt = n_passed(tail)
    ps, ns = n_passed(scaling)
    verdict(criterion_log, 2, "jump-count tail ratio and oracle scaling",
            pt == nt and ps == ns,
            f"ratio in CI {pt}/{nt}; scaling {ps}/{ns}, worst rel err {worst:.1e}")


def test_criterion_03_truncated_moment_suite(run, criterion_log):
    st = settings(run, "moment_bound")
    assert sorted(st["truncation_ms"]) == [1, 2, 5, 10, 100] and st["truncation_operators"] == 20
    names = ["truncated moments <= d_alpha^m ||Phi||^alpha",
             "truncated sums strictly decreasing for m >= 2",
             "d_alpha^m strictly decreasing for m >= 2",
             "sum at m=100 below 0.05 d_alpha^1 ||Phi||^alpha"]
    counts = {nm: n_passed(checks(run, "moment_bound", nm)) for nm in names}
    detail = "; ".join(f"{nm}: {p}/{n}" for nm, (p, n) in counts.items())
    verdict(criterion_log, 3, "truncated moment bounds", all(p == n for p, n in counts.values()),
            detail)


def test_criterion_04_moment_inequality(run, criterion_log):
    st = settings(run, "moment_bound")
    assert st["train"] == 20 and st["holdout"] == 10
    rows = checks(run, "moment_bound", "held-out moment inequality")
    ps = {round(r["row"]["p"], 6) for r in rows}
    alpha = load_config(shipped_scenario("heat")).scenario.alpha
    assert ps == {0.5, 1.0, round(alpha / 2, 6)}
    p, n = n_passed(rows)
    verdict(criterion_log, 4, "held-out moment inequality", p == n == 30, f"{p}/{n} held out")


def test_criterion_05_compensator(run, criterion_log):
    st = settings(run, "compensator")
    assert st["n_paths"] == 10_000 and st["level"] == 0.01 and st["n_probe"] == 5
    counts = checks(run, "compensator", "annulus counts Poisson with T*oracle mass")
    weights = checks(run, "compensator", "compensated weight process mean zero")
    pc, nc = n_passed(counts)
    pw, nw = n_passed(weights)
    verdict(criterion_log, 5, "compensator of the solution jump measure",
            pc == nc and pw == nw == 5,
            f"Poisson annulus tests {pc}/{nc}; weight-process probes {pw}/{nw}")


def test_criterion_06_pure_discontinuity(run, criterion_log):
    st = settings(run, "quadratic_variation")
    assert st["levels"] == [2 ** k for k in range(8, 13)]
    assert st["thresholds"] == [0.1, 0.01, 0.001]
    proxy = checks(run, "quadratic_variation", "finest-grid proxy matches small-jump moment")
    cont = checks(run, "quadratic_variation", "extrapolated continuous part is zero")
    pp, npx = n_passed(proxy)
    pc, nc = n_passed(cont)
    verdict(criterion_log, 6, "realized QV minus jump sum", pp == npx == 3 and pc == nc == 1,
            f"small-jump moment {pp}/{npx}; continuous part zero {pc}/{nc}")


def test_criterion_07_strong_ito(run, criterion_log):
    st = settings(run, "ito_strong")
    assert st["n_paths"] == 10_000 and st["dim"] == 8 and st["n_probe"] == 5
    rows = checks(run, "ito_strong", "M_f increments mean zero")
    p, n = n_passed(rows)
    verdict(criterion_log, 7, "strong Ito residual is centred", p == n == 15,
            f"{p}/{n} probe means within 3 SE")


def test_criterion_08_yosida_convergence(run, criterion_log):
    st = settings(run, "yosida_convergence")
    assert st["n_paths"] == 1000 and st["p"] == 1.0
    assert [float(v) for v in st["ladder"]] == [1, 4, 16, 64, 256, 1024]
    d = checks(run, "yosida_convergence", "D(n, 4n) strictly decreasing")
    med = checks(run, "yosida_convergence", "median uniform gap strictly decreasing")
    verdict(criterion_log, 8, "Yosida ladder Cauchy profile",
            d[0]["pass"] == "true" and med[0]["pass"] == "true",
            "D(n, 4n) " + ", ".join(f"{e['D']:.3g}" for e in d[0]["row"]["D"])
            + f"; median gap decreasing {med[0]['pass']}")


def test_criterion_09_generator_convergence(run, criterion_log):
    st = settings(run, "yosida_convergence")
    assert [float(v) for v in st["generator_ladder"]] == [1, 4, 16, 64, 256]
    dec = checks(run, "yosida_convergence", "generator gap strictly decreasing")
    top = checks(run, "yosida_convergence", "generator gap at top below 0.1 of n=1 value")
    verdict(criterion_log, 9, "generator gap along the ladder",
            dec[0]["pass"] == "true" and top[0]["pass"] == "true",
            f"decreasing {dec[0]['pass']}; top / n=1 ratio {top[0]['row']['ratio']:.3g}")


def test_criterion_10_lyapunov_certificate(run, criterion_log):
    st = settings(run, "lyapunov_certify")
    assert st["T"] == 5.0 and st["p"] == 0.5 and st["n_paths"] == 10_000
    rows = checks(run, "lyapunov_certify", "moment within ultimate bound")
    cert = read_csv(run["out"] / "lyapunov_certify" / "certificate.csv")
    assert len(cert) == len(rows) == st["t_points"]
    slack = min(float(r["bound"]) - float(r["ci_lo"]) for r in cert)
    p, n = n_passed(rows)
    verdict(criterion_log, 10, "ultimate boundedness certificate", p == n,
            f"{p}/{n} grid times; min bound - CI low {slack:.3g}")


def test_criterion_11_mild_ito(run, criterion_log):
    names = ["ladder Cauchy gaps decreasing", "closure_residual mean zero",
             "compensated_measure mean zero"]
    counts = {nm: n_passed(checks(run, "ito_mild", nm)) for nm in names}
    verdict(criterion_log, 11, "mild Ito decomposition", all(p == n for p, n in counts.values()),
            "; ".join(f"{nm}: {p}/{n}" for nm, (p, n) in counts.items()))


def test_criterion_12_stochastic_fubini(run, criterion_log):
    st = settings(run, "fubini")
    assert st["levels"] == [2 ** k for k in range(6, 11)] and st["n_paths"] == 100
    rows = checks(run, "fubini", "mean discrepancy strictly decreasing under doubling")
    verdict(criterion_log, 12, "iterated integrals commute in the limit",
            rows[0]["pass"] == "true",
            "mean discrepancy " + ", ".join(f"{e['mean_discrepancy']:.2g}"
                                            for e in rows[0]["row"]["rows"]))


def test_criterion_13_reproducibility(run, criterion_log, tmp_path_factory):
    logs = []
    code = replay(run["out"] / "manifest.json", tmp_path_factory.mktemp("acceptance_replay"),
                  log=lambda *a, **k: logs.append(" ".join(map(str, a))))
    identical = code == EXIT_OK and any("bit-identical" in line for line in logs)
    mismatches = [line for line in logs if "mismatch" in line or "error" in line]
    verdict(criterion_log, 13, "bit-identical replay and run time",
            identical and run["elapsed"] < RUN_BUDGET_S,
            f"replay {'bit-identical' if identical else mismatches[:3]}; "
            f"acceptance run {run['elapsed'] / 60:.1f} min on {os.cpu_count()} core(s)")
