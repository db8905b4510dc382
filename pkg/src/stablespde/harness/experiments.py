"""The named experiments: thin wrappers turning library studies into tables and checks.

Every experiment takes ``(cfg, settings, seed, pool)`` and returns an
:class:`ExperimentResult`.  Randomness comes only from streams keyed by
``(seed, experiment, sub-task)``, so results do not depend on the thread
count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..coefficients import ConstantDiffusion
from ..ito_lyapunov import (corollary_spec, generator_gap_study, ito_decompose_mild,
                            ito_decompose_strong, lyapunov_certify)
from ..jump_diagnostics import (RadialWeight, annulus_report, compensated_martingale_test,
                                compensator_eval, extract_jumps, qv_expected_proxy,
                                quadratic_variation, tail_ratio_test)
from ..rng import PathStreams, make_generator
from ..spde_solver import convergence_study, mild_solve, yosida_solve
from ..stable_noise import (JUMP_RESOLVED, StableConstants, calibrate_lepage_scale,
                            increment_characteristic_check, levy_tail_oracle,
                            sample_noise_path, truncated_moment_integrals)
from ..stats import zero_mean_test
from ..stochastic_integral import (Kernel, SimpleIntegrand, calibrate_e2, fubini_refinement_study,
                                   integrate_simple, moment_bound_check,
                                   random_deterministic_integrand, sup_moment_samples)
from ..testfunctions import GaussianBump, PowerMixture, TrigFunction


@dataclass
class Check:
    name: str
    passed: bool
    row: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    name: str
    tables: dict = field(default_factory=dict)    # table name -> list of row dicts
    arrays: dict = field(default_factory=dict)    # array name -> ndarray (npz)
    records: dict = field(default_factory=dict)   # JSON-serializable
    checks: list = field(default_factory=list)
    plots: list = field(default_factory=list)     # (table, x, [y...], logx, logy)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def first_failure(self) -> Check | None:
        return next((c for c in self.checks if not c.passed), None)

    def check(self, name: str, passed, row: dict | None = None) -> bool:
        self.checks.append(Check(name, bool(passed), dict(row or {})))
        return bool(passed)


@dataclass(frozen=True)
class Experiment:
    name: str
    fn: object
    defaults: dict
    summary: str


EXPERIMENTS: dict[str, Experiment] = {}


def experiment(name: str, summary: str, **defaults):
    def wrap(fn):
        EXPERIMENTS[name] = Experiment(name, fn, defaults, summary)
        return fn
    return wrap


def resolve_settings(name: str, overrides: dict | None, n_paths: int | None = None) -> dict:
    exp = EXPERIMENTS[name]
    out = {**exp.defaults, **(overrides or {})}
    if n_paths is not None and "n_paths" in out:
        out["n_paths"] = int(n_paths)
    return out


def _map(pool, fn, items):
    items = list(items)
    if pool is None:
        return [fn(x) for x in items]
    return list(pool.map(fn, items))


def _strictly_decreasing(values) -> bool:
    v = list(values)
    return all(b < a for a, b in zip(v[:-1], v[1:]))


# -- stable noise ---------------------------------------------------------------------------

@experiment("noise_calibration", "increment law, series scale, tail scaling of the image measure",
            alphas=None, dims=[4], n_samples=1_000_000, n_probes=10, lepage=True,
            tail_paths=10_000, tail_dim=2, tail_epsilon=0.05, tail_radius=0.1,
            scaling_operators=3, scaling_dim=4, scaling_radii=[0.25, 4.0],
            scaling_rtol=1e-6)
def noise_calibration(cfg, st, seed, pool):
    res = ExperimentResult("noise_calibration")
    alphas = st["alphas"] or [cfg.scenario.alpha]
    configs = [(float(a), int(d)) for a in alphas for d in st["dims"]]

    def ecf(job):
        a, d = job
        rows = increment_characteristic_check(a, d, make_generator(seed, "ecf", f"{a:g}", d),
                                              n_samples=st["n_samples"], n_probes=st["n_probes"])
        return [{"alpha": a, "dim": d, **r} for r in rows]

    ecf_rows = [r for rows in _map(pool, ecf, configs) for r in rows]
    res.tables["ecf"] = ecf_rows
    for r in ecf_rows:
        res.check("ecf within 3 SE", r["pass"], r)

    constants = {}
    for a in sorted({a for a, _ in configs}):
        constants[a] = StableConstants.for_alpha(a)
    if st["lepage"]:
        def lepage(job):
            a, d = job
            return job, calibrate_lepage_scale(a, d, make_generator(seed, "lepage", f"{a:g}", d),
                                               n_samples=st["n_samples"])

        rows = []
        for (a, d), (rec, diag) in _map(pool, lepage, configs):
            constants[a] = constants[a].with_lepage(d, rec)
            rows.append({"alpha": a, "dim": d, "scale": diag["scale"], "se": diag["se"],
                         "analytic": diag["analytic"], "max_abs_z": diag["max_abs_z"]})
        res.tables["lepage_scale"] = rows
    res.records["constants"] = {f"{a:g}": c.to_dict() for a, c in constants.items()}

    # tail scaling of the jump counts, one binomial interval per alpha
    tail_rows = []
    for a in sorted({a for a, _ in configs}):
        n = st["tail_paths"]
        path = sample_noise_path(a, 1.0, st["tail_dim"], 1, JUMP_RESOLVED, st["tail_epsilon"],
                                 rng=PathStreams(seed, "tail_ratio", n, tag=(f"{a:g}",)),
                                 n_paths=n, series_budget=1.0)
        t = tail_ratio_test(np.linalg.norm(path.jump_size, axis=-1), st["tail_radius"], a)
        row = {"alpha": a, "r": st["tail_radius"], "n_beyond_r": t["n"], "n_beyond_2r": t["k"],
               "ratio": t["ratio"], "ci_lo": t["ci"][0], "ci_hi": t["ci"][1],
               "target": t["target"], "pass": t["pass"]}
        tail_rows.append(row)
        res.check("tail ratio 2^-alpha in 99% CI", t["pass"], row)
    res.tables["tail_ratio"] = tail_rows

    g = make_generator(seed, "oracle_scaling")
    scale_rows = []
    for a in sorted({a for a, _ in configs}):
        for i in range(st["scaling_operators"]):
            phi = g.standard_normal((st["scaling_dim"], st["scaling_dim"]))
            phi *= np.arange(1, st["scaling_dim"] + 1) ** -g.uniform(0.0, 2.0)
            t1 = levy_tail_oracle(phi, 1.0, a)
            for r in st["scaling_radii"]:
                tr = levy_tail_oracle(phi, r, a)
                rel = abs(tr - r ** -a * t1) / (r ** -a * t1)
                row = {"alpha": a, "operator": i, "r": r, "tail_r": tr, "scaled_tail_1": r ** -a * t1,
                       "rel_err": rel, "pass": rel <= st["scaling_rtol"]}
                scale_rows.append(row)
                res.check("oracle r^-alpha scaling", row["pass"], row)
    res.tables["oracle_scaling"] = scale_rows
    return res


# -- stochastic integrals --------------------------------------------------------------------

def _random_operator(g, dim):
    rank = int(g.integers(1, dim + 1))
    phi = g.standard_normal((dim, rank)) * np.arange(1, rank + 1) ** -g.uniform(0.0, 1.5)
    return phi / np.linalg.norm(phi) * g.uniform(0.2, 5.0)


@experiment("moment_bound", "truncated moments of the image measure and the p-th moment inequality",
            truncation_ms=[1, 2, 5, 10, 100], truncation_operators=20, truncation_dim=6,
            truncation_alpha=None, truncation_small_fraction=0.05, train=20, holdout=10,
            p_list=None, calibration_p=None, n_paths=4000, n_cells=64, dim=8, inflation=1.25)
def moment_bound(cfg, st, seed, pool):
    res = ExperimentResult("moment_bound")
    a = float(st["truncation_alpha"] or cfg.scenario.alpha)
    const = StableConstants.for_alpha(a)
    ms = [float(m) for m in st["truncation_ms"]]
    d_m = [const.d_alpha(m) for m in ms]
    res.records["c_alpha"] = const.c_alpha_record.to_dict()
    res.tables["d_alpha"] = [{"m": m, "d_alpha_m": v} for m, v in zip(ms, d_m)]
    g = make_generator(seed, "truncation_operators")
    rows = []
    for i in range(st["truncation_operators"]):
        phi = _random_operator(g, st["truncation_dim"])
        hs_a = float(np.linalg.norm(phi)) ** a
        sums = []
        for m, dm in zip(ms, d_m):
            inner, outer = truncated_moment_integrals(phi, m, a)
            total = inner + outer
            sums.append(total)
            row = {"operator": i, "rank": phi.shape[1], "m": m, "inner": inner, "outer": outer,
                   "sum": total, "bound": dm * hs_a, "ratio_to_d1": total / (d_m[0] * hs_a),
                   "pass": total <= dm * hs_a}
            rows.append(row)
            res.check("truncated moments <= d_alpha^m ||Phi||^alpha", row["pass"], row)
        tail = [s for m, s in zip(ms, sums) if m >= 2]
        res.check("truncated sums strictly decreasing for m >= 2", _strictly_decreasing(tail),
                  {"operator": i, "sums": tail})
        if 100.0 in ms:
            s100 = sums[ms.index(100.0)]
            lim = st["truncation_small_fraction"] * d_m[0] * hs_a
            res.check(f"sum at m=100 below {st['truncation_small_fraction']:g} d_alpha^1 ||Phi||^alpha",
                      s100 < lim, {"operator": i, "sum_100": s100, "limit": lim,
                                   "ratio_to_d1": s100 / (d_m[0] * hs_a)})
    res.tables["truncated_moments"] = rows
    big = [v for m, v in zip(ms, d_m) if m >= 2]
    res.check("d_alpha^m strictly decreasing for m >= 2", _strictly_decreasing(big),
              {"d_alpha_m": big})

    # moment inequality: calibrate on one family, test on a disjoint one
    alpha = cfg.scenario.alpha
    c2 = StableConstants.for_alpha(alpha)
    ps = [float(p) for p in (st["p_list"] or [0.5, 1.0, alpha / 2])]
    n, dim = st["n_paths"], st["dim"]

    def family(tag, count):
        gen = make_generator(seed, "moment_family", tag)
        return [random_deterministic_integrand(gen, dim, 1.0, f"{tag}{i}") for i in range(count)]

    def samples(job):
        tag, i, integrand = job
        return sup_moment_samples(integrand, 1.0, n, alpha, 1.0, st["n_cells"],
                                  PathStreams(seed, f"moment_{tag}", n, tag=(i,)))

    train = family("train", st["train"])
    hold = family("holdout", st["holdout"])
    tr_s = _map(pool, samples, [("train", i, f) for i, f in enumerate(train)])
    p_cal = float(st["calibration_p"] or alpha / 2)
    reports = [moment_bound_check(f, p_cal, n, c2, samples=s, label=f.label)
               for f, s in zip(train, tr_s)]
    rec = calibrate_e2(reports, alpha, st["inflation"])
    c2 = c2.with_e2(rec)
    res.records["e2_alpha"] = rec.to_dict()
    ho_s = _map(pool, samples, [("holdout", i, f) for i, f in enumerate(hold)])
    out = []
    for f, s in zip(hold, ho_s):
        for p in ps:
            r = moment_bound_check(f, p, n, c2, samples=s, label=f.label)
            row = {**r.rows()[0], "p": p, "integrand": f.label}
            out.append(row)
            res.check("held-out moment inequality", r.passed, row)
    res.tables["moment_holdout"] = out
    return res


@experiment("fubini", "iterated integrals in either order under grid doubling",
            dim=8, levels=[64, 128, 256, 512, 1024], n_paths=100, phi_scale=0.5, phi_power=1.0)
def fubini(cfg, st, seed, pool):
    res = ExperimentResult("fubini")
    s = cfg.build(dim=st["dim"])
    phi = np.diag(st["phi_scale"] * np.arange(1, st["dim"] + 1) ** -float(st["phi_power"]))
    kernel = Kernel.semigroup(s.model.mu, phi, s.T)
    levels = sorted(int(v) for v in st["levels"])
    fine = sample_noise_path(s.alpha, s.T, st["dim"], levels[-1],
                             rng=PathStreams(seed, "fubini", st["n_paths"]), n_paths=st["n_paths"])
    disc = fubini_refinement_study(kernel, fine, levels)
    rows = [{"n_cells": nc, "mean_discrepancy": float(v.mean()),
             "median_discrepancy": float(np.median(v)), "max_discrepancy": float(v.max())}
            for nc, v in sorted(disc.items())]
    res.tables["fubini"] = rows
    res.arrays["discrepancy"] = np.stack([disc[nc] for nc in levels])
    res.check("mean discrepancy strictly decreasing under doubling",
              _strictly_decreasing(r["mean_discrepancy"] for r in rows), {"rows": rows})
    res.plots.append(("fubini", "n_cells", ["mean_discrepancy"], True, True))
    return res


# -- jumps -----------------------------------------------------------------------------------

@experiment("compensator", "jump counts and compensated weight processes",
            dim=4, n_paths=10_000, n_cells=64, epsilon=0.05, series_budget=500.0,
            annulus_factors=[1, 2, 4, 8, 16], n_probe=5, level=0.01, n_se=3.0,
            G_constant={"type": "constant", "scale": 0.5, "power": 1.0},
            G_state={"type": "diagonal_sigmoid", "scale": 0.5, "power": 1.0})
def compensator(cfg, st, seed, pool):
    res = ExperimentResult("compensator")
    probes = np.arange(1, st["n_probe"] + 1) / st["n_probe"]

    def one(job):
        label, gspec = job
        s = cfg.build(dim=st["dim"], n_cells=st["n_cells"], noise_mode=JUMP_RESOLVED,
                      epsilon=st["epsilon"], series_budget=st["series_budget"], G=gspec)
        n = st["n_paths"]
        streams = PathStreams(seed, "compensator", n, tag=(label,))
        path = s.sample_noise(streams, n)
        x = mild_solve(s, path, x0=s.sample_x0(streams, n))
        jumps = extract_jumps(x, path, s)
        # every image jump above lo comes from a listed noise jump
        lo = st["epsilon"] * s.G.op_bound
        radii = lo * np.array([*st["annulus_factors"], np.inf], float)
        comp = compensator_eval(x, s, radii)
        return label, s, jumps, comp, lo

    out = _map(pool, one, [("constant", st["G_constant"]), ("state", st["G_state"])])
    for label, s, jumps, comp, lo in out:
        t = probes * s.T
        if isinstance(s.G, ConstantDiffusion):
            rows = annulus_report(jumps, comp, t, st["level"])
            res.tables["annulus_counts"] = rows
            for r in rows:
                res.check("annulus counts Poisson with T*oracle mass", r["pass"], r)
        else:
            w = RadialWeight.smooth_indicator(lo, 2 * lo)
            rep = compensated_martingale_test(jumps, comp, w, t, st["n_se"])
            rows = rep.rows()
            res.tables["compensated_weight"] = rows
            for r in rows:
                res.check("compensated weight process mean zero", r["pass"], r)
        res.records[f"{label}_G"] = {"G": s.G.to_dict(), "annulus_lo": lo,
                                     "jumps_per_path": float(jumps.time.size / jumps.n_paths)}
    return res


@experiment("quadratic_variation", "realized QV minus large jumps against the small-jump moment",
            dim=2, phi_scale=0.1, n_paths=1000, levels=[256, 512, 1024, 2048, 4096],
            thresholds=[0.1, 0.01, 0.001], series_budget=2000.0, n_se=3.0)
def quadratic_variation_exp(cfg, st, seed, pool):
    res = ExperimentResult("quadratic_variation")
    a, T, c, d = cfg.scenario.alpha, cfg.scenario.T, float(st["phi_scale"]), int(st["dim"])
    n = st["n_paths"]
    levels = sorted(int(v) for v in st["levels"])
    eps = [float(e) for e in st["thresholds"]]
    # list every noise jump whose image can exceed the smallest threshold
    path = sample_noise_path(a, T, d, levels[-1], JUMP_RESOLVED, epsilon=min(eps) / c,
                             rng=PathStreams(seed, "qv", n), n_paths=n,
                             series_budget=st["series_budget"])
    x = integrate_simple(SimpleIntegrand.constant(c * np.eye(d), T), path)
    expected = [qv_expected_proxy(np.full(d, c * c), a, d, e, path.series_floor, T) for e in eps]
    rows = []
    finest = None
    for nc in levels:
        rep = quadratic_variation(x.subsample(levels[-1] // nc), eps, path)
        pr = rep.proxy
        if nc == levels[-1]:
            finest = pr
        for i, e in enumerate(eps):
            m, se = float(pr[:, i].mean()), float(pr[:, i].std(ddof=1) / np.sqrt(n))
            ex = expected[i]["expected"]
            rows.append({"n_cells": nc, "threshold": e, "mean": m, "se": se, "expected": ex,
                         "oracle": expected[i]["oracle"], "z": (m - ex) / se if se > 0 else 0.0,
                         "pass": abs(m - ex) <= st["n_se"] * se})
    res.tables["qv"] = rows
    for r in rows:
        if r["n_cells"] == levels[-1]:
            res.check("finest-grid proxy matches small-jump moment", r["pass"], r)
    # continuous part: per-path intercept of proxy - expected against eps^(2 - alpha)
    xs = np.array(eps) ** (2 - a)
    ys = finest - np.array([e["expected"] for e in expected])
    design = np.stack([np.ones_like(xs), xs], axis=1)
    coef = np.linalg.lstsq(design, ys.T, rcond=None)[0]
    z = zero_mean_test(coef[0], st["n_se"])
    row = {"quantity": "continuous QV part", "estimate": z["mean"], "se": z["se"],
           "pass": z["pass"]}
    res.tables["continuous_part"] = [row]
    res.check("extrapolated continuous part is zero", z["pass"], row)
    res.records["series_floor"] = float(path.series_floor)
    return res


# -- Ito formulas and convergence ----------------------------------------------------------

def function_from_spec(spec: dict, dim: int):
    kind = spec["type"]
    if kind == "trig":
        a = np.zeros(dim)
        vals = np.asarray(spec["a"], float)
        a[: vals.size] = vals
        return TrigFunction.make(a, float(spec.get("phase", 0.0)), float(spec.get("amp", 1.0)))
    if kind == "bump_isotropic":
        return GaussianBump.isotropic(dim, float(spec.get("sigma", 1.0)),
                                      spec.get("center"), float(spec.get("amp", 1.0)))
    if kind == "bump_coordinate":
        return GaussianBump.coordinate(dim, int(spec.get("coord", 0)),
                                       float(spec.get("sigma", 1.0)),
                                       float(spec.get("center", 0.0)), float(spec.get("amp", 1.0)))
    if kind == "power_mixture":
        return PowerMixture.make(dim, float(spec.get("p", 0.5)))
    raise ValueError(f"unknown test function type '{kind}'")


STRONG_FUNCTIONS = [{"type": "trig", "a": [1.0, 0.5], "phase": 0.2},
                    {"type": "bump_isotropic", "sigma": 0.7},
                    {"type": "bump_coordinate", "coord": 0, "sigma": 0.5, "center": 0.3}]


@experiment("ito_strong", "term-by-term Ito formula on Yosida paths",
            dim=8, n_cells=256, yosida_n=64.0, n_paths=10_000, n_probe=5, n_se=3.0,
            functions=STRONG_FUNCTIONS)
def ito_strong(cfg, st, seed, pool):
    res = ExperimentResult("ito_strong")
    s = cfg.build(dim=st["dim"], n_cells=st["n_cells"])
    n = st["n_paths"]
    streams = PathStreams(seed, "ito_strong", n)
    path = s.sample_noise(streams, n)
    x = yosida_solve(s, float(st["yosida_n"]), path, x0=s.sample_x0(streams, n))

    def one(spec):
        f = function_from_spec(spec, s.dim)
        return f, ito_decompose_strong(x, path, f, s, st["n_probe"], st["n_se"])

    for f, rep in _map(pool, one, st["functions"]):
        rows = [{"function": f.label, **r} for r in rep.rows()]
        res.tables.setdefault("terms", []).extend(rows)
        for r in rows:
            if r["term"] == "M_f":
                res.check("M_f increments mean zero", r["pass"], r)
    return res


@experiment("ito_mild", "mild Ito formula through the Yosida ladder",
            n_cells=256, n_paths=4000, ladder=[4, 16, 64, 256, 1024], n_probe=5, n_se=3.0,
            function={"type": "trig", "a": [2.0], "phase": 0.3}, extrapolate=True)
def ito_mild(cfg, st, seed, pool):
    res = ExperimentResult("ito_mild")
    s = cfg.build(n_cells=st["n_cells"])
    n = st["n_paths"]
    streams = PathStreams(seed, "ito_mild", n)
    path = s.sample_noise(streams, n)
    x0 = s.sample_x0(streams, n)
    x = mild_solve(s, path, x0=x0)
    ns = [float(v) for v in st["ladder"]]
    ladder = dict(zip(ns, _map(pool, lambda m: yosida_solve(s, m, path, x0=x0), ns)))
    f = function_from_spec(st["function"], s.dim)
    rep = ito_decompose_mild(x, ladder, f, s, path, st["n_probe"], st["n_se"],
                             rng=make_generator(seed, "ito_mild", "modulus"),
                             extrapolate=st["extrapolate"])
    res.tables["terms"] = [{"function": f.label, **r} for r in rep.rows()]
    gaps = [{"n": k, "cauchy_gap": v} for k, v in sorted(rep.cauchy_gaps.items())]
    res.tables["cauchy_gaps"] = gaps
    res.check("ladder Cauchy gaps decreasing", rep.gaps_decreasing, {"gaps": gaps})
    for r in res.tables["terms"]:
        if r["tested"]:
            res.check(f"{r['term']} mean zero", r["pass"], r)
    res.plots.append(("cauchy_gaps", "n", ["cauchy_gap"], True, True))
    return res


@experiment("yosida_convergence", "Cauchy profile of the Yosida ladder and generator gaps",
            ladder=[1, 4, 16, 64, 256, 1024], n_paths=1000, p=1.0, generator=True,
            generator_paths=1000, generator_ladder=[1, 4, 16, 64, 256], generator_p=0.5,
            generator_stride=8, generator_fraction=0.1)
def yosida_convergence(cfg, st, seed, pool):
    res = ExperimentResult("yosida_convergence")
    s = cfg.scenario
    ns = [float(v) for v in st["ladder"]]
    n = st["n_paths"]
    rep = convergence_study(s, ns, n, st["p"], PathStreams(seed, "yosida", n))
    d_rows = [{"n": a, "m": b, "D": v} for (a, b), v in rep.D.items()]
    res.tables["cauchy_profile"] = d_rows
    med = [{"n": k, "median_sup_gap": v} for k, v in rep.uniform_gap_medians.items()]
    res.tables["uniform_gaps"] = med
    res.arrays["uniform_gaps"] = np.stack([rep.uniform_gaps[k] for k in ns[:-1]])
    res.check("D(n, 4n) strictly decreasing", _strictly_decreasing(r["D"] for r in d_rows),
              {"D": d_rows})
    res.check("median uniform gap strictly decreasing",
              _strictly_decreasing(r["median_sup_gap"] for r in med), {"medians": med})
    res.records["failed_paths"] = rep.n_failed
    res.plots.append(("cauchy_profile", "n", ["D"], True, True))
    if st["generator"]:
        V = PowerMixture.make(s.dim, st["generator_p"])
        gn = st["generator_paths"]
        gaps = generator_gap_study(V, s, [float(v) for v in st["generator_ladder"]], gn,
                                   PathStreams(seed, "generator", gn), st["generator_stride"])
        rows = [{"n": k, "estimate": e.value, "ci_lo": e.ci_lo, "ci_hi": e.ci_hi, "se": e.se}
                for k, e in sorted(gaps.items())]
        res.tables["generator_gap"] = rows
        res.check("generator gap strictly decreasing",
                  _strictly_decreasing(r["estimate"] for r in rows), {"rows": rows})
        ratio = rows[-1]["estimate"] / rows[0]["estimate"]
        res.check(f"generator gap at top below {st['generator_fraction']:g} of n=1 value",
                  ratio < st["generator_fraction"], {"ratio": ratio})
        res.plots.append(("generator_gap", "n", ["estimate"], True, True))
    return res


@experiment("lyapunov_certify", "ultimate-boundedness certificate from the drift conditions",
            T=5.0, n_cells=320, x0_amplitude=3.0, p=0.5, n_paths=10_000, t_points=21,
            eps=None, n_sobol=1024, n_visited=1000)
def lyapunov_certify_exp(cfg, st, seed, pool):
    res = ExperimentResult("lyapunov_certify")
    s = cfg.build(T=st["T"], n_cells=st["n_cells"], x0={"amplitude": st["x0_amplitude"]})
    eps = float(st["eps"] if st["eps"] is not None else s.model.mu[0])
    spec = corollary_spec(s, eps, float(st["p"]))
    n = st["n_paths"]
    rep = lyapunov_certify(spec, s, np.linspace(0.0, s.T, st["t_points"]), n,
                           PathStreams(seed, "lyapunov", n), eps=eps, n_sobol=st["n_sobol"],
                           n_visited=st["n_visited"])
    rows = rep.rows()
    res.tables["certificate"] = rows
    for r in rows:
        res.check("moment within ultimate bound", r["pass"], r)
    res.records["spec"] = spec.to_dict()
    res.records["drift_check"] = {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                                  for k, v in rep.drift_check.items()}
    res.records["x0_moment"] = rep.x0_moment
    res.plots.append(("certificate", "t", ["estimate", "bound"], False, False))
    return res
