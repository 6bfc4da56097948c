"""Statistical acceptance batteries.

Each ``check_*`` function runs one criterion end to end and returns a
``CheckResult``.  Sample sizes default to the full acceptance scale;
``quick=True`` divides them (down to about 10**4 draws) and widens
relative-variance tolerances by the square root of the reduction so the
tolerance stays the same number of standard errors.

Where one criterion runs several hypothesis tests, they are judged together
at family-wise level 0.01 (Holm's step-down procedure).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import accounting, histogram, noise, oracles
from .experiment import ExperimentConfig, log_grid, simulate
from .factorization import FactorizedQuery, fact_init, fact_release, left_inverse_check
from .ledger import ledger_init

ALPHA = 0.01


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


# Every battery runs at family-wise alpha = 0.01, so a correct implementation
# still fails some battery for roughly one seed in ten.  Runs are reproducible
# from this declared seed.
DEFAULT_SEED = 1


def holm_passes(pvalues, alpha=ALPHA) -> bool:
    """Holm step-down: True iff no hypothesis in the family is rejected."""
    p = np.sort(np.asarray(pvalues, dtype=float))
    m = len(p)
    return bool(np.all(p > alpha / (m - np.arange(m)))) if m else True


def _scale(n, quick, floor=10_000):
    return max(floor, n // 100) if quick else n


def _tol(rel_tol, n_full, n):
    return rel_tol * math.sqrt(n_full / n)


def chi2_two_sample(a, b, min_expected=5):
    """Chi-square homogeneity test on integer samples with sparse tails pooled."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    top = int(max(a.max(), b.max()))
    ca = np.bincount(a, minlength=top + 1).astype(float)
    cb = np.bincount(b, minlength=top + 1).astype(float)
    tot = ca + cb
    exp_min = tot * min(len(a), len(b)) / (len(a) + len(b))
    # pool bins from the right until every bin has enough expected mass
    bins_a, bins_b = [], []
    acc_a = acc_b = acc_e = 0.0
    for i in range(top, -1, -1):
        acc_a += ca[i]
        acc_b += cb[i]
        acc_e += exp_min[i]
        if acc_e >= min_expected:
            bins_a.append(acc_a)
            bins_b.append(acc_b)
            acc_a = acc_b = acc_e = 0.0
    if acc_a or acc_b:
        if bins_a:
            bins_a[-1] += acc_a
            bins_b[-1] += acc_b
        else:
            bins_a.append(acc_a)
            bins_b.append(acc_b)
    if len(bins_a) < 2:
        return 1.0
    return float(stats.chi2_contingency(np.array([bins_a, bins_b]))[1])


# ---------------------------------------------------------------------------
# 1-2 Gaussian engine


def _gaussian_stream(n, rhos_in_order, rng, delta2=1.0):
    ledger = ledger_init(np.zeros(n), delta2, "gaussian")
    return {rho: ledger.release(rho, rng) for rho in rhos_in_order}


def check_gaussian_marginals(rng, quick=False, n_full=1_000_000, rel_tol=0.01):
    n = _scale(n_full, quick)
    tol = _tol(rel_tol, n_full, n)
    ys = _gaussian_stream(n, (1.0, 0.1, 5.0), rng)
    errs = {rho: abs(np.var(y) / (1 / (2 * rho)) - 1) for rho, y in ys.items()}
    ok = all(e <= tol for e in errs.values())
    detail = ", ".join(f"rho={r}: rel.err {e:.4%}" for r, e in sorted(errs.items()))
    return CheckResult("1 gaussian marginal variance", ok, f"{detail} (tol {tol:.2%}, N={n})", errs)


def covariance_z_scores(samples: np.ndarray, target: np.ndarray) -> np.ndarray:
    """(empirical - target) / SE for every covariance entry; rows are variables."""
    n = samples.shape[1]
    emp = np.cov(samples)
    diag = np.diag(target)
    se = np.sqrt((target**2 + np.outer(diag, diag)) / n)
    return (emp - target) / se


def check_gaussian_covariance(rng, quick=False, n_full=100_000, max_se=4.0):
    n = _scale(n_full, quick)
    rhos = (1.0, 0.1, 5.0)
    ys = _gaussian_stream(n, rhos, rng)
    grid = sorted(rhos)
    z = covariance_z_scores(np.stack([ys[r] for r in grid]), oracles.gaussian_covariance_law(grid))
    worst = float(np.max(np.abs(z)))
    return CheckResult("2 covariance law", worst <= max_se, f"max |z| = {worst:.2f} (limit {max_se}, N={n})")


# ---------------------------------------------------------------------------
# 3 convolution preorder


def bridge_pvalues(family, pairs, n, rng):
    """p-values of base(high) + bridge(high -> low) versus fresh base(low)."""
    pv = []
    for _ in range(pairs):
        if family == "laplace":
            b_small, b_large = np.sort(rng.uniform(0.1, 5.0, 2))
            x = rng.laplace(0, b_small, n) + noise.sample_laplace_bridge(b_small, b_large, rng, n)
            pv.append(stats.ks_2samp(x, rng.laplace(0, b_large, n)).pvalue)
        elif family == "poisson":
            lam_low, lam_high = np.sort(rng.uniform(0.2, 20.0, 2))
            x = rng.poisson(lam_low, n) + noise.sample_poisson_bridge(lam_high, lam_low, rng, n)
            pv.append(chi2_two_sample(x, rng.poisson(lam_high, n)))
        elif family == "exponential":
            lam1, lam2 = np.sort(rng.uniform(0.1, 5.0, 2))
            x = rng.exponential(1 / lam2, n) + noise.sample_exponential_bridge(lam1, lam2, rng, n)
            pv.append(stats.ks_2samp(x, rng.exponential(1 / lam1, n)).pvalue)
        else:
            raise ValueError(family)
    return pv


def check_convolution_preorder(rng, quick=False, n_full=100_000, pairs=20):
    n = _scale(n_full, quick)
    parts, allp = [], []
    for fam in ("laplace", "poisson", "exponential"):
        pv = bridge_pvalues(fam, pairs, n, rng)
        allp += pv
        parts.append(f"{fam} min p={min(pv):.3g} ({sum(p < ALPHA for p in pv)} raw p<0.01)")
    # one Holm family for the whole criterion
    ok = holm_passes(allp)
    return CheckResult("3 convolution preorder", ok, "; ".join(parts) + f" (N={n}, {pairs} pairs)")


# ---------------------------------------------------------------------------
# 4 Laplace conditional sampler


def random_laplace_inputs(rng, m):
    b2 = rng.uniform(0.05, 3.0, m)
    b = b2 * rng.uniform(1.01, 4.0, m)
    b1 = b * rng.uniform(1.01, 4.0, m)
    k = rng.laplace(0.0, b1) + rng.choice([-1, 1], m) * rng.uniform(0, 50, m) * (rng.random(m) < 0.1)
    return b, b2, b1, k


def check_laplace_release(rng, quick=False, n_full=100_000):
    n = _scale(n_full, quick)
    ledger = ledger_init(np.zeros(n), 1.0, "laplace", rho_inf=10.0, rng=rng)
    # 0.5 lands between 0.25 and 1, exercising the three-branch conditional
    ys = {rho: ledger.release(rho, rng) for rho in (1.0, 0.25, 0.5)}
    pv = [stats.kstest(y, stats.laplace(scale=1 / rho).cdf).pvalue for rho, y in ys.items()]
    b, b2, b1, k = random_laplace_inputs(rng, 1000)
    w = noise.laplace_conditional_weights(b, b2, b1, k)
    dev = float(np.max(np.abs(w.total() - 1)))
    ok = holm_passes(pv) and dev <= 1e-9
    ps = ", ".join(f"b={1 / r:g}: p={p:.3g}" for r, p in zip(ys, pv))
    return CheckResult("4 laplace conditional", ok, f"{ps}; max |sum-1| = {dev:.1e} (N={n})")


# ---------------------------------------------------------------------------
# 5 Poisson conditional pmf


def check_poisson_pmf():
    worst = 0.0
    lams = (0.5, 1.0, 2.0, 5.0)
    for l1 in lams:
        for l2 in lams:
            for k in range(13):
                got = noise.poisson_conditional_pmf(l1, l2, k)
                ref = oracles.poisson_conditional_enumeration(l1, l2, k)
                worst = max(worst, float(np.max(np.abs(got - ref))))
    return CheckResult("5 poisson conditional pmf", worst < 1e-12, f"max abs error {worst:.2e}")


# ---------------------------------------------------------------------------
# 6 sparse histogram equivalence


def default_hist_case():
    hist = histogram.Histogram(100, {3: 5, 17: 3, 42: 2, 60: 1, 99: 8})
    return hist, [0.3, 1.0, 3.0], [3.0, 2.0, 1.5], 1.0


def run_histogram_trials(hist, budgets, thresholds, delta2, trials, rng, algorithm="efficient", path="exact"):
    """Collect per-round release data split by class (true nonzero / zero)."""
    support = hist.support
    m = len(budgets)
    values = {(r, c): [] for r in range(m) for c in ("nonzero", "zero")}
    zero_counts = {r: np.zeros(trials, dtype=np.int64) for r in range(m)}
    nonzero_counts = {r: np.zeros(trials, dtype=np.int64) for r in range(m)}
    draw_ok = True
    for t in range(trials):
        state = histogram.NaiveHistState() if algorithm == "naive" else histogram.EffHistState()
        for r in range(m):
            if algorithm == "naive":
                y = histogram.naive_release(hist, state, budgets[r], thresholds[r], delta2, rng)
                out = {int(i): float(y[i]) for i in np.flatnonzero(y)}
            else:
                out = histogram.efficient_release(hist, state, budgets[r], thresholds[r], delta2, rng, path)
            for i, v in out.items():
                cls = "nonzero" if i in support else "zero"
                values[(r, cls)].append(v)
            nz = sum(1 for i in out if i in support)
            nonzero_counts[r][t] = nz
            zero_counts[r][t] = len(out) - nz
        if algorithm != "naive":
            draw_ok &= state.draws == (hist.k + state.activated) * m
    return {"values": values, "zero_counts": zero_counts, "nonzero_counts": nonzero_counts, "draws_ok": draw_ok}


def histogram_equivalence_pvalues(a, b):
    pv = {}
    for (r, cls), xa in a["values"].items():
        xb = b["values"][(r, cls)]
        if len(xa) > 1 and len(xb) > 1:
            pv[f"round {r + 1} {cls} values KS"] = stats.ks_2samp(xa, xb).pvalue
    for r in a["zero_counts"]:
        pv[f"round {r + 1} zero frequency"] = chi2_two_sample(a["zero_counts"][r], b["zero_counts"][r])
        pv[f"round {r + 1} nonzero frequency"] = chi2_two_sample(a["nonzero_counts"][r], b["nonzero_counts"][r])
    return pv


def check_histogram_equivalence(rng, quick=False, trials_full=10_000):
    trials = max(1000, trials_full // 10) if quick else trials_full
    case = default_hist_case()
    naive = run_histogram_trials(*case, trials, rng, algorithm="naive")
    eff = run_histogram_trials(*case, trials, rng, algorithm="efficient")
    pv = histogram_equivalence_pvalues(naive, eff)
    ok = holm_passes(list(pv.values())) and eff["draws_ok"]
    worst = min(pv, key=pv.get)
    return CheckResult(
        "6 sparse histogram equivalence",
        ok,
        f"{len(pv)} tests, min p={pv[worst]:.3g} ({worst}); draw counter (k+c)m exact: {eff['draws_ok']} (trials={trials})",
        pv,
    )


# ---------------------------------------------------------------------------
# 7 Fig. 2 reproduction


def check_fig2(seed=0, quick=False, reps_full=1_000_000, rel_tol=0.01, points=20):
    reps = _scale(reps_full, quick)
    tol = _tol(rel_tol, reps_full, reps)
    grid = log_grid(0.001, 5.0, points)
    rows = simulate(ExperimentConfig(grid, reps, seed))
    loss = [r for r in rows if r["mode"] == "lossless"]
    ind = [r for r in rows if r["mode"] == "independent"]
    worst = max(abs(r["empirical_variance"] / (1 / (2 * r["rho"])) - 1) for r in loss)
    larger = all(i["empirical_variance"] > l["empirical_variance"] for i, l in zip(ind[1:], loss[1:]))
    # denser grid on the same range -> larger independent-mode variance at rho = 5
    dense = simulate(ExperimentConfig(log_grid(0.001, 5.0, 2 * points), reps, seed + 1, modes=("independent",)))
    growing = dense[-1]["empirical_variance"] > ind[-1]["empirical_variance"]
    ok = worst <= tol and larger and growing
    return CheckResult(
        "7 fig2 reproduction",
        ok,
        f"lossless max rel.err {worst:.3%} (tol {tol:.2%}); independent larger at all interior points: {larger}; "
        f"final var {ind[-1]['empirical_variance']:.4g} ({points} pts) < {dense[-1]['empirical_variance']:.4g} "
        f"({2 * points} pts): {growing} (reps={reps})",
    )


# ---------------------------------------------------------------------------
# 8 factorization


def check_factorization(rng, quick=False, n_full=1_000_000, cov_n_full=100_000, rel_tol=0.01, max_se=4.0):
    q = FactorizedQuery.prefix_sums(8)
    ok_inv, L_pinv = left_inverse_check(q.L)
    x = np.arange(8.0)
    rhos = (1.0, 0.1, 5.0)

    def stream(n):
        ledger = fact_init(q, np.broadcast_to(x, (n, 8)))
        return {rho: (fact_release(ledger, rho, rng) - q.A @ x) @ L_pinv.T for rho in rhos}

    n = _scale(n_full, quick)
    tol = _tol(rel_tol, n_full, n)
    ys = stream(n)
    var_err = max(float(np.max(np.abs(ys[r].var(axis=0) / (1 / (2 * r)) - 1))) for r in rhos)
    del ys
    cn = _scale(cov_n_full, quick)
    ys = stream(cn)
    grid = sorted(rhos)
    target = oracles.gaussian_covariance_law(grid)
    worst_z = max(
        float(np.max(np.abs(covariance_z_scores(np.stack([ys[r][:, i] for r in grid]), target))))
        for i in range(8)
    )
    ok = ok_inv and var_err <= tol and worst_z <= max_se
    return CheckResult(
        "8 factorization (prefix sums, L^-1 applied)",
        ok,
        f"max var rel.err {var_err:.3%} (tol {tol:.2%}); max cov |z| {worst_z:.2f} (limit {max_se})",
    )


# ---------------------------------------------------------------------------
# 9 Poisson accountant


def poisson_unit_epsilon_mpmath(lam, delta, d=1):
    """High-precision recomputation of the unit-sensitivity bound, term by term."""
    import mpmath as mp

    with mp.workdps(50):
        lam, delta = mp.mpf(lam), mp.mpf(delta)
        t1 = mp.sqrt(2 * mp.log(mp.mpf("1.25") / delta)) / mp.sqrt(lam)
        t2 = 2 * mp.log(20 * d / delta) * mp.log(10 / delta) / lam
        return float(t1), float(t2)


def check_poisson_accountant():
    eps = accounting.poisson_epsilon_unit(1000, 1e-6, 1).epsilon
    t1, t2 = poisson_unit_epsilon_mpmath(1000, 1e-6, 1)
    close = abs(eps - (t1 + t2)) <= 1e-3 and abs(eps - 0.709) <= 1e-3
    bound = 23 * math.log(10 / 1e-6)
    rejected = True
    for fn in (accounting.poisson_epsilon_unit, accounting.poisson_epsilon):
        try:
            fn(bound * 0.999, 1e-6, 1)
            rejected = False
        except accounting.PreconditionError:
            pass
    return CheckResult(
        "9 poisson accountant",
        close and rejected,
        f"eps={eps:.5f} (terms {t1:.5f} + {t2:.5f}); rejects lambda below {bound:.2f}: {rejected}",
    )


# ---------------------------------------------------------------------------
# 10 crossing probability


def check_crossing_probability(rng, quick=False, n_full=10_000_000, max_se=3.0):
    n = _scale(n_full, quick, floor=100_000)
    _, budgets, thresholds, delta2 = default_hist_case()
    parts, ok = [], True
    for r in (1, 2, 3):
        p = histogram.crossing_probability(r, budgets, thresholds, delta2)
        p_mc, se = oracles.crossing_probability_mc(r, budgets, thresholds, delta2, n, rng)
        z = (p - p_mc) / se
        ok &= abs(z) <= max_se
        parts.append(f"r={r}: grid {p:.4e} vs MC {p_mc:.4e} (z={z:+.2f})")
    return CheckResult("10 crossing probability", ok, "; ".join(parts) + f" (N={n})")


# ---------------------------------------------------------------------------
# invariant batteries beyond the numbered criteria


def check_order_invariance(rng, quick=False, n_full=100_000, max_se=4.0):
    n = _scale(n_full, quick)
    rhos = [0.2, 0.7, 1.5, 3.0]
    a = _gaussian_stream(n, [1.5, 0.2, 3.0, 0.7], rng)
    b = _gaussian_stream(n, [0.7, 3.0, 0.2, 1.5], rng)
    target = oracles.gaussian_covariance_law(rhos)
    za = covariance_z_scores(np.stack([a[r] for r in rhos]), target)
    zb = covariance_z_scores(np.stack([b[r] for r in rhos]), target)
    worst = float(max(np.abs(za).max(), np.abs(zb).max()))
    return CheckResult("order invariance", worst <= max_se, f"max |z| = {worst:.2f} over two request orders")


def check_post_processing(rng, quick=False, n_full=100_000):
    n = _scale(n_full, quick)
    ys = _gaussian_stream(n, (2.0, 0.5), rng)
    diff = ys[0.5] - ys[2.0]
    p = stats.kstest(diff, stats.norm(scale=math.sqrt((1 / 0.5 - 1 / 2.0) / 2)).cdf).pvalue
    return CheckResult("post-processing structure", p > ALPHA, f"KS p={p:.3g}")


def check_release_marginals(rng, quick=False, n_full=100_000):
    """Each family: five random rhos in random order against fresh releases."""
    n = _scale(n_full, quick)
    pv = []
    for fam in ("gaussian", "laplace", "poisson", "exponential"):
        rho_inf = math.inf if fam == "gaussian" else 20.0
        ledger = ledger_init(np.zeros(n), 1.0, fam, rho_inf, rng)
        rhos = rng.uniform(0.05, 10.0, 5)
        for rho in rhos:
            y = ledger.release(float(rho), rng)
            fresh = ledger.mechanism.base(float(rho), 1.0, rng, n)
            if fam == "poisson":
                pv.append(chi2_two_sample(y.astype(np.int64), fresh.astype(np.int64)))
            else:
                pv.append(stats.ks_2samp(y, fresh).pvalue)
    return CheckResult("release marginals (all families)", holm_passes(pv), f"{len(pv)} tests, min p={min(pv):.3g}")


ACCEPTANCE = (
    "gaussian_marginals",
    "gaussian_covariance",
    "convolution_preorder",
    "laplace_release",
    "poisson_pmf",
    "histogram_equivalence",
    "fig2",
    "factorization",
    "poisson_accountant",
    "crossing_probability",
)


def suite_checks(seed=DEFAULT_SEED, quick=False, include_invariants=True) -> list:
    """``(name, thunk)`` pairs; every battery gets its own generator from ``seed``."""
    gens = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(16)]
    checks = [
        ("gaussian_marginals", lambda: check_gaussian_marginals(gens[0], quick)),
        ("gaussian_covariance", lambda: check_gaussian_covariance(gens[1], quick)),
        ("convolution_preorder", lambda: check_convolution_preorder(gens[2], quick)),
        ("laplace_release", lambda: check_laplace_release(gens[3], quick)),
        ("poisson_pmf", check_poisson_pmf),
        ("histogram_equivalence", lambda: check_histogram_equivalence(gens[4], quick)),
        ("fig2", lambda: check_fig2(seed, quick)),
        ("factorization", lambda: check_factorization(gens[5], quick)),
        ("poisson_accountant", check_poisson_accountant),
        ("crossing_probability", lambda: check_crossing_probability(gens[6], quick)),
    ]
    if include_invariants:
        checks += [
            ("order_invariance", lambda: check_order_invariance(gens[7], quick)),
            ("post_processing", lambda: check_post_processing(gens[8], quick)),
            ("release_marginals", lambda: check_release_marginals(gens[9], quick)),
        ]
    return checks


def run_suite(seed=DEFAULT_SEED, quick=False, include_invariants=True, report=None) -> list[CheckResult]:
    """Run every battery and optionally pass each result line to ``report``."""
    results = []
    for _, fn in suite_checks(seed, quick, include_invariants):
        res = fn()
        results.append(res)
        if report is not None:
            report(res.line())
    return results
