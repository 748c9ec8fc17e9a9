"""Acceptance criteria, one test per criterion, one printed PASS/FAIL line each.

Run with ``pytest -s tests/test_acceptance.py`` to watch the lines live, or
``pytest -rA`` to collect them in the summary.  Full suite takes a few
minutes; the dominant cost is four 1000-replication Monte Carlo runs at
n = 2000 plus the end-to-end CLI run.

Three of the configured clauses are mathematically unattainable exactly as
written, and their tests are kept faithful and left red rather than silently
reconfigured:

* criterion 3's normality clause: the configured cutoff rule gives k_n = 1 at
  n = 2000, where the projected statistic converges to a normal scale mixture
  (product-normal, kurtosis 9), not a Gaussian — the Gaussian limit needs the
  cutoff to grow;
* criterion 4: with k_n = 1 the "wrong" sqrt(n) normalization coincides with
  the correct sqrt(n/k_n), so the negative control cannot move any ratio;
* criterion 6's separation-ratio stability clause: for the exponential
  profile with rate 0.1 the ratio legitimately decreases about fourfold over
  the window, exceeding twice its median at the left edge even though the
  underlying bound holds.

Each is paired with a companion test verifying the underlying claim at the
same tolerances under a sound configuration (cutoff inside the asymptotic
regime; monitored ratio semantics).
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from farlab import estimate
from farlab.cli import _model_battery, main
from farlab.hilbert import hs_norm, op_norms
from farlab.lab import (
    COVERAGE_TOL,
    KS_P_MIN,
    MC_SIGMAS,
    ACCUMULATED_RATIO_BAND,
    SEPARATION_MEDIAN_FACTOR,
    VARIANCE_RATIO_BAND,
    consistency_trend,
    demonstrate_th1,
    mc_prediction_error,
    verify_covariance_identity,
    verify_eigen_lemmas,
    verify_mda_covariance,
    verify_ra_bounds,
)
from farlab.model import eigen_profile, make_far_model
from farlab.simulate import simulate_far

ACCEPTANCE_SEED = 20260810
REGIME_CUTOFF = 12  # deep enough for the Gaussian limit to show at n = 2000


def _line(num, passed, detail):
    print(f"criterion {num}: {'PASS' if passed else 'FAIL'} - {detail}")


@pytest.fixture(scope="module")
def model40():
    return make_far_model(eigen_profile("arithmetic", 40, alpha=1.0), 0.5)


@pytest.fixture(scope="module")
def model10():
    return make_far_model(eigen_profile("arithmetic", 10, alpha=1.0), 0.5)


@pytest.fixture(scope="module")
def th2_as_stated(model40):
    # criterion 3 configuration exactly as written: cutoff from the rate rule
    return mc_prediction_error(model40, 2000, 1000, directions=(0, 1, 2),
                               master_seed=ACCEPTANCE_SEED, c=1.0)


@pytest.fixture(scope="module")
def th2_regime(model40):
    return mc_prediction_error(model40, 2000, 1000, directions=(0, 1, 2),
                               master_seed=ACCEPTANCE_SEED, k=REGIME_CUTOFF)


def test_criterion_01_covariance_identity():
    t0 = time.time()
    residuals = [verify_covariance_identity(m) for _, m in _model_battery(ACCEPTANCE_SEED)]
    elapsed = time.time() - t0
    worst = max(residuals)
    ok = worst <= 1e-10 and elapsed < 1.0
    _line("01", ok, f"max identity residual {worst:.2e} over 20 models "
                    f"({elapsed:.2f}s < 1s)")
    assert worst <= 1e-10
    assert elapsed < 1.0


def test_criterion_02_regularization_algebra(model10):
    t0 = time.time()
    worst_proj = worst_trace = worst_sup = 0.0
    fits = 0
    for seed in range(10):
        path = simulate_far(model10, 250, master_seed=1000 + seed)
        for k in range(1, 6):
            f = estimate.fit(path, k=k)
            fits += 1
            worst_proj = max(worst_proj, hs_norm(
                f.gamma_n.entries @ f.gamma_n_dag.entries - f.pi_hat.entries))
            worst_trace = max(worst_trace, abs(float(np.trace(f.pi_hat.entries)) - k))
            worst_sup = max(worst_sup, abs(
                op_norms(f.gamma_n_dag).sup * f.fpca.eigenvalues[k - 1] - 1.0))
    elapsed = time.time() - t0
    ok = fits == 50 and worst_proj <= 1e-9 and worst_trace <= 1e-9 and worst_sup <= 1e-9
    _line("02", ok and elapsed < 10.0,
          f"50 fits: projector residual {worst_proj:.2e}, trace error "
          f"{worst_trace:.2e}, sup-norm product error {worst_sup:.2e} "
          f"({elapsed:.1f}s < 10s)")
    assert fits == 50
    assert worst_proj <= 1e-9
    assert worst_trace <= 1e-9
    assert worst_sup <= 1e-9
    assert elapsed < 10.0


def test_criterion_03_th2_desk_scale_as_stated(th2_as_stated):
    """Criterion 3 exactly as stated: cutoff rule with c = 1 (so k_n = 1).

    Known-red: at cutoff 1 every projected statistic converges to a normal
    scale mixture (kurtosis near 9), so the normality clause cannot hold at
    any seed; the variance clause does hold.  The same limit theorem verified
    at a cutoff inside the asymptotic regime is the companion test below.
    """
    rep = th2_as_stated
    lo, hi = VARIANCE_RATIO_BAND
    ratios = {f"e{d.index + 1}": round(d.ratio, 3) for d in rep.directions}
    pvals = {f"e{d.index + 1}": round(d.ks_p, 6) for d in rep.directions}
    ok = rep.variance_passed and rep.normality_passed
    _line("03", ok, f"as stated (c=1 -> k_n={rep.k_n}): ratios {ratios} in "
                    f"[{lo}, {hi}]; KS p {pvals} (threshold {KS_P_MIN}); "
                    f"the normality clause is unattainable at cutoff 1")
    assert rep.variance_passed, f"variance ratios outside band: {ratios}"
    assert rep.normality_passed, (
        f"KS normality fails at the configured cutoff rule (k_n={rep.k_n}): "
        f"p-values {pvals}. At a fixed cutoff of 1 the statistic's conditional "
        f"variance does not concentrate (every forward innovation sum shares "
        f"the held-out observation's leading score), so the limit is a product "
        f"of two normals with kurtosis 9 rather than a Gaussian; no seed can "
        f"pass. Kept faithful to the configured clause and left red; "
        f"test_criterion_03_companion_regime_cutoff verifies the Gaussian "
        f"limit at cutoff {REGIME_CUTOFF} with identical tolerances.")


def test_criterion_03_companion_regime_cutoff(th2_regime):
    """Same model, n, replications, and tolerances, cutoff in-regime."""
    rep = th2_regime
    lo, hi = VARIANCE_RATIO_BAND
    ratios = {f"e{d.index + 1}": round(d.ratio, 3) for d in rep.directions}
    pvals = {f"e{d.index + 1}": round(d.ks_p, 4) for d in rep.directions}
    ok = rep.variance_passed and rep.normality_passed
    _line("03 (companion)", ok,
          f"cutoff {rep.k_n}: ratios {ratios} in [{lo}, {hi}]; KS p {pvals} "
          f"> {KS_P_MIN}")
    assert rep.variance_passed, ratios
    assert rep.normality_passed, pvals


def test_criterion_04_negative_control_as_stated(model40, th2_as_stated):
    """Criterion 4 exactly as stated: criterion 3's config, sqrt(n) scaling.

    Known-red: at k_n = 1 the wrong and correct normalizations coincide, so
    the control cannot push any ratio outside the band; the power property is
    real and is demonstrated at the regime cutoff in the companion test.
    """
    wrong = mc_prediction_error(model40, 2000, 1000, directions=(0, 1, 2),
                                master_seed=ACCEPTANCE_SEED, c=1.0,
                                normalization="sqrt_n")
    np.testing.assert_array_equal(wrong.samples, th2_as_stated.samples)
    lo, hi = VARIANCE_RATIO_BAND
    outside = [d for d in wrong.directions if not lo <= d.ratio <= hi]
    _line("04", len(outside) >= 1,
          f"as stated (k_n={wrong.k_n}): sqrt(n) equals sqrt(n/k_n), samples "
          f"bitwise identical, {len(outside)} ratios moved outside the band; "
          f"the control is vacuous at cutoff 1")
    assert len(outside) >= 1, (
        "the mis-normalization control cannot have power as configured: with "
        "k_n = 1 the two scalings are the same number, so the variance ratios "
        "are unchanged. Kept faithful and left red; "
        "test_criterion_04_companion_power_at_regime_cutoff demonstrates the "
        "detection at a cutoff where the scalings differ.")


def test_criterion_04_companion_power_at_regime_cutoff(model40, th2_regime):
    wrong = mc_prediction_error(model40, 2000, 1000, directions=(0, 1, 2),
                                master_seed=ACCEPTANCE_SEED, k=REGIME_CUTOFF,
                                normalization="sqrt_n")
    lo, hi = VARIANCE_RATIO_BAND
    outside = [d for d in wrong.directions if not lo <= d.ratio <= hi]
    ratios = {f"e{d.index + 1}": round(d.ratio, 2) for d in wrong.directions}
    ok = len(outside) >= 1 and th2_regime.variance_passed
    _line("04 (companion)", ok,
          f"cutoff {REGIME_CUTOFF}: wrong-normalization ratios {ratios} all "
          f"shifted ~{REGIME_CUTOFF}x; correct normalization stays in band")
    assert len(outside) >= 1
    # every ratio scales by exactly k relative to the correct normalization
    for a, b in zip(wrong.directions, th2_regime.directions):
        assert a.ratio == pytest.approx(REGIME_CUTOFF * b.ratio, rel=1e-9)


def test_criterion_05_variance_divergence_mechanism(model40):
    t0 = time.time()
    rep = demonstrate_th1(model40, range(1, 21))
    elapsed = time.time() - t0
    exact = all(v == rep.sigma2 * k for k, v in zip(rep.k_list, rep.divergent))
    constant = len(set(rep.convergent)) == 1
    ok = exact and constant and elapsed < 1.0
    _line("05", ok, f"divergent variance equals sigma^2 k exactly for k=1..20; "
                    f"in-domain direction constant at {rep.convergent[0]:.4f} "
                    f"({elapsed:.3f}s < 1s)")
    assert exact
    assert constant
    assert elapsed < 1.0


_EIGEN_BATTERY = (("arithmetic", 0.5), ("arithmetic", 1.0), ("arithmetic", 2.0),
                  ("exponential", 0.1), ("exponential", 0.5))


def test_criterion_06_eigen_lemmas_as_stated():
    """Criterion 6 exactly as stated, including the 2x-median clause.

    Known-red: for the exponential profile with rate 0.1 the separation
    ratio decreases about fourfold over j in [10, 50] (the j log j envelope
    is loose for exponential decay), so its maximum exceeds twice its median
    while the lemma's bound itself holds.  The monitored-semantics companion
    passes for every profile.
    """
    t0 = time.time()
    reports = {(kind, alpha): verify_eigen_lemmas(eigen_profile(kind, 60, alpha=alpha),
                                                  j_max=50)
               for kind, alpha in _EIGEN_BATTERY}
    elapsed = time.time() - t0
    seq_ok = all(r.sequence_bounds_passed for r in reports.values())
    band = {f"{k}-{a}": round(r.separation_max_over_median, 2)
            for (k, a), r in reports.items()}
    band_ok = all(r.separation_within_median_band for r in reports.values())
    _line("06", seq_ok and band_ok and elapsed < 1.0,
          f"sequence inequalities hold past thresholds "
          f"{[r.threshold_index for r in reports.values()]}; separation "
          f"max/median {band} vs {SEPARATION_MEDIAN_FACTOR} ({elapsed:.2f}s < 1s); "
          f"the 2x-median clause is unattainable for exponential(0.1)")
    assert seq_ok
    assert elapsed < 1.0
    assert band_ok, (
        f"separation-ratio stability clause fails as configured: max/median "
        f"{band}. For exponential decay the sharp separation rate grows like "
        f"j rather than j log j, so the normalized ratio drifts down across "
        f"the window: the bound holds but the 2x-median proxy cannot. Kept "
        f"faithful and left red; "
        f"test_criterion_06_companion_monitored_ratio covers the sound "
        f"monitored semantics.")


def test_criterion_06_companion_monitored_ratio():
    """Module semantics: the constant is unspecified, so the series is
    monitored for finiteness; polynomial profiles also satisfy the band."""
    results = {}
    for kind, alpha in _EIGEN_BATTERY:
        rep = verify_eigen_lemmas(eigen_profile(kind, 60, alpha=alpha), j_max=50)
        results[(kind, alpha)] = rep
        assert rep.sequence_bounds_passed
        assert rep.separation_monitored_ok
    for alpha in (0.5, 1.0, 2.0):
        assert results[("arithmetic", alpha)].separation_within_median_band
    _line("06 (companion)", True,
          "all profiles finite and bounded under monitored semantics; "
          "arithmetic profiles also satisfy the 2x-median band")


def test_criterion_07_second_moment_bounds(model10):
    t0 = time.time()
    zero = make_far_model(eigen_profile("arithmetic", 10, alpha=1.0), 0.0)
    part_a = verify_ra_bounds(zero, [500], p_max=5, reps=500,
                              master_seed=ACCEPTANCE_SEED)
    dev = max(abs(c.s_mean - 1.0) / c.s_se for c in part_a.cells)
    part_b = verify_ra_bounds(model10, [250, 500, 1000], p_max=5, reps=500,
                              master_seed=ACCEPTANCE_SEED)
    elapsed = time.time() - t0
    ok = (dev <= MC_SIGMAS and part_b.s_bound_passed
          and part_b.gamma_bounded_passed and elapsed < 120.0)
    _line("07", ok, f"score ratio equals 1 within {dev:.2f} se at zero rho; "
                    f"ratios bounded across n in (250, 500, 1000) "
                    f"({elapsed:.1f}s < 120s)")
    assert dev <= MC_SIGMAS
    assert part_b.s_bound_passed
    assert part_b.gamma_bounded_passed
    assert elapsed < 120.0


def test_criterion_08_array_covariance(model10):
    t0 = time.time()
    entry_run = verify_mda_covariance(model10, 20, 2000,
                                      master_seed=ACCEPTANCE_SEED, k=3)
    accumulated_run = verify_mda_covariance(model10, 50, 2000,
                                       master_seed=ACCEPTANCE_SEED, k=3)
    elapsed = time.time() - t0
    worst = max(e.max_sigmas for e in entry_run.entries)
    ok = (entry_run.entries_passed and entry_run.cross_passed
          and accumulated_run.accumulated_passed and elapsed < 120.0)
    _line("08", ok, f"array covariance within {worst:.2f} se of closed form at "
                    f"n=20; cross term {entry_run.cross_max_sigmas:.2f} se; "
                    f"accumulated ratio {accumulated_run.accumulated_ratio:.4f} in "
                    f"{ACCUMULATED_RATIO_BAND} at n=50 ({elapsed:.1f}s < 120s)")
    assert entry_run.entries_passed, worst
    assert entry_run.cross_passed
    assert accumulated_run.accumulated_passed, accumulated_run.accumulated_ratio
    assert elapsed < 120.0


def test_criterion_09_consistency_trend(model10):
    t0 = time.time()
    rep = consistency_trend(model10, [500, 1000, 2000, 4000], seeds=20,
                            master_seed=ACCEPTANCE_SEED)
    elapsed = time.time() - t0
    ok = rep.strictly_decreasing and elapsed < 180.0
    _line("09", ok, f"median projected error {[round(v, 4) for v in rep.medians]} "
                    f"strictly decreasing ({elapsed:.1f}s < 180s)")
    assert rep.strictly_decreasing, rep.medians
    assert elapsed < 180.0


def test_criterion_10_interval_coverage(th2_as_stated):
    # intervals built with the estimated innovation covariance at the stated
    # default cutoff rule; target is the projected moving prediction goal
    d1 = th2_as_stated.directions[0]
    ok = abs(d1.coverage - 0.95) <= COVERAGE_TOL
    _line("10", ok, f"95% interval coverage along e1 is {d1.coverage:.3f} "
                    f"(band 0.95 +- {COVERAGE_TOL}, n=2000, 1000 replications)")
    assert abs(d1.coverage - 0.95) <= COVERAGE_TOL


def _tree(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_11_determinism(tmp_path):
    runs = {}
    for tag in ("a", "b"):
        base = tmp_path / tag
        assert main(["simulate", "--n", "30", "--seed", "77",
                     "--out", str(base / "sim")]) == 0
        assert main(["fit", "--path", str(base / "sim" / "path.csv"), "--k", "2",
                     "--out", str(base / "fit")]) == 0
        assert main(["verify", "--suite", "th1", "--seed", "77",
                     "--out", str(base / "ver")]) == 0
        runs[tag] = _tree(base)
    ok = runs["a"] == runs["b"]
    _line("11", ok, f"simulate, fit, and verify outputs byte-identical across "
                    f"reruns ({len(runs['a'])} files compared)")
    assert runs["a"] == runs["b"]


def test_verify_all_default_config(tmp_path):
    """End-to-end CLI run of every suite at the default configuration."""
    t0 = time.time()
    code = main(["verify", "--suite", "all", "--out", str(tmp_path)])
    elapsed = time.time() - t0
    doc = json.loads((tmp_path / "verify_all_report.json").read_text())
    ok = code == 0 and doc["passed"] and elapsed < 300.0
    _line("verify-all", ok, f"all suites pass at the default config "
                            f"({elapsed:.0f}s < 300s documented budget)")
    assert code == 0
    assert doc["passed"]
    assert elapsed < 300.0
