"""Acceptance criteria on full-horizon runs of the four presets.

Each test evaluates one criterion, logs a one-line verdict with the measured
value and tolerance, then asserts it. Under pytest the verdicts are repeated
in an "acceptance criteria" section of the terminal summary; run this file
directly (``python tests/test_acceptance.py``) to print only the verdicts.
"""

import time
from dataclasses import replace
from functools import lru_cache

import numpy as np
import pytest

from richards_sdre.runner import preset, run_experiment
from richards_sdre.verification import run_checks

S_MAX = 1.25e-4
SEEDS = range(10)


@lru_cache(maxsize=None)
def paired(name, seed=0, epsilon=None):
    cfg = preset(name)
    if epsilon is not None:
        cfg = replace(cfg, noise=replace(cfg.noise, enabled=epsilon > 0, epsilon=epsilon))
    return run_experiment(replace(cfg, seed=seed), write=False)


def arrays(summary, mode):
    t, y, _, _, sbar = summary.records[mode].as_arrays()
    return t, y, sbar


def describe_failure(summary, mode):
    status = summary.status[mode]
    if status == "ok":
        return None
    t_end = summary.step_counts[mode]["t_final"]
    return f"{mode} run aborted at t={t_end:.4g} ({status.split(':')[1].strip()})"


def verdict(number, passed, text):
    return f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {text}"


def ratio_text(name, target, band):
    s = paired(name)
    lo, hi = target * (1 - band), target * (1 + band)
    why = describe_failure(s, "controlled") or describe_failure(s, "uncontrolled")
    if s.cost_ratio is None:
        return False, None, f"{name} ratio n/a, {why} (target {target:.3g} +/-{band:.0%})"
    ok = lo <= s.cost_ratio <= hi
    return ok, s.cost_ratio, f"{name} ratio {s.cost_ratio:.4g} (target {target:.3g} +/-{band:.0%})"


# --- criteria ----------------------------------------------------------------

def criterion_1():
    parts, ok = [], True
    for name, target in (("test1", 45.68 / 16.37), ("test2", 45.23 / 17.23)):
        good, _, text = ratio_text(name, target, 0.25)
        wall = sum(paired(name).wall_time.values())
        good = good and wall < 60.0
        parts.append(f"{text}, paired wall {wall:.1f} s (< 60 s)")
        ok &= good
    return ok, "; ".join(parts)


def criterion_2():
    ok3, r3, t3 = ratio_text("test3", 80.84 / 7.25, 0.25)
    ok4, r4, t4 = ratio_text("test4", 191.71 / 9.60, 0.35)
    r1 = paired("test1").cost_ratio
    ordered = None not in (r1, r3, r4) and r4 > r3 > r1
    return ok3 and ok4 and ordered, f"{t3}; {t4}; ordering test4 > test3 > test1: {ordered}"


def criterion_3():
    s = paired("test1")
    t, _, sbar = arrays(s, "controlled")
    window = (t >= 300.0) & (t <= 1000.0)
    covered = s.status["controlled"] == "ok"
    low = float(sbar[window].min()) if window.any() else float("nan")
    ctrl_ok = covered and low >= 0.95 * S_MAX
    ctrl = (f"controlled min S-bar on [300, 1000] = {low:.4g} (>= {0.95 * S_MAX:.4g})"
            + ("" if covered else f", {describe_failure(s, 'controlled')}"))
    t, _, sbar = arrays(s, "uncontrolled")
    w = sbar[(t >= 250.0) & (t <= 1000.0)]
    steps = np.diff(w)
    unc_ok = bool(np.all(steps < 0))
    unc = (f"uncontrolled S-bar strictly decreasing on [250, 1000]: {unc_ok} "
           f"({int(np.sum(steps >= 0))}/{len(steps)} non-decreasing steps, "
           f"S-bar {w[0]:.6g} -> {w[-1]:.6g})")
    return ctrl_ok and unc_ok, f"{ctrl}; {unc}"


def criterion_4():
    s = paired("test3")
    _, _, sbar = arrays(s, "uncontrolled")
    final = float(sbar[-1])
    ok = s.status["uncontrolled"] == "ok" and abs(final / 9e-5 - 1) <= 0.10
    return ok, f"test3 uncontrolled S-bar(1000) = {final:.4g} (target 9e-05 +/-10%)"


def criterion_5():
    parts, ok = [], True
    s = paired("test1")
    t, y, _ = arrays(s, "controlled")
    early = y[t <= 50.0, 0]
    reach = float(early.min())
    i = int(np.argmin(y[:, 0]))
    rises = s.status["controlled"] == "ok" and np.all(np.diff(y[i:, 0]) >= -1e-9)
    good = abs(reach + 35.0) <= 5.0 and rises
    fail = describe_failure(s, "controlled")
    parts.append(f"test1 y0 min on [0, 50] = {reach:.4g} (target -35 +/-5), "
                 f"then non-decreasing: {bool(rises)}" + (f", {fail}" if fail else "")
                 + f", y0 at end {y[-1, 0]:.4g}")
    ok &= good
    s = paired("test3")
    t, y, _ = arrays(s, "controlled")
    dip, settle = float(y[:, 0].min()), float(y[-1, 0])
    good = (s.status["controlled"] == "ok" and abs(dip + 50.0) <= 5.0
            and abs(settle + 34.0) <= 4.0)
    fail = describe_failure(s, "controlled")
    parts.append(f"test3 y0 dip {dip:.4g} (target -50 +/-5), final {settle:.4g} "
                 f"(target -34 +/-4)" + (f", {fail}" if fail else ""))
    return ok and good, "; ".join(parts)


def criterion_6():
    clean = paired("test4", epsilon=0.0)
    noisy = [paired("test4", seed, 1e-6) for seed in SEEDS]
    out, ok = [], True
    for mode, check, target in (("controlled", lambda r: r < 0.5, "< +50%"),
                                ("uncontrolled", lambda r: r > 1.0, "> +100%")):
        key = f"total_cost_{mode}"
        base = getattr(clean, key)
        mean = float(np.mean([getattr(n, key) for n in noisy]))
        rel = mean / base - 1.0
        aborted = sum(n.status[mode] != "ok" for n in noisy) + (clean.status[mode] != "ok")
        good = aborted == 0 and check(rel)
        ok &= good
        out.append(f"{mode} mean noisy/noiseless - 1 = {rel:+.3%} ({target})"
                   + (f", {aborted}/11 runs aborted" if aborted else ""))
    return ok, "; ".join(out)


@lru_cache(maxsize=None)
def property_suite():
    t0 = time.perf_counter()
    checks = run_checks(None)
    return checks, time.perf_counter() - t0


def criterion_7():
    checks, wall = property_suite()
    failed = [c.name for c in checks if not c.passed]
    ok = not failed and wall < 300.0
    return ok, (f"{len(checks) - len(failed)}/{len(checks)} properties pass"
                + (f" (failed: {', '.join(failed)})" if failed else "")
                + f", verify wall {wall:.1f} s (< 300 s)")


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
            5: criterion_5, 6: criterion_6, 7: criterion_7}


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_acceptance_criterion(number, acceptance_log):
    passed, text = CRITERIA[number]()
    line = verdict(number, passed, text)
    acceptance_log.append(line)
    print(line)
    assert passed, line


if __name__ == "__main__":
    for n, fn in CRITERIA.items():
        print(verdict(n, *fn()), flush=True)
