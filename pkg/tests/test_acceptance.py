"""Acceptance criteria 1-8, each at its stated tolerance.

Every test records a PASS/FAIL line that is printed in the terminal summary.
Criteria that are known not to be met are marked strict xfail, so the line
still says FAIL and an unexpected pass is reported; see notes/decisions.md.
"""

import numpy as np
import pytest

from conftest import ACCEPTANCE
from impiqc import analysis as an
from impiqc import reproduce, sim
from impiqc.dwell import enumerate_paths, path_from_unit, postadmissible, sample_sequence
from impiqc.iqcfilter import basis_filter, verify_iqc_empirical
from impiqc.model import as_feedback

pytestmark = pytest.mark.slow

DISSIPATION_RUNS = 100
IQC_TRIALS = 100
IQC_TOL = -1e-7


def record(criterion, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  criterion {criterion}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return passed


def failed(checks):
    return [c for c in checks if not c["passed"]]


@pytest.fixture(scope="module")
def table1():
    return reproduce.run("table1")


@pytest.fixture(scope="module")
def fig2():
    return reproduce.run("fig2")


@pytest.fixture(scope="module")
def ordering():
    return reproduce.run("ordering")


@pytest.fixture(scope="module")
def fig8():
    return reproduce.run("fig8", seed=0)


@pytest.fixture(scope="module")
def certificates():
    """Every feasible certificate over the ordering corpus."""
    out = []
    for name, system, spec, P in reproduce.lattice_corpus():
        mode = "stability" if P is None else "performance"
        for test in ("lifting", "clock", "clock-slack", "iqc-clock", "iqc-lifting", "path"):
            cert = an.run_test(test, system, P=P, spec=spec, mode=mode, nu=1, L=spec.tmax + 1)
            if cert.feasible:
                out.append((name, system, cert))
    return out


@pytest.mark.xfail(strict=True, reason="all 16 values sit 4-5% below the reference; see ledger")
def test_criterion_1_table1_values(table1):
    cells = [c for c in table1["checks"] if c["name"].startswith("table1 (")]
    bad = failed(cells)
    devs = [float(c["detail"].split("dev=")[1].rstrip("%")) for c in cells]
    assert record("1", not bad and len(cells) == 16,
                  f"{len(cells) - len(bad)}/16 table1 values within 2% "
                  f"(deviations {min(devs):+.2f}% .. {max(devs):+.2f}%)")


def test_criterion_1_table1_runtime(table1):
    (c,) = [c for c in table1["checks"] if "runtime" in c["name"]]
    assert record("1 (runtime)", c["passed"], f"table1 computed in {c['detail']} (< 600 s)")


def test_criterion_2_paths():
    e = path_from_unit
    paths = set(enumerate_paths(2, 3, 5))
    want = {e(5, 2), e(5, 3), e(5, 4), e(5, 1, 5), e(5, 1, 4), e(5, 2, 5)}
    post = set(postadmissible((0, 0, 0, 1, 0), 2, 3))
    ok = paths == want and post == {e(5, 2), e(5, 3), e(5, 2, 5)}
    assert record("2", ok, f"{len(paths)} paths, {len(post)} post-admissible, exact match: {ok}")


def _fig2_check(summary, prefix):
    (c,) = [c for c in summary["checks"] if c["name"].startswith(prefix)]
    return c


def test_criterion_3i_clock_equals_lifting(fig2):
    c = _fig2_check(fig2, "fig2 lifting == clock")
    assert record("3(i)", c["passed"], f"clock vs lifting on the beta grid: {c['detail']}")


@pytest.mark.xfail(strict=True, reason="nu=1 IQC test is marginally infeasible at boundary points")
def test_criterion_3ii_iqc_lifting_equals_clock(fig2):
    c = _fig2_check(fig2, "fig2 iqc-lifting")
    assert record("3(ii)", c["passed"], f"iqc-lifting (nu=1) vs clock: {c['detail']}")


def test_criterion_3iii_path_beats_clock(fig2):
    c = _fig2_check(fig2, "fig2 path")
    assert record("3(iii)", c["passed"], f"path L=11 feasible where clock is not at RDT(6,9): "
                  f"{c['detail']}")


def test_criterion_4_implications(ordering):
    lattice = [c for c in ordering["checks"] if c["name"].startswith("implication")]
    counts = ordering["lattice"]
    checked = sum(r["checked"] for r in counts.values())
    violations = sum(len(r["violations"]) for r in counts.values())
    assert record("4", len(lattice) == 6 and not failed(lattice),
                  f"6 implications, {checked} antecedent-feasible cases, {violations} violations")


def test_criterion_5_replay_and_dissipation(certificates):
    replay_bad = [(n, c.test) for n, _, c in certificates if c.replay()]
    rng = np.random.default_rng(0)
    runs, diss_bad = 0, []
    for name, system, cert in certificates:
        if cert.test != "clock":
            continue
        f = as_feedback(system)
        for k in range(DISSIPATION_RUNS):
            seq = sample_sequence(cert.spec, 60, "random", seed=k)
            traj = sim.simulate(f, seq, x0=rng.normal(size=f.n), d=rng.normal(size=(61, f.n_d)))
            runs += 1
            if not sim.check_dissipation(cert, traj, tol=1e-7):
                diss_bad.append(name)
                break
    ok = not replay_bad and not diss_bad and runs > 0
    assert record("5", ok, f"{len(certificates)} certificates replayed ({len(replay_bad)} failed); "
                  f"{runs} dissipation runs ({len(diss_bad)} failed)")


def test_criterion_6_iqc_empirical(certificates):
    worst, count, bad = np.inf, 0, []
    for k, (name, system, cert) in enumerate(certificates):
        if not cert.test.startswith("iqc-"):
            continue
        f = as_feedback(system)
        psi = basis_filter(f.n_z, f.n_w, cert.params["nu"])
        seq = sample_sequence(cert.spec, 40, "random", seed=k)
        rep = verify_iqc_empirical(psi, cert.values["M"], cert.values["Z"], seq,
                                   trials=IQC_TRIALS, seed=k)
        count += 1
        worst = min(worst, rep.min_lhs)
        if rep.min_lhs < IQC_TOL:
            bad.append((name, cert.test))
    assert record("6", count > 0 and not bad,
                  f"{count} multipliers x {IQC_TRIALS} trials, min LHS {worst:.3e} (>= -1e-7)")


def test_criterion_7_gain_soundness(fig8):
    checks = [c for c in fig8["checks"] if "empirical" in c["name"]]
    synth = [c for c in fig8["checks"] if "synthesized" in c["name"]]
    ok = len(checks) == 4 and not failed(checks) and not failed(synth)
    assert record("7", ok, "; ".join(f"{c['name'].split('fig8 ')[1].split(':')[0]} "
                                    f"{c['detail']}" for c in checks))


def test_criterion_8_nu_monotone(table1, ordering):
    bad = []
    for tmin, tmax in reproduce.TABLE1_ROWS:
        g = [table1["data"][f"{(tmin, tmax)}/iqc-{nu}"]["gamma"] for nu in (1, 2, 3)]
        if not all(b <= a + reproduce.ORDER_SLACK for a, b in zip(g, g[1:])):
            bad.append((tmin, tmax))
    (hold,) = [c for c in ordering["checks"] if "non-increasing" in c["name"]]
    assert record("8", not bad and hold["passed"],
                  f"synthesis gamma non-increasing in nu on {4 - len(bad)}/4 ranges; "
                  f"hold loop: {hold['detail']}")
