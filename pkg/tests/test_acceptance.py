"""Acceptance gate: one PASS/FAIL line per criterion (shown in the pytest summary)."""

import hashlib
import json
import math

import numpy as np
import pytest
from scipy import integrate, optimize

from conftest import ACCEPTANCE_LINES
from sparsetune import (
    FAR,
    STANDARD_SUITE,
    Algorithm,
    FixedRho,
    MatrixEnsemble,
    OracleK,
    ProblemSuite,
    SolverConfig,
    far_to_lambda,
    generate_instance,
    recommended_config,
    sample_operator,
    solve,
    success,
)
from sparsetune.cli import main
from sparsetune.transition import ExperimentGrid, Recommended, TransitionCell, estimate_transition, fit_logistic

RHOS_STD = (0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45)


def report(number, ok, detail):
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _standard_estimate(config, suite=STANDARD_SUITE):
    grid = ExperimentGrid(N=400, deltas=(0.5,), rhos=RHOS_STD, M=30, suite=suite, config=config)
    return estimate_transition(grid, 0.5, workers=1)


@pytest.fixture(scope="module")
def standard():
    return {}


def _get(standard, algo):
    if algo not in standard:
        standard[algo] = _standard_estimate(Recommended(algo))
    return standard[algo]


def test_criterion_01_iht(standard):
    est = _get(standard, "IHT")
    cfg = recommended_config("IHT", 0.5)
    assert cfg.kappa == 0.65 and cfg.policy == FAR(0.015)
    report(1, abs(est.rho_star - 0.28) <= 0.05, f"IHT rho*={est.rho_star:.4f} (target 0.28 +- 0.05)")


def test_criterion_02_ist(standard):
    est = _get(standard, "IST")
    cfg = recommended_config("IST", 0.5)
    assert cfg.kappa == 0.6 and cfg.policy == FAR(0.2)
    report(2, abs(est.rho_star - 0.22) <= 0.05, f"IST rho*={est.rho_star:.4f} (target 0.22 +- 0.05)")


def test_criterion_03_tst(standard):
    est = _get(standard, "TST")
    assert recommended_config("TST", 0.5).policy == FixedRho(0.33, 1, 1)
    report(3, abs(est.rho_star - 0.33) <= 0.05, f"TST rho*={est.rho_star:.4f} (target 0.33 +- 0.05)")


def test_criterion_04_ordering(standard):
    tst, iht, ist = (_get(standard, a).rho_star for a in ("TST", "IHT", "IST"))
    report(4, tst > iht > ist, f"TST={tst:.4f} > IHT={iht:.4f} > IST={ist:.4f}")


def test_criterion_05_subspace_pursuit_vs_cosamp():
    out = {}
    for beta in (1, 2):
        cfg = SolverConfig(Algorithm.TST, 1.0, OracleK(None, 1, beta))
        grid = ExperimentGrid(N=400, deltas=(0.7,), rhos=RHOS_STD, M=30, config=cfg)
        out[beta] = estimate_transition(grid, 0.7, workers=1).rho_star
    report(5, out[1] >= out[2], f"SP rho*={out[1]:.4f} >= CoSaMP rho*={out[2]:.4f} at delta=0.7")


def test_criterion_06_cars_least_favorable(standard):
    cars = _get(standard, "IHT").rho_star
    uni = _standard_estimate(Recommended("IHT"), ProblemSuite("USE", "UniformSym")).rho_star
    report(6, uni >= cars - 0.02, f"UniformSym rho*={uni:.4f} >= CARS rho*={cars:.4f} - 0.02")


def test_criterion_07_fourier_ist_beats_iht():
    suite = ProblemSuite(MatrixEnsemble.PARTIAL_FOURIER, "CARS")
    rhos = tuple(round(0.30 + 0.05 * i, 10) for i in range(10))
    out = {}
    for algo in ("IST", "IHT"):
        grid = ExperimentGrid(N=1024, deltas=(0.7,), rhos=rhos, M=20, suite=suite,
                              config=Recommended(algo, fast_ops=True))
        out[algo] = estimate_transition(grid, 0.7, workers=1).rho_star
    report(7, out["IST"] >= out["IHT"],
           f"partial Fourier delta=0.7: IST rho*={out['IST']:.4f} >= IHT rho*={out['IHT']:.4f}")


def test_criterion_08_sharpening():
    cfg = SolverConfig(Algorithm.IHT, 1.0, FAR(1e-3))
    rhos = tuple(round(0.04 + 0.01 * i, 10) for i in range(21))
    slopes = {}
    for N in (200, 500):
        grid = ExperimentGrid(N=N, deltas=(0.5,), rhos=rhos, M=20, config=cfg)
        est = estimate_transition(grid, 0.5, workers=1)
        slopes[N] = abs(est.b_hat) if est.method == "logistic" else math.inf
    report(8, slopes[500] > slopes[200], f"|b| N=500: {slopes[500]:.1f} > N=200: {slopes[200]:.1f}")


def test_criterion_09_logistic_oracle():
    rng = np.random.default_rng(2024)
    cells = []
    for rho in np.round(np.arange(0.1, 0.51, 0.05), 10):
        p = 1 / (1 + math.exp(-(6 - 20 * rho)))
        cells.append(TransitionCell(0.5, rho, 100, 200, 10, 500, int(rng.binomial(500, p)), 0.0))
    est = fit_logistic(cells)
    report(9, abs(est.rho_star - 0.3) <= 0.01, f"synthetic rho*={est.rho_star:.5f} (target 0.300 +- 0.01)")


def test_criterion_10_far_to_lambda():
    pdf = lambda z: math.exp(-z * z / 2) / math.sqrt(2 * math.pi)

    def oracle(far):
        tail = lambda lam: 2 * integrate.quad(pdf, lam, np.inf, epsabs=1e-14, epsrel=1e-13)[0]
        return optimize.brentq(lambda lam: tail(lam) - far, 0.0, 40.0, xtol=1e-14)

    fars = [1e-4, 1e-3, 1e-2, 0.015, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    worst = max(abs(far_to_lambda(f) - oracle(f)) for f in fars)
    report(10, worst <= 1e-6, f"max |lambda - oracle| = {worst:.2e} over {len(fars)} rates")


def test_criterion_11_operator_properties():
    rng = np.random.default_rng(0)
    worst_adj = worst_norm = worst_fast = 0.0
    for ens in MatrixEnsemble:
        op = sample_operator(ens, 48, 128, seed=1)
        D = op.todense()
        for _ in range(10):
            x = rng.standard_normal(128)
            r = rng.standard_normal(48) + (1j * rng.standard_normal(48) if op.is_complex else 0)
            gap = abs(np.real(np.vdot(op.forward(x), r)) - x @ op.adjoint(r))
            worst_adj = max(worst_adj, gap / (np.linalg.norm(x) * np.linalg.norm(r)))
            if op.is_fast:
                worst_fast = max(worst_fast, np.max(np.abs(op.forward(x) - D @ x)),
                                 np.max(np.abs(op.adjoint(r) - np.real(D.conj().T @ r))))
        worst_norm = max(worst_norm, np.max(np.abs(np.linalg.norm(D, axis=0) - 1)))
    ok = worst_adj <= 1e-10 and worst_norm <= 1e-8 and worst_fast <= 1e-10
    report(11, ok, f"adjoint {worst_adj:.1e}, column norms {worst_norm:.1e}, fast/dense {worst_fast:.1e}")


def test_criterion_12_exact_recovery_smoke():
    counts = {}
    for algo in ("IST", "IHT", "TST"):
        cfg = recommended_config(algo, 0.5)
        hits = 0
        for seed in range(100):
            inst = generate_instance(STANDARD_SUITE, 50, 100, 3, seed=10_000 + seed)
            hits += success(inst.x0, solve(inst.op, inst.y, cfg).xhat, 1e-2)
        counts[algo] = hits
    report(12, min(counts.values()) >= 95, "k=3, n=50, N=100 successes: " +
           ", ".join(f"{a}={c}/100" for a, c in counts.items()))


def test_criterion_13_determinism(tmp_path):
    cfg = tmp_path / "grid.json"
    cfg.write_text(json.dumps({"schema_version": 1, "N": 100, "M": 5, "rhos": [0.1, 0.2, 0.3, 0.4],
                               "config": {"recommended": {"algo": "TST"}}}))
    digests = {}
    for workers in (1, 2, 1):
        out = tmp_path / f"w{workers}_{len(digests)}"
        assert main(["run-grid", "--config", str(cfg), "--out", str(out), "--workers", str(workers)]) == 0
        digests[(workers, len(digests))] = hashlib.sha256((out / "cells.csv").read_bytes()).hexdigest()
    report(13, len(set(digests.values())) == 1, f"{len(digests)} runs (workers 1, 2, 1), "
           f"{len(set(digests.values()))} distinct CSV digest(s)")
