import math

import numpy as np
import pytest
import statsmodels.api as sm

from sparsetune import FAR, STANDARD_SUITE, Algorithm, FixedRho, OracleK, ProblemSuite, SolverConfig
from sparsetune.exceptions import ConfigError, DimensionError, EstimateUndefinedError, TuningFailedError
from sparsetune.transition import (
    ExperimentGrid,
    Recommended,
    TransitionCell,
    cell_dimensions,
    estimate_transition,
    fit_logistic,
    maximin_tune,
    read_cells_csv,
    run_cell,
    run_grid,
    tune,
    write_cells_csv,
)


def synthetic_cells(a, b, M, rhos, seed):
    rng = np.random.default_rng(seed)
    cells = []
    for rho in rhos:
        p = 1 / (1 + math.exp(-(a + b * rho)))
        cells.append(TransitionCell(0.5, rho, 100, 200, 10, M, int(rng.binomial(M, p)), 0.0))
    return cells


RHOS = tuple(np.round(np.arange(0.1, 0.51, 0.05), 10))


def test_synthetic_logistic_recovery():
    est = fit_logistic(synthetic_cells(6, -20, 500, RHOS, seed=1))
    assert est.method == "logistic"
    assert est.rho_star == pytest.approx(0.30, abs=0.01)


@pytest.mark.parametrize("seed", range(5))
def test_irls_matches_statsmodels_glm(seed):
    cells = synthetic_cells(4, -15, 40, RHOS, seed)
    est = fit_logistic(cells)
    S = np.array([c.S for c in cells])
    X = sm.add_constant(np.array([c.rho for c in cells]))
    glm = sm.GLM(np.column_stack([S, 40 - S]), X, family=sm.families.Binomial()).fit()
    assert est.a_hat == pytest.approx(glm.params[0], rel=1e-6)
    assert est.b_hat == pytest.approx(glm.params[1], rel=1e-6)


def test_consistency_as_m_grows():
    errs = {}
    for M in (50, 500):
        e = [abs(fit_logistic(synthetic_cells(6, -20, M, RHOS, s)).rho_star - 0.3) for s in range(20)]
        errs[M] = float(np.mean(e))
    assert errs[500] < errs[50]


def test_bracket_fallback():
    cells = [TransitionCell(0.5, 0.2, 100, 200, 20, 20, 20, 0.0),
             TransitionCell(0.5, 0.4, 100, 200, 40, 20, 0, 0.0)]
    est = fit_logistic(cells)
    assert est.method == "bracket-fallback"
    assert est.rho_star == pytest.approx(0.3)
    assert math.isnan(est.a_hat)
    assert est.to_dict()["a_hat"] is None


def test_undefined_and_errors():
    ok = [TransitionCell(0.5, r, 100, 200, 10, 20, 20, 0.0) for r in (0.1, 0.2)]
    with pytest.raises(EstimateUndefinedError, match="widen"):
        fit_logistic(ok)
    with pytest.raises(EstimateUndefinedError):
        fit_logistic(ok[:1])
    mixed = ok + [TransitionCell(0.6, 0.3, 120, 200, 10, 20, 0, 0.0)]
    with pytest.raises(DimensionError):
        fit_logistic(mixed)


def test_clamping_flags_extrapolation():
    cells = synthetic_cells(7, -20, 200, (0.1, 0.15, 0.2), seed=0)  # true rho* = 0.35
    est = fit_logistic(cells)
    assert est.rho_star == pytest.approx(0.25)
    assert est.extrapolated


def test_cell_dimensions():
    assert cell_dimensions(200, 0.5, 0.2) == (100, 20)
    assert cell_dimensions(200, 0.3, 0.15) == (60, 9)
    assert cell_dimensions(400, 0.7, 0.35) == (280, 98)


def test_grid_validation():
    assert len(ExperimentGrid().cells()) == 80
    with pytest.raises(ConfigError) as err:
        ExperimentGrid(N=10, deltas=(0.5, 0.2), rhos=(1.2,), M=0)
    assert len(err.value.problems) >= 3
    g = ExperimentGrid(N=100, deltas=(0.3, 0.6), rhos=((0.1, 0.2), (0.2, 0.3, 0.4)))
    assert len(g.cells()) == 5
    assert ExperimentGrid.from_dict(g.to_dict()) == g
    assert g.fingerprint() == ExperimentGrid.from_dict(g.to_dict()).fingerprint()


def test_run_cell_extremes_and_determinism():
    far_below = ExperimentGrid(N=200, deltas=(0.5,), rhos=(0.01,), M=20)
    cell = run_cell(far_below, 0.5, 0.01)
    assert cell.k == 1 and cell.S / cell.M >= 0.95
    far_above = ExperimentGrid(N=200, deltas=(0.5,), rhos=(0.9,), M=20, config=Recommended("IST"))
    assert run_cell(far_above, 0.5, 0.9).S / 20 <= 0.05
    assert run_cell(far_below, 0.5, 0.01) == cell


def test_run_grid_worker_independence():
    g = ExperimentGrid(N=60, deltas=(0.4, 0.8), rhos=(0.1, 0.3), M=4)
    serial = list(run_grid(g, workers=1))
    parallel = list(run_grid(g, workers=2))
    assert serial == parallel
    assert [(c.delta, c.rho) for c in serial] == [(d, r) for _, _, d, r in g.cells()]
    assert list(run_grid(g, skip={(0, 0)}))[0] == serial[1]


def test_config_errors_propagate():
    cfg = SolverConfig(Algorithm.TST, 1.0, FixedRho(0.01))
    g = ExperimentGrid(N=60, deltas=(0.5,), rhos=(0.1,), M=2, config=cfg)
    with pytest.raises(ConfigError):
        run_cell(g, 0.5, 0.1)


def test_oracle_k_uses_true_sparsity():
    g = ExperimentGrid(N=100, deltas=(0.5,), rhos=(0.05,), M=5,
                       config=SolverConfig(Algorithm.TST, 1.0, OracleK()))
    assert run_cell(g, 0.5, 0.05).S == 5


def test_csv_round_trip(tmp_path):
    g = ExperimentGrid(N=60, deltas=(0.5,), rhos=(0.1, 0.2), M=3)
    cells = list(run_grid(g))
    path = tmp_path / "cells.csv"
    write_cells_csv(path, cells, g)
    rows = read_cells_csv(path)
    assert [r["S"] for r in rows] == [c.S for c in cells]
    assert rows[0]["algo"] == "IHT" and rows[0]["suite_coeff"] == "CARS"
    text = path.read_text().splitlines()
    text[2] = text[2].replace(",IHT,", ",IHT,extra,")
    path.write_text("\n".join(text) + "\n")
    with pytest.raises(ValueError, match="line 3"):
        read_cells_csv(path)


SMALL = dict(N=100, deltas=(0.5,), rhos=(0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4), M=8)


def test_tune_single_candidate_and_failure():
    g = ExperimentGrid(**SMALL)
    cfg = SolverConfig(Algorithm.IHT, 0.65, FAR(0.015))
    res = tune(g, 0.5, [cfg])
    assert res.config == cfg
    assert res.estimate.rho_star == estimate_transition(g, 0.5, cfg).rho_star
    hopeless = ExperimentGrid(N=100, deltas=(0.5,), rhos=(0.6, 0.7), M=4)
    with pytest.raises(TuningFailedError):
        tune(hopeless, 0.5, [cfg])
    with pytest.raises(ConfigError):
        tune(g, 0.5, [])


def test_maximin_single_suite_reduces_to_tune():
    g = ExperimentGrid(**SMALL)
    thetas = [SolverConfig(Algorithm.IHT, 0.65, FAR(f)) for f in (0.005, 0.015)]
    a = tune(g, 0.5, thetas)
    b = maximin_tune([g], 0.5, thetas)
    assert a.config == b.config
    assert b.estimates[0].rho_star == a.estimate.rho_star


def test_maximin_identical_suites_give_identical_estimates():
    g = ExperimentGrid(**SMALL)
    res = maximin_tune([g, g], 0.5, [SolverConfig(Algorithm.IHT, 0.65, FAR(0.015))])
    assert res.estimates[0].rho_star == res.estimates[1].rho_star


def test_maximin_prefers_cars_as_least_favorable():
    thetas = [SolverConfig(Algorithm.IHT, 0.65, FAR(0.015))]
    grids = [ExperimentGrid(N=200, deltas=(0.5,), rhos=SMALL["rhos"] + (0.45, 0.5), M=10,
                            suite=ProblemSuite("USE", c)) for c in ("CARS", "UniformSym")]
    res = maximin_tune(grids, 0.5, thetas)
    assert res.least_favorable == [0]
