import os
from dataclasses import replace

import numpy as np
import pytest

from circsense.circulant import CirculantMatrix, PartialCirculantOperator
from circsense.errors import DenseCapError, DimensionError, PhaseError
from circsense.parallel import (
    THREADS_ENV,
    AdmmInputs,
    CadmmInputs,
    IstaInputs,
    KernelPhase,
    SchemeKind,
    cpadmm_phases,
    cpista_phases,
    default_parallelism,
    iterate_phases,
    matvec_scheme_bench,
    padmm_phases,
    run_phase,
    scheme_matvec,
    unique_fetches,
)
from circsense.sensing import make_problem
from circsense.solvers import (
    AdmmState,
    IstaState,
    SolverConfig,
    admm_step,
    cadmm_setup,
    cadmm_step,
    ista_step,
    operator_norm_bound,
)

from conftest import dense_circulant

LEVELS = (1, 2, max(4, os.cpu_count() or 1))


def _copy(state):
    kw = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in vars(state).items()}
    return type(state)(**kw)


# ---------------------------------------------------------------- executor


def test_zero_work_items_is_noop():
    out = np.array([7.0])
    run_phase(KernelPhase("empty", 0, lambda ids: {"o": ids * 0.0}, {"o": out}), 3)
    assert out[0] == 7.0


def test_phase_reads_pre_phase_values():
    # every item reads its right neighbour; a barrier-respecting run sees old values
    buf = np.arange(8.0)
    phase = KernelPhase("rotate", 8, lambda ids: {"b": buf[(ids + 1) % 8]}, {"b": buf})
    run_phase(phase, 4)
    assert np.array_equal(buf, np.roll(np.arange(8.0), -1))


def test_phase_error_names_global_id():
    def body(ids):
        if np.any(ids == 5):
            raise FloatingPointError("boom")
        return {"o": ids.astype(float)}

    out = np.zeros(10)
    with pytest.raises(PhaseError) as info:
        run_phase(KernelPhase("bad", 10, body, {"o": out}), 3)
    assert info.value.global_id == 5


def test_instrumented_run_detects_overlapping_writes():
    out = np.zeros(4)
    phase = KernelPhase("clash", 4, lambda ids: {"o": ids * 1.0}, {"o": out},
                        index_map=lambda ids: ids // 2)
    with pytest.raises(PhaseError):
        run_phase(phase, 2, instrument=True)
    ok = KernelPhase("fine", 4, lambda ids: {"o": ids * 1.0}, {"o": out})
    run_phase(ok, 2, instrument=True)
    assert np.array_equal(out, [0, 1, 2, 3])


def test_parallelism_validation_and_env(monkeypatch):
    with pytest.raises(ValueError):
        run_phase(KernelPhase("x", 1, lambda ids: {}, {}), 0)
    monkeypatch.setenv(THREADS_ENV, "3")
    assert default_parallelism() == 3
    monkeypatch.delenv(THREADS_ENV)
    assert default_parallelism() >= 1


# ---------------------------------------------------------------- CPADMM


def _cadmm(n, seed, y_zero=False):
    p = make_problem(n, seed=seed)
    y = np.zeros(p.m) if y_zero else p.measurements
    cfg = SolverConfig(alpha=1e-3)
    state, rho, Pty = cadmm_setup(p.operator, cfg, y)
    inputs = CadmmInputs(p.operator.circulant, Pty, rho, cfg.sigma, cfg.alpha)
    return state, inputs


def _seq_cadmm(state, inputs, k):
    for _ in range(k):
        state = cadmm_step(state, inputs.C, inputs.Pty, inputs.rho, inputs.sigma,
                           inputs.alpha, inputs.tau1, inputs.tau2)
    return state


def test_cpadmm_zero_state_stays_zero():
    state, inputs = _cadmm(32, 0, y_zero=True)
    iterate_phases(cpadmm_phases, state, inputs, 3, parallelism=2)
    for name in ("x", "z", "nu", "mu", "v", "beta"):
        assert not np.any(getattr(state, name))


def test_cpadmm_phase1_item_identity():
    state, inputs = _cadmm(16, 0)
    inputs = replace(inputs, C=CirculantMatrix.identity(16))
    g = np.random.default_rng(0)
    state.v[:], state.z[:], state.nu[:] = g.standard_normal((3, 16))
    primal = cpadmm_phases(state, inputs)[0]
    run_phase(primal, 1)
    expect = inputs.rho * state.v[0] + inputs.sigma * (state.z[0] - state.nu[0])
    assert state.beta[0] == pytest.approx(expect, rel=1e-15)


def test_cpadmm_single_iteration_n128():
    state, inputs = _cadmm(128, 3)
    seq = _seq_cadmm(_copy(state), inputs, 1)
    iterate_phases(cpadmm_phases, state, inputs, 1, parallelism=2)
    for name in ("x", "z", "nu", "mu", "v", "beta"):
        assert np.max(np.abs(getattr(state, name) - getattr(seq, name))) < 1e-12


def test_cpadmm_deterministic_and_matches_sequential():
    base, inputs = _cadmm(256, 1)
    runs = []
    for par in LEVELS:
        s = _copy(base)
        iterate_phases(cpadmm_phases, s, inputs, 50, parallelism=par)
        runs.append(s)
    for s in runs[1:]:
        for name in ("x", "z", "nu", "mu", "v", "beta"):
            assert np.array_equal(getattr(s, name), getattr(runs[0], name))
    seq = _seq_cadmm(_copy(base), inputs, 50)
    for name in ("x", "z", "nu", "mu", "v"):
        assert np.max(np.abs(getattr(runs[0], name) - getattr(seq, name))) < 1e-12


def test_cpadmm_dimension_checks():
    state, inputs = _cadmm(16, 0)
    with pytest.raises(DimensionError):
        cpadmm_phases(state, replace(inputs, Pty=np.zeros(15)))
    state.mu = np.zeros(3)
    with pytest.raises(DimensionError):
        cpadmm_phases(state, inputs)


# ---------------------------------------------------------------- CPISTA


def _ista(n, seed):
    p = make_problem(n, seed=seed)
    tau = 0.9 * operator_norm_bound(p.operator) ** -2
    return p, IstaState.zeros(p.n, p.m), IstaInputs(p.operator, p.measurements, tau, 1e-3)


def test_cpista_zero_case():
    p, state, inputs = _ista(32, 0)
    inputs.y = np.zeros(p.m)
    iterate_phases(cpista_phases, state, inputs, 2, parallelism=2)
    assert not np.any(state.x) and not np.any(state.r)


def test_cpista_single_item_identity():
    A = PartialCirculantOperator.full(CirculantMatrix.identity(8))
    y = np.arange(1.0, 9.0)
    state = IstaState.zeros(8, 8)
    state.x[:] = 0.5
    phases = cpista_phases(state, IstaInputs(A, y, 0.5, 0.1))
    run_phase(phases[0], 1)
    assert state.r[3] == y[3] - 0.5
    run_phase(phases[1], 1)
    assert state.x[3] == pytest.approx(0.5 + 0.5 * (y[3] - 0.5) - 0.1)


def test_cpista_matches_sequential():
    for n, k in ((128, 1), (256, 50)):
        p, base, inputs = _ista(n, 2)
        runs = []
        for par in LEVELS:
            s = _copy(base)
            iterate_phases(cpista_phases, s, inputs, k, parallelism=par)
            runs.append(s)
        for s in runs[1:]:
            assert np.array_equal(s.x, runs[0].x) and np.array_equal(s.r, runs[0].r)
        seq = _copy(base)
        for _ in range(k):
            seq = ista_step(seq, p.operator, p.measurements, inputs.tau, inputs.gamma)
        assert np.max(np.abs(runs[0].x - seq.x)) < 1e-12
        assert np.max(np.abs(runs[0].delta - seq.delta)) < 1e-12


def test_cpista_dimension_check():
    p, state, inputs = _ista(16, 0)
    inputs.y = np.zeros(p.m + 1)
    with pytest.raises(DimensionError):
        cpista_phases(state, inputs)


# ---------------------------------------------------------------- PADMM


def _admm(n, seed, rho=1.0, alpha=1e-2):
    p = make_problem(n, seed=seed)
    M = p.operator.to_dense()
    B = np.linalg.inv(M.T @ M + rho * np.eye(n))
    Aty = M.T @ p.measurements
    z = np.zeros(n)
    return AdmmState(z.copy(), z.copy(), z.copy(), B, Aty), AdmmInputs(rho, alpha)


def test_padmm_zero_case():
    state, inputs = _admm(32, 0)
    state.Aty[:] = 0
    iterate_phases(padmm_phases, state, inputs, 3, parallelism=2)
    assert not np.any(state.x) and not np.any(state.z)


def test_padmm_identity_b_hand_check():
    n = 4
    state = AdmmState(np.zeros(n), np.zeros(n), np.zeros(n), np.eye(n), np.array([1.0, -2.0, 0.05, 3.0]))
    phases = padmm_phases(state, AdmmInputs(rho=1.0, alpha=0.1))
    run_phase(phases[0], 1)
    assert state.x[1] == -2.0
    assert state.z[1] == pytest.approx(-1.9)
    assert state.u[1] == pytest.approx(-0.1)
    assert state.z[2] == 0.0


def test_padmm_matches_sequential():
    for n, k in ((128, 1), (256, 50)):
        base, inputs = _admm(n, 4)
        runs = []
        for par in LEVELS:
            s = _copy(base)
            iterate_phases(padmm_phases, s, AdmmInputs(inputs.rho, inputs.alpha), k, parallelism=par)
            runs.append(s)
        for s in runs[1:]:
            assert np.array_equal(s.x, runs[0].x) and np.array_equal(s.u, runs[0].u)
        seq = _copy(base)
        for _ in range(k):
            seq = admm_step(seq, inputs.rho, inputs.alpha)
        for name in ("x", "z", "u"):
            assert np.max(np.abs(getattr(runs[0], name) - getattr(seq, name))) < 1e-12


def test_padmm_cap():
    state, inputs = _admm(16, 0)
    with pytest.raises(DenseCapError):
        padmm_phases(state, inputs, dense_cap=8)


# ---------------------------------------------------------------- matvec schemes


def test_unique_fetch_counts():
    assert unique_fetches(SchemeKind.CIRCULANT, 1024) == (2048, 2048)
    assert unique_fetches("reference", 1024) == (1024**2 + 1024, 3 * 1024)


def test_schemes_agree_with_dense_oracle():
    g = np.random.default_rng(0)
    for n in (1, 7, 64, 300):
        c, x = g.standard_normal(n), g.standard_normal(n)
        dense = dense_circulant(c)
        for parallel in (False, True):
            ref = scheme_matvec(SchemeKind.REFERENCE, c, x, dense, parallel)
            circ = scheme_matvec(SchemeKind.CIRCULANT, c, x, parallel=parallel)
            assert np.allclose(circ, dense @ x, rtol=1e-12, atol=1e-12)
            assert np.allclose(ref, circ, rtol=1e-12, atol=1e-12)


def test_matvec_bench_record():
    t = matvec_scheme_bench(256, SchemeKind.CIRCULANT, repeats=3, parallelism=2)
    assert t.scheme == "circulant" and t.repeats == 3
    assert 0 < t.min_s <= t.mean_s
    assert t.fetch_total == 512
    with pytest.raises(DenseCapError):
        matvec_scheme_bench(64, SchemeKind.REFERENCE, dense_cap=32)
