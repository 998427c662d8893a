import numpy as np
import pytest
from oracles import colouring_joint

from dnstein.lattice import LatticePmf
from dnstein.matrixcore import lyapunov_solve
from dnstein.models import build_colouring_model, build_sum_model
from dnstein.models.graphs import complete, cycle
from dnstein.pairs import (PairLaw, conditional_cov_residual, diagnose_exact, exchange_identity_residual,
                           find_chains, fit_regression, lyapunov_identity_residual, standardize,
                           translate_tv_diagnostics, u_statistics, z_moments_check)


def box_walk(K):
    """W uniform on {0..K-1}; W' = W +- 1 with probability 1/4 each when allowed."""
    w, xi, pr = [], [], []
    for a in range(K):
        for s in (-1, 1):
            if 0 <= a + s < K:
                w.append([a]), xi.append([s]), pr.append(0.25 / K)
        stay = 0.5 + 0.25 * ((a == 0) + (a == K - 1))
        w.append([a]), xi.append([0]), pr.append(stay / K)
    return PairLaw.from_samples(w, xi, pr, exchangeable=True, label="box walk")


def mixed_summands():
    return [LatticePmf.from_dict({(0,): 0.5, (1,): 0.5}),
            LatticePmf.from_dict({(-1,): 0.2, (0,): 0.5, (2,): 0.3}),
            LatticePmf.uniform([0, 1, 2])]


def test_pairlaw_invariants():
    p = box_walk(5)
    assert p.marginal_gap() <= 1e-12
    assert p.symmetry_gap() == 0
    assert p.q.sum() == pytest.approx(1.0, abs=1e-15) and np.all(p.q > 0)
    with pytest.raises(ValueError):
        PairLaw(np.array([[0]]), np.array([[0]]), np.array([[0.5]]))


def test_sum_pair_regression_exact():
    model = build_sum_model(mixed_summands())
    p = model.pair
    fit = fit_regression(p, model.n, model.A)
    assert fit.max_abs <= 1e-12
    assert np.abs(fit.mean).max() <= 1e-10
    wrong = fit_regression(p, model.n, -2 * np.eye(1))
    assert wrong.max_abs > 0.1
    cov = conditional_cov_residual(p)
    assert np.abs(cov.mean).max() <= 1e-10
    assert np.abs(exchange_identity_residual(p)).max() <= 1e-10
    assert np.abs(lyapunov_identity_residual(p, model.n, model.A)).max() <= 1e-10


def test_independent_jump_gives_zero_R2():
    pW = np.array([0.2, 0.5, 0.3])
    q = np.array([0.25, 0.5, 0.25])
    p = PairLaw(np.array([[0], [1], [2]]), np.array([[-1], [0], [1]]), np.outer(pW, q))
    cov = conditional_cov_residual(p)
    assert np.abs(cov.R2).max() <= 1e-15 and cov.l1_mean <= 1e-15
    us = u_statistics(p)
    assert us.u_star <= 1e-15


def test_chain_examples():
    r = find_chains([[1, 0], [0, 1], [1, 1]], 2)
    assert r.chains[0] == [(1, 0)] and r.ok
    r = find_chains([[1, 1], [0, -1]], 2)
    assert len(r.chains[0]) == 2
    assert tuple(np.sum(r.chains[0], axis=0)) == (1, 0)
    assert r.failed_axes == [1]
    assert find_chains([[0, 0]], 2).failed_axes == [0, 1]
    # deterministic output
    assert find_chains([[1, 1], [0, -1]], 2).chains == r.chains


def test_colouring_chains():
    tt = build_colouring_model(complete(3), 3, mode="mc").types
    ch = find_chains(tt.jumps, 5)
    assert ch.ok
    lengths = [len(ch.chains[j]) for j in range(5)]
    assert lengths[:3] == [2, 2, 2]
    for j in range(5):
        assert np.array_equal(np.sum(ch.chains[j], axis=0), np.eye(5, dtype=int)[j])
    tt2 = build_colouring_model(cycle(4), 2, mode="mc").types
    assert find_chains(tt2.jumps, 3).failed_axes == [0, 1, 2]


def test_colouring_pair_matches_brute_force():
    g = complete(3)
    p = [0.5, 0.3, 0.2]
    model = build_colouring_model(g, 3, p)
    oracle = colouring_joint(g.edges.tolist(), 3, 3, p)
    pair = model.pair
    got = {}
    for k, w in enumerate(pair.atoms):
        for j, J in enumerate(pair.jumps):
            if pair.joint[k, j] > 0:
                got[(tuple(w.tolist()), tuple(J.tolist()))] = pair.joint[k, j]
    assert set(got) == set(oracle)
    assert max(abs(got[k] - oracle[k]) for k in oracle) <= 1e-15
    # E||R2||_1 straight from the oracle dictionary
    s2 = sum(pr * np.outer(xi, xi) for (w, xi), pr in oracle.items())
    cond = {}
    for (w, xi), pr in oracle.items():
        a, b = cond.get(w, (0.0, 0.0))
        cond[w] = (a + pr * np.outer(xi, xi), b + pr)
    l1 = sum(b * np.abs(a / b - s2).sum() for a, b in cond.values())
    assert conditional_cov_residual(pair).l1_mean == pytest.approx(l1, abs=1e-12)


def test_colouring_u_and_translate_bounds():
    model = build_colouring_model(complete(3), 3)
    us = u_statistics(model.pair)
    vals = [e.value for e in us.u.values()]
    assert all(np.isfinite(vals)) and us.u_star > 0
    tr = translate_tv_diagnostics(model.pair, us)
    assert tr.checks and tr.ok


def test_translate_box_walk():
    p = box_walk(6)
    us = u_statistics(p)
    tr = translate_tv_diagnostics(p, us)
    # uniform on six points shifted by one: TV is 1/6
    assert tr.eps1 == pytest.approx(1 / 6, abs=1e-15)
    assert tr.ok


def test_z_moments_box_walk():
    p = box_walk(5)
    s2 = conditional_cov_residual(p).sigma2
    zm = z_moments_check(p, 1.0, [[-1.0]])
    # d = 1, n = 1, A = -1: Sigma = s2 / 2 and z2 = Var W / 4 = 2 / 4
    assert zm.z2 == pytest.approx(0.5, abs=1e-14)
    Sigma = lyapunov_solve([[-1.0]], s2)
    assert zm.alpha1 == pytest.approx(Sigma[0, 0] / 2)


def test_z_moments_exact_regression_conditions():
    model = build_sum_model(mixed_summands())
    zm = z_moments_check(model.pair, model.n, model.A)
    assert zm.cond11[0] <= 1e-12 and zm.cond12[0] <= 1e-12 and zm.conditions_hold


def test_standardize_examples(rng):
    S = np.array([[2.0, 0.3], [0.3, 1.0]])
    m = 12
    st = standardize(m, -np.eye(2), 2 * S / m)
    assert st.n_tilde == pytest.approx(m)
    assert np.allclose(st.A_tilde, -np.eye(2))
    assert np.allclose(st.Sigma_tilde, S / m, atol=1e-14)
    A = np.array([[-1.0, 0.4], [0.1, -0.7]])
    s2 = np.array([[1.0, 0.2], [0.2, 0.5]])
    a, b = standardize(5.0, A, s2), standardize(35.0, 7 * A, s2)
    for x, y in ((a.n_tilde, b.n_tilde), (a.A_tilde, b.A_tilde), (a.Sigma_tilde, b.Sigma_tilde),
                 (a.Sigma_hat, b.Sigma_hat)):
        assert np.allclose(x, y, rtol=1e-10, atol=1e-12)
    K = np.kron(np.eye(2), A / 5) + np.kron(A / 5, np.eye(2))
    oracle = np.linalg.solve(K, -s2.flatten(order="F")).reshape(2, 2, order="F")
    assert np.abs(a.Sigma_hat - oracle).max() <= 1e-10


def test_degenerate_jump_is_flagged():
    p = PairLaw(np.array([[0], [1]]), np.array([[0]]), np.array([[0.5], [0.5]]))
    rep = diagnose_exact(p, 1.0, [[-1.0]])
    assert not rep.ok
    assert any("no chain" in f for f in rep.flags)
    assert any("degenerate" in f for f in rep.flags)


def test_report_json_roundtrip(tmp_path):
    import json

    model = build_sum_model(mixed_summands())
    rep = diagnose_exact(model.pair, model.n, model.A)
    assert rep.ok
    out = json.loads(rep.to_json(tmp_path / "r.json"))
    assert out["ok"] is True and out["R1_mean_abs"] <= 1e-12
    assert set(out) >= {"A_hat", "sigma2", "u_star", "u_tilde_star", "eps1", "L", "z2", "z3"}
