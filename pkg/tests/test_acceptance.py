"""Acceptance gate: one verdict line per criterion, at the stated tolerance.

Each test computes its statistic, records PASS/FAIL through criterion_log
(reprinted after the run), then asserts.  Nothing here relaxes a threshold:
a criterion this code base cannot meet fails loudly.
"""

import time

import numpy as np
import pytest
from scipy.linalg import hadamard

from rdmfill.coherence import (
    coherence,
    haar_orthogonal,
    minimize_coherence,
    mu_after,
    sector_modes,
    surrogate_objective,
)
from rdmfill.completion import (
    CompletionConfig,
    complete,
    default_grid,
    fit_objective,
    info_bound,
    sample_uniform,
    trial_seed,
)
from rdmfill.measurement import (
    all_quartets,
    build_map,
    calibrate_standard,
    exact_pauli_expectations,
    plan_noisy,
    simulate_shots,
)
from rdmfill.pipeline import PipelineConfig, gen_toy, run_noisy
from rdmfill.rdm_core import (
    OneRDM,
    PackedRDM,
    SpinRDMSet,
    SpinSector,
    SystemMeta,
    contract_to_1rdm,
    hf_2rdm,
    sector_dim,
    spectrum,
)
from rdmfill.toy_oracle import (
    exact_rdms,
    ground_state,
    hubbard_chain,
    pauli_expectation,
    random_two_body,
)


def _verdict(log, passed, name, detail):
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
    log.append(line)
    print(line)
    return passed


def test_criterion_01_exact_recovery(criterion_log):
    # Rank-5 PSD at half the unknown count: completion must be essentially
    # exact from 1.5x the information bound, across seeds.
    d, r = 50, 5
    f = 1.5 * info_bound(r, d)
    n_sample = int(round(f * d * (d + 1) // 2))
    t0 = time.time()
    n_ok = 0
    for seed in range(10):
        rng = np.random.default_rng(trial_seed(0, seed, 0))
        l_true = rng.standard_normal((r, d)) / np.sqrt(d)
        m_true = l_true.T @ l_true
        sample = sample_uniform(d, n_sample, trial_seed(0, seed, 1))
        res = complete(m_true, sample, CompletionConfig(r=r, seed=100 + seed),
                       trace_target=np.trace(m_true))
        eps = np.linalg.norm(res.completed - m_true) / np.linalg.norm(m_true)
        n_ok += eps < 1e-4
    dt = time.time() - t0
    ok = n_ok >= 9 and dt < 60.0
    _verdict(criterion_log, ok, "exact recovery at 1.5x information bound",
             f"{n_ok}/10 seeds below 1e-4 in {dt:.1f}s")
    assert n_ok >= 9
    assert dt < 60.0


def test_criterion_02_gradient_checks(criterion_log):
    h = 1e-6
    worst_fit = 0.0
    for point in range(5):
        rng = np.random.default_rng(300 + point)
        d, r = 8, 2
        sample = sample_uniform(d, 20, 400 + point)
        vals = rng.standard_normal(sample.rows.size)
        x = rng.standard_normal(r * d)
        _, grad = fit_objective(x, r, d, sample.rows, sample.cols, vals)
        fd = np.zeros_like(x)
        for i in range(x.size):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            fd[i] = (fit_objective(xp, r, d, sample.rows, sample.cols, vals)[0]
                     - fit_objective(xm, r, d, sample.rows, sample.cols,
                                     vals)[0]) / (2 * h)
        worst_fit = max(worst_fit,
                        np.linalg.norm(fd - grad) / np.linalg.norm(grad))

    worst_sur = 0.0
    n = 3
    meta = SystemMeta(n=n, n_alpha=2, n_beta=1)
    d = sector_dim(SpinSector.AB, n)
    for point in range(5):
        rng = np.random.default_rng(500 + point)
        l_mat = rng.standard_normal((2, d))
        block = PackedRDM(SpinSector.AB, l_mat.T @ l_mat, meta)
        modes = sector_modes(block, 2)
        c = haar_orthogonal(n, rng)
        _, grad = surrogate_objective([modes], c)
        fd = np.zeros_like(c)
        for i in range(n):
            for j in range(n):
                cp, cm = c.copy(), c.copy()
                cp[i, j] += h
                cm[i, j] -= h
                fd[i, j] = (surrogate_objective([modes], cp)[0]
                            - surrogate_objective([modes], cm)[0]) / (2 * h)
        worst_sur = max(worst_sur,
                        np.linalg.norm(fd - grad) / np.linalg.norm(grad))

    ok = worst_fit < 1e-6 and worst_sur < 1e-6
    _verdict(criterion_log, ok, "analytic gradients match finite differences",
             f"completion {worst_fit:.1e}, rotation surrogate {worst_sur:.1e}")
    assert worst_fit < 1e-6
    assert worst_sur < 1e-6


def test_criterion_03_pauli_map_oracle(criterion_log):
    # Every quartet map on 6 and 8 spin orbitals, against the statevector.
    worst_val = 0.0
    worst_inv = 0.0
    n_maps = 0
    for ham in (hubbard_chain(3, 2, 1, u=4.0), hubbard_chain(4, 2, 1, u=4.0)):
        _, sv = ground_state(ham)
        rdms, one = exact_rdms(sv, ham.meta)
        for sector in SpinSector:
            for quartet in all_quartets(sector, ham.meta.n):
                fp = build_map(quartet)
                vals = exact_pauli_expectations(fp, rdms, one)
                direct = np.array([pauli_expectation(sv, s)
                                   for s in fp.strings])
                worst_val = max(worst_val, np.abs(vals - direct).max())
                eye = fp.T_inv @ fp.T
                worst_inv = max(worst_inv,
                                np.abs(eye - np.eye(fp.T.shape[1])).max())
                n_maps += 1
    ok = worst_val < 1e-10 and worst_inv < 1e-12
    _verdict(criterion_log, ok, "quartet maps agree with the statevector",
             f"{n_maps} maps, value dev {worst_val:.1e}, "
             f"inverse dev {worst_inv:.1e}")
    assert worst_val < 1e-10
    assert worst_inv < 1e-12


def test_criterion_04_shot_noise_statistics(criterion_log):
    rng = np.random.default_rng(2024)
    n_draws = 10**5
    worst = 0.0
    for q in (0.0, 0.5, -0.5):
        for m in (10, 100):
            draws = simulate_shots(np.full(n_draws, q), m, rng)
            expected = (1.0 + q) * (1.0 - q) / m
            worst = max(worst, abs(draws.var() - expected) / expected)
    ok = worst < 0.05
    _verdict(criterion_log, ok, "shot noise follows the binomial variance",
             f"worst relative deviation {worst:.3f} over q in 0,+-0.5 and "
             f"m in 10,100")
    assert worst < 0.05


def test_criterion_05_coherence_bounds(criterion_log):
    d, r = 16, 4
    mu_flat = coherence(hadamard(d)[:, :r] / np.sqrt(d)).mu
    mu_spiky = coherence(np.eye(d)[:, :r]).mu
    exact = mu_flat == 1.0 and mu_spiky == d / r

    never_worse = True
    n = 4
    meta = SystemMeta(n=n, n_alpha=2, n_beta=2)
    for seed in range(3):
        rng = np.random.default_rng(600 + seed)
        modes_list = []
        for sector, rr in ((SpinSector.AA, 2), (SpinSector.AB, 3)):
            dd = sector_dim(sector, n)
            l_mat = rng.standard_normal((rr, dd))
            modes_list.append(sector_modes(
                PackedRDM(sector, l_mat.T @ l_mat, meta), rr))
        before = max(mu_after(mm, np.eye(n)) for mm in modes_list)
        basis = minimize_coherence(modes_list, n_starts=2, seed=seed,
                                   max_iter=300)
        after = max(mu_after(mm, basis.C) for mm in modes_list)
        never_worse = never_worse and after <= before + 1e-9
    ok = exact and never_worse
    _verdict(criterion_log, ok, "coherence extremes and monotone minimization",
             f"flat mu={mu_flat}, axis-aligned mu={mu_spiky} (d/r={d / r}), "
             f"minimizer never worse: {never_worse}")
    assert mu_flat == 1.0
    assert mu_spiky == d / r
    assert never_worse


def test_criterion_06_error_vs_sampling_curve(criterion_log):
    # Approximately rank-4 PSD with a ~1% truncation tail: the error curve
    # over sampling fractions must peak near the information bound and drop
    # to that tail once everything is sampled.
    d, r = 30, 4
    rng = np.random.default_rng(42)
    u, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = np.concatenate([np.geomspace(1.0, 0.22, r),
                          0.01 * 0.6 ** np.arange(d - r)])
    m_true = (u * lam) @ u.T
    tail = np.sqrt(np.sum(lam[r:] ** 2) / np.sum(lam ** 2))

    t0 = time.time()
    grid = default_grid(r, d)
    n_unique = d * (d + 1) // 2
    means = []
    for fi, f in enumerate(grid):
        n_s = min(n_unique, max(1, int(round(f * n_unique))))
        eps_conv = []
        for trial in range(8):
            samp = sample_uniform(d, n_s, trial_seed(7, fi, trial, 0))
            res = complete(m_true, samp, CompletionConfig(r=r, seed=0),
                           rng=np.random.default_rng(trial_seed(7, fi, trial,
                                                                1)),
                           trace_target=np.trace(m_true))
            if res.converged:
                eps_conv.append(np.linalg.norm(res.completed - m_true)
                                / np.linalg.norm(m_true))
        means.append(np.mean(eps_conv) if eps_conv else np.nan)
    dt = time.time() - t0

    means = np.array(means)
    i_peak = int(np.nanargmax(means))
    i_bound = int(np.argmin(np.abs(grid - info_bound(r, d))))
    saturation = abs(means[-1] - tail) / tail
    ok = abs(i_peak - i_bound) <= 2 and saturation <= 0.10 and dt < 300.0
    _verdict(criterion_log, ok, "error curve peaks at the information bound",
             f"peak at grid[{i_peak}] vs bound at grid[{i_bound}], "
             f"full-sampling error within {saturation:.1%} of the truncation "
             f"tail, {dt:.0f}s")
    assert abs(i_peak - i_bound) <= 2
    assert saturation <= 0.10
    assert dt < 300.0


def test_criterion_07_switching_cost_tradeoff(criterion_log):
    ham = random_two_body(4, 1, 1, seed=3)
    _, sv = ground_state(ham)
    rdms, one = exact_rdms(sv, ham.meta)
    ranks = {SpinSector.AB: 1}
    free = plan_noisy(rdms, one, ranks, eps0=0.05, switch_cost=0.0,
                      seed=1, n_trials=5)
    costly = plan_noisy(rdms, one, ranks, eps0=0.05, switch_cost=1e4,
                        seed=1, n_trials=5)
    ok = free.f_quartet >= 0.9 and costly.f_quartet < free.f_quartet
    _verdict(criterion_log, ok, "switching cost pulls toward fewer settings",
             f"free plan f={free.f_quartet:.3f}, costly plan "
             f"f={costly.f_quartet:.3f}")
    assert free.f_quartet >= 0.9
    assert costly.f_quartet < free.f_quartet


def test_criterion_08_shot_reduction_scaling(criterion_log):
    # Exact-rank mixed-sector targets: the planner's shot discount 1/f_m
    # must grow like dimension over rank.
    n = 4
    meta = SystemMeta(n=n, n_alpha=1, n_beta=1)
    d = n * n
    zero6 = np.zeros((sector_dim(SpinSector.AA, n),) * 2)

    def synthetic(r, seed):
        rng = np.random.default_rng(seed)
        u, _ = np.linalg.qr(rng.standard_normal((d, d)))
        mat = (u[:, :r] / r) @ u[:, :r].T
        mat *= 1.0 / np.trace(mat)
        rdms = SpinRDMSet(meta=meta,
                          aaaa=PackedRDM(SpinSector.AA, zero6, meta),
                          bbbb=PackedRDM(SpinSector.BB, zero6, meta),
                          abab=PackedRDM(SpinSector.AB, mat, meta))
        return rdms, contract_to_1rdm(rdms)

    t0 = time.time()
    ratios = []
    for r in (8, 4, 2, 1):
        rdms, one = synthetic(r, seed=20 + r)
        cal = calibrate_standard(rdms, one, eps0=0.01, seed=3, n_trials=8,
                                 sectors=[SpinSector.AB])
        plan = plan_noisy(rdms, one, {SpinSector.AB: r}, eps0=0.01,
                          switch_cost=0.0, seed=3, f_grid=[1.0], n_trials=8)
        ratios.append(cal.m0 / plan.m)
    dt = time.time() - t0
    slope = np.polyfit(np.log([2.0, 4.0, 8.0, 16.0]), np.log(ratios), 1)[0]
    ok = 0.7 <= slope <= 1.3 and dt < 600.0
    _verdict(criterion_log, ok, "shot discount scales with dimension over "
             "rank", f"log-log slope {slope:.3f} over d/r in 2,4,8,16, "
             f"{dt:.0f}s")
    assert 0.7 <= slope <= 1.3
    assert dt < 600.0


def test_criterion_09_planned_pipeline_energy(criterion_log):
    # Four-site chain at planner-chosen shots.  At this matrix size the raw
    # estimate already sits at the accuracy floor of the plan, so trace
    # renormalization has no systematic error left to remove: the
    # improvement clause fails for most seeds and is reported honestly.
    bm, bt = gen_toy("hubbard", {"n_sites": 4, "n_alpha": 1, "n_beta": 1,
                                 "u": 4.0}, seed=0)
    wins = acc = 0
    for seed in range(10):
        rep = run_noisy(bm, bt, PipelineConfig(eps0=2e-3, n_trials=6,
                                               seed=seed))
        wins += abs(rep.e2_error_post) < abs(rep.e2_error_pre)
        acc += abs(rep.e2_error_post) < 1.6e-3
    ok = wins >= 9 and acc >= 9
    _verdict(criterion_log, ok, "planned-shot pipeline interaction energy",
             f"normalization improved {wins}/10 seeds (need 9), "
             f"final error below 1.6e-3 in {acc}/10 (need 9)")
    assert acc >= 9
    assert wins >= 9


def test_criterion_10_determinant_rank_identities(criterion_log):
    rng = np.random.default_rng(7)
    all_ok = True
    for _ in range(10):
        n = int(rng.integers(3, 7))
        na = int(rng.integers(1, n))
        nb = int(rng.integers(1, n))
        blocks = []
        for n_occ in (na, nb):
            c, _ = np.linalg.qr(rng.standard_normal((n, n_occ)))
            blocks.append(c @ c.T)
        rdms = hf_2rdm(*blocks)
        expect = {SpinSector.AA: na * (na - 1) // 2,
                  SpinSector.BB: nb * (nb - 1) // 2,
                  SpinSector.AB: na * nb}
        for sector, want in expect.items():
            lam = spectrum(rdms.get(sector)).lam
            all_ok = all_ok and int((lam > 1e-10).sum()) == want
    _verdict(criterion_log, all_ok, "determinant 2-RDM ranks match closed "
             "forms", "10 random idempotent 1-RDMs, both same-spin counts "
             "and the mixed count exact")
    assert all_ok
