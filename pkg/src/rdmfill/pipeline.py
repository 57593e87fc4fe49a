"""End-to-end drivers: toy generation, noiseless and noisy runs, reports.

The noiseless driver follows the model-then-target protocol: every choice
(ranks, rotation, sampled fraction, the samplings themselves) is made on the
cheap model RDM, then replayed on the target by reseeding the exact same
streams.  The noisy driver calibrates the standard scheme on the target,
plans (m, f) on the model, and executes the plan once.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .bundle import Bundle
from .coherence import (
    minimize_coherence,
    mu_after,
    rotate_integrals,
    rotate_set,
    sector_modes,
)
from .completion import (
    CompletionConfig,
    SampleSet,
    complete,
    info_bound,
    find_fsample,
    sample_uniform,
    trial_seed,
)
from .errors import DimensionMismatch, OptimizationFailure, RdmError
from .measurement import (
    all_quartets,
    calibrate_standard,
    measure_rdm,
    plan_noisy,
    sample_quartets,
    sector_id,
)
from .postprocess import (
    NOISY_STEPS,
    NOISELESS_STEPS,
    STEP_MODEL,
    STEP_NORMALIZE,
    STEP_RESTORE,
    model_correction,
    normalize_trace,
    restore_sampled,
)
from .rdm_core import (
    IntegralSet,
    SpinRDMSet,
    SpinSector,
    contract_to_1rdm,
    energy,
    select_rank,
    set_rel_error,
    trace_targets,
)
from .toy_oracle import (
    ToyHamiltonian,
    exact_rdms,
    ground_state,
    hubbard_chain,
    random_two_body,
)

OPTIMIZER_NOTE = "scipy L-BFGS-B, gtol=grad_tol, ftol=1e-15"


@dataclass(frozen=True)
class PipelineConfig:
    eps0: float = 0.01
    kappa: float = 0.5
    seed: int = 0
    n_trials: int = 10
    switch_cost: float = 0.0
    rank_override: int | None = None
    rotate: bool = True
    max_iter: int = 15000
    grad_tol: float = 1e-8
    coherence_starts: int = 10
    coherence_iters: int = 2000
    f_grid: tuple | None = None
    m_cap: int = 2**40


@dataclass
class RunReport:
    """Everything needed to replay a run and tabulate its figures."""

    mode: str
    config: dict
    bundle_hashes: dict = field(default_factory=dict)
    ranks: dict = field(default_factory=dict)
    coherence_before: dict = field(default_factory=dict)
    coherence_after: dict = field(default_factory=dict)
    f_sample: dict = field(default_factory=dict)
    shots: dict = field(default_factory=dict)
    eps_sector_pre: dict = field(default_factory=dict)
    eps_sector_post: dict = field(default_factory=dict)
    eps_set_pre: float | None = None
    eps_set_post: float | None = None
    energy_fields_present: bool = False
    e2_reference: float | None = None
    e2_error_pre: float | None = None
    e2_error_post: float | None = None
    wall_time_s: float = 0.0
    optimizer: str = OPTIMIZER_NOTE
    tables: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [f"mode = {self.mode}", f"optimizer = {self.optimizer}"]
        for key in sorted(self.config):
            lines.append(f"config.{key} = {self.config[key]}")
        for key in sorted(self.bundle_hashes):
            lines.append(f"bundle.{key} = {self.bundle_hashes[key]}")
        for name, val in sorted(self.ranks.items()):
            lines.append(f"rank.{name} = {val}")
        for name, val in sorted(self.coherence_before.items()):
            lines.append(f"coherence_before.{name} = {val!r}")
        for name, val in sorted(self.coherence_after.items()):
            lines.append(f"coherence_after.{name} = {val!r}")
        for name, val in sorted(self.f_sample.items()):
            lines.append(f"f_sample.{name} = {val!r}")
        for name, val in sorted(self.shots.items()):
            lines.append(f"shots.{name} = {val!r}")
        for name, val in sorted(self.eps_sector_pre.items()):
            lines.append(f"eps_pre.{name} = {val!r}")
        for name, val in sorted(self.eps_sector_post.items()):
            lines.append(f"eps_post.{name} = {val!r}")
        lines.append(f"eps_set_pre = {self.eps_set_pre!r}")
        lines.append(f"eps_set_post = {self.eps_set_post!r}")
        if self.energy_fields_present:
            lines.append(f"e2_reference = {self.e2_reference!r}")
            lines.append(f"e2_error_pre = {self.e2_error_pre!r}")
            lines.append(f"e2_error_post = {self.e2_error_post!r}")
        else:
            lines.append("e2 = absent (no integrals in bundle)")
        lines.append(f"wall_time_s = {self.wall_time_s:.3f}")
        return "\n".join(lines) + "\n"

    def save(self, out_dir: str) -> None:
        import os

        from .bundle import _write_atomic

        os.makedirs(out_dir, exist_ok=True)
        _write_atomic(os.path.join(out_dir, "report.txt"),
                      self.to_text().encode())
        for name, (header, rows) in self.tables.items():
            body = [",".join(header)]
            body += [",".join(f"{x!r}" if isinstance(x, str) else f"{x:.12g}"
                              for x in row) for row in rows]
            _write_atomic(os.path.join(out_dir, f"{name}.csv"),
                          ("\n".join(body) + "\n").encode())


@contextmanager
def _stage(name: str):
    try:
        yield
    except RdmError as err:
        raise type(err)(f"[{name}] {err}") from err


def _check_pair(model: Bundle, target: Bundle) -> None:
    if (model.meta.n, model.meta.n_alpha, model.meta.n_beta) != (
            target.meta.n, target.meta.n_alpha, target.meta.n_beta):
        raise DimensionMismatch("model and target bundles disagree on meta")


def _active_sectors(rdms: SpinRDMSet) -> list[SpinSector]:
    targets = trace_targets(rdms.meta)
    return [s for s, _ in rdms.items() if targets[s] > 0.0]


def _select_ranks(model: SpinRDMSet, cfg: PipelineConfig,
                  sectors) -> dict[SpinSector, int]:
    ranks = {}
    for sector in sectors:
        if cfg.rank_override is not None:
            ranks[sector] = min(cfg.rank_override, model.get(sector).d)
        else:
            ranks[sector] = select_rank(model.get(sector).data,
                                        eps0=cfg.eps0, kappa=cfg.kappa)
    return ranks


def _restrict(rdms: SpinRDMSet, sectors) -> SpinRDMSet:
    kept = {s: rdms.get(s) for s in sectors}
    return SpinRDMSet(meta=rdms.meta, aaaa=kept.get(SpinSector.AA),
                      bbbb=kept.get(SpinSector.BB),
                      abab=kept.get(SpinSector.AB))


def _complete_with_restarts(observed, samp, cfg: CompletionConfig, seed_path,
                            trace_target, n_restarts: int = 3):
    vals = observed[samp.rows, samp.cols]
    scale = max(float(np.linalg.norm(vals)), 1e-30)
    best = best_misfit = None
    for attempt in range(n_restarts):
        cand = complete(observed, samp, cfg,
                        rng=np.random.default_rng(
                            trial_seed(*seed_path, attempt)),
                        trace_target=trace_target)
        misfit = float(np.linalg.norm(
            cand.completed[samp.rows, samp.cols] - vals)) / scale
        if best is None or misfit < best_misfit:
            best, best_misfit = cand, misfit
        if best.converged and best_misfit < 0.05:
            break
    return best


def run_noiseless(bundle_model: Bundle, bundle_target: Bundle,
                  cfg: PipelineConfig | None = None) -> RunReport:
    """Model-guided noiseless completion of the target bundle."""
    cfg = cfg or PipelineConfig()
    t_start = time.monotonic()
    _check_pair(bundle_model, bundle_target)
    report = RunReport(mode="noiseless", config=vars(cfg).copy())

    model = bundle_model.rdms
    target = bundle_target.rdms
    ints = bundle_target.ints
    meta = model.meta
    targets = trace_targets(meta)

    with _stage("rank-selection"):
        sectors = _active_sectors(model)
        ranks = _select_ranks(model, cfg, sectors)
        report.ranks = {s.value: ranks[s] for s in sectors}

    with _stage("coherence"):
        if cfg.rotate:
            modes = [sector_modes(model.get(s), ranks[s]) for s in sectors]
            for s, mm in zip(sectors, modes):
                report.coherence_before[s.value] = mu_after(mm, np.eye(meta.n))
            basis = minimize_coherence(
                modes, n_starts=cfg.coherence_starts, seed=cfg.seed,
                max_iter=cfg.coherence_iters, grad_tol=cfg.grad_tol)
            model = rotate_set(model, basis.C)
            target = rotate_set(target, basis.C)
            if ints is not None:
                ints = rotate_integrals(ints, basis.C)
            for s, mm in zip(sectors, modes):
                report.coherence_after[s.value] = mu_after(mm, basis.C)

    cc = CompletionConfig(eps0=cfg.eps0, kappa=cfg.kappa,
                          max_iter=cfg.max_iter, grad_tol=cfg.grad_tol,
                          n_trials=cfg.n_trials, seed=cfg.seed)
    completed = {}
    pre_err = {}
    with _stage("completion"):
        for sector in sectors:
            d = model.get(sector).d
            r = ranks[sector]
            sec_cfg = CompletionConfig(
                r=r, eps0=cc.eps0, kappa=cc.kappa, max_iter=cc.max_iter,
                grad_tol=cc.grad_tol, n_trials=cc.n_trials,
                seed=cc.seed + 7919 * sector_id(sector))
            grid = cfg.f_grid
            search = find_fsample(model.get(sector), sec_cfg, grid=grid,
                                  trace_target=targets[sector])
            report.f_sample[sector.value] = (search.f_star, search.n_sample_star)
            report.tables[f"fsample_{sector.value}"] = (
                ("f_sample", "n_sample", "mean_eps", "std_eps", "success"),
                [(g.f_sample, g.n_sample, g.mean_eps, g.std_eps,
                  g.success_frac) for g in search.records])
            fi = next(i for i, g in enumerate(search.records)
                      if g.f_sample == search.f_star)

            # replay the search trials until one succeeds on the model, then
            # give the target that exact sampling
            chosen = None
            for trial in range(sec_cfg.n_trials):
                samp = sample_uniform(d, search.n_sample_star,
                                      trial_seed(sec_cfg.seed, fi, trial, 0))
                model_fit = complete(
                    model.get(sector), samp, sec_cfg,
                    rng=np.random.default_rng(trial_seed(sec_cfg.seed, fi, trial, 1)),
                    trace_target=targets[sector])
                eps_m = (np.linalg.norm(model_fit.completed - model.get(sector).data)
                         / np.linalg.norm(model.get(sector).data))
                if model_fit.converged and eps_m <= cfg.eps0:
                    chosen = (trial, samp, model_fit)
                    break
            if chosen is None:
                raise OptimizationFailure(
                    f"no replayed trial succeeded for {sector.value}")
            trial, samp, model_fit = chosen
            target_fit = _complete_with_restarts(
                target.get(sector).data, samp, sec_cfg,
                (sec_cfg.seed, fi, trial, 2), targets[sector])
            completed[sector] = (samp, model_fit, target_fit)
            pre_err[sector] = target_fit.completed

    with _stage("postprocess"):
        pre_set = _restrict(target, sectors)
        for sector in sectors:
            pre_set = pre_set.replace(sector, pre_err[sector])
        post_set = pre_set
        if STEP_RESTORE in NOISELESS_STEPS:
            for sector in sectors:
                samp, _, _ = completed[sector]
                post_set = post_set.replace(sector, restore_sampled(
                    post_set.get(sector).data, target.get(sector).data, samp))
        if STEP_NORMALIZE in NOISELESS_STEPS:
            post_set = normalize_trace(post_set)
        if STEP_MODEL in NOISELESS_STEPS:
            for sector in sectors:
                _, model_fit, _ = completed[sector]
                corrected = model_correction(
                    post_set.get(sector).data, model.get(sector),
                    model_fit.completed)
                post_set = post_set.replace(sector, corrected)

    _finalize(report, sectors, target, pre_set, post_set, ints, t_start)
    return report


def run_noisy(bundle_model: Bundle, bundle_target: Bundle,
              cfg: PipelineConfig | None = None) -> RunReport:
    """Shot-noise pipeline: calibrate, plan on the model, execute once."""
    cfg = cfg or PipelineConfig()
    t_start = time.monotonic()
    _check_pair(bundle_model, bundle_target)
    report = RunReport(mode="noisy", config=vars(cfg).copy())

    model = bundle_model.rdms
    target = bundle_target.rdms
    ints = bundle_target.ints
    meta = model.meta
    targets = trace_targets(meta)

    with _stage("rank-selection"):
        sectors = _active_sectors(model)
        ranks = _select_ranks(model, cfg, sectors)
        report.ranks = {s.value: ranks[s] for s in sectors}

    with _stage("one-rdm"):
        model_one = (bundle_model.one if bundle_model.one is not None
                     else contract_to_1rdm(model))
        target_one = (bundle_target.one if bundle_target.one is not None
                      else contract_to_1rdm(target))

    with _stage("calibrate-standard"):
        cal = calibrate_standard(target, target_one, eps0=cfg.eps0,
                                 seed=cfg.seed, n_trials=cfg.n_trials,
                                 sectors=sectors, m_cap=cfg.m_cap)
        report.shots["standard_m0"] = cal.m0
        report.shots["standard_settings"] = cal.budget.n_settings
        report.tables["calibration"] = (
            ("m", "mean_eps"), [(p.m, p.mean_eps) for p in cal.points])

    with _stage("plan"):
        plan = plan_noisy(model, model_one, ranks, eps0=cfg.eps0,
                          switch_cost=cfg.switch_cost, seed=cfg.seed,
                          f_grid=cfg.f_grid, n_trials=cfg.n_trials,
                          m_cap=cfg.m_cap)
        report.shots["plan_m"] = plan.m
        report.shots["plan_f_quartet"] = plan.f_quartet
        report.tables["plan"] = (
            ("m", "f_quartet", "mean_eps", "mean_settings", "cost", "feasible"),
            [(p.m, p.f_quartet, p.mean_eps, p.mean_settings, p.cost,
              int(p.feasible)) for p in plan.points])

    with _stage("measure"):
        pool = [q for s in sectors for q in all_quartets(s, meta.n)]
        subset = sample_quartets(
            pool, plan.f_quartet,
            np.random.default_rng(trial_seed(cfg.seed, 101, 0)))
        record = measure_rdm(target, target_one, subset, plan.m,
                             np.random.default_rng(trial_seed(cfg.seed, 101, 1)))
        executed = record.budget
        report.shots["executed_m"] = executed.shots_per_string
        report.shots["executed_settings"] = executed.n_settings
        f_m = executed.total_shots / cal.budget.total_shots
        report.shots["f_m"] = f_m

    with _stage("completion"):
        pre_set = _restrict(target, sectors)
        for sector in sectors:
            if record.rows[sector].size == 0:
                raise OptimizationFailure(
                    f"plan left sector {sector.value} unmeasured")
            samp = SampleSet(d=target.get(sector).d, rows=record.rows[sector],
                             cols=record.cols[sector])
            sec_cfg = CompletionConfig(
                r=ranks[sector], eps0=cfg.eps0, kappa=cfg.kappa,
                max_iter=cfg.max_iter, grad_tol=cfg.grad_tol,
                seed=cfg.seed + 7919 * sector_id(sector))
            fit = _complete_with_restarts(
                record.sector_matrix(sector), samp, sec_cfg,
                (cfg.seed, 101, 2, sector_id(sector)), targets[sector])
            pre_set = pre_set.replace(sector, fit.completed)

    with _stage("postprocess"):
        post_set = pre_set
        if STEP_NORMALIZE in NOISY_STEPS:
            post_set = normalize_trace(post_set)

    _finalize(report, sectors, target, pre_set, post_set, ints, t_start)
    return report


def _finalize(report: RunReport, sectors, target: SpinRDMSet,
              pre_set: SpinRDMSet, post_set: SpinRDMSet,
              ints: IntegralSet | None, t_start: float) -> None:
    for sector in sectors:
        ref = target.get(sector).data
        nrm = np.linalg.norm(ref)
        report.eps_sector_pre[sector.value] = float(
            np.linalg.norm(pre_set.get(sector).data - ref) / nrm)
        report.eps_sector_post[sector.value] = float(
            np.linalg.norm(post_set.get(sector).data - ref) / nrm)
    ref_set = _restrict(target, sectors)
    report.eps_set_pre = set_rel_error(pre_set, ref_set)
    report.eps_set_post = set_rel_error(post_set, ref_set)
    if ints is not None:
        report.energy_fields_present = True
        _, e2_ref = energy(ref_set, ints)
        _, e2_pre = energy(pre_set, ints)
        _, e2_post = energy(post_set, ints)
        report.e2_reference = float(e2_ref)
        report.e2_error_pre = float(abs(e2_pre - e2_ref))
        report.e2_error_post = float(abs(e2_post - e2_ref))
    report.wall_time_s = time.monotonic() - t_start


def gen_toy(family: str, params: dict | None = None, seed: int = 0,
            interaction_scale: float = 0.8) -> tuple[Bundle, Bundle]:
    """Exact-solution bundle pair: full Hamiltonian target, scaled-interaction
    model.  Both carry the physical integrals."""
    params = dict(params or {})
    if family == "hubbard":
        n = int(params.get("n_sites", 4))
        na = int(params.get("n_alpha", (n + 1) // 2))
        nb = int(params.get("n_beta", n // 2))
        t_hop = float(params.get("t", 1.0))
        u = float(params.get("u", 4.0))
        ham_target = hubbard_chain(n, na, nb, t=t_hop, u=u)
        ham_model = hubbard_chain(n, na, nb, t=t_hop, u=u * interaction_scale)
    elif family == "random":
        n = int(params.get("n", 3))
        na = int(params.get("n_alpha", 2))
        nb = int(params.get("n_beta", 1))
        ham_target = random_two_body(n, na, nb, seed=seed)
        ham_model = ToyHamiltonian(
            meta=ham_target.meta,
            ints=IntegralSet(t=ham_target.ints.t,
                             V=ham_target.ints.V * interaction_scale),
            family=ham_target.family, params=ham_target.params)
    else:
        raise DimensionMismatch(f"unknown toy family {family!r}")

    bundles = []
    for ham, tag in ((ham_model, "model"), (ham_target, "target")):
        _, sv = ground_state(ham)
        rdms, one = exact_rdms(sv, ham.meta)
        bundles.append(Bundle(meta=ham.meta, rdms=rdms, one=one,
                              ints=ham_target.ints,
                              producer=f"gen_toy/{family}/{tag}/seed={seed}/"
                                       f"scale={interaction_scale}"))
    return bundles[0], bundles[1]
