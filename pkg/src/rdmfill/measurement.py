"""Pauli-level measurement model for 2-RDM elements.

Elements are acquired in quartets: the packed elements sharing one set of
four spin-orbital sites are linear combinations of the same <= 8 Pauli
strings under Jordan-Wigner, so they are always measured (and sampled)
together.  Degenerate quartets with repeated indices reduce to Z-containing
strings whose inversion also involves 1-RDM elements.

The coefficient matrices are derived symbolically per quartet shape: each
candidate string is rewritten as a product of Majorana factors and parity
operators, normal-ordered, and projected onto the expectations that survive
particle-number and S_z conservation on real states.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .completion import CompletionConfig, SampleSet, complete, trial_seed
from .errors import (
    BudgetCap,
    DimensionMismatch,
    OptimizationFailure,
    UnphysicalExpectation,
    ZeroReference,
)
from .pauli import (
    FermiOps,
    PauliString,
    fermi_to_pauli,
    majorana,
    majorana_pauli,
    multiply,
    multiply_fermi,
    normal_order,
)
from .rdm_core import (
    OneRDM,
    SpinRDMSet,
    SpinSector,
    SystemMeta,
    pair_index,
    same_spin_pairs,
    sector_dim,
    trace_targets,
)

_COEFF_TOL = 1e-12


@dataclass(frozen=True)
class Quartet:
    """One measurement unit: a sector plus the index pattern of its sites.

    kind 'distinct' covers 3 packed elements (2 in the mixed sector plus one
    S_z-forbidden pairing), 'onerep'/'arep'/'brep' cover a single off-diagonal
    element with a repeated index, 'diag' covers one diagonal element.
    """

    sector: SpinSector
    kind: str
    key: tuple
    n: int

    def elements(self) -> tuple[tuple[int, int], ...]:
        """Packed (row, col) positions this quartet determines, row >= col."""
        n = self.n
        sec = self.sector

        def canon(p, q):
            return (max(p, q), min(p, q))

        if sec.same_spin:
            if self.kind == "distinct":
                a, b, c_, d_ = self.key
                pairs = [((b, a), (d_, c_)), ((c_, a), (d_, b)), ((d_, a), (c_, b))]
                return tuple(canon(pair_index(sec, n, *r), pair_index(sec, n, *c))
                             for r, c in pairs)
            if self.kind == "onerep":
                s, u, v = self.key
                row = pair_index(sec, n, max(s, u), min(s, u))
                col = pair_index(sec, n, max(s, v), min(s, v))
                return (canon(row, col),)
            i, k = self.key  # diag
            p = pair_index(sec, n, i, k)
            return ((p, p),)
        if self.kind == "distinct":
            (i, j), (k, l) = self.key
            return (canon(i * n + k, j * n + l), canon(i * n + l, j * n + k))
        if self.kind == "arep":
            i, k, l = self.key
            return (canon(i * n + k, i * n + l),)
        if self.kind == "brep":
            k, i, j = self.key
            return (canon(i * n + k, j * n + k),)
        i, k = self.key  # diag
        return ((i * n + k, i * n + k),)

    def sites(self) -> tuple[int, ...]:
        """Distinct Jordan-Wigner qubits touched by this quartet."""
        n = self.n
        if self.sector is SpinSector.AA:
            return tuple(sorted(set(self._spatials())))
        if self.sector is SpinSector.BB:
            return tuple(sorted({s + n for s in self._spatials()}))
        if self.kind == "distinct":
            (i, j), (k, l) = self.key
            return tuple(sorted({i, j, k + n, l + n}))
        if self.kind == "arep":
            i, k, l = self.key
            return tuple(sorted({i, k + n, l + n}))
        if self.kind == "brep":
            k, i, j = self.key
            return tuple(sorted({i, j, k + n}))
        i, k = self.key
        return tuple(sorted({i, k + n}))

    def _spatials(self):
        if self.kind == "distinct":
            return self.key
        return self.key  # onerep (s,u,v) and diag (i,k) are already spatial


def quartet_of_element(sector: SpinSector, n: int, p: int, q: int) -> Quartet:
    """The quartet that owns packed element (p, q) of the given sector."""
    if sector.same_spin:
        pairs = same_spin_pairs(n)
        i, k = (int(x) for x in pairs[p])
        j, l = (int(x) for x in pairs[q])
        shared = {i, k} & {j, l}
        if not shared:
            return Quartet(sector, "distinct", tuple(sorted((i, k, j, l))), n)
        if len(shared) == 1:
            s = shared.pop()
            u = i + k - s
            v = j + l - s
            if u == v:  # identical row and col pairs resolve as diagonal
                return Quartet(sector, "diag", (max(s, u), min(s, u)), n)
            return Quartet(sector, "onerep", (s, max(u, v), min(u, v)), n)
        return Quartet(sector, "diag", (i, k), n)
    i, k = divmod(p, n)
    j, l = divmod(q, n)
    if i != j and k != l:
        return Quartet(sector, "distinct",
                       ((max(i, j), min(i, j)), (max(k, l), min(k, l))), n)
    if i == j and k != l:
        return Quartet(sector, "arep", (i, max(k, l), min(k, l)), n)
    if i != j:
        return Quartet(sector, "brep", (k, max(i, j), min(i, j)), n)
    return Quartet(sector, "diag", (i, k), n)


def all_quartets(sector: SpinSector, n: int) -> list[Quartet]:
    """Every quartet of the sector, in canonical order, covering each unique
    packed element exactly once."""
    out = []
    if sector.same_spin:
        for combo in itertools.combinations(range(n), 4):
            out.append(Quartet(sector, "distinct", combo, n))
        for s in range(n):
            others = [x for x in range(n) if x != s]
            for u, v in itertools.combinations(others, 2):
                out.append(Quartet(sector, "onerep", (s, max(u, v), min(u, v)), n))
        for i, k in same_spin_pairs(n):
            out.append(Quartet(sector, "diag", (int(i), int(k)), n))
        return out
    for i, j in itertools.combinations(range(n), 2):
        for k, l in itertools.combinations(range(n), 2):
            out.append(Quartet(sector, "distinct", ((j, i), (l, k)), n))
    for i in range(n):
        for k, l in itertools.combinations(range(n), 2):
            out.append(Quartet(sector, "arep", (i, l, k), n))
    for k in range(n):
        for i, j in itertools.combinations(range(n), 2):
            out.append(Quartet(sector, "brep", (k, j, i), n))
    for i in range(n):
        for k in range(n):
            out.append(Quartet(sector, "diag", (i, k), n))
    return out


# ---------------------------------------------------------------------------
# fermionic labels and the per-quartet coefficient map

# ("P", sector, p, q) with p >= q, or ("D", spin, i, j) with i <= j
FermiLabel = tuple


def _element_operator(sector: SpinSector, n: int, p: int, q: int) -> FermiOps:
    """Ladder-operator form of P_ik,jl = <a+_i a+_k a_l a_j> at (p, q)."""
    if sector.same_spin:
        off = 0 if sector is SpinSector.AA else n
        pairs = same_spin_pairs(n)
        i, k = (int(x) + off for x in pairs[p])
        j, l = (int(x) + off for x in pairs[q])
    else:
        i, k = divmod(p, n)
        j, l = divmod(q, n)
        k, l = k + n, l + n
    return ((i, True), (k, True), (l, False), (j, False))


def _string_to_fermi(string: PauliString, n: int) -> dict[FermiOps, complex]:
    """Exact ladder-operator expansion of one Pauli string."""
    letters = [(q, w) for q, w in string.ops if w != "Z"]
    z_sites = {q for q, w in string.ops if w == "Z"}
    if letters:
        sites = [q for q, _ in letters]
        target = {q: w for q, w in letters}
        match = None
        for kinds in itertools.product("AB", repeat=len(sites)):
            phase, s = _majorana_product(tuple(sites), kinds)
            if all(s.letter(q) == target[q] for q in sites):
                match = (phase, s, kinds)
                break
        if match is None:
            raise OptimizationFailure(f"no Majorana product matches {string}")
        phase, s, kinds = match
        maj_z = {q for q, w in s.ops if w == "Z"}
        diff = maj_z ^ z_sites
        if diff & set(sites):
            raise OptimizationFailure(f"Z overlap on letter sites of {string}")
        terms = [(1.0 / phase, ())]
        for q, kind in zip(sites, kinds):
            terms = multiply_fermi(terms, majorana(q, kind))
    else:
        diff = z_sites
        terms = [(1 + 0j, ())]
    for q in sorted(diff):
        terms = multiply_fermi(terms, [(1 + 0j, ()), (-2 + 0j, ((q, True), (q, False)))])
    return normal_order(terms)


@lru_cache(maxsize=None)
def _majorana_product(sites: tuple[int, ...], kinds: tuple[str, ...]):
    phase = 1 + 0j
    s = PauliString(())
    for q, kind in zip(sites, kinds):
        ph, s = multiply(s, majorana_pauli(q, kind))
        phase *= ph
    return phase, s


def _classify(ops: FermiOps, n: int) -> FermiLabel | None:
    """Map a normal-ordered monomial to its unknown, or None if it vanishes
    on particle-number and S_z eigenstates with real amplitudes."""
    if len(ops) == 2:
        (a, da), (b, db) = ops
        if not (da and not db):
            return None
        if (a < n) != (b < n):
            return None  # spin flip
        spin = "a" if a < n else "b"
        i, j = a % n, b % n
        return ("D", spin, min(i, j), max(i, j))
    if len(ops) == 4:
        flags = tuple(d for _, d in ops)
        if flags != (True, True, False, False):
            return None
        (a, _), (b, _), (c_, _), (d_, _) = ops
        cre = sorted((a < n, b < n), reverse=True)
        ann = sorted((d_ < n, c_ < n), reverse=True)
        if cre != ann:
            return None  # S_z violating
        if (a < n) == (b < n):
            sector = SpinSector.AA if a < n else SpinSector.BB
            sp = [x % n for x in (a, b, c_, d_)]
            row = pair_index(sector, n, sp[1], sp[0])
            col = pair_index(sector, n, sp[2], sp[3])
            return ("P", sector, max(row, col), min(row, col))
        # creators a<b puts the alpha one first, annihilators c>d the beta one
        i, k, l, j = a, b - n, c_ - n, d_
        row, col = i * n + k, j * n + l
        return ("P", SpinSector.AB, max(row, col), min(row, col))
    return None


@dataclass(frozen=True)
class FermiPauliMap:
    """Linear map between a quartet's fermionic unknowns and Pauli strings.

    pauli = T @ fermi + t0 on conserving real states, fermi = T_inv @ (pauli - t0).
    """

    quartet: Quartet
    strings: tuple[PauliString, ...]
    labels: tuple[FermiLabel, ...]
    T: np.ndarray
    t0: np.ndarray
    T_inv: np.ndarray


@lru_cache(maxsize=None)
def build_map(quartet: Quartet) -> FermiPauliMap:
    """Derive the coefficient matrices of one quartet symbolically."""
    n = quartet.n
    p_labels = [("P", quartet.sector, p, q) for p, q in quartet.elements()]

    candidates: list[PauliString] = []
    seen = set()
    for _, _, p, q in p_labels:
        expansion = fermi_to_pauli([(1 + 0j, _element_operator(quartet.sector, n, p, q))])
        for s, coeff in expansion.items():
            if s.is_identity or abs(coeff.real) < _COEFF_TOL:
                continue  # odd-Y strings carry imaginary weight: zero on real states
            if s not in seen:
                seen.add(s)
                candidates.append(s)
    candidates.sort(key=lambda s: s.ops)

    label_index: dict[FermiLabel, int] = {lab: i for i, lab in enumerate(p_labels)}
    rows = []
    consts = []
    for s in candidates:
        coeffs: dict[int, complex] = {}
        const = 0j
        for ops, c in _string_to_fermi(s, n).items():
            if not ops:
                const += c
                continue
            label = _classify(ops, n)
            if label is None:
                continue
            if label not in label_index:
                if label[0] == "P":
                    raise OptimizationFailure(
                        f"string {s} reaches element {label} outside quartet"
                    )
                label_index[label] = len(label_index)
            idx = label_index[label]
            coeffs[idx] = coeffs.get(idx, 0j) + c
        rows.append(coeffs)
        consts.append(const)

    labels = [None] * len(label_index)
    for lab, i in label_index.items():
        labels[i] = lab
    t_mat = np.zeros((len(candidates), len(labels)))
    t0 = np.zeros(len(candidates))
    for si, (coeffs, const) in enumerate(zip(rows, consts)):
        if abs(const.imag) > 1e-10:
            raise OptimizationFailure(f"complex constant for {candidates[si]}")
        t0[si] = const.real
        for idx, c in coeffs.items():
            if abs(c.imag) > 1e-10:
                raise OptimizationFailure(
                    f"complex coefficient {c} for {candidates[si]}"
                )
            t_mat[si, idx] = c.real

    t_inv = np.linalg.pinv(t_mat)
    gap = np.abs(t_inv @ t_mat - np.eye(len(labels))).max()
    if gap > 1e-12:
        raise OptimizationFailure(
            f"quartet {quartet} map is rank deficient (T_inv T off by {gap:.1e})"
        )
    return FermiPauliMap(quartet=quartet, strings=tuple(candidates),
                         labels=tuple(labels), T=t_mat, t0=t0, T_inv=t_inv)


# ---------------------------------------------------------------------------
# expectations, shots, and reconstruction


def _fermi_value(label: FermiLabel, rdms: SpinRDMSet, one: OneRDM) -> float:
    if label[0] == "P":
        _, sector, p, q = label
        block = rdms.get(sector)
        if block is None:
            return 0.0
        return float(block.data[p, q])
    _, spin, i, j = label
    mat = one.alpha if spin == "a" else one.beta
    return float(mat[i, j])


def exact_pauli_expectations(fp_map: FermiPauliMap, rdms: SpinRDMSet,
                             one: OneRDM) -> np.ndarray:
    """Noise-free string expectations implied by the RDMs."""
    fermi = np.array([_fermi_value(lab, rdms, one) for lab in fp_map.labels])
    vals = fp_map.T @ fermi + fp_map.t0
    excess = np.abs(vals).max(initial=0.0) - 1.0
    if excess > 1e-6:
        raise UnphysicalExpectation(
            f"expectation magnitude exceeds 1 by {excess:.2e}"
        )
    return vals


def simulate_shots(q_true, m: int, rng: np.random.Generator):
    """Binomial estimate of <Q> from m single-shot +-1 outcomes."""
    q = np.asarray(q_true, dtype=np.float64)
    if m < 1:
        raise DimensionMismatch(f"shot count must be >= 1, got {m}")
    if np.abs(q).max(initial=0.0) > 1.0 + 1e-9:
        raise UnphysicalExpectation("true expectation outside [-1, 1]")
    p_up = np.clip((1.0 + q) / 2.0, 0.0, 1.0)
    k = rng.binomial(int(m), p_up)
    return 2.0 * k / m - 1.0


@dataclass(frozen=True)
class ShotBudget:
    shots_per_string: int
    n_settings: int
    switch_cost: float = 0.0
    f_m: float | None = None

    @property
    def total_shots(self) -> int:
        return self.shots_per_string * self.n_settings

    @property
    def total_cost(self) -> float:
        return self.total_shots + self.switch_cost * self.n_settings


@dataclass(frozen=True)
class MeasurementRecord:
    """Reconstructed elements of one measurement pass.

    values/rows/cols are per sector; unmeasured elements simply do not appear
    in the index lists.  d_estimates carries quartet-averaged 1-RDM elements.
    """

    meta: SystemMeta
    values: dict
    rows: dict
    cols: dict
    d_estimates: dict
    budget: ShotBudget

    def sector_matrix(self, sector: SpinSector) -> np.ndarray:
        out = np.zeros((sector_dim(sector, self.meta.n),) * 2)
        r, c = self.rows[sector], self.cols[sector]
        out[r, c] = self.values[sector]
        out[c, r] = self.values[sector]
        return out


@dataclass
class _Prepared:
    """One quartet set with its string union and exact expectations."""

    maps: list
    truth: np.ndarray
    indices: list  # per map: positions of its strings in the union

    @property
    def n_settings(self) -> int:
        return len(self.truth)


def _prepare(rdms: SpinRDMSet, one: OneRDM, quartets, cache=None) -> _Prepared:
    quartets = sorted(quartets, key=lambda q: (q.sector.value, q.kind, q.key))
    order: dict[PauliString, int] = {}
    truth: list[float] = []
    maps, indices = [], []
    for q in quartets:
        if cache is not None and q in cache:
            fp_map, exact = cache[q]
        else:
            fp_map = build_map(q)
            exact = exact_pauli_expectations(fp_map, rdms, one)
            if cache is not None:
                cache[q] = (fp_map, exact)
        idx = np.empty(len(fp_map.strings), dtype=np.intp)
        for si, (s, v) in enumerate(zip(fp_map.strings, exact)):
            pos = order.get(s)
            if pos is None:
                pos = len(order)
                order[s] = pos
                truth.append(float(v))
            elif abs(truth[pos] - v) > 1e-9:
                raise OptimizationFailure(
                    f"inconsistent exact value for shared string {s}"
                )
            idx[si] = pos
        maps.append(fp_map)
        indices.append(idx)
    return _Prepared(maps=maps, truth=np.array(truth), indices=indices)


def _reconstruct(prep: _Prepared, meta: SystemMeta, noisy: np.ndarray,
                 budget: ShotBudget) -> MeasurementRecord:
    values = {s: [] for s in SpinSector}
    rows = {s: [] for s in SpinSector}
    cols = {s: [] for s in SpinSector}
    d_sums: dict[FermiLabel, list] = {}
    for fp_map, idx in zip(prep.maps, prep.indices):
        fermi = fp_map.T_inv @ (noisy[idx] - fp_map.t0)
        for lab, val in zip(fp_map.labels, fermi):
            if lab[0] == "P":
                _, sector, p, q = lab
                values[sector].append(float(val))
                rows[sector].append(p)
                cols[sector].append(q)
            else:
                d_sums.setdefault(lab, []).append(float(val))
    return MeasurementRecord(
        meta=meta,
        values={s: np.array(v) for s, v in values.items()},
        rows={s: np.array(r, dtype=np.intp) for s, r in rows.items()},
        cols={s: np.array(c, dtype=np.intp) for s, c in cols.items()},
        d_estimates={lab: float(np.mean(v)) for lab, v in d_sums.items()},
        budget=budget,
    )


def measure_rdm(rdms: SpinRDMSet, one: OneRDM, quartets, m: int | None,
                rng: np.random.Generator | None = None) -> MeasurementRecord:
    """Measure the given quartets with m shots per string (None = exact).

    Strings shared between quartets are measured once and reused; every
    reconstructed element is written symmetrically.
    """
    prep = _prepare(rdms, one, quartets)
    if m is None:
        noisy = prep.truth
        budget = ShotBudget(shots_per_string=0, n_settings=prep.n_settings)
    else:
        if rng is None:
            raise DimensionMismatch("noisy measurement needs an explicit rng")
        noisy = simulate_shots(prep.truth, m, rng)
        budget = ShotBudget(shots_per_string=int(m), n_settings=prep.n_settings)
    return _reconstruct(prep, rdms.meta, noisy, budget)


# ---------------------------------------------------------------------------
# budget planning


def sample_quartets(pool, fraction: float, rng: np.random.Generator):
    """Uniform subset of the pool, at least one quartet, canonical order."""
    if not 0.0 < fraction <= 1.0:
        raise DimensionMismatch(f"fraction must be in (0, 1], got {fraction}")
    k = min(len(pool), max(1, int(round(fraction * len(pool)))))
    idx = np.sort(rng.choice(len(pool), size=k, replace=False))
    return [pool[i] for i in idx]


@dataclass(frozen=True)
class CalibrationPoint:
    m: int
    mean_eps: float


@dataclass(frozen=True)
class CalibrationResult:
    """Shots per string needed by direct inversion of every quartet."""

    m0: int
    budget: ShotBudget
    mean_eps: float
    points: tuple


def _set_error(record: MeasurementRecord, reference: SpinRDMSet, sectors) -> float:
    num = den = 0.0
    for sector in sectors:
        approx = record.sector_matrix(sector)
        ref = reference.get(sector).data
        num += float(np.sum((approx - ref) ** 2))
        den += float(np.sum(ref**2))
    if den == 0.0:
        raise ZeroReference("all reference sectors vanish")
    return np.sqrt(num / den)


def calibrate_standard(rdms: SpinRDMSet, one: OneRDM, eps0: float = 0.01,
                       seed: int = 0, n_trials: int = 10, sectors=None,
                       m_start: int = 1, m_cap: int = 2**40) -> CalibrationResult:
    """Double m until direct per-element measurement reaches eps0, then take
    one geometric bisection step back toward the cheaper side."""
    if sectors is None:
        sectors = [s for s, _ in rdms.items()]
    pool = [q for sector in sectors for q in all_quartets(sector, rdms.meta.n)]
    prep = _prepare(rdms, one, pool)

    def mean_eps(m, round_idx):
        errs = []
        for trial in range(n_trials):
            rng = np.random.default_rng(trial_seed(seed, round_idx, trial))
            noisy = simulate_shots(prep.truth, m, rng)
            rec = _reconstruct(prep, rdms.meta, noisy,
                               ShotBudget(m, prep.n_settings))
            errs.append(_set_error(rec, rdms, sectors))
        return float(np.mean(errs))

    points = []
    m, prev = m_start, None
    round_idx = 0
    while True:
        eps = mean_eps(m, round_idx)
        points.append(CalibrationPoint(m, eps))
        if eps < eps0:
            break
        prev = m
        m *= 2
        round_idx += 1
        if m > m_cap:
            raise BudgetCap(f"standard scheme still above eps0 at m={prev}")
    m0, final_eps = m, eps
    if prev is not None:
        lo, hi = prev, m
        for step in range(2):
            mid = int(round(np.sqrt(lo * hi)))
            if mid <= lo or mid >= hi:
                break
            eps_mid = mean_eps(mid, round_idx + 1 + step)
            points.append(CalibrationPoint(mid, eps_mid))
            if eps_mid < eps0:
                hi, m0, final_eps = mid, mid, eps_mid
            else:
                lo = mid
    return CalibrationResult(
        m0=m0, budget=ShotBudget(m0, prep.n_settings),
        mean_eps=final_eps, points=tuple(points))


@dataclass(frozen=True)
class PlanPoint:
    m: int
    f_quartet: float
    mean_eps: float
    n_included: int
    mean_settings: float
    cost: float
    feasible: bool


@dataclass(frozen=True)
class PlanResult:
    """Cheapest (shots, quartet fraction) found for the completion scheme."""

    m: int
    f_quartet: float
    cost: float
    mean_settings: float
    switch_cost: float
    ranks: dict
    points: tuple

    @property
    def budget(self) -> ShotBudget:
        return ShotBudget(self.m, int(round(self.mean_settings)),
                          switch_cost=self.switch_cost)


def plan_noisy(model: SpinRDMSet, model_one: OneRDM, ranks: dict,
               eps0: float = 0.01, switch_cost: float = 0.0, seed: int = 0,
               f_grid=None, n_trials: int = 10, m_start: int = 1,
               m_cap: int = 2**40,
               completion_cfg: CompletionConfig | None = None) -> PlanResult:
    """Minimize (m + c) * n_settings subject to completion error below eps0.

    Shots m double until further rounds cannot beat the best feasible cost
    even at the smallest setting count seen.  A trial counts only when every
    sector completion converges; feasibility needs at least half the trials
    and a mean set error below eps0.
    """
    meta = model.meta
    sectors = [s for s in SpinSector if ranks.get(s, 0) >= 1]
    if not sectors:
        raise DimensionMismatch("no sector with positive rank to plan for")
    if f_grid is None:
        f_grid = np.geomspace(0.2, 1.0, 6)
    if completion_cfg is None:
        completion_cfg = CompletionConfig()
    pool = [q for sector in sectors for q in all_quartets(sector, meta.n)]
    cache: dict = {}
    targets = trace_targets(meta)

    def evaluate(m, mi, fi, f):
        errs, settings = [], []
        for trial in range(n_trials):
            rng_pick = np.random.default_rng(trial_seed(seed, mi, fi, trial, 0))
            rng_meas = np.random.default_rng(trial_seed(seed, mi, fi, trial, 1))
            subset = sample_quartets(pool, f, rng_pick)
            prep = _prepare(model, model_one, subset, cache=cache)
            noisy = simulate_shots(prep.truth, m, rng_meas)
            rec = _reconstruct(prep, meta, noisy, ShotBudget(m, prep.n_settings))
            settings.append(prep.n_settings)
            num = den = 0.0
            ok = True
            for sector in sectors:
                if rec.rows[sector].size == 0:
                    ok = False
                    break
                samp = SampleSet(d=sector_dim(sector, meta.n),
                                 rows=rec.rows[sector], cols=rec.cols[sector])
                cfg = CompletionConfig(
                    r=ranks[sector], eps0=completion_cfg.eps0,
                    kappa=completion_cfg.kappa, max_iter=completion_cfg.max_iter,
                    grad_tol=completion_cfg.grad_tol, seed=completion_cfg.seed)
                obs = rec.sector_matrix(sector)
                vals = obs[samp.rows, samp.cols]
                scale = max(float(np.linalg.norm(vals)), 1e-30)
                res = None
                # a sign-locked factor can stall in a poor local minimum;
                # restart on a bad fit and keep the lowest misfit
                for attempt in range(3):
                    cand = complete(obs, samp, cfg,
                                    rng=np.random.default_rng(
                                        trial_seed(seed, mi, fi, trial, 2,
                                                   sector_id(sector), attempt)),
                                    trace_target=targets[sector])
                    misfit = float(np.linalg.norm(
                        cand.completed[samp.rows, samp.cols] - vals)) / scale
                    if res is None or misfit < best_misfit:
                        res, best_misfit = cand, misfit
                    if res.converged and best_misfit < 0.05:
                        break
                if not res.converged:
                    ok = False
                    break
                ref = model.get(sector).data
                num += float(np.sum((res.completed - ref) ** 2))
                den += float(np.sum(ref**2))
            if ok:
                errs.append(np.sqrt(num / den))
        n_inc = len(errs)
        mean_eps = float(np.mean(errs)) if errs else float("inf")
        mean_settings = float(np.mean(settings))
        cost = (m + switch_cost) * mean_settings
        feasible = n_inc >= max(1, (n_trials + 1) // 2) and mean_eps < eps0
        return PlanPoint(m, float(f), mean_eps, n_inc, mean_settings, cost,
                         feasible)

    rng_floor = np.random.default_rng(trial_seed(seed, 997))
    settings_floor = min(
        _prepare(model, model_one,
                 sample_quartets(pool, float(f_grid[0]), rng_floor),
                 cache=cache).n_settings
        for _ in range(3))

    points = []
    best: PlanPoint | None = None
    m, mi = m_start, 0
    while True:
        # scan fractions from the largest down: with m fixed, dropping
        # elements only loses information, so the first infeasible fraction
        # ends the round
        for fi in range(len(f_grid) - 1, -1, -1):
            pt = evaluate(m, mi, fi, f_grid[fi])
            points.append(pt)
            if pt.feasible and (best is None or pt.cost < best.cost):
                best = pt
            if not pt.feasible:
                break
        m_next = m * 2
        if best is not None and (m_next + switch_cost) * settings_floor >= best.cost:
            break
        if m_next > m_cap:
            if best is None:
                raise BudgetCap(f"no feasible plan up to m={m}")
            break
        m, mi = m_next, mi + 1

    # refine m between the winning round and the cheaper infeasible side at
    # the chosen fraction, then probe the next smaller fraction
    fi_best = int(np.argmin(np.abs(np.asarray(f_grid) - best.f_quartet)))
    if best.m > m_start:
        lo, hi = best.m // 2, best.m
        for step in range(2):
            mid = int(round(np.sqrt(lo * hi)))
            if mid <= lo or mid >= hi:
                break
            pt = evaluate(mid, mi + 1 + step, fi_best, float(f_grid[fi_best]))
            points.append(pt)
            if pt.feasible:
                hi = mid
                if pt.cost < best.cost:
                    best = pt
            else:
                lo = mid
    for mp, fi in ((best.m, fi_best - 1), (2 * best.m, fi_best - 1)):
        if fi < 0:
            continue
        pt = evaluate(mp, mi + 4, fi, float(f_grid[fi]))
        points.append(pt)
        if pt.feasible and pt.cost < best.cost:
            best = pt
    return PlanResult(m=best.m, f_quartet=best.f_quartet, cost=best.cost,
                      mean_settings=best.mean_settings, switch_cost=switch_cost,
                      ranks=dict(ranks), points=tuple(points))


def sector_id(sector: SpinSector) -> int:
    return list(SpinSector).index(sector)


def shot_ratio(plan_budget: ShotBudget, standard_budget: ShotBudget) -> float:
    """Total shots of the planned scheme relative to the standard scheme."""
    if standard_budget.total_shots <= 0:
        raise DimensionMismatch("standard budget has no shots")
    return plan_budget.total_shots / standard_budget.total_shots
