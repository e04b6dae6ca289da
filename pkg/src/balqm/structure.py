"""Sampled verification of structural hypotheses on weakly coupled operators.

Every check draws a deterministic block of uniform variates from
``numpy.random.default_rng(seed)`` of shape ``(sample_count, k)`` and maps
row ``i`` to one argument tuple, so a longer run extends a shorter one with
the same seed.  The first violating sample in stream order is reported as the
witness, carrying every argument and both operator values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import OperatorSpec

__all__ = [
    "SamplerConfig",
    "CheckReport",
    "check_ellipticity",
    "check_balanced_qm",
    "check_quasi_monotone",
    "check_condition_i",
    "check_condition_i_prime",
    "check_condition_ii",
    "run_checks",
    "CHECK_NAMES",
]

CHECK_NAMES = ("ellipticity", "mon1", "mon2", "monorig", "cond_i", "cond_i_prime", "cond_ii")


@dataclass(frozen=True)
class SamplerConfig:
    sample_count: int = 10_000
    value_range: tuple[float, float] = (-5.0, 5.0)
    gradient_range: tuple[float, float] = (-5.0, 5.0)
    matrix_scale: float = 5.0
    seed: int = 0
    atol: float = 1e-10

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError(f"sample_count must be >= 1, got {self.sample_count}")
        for name in ("value_range", "gradient_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be a nonempty interval, got ({lo}, {hi})")
        if not self.matrix_scale > 0:
            raise ValueError("matrix_scale must be positive")
        if self.atol < 0:
            raise ValueError("atol must be nonnegative")


@dataclass
class CheckReport:
    condition_name: str
    passed: bool
    samples_tested: int
    witness: dict | None = None
    empirical_constant: float | None = None
    note: str | None = None

    def to_dict(self) -> dict:
        out = {
            "condition_name": self.condition_name,
            "passed": self.passed,
            "samples_tested": self.samples_tested,
            "witness": self.witness,
            "empirical_constant": self.empirical_constant,
        }
        if self.note:
            out["note"] = self.note
        return out


def _block(cfg: SamplerConfig, k: int, salt: int = 0) -> np.ndarray:
    rng = np.random.default_rng([cfg.seed, salt])
    return rng.random((cfg.sample_count, k))


def _scale(u, lo, hi):
    return lo + (hi - lo) * u


def _points(spec: OperatorSpec, u: np.ndarray) -> np.ndarray:
    lo = np.array([b[0] for b in spec.bounds])
    hi = np.array([b[1] for b in spec.bounds])
    return lo + (hi - lo) * u


def _sym_count(d: int) -> int:
    return d * (d + 1) // 2


def _matrices(u: np.ndarray, d: int, eig_lo: np.ndarray | float, eig_hi: np.ndarray | float):
    """Symmetric matrices with eigenvalues in ``[eig_lo, eig_hi]``.

    ``u`` has ``d(d+1)/2 + d`` columns: entries of a random symmetric matrix
    supplying the eigenvectors, then the eigenvalue fractions.
    """
    n = len(u)
    ns = _sym_count(d)
    M = np.zeros((n, d, d))
    iu = np.triu_indices(d)
    M[:, iu[0], iu[1]] = 2 * u[:, :ns] - 1
    M = M + np.transpose(np.triu(M, 1), (0, 2, 1)) if d > 1 else M
    _, Q = np.linalg.eigh(M)
    lo = np.asarray(eig_lo, dtype=float).reshape(-1, 1)
    hi = np.asarray(eig_hi, dtype=float).reshape(-1, 1)
    lam = lo + (hi - lo) * u[:, ns : ns + d]
    X = np.einsum("nij,nj,nkj->nik", Q, lam, Q)
    return 0.5 * (X + np.transpose(X, (0, 2, 1)))


def _tuple(spec, x, xi, p, X) -> dict:
    r, s = spec.split(xi)
    return {
        "x": [float(v) for v in x],
        "r": [float(v) for v in r],
        "s": [float(v) for v in s],
        "p": [float(v) for v in p],
        "X": [[float(v) for v in row] for row in X],
    }


def _F(spec, j, x, xi, p, X) -> float:
    r, s = spec.split(xi)
    return float(spec.components[j](x, r, s, p, X))


def check_ellipticity(spec: OperatorSpec, cfg: SamplerConfig) -> CheckReport:
    """``F_j(x, ξ, p, X) >= F_j(x, ξ, p, Y)`` for ``X <= Y``."""
    d, m = spec.dim, spec.m
    km = _sym_count(d) + d
    cols = [d, m, d, km, km]
    u = _block(cfg, sum(cols), salt=1)
    parts = np.split(u, np.cumsum(cols)[:-1], axis=1)
    xs = _points(spec, parts[0])
    xis = _scale(parts[1], *cfg.value_range)
    ps = _scale(parts[2], *cfg.gradient_range)
    Xs = _matrices(parts[3], d, -cfg.matrix_scale, cfg.matrix_scale)
    Ps = _matrices(parts[4], d, 0.0, cfg.matrix_scale)
    Ys = Xs + Ps
    for i in range(cfg.sample_count):
        for j in range(m):
            fx = _F(spec, j, xs[i], xis[i], ps[i], Xs[i])
            fy = _F(spec, j, xs[i], xis[i], ps[i], Ys[i])
            if fy - fx > cfg.atol:
                w = _tuple(spec, xs[i], xis[i], ps[i], Xs[i])
                w.update(component=j, sample=i, Y=Ys[i].tolist(), F_X=fx, F_Y=fy,
                         violated="F_j(X) >= F_j(Y)")
                return CheckReport("ellipticity", False, i + 1, w)
    return CheckReport("ellipticity", True, cfg.sample_count)


def _monotone_pairs(spec, cfg, salt):
    d, m = spec.dim, spec.m
    km = _sym_count(d) + d
    cols = [d, m, m, d, km]
    u = _block(cfg, sum(cols), salt=salt)
    parts = np.split(u, np.cumsum(cols)[:-1], axis=1)
    xs = _points(spec, parts[0])
    xis = _scale(parts[1], *cfg.value_range)
    width = cfg.value_range[1] - cfg.value_range[0]
    incs = parts[2] * width
    # a quarter of the increments are zero so that partial orderings are covered
    incs[parts[2] < 0.25] = 0.0
    ps = _scale(parts[3], *cfg.gradient_range)
    Xs = _matrices(parts[4], d, -cfg.matrix_scale, cfg.matrix_scale)
    return xs, xis, incs, ps, Xs


def _balanced_group(spec, cfg, group: int) -> CheckReport:
    name = "mon1" if group == 1 else "mon2"
    m1, m = spec.partition.m1, spec.m
    own = range(0, m1) if group == 1 else range(m1, m)
    other = np.zeros(m, dtype=bool)
    if group == 1:
        other[m1:] = True
    else:
        other[:m1] = True
    if len(own) == 0:
        return CheckReport(name, True, 0, note="void: group 2 is empty")
    xs, xis, incs, ps, Xs = _monotone_pairs(spec, cfg, salt=2 + group)
    for i in range(cfg.sample_count):
        x, xi, p, X = xs[i], xis[i], ps[i], Xs[i]
        # raising the other group's values must not decrease F_j
        cross = xi + np.where(other, incs[i], 0.0)
        for j in own:
            lo = _F(spec, j, x, xi, p, X)
            hi = _F(spec, j, x, cross, p, X)
            if lo - hi > cfg.atol:
                w = _tuple(spec, x, xi, p, X)
                r2, s2 = spec.split(cross)
                w.update(component=j, sample=i, r_raised=r2.tolist(), s_raised=s2.tolist(),
                         F_base=lo, F_raised=hi,
                         violated="F_j(base) <= F_j(other group raised)")
                return CheckReport(name, False, i + 1, w)
        # raising own-group values other than the j-th must not increase F_j
        for j in own:
            same = np.zeros(m, dtype=bool)
            same[list(own)] = True
            same[j] = False
            raised = xi + np.where(same, incs[i], 0.0)
            base = _F(spec, j, x, xi, p, X)
            up = _F(spec, j, x, raised, p, X)
            if up - base > cfg.atol:
                w = _tuple(spec, x, xi, p, X)
                r2, s2 = spec.split(raised)
                w.update(component=j, sample=i, r_raised=r2.tolist(), s_raised=s2.tolist(),
                         F_base=base, F_raised=up,
                         violated="F_j(base) >= F_j(own group raised, j fixed)")
                return CheckReport(name, False, i + 1, w)
    return CheckReport(name, True, cfg.sample_count)


def check_balanced_qm(spec: OperatorSpec, cfg: SamplerConfig) -> tuple[CheckReport, CheckReport]:
    return _balanced_group(spec, cfg, 1), _balanced_group(spec, cfg, 2)


def check_quasi_monotone(spec: OperatorSpec, cfg: SamplerConfig) -> CheckReport:
    """Cooperative condition: ``F_j(η) <= F_j(ξ)`` whenever ``ξ <= η``, ``ξ_j = η_j``."""
    m = spec.m
    if m == 1:
        return CheckReport("monorig", True, 0, note="void: scalar operator")
    xs, xis, incs, ps, Xs = _monotone_pairs(spec, cfg, salt=2)
    for i in range(cfg.sample_count):
        x, xi, p, X = xs[i], xis[i], ps[i], Xs[i]
        for j in range(m):
            inc = incs[i].copy()
            inc[j] = 0.0
            eta = xi + inc
            f_xi = _F(spec, j, x, xi, p, X)
            f_eta = _F(spec, j, x, eta, p, X)
            if f_eta - f_xi > cfg.atol:
                w = _tuple(spec, x, xi, p, X)
                r2, s2 = spec.split(eta)
                w.update(component=j, sample=i, r_raised=r2.tolist(), s_raised=s2.tolist(),
                         F_base=f_xi, F_raised=f_eta, violated="F_j(eta) <= F_j(xi)")
                return CheckReport("monorig", False, i + 1, w)
    return CheckReport("monorig", True, cfg.sample_count)


def _difference_samples(spec, cfg, salt):
    """Base point, target index, positive gap and signed companion gaps.

    Companion gaps are uniform on ``[-W, gap]`` but snapped to ``+gap`` or
    ``-gap`` a quarter of the time each, which reaches the extremes of
    piecewise-linear couplings.
    """
    d, m = spec.dim, spec.m
    km = _sym_count(d) + d
    cols = [d, m, 1, 1, m, m, d, km]
    u = _block(cfg, sum(cols), salt=salt)
    parts = np.split(u, np.cumsum(cols)[:-1], axis=1)
    xs = _points(spec, parts[0])
    base = _scale(parts[1], *cfg.value_range)
    width = cfg.value_range[1] - cfg.value_range[0]
    target = np.minimum((parts[2][:, 0] * m).astype(int), m - 1)
    gap = (0.5 * width) * (0.01 + 0.99 * parts[3][:, 0])
    frac, snap = parts[4], parts[5]
    gaps = gap[:, None] - frac * (width + gap[:, None])
    gaps = np.where(snap < 0.25, gap[:, None], gaps)
    gaps = np.where((snap >= 0.25) & (snap < 0.5), -gap[:, None], gaps)
    gaps[np.arange(len(gap)), target] = gap
    ps = _scale(parts[6], *cfg.gradient_range)
    Xs = _matrices(parts[7], d, -cfg.matrix_scale, cfg.matrix_scale)
    return xs, base, target, gap, gaps, ps, Xs


def check_condition_i(spec: OperatorSpec, cfg: SamplerConfig) -> CheckReport:
    """Strict monotonicity in the own unknown at the largest gap."""
    xs, eta, target, gap, gaps, ps, Xs = _difference_samples(spec, cfg, salt=5)
    # condition i compares |ξ_k - η_k|, so companion gaps live in [-gap, gap]
    gaps = np.clip(gaps, -gap[:, None], gap[:, None])
    lowest, witness = math.inf, None
    for i in range(cfg.sample_count):
        j = int(target[i])
        xi = eta[i] + gaps[i]
        diff = xi[j] - eta[i][j]
        f_xi = _F(spec, j, xs[i], xi, ps[i], Xs[i])
        f_eta = _F(spec, j, xs[i], eta[i], ps[i], Xs[i])
        ratio = (f_xi - f_eta) / diff
        lowest = min(lowest, ratio)
        if witness is None and ratio <= 0:
            witness = _tuple(spec, xs[i], eta[i], ps[i], Xs[i])
            witness.update(component=j, sample=i, xi=xi.tolist(), F_xi=f_xi, F_eta=f_eta,
                           ratio=ratio, violated="F_j(xi) - F_j(eta) > 0")
    return CheckReport("cond_i", witness is None, cfg.sample_count, witness, float(lowest))


def check_condition_i_prime(spec: OperatorSpec, cfg: SamplerConfig) -> CheckReport:
    """Group-oriented version of condition i.

    With ``θ = max(max_j (r_j - ρ_j), max_j (σ_j - s_j)) > 0`` attained at a
    group-1 index the ratio is ``(F_j(r, s) - F_j(ρ, σ)) / θ``, at a group-2
    index ``(F_j(ρ, σ) - F_j(r, s)) / θ``.
    """
    m1 = spec.partition.m1
    xs, base, target, gap, gaps, ps, Xs = _difference_samples(spec, cfg, salt=6)
    # base holds (ρ, s); gaps holds (r - ρ, σ - s)
    theta = gaps.max(axis=1)
    first = base.copy()
    first[:, :m1] += gaps[:, :m1]
    second = base.copy()
    second[:, m1:] += gaps[:, m1:]
    sign = np.where(target < m1, 1.0, -1.0)
    lowest, witness = math.inf, None
    active = np.flatnonzero(theta > 0)
    for i in active:
        j = int(target[i])
        f_a = _F(spec, j, xs[i], first[i], ps[i], Xs[i])
        f_b = _F(spec, j, xs[i], second[i], ps[i], Xs[i])
        ratio = sign[i] * (f_a - f_b) / theta[i]
        lowest = min(lowest, ratio)
        if witness is None and ratio <= 0:
            witness = {
                "x": xs[i].tolist(), "r": first[i][:m1].tolist(), "s": base[i][m1:].tolist(),
                "rho": base[i][:m1].tolist(), "sigma": second[i][m1:].tolist(),
                "p": ps[i].tolist(), "X": Xs[i].tolist(),
                "component": j, "sample": int(i), "theta": float(theta[i]),
                "F_rs": f_a, "F_rho_sigma": f_b, "ratio": float(ratio),
                "violated": "oriented difference >= lambda * theta with lambda > 0",
            }
    tested = len(active)
    return CheckReport("cond_i_prime", witness is None and tested > 0, tested, witness,
                       float(lowest))


def _lipschitz_in_x(spec: OperatorSpec, cfg: SamplerConfig) -> tuple[float, float]:
    """Sampled x-Lipschitz constants of the coupling and drift terms.

    Drawn from an independent stream of fixed size, so that the candidate
    modulus does not depend on ``sample_count``.
    """
    sf = spec.structural_form
    d, m = spec.dim, spec.m
    n = 4096
    rng = np.random.default_rng([cfg.seed, 99])
    u = rng.random((n, 2 * d + m))
    x = _points(spec, u[:, :d])
    y = _points(spec, u[:, d : 2 * d])
    xi = _scale(u[:, 2 * d :], *cfg.value_range)
    dist = np.linalg.norm(x - y, axis=1)
    ok = dist > 1e-9
    x, y, xi, dist = x[ok], y[ok], xi[ok], dist[ok]
    r, s = xi[:, : spec.partition.m1], xi[:, spec.partition.m1 :]
    lc = lb = 0.0
    for j in range(m):
        dc = np.abs(sf.coupling[j](x, r, s) - sf.coupling[j](y, r, s))
        lc = max(lc, float(np.max(dc / dist)))
        bx, by = sf.drift_at(j, x), sf.drift_at(j, y)
        if bx is not None:
            lb = max(lb, float(np.max(np.linalg.norm(bx - by, axis=1) / dist)))
    return lc, lb


def check_condition_ii(spec: OperatorSpec, cfg: SamplerConfig) -> CheckReport:
    """Continuity modulus test over negative semidefinite matrix pairs.

    ``X`` and ``Y`` are drawn with eigenvalues in ``[-3a, 0]``; such pairs
    satisfy the required block-matrix inequality.  The candidate modulus is
    ``ω(t) = L t`` with ``L = 1 + L_c + L_b`` from sampled x-Lipschitz
    constants of coupling and drift.
    """
    if spec.structural_form is None:
        raise ValueError("condition ii check requires a declared structural_form")
    lc, lb = _lipschitz_in_x(spec, cfg)
    L = 1.0 + lc + lb
    d, m = spec.dim, spec.m
    km = _sym_count(d) + d
    cols = [1, d, d, m, km, km, 1]
    u = _block(cfg, sum(cols), salt=7)
    parts = np.split(u, np.cumsum(cols)[:-1], axis=1)
    a = 10.0 ** _scale(parts[0][:, 0], -1.0, 2.0)
    xs = _points(spec, parts[1])
    ys = _points(spec, parts[2])
    # one sample in eight uses y = x, the identity case
    same = parts[6][:, 0] < 0.125
    ys[same] = xs[same]
    xis = _scale(parts[3], *cfg.value_range)
    Xs = _matrices(parts[4], d, -3 * a, 0.0)
    Ys = _matrices(parts[5], d, -3 * a, 0.0)
    worst, witness = -math.inf, None
    for i in range(cfg.sample_count):
        x, y, xi = xs[i], ys[i], xis[i]
        p = a[i] * (x - y)
        t = a[i] * float(np.dot(x - y, x - y)) + 1.0 / a[i]
        for j in range(m):
            f_y = _F(spec, j, y, xi, p, -Ys[i])
            f_x = _F(spec, j, x, xi, p, Xs[i])
            excess = (f_y - f_x) - L * t
            worst = max(worst, excess)
            if witness is None and excess > cfg.atol:
                witness = _tuple(spec, x, xi, p, Xs[i])
                witness.update(component=j, sample=i, y=y.tolist(), Y=Ys[i].tolist(),
                               a=float(a[i]), F_y=f_y, F_x=f_x, bound=L * t,
                               violated="F_j(y,-Y) - F_j(x,X) <= L*(a|x-y|^2 + 1/a)")
    note = f"modulus estimate omega(t) = {L!r} * t (sampled, not certified)"
    return CheckReport("cond_ii", witness is None, cfg.sample_count, witness, float(worst), note)


def run_checks(spec: OperatorSpec, cfg: SamplerConfig, names=None) -> dict[str, CheckReport]:
    """Run the named checks (default: all) and return reports keyed by name."""
    wanted = set(names) if names is not None else {
        "ellipticity", "balanced_qm", "quasi_monotone", "cond_i", "cond_i_prime", "cond_ii"}
    out: dict[str, CheckReport] = {}
    if "ellipticity" in wanted:
        out["ellipticity"] = check_ellipticity(spec, cfg)
    if "balanced_qm" in wanted:
        out["mon1"], out["mon2"] = check_balanced_qm(spec, cfg)
    if "quasi_monotone" in wanted:
        out["monorig"] = check_quasi_monotone(spec, cfg)
    if "cond_i" in wanted:
        out["cond_i"] = check_condition_i(spec, cfg)
    if "cond_i_prime" in wanted:
        out["cond_i_prime"] = check_condition_i_prime(spec, cfg)
    if "cond_ii" in wanted:
        out["cond_ii"] = check_condition_ii(spec, cfg)
    return out
