"""Wavenumber-resolved Floquet spectra of the homogeneous oscillation.

For each wavenumber ``k`` the period map ``F_k(T, 0)`` of

    v' = (-k^2 D + f'(u_*(t))) v

is computed by integrating the orbit together with its variational matrix.
Exponents are ``log(mu) / T`` reduced to the strip ``Im in (-omega/2, omega/2]``.
"""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (GridTooCoarse, InsufficientPoints, NonSimpleNeutralMode)
from .flow import ATOL, RTOL, variational_flow
from .kinetics import as_diffusion

ZERO_MULTIPLIER = 1e-300
# multipliers this far below the largest are lost to roundoff in the period map
RESOLVED_RATIO = 1e-7


@dataclass(frozen=True)
class Monodromy:
    """Period map ``F = exp(log_scale) * matrix`` at wavenumber ``k``.

    The scale factor keeps ``matrix`` of order one when diffusion damps every
    mode by many orders of magnitude over a period.
    """

    k: float
    matrix: np.ndarray
    log_scale: float = 0.0
    log_det: Optional[float] = None

    @property
    def F(self) -> np.ndarray:
        return math.exp(self.log_scale) * self.matrix

    def multipliers(self) -> np.ndarray:
        return np.exp(_log_multipliers(self.matrix, self.log_scale, self.log_det))


_TRACE_CACHE: dict = {}


def mean_trace(model, orbit) -> float:
    """Period average of ``tr f'(u_*(t))`` from the orbit samples."""
    key = (id(model), id(orbit))
    hit = _TRACE_CACHE.get(key)
    if hit is not None and hit[0] is model and hit[1] is orbit:
        return hit[2]
    val = float(np.mean([np.trace(model.jac(u)) for u in orbit.samples]))
    if len(_TRACE_CACHE) > 64:
        _TRACE_CACHE.clear()
    _TRACE_CACHE[key] = (model, orbit, val)
    return val


def _log_multipliers(mat, log_scale, log_det):
    """Complex logs of the multipliers; ``-inf`` marks unresolved ones.

    The smallest multiplier, when lost to roundoff, is recovered from
    ``log det F = int tr A``.
    """
    mu = np.linalg.eigvals(mat).astype(complex)
    out = np.full(mu.size, -np.inf + 0j)
    big = np.max(np.abs(mu)) if mu.size else 0.0
    ok = np.abs(mu) > max(ZERO_MULTIPLIER, RESOLVED_RATIO * big)
    out[ok] = np.log(mu[ok]) + log_scale
    bad = np.flatnonzero(~ok)
    if log_det is not None and bad.size == 1 and big > ZERO_MULTIPLIER:
        rest = np.sum(out[ok])
        val = log_det - rest
        # a lone missing multiplier of a real matrix is real
        im = 0.0 if np.cos(rest.imag) > 0 else math.pi
        out[bad[0]] = val.real + 1j * im
    return out


def monodromy(model, orbit, D, k, rtol=RTOL, atol=ATOL) -> Monodromy:
    D = as_diffusion(D)
    k = float(k)
    if k < 0:
        raise ValueError("wavenumber magnitude must be non-negative")
    T = orbit.period
    shift = k * k * D.min_real_eigenvalue
    _, G = variational_flow(model, orbit.u0, 0.0, T, D.matrix, k * k, shift, rtol, atol)
    log_det = T * (mean_trace(model, orbit) - k * k * float(np.trace(D.matrix)))
    return Monodromy(k, G, -shift * T, log_det)


def _reduce(lam, omega):
    """Map exponents into ``Im in (-omega/2, omega/2]``."""
    im = lam.imag
    n = np.floor((im + omega / 2) / omega)
    im = im - n * omega
    # floor leaves the closed lower edge; move it to the open side
    im = np.where(np.isclose(im, -omega / 2, rtol=0, atol=1e-14 * omega), omega / 2, im)
    return lam.real + 1j * im


def floquet_exponents(F, T) -> np.ndarray:
    """Exponents ``log(mu_j) / T`` sorted by descending real part.

    ``F`` may be a :class:`Monodromy` or a plain real matrix. Zero multipliers
    are reported with real part ``-inf``.
    """
    if isinstance(F, Monodromy):
        logs = _log_multipliers(F.matrix, F.log_scale, F.log_det)
    else:
        mat = np.asarray(F, dtype=float)
        mu = np.linalg.eigvals(mat).astype(complex)
        logs = np.full(mu.size, -np.inf + 0j)
        nz = np.abs(mu) > ZERO_MULTIPLIER
        logs[nz] = np.log(mu[nz])
    lam = logs.real / T + 1j * (logs.imag / T)
    fin = np.isfinite(lam.real)
    lam[~fin] = -np.inf
    lam[fin] = _reduce(lam[fin], 2 * math.pi / T)
    order = np.lexsort((-lam.imag, -lam.real))
    return lam[order]


@dataclass
class FloquetBranch:
    """One continuity-tracked exponent curve ``lambda_j(k)``."""

    index: int
    k: np.ndarray
    values: np.ndarray
    winding: np.ndarray

    def unwrapped(self, omega):
        return self.values + 1j * omega * self.winding


@dataclass
class Sweep:
    k: np.ndarray
    branches: list
    neutral: int
    period: float
    diagnostics: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.branches)

    def __len__(self):
        return len(self.branches)

    def __getitem__(self, j):
        return self.branches[j]

    @property
    def neutral_branch(self) -> FloquetBranch:
        return self.branches[self.neutral]

    def real_parts(self) -> np.ndarray:
        """Array ``(K, N)`` of ``Re lambda_j(k)``."""
        return np.stack([b.values.real for b in self.branches], axis=1)


def _track(exps, omega, diagnostics, k):
    """Order exponent sets along ``k`` by nearest-neighbour assignment modulo ``i omega``."""
    K, N = exps.shape
    values = np.empty_like(exps)
    winding = np.zeros((K, N), dtype=int)
    values[0] = exps[0]
    prev = exps[0].copy()
    for i in range(1, K):
        cur = exps[i]
        cost = np.empty((N, N))
        shifts = np.zeros((N, N), dtype=int)
        for a in range(N):
            for b in range(N):
                if not np.isfinite(cur[b].real) or not np.isfinite(prev[a].real):
                    cost[a, b] = 0.0 if np.isinf(cur[b].real) and np.isinf(prev[a].real) else 1e300
                    continue
                m = np.round((prev[a].imag - cur[b].imag) / omega)
                shifts[a, b] = int(m)
                cost[a, b] = abs(cur[b] + 1j * omega * m - prev[a])
        rows, cols = linear_sum_assignment(cost)
        for a, b in zip(rows, cols):
            values[i, a] = cur[b]
            winding[i, a] = shifts[a, b]
            others = np.delete(cost[a], b)
            if others.size and np.min(np.abs(others - cost[a, b])) < 1e-12 and cost[a, b] > 0:
                diagnostics.append(f"branch collision at k = {k[i]:.6g}")
            prev[a] = cur[b] + 1j * omega * shifts[a, b]
    return values, winding


def spectrum_sweep(model, orbit, D, k_grid, threads=1, rtol=RTOL, atol=ATOL) -> Sweep:
    k = np.asarray(k_grid, dtype=float)
    if k.ndim != 1 or k.size == 0:
        raise ValueError("k_grid must be a non-empty 1-D array")
    if np.any(np.diff(k) <= 0):
        raise ValueError("k_grid must be strictly ascending")
    if k[0] != 0.0:
        raise ValueError("k_grid must start at 0")
    D = as_diffusion(D)
    T = orbit.period

    def one(kk):
        return floquet_exponents(monodromy(model, orbit, D, kk, rtol, atol), T)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, k))
    else:
        rows = [one(kk) for kk in k]
    exps = np.array(rows)
    diagnostics = []
    values, winding = _track(exps, orbit.omega, diagnostics, k)
    N = exps.shape[1]
    neutral = int(np.argmin(np.abs(values[0])))
    branches = [FloquetBranch(j, k, values[:, j].copy(), winding[:, j].copy()) for j in range(N)]
    return Sweep(k, branches, neutral, T, diagnostics)


def default_k_grid(model, orbit, D, n_points=200, n_refine=20, k_refine=0.1,
                   k_start=1.0, rtol=RTOL, atol=ATOL):
    """Uniform grid on ``[0, k_max]`` plus geometric refinement in ``(0, k_refine]``.

    ``k_max`` grows from ``k_start`` until every exponent has real part below -1.
    """
    D = as_diffusion(D)
    k_max = k_start
    for _ in range(60):
        lam = floquet_exponents(monodromy(model, orbit, D, k_max, rtol, atol), orbit.period)
        if np.all(lam.real < -1.0):
            break
        k_max *= 1.25
    else:
        raise GridTooCoarse("could not reach the diffusion-dominated regime")
    uniform = np.linspace(0.0, k_max, n_points)
    fine = np.geomspace(k_refine * 1e-2, k_refine, n_refine)
    return np.unique(np.concatenate([uniform, fine]))


@dataclass(frozen=True)
class AdjointSolution:
    """Bounded adjoint ``U_*(t_i)`` on the orbit grid, normalised so ``(U_*, u_*') = 1``."""

    period: float
    samples: np.ndarray
    pairing: np.ndarray

    @property
    def times(self):
        M = self.samples.shape[0]
        return np.arange(M) * (self.period / M)

    def at(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        M = self.samples.shape[0]
        a = np.fft.rfft(self.samples, axis=0) / M
        m = np.arange(a.shape[0])
        w = np.full(m.size, 2.0)
        w[0] = 1.0
        if M % 2 == 0:
            w[-1] = 1.0
        tt = np.mod(np.atleast_1d(t), self.period)
        omega = 2 * math.pi / self.period
        out = (np.exp(1j * omega * np.outer(tt, m)) @ (a * w[:, None])).real.T
        return out[:, 0] if scalar else out


def _neutral_left_vector(G):
    """Left eigenvector for the multiplier nearest one, with a simplicity check."""
    mu, V = np.linalg.eig(G.T)
    j = int(np.argmin(np.abs(mu - 1.0)))
    rest = np.delete(mu, j)
    if rest.size and np.min(np.abs(rest - 1.0)) < 1e-6:
        raise NonSimpleNeutralMode("multiplier 1 is not simple at k = 0")
    if abs(mu[j] - 1.0) > 1e-6:
        raise NonSimpleNeutralMode(f"no multiplier near 1 (closest {mu[j]:.6g})")
    return mu[j], np.real_if_close(V[:, j], tol=1e6).real


def adjoint_solution(model, orbit, rtol=RTOL, atol=ATOL) -> AdjointSolution:
    """Solve ``-U' = f'(u_*(t))^T U`` for the bounded solution.

    ``U_*(0)`` is the left eigenvector of ``F_0(T, 0)`` for multiplier one; the
    samples follow from ``U(t_{i+1}) = F(t_{i+1}, t_i)^{-T} U(t_i)``, i.e. the
    adjoint fundamental solution segment by segment.
    """
    T = orbit.period
    M = orbit.n_samples
    N = orbit.dimension
    _, G = variational_flow(model, orbit.u0, 0.0, T, None, 0.0, 0.0, rtol, atol)
    _, U0 = _neutral_left_vector(G)
    dt = T / M
    U = np.empty((M, N))
    U[0] = U0
    u = orbit.u0
    h = 0.0
    for i in range(1, M):
        u, F, h = variational_flow(model, u, (i - 1) * dt, i * dt, None, 0.0, 0.0,
                                   rtol, atol, h0=h, return_step=True)
        U[i] = np.linalg.solve(F.T, U[i - 1])
    # pairing is constant along exact solutions; normalise with its mean
    pair = np.einsum("ij,ij->i", U, orbit.derivatives)
    c = pair.mean()
    U /= c
    return AdjointSolution(T, U, pair / c)


def compute_d0(orbit, adjoint, D) -> float:
    """Phase-diffusion coefficient as a ratio of periodic trapezoid sums."""
    Dm = as_diffusion(D).matrix
    num = np.einsum("ij,ij->", adjoint.samples, orbit.derivatives @ Dm.T)
    den = np.einsum("ij,ij->", adjoint.samples, orbit.derivatives)
    return float(num / den)


def fit_window(model, orbit, D, d0=None, z=1e-3):
    """Small-k window where the quartic expansion of the neutral branch holds.

    The expansion parameter is ``|D| k^2 / gap`` with ``gap`` the decay rate of
    the slowest non-neutral exponent at ``k = 0``.
    """
    D = as_diffusion(D)
    lam0 = floquet_exponents(monodromy(model, orbit, D, 0.0), orbit.period)
    gap = -float(lam0.real[1]) if lam0.size > 1 else math.inf
    if not gap > 0:
        gap = math.inf
    k_fit = math.sqrt(z * gap / np.linalg.norm(D.matrix, 2))
    if d0 is not None and d0 != 0:
        k_fit = min(k_fit, 0.1 / math.sqrt(abs(d0)))
    return k_fit


def curvature_sweep(model, orbit, D, k_max_fit, n=16, threads=1) -> Sweep:
    """Dense sweep on ``[0, k_max_fit]`` dedicated to the curvature fit."""
    k = np.concatenate([[0.0], np.linspace(k_max_fit / n, k_max_fit, n)])
    return spectrum_sweep(model, orbit, D, k, threads=threads)


def fit_curvature(neutral_branch: FloquetBranch, k_max_fit=None, d0_guess=1.0,
                  return_c4=False):
    """Least-squares fit ``Re lambda(k) = -d0 k^2 - c4 k^4`` for ``k <= k_max_fit``."""
    if k_max_fit is None:
        k_max_fit = 0.1 / math.sqrt(max(abs(d0_guess), 1e-12))
    k = neutral_branch.k
    sel = (k <= k_max_fit)
    if np.count_nonzero(sel) < 4:
        raise InsufficientPoints(
            f"only {np.count_nonzero(sel)} grid points with k <= {k_max_fit:.3g}")
    kk = k[sel]
    y = neutral_branch.values.real[sel]
    A = np.column_stack([-kk**2, -kk**4])
    (d0, c4), *_ = np.linalg.lstsq(A, y, rcond=None)
    return (float(d0), float(c4)) if return_c4 else float(d0)


class Verdict(str, enum.Enum):
    STABLE = "Stable"
    SIDEBAND = "SidebandUnstable"
    TURING = "TuringUnstable"
    ODE = "OdeUnstable"
    MARGINAL = "Marginal"


EXIT_CODES = {
    Verdict.STABLE: 0,
    Verdict.SIDEBAND: 10,
    Verdict.TURING: 11,
    Verdict.ODE: 12,
    Verdict.MARGINAL: 13,
}


@dataclass(frozen=True)
class StabilityReport:
    verdict: Verdict
    d0: float
    d0_fit: Optional[float]
    d0_formula: Optional[float]
    max_re: float
    k_star: Optional[float]
    k_cut: float
    neutral_simple: bool
    gap_condition: bool
    curvature_condition: bool
    tol_re: float
    tol_d0: float
    diffusion_hypothesis: str = ""

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def to_text(self) -> str:
        def fmt(x):
            return "none" if x is None else f"{x:.12g}"

        lines = [
            f"verdict = {self.verdict.value}",
            f"d0_quadrature = {fmt(self.d0)}",
            f"d0_fit = {fmt(self.d0_fit)}",
            f"d0_formula = {fmt(self.d0_formula)}",
            f"max_re_lambda = {fmt(self.max_re)}",
            f"k_star = {fmt(self.k_star)}",
            f"k_cut = {fmt(self.k_cut)}",
            f"neutral_simple = {str(self.neutral_simple).lower()}",
            f"spectral_gap = {str(self.gap_condition).lower()}",
            f"positive_curvature = {str(self.curvature_condition).lower()}",
            f"diffusion_hypothesis = {self.diffusion_hypothesis}",
            f"tol_re = {self.tol_re:g}",
            f"tol_d0 = {self.tol_d0:g}",
        ]
        return "\n".join(lines) + "\n"


def classify(sweep: Sweep, d0: float, tol_re=1e-6, tol_d0=1e-8, d0_fit=None,
             d0_formula=None, diffusion_hypothesis="") -> StabilityReport:
    k = sweep.k
    if k[0] != 0.0 or k.size < 2:
        raise GridTooCoarse("sweep must start at k = 0 and contain positive wavenumbers")
    re = sweep.real_parts()
    j0 = sweep.neutral
    if abs(sweep.neutral_branch.values[0]) > 1e-6:
        raise GridTooCoarse("no neutral exponent at k = 0")
    others0 = np.delete(re[0], j0)
    neutral_simple = not np.any(np.abs(np.delete(sweep.real_parts()[0], j0)) < tol_re)
    if np.max(re[-1]) >= -1.0:
        raise GridTooCoarse("k_max does not reach the diffusion-dominated regime")

    masked = re.copy()
    masked[0, j0] = -np.inf
    max_re = float(np.max(masked))
    idx = np.unravel_index(np.argmax(masked), masked.shape)
    k_cut = float(k[1])

    if others0.size and np.max(others0) >= tol_re:
        verdict = Verdict.ODE
    elif abs(d0) <= tol_d0:
        verdict = Verdict.MARGINAL
    elif d0 < 0:
        verdict = Verdict.SIDEBAND
    elif max_re > tol_re:
        verdict = Verdict.TURING
    else:
        # neutral branch may only approach zero quadratically near k = 0
        neutral_pos = np.any(re[1:, j0] >= 0.0)
        non_neutral = np.delete(re, j0, axis=1)
        if np.max(non_neutral) >= -tol_re or neutral_pos or not neutral_simple:
            verdict = Verdict.MARGINAL
        else:
            verdict = Verdict.STABLE
    k_star = float(k[idx[0]]) if verdict in (Verdict.TURING, Verdict.SIDEBAND) and max_re > 0 else None
    spectrum_ok = verdict == Verdict.STABLE
    return StabilityReport(
        verdict=verdict, d0=float(d0), d0_fit=d0_fit, d0_formula=d0_formula,
        max_re=max_re, k_star=k_star, k_cut=k_cut, neutral_simple=neutral_simple,
        gap_condition=spectrum_ok, curvature_condition=bool(d0 > tol_d0),
        tol_re=tol_re, tol_d0=tol_d0, diffusion_hypothesis=diffusion_hypothesis)


def neutral_projection(F, target=1.0, separation=1e-6):
    """Rank-one spectral projection onto the multiplier of ``F`` nearest ``target``.

    Returns ``(P, mu)`` with ``P = r l^T / (l^T r)``.
    """
    if isinstance(F, Monodromy):
        mat, scale = F.matrix, math.exp(F.log_scale)
    else:
        mat, scale = np.asarray(F, dtype=float), 1.0
    mu, R = np.linalg.eig(mat)
    mu = mu * scale
    j = int(np.argmin(np.abs(mu - target)))
    rest = np.delete(mu, j)
    if rest.size and np.min(np.abs(rest - mu[j])) <= separation:
        raise NonSimpleNeutralMode("neutral multiplier is not separated from the spectrum")
    mu_l, Lv = np.linalg.eig(mat.T)
    jl = int(np.argmin(np.abs(mu_l * scale - mu[j])))
    r = R[:, j]
    l = Lv[:, jl]
    P = np.outer(r, l) / (l @ r)
    return np.real_if_close(P, tol=1e6).real, complex(mu[j]).real if abs(mu[j].imag) < 1e-12 else complex(mu[j])


def export_sweep_csv(sweep: Sweep, path):
    N = len(sweep.branches)
    header = ["k"]
    for j in range(N):
        header += [f"re_lambda_{j + 1}", f"im_lambda_{j + 1}"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, kk in enumerate(sweep.k):
            row = [repr(float(kk))]
            for b in sweep.branches:
                row += [repr(float(b.values[i].real)), repr(float(b.values[i].imag))]
            w.writerow(row)


@dataclass
class Analysis:
    report: StabilityReport
    sweep: Sweep
    adjoint: AdjointSolution
    orbit: object


def analyze(model, orbit, D, k_grid=None, tol_re=1e-6, tol_d0=1e-8, k_max_fit=None,
            threads=1, n_points=200, n_refine=20) -> Analysis:
    """Full pipeline: adjoint, d0, sweep, curvature fit and verdict."""
    D = as_diffusion(D)
    adj = adjoint_solution(model, orbit)
    d0 = compute_d0(orbit, adj, D)
    if k_grid is None:
        k_grid = default_k_grid(model, orbit, D, n_points=n_points, n_refine=n_refine)
    sweep = spectrum_sweep(model, orbit, D, k_grid, threads=threads)
    if k_max_fit is None:
        k_max_fit = fit_window(model, orbit, D, d0)
    fit_sweep = curvature_sweep(model, orbit, D, k_max_fit, threads=threads)
    d0_fit = fit_curvature(fit_sweep.neutral_branch, k_max_fit)
    d0_formula = model.oracles.d0 if model.oracles is not None else None
    report = classify(sweep, d0, tol_re, tol_d0, d0_fit, d0_formula, D.hypothesis)
    return Analysis(report, sweep, adj, orbit)
