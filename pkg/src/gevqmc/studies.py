"""Convergence studies: QMC error, dimension truncation and FEM error.

All three studies share one pipeline.  Lattice points are mapped to
parameters by the beta-Gaussian inverse CDF.  Each parameter vector gives one
PDE solve, and the nodal solutions are averaged over the points.  Norms are
taken on the finest mesh involved, using the exact P1 stiffness and mass
matrices.

Points are processed in fixed chunks and the chunk sums are reduced in a
fixed order, so every reported number is independent of the worker count.
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import fem
from .betagauss import BetaGaussian
from .field import GevreyField, LognormalField
from .lattice import (
    GeneratingVector,
    ShiftSet,
    cbc_construct,
    is_prime,
    kernel_table,
    qmc_estimate,
    read_genvec,
)
from .weights import (
    ParameterError,
    SpaceParams,
    build_pod_weights,
    kernel_constant_K,
    select_lambda,
    theoretical_rate,
)

__all__ = [
    "StudyConfig",
    "ConfigError",
    "RateTable",
    "FitResult",
    "fit_rate",
    "read_rate_csv",
    "load_config",
    "parse_config",
    "derived_quantities",
    "build_weights",
    "generating_vector",
    "qmc_convergence_study",
    "truncation_study",
    "fem_study",
]

log = logging.getLogger(__name__)

POINT_CHUNK = 128
_T_LO, _T_HI = 1e-300, 1.0 - 1e-16


class ConfigError(ValueError):
    pass


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


@dataclass(frozen=True)
class StudyConfig:
    """Everything a study needs.  Defaults are the desk-scale protocol.

    Lists (``n_list``, ``s_list``, ``k_list``) are comma-separated strings
    so that every key round-trips through the key=value config format.
    """

    field: str = "gevrey"
    vartheta: float = 2.0
    amplitude: float = 0.5
    sigma: float = 1.5
    C_xi: float = 3.0
    beta: float = 0.5
    tau: float = 0.5
    theta: float = 1.001
    r: float = 0.70
    delta: float = 0.05
    C: float = 1.0
    p: float = 0.0  # 0 means 1/vartheta + 1e-3
    s: int = 50
    s_reference: int = 64
    s_list: str = "2,4,8,16,32"
    k: int = 5
    k_reference: int = 6
    k_list: str = "1,2,3,4,5"
    n_list: str = "17,31,67,127,263,503,1013,2003"
    n_trunc: int = 4003
    n_fem: int = 2003
    fem_s: int = 20
    R: int = 8
    seed: int = 20240601
    kernel: str = "surrogate"
    order_cap: int = 60
    coeff_rule: str = "centroid"
    solver: str = "banded"
    genvec_dir: str = ""
    threads: int = 1
    out: str = ""

    # keys that do not change any computed number
    NON_HASHED = ("threads", "out", "genvec_dir")

    @property
    def ns(self) -> tuple[int, ...]:
        return _ints(self.n_list)

    @property
    def ss(self) -> tuple[int, ...]:
        return _ints(self.s_list)

    @property
    def ks(self) -> tuple[int, ...]:
        return _ints(self.k_list)

    @property
    def p_value(self) -> float:
        return self.p if self.p > 0 else 1.0 / self.vartheta + 1e-3

    def space_params(self) -> SpaceParams:
        return SpaceParams(self.tau, self.theta, self.r, self.delta, self.beta)

    def make_field(self, s: int):
        if self.field == "gevrey":
            return GevreyField(self.vartheta, s, self.amplitude, self.sigma, self.C_xi)
        return LognormalField(self.vartheta, s, self.amplitude)

    def items(self) -> list[tuple[str, object]]:
        return [(f.name, getattr(self, f.name)) for f in dataclasses.fields(self)]

    def config_hash(self) -> str:
        text = "\n".join(f"{k}={v!r}" for k, v in self.items() if k not in self.NON_HASHED)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def validate(self) -> None:
        try:
            sp = self.space_params()
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc
        if self.field not in ("gevrey", "lognormal"):
            raise ConfigError(f"field must be gevrey or lognormal, got {self.field!r}")
        if not self.vartheta > 1:
            raise ConfigError("vartheta must exceed 1")
        if self.amplitude < 0:
            raise ConfigError("amplitude must be nonnegative")
        alpha_sup = self.amplitude  # ||psi_1||_inf
        if not self.theta > 2.0 * alpha_sup:
            raise ConfigError(f"theta = {self.theta} must exceed 2*||alpha||_inf = {2.0 * alpha_sup}")
        ns = self.ns
        if not ns or any(not is_prime(n) for n in ns) or any(a >= b for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_list must be strictly increasing primes")
        for name in ("n_trunc", "n_fem"):
            if not is_prime(getattr(self, name)):
                raise ConfigError(f"{name} must be prime")
        if self.R < 1:
            raise ConfigError("R must be >= 1")
        if self.s < 1 or any(v < 1 for v in self.ss) or self.fem_s < 1:
            raise ConfigError("dimensions must be >= 1")
        if self.ss and self.s_reference < max(self.ss):
            raise ConfigError("s_reference must be >= every entry of s_list")
        if self.ks and self.k_reference < max(self.ks):
            raise ConfigError("k_reference must be >= every entry of k_list")
        for k in self.ks + (self.k, self.k_reference):
            if not 1 <= k <= fem.MAX_LEVEL:
                raise ConfigError(f"mesh level {k} out of range")
        if self.coeff_rule not in ("centroid", "3point"):
            raise ConfigError("coeff_rule must be centroid or 3point")
        if self.solver not in ("banded", "direct", "cg"):
            raise ConfigError("solver must be banded, direct or cg")
        if not (self.kernel == "surrogate" or self.kernel.startswith("table:")):
            raise ConfigError("kernel must be surrogate or table:<file>")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        try:
            lam = select_lambda(self.p_value, self.sigma, sp)
            kernel_constant_K(sp)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc
        if not 1.0 / (2.0 * self.r) < lam <= 1.0:
            raise ConfigError(f"lambda = {lam} outside (1/(2r), 1]")


FULL_SCALE = {
    "s": 100,
    "k": 7,
    "R": 16,
    "n_list": "17,31,67,127,263,503,1013,2003,4003,8009,16007,32009,63997",
    "s_reference": 256,
    "s_list": "2,4,8,16,32,64",
    "n_trunc": 63997,
    "k_reference": 7,
    "k_list": "1,2,3,4,5,6",
    "n_fem": 63997,
    "fem_s": 100,
}


def parse_config(text: str, base: StudyConfig | None = None) -> StudyConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) on top of ``base``."""
    base = base or StudyConfig()
    types = {f.name: f.type for f in dataclasses.fields(StudyConfig)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        updates[key] = val
    return with_overrides(base, updates)


def with_overrides(cfg: StudyConfig, updates: dict) -> StudyConfig:
    types = {f.name: f.type for f in dataclasses.fields(StudyConfig)}
    conv = {}
    for key, val in updates.items():
        if key not in types:
            raise ConfigError(f"unknown key {key!r}")
        kind = types[key]
        try:
            if kind == "int":
                conv[key] = int(val)
            elif kind == "float":
                conv[key] = float(val)
            else:
                conv[key] = str(val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {val!r}") from exc
    return dataclasses.replace(cfg, **conv)


def load_config(path, base: StudyConfig | None = None) -> StudyConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read(), base)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def derived_quantities(cfg: StudyConfig) -> dict:
    sp = cfg.space_params()
    p = cfg.p_value
    lam = select_lambda(p, cfg.sigma, sp)
    return {
        "p": p,
        "lambda": lam,
        "K": kernel_constant_K(sp),
        "theoretical_rate": theoretical_rate(p, sp),
    }


def build_weights(cfg: StudyConfig, s_max: int):
    sp = cfg.space_params()
    d = derived_quantities(cfg)
    seq = cfg.make_field(s_max).sequences(s_max, d["p"])
    return build_pod_weights(s_max, cfg.sigma, d["lambda"], cfg.C, seq.b, seq.alpha, sp, d["K"])


def generating_vector(cfg: StudyConfig, n: int, s: int) -> GeneratingVector:
    """Load ``lattice_n{n}.txt`` from ``genvec_dir`` if present, else run CBC."""
    if cfg.genvec_dir:
        path = os.path.join(cfg.genvec_dir, f"lattice_n{n}.txt")
        if os.path.exists(path):
            g = read_genvec(path)
            if g.n != n or g.s < s:
                raise ConfigError(f"{path} does not cover n = {n}, s = {s}")
            return g.truncate(s)
    w = build_weights(cfg, s)
    omega = kernel_table(cfg.kernel, n)
    return cbc_construct(n, s, w, omega, cfg.order_cap)


# ---------------------------------------------------------------- integrand

_CONTEXT: dict = {}


def _context(key):
    """Per-process cache of assembly data and psi matrices."""
    if key not in _CONTEXT:
        field_kind, vartheta, amplitude, sigma, C_xi, k, s, coeff_rule = key
        prob = fem.P1Problem(fem.build_mesh(k), coeff_rule=coeff_rule)
        pts, _ = prob.coeff_points()
        if field_kind == "gevrey":
            fld = GevreyField(vartheta, s, amplitude, sigma, C_xi)
        else:
            fld = LognormalField(vartheta, s, amplitude)
        _CONTEXT[key] = (prob, fld, fld.psi_matrix(pts, s))
    return _CONTEXT[key]


@dataclass(frozen=True)
class SolutionIntegrand:
    """Maps lattice points to stacked nodal solutions.

    Each ``(level, dim)`` pair in ``variants`` produces one solve per point,
    with the parameters truncated to ``dim`` coordinates.  The solution is
    prolonged to ``target_level``, and the prolonged solutions are
    concatenated.
    """

    cfg: StudyConfig
    variants: tuple[tuple[int, int], ...]
    target_level: int

    def __call__(self, t: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        y = BetaGaussian(cfg.beta).inv_cdf(np.clip(t, _T_LO, _T_HI))
        target = fem.build_mesh(self.target_level)
        out = np.empty((t.shape[0], len(self.variants) * target.n_interior))
        for v, (k, s) in enumerate(self.variants):
            key = (cfg.field, cfg.vartheta, cfg.amplitude, cfg.sigma, cfg.C_xi, k, s, cfg.coeff_rule)
            prob, fld, psi = _context(key)
            a = prob.triangle_coeff(fld.coeff_from_psi(psi, y[:, :s]))
            sl = slice(v * target.n_interior, (v + 1) * target.n_interior)
            for i in range(t.shape[0]):
                u = prob.solve(a[i], solver=cfg.solver)
                out[i, sl] = fem.prolong(u, target).values
        return out


# ---------------------------------------------------------------- results


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float

    @property
    def prefactor(self) -> float:
        return math.exp(self.intercept)


def fit_rate(points: Sequence[tuple[float, float]]) -> FitResult:
    """Least-squares line through ``(log x, log e)``; intercept is ``log e`` at ``x = 1``."""
    pts = list(points)
    if len(pts) < 2:
        raise ValueError("need at least two points")
    x = np.array([p[0] for p in pts], dtype=float)
    e = np.array([p[1] for p in pts], dtype=float)
    if np.any(x <= 0) or np.any(e <= 0):
        raise ValueError("fit_rate needs positive abscissae and values")
    lx, le = np.log(x), np.log(e)
    mx, me = lx.mean(), le.mean()
    sxx = np.sum((lx - mx) ** 2)
    if sxx == 0:
        raise ValueError("abscissae must not all coincide")
    slope = float(np.sum((lx - mx) * (le - me)) / sxx)
    intercept = float(me - slope * mx)
    resid = float(np.sqrt(np.sum((le - intercept - slope * lx) ** 2)))
    return FitResult(slope, intercept, resid)


@dataclass
class RateTable:
    study: str
    abscissa: list[float]
    h1: list[float]
    l2: list[float]
    metadata: dict = field(default_factory=dict)

    def fit(self, column: str) -> FitResult | None:
        vals = self.h1 if column == "h1" else self.l2
        pts = [(x, e) for x, e in zip(self.abscissa, vals) if e > 0]
        return fit_rate(pts) if len(pts) >= 2 else None

    def to_csv(self) -> str:
        lines = ["abscissa,h1_error,l2_error"]
        for x, a, b in zip(self.abscissa, self.h1, self.l2):
            lines.append(f"{x!r},{a!r},{b!r}")
        for col in ("h1", "l2"):
            fr = self.fit(col)
            slope = repr(fr.slope) if fr else "nan"
            icpt = repr(fr.intercept) if fr else "nan"
            lines.append(f"# fit_{col}_slope={slope}")
            lines.append(f"# fit_{col}_intercept={icpt}")
        lines.append(f"# study={self.study}")
        for k, v in self.metadata.items():
            lines.append(f"# {k}={v}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        tmp = f"{path}.tmp{os.getpid()}"
        with open(tmp, "w") as fh:
            fh.write(self.to_csv())
        os.replace(tmp, path)


def read_rate_csv(path) -> tuple[np.ndarray, dict]:
    """Rows ``(abscissa, h1, l2)`` and the ``# key=value`` comment lines of a study CSV."""
    rows, meta = [], {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "abscissa,h1_error,l2_error":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
            elif line:
                rows.append([float(v) for v in line.split(",")])
    return np.array(rows), meta


def _metadata(cfg: StudyConfig, extra: dict) -> dict:
    d = derived_quantities(cfg)
    meta = {
        "kernel_mode": cfg.kernel,
        "seed": cfg.seed,
        "p": repr(d["p"]),
        "lambda": repr(d["lambda"]),
        "K": repr(d["K"]),
        "theoretical_rate": repr(d["theoretical_rate"]),
        "weight_constant_C": repr(cfg.C),
    }
    meta.update(extra)
    meta["config"] = " ".join(f"{k}={v}" for k, v in cfg.items() if k not in StudyConfig.NON_HASHED)
    meta["config_hash"] = cfg.config_hash()
    return meta


def _executor(cfg: StudyConfig):
    return ProcessPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None


def _norms(vec: np.ndarray, level: int) -> tuple[float, float]:
    u = fem.FemSolution(fem.build_mesh(level), vec)
    return fem.h1_seminorm(u), fem.l2_norm(u)


def _estimate(integrand, g, shifts, ex):
    return qmc_estimate(integrand, g, shifts, chunk=POINT_CHUNK, executor=ex)


def qmc_convergence_study(cfg: StudyConfig) -> RateTable:
    """R.M.S. error over random shifts versus the number of lattice points."""
    cfg.validate()
    if cfg.R < 2:
        raise ConfigError("the QMC study needs R >= 2 shifts")
    shifts = ShiftSet.generate(cfg.R, cfg.s, cfg.seed)
    integrand = SolutionIntegrand(cfg, ((cfg.k, cfg.s),), cfg.k)
    R = cfg.R
    h1s, l2s = [], []
    ex = _executor(cfg)
    try:
        for n in cfg.ns:
            g = generating_vector(cfg, n, cfg.s)
            res = _estimate(integrand, g, shifts, ex)
            dev = [_norms(res.mean - q, cfg.k) for q in res.per_shift]
            h1s.append(math.sqrt(sum(a * a for a, _ in dev) / (R * (R - 1))))
            l2s.append(math.sqrt(sum(b * b for _, b in dev) / (R * (R - 1))))
            log.info("qmc n=%d h1=%.3e l2=%.3e", n, h1s[-1], l2s[-1])
    finally:
        if ex is not None:
            ex.shutdown()
    meta = _metadata(cfg, {"s": cfg.s, "k": cfg.k, "R": R})
    return RateTable("qmc", [float(n) for n in cfg.ns], h1s, l2s, meta)


def truncation_study(cfg: StudyConfig) -> RateTable:
    """``||E[u_{s_ref}] - E[u_s]||`` with one shifted lattice of ``n_trunc`` points."""
    cfg.validate()
    s_ref = cfg.s_reference
    shifts = ShiftSet.generate(1, s_ref, cfg.seed)
    g = generating_vector(cfg, cfg.n_trunc, s_ref)
    dims = cfg.ss + (s_ref,)
    integrand = SolutionIntegrand(cfg, tuple((cfg.k, s) for s in dims), cfg.k)
    ex = _executor(cfg)
    try:
        res = _estimate(integrand, g, shifts, ex)
    finally:
        if ex is not None:
            ex.shutdown()
    m = fem.build_mesh(cfg.k).n_interior
    means = np.asarray(res.mean).reshape(len(dims), m)
    errs = [_norms(means[-1] - means[i], cfg.k) for i in range(len(cfg.ss))]
    meta = _metadata(cfg, {"s_reference": s_ref, "k": cfg.k, "n": cfg.n_trunc})
    return RateTable("truncation", [float(s) for s in cfg.ss], [e[0] for e in errs], [e[1] for e in errs], meta)


def fem_study(cfg: StudyConfig) -> RateTable:
    """``||E[u_{h_ref} - u_h]||`` with one shifted lattice of ``n_fem`` points."""
    cfg.validate()
    k_ref = cfg.k_reference
    s = cfg.fem_s
    shifts = ShiftSet.generate(1, s, cfg.seed)
    g = generating_vector(cfg, cfg.n_fem, s)
    levels = cfg.ks + (k_ref,)
    integrand = SolutionIntegrand(cfg, tuple((k, s) for k in levels), k_ref)
    ex = _executor(cfg)
    try:
        res = _estimate(integrand, g, shifts, ex)
    finally:
        if ex is not None:
            ex.shutdown()
    m = fem.build_mesh(k_ref).n_interior
    means = np.asarray(res.mean).reshape(len(levels), m)
    errs = [_norms(means[-1] - means[i], k_ref) for i in range(len(cfg.ks))]
    hs = [2.0**-k for k in cfg.ks]
    order = np.argsort(hs)
    meta = _metadata(cfg, {"fem_s": s, "k_reference": k_ref, "n": cfg.n_fem})
    return RateTable(
        "fem",
        [hs[i] for i in order],
        [errs[i][0] for i in order],
        [errs[i][1] for i in order],
        meta,
    )
