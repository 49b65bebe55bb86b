"""Command-line experiment runner.

Every output is a pure function of its :class:`ExperimentConfig`: CSV files and
reports carry the config as ``#`` header lines, rasters get a ``.json``
sidecar with the same basename. Exit status is 0 on success, 1 on a failed
check or an I/O problem and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import re
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .density import (
    bohr_mean,
    diff_frequency,
    diff_histogram,
    minkowski_witness,
    rate_curve,
    rate_of_injectivity,
    residue_rate,
    translation_defects,
)
from .discretize import image_chain, rotate_raster
from .lattice import (
    Isometry,
    IsometrySequence,
    WindowedSet,
    integer_ball,
    make_pythagorean,
    make_rotation2d,
    sample_isometry,
)
from .raster import RasterFormatError, atomic_write, encode_pnm, read_pnm
from .torus import (
    TorusSampler,
    diffusion_step,
    equidistribution_discrepancy,
    rho_geometric,
    tau_geometric,
    tau_rotation_closed_form,
)

__all__ = [
    "ExperimentConfig",
    "parse_theta",
    "cmd_tau_curve",
    "cmd_gamma_image",
    "cmd_tau_single",
    "cmd_rho_map",
    "cmd_validate",
    "cmd_translations",
    "cmd_rotate_image",
    "cmd_equidistribution",
    "main",
]

COMMANDS = (
    "tau-curve",
    "gamma-image",
    "tau-single",
    "rho-map",
    "validate",
    "translations",
    "rotate-image",
    "equidistribution",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one run; ``seed`` is echoed into every output."""

    command: str
    n: int = 2
    R: float = 500.0
    kmax: int = 200
    trials: int = 50
    seed: int = 0
    theta: float | None = None
    pythagorean: tuple | None = None
    vmax: int | None = None
    eps: float | None = None
    bins: int = 10
    steps: tuple | None = None
    input: str | None = None
    output: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        for name in ("n", "kmax", "trials", "bins", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.R > 0:
            raise ValueError(f"radius must be positive, got {self.R}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.vmax is not None and self.vmax < 0:
            raise ValueError(f"vmax must be nonnegative, got {self.vmax}")
        if self.eps is not None and not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.theta is not None and self.pythagorean is not None:
            raise ValueError("--theta and --pythagorean are mutually exclusive")
        if (self.theta is not None or self.pythagorean is not None) and self.n != 2:
            raise ValueError("--theta and --pythagorean define planar isometries; use --dim 2")
        if self.steps is not None and any(k < 0 for k in self.steps):
            raise ValueError("steps must be nonnegative")

    def header(self) -> list[str]:
        """Config as ``key=value`` lines in field order."""
        out = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(map(str, v))
            out.append(f"{f.name}={v}")
        return out

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


_THETA_RE = re.compile(
    r"^\s*(?P<sign>[-+]?)\s*(?P<num>\d+(?:\.\d*)?|\.\d+)?\s*\*?\s*pi\s*(?:/\s*(?P<den>\d+(?:\.\d*)?))?\s*$"
)


def parse_theta(text: str) -> float:
    """Angle in radians from ``"0.3"``, ``"pi"``, ``"pi/4"``, ``"-3pi/4"`` or ``"2*pi/5"``."""
    try:
        return float(text)
    except ValueError:
        pass
    m = _THETA_RE.match(text.lower())
    if not m:
        raise ValueError(f"cannot parse angle {text!r}")
    num = float(m["num"]) if m["num"] else 1.0
    den = float(m["den"]) if m["den"] else 1.0
    if den == 0:
        raise ValueError(f"zero denominator in angle {text!r}")
    value = num * math.pi / den
    return -value if m["sign"] == "-" else value


def _parse_triple(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"expected p,q,r, got {text!r}")
    return tuple(int(p) for p in parts)


def _fixed_isometry(cfg: ExperimentConfig) -> Isometry | None:
    if cfg.theta is not None:
        return make_rotation2d(cfg.theta)
    if cfg.pythagorean is not None:
        return make_pythagorean(*cfg.pythagorean)
    return None


def _sequence(cfg: ExperimentConfig, length: int) -> IsometrySequence:
    """The configured isometry repeated, or a sequence sampled from the seed."""
    P = _fixed_isometry(cfg)
    if P is not None:
        return IsometrySequence.repeat(P, length)
    return IsometrySequence.sampled(cfg.n, length, cfg.seed)


def _fmt(x: float) -> str:
    return repr(float(x))


def _csv(cfg: ExperimentConfig, columns: list[str], rows) -> str:
    lines = [f"# {h}" for h in cfg.header()]
    lines.append(",".join(columns))
    lines.extend(",".join(str(c) if isinstance(c, (int, np.integer)) else _fmt(c) for c in r) for r in rows)
    return "\n".join(lines) + "\n"


def _emit(cfg: ExperimentConfig, text: str) -> None:
    if cfg.output:
        atomic_write(cfg.output, text)
    else:
        sys.stdout.write(text)


def _sidecar(path: Path, cfg: ExperimentConfig, extra: dict | None = None) -> None:
    meta = {"config": cfg.as_dict()}
    if extra:
        meta.update(extra)
    atomic_write(path.with_suffix(".json"), json.dumps(meta, indent=2, sort_keys=True) + "\n")


def cmd_tau_curve(cfg: ExperimentConfig) -> int:
    """CSV ``k,tau_mean,tau_stderr`` for ``k = 1..kmax``.

    With ``--theta`` or ``--pythagorean`` the single isometry is iterated and
    one trial suffices; otherwise ``trials`` sequences are sampled from the seed.
    """
    P = _fixed_isometry(cfg)
    if P is not None:
        chain = image_chain(IsometrySequence.repeat(P, cfg.kmax), cfg.R)
        rows = [(k, chain.density(k), 0.0) for k in range(1, cfg.kmax + 1)]
    else:
        curve = rate_curve(cfg.seed, cfg.kmax, cfg.R, cfg.trials, cfg.n, cfg.workers)
        rows = list(curve.entries)
    _emit(cfg, _csv(cfg, ["k", "tau_mean", "tau_stderr"], rows))
    return 0


def _gamma_raster(S: WindowedSet, R: float) -> np.ndarray:
    """Black (0) for members of ``S`` in ``B_R``, white elsewhere; up is +y."""
    mask = S.restrict(R).mask
    # mask is indexed [x, y]; rows run downward in y
    return np.where(mask.T[::-1], 0, 255).astype(np.uint8)


def _with_suffix_tag(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}_{tag}{path.suffix or '.pgm'}")


def cmd_gamma_image(cfg: ExperimentConfig) -> int:
    """One PGM per requested step, black pixels marking the image set."""
    if cfg.n != 2:
        raise ValueError("gamma-image needs --dim 2")
    if not cfg.output:
        raise ValueError("gamma-image needs --out")
    steps = cfg.steps if cfg.steps is not None else (cfg.kmax,)
    chain = image_chain(_sequence(cfg, max(steps)), cfg.R)
    out = Path(cfg.output)
    for k in steps:
        path = out if len(steps) == 1 else _with_suffix_tag(out, f"k{k}")
        atomic_write(path, encode_pnm(_gamma_raster(chain.stages[k], cfg.R)))
        _sidecar(path, cfg, {"k": k, "density": chain.density(k)})
    return 0


def cmd_tau_single(cfg: ExperimentConfig) -> int:
    """Rate of one step by counting, plus every applicable prediction."""
    P = _fixed_isometry(cfg) or sample_isometry(cfg.n, cfg.seed)
    rows = [("counting", rate_of_injectivity(IsometrySequence((P,)), cfg.R), 0.0)]
    if cfg.theta is not None:
        rows.append(("closed_form", tau_rotation_closed_form(cfg.theta), 0.0))
    if P.denominator is not None:
        rows.append(("residue", residue_rate(P), 0.0))
    else:
        est = tau_geometric(P, TorusSampler(seed=cfg.seed))
        rows.append(("geometric", est.value, est.halfwidth))
    lines = [f"# {h}" for h in cfg.header()] + ["method,tau,halfwidth"]
    lines += [f"{m},{_fmt(t)},{_fmt(w)}" for m, t, w in rows]
    _emit(cfg, "\n".join(lines) + "\n")
    return 0


def cmd_rho_map(cfg: ExperimentConfig) -> int:
    """CSV ``v1,...,vn,rho`` of the difference frequencies of ``Gamma_kmax``."""
    vmax = 10 if cfg.vmax is None else cfg.vmax
    *_, S = image_chain(_sequence(cfg, cfg.kmax), cfg.R + vmax).stages
    h = diff_histogram(S, vmax)
    cols = [f"v{i + 1}" for i in range(cfg.n)] + ["rho"]
    rows = [(*v, f) for v, f in sorted(h.freqs.items())]
    _emit(cfg, _csv(cfg, cols, rows))
    return 0


def cmd_translations(cfg: ExperimentConfig) -> int:
    """CSV ``v1,...,vn,defect`` of the eps-translations of ``Gamma_kmax``."""
    search = 50 if cfg.vmax is None else cfg.vmax
    eps = 0.05 if cfg.eps is None else cfg.eps
    *_, S = image_chain(_sequence(cfg, cfg.kmax), cfg.R).stages
    defects = translation_defects(S, search)
    cols = [f"v{i + 1}" for i in range(cfg.n)] + ["defect"]
    rows = [(*v, d) for v, d in sorted(defects.items()) if d < eps]
    _emit(cfg, _csv(cfg, cols, rows))
    return 0


def cmd_equidistribution(cfg: ExperimentConfig) -> int:
    """Discrepancy of ``P x mod Z^n`` over ``B_R`` for one isometry."""
    P = _fixed_isometry(cfg) or sample_isometry(cfg.n, cfg.seed)
    d = equidistribution_discrepancy(P, integer_ball(cfg.R, cfg.n), cfg.bins)
    lines = [f"# {h}" for h in cfg.header()] + ["discrepancy", _fmt(d)]
    _emit(cfg, "\n".join(lines) + "\n")
    return 0


def cmd_rotate_image(cfg: ExperimentConfig) -> int:
    """Rotate a PGM/PPM raster through ``kmax`` discretized rotations."""
    if cfg.n != 2:
        raise ValueError("rotate-image needs --dim 2")
    if not cfg.input or not cfg.output:
        raise ValueError("rotate-image needs --in and --out")
    image = read_pnm(cfg.input)
    seq = _sequence(cfg, cfg.kmax)
    out, stats = rotate_raster(image, seq)
    path = Path(cfg.output)
    atomic_write(path, encode_pnm(out))
    _sidecar(path, cfg, {"stats": dataclasses.asdict(stats)})
    dens = " ".join(f"{d:.4f}" for d in stats.step_density)
    print(
        f"hole_fraction={stats.hole_fraction:.6f} "
        f"collision_fraction={stats.collision_fraction:.6f} step_density={dens}"
    )
    return 0


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    expected: str
    tolerance: str
    passed: bool

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{self.name}  measured={self.measured:.6g}  expected={self.expected}  tol={self.tolerance}  {tag}"


def validation_checks(cfg: ExperimentConfig) -> list[Check]:
    """Cross-validation of counting, closed forms and torus predictions.

    Sizes follow ``cfg.R``; the decay curve uses ``cfg.trials`` and ``cfg.kmax``.
    """
    checks = []
    R = cfg.R
    sampler = TorusSampler(seed=cfg.seed)

    # rates of one rotation three ways
    angles = [cfg.theta] if cfg.theta is not None else [math.pi / 4, math.pi / 6]
    for th in angles:
        P = make_rotation2d(th)
        closed = tau_rotation_closed_form(th)
        count = rate_of_injectivity(IsometrySequence((P,)), R)
        checks.append(Check(f"tau_counting[{th:.6f}]", count, _fmt(closed), "0.01", abs(count - closed) <= 0.01))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            geo = tau_geometric(P, sampler)
        tol = max(geo.halfwidth, 1e-12)
        checks.append(
            Check(f"tau_geometric[{th:.6f}]", geo.value, _fmt(closed), f"{tol:.3g}", abs(geo.value - closed) <= tol)
        )

    # exact rational oracle
    triple = cfg.pythagorean or (3, 4, 5)
    Pq = make_pythagorean(*triple)
    exact = residue_rate(Pq)
    # the image is periodic modulo q^2 Z^n, so a box of side m q^2 sees the exact density
    q2 = triple[2] ** 2
    m = max(1, round((2 * R - 1) / q2))
    m += (m * q2) % 2 == 0
    Rq = (m * q2 + 1) // 2
    count = rate_of_injectivity(IsometrySequence((Pq,)), Rq)
    checks.append(Check(f"tau_residue[{triple}]", count, _fmt(exact), "0", count == exact))

    # one generic step: difference frequencies, Bohr mean, sandwich, Minkowski
    vmax = 20 if cfg.vmax is None else cfg.vmax
    P = sample_isometry(2, cfg.seed)
    chain = image_chain(IsometrySequence((P,)), R + vmax)
    G0, G1 = chain.stages
    h1 = diff_histogram(G1, vmax)
    h0 = diff_histogram(G0, vmax)
    worst = 0.0
    for v in [(1, 0), (0, 1), (1, 1), (2, 1), (3, 2), (5, 0), (4, -3)]:
        geo = rho_geometric(P, v, sampler).value
        worst = max(worst, abs(geo - diff_frequency(G1, v)))
    checks.append(Check("rho_counting_vs_geometric", worst, "0", "0.02", worst <= 0.02))
    bm = bohr_mean(h1)
    checks.append(Check("bohr_mean", bm, _fmt(h1.base_density), "0.02", abs(bm - h1.base_density) <= 0.02))
    lo, up = diffusion_step(h0, P)
    ratio = h0.base_density / h1.base_density
    slack_lo = max(ratio * lo[u] - h1[u] for u in lo.freqs)
    slack_up = max(h1[u] - ratio * up[u] for u in up.freqs)
    checks.append(Check("sandwich_lower", slack_lo, "<=0", "0.03", slack_lo <= 0.03))
    checks.append(Check("sandwich_upper", slack_up, "<=0", "0.03", slack_up <= 0.03))
    D = chain.density(1)
    _, rho = minkowski_witness(G1, D)
    checks.append(Check("minkowski", rho, f">={D / 2:.6g}", "0.02", rho >= D / 2 - 0.02))

    # equidistribution contrast
    ball = integer_ball(R, 2)
    d_gen = equidistribution_discrepancy(P, ball, cfg.bins)
    d_rat = equidistribution_discrepancy(Pq, ball, cfg.bins)
    checks.append(Check("discrepancy_generic", d_gen, "<0.1", "-", d_gen < 0.1))
    checks.append(Check(f"discrepancy_rational[{triple}]", d_rat, ">1", "-", d_rat > 1.0))

    # decay of the mean rate
    curve = rate_curve(cfg.seed, cfg.kmax, R, cfg.trials, 2, cfg.workers)
    tau, se = curve.tau, curve.stderr
    excess = float(np.max(tau[1:] - tau[:-1] - 2 * se[1:] - 2 / R)) if len(tau) > 1 else 0.0
    checks.append(Check("decay_monotone", excess, "<=0", "2*stderr+2/R", excess <= 0))
    k10 = min(10, cfg.kmax)
    checks.append(
        Check("decay_ratio", tau[-1] / tau[k10 - 1], "<0.5", "-", tau[-1] < 0.5 * tau[k10 - 1])
    )
    return checks


def cmd_validate(cfg: ExperimentConfig) -> int:
    checks = validation_checks(cfg)
    lines = [f"# {h}" for h in cfg.header()] + [c.line() for c in checks]
    failed = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed")
    _emit(cfg, "\n".join(lines) + "\n")
    return 1 if failed else 0


_HANDLERS = {
    "tau-curve": cmd_tau_curve,
    "gamma-image": cmd_gamma_image,
    "tau-single": cmd_tau_single,
    "rho-map": cmd_rho_map,
    "validate": cmd_validate,
    "translations": cmd_translations,
    "rotate-image": cmd_rotate_image,
    "equidistribution": cmd_equidistribution,
}

# Lighter defaults for validate: minutes become seconds.
_VALIDATE_DEFAULTS = {"R": 200.0, "trials": 10, "kmax": 60}


def _steps(text: str) -> tuple:
    return tuple(int(s) for s in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isodisc", description="Experiments on discretized isometries of Z^n."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=_HANDLERS[name].__doc__.splitlines()[0] if _HANDLERS[name].__doc__ else None)
        p.add_argument("--dim", type=int, default=2, dest="n")
        p.add_argument("--radius", type=float, default=None, dest="R")
        p.add_argument("--kmax", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--theta", type=str, default=None, help="radians, or a form like pi/4")
        p.add_argument("--pythagorean", type=str, default=None, metavar="p,q,r")
        p.add_argument("--vmax", type=int, default=None)
        p.add_argument("--eps", type=float, default=None)
        p.add_argument("--bins", type=int, default=10)
        p.add_argument("--steps", type=str, default=None, metavar="k1,k2,...")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--in", dest="input", default=None)
        p.add_argument("--out", dest="output", default=None)
    return parser


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    base = {"R": 500.0, "trials": 50, "kmax": 200}
    if ns.command == "validate":
        base = dict(_VALIDATE_DEFAULTS)
    elif ns.command in ("rotate-image",):
        base["kmax"] = 10
    elif ns.command in ("rho-map", "translations", "gamma-image"):
        base["kmax"] = 1
    return ExperimentConfig(
        command=ns.command,
        n=ns.n,
        R=ns.R if ns.R is not None else base["R"],
        kmax=ns.kmax if ns.kmax is not None else base["kmax"],
        trials=ns.trials if ns.trials is not None else base["trials"],
        seed=ns.seed,
        theta=parse_theta(ns.theta) if ns.theta is not None else None,
        pythagorean=_parse_triple(ns.pythagorean) if ns.pythagorean is not None else None,
        vmax=ns.vmax,
        eps=ns.eps,
        bins=ns.bins,
        steps=_steps(ns.steps) if ns.steps is not None else None,
        input=ns.input,
        output=ns.output,
        workers=ns.workers,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        if cfg.pythagorean is not None:
            make_pythagorean(*cfg.pythagorean)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        return _HANDLERS[cfg.command](cfg)
    except (OSError, RasterFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
