"""Run configuration files: INI sections with a fixed, validated key set.

The schema is documented in the README; unknown sections or keys are
rejected.  ``parse_config`` and ``RunConfig.to_ini`` round-trip: parsing the
serialized form reproduces the same configuration.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

from .errors import ConfigError
from .grid import GridSpec
from .ic import PHI_KINDS, SIGMA_KINDS
from .potentials import AlphaSpec, ModelParams
from .solver import SolverConfig

__all__ = ["RunConfig", "WsuOptions", "parse_config", "parse_config_file"]

_ALLOWED = {
    "domain": {"dim", "cells", "lengths"},
    "time": {"dt", "dt_min", "dt_max", "t_end", "report_every"},
    "model": {
        "chi",
        "lambda",
        "epsilon",
        "alpha_type",
        "alpha_value",
        "alpha_ell",
        "alpha_p",
        "alpha_sigma_box",
    },
    "ic": {
        "phi_type",
        "phi_value",
        "phi_amplitude",
        "phi_mean",
        "phi_seed",
        "phi_center",
        "phi_width",
        "sigma_type",
        "sigma_value",
        "sigma_center",
        "sigma_center_y",
        "sigma_width",
        "sigma_mass",
        "sigma_seed",
        "sigma_floor",
    },
    "solver": {"newton_tol", "newton_max_iters", "krylov_tol", "delta_safe"},
    "output": {"dir", "snapshot_every", "snapshot_format", "snapshot_fields"},
    "wsu": {
        "refine",
        "cmax",
        "m_override",
        "sigma_perturb",
        "window_lo",
        "window_hi",
    },
}

_IC_KEYS = {
    ("phi", "constant"): {"value"},
    ("phi", "random_perturbation"): {"amplitude", "mean", "seed"},
    ("phi", "tanh_interface"): {"center", "width"},
    ("sigma", "constant"): {"value"},
    ("sigma", "gaussian_bump"): {"center", "center_y", "width", "mass"},
    ("sigma", "random_positive"): {"seed", "floor"},
}


@dataclass(frozen=True)
class WsuOptions:
    refine: int = 4
    cmax: float = 50.0
    m_override: float | None = None
    sigma_perturb: float = 0.0
    window_lo: float | None = None
    window_hi: float | None = None


@dataclass
class RunConfig:
    grid: GridSpec
    dt: float
    t_end: float
    report_every: float
    dt_min: float | None = None
    dt_max: float | None = None
    chi: float = 1.0
    lam: float = 0.0
    eps: float = 0.0
    alpha: AlphaSpec = field(default_factory=lambda: AlphaSpec.constant(0.0))
    newton_tol: float = 1e-10
    newton_max_iters: int = 50
    krylov_tol: float = 1e-10
    delta_safe: float = 1e-6
    phi_ic: dict = field(default_factory=lambda: {"type": "constant", "value": 0.0})
    sigma_ic: dict = field(default_factory=lambda: {"type": "constant", "value": 1.0})
    out_dir: str | None = None
    snapshot_every: int = 0
    snapshot_format: str = "text"
    snapshot_fields: tuple[str, ...] = ("phi", "sigma")
    wsu: WsuOptions | None = None

    def model_params(self) -> ModelParams:
        return ModelParams(
            chi=self.chi,
            lam=self.lam,
            eps=self.eps,
            alpha=self.alpha,
            delta_safe=self.delta_safe,
        )

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            dt=self.dt,
            dt_min=self.dt_min,
            dt_max=self.dt_max,
            newton_tol=self.newton_tol,
            newton_max_iters=self.newton_max_iters,
            krylov_tol=self.krylov_tol,
        )

    def to_ini(self) -> str:
        out = io.StringIO()

        def section(name: str, pairs: list[tuple[str, object]]) -> None:
            out.write(f"[{name}]\n")
            for k, v in pairs:
                if v is None:
                    continue
                out.write(f"{k} = {_fmt(v)}\n")
            out.write("\n")

        section(
            "domain",
            [
                ("dim", self.grid.dim),
                ("cells", ", ".join(str(c) for c in self.grid.cells)),
                ("lengths", ", ".join(repr(L) for L in self.grid.lengths)),
            ],
        )
        section(
            "time",
            [
                ("dt", self.dt),
                ("dt_min", self.dt_min),
                ("dt_max", self.dt_max),
                ("t_end", self.t_end),
                ("report_every", self.report_every),
            ],
        )
        model_pairs: list[tuple[str, object]] = [
            ("chi", self.chi),
            ("lambda", self.lam),
            ("epsilon", self.eps),
            ("alpha_type", self.alpha.kind),
        ]
        if self.alpha.kind == "constant":
            model_pairs.append(("alpha_value", self.alpha.value))
        else:
            model_pairs += [
                ("alpha_ell", self.alpha.ell),
                ("alpha_p", self.alpha.p),
                ("alpha_sigma_box", self.alpha.sigma_box),
            ]
        section("model", model_pairs)
        ic_pairs: list[tuple[str, object]] = [("phi_type", self.phi_ic["type"])]
        ic_pairs += [
            (f"phi_{k}", v) for k, v in sorted(self.phi_ic.items()) if k != "type"
        ]
        ic_pairs.append(("sigma_type", self.sigma_ic["type"]))
        ic_pairs += [
            (f"sigma_{k}", v) for k, v in sorted(self.sigma_ic.items()) if k != "type"
        ]
        section("ic", ic_pairs)
        section(
            "solver",
            [
                ("newton_tol", self.newton_tol),
                ("newton_max_iters", self.newton_max_iters),
                ("krylov_tol", self.krylov_tol),
                ("delta_safe", self.delta_safe),
            ],
        )
        section(
            "output",
            [
                ("dir", self.out_dir),
                ("snapshot_every", self.snapshot_every),
                ("snapshot_format", self.snapshot_format),
                ("snapshot_fields", ",".join(self.snapshot_fields)),
            ],
        )
        if self.wsu is not None:
            section(
                "wsu",
                [
                    ("refine", self.wsu.refine),
                    ("cmax", self.wsu.cmax),
                    ("m_override", self.wsu.m_override),
                    ("sigma_perturb", self.wsu.sigma_perturb),
                    ("window_lo", self.wsu.window_lo),
                    ("window_hi", self.wsu.window_hi),
                ],
            )
        return out.getvalue()


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _get(cp: configparser.ConfigParser, section: str, key: str, conv, default=None):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.replace(",", " ").split())


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.replace(",", " ").split())


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"invalid config syntax: {exc}") from None

    for section in cp.sections():
        if section not in _ALLOWED:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp.options(section):
            if key not in _ALLOWED[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    for required in ("domain", "time"):
        if not cp.has_section(required):
            raise ConfigError(f"missing required section [{required}]")

    dim = _get(cp, "domain", "dim", int)
    cells = _get(cp, "domain", "cells", _ints)
    lengths = _get(cp, "domain", "lengths", _floats)
    if cells is None or lengths is None:
        raise ConfigError("[domain] needs both cells and lengths")
    if dim is not None and dim != len(cells):
        raise ConfigError(f"[domain] dim = {dim} but {len(cells)} cell counts given")
    try:
        grid = GridSpec(cells, lengths)
    except ValueError as exc:
        raise ConfigError(f"[domain]: {exc}") from None

    dt = _get(cp, "time", "dt", float)
    t_end = _get(cp, "time", "t_end", float)
    report_every = _get(cp, "time", "report_every", float)
    if dt is None or t_end is None or report_every is None:
        raise ConfigError("[time] needs dt, t_end and report_every")
    if dt <= 0.0 or report_every <= 0.0 or t_end < 0.0:
        raise ConfigError("[time] needs dt > 0, report_every > 0 and t_end >= 0")

    alpha_type = _get(cp, "model", "alpha_type", str, "constant")
    if alpha_type == "constant":
        alpha = AlphaSpec.constant(_get(cp, "model", "alpha_value", float, 0.0))
    elif alpha_type == "logistic":
        alpha = AlphaSpec.logistic(
            ell=_get(cp, "model", "alpha_ell", float, 1.0),
            p=_get(cp, "model", "alpha_p", float, 1.0),
            sigma_box=_get(cp, "model", "alpha_sigma_box", float, 10.0),
        )
    else:
        raise ConfigError(f"[model] alpha_type must be constant or logistic, got {alpha_type!r}")

    phi_type = _get(cp, "ic", "phi_type", str, "constant")
    sigma_type = _get(cp, "ic", "sigma_type", str, "constant")
    if phi_type not in PHI_KINDS:
        raise ConfigError(f"[ic] phi_type must be one of {PHI_KINDS}, got {phi_type!r}")
    if sigma_type not in SIGMA_KINDS:
        raise ConfigError(f"[ic] sigma_type must be one of {SIGMA_KINDS}, got {sigma_type!r}")

    def ic_dict(prefix: str, kind: str) -> dict:
        d: dict = {"type": kind}
        for key in _IC_KEYS[(prefix, kind)]:
            conv = int if key == "seed" else float
            val = _get(cp, "ic", f"{prefix}_{key}", conv)
            if val is not None:
                d[key] = val
        return d

    snapshot_format = _get(cp, "output", "snapshot_format", str, "text")
    if snapshot_format not in ("text", "binary"):
        raise ConfigError("[output] snapshot_format must be text or binary")
    snap_fields_raw = _get(cp, "output", "snapshot_fields", str, "phi,sigma")
    snapshot_fields = tuple(s.strip() for s in snap_fields_raw.split(",") if s.strip())
    for f_ in snapshot_fields:
        if f_ not in ("phi", "sigma", "mu"):
            raise ConfigError(f"[output] snapshot_fields: unknown field {f_!r}")

    wsu = None
    if cp.has_section("wsu"):
        wsu = WsuOptions(
            refine=_get(cp, "wsu", "refine", int, 4),
            cmax=_get(cp, "wsu", "cmax", float, 50.0),
            m_override=_get(cp, "wsu", "m_override", float),
            sigma_perturb=_get(cp, "wsu", "sigma_perturb", float, 0.0),
            window_lo=_get(cp, "wsu", "window_lo", float),
            window_hi=_get(cp, "wsu", "window_hi", float),
        )
        if wsu.refine < 1:
            raise ConfigError("[wsu] refine must be >= 1")

    try:
        cfg = RunConfig(
            grid=grid,
            dt=dt,
            t_end=t_end,
            report_every=report_every,
            dt_min=_get(cp, "time", "dt_min", float),
            dt_max=_get(cp, "time", "dt_max", float),
            chi=_get(cp, "model", "chi", float, 1.0),
            lam=_get(cp, "model", "lambda", float, 0.0),
            eps=_get(cp, "model", "epsilon", float, 0.0),
            alpha=alpha,
            newton_tol=_get(cp, "solver", "newton_tol", float, 1e-10),
            newton_max_iters=_get(cp, "solver", "newton_max_iters", int, 50),
            krylov_tol=_get(cp, "solver", "krylov_tol", float, 1e-10),
            delta_safe=_get(cp, "solver", "delta_safe", float, 1e-6),
            phi_ic=ic_dict("phi", phi_type),
            sigma_ic=ic_dict("sigma", sigma_type),
            out_dir=_get(cp, "output", "dir", str),
            snapshot_every=_get(cp, "output", "snapshot_every", int, 0),
            snapshot_format=snapshot_format,
            snapshot_fields=snapshot_fields,
            wsu=wsu,
        )
        cfg.model_params()
        cfg.solver_config()
    except (ValueError, ConfigError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def parse_config_file(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
