"""Plain ``key = value`` run configuration with four sections.

    [solver]       L, R, T_max, dx, cfl, stride, max_nodes, track_antiderivative,
                   refinement, output_dir
    [coefficient]  family, k0, r0, gamma0, k_peak, amplitude, lip
    [data]         preset, amplitude
    [audits]       one boolean per audit name, toggling it from the default set

``#`` starts a comment.  Errors name the offending key and line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .coefficients import FAMILIES, CoefficientError, CoefficientSpec, wiggle_amplitude_for_lip
from .diagnostics.suite import AUDITS, DEFAULT_AUDITS
from .initial_data import PRESETS
from .solver import DEFAULT_MAX_NODES, SimulationConfig, SolverError

__all__ = ["ConfigError", "RunConfig", "parse_config", "serialize", "load_config", "PARAMETERS"]


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    L: float = 1.0
    R: float | None = None
    T_max: float = 10.0
    dx: float = 0.05
    cfl: float = 0.5
    stride: int = 10
    max_nodes: int = DEFAULT_MAX_NODES
    track_antiderivative: bool = True
    refinement: bool = False
    output_dir: str = "wavedecay-out"
    family: str = "constant"
    k0: float = 1.0
    r0: float | None = None
    gamma0: float = 0.0
    k_peak: float = 2.0
    amplitude: float = 0.0
    preset: str = "bump-velocity"
    data_amplitude: float = 1.0
    audits: tuple[str, ...] = field(default=DEFAULT_AUDITS)

    def coefficient(self) -> CoefficientSpec:
        return CoefficientSpec(self.family, self.k0, self.r0, self.gamma0, self.k_peak, self.amplitude)

    @property
    def radius(self) -> float:
        return self.R if self.R is not None else 2.0 * self.coefficient().radius

    def simulation(self) -> SimulationConfig:
        return SimulationConfig(
            L=self.L, R=self.R, T_max=self.T_max, dx=self.dx, cfl=self.cfl,
            coefficient=self.coefficient(), preset=self.preset, amplitude=self.data_amplitude,
            sample_stride=self.stride, max_nodes=self.max_nodes,
            track_antiderivative=self.track_antiderivative,
        )


# (section, key) -> (RunConfig attribute, parser)
def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("value must be finite")
    return v


def _int(s: str) -> int:
    f = float(s)
    if f != int(f):
        raise ValueError("value must be an integer")
    return int(f)


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError("value must be true or false")


def _opt_float(s: str) -> float | None:
    return None if s.lower() in ("", "none", "default") else _float(s)


def _choice(options):
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s
    return parse


PARAMETERS = {
    ("solver", "L"): ("L", _float),
    ("solver", "R"): ("R", _opt_float),
    ("solver", "T_max"): ("T_max", _float),
    ("solver", "dx"): ("dx", _float),
    ("solver", "cfl"): ("cfl", _float),
    ("solver", "stride"): ("stride", _int),
    ("solver", "max_nodes"): ("max_nodes", _int),
    ("solver", "track_antiderivative"): ("track_antiderivative", _bool),
    ("solver", "refinement"): ("refinement", _bool),
    ("solver", "output_dir"): ("output_dir", str),
    ("coefficient", "family"): ("family", _choice(FAMILIES)),
    ("coefficient", "k0"): ("k0", _float),
    ("coefficient", "r0"): ("r0", _opt_float),
    ("coefficient", "gamma0"): ("gamma0", _float),
    ("coefficient", "k_peak"): ("k_peak", _float),
    ("coefficient", "amplitude"): ("amplitude", _float),
    ("coefficient", "lip"): ("lip", _float),
    ("data", "preset"): ("preset", _choice(PRESETS)),
    ("data", "amplitude"): ("data_amplitude", _float),
}
SECTIONS = ("solver", "coefficient", "data", "audits")


def _validate(values: dict, lines: dict) -> None:
    def fail(attr, msg):
        key = next((k for (s, k), (a, _) in PARAMETERS.items() if a == attr), attr)
        raise ConfigError(msg, key, lines.get(attr))

    if not 0.0 <= values["gamma0"] < 1.0:
        fail("gamma0", f"gamma0 = {values['gamma0']} must lie in [0, 1)")
    if not 0.0 < values["cfl"] < 1.0:
        fail("cfl", f"cfl = {values['cfl']} must lie in (0, 1)")
    for attr in ("dx", "L", "k0"):
        if not values[attr] > 0:
            fail(attr, f"{attr} must be positive")
    if values["T_max"] < 0:
        fail("T_max", "T_max must be non-negative")
    if values["stride"] < 1:
        fail("stride", "stride must be at least 1")
    if values["max_nodes"] < 9:
        fail("max_nodes", "max_nodes must be at least 9")
    if values["r0"] is not None and not values["r0"] > 0:
        fail("r0", "r0 must be positive")
    r0 = CoefficientSpec(values["family"], values["k0"], values["r0"]).radius
    R = values["R"]
    if R is not None and not R > r0:
        fail("R", f"R = {R} must exceed r0 = {r0}")


def parse_config(text: str) -> RunConfig:
    section = None
    values = {f.name: f.default for f in fields(RunConfig)}
    lines: dict[str, int] = {}
    seen: set[tuple[str, str]] = set()
    toggles: dict[str, bool] = {}
    lip = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", None, no)
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", None, no)
        key, value = (p.strip() for p in line.split("=", 1))
        if section is None:
            raise ConfigError("key outside of any section", key, no)
        if (section, key) in seen:
            raise ConfigError("duplicate key", key, no)
        seen.add((section, key))
        if section == "audits":
            if key not in AUDITS:
                raise ConfigError(f"unknown audit; choose from {', '.join(AUDITS)}", key, no)
            try:
                toggles[key] = _bool(value)
            except ValueError as exc:
                raise ConfigError(str(exc), key, no) from None
            continue
        if (section, key) not in PARAMETERS:
            raise ConfigError(f"unknown key in [{section}]", key, no)
        attr, conv = PARAMETERS[(section, key)]
        try:
            parsed = conv(value)
        except ValueError as exc:
            raise ConfigError(f"cannot parse {value!r}: {exc}", key, no) from None
        if attr == "lip":
            lip = (parsed, no)
            continue
        values[attr] = parsed
        lines[attr] = no

    _validate(values, lines)
    if lip is not None:
        if values["family"] != "lipschitz":
            raise ConfigError("lip applies only to the lipschitz family", "lip", lip[1])
        if lip[0] < 0:
            raise ConfigError("lip must be non-negative", "lip", lip[1])
        r0 = CoefficientSpec("lipschitz", values["k0"], values["r0"]).radius
        values["amplitude"] = wiggle_amplitude_for_lip(lip[0], r0)
    enabled = [a for a in AUDITS if toggles.get(a, a in DEFAULT_AUDITS)]
    values["audits"] = tuple(enabled)
    try:
        cfg = RunConfig(**values)
        cfg.simulation()
    except (SolverError, CoefficientError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(cfg: RunConfig) -> str:
    out = []
    current = None
    for (section, key), (attr, _) in PARAMETERS.items():
        if attr == "lip":
            continue
        if section != current:
            if current is not None:
                out.append("")
            out.append(f"[{section}]")
            current = section
        out.append(f"{key} = {_fmt(getattr(cfg, attr))}")
    out.append("")
    out.append("[audits]")
    for name in AUDITS:
        out.append(f"{name} = {_fmt(name in cfg.audits)}")
    return "\n".join(out) + "\n"


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def with_parameter(cfg: RunConfig, key: str, value: str) -> RunConfig:
    """Return ``cfg`` with one parameter replaced, re-validated through the parser.

    ``key`` is ``section.key`` or a bare key that names exactly one parameter.
    """
    if "." in key:
        section, name = key.split(".", 1)
        matches = [(section, name)] if (section, name) in PARAMETERS else []
    else:
        matches = [sk for sk in PARAMETERS if sk[1] == key]
    if len(matches) != 1:
        raise ConfigError("parameter is unknown or ambiguous (use section.key)", key)
    section, name = matches[0]
    text = serialize(cfg)
    lines = text.splitlines()
    cur = None
    for i, line in enumerate(lines):
        s = line.strip()
        if s.startswith("["):
            cur = s[1:-1]
        elif cur == section and s.split("=", 1)[0].strip() == name:
            lines[i] = f"{name} = {value}"
            break
    else:
        lines.insert(lines.index(f"[{section}]") + 1, f"{name} = {value}")
    return parse_config("\n".join(lines) + "\n")
