"""Run configuration: flat ``section.key = value`` text files with overrides.

Every field carries a default. A loaded configuration remembers which
fields were set explicitly; the rest are reported as defaulted in every
output header. Angles are given in degrees.
"""
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

from .basestate import (BOUNDARY_TYPES, DEFAULT_CRITICAL_INTENSITY, TAXIS_FORMS,
                        SuspensionParams, calibrate_critical_intensity, make_taxis)
from .errors import ConfigError
from .radiative import DEFAULT_N_MU, DEFAULT_N_PHI, DEFAULT_N_REFRACT, OpticalConfig
from .stability.types import EIGEN_TARGETS, MOMENTUM_SIGMA_FORMS, StabilityConfig

DEFAULTED_MARK = "# defaulted"


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_gc(text):
    t = text.strip().lower()
    return "auto" if t == "auto" else float(t)


def _parse_floats(text):
    t = text.strip()
    if not t:
        return ()
    return tuple(float(v) for v in t.replace(",", " ").split())


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


@dataclass(frozen=True)
class Field:
    key: str
    parse: object
    default: object
    choices: Optional[Tuple[str, ...]] = None


FIELDS: Tuple[Field, ...] = (
    Field("optical.kappa", float, 1.0),
    Field("optical.omega", float, 0.4),
    Field("optical.theta_i", float, 0.0),
    Field("optical.I_t", float, 1.0),
    Field("optical.n_refract", float, DEFAULT_N_REFRACT),
    Field("taxis.form", str, "two_harmonic", tuple(TAXIS_FORMS)),
    Field("taxis.G_c", _parse_gc, "auto"),
    Field("taxis.z_target", float, 0.5),
    Field("taxis.a", float, 0.8),
    Field("taxis.b", float, 0.1),
    Field("taxis.amplitude", float, 0.8),
    Field("taxis.steepness", float, 4.0),
    Field("suspension.V_c", float, 15.0),
    Field("suspension.Pr", float, 5.0),
    Field("suspension.Le", float, 4.0),
    Field("suspension.R_b", float, 0.0),
    Field("suspension.R_T", float, 100.0),
    Field("suspension.top", str, "stress_free", BOUNDARY_TYPES),
    Field("suspension.bottom", str, "rigid", BOUNDARY_TYPES),
    Field("basestate.grid_size", int, 257),
    Field("stability.eigen_target", str, "R_b", EIGEN_TARGETS),
    Field("stability.k_min", float, 0.5),
    Field("stability.k_max", float, 8.0),
    Field("stability.n_k", int, 31),
    Field("stability.branch_count", int, 1),
    Field("stability.n_grid", int, 128),
    Field("stability.n_mu", int, DEFAULT_N_MU),
    Field("stability.n_phi", int, DEFAULT_N_PHI),
    Field("stability.newton_tol", float, 1e-10),
    Field("stability.max_newton", int, 50),
    Field("stability.chunk_size", int, 8),
    Field("stability.collimated_cos_factor", _parse_bool, True),
    Field("stability.momentum_sigma", str, "prandtl", MOMENTUM_SIGMA_FORMS),
    Field("stability.detect_oscillatory", _parse_bool, True),
    Field("sweep.axis", str, "theta_i"),
    Field("sweep.values", _parse_floats, ()),
    Field("run.workers", int, 1),
    Field("output.path", str, "-"),
)
FIELD_MAP: Dict[str, Field] = {f.key: f for f in FIELDS}

# execution controls that cannot change any result; kept out of output headers
# so files written with different worker counts compare byte for byte
EXECUTION_KEYS = ("run.workers",)

SWEEP_AXES = {
    "theta_i": "optical.theta_i",
    "omega": "optical.omega",
    "kappa": "optical.kappa",
    "V_c": "suspension.V_c",
    "Le": "suspension.Le",
    "R_T": "suspension.R_T",
}


def _convert(key, raw):
    try:
        f = FIELD_MAP[key]
    except KeyError:
        raise ConfigError(f"unknown configuration key {key!r}") from None
    if not isinstance(raw, str):
        raw = _fmt(raw)
    try:
        value = f.parse(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    if f.choices is not None and value not in f.choices:
        raise ConfigError(f"{key} must be one of {f.choices}, got {value!r}")
    return value


class RunConfig:
    """Values for every field in ``FIELDS`` plus the set of explicit keys."""

    def __init__(self, values: Optional[Dict[str, object]] = None, explicit: Iterable[str] = ()):
        self._values = {f.key: f.default for f in FIELDS}
        self._explicit = set()
        for key, raw in (values or {}).items():
            self._values[key] = _convert(key, raw)
            self._explicit.add(key)
        for key in explicit:
            if key not in FIELD_MAP:
                raise ConfigError(f"unknown configuration key {key!r}")
            self._explicit.add(key)
        self.validate()

    # ---- access
    def __getitem__(self, key):
        try:
            return self._values[key]
        except KeyError:
            raise ConfigError(f"unknown configuration key {key!r}") from None

    def defaulted(self, key):
        return key not in self._explicit

    def items(self):
        return [(f.key, self._values[f.key]) for f in FIELDS]

    def __eq__(self, other):
        return (isinstance(other, RunConfig) and self._values == other._values
                and self._explicit == other._explicit)

    def __repr__(self):
        return f"RunConfig({len(self._explicit)} explicit keys)"

    def updated(self, changes: Dict[str, object]) -> "RunConfig":
        values = {k: self._values[k] for k in self._explicit}
        values.update(changes)
        return RunConfig(values)

    # ---- validation
    def validate(self):
        v = self._values
        if not 0.0 <= v["optical.theta_i"] <= 80.0:
            raise ConfigError("optical.theta_i must lie in [0, 80] degrees")
        if not 0.0 <= v["optical.omega"] <= 1.0:
            raise ConfigError("optical.omega must lie in [0, 1]")
        if not v["optical.kappa"] > 0:
            raise ConfigError("optical.kappa must be positive")
        if not v["optical.I_t"] > 0:
            raise ConfigError("optical.I_t must be positive")
        if not v["optical.n_refract"] >= 1.0:
            raise ConfigError("optical.n_refract must be >= 1")
        gc = v["taxis.G_c"]
        if gc != "auto" and not gc > 0:
            raise ConfigError("taxis.G_c must be positive or 'auto'")
        if not 0.0 < v["taxis.z_target"] < 1.0:
            raise ConfigError("taxis.z_target must lie in (0, 1)")
        if v["suspension.V_c"] < 0:
            raise ConfigError("suspension.V_c must be >= 0")
        for key in ("suspension.Pr", "suspension.Le", "stability.newton_tol"):
            if not v[key] > 0:
                raise ConfigError(f"{key} must be positive")
        if not 0 < v["stability.k_min"] < v["stability.k_max"] <= 20:
            raise ConfigError("need 0 < stability.k_min < stability.k_max <= 20")
        minimums = {"basestate.grid_size": 64,
                    "stability.n_k": 3, "stability.branch_count": 1, "stability.n_grid": 16,
                    "stability.n_mu": 2, "stability.n_phi": 1, "stability.max_newton": 1,
                    "stability.chunk_size": 1, "run.workers": 1}
        for key, lo in minimums.items():
            if v[key] < lo:
                raise ConfigError(f"{key} must be >= {lo}")
        if v["stability.n_mu"] % 2:
            raise ConfigError("stability.n_mu must be even")
        axis = v["sweep.axis"]
        if axis not in SWEEP_AXES and axis not in SWEEP_AXES.values():
            raise ConfigError(f"sweep.axis must be one of {sorted(SWEEP_AXES)}")

    # ---- text form
    def to_text(self) -> str:
        lines = []
        for key, value in self.items():
            mark = f"  {DEFAULTED_MARK}" if self.defaulted(key) else ""
            lines.append(f"{key} = {_fmt(value)}{mark}")
        return "\n".join(lines) + "\n"

    def header_lines(self) -> List[str]:
        return [line for line in self.to_text().splitlines()
                if line.split("=", 1)[0].strip() not in EXECUTION_KEYS]

    @classmethod
    def from_text(cls, text: str, overrides: Iterable[str] = ()) -> "RunConfig":
        """Parse a configuration file; ``overrides`` are ``key=value`` strings that win."""
        values, defaulted = {}, set()
        for lineno, line in enumerate(text.splitlines(), 1):
            body = line.strip()
            if body.startswith("# "):
                body = body[2:].strip()     # echoed output headers
                if "=" not in body or body.split("=", 1)[0].strip() not in FIELD_MAP:
                    continue
            if not body or body.startswith("#"):
                continue
            if body.endswith(DEFAULTED_MARK):
                body = body[:-len(DEFAULTED_MARK)].rstrip()
                is_default = True
            else:
                is_default = False
            if "=" not in body:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
            key, raw = (s.strip() for s in body.split("=", 1))
            if key not in FIELD_MAP:
                raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
            values[key] = raw
            if is_default:
                defaulted.add(key)
            else:
                defaulted.discard(key)
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override must be key=value, got {item!r}")
            key, raw = (s.strip() for s in item.split("=", 1))
            values[key] = raw
            defaulted.discard(key)
        cfg = cls(values)
        cfg._explicit -= defaulted
        return cfg

    @classmethod
    def from_header(cls, text: str, overrides: Iterable[str] = ()) -> "RunConfig":
        """Configuration echoed in the leading comment block of an output file."""
        head = []
        for line in text.splitlines():
            if not line.startswith("#"):
                break
            head.append(line)
        return cls.from_text("\n".join(head), overrides)

    @staticmethod
    def _is_output_file(text):
        first = text.lstrip().split("\n", 1)[0]
        if not first.startswith("# ") or "=" not in first:
            return False
        return first[2:].split("=", 1)[0].strip() in FIELD_MAP

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Iterable[str] = ()) -> "RunConfig":
        """Read a configuration file, or the header of an earlier output file."""
        text = ""
        if path is not None:
            try:
                with open(path) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read configuration {path!r}: {exc}") from None
        if cls._is_output_file(text):
            return cls.from_header(text, overrides)
        return cls.from_text(text, overrides)

    # ---- solver objects
    def optical(self) -> OpticalConfig:
        v = self._values
        return OpticalConfig(kappa=v["optical.kappa"], omega=v["optical.omega"],
                             theta_i=v["optical.theta_i"], I_t=v["optical.I_t"],
                             n_refract=v["optical.n_refract"])

    def _taxis_kwargs(self):
        v = self._values
        if v["taxis.form"] == "two_harmonic":
            return {"a": v["taxis.a"], "b": v["taxis.b"]}
        return {"amplitude": v["taxis.amplitude"], "steepness": v["taxis.steepness"]}

    def critical_intensity(self) -> float:
        """G_c, calibrated at normal incidence when set to 'auto'."""
        gc = self._values["taxis.G_c"]
        if gc != "auto":
            return float(gc)
        return _calibrated_gc(self._calibration_key())

    def _calibration_key(self):
        v = self._values
        keys = ("optical.kappa", "optical.omega", "optical.I_t", "optical.n_refract",
                "taxis.form", "taxis.a", "taxis.b", "taxis.amplitude", "taxis.steepness",
                "taxis.z_target", "suspension.V_c")
        return tuple((k, v[k]) for k in keys)

    def suspension(self) -> SuspensionParams:
        v = self._values
        taxis = make_taxis(v["taxis.form"], self.critical_intensity(), **self._taxis_kwargs())
        return SuspensionParams(optical=self.optical(), taxis=taxis, V_c=v["suspension.V_c"],
                                Pr=v["suspension.Pr"], Le=v["suspension.Le"],
                                R_b=v["suspension.R_b"], R_T=v["suspension.R_T"],
                                top=v["suspension.top"], bottom=v["suspension.bottom"])

    def stability(self) -> StabilityConfig:
        v = self._values
        return StabilityConfig(
            params=self.suspension(), eigen_target=v["stability.eigen_target"],
            k_range=(v["stability.k_min"], v["stability.k_max"]), n_k=v["stability.n_k"],
            branch_count=v["stability.branch_count"], n_grid=v["stability.n_grid"],
            n_mu=v["stability.n_mu"], n_phi=v["stability.n_phi"],
            base_grid=v["basestate.grid_size"], newton_tol=v["stability.newton_tol"],
            max_newton=v["stability.max_newton"], chunk_size=v["stability.chunk_size"],
            collimated_cos_factor=v["stability.collimated_cos_factor"],
            momentum_sigma=v["stability.momentum_sigma"],
            detect_oscillatory=v["stability.detect_oscillatory"])

    def sweep_key(self) -> str:
        axis = self._values["sweep.axis"]
        return SWEEP_AXES.get(axis, axis)


_GC_CACHE: Dict[tuple, float] = {}


def _calibrated_gc(key) -> float:
    if key not in _GC_CACHE:
        v = dict(key)
        if v["suspension.V_c"] == 0.0:
            # no swimming, no peak to place: the response never enters
            return DEFAULT_CRITICAL_INTENSITY
        opt = OpticalConfig(kappa=v["optical.kappa"], omega=v["optical.omega"], theta_i=0.0,
                            I_t=v["optical.I_t"], n_refract=v["optical.n_refract"])
        kw = ({"a": v["taxis.a"], "b": v["taxis.b"]} if v["taxis.form"] == "two_harmonic"
              else {"amplitude": v["taxis.amplitude"], "steepness": v["taxis.steepness"]})
        params = SuspensionParams(optical=opt, taxis=make_taxis(v["taxis.form"], **kw),
                                  V_c=v["suspension.V_c"])
        _GC_CACHE[key] = calibrate_critical_intensity(params, z_target=v["taxis.z_target"])
    return _GC_CACHE[key]
