"""Flat ``key = value`` experiment configs with per-kind schemas."""
from __future__ import annotations

from dataclasses import dataclass

from hngraph.errors import ParameterError
from hngraph.geometry import Region
from hngraph.wsn import AggregationModel, EnergyConfig


class ConfigError(ParameterError):
    pass


def _int(text):
    return int(text)


def _float(text):
    return float(text)


def _pos_float(text):
    v = float(text)
    if not v > 0:
        raise ValueError("must be positive")
    return v


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise ValueError("must be at least 1")
    return v


def _prob(text):
    v = float(text)
    if not 0 < v < 1:
        raise ValueError("must lie strictly between 0 and 1")
    return v


def _floats(text):
    vals = [float(t) for t in text.split(",") if t.strip()]
    if not vals:
        raise ValueError("empty list")
    return vals


def _pos_floats(text):
    vals = _floats(text)
    if any(not v > 0 for v in vals):
        raise ValueError("entries must be positive")
    return vals


def _aggs(text):
    return [AggregationModel.parse(t) for t in text.split(",") if t.strip()]


def _bool(text):
    if text in ("1", "true", "yes"):
        return True
    if text in ("0", "false", "no"):
        return False
    raise ValueError("expected 0/1")


def _str(text):
    return text


def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, list):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (parser, default text); a default of None means optional and unset
_COMMON = {"kind": (_str, None), "seed": (_int, "0"), "out": (_str, None), "jobs": (_pos_int, "1")}

_GRAPH = {"region": (Region.parse, "square:10"), "p": (_prob, "0.5"), "n": (_int, None),
          "lambda": (_pos_float, None), "radius": (_pos_float, None)}

_ENERGY = {
    "e_elec": (_pos_float, "5e-08"), "eps_fs": (_pos_float, "1e-11"), "e_da": (_pos_float, "5e-09"),
    "signal_bytes": (_pos_int, "500"), "header_bytes": (_pos_int, "25"), "bandwidth": (_pos_float, "1000000.0"),
    "init_energy": (_pos_float, "2.0"), "death_threshold": (_pos_float, "0.1"),
    "round_seconds": (_pos_float, "20.0"), "bs_x": (_float, "50.0"), "bs_y": (_float, "175.0"),
}

SCHEMAS = {
    "build": {**_GRAPH, "n": (_int, "200")},
    "dynamics": {**_GRAPH, "n": (_int, "50"), "events": (_str, None), "random_events": (_int, "50"),
                 "region": (Region.parse, "square:10")},
    "route": {**_GRAPH, "n": (_int, "300"), "pairs": (_pos_int, "200")},
    "degree": {"region": (Region.parse, "torus:10"), "p": (_prob, "0.5"), "lambda": (_pos_float, "200.0"),
               "trials": (_pos_int, "200")},
    "lambda-min": {"region": (Region.parse, "square:10"), "p": (_prob, "0.5"),
                   "radii": (_pos_floats, "0.6,1.0,1.6"), "step": (_pos_float, "0.1"),
                   "trials": (_pos_int, "20"), "confirm": (_pos_int, "10")},
    "stretch": {"region": (Region.parse, "torus:1"), "p": (_prob, "0.5"), "lambda": (_pos_float, "500.0"),
                "distances": (_pos_floats, "0.1,0.3"), "tolerance": (_pos_float, "0.005"),
                "bin_width": (_pos_float, "0.25"), "trials": (_pos_int, "10")},
    "hops": {"region": (Region.parse, "torus:10"), "p": (_prob, "0.5"), "lambda": (_pos_float, "20.0"),
             "bucket_width": (_pos_float, "0.5"), "trials": (_pos_int, "1")},
    "height": {"n": (_pos_int, "100"), "p": (_prob, "0.5"), "trials": (_pos_int, "10000")},
    "wsn": {"region": (Region.parse, "square:100"), "n": (_pos_int, "100"), "p": (_prob, "0.5"),
            "k": (_pos_int, "5"), "aggregation": (_aggs, "unlimited,limited:10,limited:20"),
            "leach": (_bool, "1"), "max_rounds": (_pos_int, "1000000"), **_ENERGY},
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def energy(self) -> EnergyConfig:
        return EnergyConfig(**{k: self.values[k] for k in _ENERGY})

    def manifest(self, version: str) -> str:
        lines = [f"# hngraph {version}", f"kind = {self.kind}"]
        for key in sorted(self.values):
            value = self.values[key]
            if value is not None:
                lines.append(f"{key} = {_fmt(value)}")
        return "\n".join(lines) + "\n"


def parse_lines(text: str, source: str = "<config>") -> dict:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def parse_override(item: str) -> tuple[str, str]:
    key, sep, value = item.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"--set expects key=value, got {item!r}")
    return key.strip(), value.strip()


def resolve(raw: dict) -> ExperimentConfig:
    """Validate every key and fill defaults; nothing is computed before this passes."""
    kind = raw.get("kind")
    if kind not in SCHEMAS:
        raise ConfigError(f"key 'kind': expected one of {', '.join(SCHEMAS)}, got {kind!r}")
    schema = {**_COMMON, **SCHEMAS[kind]}
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) for kind {kind}: {', '.join(unknown)}")
    values = {}
    for key, (parse, default) in schema.items():
        if key == "kind":
            continue
        text = raw.get(key, default)
        if text is None:
            values[key] = None
            continue
        try:
            values[key] = parse(text)
        except (ValueError, ParameterError) as exc:
            raise ConfigError(f"key {key!r}: invalid value {text!r} ({exc})") from None
    if kind in ("build", "route", "dynamics") and raw.get("lambda") is not None and raw.get("n") is not None:
        raise ConfigError("keys 'n' and 'lambda' are mutually exclusive")
    if kind in ("build", "route", "dynamics") and raw.get("lambda") is not None:
        values["n"] = None
    if kind == "wsn":
        try:
            EnergyConfig(**{k: values[k] for k in _ENERGY})
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
    return ExperimentConfig(kind, values)
