"""Plain-text model configuration: one ``key=value`` pair per line.

Gains ``a_los_db``/``a_nlos_db`` are referenced to 1 m, powers are in dBm and
``d1_km`` in km. Blank lines and ``#`` comments are ignored. Floats are written
with ``repr`` so a dump/load round trip is bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from densecell import model as m
from densecell.errors import UsageError

MODEL_KINDS = ("3gpp_case1", "single_slope")
NUMERIC_KEYS = ("d1_km", "alpha_los", "alpha_nlos", "a_los_db", "a_nlos_db", "tx_power_dbm", "noise_dbm")
REQUIRED = {
    "3gpp_case1": NUMERIC_KEYS,
    "single_slope": ("alpha_nlos", "a_nlos_db", "tx_power_dbm", "noise_dbm"),
}


@dataclass(frozen=True)
class ModelConfig:
    model: str = "3gpp_case1"
    d1_km: float = None
    alpha_los: float = None
    alpha_nlos: float = None
    a_los_db: float = None
    a_nlos_db: float = None
    tx_power_dbm: float = None
    noise_dbm: float = None

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise UsageError(f"model must be one of {', '.join(MODEL_KINDS)}, got {self.model!r}")
        missing = [k for k in REQUIRED[self.model] if getattr(self, k) is None]
        if missing:
            raise UsageError(f"missing keys for model {self.model}: {', '.join(missing)}")

    def to_environment(self):
        """Build the environment; infeasible exponents raise :class:`ParameterError`."""
        if self.model == "3gpp_case1":
            env = m.case1_environment(self.d1_km, self.alpha_los, self.alpha_nlos, self.a_los_db,
                                      self.a_nlos_db, self.tx_power_dbm, self.noise_dbm)
        else:
            env = m.single_slope_environment(self.alpha_nlos, self.a_nlos_db, self.tx_power_dbm, self.noise_dbm)
        m.check_finite_interference(env.model)
        return env

    def items(self):
        """``(key, value)`` pairs that are set, in file order."""
        return [(f.name, getattr(self, f.name)) for f in fields(self) if getattr(self, f.name) is not None]

    def dumps(self):
        return "".join(f"{k}={v if k == 'model' else repr(float(v))}\n" for k, v in self.items())


PRESET = ModelConfig(
    model="3gpp_case1",
    d1_km=m.CASE1_D1_KM,
    alpha_los=m.CASE1_ALPHA_LOS,
    alpha_nlos=m.CASE1_ALPHA_NLOS,
    a_los_db=m.CASE1_A_LOS_DB,
    a_nlos_db=m.CASE1_A_NLOS_DB,
    tx_power_dbm=m.CASE1_TX_POWER_DBM,
    noise_dbm=m.CASE1_NOISE_DBM,
)


def loads(text):
    """Parse a configuration; every malformed line raises :class:`UsageError` with its number."""
    values = {}
    seen_at = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"expected key=value, got {raw.strip()!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key in seen_at:
            raise UsageError(f"duplicate key {key!r} (first set on line {seen_at[key]})", line=lineno)
        if key == "model":
            if value not in MODEL_KINDS:
                raise UsageError(f"model must be one of {', '.join(MODEL_KINDS)}, got {value!r}", line=lineno)
            values[key] = value
        elif key in NUMERIC_KEYS:
            try:
                number = float(value)
            except ValueError:
                raise UsageError(f"{key} needs a number, got {value!r}", line=lineno) from None
            if not math.isfinite(number):
                raise UsageError(f"{key} must be finite, got {value!r}", line=lineno)
            values[key] = number
        else:
            raise UsageError(f"unknown key {key!r}", line=lineno)
        seen_at[key] = lineno
    if "model" not in values:
        raise UsageError("missing key 'model'")
    return ModelConfig(**values)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dump(config, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config.dumps())

