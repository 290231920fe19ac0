"""Experiment configuration as a small INI file.

Example::

    [model]
    kind = linreg
    data_seed = 0
    N = 60
    d = 20

    [sampler]
    kind = rqmc
    seed = 0

    [optimizer]
    kind = sqn
    n_grad = 128
    alpha = 0.001

    [run]
    iterations = 1000
    reps = 1
    sweep = 8, 16, 32
    out = runs/linreg
"""

from __future__ import annotations

import configparser
import io
import re
from dataclasses import asdict, dataclass, field

MODEL_KINDS = ("linreg", "logreg", "crossed")
SAMPLER_KINDS = ("mc", "rqmc")
OPTIMIZER_KINDS = ("sgd", "adagrad", "adam", "sqn")

# field name -> (section, key in file, parser)
_LAYOUT = {
    "model": ("model", "kind", str),
    "data_seed": ("model", "data_seed", int),
    "sizes": ("model", None, None),
    "sampler": ("sampler", "kind", str),
    "seed": ("sampler", "seed", int),
    "optimizer": ("optimizer", "kind", str),
    "n_grad": ("optimizer", "n_grad", int),
    "n_hess": ("optimizer", "n_hess", int),
    "interval_B": ("optimizer", "interval_B", int),
    "memory": ("optimizer", "memory", int),
    "alpha": ("optimizer", "alpha", float),
    "line_search": ("optimizer", "line_search", None),
    "iterations": ("run", "iterations", int),
    "reps": ("run", "reps", int),
    "sweep": ("run", "sweep", None),
    "out": ("run", "out", str),
}
_SIZE_KEYS = {"N": int, "d": int, "I": int, "J": int, "gamma": float}


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message, section=None, key=None, line=None):
        self.message, self.section, self.key, self.line = message, section, key, line
        where = ".".join(x for x in (section, key) if x)
        prefix = f"line {line}: " if line else ""
        super().__init__(f"{prefix}{where + ': ' if where else ''}{message}")


@dataclass
class ExperimentConfig:
    model: str = "linreg"
    data_seed: int = 0
    sizes: dict = field(default_factory=dict)
    sampler: str = "rqmc"
    seed: int = 0
    optimizer: str = "sqn"
    n_grad: int = 128
    n_hess: int = 1024
    interval_B: int = 20
    memory: int = 50
    alpha: float = 0.01
    line_search: bool = True
    iterations: int = 1000
    reps: int = 1
    sweep: tuple = ()
    out: str = "runs"

    def __post_init__(self):
        self.sweep = tuple(int(n) for n in self.sweep)
        self.validate()

    def validate(self) -> None:
        def fail(name, msg):
            section, key, _ = _LAYOUT[name]
            raise ConfigError(msg, section, key)

        if self.model not in MODEL_KINDS:
            fail("model", f"unknown model {self.model!r}; choose from {', '.join(MODEL_KINDS)}")
        if self.sampler not in SAMPLER_KINDS:
            fail("sampler", f"unknown sampler {self.sampler!r}; choose from {', '.join(SAMPLER_KINDS)}")
        if self.optimizer not in OPTIMIZER_KINDS:
            fail("optimizer", f"unknown optimizer {self.optimizer!r}; choose from {', '.join(OPTIMIZER_KINDS)}")
        for name in ("n_grad", "n_hess", "interval_B", "memory", "reps"):
            if getattr(self, name) < 1:
                fail(name, "must be at least 1")
        if self.iterations < 0:
            fail("iterations", "must be non-negative")
        if not self.alpha > 0:
            fail("alpha", "must be positive")
        if any(n < 1 for n in self.sweep):
            fail("sweep", "values must be positive")
        if any(b <= a for a, b in zip(self.sweep, self.sweep[1:])):
            fail("sweep", "values must be strictly increasing")
        for key in self.sizes:
            if key not in _SIZE_KEYS:
                raise ConfigError(f"unknown size {key!r}", "model", key)

    @property
    def sample_sizes(self) -> tuple:
        return self.sweep or (self.n_grad,)

    def replace(self, **changes) -> "ExperimentConfig":
        data = asdict(self)
        data.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig(**data)


def _locate(text, section, key):
    """Line number of ``key`` inside ``[section]`` (or of the section header)."""
    if not text:
        return None
    current = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if current == section and key and re.match(rf"{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
            return i
    return None


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _new_parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep N, d, I, J case
    return cp


def parse_config(text: str) -> ExperimentConfig:
    """Parse INI text; unknown sections or keys are errors."""
    cp = _new_parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from exc
    known = {}
    for name, (section, key, _) in _LAYOUT.items():
        known.setdefault(section, set())
        if key:
            known[section].add(key)
    for section in cp.sections():
        if section == "outputs":
            continue
        if section not in known:
            raise ConfigError(f"unknown section [{section}]", line=_locate(text, section, None))
        for key in cp[section]:
            if key not in known[section] and not (section == "model" and key in _SIZE_KEYS):
                raise ConfigError("unknown key", section, key, _locate(text, section, key))

    values = {}
    for name, (section, key, conv) in _LAYOUT.items():
        if key is None or not cp.has_option(section, key):
            continue
        raw = cp.get(section, key)
        try:
            if name == "sweep":
                values[name] = tuple(int(x) for x in raw.replace(",", " ").split())
            elif name == "line_search":
                values[name] = _parse_bool(raw)
            else:
                values[name] = conv(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"bad value {raw!r} ({exc})", section, key, _locate(text, section, key)) from None
    sizes = {}
    if cp.has_section("model"):
        for key, conv in _SIZE_KEYS.items():
            if cp.has_option("model", key):
                raw = cp.get("model", key)
                try:
                    sizes[key] = conv(raw)
                except ValueError:
                    raise ConfigError(f"bad value {raw!r}", "model", key, _locate(text, "model", key)) from None
    values["sizes"] = sizes
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        raise ConfigError(exc.message, exc.section, exc.key, _locate(text, exc.section, exc.key)) from None


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def emit_config(config: ExperimentConfig, outputs=None) -> str:
    """INI text such that ``parse_config(emit_config(c)) == c``."""
    cp = _new_parser()
    for name, (section, key, _) in _LAYOUT.items():
        if not cp.has_section(section):
            cp.add_section(section)
        value = getattr(config, name)
        if name == "sizes":
            for k in _SIZE_KEYS:
                if k in value:
                    cp.set(section, k, repr(value[k]))
        elif name == "sweep":
            if value:
                cp.set(section, key, ", ".join(str(n) for n in value))
        elif isinstance(value, float):
            cp.set(section, key, repr(value))
        else:
            cp.set(section, key, str(value).lower() if isinstance(value, bool) else str(value))
    if outputs:
        cp.add_section("outputs")
        for i, path in enumerate(outputs):
            cp.set("outputs", f"file{i}", str(path))
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def manifest_outputs(text: str) -> list:
    """File list stored in a manifest's ``[outputs]`` section."""
    cp = _new_parser()
    cp.read_string(text)
    if not cp.has_section("outputs"):
        return []
    return [cp.get("outputs", k) for k in cp["outputs"]]
