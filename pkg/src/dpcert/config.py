"""Plain-text run configuration.

Format: UTF-8 ``key=value`` lines, ``#`` starts a comment, blank lines
ignored. Unknown keys are rejected so typos cannot silently fall back to
defaults. ``orders`` is a comma-separated list; ``subset_size`` and
``r_max`` may be the literal string ``none``.
"""

from dataclasses import dataclass, replace

from .accountant import DEFAULT_ORDERS, PrivacyParams
from .certify import Method

# the instance count is written as "P" in config files
_CONFIG_KEYS = ("q", "sigma", "steps", "clip", "eta", "delta", "P",
                "method", "orders", "subset_size", "seed", "r_max")
_KEY_TO_FIELD = {key: ("instances" if key == "P" else key) for key in _CONFIG_KEYS}


@dataclass(frozen=True)
class RunConfig:
    q: float = 0.1
    sigma: float = 2.0
    steps: int = 30
    clip: float = 1.0
    eta: float = 0.001
    delta: float = 1e-5
    instances: int = 50
    method: Method = Method.RDP_MULTINOMIAL
    orders: tuple = DEFAULT_ORDERS
    subset_size: int | None = None
    seed: int = 0
    r_max: int | None = None

    def __post_init__(self):
        # PrivacyParams owns the q/sigma/steps/clip domains
        PrivacyParams(self.q, self.sigma, self.steps, self.clip)
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must be in (0,1), got {self.eta}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0,1), got {self.delta}")
        if self.instances < 1:
            raise ValueError(f"instances must be >= 1, got {self.instances}")
        if len(self.orders) == 0 or any(a <= 1.0 for a in self.orders):
            raise ValueError("orders must be a nonempty list of values > 1")
        if list(self.orders) != sorted(set(self.orders)):
            raise ValueError("orders must be strictly increasing")
        if self.subset_size is not None and self.subset_size < 1:
            raise ValueError(f"subset_size must be >= 1, got {self.subset_size}")
        if self.r_max is not None and self.r_max < 0:
            raise ValueError(f"r_max must be >= 0, got {self.r_max}")

    def privacy_params(self) -> PrivacyParams:
        return PrivacyParams(self.q, self.sigma, self.steps, self.clip)


def _parse_value(key: str, raw: str):
    try:
        if key in ("q", "sigma", "clip", "eta", "delta"):
            return float(raw)
        if key in ("steps", "P", "seed"):
            return int(raw)
        if key in ("subset_size", "r_max"):
            return None if raw.lower() == "none" else int(raw)
        if key == "method":
            return Method(raw)
        if key == "orders":
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError as exc:
        raise ValueError(f"config key {key!r}: cannot parse {raw!r} ({exc})") from None
    raise AssertionError(key)


def parse_config(text: str) -> RunConfig:
    """RunConfig from key=value text; unknown keys and domain violations
    raise with the offending key named."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        values[_KEY_TO_FIELD[key]] = _parse_value(key, raw)
    try:
        return RunConfig(**values)
    except ValueError as exc:
        raise ValueError(f"invalid config: {exc}") from None


def serialize_config(config: RunConfig) -> str:
    """Canonical key=value form; parse(serialize(c)) == c."""
    lines = [
        f"q={config.q!r}",
        f"sigma={config.sigma!r}",
        f"steps={config.steps}",
        f"clip={config.clip!r}",
        f"eta={config.eta!r}",
        f"delta={config.delta!r}",
        f"P={config.instances}",
        f"method={config.method.value}",
        "orders=" + ",".join(repr(a) for a in config.orders),
        f"subset_size={'none' if config.subset_size is None else config.subset_size}",
        f"seed={config.seed}",
        f"r_max={'none' if config.r_max is None else config.r_max}",
    ]
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def with_overrides(config: RunConfig, **overrides) -> RunConfig:
    """Copy with non-None overrides applied (CLI flags beat file values)."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **changes) if changes else config
