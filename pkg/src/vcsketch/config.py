"""Flat ``key = value`` configuration files.

Blank lines and lines starting with ``#`` are ignored. Unknown keys,
duplicate keys and unparsable values are errors that name the key and the
line number.
"""

import re

from .errors import ConfigError


def _bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _names(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _floats(text):
    return tuple(float(t) for t in _names(text))


def _choice(*options):
    def parse(text):
        value = text.strip()
        if value not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return value
    return parse


SIMULATE_KEYS = {
    "N": int,
    "N_test": int,
    "d": int,
    "delta2": _floats,
    "phi": _floats,
    "noise_var": float,
    "seed": int,
    "max_dense": int,
}

SIMULATE_DEFAULTS = {
    "N_test": 0,
    "d": 2,
    "delta2": (1.0, 0.8, 1.1),
    "phi": (1.0, 1.25, 2.0),
    "noise_var": 0.1,
    "seed": 0,
    "max_dense": 20000,
}

FIT_KEYS = {
    "M": int,
    "q": int,
    "a_sigma": float,
    "b_sigma": float,
    "a_tau": float,
    "b_tau": float,
    "beta_prior": _choice("flat", "normal"),
    "beta_mean": float,
    "beta_var": float,
    "iterations": int,
    "burn_in": int,
    "thin": int,
    "seed": int,
    "sketch_seed": int,
    "scheme": _choice("gaussian", "clarkson_woodruff"),
    "gamma_sampler": _choice("fast", "direct"),
    "varying": _names,
    "static": _names,
    "intercept": _bool,
}

# per-axis basis counts H1, H2, ... are accepted in addition to FIT_KEYS
AXIS_KEY = re.compile(r"^H([1-9][0-9]*)$")

FIT_DEFAULTS = {
    "q": 4,
    "a_sigma": 2.0,
    "b_sigma": 0.1,
    "a_tau": 2.0,
    "b_tau": 0.1,
    "beta_prior": "flat",
    "beta_mean": 0.0,
    "beta_var": 1.0,
    "iterations": 5000,
    "burn_in": 3000,
    "thin": 1,
    "seed": 0,
    "scheme": "gaussian",
    "gamma_sampler": "fast",
    "static": (),
    "intercept": True,
}

DEFAULT_AXIS_COUNT = 10


def parse_text(text, schema, allow_axis_keys=False, source="<config>"):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if key in schema:
            parser = schema[key]
        elif allow_axis_keys and AXIS_KEY.match(key):
            parser = int
        else:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}", key=key, line=lineno)
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}", key=key, line=lineno)
        try:
            values[key] = parser(value.strip())
        except ValueError as exc:
            raise ConfigError(
                f"{source}:{lineno}: bad value for {key!r}: {exc}", key=key, line=lineno
            ) from None
    return values


def load(path, schema, allow_axis_keys=False):
    with open(path) as fh:
        return parse_text(fh.read(), schema, allow_axis_keys, source=str(path))


def load_simulate(path):
    values = dict(SIMULATE_DEFAULTS)
    values.update(load(path, SIMULATE_KEYS))
    if "N" not in values:
        raise ConfigError(f"{path}: missing required key 'N'", key="N")
    return values


def load_fit(path=None):
    values = dict(FIT_DEFAULTS)
    if path is not None:
        values.update(load(path, FIT_KEYS, allow_axis_keys=True))
    return values


def axis_counts(values, d):
    """Per-axis basis counts for a ``d``-dimensional domain."""
    for key in values:
        m = AXIS_KEY.match(key)
        if m and int(m.group(1)) > d:
            raise ConfigError(f"key {key!r} refers to an axis beyond d={d}", key=key)
    return tuple(values.get(f"H{i + 1}", DEFAULT_AXIS_COUNT) for i in range(d))
