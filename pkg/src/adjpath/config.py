"""Declarative run configuration: profiles, JSON (de)serialization, pin protection."""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace

from .errors import ConfigError

DEFAULT_MASTER_SEED = 12345

#: Values the reference protocol fixes; the "paper" profile refuses to run
#: with any of these changed unless explicitly overridden as unsafe.
PAPER_PINS = {
    "grid_t": 100,
    "basis_size": 6,
    "n_levels": 100,
    "tau": 1e-3,
    "n_max": 1000,
    "newton_max_iter": 50,
    "landweber_max_iter": 100,
    "n_es": 5,
    "alpha_hi": 1.0,
    "alpha_lo": 1e-6,
    "u0": 0.2,
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a reproduction run needs, in one flat immutable record."""

    profile: str = "paper"
    # grid
    grid_t: int = 100
    t_end: float = 2.0 * math.pi
    periodic: bool = False
    # basis
    basis_size: int = 6
    # schedule
    alpha_hi: float = 1.0
    alpha_lo: float = 1e-6
    n_levels: int = 100
    # inner loop
    tau: float = 1e-3
    n_max: int = 1000
    n_es: int = 5
    # solvers
    newton_max_iter: int = 50
    newton_tol: float = 1e-8
    landweber_max_iter: int = 100
    landweber_tol: float = 1e-8
    # regularizer
    epsilon: float = 1e-4
    thresholding: bool = True
    # noise protocol
    sigmas: tuple = (0.01, 0.1, 0.2)
    n_trials: int = 20
    master_seed: int = DEFAULT_MASTER_SEED
    # dynamics
    u0: float = 0.2
    ground_truths: tuple = ("m1", "m2")

    def __post_init__(self):
        if self.profile not in ("paper", "ci"):
            raise ConfigError(f"unknown profile {self.profile!r}")
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "ground_truths", tuple(self.ground_truths))
        if any(s < 0 for s in self.sigmas):
            raise ConfigError("noise sigmas must be nonnegative")
        if self.n_trials < 1:
            raise ConfigError(f"n_trials must be at least 1, got {self.n_trials}")


def paper_profile(master_seed: int = DEFAULT_MASTER_SEED) -> RunConfig:
    """Full-scale reproduction settings."""
    return RunConfig(profile="paper", master_seed=master_seed)


def ci_profile(master_seed: int = DEFAULT_MASTER_SEED) -> RunConfig:
    """Scaled-down settings (fewer trials, levels and inner iterations) for minutes-long runs."""
    return RunConfig(
        profile="ci",
        n_trials=5,
        n_levels=30,
        n_max=200,
        master_seed=master_seed,
    )


_TREE_LAYOUT = {
    "grid": {"T": "grid_t", "t_end": "t_end", "periodic": "periodic"},
    "basis": {"size": "basis_size"},
    "schedule": {"alpha_hi": "alpha_hi", "alpha_lo": "alpha_lo", "levels": "n_levels"},
    "inner": {"tau": "tau", "n_max": "n_max", "n_es": "n_es"},
    "solvers": {
        "newton_max_iter": "newton_max_iter",
        "newton_tol": "newton_tol",
        "landweber_max_iter": "landweber_max_iter",
        "landweber_tol": "landweber_tol",
    },
    "regularizer": {"epsilon": "epsilon", "thresholding": "thresholding"},
    "noise": {"sigmas": "sigmas", "n_trials": "n_trials", "master_seed": "master_seed"},
    "dynamics": {"u0": "u0", "ground_truths": "ground_truths"},
}


def config_to_tree(cfg: RunConfig) -> dict:
    """Nested key-value tree mirroring the config file layout."""
    tree = {"profile": cfg.profile}
    values = asdict(cfg)
    for section, fields in _TREE_LAYOUT.items():
        tree[section] = {key: values[attr] for key, attr in fields.items()}
    tree["noise"]["sigmas"] = list(cfg.sigmas)
    tree["dynamics"]["ground_truths"] = list(cfg.ground_truths)
    return tree


def config_from_tree(tree: dict) -> RunConfig:
    kwargs = {}
    if "profile" in tree:
        kwargs["profile"] = tree["profile"]
    for section, fields in _TREE_LAYOUT.items():
        node = tree.get(section, {})
        if not isinstance(node, dict):
            raise ConfigError(f"config section {section!r} must be a mapping")
        for key, attr in fields.items():
            if key in node:
                kwargs[attr] = node[key]
        unknown = set(node) - set(fields)
        if unknown:
            raise ConfigError(f"unknown keys in config section {section!r}: {sorted(unknown)}")
    unknown = set(tree) - set(_TREE_LAYOUT) - {"profile"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    try:
        return RunConfig(**kwargs)
    except TypeError as err:
        raise ConfigError(f"bad config values: {err}") from err


def config_hash(cfg: RunConfig) -> str:
    """sha256 of the canonical JSON form (first 16 hex digits)."""
    canon = json.dumps(config_to_tree(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def validate_pins(cfg: RunConfig, unsafe_override: bool = False) -> RunConfig:
    """Reject paper-profile configs whose pinned values were changed."""
    if cfg.profile != "paper" or unsafe_override:
        return cfg
    mismatches = {
        name: (getattr(cfg, name), pinned)
        for name, pinned in PAPER_PINS.items()
        if getattr(cfg, name) != pinned
    }
    if mismatches:
        detail = ", ".join(f"{k}={got!r} (pinned {want!r})" for k, (got, want) in mismatches.items())
        raise ConfigError(
            f"paper profile pins violated: {detail}; pass unsafe_override to run anyway"
        )
    return cfg


def load_config(
    path=None,
    profile: str | None = None,
    seed: int | None = None,
    unsafe_override: bool = False,
) -> RunConfig:
    """Config file plus flag overrides, pin-checked.

    ``profile`` replaces the file's profile (defaults applied from that
    profile when no file is given); ``seed`` replaces the master seed.
    """
    if path is not None:
        with open(path) as fh:
            try:
                tree = json.load(fh)
            except json.JSONDecodeError as err:
                raise ConfigError(f"{path}: invalid JSON at line {err.lineno}: {err.msg}") from err
        cfg = config_from_tree(tree)
        if profile is not None and profile != cfg.profile:
            cfg = replace(cfg, profile=profile)
    else:
        maker = {"paper": paper_profile, "ci": ci_profile}.get(profile or "paper")
        if maker is None:
            raise ConfigError(f"unknown profile {profile!r}")
        cfg = maker()
    if seed is not None:
        cfg = replace(cfg, master_seed=int(seed))
    return validate_pins(cfg, unsafe_override=unsafe_override)


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_tree(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
