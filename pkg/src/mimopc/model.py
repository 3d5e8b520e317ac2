"""Network geometry, user drops, large-scale fading and estimate statistics.

Index convention for all ``(L, L, K)`` tensors: ``arr[l, lp, k]`` is the
quantity between BS ``l`` and user ``k`` of cell ``lp``.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, fields

import numpy as np

from mimopc.errors import ConfigError, InputError

SUPPORTED_RNGS = ("pcg64", "philox", "sfc64")
# "strongest": a user's shadowing is redrawn until its own BS has the largest
# average gain; "none": plain i.i.d. shadowing on every link
ASSOCIATION_RULES = ("strongest", "none")


def _frozen_array(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class NetworkConfig:
    """Scenario parameters.

    Powers are given in physical units and converted to SNR-normalized linear
    values by :attr:`rho_ul` and :attr:`rho_dl`.  ``pilot_length`` defaults to
    ``users_per_cell`` and ``pilot_reuse_sets`` to a single set holding every
    cell.
    """

    num_cells: int = 9
    users_per_cell: int = 2
    antennas: int = 100
    area_side: float = 1000.0
    pathloss_intercept: float = -35.0
    pathloss_exponent_coeff: float = 36.7
    shadow_std: float = 8.0
    noise_power: float = -94.0  # dBm
    ul_max_power: float = 200.0  # mW
    dl_max_power: float = 40.0  # W
    coherence_block: int = 200
    pilot_length: int | None = None
    epsilon: float = 1e-3
    pilot_reuse_sets: tuple[tuple[int, ...], ...] | None = None
    min_distance: float = 10.0
    bandwidth: float = 20e6  # Hz, export metadata only
    rng: str = "pcg64"
    association: str = "strongest"

    def __post_init__(self):
        if self.pilot_length is None:
            object.__setattr__(self, "pilot_length", self.users_per_cell)
        if self.pilot_reuse_sets is None:
            object.__setattr__(self, "pilot_reuse_sets", (tuple(range(self.num_cells)),))
        else:
            object.__setattr__(
                self, "pilot_reuse_sets",
                tuple(tuple(int(c) for c in s) for s in self.pilot_reuse_sets),
            )
        self._validate()

    def _validate(self):
        for name in ("num_cells", "users_per_cell", "antennas"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)!r}")
        if not 0 < self.pilot_length <= self.coherence_block:
            raise ConfigError(
                f"need 0 < pilot_length <= coherence_block, got {self.pilot_length}, {self.coherence_block}"
            )
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        for name in ("area_side", "ul_max_power", "dl_max_power", "min_distance", "bandwidth"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be finite and > 0, got {v}")
        if not self.shadow_std >= 0:
            raise ConfigError(f"shadow_std must be >= 0, got {self.shadow_std}")
        if self.association not in ASSOCIATION_RULES:
            raise ConfigError(f"association must be one of {ASSOCIATION_RULES}, got {self.association!r}")
        if self.rng not in SUPPORTED_RNGS:
            raise ConfigError(f"rng must be one of {SUPPORTED_RNGS}, got {self.rng!r}")
        cells = sorted(c for s in self.pilot_reuse_sets for c in s)
        if cells != list(range(self.num_cells)):
            raise ConfigError("pilot_reuse_sets must partition the cells 0..L-1")

    @property
    def rho_ul(self) -> float:
        return self.ul_max_power / 10 ** (self.noise_power / 10)

    @property
    def rho_dl(self) -> float:
        return 1e3 * self.dl_max_power / 10 ** (self.noise_power / 10)

    @property
    def prelog(self) -> float:
        return 1.0 - self.pilot_length / self.coherence_block

    def copilot_mask(self) -> np.ndarray:
        """Boolean ``(L, L)`` matrix, True where cell ``lp`` is in the reuse set of ``l``."""
        mask = np.zeros((self.num_cells, self.num_cells), dtype=bool)
        for s in self.pilot_reuse_sets:
            idx = np.array(s)
            mask[np.ix_(idx, idx)] = True
        return mask

    def replace(self, **changes) -> "NetworkConfig":
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        # derived defaults follow a change of K / L unless set explicitly
        if "users_per_cell" in changes and "pilot_length" not in changes:
            kw["pilot_length"] = None
        if "num_cells" in changes and "pilot_reuse_sets" not in changes:
            kw["pilot_reuse_sets"] = None
        kw.update(changes)
        return NetworkConfig(**kw)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["pilot_reuse_sets"] = [list(s) for s in self.pilot_reuse_sets]
        return d


@dataclass(frozen=True)
class UserDrop:
    bs_positions: np.ndarray  # (L, 2)
    user_positions: np.ndarray  # (L, K, 2)
    shadow_db: np.ndarray  # (L, L, K)
    seed: int | None = None


@dataclass(frozen=True)
class FadingTensor:
    beta: np.ndarray  # (L, L, K) linear

    def __post_init__(self):
        b = _frozen_array(self.beta)
        if b.ndim != 3 or b.shape[0] != b.shape[1]:
            raise InputError(f"beta must have shape (L, L, K), got {b.shape}")
        if not np.all(np.isfinite(b)) or np.any(b < 0):
            raise InputError("beta entries must be finite and >= 0")
        object.__setattr__(self, "beta", b)

    @property
    def shape(self):
        return self.beta.shape


@dataclass(frozen=True)
class ChannelStats:
    gamma: np.ndarray  # (L, L, K) linear, zero outside the reuse set

    def __post_init__(self):
        object.__setattr__(self, "gamma", _frozen_array(self.gamma))


def wraparound_distance(p, q, side: float):
    """Distance between ``p`` and the closest of the nine translated copies of ``q``.

    Broadcasts over leading dimensions; the last axis holds (x, y).
    """
    if not side > 0:
        raise InputError(f"side must be > 0, got {side}")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        raise InputError("coordinates must be finite")
    # per-axis minimum over the shifts {-side, 0, side} equals the 9-copy minimum
    delta = np.abs(p - q)
    delta = np.minimum(delta, np.abs(delta - side))
    d = np.sqrt(np.sum(delta**2, axis=-1))
    return float(d) if d.ndim == 0 else d


def pathloss_db(d, shadow, cfg: NetworkConfig):
    """Large-scale gain in dB at distance ``d`` metres with shadowing ``shadow`` dB."""
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise InputError("distance must be > 0")
    out = cfg.pathloss_intercept - cfg.pathloss_exponent_coeff * np.log10(d) + np.asarray(shadow, dtype=float)
    return float(out) if out.ndim == 0 else out


def make_rng(cfg: NetworkConfig, seed: int) -> np.random.Generator:
    bitgen = {"pcg64": np.random.PCG64, "philox": np.random.Philox, "sfc64": np.random.SFC64}[cfg.rng]
    return np.random.Generator(bitgen(int(seed)))


def bs_grid(cfg: NetworkConfig) -> np.ndarray:
    n = math.isqrt(cfg.num_cells)
    if n * n != cfg.num_cells:
        raise ConfigError(f"num_cells must be a perfect square for the grid layout, got {cfg.num_cells}")
    cell = cfg.area_side / n
    rows, cols = np.divmod(np.arange(cfg.num_cells), n)
    return np.stack([(cols + 0.5) * cell, (rows + 0.5) * cell], axis=-1)


def link_distances(cfg: NetworkConfig, bs_positions, user_positions) -> np.ndarray:
    """``(L, L, K)`` wrap-around distances, clamped below at ``cfg.min_distance``."""
    d = wraparound_distance(
        np.asarray(bs_positions)[:, None, None, :],
        np.asarray(user_positions)[None, :, :, :],
        cfg.area_side,
    )
    return np.maximum(d, cfg.min_distance)


def fading_from_drop(cfg: NetworkConfig, drop: UserDrop) -> FadingTensor:
    d = link_distances(cfg, drop.bs_positions, drop.user_positions)
    return FadingTensor(10 ** (pathloss_db(d, drop.shadow_db, cfg) / 10))


def generate_drop(cfg: NetworkConfig, seed: int) -> tuple[UserDrop, FadingTensor]:
    """Drop ``K`` users uniformly in each cell's square and draw shadowing.

    With ``cfg.association == "strongest"`` the shadowing vector of every user
    whose own BS is not its strongest is redrawn until it is.  The result is a
    pure function of ``(cfg, seed)``.
    """
    bs = bs_grid(cfg)
    L, K = cfg.num_cells, cfg.users_per_cell
    cell = cfg.area_side / math.isqrt(L)
    rng = make_rng(cfg, seed)
    offsets = (rng.random((L, K, 2)) - 0.5) * cell
    users = bs[:, None, :] + offsets
    shadow = cfg.shadow_std * rng.standard_normal((L, L, K))
    if cfg.association == "strongest" and L > 1:
        d = link_distances(cfg, bs, users)
        own = np.arange(L)
        for _ in range(100_000):
            gain = pathloss_db(d, shadow, cfg)
            bad_l, bad_k = np.nonzero(gain[own, own, :] < gain.max(axis=0))
            if len(bad_l) == 0:
                break
            shadow[:, bad_l, bad_k] = cfg.shadow_std * rng.standard_normal((L, len(bad_l)))
        else:
            raise ConfigError("could not draw shadowing with the serving BS strongest")
    drop = UserDrop(
        bs_positions=_frozen_array(bs),
        user_positions=_frozen_array(users),
        shadow_db=_frozen_array(shadow),
        seed=int(seed),
    )
    return drop, fading_from_drop(cfg, drop)


def compute_gamma(fading: FadingTensor, cfg: NetworkConfig) -> ChannelStats:
    """MMSE estimate variances for every co-pilot link, zero elsewhere."""
    beta = fading.beta
    L, _, K = beta.shape
    if (L, K) != (cfg.num_cells, cfg.users_per_cell):
        raise InputError(f"beta shape {beta.shape} does not match config (L={cfg.num_cells}, K={cfg.users_per_cell})")
    snr_p = cfg.pilot_length * cfg.rho_ul
    if not snr_p > 0:
        raise InputError("pilot SNR must be > 0")
    mask = cfg.copilot_mask()[:, :, None]
    # received pilot power at BS l on pilot k, summed over its reuse set
    pilot_sum = np.sum(np.where(mask, beta, 0.0), axis=1, keepdims=True)
    gamma = np.where(mask, snr_p * beta**2 / (1.0 + snr_p * pilot_sum), 0.0)
    return ChannelStats(gamma)


DUMP_HEADER = ("l", "l_prime", "k", "d_m", "shadow_db", "beta_linear", "gamma_linear")


def drop_rows(cfg: NetworkConfig, drop: UserDrop, fading: FadingTensor, stats: ChannelStats):
    d = link_distances(cfg, drop.bs_positions, drop.user_positions)
    L, _, K = fading.shape
    for l in range(L):
        for lp in range(L):
            for k in range(K):
                yield (l, lp, k, d[l, lp, k], drop.shadow_db[l, lp, k],
                       fading.beta[l, lp, k], stats.gamma[l, lp, k])


def _parse_value(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if name == "pilot_reuse_sets":
            sets = json.loads(raw)
            if not isinstance(sets, list) or not all(isinstance(s, list) for s in sets):
                raise ValueError("expected a JSON list of lists")
            return tuple(tuple(int(c) for c in s) for s in sets)
        if name == "pilot_length" and raw.lower() in ("", "auto", "none"):
            return None
        if name in ("rng", "association"):
            return raw.lower()
        if name in ("num_cells", "users_per_cell", "antennas", "coherence_block", "pilot_length"):
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name!r}: {raw!r} ({exc})") from None


def config_from_mapping(values: dict[str, str], base: NetworkConfig | None = None) -> NetworkConfig:
    """Build a config from string key/value pairs; unknown keys are errors."""
    base = base or NetworkConfig()
    known = {f.name for f in fields(NetworkConfig)}
    changes = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        changes[key] = _parse_value(key, raw, getattr(base, key))
    return base.replace(**changes)


def load_config(path) -> NetworkConfig:
    """Read a ``key = value`` config file (``#`` comments, optional ``[network]`` header)."""
    import configparser

    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    if not re.search(r"^\s*\[", text, flags=re.MULTILINE):
        text = "[network]\n" + text
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    extra = [s for s in parser.sections() if s != "network"]
    if extra:
        raise ConfigError(f"unknown section(s) in {path}: {', '.join(extra)}")
    return config_from_mapping(dict(parser["network"]) if parser.has_section("network") else {})


def dump_config(cfg: NetworkConfig) -> str:
    lines = ["[network]"]
    for key, value in cfg.to_dict().items():
        if key == "pilot_reuse_sets":
            value = json.dumps(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
