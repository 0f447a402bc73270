"""Run configuration: INI parsing, validation, hashing.

A RunConfig collects everything a CLI run needs: physics parameters,
grid geometry, the branch requests, propagation / stability / fitting
controls and the output directory.  Sections in the INI file mirror the
module names.  Every field is validated here, before any computation
starts, so a bad config fails fast with exit code 2.

The config hash is a short sha256 over the canonical key=value listing
(not over the raw file), so two files that resolve to the same settings
hash identically.  It is stamped into every output artifact together
with ARTIFACT_VERSION; identical config + seed must give byte-identical
outputs.
"""

import configparser
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .grid import DEFAULT_GRAVITY, DEFAULT_LENGTH_SCALE, Grid, Params
from .stationary import BRANCHES, DEFAULT_DMU

ARTIFACT_VERSION = "gostbec-artifact-1"

_SECTIONS = ("physics", "grid", "branches", "propagation", "stability",
             "fitting", "output")

DEFAULTS = {
    "physics": {
        "nu": "0.5",
        "beta": "0.5",
        "gamma": "0.5",
        "length_scale": repr(DEFAULT_LENGTH_SCALE),
        "gravity": repr(DEFAULT_GRAVITY),
    },
    "grid": {
        "rho_max": "15.0",
        "z_max": "30.0",
        "spacing_rho": "0.1",
        "spacing_z": "0.1",
    },
    "branches": {
        # label:mu_end[:dmu], comma separated
        "requests": "A0:11.9",
        "tol": "1e-9",
        "snapshot_every_point": "false",
    },
    "propagation": {
        "dt": "1e-3",
        "t_end": "20.0",
        "observers_every": "10",
        "snapshot_times": "",
        "noise_amplitude": "0.0",
        "conservation_limit": "1e-6",
    },
    "stability": {
        "basis_n": "20",
        "epsilon_inv": "1e5",
        "portrait_window": "auto",
        "portrait_resolution": "200,100",
    },
    "fitting": {
        "threshold": "1e-4",
        "window_points": "500",
    },
    "output": {
        "dir": "out",
    },
}


def _float(section, key, raw, lo=None, hi=None, lo_open=False):
    try:
        val = float(raw)
    except ValueError:
        raise ConfigurationError(
            f"[{section}] {key} = {raw!r} is not a number") from None
    if not np.isfinite(val):
        raise ConfigurationError(f"[{section}] {key} must be finite")
    if lo is not None and (val < lo or (lo_open and val == lo)):
        op = ">" if lo_open else ">="
        raise ConfigurationError(f"[{section}] {key} must be {op} {lo}")
    if hi is not None and val > hi:
        raise ConfigurationError(f"[{section}] {key} must be <= {hi}")
    return val


def _int(section, key, raw, lo=None):
    try:
        val = int(raw)
    except ValueError:
        raise ConfigurationError(
            f"[{section}] {key} = {raw!r} is not an integer") from None
    if lo is not None and val < lo:
        raise ConfigurationError(f"[{section}] {key} must be >= {lo}")
    return val


def _bool(section, key, raw):
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigurationError(f"[{section}] {key} = {raw!r} is not a boolean")


def _parse_requests(raw):
    reqs = []
    text = raw.strip()
    if not text:
        raise ConfigurationError(
            "[branches] requests is empty; give at least one label:mu_end")
    for item in text.split(","):
        parts = [p.strip() for p in item.split(":")]
        if len(parts) not in (2, 3) or not parts[0]:
            raise ConfigurationError(
                f"[branches] bad request {item.strip()!r}; "
                "expected label:mu_end or label:mu_end:dmu")
        label = parts[0]
        if label not in BRANCHES:
            known = ", ".join(sorted(BRANCHES))
            raise ConfigurationError(
                f"unknown branch label {label!r}; known labels: {known}")
        mu_end = _float("branches", f"requests({label})", parts[1])
        dmu = DEFAULT_DMU
        if len(parts) == 3:
            dmu = _float("branches", f"requests({label}) dmu", parts[2],
                         lo=0.0, lo_open=True)
        reqs.append((label, mu_end, dmu))
    return tuple(reqs)


def _parse_window(raw):
    text = raw.strip().lower()
    if text == "auto":
        return None
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 4:
        raise ConfigurationError(
            "[stability] portrait_window must be 'auto' or "
            "re_min,re_max,im_min,im_max")
    vals = tuple(_float("stability", "portrait_window", p) for p in parts)
    if vals[0] >= vals[1] or vals[2] >= vals[3]:
        raise ConfigurationError(
            "[stability] portrait_window must have re_min < re_max and "
            "im_min < im_max")
    return vals


def _parse_resolution(raw):
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ConfigurationError(
            "[stability] portrait_resolution must be n_re,n_im")
    n_re = _int("stability", "portrait_resolution", parts[0], lo=2)
    n_im = _int("stability", "portrait_resolution", parts[1], lo=2)
    return (n_re, n_im)


def _parse_times(raw):
    text = raw.strip()
    if not text:
        return ()
    vals = tuple(_float("propagation", "snapshot_times", p)
                 for p in text.split(","))
    for v in vals:
        if v < 0:
            raise ConfigurationError(
                "[propagation] snapshot_times must be non-negative")
    return vals


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one CLI invocation."""

    nu: float = 0.5
    beta: float = 0.5
    gamma: float = 0.5
    length_scale: float = DEFAULT_LENGTH_SCALE
    gravity: float = DEFAULT_GRAVITY
    rho_max: float = 15.0
    z_max: float = 30.0
    spacing_rho: float = 0.1
    spacing_z: float = 0.1
    requests: tuple = (("A0", 11.9, DEFAULT_DMU),)
    branch_tol: float = 1e-9
    snapshot_every_point: bool = False
    dt: float = 1e-3
    t_end: float = 20.0
    observers_every: int = 10
    snapshot_times: tuple = ()
    noise_amplitude: float = 0.0
    conservation_limit: float = 1e-6
    basis_n: int = 20
    epsilon_inv: float = 1e5
    portrait_window: tuple = None
    portrait_resolution: tuple = (200, 100)
    threshold: float = 1e-4
    window_points: int = 500
    output_dir: str = "out"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.nu <= 0 or self.beta <= 0:
            raise ConfigurationError("nu and beta must be positive")
        if self.gamma < 0:
            raise ConfigurationError("gamma must be >= 0")
        if self.rho_max <= 0 or self.z_max <= 0:
            raise ConfigurationError("rho_max and z_max must be positive")
        if self.spacing_rho <= 0 or self.spacing_z <= 0:
            raise ConfigurationError("grid spacings must be positive")
        if self.spacing_rho > self.rho_max or self.spacing_z > self.z_max:
            raise ConfigurationError("grid spacing exceeds the box size")
        if not self.requests:
            raise ConfigurationError("branch request list is empty")
        if self.dt <= 0 or self.t_end <= 0:
            raise ConfigurationError("dt and t_end must be positive")
        if self.t_end < self.dt:
            raise ConfigurationError("t_end must be at least one step dt")
        if self.observers_every < 1:
            raise ConfigurationError("observers_every must be >= 1")
        if self.noise_amplitude < 0:
            raise ConfigurationError("noise_amplitude must be >= 0")
        if self.conservation_limit <= 0:
            raise ConfigurationError("conservation_limit must be positive")
        if self.basis_n < 2:
            raise ConfigurationError("basis_n must be >= 2")
        if self.epsilon_inv <= 1:
            raise ConfigurationError("epsilon_inv must exceed 1")
        if self.threshold <= 0:
            raise ConfigurationError("fitting threshold must be positive")
        if self.window_points < 10:
            raise ConfigurationError("window_points must be >= 10")
        if self.branch_tol <= 0:
            raise ConfigurationError("branch tol must be positive")
        if self.seed < 0:
            raise ConfigurationError("seed must be >= 0")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        for t in self.snapshot_times:
            if t > self.t_end:
                raise ConfigurationError(
                    f"snapshot time {t} exceeds t_end = {self.t_end}")

    @classmethod
    def from_ini(cls, path=None, seed=0, workers=1):
        """Load settings from an INI file layered over the defaults.

        path=None gives the pure defaults.  Unknown sections or keys are
        rejected so typos do not silently fall back to defaults.
        """
        parser = configparser.ConfigParser(interpolation=None)
        parser.read_dict(DEFAULTS)
        if path is not None:
            check = configparser.ConfigParser(interpolation=None)
            try:
                with open(path, "r") as fh:
                    check.read_file(fh)
            except OSError as exc:
                raise ConfigurationError(
                    f"cannot read config {path!r}: {exc}") from None
            except configparser.Error as exc:
                raise ConfigurationError(
                    f"malformed config {path!r}: {exc}") from None
            for section in check.sections():
                if section not in _SECTIONS:
                    raise ConfigurationError(
                        f"unknown config section [{section}]; expected one "
                        f"of {', '.join(_SECTIONS)}")
                for key in check[section]:
                    if key not in DEFAULTS[section]:
                        raise ConfigurationError(
                            f"unknown key {key!r} in section [{section}]")
                    parser[section][key] = check[section][key]

        g = parser
        return cls(
            nu=_float("physics", "nu", g["physics"]["nu"], lo=0, lo_open=True),
            beta=_float("physics", "beta", g["physics"]["beta"],
                        lo=0, lo_open=True),
            gamma=_float("physics", "gamma", g["physics"]["gamma"], lo=0),
            length_scale=_float("physics", "length_scale",
                                g["physics"]["length_scale"],
                                lo=0, lo_open=True),
            gravity=_float("physics", "gravity", g["physics"]["gravity"],
                           lo=0, lo_open=True),
            rho_max=_float("grid", "rho_max", g["grid"]["rho_max"],
                           lo=0, lo_open=True),
            z_max=_float("grid", "z_max", g["grid"]["z_max"],
                         lo=0, lo_open=True),
            spacing_rho=_float("grid", "spacing_rho",
                               g["grid"]["spacing_rho"], lo=0, lo_open=True),
            spacing_z=_float("grid", "spacing_z", g["grid"]["spacing_z"],
                             lo=0, lo_open=True),
            requests=_parse_requests(g["branches"]["requests"]),
            branch_tol=_float("branches", "tol", g["branches"]["tol"],
                              lo=0, lo_open=True),
            snapshot_every_point=_bool("branches", "snapshot_every_point",
                                       g["branches"]["snapshot_every_point"]),
            dt=_float("propagation", "dt", g["propagation"]["dt"],
                      lo=0, lo_open=True),
            t_end=_float("propagation", "t_end", g["propagation"]["t_end"],
                         lo=0, lo_open=True),
            observers_every=_int("propagation", "observers_every",
                                 g["propagation"]["observers_every"], lo=1),
            snapshot_times=_parse_times(g["propagation"]["snapshot_times"]),
            noise_amplitude=_float("propagation", "noise_amplitude",
                                   g["propagation"]["noise_amplitude"], lo=0),
            conservation_limit=_float(
                "propagation", "conservation_limit",
                g["propagation"]["conservation_limit"], lo=0, lo_open=True),
            basis_n=_int("stability", "basis_n", g["stability"]["basis_n"],
                         lo=2),
            epsilon_inv=_float("stability", "epsilon_inv",
                               g["stability"]["epsilon_inv"],
                               lo=1, lo_open=True),
            portrait_window=_parse_window(g["stability"]["portrait_window"]),
            portrait_resolution=_parse_resolution(
                g["stability"]["portrait_resolution"]),
            threshold=_float("fitting", "threshold",
                             g["fitting"]["threshold"], lo=0, lo_open=True),
            window_points=_int("fitting", "window_points",
                               g["fitting"]["window_points"], lo=10),
            output_dir=g["output"]["dir"],
            seed=int(seed),
            workers=int(workers),
        )

    def canonical(self):
        """Deterministic key=value listing used for hashing and echo."""
        def num(x):
            return repr(float(x))

        lines = [
            "physics.nu=" + num(self.nu),
            "physics.beta=" + num(self.beta),
            "physics.gamma=" + num(self.gamma),
            "physics.length_scale=" + num(self.length_scale),
            "physics.gravity=" + num(self.gravity),
            "grid.rho_max=" + num(self.rho_max),
            "grid.z_max=" + num(self.z_max),
            "grid.spacing_rho=" + num(self.spacing_rho),
            "grid.spacing_z=" + num(self.spacing_z),
            "branches.requests=" + ",".join(
                f"{lab}:{num(mu)}:{num(dmu)}"
                for lab, mu, dmu in self.requests),
            "branches.tol=" + num(self.branch_tol),
            "branches.snapshot_every_point=" + str(self.snapshot_every_point),
            "propagation.dt=" + num(self.dt),
            "propagation.t_end=" + num(self.t_end),
            "propagation.observers_every=" + str(self.observers_every),
            "propagation.snapshot_times=" + ",".join(
                num(t) for t in self.snapshot_times),
            "propagation.noise_amplitude=" + num(self.noise_amplitude),
            "propagation.conservation_limit=" + num(self.conservation_limit),
            "stability.basis_n=" + str(self.basis_n),
            "stability.epsilon_inv=" + num(self.epsilon_inv),
            "stability.portrait_window=" + (
                "auto" if self.portrait_window is None
                else ",".join(num(v) for v in self.portrait_window)),
            "stability.portrait_resolution=" + ",".join(
                str(n) for n in self.portrait_resolution),
            "fitting.threshold=" + num(self.threshold),
            "fitting.window_points=" + str(self.window_points),
            "seed=" + str(self.seed),
        ]
        return "\n".join(lines)

    def config_hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]

    def header_comments(self):
        """Comment lines stamped into every output artifact."""
        return (f"artifact {ARTIFACT_VERSION}",
                f"config {self.config_hash()}")

    def make_params(self, s):
        return Params.from_dimensionless(self.nu, self.beta, self.gamma, s,
                                         length_scale_L=self.length_scale,
                                         g_phys=self.gravity)

    def make_grid(self):
        n_rho = int(round(self.rho_max / self.spacing_rho)) + 1
        n_z = int(round(self.z_max / self.spacing_z)) + 1
        if n_rho < 8 or n_z < 8:
            raise ConfigurationError("grid too coarse; need >= 8 nodes per "
                                     "direction")
        return Grid(rho_max=self.rho_max, z_max=self.z_max,
                    n_rho=n_rho, n_z=n_z)

    def request_for(self, label):
        if label not in BRANCHES:
            known = ", ".join(sorted(BRANCHES))
            raise ConfigurationError(
                f"unknown branch label {label!r}; known labels: {known}")
        for lab, mu_end, dmu in self.requests:
            if lab == label:
                return (lab, mu_end, dmu)
        listed = ", ".join(lab for lab, _, _ in self.requests)
        raise ConfigurationError(
            f"branch {label!r} is not in [branches] requests ({listed})")
