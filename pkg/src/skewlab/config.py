"""Experiment configuration: sectioned key=value files.

Sections: [map] (required), [bump] (empty or absent means the product
map), [run], [experiments], [thresholds].  Every key has a shipped
default; unknown keys are rejected by name so typos cannot silently
fall back to defaults.  Threshold keys are optional bounds: a verdict
only tests the bounds its config declares.
"""

import configparser

import numpy as np

from .base_dynamics import LinearToralEndomorphism, ExpandingCircleMap, BumpFunction
from .skew_product import RotationExtension, FiberedPoint
from .errors import ParseError, ValidationError, NotHyperbolic

EXPERIMENT_DEFAULTS = {
    "preorbit_depth": "60",
    "exponents_n": "1000000",
    "exponents_start": "0.2, 0.7, 0.0",
    "center_samples": "100",
    "center_n": "2000",
    "pesin_samples": "100",
    "pesin_n": "2000",
    "bundles_samples": "100",
    "bundles_depth": "60",
    "spread_anchor": "0.0, 0.0, 0.0",
    "spread_depth": "60",
    "holonomy_corner": "0.0, 0.0, 0.0",
    "holonomy_grid": "10",
    "holonomy_scale_max": "0.4",
    "supath_start": "0.0, 0.0, 0.0",
    "supath_targets": "20",
    "supath_tol": "1e-4",
    "minimality_anchor": "0.2, 0.7, 0.0",
    "minimality_arc_length": "10000",
    "minimality_grid": "20",
    "birkhoff_observable": "cos_theta",
    "birkhoff_starts": "100",
    "birkhoff_n": "1000000",
    "transitivity_center": "0.25, 0.25, 0.25",
    "transitivity_epsilon": "0.05",
    "transitivity_grid": "20",
    "transitivity_n": "10000",
    "transitivity_cloud": "1000",
    "srb_anchor": "0.15, 0.05, 0.0",
    "srb_half_length": "0.3",
    "srb_points": "101",
    "volume_samples": "100",
}

# bounds a config does not declare are not tested
THRESHOLD_DEFAULTS = {
    "exponent_tol": "1e-3",
    "center_tol": "1e-8",
    "sum_tol": "1e-6",
    "mean_center_tol": "2e-3",
    "pesin_tol": "2e-3",
    "invariance_max": "1e-8",
    "additivity_max": "1e-10",
    "srb_tol": "1e-8",
    "volume_tol": "1e-9",
    "supath_expect": "reach",
}

_OPTIONAL_THRESHOLDS = (
    "spread_min",
    "spread_max",
    "defect_min",
    "defect_max",
    "radius_max",
    "radius_min",
    "fraction_min",
    "fraction_max",
    "dispersion_max",
    "dispersion_min",
)

_MAP_KEYS = {"kind", "matrix", "multiplier"}
_BUMP_KEYS = {"amplitude", "radius", "center", "direction"}
_RUN_KEYS = {"seed", "label"}


class ExperimentConfig:
    """Validated configuration with defaults resolved.

    Holds the raw resolved key/value maps for the manifest echo plus the
    constructed skew product.
    """

    def __init__(self, map_kv, bump_kv, run_kv, experiments, thresholds):
        self.map_kv = map_kv
        self.bump_kv = bump_kv
        self.seed = _parse_int("run.seed", run_kv.get("seed", "0"))
        self.label = run_kv.get("label", "")
        self.experiments = experiments
        self.thresholds = thresholds
        self.F = _build_skew_product(map_kv, bump_kv)

    # typed access, every getter names the key it resolves

    def exp_int(self, key):
        return _parse_int("experiments." + key, self.experiments[key])

    def exp_float(self, key):
        return _parse_float("experiments." + key, self.experiments[key])

    def exp_str(self, key):
        return self.experiments[key]

    def exp_point(self, key):
        vals = _parse_floats("experiments." + key, self.experiments[key])
        want = self.F.base_map.dim + 1
        if len(vals) != want:
            raise ValidationError(
                "experiments.%s needs %d coordinates (base plus fiber), got %d"
                % (key, want, len(vals))
            )
        return FiberedPoint(np.array(vals[:-1]), vals[-1] % 1.0)

    def threshold(self, key):
        """Float bound or None when the config leaves the key unset."""
        val = self.thresholds.get(key)
        if val is None:
            return None
        return _parse_float("thresholds." + key, val)

    def echo_lines(self):
        out = []
        for name, kv in (
            ("map", self.map_kv),
            ("bump", self.bump_kv),
            ("run", {"seed": str(self.seed), "label": self.label}),
            ("experiments", self.experiments),
            ("thresholds", self.thresholds),
        ):
            out.append("[%s]" % name)
            for k in sorted(kv):
                out.append("%s = %s" % (k, kv[k]))
        return out


def _parse_int(name, s):
    try:
        return int(str(s).strip())
    except ValueError:
        raise ValidationError("%s must be an integer, got %r" % (name, s)) from None


def _parse_float(name, s):
    try:
        return float(str(s).strip())
    except ValueError:
        raise ValidationError("%s must be a number, got %r" % (name, s)) from None


def _parse_floats(name, s, count=None):
    parts = [p for p in str(s).replace(",", " ").split() if p]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ValidationError("%s must be a list of numbers, got %r" % (name, s)) from None
    if count is not None and len(vals) != count:
        raise ValidationError("%s needs %d numbers, got %d" % (name, count, len(vals)))
    return vals


def _build_skew_product(map_kv, bump_kv):
    kind = map_kv.get("kind", "torus").strip().lower()
    if kind == "torus":
        if "matrix" not in map_kv:
            raise ValidationError("map.matrix is required for kind = torus")
        entries = _parse_floats("map.matrix", map_kv["matrix"], count=4)
        for e in entries:
            if e != int(e):
                raise ValidationError("map.matrix entries must be integers")
        try:
            base = LinearToralEndomorphism(np.array(entries).reshape(2, 2).astype(int))
        except NotHyperbolic as e:
            raise ValidationError("map.matrix: %s" % e) from e
    elif kind == "circle":
        if "multiplier" not in map_kv:
            raise ValidationError("map.multiplier is required for kind = circle")
        k = _parse_int("map.multiplier", map_kv["multiplier"])
        try:
            base = ExpandingCircleMap(k)
        except ValueError as e:
            raise ValidationError("map.multiplier: %s" % e) from e
    else:
        raise ValidationError("map.kind must be torus or circle, got %r" % kind)

    if not bump_kv:
        return RotationExtension(base, None)
    amplitude = _parse_float("bump.amplitude", bump_kv.get("amplitude", "0.05"))
    radius = _parse_float("bump.radius", bump_kv.get("radius", "0.15"))
    center_s = bump_kv.get("center")
    if center_s is None:
        center = np.zeros(base.dim)
    else:
        center = np.array(_parse_floats("bump.center", center_s, count=base.dim))
    dir_s = bump_kv.get("direction", "unstable").strip()
    if dir_s.lower() == "unstable":
        direction = base.eigen.v_u
    else:
        direction = np.array(_parse_floats("bump.direction", dir_s, count=base.dim))
    try:
        bump = BumpFunction(center, radius, amplitude, direction)
    except ValueError as e:
        raise ValidationError("bump: %s" % e) from e
    return RotationExtension(base, bump)


def parse_config(text):
    """Parse and validate a sectioned key=value configuration."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        lineno = getattr(e, "lineno", None)
        if lineno is None and getattr(e, "errors", None):
            lineno = e.errors[0][0]
        where = " (line %s)" % lineno if lineno is not None else ""
        raise ParseError("bad config syntax%s: %s" % (where, e.message)) from e

    known = {"map", "bump", "run", "experiments", "thresholds"}
    for sec in cp.sections():
        if sec not in known:
            raise ValidationError("unknown section [%s]" % sec)
    if not cp.has_section("map"):
        raise ValidationError("missing required section [map]")

    def section(name, allowed):
        kv = dict(cp.items(name)) if cp.has_section(name) else {}
        for k in kv:
            if k not in allowed:
                raise ValidationError("unknown key %s.%s" % (name, k))
        return kv

    map_kv = section("map", _MAP_KEYS)
    bump_kv = section("bump", _BUMP_KEYS)
    run_kv = section("run", _RUN_KEYS)
    exp_kv = section("experiments", set(EXPERIMENT_DEFAULTS))
    thr_kv = section(
        "thresholds", set(THRESHOLD_DEFAULTS) | set(_OPTIONAL_THRESHOLDS)
    )

    experiments = dict(EXPERIMENT_DEFAULTS)
    experiments.update(exp_kv)
    thresholds = dict(THRESHOLD_DEFAULTS)
    thresholds.update(thr_kv)
    cfg = ExperimentConfig(map_kv, bump_kv, run_kv, experiments, thresholds)
    expect = cfg.thresholds["supath_expect"]
    if expect not in ("reach", "not-accessible"):
        raise ValidationError(
            "thresholds.supath_expect must be reach or not-accessible, got %r" % expect
        )
    return cfg


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ParseError("cannot read config %s: %s" % (path, e)) from e
    return parse_config(text)
