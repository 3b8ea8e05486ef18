"""Command line runner: configured diagnostics with CSV, figure, and
manifest output.

Usage: skewlab <subcommand> --config <path> [--out <dir>]

Exit codes: 0 all declared thresholds pass, 1 a threshold failed,
2 configuration or runtime error.  SKEWLAB_THREADS caps the BLAS thread
pools when set.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from .config import load_config
from .errors import SkewlabError, ParseError, ValidationError, NotAccessibleNumerically
from .skew_product import FiberedPoint
from .orbit_space import sample_preorbit, shadow_preorbit, FixedItinerary
from .bundles import (
    lyapunov_exponents,
    mean_center_exponent,
    pesin_entropy_estimate,
    estimate_splitting,
    estimate_unstable_direction,
    estimate_center_direction,
    unstable_direction_spread,
    proj_angle,
)
from .foliations import (
    QuadrilateralSpec,
    quadrilateral_holonomy,
    bisection_additivity_defect,
    u_loop_holonomy,
    build_su_path,
    leaf_density_radius,
    leaf_samples,
    default_policy,
)
from .ergodic import (
    get_observable,
    birkhoff_dispersion,
    box_transitivity,
    srb_delta_u,
    srb_density,
    volume_preservation_certificate,
)
from .reporting import RunReporter, check_le, check_ge, check_flag

import matplotlib.pyplot as plt

SUBCOMMANDS = [
    "exponents",
    "bundles",
    "spread",
    "holonomy",
    "supath",
    "minimality",
    "birkhoff",
    "transitivity",
    "srb",
    "volume-check",
]


def _maybe(checks, kind, name, value, cfg, key):
    """Append a bound check when the config declares the key."""
    bound = cfg.threshold(key)
    if bound is None:
        return
    fn = check_le if kind == "le" else check_ge
    checks.append(fn(name, value, bound, "thresholds." + key))


def run_exponents(cfg, rep):
    F = cfg.F
    x = cfg.exp_point("exponents_start")
    n = cfg.exp_int("exponents_n")
    trip = lyapunov_exponents(F, x, n, seed=cfg.seed)
    mc, mc_se = mean_center_exponent(
        F, cfg.exp_int("center_samples"), cfg.exp_int("center_n"), seed=cfg.seed
    )
    pes, pes_se = pesin_entropy_estimate(
        F, cfg.exp_int("pesin_samples"), cfg.exp_int("pesin_n"), seed=cfg.seed
    )
    eig = F.base_map.eigen
    target_u = float(np.log(abs(eig.a_u)))
    target_det = float(np.log(abs(F.base_map.det)))
    rows = []
    if trip.lam_s is not None:
        rows.append(("lambda_s", trip.lam_s, trip.se[0], float(np.log(abs(eig.a_s)))))
    rows.append(("lambda_c", trip.lam_c, trip.se[1], 0.0))
    rows.append(("lambda_u", trip.lam_u, trip.se[2], target_u))
    rows.append(("sum", trip.total(), "", target_det))
    rows.append(("mean_center", mc, mc_se, 0.0))
    rows.append(("pesin_entropy", pes, pes_se, target_u))
    rep.write_csv("lyapunov.csv", ("quantity", "value", "std_error", "target"), rows)

    checks = []
    tol = cfg.threshold("exponent_tol")
    checks.append(
        check_le("lambda_u error", abs(trip.lam_u - target_u), tol, "thresholds.exponent_tol")
    )
    if trip.lam_s is not None:
        checks.append(
            check_le(
                "lambda_s error",
                abs(trip.lam_s - float(np.log(abs(eig.a_s)))),
                tol,
                "thresholds.exponent_tol",
            )
        )
    checks.append(
        check_le("lambda_c magnitude", abs(trip.lam_c), cfg.threshold("center_tol"), "thresholds.center_tol")
    )
    checks.append(
        check_le("exponent sum error", abs(trip.total() - target_det), cfg.threshold("sum_tol"), "thresholds.sum_tol")
    )
    checks.append(
        check_le("mean center exponent", abs(mc), cfg.threshold("mean_center_tol"), "thresholds.mean_center_tol")
    )
    checks.append(
        check_le("pesin entropy error", abs(pes - target_u), cfg.threshold("pesin_tol"), "thresholds.pesin_tol")
    )
    rep.add_verdict("exponents", checks)

    fig, ax = plt.subplots(figsize=(5, 3.2))
    names = [r[0] for r in rows[:3]]
    vals = [r[1] for r in rows[:3]]
    errs = [r[2] if isinstance(r[2], float) else 0.0 for r in rows[:3]]
    targets = [r[3] for r in rows[:3]]
    ax.errorbar(range(len(vals)), vals, yerr=np.array(errs) * 3, fmt="o", capsize=4)
    ax.plot(range(len(targets)), targets, "_", color="k", markersize=18)
    ax.set_xticks(range(len(names)), names)
    ax.set_ylabel("nats / step")
    ax.set_title("exponents vs targets")
    fig.tight_layout()
    rep.save_figure(fig, "exponents.png")


def run_bundles(cfg, rep):
    F = cfg.F
    samples = cfg.exp_int("bundles_samples")
    depth = cfg.exp_int("bundles_depth")
    rng = np.random.default_rng(cfg.seed)
    policy = default_policy(F)
    rows = []
    worst = 0.0
    for _ in range(samples):
        x = FiberedPoint(rng.uniform(size=F.base_map.dim), float(rng.uniform()))
        pre = sample_preorbit(F, x, depth, policy)
        if F.base_map.dim == 2:
            est = estimate_splitting(F, x, pre, n=depth)
            res = est.residuals
            rows.append(
                (x.base[0], x.base[1], x.theta, res["s"], res["c"], res["u"])
            )
            worst = max(worst, max(res.values()))
        else:
            e_u, _ = estimate_unstable_direction(F, pre)
            e_c, _ = estimate_center_direction(F, x, pre, depth)
            fx = F.apply(x)
            pre_fx = pre.extended_by_image()
            J = F.derivative(x.base)
            e_u_im, _ = estimate_unstable_direction(F, pre_fx)
            e_c_im, _ = estimate_center_direction(F, fx, pre_fx, depth)
            ru = proj_angle(J @ e_u, e_u_im)
            rc = proj_angle(J @ e_c, e_c_im)
            rows.append((x.base[0], "", x.theta, "", rc, ru))
            worst = max(worst, ru, rc)
    header = ("x", "y", "theta", "residual_s", "residual_c", "residual_u")
    rep.write_csv("bundles.csv", header, rows)
    checks = [
        check_le(
            "max invariance defect", worst, cfg.threshold("invariance_max"), "thresholds.invariance_max"
        )
    ]
    rep.add_verdict("bundles", checks)


def run_spread(cfg, rep):
    F = cfg.F
    anchor = cfg.exp_point("spread_anchor")
    depth = cfg.exp_int("spread_depth")
    if F.bump is not None:
        pair = [("constant", FixedItinerary(0)), ("stay-outside", default_policy(F))]
    else:
        # u-special product: any two branch choices give the same direction
        pair = [("constant-0", FixedItinerary(0)), ("constant-1", FixedItinerary(1))]
    pres = [sample_preorbit(F, anchor, depth, p) for _, p in pair]
    spread = unstable_direction_spread(F, pres, n=depth)
    rep.write_csv(
        "spread.csv",
        ("policy_a", "policy_b", "angle"),
        [(pair[0][0], pair[1][0], spread)],
    )
    checks = []
    _maybe(checks, "ge", "direction spread", spread, cfg, "spread_min")
    _maybe(checks, "le", "direction spread", spread, cfg, "spread_max")
    rep.add_verdict("spread", checks)


def run_holonomy(cfg, rep):
    F = cfg.F
    corner = cfg.exp_point("holonomy_corner")
    grid = cfg.exp_int("holonomy_grid")
    smax = cfg.exp_float("holonomy_scale_max")
    scales = [smax * (i + 1) / grid for i in range(grid)]
    rows = []
    defect = 0.0
    checks = []
    if F.base_map.dim == 2:
        for t in scales:
            for s in scales:
                h = quadrilateral_holonomy(F, QuadrilateralSpec(corner, t, s))
                rows.append((t, s, h))
                defect = max(defect, abs(h))
        add_defect = bisection_additivity_defect(
            F, QuadrilateralSpec(corner, scales[-1], scales[-1])
        )
        checks.append(
            check_le(
                "bisection additivity defect",
                add_defect,
                cfg.threshold("additivity_max"),
                "thresholds.additivity_max",
            )
        )
    else:
        for t in scales:
            h = u_loop_holonomy(F, corner, t)
            rows.append((t, 0.0, h))
            defect = max(defect, abs(h))
    rep.write_csv("holonomy.csv", ("t", "s", "delta_theta"), rows)
    _maybe(checks, "ge", "max holonomy", defect, cfg, "defect_min")
    _maybe(checks, "le", "max holonomy", defect, cfg, "defect_max")
    rep.add_verdict("holonomy", checks)

    fig, ax = plt.subplots(figsize=(4.6, 3.8))
    if F.base_map.dim == 2:
        surf = np.array([r[2] for r in rows]).reshape(grid, grid)
        im = ax.imshow(
            surf.T,
            origin="lower",
            extent=(scales[0], scales[-1], scales[0], scales[-1]),
            aspect="auto",
            cmap="RdBu_r",
        )
        fig.colorbar(im, ax=ax, label="fiber holonomy (turns)")
        ax.set_xlabel("t (unstable)")
        ax.set_ylabel("s (stable)")
    else:
        ax.plot(scales, [r[2] for r in rows], "o-")
        ax.set_xlabel("t (unstable)")
        ax.set_ylabel("loop holonomy (turns)")
    ax.set_title("holonomy surface")
    fig.tight_layout()
    rep.save_figure(fig, "holonomy.png")


def run_supath(cfg, rep):
    F = cfg.F
    start = cfg.exp_point("supath_start")
    n_targets = cfg.exp_int("supath_targets")
    tol = cfg.exp_float("supath_tol")
    expect = cfg.thresholds["supath_expect"]
    rng = np.random.default_rng(cfg.seed)
    d = F.base_map.dim
    rows = []
    checks = []
    if expect == "reach":
        worst_fiber = 0.0
        worst_verify = 0.0
        first_path = None
        for _ in range(n_targets):
            target = FiberedPoint(rng.uniform(size=d), float(rng.uniform()))
            path = build_su_path(F, start, target, tol=tol)
            if first_path is None:
                first_path = path
            v = path.verify()
            worst_fiber = max(worst_fiber, path.fiber_error)
            worst_verify = max(worst_verify, v)
            rows.append(
                tuple(target.base)
                + ("",) * (2 - d)
                + (target.theta, path.fiber_error, path.base_error, len(path.legs), v, "reached")
            )
        checks.append(
            check_le("max fiber error", worst_fiber, tol, "experiments.supath_tol")
        )
        checks.append(
            check_le("max leg verification residual", worst_verify, 1e-9, "builtin leg residual bound")
        )
        if first_path is not None:
            leg_rows = []
            for i, leg in enumerate(first_path.legs):
                itin = ""
                if leg.kind == "u":
                    itin = leg.chart.preorbit.itinerary()
                leg_rows.append(
                    (
                        i,
                        leg.kind,
                        leg.t0,
                        leg.t1,
                        leg.start.base[0],
                        leg.start.base[1] if d == 2 else "",
                        leg.start.theta,
                        leg.end.base[0],
                        leg.end.base[1] if d == 2 else "",
                        leg.end.theta,
                        itin,
                    )
                )
            rep.write_csv(
                "supath_legs.csv",
                (
                    "index",
                    "kind",
                    "t0",
                    "t1",
                    "start_x",
                    "start_y",
                    "start_theta",
                    "end_x",
                    "end_y",
                    "end_theta",
                    "preorbit_itinerary",
                ),
                leg_rows,
            )
    else:
        all_rejected = True
        best_err = None
        for _ in range(n_targets):
            shift = 0.1 + 0.8 * float(rng.uniform())
            target = FiberedPoint(
                np.array(start.base, dtype=float), (start.theta + shift) % 1.0
            )
            try:
                build_su_path(F, start, target, tol=tol)
                all_rejected = False
                status = "reached (unexpected)"
                err = 0.0
            except NotAccessibleNumerically as e:
                status = "not-accessible"
                err = e.achieved_error if e.achieved_error is not None else ""
            rows.append(
                tuple(target.base) + ("",) * (2 - d) + (target.theta, err, "", "", "", status)
            )
            if isinstance(err, float):
                best_err = err if best_err is None else min(best_err, err)
        checks.append(
            check_flag(
                "all fiber-shifted targets rejected", all_rejected, "thresholds.supath_expect"
            )
        )
    rep.write_csv(
        "supath.csv",
        (
            "target_x",
            "target_y",
            "target_theta",
            "fiber_error",
            "base_error",
            "legs",
            "verify_residual",
            "status",
        ),
        rows,
    )
    rep.add_verdict("supath", checks)


def run_minimality(cfg, rep):
    F = cfg.F
    anchor = cfg.exp_point("minimality_anchor")
    L = cfg.exp_float("minimality_arc_length")
    grid = cfg.exp_int("minimality_grid")
    radius = leaf_density_radius(F, anchor, L, grid=grid)
    rep.write_csv(
        "minimality.csv", ("arc_length", "grid", "covering_radius"), [(L, grid, radius)]
    )
    checks = []
    _maybe(checks, "le", "leaf covering radius", radius, cfg, "radius_max")
    _maybe(checks, "ge", "leaf covering radius", radius, cfg, "radius_min")
    rep.add_verdict("minimality", checks)

    ts = np.arange(-100.0, 100.0, 0.02)
    bases, thetas = leaf_samples(F, anchor, ts)
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.plot(bases[:, 0], thetas, ",", alpha=0.5)
    ax.set_xlabel("x")
    ax.set_ylabel("theta")
    ax.set_title("leaf sample, base x vs fiber")
    fig.tight_layout()
    rep.save_figure(fig, "minimality.png")


def run_birkhoff(cfg, rep):
    F = cfg.F
    obs = get_observable(cfg.exp_str("birkhoff_observable"))
    starts = cfg.exp_int("birkhoff_starts")
    N = cfg.exp_int("birkhoff_n")
    report = birkhoff_dispersion(F, obs, starts, N, seed=cfg.seed)
    d = F.base_map.dim
    rows = []
    for p, avg in zip(report.starts, report.averages):
        rows.append(
            (p[0], p[1] if d == 2 else "", p[-1], N, avg)
        )
    rep.write_csv(
        "birkhoff.csv", ("start_x", "start_y", "start_theta", "N", "average"), rows
    )
    checks = []
    _maybe(checks, "le", "dispersion", report.dispersion, cfg, "dispersion_max")
    _maybe(checks, "ge", "dispersion", report.dispersion, cfg, "dispersion_min")
    rep.add_verdict("birkhoff", checks)

    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    ax.hist(report.averages, bins=25)
    ax.set_xlabel("time average of %s" % obs.name)
    ax.set_ylabel("starts")
    ax.set_title("Birkhoff averages, N=%d, dispersion=%.3g" % (N, report.dispersion))
    fig.tight_layout()
    rep.save_figure(fig, "birkhoff.png")


def run_transitivity(cfg, rep):
    F = cfg.F
    center = cfg.exp_point("transitivity_center")
    report = box_transitivity(
        F,
        center,
        cfg.exp_float("transitivity_epsilon"),
        cfg.exp_int("transitivity_grid"),
        cfg.exp_int("transitivity_n"),
        cfg.exp_int("transitivity_cloud"),
        seed=cfg.seed,
    )
    rep.write_csv(
        "transitivity.csv", ("N", "fraction"), [(n, f) for n, f in report.history]
    )
    checks = []
    _maybe(checks, "ge", "visited fraction", report.fraction, cfg, "fraction_min")
    _maybe(checks, "le", "visited fraction", report.fraction, cfg, "fraction_max")
    rep.add_verdict("transitivity", checks)

    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    ns = [n for n, _ in report.history]
    fs = [f for _, f in report.history]
    ax.semilogx([max(n, 1) for n in ns], fs, "o-")
    ax.set_xlabel("iterations")
    ax.set_ylabel("fraction of boxes visited")
    ax.set_ylim(0, 1.05)
    ax.set_title("box coverage, G=%d" % report.grid)
    fig.tight_layout()
    rep.save_figure(fig, "transitivity.png")


def run_srb(cfg, rep):
    F = cfg.F
    anchor = cfg.exp_point("srb_anchor")
    depth = cfg.exp_int("preorbit_depth")
    half = cfg.exp_float("srb_half_length")
    points = cfg.exp_int("srb_points")
    policy = default_policy(F)
    pre = sample_preorbit(F, anchor, depth, policy)
    dens = srb_density(F, pre, half, points)
    rows = list(zip(dens.ts, dens.delta, dens.rho))
    rep.write_csv("srb.csv", ("t", "delta_u", "rho"), rows)

    identity, _ = srb_delta_u(F, pre, pre, dens.K)
    eig = F.base_map.eigen
    q1 = FiberedPoint((np.asarray(anchor.base, float) + 0.5 * half * eig.v_u) % 1.0, anchor.theta)
    q2 = FiberedPoint((np.asarray(anchor.base, float) - 0.7 * half * eig.v_u) % 1.0, anchor.theta)
    pre_y = shadow_preorbit(F, pre, q1)
    pre_z = shadow_preorbit(F, pre, q2)
    d_xy, _ = srb_delta_u(F, pre, pre_y, dens.K)
    d_yz, _ = srb_delta_u(F, pre_y, pre_z, dens.K)
    d_xz, _ = srb_delta_u(F, pre, pre_z, dens.K)
    cocycle_dev = abs(d_xy * d_yz - d_xz)
    mass_dev = abs(dens.mass() - 1.0)

    tol = cfg.threshold("srb_tol")
    checks = [
        check_le("self ratio deviation", abs(identity - 1.0), tol, "thresholds.srb_tol"),
        check_le("cocycle identity deviation", cocycle_dev, tol, "thresholds.srb_tol"),
        check_le("density mass deviation", mass_dev, tol, "thresholds.srb_tol"),
    ]
    if F.bump is None:
        checks.append(
            check_le(
                "uniformity deviation",
                float(np.max(np.abs(dens.delta - 1.0))),
                tol,
                "thresholds.srb_tol",
            )
        )
    rep.add_verdict("srb", checks)

    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    ax.plot(dens.ts, dens.rho, "-")
    ax.axhline(1.0 / (2 * half), color="k", lw=0.8, ls="--")
    ax.set_xlabel("leaf parameter t")
    ax.set_ylabel("density")
    ax.set_title("leafwise density")
    fig.tight_layout()
    rep.save_figure(fig, "srb.png")


def run_volume(cfg, rep):
    F = cfg.F
    tol = cfg.threshold("volume_tol")
    cert = volume_preservation_certificate(
        F, samples=cfg.exp_int("volume_samples"), seed=cfg.seed, tol=tol
    )
    rep.write_csv(
        "volume.csv",
        ("samples", "max_deviation", "passed"),
        [(cert.samples, cert.max_deviation, cert.passed)],
    )
    checks = [
        check_le("max jacobian sum deviation", cert.max_deviation, tol, "thresholds.volume_tol")
    ]
    rep.add_verdict("volume-check", checks)


RUNNERS = {
    "exponents": run_exponents,
    "bundles": run_bundles,
    "spread": run_spread,
    "holonomy": run_holonomy,
    "supath": run_supath,
    "minimality": run_minimality,
    "birkhoff": run_birkhoff,
    "transitivity": run_transitivity,
    "srb": run_srb,
    "volume-check": run_volume,
}


def _apply_thread_env():
    n = os.environ.get("SKEWLAB_THREADS")
    if not n:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = n


def main(argv=None):
    _apply_thread_env()
    parser = argparse.ArgumentParser(
        prog="skewlab",
        description="diagnostics for circle extensions of hyperbolic base maps",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS + ["all"])
    parser.add_argument("--config", required=True, help="path to a .cfg file")
    parser.add_argument("--out", default="out", help="output directory")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except (ParseError, ValidationError) as e:
        print("config error: %s" % e, file=sys.stderr)
        return 2

    rep = RunReporter(args.out)
    todo = SUBCOMMANDS if args.subcommand == "all" else [args.subcommand]
    try:
        for sub in todo:
            RUNNERS[sub](cfg, rep)
    except SkewlabError as e:
        rep.write_manifest(cfg.echo_lines(), __version__, failed_error=str(e))
        print("run failed: %s" % e, file=sys.stderr)
        return 2
    rep.write_manifest(cfg.echo_lines(), __version__)
    for sub, ok, _ in rep.verdicts:
        print("%s %s" % ("PASS" if ok else "FAIL", sub))
    return 0 if rep.all_passed() else 1


if __name__ == "__main__":
    sys.exit(main())
